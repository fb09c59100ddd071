"""Posterior scoring of a semantic world against a classified map.

The log-likelihood is a function of integer statistics only: the 3x3 table
of (predicted state, observed state) cell counts and the total number of
surplus unit memberships. Scores are therefore bit-reproducible and can be
updated incrementally by adding count deltas over a changed window.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import mln
from .errors import GeometryError
from .gridmap import ClassifyThresholds
from .world import (
    RelationParams,
    UnitType,
    check_bounds,
    neighbour_walls,
    rasterize_window,
    relations_of,
)

DEFAULT_LOOKUP = ((0.8, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8))


@dataclass(frozen=True, eq=False)
class LookupTable:
    """p(observed map state | predicted world state), rows = world state."""

    matrix: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_LOOKUP))

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("lookup table must be 3x3")
        if (m <= 0).any() or (m > 1).any():
            raise ValueError("lookup entries must lie in (0, 1]")
        if not np.allclose(m.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError("lookup rows must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return isinstance(other, LookupTable) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True)
class ScoringParams:
    psi: float = 0.5
    lookup: LookupTable = field(default_factory=LookupTable)
    gaussian_sigma: float = 5.0
    theta_threshold: float = 0.5
    classify: ClassifyThresholds = field(default_factory=ClassifyThresholds)
    wall_thickness: int = 2
    relation: RelationParams = field(default_factory=RelationParams)
    kb_weights: tuple = (2.0, 2.0, 2.0, 2.0)
    kb_formulas: tuple = None
    squared_distance: bool = False

    def __post_init__(self):
        if not 0.0 < self.psi < 1.0:
            raise ValueError(f"psi must lie in (0, 1), got {self.psi}")
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive")
        if not 0.0 < self.theta_threshold < 1.0:
            raise ValueError("theta_threshold must lie in (0, 1)")
        if self.relation.wall_thickness_cells != self.wall_thickness:
            object.__setattr__(
                self,
                "relation",
                RelationParams(self.relation.dilation_radius, self.relation.overlap_min_cells, self.wall_thickness),
            )

    def formulas(self):
        if self.kb_formulas is not None:
            return tuple(self.kb_formulas)
        return _default_kb(tuple(float(w) for w in self.kb_weights))


@functools.lru_cache(maxsize=32)
def _default_kb(weights):
    return tuple(mln.kb_same_length(*weights))


@dataclass(frozen=True, eq=False)
class ThetaMatrix:
    values: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    def pairs(self):
        p, q = np.nonzero(self.values)
        return list(zip(p.tolist(), q.tolist()))

    def __eq__(self, other):
        return isinstance(other, ThetaMatrix) and np.array_equal(self.values, other.values)


@dataclass
class PosteriorScore:
    log_likelihood: float
    log_prior: float
    log_posterior: float
    breakdown: dict


# ------------------------------------------------------------ likelihood

def pair_counts(pred, obs):
    """3x3 integer table of (predicted, observed) state counts, flattened."""
    return np.bincount(pred.ravel().astype(np.int64) * 3 + obs.ravel(), minlength=9)


def surplus_memberships(sigma):
    return int(np.maximum(sigma.astype(np.int64) - 1, 0).sum())


def window_stats(units, doors, t, map_cells, window):
    """Count statistics of the cells inside ``window``."""
    x0, y0, x1, y1 = window
    states, sigma = rasterize_window(units, doors, t, window)
    return pair_counts(states, map_cells[y0:y1, x0:x1]), surplus_memberships(sigma)


@functools.lru_cache(maxsize=64)
def _log_groups(lookup):
    logs = np.log(lookup.matrix).ravel()
    values = sorted(set(logs.tolist()))
    return tuple(values), tuple(tuple(np.nonzero(logs == v)[0].tolist()) for v in values)


def log_likelihood_from_stats(counts, surplus, params):
    values, groups = _log_groups(params.lookup)
    terms = [v * int(sum(int(counts[i]) for i in g)) for v, g in zip(values, groups)]
    terms.append(surplus * math.log(params.psi))
    return math.fsum(terms)


def _check_dims(map_c, world):
    check_bounds(world, map_c.dims)


def likelihood_stats(map_c, world, params):
    _check_dims(map_c, world)
    return window_stats(world.units, world.doors, params.wall_thickness, map_c.cells, (0, 0, map_c.width, map_c.height))


def likelihood_log(map_c, world, params=ScoringParams()):
    counts, surplus = likelihood_stats(map_c, world, params)
    return log_likelihood_from_stats(counts, surplus, params)


# ----------------------------------------------------------------- theta

@functools.lru_cache(maxsize=16)
def _pair_engine(formulas):
    if mln.is_pair_local(formulas, mln.SAME_LENGTH_PREDICATES):
        return mln.PairMarginals(formulas)
    return None


def _truth_fn(world, relations):
    types = world.types
    adj = relations.adjacent

    def truth(name, args):
        if name == "Room":
            return types[args[0]] is UnitType.ROOM
        if name == "Corr":
            return types[args[0]] is UnitType.CORRIDOR
        if name == "Hall":
            return types[args[0]] is UnitType.HALL
        if name == "Adj":
            return bool(adj[args])
        if name == "Irr":
            return not adj[args]
        raise KeyError(name)

    return truth


def sale_marginals(world, params=ScoringParams()):
    """p(SaLe(p, q) | R, T) as an n x n array."""
    n = len(world.units)
    relations = relations_of(world, params.relation)
    formulas = params.formulas()
    truth = _truth_fn(world, relations)
    out = np.zeros((n, n))
    engine = _pair_engine(formulas)
    if engine is not None:
        ab, ba = mln.GroundAtom("SaLe", ("A", "B")), mln.GroundAtom("SaLe", ("B", "A"))
        aa = mln.GroundAtom("SaLe", ("A", "A"))
        # the pair signature depends only on the two types and the four
        # relation entries among p and q, so memoize on those
        types = world.types
        adj = relations.adjacent
        local = {}
        for p in range(n):
            for q in range(p, n):
                key = (types[p], types[q], adj[p, q], adj[q, p], adj[p, p], adj[q, q])
                if key not in local:
                    local[key] = engine.query(engine.signature(truth, p, q))
                m = local[key]
                if p == q:
                    out[p, p] = m[aa]
                else:
                    out[p, q], out[q, p] = m[ab], m[ba]
        return out
    consts = [str(i) for i in range(n)]
    evidence = {}
    for d in mln.SAME_LENGTH_PREDICATES:
        if d.kind is mln.PredicateKind.EVIDENCE:
            for args in np.ndindex(*([n] * d.arity)):
                if truth(d.name, tuple(args)):
                    evidence[mln.GroundAtom(d.name, tuple(str(a) for a in args))] = True
    result = mln.infer_exact(mln.ground(formulas, consts, evidence))
    for p in range(n):
        for q in range(n):
            out[p, q] = result.marginals[mln.GroundAtom("SaLe", (str(p), str(q)))]
    return out


def compute_theta(world, params=ScoringParams()):
    def build():
        marg = sale_marginals(world, params)
        vals = marg > params.theta_threshold
        np.fill_diagonal(vals, False)
        return ThetaMatrix(vals)

    return world.cached(("theta", params), build)


# ----------------------------------------------------------------- prior

def pair_log_b(world, p, q, params):
    la, lb = neighbour_walls(world.units[p], world.units[q])
    d = abs(la - lb)
    dist = d * d if params.squared_distance else d
    return d, -dist / (2.0 * params.gaussian_sigma ** 2)


def prior_terms(world, theta, params):
    if theta.n != len(world.units):
        raise GeometryError(f"theta is {theta.n}x{theta.n} but world has {len(world.units)} units")
    return [(p, q) + pair_log_b(world, p, q, params) for p, q in theta.pairs()]


def prior_log(world, theta, params=ScoringParams()):
    """Log of the product of b(u_p, u_q) over ordered pairs; the uniform
    p(T, R) factor is a constant and omitted."""
    return math.fsum(t[3] for t in prior_terms(world, theta, params))


# ------------------------------------------------------------- posterior

def posterior_from_stats(world, counts, surplus, params):
    ll = log_likelihood_from_stats(counts, surplus, params)
    theta = compute_theta(world, params)
    terms = prior_terms(world, theta, params)
    lp = math.fsum(t[3] for t in terms)
    breakdown = {
        "overlap_cells": surplus,
        "overlap_penalty": surplus * math.log(params.psi),
        "counts": [int(c) for c in counts],
        "per_pair_b": [{"pair": [p, q], "d": d, "log_b": lb} for p, q, d, lb in terms],
    }
    return PosteriorScore(ll, lp, ll + lp, breakdown)


def posterior_log(map_c, world, params=ScoringParams()):
    counts, surplus = likelihood_stats(map_c, world, params)
    return posterior_from_stats(world, counts, surplus, params)


def cell_prediction_rate(map_c, world, params=ScoringParams()):
    counts, _ = likelihood_stats(map_c, world, params)
    return float(counts[0] + counts[4] + counts[8]) / float(map_c.width * map_c.height)


def score_report(map_c, world, params=ScoringParams()):
    counts, surplus = likelihood_stats(map_c, world, params)
    s = posterior_from_stats(world, counts, surplus, params)
    k = float(counts[0] + counts[4] + counts[8]) / float(map_c.width * map_c.height)
    type_counts = {t.value: 0 for t in UnitType}
    for t in world.types:
        type_counts[t.value] += 1
    return {
        "log_likelihood": s.log_likelihood,
        "log_prior": s.log_prior,
        "log_posterior": s.log_posterior,
        "K": k,
        "per_pair_b": [
            {"pair": b["pair"], "d": b["d"], "b": math.exp(b["log_b"])} for b in s.breakdown["per_pair_b"]
        ],
        "overlap_cells": surplus,
        "unit_count": len(world.units),
        "type_counts": type_counts,
    }
