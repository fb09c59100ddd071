"""Metropolis-Hastings chain over semantic worlds."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..detectors import DetectorParams, detect_all
from ..scoring import ScoringParams
from ..world import UnitClassThresholds, empty_world
from .kernels import (
    DEFAULT_WEIGHTS,
    KERNELS,
    Kernel,
    _rebuild,
    _uniform_rect,
    door_placements,
    door_triples,
    eligible_candidates,
    propose,
    select_kernel,
)
from .state import ChainContext, KernelParams, full_state, update_state

INIT_MODES = ("random", "detected")


@dataclass(frozen=True)
class Annealing:
    initial: float = 5.0
    decay: float = 0.999
    floor: float = 1.0

    def __post_init__(self):
        if self.floor < 1.0:
            raise ValueError("annealing floor must be >= 1")
        if self.initial < self.floor:
            raise ValueError("initial temperature must be >= floor")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")

    def temperature(self, iteration):
        return max(self.floor, self.initial * self.decay ** iteration)


@dataclass(frozen=True)
class ChainConfig:
    kernel_weights: tuple = DEFAULT_WEIGHTS
    max_iterations: int = 20000
    burn_in: int = 0
    seed: int = 0
    init_mode: str = "detected"
    annealing: Annealing = None
    record_every: int = 100

    def __post_init__(self):
        w = tuple(float(x) for x in self.kernel_weights)
        if len(w) != len(KERNELS) or any(x < 0 or not math.isfinite(x) for x in w):
            raise ValueError(f"kernel_weights needs {len(KERNELS)} finite nonnegative values")
        if sum(w) <= 0:
            raise ValueError("kernel_weights must not all be zero")
        object.__setattr__(self, "kernel_weights", w)
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.max_iterations and not 0 <= self.burn_in < self.max_iterations:
            raise ValueError("burn_in must lie in [0, max_iterations)")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def temperature(self, iteration):
        return 1.0 if self.annealing is None else self.annealing.temperature(iteration)


@dataclass(frozen=True)
class Sample:
    iteration: int
    log_posterior: float
    best_score: float
    world: object


@dataclass
class ChainTrace:
    samples: list = field(default_factory=list)
    best_world: object = None
    best_score: float = -math.inf
    acceptance_counts: dict = field(default_factory=dict)
    seed: int = 0

    def acceptance_rates(self):
        return {k: (a / p if p else 0.0) for k, (p, a) in self.acceptance_counts.items()}


def acceptance_probability(delta_log_post, log_q_forward, log_q_reverse, temperature=1.0):
    """min(1, exp(Δ/T + log Q(W|W') − log Q(W'|W)))."""
    x = delta_log_post / temperature + log_q_reverse - log_q_forward
    if math.isnan(x):
        return 0.0
    return 1.0 if x >= 0 else math.exp(x)


def step(state, ctx, config, rng, temperature=1.0, state_filter=None):
    """One Metropolis-Hastings transition from ``state``.

    Returns ``(new_state, accepted, diagnostics)``.
    """
    kernel = select_kernel(ctx, state.world, config.kernel_weights, rng)
    prop = propose(ctx, state.world, kernel, config.kernel_weights, rng)
    diag = {"kernel": kernel.value, "valid": prop is not None, "acceptance": 0.0}
    if prop is None or (state_filter is not None and not state_filter(prop.new_world)):
        diag["valid"] = False
        return state, False, diag
    new = update_state(ctx, state, prop.new_world)
    lam = acceptance_probability(new.log_posterior - state.log_posterior, prop.log_q_forward, prop.log_q_reverse, temperature)
    diag["acceptance"] = lam
    if rng.random() < lam:
        return new, True, diag
    return state, False, diag


# ------------------------------------------------------------ contexts

def build_context(map_c, params=ScoringParams(), detector=DetectorParams(), kernel=KernelParams(), area_factor=2.5):
    """Run the detectors on ``map_c`` and fix the unit-type thresholds."""
    det = detect_all(map_c, detector, params.wall_thickness, kernel.min_side)
    thresholds = UnitClassThresholds.adaptive([c.unit.area_cells for c in det.units], factor=area_factor)
    return ChainContext(map_c, params, det, thresholds, kernel)


# -------------------------------------------------------- initialization

def _try_add(ctx, state, world_fn):
    world = world_fn()
    if world is None:
        return state
    trial = update_state(ctx, state, world)
    return trial if trial.log_posterior > state.log_posterior else state


def _added_area(new, old):
    return sum(u.area_cells for u in set(new.units) - set(old.units))


def detected_init(ctx):
    """Greedy start: repeatedly add the candidate with the largest
    likelihood gain per cell that also raises the posterior; then doors by
    descending gap support."""
    state = full_state(ctx, empty_world())
    while True:
        units, _ = eligible_candidates(ctx, state.world)
        w = state.world
        trials = []
        for u in units:
            new = _rebuild(ctx, w, w.units + (u,), door_triples(w))
            if new is not None:
                trials.append(update_state(ctx, state, new))
        trials.sort(key=lambda s: (-(s.log_likelihood - state.log_likelihood) / _added_area(s.world, w), s.world.key()))
        better = next((s for s in trials if s.log_posterior > state.log_posterior), None)
        if better is None:
            break
        state = better
    changed = True
    while changed:
        changed = False
        options = door_placements(ctx, state.world)
        for triple in sorted(options, key=lambda k: (-options[k], k)):
            w = state.world
            new = _try_add(ctx, state, lambda: _rebuild(ctx, w, w.units, door_triples(w) + [triple]))
            if new is not state:
                state, changed = new, True
                break
    return state


def random_init(ctx, rng):
    """One to three units drawn from the candidates (or uniformly when
    there are none)."""
    world = empty_world()
    for _ in range(int(rng.integers(1, 4))):
        units, _ = eligible_candidates(ctx, world)
        unit = units[int(rng.integers(len(units)))] if units else _uniform_rect(ctx, rng)
        new = _rebuild(ctx, world, world.units + (unit,), door_triples(world))
        if new is not None:
            world = new
    return full_state(ctx, world)


# ------------------------------------------------------------------ run

def run(ctx, config=ChainConfig(), init_world=None, state_filter=None, on_sample=None):
    """Run one chain and return its trace; the best world is tracked over
    every visited state."""
    rng = np.random.default_rng(config.seed)
    if init_world is not None:
        state = full_state(ctx, init_world)
    elif config.init_mode == "detected":
        state = detected_init(ctx)
    else:
        state = random_init(ctx, rng)
    trace = ChainTrace(seed=config.seed)
    trace.acceptance_counts = {k.value: [0, 0] for k in Kernel}
    trace.best_world, trace.best_score = state.world, state.log_posterior
    for it in range(config.max_iterations):
        state, accepted, diag = step(state, ctx, config, rng, config.temperature(it), state_filter)
        counts = trace.acceptance_counts[diag["kernel"]]
        counts[0] += 1
        if accepted:
            counts[1] += 1
            if state.log_posterior > trace.best_score:
                trace.best_world, trace.best_score = state.world, state.log_posterior
        if it >= config.burn_in and (it - config.burn_in) % config.record_every == 0:
            s = Sample(it, state.log_posterior, trace.best_score, state.world)
            trace.samples.append(s)
            if on_sample is not None:
                on_sample(s)
    return trace


def _run_one(args):
    ctx, config = args
    return run(ctx, config)


def run_chains(ctx, config, n_chains=1, workers=None):
    """Independent chains with seeds ``seed, seed+1, ...``; returns the
    traces in seed order and the index of the best one (ties go to the
    lowest seed)."""
    configs = [ChainConfig(**{**config.__dict__, "seed": config.seed + i}) for i in range(n_chains)]
    if n_chains > 1 and (workers or 1) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_one, [(ctx, c) for c in configs]))
    else:
        traces = [run(ctx, c) for c in configs]
    best = max(range(n_chains), key=lambda i: (traces[i].best_score, -i))
    return traces, best
