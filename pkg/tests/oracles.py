"""Independent reference implementations used as test oracles.

Each oracle recomputes a quantity from its definition with the most direct
method available (exhaustive enumeration, per-cell loops, explicit masks)
and shares no code path with the package beyond its plain data types.
"""

import itertools
import math

import numpy as np

from semloft import mln

FREE, UNKNOWN, OCCUPIED = 0, 1, 2


# ------------------------------------------------------------------- MLN

def _truth(node, binding, value):
    if isinstance(node, mln.Atom):
        args = tuple(binding[a] if mln.is_variable(a) else a for a in node.args)
        return value(mln.GroundAtom(node.predicate, args))
    if isinstance(node, mln.Not):
        return ~_truth(node.operand, binding, value)
    if isinstance(node, mln.And):
        out = None
        for o in node.operands:
            v = _truth(o, binding, value)
            out = v if out is None else out & v
        return out
    if isinstance(node, mln.Or):
        out = None
        for o in node.operands:
            v = _truth(o, binding, value)
            out = v if out is None else out | v
        return out
    if isinstance(node, mln.Implies):
        return ~_truth(node.antecedent, binding, value) | _truth(node.consequent, binding, value)
    raise TypeError(node)


def brute_force_marginals(formulas, constants, evidence, predicates):
    """Query marginals by enumerating every joint assignment of all query
    ground atoms at once. Returns ``None`` when no assignment survives the
    hard formulas."""
    constants = tuple(str(c) for c in constants)
    query = [
        mln.GroundAtom(p.name, args)
        for p in predicates
        if p.kind is mln.PredicateKind.QUERY
        for args in itertools.product(constants, repeat=p.arity)
    ]
    n = len(query)
    states = np.arange(1 << n, dtype=np.int64)
    cols = {a: ((states >> i) & 1).astype(bool) for i, a in enumerate(query)}
    ones = np.ones(states.size, dtype=bool)

    def value(ga):
        if ga in cols:
            return cols[ga]
        return ones if evidence.get(ga, False) else ~ones

    feasible = ones.copy()
    logw = np.zeros(states.size)
    for f in formulas:
        for values in itertools.product(constants, repeat=len(f.variables)):
            sat = _truth(f.clause, dict(zip(f.variables, values)), value)
            if f.weight == math.inf:
                feasible &= sat
            else:
                logw += f.weight * sat
    if not feasible.any():
        return None
    logw[~feasible] = -np.inf
    w = np.exp(logw - logw.max())
    z = w.sum()
    return {a: float(w[cols[a]].sum() / z) for a in query}


def random_kb(rng, predicates, n_formulas, hard_prob=0.25):
    """Random clauses over ``predicates`` with variables x, y."""
    def atom():
        p = predicates[rng.integers(len(predicates))]
        return mln.Atom(p.name, tuple("xy"[rng.integers(2)] for _ in range(p.arity)))

    def literal():
        a = atom()
        return mln.Not(a) if rng.random() < 0.4 else a

    def clause():
        r = rng.random()
        k = int(rng.integers(1, 4))
        parts = tuple(literal() for _ in range(k))
        if r < 0.4 or k == 1:
            body = parts[:-1] if k > 1 else (literal(),)
            ante = body[0] if len(body) == 1 else mln.And(body)
            return mln.Implies(ante, parts[-1])
        if r < 0.7:
            return mln.Or(parts)
        return mln.And(parts)

    out = []
    for _ in range(n_formulas):
        w = math.inf if rng.random() < hard_prob else float(rng.uniform(-3, 3))
        out.append(mln.Formula(w, clause()))
    return out


# ---------------------------------------------------------------- raster

def raster_cells(units, doors, t, dims):
    """Predicted state per cell, decided one cell at a time."""
    w, h = dims
    out = np.full((h, w), UNKNOWN, dtype=np.int8)
    for y in range(h):
        for x in range(w):
            in_door = False
            for d in doors:
                if d.axis == "v":
                    in_door |= d.line - t <= x < d.line + t and d.start <= y < d.end
                else:
                    in_door |= d.line - t <= y < d.line + t and d.start <= x < d.end
            in_wall = in_free = False
            for u in units:
                inside = u.x0 <= x < u.x1 and u.y0 <= y < u.y1
                if not inside:
                    continue
                core = u.x0 + t <= x < u.x1 - t and u.y0 + t <= y < u.y1 - t
                in_wall |= not core
                in_free |= core
            if in_door or (in_free and not in_wall):
                out[y, x] = FREE
            elif in_wall:
                out[y, x] = OCCUPIED
    return out


def coverage(units, dims):
    w, h = dims
    sigma = np.zeros((h, w), dtype=np.int64)
    for u in units:
        sigma[u.y0 : u.y1, u.x0 : u.x1] += 1
    return sigma


def log_likelihood(pred, obs, sigma, lookup, psi):
    """Per-cell sum of log lookup entries plus overlap penalties."""
    total = []
    for p, o, s in zip(pred.ravel(), obs.ravel(), sigma.ravel()):
        total.append(math.log(lookup[p][o]))
        if s > 1:
            total.append((s - 1) * math.log(psi))
    return math.fsum(total)


# ------------------------------------------------------------- relations

def wall_mask(u, t, dims, pad):
    w, h = dims
    m = np.zeros((h + 2 * pad, w + 2 * pad), dtype=bool)
    m[u.y0 + pad : u.y1 + pad, u.x0 + pad : u.x1 + pad] = True
    m[u.y0 + pad + t : u.y1 + pad - t, u.x0 + pad + t : u.x1 + pad - t] = False
    return m


def dilate(mask, r):
    """Square (Chebyshev) dilation by shifting."""
    out = mask.copy()
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            out |= np.roll(np.roll(mask, dy, axis=0), dx, axis=1)
    return out


def adjacency(units, radius, overlap_min, t, dims):
    pad = radius + 2
    masks = [dilate(wall_mask(u, t, dims, pad), radius) for u in units]
    n = len(units)
    adj = np.zeros((n, n), dtype=bool)
    for p in range(n):
        for q in range(p + 1, n):
            if int((masks[p] & masks[q]).sum()) >= overlap_min:
                adj[p, q] = adj[q, p] = True
    return adj


RANDOM_PREDICATES = (
    mln.PredicateDecl("E1", 1, mln.PredicateKind.EVIDENCE),
    mln.PredicateDecl("E2", 2, mln.PredicateKind.EVIDENCE),
    mln.PredicateDecl("Q1", 1, mln.PredicateKind.QUERY),
    mln.PredicateDecl("Q2", 2, mln.PredicateKind.QUERY),
    mln.PredicateDecl("Q3", 1, mln.PredicateKind.QUERY),
)


def random_case(rng):
    """A random knowledge base with at most 15 free ground atoms."""
    n_const = int(rng.integers(1, 4))
    constants = tuple(f"c{i}" for i in range(n_const))
    formulas = random_kb(rng, RANDOM_PREDICATES, int(rng.integers(1, 7)))
    evidence = {}
    for p in RANDOM_PREDICATES:
        if p.kind is mln.PredicateKind.EVIDENCE:
            for args in itertools.product(constants, repeat=p.arity):
                if rng.random() < 0.5:
                    evidence[mln.GroundAtom(p.name, args)] = True
    return formulas, constants, evidence


# ------------------------------------------------------------------- PNG

def png_chunks(data):
    """``(tag, payload)`` pairs, verifying every CRC."""
    import struct
    import zlib

    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos, out = 8, []
    while pos < len(data):
        (n,) = struct.unpack(">I", data[pos : pos + 4])
        tag, body = data[pos + 4 : pos + 8], data[pos + 8 : pos + 8 + n]
        (crc,) = struct.unpack(">I", data[pos + 8 + n : pos + 12 + n])
        assert crc == zlib.crc32(tag + body) & 0xFFFFFFFF
        out.append((tag, body))
        pos += 12 + n
    return out


def decode_indexed_png(data):
    """Palette and index array of an 8-bit, unfiltered, indexed PNG."""
    import struct
    import zlib

    chunks = dict(png_chunks(data))
    w, h, depth, colour = struct.unpack(">IIBB", chunks[b"IHDR"][:10])
    assert (depth, colour) == (8, 3)
    raw = np.frombuffer(zlib.decompress(chunks[b"IDAT"]), dtype=np.uint8).reshape(h, w + 1)
    assert (raw[:, 0] == 0).all()
    plte = np.frombuffer(chunks[b"PLTE"], dtype=np.uint8).reshape(-1, 3)
    return plte, raw[:, 1:].copy()
