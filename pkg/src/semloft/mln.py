"""A small Markov logic network engine.

Formulas are quantifier-free clauses over predicate atoms whose arguments
are variables (lowercase identifiers, implicitly universally quantified) or
constants. Grounding substitutes evidence (closed world for evidence
predicates), drops ground formulas that evidence fully decides, and splits
the remaining free atoms into independent components. Inference enumerates
every truth assignment of each component exactly.
"""

from __future__ import annotations

import enum
import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import CapacityError, ConfigError, FormatError, InconsistentEvidenceError, ZeroMassError

INF = math.inf


class PredicateKind(enum.Enum):
    EVIDENCE = "evidence"
    QUERY = "query"


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arity: int
    kind: PredicateKind

    def __post_init__(self):
        if self.arity < 1:
            raise ConfigError(f"predicate {self.name} needs a positive arity")


# ------------------------------------------------------------------ syntax

@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple

    def __str__(self):
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class Not:
    operand: object

    def __str__(self):
        return f"!{_wrap(self.operand)}"


@dataclass(frozen=True)
class And:
    operands: tuple

    def __str__(self):
        return " & ".join(_wrap(o) for o in self.operands)


@dataclass(frozen=True)
class Or:
    operands: tuple

    def __str__(self):
        return " | ".join(_wrap(o) for o in self.operands)


@dataclass(frozen=True)
class Implies:
    antecedent: object
    consequent: object

    def __str__(self):
        return f"{_wrap(self.antecedent)} -> {_wrap(self.consequent)}"


def _wrap(node):
    return str(node) if isinstance(node, (Atom, Not)) else f"({node})"


def is_variable(arg):
    return arg[:1].islower()


def atoms_of(node):
    if isinstance(node, Atom):
        yield node
    elif isinstance(node, Not):
        yield from atoms_of(node.operand)
    elif isinstance(node, (And, Or)):
        for o in node.operands:
            yield from atoms_of(o)
    elif isinstance(node, Implies):
        yield from atoms_of(node.antecedent)
        yield from atoms_of(node.consequent)
    else:
        raise FormatError(f"unknown clause node {node!r}")


@dataclass(frozen=True)
class Formula:
    weight: float
    clause: object

    @property
    def is_hard(self):
        return self.weight == INF

    @property
    def variables(self):
        seen = []
        for a in atoms_of(self.clause):
            for arg in a.args:
                if is_variable(arg) and arg not in seen:
                    seen.append(arg)
        return tuple(seen)

    def __str__(self):
        w = "inf" if self.is_hard else repr(float(self.weight))
        return f"{w} | {self.clause}"


_TOKEN = re.compile(r"\s*(->|=>|→|[A-Za-z_][A-Za-z0-9_]*|\d+|[()!~¬&^∧|∨,])")


def parse_clause(text):
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormatError(f"cannot parse clause {text!r} near position {pos}")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    tokens.append(None)
    i = 0

    def peek():
        return tokens[i]

    def take(expected=None):
        nonlocal i
        tok = tokens[i]
        if expected is not None and tok != expected:
            raise FormatError(f"expected {expected!r} but found {tok!r} in {text!r}")
        i += 1
        return tok

    def implication():
        left = disjunction()
        if peek() in ("->", "=>", "→"):
            take()
            return Implies(left, implication())
        return left

    def disjunction():
        ops = [conjunction()]
        while peek() in ("|", "∨"):
            take()
            ops.append(conjunction())
        return ops[0] if len(ops) == 1 else Or(tuple(ops))

    def conjunction():
        ops = [unary()]
        while peek() in ("&", "^", "∧"):
            take()
            ops.append(unary())
        return ops[0] if len(ops) == 1 else And(tuple(ops))

    def unary():
        tok = peek()
        if tok in ("!", "~", "¬"):
            take()
            return Not(unary())
        if tok == "(":
            take()
            node = implication()
            take(")")
            return node
        if tok is None or not re.match(r"[A-Za-z_]", tok):
            raise FormatError(f"expected an atom but found {tok!r} in {text!r}")
        name = take()
        take("(")
        args = [take()]
        while peek() == ",":
            take()
            args.append(take())
        take(")")
        return Atom(name, tuple(args))

    node = implication()
    if peek() is not None:
        raise FormatError(f"trailing input {peek()!r} in clause {text!r}")
    return node


def parse_kb(text):
    """Parse ``weight | clause`` lines; ``inf`` marks a hard formula."""
    formulas = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "|" not in line:
            raise FormatError(f"line {lineno}: expected 'weight | clause'")
        w, clause = line.split("|", 1)
        w = w.strip().lower()
        try:
            weight = INF if w in ("inf", "+inf", "infinity") else float(w)
        except ValueError:
            raise FormatError(f"line {lineno}: bad weight {w!r}") from None
        if math.isnan(weight) or weight == -INF:
            raise FormatError(f"line {lineno}: weight must be finite or +inf")
        formulas.append(Formula(weight, parse_clause(clause)))
    return formulas


def format_kb(formulas):
    return "".join(f"{f}\n" for f in formulas)


# --------------------------------------------------- the same-length KB

SAME_LENGTH_PREDICATES = (
    PredicateDecl("Room", 1, PredicateKind.EVIDENCE),
    PredicateDecl("Corr", 1, PredicateKind.EVIDENCE),
    PredicateDecl("Hall", 1, PredicateKind.EVIDENCE),
    PredicateDecl("Adj", 2, PredicateKind.EVIDENCE),
    PredicateDecl("Irr", 2, PredicateKind.EVIDENCE),
    PredicateDecl("SaLe", 2, PredicateKind.QUERY),
)


def kb_same_length(room_room=2.0, room_hall=2.0, room_corridor=2.0, irrelevant=2.0):
    """Symmetry/exclusivity hard rules plus the soft same-wall-length rules."""
    return [
        Formula(INF, parse_clause("Irr(p,q) -> Irr(q,p)")),
        Formula(INF, parse_clause("Adj(p,q) -> Adj(q,p)")),
        Formula(INF, parse_clause("SaLe(p,q) -> SaLe(q,p)")),
        Formula(INF, parse_clause("Irr(p,q) -> !Adj(p,q)")),
        Formula(room_room, parse_clause("Room(p) & Room(q) & Adj(p,q) -> SaLe(p,q)")),
        Formula(room_hall, parse_clause("Room(p) & Hall(q) & Adj(p,q) -> !SaLe(p,q)")),
        Formula(room_corridor, parse_clause("Room(p) & Corr(q) & Adj(p,q) -> !SaLe(p,q)")),
        Formula(irrelevant, parse_clause("Irr(q,p) -> !SaLe(p,q)")),
    ]


# ------------------------------------------------------------- grounding

@dataclass(frozen=True)
class GroundAtom:
    predicate: str
    args: tuple

    def __str__(self):
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class GroundFormula:
    weight: float
    expr: object  # residual: ("a", id) | ("n", e) | ("&", es) | ("|", es)
    atoms: tuple
    formula_index: int
    binding: tuple


@dataclass
class GroundNetwork:
    atoms: list
    atom_index: dict
    evidence: dict
    ground_formulas: list
    components: list
    log_constant: float = 0.0
    _by_component: dict = field(default_factory=dict, repr=False)


def _simplify(node, binding, lookup):
    """Partially evaluate a clause; returns a bool or a residual expression."""
    if isinstance(node, Atom):
        args = tuple(binding.get(a, a) if is_variable(a) else a for a in node.args)
        return lookup(GroundAtom(node.predicate, args))
    if isinstance(node, Not):
        v = _simplify(node.operand, binding, lookup)
        if isinstance(v, bool):
            return not v
        return ("n", v)
    if isinstance(node, Implies):
        node = Or((Not(node.antecedent), node.consequent))
    is_and = isinstance(node, And)
    rest = []
    for o in node.operands:
        v = _simplify(o, binding, lookup)
        if isinstance(v, bool):
            if v != is_and:
                return v
            continue
        rest.append(v)
    if not rest:
        return is_and
    if len(rest) == 1:
        return rest[0]
    return ("&" if is_and else "|", tuple(rest))


def _expr_atoms(e, out):
    if e[0] == "a":
        out.add(e[1])
    elif e[0] == "n":
        _expr_atoms(e[1], out)
    else:
        for x in e[1]:
            _expr_atoms(x, out)
    return out


def _normalize_evidence(evidence):
    if isinstance(evidence, Mapping):
        return {a: bool(v) for a, v in evidence.items()}
    return {a: True for a in evidence}


def ground(formulas, constants, evidence, predicates=SAME_LENGTH_PREDICATES):
    """Ground ``formulas`` over ``constants`` with closed-world ``evidence``.

    ``evidence`` maps evidence ground atoms to truth values (or is an
    iterable of the true ones); unlisted evidence atoms are false.
    """
    decls = {p.name: p for p in predicates}
    constants = tuple(str(c) for c in constants)
    evidence = _normalize_evidence(evidence)
    for a, v in evidence.items():
        d = decls.get(a.predicate)
        if d is None or d.kind is not PredicateKind.EVIDENCE:
            raise ConfigError(f"evidence atom {a} is not an evidence predicate")
        if len(a.args) != d.arity:
            raise ConfigError(f"evidence atom {a} has wrong arity")
    for i, f in enumerate(formulas):
        for a in atoms_of(f.clause):
            d = decls.get(a.predicate)
            if d is None:
                raise ConfigError(f"formula {i + 1} uses undeclared predicate {a.predicate}")
            if len(a.args) != d.arity:
                raise ConfigError(f"formula {i + 1}: {a} does not match arity {d.arity}")

    atoms, atom_index = [], {}
    for d in predicates:
        if d.kind is PredicateKind.QUERY:
            for args in itertools.product(constants, repeat=d.arity):
                ga = GroundAtom(d.name, args)
                atom_index[ga] = len(atoms)
                atoms.append(ga)

    def lookup(ga):
        if decls[ga.predicate].kind is PredicateKind.EVIDENCE:
            return evidence.get(ga, False)
        return ("a", atom_index[ga])

    gfs = []
    log_constant = 0.0
    for fi, f in enumerate(formulas):
        variables = f.variables
        for values in itertools.product(constants, repeat=len(variables)):
            binding = dict(zip(variables, values))
            r = _simplify(f.clause, binding, lookup)
            if isinstance(r, bool):
                if not r and f.is_hard:
                    raise InconsistentEvidenceError(
                        f"evidence violates hard formula {fi + 1} ({f.clause}) under {binding}"
                    )
                if r and not f.is_hard:
                    log_constant += f.weight
                continue
            gfs.append(GroundFormula(f.weight, r, tuple(sorted(_expr_atoms(r, set()))), fi, values))

    parent = list(range(len(atoms)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gfs:
        r0 = find(g.atoms[0])
        for a in g.atoms[1:]:
            ra = find(a)
            if ra != r0:
                parent[max(ra, r0)] = min(ra, r0)
                r0 = min(ra, r0)
    groups = {}
    for a in range(len(atoms)):
        groups.setdefault(find(a), []).append(a)
    components = sorted((tuple(v) for v in groups.values()), key=lambda c: c[0])
    return GroundNetwork(atoms, atom_index, evidence, gfs, components, log_constant)


# ------------------------------------------------------------- inference

@dataclass
class QueryResult:
    marginals: dict
    log_partition: float

    def __getitem__(self, atom):
        return self.marginals[atom]


def _eval(e, cols):
    tag = e[0]
    if tag == "a":
        return cols[e[1]]
    if tag == "n":
        return ~_eval(e[1], cols)
    vals = [_eval(x, cols) for x in e[1]]
    out = vals[0].copy()
    for v in vals[1:]:
        if tag == "&":
            out &= v
        else:
            out |= v
    return out


def _relabel(e, local):
    tag = e[0]
    if tag == "a":
        return ("a", local[e[1]])
    if tag == "n":
        return ("n", _relabel(e[1], local))
    return (tag, tuple(_relabel(x, local) for x in e[1]))


def _component_marginals(atoms, formulas):
    k = len(atoms)
    local = {a: i for i, a in enumerate(atoms)}
    states = np.arange(1 << k, dtype=np.int64)
    bits = ((states[:, None] >> np.arange(k)) & 1).astype(bool)
    cols = [bits[:, i] for i in range(k)]
    feasible = np.ones(states.size, dtype=bool)
    logw = np.zeros(states.size)
    for g in formulas:
        v = _eval(_relabel(g.expr, local), cols)
        if g.weight == INF:
            feasible &= v
        elif g.weight != 0:
            logw += g.weight * v
    if not feasible.any():
        return None, None
    logw = np.where(feasible, logw, -np.inf)
    m = logw.max()
    p = np.exp(logw - m)
    z = p.sum()
    marg = (p[:, None] * bits).sum(axis=0) / z
    return np.clip(marg, 0.0, 1.0), float(m + np.log(z))


def infer_exact(network, max_enum_atoms=20):
    by_comp = {c: [] for c in network.components}
    owner = {}
    for c in network.components:
        for a in c:
            owner[a] = c
    for g in network.ground_formulas:
        by_comp[owner[g.atoms[0]]].append(g)
    for c in network.components:
        if len(c) > max_enum_atoms:
            raise CapacityError(
                f"component with {len(c)} free atoms exceeds max_enum_atoms={max_enum_atoms}"
            )
    marginals = {}
    log_z = network.log_constant
    for c in network.components:
        marg, lz = _component_marginals(c, by_comp[c])
        if marg is None:
            names = ", ".join(str(network.atoms[a]) for a in c[:6])
            raise ZeroMassError(f"every assignment of component {{{names}}} violates a hard formula")
        for a, p in zip(c, marg):
            marginals[network.atoms[a]] = float(p)
        log_z += lz
    return QueryResult(marginals, log_z)


# ------------------------------------------------- pair-local shortcut

def is_pair_local(formulas, predicates):
    """True when every ground formula couples only query atoms over one
    unordered pair of constants with distinct arguments (or one reflexive
    atom), so query marginals for a pair depend on that pair's evidence only.
    """
    kinds = {p.name: p.kind for p in predicates}
    for f in formulas:
        vs = f.variables
        if len(vs) > 2:
            return False
        for a in atoms_of(f.clause):
            if any(not is_variable(x) for x in a.args):
                return False
            if kinds.get(a.predicate) is PredicateKind.QUERY:
                if len(a.args) != 2 or len(set(a.args)) != len(vs) or len(vs) != 2:
                    return False
    return all(p.arity == 2 for p in predicates if p.kind is PredicateKind.QUERY)


class PairMarginals:
    """Memoized pairwise query marginals for a pair-local knowledge base.

    Grounds the two-constant network of each pair and caches the result by
    the pair's evidence signature.
    """

    def __init__(self, formulas, predicates=SAME_LENGTH_PREDICATES, max_enum_atoms=20):
        if not is_pair_local(formulas, predicates):
            raise ConfigError("knowledge base is not pair-local")
        self.formulas = list(formulas)
        self.predicates = tuple(predicates)
        self.max_enum_atoms = max_enum_atoms
        self._ev_atoms = [
            (d.name, args)
            for d in predicates
            if d.kind is PredicateKind.EVIDENCE
            for args in itertools.product((0, 1), repeat=d.arity)
        ]
        self._memo = {}

    def signature(self, truth, p, q):
        """``truth(name, args)`` returns evidence truth on the real constants."""
        ids = (p, q)
        return tuple(bool(truth(name, tuple(ids[i] for i in args))) for name, args in self._ev_atoms)

    def query(self, signature):
        if signature not in self._memo:
            evidence = {
                GroundAtom(name, tuple("AB"[i] for i in args)): v
                for (name, args), v in zip(self._ev_atoms, signature)
            }
            net = ground(self.formulas, ("A", "B"), evidence, self.predicates)
            self._memo[signature] = infer_exact(net, self.max_enum_atoms).marginals
        return self._memo[signature]
