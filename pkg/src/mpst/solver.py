"""Entailment of guard propositions over finite role sets and linear ints.

The decision fragment:

  * set variables with a declared finite universe -- decided by exhaustive
    enumeration of subset assignments;
  * role-like integer variables (used only in membership and equality
    atoms) -- enumerated over the relevant universes plus fresh sentinel
    values, which is complete for that relational language;
  * remaining integer variables -- linear atoms decided by equality
    closure, interval propagation, bounded enumeration when finite bounds
    are derivable, and counterexample search;
  * everything else is Unknown, never a wrong Valid.

``Invalid`` always carries an assignment that satisfies every assumption
and falsifies the goal; ``recheck`` re-evaluates it from scratch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from .statics import DivByZeroStatic, normalize
from .syntax import (
    ARITH_OPS, Static, SVar, SInt, SBool, SSet, SOp, SComplement,
    static_free_vars, subst_static,
)

DEFAULT_BUDGET = 1 << 16


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Invalid:
    assignment: dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


Verdict = Union[Valid, Invalid, Unknown]


@dataclass
class Assumptions:
    props: tuple[Static, ...] = ()
    set_vars: dict[str, Optional[tuple[int, ...]]] = field(default_factory=dict)
    int_vars: tuple[str, ...] = ()
    bool_vars: tuple[str, ...] = ()

    def extended(self, prop: Static) -> "Assumptions":
        return Assumptions(self.props + (prop,), dict(self.set_vars),
                           self.int_vars, self.bool_vars)


class _OutOfFragment(Exception):
    pass


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def entails(a: Assumptions, goal: Static, budget: int = DEFAULT_BUDGET) -> Verdict:
    return solve_fragment_setvars(a, goal, budget)


def solve_fragment_setvars(a: Assumptions, goal: Static,
                           budget: int = DEFAULT_BUDGET) -> Verdict:
    """Enumerate finite-domain variables; hand residuals to the int fragment."""
    try:
        props = [normalize(p) for p in a.props]
        goal_n = normalize(goal)
    except DivByZeroStatic:
        return Unknown("static division by zero")

    free: set[str] = set()
    for p in props:
        free |= static_free_vars(p)
    free |= static_free_vars(goal_n)

    set_vars = sorted(v for v in free if v in a.set_vars)
    for v in set_vars:
        if a.set_vars[v] is None:
            return Unknown(f"set variable {v} has no declared universe")
    bool_vars = sorted(v for v in free if v in a.bool_vars)
    int_like = sorted(v for v in free
                      if v not in a.set_vars and v not in a.bool_vars)
    undeclared = [v for v in int_like if v not in a.int_vars]
    if undeclared:
        return Unknown(f"undeclared variables {undeclared}")

    role_vars = sorted(v for v in int_like
                       if _role_like(v, props + [goal_n]))
    pure_int = [v for v in int_like if v not in role_vars]

    domain = _role_domain(a, props + [goal_n], len(role_vars))

    total = 1
    for v in set_vars:
        total *= 2 ** len(a.set_vars[v])  # type: ignore[arg-type]
    total *= (2 ** len(bool_vars)) * (len(domain) ** len(role_vars) or 1)
    if total > budget:
        return Unknown(f"enumeration of {total} assignments exceeds budget {budget}")

    subset_choices = [_subsets(a.set_vars[v]) for v in set_vars]  # type: ignore[arg-type]
    unknown_reason: Optional[str] = None

    for sets in itertools.product(*subset_choices):
        for bools in itertools.product((False, True), repeat=len(bool_vars)):
            for roles in itertools.product(domain, repeat=len(role_vars)):
                env: dict[str, object] = {}
                out: dict[str, object] = {}
                for v, ms in zip(set_vars, sets):
                    env[v] = frozenset(ms)
                    out[v] = ms
                for v, bv in zip(bool_vars, bools):
                    env[v] = bv
                    out[v] = bv
                for v, rv in zip(role_vars, roles):
                    env[v] = rv
                    out[v] = rv
                try:
                    ps = [_peval(p, env) for p in props]
                    g = _peval(goal_n, env)
                except DivByZeroStatic:
                    unknown_reason = "static division by zero"
                    continue
                if any(p is False for p in ps):
                    continue
                if all(p is True for p in ps) and isinstance(g, bool):
                    if not g:
                        return Invalid(out)
                    continue
                # residual integer reasoning on partially evaluated props
                asn: dict[str, Static] = {}
                for v in env:
                    val = env[v]
                    if isinstance(val, frozenset):
                        asn[v] = SSet(tuple(val))
                    elif isinstance(val, bool):
                        asn[v] = SBool(val)
                    else:
                        asn[v] = SInt(val)  # type: ignore[arg-type]
                try:
                    residual = [normalize(subst_static(p, dict(asn)))
                                for p, done in zip(props, ps) if done is not True]
                    gterm = (SBool(g) if isinstance(g, bool)
                             else normalize(subst_static(goal_n, dict(asn))))
                except DivByZeroStatic:
                    unknown_reason = "static division by zero"
                    continue
                v = solve_fragment_ints(
                    Assumptions(tuple(residual), {}, tuple(pure_int)), gterm,
                    budget)
                if isinstance(v, Invalid):
                    merged = dict(out)
                    merged.update(v.assignment)
                    return Invalid(merged)
                if isinstance(v, Unknown):
                    unknown_reason = v.reason or "integer fragment"
    if unknown_reason is not None:
        return Unknown(unknown_reason)
    return Valid()


def _peval(t: Static, env: dict[str, object]):
    """Partial evaluation over finite-domain values; None means the term
    mentions a variable outside env."""
    match t:
        case SVar(n):
            return env.get(n)
        case SInt(v):
            return v
        case SBool(v):
            return v
        case SSet(ms):
            return frozenset(ms)
        case SComplement(x, uni):
            xv = _peval(x, env)
            return None if xv is None else frozenset(uni) - xv
        case SOp(op, args):
            xs = [_peval(x, env) for x in args]
            if op == "and":
                if False in xs:
                    return False
                return None if None in xs else (xs[0] and xs[1])
            if op == "or":
                if True in xs:
                    return True
                return None if None in xs else (xs[0] or xs[1])
            if None in xs:
                return None
            a = xs[0]
            b = xs[1] if len(xs) > 1 else None
            match op:
                case "add":
                    return a + b
                case "sub":
                    return a - b
                case "mul":
                    return a * b
                case "div":
                    if b == 0:
                        raise DivByZeroStatic("division by zero")
                    q = a / b
                    return int(q + 0.5) if q >= 0 else -int(-q + 0.5)
                case "union" | "djunion":
                    return a | b
                case "intersect":
                    return a & b
                case "minus":
                    return a - b
                case "eq":
                    return a == b
                case "neq":
                    return a != b
                case "lt":
                    return a < b
                case "leq":
                    return a <= b
                case "in":
                    return a in b
                case "notin":
                    return a not in b
                case "subset":
                    return a <= b
                case "not":
                    return not a
            return None
        case _:
            return None


def enumeration_size(a: Assumptions, goal: Static) -> int:
    """Number of finite-domain assignments entails would enumerate."""
    props = [normalize(p) for p in a.props]
    goal_n = normalize(goal)
    free: set[str] = set()
    for p in props + [goal_n]:
        free |= static_free_vars(p)
    total = 1
    for v in sorted(free):
        if v in a.set_vars and a.set_vars[v] is not None:
            total *= 2 ** len(a.set_vars[v])  # type: ignore[arg-type]
        elif v in a.bool_vars:
            total *= 2
        elif _role_like(v, props + [goal_n]):
            total *= len(_role_domain(a, props + [goal_n], 1))
    return total


# ---------------------------------------------------------------------------
# Role-like variables
# ---------------------------------------------------------------------------


def _role_like(v: str, terms: list[Static]) -> bool:
    """v occurs only as a member operand of in/notin or in eq/neq atoms."""
    found = [False]

    def walk(s: Static, ok_parent: bool) -> bool:
        match s:
            case SVar(n):
                if n == v:
                    found[0] = True
                    return ok_parent
                return True
            case SOp(op, args):
                if op in ("in", "notin"):
                    return walk(args[0], True) and walk(args[1], False)
                if op in ("eq", "neq"):
                    return all(walk(x, True) for x in args)
                if op in ("and", "or", "not"):
                    return all(walk(x, False) for x in args)
                return all(walk(x, False) for x in args)
            case SComplement(x, _):
                return walk(x, False)
            case _:
                return True

    ok = all(walk(t, False) for t in terms)
    return ok and found[0]


def _role_domain(a: Assumptions, terms: list[Static], nvars: int) -> list[int]:
    dom: set[int] = set()
    for uni in a.set_vars.values():
        if uni:
            dom |= set(uni)

    def collect(s: Static) -> None:
        match s:
            case SInt(x):
                dom.add(x)
            case SSet(ms):
                dom.update(ms)
            case SOp(_, args):
                for x in args:
                    collect(x)
            case SComplement(x, uni):
                dom.update(uni)
                collect(x)
            case _:
                pass

    for t in terms:
        collect(t)
    top = max(dom, default=0)
    return sorted(dom) + [top + 1 + i for i in range(nvars)]


def _subsets(universe: tuple[int, ...]):
    out = []
    for k in range(len(universe) + 1):
        for combo in itertools.combinations(universe, k):
            out.append(tuple(combo))
    return out


# ---------------------------------------------------------------------------
# Linear integer fragment
# ---------------------------------------------------------------------------

_SEARCH_RADIUS = 8
_MAX_PASSES = 24
_INF = float("inf")


_MAX_CASES = 128


def solve_fragment_ints(a: Assumptions, goal: Static,
                        budget: int = DEFAULT_BUDGET) -> Verdict:
    """Decide assumps |= goal for linear integer (in)equalities.

    Assumptions may be boolean combinations; they are split into
    disjunctive-normal-form cases, each a conjunction of linear atoms.
    """
    try:
        props = [normalize(p) for p in a.props]
        goal_n = normalize(goal)
    except DivByZeroStatic:
        return Unknown("static division by zero")
    if isinstance(goal_n, SBool) and all(isinstance(p, SBool) for p in props):
        if any(p == SBool(False) for p in props):
            return Valid()
        return Valid() if goal_n.value else Invalid({})

    try:
        cases: list[list[Atom]] = [[]]
        for p in props:
            if p == SBool(True):
                continue
            if p == SBool(False):
                return Valid()
            expansion = _dnf(_goal_tree(_expand_membership(p)))
            cases = [c + d for c in cases for d in expansion]
            if len(cases) > _MAX_CASES:
                return Unknown("assumption case split too large")
        goal_tree = _goal_tree(_expand_membership(goal_n))
    except _OutOfFragment as e:
        return Unknown(str(e) or "outside the linear fragment")

    if not cases:  # assumptions unsatisfiable propositionally
        return Valid()
    unknown: Optional[str] = None
    for lin_atoms in cases:
        v = _solve_case(lin_atoms, goal_tree, budget)
        if isinstance(v, Invalid):
            return v
        if isinstance(v, Unknown):
            unknown = v.reason
    return Unknown(unknown) if unknown is not None else Valid()


def _expand_membership(p: Static) -> Static:
    """Rewrite n in/notin {ground set} into equality combinations."""
    match p:
        case SOp("in", (lhs, SSet(ms))):
            out: Static = SBool(False)
            for m in ms:
                out = SOp("or", (out, SOp("eq", (lhs, SInt(m)))))
            return normalize(out)
        case SOp("notin", (lhs, SSet(ms))):
            out = SBool(True)
            for m in ms:
                out = SOp("and", (out, SOp("neq", (lhs, SInt(m)))))
            return normalize(out)
        case SOp(op, args):
            return SOp(op, tuple(_expand_membership(x) for x in args))
        case _:
            return p


def _dnf(tree) -> list[list[Atom]]:
    if tree[0] == "const":
        return [[]] if tree[1] else []
    if tree[0] == "atom":
        return [[tree[1]]]
    if tree[0] == "and":
        left = _dnf(tree[1])
        right = _dnf(tree[2])
        return [a + b for a in left for b in right]
    if tree[0] == "or":
        return _dnf(tree[1]) + _dnf(tree[2])
    # not: push inward
    return _dnf(_neg_tree(tree[1]))


def _neg_tree(tree):
    if tree[0] == "const":
        return ("const", not tree[1])
    if tree[0] == "atom":
        return ("atom", _negate_atom(tree[1]))
    if tree[0] == "and":
        return ("or", _neg_tree(tree[1]), _neg_tree(tree[2]))
    if tree[0] == "or":
        return ("and", _neg_tree(tree[1]), _neg_tree(tree[2]))
    return tree[1]


def _solve_case(lin_atoms: list[Atom], goal_tree, budget: int) -> Verdict:
    vars_: set[str] = set()
    for coeffs, _, _ in lin_atoms:
        vars_ |= set(coeffs)
    vars_ |= _tree_vars(goal_tree)
    varlist = sorted(vars_)

    bounds = _propagate(lin_atoms, varlist)
    if bounds is None:  # this case is unsatisfiable
        return Valid()

    sizes = []
    finite = True
    for v in varlist:
        lo, hi = bounds[v]
        if lo == -_INF or hi == _INF:
            finite = False
            break
        sizes.append(int(hi) - int(lo) + 1)
    if finite:
        total = 1
        for s in sizes:
            total *= s
        if total <= budget:
            return _enumerate_ints(lin_atoms, goal_tree, varlist, bounds)

    if _prove_tree(goal_tree, lin_atoms, bounds):
        return Valid()

    cex = _search_counterexample(lin_atoms, goal_tree, varlist, bounds)
    if cex is not None:
        return Invalid(cex)
    return Unknown("could not decide linear goal")


def _conjuncts(p: Static) -> list[Static]:
    if isinstance(p, SOp) and p.op == "and":
        return _conjuncts(p.args[0]) + _conjuncts(p.args[1])
    return [p]


def _linear(s: Static) -> tuple[dict[str, int], int]:
    """Return (coefficients, constant) or raise _OutOfFragment."""
    match s:
        case SInt(v):
            return {}, v
        case SVar(n):
            return {n: 1}, 0
        case SOp("add", (x, y)):
            cx, kx = _linear(x)
            cy, ky = _linear(y)
            return _merge(cx, cy, 1), kx + ky
        case SOp("sub", (x, y)):
            cx, kx = _linear(x)
            cy, ky = _linear(y)
            return _merge(cx, cy, -1), kx - ky
        case SOp("mul", (x, y)):
            cx, kx = _linear(x)
            cy, ky = _linear(y)
            if not cx:
                return {v: kx * c for v, c in cy.items()}, kx * ky
            if not cy:
                return {v: ky * c for v, c in cx.items()}, kx * ky
            raise _OutOfFragment("nonlinear multiplication")
        case _:
            raise _OutOfFragment(f"non-linear term")


def _merge(a: dict[str, int], b: dict[str, int], sign: int) -> dict[str, int]:
    out = dict(a)
    for v, c in b.items():
        out[v] = out.get(v, 0) + sign * c
        if out[v] == 0:
            del out[v]
    return out


# an atom is (coeffs, const, rel) meaning  sum coeffs + const  REL  0
# with rel in {"eq", "neq", "leq", "lt"}
Atom = tuple[dict[str, int], int, str]


def _atom(p: Static) -> Atom:
    if not isinstance(p, SOp) or p.op not in ("eq", "neq", "lt", "leq"):
        raise _OutOfFragment("non-atomic proposition")
    c1, k1 = _linear(p.args[0])
    c2, k2 = _linear(p.args[1])
    return _merge(c1, c2, -1), k1 - k2, p.op


def _goal_tree(g: Static):
    if isinstance(g, SBool):
        return ("const", g.value)
    if isinstance(g, SOp):
        if g.op == "and":
            return ("and", _goal_tree(g.args[0]), _goal_tree(g.args[1]))
        if g.op == "or":
            return ("or", _goal_tree(g.args[0]), _goal_tree(g.args[1]))
        if g.op == "not":
            return ("not", _goal_tree(g.args[0]))
        return ("atom", _atom(g))
    raise _OutOfFragment("goal outside the linear fragment")


def _tree_vars(t) -> set[str]:
    if t[0] == "atom":
        return set(t[1][0])
    if t[0] in ("and", "or"):
        return _tree_vars(t[1]) | _tree_vars(t[2])
    if t[0] == "not":
        return _tree_vars(t[1])
    return set()


def _propagate(atoms: list[Atom], varlist: list[str]):
    bounds: dict[str, tuple[float, float]] = {v: (-_INF, _INF) for v in varlist}

    def tighten(v: str, lo=None, hi=None) -> bool:
        l, h = bounds[v]
        if lo is not None:
            l = max(l, lo)
        if hi is not None:
            h = min(h, hi)
        changed = (l, h) != bounds[v]
        bounds[v] = (l, h)
        return changed

    ineqs: list[tuple[dict[str, int], int, bool]] = []  # expr REL 0; strict flag
    for coeffs, k, rel in atoms:
        if rel == "leq":
            ineqs.append((coeffs, k, False))
        elif rel == "lt":
            ineqs.append((coeffs, k, True))
        elif rel == "eq":
            ineqs.append((coeffs, k, False))
            ineqs.append(({v: -c for v, c in coeffs.items()}, -k, False))

    for _ in range(_MAX_PASSES):
        changed = False
        for coeffs, k, strict in ineqs:
            for v, c in coeffs.items():
                rest_lo, rest_hi = 0.0, 0.0
                ok = True
                for u, cu in coeffs.items():
                    if u == v:
                        continue
                    lo_u, hi_u = bounds[u]
                    a1, a2 = cu * lo_u, cu * hi_u
                    rest_lo += min(a1, a2)
                    rest_hi += max(a1, a2)
                    if rest_lo == -_INF and rest_hi == _INF:
                        ok = False
                        break
                if not ok:
                    continue
                # c*v <= -k - rest  =>  bound on v using the loosest rest
                rhs = -k - rest_lo
                if rhs == _INF:
                    continue
                if c > 0:
                    b = rhs / c
                    b = _floor_strict(b, strict)
                    changed |= tighten(v, hi=b)
                else:
                    b = rhs / c
                    b = _ceil_strict(b, strict)
                    changed |= tighten(v, lo=b)
        for v in varlist:
            lo, hi = bounds[v]
            if lo > hi:
                return None
        if not changed:
            break
    return bounds


def _floor_strict(b: float, strict: bool) -> float:
    if b == _INF or b == -_INF:
        return b
    fb = float(int(b)) if b == int(b) else float(int(b) if b > 0 else int(b) - 1)
    if strict and fb == b:
        fb -= 1
    return fb


def _ceil_strict(b: float, strict: bool) -> float:
    if b == _INF or b == -_INF:
        return b
    cb = float(int(b)) if b == int(b) else float(int(b) + 1 if b > 0 else int(b))
    if strict and cb == b:
        cb += 1
    return cb


def _eval_atom(atom: Atom, asn: dict[str, int]) -> bool:
    coeffs, k, rel = atom
    val = k + sum(c * asn[v] for v, c in coeffs.items())
    if rel == "eq":
        return val == 0
    if rel == "neq":
        return val != 0
    if rel == "lt":
        return val < 0
    return val <= 0


def _eval_tree(t, asn: dict[str, int]) -> bool:
    if t[0] == "const":
        return t[1]
    if t[0] == "atom":
        return _eval_atom(t[1], asn)
    if t[0] == "and":
        return _eval_tree(t[1], asn) and _eval_tree(t[2], asn)
    if t[0] == "or":
        return _eval_tree(t[1], asn) or _eval_tree(t[2], asn)
    return not _eval_tree(t[1], asn)


def _enumerate_ints(atoms: list[Atom], goal_tree, varlist: list[str],
                    bounds) -> Verdict:
    ranges = [range(int(bounds[v][0]), int(bounds[v][1]) + 1) for v in varlist]
    for combo in itertools.product(*ranges):
        asn = dict(zip(varlist, combo))
        if all(_eval_atom(at, asn) for at in atoms):
            if not _eval_tree(goal_tree, asn):
                return Invalid(dict(asn))
    return Valid()


def _interval_of(coeffs: dict[str, int], k: int, bounds) -> tuple[float, float]:
    lo, hi = float(k), float(k)
    for v, c in coeffs.items():
        bl, bh = bounds[v]
        a1, a2 = c * bl, c * bh
        lo += min(a1, a2)
        hi += max(a1, a2)
    return lo, hi


def _prove_atom(atom: Atom, eqmap: dict[str, int], bounds) -> bool:
    coeffs, k, rel = atom
    # substitute known constants from equalities first
    kk = k
    cc = {}
    for v, c in coeffs.items():
        if v in eqmap:
            kk += c * eqmap[v]
        else:
            cc[v] = c
    lo, hi = _interval_of(cc, kk, bounds)
    if rel == "eq":
        return lo == hi == 0
    if rel == "neq":
        return lo > 0 or hi < 0
    if rel == "lt":
        return hi < 0
    return hi <= 0


def _prove_tree(t, atoms: list[Atom], bounds) -> bool:
    eqmap: dict[str, int] = {}
    for coeffs, k, rel in atoms:
        if rel == "eq" and len(coeffs) == 1:
            (v, c), = coeffs.items()
            if (-k) % c == 0:
                eqmap[v] = -k // c
    # simple substitution closure for var = var equalities
    for _ in range(len(atoms) + 1):
        progress = False
        for coeffs, k, rel in atoms:
            if rel != "eq" or len(coeffs) != 2:
                continue
            (v1, c1), (v2, c2) = coeffs.items()
            if v1 in eqmap and v2 not in eqmap and c2 != 0:
                num = -k - c1 * eqmap[v1]
                if num % c2 == 0:
                    eqmap[v2] = num // c2
                    progress = True
            elif v2 in eqmap and v1 not in eqmap and c1 != 0:
                num = -k - c2 * eqmap[v2]
                if num % c1 == 0:
                    eqmap[v1] = num // c1
                    progress = True
        if not progress:
            break

    def go(t) -> bool:
        if t[0] == "const":
            return t[1]
        if t[0] == "atom":
            return _prove_atom(t[1], eqmap, bounds)
        if t[0] == "and":
            return go(t[1]) and go(t[2])
        if t[0] == "or":
            return go(t[1]) or go(t[2])
        if t[0] == "not":
            if t[1][0] != "atom":
                return False
            return _prove_atom(_negate_atom(t[1][1]), eqmap, bounds)
        return False

    return go(t)


def _negate_atom(atom: Atom) -> Atom:
    coeffs, k, rel = atom
    if rel == "eq":
        return coeffs, k, "neq"
    if rel == "neq":
        return coeffs, k, "eq"
    flipped = {v: -c for v, c in coeffs.items()}
    # not(e < 0) is -e <= 0;  not(e <= 0) is -e < 0
    return (flipped, -k, "leq") if rel == "lt" else (flipped, -k, "lt")


def _search_counterexample(atoms: list[Atom], goal_tree, varlist: list[str],
                           bounds) -> Optional[dict[str, int]]:
    candidates: dict[str, list[int]] = {}
    for v in varlist:
        lo, hi = bounds[v]
        vals: set[int] = set()
        base_lo = int(lo) if lo != -_INF else -_SEARCH_RADIUS
        base_hi = int(hi) if hi != _INF else _SEARCH_RADIUS
        if base_hi - base_lo > 2 * _SEARCH_RADIUS:
            vals.update(range(base_lo, base_lo + _SEARCH_RADIUS + 1))
            vals.update(range(base_hi - _SEARCH_RADIUS, base_hi + 1))
            vals.add(0)
        else:
            vals.update(range(base_lo, base_hi + 1))
        vals = {x for x in vals if lo <= x <= hi}
        candidates[v] = sorted(vals)
        if not candidates[v]:
            return None
    total = 1
    for v in varlist:
        total *= len(candidates[v])
    if total > 200_000:
        return None
    for combo in itertools.product(*(candidates[v] for v in varlist)):
        asn = dict(zip(varlist, combo))
        if all(_eval_atom(at, asn) for at in atoms) and not _eval_tree(goal_tree, asn):
            return asn
    return None


# ---------------------------------------------------------------------------
# Re-checking counterexamples
# ---------------------------------------------------------------------------


def recheck(a: Assumptions, goal: Static, assignment: dict[str, object]) -> bool:
    """True when the assignment satisfies all assumptions and refutes the goal."""
    m: dict[str, Static] = {}
    for k, v in assignment.items():
        if isinstance(v, bool):
            m[k] = SBool(v)
        elif isinstance(v, int):
            m[k] = SInt(v)
        elif isinstance(v, tuple):
            m[k] = SSet(v)
        else:
            return False
    for p in a.props:
        r = normalize(subst_static(p, dict(m)))
        if r != SBool(True):
            return False
    g = normalize(subst_static(goal, dict(m)))
    return g == SBool(False)
