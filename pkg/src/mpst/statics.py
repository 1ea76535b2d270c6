"""Sorting and normalization of static terms; protocol well-formedness.

The statics is a simply-sorted lambda calculus, so normalization (beta
reduction plus folding of ground set/arithmetic/relational operators)
always terminates.  ``fix`` protocol bodies are constructors, not redexes;
they unroll only through the corresponding channel operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .pretty import pretty_static
from .syntax import (
    ARITH_OPS, ArrowSort, BOOL, INT, LOGIC_OPS, REL_OPS, SET, SET_OPS, STYPE,
    SortLike, Static, SVar, SInt, SBool, SSet, SOp, SComplement, SLam, SApp,
    SEnd, SBMsg, SPMsg, SQuan, SBranch, SFix, SIte, TYPE, VTYPE,
    Type, TVar, TUnit, TBase, TChan, TPair, TFun, TGuard, TAssert, TForall,
    TExists, subst_static, subst_type,
)


class SortError(Exception):
    pass


class WfError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class DivByZeroStatic(Exception):
    pass


@dataclass(frozen=True)
class RoleSetValue:
    """A concrete finite role set relative to a declared universe."""

    universe: tuple[int, ...]
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "universe", tuple(sorted(set(self.universe))))
        object.__setattr__(self, "members", tuple(sorted(set(self.members))))
        if not set(self.members) <= set(self.universe):
            raise ValueError(f"members {self.members} outside universe {self.universe}")

    def complement(self) -> "RoleSetValue":
        rest = tuple(r for r in self.universe if r not in self.members)
        return RoleSetValue(self.universe, rest)


SortCtx = dict[str, SortLike]


# ---------------------------------------------------------------------------
# Sorting
# ---------------------------------------------------------------------------


def sort_of(ctx: SortCtx, s: Static) -> SortLike:
    match s:
        case SVar(n):
            if n not in ctx:
                raise SortError(f"unbound static variable {n}")
            return ctx[n]
        case SInt():
            return INT
        case SBool():
            return BOOL
        case SSet():
            return SET
        case SComplement(a, _):
            _expect(ctx, a, SET, "complement")
            return SET
        case SOp(op, args):
            return _sort_op(ctx, op, args)
        case SLam(p, sort, body):
            inner = dict(ctx)
            inner[p] = sort
            return ArrowSort("->", sort, sort_of(inner, body))
        case SApp(f, a):
            fs = sort_of(ctx, f)
            if not isinstance(fs, ArrowSort):
                raise SortError(f"applied non-function static of sort {fs}")
            asort = sort_of(ctx, a)
            if asort != fs.dom:
                raise SortError(f"static argument sort {asort}, expected {fs.dom}")
            return fs.cod
        case SEnd(r):
            _expect(ctx, r, INT, "end")
            return STYPE
        case SBMsg(r, pay, cont):
            _expect(ctx, r, INT, "msg")
            ps = sort_of_type(ctx, pay)
            if ps != TYPE:
                raise SortError("broadcast payload must be a nonlinear type")
            _expect(ctx, cont, STYPE, "msg continuation")
            return STYPE
        case SPMsg(r1, r2, pay, cont):
            _expect(ctx, r1, INT, "msg sender")
            _expect(ctx, r2, INT, "msg receiver")
            sort_of_type(ctx, pay)
            _expect(ctx, cont, STYPE, "msg continuation")
            return STYPE
        case SQuan(r, b):
            _expect(ctx, r, INT, "quan")
            bs = sort_of(ctx, b)
            if not (isinstance(bs, ArrowSort) and bs.cod == STYPE):
                raise SortError(f"quan binder must map into protocols, got {bs}")
            return STYPE
        case SBranch(r, l, rr):
            _expect(ctx, r, INT, "branch")
            _expect(ctx, l, STYPE, "branch left")
            _expect(ctx, rr, STYPE, "branch right")
            return STYPE
        case SFix(b):
            bs = sort_of(ctx, b)
            if bs != ArrowSort("->", STYPE, STYPE):
                raise SortError(f"fix binder must have sort stype -> stype, got {bs}")
            return STYPE
        case SIte(c, t, f):
            _expect(ctx, c, BOOL, "ite condition")
            _expect(ctx, t, STYPE, "ite branch")
            _expect(ctx, f, STYPE, "ite branch")
            return STYPE
        case _:
            raise SortError(f"unknown static term {s!r}")


def _expect(ctx: SortCtx, s: Static, want: SortLike, where: str) -> None:
    got = sort_of(ctx, s)
    if got != want:
        raise SortError(f"{where}: expected sort {want}, got {got}")


def _sort_op(ctx: SortCtx, op: str, args: tuple[Static, ...]) -> SortLike:
    if op in ARITH_OPS:
        _arity(op, args, 2)
        _expect(ctx, args[0], INT, op)
        _expect(ctx, args[1], INT, op)
        return INT
    if op in SET_OPS:
        _arity(op, args, 2)
        _expect(ctx, args[0], SET, op)
        _expect(ctx, args[1], SET, op)
        return SET
    if op in ("lt", "leq"):
        _arity(op, args, 2)
        _expect(ctx, args[0], INT, op)
        _expect(ctx, args[1], INT, op)
        return BOOL
    if op in ("in", "notin"):
        _arity(op, args, 2)
        _expect(ctx, args[0], INT, op)
        _expect(ctx, args[1], SET, op)
        return BOOL
    if op == "subset":
        _arity(op, args, 2)
        _expect(ctx, args[0], SET, op)
        _expect(ctx, args[1], SET, op)
        return BOOL
    if op in ("eq", "neq"):
        _arity(op, args, 2)
        s1 = sort_of(ctx, args[0])
        s2 = sort_of(ctx, args[1])
        if s1 != s2:
            raise SortError(f"{op}: mismatched sorts {s1} and {s2}")
        if s1 not in (INT, BOOL, SET):
            raise SortError(f"{op}: unsupported sort {s1}")
        return BOOL
    if op == "not":
        _arity(op, args, 1)
        _expect(ctx, args[0], BOOL, op)
        return BOOL
    if op in LOGIC_OPS:
        _arity(op, args, 2)
        _expect(ctx, args[0], BOOL, op)
        _expect(ctx, args[1], BOOL, op)
        return BOOL
    raise SortError(f"unknown operator {op}")


def _arity(op: str, args: tuple, n: int) -> None:
    if len(args) != n:
        raise SortError(f"{op}: expected {n} arguments, got {len(args)}")


def sort_of_type(ctx: SortCtx, t: Type) -> SortLike:
    """Sort a type: TYPE when nonlinear, VTYPE otherwise."""
    match t:
        case TVar(n):
            if n not in ctx:
                raise SortError(f"unbound type variable {n}")
            s = ctx[n]
            if s not in (TYPE, VTYPE):
                raise SortError(f"{n} has sort {s}, not a type")
            return s
        case TUnit():
            return TYPE
        case TBase("int", idx):
            for i in idx:
                _expect(ctx, i, INT, "int index")
            return TYPE
        case TBase("bool", idx):
            for i in idx:
                _expect(ctx, i, BOOL, "bool index")
            return TYPE
        case TBase("string", idx):
            if idx:
                raise SortError("string takes no index")
            return TYPE
        case TBase(name, _):
            raise SortError(f"unknown base type {name}")
        case TChan(roles, proto):
            _expect(ctx, roles, SET, "chan roles")
            _expect(ctx, proto, STYPE, "chan protocol")
            return VTYPE
        case TPair(l, r, lin):
            sl = sort_of_type(ctx, l)
            sr = sort_of_type(ctx, r)
            if not lin and (sl != TYPE or sr != TYPE):
                raise SortError("nonlinear pair with linear component")
            return VTYPE if (lin and (sl == VTYPE or sr == VTYPE)) else TYPE
        case TFun(d, c, lin):
            sort_of_type(ctx, d)
            sort_of_type(ctx, c)
            return VTYPE if lin else TYPE
        case TGuard(p, b) | TAssert(p, b):
            _expect(ctx, p, BOOL, "guard proposition")
            return sort_of_type(ctx, b)
        case TForall(v, s, b) | TExists(v, s, b):
            inner = dict(ctx)
            inner[v] = s
            return sort_of_type(inner, b)
        case _:
            raise SortError(f"unknown type {t!r}")


def is_nonlinear(t: Type, ctx: Optional[SortCtx] = None) -> bool:
    try:
        return sort_of_type(ctx or {}, t) == TYPE
    except SortError:
        # free variables of unknown sort are treated as linear
        return False


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def normalize(s: Static, env: Optional[dict[str, Static]] = None) -> Static:
    """Contract static beta redexes and fold ground operators."""
    if env:
        s = subst_static(s, dict(env))
    return _norm(s)


def _norm(s: Static) -> Static:
    match s:
        case SVar() | SInt() | SBool() | SSet():
            return s
        case SComplement(a, uni):
            a = _norm(a)
            if isinstance(a, SSet):
                return SSet(tuple(r for r in uni if r not in a.members))
            return SComplement(a, uni)
        case SOp(op, args):
            return _norm_op(op, tuple(_norm(a) for a in args))
        case SLam(p, sort, body):
            return SLam(p, sort, _norm(body))
        case SApp(f, a):
            f = _norm(f)
            a = _norm(a)
            if isinstance(f, SLam):
                return _norm(subst_static(f.body, {f.param: a}))
            return SApp(f, a)
        case SEnd(r):
            return SEnd(_norm(r))
        case SBMsg(r, pay, cont):
            return SBMsg(_norm(r), normalize_type(pay), _norm(cont))
        case SPMsg(r1, r2, pay, cont):
            return SPMsg(_norm(r1), _norm(r2), normalize_type(pay), _norm(cont))
        case SQuan(r, b):
            return SQuan(_norm(r), _norm(b))
        case SBranch(r, l, rr):
            return SBranch(_norm(r), _norm(l), _norm(rr))
        case SFix(b):
            return SFix(_norm(b))
        case SIte(c, t, f):
            c = _norm(c)
            if isinstance(c, SBool):
                return _norm(t) if c.value else _norm(f)
            return SIte(c, _norm(t), _norm(f))
        case _:
            raise SortError(f"cannot normalize {s!r}")


def _norm_op(op: str, args: tuple[Static, ...]) -> Static:
    a = args[0]
    b = args[1] if len(args) > 1 else None
    if op in ARITH_OPS and isinstance(a, SInt) and isinstance(b, SInt):
        if op == "add":
            return SInt(a.value + b.value)
        if op == "sub":
            return SInt(a.value - b.value)
        if op == "mul":
            return SInt(a.value * b.value)
        if b.value == 0:
            raise DivByZeroStatic(f"static division by zero: {pretty_static(SOp(op, args))}")
        q = a.value / b.value  # round to nearest, ties away from zero
        return SInt(int(q + 0.5) if q >= 0 else -int(-q + 0.5))
    if op in SET_OPS and isinstance(a, SSet) and isinstance(b, SSet):
        sa, sb = set(a.members), set(b.members)
        if op == "union" or op == "djunion":
            return SSet(tuple(sa | sb))
        if op == "intersect":
            return SSet(tuple(sa & sb))
        return SSet(tuple(sa - sb))
    if op in ("lt", "leq") and isinstance(a, SInt) and isinstance(b, SInt):
        return SBool(a.value < b.value if op == "lt" else a.value <= b.value)
    if op in ("in", "notin") and isinstance(a, SInt) and isinstance(b, SSet):
        inside = a.value in b.members
        return SBool(inside if op == "in" else not inside)
    if op == "subset" and isinstance(a, SSet) and isinstance(b, SSet):
        return SBool(set(a.members) <= set(b.members))
    if op in ("eq", "neq"):
        ground = ((isinstance(a, SInt) and isinstance(b, SInt))
                  or (isinstance(a, SBool) and isinstance(b, SBool))
                  or (isinstance(a, SSet) and isinstance(b, SSet)))
        if ground:
            same = a == b
            return SBool(same if op == "eq" else not same)
        if a == b:
            return SBool(op == "eq")
    if op == "not" and isinstance(a, SBool):
        return SBool(not a.value)
    if op == "and":
        if isinstance(a, SBool):
            return b if a.value else SBool(False)
        if isinstance(b, SBool):
            return a if b.value else SBool(False)
    if op == "or":
        if isinstance(a, SBool):
            return SBool(True) if a.value else b
        if isinstance(b, SBool):
            return SBool(True) if b.value else a
    return SOp(op, args)


def normalize_type(t: Type) -> Type:
    match t:
        case TVar() | TUnit():
            return t
        case TBase(name, idx):
            return TBase(name, tuple(_norm(i) for i in idx))
        case TChan(roles, proto, uni):
            return TChan(_norm(roles), _norm(proto), uni)
        case TPair(l, r, lin):
            return TPair(normalize_type(l), normalize_type(r), lin)
        case TFun(d, c, lin):
            return TFun(normalize_type(d), normalize_type(c), lin)
        case TGuard(p, b):
            return TGuard(_norm(p), normalize_type(b))
        case TAssert(p, b):
            return TAssert(_norm(p), normalize_type(b))
        case TForall(v, s, b):
            return TForall(v, s, normalize_type(b))
        case TExists(v, s, b):
            return TExists(v, s, normalize_type(b))
        case _:
            raise SortError(f"cannot normalize type {t!r}")


# ---------------------------------------------------------------------------
# Well-formedness of protocols
# ---------------------------------------------------------------------------


def wellformed_stype(ctx: SortCtx, universe: RoleSetValue, proto: Static) -> None:
    """Check role membership, no self-loops, and contractive fix bodies."""
    got = sort_of(ctx, proto)
    if got != STYPE:
        raise WfError("sort-mismatch", f"expected a protocol, got sort {got}")
    _wf(ctx, universe, proto)


def _role_ok(universe: RoleSetValue, r: Static, what: str) -> None:
    if isinstance(r, SInt) and r.value not in universe.members:
        raise WfError("role-out-of-universe",
                      f"{what} role {r.value} outside universe {list(universe.members)}")


def _wf(ctx: SortCtx, universe: RoleSetValue, s: Static) -> None:
    match s:
        case SEnd(r):
            _role_ok(universe, _norm(r), "end")
        case SBMsg(r, pay, cont):
            _role_ok(universe, _norm(r), "sender")
            _wf_payload(ctx, pay)
            _wf(ctx, universe, cont)
        case SPMsg(r1, r2, pay, cont):
            n1, n2 = _norm(r1), _norm(r2)
            _role_ok(universe, n1, "sender")
            _role_ok(universe, n2, "receiver")
            if isinstance(n1, SInt) and isinstance(n2, SInt) and n1 == n2:
                raise WfError("self-loop", f"message from role {n1.value} to itself")
            _wf_payload(ctx, pay)
            _wf(ctx, universe, cont)
        case SQuan(r, SLam(p, sort, body)):
            _role_ok(universe, _norm(r), "quan")
            inner = dict(ctx)
            inner[p] = sort
            _wf(inner, universe, body)
        case SBranch(r, l, rr):
            _role_ok(universe, _norm(r), "branch")
            _wf(ctx, universe, l)
            _wf(ctx, universe, rr)
        case SFix(SLam(p, sort, body)):
            if not _contractive(body, p, guarded=False):
                raise WfError("non-contractive-fix",
                              f"recursion variable {p} is not guarded by a "
                              "protocol constructor")
            inner = dict(ctx)
            inner[p] = sort
            _wf(inner, universe, body)
        case SQuan(_, b) | SFix(b):
            raise WfError("sort-mismatch", f"binder is not a static function: {b!r}")
        case SIte(_, t, f):
            _wf(ctx, universe, t)
            _wf(ctx, universe, f)
        case SVar():
            pass
        case SApp():
            pass  # application of a protocol binder; checked when unrolled
        case _:
            raise WfError("sort-mismatch", f"not a protocol: {s!r}")


def _wf_payload(ctx: SortCtx, pay: Type) -> None:
    inner_protos = _chan_protos(pay)
    for p in inner_protos:
        # payload channel types belong to other sessions; only sort-check them
        sort_of(ctx, p)


def _chan_protos(t: Type) -> list[Static]:
    match t:
        case TChan(_, proto):
            return [proto]
        case TPair(l, r) | TFun(l, r):
            return _chan_protos(l) + _chan_protos(r)
        case TGuard(_, b) | TAssert(_, b) | TForall(_, _, b) | TExists(_, _, b):
            return _chan_protos(b)
        case _:
            return []


def _contractive(s: Static, var: str, guarded: bool) -> bool:
    """True when every occurrence of var sits under a protocol constructor."""
    match s:
        case SVar(n):
            return guarded or n != var
        case SInt() | SBool() | SSet():
            return True
        case SEnd():
            return True
        case SBMsg(_, _, cont) | SPMsg(_, _, _, cont):
            return _contractive(cont, var, True)
        case SQuan(_, b):
            return _contractive(b, var, True)
        case SBranch(_, l, r):
            return _contractive(l, var, True) and _contractive(r, var, True)
        case SFix(b):
            return _contractive(b, var, guarded)
        case SIte(_, t, f):
            return _contractive(t, var, guarded) and _contractive(f, var, guarded)
        case SLam(p, _, body):
            if p == var:
                return True
            return _contractive(body, var, guarded)
        case SApp(f, a):
            return _contractive(f, var, guarded) and _contractive(a, var, guarded)
        case SOp(_, args):
            return all(_contractive(a, var, guarded) for a in args)
        case SComplement(a, _):
            return _contractive(a, var, guarded)
        case _:
            return True
