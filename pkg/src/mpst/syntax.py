"""Abstract syntax for the session-typed core language.

Three layers share one name space of static variables:

  * static terms -- integers, booleans, finite role sets and the protocol
    terms built from them (``end``, ``msg``, ``quan``, ``branch``, ``fix``,
    ``ite``); classified by simple sorts
  * channel/value types -- the (possibly linear) types assigned to program
    terms, indexed by static terms
  * program terms -- a call-by-value lambda calculus with pairs, guards,
    quantifier introduction/elimination forms and the channel API calls

Everything is an immutable dataclass; sharing across threads is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

# ---------------------------------------------------------------------------
# Sorts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sort:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ArrowSort(Sort):
    dom: "SortLike" = None  # type: ignore[assignment]
    cod: "SortLike" = None  # type: ignore[assignment]

    def __str__(self) -> str:
        return f"({self.dom} -> {self.cod})"


SortLike = Union[Sort, ArrowSort]

INT = Sort("int")
BOOL = Sort("bool")
SET = Sort("set")
STYPE = Sort("stype")
TYPE = Sort("type")
VTYPE = Sort("vtype")

BASE_SORTS = {"int": INT, "bool": BOOL, "set": SET, "stype": STYPE,
              "type": TYPE, "vtype": VTYPE}


def arrow(dom: SortLike, cod: SortLike) -> ArrowSort:
    return ArrowSort("->", dom, cod)


# ---------------------------------------------------------------------------
# Static terms (including protocol terms, which have sort stype)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Static:
    pass


@dataclass(frozen=True)
class SVar(Static):
    name: str


@dataclass(frozen=True)
class SInt(Static):
    value: int


@dataclass(frozen=True)
class SBool(Static):
    value: bool


@dataclass(frozen=True)
class SSet(Static):
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(sorted(set(self.members))))


# Set operators: union, djunion, intersect, minus.
# Arithmetic: add, sub, mul, div.  Relations: eq, neq, lt, leq, in, notin,
# subset.  Logic: and, or, not.
SET_OPS = {"union", "djunion", "intersect", "minus"}
ARITH_OPS = {"add", "sub", "mul", "div"}
REL_OPS = {"eq", "neq", "lt", "leq", "in", "notin", "subset"}
LOGIC_OPS = {"and", "or", "not"}


@dataclass(frozen=True)
class SOp(Static):
    op: str
    args: tuple[Static, ...]


@dataclass(frozen=True)
class SComplement(Static):
    arg: Static
    universe: tuple[int, ...]


@dataclass(frozen=True)
class SLam(Static):
    param: str
    sort: SortLike
    body: Static


@dataclass(frozen=True)
class SApp(Static):
    fn: Static
    arg: Static


# Protocol constructors -------------------------------------------------------


@dataclass(frozen=True)
class SEnd(Static):
    role: Static


@dataclass(frozen=True)
class SBMsg(Static):
    """Broadcast message: the sender role, a nonlinear payload type, rest."""

    sender: Static
    payload: "Type"
    cont: Static


@dataclass(frozen=True)
class SPMsg(Static):
    """Point-to-point message with a possibly linear payload."""

    sender: Static
    receiver: Static
    payload: "Type"
    cont: Static


@dataclass(frozen=True)
class SQuan(Static):
    role: Static
    binder: Static  # SLam of some sort -> stype


@dataclass(frozen=True)
class SBranch(Static):
    role: Static
    left: Static
    right: Static


@dataclass(frozen=True)
class SFix(Static):
    binder: Static  # SLam of stype -> stype


@dataclass(frozen=True)
class SIte(Static):
    """Protocol conditional, resolved once its condition is decided."""

    cond: Static
    then: Static
    els: Static


STRUE = SBool(True)
SFALSE = SBool(False)
EMPTYSET = SSet(())


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class TVar(Type):
    name: str


@dataclass(frozen=True)
class TUnit(Type):
    pass


@dataclass(frozen=True)
class TBase(Type):
    name: str  # "int", "bool", "string"
    indices: tuple[Static, ...] = ()


@dataclass(frozen=True)
class TChan(Type):
    roles: Static
    proto: Static
    # Universe of the governing protocol declaration, when statically known.
    # Not part of type identity; needed at fork/cut sites and for runtime
    # consistency checks.
    universe: Optional[tuple[int, ...]] = field(default=None, compare=False)


@dataclass(frozen=True)
class TPair(Type):
    left: Type
    right: Type
    linear: bool = True


@dataclass(frozen=True)
class TFun(Type):
    dom: Type
    cod: Type
    linear: bool = True  # True: one-shot closure, may capture linear values


@dataclass(frozen=True)
class TGuard(Type):
    prop: Static
    body: Type


@dataclass(frozen=True)
class TAssert(Type):
    prop: Static
    body: Type


@dataclass(frozen=True)
class TForall(Type):
    var: str
    sort: SortLike
    body: Type


@dataclass(frozen=True)
class TExists(Type):
    var: str
    sort: SortLike
    body: Type


UNIT = TUnit()
T_STRING = TBase("string")


def t_int(idx: Static) -> TBase:
    return TBase("int", (idx,))


def t_bool(idx: Static) -> TBase:
    return TBase("bool", (idx,))


# ---------------------------------------------------------------------------
# Program terms
# ---------------------------------------------------------------------------


API_NAMES = (
    "fork", "cut", "elim", "split", "bsend", "brecv", "send", "recv",
    "skip", "close", "wait", "unify", "exify", "offer", "choose", "recurse",
)

Span = tuple[int, int]  # (line, column)


@dataclass(frozen=True)
class Term:
    pass


def _span_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DVar(Term):
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DUnit(Term):
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DInt(Term):
    value: int
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DBool(Term):
    value: bool
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DStr(Term):
    value: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DEndpoint(Term):
    """A channel endpoint literal; appears only at runtime."""

    chan: int
    roles: tuple[int, ...]
    span: Optional[Span] = _span_field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "roles", tuple(sorted(set(self.roles))))


@dataclass(frozen=True)
class DLam(Term):
    param: str
    body: Term
    annot: Optional[Type] = None
    # resolved closure kind: False once checked against an unrestricted
    # function type, None for plain one-shot closures
    linear: Optional[bool] = field(default=None, compare=False)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DFix(Term):
    """Named recursive function; always a duplicable closure."""

    name: str
    param: str
    body: Term
    dom: Optional[Type] = None
    cod: Optional[Type] = None
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DApp(Term):
    fn: Term
    arg: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DPair(Term):
    left: Term
    right: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DFst(Term):
    arg: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DSnd(Term):
    arg: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DLet(Term):
    var: str
    bound: Term
    body: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DLetPair(Term):
    var1: str
    var2: str
    bound: Term
    body: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DIf(Term):
    cond: Term
    then: Term
    els: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DGuardIntro(Term):
    arg: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DGuardElim(Term):
    arg: Term
    # Filled when an unprovable guard is compiled to a runtime assertion.
    runtime_guard: Optional[Static] = field(default=None, compare=False)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DAssertIntro(Term):
    arg: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DLetAssert(Term):
    var: str
    bound: Term
    body: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DForallIntro(Term):
    arg: Term
    binder: Optional[tuple[str, SortLike]] = field(default=None, compare=False)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DForallElim(Term):
    arg: Term
    sarg: Optional[Static] = None
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DExistsIntro(Term):
    arg: Term
    witness: Optional[Static] = field(default=None, compare=False)
    # full existential type, attached to values created by the runtime so
    # re-checking a pool snapshot can type them
    annot: Optional[Type] = field(default=None, compare=False)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DLetExists(Term):
    svar: str
    var: str
    bound: Term
    body: Term
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DApiCall(Term):
    api: str
    sargs: Optional[tuple[Static, ...]] = None
    args: tuple[Term, ...] = ()
    # Universe of the session a fork/cut call operates on, once resolved.
    universe: Optional[tuple[int, ...]] = field(default=None, compare=False)
    runtime_guard: Optional[Static] = field(default=None, compare=False)
    span: Optional[Span] = _span_field()


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolDecl:
    name: str
    aliases: dict[str, int]
    universe: tuple[int, ...]
    body: Static
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Program:
    protocols: dict[str, ProtocolDecl]
    defs: dict[str, Term]
    main: Term


# ---------------------------------------------------------------------------
# Values and term traversal
# ---------------------------------------------------------------------------


def is_value(e: Term) -> bool:
    match e:
        case DVar() | DUnit() | DInt() | DBool() | DStr() | DEndpoint() \
                | DLam() | DFix():
            return True
        case DPair(l, r):
            return is_value(l) and is_value(r)
        case DGuardIntro(v) | DAssertIntro(v) | DForallIntro(v) | DExistsIntro(v):
            return is_value(v)
        case _:
            return False


def term_children(e: Term) -> tuple[Term, ...]:
    match e:
        case DLam(_, body) | DFix(_, _, body):
            return (body,)
        case DApp(f, a):
            return (f, a)
        case DPair(l, r):
            return (l, r)
        case DFst(a) | DSnd(a):
            return (a,)
        case DLet(_, b, body) | DLetAssert(_, b, body) | DLetExists(_, _, b, body):
            return (b, body)
        case DLetPair(_, _, b, body):
            return (b, body)
        case DIf(c, t, f):
            return (c, t, f)
        case DGuardIntro(a) | DGuardElim(a) | DAssertIntro(a) \
                | DForallIntro(a) | DForallElim(a) | DExistsIntro(a):
            return (a,)
        case DApiCall(_, _, args):
            return args
        case _:
            return ()


def iter_subterms(e: Term) -> Iterator[Term]:
    yield e
    for child in term_children(e):
        yield from iter_subterms(child)


def contains_endpoint(e: Term) -> bool:
    return any(isinstance(sub, DEndpoint) for sub in iter_subterms(e))


# ---------------------------------------------------------------------------
# Free variables and substitution
# ---------------------------------------------------------------------------

_fresh_counter = [0]


def fresh_name(base: str) -> str:
    _fresh_counter[0] += 1
    return f"{base}%{_fresh_counter[0]}"


def static_free_vars(s: Static | Type) -> frozenset[str]:
    match s:
        case SVar(n) | TVar(n):
            return frozenset({n})
        case SInt() | SBool() | SSet() | TUnit():
            return frozenset()
        case SOp(_, args):
            out: frozenset[str] = frozenset()
            for a in args:
                out |= static_free_vars(a)
            return out
        case SComplement(a, _):
            return static_free_vars(a)
        case SLam(p, _, body):
            return static_free_vars(body) - {p}
        case SApp(f, a):
            return static_free_vars(f) | static_free_vars(a)
        case SEnd(r):
            return static_free_vars(r)
        case SBMsg(r, pay, cont):
            return static_free_vars(r) | static_free_vars(pay) | static_free_vars(cont)
        case SPMsg(r1, r2, pay, cont):
            return (static_free_vars(r1) | static_free_vars(r2)
                    | static_free_vars(pay) | static_free_vars(cont))
        case SQuan(r, b):
            return static_free_vars(r) | static_free_vars(b)
        case SBranch(r, l, rr):
            return static_free_vars(r) | static_free_vars(l) | static_free_vars(rr)
        case SFix(b):
            return static_free_vars(b)
        case SIte(c, t, f):
            return static_free_vars(c) | static_free_vars(t) | static_free_vars(f)
        case TBase(_, idx):
            out = frozenset()
            for a in idx:
                out |= static_free_vars(a)
            return out
        case TChan(roles, proto):
            return static_free_vars(roles) | static_free_vars(proto)
        case TPair(l, r) | TFun(l, r):
            return static_free_vars(l) | static_free_vars(r)
        case TGuard(p, b) | TAssert(p, b):
            return static_free_vars(p) | static_free_vars(b)
        case TForall(v, _, b) | TExists(v, _, b):
            return static_free_vars(b) - {v}
        case _:
            raise TypeError(f"not a static or type node: {s!r}")


StaticSubst = dict[str, Union[Static, Type]]


def subst_static(s: Static, m: StaticSubst) -> Static:
    """Capture-avoiding substitution of static variables in a static term."""
    if not m:
        return s
    match s:
        case SVar(n):
            if n in m:
                v = m[n]
                if not isinstance(v, Static):
                    raise TypeError(f"static variable {n} bound to a type")
                return v
            return s
        case SInt() | SBool() | SSet():
            return s
        case SOp(op, args):
            return SOp(op, tuple(subst_static(a, m) for a in args))
        case SComplement(a, uni):
            return SComplement(subst_static(a, m), uni)
        case SLam(p, sort, body):
            m2 = {k: v for k, v in m.items() if k != p}
            if not m2:
                return s
            clash = any(p in static_free_vars(v) for v in m2.values())
            if clash:
                p2 = fresh_name(p)
                body = subst_static(body, {p: SVar(p2)})
                p = p2
            return SLam(p, sort, subst_static(body, m2))
        case SApp(f, a):
            return SApp(subst_static(f, m), subst_static(a, m))
        case SEnd(r):
            return SEnd(subst_static(r, m))
        case SBMsg(r, pay, cont):
            return SBMsg(subst_static(r, m), subst_type(pay, m), subst_static(cont, m))
        case SPMsg(r1, r2, pay, cont):
            return SPMsg(subst_static(r1, m), subst_static(r2, m),
                         subst_type(pay, m), subst_static(cont, m))
        case SQuan(r, b):
            return SQuan(subst_static(r, m), subst_static(b, m))
        case SBranch(r, l, rr):
            return SBranch(subst_static(r, m), subst_static(l, m), subst_static(rr, m))
        case SFix(b):
            return SFix(subst_static(b, m))
        case SIte(c, t, f):
            return SIte(subst_static(c, m), subst_static(t, m), subst_static(f, m))
        case _:
            raise TypeError(f"not a static node: {s!r}")


def subst_type(t: Type, m: StaticSubst) -> Type:
    if not m:
        return t
    match t:
        case TVar(n):
            if n in m:
                v = m[n]
                if isinstance(v, Type):
                    return v
                if isinstance(v, SVar):
                    return TVar(v.name)
                raise TypeError(f"type variable {n} bound to a non-type")
            return t
        case TUnit():
            return t
        case TBase(name, idx):
            return TBase(name, tuple(subst_static(a, m) for a in idx))
        case TChan(roles, proto, uni):
            return TChan(subst_static(roles, m), subst_static(proto, m), uni)
        case TPair(l, r, lin):
            return TPair(subst_type(l, m), subst_type(r, m), lin)
        case TFun(d, c, lin):
            return TFun(subst_type(d, m), subst_type(c, m), lin)
        case TGuard(p, b):
            return TGuard(subst_static(p, m), subst_type(b, m))
        case TAssert(p, b):
            return TAssert(subst_static(p, m), subst_type(b, m))
        case TForall(v, sort, b):
            m2 = {k: x for k, x in m.items() if k != v}
            if not m2:
                return t
            if any(v in static_free_vars(x) for x in m2.values()):
                v2 = fresh_name(v)
                b = subst_type(b, {v: SVar(v2)})
                v = v2
            return TForall(v, sort, subst_type(b, m2))
        case TExists(v, sort, b):
            m2 = {k: x for k, x in m.items() if k != v}
            if not m2:
                return t
            if any(v in static_free_vars(x) for x in m2.values()):
                v2 = fresh_name(v)
                b = subst_type(b, {v: SVar(v2)})
                v = v2
            return TExists(v, sort, subst_type(b, m2))
        case _:
            raise TypeError(f"not a type node: {t!r}")


def subst_statics_in_term(e: Term, m: StaticSubst) -> Term:
    """Substitute static variables inside annotations and static arguments."""
    if not m:
        return e

    def st(s: Optional[Static]) -> Optional[Static]:
        return None if s is None else subst_static(s, m)

    def ty(t: Optional[Type]) -> Optional[Type]:
        return None if t is None else subst_type(t, m)

    match e:
        case DLam(p, body, annot):
            return replace(e, body=subst_statics_in_term(body, m), annot=ty(annot))
        case DFix(_, _, body, dom, cod):
            return replace(e, body=subst_statics_in_term(body, m),
                           dom=ty(dom), cod=ty(cod))
        case DForallElim(arg, sarg):
            return replace(e, arg=subst_statics_in_term(arg, m), sarg=st(sarg))
        case DExistsIntro(arg, w):
            return replace(e, arg=subst_statics_in_term(arg, m), witness=st(w),
                           annot=ty(e.annot))
        case DLetExists(sv, v, bound, body):
            m2 = {k: x for k, x in m.items() if k != sv}
            return replace(e, bound=subst_statics_in_term(bound, m),
                           body=subst_statics_in_term(body, m2))
        case DApiCall(api, sargs, args):
            new_sargs = None
            if sargs is not None:
                new_sargs = tuple(
                    subst_type(s, m) if isinstance(s, Type) else subst_static(s, m)
                    for s in sargs)
            return replace(e, sargs=new_sargs,
                           args=tuple(subst_statics_in_term(a, m) for a in args))
        case DGuardElim(arg):
            out = replace(e, arg=subst_statics_in_term(arg, m))
            if e.runtime_guard is not None:
                out = replace(out, runtime_guard=subst_static(e.runtime_guard, m))
            return out
        case _:
            kids = term_children(e)
            if not kids:
                return e
            new = [subst_statics_in_term(k, m) for k in kids]
            return _rebuild(e, tuple(new))


def _rebuild(e: Term, kids: tuple[Term, ...]) -> Term:
    match e:
        case DLam():
            return replace(e, body=kids[0])
        case DFix():
            return replace(e, body=kids[0])
        case DApp():
            return replace(e, fn=kids[0], arg=kids[1])
        case DPair():
            return replace(e, left=kids[0], right=kids[1])
        case DFst() | DSnd() | DGuardIntro() | DGuardElim() | DAssertIntro() \
                | DForallIntro() | DForallElim() | DExistsIntro():
            return replace(e, arg=kids[0])
        case DLet() | DLetAssert() | DLetExists() | DLetPair():
            return replace(e, bound=kids[0], body=kids[1])
        case DIf():
            return replace(e, cond=kids[0], then=kids[1], els=kids[2])
        case DApiCall():
            return replace(e, args=kids)
        case _:
            raise TypeError(f"cannot rebuild {e!r}")


def term_free_vars(e: Term) -> frozenset[str]:
    match e:
        case DVar(n):
            return frozenset({n})
        case DLam(p, body):
            return term_free_vars(body) - {p}
        case DFix(g, p, body):
            return term_free_vars(body) - {g, p}
        case DLet(x, b, body):
            return term_free_vars(b) | (term_free_vars(body) - {x})
        case DLetPair(x1, x2, b, body):
            return term_free_vars(b) | (term_free_vars(body) - {x1, x2})
        case DLetAssert(x, b, body) | DLetExists(_, x, b, body):
            return term_free_vars(b) | (term_free_vars(body) - {x})
        case _:
            out: frozenset[str] = frozenset()
            for k in term_children(e):
                out |= term_free_vars(k)
            return out


def subst_term(e: Term, name: str, value: Term) -> Term:
    """Capture-avoiding substitution of a term variable."""
    match e:
        case DVar(n):
            return value if n == name else e
        case DLam(p, body):
            if p == name:
                return e
            if p in term_free_vars(value):
                p2 = fresh_name(p)
                body = subst_term(body, p, DVar(p2))
                e = replace(e, param=p2, body=body)
            return replace(e, body=subst_term(e.body, name, value))
        case DFix(g, p, body):
            if name in (g, p):
                return e
            fv = term_free_vars(value)
            if g in fv:
                g2 = fresh_name(g)
                body = subst_term(body, g, DVar(g2))
                e = replace(e, name=g2, body=body)
            if e.param in fv:
                p2 = fresh_name(e.param)
                e = replace(e, param=p2, body=subst_term(e.body, e.param, DVar(p2)))
            return replace(e, body=subst_term(e.body, name, value))
        case DLet(x, b, body):
            b2 = subst_term(b, name, value)
            if x == name:
                return replace(e, bound=b2)
            if x in term_free_vars(value):
                x2 = fresh_name(x)
                body = subst_term(body, x, DVar(x2))
                e = replace(e, var=x2, body=body)
            return replace(e, bound=b2, body=subst_term(e.body, name, value))
        case DLetPair(x1, x2, b, body):
            b2 = subst_term(b, name, value)
            if name in (x1, x2):
                return replace(e, bound=b2)
            fv = term_free_vars(value)
            if x1 in fv:
                nx = fresh_name(x1)
                body = subst_term(body, x1, DVar(nx))
                e = replace(e, var1=nx, body=body)
            if e.var2 in fv:
                nx = fresh_name(e.var2)
                e = replace(e, var2=nx, body=subst_term(e.body, e.var2, DVar(nx)))
            return replace(e, bound=b2, body=subst_term(e.body, name, value))
        case DLetAssert(x, b, body) | DLetExists(_, x, b, body):
            b2 = subst_term(b, name, value)
            if x == name:
                return replace(e, bound=b2)
            if x in term_free_vars(value):
                x2 = fresh_name(x)
                body = subst_term(body, x, DVar(x2))
                e = replace(e, var=x2, body=body)
            return replace(e, bound=b2, body=subst_term(e.body, name, value))
        case _:
            kids = term_children(e)
            if not kids:
                return e
            return _rebuild(e, tuple(subst_term(k, name, value) for k in kids))


# ---------------------------------------------------------------------------
# Alpha equivalence (used by the parse/pretty round-trip tests)
# ---------------------------------------------------------------------------


def static_alpha_eq(a: Static, b: Static, env: Optional[dict[str, str]] = None) -> bool:
    env = env or {}
    match (a, b):
        case (SVar(x), SVar(y)):
            return env.get(x, x) == y
        case (SInt(x), SInt(y)):
            return x == y
        case (SBool(x), SBool(y)):
            return x == y
        case (SSet(x), SSet(y)):
            return x == y
        case (SOp(o1, a1), SOp(o2, a2)):
            return (o1 == o2 and len(a1) == len(a2)
                    and all(static_alpha_eq(p, q, env) for p, q in zip(a1, a2)))
        case (SComplement(x, u1), SComplement(y, u2)):
            return u1 == u2 and static_alpha_eq(x, y, env)
        case (SLam(p1, s1, b1), SLam(p2, s2, b2)):
            return s1 == s2 and static_alpha_eq(b1, b2, {**env, p1: p2})
        case (SApp(f1, x1), SApp(f2, x2)):
            return static_alpha_eq(f1, f2, env) and static_alpha_eq(x1, x2, env)
        case (SEnd(r1), SEnd(r2)):
            return static_alpha_eq(r1, r2, env)
        case (SBMsg(r1, p1, c1), SBMsg(r2, p2, c2)):
            return (static_alpha_eq(r1, r2, env) and type_alpha_eq(p1, p2, env)
                    and static_alpha_eq(c1, c2, env))
        case (SPMsg(s1, t1, p1, c1), SPMsg(s2, t2, p2, c2)):
            return (static_alpha_eq(s1, s2, env) and static_alpha_eq(t1, t2, env)
                    and type_alpha_eq(p1, p2, env) and static_alpha_eq(c1, c2, env))
        case (SQuan(r1, b1), SQuan(r2, b2)):
            return static_alpha_eq(r1, r2, env) and static_alpha_eq(b1, b2, env)
        case (SBranch(r1, l1, rr1), SBranch(r2, l2, rr2)):
            return (static_alpha_eq(r1, r2, env) and static_alpha_eq(l1, l2, env)
                    and static_alpha_eq(rr1, rr2, env))
        case (SFix(b1), SFix(b2)):
            return static_alpha_eq(b1, b2, env)
        case (SIte(c1, t1, f1), SIte(c2, t2, f2)):
            return (static_alpha_eq(c1, c2, env) and static_alpha_eq(t1, t2, env)
                    and static_alpha_eq(f1, f2, env))
        case _:
            return False


def type_alpha_eq(a: Type, b: Type, env: Optional[dict[str, str]] = None) -> bool:
    env = env or {}
    match (a, b):
        case (TVar(x), TVar(y)):
            return env.get(x, x) == y
        case (TUnit(), TUnit()):
            return True
        case (TBase(n1, i1), TBase(n2, i2)):
            return (n1 == n2 and len(i1) == len(i2)
                    and all(static_alpha_eq(p, q, env) for p, q in zip(i1, i2)))
        case (TChan(r1, p1), TChan(r2, p2)):
            return static_alpha_eq(r1, r2, env) and static_alpha_eq(p1, p2, env)
        case (TPair(l1, r1, lin1), TPair(l2, r2, lin2)):
            return (lin1 == lin2 and type_alpha_eq(l1, l2, env)
                    and type_alpha_eq(r1, r2, env))
        case (TFun(d1, c1, lin1), TFun(d2, c2, lin2)):
            return (lin1 == lin2 and type_alpha_eq(d1, d2, env)
                    and type_alpha_eq(c1, c2, env))
        case (TGuard(p1, b1), TGuard(p2, b2)) | (TAssert(p1, b1), TAssert(p2, b2)):
            return static_alpha_eq(p1, p2, env) and type_alpha_eq(b1, b2, env)
        case (TForall(v1, s1, b1), TForall(v2, s2, b2)) \
                | (TExists(v1, s1, b1), TExists(v2, s2, b2)):
            if type(a) is not type(b):
                return False
            return s1 == s2 and type_alpha_eq(b1, b2, {**env, v1: v2})
        case _:
            return False


def term_alpha_eq(a: Term, b: Term, env: Optional[dict[str, str]] = None) -> bool:
    env = env or {}
    match (a, b):
        case (DVar(x), DVar(y)):
            return env.get(x, x) == y
        case (DUnit(), DUnit()):
            return True
        case (DInt(x), DInt(y)):
            return x == y
        case (DBool(x), DBool(y)):
            return x == y
        case (DStr(x), DStr(y)):
            return x == y
        case (DEndpoint(c1, r1), DEndpoint(c2, r2)):
            return c1 == c2 and r1 == r2
        case (DLam(p1, b1, an1), DLam(p2, b2, an2)):
            if (an1 is None) != (an2 is None):
                return False
            if an1 is not None and not type_alpha_eq(an1, an2, env):
                return False
            return term_alpha_eq(b1, b2, {**env, p1: p2})
        case (DFix(g1, p1, b1, d1, c1), DFix(g2, p2, b2, d2, c2)):
            for t1, t2 in ((d1, d2), (c1, c2)):
                if (t1 is None) != (t2 is None):
                    return False
                if t1 is not None and not type_alpha_eq(t1, t2, env):
                    return False
            return term_alpha_eq(b1, b2, {**env, g1: g2, p1: p2})
        case (DLet(x1, bd1, bo1), DLet(x2, bd2, bo2)):
            return (term_alpha_eq(bd1, bd2, env)
                    and term_alpha_eq(bo1, bo2, {**env, x1: x2}))
        case (DLetPair(u1, v1, bd1, bo1), DLetPair(u2, v2, bd2, bo2)):
            return (term_alpha_eq(bd1, bd2, env)
                    and term_alpha_eq(bo1, bo2, {**env, u1: u2, v1: v2}))
        case (DLetAssert(x1, bd1, bo1), DLetAssert(x2, bd2, bo2)):
            return (term_alpha_eq(bd1, bd2, env)
                    and term_alpha_eq(bo1, bo2, {**env, x1: x2}))
        case (DLetExists(s1, x1, bd1, bo1), DLetExists(s2, x2, bd2, bo2)):
            return (term_alpha_eq(bd1, bd2, env)
                    and term_alpha_eq(bo1, bo2, {**env, x1: x2, s1: s2}))
        case (DForallElim(e1, s1), DForallElim(e2, s2)):
            if (s1 is None) != (s2 is None):
                return False
            if s1 is not None and not static_alpha_eq(s1, s2, env):
                return False
            return term_alpha_eq(e1, e2, env)
        case (DExistsIntro(e1, _), DExistsIntro(e2, _)):
            w1, w2 = a.witness, b.witness
            if (w1 is None) != (w2 is None):
                return False
            if w1 is not None and not static_alpha_eq(w1, w2, env):
                return False
            return term_alpha_eq(e1, e2, env)
        case (DApiCall(n1, s1, a1), DApiCall(n2, s2, a2)):
            if n1 != n2 or len(a1) != len(a2):
                return False
            if (s1 is None) != (s2 is None):
                return False
            if s1 is not None:
                if len(s1) != len(s2):
                    return False
                if not all(static_alpha_eq(p, q, env) for p, q in zip(s1, s2)):
                    return False
            return all(term_alpha_eq(p, q, env) for p, q in zip(a1, a2))
        case _:
            if type(a) is not type(b):
                return False
            ka, kb = term_children(a), term_children(b)
            return (len(ka) == len(kb)
                    and all(term_alpha_eq(p, q, env) for p, q in zip(ka, kb)))
