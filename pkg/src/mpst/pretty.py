"""Pretty printer for static terms, types, and program terms.

Output parses back to an alpha-equivalent tree (endpoint literals excepted,
since the surface grammar has no endpoint form).
"""

from __future__ import annotations

from typing import Optional

from .syntax import (
    ArrowSort, Sort, SortLike, Static, SVar, SInt, SBool, SSet, SOp,
    SComplement, SLam, SApp, SEnd, SBMsg, SPMsg, SQuan, SBranch, SFix, SIte,
    Type, TVar, TUnit, TBase, TChan, TPair, TFun, TGuard, TAssert, TForall,
    TExists, Term, DVar, DUnit, DInt, DBool, DStr, DEndpoint, DLam, DFix,
    DApp, DPair, DFst, DSnd, DLet, DLetPair, DIf, DGuardIntro, DGuardElim,
    DAssertIntro, DLetAssert, DForallIntro, DForallElim, DExistsIntro,
    DLetExists, DApiCall,
)

Aliases = Optional[dict[int, str]]

_ARITH = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
_REL = {"eq": "==", "neq": "!=", "lt": "<", "leq": "<=",
        "in": "in", "notin": "notin", "subset": "subset"}
_SETOP = {"union": "\\/", "djunion": "++", "intersect": "/\\", "minus": "\\"}


def pretty_sort(s: SortLike) -> str:
    if isinstance(s, ArrowSort):
        return f"({pretty_sort(s.dom)} -> {pretty_sort(s.cod)})"
    return s.name


def _role(r: Static, aliases: Aliases) -> str:
    if aliases and isinstance(r, SInt) and r.value in aliases:
        return aliases[r.value]
    return pretty_static(r, aliases)


def pretty_static(s: Static, aliases: Aliases = None) -> str:
    match s:
        case SVar(n):
            return n
        case SInt(v):
            return str(v)
        case SBool(v):
            return "true" if v else "false"
        case SSet(ms):
            return "{" + ", ".join(_role(SInt(m), aliases) for m in ms) + "}"
        case SComplement(a, _):
            return f"~{pretty_static(a, aliases)}"
        case SOp("not", (a,)):
            return f"not ({pretty_static(a, aliases)})"
        case SOp(op, (a, b)) if op in _ARITH:
            return f"({pretty_static(a, aliases)} {_ARITH[op]} {pretty_static(b, aliases)})"
        case SOp(op, (a, b)) if op in _REL:
            return f"({pretty_static(a, aliases)} {_REL[op]} {pretty_static(b, aliases)})"
        case SOp(op, (a, b)) if op in _SETOP:
            return f"({pretty_static(a, aliases)} {_SETOP[op]} {pretty_static(b, aliases)})"
        case SOp(op, (a, b)) if op in ("and", "or"):
            return f"({pretty_static(a, aliases)} {op} {pretty_static(b, aliases)})"
        case SLam(p, sort, body):
            return f"fn {p}: {pretty_sort(sort)} => {pretty_static(body, aliases)}"
        case SApp(f, a):
            return f"({pretty_static(f, aliases)})({pretty_static(a, aliases)})"
        case SEnd(r):
            return f"end({_role(r, aliases)})"
        case SBMsg(r, pay, cont):
            return (f"msg({_role(r, aliases)}, {pretty_type(pay, aliases)})"
                    f" :: {pretty_static(cont, aliases)}")
        case SPMsg(r1, r2, pay, cont):
            return (f"msg({_role(r1, aliases)} -> {_role(r2, aliases)}, "
                    f"{pretty_type(pay, aliases)}) :: {pretty_static(cont, aliases)}")
        case SQuan(r, b):
            return f"quan({_role(r, aliases)}, {pretty_static(b, aliases)})"
        case SBranch(r, l, rr):
            return (f"branch({_role(r, aliases)}, {pretty_static(l, aliases)}, "
                    f"{pretty_static(rr, aliases)})")
        case SFix(b):
            return f"fix({pretty_static(b, aliases)})"
        case SIte(c, t, f):
            return (f"ite({pretty_static(c, aliases)}, {pretty_static(t, aliases)}, "
                    f"{pretty_static(f, aliases)})")
        case _:
            raise TypeError(f"cannot print {s!r}")


def pretty_type(t: Type, aliases: Aliases = None) -> str:
    match t:
        case TVar(n):
            return n
        case TUnit():
            return "unit"
        case TBase(name, ()):
            return name
        case TBase(name, idx):
            return f"{name}({', '.join(pretty_static(i, aliases) for i in idx)})"
        case TChan(roles, proto):
            return f"chan({pretty_static(roles, aliases)}, {pretty_static(proto, aliases)})"
        case TPair(l, r, lin):
            op = "<*>" if lin else "*"
            return f"({pretty_type(l, aliases)} {op} {pretty_type(r, aliases)})"
        case TFun(d, c, lin):
            op = "-o" if lin else "->"
            return f"({pretty_type(d, aliases)} {op} {pretty_type(c, aliases)})"
        case TGuard(p, b):
            return f"({pretty_static(p, aliases)} ==> {pretty_type(b, aliases)})"
        case TAssert(p, b):
            return f"({pretty_static(p, aliases)} &&& {pretty_type(b, aliases)})"
        case TForall(v, s, b):
            return f"(forall {v}: {pretty_sort(s)}. {pretty_type(b, aliases)})"
        case TExists(v, s, b):
            return f"(exists {v}: {pretty_sort(s)}. {pretty_type(b, aliases)})"
        case _:
            raise TypeError(f"cannot print {t!r}")


def _string_lit(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def pretty_term(e: Term, aliases: Aliases = None) -> str:
    p = lambda x: pretty_term(x, aliases)
    match e:
        case DVar(n):
            return n
        case DUnit():
            return "()"
        case DInt(v):
            return str(v)
        case DBool(v):
            return "true" if v else "false"
        case DStr(v):
            return _string_lit(v)
        case DEndpoint(c, roles):
            return f"<endpoint {c}^{{{','.join(map(str, roles))}}}>"
        case DLam(param, body, annot):
            if annot is not None:
                return f"(lam ({param} : {pretty_type(annot, aliases)}) => {p(body)})"
            return f"(lam {param} => {p(body)})"
        case DFix(g, x, body, dom, cod):
            d = pretty_type(dom, aliases) if dom is not None else "_"
            c = pretty_type(cod, aliases) if cod is not None else "_"
            return f"(fix {g} ({x} : {d}) : {c} => {p(body)})"
        case DApp(f, a):
            head = p(f)
            if isinstance(f, (DLet, DLetPair, DLetAssert, DLetExists, DIf)):
                head = f"({head})"
            return f"{head}({p(a)})"
        case DPair(l, r):
            return f"({p(l)}, {p(r)})"
        case DFst(a):
            return f"fst({p(a)})"
        case DSnd(a):
            return f"snd({p(a)})"
        case DLet(x, b, body):
            return f"let {x} = {p(b)} in {p(body)}"
        case DLetPair(x, y, b, body):
            return f"let ({x}, {y}) = {p(b)} in {p(body)}"
        case DIf(c, t, f):
            return f"if {p(c)} then {p(t)} else {p(f)}"
        case DGuardIntro(a):
            return f"guard({p(a)})"
        case DGuardElim(a):
            return f"unguard({p(a)})"
        case DAssertIntro(a):
            return f"vouch({p(a)})"
        case DLetAssert(x, b, body):
            return f"let vouch({x}) = {p(b)} in {p(body)}"
        case DForallIntro(a):
            return f"all({p(a)})"
        case DForallElim(a, s):
            if s is None:
                return f"inst({p(a)})"
            return f"inst({p(a)}, {pretty_static(s, aliases)})"
        case DExistsIntro(a, w):
            if w is None:
                return f"pack({p(a)})"
            return f"pack({p(a)}, {pretty_static(w, aliases)})"
        case DLetExists(sv, x, b, body):
            return f"let pack({sv}, {x}) = {p(b)} in {p(body)}"
        case DApiCall(api, _, args):
            return f"{api}({', '.join(p(a) for a in args)})"
        case _:
            raise TypeError(f"cannot print {e!r}")


def pretty(x, aliases: Aliases = None) -> str:
    """Print any syntax node."""
    if isinstance(x, Static):
        return pretty_static(x, aliases)
    if isinstance(x, Type):
        return pretty_type(x, aliases)
    if isinstance(x, Term):
        return pretty_term(x, aliases)
    raise TypeError(f"cannot print {x!r}")
