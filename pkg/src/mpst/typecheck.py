"""Type checking with exact linear accounting.

The judgment threads four contexts: a sorting context for static
variables, a set of assumed propositions, an unrestricted context, and a
linear context.  Instead of guessing context splits, checking returns the
exact set of linear items (variables and endpoint literals) a term
consumes; joins demand disjointness and binders demand single use.

Channel API calls instantiate their pre-defined schemes: static arguments
are read off the endpoint argument's type (or given explicitly), the
instantiated guard goes to the entailment solver, and the endpoint's type
is rewritten to the protocol continuation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import solver
from .dctypes import FULL, DcType, api_signature
from .parser import ParseError  # re-exported for drivers
from .pretty import pretty_static, pretty_type
from .statics import (
    RoleSetValue, SortCtx, SortError, WfError, is_nonlinear, normalize,
    normalize_type, sort_of, sort_of_type, wellformed_stype,
)
from .solver import Assumptions, Invalid, Unknown, Valid, Verdict
from .syntax import (
    ArrowSort, BOOL, INT, SET, STYPE, TYPE, VTYPE, SortLike, Static, SVar,
    SInt, SBool,
    SSet, SOp, SLam, SApp, SEnd, SBMsg, SPMsg, SQuan, SBranch, SFix, SIte,
    SComplement, Type, TVar, TUnit, TBase, TChan, TPair, TFun, TGuard,
    TAssert, TForall, TExists, Term, DVar, DUnit, DInt, DBool, DStr,
    DEndpoint, DLam, DFix, DApp, DPair, DFst, DSnd, DLet, DLetPair, DIf,
    DGuardIntro, DGuardElim, DAssertIntro, DLetAssert, DForallIntro,
    DForallElim, DExistsIntro, DLetExists, DApiCall, Program, Span,
    contains_endpoint, fresh_name, is_value, iter_subterms, static_free_vars,
    subst_static, subst_statics_in_term, subst_term, subst_type,
)

Consumed = frozenset  # of ("v", name) or ("ep", chan, roles)


class TypeCheckError(Exception):
    def __init__(self, code: str, message: str, span: Optional[Span] = None,
                 guard: Optional[Static] = None, verdict: Optional[Verdict] = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.span = span
        self.guard = guard
        self.verdict = verdict

    def record(self) -> dict:
        return {
            "code": self.code,
            "span": list(self.span) if self.span else None,
            "message": self.message,
            "guard": pretty_static(self.guard) if self.guard is not None else None,
            "solverVerdict": type(self.verdict).__name__ if self.verdict else None,
        }


@dataclass(frozen=True)
class ChannelInfo:
    """Current protocol and universe of one live channel."""

    proto: Optional[Static]
    universe: tuple[int, ...]


Signature = dict[int, ChannelInfo]


@dataclass
class Env:
    sorts: dict[str, SortLike] = field(default_factory=dict)
    props: tuple[Static, ...] = ()
    gamma: dict[str, Type] = field(default_factory=dict)
    delta: dict[str, Type] = field(default_factory=dict)

    def child(self, **kw) -> "Env":
        out = Env(dict(self.sorts), self.props, dict(self.gamma), dict(self.delta))
        for k, v in kw.items():
            setattr(out, k, v)
        return out

    def assumptions(self) -> Assumptions:
        set_vars = {n: None for n, s in self.sorts.items() if s == SET}
        int_vars = tuple(n for n, s in self.sorts.items() if s == INT)
        bool_vars = tuple(n for n, s in self.sorts.items() if s == BOOL)
        return Assumptions(self.props, set_vars, int_vars, bool_vars)


def _join(span, *sets: Consumed) -> Consumed:
    out: set = set()
    for s in sets:
        dup = out & set(s)
        if dup:
            item = sorted(dup)[0]
            name = item[1] if item[0] == "v" else f"endpoint #{item[1]}"
            raise TypeCheckError("linear-var-reused",
                                 f"linear resource {name} used more than once", span)
        out |= set(s)
    return frozenset(out)


class Checker:
    def __init__(self, sig: Optional[Signature] = None,
                 budget: int = solver.DEFAULT_BUDGET,
                 assert_runtime: bool = False):
        self.sig = sig or {}
        self.budget = budget
        self.assert_runtime = assert_runtime

    # -- helpers ------------------------------------------------------------

    def entails(self, env: Env, prop: Static) -> Verdict:
        return solver.entails(env.assumptions(), prop, self.budget)

    def _is_linear(self, env: Env, t: Type) -> bool:
        return not is_nonlinear(t, env.sorts)

    def _bind(self, env: Env, name: str, t: Type) -> Env:
        out = env.child()
        out.gamma = dict(env.gamma)
        out.delta = dict(env.delta)
        out.gamma.pop(name, None)
        out.delta.pop(name, None)
        if self._is_linear(env, t):
            out.delta[name] = t
        else:
            out.gamma[name] = t
        return out

    def _leave(self, env: Env, name: str, t: Type, body_consumed: Consumed,
               span) -> Consumed:
        if self._is_linear(env, t) and ("v", name) not in body_consumed:
            raise TypeCheckError("linear-var-unused",
                                 f"linear variable {name} is never used", span)
        return frozenset(x for x in body_consumed if x != ("v", name))

    def _validate_type(self, env: Env, t: Type, span) -> Type:
        try:
            sort_of_type(env.sorts, t)
        except SortError as e:
            raise TypeCheckError("sort-mismatch", str(e), span)
        return normalize_type(t)

    def static_eq(self, env: Env, a: Static, b: Static) -> bool:
        a = normalize(a)
        b = normalize(b)
        if a == b:
            return True
        match (a, b):
            case (SEnd(r1), SEnd(r2)):
                return self.static_eq(env, r1, r2)
            case (SBMsg(r1, p1, c1), SBMsg(r2, p2, c2)):
                return (self.static_eq(env, r1, r2)
                        and self.type_equal(env, p1, p2)
                        and self.static_eq(env, c1, c2))
            case (SPMsg(s1, t1, p1, c1), SPMsg(s2, t2, p2, c2)):
                return (self.static_eq(env, s1, s2) and self.static_eq(env, t1, t2)
                        and self.type_equal(env, p1, p2)
                        and self.static_eq(env, c1, c2))
            case (SQuan(r1, b1), SQuan(r2, b2)):
                return self.static_eq(env, r1, r2) and self._binder_eq(env, b1, b2)
            case (SBranch(r1, l1, rr1), SBranch(r2, l2, rr2)):
                return (self.static_eq(env, r1, r2) and self.static_eq(env, l1, l2)
                        and self.static_eq(env, rr1, rr2))
            case (SFix(b1), SFix(b2)):
                return self._binder_eq(env, b1, b2)
            case (SIte(c1, t1, f1), SIte(c2, t2, f2)):
                return (self.static_eq(env, c1, c2) and self.static_eq(env, t1, t2)
                        and self.static_eq(env, f1, f2))
            case _:
                pass
        try:
            sa = sort_of(env.sorts, a)
            sb = sort_of(env.sorts, b)
        except SortError:
            return False
        if sa != sb or sa not in (INT, BOOL, SET):
            return False
        return isinstance(self.entails(env, SOp("eq", (a, b))), Valid)

    def _binder_eq(self, env: Env, b1: Static, b2: Static) -> bool:
        b1, b2 = normalize(b1), normalize(b2)
        if b1 == b2:
            return True
        if isinstance(b1, SLam) and isinstance(b2, SLam) and b1.sort == b2.sort:
            fresh = fresh_name(b1.param)
            env2 = env.child()
            env2.sorts = dict(env.sorts)
            env2.sorts[fresh] = b1.sort
            return self.static_eq(
                env2,
                subst_static(b1.body, {b1.param: SVar(fresh)}),
                subst_static(b2.body, {b2.param: SVar(fresh)}))
        return False

    def type_equal(self, env: Env, a: Type, b: Type) -> bool:
        a = normalize_type(a)
        b = normalize_type(b)
        match (a, b):
            case (TVar(x), TVar(y)):
                return x == y
            case (TUnit(), TUnit()):
                return True
            case (TBase(n1, i1), TBase(n2, i2)):
                return (n1 == n2 and len(i1) == len(i2)
                        and all(self.static_eq(env, x, y) for x, y in zip(i1, i2)))
            case (TChan(r1, p1), TChan(r2, p2)):
                return self.static_eq(env, r1, r2) and self.static_eq(env, p1, p2)
            case (TPair(l1, r1, k1), TPair(l2, r2, k2)):
                return (k1 == k2 and self.type_equal(env, l1, l2)
                        and self.type_equal(env, r1, r2))
            case (TFun(d1, c1, k1), TFun(d2, c2, k2)):
                return (k1 == k2 and self.type_equal(env, d1, d2)
                        and self.type_equal(env, c1, c2))
            case (TGuard(p1, b1), TGuard(p2, b2)) | (TAssert(p1, b1), TAssert(p2, b2)):
                if type(a) is not type(b):
                    return False
                return self.static_eq(env, p1, p2) and self.type_equal(env, b1, b2)
            case (TForall(v1, s1, b1), TForall(v2, s2, b2)) \
                    | (TExists(v1, s1, b1), TExists(v2, s2, b2)):
                if type(a) is not type(b) or s1 != s2:
                    return False
                fresh = fresh_name(v1)
                env2 = env.child()
                env2.sorts = dict(env.sorts)
                env2.sorts[fresh] = s1
                ref: Union[Static, Type] = (TVar(fresh) if s1 in (TYPE, VTYPE)
                                            else SVar(fresh))
                return self.type_equal(env2, subst_type(b1, {v1: ref}),
                                       subst_type(b2, {v2: ref}))
            case _:
                return False

    # -- synthesis ------------------------------------------------------------

    def synth(self, env: Env, e: Term) -> tuple[Type, Consumed, Term]:
        match e:
            case DVar(n):
                if n in env.delta:
                    return env.delta[n], frozenset({("v", n)}), e
                if n in env.gamma:
                    return env.gamma[n], frozenset(), e
                raise TypeCheckError("unbound-name", f"unbound variable {n}", e.span)
            case DUnit():
                return TUnit(), frozenset(), e
            case DInt(v):
                return TBase("int", (SInt(v),)), frozenset(), e
            case DBool(v):
                return TBase("bool", (SBool(v),)), frozenset(), e
            case DStr():
                return TBase("string"), frozenset(), e
            case DEndpoint(c, roles):
                if c not in self.sig or self.sig[c].proto is None:
                    raise TypeCheckError("dangling-endpoint",
                                         f"endpoint of unknown channel #{c}", e.span)
                info = self.sig[c]
                return (TChan(SSet(roles), info.proto, info.universe),
                        frozenset({("ep", c, roles)}), e)
            case DLam(p, body, annot):
                if annot is not None:
                    dom = self._validate_type(env, annot, e.span)
                else:
                    a = fresh_name("t")
                    env = env.child()
                    env.sorts = dict(env.sorts)
                    env.sorts[a] = VTYPE
                    dom = TVar(a)
                inner = self._bind(env, p, dom)
                cod, used, body2 = self.synth(inner, body)
                used = self._leave(env, p, dom, used, e.span)
                linear = e.linear is not False
                if not linear and used:
                    raise TypeCheckError(
                        "nonlinear-capture-of-linear",
                        "unrestricted function captures linear resources", e.span)
                return (TFun(dom, cod, linear=linear), used,
                        replace(e, body=body2))
            case DFix():
                return self._fix(env, e)
            case DApp(f, a):
                tf, cf, f2 = self.synth(env, f)
                tf = normalize_type(tf)
                if isinstance(tf, TGuard):
                    raise TypeCheckError(
                        "type-mismatch",
                        "guarded value must be released with unguard before use",
                        e.span)
                if not isinstance(tf, TFun):
                    raise TypeCheckError("type-mismatch",
                                         f"applied non-function of type "
                                         f"{pretty_type(tf)}", e.span)
                ca, a2 = self.check(env, a, tf.dom)
                return tf.cod, _join(e.span, cf, ca), replace(e, fn=f2, arg=a2)
            case DPair(l, r):
                tl, cl, l2 = self.synth(env, l)
                tr, cr, r2 = self.synth(env, r)
                lin = self._is_linear(env, tl) or self._is_linear(env, tr)
                return (TPair(tl, tr, lin), _join(e.span, cl, cr),
                        replace(e, left=l2, right=r2))
            case DFst(a):
                ta, ca, a2 = self.synth(env, a)
                ta = normalize_type(ta)
                if not isinstance(ta, TPair):
                    raise TypeCheckError("type-mismatch", "fst of a non-pair", e.span)
                if self._is_linear(env, ta.right):
                    raise TypeCheckError("linear-var-unused",
                                         "fst discards a linear component", e.span)
                return ta.left, ca, replace(e, arg=a2)
            case DSnd(a):
                ta, ca, a2 = self.synth(env, a)
                ta = normalize_type(ta)
                if not isinstance(ta, TPair):
                    raise TypeCheckError("type-mismatch", "snd of a non-pair", e.span)
                if self._is_linear(env, ta.left):
                    raise TypeCheckError("linear-var-unused",
                                         "snd discards a linear component", e.span)
                return ta.right, ca, replace(e, arg=a2)
            case DLet(x, b, body):
                tb, cb, b2 = self.synth(env, b)
                inner = self._bind(env, x, tb)
                tt, cbody, body2 = self.synth(inner, body)
                cbody = self._leave(env, x, tb, cbody, e.span)
                return tt, _join(e.span, cb, cbody), replace(e, bound=b2, body=body2)
            case DLetPair(x1, x2, b, body):
                tb, cb, b2 = self.synth(env, b)
                tb = normalize_type(tb)
                if not isinstance(tb, TPair):
                    raise TypeCheckError("type-mismatch",
                                         "let-pair of a non-pair value", e.span)
                inner = self._bind(self._bind(env, x1, tb.left), x2, tb.right)
                tt, cbody, body2 = self.synth(inner, body)
                cbody = self._leave(env, x2, tb.right, cbody, e.span)
                cbody = self._leave(env, x1, tb.left, cbody, e.span)
                return tt, _join(e.span, cb, cbody), replace(e, bound=b2, body=body2)
            case DIf():
                return self._if(env, e, None)
            case DGuardElim(a):
                ta, ca, a2 = self.synth(env, a)
                ta = normalize_type(ta)
                if not isinstance(ta, TGuard):
                    raise TypeCheckError("type-mismatch",
                                         "unguard of a non-guarded value", e.span)
                out = DGuardElim(a2, span=e.span)
                v = self.entails(env, ta.prop)
                if isinstance(v, Valid):
                    return ta.body, ca, out
                if isinstance(v, Unknown) and self.assert_runtime:
                    return ta.body, ca, replace(out, runtime_guard=normalize(ta.prop))
                raise TypeCheckError("guard-unprovable",
                                     f"cannot establish {pretty_static(ta.prop)}",
                                     e.span, guard=ta.prop, verdict=v)
            case DLetAssert(x, b, body):
                tb, cb, b2 = self.synth(env, b)
                tb = normalize_type(tb)
                if not isinstance(tb, TAssert):
                    raise TypeCheckError("type-mismatch",
                                         "let-vouch of a non-asserted value", e.span)
                inner = self._bind(env, x, tb.body)
                inner.props = env.props + (tb.prop,)
                tt, cbody, body2 = self.synth(inner, body)
                cbody = self._leave(env, x, tb.body, cbody, e.span)
                return tt, _join(e.span, cb, cbody), replace(e, bound=b2, body=body2)
            case DForallElim(a, s):
                ta, ca, a2 = self.synth(env, a)
                ta = normalize_type(ta)
                if not isinstance(ta, TForall):
                    raise TypeCheckError("type-mismatch",
                                         "inst of a non-universal value", e.span)
                if s is None:
                    raise TypeCheckError("needs-annotation",
                                         "instantiation argument required", e.span)
                self._check_sort(env, s, ta.sort, e.span)
                ref = self._static_ref(ta.sort, s)
                out_t = normalize_type(subst_type(ta.body, {ta.var: ref}))
                return out_t, ca, replace(e, arg=a2, sarg=normalize(s))
            case DLetExists(sv, x, b, body):
                tb, cb, b2 = self.synth(env, b)
                tb = normalize_type(tb)
                if not isinstance(tb, TExists):
                    raise TypeCheckError("type-mismatch",
                                         "let-pack of a non-existential value", e.span)
                name = sv
                if sv in env.sorts:
                    name = fresh_name(sv)
                    body = subst_statics_in_term(body, {sv: SVar(name)})
                inner = env.child()
                inner.sorts = dict(env.sorts)
                inner.sorts[name] = tb.sort
                ref = (TVar(name) if tb.sort in (TYPE, VTYPE) else SVar(name))
                xt = normalize_type(subst_type(tb.body, {tb.var: ref}))
                inner = self._bind(inner, x, xt)
                tt, cbody, body2 = self.synth(inner, body)
                cbody = self._leave(env, x, xt, cbody, e.span)
                if name in static_free_vars(tt):
                    raise TypeCheckError("escape",
                                         f"existential variable {sv} escapes its scope",
                                         e.span)
                out = replace(e, svar=name, bound=b2, body=body2)
                return tt, _join(e.span, cb, cbody), out
            case DApiCall():
                return self._api_call(env, e)
            case DExistsIntro() if e.annot is not None:
                expected = self._validate_type(env, e.annot, e.span)
                if not isinstance(expected, TExists):
                    raise TypeCheckError("type-mismatch",
                                         "pack annotated with a non-existential",
                                         e.span)
                used, e2 = self.check(env, e, expected)
                return expected, used, replace(e2, annot=expected)
            case DGuardIntro() | DForallIntro() | DAssertIntro() | DExistsIntro():
                raise TypeCheckError("needs-annotation",
                                     "introduction form needs an expected type",
                                     e.span)
            case _:
                raise TypeCheckError("type-mismatch", f"cannot type {e!r}", e.span)

    def _static_ref(self, sort: SortLike, s: Static) -> Union[Static, Type]:
        return s

    def _check_sort(self, env: Env, s: Static, want: SortLike, span) -> None:
        try:
            got = sort_of(env.sorts, s)
        except SortError as ex:
            raise TypeCheckError("sort-mismatch", str(ex), span)
        if got != want:
            raise TypeCheckError("sort-mismatch",
                                 f"static argument has sort {got}, expected {want}",
                                 span)

    def _fix(self, env: Env, e: DFix) -> tuple[Type, Consumed, Term]:
        if e.dom is None or e.cod is None:
            raise TypeCheckError("needs-annotation",
                                 "recursive functions need domain and codomain "
                                 "annotations", e.span)
        dom = self._validate_type(env, e.dom, e.span)
        cod = self._validate_type(env, e.cod, e.span)
        fty = TFun(dom, cod, linear=False)
        inner = self._bind(env, e.name, fty)
        inner = self._bind(inner, e.param, dom)
        used, body2 = self.check(inner, e.body, cod)
        used = self._leave(env, e.param, dom, used, e.span)
        leftovers = [u for u in used if u[0] != "v" or u[1] != e.name]
        if leftovers:
            raise TypeCheckError("nonlinear-capture-of-linear",
                                 "recursive function captures linear resources",
                                 e.span)
        return fty, frozenset(), replace(e, body=body2, dom=dom, cod=cod)

    def _if(self, env: Env, e: DIf, expected: Optional[Type]):
        tc, cc, c2 = self.synth(env, e.cond)
        tc = normalize_type(tc)
        if not (isinstance(tc, TBase) and tc.name == "bool"):
            raise TypeCheckError("type-mismatch", "if condition must be a boolean",
                                 e.span)
        env_t, env_f = env.child(), env.child()
        if len(tc.indices) == 1:
            idx = tc.indices[0]
            env_t.props = env.props + (SOp("eq", (idx, SBool(True))),)
            env_f.props = env.props + (SOp("eq", (idx, SBool(False))),)
        # a branch whose assumptions are contradictory is dead code and
        # checks vacuously (this arises when re-checking pool snapshots
        # after a choice has been resolved)
        dead_t = isinstance(self.entails(env_t, SBool(False)), Valid)
        dead_f = isinstance(self.entails(env_f, SBool(False)), Valid)
        tt = te = None
        ct = ce = frozenset()
        t2, f2 = e.then, e.els
        if not dead_t:
            if expected is None:
                tt, ct, t2 = self.synth(env_t, e.then)
            else:
                ct, t2 = self.check(env_t, e.then, expected)
        if not dead_f:
            if expected is None:
                te, ce, f2 = self.synth(env_f, e.els)
            else:
                ce, f2 = self.check(env_f, e.els, expected)
        if not dead_t and not dead_f:
            if expected is None and not self.type_equal(env, tt, te):
                raise TypeCheckError("type-mismatch",
                                     f"branches disagree: {pretty_type(tt)} vs "
                                     f"{pretty_type(te)}", e.span)
            if ct != ce:
                diff = sorted(set(ct) ^ set(ce))
                raise TypeCheckError("linear-var-unused",
                                     f"branches consume different linear "
                                     f"resources: {diff}", e.span)
        if dead_t:
            ct = ce
            tt = te
        out_t = expected if expected is not None else (tt if tt is not None
                                                       else TUnit())
        out = replace(e, cond=c2, then=t2, els=f2)
        if expected is None:
            return out_t, _join(e.span, cc, ct), out
        return _join(e.span, cc, ct), out

    # -- checking -----------------------------------------------------------

    def check(self, env: Env, e: Term, expected: Type) -> tuple[Consumed, Term]:
        expected = normalize_type(expected)
        match (e, expected):
            case (DLam(p, body, annot), TFun(dom, cod, lin)):
                if annot is not None:
                    a = self._validate_type(env, annot, e.span)
                    if not self.type_equal(env, a, dom):
                        raise TypeCheckError(
                            "type-mismatch",
                            f"parameter annotation {pretty_type(a)} differs from "
                            f"expected {pretty_type(dom)}", e.span)
                inner = self._bind(env, p, dom)
                used, body2 = self.check(inner, body, cod)
                used = self._leave(env, p, dom, used, e.span)
                if not lin and used:
                    raise TypeCheckError(
                        "nonlinear-capture-of-linear",
                        "unrestricted function captures linear resources", e.span)
                return used, replace(e, body=body2, annot=annot or dom, linear=lin)
            case (DGuardIntro(v), TGuard(p, b)):
                if not is_value(v):
                    raise TypeCheckError("value-required",
                                         "guard introduction needs a value", e.span)
                inner = env.child()
                inner.props = env.props + (p,)
                used, v2 = self.check(inner, v, b)
                return used, replace(e, arg=v2)
            case (DForallIntro(v), TForall(a, sort, b)):
                if not is_value(v):
                    raise TypeCheckError("value-required",
                                         "forall introduction needs a value", e.span)
                name = a if a not in env.sorts else fresh_name(a)
                inner = env.child()
                inner.sorts = dict(env.sorts)
                inner.sorts[name] = sort
                ref = (TVar(name) if sort in (TYPE, VTYPE) else SVar(name))
                used, v2 = self.check(inner, v, subst_type(b, {a: ref}))
                return used, replace(e, arg=v2, binder=(name, sort))
            case (DAssertIntro(x), TAssert(p, b)):
                v = self.entails(env, p)
                if not isinstance(v, Valid):
                    raise TypeCheckError("guard-unprovable",
                                         f"cannot establish asserted "
                                         f"{pretty_static(p)}", e.span,
                                         guard=p, verdict=v)
                used, x2 = self.check(env, x, b)
                return used, replace(e, arg=x2)
            case (DExistsIntro(x, w), TExists(a, sort, b)):
                if w is not None:
                    self._check_sort(env, w, sort, e.span)
                    used, x2 = self.check(env, x, subst_type(b, {a: normalize(w)}))
                    return used, replace(e, arg=x2, witness=normalize(w),
                                         annot=expected)
                tx, used, x2 = self.synth(env, x)
                th: dict = {}
                if not self._match_type(env, b, normalize_type(tx), {a: sort}, th) \
                        or a not in th:
                    raise TypeCheckError("needs-annotation",
                                         "cannot infer existential witness", e.span)
                wit = th[a]
                if not isinstance(wit, Static):
                    raise TypeCheckError("needs-annotation",
                                         "cannot infer existential witness", e.span)
                return used, replace(e, arg=x2, witness=normalize(wit),
                                     annot=expected)
            case (DPair(l, r), TPair(tl, tr, _)):
                cl, l2 = self.check(env, l, tl)
                cr, r2 = self.check(env, r, tr)
                return _join(e.span, cl, cr), replace(e, left=l2, right=r2)
            case (DIf(), _):
                return self._if(env, e, expected)
            case (DLet(x, b, body), _):
                tb, cb, b2 = self.synth(env, b)
                inner = self._bind(env, x, tb)
                cbody, body2 = self.check(inner, body, expected)
                cbody = self._leave(env, x, tb, cbody, e.span)
                return _join(e.span, cb, cbody), replace(e, bound=b2, body=body2)
            case (DLetPair(x1, x2, b, body), _):
                tb, cb, b2 = self.synth(env, b)
                tb = normalize_type(tb)
                if not isinstance(tb, TPair):
                    raise TypeCheckError("type-mismatch",
                                         "let-pair of a non-pair value", e.span)
                inner = self._bind(self._bind(env, x1, tb.left), x2, tb.right)
                cbody, body2 = self.check(inner, body, expected)
                cbody = self._leave(env, x2, tb.right, cbody, e.span)
                cbody = self._leave(env, x1, tb.left, cbody, e.span)
                return _join(e.span, cb, cbody), replace(e, bound=b2, body=body2)
            case _:
                t, used, e2 = self.synth(env, e)
                if not self.type_equal(env, t, expected):
                    raise TypeCheckError(
                        "type-mismatch",
                        f"expected {pretty_type(expected)}, got {pretty_type(t)}",
                        getattr(e, "span", None))
                return used, e2

    # -- first-order matching -------------------------------------------------

    def _match_type(self, env: Env, pat: Type, actual: Type,
                    holes: dict[str, SortLike], th: dict) -> bool:
        pat = normalize_type(subst_type(pat, dict(th))) if th else normalize_type(pat)
        actual = normalize_type(actual)
        match (pat, actual):
            case (TVar(n), _) if n in holes:
                th[n] = actual
                return True
            case (TVar(x), TVar(y)):
                return x == y
            case (TUnit(), TUnit()):
                return True
            case (TBase(n1, i1), TBase(n2, i2)):
                if n1 != n2 or len(i1) != len(i2):
                    return False
                return all(self._match_static(env, p, a, holes, th)
                           for p, a in zip(i1, i2))
            case (TChan(r1, p1), TChan(r2, p2)):
                return (self._match_static(env, r1, r2, holes, th)
                        and self._match_static(env, p1, p2, holes, th))
            case (TPair(l1, r1, k1), TPair(l2, r2, k2)):
                return (k1 == k2 and self._match_type(env, l1, l2, holes, th)
                        and self._match_type(env, r1, r2, holes, th))
            case (TFun(d1, c1, k1), TFun(d2, c2, k2)):
                return (k1 == k2 and self._match_type(env, d1, d2, holes, th)
                        and self._match_type(env, c1, c2, holes, th))
            case (TGuard(p1, b1), TGuard(p2, b2)) | (TAssert(p1, b1), TAssert(p2, b2)):
                if type(pat) is not type(actual):
                    return False
                return (self._match_static(env, p1, p2, holes, th)
                        and self._match_type(env, b1, b2, holes, th))
            case (TForall(v1, s1, b1), TForall(v2, s2, b2)) \
                    | (TExists(v1, s1, b1), TExists(v2, s2, b2)):
                if type(pat) is not type(actual) or s1 != s2:
                    return False
                fresh = fresh_name(v1)
                ref = (TVar(fresh) if s1 in (TYPE, VTYPE) else SVar(fresh))
                return self._match_type(env, subst_type(b1, {v1: ref}),
                                        subst_type(b2, {v2: ref}), holes, th)
            case _:
                return False

    def _match_static(self, env: Env, pat: Static, actual: Static,
                      holes: dict[str, SortLike], th: dict) -> bool:
        pat = normalize(subst_static(pat, dict(th))) if th else normalize(pat)
        actual = normalize(actual)
        if isinstance(pat, SVar) and pat.name in holes:
            th[pat.name] = actual
            return True
        if pat == actual:
            return True
        match (pat, actual):
            case (SBMsg(r1, p1, c1), SBMsg(r2, p2, c2)):
                return (self._match_static(env, r1, r2, holes, th)
                        and self._match_type(env, p1, p2, holes, th)
                        and self._match_static(env, c1, c2, holes, th))
            case (SPMsg(s1, t1, p1, c1), SPMsg(s2, t2, p2, c2)):
                return (self._match_static(env, s1, s2, holes, th)
                        and self._match_static(env, t1, t2, holes, th)
                        and self._match_type(env, p1, p2, holes, th)
                        and self._match_static(env, c1, c2, holes, th))
            case (SEnd(r1), SEnd(r2)):
                return self._match_static(env, r1, r2, holes, th)
            case (SQuan(r1, b1), SQuan(r2, b2)):
                return (self._match_static(env, r1, r2, holes, th)
                        and self._match_static(env, b1, b2, holes, th))
            case (SBranch(r1, l1, rr1), SBranch(r2, l2, rr2)):
                return (self._match_static(env, r1, r2, holes, th)
                        and self._match_static(env, l1, l2, holes, th)
                        and self._match_static(env, rr1, rr2, holes, th))
            case (SFix(b1), SFix(b2)):
                return self._match_static(env, b1, b2, holes, th)
            case (SApp(f1, a1), SApp(f2, a2)):
                return (self._match_static(env, f1, f2, holes, th)
                        and self._match_static(env, a1, a2, holes, th))
            case _:
                return self.static_eq(env, pat, actual)

    # -- API calls -------------------------------------------------------------

    def _api_call(self, env: Env, e: DApiCall) -> tuple[Type, Consumed, Term]:
        api = e.api
        try:
            dc = api_signature(api)
        except Exception:
            raise TypeCheckError("unknown-api", f"unknown API {api}", e.span)
        expected_arity = len(dc.arg_types)
        if len(e.args) != expected_arity:
            raise TypeCheckError("arity",
                                 f"{api} takes {expected_arity} argument(s), "
                                 f"got {len(e.args)}", e.span)

        th: dict[str, Union[Static, Type]] = {}
        universe: Optional[tuple[int, ...]] = e.universe
        consumed: list[Consumed] = []
        elab_args: list[Term] = list(e.args)
        done: set[int] = set()

        if e.sargs is not None:
            if len(e.sargs) != len(dc.quantified):
                raise TypeCheckError("arity",
                                     f"{api} expects {len(dc.quantified)} static "
                                     f"argument(s)", e.span)
            for (name, sort), s in zip(dc.quantified, e.sargs):
                # binder sorts of the quantifier APIs vary per site and are
                # validated after specialization
                if isinstance(s, Static) and sort not in (TYPE, VTYPE) \
                        and not isinstance(sort, ArrowSort):
                    self._check_sort(env, s, sort, e.span)
                th[name] = s

        if api == "fork":
            dom_t, cu = self._fork_split_fun(env, e, 0, th, "rs1", "pi",
                                             consumed, elab_args, done)
            universe = universe or cu
            if "rs2" not in th:
                rs1 = normalize(th["rs1"])  # type: ignore[arg-type]
                if universe is None or not isinstance(rs1, SSet):
                    raise TypeCheckError(
                        "sort-mismatch",
                        "cannot determine the session universe at this fork; "
                        "annotate the thread function with a declared protocol",
                        e.span)
                th["rs2"] = SSet(tuple(r for r in universe if r not in rs1.members))
        elif api in ("cut", "elim", "split") or api in (
                "bsend", "brecv", "send", "recv", "skip", "close", "wait",
                "unify", "exify", "offer", "choose", "recurse"):
            t0, c0, a0 = self.synth(env, e.args[0])
            consumed.append(c0)
            elab_args[0] = a0
            done.add(0)
            t0 = normalize_type(t0)
            if not isinstance(t0, TChan):
                raise TypeCheckError("type-mismatch",
                                     f"{api} expects an endpoint, got "
                                     f"{pretty_type(t0)}", e.span)
            universe = universe or t0.universe
            proto = self._resolve_head(env, t0.proto, e.span)
            if api == "cut":
                th.setdefault("rs1", t0.roles)
                th.setdefault("pi", proto)
                t1, c1, a1 = self.synth(env, e.args[1])
                consumed.append(c1)
                elab_args[1] = a1
                done.add(1)
                t1 = normalize_type(t1)
                if not isinstance(t1, TChan):
                    raise TypeCheckError("type-mismatch",
                                         "cut expects two endpoints", e.span)
                if not self.static_eq(env, proto, t1.proto):
                    raise TypeCheckError(
                        "protocol-head-mismatch",
                        "cut requires both channels at the same protocol", e.span)
                th.setdefault("rs2", t1.roles)
                if universe is None:
                    universe = t1.universe
                if t1.universe is not None and universe is not None \
                        and t1.universe != universe:
                    raise TypeCheckError("sort-mismatch",
                                         "cut across different universes", e.span)
            elif api == "elim":
                th.setdefault("pi", proto)
                roles = normalize(t0.roles)
                if roles != SSet(()):
                    raise TypeCheckError("guard-unprovable",
                                         "elim needs an endpoint with no roles",
                                         e.span, verdict=Invalid({}))
            elif api == "split":
                th.setdefault("pi", proto)
                _, _ = self._fork_split_fun(env, e, 1, th, "rs1", "pi2",
                                            consumed, elab_args, done)
                pi2 = th.pop("pi2", None)
                if pi2 is not None and not self.static_eq(env, proto, pi2):  # type: ignore[arg-type]
                    raise TypeCheckError(
                        "protocol-head-mismatch",
                        "split thread function expects a different protocol", e.span)
                if "rs2" not in th:
                    roles = normalize(t0.roles)
                    rs1 = normalize(th["rs1"])  # type: ignore[arg-type]
                    if not (isinstance(roles, SSet) and isinstance(rs1, SSet)):
                        raise TypeCheckError("sort-mismatch",
                                             "split needs concrete role sets", e.span)
                    if not set(rs1.members) <= set(roles.members):
                        raise TypeCheckError(
                            "guard-unprovable",
                            f"split roles {list(rs1.members)} not held by the "
                            f"endpoint {list(roles.members)}", e.span,
                            verdict=Invalid({}))
                    th["rs2"] = SSet(tuple(r for r in roles.members
                                           if r not in rs1.members))
            else:
                th.setdefault("rs", t0.roles)
                self._bind_head(env, api, proto, th, e.span)
        else:
            raise TypeCheckError("unknown-api", f"unknown API {api}", e.span)

        dc = self._specialize(api, th, e.span)

        # offer's boolean argument fixes the quantified index
        if api == "offer":
            tb, cb, ab = self.synth(env, e.args[1])
            consumed.append(cb)
            elab_args[1] = ab
            done.add(1)
            tb = normalize_type(tb)
            if not (isinstance(tb, TBase) and tb.name == "bool"
                    and len(tb.indices) == 1):
                raise TypeCheckError("type-mismatch",
                                     "offer expects an indexed boolean", e.span)
            th["b"] = tb.indices[0]

        missing = [n for n, _ in dc.quantified if n not in th]
        if missing:
            raise TypeCheckError("needs-annotation",
                                 f"{api}: cannot infer static argument(s) "
                                 f"{missing}", e.span)

        subst = dict(th)
        guard = dc.guard
        if dc.needs_universe:
            if universe is None:
                raise TypeCheckError("sort-mismatch",
                                     f"{api}: session universe unknown", e.span)
            subst[FULL] = SSet(universe)
        guard = normalize(subst_static(guard, subst))
        runtime_guard = None
        if guard != SBool(True):
            v = self.entails(env, guard)
            if isinstance(v, Unknown) and self.assert_runtime:
                runtime_guard = guard
            elif not isinstance(v, Valid):
                raise TypeCheckError("guard-unprovable",
                                     f"{api}: guard {pretty_static(guard)} does "
                                     f"not hold", e.span, guard=guard, verdict=v)

        # remaining dynamic arguments (payloads, thread functions)
        for i in range(len(e.args)):
            if i in done:
                continue
            expected_t = normalize_type(subst_type(dc.arg_types[i], subst))
            expected_t = self._attach_universe(expected_t, universe)
            ci, ai = self.check(env, e.args[i], expected_t)
            consumed.append(ci)
            elab_args[i] = ai

        result = normalize_type(subst_type(dc.result_type, subst))
        result = self._attach_universe(result, universe)
        sargs = tuple(th[n] for n, _ in dc.quantified)
        out = replace(e, sargs=sargs, args=tuple(elab_args), universe=universe,
                      runtime_guard=runtime_guard)
        return result, _join(e.span, *consumed), out

    def _fork_split_fun(self, env: Env, e: DApiCall, idx: int,
                        th: dict, rs_hole: str, pi_hole: str,
                        consumed: list, elab_args: list, done: set):
        """Read (roles, protocol) off a thread-function argument's type."""
        if rs_hole in th and "pi" in th:
            expected = TFun(TChan(th[rs_hole], th["pi"]), TUnit(), linear=True)  # type: ignore[arg-type]
            ci, ai = self.check(env, e.args[idx], expected)
            consumed.append(ci)
            elab_args[idx] = ai
            done.add(idx)
            return expected.dom, None
        tfn, cfn, afn = self.synth(env, e.args[idx])
        consumed.append(cfn)
        elab_args[idx] = afn
        done.add(idx)
        tfn = normalize_type(tfn)
        if not (isinstance(tfn, TFun) and isinstance(tfn.dom, TChan)
                and isinstance(tfn.cod, TUnit)):
            raise TypeCheckError(
                "type-mismatch",
                f"{e.api} expects a thread function over an endpoint, got "
                f"{pretty_type(tfn)}; annotate its parameter", e.span)
        th.setdefault(rs_hole, tfn.dom.roles)
        th.setdefault(pi_hole, tfn.dom.proto)
        return tfn.dom, tfn.dom.universe

    def _resolve_head(self, env: Env, proto: Static, span) -> Static:
        proto = normalize(proto)
        for _ in range(64):
            if isinstance(proto, SIte):
                if isinstance(self.entails(env, SOp("eq", (proto.cond, SBool(True)))),
                              Valid):
                    proto = normalize(proto.then)
                    continue
                if isinstance(self.entails(env, SOp("eq", (proto.cond, SBool(False)))),
                              Valid):
                    proto = normalize(proto.els)
                    continue
                raise TypeCheckError(
                    "protocol-head-mismatch",
                    f"protocol conditional {pretty_static(proto.cond)} is "
                    "undetermined here", span)
            return proto
        raise TypeCheckError("protocol-head-mismatch",
                             "protocol does not normalize", span)

    def _bind_head(self, env: Env, api: str, proto: Static, th: dict, span) -> None:
        def mismatch():
            raise TypeCheckError(
                "protocol-head-mismatch",
                f"{api} does not interpret protocol {pretty_static(proto)}", span)

        match api, proto:
            case ("bsend" | "brecv"), SBMsg(r, pay, cont):
                th.setdefault("r", r)
                th.setdefault("t", pay)
                th.setdefault("pi", cont)
            case ("send" | "recv" | "skip"), SPMsg(r1, r2, pay, cont):
                th.setdefault("r1", r1)
                th.setdefault("r2", r2)
                th.setdefault("t", pay)
                th.setdefault("pi", cont)
            case ("close" | "wait"), SEnd(r):
                th.setdefault("r", r)
            case ("unify" | "exify"), SQuan(r, binder):
                th.setdefault("r", r)
                th.setdefault("f", normalize(binder))
            case ("offer" | "choose"), SBranch(r, l, rr):
                th.setdefault("r", r)
                th.setdefault("pi1", l)
                th.setdefault("pi2", rr)
            case ("recurse", SFix(binder)):
                th.setdefault("f", normalize(binder))
            case _:
                mismatch()

    def _specialize(self, api: str, th: dict, span) -> DcType:
        if api in ("unify", "exify"):
            binder = th.get("f")
            binder = normalize(binder) if isinstance(binder, Static) else binder
            if not isinstance(binder, SLam):
                raise TypeCheckError("protocol-head-mismatch",
                                     f"{api}: quantifier binder is not a static "
                                     "function", span)
            return api_signature(api, binder.sort)
        return api_signature(api)

    def _attach_universe(self, t: Type, universe: Optional[tuple[int, ...]]) -> Type:
        if universe is None:
            return t
        match t:
            case TChan(roles, proto, None):
                return TChan(roles, proto, universe)
            case TPair(l, r, lin):
                return TPair(self._attach_universe(l, universe),
                             self._attach_universe(r, universe), lin)
            case TForall(v, s, b):
                return TForall(v, s, self._attach_universe(b, universe))
            case TExists(v, s, b):
                return TExists(v, s, self._attach_universe(b, universe))
            case TGuard(p, b):
                return TGuard(p, self._attach_universe(b, universe))
            case TAssert(p, b):
                return TAssert(p, self._attach_universe(b, universe))
            case _:
                return t


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def typecheck_expr(sorts: SortCtx, assumptions: Assumptions, gamma: dict,
                   delta: dict, sig: Signature, e: Term,
                   budget: int = solver.DEFAULT_BUDGET,
                   assert_runtime: bool = False) -> tuple[Type, Consumed, Term]:
    env = Env(dict(sorts), tuple(assumptions.props), dict(gamma), dict(delta))
    return Checker(sig, budget, assert_runtime).synth(env, e)


def typecheck_pool(threads: dict[int, Term], sig: Signature,
                   budget: int = solver.DEFAULT_BUDGET) -> None:
    """Thread 0 at any type, others at unit, every endpoint used once."""
    checker = Checker(sig, budget)
    seen: dict[tuple[int, tuple[int, ...]], int] = {}
    for tid in sorted(threads):
        body = threads[tid]
        t, used, _ = checker.synth(Env(), body)
        if tid != 0 and not checker.type_equal(Env(), t, TUnit()):
            raise TypeCheckError("type-mismatch",
                                 f"thread {tid} has type {pretty_type(t)}, "
                                 "expected unit")
        for item in used:
            if item[0] != "ep":
                raise TypeCheckError("unbound-name",
                                     f"thread {tid} is not closed: {item[1]}")
            key = (item[1], item[2])
            if key in seen:
                raise TypeCheckError(
                    "linear-var-reused",
                    f"endpoint #{key[0]}^{list(key[1])} held by threads "
                    f"{seen[key]} and {tid}")
            seen[key] = tid
    # every live channel's endpoints must partition its universe
    per_chan: dict[int, list[tuple[int, ...]]] = {}
    for (c, roles) in seen:
        per_chan.setdefault(c, []).append(roles)
    for c, info in sig.items():
        cohort = per_chan.get(c, [])
        flat: list[int] = [r for roles in cohort for r in roles]
        if len(flat) != len(set(flat)) or set(flat) != set(info.universe):
            raise TypeCheckError(
                "dangling-endpoint",
                f"channel #{c}: endpoints {sorted(cohort)} do not partition "
                f"universe {list(info.universe)}")
    for c in per_chan:
        if c not in sig:
            raise TypeCheckError("dangling-endpoint",
                                 f"endpoint of unknown channel #{c}")


def inline_defs(prog: Program) -> Term:
    expanded: dict[str, Term] = {}
    for name, body in prog.defs.items():
        for dname, dbody in expanded.items():
            body = subst_term(body, dname, dbody)
        expanded[name] = body
    main = prog.main
    for dname, dbody in expanded.items():
        main = subst_term(main, dname, dbody)
    return main


def typecheck_program(prog: Program, budget: int = solver.DEFAULT_BUDGET,
                      assert_runtime: bool = False) -> Term:
    """Validate protocols, inline definitions, and check main; returns the
    elaborated main expression ready for an initial pool."""
    for decl in prog.protocols.values():
        try:
            wellformed_stype({}, RoleSetValue(decl.universe, decl.universe),
                             decl.body)
        except (WfError, SortError) as ex:
            code = ex.code if isinstance(ex, WfError) else "sort-mismatch"
            raise TypeCheckError(code, f"protocol {decl.name}: {ex}", decl.span)
    main = inline_defs(prog)
    if contains_endpoint(main):
        raise TypeCheckError("endpoint-literal",
                             "source programs cannot contain endpoint literals")
    checker = Checker({}, budget, assert_runtime)
    _, used, elab = checker.synth(Env(), main)
    if used:
        raise TypeCheckError("unbound-name", f"main is not closed: {sorted(used)}")
    return elab
