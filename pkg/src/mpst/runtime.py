"""Pool reduction: deterministic simulation of synchronous sessions.

Single-thread steps are leftmost call-by-value contractions.  Channel
operations surface as partial redexes; a channel steps only when its whole
endpoint cohort is blocked on matching operations, and the rendezvous then
rewrites every participating thread atomically.  A scheduling policy picks
one enabled step at a time, so runs are reproducible.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .dctypes import COHORT_APIS, LOCAL_APIS
from .pretty import pretty_static, pretty_term
from .statics import normalize
from .syntax import (
    BOOL, Static, SVar, SBool, SInt, SSet, SApp, SBMsg, SPMsg, SEnd, SQuan,
    SBranch, SFix, SIte, SLam, TBase, TChan, TExists, TPair, Term, DVar,
    DUnit, DInt, DBool, DStr, DEndpoint, DLam, DFix, DApp, DPair, DFst,
    DSnd, DLet, DLetPair, DIf, DGuardIntro, DGuardElim, DAssertIntro,
    DLetAssert, DForallIntro, DForallElim, DExistsIntro, DLetExists,
    DApiCall, is_value, iter_subterms, static_free_vars,
    subst_statics_in_term, subst_term, term_children,
)
from .typecheck import ChannelInfo, Signature

# ---------------------------------------------------------------------------
# Resources
# ---------------------------------------------------------------------------

Endpoint = tuple[int, tuple[int, ...]]  # (channel, roles)


def rho(e: Term) -> Counter:
    """Multiset of endpoint literals occurring in a term.

    Conditional branches are additive: both consume the same resources,
    so only one branch contributes.
    """
    match e:
        case DEndpoint(c, roles):
            return Counter({(c, roles): 1})
        case DIf(cond, then, _):
            return rho(cond) + rho(then)
        case _:
            out: Counter = Counter()
            for k in term_children(e):
                out.update(rho(k))
            return out


def pool_rho(threads: dict[int, Term]) -> Counter:
    out: Counter = Counter()
    for body in threads.values():
        out.update(rho(body))
    return out


def consistent(resources: Counter, universes: dict[int, tuple[int, ...]]) -> bool:
    """Every channel's endpoints occur once each and partition its universe."""
    per_chan: dict[int, list[tuple[int, ...]]] = {}
    for (c, roles), count in resources.items():
        if count != 1:
            return False
        per_chan.setdefault(c, []).append(roles)
    for c, cohort in per_chan.items():
        if c not in universes:
            return False
        flat = [r for roles in cohort for r in roles]
        if len(flat) != len(set(flat)):
            return False
        if set(flat) != set(universes[c]):
            return False
    return True


# ---------------------------------------------------------------------------
# Pools
# ---------------------------------------------------------------------------


@dataclass
class Pool:
    threads: dict[int, Term]
    sig: Signature = field(default_factory=dict)
    next_channel: int = 0
    next_thread: int = 1

    @staticmethod
    def initial(main: Term) -> "Pool":
        return Pool({0: main})

    def universes(self) -> dict[int, tuple[int, ...]]:
        return {c: info.universe for c, info in self.sig.items()}


class InvariantViolation(Exception):
    def __init__(self, which: str, step: int, detail: str = ""):
        super().__init__(f"{which} at step {step}" + (f": {detail}" if detail else ""))
        self.which = which
        self.step = step
        self.detail = detail


class Stuck(Exception):
    pass


# ---------------------------------------------------------------------------
# Single-thread evaluation
# ---------------------------------------------------------------------------

Rebuild = Callable[[Term], Term]


@dataclass
class Found:
    kind: str  # "value" | "pure" | "local" | "blocked" | "stuck"
    node: Optional[Term] = None
    rebuild: Optional[Rebuild] = None
    reason: str = ""
    witness: Optional[Static] = None  # quantifier witness for a blocked unify


def _compose(outer: Rebuild, wrap: Callable[[Term], Term]) -> Rebuild:
    return lambda x: outer(wrap(x))


def find_redex(e: Term) -> Found:
    """Locate the leftmost redex, with a function to rebuild the thread."""
    return _find(e, lambda x: x)


def _find(e: Term, rb: Rebuild) -> Found:
    if is_value(e):
        return Found("value")
    match e:
        case DApp(f, a):
            if not is_value(f):
                return _find(f, _compose(rb, lambda x: replace(e, fn=x)))
            if not is_value(a):
                return _find(a, _compose(rb, lambda x: replace(e, arg=x)))
            if isinstance(f, (DLam, DFix)):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="application of a non-function")
        case DPair(l, r):
            if not is_value(l):
                return _find(l, _compose(rb, lambda x: replace(e, left=x)))
            return _find(r, _compose(rb, lambda x: replace(e, right=x)))
        case DFst(a) | DSnd(a):
            if not is_value(a):
                return _find(a, _compose(rb, lambda x: replace(e, arg=x)))
            if isinstance(a, DPair):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="projection of a non-pair")
        case DLet(_, b, _):
            if not is_value(b):
                return _find(b, _compose(rb, lambda x: replace(e, bound=x)))
            return Found("pure", e, rb)
        case DLetPair(_, _, b, _):
            if not is_value(b):
                return _find(b, _compose(rb, lambda x: replace(e, bound=x)))
            if isinstance(b, DPair):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="let-pair of a non-pair")
        case DIf(c, _, _):
            if not is_value(c):
                return _find(c, _compose(rb, lambda x: replace(e, cond=x)))
            if isinstance(c, DBool):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="if on a non-boolean")
        case DGuardIntro(a) | DAssertIntro(a) | DForallIntro(a) | DExistsIntro(a):
            return _find(a, _compose(rb, lambda x: replace(e, arg=x)))
        case DGuardElim(a):
            if not is_value(a):
                return _find(a, _compose(rb, lambda x: replace(e, arg=x)))
            if isinstance(a, DGuardIntro):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="unguard of a non-guarded value")
        case DLetAssert(_, b, _):
            if not is_value(b):
                return _find(b, _compose(rb, lambda x: replace(e, bound=x)))
            if isinstance(b, DAssertIntro):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="let-vouch of a non-asserted value")
        case DLetExists(_, _, b, _):
            if not is_value(b):
                return _find(b, _compose(rb, lambda x: replace(e, bound=x)))
            if isinstance(b, DExistsIntro):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="let-pack of a non-packed value")
        case DForallElim(a, s):
            if (isinstance(a, DApiCall) and a.api == "unify"
                    and all(is_value(x) for x in a.args)):
                w = s if s is not None and not static_free_vars(s) else None
                return Found("blocked", e, rb, witness=w)
            if not is_value(a):
                return _find(a, _compose(rb, lambda x: replace(e, arg=x)))
            if isinstance(a, DForallIntro):
                return Found("pure", e, rb)
            return Found("stuck", e, rb, reason="inst of a non-universal value")
        case DApiCall(api, _, args):
            for i, a in enumerate(args):
                if not is_value(a):
                    def wrap(x, i=i):
                        new = list(e.args)
                        new[i] = x
                        return replace(e, args=tuple(new))
                    return _find(a, _compose(rb, wrap))
            if api in LOCAL_APIS:
                return Found("local", e, rb)
            if api in COHORT_APIS:
                return Found("blocked", e, rb)
            return Found("stuck", e, rb, reason=f"unknown API {api}")
        case DVar(n):
            return Found("stuck", e, rb, reason=f"free variable {n}")
        case _:
            return Found("stuck", e, rb, reason=f"no rule for {type(e).__name__}")


def contract(e: Term) -> Term:
    """One pure contraction; the redex shape was established by find_redex."""
    match e:
        case DApp(DLam(p, body), v):
            return subst_term(body, p, v)
        case DApp(DFix(g, p, body) as fx, v):
            return subst_term(subst_term(body, g, fx), p, v)
        case DLet(x, v, body):
            return subst_term(body, x, v)
        case DLetPair(x1, x2, DPair(v1, v2), body):
            return subst_term(subst_term(body, x1, v1), x2, v2)
        case DFst(DPair(v1, _)):
            return v1
        case DSnd(DPair(_, v2)):
            return v2
        case DIf(DBool(b), t, f):
            return t if b else f
        case DGuardElim(DGuardIntro(v)):
            if e.runtime_guard is not None:
                r = normalize(e.runtime_guard)
                if r != SBool(True):
                    raise Stuck(f"runtime guard failed: {pretty_static(r)}")
            return v
        case DLetAssert(x, DAssertIntro(v), body):
            return subst_term(body, x, v)
        case DForallElim(DForallIntro(v, binder), s):
            if binder is not None and s is not None:
                return subst_statics_in_term(v, {binder[0]: s})
            return v
        case DLetExists(sv, x, DExistsIntro(v, w), body):
            if w is not None:
                body = subst_statics_in_term(body, {sv: w})
            return subst_term(body, x, v)
        case _:
            raise Stuck(f"not a redex: {pretty_term(e)}")


def step_thread(e: Term) -> Term:
    """One reduction inside a thread; raises Stuck on values and blocks."""
    found = find_redex(e)
    if found.kind == "pure":
        return found.rebuild(contract(found.node))
    if found.kind == "value":
        raise Stuck("value")
    if found.kind in ("local", "blocked"):
        raise Stuck(f"blocked-on-partial-redex:{_blocked_channel_str(found)}")
    raise Stuck(f"genuine-stuck: {found.reason}")


def _blocked_channel_str(found: Found) -> str:
    node = found.node
    if isinstance(node, DForallElim):
        node = node.arg
    if isinstance(node, DApiCall) and node.args \
            and isinstance(node.args[0], DEndpoint):
        ep = node.args[0]
        return f"#{ep.chan}^{list(ep.roles)}"
    return getattr(node, "api", "?")


# ---------------------------------------------------------------------------
# Enabled steps
# ---------------------------------------------------------------------------


@dataclass
class ThreadState:
    tid: int
    found: Found

    @property
    def api_node(self) -> Optional[DApiCall]:
        n = self.found.node
        if isinstance(n, DForallElim):
            n = n.arg
        return n if isinstance(n, DApiCall) else None

    @property
    def endpoint(self) -> Optional[DEndpoint]:
        n = self.api_node
        if n is not None and n.args and isinstance(n.args[0], DEndpoint):
            return n.args[0]
        return None


@dataclass(frozen=True)
class EnabledStep:
    kind: str  # lift gc fork cut elim split bmsg msg end quan branch rec
    thread: int  # primary thread (min participant for cohort steps)
    channel: Optional[int] = None

    def sort_key(self):
        return (_KIND_ORDER.get(self.kind, 99), self.thread,
                -1 if self.channel is None else self.channel)


_KIND_ORDER = {"lift": 0, "gc": 1, "fork": 2, "split": 3, "cut": 4, "elim": 5,
               "bmsg": 6, "msg": 7, "end": 8, "quan": 9, "branch": 10,
               "rec": 11}

_COHORT_KIND = {
    "bsend": "bmsg", "brecv": "bmsg",
    "send": "msg", "recv": "msg", "skip": "msg",
    "close": "end", "wait": "end",
    "unify": "quan", "exify": "quan",
    "offer": "branch", "choose": "branch",
    "recurse": "rec",
}


def classify(pool: Pool) -> dict[int, ThreadState]:
    return {tid: ThreadState(tid, find_redex(body))
            for tid, body in pool.threads.items()}


def _cohort_for(pool: Pool, states: dict[int, ThreadState], channel: int,
                erased: bool = False) -> Optional[tuple[str, dict[int, ThreadState]]]:
    """The matching blocked cohort on a channel, when complete.

    With proof functions erased, a point-to-point message needs only its
    sender and receiver; the silent parties no longer synchronize.
    """
    if channel not in pool.sig:
        return None
    universe = set(pool.sig[channel].universe)
    members: dict[int, ThreadState] = {}
    roles_seen: list[int] = []
    apis: list[str] = []
    for st in states.values():
        if st.found.kind != "blocked":
            continue
        ep = st.endpoint
        if ep is None or ep.chan != channel:
            continue
        members[st.tid] = st
        roles_seen.extend(ep.roles)
        apis.append(st.api_node.api)
    if len(roles_seen) != len(set(roles_seen)):
        return None
    if set(roles_seen) != universe:
        if erased:
            return _erased_msg_pair(pool, members, channel, apis)
        return None
    counts = Counter(apis)
    n = len(apis)
    kinds = {_COHORT_KIND.get(a) for a in apis}
    if len(kinds) != 1:
        return _erased_msg_pair(pool, members, channel, apis) if erased else None
    kind = kinds.pop()
    if erased and kind == "msg":
        return _erased_msg_pair(pool, members, channel, apis)
    ok = False
    if kind == "bmsg":
        ok = counts["bsend"] == 1 and counts["brecv"] == n - 1
    elif kind == "msg":
        ok = counts["send"] == 1 and counts["recv"] == 1 and counts["skip"] == n - 2
    elif kind == "end":
        ok = counts["close"] == 1 and counts["wait"] == n - 1
    elif kind == "quan":
        ok = counts["unify"] == 1 and counts["exify"] == n - 1
        if ok:
            holder = next(st for st in members.values()
                          if st.api_node.api == "unify")
            if holder.found.witness is None:
                return None  # waits until the witness is determined
    elif kind == "branch":
        ok = counts["offer"] == 1 and counts["choose"] == n - 1
    elif kind == "rec":
        ok = counts["recurse"] == n
    if not ok:
        return None
    return kind, members


def _unroll_proofs(proto: Optional[Static]) -> Optional[Static]:
    """Skip protocol heads whose interpreters were erased."""
    if proto is None:
        return None
    p = normalize(proto)
    for _ in range(64):
        if isinstance(p, SQuan) and isinstance(normalize(p.binder), SLam):
            p = normalize(SApp(p.binder, SVar("#w")))
        elif isinstance(p, SFix):
            p = normalize(SApp(p.binder, p))
        else:
            break
    return p


def _erased_msg_pair(pool: Pool, members: dict[int, ThreadState],
                     channel: int, apis: list[str]):
    """With skips erased, a point-to-point message pairs sender and
    receiver by the protocol head's roles."""
    head = _unroll_proofs(pool.sig[channel].proto)
    if isinstance(head, SPMsg) and isinstance(normalize(head.sender), SInt) \
            and isinstance(normalize(head.receiver), SInt):
        r1 = normalize(head.sender).value
        r2 = normalize(head.receiver).value
        snd = [st for st in members.values()
               if st.api_node.api == "send" and r1 in st.endpoint.roles]
        rcv = [st for st in members.values()
               if st.api_node.api == "recv" and r2 in st.endpoint.roles]
        if len(snd) == 1 and len(rcv) == 1:
            return "msg", {snd[0].tid: snd[0], rcv[0].tid: rcv[0]}
        return None
    if head is None and sorted(apis) == ["recv", "send"]:
        return "msg", members
    return None


def find_enabled(pool: Pool,
                 states: Optional[dict[int, ThreadState]] = None,
                 erased: bool = False) -> list[EnabledStep]:
    states = states if states is not None else classify(pool)
    out: list[EnabledStep] = []
    for tid in sorted(states):
        st = states[tid]
        if st.found.kind == "pure":
            out.append(EnabledStep("lift", tid))
        elif st.found.kind == "local":
            out.append(EnabledStep(st.found.node.api, tid))
        elif st.found.kind == "value" and tid > 0 \
                and isinstance(pool.threads[tid], DUnit):
            out.append(EnabledStep("gc", tid))
    for channel in sorted(pool.sig):
        got = _cohort_for(pool, states, channel, erased)
        if got is not None:
            kind, members = got
            out.append(EnabledStep(kind, min(members), channel))
    return sorted(out, key=EnabledStep.sort_key)


# ---------------------------------------------------------------------------
# Applying steps
# ---------------------------------------------------------------------------


@dataclass
class TraceEvent:
    step: int
    kind: str
    channel: Optional[int]
    threads: tuple[int, ...]
    payload_type: Optional[str] = None
    sig_before: dict = field(default_factory=dict)
    sig_after: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "channel": self.channel,
            "threads": list(self.threads),
            "sig_after": self.sig_after,
        }


def _sig_summary(sig: Signature) -> dict:
    return {str(c): (pretty_static(info.proto) if info.proto is not None else "?")
            for c, info in sorted(sig.items())}


def _value_tag(v: Term) -> str:
    match v:
        case DUnit():
            return "unit"
        case DInt():
            return "int"
        case DBool():
            return "bool"
        case DStr():
            return "string"
        case DEndpoint():
            return "endpoint"
        case DPair():
            return "pair"
        case DLam() | DFix():
            return "closure"
        case _:
            return type(v).__name__


def _advance(proto: Optional[Static], expect, step_no: int,
             tolerant: bool) -> Optional[Static]:
    if proto is None:
        return None
    p = normalize(proto)
    if isinstance(p, expect):
        return p
    if tolerant:
        return None
    raise InvariantViolation("protocol-desync", step_no,
                             f"expected {expect.__name__}, found "
                             f"{pretty_static(p)}")


def _fork_statics(node: DApiCall, step_no: int):
    """rs1, protocol, universe for a fork, from elaboration or annotations."""
    if node.sargs is not None and node.universe is not None:
        rs1 = normalize(node.sargs[0])
        pi = node.sargs[2]
        if isinstance(rs1, SSet) and isinstance(pi, Static):
            return rs1.members, normalize(pi), node.universe
    fn = node.args[0]
    annot = fn.annot if isinstance(fn, DLam) else None
    if isinstance(annot, TChan) and annot.universe is not None:
        rs1 = normalize(annot.roles)
        if isinstance(rs1, SSet):
            return rs1.members, normalize(annot.proto), annot.universe
    raise InvariantViolation(
        "missing-statics", step_no,
        "fork needs elaborated static arguments or an annotated thread function")


def _split_statics(node: DApiCall, held: tuple[int, ...], step_no: int):
    if node.sargs is not None:
        rs1 = normalize(node.sargs[0])
        if isinstance(rs1, SSet):
            return rs1.members
    fn = node.args[1]
    annot = fn.annot if isinstance(fn, DLam) else None
    if isinstance(annot, TChan):
        rs1 = normalize(annot.roles)
        if isinstance(rs1, SSet):
            return rs1.members
    raise InvariantViolation(
        "missing-statics", step_no,
        "split needs elaborated static arguments or an annotated thread function")


def apply_step(pool: Pool, step: EnabledStep, step_no: int,
               states: Optional[dict[int, ThreadState]] = None,
               tolerant: bool = False,
               erased: bool = False) -> tuple[Pool, TraceEvent]:
    states = states if states is not None else classify(pool)
    threads = dict(pool.threads)
    sig = dict(pool.sig)
    next_channel = pool.next_channel
    next_thread = pool.next_thread
    before = _sig_summary(pool.sig)
    payload_tag: Optional[str] = None
    involved: tuple[int, ...]

    if step.kind == "lift":
        st = states[step.thread]
        try:
            threads[step.thread] = st.found.rebuild(contract(st.found.node))
        except Stuck as ex:
            raise InvariantViolation("runtime-assert", step_no, str(ex))
        involved = (step.thread,)
    elif step.kind == "gc":
        del threads[step.thread]
        involved = (step.thread,)
    elif step.kind == "fork":
        st = states[step.thread]
        node = st.found.node
        rs1, pi, universe = _fork_statics(node, step_no)
        rs2 = tuple(r for r in universe if r not in rs1)
        c = next_channel
        next_channel += 1
        sig[c] = ChannelInfo(pi, universe)
        fn = node.args[0]
        t_new = next_thread
        next_thread += 1
        threads[t_new] = _apply_closure(fn, DEndpoint(c, rs1))
        threads[step.thread] = st.found.rebuild(DEndpoint(c, rs2))
        involved = (step.thread, t_new)
        step = EnabledStep("fork", step.thread, c)
    elif step.kind == "split":
        st = states[step.thread]
        node = st.found.node
        ep = node.args[0]
        rs1 = _split_statics(node, ep.roles, step_no)
        rs2 = tuple(r for r in ep.roles if r not in rs1)
        fn = node.args[1]
        t_new = next_thread
        next_thread += 1
        threads[t_new] = _apply_closure(fn, DEndpoint(ep.chan, rs1))
        threads[step.thread] = st.found.rebuild(DEndpoint(ep.chan, rs2))
        involved = (step.thread, t_new)
        step = EnabledStep("split", step.thread, ep.chan)
    elif step.kind == "cut":
        st = states[step.thread]
        node = st.found.node
        e1, e2 = node.args
        if not (isinstance(e1, DEndpoint) and isinstance(e2, DEndpoint)):
            raise InvariantViolation("bad-cut", step_no, "cut on non-endpoints")
        if e1.chan == e2.chan:
            raise InvariantViolation("bad-cut", step_no,
                                     "cut on two endpoints of one channel")
        info1 = sig.get(e1.chan)
        info2 = sig.get(e2.chan)
        if info1 is None or info2 is None:
            raise InvariantViolation("bad-cut", step_no, "cut on a dead channel")
        c = next_channel
        next_channel += 1
        residual = tuple(sorted(set(e1.roles) & set(e2.roles)))
        threads[step.thread] = st.found.rebuild(DEndpoint(c, residual))
        mapping = {e1.chan: c, e2.chan: c}
        for tid in list(threads):
            threads[tid] = _rename_channels(threads[tid], mapping)
        del sig[e1.chan]
        del sig[e2.chan]
        sig[c] = ChannelInfo(info1.proto, info1.universe)
        involved = (step.thread,)
        step = EnabledStep("cut", step.thread, c)
    elif step.kind == "elim":
        st = states[step.thread]
        ep = st.found.node.args[0]
        if ep.roles != ():
            raise InvariantViolation("bad-elim", step_no,
                                     "elim on an endpoint with roles")
        threads[step.thread] = st.found.rebuild(DUnit())
        involved = (step.thread,)
        step = EnabledStep("elim", step.thread, ep.chan)
    else:
        got = _cohort_for(pool, states, step.channel, erased)
        if got is None:
            raise InvariantViolation("vanished-cohort", step_no,
                                     f"channel #{step.channel}")
        kind, members = got
        info = sig[step.channel]
        if erased:
            info = ChannelInfo(_unroll_proofs(info.proto), info.universe)
        if kind == "bmsg":
            sender = next(s for s in members.values() if s.api_node.api == "bsend")
            v = sender.api_node.args[1]
            payload_tag = _value_tag(v)
            for st in members.values():
                ep = st.endpoint
                if st.tid == sender.tid:
                    threads[st.tid] = st.found.rebuild(DEndpoint(ep.chan, ep.roles))
                else:
                    threads[st.tid] = st.found.rebuild(
                        DPair(DEndpoint(ep.chan, ep.roles), v))
            p = _advance(info.proto, SBMsg, step_no, tolerant)
            sig[step.channel] = ChannelInfo(
                normalize(p.cont) if p is not None else None, info.universe)
        elif kind == "msg":
            sender = next(s for s in members.values() if s.api_node.api == "send")
            receiver = next(s for s in members.values() if s.api_node.api == "recv")
            v = sender.api_node.args[1]
            payload_tag = _value_tag(v)
            for st in members.values():
                ep = st.endpoint
                if st.tid == receiver.tid:
                    threads[st.tid] = st.found.rebuild(
                        DPair(DEndpoint(ep.chan, ep.roles), v))
                else:
                    threads[st.tid] = st.found.rebuild(DEndpoint(ep.chan, ep.roles))
            p = _advance(info.proto, SPMsg, step_no, tolerant)
            sig[step.channel] = ChannelInfo(
                normalize(p.cont) if p is not None else None, info.universe)
        elif kind == "end":
            for st in members.values():
                threads[st.tid] = st.found.rebuild(DUnit())
            del sig[step.channel]
        elif kind == "quan":
            holder = next(s for s in members.values() if s.api_node.api == "unify")
            w = holder.found.witness
            p = _advance(info.proto, SQuan, step_no, tolerant)
            binder = normalize(p.binder) if p is not None else None
            for st in members.values():
                ep = st.endpoint
                if st.tid == holder.tid:
                    threads[st.tid] = st.found.rebuild(DEndpoint(ep.chan, ep.roles))
                else:
                    annot = None
                    if isinstance(binder, SLam):
                        annot = TExists("a", binder.sort,
                                        TChan(SSet(ep.roles),
                                              SApp(binder, SVar("a")),
                                              info.universe))
                    threads[st.tid] = st.found.rebuild(
                        DExistsIntro(DEndpoint(ep.chan, ep.roles), witness=w,
                                     annot=annot))
            new_proto = None
            if p is not None:
                new_proto = normalize(SApp(p.binder, w))
            sig[step.channel] = ChannelInfo(new_proto, info.universe)
        elif kind == "branch":
            offerer = next(s for s in members.values() if s.api_node.api == "offer")
            bv = offerer.api_node.args[1]
            if not isinstance(bv, DBool):
                raise InvariantViolation("bad-offer", step_no,
                                         "offer selector is not a boolean")
            sel = bv.value
            payload_tag = "bool"
            p = _advance(info.proto, SBranch, step_no, tolerant)
            for st in members.values():
                ep = st.endpoint
                if st.tid == offerer.tid:
                    threads[st.tid] = st.found.rebuild(DEndpoint(ep.chan, ep.roles))
                else:
                    annot = None
                    if p is not None:
                        annot = TExists(
                            "b", BOOL,
                            TPair(TBase("bool", (SVar("b"),)),
                                  TChan(SSet(ep.roles),
                                        SIte(SVar("b"), p.left, p.right),
                                        info.universe),
                                  linear=True))
                    threads[st.tid] = st.found.rebuild(
                        DExistsIntro(DPair(DBool(sel), DEndpoint(ep.chan, ep.roles)),
                                     witness=SBool(sel), annot=annot))
            new_proto = None
            if p is not None:
                new_proto = normalize(p.left if sel else p.right)
            sig[step.channel] = ChannelInfo(new_proto, info.universe)
        elif kind == "rec":
            for st in members.values():
                ep = st.endpoint
                threads[st.tid] = st.found.rebuild(DEndpoint(ep.chan, ep.roles))
            p = _advance(info.proto, SFix, step_no, tolerant)
            new_proto = None
            if p is not None:
                new_proto = normalize(SApp(p.binder, p))
            sig[step.channel] = ChannelInfo(new_proto, info.universe)
        else:
            raise InvariantViolation("unknown-step", step_no, kind)
        involved = tuple(sorted(members))

    out = Pool(threads, sig, next_channel, next_thread)
    event = TraceEvent(step_no, step.kind, step.channel, involved,
                       payload_tag, before, _sig_summary(sig))
    return out, event


def _apply_closure(fn: Term, arg: Term) -> Term:
    match fn:
        case DLam(p, body):
            return subst_term(body, p, arg)
        case DFix(g, p, body):
            return subst_term(subst_term(body, g, fn), p, arg)
        case _:
            return DApp(fn, arg)


def _rename_channels(e: Term, mapping: dict[int, int]) -> Term:
    if isinstance(e, DEndpoint):
        if e.chan in mapping:
            return DEndpoint(mapping[e.chan], e.roles)
        return e
    kids = term_children(e)
    if not kids:
        return e
    from .syntax import _rebuild
    return _rebuild(e, tuple(_rename_channels(k, mapping) for k in kids))


# ---------------------------------------------------------------------------
# Scheduling policies
# ---------------------------------------------------------------------------


@dataclass
class RoundRobin:
    cursor: int = 0

    def pick(self, enabled: list[EnabledStep]) -> EnabledStep:
        best = min(enabled,
                   key=lambda s: ((s.thread - self.cursor) % (1 << 30),
                                  s.sort_key()))
        self.cursor = best.thread + 1
        return best


@dataclass
class SeededRandom:
    seed: int

    def __post_init__(self):
        self._rng = random.Random(self.seed)

    def pick(self, enabled: list[EnabledStep]) -> EnabledStep:
        return enabled[self._rng.randrange(len(enabled))]


@dataclass
class Scripted:
    steps: list[dict]
    _pos: int = 0

    def pick(self, enabled: list[EnabledStep]) -> EnabledStep:
        if self._pos >= len(self.steps):
            raise InvariantViolation("script-exhausted", self._pos)
        want = self.steps[self._pos]
        self._pos += 1
        for s in enabled:
            if want.get("kind", s.kind) != s.kind:
                continue
            if "channel" in want and want["channel"] != s.channel:
                continue
            if "thread" in want and want["thread"] != s.thread:
                continue
            return s
        raise InvariantViolation("script-mismatch", self._pos - 1, str(want))


Policy = object


# ---------------------------------------------------------------------------
# Proof erasure
# ---------------------------------------------------------------------------


def erase_proofs(e: Term) -> Term:
    """Drop proof-function calls after checking; meaning is preserved."""
    match e:
        case DApiCall("skip" | "recurse", _, (arg,)):
            return erase_proofs(arg)
        case DApiCall("exify", _, (arg,)):
            return DExistsIntro(erase_proofs(arg))
        case DForallElim(DApiCall("unify", _, (arg,)), _):
            return erase_proofs(arg)
        case DApiCall("unify", _, (arg,)):
            return erase_proofs(arg)
        case DLetExists(sv, x, bound, body):
            b = erase_proofs(bound)
            if isinstance(b, DExistsIntro) and b.witness is None:
                return DLet(x, b.arg, erase_proofs(body))
            return replace(e, bound=b, body=erase_proofs(body))
        case _:
            kids = term_children(e)
            if not kids:
                return e
            from .syntax import _rebuild
            return _rebuild(e, tuple(erase_proofs(k) for k in kids))


# ---------------------------------------------------------------------------
# Whole runs
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    kind: str  # "done" | "deadlock" | "steplimit"
    value: Optional[Term] = None
    steps: int = 0
    trace: list[TraceEvent] = field(default_factory=list)
    report: Optional[dict] = None


def deadlock_report(pool: Pool,
                    states: Optional[dict[int, ThreadState]] = None) -> dict:
    states = states if states is not None else classify(pool)
    blocked = {}
    for tid, st in sorted(states.items()):
        if st.found.kind == "blocked":
            node = st.api_node
            ep = st.endpoint
            blocked[str(tid)] = {
                "api": node.api if node else "?",
                "channel": ep.chan if ep else None,
                "roles": list(ep.roles) if ep else None,
            }
    return {"blocked": blocked}


def run(pool: Pool, policy, max_steps: int = 100_000, checked: bool = False,
        tolerant: bool = False, erased: bool = False,
        step_hook=None) -> Outcome:
    """Iterate pool steps until done, deadlocked, or out of budget.

    In checked mode, resource consistency, pool typing, and
    df-reducibility are asserted after every step.
    """
    if checked:
        from . import dfcheck
        from .typecheck import TypeCheckError, typecheck_pool
    trace: list[TraceEvent] = []
    steps = 0
    while steps < max_steps:
        if set(pool.threads) == {0}:
            body = pool.threads[0]
            if is_value(body):
                return Outcome("done", body, steps, trace)
        states = classify(pool)
        for tid, st in states.items():
            if st.found.kind == "stuck":
                raise InvariantViolation("thread-stuck", steps,
                                         f"thread {tid}: {st.found.reason}")
        enabled = find_enabled(pool, states, erased)
        if not enabled:
            if any(st.found.kind == "blocked" for st in states.values()):
                return Outcome("deadlock", None, steps, trace,
                               deadlock_report(pool, states))
            raise InvariantViolation("no-progress", steps,
                                     "no enabled step and nothing blocked")
        step = policy.pick(enabled)
        pool, event = apply_step(pool, step, steps, states, tolerant, erased)
        trace.append(event)
        steps += 1
        if step_hook is not None:
            step_hook(pool, event)
        if checked:
            if not consistent(pool_rho(pool.threads), pool.universes()):
                raise InvariantViolation("inconsistent-resources", steps)
            try:
                typecheck_pool(pool.threads, pool.sig)
            except TypeCheckError as ex:
                raise InvariantViolation("ill-typed-pool", steps, str(ex))
            if not dfcheck.df_reducible(dfcheck.abstract_pool(pool)):
                raise InvariantViolation("not-df-reducible", steps)
    return Outcome("steplimit", None, steps, trace)
