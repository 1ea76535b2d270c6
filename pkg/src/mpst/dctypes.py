"""Pre-defined type schemes for the channel API constants.

Each scheme quantifies static variables, guards the application on a
proposition over them, and maps argument types to a result type.  The
placeholder variable ``#full`` stands for the full role set of the session
a call operates on; it is replaced by the concrete universe at each
instantiation site.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    ArrowSort, BOOL, EMPTYSET, INT, SET, STYPE, SortLike, Static, SVar,
    SBool, SOp, SApp, SBMsg, SPMsg, SEnd, SQuan, SBranch, SFix, SIte, TYPE,
    VTYPE, Type, TVar, TUnit, TBase, TChan, TPair, TFun, TForall, TExists,
)

FULL = "#full"


@dataclass(frozen=True)
class DcType:
    quantified: tuple[tuple[str, SortLike], ...]
    guard: Static
    arg_types: tuple[Type, ...]
    result_type: Type

    @property
    def needs_universe(self) -> bool:
        from .syntax import static_free_vars
        return FULL in static_free_vars(self.guard)


class UnknownApi(Exception):
    pass


def _in(r, rs) -> Static:
    return SOp("in", (r, rs))


def _notin(r, rs) -> Static:
    return SOp("notin", (r, rs))


def _and(a, b) -> Static:
    return SOp("and", (a, b))


def _or(a, b) -> Static:
    return SOp("or", (a, b))


def _eq(a, b) -> Static:
    return SOp("eq", (a, b))


RS, RS1, RS2 = SVar("rs"), SVar("rs1"), SVar("rs2")
R, R1, R2 = SVar("r"), SVar("r1"), SVar("r2")
PI, PI1, PI2 = SVar("pi"), SVar("pi1"), SVar("pi2")
F, B = SVar("f"), SVar("b")
FULLSET = SVar(FULL)


def api_signature(api: str, binder_sort: SortLike = INT) -> DcType:
    """The scheme for one API constant.

    ``binder_sort`` specializes the quantifier APIs to the sort of the
    protocol binder found at the call site.
    """
    if api == "fork":
        return DcType(
            (("rs1", SET), ("rs2", SET), ("pi", STYPE)),
            _eq(SOp("djunion", (RS1, RS2)), FULLSET),
            (TFun(TChan(RS1, PI), TUnit(), linear=True),),
            TChan(RS2, PI))
    if api == "cut":
        return DcType(
            (("rs1", SET), ("rs2", SET), ("pi", STYPE)),
            _eq(SOp("union", (RS1, RS2)), FULLSET),
            (TChan(RS1, PI), TChan(RS2, PI)),
            TChan(SOp("intersect", (RS1, RS2)), PI))
    if api == "elim":
        return DcType(
            (("pi", STYPE),),
            SBool(True),
            (TChan(EMPTYSET, PI),),
            TUnit())
    if api == "split":
        return DcType(
            (("rs1", SET), ("rs2", SET), ("pi", STYPE)),
            _eq(SOp("intersect", (RS1, RS2)), EMPTYSET),
            (TChan(SOp("djunion", (RS1, RS2)), PI),
             TFun(TChan(RS1, PI), TUnit(), linear=True)),
            TChan(RS2, PI))
    if api == "bsend":
        return DcType(
            (("rs", SET), ("r", INT), ("pi", STYPE), ("t", TYPE)),
            _in(R, RS),
            (TChan(RS, SBMsg(R, TVar("t"), PI)), TVar("t")),
            TChan(RS, PI))
    if api == "brecv":
        return DcType(
            (("rs", SET), ("r", INT), ("pi", STYPE), ("t", TYPE)),
            _notin(R, RS),
            (TChan(RS, SBMsg(R, TVar("t"), PI)),),
            TPair(TChan(RS, PI), TVar("t"), linear=True))
    if api == "send":
        return DcType(
            (("rs", SET), ("r1", INT), ("r2", INT), ("pi", STYPE), ("t", VTYPE)),
            _and(_in(R1, RS), _notin(R2, RS)),
            (TChan(RS, SPMsg(R1, R2, TVar("t"), PI)), TVar("t")),
            TChan(RS, PI))
    if api == "recv":
        return DcType(
            (("rs", SET), ("r1", INT), ("r2", INT), ("pi", STYPE), ("t", VTYPE)),
            _and(_notin(R1, RS), _in(R2, RS)),
            (TChan(RS, SPMsg(R1, R2, TVar("t"), PI)),),
            TPair(TChan(RS, PI), TVar("t"), linear=True))
    if api == "skip":
        # a proof function: the payload passes this party by, so the result
        # carries only the advanced endpoint
        return DcType(
            (("rs", SET), ("r1", INT), ("r2", INT), ("pi", STYPE), ("t", VTYPE)),
            _or(_and(_in(R1, RS), _in(R2, RS)),
                _and(_notin(R1, RS), _notin(R2, RS))),
            (TChan(RS, SPMsg(R1, R2, TVar("t"), PI)),),
            TChan(RS, PI))
    if api == "close":
        return DcType(
            (("rs", SET), ("r", INT)),
            _in(R, RS),
            (TChan(RS, SEnd(R)),),
            TUnit())
    if api == "wait":
        return DcType(
            (("rs", SET), ("r", INT)),
            _notin(R, RS),
            (TChan(RS, SEnd(R)),),
            TUnit())
    if api == "unify":
        return DcType(
            (("rs", SET), ("r", INT), ("f", ArrowSort("->", binder_sort, STYPE))),
            _in(R, RS),
            (TChan(RS, SQuan(R, F)),),
            TForall("a", binder_sort, TChan(RS, SApp(F, SVar("a")))))
    if api == "exify":
        return DcType(
            (("rs", SET), ("r", INT), ("f", ArrowSort("->", binder_sort, STYPE))),
            _notin(R, RS),
            (TChan(RS, SQuan(R, F)),),
            TExists("a", binder_sort, TChan(RS, SApp(F, SVar("a")))))
    if api == "offer":
        return DcType(
            (("rs", SET), ("r", INT), ("pi1", STYPE), ("pi2", STYPE), ("b", BOOL)),
            _in(R, RS),
            (TChan(RS, SBranch(R, PI1, PI2)), TBase("bool", (B,))),
            TChan(RS, SIte(B, PI1, PI2)))
    if api == "choose":
        return DcType(
            (("rs", SET), ("r", INT), ("pi1", STYPE), ("pi2", STYPE)),
            _notin(R, RS),
            (TChan(RS, SBranch(R, PI1, PI2)),),
            TExists("b", BOOL,
                    TPair(TBase("bool", (SVar("b"),)),
                          TChan(RS, SIte(SVar("b"), PI1, PI2)),
                          linear=True)))
    if api == "recurse":
        return DcType(
            (("rs", SET), ("f", ArrowSort("->", STYPE, STYPE))),
            SBool(True),
            (TChan(RS, SFix(F)),),
            TChan(RS, SApp(F, SFix(F))))
    raise UnknownApi(api)


# APIs that only re-type an endpoint; erasable after checking
PROOF_APIS = ("skip", "unify", "exify", "recurse")

# APIs that synchronize a whole endpoint cohort
COHORT_APIS = ("bsend", "brecv", "send", "recv", "skip", "close", "wait",
               "unify", "exify", "offer", "choose", "recurse")

# APIs reduced by a single thread
LOCAL_APIS = ("fork", "cut", "elim", "split")
