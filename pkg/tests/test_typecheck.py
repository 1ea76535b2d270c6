import random

import pytest

from conftest import accepted_main, load_program
from mpst import runtime
from mpst.dctypes import api_signature
from mpst.parser import parse_expr, parse_stype, parse_type
from mpst.solver import Assumptions, Invalid, entails
from mpst.statics import normalize
from mpst.syntax import (
    BOOL, INT, SET, STYPE, VTYPE, DApp, DEndpoint, DLam, DUnit, DVar, SBMsg,
    SBool, SEnd, SInt, SOp, SSet, SVar, TBase, TChan, TFun, TPair, TUnit,
    TVar,
)
from mpst.typecheck import (
    ChannelInfo, Checker, Env, TypeCheckError, typecheck_expr,
    typecheck_pool, typecheck_program,
)


def hello_decl():
    return load_program("hello").protocols["hello"]


def hello_proto():
    return hello_decl().body


# ---------------------------------------------------------------------------
# dc-type table
# ---------------------------------------------------------------------------

def test_bsend_scheme():
    dc = api_signature("bsend")
    assert dc.guard == SOp("in", (SVar("r"), SVar("rs")))
    assert dc.result_type == TChan(SVar("rs"), SVar("pi"))
    assert dc.arg_types[1] == TVar("t")


def test_skip_scheme_guard_and_result():
    dc = api_signature("skip")
    g = dc.guard
    assert g.op == "or"
    both_in, both_out = g.args
    assert both_in.op == "and" and both_in.args[0].op == "in"
    assert both_out.op == "and" and both_out.args[0].op == "notin"
    # a proof function: no payload comes back
    assert dc.result_type == TChan(SVar("rs"), SVar("pi"))


def test_elim_scheme():
    dc = api_signature("elim")
    assert dc.arg_types == (TChan(SSet(()), SVar("pi")),)
    assert dc.result_type == TUnit()
    assert dc.guard == SBool(True)


def test_fork_needs_universe():
    assert api_signature("fork").needs_universe
    assert api_signature("cut").needs_universe
    assert not api_signature("bsend").needs_universe


# ---------------------------------------------------------------------------
# expression checking
# ---------------------------------------------------------------------------

def cli_term():
    prog = load_program("hello")
    return prog.defs["cli"]


def test_cli_against_endpoint_consumes_it():
    chan = parse_type("chan({0}, hello)", load_program("hello").protocols)
    t, used, _ = typecheck_expr({}, Assumptions(), {}, {"c": chan}, {},
                                DApp(cli_term(), DVar("c")))
    assert t == TUnit()
    assert used == frozenset({("v", "c")})


def test_bsend_wrong_role_guard_unprovable():
    # an endpoint with roles {1} cannot broadcast role 0's message
    chan = TChan(SSet((1,)), hello_proto(), (0, 1))
    call = parse_expr('bsend(c, "hi")')
    with pytest.raises(TypeCheckError) as exc:
        typecheck_expr({}, Assumptions(), {}, {"c": chan}, {}, call)
    assert exc.value.code == "guard-unprovable"
    # the solver agrees the guard is refutable
    assert isinstance(entails(Assumptions(), SOp("in", (SInt(0), SSet((1,))))),
                      Invalid)


def test_identity_synthesizes_one_shot_function():
    t, used, _ = typecheck_expr({}, Assumptions(), {}, {}, {},
                                parse_expr("lam x => x"))
    assert isinstance(t, TFun) and t.linear
    assert isinstance(t.dom, TVar) and t.dom == t.cod
    assert used == frozenset()


def test_cloud_server_typechecks():
    accepted_main("cloud")  # raises on failure


def test_unused_linear_variable():
    chan = TChan(SSet((0,)), hello_proto(), (0, 1))
    with pytest.raises(TypeCheckError) as exc:
        typecheck_expr({}, Assumptions(), {}, {"c": chan}, {},
                       parse_expr("let x = c in ()"))
    assert exc.value.code == "linear-var-unused"


def test_nonlinear_lambda_cannot_capture_endpoint():
    prog = load_program("hello")
    chan = parse_type("chan({0}, hello)", prog.protocols)
    checker = Checker()
    env = Env(delta={"c": chan})
    lam = parse_expr("lam u => bsend(c, u)")
    expected = TFun(TBase("string"), TChan(SSet((0,)), SVar("p")), linear=False)
    with pytest.raises(TypeCheckError) as exc:
        checker.check(env, lam, TFun(TBase("string"), TUnit(), linear=False))
    assert exc.value.code in ("nonlinear-capture-of-linear", "type-mismatch")


# ---------------------------------------------------------------------------
# type equality
# ---------------------------------------------------------------------------

def test_index_normalization_equality():
    ch = Checker()
    a = TBase("int", (SOp("add", (SInt(1), SInt(2))),))
    b = TBase("int", (SInt(3),))
    assert ch.type_equal(Env(), a, b)


def test_chan_role_difference():
    ch = Checker()
    p = SEnd(SInt(0))
    assert not ch.type_equal(Env(), TChan(SSet((0,)), p), TChan(SSet((1,)), p))


def test_equality_under_assumptions():
    ch = Checker()
    env = Env(sorts={"n": INT, "m": INT},
              props=(SOp("eq", (SVar("n"), SVar("m"))),
                     SOp("leq", (SInt(0), SVar("n"))),
                     SOp("leq", (SVar("n"), SInt(4))),
                     SOp("leq", (SInt(0), SVar("m"))),
                     SOp("leq", (SVar("m"), SInt(4)))))
    a = TChan(SVar("rs"), SBMsg(SInt(0), TBase("int", (SVar("n"),)), SEnd(SInt(0))))
    b = TChan(SVar("rs"), SBMsg(SInt(0), TBase("int", (SVar("m"),)), SEnd(SInt(0))))
    env.sorts["rs"] = SET
    assert ch.type_equal(env, a, b)
    env2 = Env(sorts=dict(env.sorts))  # no assumptions: not equal
    assert not ch.type_equal(env2, a, b)


# ---------------------------------------------------------------------------
# pool typing
# ---------------------------------------------------------------------------

def test_initial_hello_pool_ok():
    main = accepted_main("hello")
    typecheck_pool({0: main}, {})


def test_dangling_endpoint():
    sig = {0: ChannelInfo(SEnd(SInt(0)), (0, 1))}
    with pytest.raises(TypeCheckError) as exc:
        typecheck_pool({0: DEndpoint(0, (0,))}, sig)
    assert exc.value.code == "dangling-endpoint"


def test_subject_reduction_one_step():
    main = accepted_main("hello")
    pool = runtime.Pool.initial(main)
    states = runtime.classify(pool)
    enabled = runtime.find_enabled(pool, states)
    # the only step of the initial pool is the fork
    assert [s.kind for s in enabled] == ["fork"]
    pool2, _ = runtime.apply_step(pool, enabled[0], 0, states)
    typecheck_pool(pool2.threads, pool2.sig)


def test_cross_thread_endpoint_reuse_detected():
    from mpst.syntax import DApiCall

    proto = SEnd(SInt(0))
    sig = {0: ChannelInfo(proto, (0, 1))}
    threads = {
        0: DApiCall("close", None, (DEndpoint(0, (0,)),)),
        1: DApiCall("close", None, (DEndpoint(0, (0,)),)),
    }
    with pytest.raises(TypeCheckError) as exc:
        typecheck_pool(threads, sig)
    assert exc.value.code == "linear-var-reused"


# ---------------------------------------------------------------------------
# exact linear accounting on random shuffles
# ---------------------------------------------------------------------------

def build_pair_tree(rng, leaves):
    if len(leaves) == 1:
        return DVar(leaves[0])
    k = rng.randint(1, len(leaves) - 1)
    left = build_pair_tree(rng, leaves[:k])
    right = build_pair_tree(rng, leaves[k:])
    from mpst.syntax import DPair
    return DPair(left, right)


def test_linear_consumption_exactness():
    rng = random.Random(21)
    for _ in range(100):
        n = rng.randint(1, 6)
        names = [f"x{i}" for i in range(n)]
        rng.shuffle(names)
        delta = {nm: TChan(SSet((0,)), SEnd(SInt(0)), (0,)) for nm in names}
        term = build_pair_tree(rng, names)
        t, used, _ = typecheck_expr({}, Assumptions(), {}, delta, {}, term)
        assert used == frozenset(("v", nm) for nm in names)

        # duplicating one leaf must be flagged
        from mpst.syntax import DPair
        dup = DPair(term, DVar(names[0]))
        with pytest.raises(TypeCheckError) as exc:
            typecheck_expr({}, Assumptions(), {}, delta, {}, dup)
        assert exc.value.code == "linear-var-reused"


# ---------------------------------------------------------------------------
# runtime guard soundness: accepted calls' guards hold on every reached
# instantiation
# ---------------------------------------------------------------------------

def test_guards_hold_along_checked_runs():
    from mpst.dctypes import FULL, api_signature as sig_of
    from mpst.syntax import Static, subst_static

    for name in ("hello", "relay", "array", "cloud"):
        main = accepted_main(name)
        pool = runtime.Pool.initial(main)

        def check_guards(p, event):
            for tid, st in runtime.classify(p).items():
                node = st.api_node
                if node is None or node.sargs is None:
                    continue
                dc = sig_of(node.api) if node.api not in ("unify", "exify") \
                    else None
                if dc is None:
                    continue
                m = {nm: v for (nm, _), v in zip(dc.quantified, node.sargs)
                     if isinstance(v, Static)}
                if dc.needs_universe:
                    if node.universe is None:
                        continue
                    m[FULL] = SSet(node.universe)
                guard = normalize(subst_static(dc.guard, m))
                assert guard == SBool(True), (name, tid, node.api, guard)

        out = runtime.run(pool, runtime.RoundRobin(), max_steps=5000,
                          step_hook=check_guards)
        assert out.kind == "done"
