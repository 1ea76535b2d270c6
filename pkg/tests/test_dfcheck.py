import random

import pytest

from conftest import accepted_main, crossed_pool, random_collection
from mpst import runtime
from mpst.dfcheck import (
    Collection, MatchReport, UnknownChannel, abstract_pool, analyze,
    df_reducible, df_reducible_fast, df_step, df_steppable,
    find_blocked_match, relaxed, relaxed_slack,
)


def col(*sets, universes=None):
    return Collection(tuple(frozenset(s) for s in sets), universes or {})


C0 = (0, (0,))
C1 = (0, (1,))
D0 = (1, (0,))
D1 = (1, (1,))


# ---------------------------------------------------------------------------
# abstraction
# ---------------------------------------------------------------------------

def test_abstract_hello_after_fork():
    pool = runtime.Pool.initial(accepted_main("hello"))
    states = runtime.classify(pool)
    step = runtime.find_enabled(pool, states)[0]
    pool2, _ = runtime.apply_step(pool, step, 0, states)
    got = abstract_pool(pool2)
    assert sorted(sorted(s) for s in got.sets) == [[(0, (0,))], [(0, (1,))]]


def test_abstract_initial_pool():
    pool = runtime.Pool.initial(accepted_main("hello"))
    got = abstract_pool(pool)
    assert got.sets == (frozenset(),)


def test_abstract_both_endpoints_in_one_thread():
    from mpst.syntax import DEndpoint, DPair, SEnd, SInt
    from mpst.typecheck import ChannelInfo

    body = DPair(DEndpoint(0, (0,)), DEndpoint(0, (1,)))
    pool = runtime.Pool({0: body}, {0: ChannelInfo(SEnd(SInt(0)), (0, 1))}, 1, 1)
    got = abstract_pool(pool)
    assert got.sets == (frozenset({C0, C1}),)


# ---------------------------------------------------------------------------
# df reduction
# ---------------------------------------------------------------------------

def test_df_step_two_singletons():
    out = df_step(col({C0}, {C1}), 0)
    assert out is not None
    assert sorted(len(s) for s in out.sets) == [0]


def test_df_step_merges_leftovers():
    out = df_step(col({C0, D0}, {C1, D1}), 0)
    assert out is not None
    assert set(out.sets) == {frozenset({D0, D1})}


def test_df_step_refused_when_sharing_a_set():
    assert df_step(col({C0, C1}), 0) is None


def test_df_step_unknown_channel():
    with pytest.raises(UnknownChannel):
        df_step(col({C0}, {C1}), 9)


def test_df_reducible_all_empty():
    assert df_reducible(col(set(), set()))


def test_df_reducible_one_step():
    assert df_reducible(col({C0}, {C1}))


def test_df_reducible_crossed_false():
    crossed = col({C0, D1}, {C1, D0})
    assert not df_reducible(crossed)
    # both reduction orders fail, checked exhaustively by hand
    for ch in (0, 1):
        nxt = df_step(crossed, ch)
        assert nxt is not None and not df_reducible(nxt)


def test_relaxed_arithmetic():
    assert relaxed(col({C0}, {C1}))
    assert not relaxed(col({C0, D1}, {C1, D0}))
    assert relaxed_slack(col({C0, D1}, {C1, D0})) == -1
    assert relaxed(col())
    assert relaxed(col(set(), set()))


# ---------------------------------------------------------------------------
# blocked matching
# ---------------------------------------------------------------------------

def test_blocked_match_mid_hello():
    pool = runtime.Pool.initial(accepted_main("hello"))
    policy = runtime.RoundRobin()
    for i in range(100):
        states = runtime.classify(pool)
        if all(st.found.kind in ("blocked", "value")
               for st in states.values()) and \
           any(st.found.kind == "blocked" for st in states.values()):
            report = find_blocked_match(pool)
            assert isinstance(report, MatchReport)
            assert report.channel == 0
            assert report.threads == (0, 1)
            return
        step = policy.pick(runtime.find_enabled(pool, states))
        pool, _ = runtime.apply_step(pool, step, i, states)
    raise AssertionError("never reached an all-blocked state")


def test_blocked_match_all_values():
    from mpst.syntax import DUnit

    pool = runtime.Pool({0: DUnit()})
    assert find_blocked_match(pool) is None


def test_blocked_match_crossed_none():
    pool = crossed_pool()
    states = runtime.classify(pool)
    assert any(st.found.kind == "blocked" for st in states.values())
    assert find_blocked_match(pool) is None  # a genuine deadlock


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

def test_pigeonhole_small():
    rng = random.Random(5)
    for _ in range(800):
        c = random_collection(rng)
        if relaxed(c) and c.nonempty():
            assert df_steppable(c), c


def test_not_relaxed_implies_not_reducible_small():
    rng = random.Random(6)
    for _ in range(800):
        c = random_collection(rng)
        if not relaxed(c):
            assert not df_reducible(c), c


def test_fast_equals_exhaustive_small():
    rng = random.Random(7)
    for _ in range(800):
        c = random_collection(rng)
        assert df_reducible_fast(c) == df_reducible(c), c


def test_df_step_conservation():
    rng = random.Random(8)
    checked = 0
    while checked < 300:
        c = random_collection(rng)
        chans = sorted(c.channels())
        if not chans:
            continue
        ch = rng.choice(chans)
        nxt = df_step(c, ch)
        if nxt is None:
            continue
        assert nxt.channels() == c.channels() - {ch}
        cohort = sum(1 for (cc, _) in c.endpoints() if cc == ch)
        assert len(nxt.endpoints()) == len(c.endpoints()) - cohort
        checked += 1


def test_empty_set_removal_invariance():
    rng = random.Random(9)
    for _ in range(300):
        c = random_collection(rng)
        assert df_reducible(c) == df_reducible(c.drop_empty())
        assert df_reducible_fast(c) == df_reducible_fast(c.drop_empty())


def test_lemma_df_invariance_along_runs():
    for name in ("hello", "relay", "array", "cloud"):
        pool = runtime.Pool.initial(accepted_main(name))

        def hook(p, event):
            c = abstract_pool(p)
            assert df_reducible_fast(c), (name, event.step)

        out = runtime.run(pool, runtime.RoundRobin(), max_steps=5000,
                          step_hook=hook)
        assert out.kind == "done"


def test_analyze_record_shape():
    rec = analyze(col({C0}, {C1}), step=3)
    assert rec["step"] == 3
    assert rec["relaxed"] is True and rec["df_reducible"] is True
    assert rec["channels"] == [0]
    assert sorted(map(tuple, rec["sets"])) == [("#0^[0]",), ("#0^[1]",)]
