"""Property tests over generated inputs (hypothesis strategies)."""

from hypothesis import given, settings, strategies as st

from mpst import dfcheck
from mpst.dfcheck import Collection
from mpst.statics import DivByZeroStatic, normalize, sort_of
from mpst.syntax import INT, SInt, SOp, SSet, SVar


ints = st.integers(-6, 6).map(SInt)
sets = st.frozensets(st.integers(0, 3), max_size=4).map(lambda s: SSet(tuple(s)))


def int_exprs():
    return st.recursive(
        ints,
        lambda sub: st.tuples(st.sampled_from(["add", "sub", "mul", "div"]),
                              sub, sub).map(lambda t: SOp(t[0], (t[1], t[2]))),
        max_leaves=12)


def set_exprs():
    return st.recursive(
        sets,
        lambda sub: st.tuples(st.sampled_from(["union", "djunion",
                                               "intersect", "minus"]),
                              sub, sub).map(lambda t: SOp(t[0], (t[1], t[2]))),
        max_leaves=12)


@given(st.one_of(int_exprs(), set_exprs()))
def test_normalize_idempotent(term):
    try:
        once = normalize(term)
    except DivByZeroStatic:
        return
    assert normalize(once) == once


@given(int_exprs())
def test_normalize_preserves_sort(term):
    try:
        n = normalize(term)
    except DivByZeroStatic:
        return
    assert sort_of({}, n) == INT == sort_of({}, term)


@st.composite
def collections(draw):
    n_sets = draw(st.integers(1, 6))
    n_chan = draw(st.integers(0, 5))
    sets = [set() for _ in range(n_sets)]
    universes = {}
    for c in range(n_chan):
        cohort = draw(st.integers(1, 4))
        universes[c] = tuple(range(cohort))
        for i in range(cohort):
            idx = draw(st.integers(0, n_sets - 1))
            sets[idx].add((c, (i,)))
    return Collection(tuple(frozenset(s) for s in sets), universes)


@settings(max_examples=300)
@given(collections())
def test_pigeonhole(col):
    if dfcheck.relaxed(col) and col.nonempty():
        assert dfcheck.df_steppable(col)


@settings(max_examples=300)
@given(collections())
def test_relaxation_necessary(col):
    if not dfcheck.relaxed(col):
        assert not dfcheck.df_reducible(col)


@settings(max_examples=300)
@given(collections())
def test_fast_decider_agrees(col):
    assert dfcheck.df_reducible_fast(col) == dfcheck.df_reducible(col)


@settings(max_examples=200)
@given(collections(), st.integers(0, 4))
def test_step_removes_exactly_one_channel(col, ch):
    if ch not in col.channels():
        return
    nxt = dfcheck.df_step(col, ch)
    if nxt is None:
        # refusal happens exactly when two endpoints share a set
        shared = any(sum(1 for (c, _) in s if c == ch) > 1 for s in col.sets)
        assert shared
        return
    assert nxt.channels() == col.channels() - {ch}
