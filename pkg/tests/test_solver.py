import itertools
import random

from mpst.solver import (
    Assumptions, Invalid, Unknown, Valid, entails, enumeration_size, recheck,
    solve_fragment_ints, solve_fragment_setvars,
)
from mpst.statics import DivByZeroStatic, normalize
from mpst.syntax import SBool, SComplement, SInt, SOp, SSet, SVar, subst_static


def eq(a, b):
    return SOp("eq", (a, b))


def neq(a, b):
    return SOp("neq", (a, b))


def leq(a, b):
    return SOp("leq", (a, b))


# ---------------------------------------------------------------------------
# direct examples
# ---------------------------------------------------------------------------

def test_assumption_is_goal():
    a = Assumptions((neq(SVar("n"), SInt(0)),), {}, ("n",))
    assert isinstance(entails(a, neq(SVar("n"), SInt(0))), Valid)


def test_fork_guard_shape():
    full = SSet((0, 1))
    g = eq(SOp("djunion", (SVar("rs1"), SVar("rs2"))), full)
    a = Assumptions((g,), {"rs1": (0, 1), "rs2": (0, 1)}, ())
    assert isinstance(entails(a, g), Valid)


def test_ground_membership_invalid():
    a = Assumptions((), {}, ())
    v = entails(a, SOp("in", (SInt(0), SSet((1, 2)))))
    assert isinstance(v, Invalid)
    assert v.assignment == {}


def test_role_var_brute_force():
    a = Assumptions((SOp("in", (SVar("r"), SSet((0, 1)))),
                     neq(SVar("r"), SInt(0))), {}, ("r",))
    goal = eq(SVar("r"), SInt(1))
    # independent brute force over the universe
    for r in (0, 1):
        holds = r in (0, 1) and r != 0
        if holds:
            assert r == 1
    assert isinstance(entails(a, goal), Valid)


def test_cut_guard_ground_valid():
    g = eq(SOp("union", (SSet((0, 1)), SSet((1, 2)))), SSet((0, 1, 2)))
    assert isinstance(entails(Assumptions(), g), Valid)


def test_split_guard_ground_invalid():
    g = eq(SOp("intersect", (SSet((0,)), SSet((0,)))), SSet(()))
    assert isinstance(entails(Assumptions(), g), Invalid)


def test_enumeration_size_two_setvars():
    a = Assumptions((eq(SVar("rs1"), SVar("rs2")),),
                    {"rs1": (0, 1), "rs2": (0, 1)}, ())
    assert enumeration_size(a, eq(SVar("rs1"), SVar("rs2"))) == 16


def test_int_bound_propagation():
    a = Assumptions((leq(SInt(1), SVar("n")),), {}, ("n",))
    assert isinstance(solve_fragment_ints(a, neq(SVar("n"), SInt(0))), Valid)


def test_int_unbounded_invalid():
    v = solve_fragment_ints(Assumptions((), {}, ("n",)), neq(SVar("n"), SInt(0)))
    assert isinstance(v, Invalid)
    assert v.assignment == {"n": 0}


def test_int_congruence():
    a = Assumptions((eq(SVar("m"), SVar("n")), eq(SVar("n"), SInt(3))),
                    {}, ("m", "n"))
    assert isinstance(solve_fragment_ints(a, eq(SVar("m"), SInt(3))), Valid)


def test_budget_exhaustion_unknown():
    a = Assumptions((), {"rs": tuple(range(20))}, ())
    v = entails(a, eq(SVar("rs"), SSet(())), budget=1024)
    assert isinstance(v, Unknown)


def test_nonlinear_unknown():
    a = Assumptions((), {}, ("k",))
    v = entails(a, leq(SInt(0), SOp("mul", (SVar("k"), SVar("k")))))
    assert isinstance(v, Unknown)


def test_unknown_set_universe():
    a = Assumptions((), {"rs": None}, ())
    v = entails(a, eq(SVar("rs"), SSet(())))
    assert isinstance(v, Unknown)


# ---------------------------------------------------------------------------
# randomized soundness against exhaustive enumeration
# ---------------------------------------------------------------------------

UNIVERSE = (0, 1, 2)
INT_RANGE = range(-4, 5)


def gen_set_expr(rng, set_vars, depth):
    if depth <= 0 or rng.random() < 0.45:
        if set_vars and rng.random() < 0.6:
            return SVar(rng.choice(set_vars))
        return SSet(tuple(rng.sample(UNIVERSE, rng.randint(0, 3))))
    op = rng.choice(["union", "djunion", "intersect", "minus"])
    return SOp(op, (gen_set_expr(rng, set_vars, depth - 1),
                    gen_set_expr(rng, set_vars, depth - 1)))


def gen_int_expr(rng, int_vars, depth):
    if depth <= 0 or rng.random() < 0.5:
        if int_vars and rng.random() < 0.6:
            return SVar(rng.choice(int_vars))
        return SInt(rng.randint(-4, 4))
    op = rng.choice(["add", "sub"])
    return SOp(op, (gen_int_expr(rng, int_vars, depth - 1),
                    gen_int_expr(rng, int_vars, depth - 1)))


def gen_prop(rng, set_vars, int_vars, depth):
    if depth > 0 and rng.random() < 0.3:
        op = rng.choice(["and", "or"])
        return SOp(op, (gen_prop(rng, set_vars, int_vars, depth - 1),
                        gen_prop(rng, set_vars, int_vars, depth - 1)))
    pick = rng.randrange(6)
    if pick == 0:
        return eq(gen_set_expr(rng, set_vars, 1), gen_set_expr(rng, set_vars, 1))
    if pick == 1:
        return SOp("subset", (gen_set_expr(rng, set_vars, 1),
                              gen_set_expr(rng, set_vars, 1)))
    if pick == 2:
        return SOp(rng.choice(["in", "notin"]),
                   (gen_int_expr(rng, int_vars, 0),
                    gen_set_expr(rng, set_vars, 1)))
    if pick == 3:
        return leq(gen_int_expr(rng, int_vars, 1), gen_int_expr(rng, int_vars, 1))
    if pick == 4:
        return eq(gen_int_expr(rng, int_vars, 1), gen_int_expr(rng, int_vars, 1))
    return neq(gen_int_expr(rng, int_vars, 1), gen_int_expr(rng, int_vars, 1))


def gen_instance(rng, max_sets=3, max_ints=2, n_props=2):
    set_vars = [f"rs{i}" for i in range(rng.randint(0, max_sets))]
    int_vars = [f"n{i}" for i in range(rng.randint(0, max_ints))]
    props = [gen_prop(rng, set_vars, int_vars, 1) for _ in range(rng.randint(0, n_props))]
    # keep the instance in-fragment: bound every integer variable
    for v in int_vars:
        props.append(leq(SInt(-4), SVar(v)))
        props.append(leq(SVar(v), SInt(4)))
    goal = gen_prop(rng, set_vars, int_vars, 1)
    a = Assumptions(tuple(props), {v: UNIVERSE for v in set_vars},
                    tuple(int_vars))
    return a, goal


def evaluate(t, env):
    """Direct evaluator for ground-under-env static terms (oracle only)."""
    match t:
        case SVar(n):
            return env[n]
        case SInt(v) | SBool(v):
            return v
        case SSet(ms):
            return frozenset(ms)
        case SOp(op, args):
            xs = [evaluate(x, env) for x in args]
            match op:
                case "add":
                    return xs[0] + xs[1]
                case "sub":
                    return xs[0] - xs[1]
                case "mul":
                    return xs[0] * xs[1]
                case "union" | "djunion":
                    return xs[0] | xs[1]
                case "intersect":
                    return xs[0] & xs[1]
                case "minus":
                    return xs[0] - xs[1]
                case "eq":
                    return xs[0] == xs[1]
                case "neq":
                    return xs[0] != xs[1]
                case "lt":
                    return xs[0] < xs[1]
                case "leq":
                    return xs[0] <= xs[1]
                case "in":
                    return xs[0] in xs[1]
                case "notin":
                    return xs[0] not in xs[1]
                case "subset":
                    return xs[0] <= xs[1]
                case "and":
                    return xs[0] and xs[1]
                case "or":
                    return xs[0] or xs[1]
                case "not":
                    return not xs[0]
        case SComplement(x, uni):
            return frozenset(uni) - evaluate(x, env)
    raise AssertionError(t)


_PYOP = {"add": "+", "sub": "-", "mul": "*", "union": "|", "djunion": "|",
         "intersect": "&", "minus": "-", "eq": "==", "neq": "!=", "lt": "<",
         "leq": "<=", "subset": "<=", "in": "in", "and": "and", "or": "or"}


def to_python(t) -> str:
    """Compile a static term to a Python expression over variables (oracle)."""
    match t:
        case SVar(n):
            return n
        case SInt(v):
            return str(v)
        case SBool(v):
            return str(v)
        case SSet(ms):
            return f"frozenset({ms!r})"
        case SComplement(x, uni):
            return f"(frozenset({uni!r}) - {to_python(x)})"
        case SOp("notin", (a, b)):
            return f"({to_python(a)} not in {to_python(b)})"
        case SOp("not", (a,)):
            return f"(not {to_python(a)})"
        case SOp(op, (a, b)):
            return f"({to_python(a)} {_PYOP[op]} {to_python(b)})"
    raise AssertionError(t)


def brute_force(a: Assumptions, goal) -> object:
    """Exhaustive truth over all assignments; independent of the solver."""
    set_vars = sorted(a.set_vars)
    int_vars = sorted(a.int_vars)
    allv = set_vars + int_vars
    body = " and ".join(to_python(p) for p in a.props) or "True"
    src = (f"lambda {', '.join(allv)}: "
           f"(({body}) and not {to_python(goal)})" if allv else
           f"lambda: (({body}) and not {to_python(goal)})")
    refutes = eval(src)  # noqa: S307 - test oracle on generated terms
    subsets = [frozenset(c) for k in range(len(UNIVERSE) + 1)
               for c in itertools.combinations(UNIVERSE, k)]
    for sets in itertools.product(subsets, repeat=len(set_vars)):
        for ints in itertools.product(INT_RANGE, repeat=len(int_vars)):
            if refutes(*sets, *ints):
                out = {v: tuple(sorted(s)) for v, s in zip(set_vars, sets)}
                out.update({v: i for v, i in zip(int_vars, ints)})
                return Invalid(out)
    return Valid()


def run_agreement(count, seed):
    rng = random.Random(seed)
    checked = 0
    while checked < count:
        a, goal = gen_instance(rng)
        want = brute_force(a, goal)
        got = entails(a, goal)
        assert not isinstance(got, Unknown), (a, goal, got)
        assert type(got) is type(want), (a, goal, got, want)
        if isinstance(got, Invalid):
            assert recheck(a, goal, got.assignment), (a, goal, got)
        checked += 1
    return checked


def test_agreement_with_brute_force():
    assert run_agreement(400, seed=1234) == 400


def test_monotonicity_under_consistent_extension():
    rng = random.Random(77)
    tried = 0
    while tried < 150:
        a, goal = gen_instance(rng)
        if not isinstance(entails(a, goal), Valid):
            continue
        p = gen_prop(rng, sorted(a.set_vars), list(a.int_vars), 1)
        extended = a.extended(p)
        if isinstance(brute_force(extended, SBool(False)), Valid):
            continue  # inconsistent extension
        assert isinstance(entails(extended, goal), Valid)
        tried += 1
