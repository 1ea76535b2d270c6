import random

import pytest

from conftest import load_program
from mpst.parser import ParseError, parse_expr, parse_program, parse_stype, parse_type
from mpst.pretty import pretty, pretty_static, pretty_term, pretty_type
from mpst.syntax import (
    BOOL, INT, SET, STYPE, DApp, DBool, DEndpoint, DExistsIntro, DFix,
    DForallElim, DGuardIntro, DIf, DInt, DLam, DLet, DLetExists, DLetPair,
    DPair, DStr, DUnit, DVar, DApiCall, DFst, DSnd, SBMsg, SBool, SBranch,
    SEnd, SFix, SInt, SLam, SOp, SPMsg, SQuan, SSet, SVar, TBase, TChan,
    TExists, TForall, TFun, TGuard, TPair, TUnit, Term, contains_endpoint,
    iter_subterms, static_alpha_eq, term_alpha_eq, type_alpha_eq,
)


def test_parse_hello_shape():
    prog = load_program("hello")
    assert list(prog.protocols) == ["hello"]
    assert sorted(prog.defs) == ["cli", "pool", "srv"]
    decl = prog.protocols["hello"]
    assert decl.universe == (0, 1)
    assert decl.aliases == {"C": 0, "S": 1}
    body = decl.body
    assert isinstance(body, SBMsg) and body.sender == SInt(0)


def test_parse_empty_program():
    prog = parse_program("")
    assert prog.protocols == {} and prog.defs == {}
    assert prog.main == DUnit()


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_program("let x = in")
    assert exc.value.token == "in"
    assert exc.value.line == 1


def test_parser_produces_no_endpoints():
    for name in ("hello", "array", "cloud", "relay"):
        prog = load_program(name)
        for body in list(prog.defs.values()) + [prog.main]:
            assert not contains_endpoint(body)


def test_pretty_end_with_alias():
    assert pretty(SEnd(SInt(0)), aliases={0: "C"}) == "end(C)"


def test_pretty_hello_display_form():
    t = SBMsg(SInt(0), TBase("string"),
              SBMsg(SInt(1), TBase("string"), SEnd(SInt(0))))
    assert pretty(t, aliases={0: "C", 1: "S"}) == \
        "msg(C, string) :: msg(S, string) :: end(C)"


def test_pretty_chan():
    assert pretty(TChan(SSet((0,)), SEnd(SInt(0)))) == "chan({0}, end(0))"


# ---------------------------------------------------------------------------
# parse . pretty round trip
# ---------------------------------------------------------------------------

NAMES = ["x", "y", "z", "acc", "go"]
SORTS = [INT, BOOL, SET, STYPE]


def gen_static(rng, depth, bound):
    if depth <= 0 or rng.random() < 0.3:
        pick = rng.randrange(4)
        if pick == 0:
            return SInt(rng.randint(-3, 9))
        if pick == 1:
            return SBool(rng.random() < 0.5)
        if pick == 2:
            return SSet(tuple(rng.sample(range(4), rng.randint(0, 3))))
        return SVar(rng.choice(bound or NAMES))
    op = rng.choice(["add", "sub", "mul", "div", "union", "djunion",
                     "intersect", "minus", "eq", "neq", "lt", "leq",
                     "in", "notin", "subset", "and", "or"])
    if op in ("add", "sub", "mul", "div", "lt", "leq"):
        args = (gen_int(rng, depth - 1, bound), gen_int(rng, depth - 1, bound))
    elif op in ("in", "notin"):
        args = (gen_int(rng, depth - 1, bound), gen_set(rng, depth - 1, bound))
    elif op in ("union", "djunion", "intersect", "minus", "subset"):
        args = (gen_set(rng, depth - 1, bound), gen_set(rng, depth - 1, bound))
    elif op in ("and", "or"):
        args = (gen_bool(rng, depth - 1, bound), gen_bool(rng, depth - 1, bound))
    else:
        args = (gen_int(rng, depth - 1, bound), gen_int(rng, depth - 1, bound))
    return SOp(op, args)


def gen_int(rng, depth, bound):
    if depth <= 0 or rng.random() < 0.5:
        return SInt(rng.randint(-3, 9)) if rng.random() < 0.7 \
            else SVar(rng.choice(NAMES))
    return SOp(rng.choice(["add", "sub", "mul"]),
               (gen_int(rng, depth - 1, bound), gen_int(rng, depth - 1, bound)))


def gen_set(rng, depth, bound):
    if depth <= 0 or rng.random() < 0.5:
        return SSet(tuple(rng.sample(range(4), rng.randint(0, 3)))) \
            if rng.random() < 0.7 else SVar(rng.choice(NAMES))
    return SOp(rng.choice(["union", "djunion", "intersect", "minus"]),
               (gen_set(rng, depth - 1, bound), gen_set(rng, depth - 1, bound)))


def gen_bool(rng, depth, bound):
    if depth <= 0:
        return SBool(rng.random() < 0.5)
    return SOp("leq", (gen_int(rng, depth - 1, bound),
                       gen_int(rng, depth - 1, bound)))


def gen_stype(rng, depth, bound):
    if depth <= 0 or rng.random() < 0.25:
        if bound and rng.random() < 0.4:
            return SVar(rng.choice(bound))
        return SEnd(SInt(rng.randrange(3)))
    pick = rng.randrange(5)
    if pick == 0:
        return SBMsg(SInt(rng.randrange(3)), gen_type(rng, depth - 1, bound, False),
                     gen_stype(rng, depth - 1, bound))
    if pick == 1:
        return SPMsg(SInt(0), SInt(1), gen_type(rng, depth - 1, bound, True),
                     gen_stype(rng, depth - 1, bound))
    if pick == 2:
        v = rng.choice(NAMES)
        return SQuan(SInt(rng.randrange(3)),
                     SLam(v, rng.choice([INT, BOOL]),
                          gen_stype(rng, depth - 1, bound)))
    if pick == 3:
        return SBranch(SInt(rng.randrange(3)), gen_stype(rng, depth - 1, bound),
                       gen_stype(rng, depth - 1, bound))
    v = rng.choice(NAMES)
    return SFix(SLam(v, STYPE, gen_stype(rng, depth - 1, bound + [v])))


def gen_type(rng, depth, bound, linear_ok):
    if depth <= 0 or rng.random() < 0.3:
        pick = rng.randrange(4)
        if pick == 0:
            return TUnit()
        if pick == 1:
            return TBase("string")
        if pick == 2:
            return TBase("int", (gen_int(rng, depth, bound),))
        if linear_ok:
            return TChan(gen_set(rng, 1, bound), gen_stype(rng, depth - 1, bound))
        return TBase("bool", (SBool(rng.random() < 0.5),))
    pick = rng.randrange(5)
    if pick == 0:
        return TPair(gen_type(rng, depth - 1, bound, linear_ok),
                     gen_type(rng, depth - 1, bound, linear_ok),
                     linear=rng.random() < 0.5 if linear_ok else False)
    if pick == 1:
        return TFun(gen_type(rng, depth - 1, bound, linear_ok),
                    gen_type(rng, depth - 1, bound, linear_ok),
                    linear=rng.random() < 0.5)
    if pick == 2:
        return TGuard(gen_bool(rng, depth - 1, bound),
                      gen_type(rng, depth - 1, bound, linear_ok))
    v = rng.choice(NAMES)
    ctor = TForall if pick == 3 else TExists
    return ctor(v, rng.choice(SORTS),
                gen_type(rng, depth - 1, bound + [v], linear_ok))


def gen_term(rng, depth, scope):
    if depth <= 0 or rng.random() < 0.3:
        pick = rng.randrange(6)
        if pick == 0:
            return DUnit()
        if pick == 1:
            return DInt(rng.randint(0, 99))
        if pick == 2:
            return DBool(rng.random() < 0.5)
        if pick == 3:
            return DStr(rng.choice(["hi", 'quo"te', "back\\slash", ""]))
        return DVar(rng.choice(scope or NAMES))
    pick = rng.randrange(10)
    if pick == 0:
        v = rng.choice(NAMES)
        annot = gen_type(rng, 1, [], True) if rng.random() < 0.5 else None
        return DLam(v, gen_term(rng, depth - 1, scope + [v]), annot)
    if pick == 1:
        return DApp(gen_term(rng, depth - 1, scope), gen_term(rng, depth - 1, scope))
    if pick == 2:
        return DPair(gen_term(rng, depth - 1, scope), gen_term(rng, depth - 1, scope))
    if pick == 3:
        v = rng.choice(NAMES)
        return DLet(v, gen_term(rng, depth - 1, scope),
                    gen_term(rng, depth - 1, scope + [v]))
    if pick == 4:
        a, b = rng.sample(NAMES, 2)
        return DLetPair(a, b, gen_term(rng, depth - 1, scope),
                        gen_term(rng, depth - 1, scope + [a, b]))
    if pick == 5:
        return DIf(gen_term(rng, depth - 1, scope), gen_term(rng, depth - 1, scope),
                   gen_term(rng, depth - 1, scope))
    if pick == 6:
        return rng.choice([DFst, DSnd])(gen_term(rng, depth - 1, scope))
    if pick == 7:
        return DForallElim(gen_term(rng, depth - 1, scope), gen_int(rng, 1, []))
    if pick == 8:
        api = rng.choice(["bsend", "brecv", "close", "wait", "fork", "recurse"])
        n = 2 if api == "bsend" else 1
        return DApiCall(api, None,
                        tuple(gen_term(rng, depth - 1, scope) for _ in range(n)))
    sv, v = rng.sample(NAMES, 2)
    return DLetExists(sv, v, gen_term(rng, depth - 1, scope),
                      gen_term(rng, depth - 1, scope + [v]))


def test_roundtrip_random_asts():
    rng = random.Random(20240817)
    for i in range(1000):
        kind = i % 3
        if kind == 0:
            t = gen_stype(rng, rng.randint(1, 4), [])
            back = parse_stype(pretty_static(t))
            assert static_alpha_eq(t, back), pretty_static(t)
        elif kind == 1:
            t = gen_type(rng, rng.randint(1, 4), [], True)
            back = parse_type(pretty_type(t))
            assert type_alpha_eq(t, back), pretty_type(t)
        else:
            t = gen_term(rng, rng.randint(1, 4), [])
            back = parse_expr(pretty_term(t))
            assert term_alpha_eq(t, back), pretty_term(t)


def test_roundtrip_corpus_protocols():
    for name in ("hello", "array", "cloud", "relay"):
        prog = load_program(name)
        for decl in prog.protocols.values():
            txt = pretty_static(decl.body)
            again = parse_stype(txt, universe=decl.universe)
            assert static_alpha_eq(decl.body, again)


def test_endpoint_pretty_not_parseable():
    ep = DEndpoint(0, (1,))
    with pytest.raises(ParseError):
        parse_expr(pretty_term(ep))


def test_sequencing_sugar():
    t = parse_expr("();\n()")
    assert isinstance(t, DSnd)


def test_string_escapes():
    t = parse_expr('"a\\"b\\\\c"')
    assert t == DStr('a"b\\c')
