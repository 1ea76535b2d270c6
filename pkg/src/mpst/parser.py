"""Surface-syntax parser.

One file holds protocol declarations, term definitions, and a main
expression.  Declarations end with ``;``.  A file consisting of a bare
expression is read as ``main``.  ``//`` starts a line comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    ArrowSort, BASE_SORTS, SortLike, Static, SVar, SInt, SBool, SSet, SOp,
    SComplement, SLam, SEnd, SBMsg, SPMsg, SQuan, SBranch, SFix, SIte,
    Type, TVar, TUnit, TBase, TChan, TPair, TFun, TGuard, TAssert, TForall,
    TExists, Term, DVar, DUnit, DInt, DBool, DStr, DLam, DFix, DApp, DPair,
    DFst, DSnd, DLet, DLetPair, DIf, DGuardIntro, DGuardElim, DAssertIntro,
    DLetAssert, DForallIntro, DForallElim, DExistsIntro, DLetExists,
    DApiCall, Program, ProtocolDecl, API_NAMES, fresh_name,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, token: str = ""):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.token = token


KEYWORDS = {
    "protocol", "roles", "universe", "def", "main", "end", "msg", "quan",
    "branch", "fix", "ite", "fn", "lam", "let", "in", "if", "then", "else",
    "fst", "snd", "pack", "inst", "guard", "unguard", "vouch", "all", "true",
    "false", "unit", "int", "bool", "string", "chan", "forall", "exists",
    "and", "or", "not", "notin", "subset", "stype", "set", "type", "vtype",
    *API_NAMES,
}

_PUNCT = [
    "<*>", "==>", "&&&", "::", "==", "!=", "<=", ">=", "=>", "->", "++",
    "\\/", "/\\", "(", ")", "{", "}", ",", ";", ":", "=", "*", "+", "-",
    "/", "<", ">", "~", ".", "\\",
]


@dataclass
class Token:
    kind: str  # "name", "int", "string", "punct", "eof"
    text: str
    line: int
    col: int


def _lex(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            toks.append(Token("name", src[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            out = []
            while j < n and src[j] != '"':
                if src[j] == "\\" and j + 1 < n and src[j + 1] in ('"', "\\"):
                    out.append(src[j + 1])
                    j += 2
                elif src[j] == "\n":
                    raise ParseError("unterminated string", start_line, start_col)
                else:
                    out.append(src[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", start_line, start_col)
            toks.append(Token("string", "".join(out), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        # '-o' is the one-shot arrow only when not part of an identifier
        if src.startswith("-o", i) and (i + 2 >= n or not (src[i + 2].isalnum() or src[i + 2] == "_")):
            toks.append(Token("punct", "-o", start_line, start_col))
            i += 2
            col += 2
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(Token("punct", p, start_line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col, c)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _lex(src)
        self.pos = 0
        self.protocols: dict[str, ProtocolDecl] = {}
        self.aliases: dict[str, int] = {}
        self.ambient_universe: Optional[tuple[int, ...]] = None

    # -- token plumbing ----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("punct", "name")

    def eat(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise ParseError(f"expected {text!r}", t.line, t.col, t.text)
        return self.next()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def name(self, what: str = "name") -> Token:
        t = self.peek()
        if t.kind != "name" or t.text in KEYWORDS:
            raise ParseError(f"expected {what}", t.line, t.col, t.text)
        return self.next()

    def fail(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col, t.text)

    # -- program -----------------------------------------------------------

    def program(self) -> Program:
        defs: dict[str, Term] = {}
        main: Optional[Term] = None
        while self.peek().kind != "eof":
            if self.at("protocol"):
                decl = self.protocol_decl()
                if decl.name in self.protocols:
                    self.fail(f"duplicate protocol {decl.name}")
                self.protocols[decl.name] = decl
            elif self.at("def"):
                self.next()
                nm = self.name("definition name").text
                if nm in defs:
                    self.fail(f"duplicate def {nm}")
                self.eat("=")
                defs[nm] = self.expr()
                self.eat(";")
            elif self.at("main"):
                self.next()
                self.eat("=")
                main = self.expr()
                self.eat(";")
            else:
                # bare expression file: the whole rest is main
                main = self.expr()
                if self.peek().kind != "eof":
                    self.fail("unexpected input after expression")
        return Program(self.protocols, defs, main if main is not None else DUnit())

    def protocol_decl(self) -> ProtocolDecl:
        t0 = self.eat("protocol")
        nm = self.name("protocol name").text
        self.eat("roles")
        aliases: dict[str, int] = {}
        while True:
            a = self.name("role alias").text
            self.eat("=")
            v = int(self.eat_int())
            aliases[a] = v
            if not self.accept(","):
                break
        self.eat("universe")
        self.eat("{")
        uni: list[int] = []
        if not self.at("}"):
            while True:
                uni.append(self.role_value(aliases))
                if not self.accept(","):
                    break
        self.eat("}")
        for a, v in aliases.items():
            if v not in uni:
                raise ParseError(f"role {a}={v} outside universe", t0.line, t0.col)
        self.eat("=")
        merged = dict(self.aliases)
        for a, v in aliases.items():
            if a in merged and merged[a] != v:
                raise ParseError(f"alias {a} already bound to {merged[a]}",
                                 t0.line, t0.col)
            merged[a] = v
        self.aliases = merged
        prev = self.ambient_universe
        self.ambient_universe = tuple(sorted(uni))
        body = self.stype()
        self.ambient_universe = prev
        self.eat(";")
        return ProtocolDecl(nm, aliases, tuple(sorted(uni)), body,
                            span=(t0.line, t0.col))

    def eat_int(self) -> str:
        t = self.peek()
        if t.kind != "int":
            raise ParseError("expected integer", t.line, t.col, t.text)
        return self.next().text

    def role_value(self, aliases: dict[str, int]) -> int:
        t = self.peek()
        if t.kind == "int":
            return int(self.next().text)
        if t.text == "-" and self.peek(1).kind == "int":
            self.next()
            return -int(self.next().text)
        if t.kind == "name" and t.text in aliases:
            self.next()
            return aliases[t.text]
        if t.kind == "name" and t.text in self.aliases:
            self.next()
            return self.aliases[t.text]
        raise ParseError("expected role", t.line, t.col, t.text)

    # -- static expressions -------------------------------------------------

    def role_static(self) -> Static:
        t = self.peek()
        if t.kind == "name" and t.text in self.aliases:
            self.next()
            return SInt(self.aliases[t.text])
        return self.sexpr()

    def sexpr(self) -> Static:
        return self.s_or()

    def s_or(self) -> Static:
        e = self.s_and()
        while self.at("or"):
            self.next()
            e = SOp("or", (e, self.s_and()))
        return e

    def s_and(self) -> Static:
        e = self.s_not()
        while self.at("and"):
            self.next()
            e = SOp("and", (e, self.s_not()))
        return e

    def s_not(self) -> Static:
        if self.accept("not"):
            return SOp("not", (self.s_not(),))
        return self.s_cmp()

    _CMP = {"==": "eq", "!=": "neq", "<": "lt", "<=": "leq",
            "in": "in", "notin": "notin", "subset": "subset"}

    def s_cmp(self) -> Static:
        e = self.s_add()
        t = self.peek()
        if t.text in self._CMP:
            self.next()
            rhs = self.s_add()
            return SOp(self._CMP[t.text], (e, rhs))
        if t.text == ">":
            self.next()
            return SOp("lt", (self.s_add(), e))
        if t.text == ">=":
            self.next()
            return SOp("leq", (self.s_add(), e))
        return e

    _ADD = {"+": "add", "-": "sub", "\\/": "union", "++": "djunion", "\\": "minus"}
    _MUL = {"*": "mul", "/": "div", "/\\": "intersect"}

    def s_add(self) -> Static:
        e = self.s_mul()
        while self.peek().text in self._ADD and self.peek().kind == "punct":
            op = self.next().text
            e = SOp(self._ADD[op], (e, self.s_mul()))
        return e

    def s_mul(self) -> Static:
        e = self.s_unary()
        while self.peek().text in self._MUL and self.peek().kind == "punct":
            op = self.next().text
            e = SOp(self._MUL[op], (e, self.s_unary()))
        return e

    def s_unary(self) -> Static:
        if self.at("~"):
            t = self.next()
            if self.ambient_universe is None:
                raise ParseError("set complement needs an enclosing protocol "
                                 "declaration", t.line, t.col)
            return SComplement(self.s_unary(), self.ambient_universe)
        return self.s_atom()

    def s_atom(self) -> Static:
        t = self.peek()
        if t.kind == "int":
            return SInt(int(self.next().text))
        if t.text == "-" and self.peek(1).kind == "int":
            self.next()
            return SInt(-int(self.next().text))
        if self.accept("true"):
            return SBool(True)
        if self.accept("false"):
            return SBool(False)
        if t.text == "{":
            self.next()
            ms: list[int] = []
            if not self.at("}"):
                while True:
                    ms.append(self.role_value({}))
                    if not self.accept(","):
                        break
            self.eat("}")
            return SSet(tuple(ms))
        if t.text == "(":
            self.next()
            e = self.sexpr()
            self.eat(")")
            return e
        if t.kind == "name" and t.text not in KEYWORDS:
            nm = self.next().text
            if nm in self.aliases:
                return SInt(self.aliases[nm])
            return SVar(nm)
        raise ParseError("expected static expression", t.line, t.col, t.text)

    # -- sorts ---------------------------------------------------------------

    def sort(self) -> SortLike:
        if self.accept("("):
            s = self.sort()
            if self.accept("->"):
                s = ArrowSort("->", s, self.sort())
            self.eat(")")
            return s
        t = self.peek()
        if t.kind == "name" and t.text in BASE_SORTS:
            self.next()
            s: SortLike = BASE_SORTS[t.text]
            if self.accept("->"):
                return ArrowSort("->", s, self.sort())
            return s
        raise ParseError("expected sort", t.line, t.col, t.text)

    # -- session types -------------------------------------------------------

    _STYPE_HEADS = {"end", "msg", "quan", "branch", "fix", "ite"}

    def stype(self) -> Static:
        t = self.peek()
        if self.accept("end"):
            self.eat("(")
            r = self.role_static()
            self.eat(")")
            return SEnd(r)
        if self.accept("msg"):
            self.eat("(")
            r1 = self.role_static()
            if self.accept("->"):
                r2 = self.role_static()
                self.eat(",")
                pay = self.ltype()
                self.eat(")")
                self.eat("::")
                return SPMsg(r1, r2, pay, self.stype())
            self.eat(",")
            pay = self.ltype()
            self.eat(")")
            self.eat("::")
            return SBMsg(r1, pay, self.stype())
        if self.accept("quan"):
            self.eat("(")
            r = self.role_static()
            self.eat(",")
            b = self.static_fn()
            self.eat(")")
            return SQuan(r, b)
        if self.accept("branch"):
            self.eat("(")
            r = self.role_static()
            self.eat(",")
            l = self.stype()
            self.eat(",")
            rr = self.stype()
            self.eat(")")
            return SBranch(r, l, rr)
        if self.accept("fix"):
            self.eat("(")
            b = self.static_fn()
            self.eat(")")
            return SFix(b)
        if self.accept("ite"):
            self.eat("(")
            c = self.sexpr()
            self.eat(",")
            th = self.stype()
            self.eat(",")
            el = self.stype()
            self.eat(")")
            return SIte(c, th, el)
        if self.accept("("):
            s = self.stype()
            self.eat(")")
            return s
        if t.kind == "name" and t.text not in KEYWORDS:
            nm = self.next().text
            if nm in self.protocols:
                decl = self.protocols[nm]
                if (self.ambient_universe is not None
                        and decl.universe != self.ambient_universe):
                    raise ParseError(
                        f"protocol {nm} has universe {list(decl.universe)}, "
                        f"enclosing declaration has {list(self.ambient_universe)}",
                        t.line, t.col)
                return decl.body
            return SVar(nm)
        raise ParseError("expected session type", t.line, t.col, t.text)

    def static_fn(self) -> Static:
        self.eat("fn")
        p = self.name("static parameter").text
        self.eat(":")
        s = self.sort()
        self.eat("=>")
        return SLam(p, s, self.stype_or_sexpr())

    def stype_or_sexpr(self) -> Static:
        t = self.peek()
        if t.text in self._STYPE_HEADS or (t.kind == "name" and t.text in self.protocols):
            return self.stype()
        if t.kind == "name" and t.text not in KEYWORDS:
            return self.stype()  # a session-type variable reference
        return self.sexpr()

    # -- types ----------------------------------------------------------------

    def ltype(self) -> Type:
        t = self.peek()
        if self.accept("forall"):
            v = self.name("static variable").text
            self.eat(":")
            s = self.sort()
            self.eat(".")
            return TForall(v, s, self.ltype())
        if self.accept("exists"):
            v = self.name("static variable").text
            self.eat(":")
            s = self.sort()
            self.eat(".")
            return TExists(v, s, self.ltype())
        # tentative: a guard/assert prop followed by ==> or &&&
        save = self.pos
        try:
            prop = self.sexpr()
            if self.at("==>"):
                self.next()
                return TGuard(prop, self.ltype())
            if self.at("&&&"):
                self.next()
                return TAssert(prop, self.ltype())
        except ParseError:
            pass
        self.pos = save
        return self.fun_type()

    def fun_type(self) -> Type:
        d = self.pair_type()
        if self.accept("->"):
            return TFun(d, self.fun_type(), linear=False)
        if self.accept("-o"):
            return TFun(d, self.fun_type(), linear=True)
        return d

    def pair_type(self) -> Type:
        e = self.atom_type()
        while True:
            if self.accept("*"):
                e = TPair(e, self.atom_type(), linear=False)
            elif self.accept("<*>"):
                e = TPair(e, self.atom_type(), linear=True)
            else:
                return e

    def atom_type(self) -> Type:
        t = self.peek()
        if self.accept("unit"):
            return TUnit()
        if self.accept("string"):
            return TBase("string")
        if t.text in ("int", "bool"):
            self.next()
            if self.accept("("):
                idx = self.sexpr()
                self.eat(")")
                return TBase(t.text, (idx,))
            return TBase(t.text)
        if self.accept("chan"):
            self.eat("(")
            roles = self.sexpr()
            self.eat(",")
            uni_before = self.pos
            proto = self.stype()
            uni = self._chan_universe(uni_before)
            self.eat(")")
            return TChan(roles, proto, uni)
        if self.accept("("):
            e = self.ltype()
            self.eat(")")
            return e
        if t.kind == "name" and t.text not in KEYWORDS:
            return TVar(self.next().text)
        raise ParseError("expected type", t.line, t.col, t.text)

    def _chan_universe(self, start_pos: int) -> Optional[tuple[int, ...]]:
        # only a declared protocol name pins down the session's universe;
        # other sessions (protocol variables, literal terms) leave it open
        tok = self.toks[start_pos]
        if tok.kind == "name" and tok.text in self.protocols:
            return self.protocols[tok.text].universe
        return None

    # -- expressions ------------------------------------------------------------

    _EXPR_STARTERS = {"lam", "fix", "let", "if", "fst", "snd", "guard",
                      "unguard", "vouch", "all", "inst", "pack", "true",
                      "false", "(", *API_NAMES}

    def _starts_expr(self, t: Token) -> bool:
        if t.kind in ("int", "string"):
            return True
        if t.kind == "name":
            return t.text in self._EXPR_STARTERS or t.text not in KEYWORDS
        return t.text == "("

    def expr(self) -> Term:
        e = self.expr_nosemi()
        while self.at(";") and self._starts_expr(self.peek(1)):
            self.next()
            rhs = self.expr_nosemi()
            e = DSnd(DPair(e, rhs))
        return e

    def expr_nosemi(self) -> Term:
        t = self.peek()
        sp = (t.line, t.col)
        if self.accept("lam"):
            param, annot = self.lam_param()
            self.eat("=>")
            return DLam(param, self.expr_nosemi(), annot, span=sp)
        if self.accept("fix"):
            g = self.name("function name").text
            self.eat("(")
            x = self.name("parameter").text
            self.eat(":")
            dom = self.ltype()
            self.eat(")")
            self.eat(":")
            cod = self.ltype()
            self.eat("=>")
            return DFix(g, x, self.expr_nosemi(), dom, cod, span=sp)
        if self.accept("let"):
            return self.let_tail(sp)
        if self.accept("if"):
            c = self.expr_nosemi()
            self.eat("then")
            th = self.expr_nosemi()
            self.eat("else")
            return DIf(c, th, self.expr_nosemi(), span=sp)
        return self.app_expr()

    def lam_param(self) -> tuple[str, Optional[Type]]:
        if self.accept("("):
            p = self.name("parameter").text
            self.eat(":")
            annot = self.ltype()
            self.eat(")")
            return p, annot
        return self.name("parameter").text, None

    def let_tail(self, sp) -> Term:
        if self.accept("("):
            x1 = self.name("variable").text
            self.eat(",")
            x2 = self.name("variable").text
            self.eat(")")
            self.eat("=")
            b = self.expr_nosemi()
            self.eat("in")
            return DLetPair(x1, x2, b, self.expr(), span=sp)
        if self.accept("pack"):
            self.eat("(")
            n1 = self.name("variable").text
            if self.accept(","):
                n2 = self.name("variable").text
                sv, x = n1, n2
            else:
                sv, x = fresh_name(n1), n1
            self.eat(")")
            self.eat("=")
            b = self.expr_nosemi()
            self.eat("in")
            return DLetExists(sv, x, b, self.expr(), span=sp)
        if self.accept("vouch"):
            self.eat("(")
            x = self.name("variable").text
            self.eat(")")
            self.eat("=")
            b = self.expr_nosemi()
            self.eat("in")
            return DLetAssert(x, b, self.expr(), span=sp)
        x = self.name("variable").text
        self.eat("=")
        b = self.expr_nosemi()
        self.eat("in")
        return DLet(x, b, self.expr(), span=sp)

    def app_expr(self) -> Term:
        e = self.atom_expr()
        while self.at("(") :
            t = self.next()
            args = []
            if not self.at(")"):
                while True:
                    args.append(self.expr_nosemi())
                    if not self.accept(","):
                        break
            self.eat(")")
            if not args:
                args = [DUnit(span=(t.line, t.col))]
            for a in args:
                e = DApp(e, a, span=(t.line, t.col))
        return e

    def atom_expr(self) -> Term:
        t = self.peek()
        sp = (t.line, t.col)
        if t.kind == "int":
            return DInt(int(self.next().text), span=sp)
        if t.text == "-" and self.peek(1).kind == "int":
            self.next()
            return DInt(-int(self.next().text), span=sp)
        if t.kind == "string":
            return DStr(self.next().text, span=sp)
        if self.accept("true"):
            return DBool(True, span=sp)
        if self.accept("false"):
            return DBool(False, span=sp)
        if self.at("("):
            self.next()
            if self.accept(")"):
                return DUnit(span=sp)
            e = self.expr()
            if self.accept(","):
                e2 = self.expr_nosemi()
                self.eat(")")
                return DPair(e, e2, span=sp)
            self.eat(")")
            return e
        if self.accept("fst"):
            self.eat("(")
            e = self.expr_nosemi()
            self.eat(")")
            return DFst(e, span=sp)
        if self.accept("snd"):
            self.eat("(")
            e = self.expr_nosemi()
            self.eat(")")
            return DSnd(e, span=sp)
        if self.accept("guard"):
            self.eat("(")
            e = self.expr_nosemi()
            self.eat(")")
            return DGuardIntro(e, span=sp)
        if self.accept("unguard"):
            self.eat("(")
            e = self.expr_nosemi()
            self.eat(")")
            return DGuardElim(e, span=sp)
        if self.accept("vouch"):
            self.eat("(")
            e = self.expr_nosemi()
            self.eat(")")
            return DAssertIntro(e, span=sp)
        if self.accept("all"):
            self.eat("(")
            e = self.expr_nosemi()
            self.eat(")")
            return DForallIntro(e, span=sp)
        if self.accept("inst"):
            self.eat("(")
            e = self.expr_nosemi()
            while self.accept(","):
                s = self.stype_or_sexpr()
                e = DForallElim(e, s, span=sp)
            if isinstance(e, DForallElim):
                self.eat(")")
                return e
            self.eat(")")
            return DForallElim(e, None, span=sp)
        if self.accept("pack"):
            self.eat("(")
            e = self.expr_nosemi()
            w = None
            if self.accept(","):
                w = self.stype_or_sexpr()
            self.eat(")")
            return DExistsIntro(e, w, span=sp)
        if t.kind == "name" and t.text in API_NAMES:
            self.next()
            self.eat("(")
            args = []
            if not self.at(")"):
                while True:
                    args.append(self.expr_nosemi())
                    if not self.accept(","):
                        break
            self.eat(")")
            return DApiCall(t.text, None, tuple(args), span=sp)
        if t.kind == "name" and t.text not in KEYWORDS:
            return DVar(self.next().text, span=sp)
        raise ParseError("expected expression", t.line, t.col, t.text)


def parse_program(src: str) -> Program:
    return _Parser(src).program()


def parse_expr(src: str) -> Term:
    p = _Parser(src)
    e = p.expr()
    if p.peek().kind != "eof":
        p.fail("unexpected input after expression")
    return e


def parse_type(src: str, protocols: Optional[dict[str, ProtocolDecl]] = None) -> Type:
    p = _Parser(src)
    if protocols:
        p.protocols = dict(protocols)
        for d in protocols.values():
            p.aliases.update(d.aliases)
    t = p.ltype()
    if p.peek().kind != "eof":
        p.fail("unexpected input after type")
    return t


def parse_stype(src: str, protocols: Optional[dict[str, ProtocolDecl]] = None,
                universe: Optional[tuple[int, ...]] = None) -> Static:
    p = _Parser(src)
    if protocols:
        p.protocols = dict(protocols)
        for d in protocols.values():
            p.aliases.update(d.aliases)
    p.ambient_universe = universe
    s = p.stype()
    if p.peek().kind != "eof":
        p.fail("unexpected input after session type")
    return s
