"""Concrete syntax: tokenizer, recursive-descent parser, pretty printer.

Grammar sketch (whitespace-insensitive, ``#`` starts a line comment)::

    formula  ::= or ('->' formula)?             desugared to !a | b
    or       ::= and ('|' or)?
    and      ::= unary ('&' and)?
    unary    ::= '!' unary | quantifier | '<' program '>' unary
               | '[' program ']' unary | '(' formula ')' | comparison
    quant    ::= ('\\exists' | '\\forall') IDENT ('in' '[' term ',' term ']')? '.' formula
    compare  ::= term ('>' | '>=' | '<' | '<=' | '=') term
    term     ::= product (('+' | '-') product)*
    product  ::= factor ('*' factor)*
    factor   ::= NUMBER ('/' NUMBER)? | IDENT | '-' factor | '(' term ')'
    program  ::= seq ('++' program)?
    seq      ::= atomic (';' seq)?
    atomic   ::= IDENT ':=' term | '?' unary | '(' program ')' '*'?
               | '{' ode-or-program '}' '*'?
    ode      ::= IDENT "'" '=' term (',' IDENT "'" '=' term)* ('&' formula)?

``<`` and ``<=`` parse to flipped ``>`` / ``>=`` atoms; ``a = b`` parses to
its conjunction form and the printer resugars it.  Parsing and printing
round-trip structurally.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .syntax import (
    Add,
    And,
    Assign,
    Box,
    Choice,
    Const,
    Diamond,
    EXISTS_CLOSED,
    Exists,
    FORALL_CLOSED,
    Forall,
    Formula,
    Geq,
    Gt,
    Mul,
    Node,
    Ode,
    Or,
    Program,
    RdlError,
    Seq,
    Star,
    TOP,
    Term,
    Test,
    Var,
    desugar_bounded_quantifier,
    eq,
    match_eq,
    negate,
)


class ParseError(RdlError):
    def __init__(self, message: str, line: int, col: int, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{line}:{col}: {message}{hint}")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "ident", "number", "sym", "eof"
    value: str
    line: int
    col: int


_SYMBOLS = [
    ":=", "++", "->", ">=", "<=", "\\exists", "\\forall",
    "(", ")", "[", "]", "{", "}", "<", ">", "=", "&", "|", "!",
    "+", "-", "*", "/", ",", ";", ".", "?", "'",
]


def _tokenize(text: str):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    # a '.' not followed by a digit belongs to a quantifier
                    if j + 1 >= n or not text[j + 1].isdigit():
                        break
                    seen_dot = True
                j += 1
            toks.append(_Tok("number", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(_Tok("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_sym(self, *syms: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.value in syms

    def eat_sym(self, sym: str) -> _Tok:
        t = self.peek()
        if t.kind != "sym" or t.value != sym:
            raise ParseError(f"got {t.value or t.kind!r}", t.line, t.col, (repr(sym),))
        return self.advance()

    def eat_ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"got {t.value or t.kind!r}", t.line, t.col, ("identifier",))
        self.advance()
        return t.value

    def expect_eof(self):
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"trailing input {t.value!r}", t.line, t.col, ("end of input",))

    # ---- formulas ----

    def formula(self) -> Formula:
        left = self.or_level()
        if self.at_sym("->"):
            self.advance()
            right = self.formula()
            return Or(negate(left), right)
        return left

    def or_level(self) -> Formula:
        left = self.and_level()
        if self.at_sym("|"):
            self.advance()
            return Or(left, self.or_level())
        return left

    def and_level(self) -> Formula:
        left = self.unary()
        if self.at_sym("&"):
            self.advance()
            return And(left, self.and_level())
        return left

    def unary(self) -> Formula:
        t = self.peek()
        if self.at_sym("!"):
            self.advance()
            return negate(self.unary())
        if self.at_sym("\\exists", "\\forall"):
            return self.quantifier()
        if self.at_sym("<"):
            self.advance()
            prog = self.program()
            self.eat_sym(">")
            return Diamond(prog, self.unary())
        if self.at_sym("["):
            self.advance()
            prog = self.program()
            self.eat_sym("]")
            return Box(prog, self.unary())
        if self.at_sym("("):
            # may parenthesize a formula or the left term of a comparison
            save = self.pos
            self.advance()
            try:
                f = self.formula()
                self.eat_sym(")")
                if not self.at_sym(">", ">=", "<", "<=", "="):
                    return f
            except ParseError:
                pass
            self.pos = save
            return self.comparison()
        if t.kind in ("ident", "number") or self.at_sym("-"):
            return self.comparison()
        raise ParseError(
            f"got {t.value or t.kind!r}", t.line, t.col,
            ("formula", "quantifier", "modality", "'('", "term"),
        )

    def quantifier(self) -> Formula:
        kw = self.advance().value
        x = self.eat_ident()
        bounded = False
        lo = hi = None
        if self.peek().kind == "ident" and self.peek().value == "in":
            self.advance()
            self.eat_sym("[")
            lo = self.term()
            self.eat_sym(",")
            hi = self.term()
            self.eat_sym("]")
            bounded = True
        self.eat_sym(".")
        body = self.formula()
        if bounded:
            kind = FORALL_CLOSED if kw == "\\forall" else EXISTS_CLOSED
            return desugar_bounded_quantifier(kind, x, lo, hi, body)
        return Forall(x, body) if kw == "\\forall" else Exists(x, body)

    def comparison(self) -> Formula:
        left = self.term()
        t = self.peek()
        if self.at_sym(">"):
            self.advance()
            return Gt(left, self.term())
        if self.at_sym(">="):
            self.advance()
            return Geq(left, self.term())
        if self.at_sym("<"):
            self.advance()
            return Gt(self.term(), left)
        if self.at_sym("<="):
            self.advance()
            return Geq(self.term(), left)
        if self.at_sym("="):
            self.advance()
            return eq(left, self.term())
        raise ParseError(
            f"got {t.value or t.kind!r}", t.line, t.col, ("'>'", "'>='", "'<'", "'<='", "'='"),
        )

    # ---- terms ----

    def term(self) -> Term:
        left = self.product()
        while self.at_sym("+", "-"):
            op = self.advance().value
            right = self.product()
            if op == "+":
                left = Add(left, right)
            else:
                left = Add(left, _negated(right))
        return left

    def product(self) -> Term:
        left = self.factor()
        while self.at_sym("*"):
            self.advance()
            left = Mul(left, self.factor())
        return left

    def factor(self) -> Term:
        t = self.peek()
        if t.kind == "number":
            self.advance()
            value = Fraction(t.value)
            if self.at_sym("/") and self.peek(1).kind == "number":
                self.advance()
                den = self.advance()
                value = value / Fraction(den.value)
            return Const(value)
        if t.kind == "ident":
            self.advance()
            return Var(t.value)
        if self.at_sym("-"):
            self.advance()
            return _negated(self.factor())
        if self.at_sym("("):
            self.advance()
            inner = self.term()
            self.eat_sym(")")
            return inner
        raise ParseError(f"got {t.value or t.kind!r}", t.line, t.col, ("number", "identifier", "'-'", "'('"))

    # ---- programs ----

    def program(self) -> Program:
        left = self.seq()
        if self.at_sym("++"):
            self.advance()
            return Choice(left, self.program())
        return left

    def seq(self) -> Program:
        left = self.atomic_program()
        if self.at_sym(";"):
            self.advance()
            return Seq(left, self.seq())
        return left

    def atomic_program(self) -> Program:
        t = self.peek()
        if t.kind == "ident" and self.peek(1).kind == "sym" and self.peek(1).value == ":=":
            x = self.eat_ident()
            self.eat_sym(":=")
            return Assign(x, self.term())
        if self.at_sym("?"):
            self.advance()
            return Test(self.unary())
        if self.at_sym("("):
            self.advance()
            inner = self.program()
            self.eat_sym(")")
            return self._maybe_star(inner)
        if self.at_sym("{"):
            self.advance()
            if self.peek().kind == "ident" and self.peek(1).kind == "sym" and self.peek(1).value == "'":
                inner = self.ode_body()
            else:
                inner = self.program()
            self.eat_sym("}")
            return self._maybe_star(inner)
        raise ParseError(
            f"got {t.value or t.kind!r}", t.line, t.col,
            ("assignment", "'?'", "'{'", "'('"),
        )

    def _maybe_star(self, p: Program) -> Program:
        if self.at_sym("*"):
            self.advance()
            return Star(p)
        return p

    def ode_body(self) -> Program:
        pairs = []
        while True:
            x = self.eat_ident()
            self.eat_sym("'")
            self.eat_sym("=")
            pairs.append((x, self.term()))
            if self.at_sym(","):
                self.advance()
                continue
            break
        domain: Formula = TOP
        if self.at_sym("&"):
            self.advance()
            domain = self.formula()
        return Ode(tuple(pairs), domain)


def _negated(t: Term) -> Term:
    if isinstance(t, Const):
        return Const(-t.value)
    return Mul(Const(Fraction(-1)), t)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    p.expect_eof()
    return f


def parse_program(text: str) -> Program:
    p = _Parser(text)
    prog = p.program()
    p.expect_eof()
    return prog


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.expect_eof()
    return t


# ---------------------------------------------------------------------------
# Pretty printer.  parse(pretty(x)) == x structurally for every AST.

_T_ADD, _T_MUL, _T_ATOM = 1, 2, 3
_F_OR, _F_AND, _F_UNARY = 1, 2, 3
_P_CHOICE, _P_SEQ, _P_ATOM = 1, 2, 3


def pretty(node: Node) -> str:
    from .syntax import FORMULA_TYPES, PROGRAM_TYPES, TERM_TYPES

    if isinstance(node, TERM_TYPES):
        return _pp_term(node, 0)
    if isinstance(node, FORMULA_TYPES):
        return _pp_formula(node, 0)
    if isinstance(node, PROGRAM_TYPES):
        return _pp_program(node, 0)
    raise TypeError(f"not an AST node: {node!r}")


def _wrap(s: str, need: bool) -> str:
    return f"({s})" if need else s


def _pp_const(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _pp_term(t: Term, prec: int) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return _pp_const(t.value)
    if isinstance(t, Add):
        right = t.right
        if (
            isinstance(right, Mul)
            and right.left == Const(Fraction(-1))
            and not isinstance(right.right, Const)
        ):
            s = f"{_pp_term(t.left, _T_ADD)} - {_pp_term(right.right, _T_MUL)}"
        else:
            s = f"{_pp_term(t.left, _T_ADD)} + {_pp_term(right, _T_MUL)}"
        return _wrap(s, prec > _T_ADD)
    if isinstance(t, Mul):
        s = f"{_pp_term(t.left, _T_MUL)} * {_pp_term(t.right, _T_ATOM)}"
        return _wrap(s, prec > _T_MUL)
    raise TypeError(f"not a term: {t!r}")


def _pp_formula(f: Formula, prec: int) -> str:
    both = match_eq(f)
    if both is not None:
        return f"{_pp_term(both[0], 0)} = {_pp_term(both[1], 0)}"
    if isinstance(f, Gt):
        return f"{_pp_term(f.left, 0)} > {_pp_term(f.right, 0)}"
    if isinstance(f, Geq):
        return f"{_pp_term(f.left, 0)} >= {_pp_term(f.right, 0)}"
    if isinstance(f, Or):
        s = f"{_pp_formula(f.left, _F_AND)} | {_pp_formula(f.right, _F_OR)}"
        return _wrap(s, prec > _F_OR)
    if isinstance(f, And):
        s = f"{_pp_formula(f.left, _F_UNARY)} & {_pp_formula(f.right, _F_AND)}"
        return _wrap(s, prec > _F_AND)
    if isinstance(f, Exists):
        s = f"\\exists {f.var} . {_pp_formula(f.body, 0)}"
        return _wrap(s, prec > 0)
    if isinstance(f, Forall):
        s = f"\\forall {f.var} . {_pp_formula(f.body, 0)}"
        return _wrap(s, prec > 0)
    if isinstance(f, Diamond):
        return f"<{_pp_program(f.program, 0)}> {_pp_formula(f.body, _F_UNARY)}"
    if isinstance(f, Box):
        return f"[{_pp_program(f.program, 0)}] {_pp_formula(f.body, _F_UNARY)}"
    raise TypeError(f"not a formula: {f!r}")


def _pp_program(p: Program, prec: int) -> str:
    if isinstance(p, Assign):
        return f"{p.var} := {_pp_term(p.term, 0)}"
    if isinstance(p, Test):
        cond = p.condition
        if isinstance(cond, (Gt, Geq)) or match_eq(cond) is not None:
            return f"?{_pp_formula(cond, _F_UNARY)}"
        return f"?({_pp_formula(cond, 0)})"
    if isinstance(p, Choice):
        s = f"{_pp_program(p.left, _P_SEQ)} ++ {_pp_program(p.right, _P_CHOICE)}"
        return _wrap(s, prec > _P_CHOICE)
    if isinstance(p, Seq):
        s = f"{_pp_program(p.first, _P_ATOM)} ; {_pp_program(p.second, _P_SEQ)}"
        return _wrap(s, prec > _P_SEQ)
    if isinstance(p, Star):
        return f"{{{_pp_program(p.body, 0)}}}*"
    if isinstance(p, Ode):
        pairs = ", ".join(f"{x}' = {_pp_term(rhs, 0)}" for x, rhs in p.system)
        if p.domain == TOP:
            return f"{{{pairs}}}"
        return f"{{{pairs} & {_pp_formula(p.domain, 0)}}}"
    raise TypeError(f"not a program: {p!r}")
