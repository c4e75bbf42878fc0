"""A small expression language for branch formulas.

Grammar (whitespace is ignored between tokens)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | 'x' | '(' expr ')' | 'abs' '(' expr ')'
    number := decimal | integer '/' integer

A rational literal ``p/q`` is a single token only when written without
spaces, so ``x^1/2`` is ``x^(1/2)`` while ``x^1 / 2`` divides by two.
Exponents must be constant; they are folded to an exact ``Fraction``.
``^`` binds tighter than unary minus: ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from ..errors import ParseError


class Expr:
    """Base class of the AST nodes."""

    __slots__ = ()

    def __str__(self):
        return unparse(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Abs(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction


X = Var()

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<rat>\d+/\d+(?![\d.eE]))"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(text):
    pos = 0
    tokens = []
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1, text)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {what}", pos, self.text)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos, self.text)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            _, _, pos = self.take()
            exponent = self.unary()
            value = constant_value(exponent)
            if value is None:
                raise ParseError("exponent must be a constant", pos + 1, self.text)
            return Pow(base, value)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "rat":
            p, q = val.split("/")
            if int(q) == 0:
                raise ParseError("zero denominator", pos, self.text)
            return Num(Fraction(int(p), int(q)))
        if kind == "num":
            return Num(Fraction(val))
        if kind == "name":
            if val == "x":
                return X
            if val == "abs":
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Abs(inner)
            raise ParseError(f"unknown identifier {val!r}", pos, self.text)
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected {val!r}", pos, self.text)


def parse_expr(text: str) -> Expr:
    """Parse formula text into an AST.  Raises :class:`ParseError`."""
    return _Parser(text).parse()


def constant_value(e: Expr):
    """Exact value of a variable-free expression, or None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return None
    if isinstance(e, Neg):
        v = constant_value(e.arg)
        return None if v is None else -v
    if isinstance(e, Abs):
        v = constant_value(e.arg)
        return None if v is None else abs(v)
    if isinstance(e, BinOp):
        a = constant_value(e.left)
        b = constant_value(e.right)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            return None
        return a / b
    if isinstance(e, Pow):
        v = constant_value(e.base)
        if v is None or e.exponent.denominator != 1:
            return None
        if v == 0 and e.exponent < 0:
            return None
        return v ** e.exponent.numerator
    return None


def _num_text(q: Fraction) -> str:
    if q.denominator == 1:
        s = str(q.numerator)
    else:
        s = f"{q.numerator}/{q.denominator}"
    return f"({s})" if q < 0 else s


def unparse(e: Expr) -> str:
    """Text that parses back to an equal AST."""
    if isinstance(e, Num):
        if e.value < 0:
            return f"(0-{_num_text(-e.value)})"
        return _num_text(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        return f"(-{unparse(e.arg)})"
    if isinstance(e, Abs):
        return f"abs({unparse(e.arg)})"
    if isinstance(e, BinOp):
        return f"({unparse(e.left)} {e.op} {unparse(e.right)})"
    if isinstance(e, Pow):
        return f"({unparse(e.base)})^({_num_text(e.exponent)})"
    raise TypeError(e)


def substitute(outer: Expr, inner: Expr) -> Expr:
    """``outer`` with every ``x`` replaced by ``inner`` (composition)."""
    if isinstance(outer, Var):
        return inner
    if isinstance(outer, Num):
        return outer
    if isinstance(outer, Neg):
        return Neg(substitute(outer.arg, inner))
    if isinstance(outer, Abs):
        return Abs(substitute(outer.arg, inner))
    if isinstance(outer, BinOp):
        return BinOp(outer.op, substitute(outer.left, inner), substitute(outer.right, inner))
    if isinstance(outer, Pow):
        return Pow(substitute(outer.base, inner), outer.exponent)
    raise TypeError(outer)


def evaluate(e: Expr, x):
    """Interval evaluation; ``x`` is an Interval or an IArray."""
    if isinstance(e, Var):
        return x
    if isinstance(e, Num):
        return _const(e.value, x)
    if isinstance(e, BinOp):
        a = evaluate(e.left, x)
        b = evaluate(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Neg):
        return -evaluate(e.arg, x)
    if isinstance(e, Abs):
        return abs(evaluate(e.arg, x))
    if isinstance(e, Pow):
        return evaluate(e.base, x).pow(e.exponent)
    raise TypeError(e)


_CONST_CACHE: dict = {}


def _const(q: Fraction, like):
    from .interval import Interval
    iv = _CONST_CACHE.get(q)
    if iv is None:
        iv = Interval(q)
        _CONST_CACHE[q] = iv
    return iv


def _py(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, Abs):
        return f"abs({_py(e.arg)})"
    if isinstance(e, BinOp):
        return f"({_py(e.left)} {e.op} {_py(e.right)})"
    if isinstance(e, Pow):
        p = e.exponent
        if p.denominator == 1:
            return f"({_py(e.base)}) ** {p.numerator}"
        return f"({_py(e.base)}) ** {float(p)!r}"
    raise TypeError(e)


def compile_float(e: Expr) -> Callable:
    """Plain floating-point evaluator (works on floats and numpy arrays).

    Used only to locate roots quickly; every result it produces is
    re-certified with interval arithmetic.
    """
    src = f"lambda x: {_py(e)}"
    return eval(src, {"abs": abs, "__builtins__": {}})


def count_binary(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 + count_binary(e.left) + count_binary(e.right)
    if isinstance(e, (Neg, Abs)):
        return count_binary(e.arg)
    if isinstance(e, Pow):
        return count_binary(e.base)
    return 0


# -- power-law recognition --------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """``offset + scale * w**p`` with ``w = |a*x + b|`` (or ``a*x + b``)."""
    offset: Fraction
    scale: Fraction
    a: Fraction
    b: Fraction
    p: Fraction
    absolute: bool


def linear_form(e: Expr):
    """(a, b) with e == a*x + b, or None."""
    c = constant_value(e)
    if c is not None:
        return Fraction(0), c
    if isinstance(e, Var):
        return Fraction(1), Fraction(0)
    if isinstance(e, Neg):
        f = linear_form(e.arg)
        return None if f is None else (-f[0], -f[1])
    if isinstance(e, BinOp):
        if e.op in "+-":
            f, g = linear_form(e.left), linear_form(e.right)
            if f is None or g is None:
                return None
            s = 1 if e.op == "+" else -1
            return f[0] + s * g[0], f[1] + s * g[1]
        if e.op == "*":
            cl, cr = constant_value(e.left), constant_value(e.right)
            if cl is not None:
                f = linear_form(e.right)
                return None if f is None else (cl * f[0], cl * f[1])
            if cr is not None:
                f = linear_form(e.left)
                return None if f is None else (cr * f[0], cr * f[1])
            return None
        if e.op == "/":
            cr = constant_value(e.right)
            if cr:
                f = linear_form(e.left)
                return None if f is None else (f[0] / cr, f[1] / cr)
    return None


def power_law(e: Expr):
    """Recognise ``c0 + c1 * |a x + b|^p`` with non-integer p; else None."""
    if isinstance(e, Pow):
        if e.exponent.denominator == 1:
            return None
        base = e.base
        absolute = isinstance(base, Abs)
        lin = linear_form(base.arg if absolute else base)
        if lin is None or lin[0] == 0:
            return None
        return PowerLaw(Fraction(0), Fraction(1), lin[0], lin[1], e.exponent, absolute)
    if isinstance(e, Neg):
        pl = power_law(e.arg)
        if pl is None:
            return None
        return PowerLaw(-pl.offset, -pl.scale, pl.a, pl.b, pl.p, pl.absolute)
    if isinstance(e, BinOp):
        cl, cr = constant_value(e.left), constant_value(e.right)
        if e.op in "+-":
            s = 1 if e.op == "+" else -1
            if cl is not None:
                pl = power_law(e.right)
                if pl is None:
                    return None
                return PowerLaw(cl + s * pl.offset, s * pl.scale, pl.a, pl.b, pl.p, pl.absolute)
            if cr is not None:
                pl = power_law(e.left)
                if pl is None:
                    return None
                return PowerLaw(pl.offset + s * cr, pl.scale, pl.a, pl.b, pl.p, pl.absolute)
            return None
        if e.op == "*":
            c, other = (cl, e.right) if cl is not None else (cr, e.left)
            if c is None or c == 0:
                return None
            pl = power_law(other)
            if pl is None:
                return None
            return PowerLaw(c * pl.offset, c * pl.scale, pl.a, pl.b, pl.p, pl.absolute)
        if e.op == "/" and cr:
            pl = power_law(e.left)
            if pl is None:
                return None
            return PowerLaw(pl.offset / cr, pl.scale / cr, pl.a, pl.b, pl.p, pl.absolute)
    return None
