"""Rigorous arithmetic: intervals, interval arrays, formulas and their jets."""

from .expr import (Abs, BinOp, Expr, Neg, Num, Pow, PowerLaw, Var, X, compile_float,
                   constant_value, evaluate, linear_form, parse_expr, power_law,
                   substitute, unparse)
from .iarray import IArray
from .interval import Interval, to_fraction
from .jet import Jet2, eval_jet, identity_jet
from ..errors import DomainError, NonSmoothError, ParseError

ROUNDING_MODE = "round-to-nearest with error-free outward correction"


def interval_arith(a: Interval, b: Interval, op: str) -> Interval:
    """Binary interval operation by name: add, sub, mul or div."""
    a, b = Interval(a), Interval(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def interval_elementary(a: Interval, f: str, exponent=None) -> Interval:
    """``abs``, ``sqrt`` or ``pow`` (with a rational exponent)."""
    a = Interval(a)
    if f == "abs":
        return abs(a)
    if f == "sqrt":
        return a.sqrt()
    if f == "pow":
        return a.pow(exponent)
    raise ValueError(f"unknown function {f!r}")


__all__ = [
    "Abs", "BinOp", "DomainError", "Expr", "IArray", "Interval", "Jet2", "Neg",
    "NonSmoothError", "Num", "ParseError", "Pow", "PowerLaw", "ROUNDING_MODE", "Var", "X",
    "compile_float", "constant_value", "eval_jet", "evaluate", "identity_jet",
    "interval_arith", "interval_elementary", "linear_form", "parse_expr", "power_law",
    "substitute", "to_fraction", "unparse",
]
