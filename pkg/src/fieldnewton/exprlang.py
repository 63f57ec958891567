"""Expression language for metric components, potentials, forces and vector fields.

Grammar (whitespace is insignificant, no implicit multiplication)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' ['-'] INT)?          # right associative
    primary := NUMBER | NAME | 'qd' '(' INT ',' INT ')'
             | FUNC '(' expr ')' | 'pow' '(' expr ',' ['-'] INT ')' | '(' expr ')'

so ``-q1^2`` is ``-(q1^2)``.  ``qd(i, a)`` is the velocity component
``qdot^i_a`` (1-based) and is only accepted when the caller enables it.
Evaluation works over floats or jets; function calls on jets go through
:func:`fieldnewton.jets.lift_function`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Union

from .errors import DomainError, ParseError, UnknownIdentifierError
from .jets import is_jet, lift_function

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "reciprocal", "sinh", "cosh", "tan")
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Vel:
    i: int  # 1-based point index
    a: int  # 1-based slot index


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"


Expr = Union[Num, Var, Vel, Neg, BinOp, Pow, Call]


def vel_name(i: int, a: int) -> str:
    """Environment key for ``qd(i, a)``."""
    return f"qd({i},{a})"


# -- tokenizer ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | op | end
    text: str
    pos: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, names: frozenset, velocity_shape):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.names = names
        self.velocity_shape = velocity_shape

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text or t.kind not in ("op",):
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ParseError(f"expected {text!r}, found {found}", t.pos, self.text)
        return self.advance()

    def error(self, msg, pos=None):
        raise ParseError(msg, self.tok.pos if pos is None else pos, self.text)

    def starts_operand(self) -> bool:
        t = self.tok
        return t.kind in ("num", "name") or (t.kind == "op" and t.text in "(-")

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            self.error("empty expression")
        e = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            if not self.starts_operand():
                self.error(f"missing right operand for {op.text!r}", op.pos)
            left = BinOp(op.text, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            if not self.starts_operand():
                self.error(f"missing right operand for {op.text!r}", op.pos)
            left = BinOp(op.text, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.advance()
            if not self.starts_operand():
                self.error("missing operand for unary '-'", op.pos)
            return Neg(self.unary())
        return self.power()

    def int_literal(self, what: str) -> int:
        sign = 1
        start = self.tok.pos
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            sign = -1
        t = self.tok
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            self.error(f"{what} must be an integer literal", start)
        self.advance()
        return sign * int(t.text)

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            n = self.int_literal("exponent")
            if self.tok.kind == "op" and self.tok.text == "^":
                # a^b^c with literal exponents: fold the right-hand tower
                self.advance()
                m = self.int_literal("exponent")
                if m < 0:
                    self.error("nested exponent must be non-negative")
                n = n**m
            return Pow(base, n)
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name":
            self.advance()
            is_call = self.tok.kind == "op" and self.tok.text == "("
            if is_call:
                return self.call(t)
            if t.text in self.names:
                return Var(t.text)
            if t.text in CONSTANTS:
                return Num(CONSTANTS[t.text])
            raise UnknownIdentifierError(t.text, t.pos, self.text)
        if t.kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected {t.text!r}")

    def call(self, name_tok: _Tok) -> Expr:
        name = name_tok.text
        self.expect("(")
        if name == "qd":
            if self.velocity_shape is None:
                self.error("velocity variables qd(i,a) are not allowed here", name_tok.pos)
            i = self.int_literal("point index")
            self.expect(",")
            a = self.int_literal("slot index")
            self.expect(")")
            n, k = self.velocity_shape
            if not (1 <= i <= n and 1 <= a <= k):
                self.error(f"qd({i},{a}) out of range for n={n}, k={k}", name_tok.pos)
            return Vel(i, a)
        if name == "pow":
            base = self.expr()
            self.expect(",")
            n = self.int_literal("exponent")
            self.expect(")")
            return Pow(base, n)
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, name_tok.pos, self.text)
        arg = self.expr()
        self.expect(")")
        return Call(name, arg)


def parse(text: str, names: Iterable[str] = (), velocity_shape: tuple[int, int] | None = None) -> Expr:
    """Parse ``text`` against the declared variable ``names``.

    ``velocity_shape=(n, k)`` enables ``qd(i, a)`` references.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0, text if isinstance(text, str) else None)
    names = frozenset(names)
    clash = names & (set(FUNCTIONS) | set(CONSTANTS) | {"pow", "qd"})
    if clash:
        raise ParseError(f"reserved identifier(s) used as variable names: {sorted(clash)}")
    return _Parser(text, names, velocity_shape).parse()


# -- printing -----------------------------------------------------------------


def pretty(e: Expr) -> str:
    """Text that parses back to an identical tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Vel):
        return f"qd({e.i},{e.a})"
    if isinstance(e, Neg):
        return f"-({pretty(e.operand)})"
    if isinstance(e, BinOp):
        return f"({pretty(e.left)} {e.op} {pretty(e.right)})"
    if isinstance(e, Pow):
        return f"({pretty(e.base)})^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.name}({pretty(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Vel):
        return {vel_name(e.i, e.a)}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg,)):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, Call):
        return free_variables(e.arg)
    raise TypeError(f"not an expression node: {e!r}")


def uses_velocity(e: Expr) -> bool:
    return any(v.startswith("qd(") for v in free_variables(e))


# -- evaluation ---------------------------------------------------------------


def _float_call(name: str, x: float) -> float:
    if name == "reciprocal":
        if x == 0:
            raise DomainError("reciprocal of zero")
        return 1.0 / x
    if name == "log" and x <= 0:
        raise DomainError(f"log of non-positive value {x!r}")
    if name == "sqrt" and x < 0:
        raise DomainError(f"sqrt of negative value {x!r}")
    if name == "tan" and math.cos(x) == 0:
        raise DomainError(f"tan has a pole at {x!r}")
    try:
        return getattr(math, name)(x)
    except (ValueError, OverflowError) as exc:
        raise DomainError(f"{name}({x!r}): {exc}") from None


def _call(name: str, x):
    if is_jet(x):
        return lift_function(name, x)
    return _float_call(name, float(x))


def _div(a, b):
    if is_jet(b):
        if b.value == 0:
            raise DomainError("division by a value whose constant term is zero")
        return a / b
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _pow(a, n: int):
    if is_jet(a):
        return a**n
    if n < 0 and a == 0:
        raise DomainError("negative power of zero")
    return float(a) ** n


@lru_cache(maxsize=4096)
def compile_expr(e: Expr) -> Callable[[Mapping], object]:
    """Turn the tree into nested closures; cached per (hashable) tree."""
    if isinstance(e, Num):
        v = float(e.value)
        return lambda env: v
    if isinstance(e, Var):
        name = e.name

        def var(env):
            try:
                return env[name]
            except KeyError:
                raise UnknownIdentifierError(name) from None

        return var
    if isinstance(e, Vel):
        key = vel_name(e.i, e.a)

        def vel(env):
            try:
                return env[key]
            except KeyError:
                raise UnknownIdentifierError(key) from None

        return vel
    if isinstance(e, Neg):
        f = compile_expr(e.operand)
        return lambda env: -f(env)
    if isinstance(e, BinOp):
        fl, fr = compile_expr(e.left), compile_expr(e.right)
        if e.op == "+":
            return lambda env: fl(env) + fr(env)
        if e.op == "-":
            return lambda env: fl(env) - fr(env)
        if e.op == "*":
            return lambda env: fl(env) * fr(env)
        if e.op == "/":
            return lambda env: _div(fl(env), fr(env))
        raise ValueError(f"unknown operator {e.op!r}")
    if isinstance(e, Pow):
        f, n = compile_expr(e.base), e.exponent
        return lambda env: _pow(f(env), n)
    if isinstance(e, Call):
        f, name = compile_expr(e.arg), e.name
        return lambda env: _call(name, f(env))
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, env: Mapping):
    """Evaluate over floats or jets (one kind per call)."""
    return compile_expr(e)(env)


def is_constant(e: Expr) -> bool:
    return not free_variables(e)


def constant_value(e: Expr) -> float:
    return float(evaluate(e, {}))
