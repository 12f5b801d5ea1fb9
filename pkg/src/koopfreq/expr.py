"""Expression language for plant dynamics and observables.

A small infix language over complex-valued state variables ``x1 .. xd``,
the rotating input channel ``u``, and named real parameters::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?
    atom     := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
    exponent := UINT | '(' ['-'] UINT ['/' UINT] ')'

Exponents are numeric literals, not expressions (chained ``^`` needs
parentheses). Integer exponents >= 0 are allowed on any base; rational and
negative exponents only on the bare variable ``u``. Under rotational
forcing ``u`` never vanishes, and its continuous phase is tracked along
trajectories, so ``u^(p/q)`` is evaluated single-valued on the branch fixed
at t = 0: ``u^(p/q) = |u|^(p/q) * exp(1j*theta*p/q)`` with ``theta`` the
unwound phase. Without a tracked phase the principal argument is used.
Functions: sin, cos, exp, sqrt (principal branch, from cmath).

Trees are immutable, hashable, and print back to parseable source; parsing
the printed form reproduces the tree node for node.
"""

from __future__ import annotations

import cmath
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "Expr", "Num", "Param", "Var", "UVar", "Neg", "Add", "Sub", "Mul", "Div",
    "Pow", "Call", "FUNCTIONS",
    "ExprError", "ParseError", "UnknownIdentifier", "BadExponent",
    "EvalError", "DivisionByZero", "UnboundParameter",
    "parse", "evaluate", "eval_grad", "compile_expr",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")

_VAR_RE = re.compile(r"^x([0-9]+)$")


class ExprError(Exception):
    """Base class for errors raised by this module."""


class ParseError(ExprError):
    """Malformed source text; carries the character offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.message = message
        self.offset = offset


class UnknownIdentifier(ParseError):
    """Identifier that is not u, an in-range x<i>, a parameter, or a function."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class BadExponent(ParseError):
    """Exponent not allowed at this base (rational/negative off u, non-integer)."""


class EvalError(ExprError):
    """Base class for evaluation-time errors."""


class DivisionByZero(EvalError):
    """Division by zero, or zero raised to a negative power."""


class UnboundParameter(EvalError):
    """Expression references a parameter with no bound value."""

    def __init__(self, name: str):
        super().__init__(f"unbound parameter {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Expr:
    """Immutable expression tree node."""

    __slots__ = ()
    precedence = 5

    def __str__(self) -> str:
        return self._fmt()

    def _fmt(self) -> str:
        raise NotImplementedError

    def _wrap(self, child: "Expr", minprec: int) -> str:
        s = child._fmt()
        return f"({s})" if child.precedence < minprec else s

    def children(self) -> tuple["Expr", ...]:
        return ()

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    def param_names(self) -> frozenset[str]:
        return frozenset(n.name for n in self.walk() if isinstance(n, Param))

    def max_var_index(self) -> int:
        return max((n.index for n in self.walk() if isinstance(n, Var)), default=0)

    def uses_fractional_u_power(self) -> bool:
        return any(isinstance(n, Pow) and n.exponent.denominator != 1
                   for n in self.walk())


@dataclass(frozen=True, slots=True)
class Num(Expr):
    """Numeric literal. The parser only produces real values; trees built in
    code may hold complex constants (these do not re-parse)."""
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    def _fmt(self) -> str:
        if self.value.imag == 0.0:
            return repr(self.value.real)
        return repr(self.value)


@dataclass(frozen=True, slots=True)
class Param(Expr):
    name: str

    def _fmt(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Var(Expr):
    """State variable x<index>, 1-based."""
    index: int

    def _fmt(self) -> str:
        return f"x{self.index}"


@dataclass(frozen=True, slots=True)
class UVar(Expr):
    """The rotating input channel u."""

    def _fmt(self) -> str:
        return "u"


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr
    precedence = 3

    def _fmt(self) -> str:
        return f"-{self._wrap(self.arg, 4)}"

    def children(self):
        return (self.arg,)


def _binop(name: str, prec: int, sym: str, right_min: int):
    @dataclass(frozen=True, slots=True)
    class _Op(Expr):
        left: Expr
        right: Expr
        precedence = prec

        def _fmt(self) -> str:
            return f"{self._wrap(self.left, prec)}{sym}{self._wrap(self.right, right_min)}"

        def children(self):
            return (self.left, self.right)

    _Op.__name__ = _Op.__qualname__ = name
    return _Op


Add = _binop("Add", 1, " + ", 2)
Sub = _binop("Sub", 1, " - ", 2)
Mul = _binop("Mul", 2, "*", 3)
Div = _binop("Div", 2, "/", 3)


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    """Power with a literal integer or rational exponent."""
    base: Expr
    exponent: Fraction
    precedence = 4

    def __post_init__(self):
        object.__setattr__(self, "exponent", Fraction(self.exponent))

    def _fmt(self) -> str:
        e = self.exponent
        if e.denominator == 1:
            suffix = f"^{e.numerator}" if e >= 0 else f"^({e.numerator})"
        else:
            suffix = f"^({e.numerator}/{e.denominator})"
        return f"{self._wrap(self.base, 5)}{suffix}"

    def children(self):
        return (self.base,)


@dataclass(frozen=True, slots=True)
class Call(Expr):
    func: str
    arg: Expr

    def _fmt(self) -> str:
        return f"{self.func}({self.arg._fmt()})"

    def children(self):
        return (self.arg,)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<num>[0-9]+\.?[0-9]*(?:[eE][+-]?[0-9]+)?|\.[0-9]+(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[()+\-*/^])"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        if source[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {source[i]!r}", i)
        kind = m.lastgroup
        tokens.append((kind, m.group(), i))
        i = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int, params: frozenset[str]):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.dim = dim
        self.params = params

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text, off = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", off)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", off)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                right = self.term()
                left = Add(left, right) if text == "+" else Sub(left, right)
            else:
                return left

    def term(self) -> Expr:
        left = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                right = self.unary()
                left = Mul(left, right) if text == "*" else Div(left, right)
            else:
                return left

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Pow(base, self.exponent(base, off))
        return base

    def exponent(self, base: Expr, caret_off: int) -> Fraction:
        kind, text, off = self.peek()
        if kind == "num":
            self.advance()
            val = float(text)
            if not val.is_integer():
                raise BadExponent("exponent must be an integer or (p/q)", off)
            return self._check(base, Fraction(int(val)), off)
        if kind == "op" and text == "(":
            self.advance()
            sign = 1
            kind, text, off2 = self.peek()
            if kind == "op" and text == "-":
                self.advance()
                sign = -1
            kind, text, noff = self.peek()
            if kind != "num" or not float(text).is_integer():
                raise BadExponent("exponent must be an integer or (p/q)", noff)
            self.advance()
            p = sign * int(float(text))
            q = 1
            kind, text, _ = self.peek()
            if kind == "op" and text == "/":
                self.advance()
                kind, text, doff = self.peek()
                if kind != "num" or not float(text).is_integer() or int(float(text)) == 0:
                    raise BadExponent("exponent denominator must be a positive integer", doff)
                self.advance()
                q = int(float(text))
            self.expect_op(")")
            return self._check(base, Fraction(p, q), off2 if sign < 0 else noff)
        raise BadExponent("expected integer or (p/q) exponent", off)

    def _check(self, base: Expr, e: Fraction, off: int) -> Fraction:
        if not isinstance(base, UVar):
            if e.denominator != 1:
                raise BadExponent("rational exponents are only allowed on u", off)
            if e < 0:
                raise BadExponent("negative exponents are only allowed on u", off)
        return e

    def atom(self) -> Expr:
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            if text == "u":
                return UVar()
            m = _VAR_RE.match(text)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.dim:
                    raise UnknownIdentifier(text, off)
                return Var(idx)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in self.params:
                return Param(text)
            raise UnknownIdentifier(text, off)
        raise ParseError("expected a number, identifier, or '('", off)


def parse(source: str, dim: int, params: Iterable[str] = ()) -> Expr:
    """Parse ``source`` into an Expr over x1..x<dim>, u, and ``params``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return _Parser(source, dim, frozenset(params)).parse()


# ---------------------------------------------------------------------------
# Evaluation: each tree compiles once (per parameter binding) to a closure
# ---------------------------------------------------------------------------

def _rpow(u: complex, theta, p: int, q: int) -> complex:
    r = p / q
    m = abs(u)
    if m == 0.0:
        if r > 0:
            return 0j
        raise ZeroDivisionError("0 raised to a negative power")
    if theta is None:
        theta = cmath.phase(u)
    return (m ** r) * cmath.exp(1j * theta * r)


_ENV = {
    "sin": cmath.sin, "cos": cmath.cos, "exp": cmath.exp, "sqrt": cmath.sqrt,
    "_rpow": _rpow, "__builtins__": {},
}


def _gen(e: Expr, params: Mapping[str, float]) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Param):
        if e.name not in params:
            raise UnboundParameter(e.name)
        return repr(complex(params[e.name]))
    if isinstance(e, Var):
        return f"x[{e.index - 1}]"
    if isinstance(e, UVar):
        return "u"
    if isinstance(e, Neg):
        return f"(-{_gen(e.arg, params)})"
    if isinstance(e, Add):
        return f"({_gen(e.left, params)}+{_gen(e.right, params)})"
    if isinstance(e, Sub):
        return f"({_gen(e.left, params)}-{_gen(e.right, params)})"
    if isinstance(e, Mul):
        return f"({_gen(e.left, params)}*{_gen(e.right, params)})"
    if isinstance(e, Div):
        return f"({_gen(e.left, params)}/{_gen(e.right, params)})"
    if isinstance(e, Pow):
        if e.exponent.denominator == 1:
            return f"({_gen(e.base, params)})**({e.exponent.numerator})"
        if not isinstance(e.base, UVar):
            raise EvalError("rational exponent on a base other than u")
        return f"_rpow(u, theta, {e.exponent.numerator}, {e.exponent.denominator})"
    if isinstance(e, Call):
        return f"{e.func}({_gen(e.arg, params)})"
    raise TypeError(f"not an Expr node: {e!r}")


@lru_cache(maxsize=1024)
def _compiled(e: Expr, params_key: tuple) -> Callable:
    src = _gen(e, dict(params_key))
    return eval(f"lambda x, u, theta=None: ({src})", dict(_ENV))


def compile_expr(e: Expr, params: Mapping[str, float] | None = None) -> Callable:
    """Compile to a callable ``f(x, u, theta=None) -> complex``.

    Parameter values are baked in. ``theta`` is the tracked continuous phase
    of u, needed only when the tree contains a fractional power of u.
    """
    key = tuple(sorted((params or {}).items()))
    return _compiled(e, key)


def evaluate(e: Expr, x: Sequence[complex], u: complex,
             params: Mapping[str, float] | None = None,
             u_phase: float | None = None) -> complex:
    """Evaluate ``e`` at state ``x``, input ``u``, in complex arithmetic."""
    fn = compile_expr(e, params)
    try:
        return fn(tuple(map(complex, x)), complex(u), u_phase)
    except ZeroDivisionError as z:
        raise DivisionByZero(str(z)) from None


# ---------------------------------------------------------------------------
# Forward-mode differentiation
# ---------------------------------------------------------------------------

def eval_grad(e: Expr, x: Sequence[complex], u: complex,
              params: Mapping[str, float] | None = None,
              u_phase: float | None = None) -> tuple[list[complex], complex]:
    """Gradient of ``e`` with respect to (x, u): returns (grad_x, d/du).

    Exact forward-mode differentiation of the tree, not finite differences.
    """
    xs = tuple(map(complex, x))
    try:
        _, gx, gu = _fwd(e, xs, complex(u), params or {}, u_phase)
    except ZeroDivisionError as z:
        raise DivisionByZero(str(z)) from None
    return list(gx), gu


def _fwd(e: Expr, x, u, params, theta):
    zeros = (0j,) * len(x)
    if isinstance(e, Num):
        return e.value, zeros, 0j
    if isinstance(e, Param):
        if e.name not in params:
            raise UnboundParameter(e.name)
        return complex(params[e.name]), zeros, 0j
    if isinstance(e, Var):
        g = tuple((1 + 0j) if i == e.index - 1 else 0j for i in range(len(x)))
        return x[e.index - 1], g, 0j
    if isinstance(e, UVar):
        return u, zeros, 1 + 0j
    if isinstance(e, Neg):
        v, gx, gu = _fwd(e.arg, x, u, params, theta)
        return -v, tuple(-g for g in gx), -gu
    if isinstance(e, (Add, Sub)):
        va, gxa, gua = _fwd(e.left, x, u, params, theta)
        vb, gxb, gub = _fwd(e.right, x, u, params, theta)
        if isinstance(e, Add):
            return va + vb, tuple(a + b for a, b in zip(gxa, gxb)), gua + gub
        return va - vb, tuple(a - b for a, b in zip(gxa, gxb)), gua - gub
    if isinstance(e, Mul):
        va, gxa, gua = _fwd(e.left, x, u, params, theta)
        vb, gxb, gub = _fwd(e.right, x, u, params, theta)
        return (va * vb,
                tuple(a * vb + va * b for a, b in zip(gxa, gxb)),
                gua * vb + va * gub)
    if isinstance(e, Div):
        va, gxa, gua = _fwd(e.left, x, u, params, theta)
        vb, gxb, gub = _fwd(e.right, x, u, params, theta)
        val = va / vb
        return (val,
                tuple((a * vb - va * b) / (vb * vb) for a, b in zip(gxa, gxb)),
                (gua * vb - va * gub) / (vb * vb))
    if isinstance(e, Pow):
        r = e.exponent
        if r.denominator == 1:
            n = r.numerator
            vb, gxb, gub = _fwd(e.base, x, u, params, theta)
            if n == 0:
                return 1 + 0j, zeros, 0j
            val = vb ** n
            dval = n * vb ** (n - 1)
            return val, tuple(dval * g for g in gxb), dval * gub
        # fractional power: base is u by construction
        val = _rpow(u, theta, r.numerator, r.denominator)
        dval = float(r) * _rpow(u, theta, r.numerator - r.denominator, r.denominator)
        return val, zeros, dval
    if isinstance(e, Call):
        va, gxa, gua = _fwd(e.arg, x, u, params, theta)
        if e.func == "sin":
            val, dval = cmath.sin(va), cmath.cos(va)
        elif e.func == "cos":
            val, dval = cmath.cos(va), -cmath.sin(va)
        elif e.func == "exp":
            val = dval = cmath.exp(va)
        elif e.func == "sqrt":
            val = cmath.sqrt(va)
            dval = 1 / (2 * val)
        else:
            raise EvalError(f"unknown function {e.func!r}")
        return val, tuple(dval * g for g in gxa), dval * gua
    raise TypeError(f"not an Expr node: {e!r}")
