"""Arithmetic expression language for problem data.

Expressions define the nonlinearity F(x, u), the dominating factor U(x),
the boundary data phi (written in the ambient coordinates x1..xd), and
implicit domain membership. Grammar, in decreasing binding strength:

    atom   := NUMBER | IDENT | IDENT '(' expr {',' expr} ')' | '(' expr ')'
    power  := atom ['^' unary]          # right-associative
    unary  := '-' unary | power
    term   := unary {('*' | '/') unary}
    expr   := term {('+' | '-') term}

so ``-x1^2`` parses as ``-(x1^2)`` and ``2^3^2`` as ``2^(3^2)``. Whitespace
is insignificant. Variables are ``x1..xd``, ``u`` (solution value, only
inside F) and ``r`` (shorthand for |x|). Functions: sin, cos, exp, log,
sqrt, abs, min, max, step. ``step(t)`` is the left-closed Heaviside
(step(0) = 0), included so that jump discontinuities in the boundary data
are expressible.

Evaluation is plain IEEE double arithmetic, elementwise over NumPy arrays
when any binding is an array. sqrt/log of negative arguments (and
fractional powers of negative bases) raise ``ExprDomainError`` instead of
propagating NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import InputError


class ExprError(InputError):
    """Base class for expression language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprNameError(ExprError):
    pass


class ExprArityError(ExprError):
    pass


class ExprRoleError(ExprError):
    pass


class ExprDomainError(ExprError):
    """Math domain error, reported with the offending subexpression."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "ExprAst"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["ExprAst", ...]


ExprAst = Union[Num, Var, Neg, BinOp, Call]

_ARITY = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "min": 2, "max": 2, "step": 1,
}

# Variables each role may reference. phi and U must not depend on u.
_ROLE_VARS = {
    "F": ("x", "u", "r"),
    "U": ("x", "r"),
    "phi": ("x", "r"),
    "domain": ("x", "r"),
}

_VAR_RE = re.compile(r"^x([1-9][0-9]*)$")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _check_role_var(name: str, role: str, offset: int) -> None:
    allowed = _ROLE_VARS[role]
    if name == "u":
        if "u" not in allowed:
            raise ExprRoleError(
                f"variable 'u' is not allowed in a {role!r} expression"
            )
        return
    if name == "r":
        return
    if _VAR_RE.match(name):
        return
    raise ExprNameError(f"unknown identifier {name!r} (at offset {offset})")


class _Parser:
    def __init__(self, source: str, role: str):
        self.src = source
        self.role = role
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str | None:
        self._skip_ws()
        if self.pos >= len(self.src):
            return None
        return self.src[self.pos]

    def _next_token(self):
        m = _TOKEN_RE.match(self.src, self.pos)
        if m is None:
            self._skip_ws()
            raise ExprSyntaxError("unexpected character", self.pos)
        self.pos = m.end()
        return m

    def parse(self) -> ExprAst:
        node = self.expr()
        self._skip_ws()
        if self.pos != len(self.src):
            raise ExprSyntaxError("trailing input", self.pos)
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self._peek() in ("+", "-"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.unary()
        while self._peek() in ("*", "/"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> ExprAst:
        if self._peek() == "-":
            self.pos += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> ExprAst:
        node = self.atom()
        if self._peek() == "^":
            self.pos += 1
            # right operand at unary level: right associativity, and the
            # exponent may carry its own sign (2^-3)
            node = BinOp("^", node, self.unary())
        return node

    def atom(self) -> ExprAst:
        self._skip_ws()
        start = self.pos
        if self.pos >= len(self.src):
            raise ExprSyntaxError("unexpected end of input", self.pos)
        m = self._next_token()
        if m.group("num"):
            return Num(float(m.group("num")))
        if m.group("ident"):
            name = m.group("ident")
            if self._peek() == "(":
                return self.call(name, start)
            _check_role_var(name, self.role, start)
            return Var(name)
        if m.group("op") == "(":
            node = self.expr()
            if self._peek() != ")":
                raise ExprSyntaxError("expected ')'", self.pos)
            self.pos += 1
            return node
        raise ExprSyntaxError(f"unexpected {m.group('op')!r}", start)

    def call(self, name: str, offset: int) -> ExprAst:
        if name not in _ARITY:
            raise ExprNameError(f"unknown function {name!r} (at offset {offset})")
        self.pos += 1  # consume '('
        args = [self.expr()]
        while self._peek() == ",":
            self.pos += 1
            args.append(self.expr())
        if self._peek() != ")":
            raise ExprSyntaxError("expected ')'", self.pos)
        self.pos += 1
        if len(args) != _ARITY[name]:
            raise ExprArityError(
                f"{name} takes {_ARITY[name]} argument(s), got {len(args)}"
            )
        return Call(name, tuple(args))


def parse(source: str, role: str) -> ExprAst:
    """Parse ``source`` for the given role ('F', 'U', 'phi' or 'domain')."""
    if role not in _ROLE_VARS:
        raise InputError(f"unknown expression role {role!r}")
    return _Parser(source, role).parse()


def free_variables(ast: ExprAst) -> set[str]:
    if isinstance(ast, Num):
        return set()
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Neg):
        return free_variables(ast.child)
    if isinstance(ast, BinOp):
        return free_variables(ast.left) | free_variables(ast.right)
    return set().union(*(free_variables(a) for a in ast.args)) if ast.args else set()


# ---------------------------------------------------------------------------
# Evaluation

_SCALAR_FUNCS = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "abs": abs,
    "min": min, "max": max,
}

_ARRAY_FUNCS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs,
    "min": np.minimum, "max": np.maximum,
}


def _is_int_valued(x) -> bool:
    if isinstance(x, np.ndarray):
        return bool(np.all(x == np.floor(x)))
    return x == math.floor(x)


def eval(ast: ExprAst, bindings: Mapping[str, Union[float, np.ndarray]]):
    """Evaluate ``ast`` under ``bindings`` (variable name -> value).

    Scalar bindings give a float; array bindings evaluate elementwise and
    give an ndarray. All free variables must be bound.
    """
    vectorized = any(isinstance(v, np.ndarray) for v in bindings.values())
    return _eval(ast, bindings, vectorized)


def _eval(ast, bindings, vec):
    if isinstance(ast, Num):
        return ast.value
    if isinstance(ast, Var):
        try:
            return bindings[ast.name]
        except KeyError:
            raise ExprNameError(f"unbound variable {ast.name!r}") from None
    if isinstance(ast, Neg):
        return -_eval(ast.child, bindings, vec)
    if isinstance(ast, BinOp):
        left = _eval(ast.left, bindings, vec)
        right = _eval(ast.right, bindings, vec)
        if ast.op == "+":
            return left + right
        if ast.op == "-":
            return left - right
        if ast.op == "*":
            return left * right
        if ast.op == "/":
            if vec:
                with np.errstate(divide="ignore", invalid="ignore"):
                    return left / right
            try:
                return left / right
            except ZeroDivisionError:
                raise ExprDomainError(f"division by zero in {pretty(ast)!r}") from None
        # '^': refuse fractional powers of negative bases (NaN otherwise)
        neg_base = np.any(np.asarray(left) < 0) if vec else left < 0
        if neg_base and not _is_int_valued(right):
            raise ExprDomainError(
                f"negative base with non-integer exponent in {pretty(ast)!r}"
            )
        try:
            return left ** right
        except (ZeroDivisionError, OverflowError):
            raise ExprDomainError(f"power out of range in {pretty(ast)!r}") from None
    # Call
    args = [_eval(a, bindings, vec) for a in ast.args]
    if ast.fn == "step":
        if vec:
            return np.where(np.asarray(args[0]) > 0, 1.0, 0.0)
        return 1.0 if args[0] > 0 else 0.0
    if ast.fn == "sqrt":
        bad = np.any(np.asarray(args[0]) < 0) if vec else args[0] < 0
        if bad:
            raise ExprDomainError(f"sqrt of negative argument in {pretty(ast)!r}")
        return np.sqrt(args[0]) if vec else math.sqrt(args[0])
    if ast.fn == "log":
        bad = np.any(np.asarray(args[0]) <= 0) if vec else args[0] <= 0
        if bad:
            raise ExprDomainError(f"log of non-positive argument in {pretty(ast)!r}")
        return np.log(args[0]) if vec else math.log(args[0])
    table = _ARRAY_FUNCS if vec else _SCALAR_FUNCS
    return table[ast.fn](*args)


# ---------------------------------------------------------------------------
# Pretty printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def pretty(ast: ExprAst) -> str:
    """Render the AST back to source. parse(pretty(t)) reproduces t."""
    return _pp(ast, 0)


def _pp(ast, parent_prec: int) -> str:
    if isinstance(ast, Num):
        v = ast.value
        s = repr(int(v)) if v == int(v) and abs(v) < 1e16 else repr(v)
        # negative literals bind like unary minus: -2^2 must not print as such
        if v < 0 and parent_prec > _PREC["neg"]:
            return f"({s})"
        return s
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        s = "-" + _pp(ast.child, _PREC["neg"])
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(ast, BinOp):
        p = _PREC[ast.op]
        if ast.op == "^":
            # right-associative; exponent prints at unary level
            s = f"{_pp(ast.left, p + 1)}^{_pp(ast.right, _PREC['neg'])}"
        else:
            # left-associative: right operand needs strictly higher precedence
            s = f"{_pp(ast.left, p)} {ast.op} {_pp(ast.right, p + 1)}"
        return f"({s})" if parent_prec > p else s
    inner = ", ".join(_pp(a, 0) for a in ast.args)
    return f"{ast.fn}({inner})"


# ---------------------------------------------------------------------------
# Binding helpers


def point_bindings(points: np.ndarray, u=None) -> dict:
    """Bindings for a (m, d) batch of points (or a single (d,) point)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    b = {f"x{i + 1}": (pts[0, i] if single else pts[:, i])
         for i in range(pts.shape[1])}
    rr = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    b["r"] = float(rr[0]) if single else rr
    if u is not None:
        b["u"] = u
    return b
