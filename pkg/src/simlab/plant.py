"""Agent/leader dynamics declared as text expressions, plus disturbance models.

Every agent is a chain of integrators whose top derivative picks up one
scalar nonlinearity f(x, t); scenarios declare f as text like
``"x2*sin(x1) + cos(x3)^2"``. Variables: x1..xM for the evaluating agent's
own state, x01..x0M for the leader state, and t. Functions: sin, cos, tan,
tanh, exp, abs, sqrt. Precedence, tightest first: unary minus, ^ (integer
exponent, right-associative), * and /, + and -. Note that unary minus binds
tighter than ^, so -x1^2 means (-x1)^2.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EvalError,
    ExprSyntaxError,
    UnknownFunction,
    UnknownVariable,
)

FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "tanh": math.tanh,
    "exp": math.exp,
    "abs": abs,
    "sqrt": math.sqrt,
}


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "t", "x<i>", or "x0<i>"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN_RE = re.compile(
    r"(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)

_AGENT_VAR_RE = re.compile(r"x([1-9]\d*)\Z")
_LEADER_VAR_RE = re.compile(r"x0([1-9]\d*)\Z")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    """Recursive-descent parser over the token stream."""

    def __init__(self, source: str, order: int):
        self.source = source
        self.order = order
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != symbol:
            raise ExprSyntaxError(f"expected {symbol!r}, found {text or 'end of input'!r}", pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected trailing input {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.power()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.power())
            else:
                return node

    def power(self) -> Node:
        node = self.unary()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            _, _, epos = self.peek()
            exponent = self.power()  # right-associative
            if _const_int(exponent) is None:
                raise ExprSyntaxError("exponent must be an integer constant", epos)
            node = BinOp("^", node, exponent)
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.advance()
            return self.unary()
        return self.atom()

    def atom(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nxt_kind, nxt_text, _ = self.peek()
            if nxt_kind == "op" and nxt_text == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {text!r}", pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            return self.variable(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected token {text or 'end of input'!r}", pos)

    def variable(self, name: str, pos: int) -> Var:
        if name == "t":
            return Var("t")
        m = _LEADER_VAR_RE.match(name)
        if m:
            idx = int(m.group(1))
            if idx > self.order:
                raise UnknownVariable(f"leader variable {name!r} exceeds order {self.order}", pos)
            return Var(name)
        m = _AGENT_VAR_RE.match(name)
        if m:
            idx = int(m.group(1))
            if idx > self.order:
                raise UnknownVariable(f"variable {name!r} exceeds order {self.order}", pos)
            return Var(name)
        raise UnknownVariable(f"unknown variable {name!r}", pos)


def _const_int(node: Node):
    """Fold a node to an integer when it is a constant integer expression."""
    if isinstance(node, Num):
        if float(node.value).is_integer():
            return int(node.value)
        return None
    if isinstance(node, Neg):
        inner = _const_int(node.operand)
        return None if inner is None else -inner
    if isinstance(node, BinOp) and node.op == "^":
        base, expo = _const_int(node.left), _const_int(node.right)
        if base is None or expo is None or expo < 0:
            return None
        return base ** expo
    return None


# --- printing / evaluation -------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _unparse(node: Node, parent_prec: int = 0) -> str:
    if isinstance(node, Num):
        text = repr(node.value)
        return text[:-2] if text.endswith(".0") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _unparse(node.operand, 5)
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({_unparse(node.arg)})"
    prec = _PRECEDENCE[node.op]
    # ^ takes a unary on the left, so parenthesize anything looser; right side
    # of - and / must also be wrapped at equal precedence (left-associativity)
    left = _unparse(node.left, prec + 1 if node.op == "^" else prec)
    right = _unparse(node.right, prec if node.op == "^" else prec + 1)
    text = f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
    if prec < parent_prec:
        return f"({text})"
    return text


def _interpret(node: Node, x, x0, t: float) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "t":
            return float(t)
        m = _LEADER_VAR_RE.match(node.name)
        if m:
            return float(x0[int(m.group(1)) - 1])
        return float(x[int(node.name[1:]) - 1])
    if isinstance(node, Neg):
        return -_interpret(node.operand, x, x0, t)
    if isinstance(node, Call):
        arg = _interpret(node.arg, x, x0, t)
        try:
            return FUNCTIONS[node.func](arg)
        except ValueError as exc:
            raise EvalError(f"{node.func}({arg}) domain fault") from exc
        except OverflowError as exc:
            raise EvalError(f"{node.func}({arg}) overflow") from exc
    left = _interpret(node.left, x, x0, t)
    right = _interpret(node.right, x, x0, t)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if right == 0.0:
            raise EvalError(f"division by zero in {_unparse(node)}")
        return left / right
    # integer power
    try:
        return float(left ** int(right))
    except (ZeroDivisionError, OverflowError) as exc:
        raise EvalError(f"power fault in {_unparse(node)}") from exc


def _gen_div(a, b) -> float:
    # plain-float semantics so division by zero raises instead of giving inf
    return float(a) / float(b)


def _gen_pow(a, k: int) -> float:
    return float(a) ** k


def _codegen(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        if node.name == "t":
            return "t"
        m = _LEADER_VAR_RE.match(node.name)
        if m:
            return f"x0[{int(m.group(1)) - 1}]"
        return f"x[{int(node.name[1:]) - 1}]"
    if isinstance(node, Neg):
        return f"(-{_codegen(node.operand)})"
    if isinstance(node, Call):
        return f"_f_{node.func}({_codegen(node.arg)})"
    if node.op == "^":
        return f"_f_pow({_codegen(node.left)}, {_const_int(node.right)})"
    if node.op == "/":
        return f"_f_div({_codegen(node.left)}, {_codegen(node.right)})"
    return f"({_codegen(node.left)}{node.op}{_codegen(node.right)})"


@dataclass(frozen=True, eq=False)
class DynamicsExpr:
    """Parsed dynamics expression; immutable and reentrant."""

    source: str
    ast: Node
    order: int

    def __post_init__(self):
        namespace = {f"_f_{name}": fn for name, fn in FUNCTIONS.items()}
        namespace["_f_div"] = _gen_div
        namespace["_f_pow"] = _gen_pow
        fn = eval(f"lambda x, x0, t: {_codegen(self.ast)}", namespace)  # noqa: S307 - generated from validated AST
        object.__setattr__(self, "_fn", fn)

    def unparse(self) -> str:
        """Text form that parses back to an identical AST."""
        return _unparse(self.ast)

    def interpret(self, x, x0, t: float) -> float:
        """Reference tree-walking evaluation (slow path, used as an oracle)."""
        return _interpret(self.ast, x, x0, t)

    def __call__(self, x, x0, t: float) -> float:
        try:
            return float(self._fn(x, x0, t))
        except ZeroDivisionError as exc:
            raise EvalError(f"division by zero evaluating {self.source!r}") from exc
        except ValueError as exc:
            raise EvalError(f"domain fault evaluating {self.source!r}: {exc}") from exc
        except OverflowError as exc:
            raise EvalError(f"overflow evaluating {self.source!r}") from exc


def parse_dynamics(source: str, order: int) -> DynamicsExpr:
    """Parse an expression and validate every variable index against the order."""
    ast = _Parser(source, order).parse()
    return DynamicsExpr(source=source, ast=ast, order=order)


_ZEROS_CACHE: dict[int, np.ndarray] = {}


def eval_dynamics(expr: DynamicsExpr, x, t: float, x0=None) -> float:
    """Numeric value of f(x, t); leader references resolve against x0."""
    x = np.asarray(x, dtype=float)
    if x.size != expr.order:
        raise DimensionMismatch(f"state length {x.size} != order {expr.order}")
    if x0 is None:
        x0 = _ZEROS_CACHE.setdefault(expr.order, np.zeros(expr.order))
    return expr(x, x0, t)


# --- disturbances ----------------------------------------------------------

DISTURBANCE_KINDS = ("cos_t", "sin_t", "exp_neg_t", "sin_cos_t", "none")


@dataclass(frozen=True)
class DisturbanceModel:
    """One bounded disturbance channel: amplitude times a unit-bounded basis."""

    kind: str
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}; choices: {DISTURBANCE_KINDS}")


def disturbance(model: DisturbanceModel, t: float) -> float:
    """Disturbance value at time t; deterministic given the drawn amplitude."""
    g = model.amplitude
    kind = model.kind
    if kind == "none":
        return 0.0
    if kind == "cos_t":
        return g * math.cos(t)
    if kind == "sin_t":
        return g * math.sin(t)
    if kind == "exp_neg_t":
        return g * math.exp(-t)
    return g * math.sin(t) * math.cos(t)


@dataclass(frozen=True, eq=False)
class FollowerModel:
    """Declarative follower: one nonlinearity on the top derivative, initial state, disturbance."""

    f: DynamicsExpr | None
    init: np.ndarray
    disturbance_kind: str = "none"


@dataclass(frozen=True, eq=False)
class LeaderModel:
    """Leader chain of integrators; f0 references only the leader state and t."""

    order: int
    f0: DynamicsExpr
    init: np.ndarray


def integrator_chain_rhs(x_row: np.ndarray, top_derivative: float) -> np.ndarray:
    """Chain-of-integrators derivative: shift states up, nonlinearity enters only the top slot."""
    out = np.empty_like(x_row)
    out[:-1] = x_row[1:]
    out[-1] = top_derivative
    return out
