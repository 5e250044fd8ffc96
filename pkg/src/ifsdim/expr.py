"""Small expression language used to define map components and Jacobian entries.

Expressions are scalar functions of variables ``x1 .. xd``.  Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' number)*
    atom   := number | 'x'<int> | func '(' expr ')' | '(' expr ')'

with functions ``sin, cos, exp, log, sqrt, neg`` and power restricted to a
literal constant exponent.  ASTs are immutable; evaluation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

FUNCTION_NAMES = ("sin", "cos", "exp", "log", "sqrt", "neg")

_BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


class ExprError(ValueError):
    """Parse failure with the offending position in the source text."""

    def __init__(self, message: str, position: int, expected: str | None = None):
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class DomainError(ArithmeticError):
    """Evaluation hit a point outside an operation's domain."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str  # neg, sin, cos, exp, log, sqrt
    child: "ExprNode"


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div, pow (pow right child is always Const)
    left: "ExprNode"
    right: "ExprNode"


ExprNode = Union[Const, Var, Unary, Binary]


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

def _tokenize(source: str) -> list[tuple[str, object, int]]:
    tokens: list[tuple[str, object, int]] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ExprError(f"malformed number '{text}'", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ExprError(f"unexpected character '{ch}'", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, tokens, dim: int):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, expected: str):
        tok = self.advance()
        if tok[0] != kind:
            raise ExprError(f"unexpected token '{tok[1]}'", tok[2], expected)
        return tok

    def parse_expression(self) -> ExprNode:
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = Binary("add" if op == "+" else "sub", node, self.parse_term())
        return node

    def parse_term(self) -> ExprNode:
        node = self.parse_factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = Binary("mul" if op == "*" else "div", node, self.parse_factor())
        return node

    def parse_factor(self) -> ExprNode:
        if self.peek()[0] == "-":
            self.advance()
            return Unary("neg", self.parse_factor())
        node = self.parse_atom()
        while self.peek()[0] == "^":
            self.advance()
            sign = 1.0
            if self.peek()[0] == "-":
                self.advance()
                sign = -1.0
            tok = self.expect("num", "a constant exponent")
            node = Binary("pow", node, Const(sign * tok[1]))
        return node

    def parse_atom(self) -> ExprNode:
        kind, value, pos = self.advance()
        if kind == "num":
            return Const(value)
        if kind == "(":
            node = self.parse_expression()
            self.expect(")", "')'")
            return node
        if kind == "name":
            name = value
            if name.startswith("x") and name[1:].isdigit():
                index = int(name[1:])
                if not 1 <= index <= self.dim:
                    raise ExprError(
                        f"variable index out of range: {name} with dimension {self.dim}",
                        pos,
                    )
                return Var(index)
            if name in FUNCTION_NAMES:
                self.expect("(", "'('")
                child = self.parse_expression()
                self.expect(")", "')'")
                return Unary(name, child)
            raise ExprError(f"unknown function name '{name}'", pos)
        raise ExprError(f"unexpected token '{value}'", pos, "a number, variable or '('")


def parse_expr(source: str, dim: int) -> ExprNode:
    """Parse ``source`` into an AST over variables ``x1 .. x<dim>``."""
    if not isinstance(source, str) or not source.strip():
        raise ExprError("empty expression", 0)
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    parser = _Parser(_tokenize(source), dim)
    node = parser.parse_expression()
    tok = parser.peek()
    if tok[0] != "end":
        raise ExprError(f"trailing input '{tok[1]}'", tok[2], "end of expression")
    return node


# ---------------------------------------------------------------------------
# Rendering and source generation
# ---------------------------------------------------------------------------

def render(e: ExprNode) -> str:
    """Text form that re-parses to the same AST (negative literals become neg)."""
    if isinstance(e, Const):
        if e.value < 0:
            return f"neg({float(-e.value)!r})"
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Unary):
        return f"{e.op}({render(e.child)})"
    if e.op == "pow":
        return f"({render(e.left)}^{float(e.right.value)!r})"
    return f"({render(e.left)} {_BINARY_SYMBOL[e.op]} {render(e.right)})"


def _source(e: ExprNode) -> str:
    # Python source for compile_expr; mirrors the AST operation order exactly
    # so the compiled path rounds identically to eval_expr.
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_source(e.child)})"
        return f"{e.op}({_source(e.child)})"
    if e.op == "pow":
        return f"({_source(e.left)} ** {repr(float(e.right.value))})"
    return f"({_source(e.left)} {_BINARY_SYMBOL[e.op]} {_source(e.right)})"


_NUMPY_ENV = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}
_MATH_ENV = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log, "sqrt": math.sqrt}


def compile_expr(e: ExprNode, dim: int, backend: str = "numpy") -> Callable:
    """Compile an AST to a callable.

    backend "numpy": f(X) with X of shape (..., dim), vectorized.
    backend "math":  f(x1, .., xd) on plain floats, for tight scalar loops.
    """
    src = _source(e)
    if backend == "numpy":
        unpack = "".join(f"    x{i + 1} = X[..., {i}]\n" for i in range(dim))
        code = f"def _f(X):\n{unpack}    return {src}\n"
        env = dict(_NUMPY_ENV)
    elif backend == "math":
        args = ", ".join(f"x{i + 1}" for i in range(dim))
        code = f"def _f({args}):\n    return {src}\n"
        env = dict(_MATH_ENV)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    exec(compile(code, "<expr>", "exec"), env)
    return env["_f"]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_expr(e: ExprNode, point) -> float | np.ndarray:
    """Evaluate at a point (length-d sequence) or batch of points (N, d).

    Raises DomainError naming the offending subexpression for log/sqrt of a
    negative argument, non-positive log, or division by zero.
    """
    x = np.asarray(point, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    return _eval(e, x)


def _eval(e: ExprNode, x: np.ndarray):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.index > x.shape[-1]:
            raise DomainError("point has too few coordinates", render(e))
        return x[..., e.index - 1]
    if isinstance(e, Unary):
        v = _eval(e.child, x)
        if e.op == "neg":
            return -v
        if e.op == "sin":
            return np.sin(v)
        if e.op == "cos":
            return np.cos(v)
        if e.op == "exp":
            return np.exp(v)
        if e.op == "log":
            if np.any(np.asarray(v) <= 0):
                raise DomainError("log of non-positive value", render(e))
            return np.log(v)
        if e.op == "sqrt":
            if np.any(np.asarray(v) < 0):
                raise DomainError("sqrt of negative value", render(e))
            return np.sqrt(v)
        raise ValueError(f"unknown unary op {e.op!r}")
    left = _eval(e.left, x)
    if e.op == "pow":
        c = e.right.value
        if c != int(c) and np.any(np.asarray(left) < 0):
            raise DomainError("non-integer power of negative base", render(e))
        if c < 0 and np.any(np.asarray(left) == 0):
            raise DomainError("negative power of zero", render(e))
        return left ** c
    right = _eval(e.right, x)
    if e.op == "add":
        return left + right
    if e.op == "sub":
        return left - right
    if e.op == "mul":
        return left * right
    if e.op == "div":
        if np.any(np.asarray(right) == 0):
            raise DomainError("division by zero", render(e))
        return left / right
    raise ValueError(f"unknown binary op {e.op!r}")


# ---------------------------------------------------------------------------
# Differentiation and structural helpers
# ---------------------------------------------------------------------------

def _is_const(e: ExprNode, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def fold_unary(op: str, child: ExprNode) -> ExprNode:
    if isinstance(child, Const):
        try:
            return Const(float(_eval(Unary(op, child), np.zeros(1))))
        except (DomainError, OverflowError):
            pass
    return Unary(op, child)


def fold_binary(op: str, left: ExprNode, right: ExprNode) -> ExprNode:
    """Construct a binary node with algebraic shortcuts (0 and 1 identities,
    constant folding).  Used when building derivatives so affine inputs keep
    constant Jacobians; may drop a domain error hidden under a zero factor."""
    if op == "add":
        if _is_const(left, 0.0):
            return right
        if _is_const(right, 0.0):
            return left
    elif op == "sub":
        if _is_const(right, 0.0):
            return left
        if _is_const(left, 0.0):
            return fold_unary("neg", right)
    elif op == "mul":
        if _is_const(left, 0.0) or _is_const(right, 0.0):
            return Const(0.0)
        if _is_const(left, 1.0):
            return right
        if _is_const(right, 1.0):
            return left
    elif op == "div":
        if _is_const(left, 0.0) and not _is_const(right, 0.0):
            return Const(0.0)
        if _is_const(right, 1.0):
            return left
    elif op == "pow":
        if _is_const(right, 1.0):
            return left
        if _is_const(right, 0.0):
            return Const(1.0)
    if isinstance(left, Const) and isinstance(right, Const):
        try:
            return Const(float(_eval(Binary(op, left, right), np.zeros(1))))
        except (DomainError, OverflowError):
            pass
    return Binary(op, left, right)


def differentiate(e: ExprNode, var: int) -> ExprNode:
    """Symbolic partial derivative with respect to x<var>.  The result is not
    normalized beyond light constant folding and must simply evaluate to the
    true derivative wherever both expressions are defined."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.index == var else 0.0)
    if isinstance(e, Unary):
        u, du = e.child, differentiate(e.child, var)
        if e.op == "neg":
            return fold_unary("neg", du)
        if e.op == "sin":
            return fold_binary("mul", fold_unary("cos", u), du)
        if e.op == "cos":
            return fold_unary("neg", fold_binary("mul", fold_unary("sin", u), du))
        if e.op == "exp":
            return fold_binary("mul", fold_unary("exp", u), du)
        if e.op == "log":
            return fold_binary("div", du, u)
        if e.op == "sqrt":
            return fold_binary("div", du, fold_binary("mul", Const(2.0), fold_unary("sqrt", u)))
        raise ValueError(f"unknown unary op {e.op!r}")
    dl = differentiate(e.left, var)
    if e.op == "pow":
        c = e.right.value
        scaled = fold_binary("mul", Const(c), fold_binary("pow", e.left, Const(c - 1.0)))
        return fold_binary("mul", scaled, dl)
    dr = differentiate(e.right, var)
    if e.op == "add":
        return fold_binary("add", dl, dr)
    if e.op == "sub":
        return fold_binary("sub", dl, dr)
    if e.op == "mul":
        return fold_binary(
            "add", fold_binary("mul", dl, e.right), fold_binary("mul", e.left, dr)
        )
    if e.op == "div":
        num = fold_binary(
            "sub", fold_binary("mul", dl, e.right), fold_binary("mul", e.left, dr)
        )
        return fold_binary("div", num, fold_binary("mul", e.right, e.right))
    raise ValueError(f"unknown binary op {e.op!r}")


def is_constant(e: ExprNode) -> bool:
    """True when the expression contains no variables."""
    if isinstance(e, Const):
        return True
    if isinstance(e, Var):
        return False
    if isinstance(e, Unary):
        return is_constant(e.child)
    return is_constant(e.left) and is_constant(e.right)


def constant_value(e: ExprNode) -> float:
    if not is_constant(e):
        raise ValueError("expression is not constant")
    return float(eval_expr(e, np.zeros(1)))


def is_zero(e: ExprNode) -> bool:
    """True when the expression is identically zero by structural propagation
    (zero factors, zero-preserving functions); used for symbolic
    triangularity and block-structure checks."""
    if isinstance(e, Const):
        return e.value == 0.0
    if isinstance(e, Var):
        return False
    if isinstance(e, Unary):
        if e.op in ("neg", "sin", "sqrt"):
            return is_zero(e.child)
        return False
    if e.op == "mul":
        return is_zero(e.left) or is_zero(e.right)
    if e.op == "div":
        return is_zero(e.left) and not is_zero(e.right)
    if e.op in ("add", "sub"):
        return is_zero(e.left) and is_zero(e.right)
    if e.op == "pow":
        return is_zero(e.left) and e.right.value > 0
    return False


def shift_vars(e: ExprNode, offset: int) -> ExprNode:
    """Shift every variable index by ``offset`` (for embedding into products)."""
    return remap_vars(e, lambda i: i + offset)


def remap_vars(e: ExprNode, mapping: Callable[[int], int]) -> ExprNode:
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return Var(mapping(e.index))
    if isinstance(e, Unary):
        return Unary(e.op, remap_vars(e.child, mapping))
    return Binary(e.op, remap_vars(e.left, mapping), remap_vars(e.right, mapping))


def max_var_index(e: ExprNode) -> int:
    if isinstance(e, Const):
        return 0
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Unary):
        return max_var_index(e.child)
    return max(max_var_index(e.left), max_var_index(e.right))


def used_vars(e: ExprNode) -> set[int]:
    if isinstance(e, Const):
        return set()
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Unary):
        return used_vars(e.child)
    return used_vars(e.left) | used_vars(e.right)
