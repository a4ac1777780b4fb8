"""Drift fields b(x) for 2D SDEs: built-in benchmarks and expression-defined fields.

Built-ins (by name):

* ``linear`` -- b = (-2*x1 - a*x2, 2*a*x1 - x2), parameter ``a`` (default 10).
  Stable equilibrium at the origin; its quasi-potential is 2*x1^2 + x2^2
  for every a.
* ``limit_cycle`` -- b = (x2 + x1*(1 - r^2), -x1 + x2*(1 - r^2)) with
  r^2 = x1^2 + x2^2.  The unit circle is an attracting limit cycle; the
  quasi-potential is (r^2 - 1)^2 / 2.

Expression fields are parsed from two strings over the variables x1, x2
with operators ``+ - * / ^`` (``^`` right-associative, unary minus binds
between ``*`` and ``^``), functions sin, cos, exp, sqrt, abs, and numeric
literals.  Parse errors and evaluation domain errors report a byte offset
into the source string.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels as _k


class FieldParseError(ValueError):
    """Syntax/semantic error in a field expression; carries a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class FieldEvalError(ValueError):
    """Domain error while evaluating a field expression (e.g. sqrt(-1))."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


# ---------------------------------------------------------------------------
# Expression AST


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = dc_field(default=-1, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = dc_field(default=-1, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "FieldExpr"
    offset: int = dc_field(default=-1, compare=False)


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    lhs: "FieldExpr"
    rhs: "FieldExpr"
    offset: int = dc_field(default=-1, compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "FieldExpr"
    offset: int = dc_field(default=-1, compare=False)


FieldExpr = Num | Var | Neg | Bin | Call

FUNCTIONS = {"sin", "cos", "exp", "sqrt", "abs"}
VARIABLES = {"x1", "x2"}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            # skip to the first non-space offending character
            bad = pos
            while bad < len(text) and text[bad].isspace():
                bad += 1
            raise FieldParseError(f"unexpected character {text[bad]!r}", bad)
        if m.group("num") is not None:
            toks.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            toks.append(("ident", m.group("ident"), m.start("ident")))
        else:
            toks.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    """Precedence-climbing parser for the grammar in the module docstring."""

    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def advance(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> FieldExpr:
        node = self.parse_add()
        kind, val, off = self.peek()
        if kind != "end":
            raise FieldParseError(f"unexpected token {val!r}", off)
        return node

    def parse_add(self) -> FieldExpr:
        node = self.parse_mul()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = Bin(val, node, self.parse_mul(), off)
            else:
                return node

    def parse_mul(self) -> FieldExpr:
        node = self.parse_unary()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = Bin(val, node, self.parse_unary(), off)
            else:
                return node

    def parse_unary(self) -> FieldExpr:
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.parse_unary(), off)
        return self.parse_power()

    def parse_power(self) -> FieldExpr:
        base = self.parse_atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            # right-associative; exponent admits unary minus: x^-2
            return Bin("^", base, self.parse_unary(), off)
        return base

    def parse_atom(self) -> FieldExpr:
        kind, val, off = self.advance()
        if kind == "num":
            return Num(float(val), off)
        if kind == "ident":
            k2, v2, _ = self.peek()
            if k2 == "op" and v2 == "(":
                if val not in FUNCTIONS:
                    raise FieldParseError(f"unknown function {val!r}", off)
                self.advance()
                args = [self.parse_add()]
                while True:
                    k3, v3, off3 = self.advance()
                    if k3 == "op" and v3 == ",":
                        args.append(self.parse_add())
                    elif k3 == "op" and v3 == ")":
                        break
                    else:
                        raise FieldParseError("expected ',' or ')'", off3)
                if len(args) != 1:
                    raise FieldParseError(
                        f"function {val!r} takes 1 argument, got {len(args)}",
                        off)
                return Call(val, args[0], off)
            if val in VARIABLES:
                return Var(val, off)
            raise FieldParseError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            node = self.parse_add()
            k2, v2, off2 = self.advance()
            if not (k2 == "op" and v2 == ")"):
                raise FieldParseError("expected ')'", off2)
            return node
        what = repr(val) if val else "end of input"
        raise FieldParseError(f"expected operand, found {what}", off)


def parse_expr(text: str) -> FieldExpr:
    """Parse a single expression over x1, x2 into an AST."""
    return _Parser(text).parse()


_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREC_NEG = 25  # unary minus binds between * and ^
_PREC_ATOM = 100


def _prec(node: FieldExpr) -> int:
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def expr_to_str(node: FieldExpr) -> str:
    """Render an AST back to source; parse(expr_to_str(t)) == t structurally."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({expr_to_str(node.arg)})"
    if isinstance(node, Neg):
        inner = expr_to_str(node.operand)
        # parenthesize anything binding looser than unary minus, and nested
        # negations (avoid the confusing "--x")
        if _prec(node.operand) < _PREC_NEG or isinstance(node.operand, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    lhs, rhs = expr_to_str(node.lhs), expr_to_str(node.rhs)
    p = _PREC[node.op]
    if node.op == "^":
        # base is atom-level, exponent is unary-level
        if _prec(node.lhs) < _PREC_ATOM:
            lhs = f"({lhs})"
        if _prec(node.rhs) < _PREC_NEG:
            rhs = f"({rhs})"
    else:
        if _prec(node.lhs) < p:
            lhs = f"({lhs})"
        # left-associative: equal-precedence right operand needs parens
        if _prec(node.rhs) <= p:
            rhs = f"({rhs})"
    return f"{lhs}{node.op}{rhs}"


def eval_expr(node: FieldExpr, x1: float, x2: float) -> float:
    """Evaluate an AST at (x1, x2); domain errors carry the source offset."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x1 if node.name == "x1" else x2
    if isinstance(node, Neg):
        return -eval_expr(node.operand, x1, x2)
    if isinstance(node, Call):
        a = eval_expr(node.arg, x1, x2)
        try:
            if node.fn == "sin":
                return math.sin(a)
            if node.fn == "cos":
                return math.cos(a)
            if node.fn == "exp":
                return math.exp(a)
            if node.fn == "sqrt":
                return math.sqrt(a)
            return abs(a)
        except (ValueError, OverflowError) as exc:
            raise FieldEvalError(f"{node.fn}: {exc}", node.offset) from None
    a = eval_expr(node.lhs, x1, x2)
    b = eval_expr(node.rhs, x1, x2)
    try:
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return math.pow(a, b)
    except ZeroDivisionError:
        raise FieldEvalError("division by zero", node.offset) from None
    except (ValueError, OverflowError) as exc:
        raise FieldEvalError(f"'^': {exc}", node.offset) from None


def compile_expr(node: FieldExpr) -> tuple[np.ndarray, np.ndarray]:
    """Lower an AST to (code, consts) for the stack VM in ``_kernels``."""
    code: list[tuple[int, int]] = []
    consts: list[float] = []
    depth = 0
    max_depth = 0

    def emit(op, arg=0, pop=0, push=1):
        nonlocal depth, max_depth
        code.append((op, arg))
        depth += push - pop
        max_depth = max(max_depth, depth)

    def walk(n):
        if isinstance(n, Num):
            consts.append(n.value)
            emit(_k.OP_CONST, len(consts) - 1)
        elif isinstance(n, Var):
            emit(_k.OP_X1 if n.name == "x1" else _k.OP_X2)
        elif isinstance(n, Neg):
            walk(n.operand)
            emit(_k.OP_NEG, pop=1)
        elif isinstance(n, Call):
            walk(n.arg)
            emit({"sin": _k.OP_SIN, "cos": _k.OP_COS, "exp": _k.OP_EXP,
                  "sqrt": _k.OP_SQRT, "abs": _k.OP_ABS}[n.fn], pop=1)
        else:
            walk(n.lhs)
            walk(n.rhs)
            emit({"+": _k.OP_ADD, "-": _k.OP_SUB, "*": _k.OP_MUL,
                  "/": _k.OP_DIV, "^": _k.OP_POW}[n.op], pop=2)

    walk(node)
    if max_depth > _k.VM_STACK_SIZE:
        raise FieldParseError("expression too deeply nested", 0)
    return (np.array(code, dtype=np.int64).reshape(-1, 2),
            np.array(consts, dtype=np.float64))


# ---------------------------------------------------------------------------
# Vector fields

_EMPTY_CODE = np.zeros((0, 2), dtype=np.int64)
_EMPTY_CONSTS = np.zeros(0, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Evaluator for a 2D drift field b(x), immutable and thread-safe.

    ``kind``/``params``/``code*``/``consts*`` form the lowered representation
    consumed by the numba kernels; expression fields additionally keep their
    ASTs for error-located evaluation and printing.
    """

    name: str
    kind: int
    params: np.ndarray
    expr1: FieldExpr | None = None
    expr2: FieldExpr | None = None
    code1: np.ndarray = dc_field(default_factory=lambda: _EMPTY_CODE)
    consts1: np.ndarray = dc_field(default_factory=lambda: _EMPTY_CONSTS)
    code2: np.ndarray = dc_field(default_factory=lambda: _EMPTY_CODE)
    consts2: np.ndarray = dc_field(default_factory=lambda: _EMPTY_CONSTS)

    def b(self, x) -> np.ndarray:
        return eval_b(self, x)

    def lowered(self):
        """Argument tuple for the numba kernels."""
        return (self.kind, self.params, self.code1, self.consts1,
                self.code2, self.consts2)


def make_linear(a: float = 10.0) -> VectorField:
    return VectorField("linear", _k.FIELD_LINEAR,
                       np.array([float(a)], dtype=np.float64))


def make_limit_cycle() -> VectorField:
    return VectorField("limit_cycle", _k.FIELD_LIMIT_CYCLE,
                       np.zeros(1, dtype=np.float64))


BUILTIN_FIELDS = {"linear": make_linear, "limit_cycle": make_limit_cycle}


def builtin_field(name: str, **params) -> VectorField:
    if name not in BUILTIN_FIELDS:
        raise ValueError(f"unknown built-in field {name!r}; "
                         f"available: {sorted(BUILTIN_FIELDS)}")
    return BUILTIN_FIELDS[name](**params)


def parse_field(expr1: str, expr2: str) -> VectorField:
    """Vector field whose components evaluate expr1, expr2 over x1, x2."""
    t1, t2 = parse_expr(expr1), parse_expr(expr2)
    code1, consts1 = compile_expr(t1)
    code2, consts2 = compile_expr(t2)
    return VectorField(f"[{expr1}; {expr2}]", _k.FIELD_EXPR,
                       np.zeros(1, dtype=np.float64),
                       expr1=t1, expr2=t2,
                       code1=code1, consts1=consts1,
                       code2=code2, consts2=consts2)


def eval_b(vf: VectorField, x) -> np.ndarray:
    """b(x) as a length-2 array."""
    x1, x2 = float(x[0]), float(x[1])
    if vf.kind == _k.FIELD_LINEAR:
        a = vf.params[0]
        return np.array([-2.0 * x1 - a * x2, 2.0 * a * x1 - x2])
    if vf.kind == _k.FIELD_LIMIT_CYCLE:
        w = 1.0 - (x1 * x1 + x2 * x2)
        return np.array([x2 + x1 * w, -x1 + x2 * w])
    return np.array([eval_expr(vf.expr1, x1, x2),
                     eval_expr(vf.expr2, x1, x2)])


def eval_b_many(vf: VectorField, pts: np.ndarray) -> np.ndarray:
    """Vectorized b over an (n, 2) array of points."""
    pts = np.asarray(pts, dtype=np.float64)
    x1, x2 = pts[:, 0], pts[:, 1]
    if vf.kind == _k.FIELD_LINEAR:
        a = vf.params[0]
        return np.stack([-2.0 * x1 - a * x2, 2.0 * a * x1 - x2], axis=1)
    if vf.kind == _k.FIELD_LIMIT_CYCLE:
        w = 1.0 - (x1 * x1 + x2 * x2)
        return np.stack([x2 + x1 * w, -x1 + x2 * w], axis=1)
    out = np.empty_like(pts)
    for i in range(pts.shape[0]):
        out[i, 0] = eval_expr(vf.expr1, x1[i], x2[i])
        out[i, 1] = eval_expr(vf.expr2, x1[i], x2[i])
    return out


# cube-root-of-eps step balances truncation vs round-off for central differences
_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def jacobian(vf: VectorField, x) -> np.ndarray:
    """2x2 Jacobian of b at x; rows are components of b, columns d/dx1, d/dx2.

    Analytic for the built-ins, central finite differences otherwise with
    step eps^(1/3) * max(1, ||x||) per direction.
    """
    x1, x2 = float(x[0]), float(x[1])
    if vf.kind == _k.FIELD_LINEAR:
        a = vf.params[0]
        return np.array([[-2.0, -a], [2.0 * a, -1.0]])
    if vf.kind == _k.FIELD_LIMIT_CYCLE:
        r2 = x1 * x1 + x2 * x2
        return np.array([
            [1.0 - r2 - 2.0 * x1 * x1, 1.0 - 2.0 * x1 * x2],
            [-1.0 - 2.0 * x1 * x2, 1.0 - r2 - 2.0 * x2 * x2],
        ])
    h = _FD_STEP * max(1.0, math.hypot(x1, x2))
    j = np.empty((2, 2))
    for col, (d1, d2) in enumerate(((h, 0.0), (0.0, h))):
        bp = eval_b(vf, (x1 + d1, x2 + d2))
        bm = eval_b(vf, (x1 - d1, x2 - d2))
        j[:, col] = (bp - bm) / (2.0 * h)
    return j


# ---------------------------------------------------------------------------
# Exact quasi-potentials of the built-in benchmarks (for error reporting)


def exact_linear(x1, x2):
    return 2.0 * np.asarray(x1) ** 2 + np.asarray(x2) ** 2


def exact_limit_cycle(x1, x2):
    r2 = np.asarray(x1) ** 2 + np.asarray(x2) ** 2
    return 0.5 * (r2 - 1.0) ** 2


EXACT_SOLUTIONS = {"linear": exact_linear, "limit_cycle": exact_limit_cycle}
