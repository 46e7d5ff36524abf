"""Expression grammar.

Identifiers ``u[i]``, ``u[i,s]``, ``theta[i]``, ``theta[i,s]``, ``zeta``,
``eps`` and (in operator context) ``D``; integer literals and rationals
``p/q``; binary ``+ - * /`` and ``^`` with integer exponents; parentheses;
``Dx(...)`` for the extended total derivative.  Parsing is done with
Python's :mod:`ast` module on a whitelisted subset of nodes.
"""

from __future__ import annotations

import ast
from fractions import Fraction

from .algebra import EXTENDED, DiffOp, DiffPoly, JetSpace, total_derivative
from .errors import ParseError

__all__ = ["parse_expression", "parse_operator_expression"]


def _translate(text: str) -> tuple[str, list[int]]:
    """Replace ``^`` by ``**`` and return a column map new -> original."""
    out = []
    cols = []
    for idx, ch in enumerate(text):
        if ch == "^":
            out.append("**")
            cols.extend([idx, idx])
        else:
            out.append(ch)
            cols.append(idx)
    cols.append(len(text))
    return "".join(out), cols


class _Evaluator:
    def __init__(self, space: JetSpace, allow_operator: bool, colmap: list[int], line: int,
                 source: str | None):
        self.space = space
        self.allow_operator = allow_operator
        self.colmap = colmap
        self.line = line
        self.source = source

    def error(self, node, message: str) -> ParseError:
        col = getattr(node, "col_offset", None)
        if col is not None:
            col = self.colmap[min(col, len(self.colmap) - 1)] + 1
        return ParseError(message, self.line, col, self.source)

    def _int_value(self, node) -> int:
        if isinstance(node, ast.Constant) and isinstance(node.value, int) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = self._int_value(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise self.error(node, "expected an integer")

    def _indices(self, node) -> tuple[int, ...]:
        sl = node.slice
        if isinstance(sl, ast.Tuple):
            return tuple(self._int_value(e) for e in sl.elts)
        return (self._int_value(sl),)

    def eval(self, node):
        sp = self.space
        if isinstance(node, ast.Expression):
            return self.eval(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, int):
                raise self.error(node, "only integer literals are allowed")
            return Fraction(node.value)
        if isinstance(node, ast.Name):
            if node.id == "zeta":
                return sp.zeta()
            if node.id == "eps":
                return sp.eps()
            if node.id == "D":
                if not self.allow_operator:
                    raise self.error(node, "D is only allowed in operator entries")
                return DiffOp.dx(sp)
            raise self.error(node, f"unknown identifier {node.id!r}")
        if isinstance(node, ast.Subscript):
            if not isinstance(node.value, ast.Name) or node.value.id not in ("u", "theta"):
                raise self.error(node, "only u[...] and theta[...] may be indexed")
            idx = self._indices(node)
            if len(idx) not in (1, 2):
                raise self.error(node, "expected one or two indices")
            i = idx[0]
            s = idx[1] if len(idx) == 2 else 0
            if not 1 <= i <= sp.n:
                raise self.error(node, f"field index {i} outside 1..{sp.n}")
            if s < 0:
                raise self.error(node, "jet order must be non-negative")
            return sp.u(i, s) if node.value.id == "u" else sp.theta(i, s)
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id == "Dx") \
                    or len(node.args) != 1 or node.keywords:
                raise self.error(node, "only Dx(expr) calls are supported")
            arg = self.as_poly(node.args[0], self.eval(node.args[0]))
            return total_derivative(arg, EXTENDED)
        if isinstance(node, ast.UnaryOp):
            v = self.eval(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return v
            raise self.error(node, "unsupported unary operator")
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = self.eval(node.left)
                e = self._int_value(node.right)
                return self.power(node, base, e)
            left = self.eval(node.left)
            right = self.eval(node.right)
            if isinstance(node.op, ast.Add):
                return self.add(node, left, right)
            if isinstance(node.op, ast.Sub):
                return self.add(node, left, -right)
            if isinstance(node.op, ast.Mult):
                return self.mul(node, left, right)
            if isinstance(node.op, ast.Div):
                return self.div(node, left, right)
            raise self.error(node, "unsupported binary operator")
        raise self.error(node, f"unsupported syntax ({type(node).__name__})")

    # -- helpers ------------------------------------------------------------
    def as_poly(self, node, v) -> DiffPoly:
        if isinstance(v, Fraction):
            return self.space.const(v)
        if isinstance(v, DiffPoly):
            return v
        raise self.error(node, "expected an expression without D")

    def add(self, node, a, b):
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return a + b
        if isinstance(a, DiffOp) or isinstance(b, DiffOp):
            return self.as_op(a) + self.as_op(b)
        return self.as_poly(node, a) + self.as_poly(node, b)

    def as_op(self, v) -> DiffOp:
        if isinstance(v, DiffOp):
            return v
        if isinstance(v, Fraction):
            return DiffOp.mult(self.space.const(v))
        return DiffOp.mult(v)

    def mul(self, node, a, b):
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return a * b
        if isinstance(a, DiffOp) or isinstance(b, DiffOp):
            if isinstance(a, DiffOp):
                return a.compose(self.as_op(b))
            return self.as_op(b).left_mul(self.as_poly(node, a))
        return self.as_poly(node, a) * self.as_poly(node, b)

    def div(self, node, a, b):
        if isinstance(b, DiffOp):
            raise self.error(node, "cannot divide by an operator")
        if isinstance(b, Fraction):
            if b == 0:
                raise self.error(node, "division by zero")
            if isinstance(a, DiffOp):
                return a.left_mul(self.space.const(1 / b))
            return a / b
        c = b.as_coefficient()
        if c is None:
            raise self.error(node, "division is only allowed by functions of u[i]")
        if c.is_zero():
            raise self.error(node, "division by zero")
        if isinstance(a, Fraction):
            return self.space.coefficient(c.inverse()).scale(a)
        if isinstance(a, DiffOp):
            return a.left_mul(self.space.coefficient(c.inverse()))
        return a.scale(c.inverse())

    def power(self, node, base, e: int):
        if isinstance(base, Fraction):
            if e < 0 and base == 0:
                raise self.error(node, "division by zero")
            return base ** e
        if isinstance(base, DiffOp):
            if e < 0:
                raise self.error(node, "negative powers of D are not allowed")
            return base ** e
        if e < 0:
            c = base.as_coefficient()
            if c is not None:
                if c.is_zero():
                    raise self.error(node, "division by zero")
                return self.space.coefficient(c.inverse() ** (-e))
            if len(base.terms) == 1:
                (key, c), = base.terms.items()
                if c.is_one() and key[0] == 0 and not key[2] and not key[3] \
                        and len(key[1]) == 1:
                    i, s, p = key[1][0]
                    return self.space.monomial(1, (0, ((i, s, p * e),), (), 0))
            raise self.error(node, "negative powers are only allowed for functions and single jets")
        return base ** e


def _parse(text: str, space: JetSpace, allow_operator: bool, line: int, source: str | None):
    stripped = text.lstrip()
    offset = len(text) - len(stripped)
    translated, colmap = _translate(stripped)
    colmap = [c + offset for c in colmap]
    try:
        tree = ast.parse(translated, mode="eval")
    except SyntaxError as exc:
        col = exc.offset
        if col is not None:
            col = colmap[min(max(col - 1, 0), len(colmap) - 1)] + 1
        raise ParseError(f"syntax error: {exc.msg}", line, col, source) from None
    ev = _Evaluator(space, allow_operator, colmap, line, source)
    return ev.eval(tree)


def parse_expression(text: str, space: JetSpace, line: int = 1,
                     source: str | None = None) -> DiffPoly:
    """Parse a differential polynomial."""
    if not text.strip():
        raise ParseError("empty expression", line, 1, source)
    v = _parse(text, space, False, line, source)
    if isinstance(v, Fraction):
        return space.const(v)
    return v


def parse_operator_expression(text: str, space: JetSpace, line: int = 1,
                              source: str | None = None) -> DiffOp:
    """Parse a scalar differential operator; ``D`` composes on the right."""
    if not text.strip():
        raise ParseError("empty expression", line, 1, source)
    v = _parse(text, space, True, line, source)
    if isinstance(v, DiffOp):
        return v
    if isinstance(v, Fraction):
        return DiffOp.mult(space.const(v))
    return DiffOp.mult(v)
