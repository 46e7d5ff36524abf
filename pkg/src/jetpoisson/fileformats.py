"""Text formats for operator, pencil, substitution and metric files.

Operator files::

    # comment
    N = 1
    E_max = 6
    graded = true
    P[1][1] = u[1]*D + 1/2*u[1,1] + 1/8*eps^2*D^3
    V[1] = -1/2*u[1,1]          (optional tail)
    Phi[1] = ...                (optional non-canonical flank)

A pencil file holds two operators with the labels ``P1``/``V1`` and
``P2``/``V2``.  Substitution files hold ``B = ...``, ``Q[i] = ...`` and an
optional ``projective = [[...], ...]`` block.  Metric files (for the
closed-form reciprocal oracle) hold ``g[i][j]``, ``Gamma[i][j][k]`` and
``B``.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from fractions import Fraction

from .algebra import DiffOp, JetSpace
from .errors import ParseError
from .operators import LocalOperator, WNLOperator
from .parsing import parse_expression, parse_operator_expression
from .printing import format_diffop, format_diffpoly

__all__ = ["OperatorFile", "read_operator_file", "parse_operator_text", "format_operator",
           "format_operator_file", "default_eps_order", "parse_header_value"]

ENV_EPS_ORDER = "JETPOISSON_EPS_ORDER"

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)((?:\[\s*-?\d+\s*\])*)\s*=\s*(.*?)\s*$")
_INDEX = re.compile(r"\[\s*(-?\d+)\s*\]")


def default_eps_order() -> int:
    value = os.environ.get(ENV_EPS_ORDER)
    if value is None or not value.strip():
        return 6
    try:
        k = int(value)
    except ValueError:
        raise ParseError(f"{ENV_EPS_ORDER} must be a non-negative integer") from None
    if k < 0:
        raise ParseError(f"{ENV_EPS_ORDER} must be a non-negative integer")
    return k


@dataclass
class _Entry:
    name: str
    indices: tuple[int, ...]
    text: str
    line: int
    column: int


def split_lines(text: str, source: str | None) -> tuple[dict, list[_Entry]]:
    """Split a file into header assignments and indexed/unindexed entries."""
    header: dict[str, tuple[str, int]] = {}
    entries: list[_Entry] = []
    lines = text.splitlines()
    idx = 0
    while idx < len(lines):
        raw = lines[idx]
        lineno = idx + 1
        idx += 1
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        m = _LINE.match(body)
        if not m:
            raise ParseError("expected 'name = value'", lineno, 1, source)
        name, idxs, value = m.group(1), m.group(2), m.group(3)
        column = m.start(3) + 1
        if name == "projective" and value.count("[") > value.count("]"):
            # multi-line matrix block
            while value.count("[") > value.count("]") and idx < len(lines):
                value += " " + lines[idx].split("#", 1)[0].strip()
                idx += 1
        if not value:
            raise ParseError(f"missing value for {name}", lineno, column, source)
        if idxs:
            indices = tuple(int(x) for x in _INDEX.findall(idxs))
            entries.append(_Entry(name, indices, value, lineno, column))
        elif name in ("N", "E_max", "graded", "eps_order"):
            if name in header:
                raise ParseError(f"duplicate header key {name}", lineno, 1, source)
            header[name] = (value, lineno)
        else:
            entries.append(_Entry(name, (), value, lineno, column))
    return header, entries


def parse_header_value(header: dict, key: str, source: str | None, default=None):
    if key not in header:
        return default
    value, line = header[key]
    if key == "graded":
        v = value.strip().lower()
        if v not in ("true", "false"):
            raise ParseError("graded must be true or false", line, 1, source)
        return v == "true"
    try:
        k = int(value)
    except ValueError:
        raise ParseError(f"{key} must be an integer", line, 1, source) from None
    if k < (1 if key == "N" else 0):
        raise ParseError(f"{key} out of range", line, 1, source)
    return k


def space_from_header(header: dict, source: str | None, eps_order: int | None) -> JetSpace:
    if "N" not in header:
        raise ParseError("missing header key N", 1, 1, source)
    n = parse_header_value(header, "N", source)
    e = parse_header_value(header, "E_max", source)
    if e is None:
        e = parse_header_value(header, "eps_order", source)
    if eps_order is not None:
        e = eps_order
    if e is None:
        e = default_eps_order()
    return JetSpace(n, e)


def _expr(entry: _Entry, space: JetSpace, source, operator: bool = False):
    try:
        if operator:
            return parse_operator_expression(entry.text, space, entry.line, source)
        return parse_expression(entry.text, space, entry.line, source)
    except ParseError as exc:
        col = None if exc.column is None else exc.column + entry.column - 1
        raise ParseError(exc.message, entry.line, col, source) from None


def _check_index(entry: _Entry, n: int, count: int, source) -> tuple[int, ...]:
    if len(entry.indices) != count:
        raise ParseError(f"{entry.name} needs {count} index(es)", entry.line, 1, source)
    for i in entry.indices:
        if not 1 <= i <= n:
            raise ParseError(f"index {i} outside 1..{n}", entry.line, 1, source)
    return entry.indices


@dataclass
class OperatorFile:
    """Parsed operator or pencil file."""

    space: JetSpace
    operators: dict[str, WNLOperator]
    graded: bool | None


def parse_operator_text(text: str, source: str | None = None,
                        eps_order: int | None = None) -> OperatorFile:
    header, entries = split_lines(text, source)
    space = space_from_header(header, source, eps_order)
    graded = parse_header_value(header, "graded", source)
    n = space.n
    groups: dict[str, dict] = {}
    pat = re.compile(r"^(P|V|Phi)(\d*)$")
    for entry in entries:
        m = pat.match(entry.name)
        if not m:
            raise ParseError(f"unknown entry {entry.name!r}", entry.line, 1, source)
        kind, label = m.group(1), m.group(2)
        g = groups.setdefault(label, {"P": {}, "V": {}, "Phi": {}})
        if kind == "P":
            key = _check_index(entry, n, 2, source)
            if key in g["P"]:
                raise ParseError("duplicate entry", entry.line, 1, source)
            g["P"][key] = _expr(entry, space, source, operator=True)
        else:
            key = _check_index(entry, n, 1, source)
            if key in g[kind]:
                raise ParseError("duplicate entry", entry.line, 1, source)
            g[kind][key] = _expr(entry, space, source)
    if not groups:
        raise ParseError("no operator entries", None, None, source)
    operators = {}
    for label, g in sorted(groups.items()):
        rows = [[g["P"].get((i, j), DiffOp.zero(space)) for j in range(1, n + 1)]
                for i in range(1, n + 1)]
        V = tuple(g["V"].get((i,), space.zero) for i in range(1, n + 1)) if g["V"] else None
        Phi = tuple(g["Phi"].get((i,), space.zero) for i in range(1, n + 1)) \
            if g["Phi"] else None
        operators[label] = WNLOperator(LocalOperator(space, rows), V, Phi)
    return OperatorFile(space, operators, graded)


def read_operator_file(path: str, eps_order: int | None = None) -> OperatorFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", None, None, path) from None
    return parse_operator_text(text, path, eps_order)


def format_operator(P: WNLOperator, label: str = "") -> str:
    """Entry lines of an operator (no header)."""
    lines = []
    n = P.size
    for i in range(n):
        for j in range(n):
            lines.append(f"P{label}[{i + 1}][{j + 1}] = {format_diffop(P.local.entries[i][j])}")
    if P.V is not None:
        for i, v in enumerate(P.V):
            lines.append(f"V{label}[{i + 1}] = {format_diffpoly(v)}")
        if P.flank is not None:
            for i, v in enumerate(P.flank):
                lines.append(f"Phi{label}[{i + 1}] = {format_diffpoly(v)}")
    return "\n".join(lines) + "\n"


def format_header(space: JetSpace, graded: bool | None) -> str:
    out = f"N = {space.n}\nE_max = {space.eps_order}\n"
    if graded is not None:
        out += f"graded = {'true' if graded else 'false'}\n"
    return out


def format_operator_file(operators: dict[str, WNLOperator], space: JetSpace,
                         graded: bool | None = None) -> str:
    if graded is None:
        graded = all(P.is_graded() for P in operators.values())
    out = format_header(space, graded)
    for label, P in sorted(operators.items()):
        out += format_operator(P, label)
    return out


def parse_rational(text: str, line: int, source) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"expected a rational number, got {text.strip()!r}", line, 1,
                         source) from None
