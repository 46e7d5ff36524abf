"""Canonical, parse-stable text output for expressions and operators."""

from __future__ import annotations

from typing import TYPE_CHECKING

from .coefficients import format_rational

if TYPE_CHECKING:  # pragma: no cover
    from .algebra import DiffOp, DiffPoly


def _monomial_factors(key) -> list[str]:
    e, jets, odds, z = key
    parts = []
    if e:
        parts.append("eps" if e == 1 else f"eps^{e}")
    for (i, s, p) in jets:
        base = f"u[{i},{s}]"
        parts.append(base if p == 1 else f"{base}^{p}")
    for (i, s) in odds:
        parts.append(f"theta[{i}]" if s == 0 else f"theta[{i},{s}]")
    if z:
        parts.append("zeta")
    return parts


def _signed_term(key, c, suffix: str = "") -> tuple[bool, str]:
    """Return ``(negative, body)`` for one term."""
    factors = _monomial_factors(key)
    if suffix:
        factors.append(suffix)
    if c.is_constant():
        v = c.constant_value()
        neg = v < 0
        a = -v if neg else v
        if factors:
            body = "*".join(factors) if a == 1 else f"{format_rational(a)}*" + "*".join(factors)
        else:
            body = format_rational(a)
        return neg, body
    if len(c.num.to_dict()) == 1:
        # a single numerator term carries its sign outside, with or without a denominator
        neg = c.leading_sign() < 0
        text = (-c if neg else c).to_string()
        return neg, "*".join([text] + factors)
    text = c.to_string()
    if c.is_polynomial():
        text = f"({text})"
    return False, "*".join([text] + factors)


def _join(pieces: list[tuple[bool, str]]) -> str:
    if not pieces:
        return "0"
    out = []
    for idx, (neg, body) in enumerate(pieces):
        if idx == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def format_diffpoly(f: "DiffPoly") -> str:
    """Canonical text of a differential polynomial."""
    return _join([_signed_term(k, c) for k, c in f.sorted_terms()])


def format_diffop(op: "DiffOp") -> str:
    """Canonical text of a scalar operator, highest power of ``D`` first."""
    pieces = []
    for s in sorted(op.coeffs, reverse=True):
        suffix = "" if s == 0 else ("D" if s == 1 else f"D^{s}")
        for k, c in op.coeffs[s].sorted_terms():
            pieces.append(_signed_term(k, c, suffix))
    return _join(pieces)
