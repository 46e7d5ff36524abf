"""Exact linear algebra over fields of rational functions or rationals.

The routines are generic: matrix entries only need ``+``, ``-``, ``*``,
``/`` and a zero test through ``is_zero()`` or ``== 0``.
"""

from __future__ import annotations

from typing import Sequence

__all__ = ["determinant", "inverse", "matmul", "transpose"]


def _is_zero(x) -> bool:
    test = getattr(x, "is_zero", None)
    return test() if callable(test) else x == 0


def determinant(m: Sequence[Sequence]):
    """Determinant by Gaussian elimination with pivoting."""
    n = len(m)
    a = [list(row) for row in m]
    det = None
    sign = 1
    for col in range(n):
        piv = next((r for r in range(col, n) if not _is_zero(a[r][col])), None)
        if piv is None:
            return a[0][0] - a[0][0]
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            sign = -sign
        p = a[col][col]
        det = p if det is None else det * p
        for r in range(col + 1, n):
            if _is_zero(a[r][col]):
                continue
            f = a[r][col] / p
            for c in range(col, n):
                a[r][c] = a[r][c] - f * a[col][c]
    return det if sign == 1 else -det


def inverse(m: Sequence[Sequence], one, zero):
    """Inverse by Gauss-Jordan elimination; returns None for a singular matrix."""
    n = len(m)
    a = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if not _is_zero(a[r][col])), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and not _is_zero(a[r][col]):
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]):
    n, m, p = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = a[i][0] * b[0][j]
            for k in range(1, m):
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def transpose(a: Sequence[Sequence]):
    return [list(r) for r in zip(*a)]
