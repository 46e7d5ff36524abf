"""Factorisation ``P = D o Q o D`` of homogeneous operators and its
behaviour under projective reciprocal transformations.
"""

from __future__ import annotations

from .algebra import DiffOp
from .errors import NotDivisible, NotDP, NotHomogeneous, NotSkew
from .operators import LocalOperator, WNLOperator, is_skew
from .transform import ProjectiveMap, homogeneous_degree, projective_push

__all__ = ["divide_right_dx", "divide_left_dx", "dp_factorize", "dp_compose",
           "projective_dp_push"]


def _local(P) -> LocalOperator:
    if isinstance(P, WNLOperator):
        if P.V is not None:
            raise NotHomogeneous("the factorisation is defined for local operators")
        return P.local
    return P


def _divide(P: LocalOperator, side: str) -> LocalOperator:
    rows = []
    for i, row in enumerate(P.entries):
        out = []
        for j, op in enumerate(row):
            q, rem = op.divide_right() if side == "right" else op.divide_left()
            if not rem.is_zero():
                err = NotDivisible(f"entry ({i + 1},{j + 1}) is not divisible by D on the {side}",
                                   rem)
                err.entry = (i + 1, j + 1)
                raise err
            out.append(q)
        rows.append(out)
    return LocalOperator(P.space, rows)


def divide_right_dx(P) -> LocalOperator:
    """``P'`` with ``P = P' o D``; every ``D^0`` coefficient must vanish."""
    return _divide(_local(P), "right")


def divide_left_dx(P) -> LocalOperator:
    """``Q`` with ``D o Q = P``, solved from the top coefficient down."""
    return _divide(_local(P), "left")


def dp_factorize(P) -> LocalOperator:
    """``Q`` with ``P = D o Q o D``.

    Raises
    ------
    NotDP
        With ``step`` (``"right"`` or ``"left"``), the 1-based ``entry`` and
        the nonzero ``remainder`` of the failed division.
    """
    P = _local(P)
    degree = homogeneous_degree(P)
    if degree < 2:
        raise NotHomogeneous("the factorisation needs homogeneous degree at least 2")
    try:
        R = divide_right_dx(P)
    except NotDivisible as exc:
        raise NotDP(str(exc), "right", exc.entry, exc.remainder) from None
    try:
        Q = divide_left_dx(R)
    except NotDivisible as exc:
        raise NotDP(str(exc), "left", exc.entry, exc.remainder) from None
    return Q


def dp_compose(Q: LocalOperator) -> LocalOperator:
    """``D o Q o D``."""
    Q = _local(Q)
    sp = Q.space
    D = LocalOperator(sp, [[DiffOp.dx(sp) if i == j else DiffOp.zero(sp) for j in range(Q.size)]
                           for i in range(Q.size)])
    return D.compose(Q).compose(D)


def projective_dp_push(p: ProjectiveMap, Q) -> LocalOperator:
    """Transform the middle factor of ``D o Q o D`` under a projective map.

    The bivector ``D_x o Q o D_x`` is carried to ``D_y o Q~ o D_y``; the
    result ``Q~`` is skew and homogeneous of the degree of ``Q``.
    """
    Q = _local(Q)
    if not is_skew(Q):
        raise NotSkew("projective_dp_push requires a skew operator")
    out = projective_push(p, Q)
    if not is_skew(out):
        raise NotSkew("the pushed operator is not skew")
    if not out.is_zero() and homogeneous_degree(out) != homogeneous_degree(Q):
        raise NotHomogeneous("the pushed operator changed degree")
    return out
