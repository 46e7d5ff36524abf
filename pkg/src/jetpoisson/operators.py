"""Matrix differential operators and weakly non-local bivectors.

A weakly non-local operator of localizable shape is

    P^{ij} = L^{ij} + Phi^i D^{-1} V^j + V^i D^{-1} Phi^j,

with ``L`` a matrix of scalar differential operators, ``V`` a vector of
functions and ``Phi`` the flank, by default ``Phi^i = u^{i,1}``.

Densities
---------
The bivector density attached to such an operator is

    1/2 sum a^{ij}_s theta_i theta_j^s  +  zeta * sum_i V^i theta_i,

where ``a^{ij}_s`` are the coefficients of ``L`` and ``zeta`` is the odd
variable with ``D zeta = -sum u^{i,1} theta_i``.  The factor ``+1`` in
front of ``zeta`` is the value for which ``zeta V theta`` integrates to
the tail ``u^{i,1} D^{-1} V^j + V^i D^{-1} u^{j,1}`` under the rules of
this package; it is pinned down by the round-trip and bracket tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .algebra import (EXTENDED, DiffOp, DiffPoly, JetSpace, partial_theta, partial_zeta,
                      total_derivative, variational_derivative, witness)
from .errors import IrreducibleNonlocal, NotSkew, ShapeError

__all__ = ["LocalOperator", "WNLOperator", "adjoint", "is_skew", "density_of", "operator_of",
           "apply"]


class LocalOperator:
    """An ``N x N`` matrix of scalar differential operators."""

    __slots__ = ("space", "entries", "_hash")

    def __init__(self, space: JetSpace, entries: Sequence[Sequence[DiffOp]]):
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise ShapeError("operator matrix must be square")
        self.space = space
        self.entries = tuple(tuple(row) for row in entries)
        self._hash = None

    @property
    def size(self) -> int:
        return len(self.entries)

    @classmethod
    def zero(cls, space: JetSpace, n: int | None = None) -> "LocalOperator":
        n = space.n if n is None else n
        return cls(space, [[DiffOp.zero(space) for _ in range(n)] for _ in range(n)])

    @classmethod
    def identity(cls, space: JetSpace, n: int | None = None) -> "LocalOperator":
        n = space.n if n is None else n
        return cls(space, [[DiffOp.identity(space) if i == j else DiffOp.zero(space)
                            for j in range(n)] for i in range(n)])

    @classmethod
    def scalar(cls, op: DiffOp) -> "LocalOperator":
        return cls(op.space, [[op]])

    def __getitem__(self, ij) -> DiffOp:
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other) -> bool:
        if isinstance(other, LocalOperator):
            return self.space is other.space and self.entries == other.entries
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.entries)
        return self._hash

    def __repr__(self) -> str:
        return f"LocalOperator({[[str(e) for e in row] for row in self.entries]})"

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def map(self, fn) -> "LocalOperator":
        return LocalOperator(self.space, [[fn(e) for e in row] for row in self.entries])

    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        return LocalOperator(self.space, [[a + b for a, b in zip(r1, r2)]
                                          for r1, r2 in zip(self.entries, other.entries)])

    def __neg__(self) -> "LocalOperator":
        return self.map(lambda e: -e)

    def __sub__(self, other: "LocalOperator") -> "LocalOperator":
        return self + (-other)

    def compose(self, other: "LocalOperator") -> "LocalOperator":
        n = self.size
        rows = []
        for i in range(n):
            row = []
            for j in range(other.size):
                acc = DiffOp.zero(self.space)
                for k in range(n):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if a.coeffs and b.coeffs:
                        acc = acc + a.compose(b)
                row.append(acc)
            rows.append(row)
        return LocalOperator(self.space, rows)

    def adjoint(self) -> "LocalOperator":
        n = self.size
        return LocalOperator(self.space, [[self.entries[j][i].adjoint() for j in range(n)]
                                          for i in range(n)])

    def apply(self, psi: Sequence[DiffPoly]) -> tuple[DiffPoly, ...]:
        out = []
        for row in self.entries:
            acc = self.space.zero
            for op, f in zip(row, psi):
                if op.coeffs:
                    acc = acc + op.apply(f)
            out.append(acc)
        return tuple(out)

    def truncate(self, eps_order: int) -> "LocalOperator":
        return self.map(lambda e: e.truncate(eps_order))

    def order(self) -> int:
        return max((e.order() for row in self.entries for e in row), default=-1)


@dataclass(frozen=True, eq=False)
class WNLOperator:
    """Local part plus a localizable tail ``Phi^i D^{-1} V^j + V^i D^{-1} Phi^j``.

    Parameters
    ----------
    local : LocalOperator
    V : tuple of DiffPoly, optional
        Tail vector; ``None`` means a purely local operator.
    flank : tuple of DiffPoly, optional
        ``Phi``; ``None`` means the canonical flank ``u^{i,1}``.
    """

    local: LocalOperator
    V: tuple | None = None
    flank: tuple | None = field(default=None)

    def __post_init__(self):
        n = self.local.size
        if self.V is not None:
            V = tuple(self.V)
            if len(V) != n:
                raise ShapeError("tail vector has the wrong length")
            object.__setattr__(self, "V", None if all(v.is_zero() for v in V) else V)
        if self.flank is not None:
            F = tuple(self.flank)
            if len(F) != n:
                raise ShapeError("flank has the wrong length")
            canonical = self.local.space.flank() if n == self.local.space.n else None
            object.__setattr__(self, "flank", None if F == canonical else F)

    @property
    def space(self) -> JetSpace:
        return self.local.space

    @property
    def size(self) -> int:
        return self.local.size

    @classmethod
    def from_local(cls, local: LocalOperator) -> "WNLOperator":
        return cls(local)

    @classmethod
    def scalar(cls, op: DiffOp, V: DiffPoly | None = None) -> "WNLOperator":
        return cls(LocalOperator.scalar(op), None if V is None else (V,))

    def tail(self) -> tuple[DiffPoly, ...]:
        return self.V if self.V is not None else tuple(self.space.zero for _ in range(self.size))

    def flank_vector(self) -> tuple[DiffPoly, ...]:
        return self.flank if self.flank is not None else self.space.flank()

    def is_local(self) -> bool:
        return self.V is None

    def __eq__(self, other) -> bool:
        if not isinstance(other, WNLOperator):
            return NotImplemented
        if self.local != other.local or self.tail() != other.tail():
            return False
        if self.V is None:
            return True
        return self.flank_vector() == other.flank_vector()

    def __hash__(self) -> int:
        return hash((self.local, self.tail()))

    def __add__(self, other: "WNLOperator") -> "WNLOperator":
        if self.V is not None and other.V is not None \
                and self.flank_vector() != other.flank_vector():
            raise ShapeError("cannot add tails with different flanks")
        V = tuple(a + b for a, b in zip(self.tail(), other.tail()))
        fl = self.flank if self.V is not None else other.flank
        return WNLOperator(self.local + other.local, V, fl)

    def __neg__(self) -> "WNLOperator":
        return WNLOperator(-self.local, tuple(-v for v in self.tail()), self.flank)

    def __sub__(self, other: "WNLOperator") -> "WNLOperator":
        return self + (-other)

    def scale(self, c) -> "WNLOperator":
        return WNLOperator(self.local.map(lambda e: e.left_mul(c)),
                           tuple(v.scale(c) for v in self.tail()), self.flank)

    def truncate(self, eps_order: int) -> "WNLOperator":
        return WNLOperator(self.local.truncate(eps_order),
                           tuple(v.truncate(eps_order) for v in self.tail()), self.flank)

    def eps_order(self) -> int:
        degs = [c.eps_degree() for row in self.local.entries for e in row
                for c in e.coeffs.values()]
        degs += [v.eps_degree() for v in self.tail()]
        return max(degs, default=-1)

    def is_graded(self) -> bool:
        """True when every term at ``eps^k`` has total degree ``k + 1``."""
        for row in self.local.entries:
            for e in row:
                for s, c in e.coeffs.items():
                    for g in c.gradings():
                        if g.d_x + s != g.d_eps + 1:
                            return False
        for v in self.tail():
            for g in v.gradings():
                if g.d_x != g.d_eps + 1:
                    return False
        if self.V is not None:
            for f in self.flank_vector():
                for g in f.gradings():
                    if g.d_x != 1 + g.d_eps:
                        return False
        return True

    def apply(self, psi: Sequence[DiffPoly]) -> tuple[DiffPoly, ...]:
        return apply(self, psi)

    def __repr__(self) -> str:
        from .fileformats import format_operator
        return f"WNLOperator(\n{format_operator(self)})"


# -- operations ------------------------------------------------------------------

def adjoint(P):
    """Formal adjoint; the tail of a localizable operator changes sign."""
    if isinstance(P, LocalOperator):
        return P.adjoint()
    if isinstance(P, DiffOp):
        return P.adjoint()
    if isinstance(P, WNLOperator):
        V = None if P.V is None else tuple(-v for v in P.V)
        return WNLOperator(P.local.adjoint(), V, P.flank)
    from .nonlocal_calculus import NonlocalExpression
    if isinstance(P, NonlocalExpression):
        return P.adjoint()
    raise TypeError(f"no adjoint for {type(P).__name__}")


def is_skew(P) -> bool:
    """True iff ``adjoint(P) == -P``."""
    if isinstance(P, WNLOperator):
        P = P.local
    if isinstance(P, DiffOp):
        return P.adjoint() == -P
    return P.adjoint() == -P


def density_of(P: WNLOperator) -> DiffPoly:
    """Bivector density of a skew operator with canonical flank."""
    if isinstance(P, LocalOperator):
        P = WNLOperator(P)
    if not is_skew(P):
        raise NotSkew("density_of requires a skew-symmetric operator")
    if P.flank is not None:
        raise ShapeError("density_of requires the canonical flank u^{i,1}")
    sp = P.space
    n = P.size
    total = sp.zero
    half = Fraction(1, 2)
    for i in range(n):
        ti = sp.theta(i + 1)
        for j in range(n):
            for s, a in P.local.entries[i][j].coeffs.items():
                total = total + (a * ti * sp.theta(j + 1, s)).scale(half)
    if P.V is not None:
        w = sp.zero
        for i, v in enumerate(P.V):
            w = w + v * sp.theta(i + 1)
        total = total + sp.zeta() * w
    return total


def reduce_zeta_part(density: DiffPoly) -> tuple[DiffPoly, tuple[DiffPoly, ...]]:
    """Split ``density`` modulo total derivatives as ``L + zeta * sum V^i theta_i``.

    Returns the zeta-free part ``L`` and the vector ``V``.
    """
    sp = density.space
    f = density
    while True:
        w = partial_zeta(f)
        worst = None
        for key in w.terms:
            if len(key[2]) != 1:
                raise ShapeError("the zeta cofactor must have theta-degree one")
            (i, s), = key[2]
            if s >= 1 and (worst is None or s > worst[1]):
                worst = (i, s)
        if worst is None:
            break
        i, s = worst
        # zeta * w * theta_i^s == U w theta_i^{s-1} - zeta * D(w) theta_i^{s-1}  (mod D)
        piece = sp.zero
        for key, c in w.terms.items():
            if key[2] == ((i, s),):
                piece = piece + sp.monomial(c, (key[0], key[1], (), 0))
        y = sp.zeta() * piece * sp.theta(i, s - 1)
        f = f - total_derivative(y, EXTENDED)
    w = partial_zeta(f)
    V = tuple(partial_theta(w, i, 0) for i in range(1, sp.n + 1))
    a, _ = f.zeta_split()
    return a, V


def operator_of(density: DiffPoly) -> WNLOperator:
    """Skew operator whose density is ``density`` modulo total derivatives."""
    sp = density.space
    if any(d != 2 for d in density.theta_degrees()):
        raise ShapeError("a bivector density must have theta-degree 2")
    local, V = reduce_zeta_part(density)
    n = sp.n
    rows = []
    for k in range(1, n + 1):
        vk = variational_derivative(local, "theta", k)
        coeffs: list[dict] = [dict() for _ in range(n)]
        for key, c in vk.terms.items():
            if len(key[2]) != 1 or key[3]:
                raise ShapeError("unexpected term in the variational derivative")
            (j, s), = key[2]
            mono = sp.monomial(c, (key[0], key[1], (), 0))
            coeffs[j - 1][s] = coeffs[j - 1][s] + mono if s in coeffs[j - 1] else mono
        rows.append([DiffOp(sp, c) for c in coeffs])
    return WNLOperator(LocalOperator(sp, rows), V)


def _inverse_dx(f: DiffPoly) -> DiffPoly:
    g = witness(f) if f.terms else f.space.zero
    if g is None:
        raise IrreducibleNonlocal(f"D^{{-1}} of {f} has no differential-polynomial witness")
    return g


def apply(P, psi: Sequence[DiffPoly]) -> tuple[DiffPoly, ...]:
    """Apply an operator to a covector; tail integrals need exact witnesses."""
    if isinstance(P, LocalOperator):
        return P.apply(psi)
    out = list(P.local.apply(psi))
    if P.V is not None:
        sp = P.space
        flank = P.flank_vector()
        a = sp.zero
        b = sp.zero
        for j in range(P.size):
            a = a + P.V[j] * psi[j]
            b = b + flank[j] * psi[j]
        ia, ib = _inverse_dx(a), _inverse_dx(b)
        for i in range(P.size):
            out[i] = out[i] + flank[i] * ia + P.V[i] * ib
    return tuple(out)
