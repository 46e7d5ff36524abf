"""Schouten brackets, the operators ``E^`` and ``D_P``, Poisson tests and
hydrodynamic-type geometry.

Two encodings of the odd variable ``zeta`` are supported.  In the extended
encoding ``zeta`` is an extra odd variable with ``D zeta = -u^{i,1} theta_i``
and the bracket is

    [P, Q] = (-1)^p dU(P) dT(Q) + dT(P) dU(Q) + (-1)^p E^(P) dZ(Q) + dZ(P) E^(Q),

where ``p`` is the theta-degree of ``P``, ``dU``/``dT`` are variational
derivatives and ``dZ`` the left derivative in ``zeta``.  In the Laurent
encoding ``zeta`` is replaced by a truncated series in ``1/u^{1,1}`` solving
the same equation for the ordinary total derivative, and only the first two
terms remain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import (EXTENDED, DiffPoly, JetSpace, partial_theta, partial_u, partial_zeta,
                      total_derivative, variational_derivative, functional_equal)
from .errors import NonLocalDensity, NotSkew, ShapeError, SingularMetric, TruncationTooSmall
from .linalg import determinant, inverse
from .operators import WNLOperator, density_of, is_skew

__all__ = ["e_hat", "schouten_lz", "schouten_lv", "LVBracket", "laurent_zeta", "zeta_remainder",
           "substitute_zeta", "lv_agrees", "d_p", "is_poisson", "is_compatible", "HydroData",
           "hydro_metric", "levi_civita", "contravariant_christoffel", "riemann",
           "ferapontov_conditions", "FerapontovReport", "theta_degree", "u1_powers"]


def theta_degree(f: DiffPoly) -> int:
    """Common theta-degree (zeta counts one) of a homogeneous density."""
    degs = f.theta_degrees()
    if not degs:
        return 0
    if len(degs) != 1:
        raise ShapeError("the density is not homogeneous in theta")
    return next(iter(degs))


def _euler_part(f: DiffPoly, i: int, odd: bool) -> DiffPoly:
    """``sum_{s>=1} v^s sum_t (-D)^t d f / d v^{s+t}`` for one variable family."""
    sp = f.space
    if odd:
        top = f.theta_orders(i)
        part = lambda s: partial_theta(f, i, s)  # noqa: E731
        var = lambda s: sp.theta(i, s)  # noqa: E731
    else:
        top = f.jet_orders(i)
        part = lambda s: partial_u(f, i, s)  # noqa: E731
        var = lambda s: sp.u(i, s)  # noqa: E731
    total = sp.zero
    if top < 1:
        return total
    e = part(top)
    for s in range(top, 0, -1):
        if s < top:
            e = part(s) - total_derivative(e, EXTENDED)
        total = total + var(s) * e
    return total


def e_hat(f: DiffPoly) -> DiffPoly:
    """The operator ``E^`` applied to ``f``."""
    sp = f.space
    total = -f
    for i in range(1, sp.n + 1):
        total = total + _euler_part(f, i, False) + _euler_part(f, i, True)
        total = total + sp.theta(i) * variational_derivative(f, "theta", i)
    return total


def _sign(p: int) -> int:
    return -1 if p & 1 else 1


def schouten_lz(P: DiffPoly, Q: DiffPoly) -> DiffPoly:
    """Bracket of two densities in the extended (``zeta`` as a variable) encoding."""
    sp = P.space
    if not P.terms or not Q.terms:
        return sp.zero
    p = theta_degree(P)
    sg = _sign(p)
    total = sp.zero
    for i in range(1, sp.n + 1):
        uP = variational_derivative(P, "u", i)
        tQ = variational_derivative(Q, "theta", i)
        tP = variational_derivative(P, "theta", i)
        uQ = variational_derivative(Q, "u", i)
        term = uP * tQ
        total = total + (term if sg == 1 else -term) + tP * uQ
    zQ = partial_zeta(Q)
    if zQ.terms:
        term = e_hat(P) * zQ
        total = total + (term if sg == 1 else -term)
    zP = partial_zeta(P)
    if zP.terms:
        total = total + zP * e_hat(Q)
    return total


# -- the Laurent encoding ------------------------------------------------------

def _integrate_u1(f: DiffPoly) -> DiffPoly:
    """Antiderivative in the field ``u^1`` with the other variables fixed."""
    sp = f.space
    out = {}
    for key, c in f.terms.items():
        for (i, s, _) in key[1]:
            if i == 1 and s == 1:
                raise ShapeError("unexpected u^{1,1} dependence in the zeta recursion")
        ic = c.integrate(1)
        if ic is None:
            raise ShapeError("the zeta recursion needs a logarithm; use polynomial coefficients")
        if not ic.is_zero():
            out[key] = ic
    return DiffPoly(sp, out)


def laurent_zeta(space: JetSpace, M: int) -> DiffPoly:
    """Laurent approximation ``zeta_M = sum_{k=0}^{M+1} h_k (u^{1,1})^{-k}``.

    The ``h_k`` do not depend on ``u^{1,1}`` and
    ``D zeta_M = -u^{i,1} theta_i + O((u^{1,1})^{-M-1})``.
    """
    if M < 1:
        raise TruncationTooSmall("the Laurent order M must be at least 1")
    sp = space
    u1 = sp.u(1)
    h = [-(u1 * sp.theta(1))]
    g0 = sp.zero
    for i in range(2, sp.n + 1):
        g0 = g0 - sp.u(i, 1) * sp.theta(i)
    for m in range(0, M + 1):
        hm = h[m]
        rest = total_derivative(hm, EXTENDED) - sp.u(1, 1) * partial_u(hm, 1, 0)
        rhs = -rest
        if m == 0:
            rhs = rhs + g0
        if m >= 1:
            rhs = rhs + (sp.u(1, 2) * h[m - 1]).scale(m - 1)
        h.append(_integrate_u1(rhs))
    zeta = sp.zero
    for k, hk in enumerate(h):
        zeta = zeta + (hk * sp.u(1, 1, -k) if k else hk)
    return zeta


def zeta_remainder(space: JetSpace, M: int) -> DiffPoly:
    """``D zeta_M + sum u^{i,1} theta_i``; of order ``(u^{1,1})^{-M-1}``."""
    z = laurent_zeta(space, M)
    r = total_derivative(z, EXTENDED)
    for i in range(1, space.n + 1):
        r = r + space.u(i, 1) * space.theta(i)
    return r


def substitute_zeta(f: DiffPoly, zeta: DiffPoly) -> DiffPoly:
    a, b = f.zeta_split()
    return a + b * zeta if b.terms else a


def u1_powers(f: DiffPoly) -> set[int]:
    """Exponents of ``u^{1,1}`` occurring in ``f``."""
    out = set()
    for key in f.terms:
        p = 0
        for (i, s, e) in key[1]:
            if i == 1 and s == 1:
                p = e
        out.add(p)
    return out


@dataclass(frozen=True)
class LVBracket:
    """Bracket in the Laurent encoding.

    Terms with ``u^{1,1}``-exponent below ``cutoff`` may be affected by the
    truncation of ``zeta``; everything at or above ``cutoff`` is exact.
    """

    density: DiffPoly
    cutoff: int
    order: int


def _u1_degree(f: DiffPoly) -> int:
    return max([0] + [p for p in u1_powers(f) if p > 0])


def schouten_lv(P: DiffPoly, Q: DiffPoly, M: int) -> LVBracket:
    """Bracket with ``zeta`` replaced by its Laurent series truncated at order ``M``."""
    sp = P.space
    z = laurent_zeta(sp, M)
    cutoff = -(M + 1) + _u1_degree(P) + _u1_degree(Q) + 2
    if cutoff >= 0:
        raise TruncationTooSmall(
            f"Laurent order {M} is too small for densities of this u^(1,1)-degree")
    Pt = substitute_zeta(P, z)
    Qt = substitute_zeta(Q, z)
    sg = _sign(theta_degree(P))
    total = sp.zero
    for i in range(1, sp.n + 1):
        term = variational_derivative(Pt, "u", i) * variational_derivative(Qt, "theta", i)
        total = total + (term if sg == 1 else -term)
        total = total + variational_derivative(Pt, "theta", i) * variational_derivative(Qt, "u", i)
    return LVBracket(total, cutoff, M)


def lv_agrees(P: DiffPoly, Q: DiffPoly, M: int) -> bool:
    """Compare the two encodings modulo total derivatives and the tracked remainder.

    The difference of the brackets (with ``zeta`` substituted in the extended
    one) must have variational derivatives whose ``u^{1,1}``-exponents all lie
    below the cutoff of :func:`schouten_lv`.
    """
    lv = schouten_lv(P, Q, M)
    sp = P.space
    z = laurent_zeta(sp, M)
    diff = lv.density - substitute_zeta(schouten_lz(P, Q), z)
    for i in range(1, sp.n + 1):
        for target in ("u", "theta"):
            d = variational_derivative(diff, target, i)
            if any(p > lv.cutoff for p in u1_powers(d)):
                return False
    return True


# -- the derivation D_P ------------------------------------------------------------

def d_p(P: DiffPoly, T: DiffPoly) -> DiffPoly:
    """Apply ``D_P = E^(P) dZ + sum D^s(dU P) d/dtheta^s + (-1)^p D^s(dT P) d/du^s``.

    ``p`` is the theta-degree of ``P``.  With this sign ``D_P(T)`` represents
    ``(-1)^p [P, T]``, so bivectors act by their bracket and
    ``D_P D_Q + D_Q D_P = D_{[P, Q]}`` for local bivectors ``P``, ``Q``.
    """
    if P.has_zeta():
        raise NonLocalDensity("d_p requires a purely local (zeta-free) density")
    sp = P.space
    sg = _sign(theta_degree(P))
    total = sp.zero
    zT = partial_zeta(T)
    if zT.terms:
        total = total + e_hat(P) * zT
    for i in range(1, sp.n + 1):
        a = variational_derivative(P, "u", i)
        top = T.theta_orders(i)
        for s in range(0, top + 1):
            pt = partial_theta(T, i, s)
            if pt.terms:
                total = total + a * pt
            if s < top:
                a = total_derivative(a, EXTENDED)
        b = variational_derivative(P, "theta", i)
        if sg < 0:
            b = -b
        top = T.jet_orders(i)
        for s in range(0, top + 1):
            pu = partial_u(T, i, s)
            if pu.terms:
                total = total + b * pu
            if s < top:
                b = total_derivative(b, EXTENDED)
    return total


# -- Poisson and compatibility tests ---------------------------------------------

def _density(P) -> DiffPoly:
    if isinstance(P, DiffPoly):
        return P
    return density_of(P)


def is_poisson(P) -> bool:
    """Jacobi identity ``[P, P] = 0`` through the density bracket.

    Returns ``False`` for a non-skew operator.
    """
    if isinstance(P, WNLOperator) and not is_skew(P):
        return False
    d = _density(P)
    return functional_equal(schouten_lz(d, d), d.space.zero)


def is_compatible(P1, P2) -> bool:
    """``[P1, P2] = 0`` (with ``[P1, P1] = [P2, P2] = 0`` this makes a pencil)."""
    for P in (P1, P2):
        if isinstance(P, WNLOperator) and not is_skew(P):
            raise NotSkew("compatibility is defined for skew operators")
    d1, d2 = _density(P1), _density(P2)
    return functional_equal(schouten_lz(d1, d2), d1.space.zero)


# -- hydrodynamic-type geometry ---------------------------------------------------

@dataclass
class HydroData:
    """Metric ``g^{ij}``, contravariant symbols ``Gamma^{ij}_k`` and tail ``V^i_j``."""

    g: list
    Gamma: list
    V: list

    @property
    def n(self) -> int:
        return len(self.g)

    def covariant_christoffel(self):
        """``Gamma^j_{lk} = -g_{li} Gamma^{ij}_k``."""
        gl = _lower(self.g)
        n = self.n
        ring = self.g[0][0].ring
        out = [[[ring.zero] * n for _ in range(n)] for _ in range(n)]
        for j in range(n):
            for l in range(n):
                for k in range(n):
                    acc = ring.zero
                    for i in range(n):
                        acc = acc - gl[l][i] * self.Gamma[i][j][k]
                    out[j][l][k] = acc
        return out


def _lower(g):
    ring = g[0][0].ring
    if determinant(g).is_zero():
        raise SingularMetric("the metric is degenerate")
    return inverse(g, ring.one, ring.zero)


def _linear_in_u1(f: DiffPoly, n: int, what: str) -> list:
    sp = f.space
    out = [sp.ring.zero] * n
    for key, c in f.terms.items():
        if key[0] or key[2] or key[3] or len(key[1]) != 1:
            raise ShapeError(f"{what} must be linear in the first jets")
        (i, s, p), = key[1]
        if s != 1 or p != 1:
            raise ShapeError(f"{what} must be linear in the first jets")
        out[i - 1] = c
    return out


def hydro_metric(P: WNLOperator) -> HydroData:
    """Read ``g``, ``Gamma`` and ``V`` off the ``eps^0`` part of ``P``."""
    if P.flank is not None:
        raise ShapeError("hydro_metric requires the canonical flank")
    sp = P.space
    n = P.size
    ring = sp.ring
    g = [[ring.zero] * n for _ in range(n)]
    G = [[[ring.zero] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            op = P.local.entries[i][j].eps_part(0)
            if op.order() > 1:
                raise ShapeError("the leading part must be of first order")
            top = op.coeff(1)
            if top.terms:
                c = top.as_coefficient()
                if c is None:
                    raise ShapeError("the metric must depend on u only")
                g[i][j] = c
            G[i][j] = _linear_in_u1(op.coeff(0), n, "the zero-order coefficient")
    V = [[ring.zero] * n for _ in range(n)]
    if P.V is not None:
        for i, v in enumerate(P.V):
            V[i] = _linear_in_u1(v.eps_part(0), n, "the tail")
    return HydroData(g, G, V)


def levi_civita(g) -> list:
    """Symbols ``Gamma^k_{ij}`` of the metric with contravariant components ``g``."""
    n = len(g)
    ring = g[0][0].ring
    gl = _lower(g)
    d = [[[gl[i][j].derivative(k + 1) for k in range(n)] for j in range(n)] for i in range(n)]
    out = [[[ring.zero] * n for _ in range(n)] for _ in range(n)]
    half = ring.const(Fraction(1, 2))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                acc = ring.zero
                for m in range(n):
                    acc = acc + g[k][m] * (d[m][j][i] + d[m][i][j] - d[i][j][m])
                out[k][i][j] = acc * half
    return out


def contravariant_christoffel(g) -> list:
    """``Gamma^{ij}_k = -g^{is} Gamma^j_{sk}`` for the Levi-Civita connection."""
    n = len(g)
    ring = g[0][0].ring
    lc = levi_civita(g)
    out = [[[ring.zero] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                acc = ring.zero
                for s in range(n):
                    acc = acc - g[i][s] * lc[j][s][k]
                out[i][j][k] = acc
    return out


def riemann(g) -> list:
    """``R^{ij}_{kl} = g^{jm} R^i_{mkl}`` with ``R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + ...``."""
    n = len(g)
    ring = g[0][0].ring
    G = levi_civita(g)
    R = [[[[ring.zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    acc = G[i][l][j].derivative(k + 1) - G[i][k][j].derivative(l + 1)
                    for m in range(n):
                        acc = acc + G[i][k][m] * G[m][l][j] - G[i][l][m] * G[m][k][j]
                    R[i][j][k][l] = acc
    up = [[[[ring.zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    acc = ring.zero
                    for m in range(n):
                        acc = acc + g[j][m] * R[i][m][k][l]
                    up[i][j][k][l] = acc
    return up


@dataclass
class FerapontovReport:
    """Outcome per condition: ``(name, passed, residuals)``."""

    conditions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.conditions)


def ferapontov_conditions(h: HydroData) -> FerapontovReport:
    """Symmetry of ``V``, closedness ``nabla_j V^k_i = nabla_i V^k_j`` and the curvature law."""
    n = h.n
    g = h.g
    V = h.V
    ring = g[0][0].ring
    gl = _lower(g)
    lc = levi_civita(g)
    report = FerapontovReport()
    # g_{is} V^s_j = g_{js} V^s_i
    res = []
    for i in range(n):
        for j in range(i + 1, n):
            a = ring.zero
            for s in range(n):
                a = a + gl[i][s] * V[s][j] - gl[j][s] * V[s][i]
            if not a.is_zero():
                res.append(((i + 1, j + 1), a))
    report.conditions.append(("symmetry", not res, res))

    def nabla(j, k, i):
        acc = V[k][i].derivative(j + 1)
        for m in range(n):
            acc = acc + lc[k][j][m] * V[m][i] - lc[m][j][i] * V[k][m]
        return acc

    res = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                a = nabla(j, k, i) - nabla(i, k, j)
                if not a.is_zero():
                    res.append(((i + 1, j + 1, k + 1), a))
    report.conditions.append(("closedness", not res, res))
    R = riemann(g)
    res = []

    def delta(a, b):
        return ring.one if a == b else ring.zero

    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    rhs = V[i][k] * delta(j, l) + V[j][l] * delta(i, k) \
                        - V[j][k] * delta(i, l) - V[i][l] * delta(j, k)
                    a = R[i][j][k][l] - rhs
                    if not a.is_zero():
                        res.append(((i + 1, j + 1, k + 1, l + 1), a))
    report.conditions.append(("curvature", not res, res))
    return report
