"""Symbol of a pencil, its characteristic polynomial, the perturbative
lambda-roots and the central invariants.

Series in ``eps`` are plain lists ``[a_0, a_1, ..., a_K]`` of
:class:`~jetpoisson.coefficients.Coefficient`.  A polynomial in ``lambda``
with series coefficients is a list indexed by the power of ``lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import flint

from .coefficients import Coefficient, CoefficientRing
from .errors import EpsOrderMismatch, NotCanonicalForm, NotSemisimple, ShapeError
from .operators import WNLOperator

__all__ = ["PencilSymbol", "CharPoly", "CentralInvariants", "symbol", "char_poly",
           "leading_roots", "perturb_roots", "central_invariants", "evaluate_char_poly"]

Series = list


# -- truncated series ------------------------------------------------------------

def _szero(ring: CoefficientRing, K: int) -> Series:
    return [ring.zero] * (K + 1)


def _sadd(a: Series, b: Series) -> Series:
    return [x + y for x, y in zip(a, b)]


def _smul(a: Series, b: Series) -> Series:
    K = len(a) - 1
    ring = a[0].ring
    out = [ring.zero] * (K + 1)
    for i, x in enumerate(a):
        if x.is_zero():
            continue
        for j in range(K + 1 - i):
            if not b[j].is_zero():
                out[i + j] = out[i + j] + x * b[j]
    return out


def _sneg(a: Series) -> Series:
    return [-x for x in a]


def _trunc(a: Series, K: int) -> Series:
    ring = a[0].ring
    return list(a[:K + 1]) + [ring.zero] * max(0, K + 1 - len(a))


# -- lambda-polynomials with series coefficients -----------------------------------

def _padd(p: list, q: list) -> list:
    n = max(len(p), len(q))
    out = []
    for m in range(n):
        if m < len(p) and m < len(q):
            out.append(_sadd(p[m], q[m]))
        else:
            out.append(p[m] if m < len(p) else q[m])
    return out


def _pmul(p: list, q: list) -> list:
    ring = p[0][0].ring
    K = len(p[0]) - 1
    out = [_szero(ring, K) for _ in range(len(p) + len(q) - 1)]
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] = _sadd(out[i + j], _smul(a, b))
    return out


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass
class PencilSymbol:
    """The matrix ``A(eps) - lambda B(eps)`` of top coefficients.

    ``A[i][j]`` and ``B[i][j]`` are series: entry ``k`` is the coefficient
    of ``eps^k D^{k+1}`` in ``P2`` respectively ``P1``.
    """

    A: list
    B: list
    eps_order: int

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def ring(self) -> CoefficientRing:
        return self.A[0][0][0].ring

    def entry(self, i: int, j: int) -> list:
        """Entry ``(i, j)`` as a lambda-polynomial ``[A_ij, -B_ij]``."""
        return [list(self.A[i][j]), _sneg(self.B[i][j])]

    def __eq__(self, other) -> bool:
        return isinstance(other, PencilSymbol) and self.A == other.A and self.B == other.B


@dataclass
class CharPoly:
    """``det(A - lambda B)`` as ``coeffs[m]`` = series multiplying ``lambda^m``."""

    coeffs: list
    eps_order: int

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def eps_part(self, k: int) -> list:
        return [c[k] for c in self.coeffs]

    def __eq__(self, other) -> bool:
        return isinstance(other, CharPoly) and self.coeffs == other.coeffs


def _top_series(P: WNLOperator, i: int, j: int, E: int) -> Series:
    ring = P.space.ring
    op = P.local.entries[i][j]
    out = []
    for k in range(E + 1):
        part = op.eps_part(k)
        if part.order() > k + 1:
            raise ShapeError(f"the eps^{k} part has order above {k + 1}; not graded")
        c = part.coeff(k + 1)
        coef = c.as_coefficient()
        if coef is None:
            raise ShapeError("top coefficients must be functions of the fields only")
        out.append(coef)
    return out if out else [ring.zero]


def symbol(P1: WNLOperator, P2: WNLOperator) -> PencilSymbol:
    """Symbol ``sum_d eps^{d-1} (P2_{d,0} - lambda P1_{d,0})`` of the pencil ``P2 - lambda P1``."""
    if P1.space is not P2.space:
        raise EpsOrderMismatch("both operators must live in the same jet space")
    if P1.size != P2.size:
        raise ShapeError("operators of different sizes")
    n = P1.size
    E = P1.space.eps_order
    A = [[_top_series(P2, i, j, E) for j in range(n)] for i in range(n)]
    B = [[_top_series(P1, i, j, E) for j in range(n)] for i in range(n)]
    return PencilSymbol(A, B, E)


def char_poly(s: PencilSymbol) -> CharPoly:
    """Exact determinant of the symbol as a polynomial in ``lambda``."""
    n = s.n
    ring = s.ring
    K = s.eps_order
    total = [_szero(ring, K)]
    for perm in permutations(range(n)):
        term = [[ring.one] + [ring.zero] * K]
        for i in range(n):
            term = _pmul(term, s.entry(i, perm[i]))
        if _perm_sign(perm) < 0:
            term = [_sneg(c) for c in term]
        total = _padd(total, term)
    while len(total) > 1 and all(c.is_zero() for c in total[-1]):
        total.pop()
    return CharPoly(total, K)


def evaluate_char_poly(p: CharPoly, lam: Series) -> Series:
    """``p(lam)`` by Horner's rule, truncated at the length of ``lam``."""
    K = len(lam) - 1
    acc = _trunc(p.coeffs[-1], K)
    for c in reversed(p.coeffs[:-1]):
        acc = _sadd(_smul(acc, lam), _trunc(c, K))
    return acc


def _canonical_key(c: Coefficient):
    return (c.to_string(),)


def leading_roots(p: CharPoly) -> list:
    """Roots of the ``eps^0`` part, as rational functions, sorted canonically.

    Raises ``NotSemisimple`` on a repeated root and ``ShapeError`` when a
    root is not a rational function of the fields.
    """
    coeffs = p.eps_part(0)
    ring = coeffs[0].ring
    while len(coeffs) > 1 and coeffs[-1].is_zero():
        coeffs = coeffs[:-1]
    degree = len(coeffs) - 1
    if degree < 1:
        raise ShapeError("the characteristic polynomial has no lambda-dependence")
    n = ring.n
    ctx = flint.fmpq_mpoly_ctx.get(tuple(f"u{i}" for i in range(1, n + 1)) + ("lam",), "lex")
    gens = ctx.gens()
    den = ring._pone
    for c in coeffs:
        g = den.gcd(c.den)
        den = den * (c.den / g)
    poly = ctx.from_dict({})
    for m, c in enumerate(coeffs):
        num = c.num * (den / c.den)
        poly = poly + num.compose(*gens[:n], ctx=ctx) * gens[n] ** m
    _, factors = poly.factor()
    roots = []
    small = ring.ctx
    zeros = [small.constant(0)]
    for f, e in factors:
        d = f.degrees()[n]
        if d == 0:
            continue
        if d > 1:
            raise ShapeError("the leading roots are not rational functions of the fields")
        if e > 1:
            raise NotSemisimple("repeated leading root")
        parts = {0: ctx.from_dict({}), 1: ctx.from_dict({})}
        for exps, coeff in f.to_dict().items():
            parts[exps[n]] = parts[exps[n]] + ctx.from_dict({exps[:n] + (0,): coeff})
        a = parts[1].compose(*small.gens(), *zeros, ctx=small)
        b = parts[0].compose(*small.gens(), *zeros, ctx=small)
        roots.append(Coefficient(ring, -b, ring._pone) / Coefficient(ring, a, ring._pone))
    if len(set(roots)) != len(roots):
        raise NotSemisimple("repeated leading root")
    return sorted(roots, key=_canonical_key)


def perturb_roots(p: CharPoly, K: int | None = None) -> list:
    """Root series ``lambda^i = r^i + sum_k eps^k lambda^i_k`` up to ``eps^K``.

    Each correction solves the linearised equation at the simple leading
    root, so ``p(lambda^i) = O(eps^{K+1})`` exactly.
    """
    K = p.eps_order if K is None else K
    if K > p.eps_order:
        raise EpsOrderMismatch(f"order {K} exceeds the eps-order {p.eps_order} of the pencil")
    ring = p.coeffs[0][0].ring
    c0 = p.eps_part(0)
    out = []
    for r in leading_roots(p):
        deriv = ring.zero
        power = ring.one
        for m in range(1, len(c0)):
            deriv = deriv + c0[m] * power * m
            power = power * r
        if deriv.is_zero():
            raise NotSemisimple("the leading root is not simple")
        lam = [r] + [ring.zero] * K
        for k in range(1, K + 1):
            res = evaluate_char_poly(p, lam[:k + 1])
            lam[k] = -res[k] / deriv
        out.append(lam)
    return out


@dataclass
class CentralInvariants:
    """Per branch: ``f^i``, the root series and ``c^i_{2k} = lambda^i_{2k} / (f^i)^k``.

    ``odd`` lists ``(branch, order)`` of nonzero odd corrections; these
    vanish for genuine Poisson pencils.
    """

    f: list
    roots: list
    c: list
    order: int
    odd: list = field(default_factory=list)

    def table(self) -> list:
        """Rows ``(branch, 2k, c^i_{2k})`` in canonical order."""
        rows = []
        for i, ci in enumerate(self.c):
            for k2 in sorted(ci):
                rows.append((i + 1, k2, ci[k2]))
        return rows


def central_invariants(P1: WNLOperator, P2: WNLOperator, K: int | None = None) -> CentralInvariants:
    """Central invariants of the semisimple pencil ``P2 - lambda P1`` to order ``eps^K``.

    The leading roots ``r^i`` serve as canonical coordinates: ``f^i`` is the
    ``(i, i)`` component of the leading metric of ``P1`` in the coordinates
    ``r``, which must be diagonal there.  In canonical coordinates
    (``r^i = u^i``) this is the diagonal entry ``g_1^{ii}``; in other
    coordinates the result is the canonical one expressed in the current
    fields.  Branches follow the canonical order of the leading roots.
    """
    s = symbol(P1, P2)
    K = s.eps_order if K is None else K
    if K > s.eps_order:
        raise EpsOrderMismatch(f"order {K} exceeds the eps-order {s.eps_order} of the pencil")
    n = s.n
    ring = s.ring
    roots = perturb_roots(char_poly(s), K)
    dr = [[lam[0].derivative(a + 1) for a in range(n)] for lam in roots]
    g1 = [[s.B[a][b][0] for b in range(n)] for a in range(n)]

    def component(i, j):
        acc = ring.zero
        for a in range(n):
            for b in range(n):
                acc = acc + dr[i][a] * g1[a][b] * dr[j][b]
        return acc

    f = []
    for i in range(n):
        for j in range(i + 1, n):
            if not component(i, j).is_zero():
                raise NotCanonicalForm("the leading metric is not diagonal in the root coordinates")
        fi = component(i, i)
        if fi.is_zero():
            raise NotCanonicalForm("the leading roots do not form a coordinate system")
        f.append(fi)
    cs, odd = [], []
    for i, lam in enumerate(roots):
        ci = {}
        for k in range(0, K + 1):
            if k % 2:
                if not lam[k].is_zero():
                    odd.append((i + 1, k))
                continue
            ci[k] = lam[k] / f[i] ** (k // 2)
        cs.append(ci)
    return CentralInvariants(f, roots, cs, K, odd)
