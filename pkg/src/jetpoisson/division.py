"""Exact division of even differential polynomials.

Both operands are turned into ordinary polynomials in the fields and the
jet variables (over a common denominator in the fields), divided with
``python-flint`` and converted back.  A quotient exists when the divisor's
jet-dependent part cancels completely.
"""

from __future__ import annotations

from functools import lru_cache

import flint

from .algebra import DiffPoly, _acc, _clean
from .coefficients import Coefficient

__all__ = ["exact_quotient", "series_quotient"]


@lru_cache(maxsize=None)
def _context(n: int, jets: tuple):
    names = tuple(f"u{i}" for i in range(1, n + 1)) + tuple(f"j{i}_{s}" for (i, s) in jets)
    return flint.fmpq_mpoly_ctx.get(names, "lex")


def _common_denominator(fs):
    den = None
    for f in fs:
        for c in f.terms.values():
            if den is None:
                den = c.den
            elif c.den != den:
                g = den.gcd(c.den)
                den = den * (c.den / g)
    return den


def _to_poly(f: DiffPoly, ctx, n: int, jet_index: dict, den):
    gens = ctx.gens()
    total = ctx.from_dict({})
    for key, c in f.terms.items():
        if key[2] or key[3] or key[0]:
            raise ValueError("exact division needs even, eps-free operands")
        factor = den / c.den
        num = c.num * factor
        mono = ctx.constant(1)
        for (i, s, p) in key[1]:
            if p < 0:
                raise ValueError("exact division does not support negative jet powers")
            mono = mono * gens[jet_index[(i, s)]] ** p
        total = total + num.compose(*gens[:n], ctx=ctx) * mono
    return total


def exact_quotient(f: DiffPoly, g: DiffPoly) -> DiffPoly | None:
    """Return ``q`` with ``q * g == f`` (both eps-free and even), or None."""
    space = f.space
    if g.is_zero():
        raise ZeroDivisionError("division by the zero differential polynomial")
    if f.is_zero():
        return space.zero
    n = space.n
    jets = sorted({(i, s) for h in (f, g) for key in h.terms for (i, s, _) in key[1]})
    ctx = _context(n, tuple(jets))
    jet_index = {v: n + k for k, v in enumerate(jets)}
    df = _common_denominator([f])
    dg = _common_denominator([g])
    F = _to_poly(f, ctx, n, jet_index, df)
    G = _to_poly(g, ctx, n, jet_index, dg)
    ring = space.ring
    dg_big = dg.compose(*ctx.gens()[:n], ctx=ctx)
    df_big = df.compose(*ctx.gens()[:n], ctx=ctx)
    H = F * dg_big
    c = H.gcd(G)
    Hq = H / c
    Gq = G / c
    degs = Gq.degrees()
    if any(degs[k] for k in range(n, len(degs))):
        return None
    denom = Gq * df_big
    # back to DiffPoly: numerator monomials split into field and jet parts
    small = ring.ctx
    den_small = denom.compose(*small.gens(), *[small.constant(0)] * len(jets), ctx=small) \
        if jets else denom.compose(*small.gens(), ctx=small)
    den_coef = Coefficient(ring, ring._pone, den_small)
    d: dict = {}
    for exps, coeff in Hq.to_dict().items():
        field_exps = exps[:n]
        jet_part = tuple((jets[k][0], jets[k][1], exps[n + k])
                         for k in range(len(jets)) if exps[n + k])
        num = small.from_dict({field_exps: coeff})
        _acc(d, (0, jet_part, (), 0), Coefficient(ring, num, ring._pone, _reduced=True))
    out = {k: v * den_coef for k, v in _clean(d).items()}
    return DiffPoly(space, out)


def series_quotient(f: DiffPoly, g: DiffPoly) -> DiffPoly | None:
    """Exact quotient of eps-series, solved order by order in ``eps``."""
    space = f.space
    gp = g.eps_parts()
    if 0 not in gp:
        raise ZeroDivisionError("divisor has no eps^0 part")
    g0 = gp[0]
    fp = f.eps_parts()
    q: dict[int, DiffPoly] = {}
    for k in range(space.eps_order + 1):
        rhs = fp.get(k, space.zero)
        for m, gm in gp.items():
            if 1 <= m <= k and (k - m) in q:
                rhs = rhs - gm * q[k - m]
        if rhs.is_zero():
            continue
        qk = exact_quotient(rhs, g0)
        if qk is None:
            return None
        q[k] = qk
    total = space.zero
    for k, v in q.items():
        total = total + v.shift_eps(k)
    return total
