"""Exact rational functions of the field variables ``u^1, ..., u^N``.

Coefficients are stored as reduced fractions of multivariate polynomials
over the rationals.  The polynomial kernel is provided by ``python-flint``
(``fmpq_mpoly``); this module only adds the fraction layer, canonical
normalisation, formal integration and printing.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import flint

__all__ = ["CoefficientRing", "Coefficient", "coefficient_ring", "format_rational", "to_sympy",
           "from_sympy"]


def _to_fmpq(value) -> flint.fmpq:
    if isinstance(value, flint.fmpq):
        return value
    if isinstance(value, int):
        return flint.fmpq(value)
    if isinstance(value, Fraction):
        return flint.fmpq(value.numerator, value.denominator)
    raise TypeError(f"cannot convert {type(value).__name__} to a rational number")


def _fmpq_to_fraction(q: flint.fmpq) -> Fraction:
    return Fraction(int(q.p), int(q.q))


def format_rational(q) -> str:
    """Print an exact rational as ``p`` or ``p/q``."""
    f = q if isinstance(q, Fraction) else _fmpq_to_fraction(_to_fmpq(q))
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


@lru_cache(maxsize=None)
def coefficient_ring(n: int) -> "CoefficientRing":
    """Return the (cached) ring of rational functions in ``n`` field variables."""
    return CoefficientRing(n)


class CoefficientRing:
    """The field ``Q(u^1, ..., u^n)`` of rational coefficient functions.

    Rings are cached per ``n`` so that identity comparison is enough to
    decide compatibility.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("a coefficient ring needs at least one variable")
        self.n = n
        self.ctx = flint.fmpq_mpoly_ctx.get(tuple(f"u{i}" for i in range(1, n + 1)), "lex")
        self._pzero = self.ctx.from_dict({})
        self._pone = self.ctx.constant(1)
        self.zero = Coefficient(self, self._pzero, self._pone, _reduced=True)
        self.one = Coefficient(self, self._pone, self._pone, _reduced=True)

    def __repr__(self) -> str:
        return f"CoefficientRing({self.n})"

    def __reduce__(self):
        return (coefficient_ring, (self.n,))

    def const(self, value) -> "Coefficient":
        """Embed a rational constant."""
        q = _to_fmpq(value)
        if q == 0:
            return self.zero
        return Coefficient(self, self.ctx.constant(q), self._pone, _reduced=True)

    def gen(self, i: int) -> "Coefficient":
        """The field variable ``u^i`` (1-based)."""
        if not 1 <= i <= self.n:
            raise IndexError(f"field index {i} outside 1..{self.n}")
        return Coefficient(self, self.ctx.gens()[i - 1], self._pone, _reduced=True)

    def from_polys(self, num, den=None) -> "Coefficient":
        return Coefficient(self, num, self._pone if den is None else den)

    def from_dict(self, data: dict) -> "Coefficient":
        """Build a polynomial coefficient from ``{exponent tuple: rational}``."""
        poly = self.ctx.from_dict({k: _to_fmpq(v) for k, v in data.items()})
        return Coefficient(self, poly, self._pone, _reduced=True)

    def coerce(self, value) -> "Coefficient":
        if isinstance(value, Coefficient):
            if value.ring is not self:
                raise ValueError("coefficient belongs to a different ring")
            return value
        return self.const(value)


class Coefficient:
    """A reduced rational function ``numerator / denominator``.

    The denominator is monic with respect to the lexicographic monomial
    order and coprime to the numerator, so equal functions have identical
    representations.  Instances are immutable.
    """

    __slots__ = ("ring", "num", "den", "_hash")

    def __init__(self, ring: CoefficientRing, num, den, _reduced: bool = False):
        self.ring = ring
        self._hash = None
        if not _reduced:
            if den.is_zero():
                raise ZeroDivisionError("zero denominator")
            if num.is_zero():
                num, den = ring._pzero, ring._pone
            elif den.is_constant():
                c = den.leading_coefficient()
                if c != 1:
                    num = num / c
                den = ring._pone
            else:
                g = num.gcd(den)
                if not g.is_one():
                    num = num / g
                    den = den / g
                c = den.leading_coefficient()
                if c != 1:
                    num = num / c
                    den = den / c
        self.num = num
        self.den = den

    # -- predicates -----------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num.is_one() and self.den.is_one()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def is_constant(self) -> bool:
        return self.den.is_one() and self.num.is_constant()

    def constant_value(self) -> Fraction:
        """The rational value of a constant coefficient."""
        if not self.is_constant():
            raise ValueError("coefficient is not constant")
        if self.num.is_zero():
            return Fraction(0)
        return _fmpq_to_fraction(self.num.leading_coefficient())

    def depends_on(self, i: int) -> bool:
        k = i - 1
        return self.num.degrees()[k] > 0 or self.den.degrees()[k] > 0

    def variables(self) -> tuple[int, ...]:
        dn, dd = self.num.degrees(), self.den.degrees()
        return tuple(k + 1 for k in range(self.ring.n) if dn[k] > 0 or dd[k] > 0)

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other) -> "Coefficient":
        if isinstance(other, Coefficient):
            if other.ring is not self.ring:
                raise ValueError("coefficients from different rings")
            return other
        return self.ring.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        if other.num.is_zero():
            return self
        if self.num.is_zero():
            return other
        if self.den == other.den:
            if self.den.is_one():
                return Coefficient(self.ring, self.num + other.num, self.den, _reduced=True)
            return Coefficient(self.ring, self.num + other.num, self.den)
        # Henrici: only the common factor of the denominators can cancel
        g = self.den.gcd(other.den)
        if g.is_one():
            return _monic(self.ring, self.num * other.den + other.num * self.den,
                          self.den * other.den)
        a = self.den / g
        b = other.den / g
        num = self.num * b + other.num * a
        if num.is_zero():
            return self.ring.zero
        den = a * other.den
        h = num.gcd(g)
        if not h.is_one():
            num = num / h
            den = den / h
        return _monic(self.ring, num, den)

    __radd__ = __add__

    def __neg__(self):
        return Coefficient(self.ring, -self.num, self.den, _reduced=True)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.num.is_zero() or other.num.is_zero():
            return self.ring.zero
        if self.den.is_one() and other.den.is_one():
            return Coefficient(self.ring, self.num * other.num, self.den, _reduced=True)
        # cross cancellation keeps the gcds small
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        g = n1.gcd(d2)
        if not g.is_one():
            n1, d2 = n1 / g, d2 / g
        g = n2.gcd(d1)
        if not g.is_one():
            n2, d1 = n2 / g, d1 / g
        return _monic(self.ring, n1 * n2, d1 * d2)

    __rmul__ = __mul__

    def inverse(self) -> "Coefficient":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of the zero coefficient")
        return Coefficient(self.ring, self.den, self.num)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        if self.den.is_one():
            return Coefficient(self.ring, self.num ** e, self.den, _reduced=True)
        return Coefficient(self.ring, self.num ** e, self.den ** e, _reduced=True)

    def __eq__(self, other) -> bool:
        if isinstance(other, Coefficient):
            return self.ring is other.ring and self.num == other.num and self.den == other.den
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.constant_value() == other
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((tuple(self.num.to_dict().items()),
                               tuple(self.den.to_dict().items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Coefficient({self.to_string()})"

    # -- calculus -------------------------------------------------------
    def derivative(self, i: int) -> "Coefficient":
        """Partial derivative with respect to ``u^i``."""
        k = i - 1
        if self.den.is_one():
            if self.num.degrees()[k] == 0:
                return self.ring.zero
            return Coefficient(self.ring, self.num.derivative(k), self.den, _reduced=True)
        dn = self.num.derivative(k)
        dd = self.den.derivative(k)
        if dd.is_zero():
            if dn.is_zero():
                return self.ring.zero
            return Coefficient(self.ring, dn, self.den)
        return Coefficient(self.ring, dn * self.den - self.num * dd, self.den * self.den)

    def integrate(self, i: int) -> "Coefficient | None":
        """A rational antiderivative with respect to ``u^i``.

        Returns ``None`` when every antiderivative has a logarithmic part.
        The integration constant is zero.
        """
        k = i - 1
        if self.num.is_zero():
            return self.ring.zero
        if self.den.degrees()[k] == 0:
            return Coefficient(self.ring, self.num.integral(k), self.den)
        return _integrate_rational(self, i)

    # -- substitution ---------------------------------------------------
    def compose(self, args: Sequence["Coefficient"]) -> "Coefficient":
        """Substitute ``u^k -> args[k-1]`` (arguments may live in another ring)."""
        if len(args) != self.ring.n:
            raise ValueError("wrong number of substitution arguments")
        target = args[0].ring
        a, b = _evaluate_fraction(self.num, args, target)
        if self.den.is_one():
            return Coefficient(target, a, b)
        c, d = _evaluate_fraction(self.den, args, target)
        return Coefficient(target, a * d, b * c)

    def embed(self, target: CoefficientRing, index_map: Sequence[int]) -> "Coefficient":
        """Rename variables: ``u^k`` becomes ``u^{index_map[k-1]}`` of ``target``."""
        gens = target.ctx.gens()
        images = [gens[j - 1] for j in index_map]
        num = self.num.compose(*images, ctx=target.ctx)
        den = self.den.compose(*images, ctx=target.ctx)
        return Coefficient(target, num, den)

    # -- printing -------------------------------------------------------
    def to_string(self) -> str:
        """Parse-stable text form using ``u[i]`` for the field variables."""
        num = _format_poly(self.num)
        if self.den.is_one():
            return num
        den = _format_poly(self.den)
        if len(self.num.to_dict()) > 1:
            num = f"({num})"
        return f"{num}/({den})"

    def is_monomial_like(self) -> bool:
        """True when the printed form needs no parentheses in a product."""
        return self.den.is_one() and len(self.num.to_dict()) == 1

    def leading_sign(self) -> int:
        """Sign of the leading numerator coefficient (printing helper)."""
        if self.num.is_zero():
            return 0
        return 1 if self.num.leading_coefficient() > 0 else -1


def _format_monomial(exps) -> str:
    parts = []
    for k, e in enumerate(exps):
        if e == 0:
            continue
        parts.append(f"u[{k + 1}]" if e == 1 else f"u[{k + 1}]^{e}")
    return "*".join(parts)


def _format_poly(poly) -> str:
    items = sorted(poly.to_dict().items(), key=lambda kv: kv[0], reverse=True)
    if not items:
        return "0"
    out = []
    for idx, (exps, c) in enumerate(items):
        c = _fmpq_to_fraction(c)
        mono = _format_monomial(exps)
        neg = c < 0
        a = -c if neg else c
        if mono:
            body = mono if a == 1 else f"{format_rational(a)}*{mono}"
        else:
            body = format_rational(a)
        if idx == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def _monic(ring: CoefficientRing, num, den) -> "Coefficient":
    """Coprime ``num / den`` with the denominator made monic."""
    if num.is_zero():
        return ring.zero
    c = den.leading_coefficient()
    if c != 1:
        num = num / c
        den = den / c
    return Coefficient(ring, num, den, _reduced=True)


def _evaluate_fraction(poly, args: Sequence[Coefficient], target: CoefficientRing):
    """``poly(args)`` as an unreduced pair of polynomials over a common denominator."""
    if all(a.den.is_one() for a in args):
        images = [a.num for a in args]
        return poly.compose(*images, ctx=target.ctx), target._pone
    if poly.is_zero():
        return target._pzero, target._pone
    top = poly.degrees()
    cache: dict[tuple[int, int, int], object] = {}

    def power(k: int, part: int, e: int):
        key = (k, part, e)
        if key not in cache:
            base = args[k].num if part == 0 else args[k].den
            cache[key] = base ** e
        return cache[key]

    num = target._pzero
    for exps, c in poly.to_dict().items():
        term = target.ctx.constant(c)
        for k, e in enumerate(exps):
            if e:
                term = term * power(k, 0, e)
            if top[k] - e:
                term = term * power(k, 1, top[k] - e)
        num = num + term
    den = target._pone
    for k, d in enumerate(top):
        if d:
            den = den * power(k, 1, d)
    return num, den


def _integrate_rational(c: Coefficient, i: int) -> Coefficient | None:
    """Hermite-type rational integration delegated to sympy."""
    import sympy
    from sympy.integrals.rationaltools import ratint_ratpart

    ring = c.ring
    gens = sympy.symbols(" ".join(f"u{k}" for k in range(1, ring.n + 1)) + " _dummy")[:ring.n]
    x = gens[i - 1]
    others = [g for g in gens if g != x]

    def to_sympy(poly):
        return sympy.Poly.from_dict(
            {k: sympy.Rational(int(v.p), int(v.q)) for k, v in poly.to_dict().items()},
            *gens).as_expr()

    num, den = to_sympy(c.num), to_sympy(c.den)
    domain = sympy.QQ.frac_field(*others) if others else sympy.QQ
    pn = sympy.Poly(num, x, domain=domain)
    pd = sympy.Poly(den, x, domain=domain)
    quo, rem = pn.div(pd)
    poly_part = quo.integrate().as_expr()
    rat, rest = ratint_ratpart(rem, pd, x)
    if sympy.simplify(rest) != 0:
        return None
    expr = sympy.together(poly_part + rat)
    n_expr, d_expr = sympy.fraction(expr)
    return _from_sympy(ring, n_expr, gens) / _from_sympy(ring, d_expr, gens)


def _from_sympy(ring: CoefficientRing, expr, gens) -> Coefficient:
    import sympy

    poly = sympy.Poly(sympy.expand(expr), *gens, domain=sympy.QQ)
    data = {k: Fraction(int(v.p), int(v.q)) for k, v in poly.as_dict().items()}
    return ring.from_dict(data)


def iter_terms(c: Coefficient) -> Iterable[tuple[tuple[int, ...], Fraction]]:
    """Numerator terms as ``(exponents, rational)`` pairs (denominator ignored)."""
    for k, v in c.num.to_dict().items():
        yield k, _fmpq_to_fraction(v)


def sympy_symbols(n: int):
    """The sympy symbols ``u1, ..., un`` matching a coefficient ring."""
    import sympy

    return sympy.symbols(" ".join(f"u{k}" for k in range(1, n + 1)) + " _dummy")[:n]


def to_sympy(c: Coefficient, gens=None):
    """Convert a coefficient to a sympy rational expression."""
    import sympy

    gens = sympy_symbols(c.ring.n) if gens is None else gens

    def conv(poly):
        return sympy.Poly.from_dict(
            {k: sympy.Rational(int(v.p), int(v.q)) for k, v in poly.to_dict().items()},
            *gens).as_expr()

    return conv(c.num) / conv(c.den)


def from_sympy(ring: CoefficientRing, expr, gens=None) -> Coefficient:
    """Convert a sympy rational function of ``u1, ..., un`` to a coefficient.

    Raises ``ValueError`` when ``expr`` is not rational in the generators.
    """
    import sympy

    gens = sympy_symbols(ring.n) if gens is None else gens
    expr = sympy.together(sympy.sympify(expr))
    if not expr.is_rational_function(*gens):
        raise ValueError("expression is not a rational function")
    n_expr, d_expr = sympy.fraction(expr)
    try:
        return _from_sympy(ring, n_expr, gens) / _from_sympy(ring, d_expr, gens)
    except (sympy.PolynomialError, sympy.polys.polyerrors.CoercionFailed) as exc:
        raise ValueError(str(exc)) from None
