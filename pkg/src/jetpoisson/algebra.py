"""Differential polynomials on a jet space with odd variables.

A :class:`DiffPoly` is a finite sum of terms

    c(u) * eps^k * prod (u^{i,s})^p * theta_{a_1}^{s_1} ... theta_{a_m}^{s_m} * zeta^z

with ``c`` an exact rational function of the fields ``u^1..u^N``, jet
variables ``u^{i,s}`` (``s >= 1``), anticommuting variables ``theta_i^s``
and the extra odd variable ``zeta`` (``z in {0, 1}``).  The odd factors
are kept sorted by ``(i, s)`` with ``zeta`` last, which makes equality
syntactic.

Sign conventions
----------------
Partial derivatives in odd variables act from the left:
``d/dtheta (theta * m) = m``.  The extended total derivative sends
``zeta`` to ``-sum_i u^{i,1} theta_i``, so

    D(c * zeta) = D(c) * zeta - c * sum_i u^{i,1} theta_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterable, Iterator, Mapping, Sequence

from .coefficients import Coefficient, CoefficientRing, coefficient_ring
from .errors import TargetOutOfRange

__all__ = [
    "JetSpace", "DiffPoly", "DiffOp", "Grading",
    "total_derivative", "variational_derivative", "frechet", "frechet_adjoint",
    "is_total_derivative", "functional_equal", "witness",
]

PLAIN = "plain"
EXTENDED = "extended"

# A term key is (eps, jets, odds, zeta) where
#   jets  = ((i, s, p), ...) sorted, s >= 1, p != 0
#   odds  = ((i, s), ...)    sorted, strictly increasing
#   zeta  = 0 or 1
_EMPTY = ()


@dataclass(frozen=True)
class Grading:
    """Degrees of a single monomial."""

    d_x: int
    d_theta: int
    d_eps: int


@lru_cache(maxsize=None)
def _space(n: int, eps_order: int) -> "JetSpace":
    return object.__new__(JetSpace)._init(n, eps_order)


class JetSpace:
    """Jet space of ``n`` fields with ``eps`` truncated above ``eps_order``.

    Instances are cached, so ``JetSpace(1, 6) is JetSpace(1, 6)``.
    """

    def __new__(cls, n: int, eps_order: int = 6):
        if n < 1:
            raise ValueError("the number of fields must be positive")
        if eps_order < 0:
            raise ValueError("eps_order must be non-negative")
        return _space(int(n), int(eps_order))

    def _init(self, n: int, eps_order: int) -> "JetSpace":
        self.n = n
        self.eps_order = eps_order
        self.ring: CoefficientRing = coefficient_ring(n)
        self.zero = DiffPoly(self, {})
        self.one = DiffPoly(self, {(0, _EMPTY, _EMPTY, 0): self.ring.one})
        return self

    def __reduce__(self):
        return (JetSpace, (self.n, self.eps_order))

    def __repr__(self) -> str:
        return f"JetSpace(n={self.n}, eps_order={self.eps_order})"

    def with_eps_order(self, eps_order: int) -> "JetSpace":
        return JetSpace(self.n, eps_order)

    # -- generators -------------------------------------------------------
    def _check_field(self, i: int) -> None:
        if not 1 <= i <= self.n:
            raise TargetOutOfRange(f"field index {i} outside 1..{self.n}")

    def const(self, value) -> "DiffPoly":
        c = self.ring.coerce(value)
        if c.is_zero():
            return self.zero
        return DiffPoly(self, {(0, _EMPTY, _EMPTY, 0): c})

    def coefficient(self, c: Coefficient) -> "DiffPoly":
        return self.const(c)

    def u(self, i: int, s: int = 0, power: int = 1) -> "DiffPoly":
        """The jet variable ``u^{i,s}`` (``s = 0`` gives the field itself)."""
        self._check_field(i)
        if s < 0:
            raise ValueError("jet order must be non-negative")
        if s == 0:
            return DiffPoly(self, {(0, _EMPTY, _EMPTY, 0): self.ring.gen(i) ** power})
        return DiffPoly(self, {(0, ((i, s, power),), _EMPTY, 0): self.ring.one})

    def theta(self, i: int, s: int = 0) -> "DiffPoly":
        self._check_field(i)
        if s < 0:
            raise ValueError("jet order must be non-negative")
        return DiffPoly(self, {(0, _EMPTY, ((i, s),), 0): self.ring.one})

    def zeta(self) -> "DiffPoly":
        return DiffPoly(self, {(0, _EMPTY, _EMPTY, 1): self.ring.one})

    def eps(self, power: int = 1) -> "DiffPoly":
        if power > self.eps_order:
            return self.zero
        return DiffPoly(self, {(power, _EMPTY, _EMPTY, 0): self.ring.one})

    def monomial(self, coefficient, key) -> "DiffPoly":
        c = self.ring.coerce(coefficient)
        if c.is_zero() or key[0] > self.eps_order:
            return self.zero
        return DiffPoly(self, {key: c})

    def flank(self) -> tuple["DiffPoly", ...]:
        """The default tail flank ``(u^{1,1}, ..., u^{N,1})``."""
        return tuple(self.u(i, 1) for i in range(1, self.n + 1))


# -- key helpers --------------------------------------------------------------

def _merge_jets(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    out = []
    ia = ib = 0
    la, lb = len(a), len(b)
    while ia < la and ib < lb:
        xa, xb = a[ia], b[ib]
        ka, kb = (xa[0], xa[1]), (xb[0], xb[1])
        if ka < kb:
            out.append(xa)
            ia += 1
        elif kb < ka:
            out.append(xb)
            ib += 1
        else:
            p = xa[2] + xb[2]
            if p:
                out.append((xa[0], xa[1], p))
            ia += 1
            ib += 1
    out.extend(a[ia:])
    out.extend(b[ib:])
    return tuple(out)


def _merge_odds(a: tuple, b: tuple):
    """Return ``(sign, merged)`` for the product of two sorted odd words, or None."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    out = []
    inversions = 0
    ia = ib = 0
    la, lb = len(a), len(b)
    while ia < la and ib < lb:
        if a[ia] < b[ib]:
            out.append(a[ia])
            ia += 1
        elif b[ib] < a[ia]:
            out.append(b[ib])
            inversions += la - ia
            ib += 1
        else:
            return None
    out.extend(a[ia:])
    out.extend(b[ib:])
    return (-1 if inversions & 1 else 1), tuple(out)


def _mul_keys(k1, k2, emax: int):
    e = k1[0] + k2[0]
    if e > emax:
        return None
    z1, z2 = k1[3], k2[3]
    if z1 and z2:
        return None
    merged = _merge_odds(k1[2], k2[2])
    if merged is None:
        return None
    sign, odds = merged
    if z1 and len(k2[2]) & 1:
        sign = -sign
    return sign, (e, _merge_jets(k1[1], k2[1]), odds, z1 | z2)


def _replace_jet(jets: tuple, idx: int, delta_new) -> tuple:
    """Lower the exponent of jets[idx] by one and multiply by ``delta_new``."""
    i, s, p = jets[idx]
    if p == 1:
        rest = jets[:idx] + jets[idx + 1:]
    else:
        rest = jets[:idx] + ((i, s, p - 1),) + jets[idx + 1:]
    return _merge_jets(rest, (delta_new,))


def _append_odd(odds: tuple, v: tuple):
    """Right-multiply a sorted odd word by ``v``; returns ``(sign, word)`` or None."""
    if v in odds:
        return None
    larger = 0
    pos = len(odds)
    for k in range(len(odds) - 1, -1, -1):
        if odds[k] > v:
            larger += 1
            pos = k
        else:
            break
    return (-1 if larger & 1 else 1), odds[:pos] + (v,) + odds[pos:]


def _acc(d: dict, key, c: Coefficient) -> None:
    if key in d:
        d[key] = d[key] + c
    else:
        d[key] = c


def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if not v.is_zero()}


class DiffPoly:
    """Immutable element of the jet algebra extended by ``theta``, ``zeta`` and ``eps``."""

    __slots__ = ("space", "terms", "_hash")

    def __init__(self, space: JetSpace, terms: Mapping, _clean_terms: bool = True):
        self.space = space
        if _clean_terms:
            emax = space.eps_order
            terms = {k: v for k, v in terms.items() if not v.is_zero() and k[0] <= emax}
        self.terms = terms
        self._hash = None

    # -- basic protocol ---------------------------------------------------
    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator:
        return iter(self.terms.items())

    def __eq__(self, other) -> bool:
        if isinstance(other, DiffPoly):
            return self.space is other.space and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == self.space.const(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __repr__(self) -> str:
        from .printing import format_diffpoly
        return f"DiffPoly({format_diffpoly(self)})"

    def __str__(self) -> str:
        from .printing import format_diffpoly
        return format_diffpoly(self)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "DiffPoly":
        if isinstance(other, DiffPoly):
            if other.space is not self.space:
                raise ValueError(f"mixing {self.space} and {other.space}")
            return other
        if isinstance(other, Coefficient):
            return self.space.coefficient(other)
        if isinstance(other, (int, Fraction)):
            return self.space.const(other)
        raise TypeError(f"cannot combine DiffPoly with {type(other).__name__}")

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if not other.terms:
            return self
        if not self.terms:
            return other
        d = dict(self.terms)
        for k, v in other.terms.items():
            _acc(d, k, v)
        return DiffPoly(self.space, _clean(d), False)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly(self.space, {k: -v for k, v in self.terms.items()}, False)

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c) -> "DiffPoly":
        """Multiply by a coefficient function or rational constant."""
        c = self.space.ring.coerce(c)
        if c.is_zero():
            return self.space.zero
        return DiffPoly(self.space, {k: v * c for k, v in self.terms.items()}, False)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Coefficient)):
            return self.scale(other)
        if isinstance(other, DiffOp):
            return NotImplemented
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if not self.terms or not other.terms:
            return self.space.zero
        emax = self.space.eps_order
        d: dict = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                r = _mul_keys(k1, k2, emax)
                if r is None:
                    continue
                sign, key = r
                c = c1 * c2
                _acc(d, key, c if sign > 0 else -c)
        return DiffPoly(self.space, _clean(d), False)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, Coefficient)):
            return self.scale(other)
        return self._coerce(other) * self

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative powers of differential polynomials are not defined")
        result = self.space.one
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(Fraction(1) / Fraction(other))
        if isinstance(other, Coefficient):
            return self.scale(other.inverse())
        if isinstance(other, DiffPoly):
            c = other.as_coefficient()
            if c is None:
                raise ValueError("division is only defined by pure coefficient functions")
            return self.scale(c.inverse())
        return NotImplemented

    # -- inspection -------------------------------------------------------
    def as_coefficient(self) -> Coefficient | None:
        """The coefficient if ``self`` is a pure function of the fields, else None."""
        if not self.terms:
            return self.space.ring.zero
        if len(self.terms) == 1:
            (k, c), = self.terms.items()
            if k == (0, _EMPTY, _EMPTY, 0):
                return c
        return None

    def is_constant(self) -> bool:
        c = self.as_coefficient()
        return c is not None and c.is_constant()

    def has_zeta(self) -> bool:
        return any(k[3] for k in self.terms)

    def has_theta(self) -> bool:
        return any(k[2] or k[3] for k in self.terms)

    def has_jets(self) -> bool:
        return any(k[1] for k in self.terms)

    def is_even_function(self) -> bool:
        """True when no odd variable occurs."""
        return not self.has_theta()

    def eps_degree(self) -> int:
        return max((k[0] for k in self.terms), default=-1)

    def eps_part(self, k: int) -> "DiffPoly":
        """Coefficient of ``eps^k`` (returned with ``eps``-degree zero)."""
        return DiffPoly(self.space, {(0,) + key[1:]: c for key, c in self.terms.items()
                                     if key[0] == k}, False)

    def eps_parts(self) -> dict[int, "DiffPoly"]:
        out: dict[int, dict] = {}
        for key, c in self.terms.items():
            out.setdefault(key[0], {})[(0,) + key[1:]] = c
        return {k: DiffPoly(self.space, v, False) for k, v in sorted(out.items())}

    def shift_eps(self, k: int) -> "DiffPoly":
        """Multiply by ``eps^k``."""
        emax = self.space.eps_order
        return DiffPoly(self.space, {(key[0] + k,) + key[1:]: c for key, c in self.terms.items()
                                     if key[0] + k <= emax}, False)

    def truncate(self, eps_order: int) -> "DiffPoly":
        return DiffPoly(self.space, {k: c for k, c in self.terms.items() if k[0] <= eps_order},
                        False)

    def theta_part(self, degree: int) -> "DiffPoly":
        """Component of theta-degree ``degree`` (zeta counts as one)."""
        return DiffPoly(self.space, {k: c for k, c in self.terms.items()
                                     if len(k[2]) + k[3] == degree}, False)

    def theta_degrees(self) -> set[int]:
        return {len(k[2]) + k[3] for k in self.terms}

    def gradings(self) -> set[Grading]:
        return {key_grading(k) for k in self.terms}

    def max_order(self) -> int:
        """Highest jet order of any variable (0 if only fields and theta^0)."""
        m = 0
        for k in self.terms:
            for (_, s, _) in k[1]:
                m = max(m, s)
            for (_, s) in k[2]:
                m = max(m, s)
        return m

    def jet_orders(self, i: int) -> int:
        """Highest ``s`` with ``u^{i,s}`` present (0 if none)."""
        m = 0
        for k in self.terms:
            for (j, s, _) in k[1]:
                if j == i and s > m:
                    m = s
        return m

    def theta_orders(self, i: int) -> int:
        m = -1
        for k in self.terms:
            for (j, s) in k[2]:
                if j == i and s > m:
                    m = s
        return m

    def zeta_split(self) -> tuple["DiffPoly", "DiffPoly"]:
        """Return ``(a, b)`` with ``self = a + b * zeta`` and ``a, b`` zeta-free."""
        a, b = {}, {}
        for k, c in self.terms.items():
            if k[3]:
                b[k[:3] + (0,)] = c
            else:
                a[k] = c
        return DiffPoly(self.space, a, False), DiffPoly(self.space, b, False)

    def map_coefficients(self, fn) -> "DiffPoly":
        return DiffPoly(self.space, {k: fn(c) for k, c in self.terms.items()})

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda kv: term_sort_key(kv[0]))

    # -- calculus shortcuts ----------------------------------------------
    def d(self, mode: str = EXTENDED) -> "DiffPoly":
        return total_derivative(self, mode)

    def partial_u(self, i: int, s: int = 0) -> "DiffPoly":
        return partial_u(self, i, s)

    def partial_theta(self, i: int, s: int = 0) -> "DiffPoly":
        return partial_theta(self, i, s)

    def partial_zeta(self) -> "DiffPoly":
        return partial_zeta(self)


def key_grading(k) -> Grading:
    dx = sum(s * p for (_, s, p) in k[1]) + sum(s for (_, s) in k[2])
    return Grading(dx, len(k[2]) + k[3], k[0])


def term_sort_key(k):
    return (k[0], len(k[2]) + k[3], k[2], k[3], tuple((i, s, -p) for (i, s, p) in k[1]))


# -- derivatives ----------------------------------------------------------------

def _total_derivative_terms(space: JetSpace, terms: Mapping, extended: bool,
                            fields: frozenset | None) -> dict:
    d: dict = {}
    n = space.n
    field_range = range(1, n + 1) if fields is None else sorted(fields)
    for key, c in terms.items():
        e, jets, odds, z = key
        # coefficient part: sum_i dc/du^i * u^{i,1}
        for i in c.variables():
            if fields is not None and i not in fields:
                continue
            dc = c.derivative(i)
            if not dc.is_zero():
                _acc(d, (e, _merge_jets(jets, ((i, 1, 1),)), odds, z), dc)
        for idx, (i, s, p) in enumerate(jets):
            if fields is not None and i not in fields:
                continue
            nk = (e, _replace_jet(jets, idx, (i, s + 1, 1)), odds, z)
            _acc(d, nk, c * p if p != 1 else c)
        for idx, (i, s) in enumerate(odds):
            if fields is not None and i not in fields:
                continue
            nv = (i, s + 1)
            if idx + 1 < len(odds) and odds[idx + 1] == nv:
                continue
            _acc(d, (e, jets, odds[:idx] + (nv,) + odds[idx + 1:], z), c)
        if z and extended:
            for i in field_range:
                r = _append_odd(odds, (i, 0))
                if r is None:
                    continue
                sign, nodds = r
                _acc(d, (e, _merge_jets(jets, ((i, 1, 1),)), nodds, 0), -c if sign > 0 else c)
    return _clean(d)


def total_derivative(f: DiffPoly, mode: str = EXTENDED) -> DiffPoly:
    """Total x-derivative.

    ``mode='plain'`` treats ``zeta`` as a constant; ``mode='extended'``
    additionally maps ``zeta`` to ``-sum_i u^{i,1} theta_i``.
    """
    if mode not in (PLAIN, EXTENDED):
        raise ValueError(f"unknown mode {mode!r}")
    return DiffPoly(f.space, _total_derivative_terms(f.space, f.terms, mode == EXTENDED, None),
                    False)


def restricted_derivative(f: DiffPoly, fields: Iterable[int]) -> DiffPoly:
    """Plain total derivative acting only on the listed fields."""
    return DiffPoly(f.space, _total_derivative_terms(f.space, f.terms, False, frozenset(fields)),
                    False)


def iterated_derivative(f: DiffPoly, k: int, mode: str = EXTENDED) -> DiffPoly:
    for _ in range(k):
        f = total_derivative(f, mode)
    return f


def partial_u(f: DiffPoly, i: int, s: int = 0) -> DiffPoly:
    """Partial derivative with respect to ``u^{i,s}``."""
    f.space._check_field(i)
    d: dict = {}
    if s == 0:
        for key, c in f.terms.items():
            if c.depends_on(i):
                _acc(d, key, c.derivative(i))
    else:
        for key, c in f.terms.items():
            jets = key[1]
            for idx, (j, t, p) in enumerate(jets):
                if j == i and t == s:
                    if p == 1:
                        nj = jets[:idx] + jets[idx + 1:]
                    else:
                        nj = jets[:idx] + ((j, t, p - 1),) + jets[idx + 1:]
                    _acc(d, (key[0], nj, key[2], key[3]), c * p if p != 1 else c)
                    break
    return DiffPoly(f.space, _clean(d), False)


def partial_theta(f: DiffPoly, i: int, s: int = 0) -> DiffPoly:
    """Left partial derivative with respect to ``theta_i^s``."""
    f.space._check_field(i)
    v = (i, s)
    d: dict = {}
    for key, c in f.terms.items():
        odds = key[2]
        if v in odds:
            p = odds.index(v)
            d[(key[0], key[1], odds[:p] + odds[p + 1:], key[3])] = -c if p & 1 else c
    return DiffPoly(f.space, d, False)


def partial_zeta(f: DiffPoly) -> DiffPoly:
    """Left partial derivative with respect to ``zeta``."""
    d: dict = {}
    for key, c in f.terms.items():
        if key[3]:
            d[(key[0], key[1], key[2], 0)] = -c if len(key[2]) & 1 else c
    return DiffPoly(f.space, d, False)


def variational_derivative(f: DiffPoly, target: str, i: int | None = None) -> DiffPoly:
    """Variational derivative ``sum_s (-D)^s d f / d target^{(s)}``.

    Parameters
    ----------
    f : DiffPoly
        Density.  Densities containing ``zeta`` are allowed; the extended
        total derivative is used throughout, which agrees with the plain
        one on zeta-free input.
    target : {'u', 'theta', 'zeta'}
        Kind of variable.  For ``'zeta'`` the plain partial derivative is
        returned.
    i : int
        Field index (1-based) for ``'u'`` and ``'theta'``.
    """
    if target == "zeta":
        return partial_zeta(f)
    if i is None or not 1 <= i <= f.space.n:
        raise TargetOutOfRange(f"field index {i} outside 1..{f.space.n}")
    if target == "u":
        top = f.jet_orders(i)
        part = lambda s: partial_u(f, i, s)  # noqa: E731
    elif target == "theta":
        top = f.theta_orders(i)
        if top < 0:
            return f.space.zero
        part = lambda s: partial_theta(f, i, s)  # noqa: E731
    else:
        raise ValueError(f"unknown target {target!r}")
    r = part(top)
    for s in range(top - 1, -1, -1):
        r = part(s) - total_derivative(r, EXTENDED)
    return r


def euler_u(f: DiffPoly) -> tuple[DiffPoly, ...]:
    return tuple(variational_derivative(f, "u", i) for i in range(1, f.space.n + 1))


def euler_theta(f: DiffPoly) -> tuple[DiffPoly, ...]:
    return tuple(variational_derivative(f, "theta", i) for i in range(1, f.space.n + 1))


# -- exactness --------------------------------------------------------------------

def _variables_of_order(f: DiffPoly, fields) -> set:
    """All (order, kind, field) triples present; kind 1 = jet, 0 = theta."""
    out = set()
    for key in f.terms:
        for (i, s, _) in key[1]:
            if i in fields:
                out.add((s, 1, i))
        for (i, s) in key[2]:
            if i in fields:
                out.add((s, 0, i))
    return out


def _max_order_in(f: DiffPoly, fields) -> int:
    m = -1
    for key in f.terms:
        for (i, s, _) in key[1]:
            if i in fields and s > m:
                m = s
        for (i, s) in key[2]:
            if i in fields and s > m:
                m = s
    return m


def _integrate_jet(h: DiffPoly, i: int, s: int) -> DiffPoly:
    """Antiderivative of ``h`` in ``u^{i,s}`` (``s >= 1``), polynomial in that variable."""
    d: dict = {}
    for key, c in h.terms.items():
        jets = key[1]
        p = 0
        for (j, t, q) in jets:
            if j == i and t == s:
                p = q
                break
        if p == -1:
            raise ArithmeticError("logarithmic antiderivative")
        nj = _merge_jets(jets, ((i, s, 1),))
        _acc(d, (key[0], nj, key[2], key[3]), c / (p + 1))
    return DiffPoly(h.space, _clean(d), False)


def _integrate_field(h: DiffPoly, i: int) -> DiffPoly | None:
    d: dict = {}
    for key, c in h.terms.items():
        ic = c.integrate(i)
        if ic is None:
            return None
        _acc(d, key, ic)
    return DiffPoly(h.space, _clean(d), False)


def witness(f: DiffPoly, fields: Iterable[int] | None = None) -> DiffPoly | None:
    """Return ``g`` with ``D g = f`` (plain total derivative) or ``None``.

    Parameters
    ----------
    f : DiffPoly
        Density.  ``zeta`` is treated as a constant.
    fields : iterable of int, optional
        Restrict the total derivative to these fields; the others are
        parameters.  Used for tensor products of jet spaces.

    Notes
    -----
    Graded descent: take the highest-order variable ``v^{(M)}``; an exact
    density is linear in it with a coefficient free of order ``>= M``
    variables; integrate that coefficient in ``v^{(M-1)}``, subtract the
    derivative and repeat.  The integration constant is always zero.
    """
    space = f.space
    fieldset = frozenset(range(1, space.n + 1)) if fields is None else frozenset(fields)
    rest = f
    g = space.zero
    done: set = set()
    while rest.terms:
        present = _variables_of_order(rest, fieldset)
        if not present:
            return None
        top = max(present)
        M, kind, i = top
        if M == 0 or top in done:
            return None
        if kind == 1:
            h = partial_u(rest, i, M)
            if _max_order_in(h, fieldset) >= M:
                return None
            if M > 1:
                try:
                    piece = _integrate_jet(h, i, M - 1)
                except ArithmeticError:
                    return None
            else:
                piece = _integrate_field(h, i)
                if piece is None:
                    return None
        else:
            h = partial_theta(rest, i, M)
            if _max_order_in(h, fieldset) >= M:
                return None
            if any((i, M - 1) in key[2] for key in h.terms):
                return None
            piece = DiffPoly(space, {(0, _EMPTY, ((i, M - 1),), 0): space.ring.one}, False) * h
        done.add(top)
        g = g + piece
        rest = rest - DiffPoly(space, _total_derivative_terms(space, piece.terms, False,
                                                              None if fields is None else fieldset),
                               False)
        if any(top == v for v in _variables_of_order(rest, fieldset)):
            return None
    check = DiffPoly(space, _total_derivative_terms(space, g.terms, False,
                                                    None if fields is None else fieldset), False)
    if check != f:
        return None
    return g


def is_total_derivative(f: DiffPoly) -> DiffPoly | None:
    """Witness ``g`` with plain ``D g = f``, or ``None`` when ``f`` is not exact."""
    return witness(f)


def _u_theta(space: JetSpace) -> DiffPoly:
    """``sum_i u^{i,1} theta_i``, the image of ``-zeta`` under ``D``."""
    d = {}
    for i in range(1, space.n + 1):
        d[(0, ((i, 1, 1),), ((i, 0),), 0)] = space.ring.one
    return DiffPoly(space, d, False)


def exact_primitive(f: DiffPoly) -> DiffPoly | None:
    """Return ``h`` in the zeta-extension with extended ``D h = f``, or None.

    This is the constructive form of :func:`functional_equal`.
    """
    space = f.space
    a, b = f.zeta_split()
    c = witness(b) if b.terms else space.zero
    if c is None:
        return None
    U = _u_theta(space)
    r = a + c * U
    w = witness(r) if r.terms else space.zero
    if w is None:
        # the primitive of b is unique only up to a constant series kappa(eps)
        t = variational_derivative(r.theta_part(1), "theta", 1)
        kappa = {}
        for key, coef in t.terms.items():
            if key[1:] == (((1, 1, 1),), _EMPTY, 0) and coef.is_constant():
                kappa[(key[0], _EMPTY, _EMPTY, 0)] = -coef
        if not kappa:
            return None
        k = DiffPoly(space, kappa, False)
        r = r + k * U
        w = witness(r)
        if w is None:
            return None
        c = c + k
    return w + c * space.zeta()


def functional_equal(f: DiffPoly, g: DiffPoly) -> bool:
    """Decide whether ``f - g`` lies in the image of the extended total derivative."""
    diff = f - g
    if not diff.terms:
        return True
    return exact_primitive(diff) is not None


# -- scalar differential operators ----------------------------------------------

class DiffOp:
    """A scalar differential operator ``sum_s a_s D^s`` in normal form.

    Coefficients are :class:`DiffPoly` objects (even, zeta-free in all
    uses of this package) placed to the left of the powers of ``D``.
    """

    __slots__ = ("space", "coeffs", "_hash")

    def __init__(self, space: JetSpace, coeffs: Mapping[int, DiffPoly]):
        self.space = space
        self.coeffs = {s: c for s, c in coeffs.items() if c.terms}
        self._hash = None

    @classmethod
    def zero(cls, space: JetSpace) -> "DiffOp":
        return cls(space, {})

    @classmethod
    def identity(cls, space: JetSpace) -> "DiffOp":
        return cls(space, {0: space.one})

    @classmethod
    def mult(cls, f: DiffPoly) -> "DiffOp":
        return cls(f.space, {0: f})

    @classmethod
    def dx(cls, space: JetSpace, power: int = 1) -> "DiffOp":
        return cls(space, {power: space.one})

    def is_zero(self) -> bool:
        return not self.coeffs

    def order(self) -> int:
        return max(self.coeffs, default=-1)

    def coeff(self, s: int) -> DiffPoly:
        return self.coeffs.get(s, self.space.zero)

    def __eq__(self, other) -> bool:
        if isinstance(other, DiffOp):
            return self.space is other.space and self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.coeffs.items()))
        return self._hash

    def __repr__(self) -> str:
        from .printing import format_diffop
        return f"DiffOp({format_diffop(self)})"

    def __str__(self) -> str:
        from .printing import format_diffop
        return format_diffop(self)

    def __add__(self, other: "DiffOp") -> "DiffOp":
        if isinstance(other, DiffPoly):
            other = DiffOp.mult(other)
        if not isinstance(other, DiffOp):
            return NotImplemented
        d = dict(self.coeffs)
        for s, c in other.coeffs.items():
            d[s] = d[s] + c if s in d else c
        return DiffOp(self.space, d)

    __radd__ = __add__

    def __neg__(self) -> "DiffOp":
        return DiffOp(self.space, {s: -c for s, c in self.coeffs.items()})

    def __sub__(self, other: "DiffOp") -> "DiffOp":
        if isinstance(other, DiffPoly):
            other = DiffOp.mult(other)
        return self + (-other)

    def left_mul(self, f) -> "DiffOp":
        """The operator ``f * self`` for a function ``f``."""
        if isinstance(f, DiffPoly):
            return DiffOp(self.space, {s: f * c for s, c in self.coeffs.items()})
        return DiffOp(self.space, {s: c * f for s, c in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, DiffOp):
            return self.compose(other)
        if isinstance(other, DiffPoly):
            return self.compose(DiffOp.mult(other))
        if isinstance(other, (int, Fraction, Coefficient)):
            return self.left_mul(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (DiffPoly, int, Fraction, Coefficient)):
            return self.left_mul(other)
        return NotImplemented

    def __pow__(self, k: int) -> "DiffOp":
        result = DiffOp.identity(self.space)
        for _ in range(k):
            result = result.compose(self)
        return result

    def compose(self, other: "DiffOp") -> "DiffOp":
        """Operator composition ``self o other`` in normal form."""
        if not self.coeffs or not other.coeffs:
            return DiffOp.zero(self.space)
        top = self.order()
        derivs: dict[int, list[DiffPoly]] = {}
        for t, b in other.coeffs.items():
            seq = [b]
            for _ in range(top):
                seq.append(total_derivative(seq[-1], EXTENDED))
            derivs[t] = seq
        d: dict[int, DiffPoly] = {}
        for m, a in self.coeffs.items():
            for t, seq in derivs.items():
                for k in range(m + 1):
                    term = seq[k]
                    if not term.terms:
                        continue
                    prod = a * term
                    if k and comb(m, k) != 1:
                        prod = prod.scale(comb(m, k))
                    s = m + t - k
                    d[s] = d[s] + prod if s in d else prod
        return DiffOp(self.space, d)

    def apply(self, f: DiffPoly) -> DiffPoly:
        """Apply to a function; ``D`` acts as the extended total derivative."""
        if not self.coeffs:
            return self.space.zero
        top = self.order()
        total = self.space.zero
        g = f
        for s in range(top + 1):
            if s in self.coeffs:
                total = total + self.coeffs[s] * g
            if s < top:
                g = total_derivative(g, EXTENDED)
        return total

    def __call__(self, f: DiffPoly) -> DiffPoly:
        return self.apply(f)

    def adjoint(self) -> "DiffOp":
        """Formal adjoint ``sum_s (-D)^s o a_s`` in normal form."""
        d: dict[int, DiffPoly] = {}
        for s, a in self.coeffs.items():
            seq = [a]
            for _ in range(s):
                seq.append(total_derivative(seq[-1], EXTENDED))
            sign = -1 if s & 1 else 1
            for k in range(s + 1):
                if not seq[k].terms:
                    continue
                c = seq[k].scale(sign * comb(s, k))
                r = s - k
                d[r] = d[r] + c if r in d else c
        return DiffOp(self.space, d)

    def map_coefficients(self, fn) -> "DiffOp":
        return DiffOp(self.space, {s: fn(c) for s, c in self.coeffs.items()})

    def truncate(self, eps_order: int) -> "DiffOp":
        return self.map_coefficients(lambda c: c.truncate(eps_order))

    def eps_part(self, k: int) -> "DiffOp":
        return self.map_coefficients(lambda c: c.eps_part(k))

    def divide_right(self) -> tuple["DiffOp", DiffPoly]:
        """Return ``(Y, a)`` with ``self = Y o D + a``."""
        q = DiffOp(self.space, {s - 1: c for s, c in self.coeffs.items() if s >= 1})
        return q, self.coeff(0)

    def divide_left(self) -> tuple["DiffOp", DiffPoly]:
        """Return ``(Z, b)`` with ``self = D o Z + b`` (``b`` a function)."""
        m = self.order()
        if m <= 0:
            return DiffOp.zero(self.space), self.coeff(0)
        z: dict[int, DiffPoly] = {m - 1: self.coeff(m)}
        for s in range(m - 1, 0, -1):
            z[s - 1] = self.coeff(s) - total_derivative(z[s], EXTENDED)
        rem = self.coeff(0) - total_derivative(z[0], EXTENDED)
        return DiffOp(self.space, z), rem


# -- Frechet derivative --------------------------------------------------------

def frechet(F: DiffPoly) -> tuple[DiffOp, ...]:
    """Row ``(l_F)_i = sum_s dF/du^{i,s} D^s`` of the linearisation of ``F``."""
    space = F.space
    row = []
    for i in range(1, space.n + 1):
        top = F.jet_orders(i)
        row.append(DiffOp(space, {s: partial_u(F, i, s) for s in range(top + 1)}))
    return tuple(row)


def frechet_adjoint(F: DiffPoly) -> tuple[DiffOp, ...]:
    """Column ``(l_F^*)_i = sum_s (-D)^s o dF/du^{i,s}`` in normal form."""
    return tuple(op.adjoint() for op in frechet(F))


def linear_combination(pairs: Sequence[tuple[DiffPoly, DiffPoly]], space: JetSpace) -> DiffPoly:
    total = space.zero
    for a, b in pairs:
        total = total + a * b
    return total
