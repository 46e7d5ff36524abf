"""Miura-reciprocal transformations and their action.

A substitution ``dy = B dx``, ``w^i = Q^i`` is stored with ``B`` and ``Q``
written in the old coordinates ``(x, u^{i,s})``.  Both are eps-series whose
``eps^k`` part has differential degree ``k``.  New and old coordinates
share the names ``u[i]``: a function "in new coordinates" is a function of
the ``y``-jets of ``w``, printed with the same symbols.

Push-forwards follow

    Y = (1/B) Dm(X),    Xi = Dm^*(Psi),    P_y = (1/B) Dm o P_x o Dm^*,

with ``Dm^j_i = B (l_{Q^j})_i - D(Q^j) o D^{-1} o (l_B)_i``.  By default the
result is presented in the old dependent variables with ``y``-derivatives
(``u[i,s]`` then stands for ``d^s u^i / dy^s``); ``reexpress=True`` rewrites
it in the new variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Sequence

from .algebra import (EXTENDED, DiffOp, DiffPoly, JetSpace, frechet, key_grading,
                      total_derivative)
from .coefficients import Coefficient, from_sympy, sympy_symbols, to_sympy
from .errors import (EpsOrderMismatch, InvalidSubstitution, NotHomogeneous, NotInvertible,
                     NotSkew, ParseError, ShapeError, SingularMetric)
from .linalg import determinant, inverse, matmul
from .nonlocal_calculus import NonlocalExpression, scale_second_copy, solve_tail, tail_tensors
from .operators import LocalOperator, WNLOperator, is_skew

__all__ = ["Substitution", "ProjectiveMap", "dee", "prolong_jet", "pullback", "compose",
           "invert", "change_of_jet_coordinates", "push_vector", "push_covector",
           "push_bivector", "push_trivector", "push_density", "ferapontov_pavlov",
           "projective_push", "series_inverse", "parse_substitution_text",
           "read_substitution_file", "parse_metric_text", "read_metric_file", "MetricData"]


def series_inverse(B: DiffPoly) -> DiffPoly:
    """``1/B`` as an eps-series; the ``eps^0`` part must be a nonzero function of ``u``."""
    sp = B.space
    b0 = B.eps_part(0).as_coefficient()
    if b0 is None or b0.is_zero():
        raise InvalidSubstitution("the eps^0 part of B must be a nonzero function of u")
    inv0 = b0.inverse()
    r = (B - B.eps_part(0)).scale(inv0)
    out = sp.one
    power = sp.one
    for _ in range(sp.eps_order):
        power = -(power * r)
        if power.is_zero():
            break
        out = out + power
    return out.scale(inv0)


def _check_graded(f: DiffPoly, what: str) -> None:
    for key in f.terms:
        if key[2] or key[3]:
            raise InvalidSubstitution(f"{what} must not contain theta or zeta")
        g = key_grading(key)
        if g.d_x != g.d_eps or any(p < 0 for (_, _, p) in key[1]):
            raise InvalidSubstitution(
                f"the eps^{g.d_eps} part of {what} must be a differential polynomial of "
                f"degree {g.d_eps}")


@dataclass(frozen=True)
class ProjectiveMap:
    """Projective reciprocal map ``dy = A^0 dx``, ``w^i = A^i / A^0``.

    ``matrix[i][j]`` is ``a^i_j`` with ``A^i = a^i_0 + sum_j a^i_j u^j``.
    """

    matrix: tuple

    def __post_init__(self):
        m = tuple(tuple(Fraction(x) for x in row) for row in self.matrix)
        n = len(m)
        if n < 2 or any(len(r) != n for r in m):
            raise InvalidSubstitution("a projective matrix must be square of size N + 1")
        if determinant([list(r) for r in m]) == 0:
            raise NotInvertible("the projective matrix is singular")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return len(self.matrix) - 1

    @classmethod
    def identity(cls, n: int) -> "ProjectiveMap":
        return cls(tuple(tuple(1 if i == j else 0 for j in range(n + 1)) for i in range(n + 1)))

    def then(self, other: "ProjectiveMap") -> "ProjectiveMap":
        """Apply ``self`` first and ``other`` second."""
        return ProjectiveMap(tuple(map(tuple, matmul(other.matrix, self.matrix))))

    def inverse(self) -> "ProjectiveMap":
        inv = inverse([list(r) for r in self.matrix], Fraction(1), Fraction(0))
        return ProjectiveMap(tuple(map(tuple, inv)))

    def component(self, space: JetSpace, i: int) -> DiffPoly:
        row = self.matrix[i]
        out = space.const(row[0])
        for j in range(1, self.n + 1):
            out = out + space.u(j).scale(row[j])
        return out

    def substitution(self, space: JetSpace) -> "Substitution":
        if space.n != self.n:
            raise InvalidSubstitution("projective matrix size does not match N")
        A0 = self.component(space, 0).as_coefficient()
        if A0.is_zero():
            raise InvalidSubstitution("the denominator A^0 vanishes identically")
        Q = tuple(space.coefficient(self.component(space, i).as_coefficient() / A0)
                  for i in range(1, self.n + 1))
        return Substitution(space, space.coefficient(A0), Q, projective=self)


class Substitution:
    """A Miura-reciprocal transformation ``dy = B dx``, ``w^i = Q^i``."""

    def __init__(self, space: JetSpace, B: DiffPoly, Q: Sequence[DiffPoly],
                 projective: ProjectiveMap | None = None):
        Q = tuple(Q)
        if len(Q) != space.n:
            raise InvalidSubstitution(f"expected {space.n} components Q, got {len(Q)}")
        for f in (B,) + Q:
            if f.space is not space:
                raise EpsOrderMismatch("B and Q must live in the substitution's jet space")
        _check_graded(B, "B")
        for i, q in enumerate(Q):
            _check_graded(q, f"Q[{i + 1}]")
        b0 = B.eps_part(0).as_coefficient()
        if b0 is None or b0.is_zero():
            raise InvalidSubstitution("the eps^0 part of B must be nonzero")
        k0 = [q.eps_part(0).as_coefficient() for q in Q]
        if any(k is None for k in k0):
            raise InvalidSubstitution("the eps^0 part of Q must be a function of u")
        jac = [[k.derivative(j) for j in range(1, space.n + 1)] for k in k0]
        if determinant(jac).is_zero():
            raise NotInvertible("the Jacobian of the eps^0 part of Q is degenerate")
        self.space = space
        self.B = B
        self.Q = Q
        self.projective = projective
        self.B0 = b0
        self.K0 = tuple(k0)
        self.jacobian = jac
        self._inv_B: DiffPoly | None = None
        self._jets: dict = {}
        self._inverse: Substitution | None = None

    # -- construction -------------------------------------------------------
    @classmethod
    def identity(cls, space: JetSpace) -> "Substitution":
        return cls(space, space.one, tuple(space.u(i) for i in range(1, space.n + 1)))

    @classmethod
    def reciprocal(cls, space: JetSpace, B: DiffPoly) -> "Substitution":
        """Change of the independent variable only."""
        return cls(space, B, tuple(space.u(i) for i in range(1, space.n + 1)))

    # -- classification -----------------------------------------------------
    @property
    def is_miura(self) -> bool:
        return self.B == self.space.one

    @property
    def is_first_kind(self) -> bool:
        return self.B.as_coefficient() is not None and all(
            q.as_coefficient() is not None for q in self.Q)

    @property
    def is_second_kind(self) -> bool:
        return self.B0 == self.space.ring.one and all(
            k == self.space.ring.gen(i + 1) for i, k in enumerate(self.K0))

    @property
    def is_projective(self) -> bool:
        return self.projective is not None

    @property
    def is_identity(self) -> bool:
        return self.is_miura and self.is_second_kind and all(
            q == self.space.u(i + 1) for i, q in enumerate(self.Q))

    def first_kind_part(self) -> "Substitution":
        sp = self.space
        return Substitution(sp, sp.coefficient(self.B0), tuple(sp.coefficient(k) for k in self.K0))

    @property
    def inv_B(self) -> DiffPoly:
        if self._inv_B is None:
            self._inv_B = series_inverse(self.B)
        return self._inv_B

    def __eq__(self, other) -> bool:
        if not isinstance(other, Substitution):
            return NotImplemented
        return self.space is other.space and self.B == other.B and self.Q == other.Q

    def __hash__(self) -> int:
        return hash((self.B, self.Q))

    def __repr__(self) -> str:
        return format_substitution(self)


# -- jets and pullbacks ---------------------------------------------------------

def prolong_jet(s: Substitution, i: int, tau: int) -> DiffPoly:
    """``w^{i,tau} = ((1/B) D)^tau Q^i`` in old coordinates."""
    key = (i, tau)
    if key not in s._jets:
        if tau == 0:
            s._jets[key] = s.Q[i - 1]
        else:
            prev = prolong_jet(s, i, tau - 1)
            s._jets[key] = s.inv_B * total_derivative(prev, EXTENDED)
    return s._jets[key]


def _taylor(c: Coefficient, s: Substitution, delta: Sequence[DiffPoly], cache: dict) -> DiffPoly:
    """``c(K0 + delta)`` expanded in powers of ``delta = O(eps)``."""
    sp = s.space
    n = sp.n
    total = sp.zero
    # iterate over multi-indices by increasing total degree
    frontier = {(0,) * n: (c, sp.one)}
    seen = set(frontier)
    while frontier:
        nxt = {}
        for alpha, (deriv, dpow) in frontier.items():
            weight = 1
            for a in alpha:
                weight *= factorial(a)
            value = deriv.compose(list(s.K0))
            total = total + dpow.scale(value / weight) if weight != 1 else total + dpow.scale(value)
            for k in range(n):
                if delta[k].is_zero():
                    continue
                beta = alpha[:k] + (alpha[k] + 1,) + alpha[k + 1:]
                if beta in seen:
                    continue
                seen.add(beta)
                p = dpow * delta[k]
                if p.is_zero():
                    continue
                d = deriv.derivative(k + 1)
                if d.is_zero():
                    continue
                nxt[beta] = (d, p)
        frontier = nxt
    return total


def pullback(s: Substitution, f: DiffPoly) -> DiffPoly:
    """Express an even function of the new jets in the old coordinates."""
    sp = s.space
    if f.space is not sp:
        raise EpsOrderMismatch("function and substitution live in different jet spaces")
    if s.is_identity:
        return f
    delta = [q - q.eps_part(0) for q in s.Q]
    point = all(d.is_zero() for d in delta)
    cache: dict = {}
    total = sp.zero
    for key, c in f.terms.items():
        if key[2] or key[3]:
            raise ShapeError("pullback is defined for even, zeta-free functions")
        mono = sp.one.shift_eps(key[0]) if key[0] else sp.one
        for (i, t, p) in key[1]:
            if p < 0:
                raise ShapeError("pullback does not support negative jet powers")
            mono = mono * prolong_jet(s, i, t) ** p
            if mono.is_zero():
                break
        if mono.is_zero():
            continue
        if point:
            coef = sp.coefficient(c.compose(list(s.K0)))
        else:
            coef = _taylor(c, s, delta, cache)
        total = total + coef * mono
    return total


def compose(s1: Substitution, s2: Substitution) -> Substitution:
    """The substitution ``s1`` followed by ``s2``."""
    if s1.space is not s2.space:
        raise EpsOrderMismatch("substitutions live in different jet spaces")
    if s1.is_projective and s2.is_projective:
        return s1.projective.then(s2.projective).substitution(s1.space)
    B = s1.B * pullback(s1, s2.B)
    Q = tuple(pullback(s1, q) for q in s2.Q)
    return Substitution(s1.space, B, Q)


def _invert_point_map(s: Substitution) -> Substitution:
    """Exact inverse of a first-kind substitution."""
    sp = s.space
    if s.is_projective:
        return s.projective.inverse().substitution(sp)
    ring = sp.ring
    if all(k == ring.gen(i + 1) for i, k in enumerate(s.K0)):
        inv = tuple(ring.gen(i + 1) for i in range(sp.n))
    else:
        import sympy

        us = sympy_symbols(sp.n)
        ws = sympy.symbols(" ".join(f"w{k}" for k in range(1, sp.n + 1)) + " _dummy")[:sp.n]
        eqs = [sympy.numer(sympy.together(to_sympy(k, us) - w)) for k, w in zip(s.K0, ws)]
        try:
            sols = sympy.solve(eqs, list(us), dict=True)
        except NotImplementedError:
            sols = []
        good = []
        for sol in sols:
            if len(sol) != sp.n:
                continue
            exprs = [sol[u].subs(dict(zip(ws, us)), simultaneous=True) for u in us]
            try:
                good.append(tuple(from_sympy(ring, e, us) for e in exprs))
            except ValueError:
                continue
        if len(sols) != 1 or len(good) != 1:
            raise NotInvertible("the point map has no unique rational inverse")
        inv = good[0]
    B = sp.coefficient(s.B0.compose(list(inv)).inverse())
    return Substitution(sp, B, tuple(sp.coefficient(c) for c in inv))


def invert(s: Substitution) -> Substitution:
    """Inverse substitution, exact up to the eps-truncation."""
    if s._inverse is not None:
        return s._inverse
    sp = s.space
    if s.is_identity:
        s._inverse = s
        return s
    p0 = _invert_point_map(s.first_kind_part())
    if s.is_first_kind:
        s._inverse = p0
        p0._inverse = s
        return p0
    e = compose(s, p0)
    ident = Substitution.identity(sp)
    t = ident
    for _ in range(sp.eps_order + 2):
        r = compose(e, t)
        if r.is_identity:
            break
        beta = r.B - sp.one
        kappa = [q - sp.u(i + 1) for i, q in enumerate(r.Q)]
        corr = Substitution(sp, sp.one - beta, tuple(sp.u(i + 1) - k for i, k in enumerate(kappa)))
        t = compose(t, corr)
    else:  # pragma: no cover - the iteration converges quadratically
        raise NotInvertible("fixed-point inversion did not converge")
    result = compose(p0, t)
    s._inverse = result
    return result


def change_of_jet_coordinates(s: Substitution, f: DiffPoly) -> DiffPoly:
    """Rewrite a function of the old ``x``-jets in the new ``y``-jets."""
    return pullback(invert(s), f)


def to_y_jets(B: DiffPoly, f: DiffPoly) -> DiffPoly:
    """Rewrite ``x``-jets of ``u`` as ``y``-jets of ``u`` for ``dy = B dx``."""
    r = Substitution.reciprocal(B.space, B)
    return change_of_jet_coordinates(r, f)


# -- the operator Dm ---------------------------------------------------------------

def dee(s: Substitution) -> NonlocalExpression:
    """``Dm^j_i = B (l_{Q^j})_i - D(Q^j) o D^{-1} o (l_B)_i``."""
    sp = s.space
    lB = frechet(s.B)
    rows = []
    for j in range(sp.n):
        q = total_derivative(s.Q[j], EXTENDED)
        lQ = frechet(s.Q[j])
        row = []
        for i in range(sp.n):
            entry = []
            local = lQ[i].left_mul(s.B)
            if not local.is_zero():
                entry.append((local,))
            if not q.is_zero() and not lB[i].is_zero():
                entry.append((DiffOp.mult(-q), lB[i]))
            row.append(entry)
        rows.append(row)
    return NonlocalExpression.from_chains(sp, rows)


def _output(s: Substitution, f: DiffPoly, reexpress: bool) -> DiffPoly:
    if reexpress:
        return change_of_jet_coordinates(s, f)
    if s.B == s.space.one:
        return f
    return to_y_jets(s.B, f)


def push_vector(s: Substitution, X: Sequence[DiffPoly], reexpress: bool = False):
    """Components ``Y = (1/B) Dm(X)`` of a vector field in the new frame."""
    X = tuple(X)
    _same_space(s, X[0])
    Y = dee(s).apply(X)
    return tuple(_output(s, s.inv_B * y, reexpress) for y in Y)


def push_covector(s: Substitution, psi: Sequence[DiffPoly]) -> tuple[DiffPoly, ...]:
    """Old components ``Xi = Dm^*(Psi)`` of a covector given in new coordinates."""
    psi = tuple(pullback(s, p) for p in psi)
    return dee(s).adjoint().apply(psi)


def _same_space(s: Substitution, f) -> None:
    if f.space is not s.space:
        raise EpsOrderMismatch("the operator and the substitution have different eps-orders")


def _y_frame_operator(op: DiffOp, B: DiffPoly) -> DiffOp:
    """Rewrite ``sum c_s D_x^s`` with ``D_x = B D_y`` (coefficients stay in x-jets)."""
    sp = op.space
    out: dict[int, DiffPoly] = {}
    power = {0: sp.one}
    top = op.order()
    for s in range(top + 1):
        c = op.coeff(s)
        if not c.is_zero():
            for k, m in power.items():
                out[k] = out.get(k, sp.zero) + c * m
        if s == top:
            break
        nxt: dict[int, DiffPoly] = {}
        for k, m in power.items():
            nxt[k] = nxt.get(k, sp.zero) + total_derivative(m, EXTENDED)
            nxt[k + 1] = nxt.get(k + 1, sp.zero) + B * m
        power = nxt
    return DiffOp(sp, out)


def _convert_op(op: DiffOp, conv) -> DiffOp:
    return DiffOp(op.space, {k: conv(c) for k, c in op.coeffs.items()})


def push_bivector(s: Substitution, P: WNLOperator, reexpress: bool = False,
                  trace: list | None = None) -> WNLOperator:
    """``P_y = (1/B) Dm o P o Dm^*`` in localizable shape."""
    if isinstance(P, LocalOperator):
        P = WNLOperator(P)
    _same_space(s, P)
    if not is_skew(P):
        raise NotSkew("push_bivector requires a skew-symmetric operator")
    if s.is_identity:
        return P
    sp = s.space
    Dm = dee(s)
    E = Dm.compose(NonlocalExpression.from_wnl(P)).compose(Dm.adjoint()).left_mul(s.inv_B)
    local, tensors = tail_tensors(E, trace)
    n = sp.n
    tensors = [[scale_second_copy(t, s.inv_B, sp) for t in row] for row in tensors]
    flank = tuple(s.inv_B * total_derivative(q, EXTENDED) for q in s.Q)
    V = solve_tail(tensors, flank, sp)
    if V is None:
        raise ShapeError("the pushed operator is not of localizable shape")
    conv = (lambda f: _output(s, f, reexpress))
    rows = [[_convert_op(_y_frame_operator(local.entries[i][j], s.B), conv)
             for j in range(n)] for i in range(n)]
    V = tuple(conv(v) for v in V)
    flank = tuple(conv(f) for f in flank)
    return WNLOperator(LocalOperator(sp, rows), V, flank)


# -- densities and trivectors -------------------------------------------------------

def _theta_images(s: Substitution) -> tuple[DiffPoly, ...]:
    """``theta_i -> (Dm^* theta~)_i`` with ``D^{-1}(q . theta~) = -zeta~``."""
    sp = s.space
    lQ = [frechet(q) for q in s.Q]
    lB = frechet(s.B)
    out = []
    for i in range(sp.n):
        acc = sp.zero
        for k in range(sp.n):
            acc = acc + lQ[k][i].adjoint().apply(s.B * sp.theta(k + 1))
        acc = acc - lB[i].adjoint().apply(sp.zeta())
        out.append(acc)
    return tuple(out)


def push_density(s: Substitution, density: DiffPoly, reexpress: bool = False) -> DiffPoly:
    """Multivector density in the new frame (for substitutions with ``B = 1``).

    The odd variables are transformed by ``theta_i -> (Dm^* theta~)_i``; the
    reciprocal case needs the ``x``-frame rule ``D zeta~ = -D(Q).theta~`` and is
    handled through :func:`push_bivector` for bivectors.
    """
    if not s.is_miura:
        raise ShapeError("push_density supports Miura substitutions (B = 1) only")
    sp = s.space
    if density.has_zeta():
        raise ShapeError("push_density expects a zeta-free density")
    images = _theta_images(s)
    total = sp.zero
    for key, c in density.terms.items():
        term = sp.monomial(c, (key[0], key[1], (), 0))
        for (i, t) in key[2]:
            img = images[i - 1]
            for _ in range(t):
                img = total_derivative(img, EXTENDED)
            term = term * img
        total = total + term
    return _output_odd(s, total, reexpress)


def _output_odd(s: Substitution, f: DiffPoly, reexpress: bool) -> DiffPoly:
    """Re-express the even coefficients of an odd-variable polynomial."""
    if not reexpress:
        return f
    sp = s.space
    groups: dict = {}
    for key, c in f.terms.items():
        groups.setdefault((key[2], key[3]), {})[(key[0], key[1], (), 0)] = c
    total = sp.zero
    for (odds, z), terms in groups.items():
        even = DiffPoly(sp, terms)
        odd = sp.monomial(sp.ring.one, (0, (), odds, z))
        total = total + change_of_jet_coordinates(s, even) * odd
    return total


def push_trivector(s: Substitution, T: DiffPoly, reexpress: bool = False) -> DiffPoly:
    """Trivector density ``(1/B) Dm T(Dm^*, Dm^*)`` for Miura substitutions."""
    if any(d != 3 for d in T.theta_degrees()):
        raise ShapeError("a trivector density must have theta-degree 3")
    return push_density(s, T, reexpress)


# -- closed formulas ----------------------------------------------------------------

def _metric_inverse(g):
    ring = g[0][0].ring
    if determinant(g).is_zero():
        raise SingularMetric("the metric is degenerate")
    return inverse(g, ring.one, ring.zero)


def ferapontov_pavlov(g, Gamma, B: Coefficient, space: JetSpace) -> WNLOperator:
    """Image of ``g^{ij} D + Gamma^{ij}_k u^{k,1}`` under ``dy = B(u) dx``.

    ``g`` is an ``N x N`` matrix and ``Gamma[i][j][k]`` the contravariant
    symbols, all :class:`Coefficient`.  The result uses ``y``-jets of ``u``.
    """
    n = space.n
    ring = space.ring
    if B.is_zero():
        raise InvalidSubstitution("B must be nonzero")
    gl = _metric_inverse(g)
    B2 = B * B
    Bm2 = B2.inverse()
    dB = [B.derivative(k + 1) for k in range(n)]
    dBm2 = [Bm2.derivative(k + 1) for k in range(n)]
    uy = [space.u(k + 1, 1) for k in range(n)]
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            zero_order = space.zero
            for k in range(n):
                c = Gamma[i][j][k] * B2
                for l in range(n):
                    for m in range(n):
                        bracket = gl[l][m] * dBm2[k] + gl[k][m] * dBm2[l] - gl[l][k] * dBm2[m]
                        c = c - (g[i][l] * B2 * bracket * g[m][j] * B2) / 2
                zero_order = zero_order + uy[k].scale(c)
            row.append(DiffOp(space, {1: space.coefficient(g[i][j] * B2), 0: zero_order}))
        rows.append(row)
    norm = ring.zero
    for k in range(n):
        for l in range(n):
            norm = norm + dB[k] * g[k][l] * dB[l]
    V = []
    for i in range(n):
        # P^{il}(dB/du^l) with D_x = B D_y, then the -1/2 u^i_y |dB|^2 term
        v = space.zero
        for l in range(n):
            for m in range(n):
                v = v + uy[m].scale(g[i][l] * dB[l].derivative(m + 1) * B)
                v = v + uy[m].scale(Gamma[i][l][m] * dB[l] * B)
        v = v - uy[i].scale(norm / 2)
        V.append(v)
    return WNLOperator(LocalOperator(space, rows), tuple(V))


def projective_push(p: ProjectiveMap, Q: LocalOperator, reexpress: bool = True) -> LocalOperator:
    """``Q~ = (1/A^0) J (A^0)^2 o Q o (A^0)^2 J^T`` with ``D_x = A^0 D_y``."""
    sp = Q.space
    if p.n != sp.n:
        raise InvalidSubstitution("projective matrix size does not match N")
    if not is_skew(Q):
        raise NotSkew("projective_push requires a skew-symmetric operator")
    degree = homogeneous_degree(Q)
    s = p.substitution(sp)
    n = sp.n
    A0 = s.B
    A02 = A0 * A0
    J = [[sp.coefficient(c) for c in row] for row in s.jacobian]
    inv_A0 = s.inv_B
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = DiffOp.zero(sp)
            for k in range(n):
                left = J[i][k] * A02 * inv_A0
                for l in range(n):
                    if Q.entries[k][l].is_zero():
                        continue
                    right = DiffOp.mult(A02 * J[j][l])
                    acc = acc + DiffOp.mult(left).compose(Q.entries[k][l]).compose(right)
            y = _y_frame_operator(acc, A0)
            row.append(_convert_op(y, lambda f: _output(s, f, reexpress)))
        rows.append(row)
    out = LocalOperator(sp, rows)
    if not out.is_zero() and homogeneous_degree(out) != degree:
        raise NotHomogeneous("the pushed operator changed degree")
    return out


def homogeneous_degree(P) -> int:
    """Degree ``d`` with every ``D^s`` coefficient of differential degree ``d - s``."""
    if isinstance(P, WNLOperator):
        P = P.local
    degree = None
    for row in P.entries:
        for op in row:
            for s, c in op.coeffs.items():
                for key in c.terms:
                    if key[0] or key[2] or key[3]:
                        raise NotHomogeneous("homogeneous operators are eps-free and even")
                    d = key_grading(key).d_x + s
                    if degree is None:
                        degree = d
                    elif d != degree:
                        raise NotHomogeneous("the operator is not homogeneous")
    if degree is None:
        raise NotHomogeneous("the zero operator has no degree")
    return degree


# -- file formats ------------------------------------------------------------------

def format_substitution(s: Substitution) -> str:
    from .printing import format_diffpoly

    lines = [f"N = {s.space.n}", f"E_max = {s.space.eps_order}"]
    if s.projective is not None:
        rows = ", ".join("[" + ", ".join(str(x) for x in r) + "]" for r in s.projective.matrix)
        lines.append(f"projective = [{rows}]")
    else:
        lines.append(f"B = {format_diffpoly(s.B)}")
        for i, q in enumerate(s.Q):
            lines.append(f"Q[{i + 1}] = {format_diffpoly(q)}")
    return "\n".join(lines) + "\n"


def _parse_matrix(text: str, line: int, source) -> tuple:
    import ast

    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        value = None
    if value is None:
        # entries may be fractions such as 1/2: parse row by row
        rows = []
        body = text.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ParseError("malformed projective matrix", line, 1, source)
        inner = body[1:-1]
        depth = 0
        current = ""
        for ch in inner:
            if ch == "[":
                depth += 1
                current = ""
            elif ch == "]":
                depth -= 1
                rows.append([x for x in current.split(",") if x.strip()])
            elif depth == 1:
                current += ch
        try:
            return tuple(tuple(Fraction(x.strip()) for x in r) for r in rows)
        except (ValueError, ZeroDivisionError):
            raise ParseError("malformed projective matrix", line, 1, source) from None
    try:
        return tuple(tuple(Fraction(x) for x in r) for r in value)
    except (TypeError, ValueError):
        raise ParseError("malformed projective matrix", line, 1, source) from None


def parse_substitution_text(text: str, source: str | None = None,
                            eps_order: int | None = None) -> Substitution:
    from .fileformats import _expr, _check_index, space_from_header, split_lines

    header, entries = split_lines(text, source)
    space = space_from_header(header, source, eps_order)
    B = None
    Q: dict[int, DiffPoly] = {}
    proj = None
    for e in entries:
        if e.name == "B" and not e.indices:
            if B is not None:
                raise ParseError("duplicate entry B", e.line, 1, source)
            B = _expr(e, space, source)
        elif e.name == "Q":
            (i,) = _check_index(e, space.n, 1, source)
            if i in Q:
                raise ParseError("duplicate entry", e.line, 1, source)
            Q[i] = _expr(e, space, source)
        elif e.name == "projective" and not e.indices:
            proj = _parse_matrix(e.text, e.line, source)
        else:
            raise ParseError(f"unknown entry {e.name!r}", e.line, 1, source)
    if proj is not None:
        if B is not None or Q:
            raise ParseError("a projective block excludes B and Q entries", None, None, source)
        p = ProjectiveMap(proj)
        if p.n != space.n:
            raise ParseError("projective matrix must be (N+1) x (N+1)", None, None, source)
        return p.substitution(space)
    if B is None:
        B = space.one
    comps = tuple(Q.get(i, space.u(i)) for i in range(1, space.n + 1))
    return Substitution(space, B, comps)


def read_substitution_file(path: str, eps_order: int | None = None) -> Substitution:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", None, None, path) from None
    return parse_substitution_text(text, path, eps_order)


@dataclass
class MetricData:
    """Metric file contents: ``g[i][j]``, ``Gamma[i][j][k]`` and ``B``."""

    space: JetSpace
    g: list
    Gamma: list
    B: Coefficient

    def operator(self) -> WNLOperator:
        """The first-order operator ``g^{ij} D + Gamma^{ij}_k u^{k,1}``."""
        sp = self.space
        n = sp.n
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                zero = sp.zero
                for k in range(n):
                    zero = zero + sp.u(k + 1, 1).scale(self.Gamma[i][j][k])
                row.append(DiffOp(sp, {1: sp.coefficient(self.g[i][j]), 0: zero}))
            rows.append(row)
        return WNLOperator(LocalOperator(sp, rows))


def parse_metric_text(text: str, source: str | None = None,
                      eps_order: int | None = None) -> MetricData:
    from .fileformats import _expr, _check_index, space_from_header, split_lines

    header, entries = split_lines(text, source)
    space = space_from_header(header, source, eps_order)
    n = space.n
    ring = space.ring
    g = [[ring.zero] * n for _ in range(n)]
    G = [[[ring.zero] * n for _ in range(n)] for _ in range(n)]
    B = ring.one
    for e in entries:
        f = _expr(e, space, source)
        c = f.as_coefficient()
        if c is None:
            raise ParseError(f"{e.name} must be a function of u only", e.line, e.column, source)
        if e.name == "g":
            i, j = _check_index(e, n, 2, source)
            g[i - 1][j - 1] = c
        elif e.name == "Gamma":
            i, j, k = _check_index(e, n, 3, source)
            G[i - 1][j - 1][k - 1] = c
        elif e.name == "B" and not e.indices:
            B = c
        else:
            raise ParseError(f"unknown entry {e.name!r}", e.line, 1, source)
    for i in range(n):
        for j in range(i + 1, n):
            if g[i][j] != g[j][i]:
                raise ParseError("the metric g must be symmetric", None, None, source)
    return MetricData(space, g, G, B)


def read_metric_file(path: str, eps_order: int | None = None) -> MetricData:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", None, None, path) from None
    return parse_metric_text(text, path, eps_order)
