"""Miura-reciprocal substitutions and their push-forwards."""

from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import generators as gen
from conftest import expr, matrix, scalar
from jetpoisson.algebra import (PLAIN, DiffOp, JetSpace, functional_equal, total_derivative,
                                variational_derivative)
from jetpoisson.errors import InvalidSubstitution, IrreducibleNonlocal, NotInvertible, NotSkew
from jetpoisson.nonlocal_calculus import NonlocalExpression, normalize
from jetpoisson.operators import LocalOperator, WNLOperator, density_of, is_skew
from jetpoisson.poisson import schouten_lz
from jetpoisson.transform import (ProjectiveMap, Substitution, change_of_jet_coordinates, compose,
                                  dee, ferapontov_pavlov, invert, projective_push, prolong_jet,
                                  pullback, push_bivector, push_covector, push_density,
                                  push_trivector, push_vector)

SP1 = JetSpace(1, 2)
SP2 = JetSpace(2, 2)
U = SP1.u(1)
R = SP1.ring
rngs = st.randoms(use_true_random=False)


def moebius(sp=SP1):
    return Substitution(sp, sp.one, (sp.u(1).scale((sp.ring.one + sp.ring.gen(1)).inverse()),))


# -- construction and classification -----------------------------------------------

def test_classification_flags():
    ident = Substitution.identity(SP1)
    assert ident.is_identity and ident.is_miura and ident.is_first_kind and ident.is_second_kind
    assert Substitution(SP1, U, (U,)).is_first_kind
    second = Substitution(SP1, SP1.one + SP1.eps() * SP1.u(1, 1), (U,))
    assert second.is_second_kind and not second.is_first_kind
    assert ProjectiveMap([[0, 1], [1, 0]]).substitution(SP1).is_projective


def test_invalid_substitutions():
    with pytest.raises(InvalidSubstitution):
        Substitution(SP1, SP1.zero, (U,))
    with pytest.raises(InvalidSubstitution):
        Substitution(SP1, SP1.one, (U + SP1.u(1, 1),))
    with pytest.raises(NotInvertible):
        Substitution(SP1, SP1.one, (SP1.const(2),))
    with pytest.raises(NotInvertible):
        ProjectiveMap([[1, 1], [1, 1]])


# -- dee, jets and coordinates -------------------------------------------------------

def test_dee_examples():
    one = DiffOp.identity(SP1)
    assert normalize(dee(Substitution.identity(SP1))) == NonlocalExpression.from_local(one)
    assert dee(Substitution(SP1, SP1.one, (U * U,))) == \
        NonlocalExpression.from_local(DiffOp.mult(2 * U))
    expected = NonlocalExpression.scalar(SP1, (DiffOp.mult(U),), (DiffOp.mult(-SP1.u(1, 1)), one))
    assert dee(Substitution(SP1, U, (U,))) == expected


def test_prolong_jet_examples():
    s = Substitution(SP1, U, (U,))
    assert prolong_jet(s, 1, 0) == U
    assert prolong_jet(s, 1, 1) == expr("u[1,1]/u[1]", SP1)
    assert prolong_jet(s, 1, 2) == expr("(u[1,2]*u[1] - u[1,1]^2)/u[1]^3", SP1)


def test_change_of_jet_coordinates_examples():
    assert change_of_jet_coordinates(Substitution.identity(SP1), U * U) == U * U
    assert change_of_jet_coordinates(moebius(), U) == expr("u[1]/(1 - u[1])", SP1)


def test_invert_examples():
    assert invert(Substitution.identity(SP1)).is_identity
    assert invert(moebius()).Q == (expr("u[1]/(1 - u[1])", SP1),)
    with pytest.raises(NotInvertible):
        invert(Substitution(SP1, SP1.one, (U * U,)))
    s = Substitution(SP1, SP1.one, (U + SP1.eps() * SP1.u(1, 1),))
    assert invert(s).Q[0].eps_part(1) == -SP1.u(1, 1)


# -- vectors and covectors -----------------------------------------------------------

def test_push_vector_examples():
    X = (SP1.u(1, 1),)
    assert push_vector(Substitution.identity(SP1), X) == X
    assert push_vector(Substitution(SP1, SP1.one, (U * U,)), X) == (2 * U * SP1.u(1, 1),)
    s = Substitution(SP1, U, (U,))
    assert push_vector(s, X) == (SP1.zero,)
    with pytest.raises(IrreducibleNonlocal):
        push_vector(s, (U,))


def test_push_covector_identity_and_miura():
    psi = (expr("u[1]*u[1,2]", SP1),)
    assert push_covector(Substitution.identity(SP1), psi) == psi
    s = Substitution(SP1, SP1.one, (U * U + SP1.eps() * SP1.u(1, 1),))
    (lq,) = [op.adjoint() for op in __import__("jetpoisson.algebra").algebra.frechet(s.Q[0])]
    assert push_covector(s, psi) == (lq.apply(pullback(s, psi[0])),)


@given(rngs)
def test_euler_lagrange_covariance(rng):
    # delta_u of the pulled-back density equals l_Q^* applied to delta_w
    s = Substitution(SP1, SP1.one, (U * U,))
    f = gen.density(rng, SP1, 0, max_dx=3, eps=False)
    lhs = variational_derivative(pullback(s, f), "u", 1)
    (rhs,) = push_covector(s, (variational_derivative(f, "u", 1),))
    assert lhs == rhs


# -- bivectors and trivectors --------------------------------------------------------

def test_push_bivector_identity():
    P = scalar("u[1]*D + 1/2*u[1,1]", SP1, V="u[1,1]")
    assert push_bivector(Substitution.identity(SP1), P) == P


def test_push_bivector_reciprocal_example():
    out = push_bivector(Substitution(SP1, U, (U,)), scalar("D", SP1))
    assert out.local == scalar("u[1]^2*D + u[1]*u[1,1]", SP1).local
    assert out.V == (expr("-1/2*u[1,1]", SP1),)


def test_push_bivector_miura_example():
    out = push_bivector(Substitution(SP1, SP1.one, (U * U,)), scalar("D", SP1))
    assert out == scalar("4*u[1]^2*D + 4*u[1]*u[1,1]", SP1)


def test_push_bivector_reexpressed_example():
    out = push_bivector(moebius(), scalar("D", SP1), reexpress=True)
    # D -> (1 - w)^4 D + D-derivative term, written in w
    assert out == scalar("(1 - u[1])^4*D - 2*(1 - u[1])^3*u[1,1]", SP1)


def test_push_bivector_requires_skew():
    with pytest.raises(NotSkew):
        push_bivector(moebius(), scalar("u[1]*D", SP1))


def test_push_trivector_identity_and_zero():
    T = expr("u[1]*theta[1]*theta[1,1]*theta[1,3]", SP1)
    s = Substitution.identity(SP1)
    assert push_trivector(s, T) == T
    assert push_trivector(moebius(), SP1.zero).is_zero()


@pytest.mark.parametrize("text", ["u[1,1]*D + 1/2*u[1,2]",
                                  "D^3 + u[1]*u[1,1]*D + 1/2*(u[1,1]^2 + u[1]*u[1,2])"])
def test_push_trivector_matches_bracket_of_push(text):
    P = scalar(text, SP1)
    d = density_of(P)
    T = schouten_lz(d, d)
    assert not functional_equal(T, SP1.zero)
    for s in (moebius(), Substitution(SP1, SP1.one, (U + SP1.eps() * U * SP1.u(1, 1),))):
        dt = density_of(push_bivector(s, P, reexpress=True))
        assert functional_equal(push_trivector(s, T, reexpress=True), schouten_lz(dt, dt))


def test_push_density_matches_push_bivector():
    P = scalar("u[1]*D + 1/2*u[1,1] + 1/8*eps^2*D^3", SP1)
    s = Substitution(SP1, SP1.one, (U + SP1.eps(2) * SP1.u(1, 2),))
    a = push_density(s, density_of(P), reexpress=True)
    b = density_of(push_bivector(s, P, reexpress=True))
    assert functional_equal(a, b)


# -- closed formulas -----------------------------------------------------------------

def _zero_gamma(n, ring):
    return [[[ring.zero] * n for _ in range(n)] for _ in range(n)]


def test_ferapontov_pavlov_examples():
    g = [[R.one]]
    G = _zero_gamma(1, R)
    assert ferapontov_pavlov(g, G, R.one, SP1) == scalar("D", SP1)
    assert ferapontov_pavlov(g, G, R.const(3), SP1) == scalar("9*D", SP1)
    out = ferapontov_pavlov(g, G, R.gen(1), SP1)
    assert out.local == scalar("u[1]^2*D + u[1]*u[1,1]", SP1).local
    assert out.V == (expr("-1/2*u[1,1]", SP1),)


def test_ferapontov_pavlov_matches_push():
    g = [[R.gen(1)]]
    G = [[[R.const(1) / 2]]]
    B = R.one + R.gen(1) ** 2
    P = ferapontov_pavlov(g, _zero_gamma(1, R), R.one, SP1)
    P = scalar("u[1]*D + 1/2*u[1,1]", SP1)
    assert push_bivector(Substitution.reciprocal(SP1, SP1.coefficient(B)), P) == \
        ferapontov_pavlov(g, G, B, SP1)


def test_projective_push_examples():
    Q = LocalOperator.scalar(DiffOp.dx(SP1))
    assert projective_push(ProjectiveMap.identity(1), Q) == Q
    assert projective_push(ProjectiveMap([[0, 1], [1, 0]]), Q) == Q


@given(rngs)
def test_projective_push_skew(rng):
    sp = rng.choice([JetSpace(1, 0), JetSpace(2, 0)])
    Q = gen.skew_local(rng, sp, 0)
    if Q.is_zero():
        return
    out = projective_push(gen.projective_map(rng, sp.n), Q)
    assert is_skew(out)


# -- group structure -----------------------------------------------------------------

def test_group_laws_and_functoriality():
    rng = random.Random(29)
    for _ in range(6):
        sp = rng.choice([SP1, SP2])
        s1, s2 = gen.substitution(rng, sp), gen.substitution(rng, sp)
        assert compose(s1, invert(s1)).is_identity
        assert compose(invert(s1), s1).is_identity
        P = gen.wnl_bivector(rng, sp)
        assert push_bivector(compose(s1, s2), P, reexpress=True) == \
            push_bivector(s2, push_bivector(s1, P, reexpress=True), reexpress=True)


def test_projective_composition_law():
    sp = JetSpace(2, 0)
    p = ProjectiveMap([[1, 1, 0], [0, 1, 2], [1, 0, 1]])
    q = ProjectiveMap([[2, 0, 1], [0, 1, 0], [1, 0, 0]])
    Q = matrix([["0", "D"], ["D", "0"]], sp)
    assert projective_push(p.then(q), Q) == projective_push(q, projective_push(p, Q))
    assert compose(p.substitution(sp), q.substitution(sp)).projective == p.then(q)


def test_push_preserves_skew_random():
    rng = random.Random(31)
    for _ in range(15):
        sp = rng.choice([SP1, SP2])
        P = gen.wnl_bivector(rng, sp)
        out = push_bivector(gen.substitution(rng, sp), P)
        assert isinstance(out, WNLOperator)
        assert is_skew(out) and out.is_graded()
        assert total_derivative(SP1.one, PLAIN).is_zero()
