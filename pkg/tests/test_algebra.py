"""Jet algebra: total and variational derivatives, Frechet derivatives,
exactness witnesses and equality modulo total derivatives."""

from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import generators as gen
from conftest import expr
from jetpoisson.algebra import (EXTENDED, PLAIN, DiffOp, Grading, JetSpace, frechet,
                                frechet_adjoint, functional_equal, is_total_derivative,
                                total_derivative, variational_derivative)
from jetpoisson.errors import TargetOutOfRange

SP1 = JetSpace(1, 2)
SP2 = JetSpace(2, 2)
rngs = st.randoms(use_true_random=False)


def op(text, sp=SP1):
    from jetpoisson.parsing import parse_operator_expression
    return parse_operator_expression(text, sp)


# -- examples -----------------------------------------------------------------

def test_total_derivative_leibniz():
    f = expr("u[1]*u[1,1]", SP1)
    assert total_derivative(f, PLAIN) == expr("u[1,1]^2 + u[1]*u[1,2]", SP1)


def test_extended_derivative_of_zeta():
    assert total_derivative(SP1.zeta(), EXTENDED) == expr("-u[1,1]*theta[1]", SP1)
    assert total_derivative(SP1.zeta(), PLAIN).is_zero()


def test_total_derivative_odd_square_vanishes():
    f = expr("theta[1]*theta[1,1]", SP1)
    assert total_derivative(f, PLAIN) == expr("theta[1]*theta[1,2]", SP1)


def test_variational_derivative_examples():
    assert variational_derivative(expr("1/2*u[1,1]^2", SP1), "u", 1) == expr("-u[1,2]", SP1)
    g = total_derivative(expr("u[1]*u[1,2]", SP1), PLAIN)
    assert variational_derivative(g, "u", 1).is_zero()
    t = expr("1/2*theta[1]*theta[1,1]", SP1)
    assert variational_derivative(t, "theta", 1) == expr("theta[1,1]", SP1)


def test_variational_derivative_zeta_is_partial():
    f = expr("zeta*u[1]*theta[1]", SP1)
    assert variational_derivative(f, "zeta") == expr("u[1]*theta[1]", SP1)


def test_variational_target_out_of_range():
    with pytest.raises(TargetOutOfRange):
        variational_derivative(SP1.u(1), "u", 2)
    with pytest.raises(TargetOutOfRange):
        SP1.u(3)


def test_frechet_examples():
    assert frechet(expr("u[1]*u[1,1]", SP1)) == (op("u[1]*D + u[1,1]"),)
    assert frechet(SP1.u(1)) == (DiffOp.identity(SP1),)
    assert frechet(expr("u[1,1]^2", SP1)) == (op("2*u[1,1]*D"),)


def test_frechet_adjoint_examples():
    assert frechet_adjoint(expr("u[1]*u[1,1]", SP1)) == (op("-u[1]*D"),)
    assert frechet_adjoint(SP1.u(1)) == (DiffOp.identity(SP1),)


def test_frechet_directional_derivative():
    # l_F(X) is the derivative of F along the evolutionary field X
    F = expr("u[1]^2*u[1,2] + u[1,1]^3", SP1)
    X = expr("u[1]*u[1,1]", SP1)
    (l,) = frechet(F)
    expected = (2 * SP1.u(1) * SP1.u(1, 2)) * X \
        + SP1.u(1, 0, 2) * total_derivative(total_derivative(X, PLAIN), PLAIN) \
        + 3 * SP1.u(1, 1) * SP1.u(1, 1) * total_derivative(X, PLAIN)
    assert l.apply(X) == expected


def test_is_total_derivative_examples():
    assert is_total_derivative(expr("u[1]*u[1,1]", SP1)) == expr("1/2*u[1]^2", SP1)
    assert is_total_derivative(expr("u[1,1]^2", SP1)) is None
    assert is_total_derivative(SP1.u(1)) is None
    assert is_total_derivative(SP1.one) is None


def test_functional_equal_examples():
    assert functional_equal(expr("u[1]*u[1,2]", SP1), expr("-u[1,1]^2", SP1))
    assert functional_equal(expr("u[1,1]*theta[1]", SP1), SP1.zero)
    assert not functional_equal(expr("u[1,1]^2", SP1), SP1.zero)


def test_functional_equal_sign_convention():
    # D(c zeta) = D(c) zeta + s c u' theta with the sign fixed by the left convention
    c = expr("u[1]^2*theta[1,1]", SP1)
    lhs = total_derivative(c * SP1.zeta(), EXTENDED)
    rhs = total_derivative(c, PLAIN) * SP1.zeta() + c * total_derivative(SP1.zeta(), EXTENDED)
    assert lhs == rhs
    assert functional_equal(lhs, SP1.zero)


def test_grading_of_generators():
    assert expr("u[1,3]", SP1).gradings() == {Grading(3, 0, 0)}
    assert expr("theta[1,2]", SP1).gradings() == {Grading(2, 1, 0)}
    assert SP1.zeta().gradings() == {Grading(0, 1, 0)}
    assert (SP1.eps(2) * SP1.u(1)).gradings() == {Grading(0, 0, 2)}


def test_eps_truncation():
    assert (SP1.eps(2) * SP1.eps(1)).is_zero()
    assert SP1.eps(3).is_zero()


def test_odd_square_and_zeta_square_vanish():
    t = SP1.theta(1, 2)
    assert (t * t).is_zero()
    assert (SP1.zeta() * SP1.zeta()).is_zero()


# -- properties ---------------------------------------------------------------

@given(rngs, st.sampled_from([SP1, SP2]), st.integers(0, 2))
def test_derivative_raises_degree_by_one(rng, sp, deg):
    f = gen.density(rng, sp, deg, zeta=True)
    for mode in (PLAIN, EXTENDED):
        df = total_derivative(f, mode)
        expected = {Grading(g.d_x + 1, g.d_theta, g.d_eps) for g in f.gradings()}
        assert df.gradings() <= expected
    e = sp.eps()
    assert total_derivative(f * e, PLAIN) == total_derivative(f, PLAIN) * e


@given(rngs, st.sampled_from([SP1, SP2]), st.integers(0, 2))
def test_variational_derivative_kills_total_derivatives(rng, sp, deg):
    f = gen.density(rng, sp, deg)
    df = total_derivative(f, PLAIN)
    for i in range(1, sp.n + 1):
        assert variational_derivative(df, "u", i).is_zero()
        assert variational_derivative(df, "theta", i).is_zero()


@given(rngs, st.sampled_from([SP1, SP2]))
def test_extended_commutation_identities(rng, sp):
    # on the zeta-extension: delta_u o D = D o theta d_zeta, delta_theta o D = -u' d_zeta
    f = gen.density(rng, sp, 1, zeta=True)
    df = total_derivative(f, EXTENDED)
    pz = variational_derivative(f, "zeta")
    for i in range(1, sp.n + 1):
        lhs_u = variational_derivative(df, "u", i)
        rhs_u = total_derivative(sp.theta(i) * pz, EXTENDED)
        assert lhs_u == rhs_u
        lhs_t = variational_derivative(df, "theta", i)
        assert lhs_t == -(sp.u(i, 1) * pz)


@given(rngs, st.sampled_from([SP1, SP2]))
def test_frechet_adjoint_involution(rng, sp):
    F = gen.graded_function(rng, sp, rng.randint(0, 3), rational=True) + gen.field_function(rng, sp)
    for a, b in zip(frechet(F), frechet_adjoint(F)):
        assert b.adjoint() == a


@given(rngs, st.sampled_from([SP1, SP2]), st.integers(0, 2))
def test_witness_iff_variationally_trivial(rng, sp, deg):
    g = gen.density(rng, sp, deg)
    if rng.random() < 0.5:
        f = total_derivative(g, PLAIN)
    else:
        f = gen.density(rng, sp, deg)
    w = is_total_derivative(f)
    trivial = all(variational_derivative(f, t, i).is_zero()
                  for t in ("u", "theta") for i in range(1, sp.n + 1))
    has_constant = any(not k[1] and not k[2] and not k[3] and c.is_constant()
                       for k, c in f.terms.items())
    if has_constant:
        assert w is None
        return
    assert (w is not None) == trivial
    if w is not None:
        assert total_derivative(w, PLAIN) == f


@given(rngs, st.sampled_from([SP1, SP2]))
def test_functional_equal_on_extended_images(rng, sp):
    h = gen.density(rng, sp, rng.randint(0, 2), zeta=True)
    f = gen.density(rng, sp, 1)
    assert functional_equal(f + total_derivative(h, EXTENDED), f)


def test_associative_and_supercommutative():
    rng = random.Random(7)
    for _ in range(10_000):
        sp = rng.choice([SP1, SP2])
        a, b, c = (gen.density(rng, sp, rng.randint(0, 2), max_dx=2, terms=1, zeta=True)
                   for _ in range(3))
        assert (a * b) * c == a * (b * c)
        pa, pb = a.theta_degrees(), b.theta_degrees()
        if len(pa) == 1 and len(pb) == 1:
            sign = -1 if (pa.pop() % 2 and pb.pop() % 2) else 1
            assert a * b == (b * a).scale(sign)
