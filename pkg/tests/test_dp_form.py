"""Factorisation ``P = D o Q o D`` and projective invariance of that form."""

from __future__ import annotations

import random

import pytest

import generators as gen
from conftest import expr, matrix, scalar
from jetpoisson.algebra import JetSpace
from jetpoisson.dp_form import (divide_left_dx, divide_right_dx, dp_compose, dp_factorize,
                                projective_dp_push)
from jetpoisson.errors import NotDivisible, NotDP, NotHomogeneous, NotSkew
from jetpoisson.operators import WNLOperator, is_skew
from jetpoisson.transform import ProjectiveMap, homogeneous_degree, push_bivector

SP1 = JetSpace(1, 0)
SP2 = JetSpace(2, 0)


def m1(text):
    return matrix([[text]], SP1)


# -- division by D ---------------------------------------------------------------------

def test_divide_right_examples():
    assert divide_right_dx(m1("D^3")) == m1("D^2")
    assert divide_right_dx(m1("u[1]*D^2 + u[1,1]*D")) == m1("u[1]*D + u[1,1]")
    with pytest.raises(NotDivisible) as info:
        divide_right_dx(m1("D^3 + u[1]"))
    assert info.value.remainder == expr("u[1]", SP1)


def test_divide_left_examples():
    assert divide_left_dx(m1("D^3")) == m1("D^2")
    assert divide_left_dx(m1("2*u[1]*D^2 + 3*u[1,1]*D + u[1,2]")) == m1("2*u[1]*D + u[1,1]")
    with pytest.raises(NotDivisible) as info:
        divide_left_dx(m1("u[1]*D"))
    assert info.value.remainder == expr("-u[1,1]", SP1)


def test_matrix_division_reports_entry():
    P = matrix([["D^2", "D"], ["D", "u[1]"]], SP2)
    with pytest.raises(NotDivisible) as info:
        divide_right_dx(P)
    assert info.value.entry == (2, 2)


# -- factorisation -------------------------------------------------------------------------

def test_dp_factorize_examples():
    assert dp_factorize(m1("D^3")) == m1("D")
    assert dp_factorize(m1("2*u[1]*D^3 + 3*u[1,1]*D^2 + u[1,2]*D")) == m1("2*u[1]*D + u[1,1]")
    assert dp_factorize(scalar("D^3", SP1)) == m1("D")


def test_dp_factorize_certificate():
    P = m1("u[1,1]^2*D + u[1,1]*u[1,2]")
    assert is_skew(P)
    with pytest.raises(NotDP) as info:
        dp_factorize(P)
    assert info.value.step == "right"
    assert info.value.entry == (1, 1)
    assert info.value.remainder == expr("u[1,1]*u[1,2]", SP1)


def test_dp_factorize_errors():
    with pytest.raises(NotHomogeneous):
        dp_factorize(m1("D"))
    with pytest.raises(NotHomogeneous):
        dp_factorize(m1("D^3 + u[1]*D"))
    with pytest.raises(NotHomogeneous):
        dp_factorize(scalar("D", SP1, V="u[1,1]"))


def test_round_trip():
    rng = random.Random(61)
    for _ in range(100):
        d = rng.randint(0, 3)
        sp = SP2 if d == 0 else rng.choice([SP1, SP2])
        Q = gen.homogeneous_skew(rng, sp, d)
        P = dp_compose(Q)
        assert homogeneous_degree(P) == d + 2
        assert is_skew(P)
        assert dp_factorize(P) == Q


# -- projective maps -------------------------------------------------------------------------

def test_projective_dp_push_examples():
    Q = m1("D")
    assert projective_dp_push(ProjectiveMap.identity(1), Q) == Q
    # dy = u dx, w = 1/u
    p = ProjectiveMap([[0, 1], [1, 0]])
    assert projective_dp_push(p, Q) == Q
    out = push_bivector(p.substitution(SP1), WNLOperator(dp_compose(Q)), reexpress=True)
    assert out == scalar("D^3", SP1)
    with pytest.raises(NotSkew):
        projective_dp_push(p, m1("u[1]*D"))


def test_projective_invariance():
    rng = random.Random(67)
    for _ in range(12):
        d = rng.randint(0, 2)
        sp = SP2 if d == 0 else rng.choice([SP1, SP2])
        Q = gen.homogeneous_skew(rng, sp, d)
        p = gen.projective_map(rng, sp.n)
        Qt = projective_dp_push(p, Q)
        assert is_skew(Qt) and homogeneous_degree(Qt) == d
        pushed = push_bivector(p.substitution(sp), WNLOperator(dp_compose(Q)), reexpress=True)
        assert pushed.V is None
        assert dp_factorize(pushed) == Qt


def test_projective_group_action():
    rng = random.Random(71)
    for _ in range(10):
        d = rng.randint(1, 2)
        sp = rng.choice([SP1, SP2])
        Q = gen.homogeneous_skew(rng, sp, d)
        p, q = gen.projective_map(rng, sp.n), gen.projective_map(rng, sp.n)
        assert projective_dp_push(p.then(q), Q) == projective_dp_push(q, projective_dp_push(p, Q))
        assert projective_dp_push(p.inverse(), projective_dp_push(p, Q)) == Q
