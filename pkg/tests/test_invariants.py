"""Pencil symbols, characteristic polynomials, perturbative roots and
central invariants."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

import generators as gen
from conftest import matrix, scalar
from jetpoisson.algebra import JetSpace
from jetpoisson.errors import EpsOrderMismatch, NotCanonicalForm, NotSemisimple, ShapeError
from jetpoisson.invariants import (central_invariants, char_poly, evaluate_char_poly,
                                   leading_roots, perturb_roots, symbol)
from jetpoisson.operators import WNLOperator
from jetpoisson.transform import Substitution, invert, push_bivector

SP = JetSpace(1, 4)
SP2 = JetSpace(2, 4)
R = SP.ring
R2 = SP2.ring
P1 = scalar("D", SP)
P2 = scalar("u[1]*D + 1/2*u[1,1] + 1/8*eps^2*D^3", SP)


def c(x):
    return R.const(Fraction(x))


def series(*xs, ring=R, K=4):
    out = [ring.const(Fraction(x)) if not hasattr(x, "ring") else x for x in xs]
    return out + [ring.zero] * (K + 1 - len(out))


def op2(rows, sp=SP2):
    return WNLOperator(matrix(rows, sp))


# -- symbol and characteristic polynomial -------------------------------------------

def test_symbol_examples():
    s = symbol(P1, scalar("u[1]*D + 1/2*u[1,1]", SP))
    assert s.entry(0, 0) == [series(R.gen(1)), series(-1)]
    s = symbol(P1, P2)
    assert s.entry(0, 0) == [series(R.gen(1), 0, Fraction(1, 8)), series(-1)]


def test_symbol_ignores_tails():
    s = symbol(scalar("D", SP, V="u[1,1]"), scalar("u[1]*D + 1/2*u[1,1]", SP, V="u[1]*u[1,1]"))
    assert s == symbol(P1, scalar("u[1]*D + 1/2*u[1,1]", SP))


def test_symbol_shape_errors():
    with pytest.raises(ShapeError):
        symbol(P1, scalar("D^3", SP))
    with pytest.raises(ShapeError):
        symbol(P1, scalar("u[1,1]*D", SP))
    with pytest.raises(EpsOrderMismatch):
        symbol(P1, scalar("D", JetSpace(1, 2)))


def test_char_poly_examples():
    p = char_poly(symbol(P1, P2))
    assert p.coeffs == [series(R.gen(1), 0, Fraction(1, 8)), series(-1)]
    A = op2([["u[1]*D", "0"], ["0", "u[2]*D"]])
    B = op2([["D", "0"], ["0", "2*D"]])
    p = char_poly(symbol(B, A))
    u1, u2 = R2.gen(1), R2.gen(2)
    assert p.eps_part(0) == [u1 * u2, -(u1 * 2 + u2), R2.const(2)]
    assert leading_roots(p) == sorted([u1, u2 / 2], key=lambda x: x.to_string())


def test_perturb_roots_examples():
    assert perturb_roots(char_poly(symbol(P1, P2)), 4) == [series(R.gen(1), 0, Fraction(1, 8))]
    flat = perturb_roots(char_poly(symbol(P1, scalar("u[1]*D + 1/2*u[1,1]", SP))), 4)
    assert flat == [series(R.gen(1))]


def test_perturb_roots_residual_on_random_pencil():
    rng = random.Random(37)
    for _ in range(5):
        a = [rng.randint(1, 3) for _ in range(4)]
        A = op2([[f"u[1]*D + {a[0]}*eps^2*D^3", f"{a[1]}*eps^2*D^3"],
                 [f"{a[1]}*eps^2*D^3", f"u[2]*D + {a[2]}*eps^2*D^3 + {a[3]}*eps^4*D^5"]])
        B = op2([["D", "eps^2*D^3"], ["eps^2*D^3", "D"]])
        p = char_poly(symbol(B, A))
        for lam in perturb_roots(p, 4):
            assert all(x.is_zero() for x in evaluate_char_poly(p, lam))


def test_perturb_roots_errors():
    A = op2([["u[1]*D", "0"], ["0", "u[1]*D"]])
    B = op2([["D", "0"], ["0", "D"]])
    with pytest.raises(NotSemisimple):
        perturb_roots(char_poly(symbol(B, A)))
    with pytest.raises(EpsOrderMismatch):
        perturb_roots(char_poly(symbol(P1, P2)), 6)


# -- central invariants --------------------------------------------------------------

def test_central_invariants_kdv():
    ci = central_invariants(P1, P2, 4)
    assert ci.f == [R.one]
    assert ci.table() == [(1, 0, R.gen(1)), (1, 2, c("1/8")), (1, 4, R.zero)]
    assert ci.odd == []


def test_central_invariants_constant_rescaling():
    # B = 3: lambda_{2k} -> 9^k lambda_{2k}, f -> 9 f, c_{2k} unchanged
    s = Substitution.reciprocal(SP, SP.const(3))
    Q1, Q2 = push_bivector(s, P1), push_bivector(s, P2)
    ci = central_invariants(Q1, Q2, 4)
    assert ci.f == [c(9)]
    assert [lam[2] for lam in ci.roots] == [c(Fraction(9, 8))]
    assert ci.c == central_invariants(P1, P2, 4).c


def test_central_invariants_flags_odd_corrections():
    ci = central_invariants(P1, scalar("u[1]*D + 1/2*u[1,1] + eps*D^2", SP), 2)
    assert ci.odd == [(1, 1)]


def test_central_invariants_errors():
    B = op2([["D", "D"], ["D", "2*D"]])
    A = op2([["u[1]*D", "u[1]*D"], ["u[2]*D", "2*u[2]*D"]])
    with pytest.raises(NotCanonicalForm):
        central_invariants(B, A, 2)
    with pytest.raises(NotSemisimple):
        central_invariants(op2([["D", "0"], ["0", "D"]]), op2([["u[1]*D", "0"], ["0", "u[1]*D"]]))
    with pytest.raises(EpsOrderMismatch):
        central_invariants(P1, P2, 5)


# -- transformation behaviour ----------------------------------------------------------

def _jacobian_law(s, S):
    """``B^2 J A(B eps) J^T`` for a first-kind substitution, entry by entry."""
    n = s.space.n
    B = s.B.as_coefficient()
    J = [[q.as_coefficient().derivative(k + 1) for k in range(n)] for q in s.Q]

    def law(M):
        out = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                ser = []
                for k in range(S.eps_order + 1):
                    acc = B.ring.zero
                    for a in range(n):
                        for b in range(n):
                            acc = acc + J[i][a] * M[a][b][k] * J[j][b]
                    ser.append(acc * B ** (k + 2))
                out[i][j] = ser
        return out
    return law(S.A), law(S.B)


def test_symbol_law_under_first_kind():
    rng = random.Random(43)
    pencils = [(P1, P2),
               (op2([["D", "0"], ["0", "D"]], JetSpace(2, 2)),
                op2([["u[1]*D + 1/2*u[1,1]", "0"], ["0", "u[2]*D + 1/2*u[2,1] + eps^2*D^3"]],
                    JetSpace(2, 2)))]
    for Q1, Q2 in pencils:
        sp = Q1.space
        S = symbol(Q1, Q2)
        for _ in range(4):
            s = gen.substitution(rng, sp, "first")
            T = symbol(push_bivector(s, Q1), push_bivector(s, Q2))
            A, B = _jacobian_law(s, S)
            assert T.A == A and T.B == B


def test_second_kind_reciprocal_leaves_symbol_unchanged():
    rng = random.Random(47)
    S = symbol(P1, P2)
    for _ in range(5):
        B = gen.substitution(rng, SP, "second").B
        s = Substitution(SP, B, (SP.u(1),))
        assert s.is_second_kind
        assert symbol(push_bivector(s, P1), push_bivector(s, P2)) == S


def test_miura_leaves_eigenvalues_unchanged():
    rng = random.Random(53)
    roots = perturb_roots(char_poly(symbol(P1, P2)))
    for _ in range(5):
        s = gen.substitution(rng, SP, "miura")
        T = symbol(push_bivector(s, P1), push_bivector(s, P2))
        assert perturb_roots(char_poly(T)) == roots


def test_invariance_under_first_and_second_kind():
    rng = random.Random(59)
    base = central_invariants(P1, P2, 4)
    for kind in ("first", "second") * 3:
        s = gen.substitution(rng, SP, kind)
        new = central_invariants(push_bivector(s, P1, reexpress=True),
                                 push_bivector(s, P2, reexpress=True), 4)
        back = [q.eps_part(0).as_coefficient() for q in invert(s).Q]
        assert new.c == [{k: v.compose(back) for k, v in ci.items()} for ci in base.c]
