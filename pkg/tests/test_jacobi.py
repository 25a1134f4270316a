from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_jacobi

from mdscm.jacobi import (
    LEGENDRE,
    JacobiParams,
    build_basis,
    eval_jacobi,
    first_deriv_matrix,
    gauss_nodes_weights,
    jacobi_all,
    jacobi_deriv,
    jacobi_norms,
    jgl_nodes_weights,
    recurrence_coeffs,
)

PARAMS = [JacobiParams(c, d) for c in (-0.5, 0.0, 0.5) for d in (-0.5, 0.0, 0.5)]


def weighted_moment(params: JacobiParams, n: int) -> float:
    """``int_{-1}^{1} y^n (1-y)^c (1+y)^d dy`` through the Beta function."""
    # substitute y = 2s - 1 and expand y^n binomially in s
    # the alternating sum cancels badly in double precision
    with mp.workdps(40):
        c, d = mp.mpf(params.c), mp.mpf(params.d)
        total = mp.fsum(
            math.comb(n, r) * 2**r * (-1) ** (n - r) * mp.beta(d + r + 1, c + 1)
            for r in range(n + 1)
        )
        return float(2 ** (c + d + 1) * total)


# {{{ evaluation


def test_eval_examples():
    assert eval_jacobi(LEGENDRE, 0, 0.37) == 1.0
    assert eval_jacobi(LEGENDRE, 1, 0.5) == pytest.approx(0.5)
    assert eval_jacobi(LEGENDRE, 5, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_params_validation():
    with pytest.raises(ValueError):
        JacobiParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        JacobiParams(0.0, -1.5)


def test_legendre_coefficients():
    for j in range(1, 10):
        rc = recurrence_coeffs(LEGENDRE, j)
        assert rc.A == pytest.approx((2 * j + 1) / (j + 1))
        assert rc.B == 0.0
        assert rc.C == pytest.approx(j / (j + 1))


@pytest.mark.parametrize("params", PARAMS)
def test_recurrence_orthonormality(params):
    jmax = 40
    x, w = roots_jacobi(jmax + 5, params.c, params.d)
    p = jacobi_all(params, jmax, x)
    gram = (p * w) @ p.T / np.sqrt(np.outer(jacobi_norms(params, jmax), jacobi_norms(params, jmax)))
    assert np.allclose(gram, np.eye(jmax + 1), atol=1e-10)


@pytest.mark.parametrize("params", PARAMS)
def test_derivative_relation(params):
    N = 12
    y, _ = jgl_nodes_weights(params, N)
    for j in range(1, N):
        rc = recurrence_coeffs(params, j)
        lhs = eval_jacobi(params, j, y)
        rhs = (
            rc.Ahat * jacobi_deriv(params, j - 1, y)
            + rc.Bhat * jacobi_deriv(params, j, y)
            + rc.Chat * jacobi_deriv(params, j + 1, y)
        )
        assert np.allclose(lhs, rhs, atol=1e-10)


def test_derivative_matches_finite_differences():
    params = JacobiParams(0.5, -0.5)
    y = np.linspace(-0.9, 0.9, 7)
    h = 1e-6
    for j in range(6):
        fd = (eval_jacobi(params, j, y + h) - eval_jacobi(params, j, y - h)) / (2 * h)
        assert np.allclose(jacobi_deriv(params, j, y), fd, atol=1e-7)


def test_norms_closed_form():
    assert jacobi_norms(LEGENDRE, 4) == pytest.approx([2 / (2 * j + 1) for j in range(5)])


# }}}


# {{{ quadrature


def test_jgl_examples():
    x, w = jgl_nodes_weights(LEGENDRE, 1)
    assert x == pytest.approx([-1, 1]) and w == pytest.approx([1, 1])

    x, w = jgl_nodes_weights(LEGENDRE, 2)
    assert x == pytest.approx([-1, 0, 1], abs=1e-15)
    assert w == pytest.approx([1 / 3, 4 / 3, 1 / 3])

    _, w = jgl_nodes_weights(LEGENDRE, 8)
    assert w.sum() == pytest.approx(2.0)


def test_gauss_examples():
    x, w = gauss_nodes_weights(0)
    assert x == pytest.approx([0.0], abs=1e-15) and w == pytest.approx([2.0])

    x, w = gauss_nodes_weights(1)
    assert x == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)])
    assert w == pytest.approx([1.0, 1.0])

    x, w = gauss_nodes_weights(4)
    assert np.sum(w * x**2) == pytest.approx(2 / 3)


@pytest.mark.parametrize("params", PARAMS)
def test_gauss_matches_scipy(params):
    from mdscm.jacobi import jacobi_gauss

    x, w = jacobi_gauss(params, 15)
    xs, ws = roots_jacobi(15, params.c, params.d)
    assert np.allclose(x, xs, atol=1e-14)
    assert np.allclose(w, ws, rtol=1e-12)


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("N", [2, 5, 9])
def test_jgl_exactness(params, N):
    x, w = jgl_nodes_weights(params, N)
    assert x[0] == -1.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0) and np.all(w > 0)
    for n in range(2 * N):
        assert np.sum(w * x**n) == pytest.approx(weighted_moment(params, n), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    coeffs=st.lists(st.floats(-1, 1), min_size=1, max_size=12),
    c=st.sampled_from([-0.5, 0.0, 0.5]),
    d=st.sampled_from([-0.5, 0.0, 0.5]),
)
def test_jgl_random_polynomials(coeffs, c, d):
    params = JacobiParams(c, d)
    N = max(len(coeffs) // 2 + 1, 1)
    x, w = jgl_nodes_weights(params, N)
    quad = np.sum(w * np.polynomial.polynomial.polyval(x, coeffs))
    exact = sum(a * weighted_moment(params, n) for n, a in enumerate(coeffs))
    assert quad == pytest.approx(exact, abs=1e-12)


# }}}


# {{{ nodal basis


def test_basis_n1():
    b = build_basis(LEGENDRE, 1)
    assert b.l == pytest.approx(np.array([[0.5, 0.5], [-0.5, 0.5]]))


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("N", [1, 4, 8, 20])
def test_basis_identities(params, N):
    b = build_basis(params, N)
    # round-off in the expansion grows with N
    tol = 1e-12 if N <= 8 else 1e-10
    # sum of all Lagrange polynomials is P_0
    sums = b.l.sum(axis=1)
    assert sums[0] == pytest.approx(1.0)
    assert np.allclose(sums[1:], 0.0, atol=tol)

    assert np.allclose(b.lagrange(b.nodes), np.eye(N + 1), atol=tol)


def test_diff_matrix_examples():
    for N in (2, 5, 9):
        b = build_basis(JacobiParams(0.5, 0.5), N)
        D = first_deriv_matrix(b)
        y = b.nodes
        assert np.allclose(D @ np.ones(N + 1), 0.0, atol=1e-12)
        assert np.allclose(D @ y, 1.0, atol=1e-12)
        assert np.allclose(D @ y**2, 2 * y, atol=1e-11)


def test_basis_immutable():
    b = build_basis(LEGENDRE, 3)
    with pytest.raises(ValueError):
        b.nodes[0] = 0.0


# }}}
