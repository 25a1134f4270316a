from __future__ import annotations

import csv
import io
import math

import mpmath as mp
import numpy as np
import pytest

import oracles
from mdscm.assembly import (
    AssemblyError,
    assemble_first_order,
    assemble_mdfdm,
    assemble_penalty,
    boundary_lift,
    first_order_full,
    matrix_to_csv,
    penalty_full,
)
from mdscm.fracops import OrderField, frac_deriv_lagrange
from mdscm.jacobi import JacobiParams
from mdscm.mesh import (
    make_geometric,
    make_graded,
    make_uniform,
    mesh_from_boundaries,
)

MESHES = {
    "uniform": lambda: make_uniform(-1, 1, 6, 5),
    "graded": lambda: make_graded(-1, 1, 8, 6, 2.0, JacobiParams(0.5, 0.5)),
    "geometric": lambda: make_geometric(-1, 1, 10, 4, 0.5, JacobiParams(-0.5, -0.5)),
    "single": lambda: make_uniform(-1, 1, 1, 8),
}


def oracle_values(coeffs, alpha, x, a):
    """RL derivative of ``sum c_m (x - a)^m`` at each target."""
    alpha = np.broadcast_to(alpha, np.shape(x))
    return np.array([float(oracles.rl_derivative(coeffs, al, xi, a)) for al, xi in zip(alpha, x)])


def poly_full(mesh, coeffs):
    z = mesh.full_nodes - mesh.x_L
    return np.polynomial.polynomial.polyval(z, [float(c) for c in coeffs])


# {{{ fractional matrix


@pytest.mark.parametrize("kind", sorted(MESHES))
@pytest.mark.parametrize("alpha", [0.3, 1.1, 1.5, 1.9])
def test_polynomial_exactness(kind, alpha):
    mesh = MESHES[kind]()
    deg = min(mesh.degrees)
    # p(x_L) = p'(x_L) = 0 keeps the oracle free of the singular lift
    coeffs = [0, 0] + [mp.mpf(1) / (m + 1) for m in range(deg - 1)]
    D = assemble_mdfdm(mesh, alpha)
    got = D.full @ poly_full(mesh, coeffs)
    want = oracle_values(coeffs, alpha, mesh.nodes, mesh.x_L)
    assert np.max(np.abs(got - want) / np.maximum(np.abs(want), 1.0)) < 1e-8


def test_single_element_quadratic():
    mesh = make_uniform(-1, 1, 1, 4)
    D = assemble_mdfdm(mesh, 1.5)
    got = D.full @ (mesh.full_nodes + 1) ** 2
    want = 2 / math.gamma(1.5) * (mesh.nodes + 1) ** 0.5
    assert got == pytest.approx(want, rel=1e-10)


def test_constant_function():
    mesh = make_graded(-1, 1, 5, 4, 2.0)
    for alpha in (0.2, 0.7):
        D = assemble_mdfdm(mesh, alpha)
        want = (mesh.nodes - mesh.x_L) ** (-alpha) / math.gamma(1 - alpha)
        assert D.full.sum(axis=1) == pytest.approx(want, rel=1e-10)


def test_variable_order_rows():
    mesh = make_uniform(-1, 1, 4, 4)
    order = OrderField.from_expression("1.1 + (x+1)/2.5")
    D = assemble_mdfdm(mesh, order)
    coeffs = [0, 0, 1, mp.mpf(1) / 3, mp.mpf(1) / 5]
    got = D.full @ poly_full(mesh, coeffs)
    want = oracle_values(coeffs, order(mesh.nodes), mesh.nodes, mesh.x_L)
    assert np.max(np.abs(got - want) / np.maximum(np.abs(want), 1.0)) < 1e-8
    assert D.alpha == pytest.approx(order(mesh.nodes))


def test_block_structure():
    # M = 5, N = 4: element i never sees basis functions of later elements
    mesh = make_uniform(-1, 1, 5, 4)
    D = assemble_mdfdm(mesh, 1.5).full
    owner = mesh.target_elements
    for i in range(mesh.M):
        rows = np.flatnonzero(owner == i)
        for j in range(mesh.M):
            cols = mesh.dof_map[j][1:-1]
            block = D[np.ix_(rows, cols)]
            if j > i:
                assert np.all(block == 0.0)
            else:
                assert np.all(block != 0.0)
        # phi_k for k > i + 1 vanishes on element i and before
        for k in range(i + 2, mesh.M + 1):
            assert np.all(D[rows, mesh.interface_index(k)] == 0.0)


def test_block_slices():
    mesh = make_uniform(-1, 1, 3, 4)
    sl = assemble_mdfdm(mesh, 1.5).block_slices()
    assert [(s.start, s.stop) for s in sl["elements"]] == [(0, 3), (3, 6), (6, 9)]
    assert (sl["interfaces"][0].start, sl["interfaces"][0].stop) == (9, 11)


def test_scaling_covariance():
    ref = assemble_mdfdm(make_uniform(-1, 1, 4, 5), 1.3).full
    same = assemble_mdfdm(make_uniform(0, 2, 4, 5), 1.3).full
    wide = assemble_mdfdm(make_uniform(0, 4, 4, 5), 1.3).full
    assert np.allclose(same, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())
    assert np.allclose(wide, 0.5**1.3 * ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


def test_time_dependent_order_rejected():
    mesh = make_uniform(-1, 1, 2, 3)
    order = OrderField.from_expression("1.5 + t")
    assemble_mdfdm(mesh, order, t=0.2)
    with pytest.raises(AssemblyError, match="t=0.5"):
        assemble_mdfdm(mesh, order, t=0.5)


def test_matrix_is_read_only_and_deterministic():
    mesh = make_uniform(-1, 1, 3, 4)
    a = assemble_mdfdm(mesh, 1.7)
    with pytest.raises(ValueError):
        a.full[0, 0] = 1.0
    assert np.array_equal(a.full, assemble_mdfdm(mesh, 1.7).full)
    assert np.asarray(a).shape == (mesh.n_unknowns, mesh.n_unknowns)


def test_hybrid_options_agree():
    mesh = make_uniform(-1, 1, 6, 6)
    auto = assemble_mdfdm(mesh, 1.5).full
    fixed = assemble_mdfdm(mesh, 1.5, delta=0.5, L=60).full
    assert np.allclose(auto, fixed, rtol=1e-9, atol=1e-9 * np.abs(auto).max())


# }}}


# {{{ penalty and first order


def test_penalty_examples():
    mesh = make_uniform(-1, 1, 4, 4)
    assert not np.any(assemble_penalty(mesh, 0.0))

    R = assemble_penalty(mesh, 3.0)
    x = mesh.nodes
    assert np.allclose(R @ (x**3 - x), 0.0, atol=1e-11)
    with pytest.raises(ValueError):
        assemble_penalty(mesh, -1.0)


def test_penalty_abs_jump():
    mesh = make_uniform(-1, 1, 4, 4)
    tau = 5.0
    v = penalty_full(mesh, tau) @ np.abs(mesh.full_nodes)
    row = mesh.interface_index(2)
    assert v[row] == pytest.approx(2 * tau)
    assert np.allclose(np.delete(v, row), 0.0, atol=1e-12)


def test_penalty_structure():
    mesh = make_uniform(-1, 1, 5, 3)
    R = assemble_penalty(mesh, 1.0)
    n0 = mesh.n_interior
    assert not np.any(R[:n0])
    tilde = R[n0:, n0:]
    assert np.all(np.triu(tilde, 2) == 0) and np.all(np.tril(tilde, -2) == 0)
    for i in range(mesh.M):
        cols = mesh.dof_map[i][1:-1]
        rows = {int(r) for r in np.flatnonzero(np.any(R[n0:, cols] != 0, axis=1))}
        assert rows == {r for r in (i - 1, i) if 0 <= r < mesh.M - 1}


def test_first_order_examples():
    mesh = make_graded(-1, 1, 4, 3, 2.0)
    D1 = assemble_first_order(mesh)
    x = mesh.nodes
    # interface rows use left-element derivatives, exact for quadratics
    full = first_order_full(mesh)
    xf = mesh.full_nodes
    assert full @ xf == pytest.approx(np.ones_like(x))
    assert np.allclose(full @ np.ones_like(xf), 0.0, atol=1e-12)
    assert np.allclose(full @ xf**2, 2 * x, atol=1e-11)
    assert D1.shape == (mesh.n_unknowns, mesh.n_unknowns)


# }}}


# {{{ boundary lift


def test_boundary_lift_examples():
    mesh = make_uniform(-1, 1, 3, 4)
    D = assemble_mdfdm(mesh, 1.5)
    f, r = boundary_lift(mesh, D, 1.0, 10.0, 0.0, 0.0)
    assert not np.any(f) and not np.any(r)

    single = make_uniform(-1, 1, 1, 4)
    _, r = boundary_lift(single, assemble_mdfdm(single, 1.5), 0.0, 10.0, 1.0, 2.0)
    assert not np.any(r)

    f, r = boundary_lift(mesh, D, 0.0, 10.0, 1.0, 0.0)
    nz = set(np.flatnonzero(r))
    assert nz == {mesh.interface_index(1)}
    f, r = boundary_lift(mesh, D, 0.0, 10.0, 0.0, 1.0)
    assert set(np.flatnonzero(r)) == {mesh.interface_index(mesh.M - 1)}


def test_boundary_lift_left_history():
    # phi_0 restricted to element 1 is the Lagrange polynomial L_0
    mesh = make_uniform(-1, 1, 3, 4)
    alpha = 1.5
    D = assemble_mdfdm(mesh, alpha)
    f, _ = boundary_lift(mesh, D, 0.0, 0.0, 1.0, 0.0)
    h = mesh.widths[0]
    basis = mesh.basis(0)
    rows = np.flatnonzero(mesh.target_elements >= 1)
    y = mesh.to_reference(0, mesh.nodes[rows])
    want = (2 / h) ** alpha * frac_deriv_lagrange(basis, alpha, y, side="beyond", j=0)
    assert f[rows] == pytest.approx(want, rel=1e-12)

    # and the same from the monomial oracle of L_0 in the reference variable
    coeffs = oracles.shift_coeffs(oracles.lagrange_coeffs(basis.nodes, 0), 0, -1)
    oracle = [float(oracles.history_term(coeffs, alpha, v)) for v in y]
    assert f[rows] == pytest.approx((2 / h) ** alpha * np.array(oracle), rel=1e-9)

    # phi_M only acts inside the last element
    f, _ = boundary_lift(mesh, D, 0.0, 0.0, 0.0, 1.0)
    assert not np.any(f[mesh.target_elements < mesh.M - 1])


def test_boundary_lift_mesh_mismatch():
    a, b = make_uniform(-1, 1, 2, 3), make_uniform(-1, 1, 2, 3)
    with pytest.raises(ValueError):
        boundary_lift(b, assemble_mdfdm(a, 1.5), 0.0, 0.0, 1.0, 0.0)


# }}}


# {{{ spectra and export


@pytest.mark.parametrize("N", [4, 8])
def test_penalty_shifts_spectrum(N):
    mesh = make_uniform(-1, 1, 8, N)
    for alpha, tau in ((1.01, 1.0), (1.99, 100.0)):
        D = assemble_mdfdm(mesh, alpha).matrix
        assert np.max(np.linalg.eigvals(D).real) > 0
        R = assemble_penalty(mesh, tau)
        assert np.max(np.linalg.eigvals(D + R).real) < 0


def test_matrix_csv():
    A = np.array([[0.0, 1.5], [0.1, 0.0]])
    rows = list(csv.reader(io.StringIO(matrix_to_csv(A))))
    assert rows == [["row", "col", "value"], ["0", "1", "1.5"], ["1", "0", "0.10000000000000001"]]
    mesh = mesh_from_boundaries([-1, 0, 1], 3)
    text = matrix_to_csv(assemble_mdfdm(mesh, 1.5).matrix)
    assert text == matrix_to_csv(assemble_mdfdm(mesh, 1.5).matrix)


# }}}
