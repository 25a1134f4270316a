from __future__ import annotations

import csv
import io

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from mdscm.analysis import (
    ConvergenceRow,
    MeshSpec,
    condition_number_l2,
    convergence_study,
    convergence_to_csv,
    eigenvalues,
    linf_error,
)
from mdscm.assembly import assemble_mdfdm, assemble_penalty
from mdscm.fracops import OrderField
from mdscm.mesh import make_uniform
from mdscm.solvers import HelmholtzProblem, example41_rhs, helmholtz_matrix, solve_helmholtz


def sin_exact(x):
    return np.sin(np.pi * x)


def ex41(alpha=1.5, tau=1000.0):
    order = OrderField.constant(alpha)
    return HelmholtzProblem(order=order, f=example41_rhs(order), tau=tau)


# {{{ spectra


def test_eigen_examples():
    rep = eigenvalues(np.eye(5))
    assert len(rep) == 5 and np.all(rep.eigenvalues == 1.0)

    rep = eigenvalues(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert rep.eigenvalues == pytest.approx([-1j, 1j])
    assert rep.max_real == pytest.approx(0.0, abs=1e-15)


def test_eigen_fig5_left():
    mesh = make_uniform(-1, 1, 8, 4)
    A = assemble_mdfdm(mesh, 1.01).matrix + assemble_penalty(mesh, 1.0)
    rep = eigenvalues(A, tau=1.0, alpha=1.01, M=8, N=4)
    assert rep.max_real < 0
    assert rep.tag["M"] == 8


def test_eigen_rejects_bad_input():
    with pytest.raises(ValueError):
        eigenvalues(np.ones((2, 3)))
    with pytest.raises(ValueError):
        eigenvalues(np.array([[np.inf]]))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_eigen_oracles(seed):
    A = np.random.default_rng(seed).standard_normal((20, 20))
    lam = eigenvalues(A).eigenvalues
    assert lam.size == 20
    assert np.sum(lam).real == pytest.approx(np.trace(A), abs=1e-8)
    assert abs(np.sum(lam).imag) < 1e-8

    lu, piv = la.lu_factor(A)
    det = np.prod(np.diag(lu)) * (-1) ** np.count_nonzero(piv != np.arange(20))
    assert np.prod(lam).real == pytest.approx(det, rel=1e-6)

    # conjugate pairing and deterministic ordering
    assert np.allclose(np.sort_complex(lam), np.sort_complex(lam.conj()), atol=1e-8)
    keys = list(zip(lam.real, lam.imag))
    assert keys == sorted(keys)


def test_spectrum_csv():
    rep = eigenvalues(np.diag([2.0, -1.0]))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows == [["re", "im"], ["-1", "0"], ["2", "0"]]


# }}}


# {{{ condition numbers


def test_cond_examples():
    assert condition_number_l2(np.eye(4)) == pytest.approx(1.0)
    assert condition_number_l2(np.diag([10.0, 0.1])) == pytest.approx(100.0)
    assert condition_number_l2(np.zeros((3, 3))) == float("inf")


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_cond_transpose(seed):
    A = np.random.default_rng(seed).standard_normal((12, 12))
    assert condition_number_l2(A) == pytest.approx(condition_number_l2(A.T), rel=1e-10)


def test_penalty_slows_condition_growth():
    # growth of the condition number from M = 8 to M = 32 is smaller with penalty
    conds = {}
    for tau in (0.0, 1000.0):
        vals = []
        for M in (8, 16, 32):
            mesh = make_uniform(-1, 1, M, 4)
            A = helmholtz_matrix(mesh, assemble_mdfdm(mesh, 1.5), 0.0, tau)
            vals.append(condition_number_l2(A))
        conds[tau] = vals
    growth = {tau: v[-1] / v[0] for tau, v in conds.items()}
    assert growth[1000.0] < growth[0.0]


# }}}


# {{{ errors and convergence


def test_linf_examples():
    rep = solve_helmholtz(ex41(), make_uniform(-1, 1, 4, 16))
    assert linf_error(rep, lambda x: np.interp(x, rep.x, rep.u)) == 0.0
    shifted = linf_error(rep, lambda x: np.interp(x, rep.x, rep.u) + 1e-5)
    assert shifted == pytest.approx(1e-5, rel=1e-6)
    assert linf_error(rep, sin_exact) <= 1e-8


def test_p_sweep_decreases():
    rows = convergence_study(
        ex41(1.1), sin_exact, {"p": [4, 8, 12, 16]}, MeshSpec(kind="uniform", M=4)
    )
    errs = [r.error for r in rows]
    assert [r.value for r in rows] == [4, 8, 12, 16]
    # N = 12 already sits at the round-off floor of about 1e-12
    assert all(b < a or a < 1e-10 for a, b in zip(errs, errs[1:]))
    assert max(errs[2:]) < 1e-10


def test_h_sweep_decreases():
    rows = convergence_study(
        ex41(1.5), sin_exact, {"h": [4, 8, 16, 32]}, MeshSpec(kind="uniform", N=4)
    )
    errs = [r.error for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert all(r.sweep_var == "h" and r.mesh_kind == "uniform" for r in rows)


def test_single_point_matches_direct_solve():
    rows = convergence_study(ex41(), sin_exact, {"p": [8]}, MeshSpec(M=4), taus=[10.0])
    direct = solve_helmholtz(ex41(tau=10.0), make_uniform(-1, 1, 4, 8))
    assert len(rows) == 1
    assert rows[0].error == linf_error(direct, sin_exact)
    assert rows[0].tau == 10.0


def test_sweep_order_and_failures():
    rows = convergence_study(
        ex41(), sin_exact, {"p": [1, 4]}, MeshSpec(M=2), taus=[0.0, 100.0]
    )
    assert [(r.value, r.tau) for r in rows] == [(1, 0.0), (1, 100.0), (4, 0.0), (4, 100.0)]
    assert not rows[0].ok and np.isnan(rows[0].error) and "MeshError" in rows[0].failure
    assert rows[2].ok and rows[2].error >= 0


def test_sweep_validation():
    with pytest.raises(ValueError):
        convergence_study(ex41(), sin_exact, {"p": []}, MeshSpec())
    with pytest.raises(ValueError):
        convergence_study(ex41(), sin_exact, {"x": [4]}, MeshSpec())
    with pytest.raises(ValueError):
        convergence_study(ex41(), sin_exact, {"p": [4], "h": [4]}, MeshSpec())


def test_convergence_csv():
    rows = [ConvergenceRow("p", 4, 0.5, 1000.0, "uniform")]
    assert convergence_to_csv(rows) == "sweep_var,value,tau,error\np,4,1000,0.5\n"


def test_mesh_spec_kinds():
    for kind, q in (("uniform", None), ("graded", 2.0), ("geometric", 0.5), ("composite", 0.5)):
        mesh = MeshSpec(kind=kind, M=6, N=3, q=q, M_geo=2).build(-1, 1)
        assert mesh.M == 6
    with pytest.raises(ValueError):
        MeshSpec(kind="random").build(-1, 1)


# }}}
