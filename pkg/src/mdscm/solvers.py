"""Stabilized collocation solvers for the fractional Helmholtz and Burgers problems."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la

from mdscm.assembly import (
    FracDiffMatrix,
    assemble_first_order,
    assemble_mdfdm,
    assemble_penalty,
    boundary_lift,
)
from mdscm.fracops import OrderField, as_order_field
from mdscm.mesh import ElementMesh

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


class InstabilityError(SolverError):
    """Raised when the time stepper produces non-finite values."""

    def __init__(self, message: str, step: int, history: list[float]) -> None:
        super().__init__(message)
        self.step = step
        self.history = history


class UnstableSpectrumWarning(RuntimeWarning):
    pass


# {{{ problems and reports


@dataclass(frozen=True)
class HelmholtzProblem:
    """``lam**2 u - D^alpha u = f`` on ``(x_L, x_R)`` with Dirichlet data."""

    order: OrderField
    f: Callable[[np.ndarray], np.ndarray] | np.ndarray
    lam: float = 0.0
    u_L: float = 0.0
    u_R: float = 0.0
    tau: float = 0.0
    interval: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", as_order_field(self.order))
        if self.tau < 0:
            raise ValueError(f"penalty parameter must be non-negative: {self.tau}")


@dataclass(frozen=True)
class BurgersProblem:
    """``u_t + u u_x = eps D^alpha(x,t) u`` with homogeneous Dirichlet data."""

    order: OrderField
    u0: Callable[[np.ndarray], np.ndarray]
    epsilon: float = 1.0
    dt: float = 1.0e-3
    t_final: float = 1.0
    tau: float = 0.0
    penalize_first_step: bool = False
    penalize_explicit: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", as_order_field(self.order))
        if not self.epsilon > 0:
            raise ValueError(f"viscosity must be positive: {self.epsilon}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive: {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"final time must be non-negative: {self.t_final}")
        if self.tau < 0:
            raise ValueError(f"penalty parameter must be non-negative: {self.tau}")

    @property
    def nsteps(self) -> int:
        n = round(self.t_final / self.dt)
        if abs(n * self.dt - self.t_final) > 1.0e-12 * max(1.0, self.t_final):
            raise ValueError(
                f"time step {self.dt} does not divide final time {self.t_final}"
            )
        return n


@dataclass
class SolveReport:
    """Solution on the mesh nodes, boundary values included.

    ``x`` and ``u`` are sorted by coordinate; ``u_unknowns`` keeps the global
    collocation ordering.
    """

    x: np.ndarray
    u: np.ndarray
    u_unknowns: np.ndarray
    mesh: ElementMesh = field(repr=False)
    snapshots: dict[float, np.ndarray] = field(default_factory=dict, repr=False)
    diagnostics: dict[str, float] = field(default_factory=dict)

    def interpolate(self, xq, t: float | None = None) -> np.ndarray:
        """Evaluate the piecewise polynomial solution at the points *xq*."""
        from mdscm.mesh import interpolate_nodal

        u = self.u if t is None else self.snapshots[t]
        full = np.empty(self.mesh.n_full)
        full[self.mesh.sorted_order()] = u
        return interpolate_nodal(self.mesh, full, xq)

    def to_csv(self, t: float | None = None) -> str:
        """Columns ``x, u``; *t* selects a snapshot of a time-dependent run."""
        u = self.u if t is None else self.snapshots[t]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "u"])
        for xi, ui in zip(self.x, u):
            writer.writerow([f"{xi:.17g}", f"{ui:.17g}"])
        return buf.getvalue()


def _with_boundary(mesh: ElementMesh, u: np.ndarray, u_L: float, u_R: float):
    full = np.concatenate([u, [u_L, u_R]])
    perm = mesh.sorted_order()
    return mesh.full_nodes[perm], full[perm]


# }}}


# {{{ helmholtz


def helmholtz_matrix(
    mesh: ElementMesh, D: FracDiffMatrix, lam: float, tau: float
) -> np.ndarray:
    """System matrix ``lam**2 I - D^alpha - R``."""
    n = mesh.n_unknowns
    return lam**2 * np.eye(n) - D.matrix - assemble_penalty(mesh, tau)


def _rhs_values(problem: HelmholtzProblem, x: np.ndarray) -> np.ndarray:
    f = problem.f(x) if callable(problem.f) else np.asarray(problem.f, dtype=np.float64)
    f = np.broadcast_to(np.asarray(f, dtype=np.float64), x.shape)
    bad = ~np.isfinite(f)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise SolverError(f"right-hand side is not finite at node {i} (x={x[i]!r})")
    return f


def solve_helmholtz(
    problem: HelmholtzProblem,
    mesh: ElementMesh,
    *,
    D: FracDiffMatrix | None = None,
    **assembly_kwargs,
) -> SolveReport:
    """Solve ``(lam**2 I - D^alpha - R) u = f + f_lift - r`` by dense LU."""
    if (mesh.x_L, mesh.x_R) != tuple(problem.interval):
        raise ValueError(
            f"mesh [{mesh.x_L}, {mesh.x_R}] does not match problem interval "
            f"{problem.interval}"
        )

    t0 = time.perf_counter()
    if D is None:
        D = assemble_mdfdm(mesh, problem.order, **assembly_kwargs)
    A = helmholtz_matrix(mesh, D, problem.lam, problem.tau)
    f_adjust, r = boundary_lift(mesh, D, problem.lam, problem.tau, problem.u_L, problem.u_R)
    b = _rhs_values(problem, mesh.nodes) + f_adjust - r
    t1 = time.perf_counter()

    lu, piv = la.lu_factor(A, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        cond = np.linalg.cond(A)
        raise SingularSystemError(f"Helmholtz system is singular (condition {cond:.3e})")
    u = la.lu_solve((lu, piv), b)
    t2 = time.perf_counter()

    x, u_all = _with_boundary(mesh, u, problem.u_L, problem.u_R)
    return SolveReport(
        x=x,
        u=u_all,
        u_unknowns=u,
        mesh=mesh,
        diagnostics={
            "residual": float(np.max(np.abs(A @ u - b))),
            "assembly_time": t1 - t0,
            "solve_time": t2 - t1,
        },
    )


# }}}


# {{{ burgers


class _MatrixCache:
    """Fractional matrices keyed by time level, keeping the latest few."""

    def __init__(self, mesh: ElementMesh, order: OrderField, dt: float, slots: int = 3):
        self.mesh = mesh
        self.order = order
        self.dt = dt
        self.slots = slots
        self.store: dict[int, np.ndarray] = {}
        self.assemblies = 0

    def __call__(self, level: int) -> np.ndarray:
        if not self.order.time_dependent:
            level = 0
        if level not in self.store:
            D = assemble_mdfdm(self.mesh, self.order, t=level * self.dt)
            self.store[level] = D.matrix
            self.assemblies += 1
            while len(self.store) > self.slots:
                del self.store[min(self.store)]
        return self.store[level]


def max_real_eigenvalue(A: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(A).real))


def solve_burgers(
    problem: BurgersProblem,
    mesh: ElementMesh,
    snapshot_times=(),
    *,
    check_spectrum: bool = False,
) -> SolveReport:
    """March the Crank-Nicolson/leapfrog scheme to ``t_final``.

    For ``n >= 1``::

        (I - dt eps (D^{n+1} + R)) u^{n+1}
            = (I + dt eps D^{n-1}) u^{n-1} - 2 dt diag(u^n) D1 u^n

    started by the explicit step
    ``u^1 = u^0 + dt eps D^0 u^0 - dt diag(u^0) D1 u^0``.

    ``problem.penalize_first_step`` adds ``R`` to the starting step and
    ``problem.penalize_explicit`` adds it to ``D^{n-1}``. The latter is needed
    on strongly graded meshes, where the unpenalized explicit term has
    eigenvalues with large positive real part and the scheme diverges.
    """
    dt, eps = problem.dt, problem.epsilon
    nsteps = problem.nsteps

    steps = {}
    for ts in snapshot_times:
        k = round(ts / dt)
        if abs(k * dt - ts) > 0.5 * dt or not 0 <= k <= nsteps:
            raise ValueError(f"snapshot time {ts} is not on the step grid")
        steps[k] = float(ts)
    steps.setdefault(nsteps, problem.t_final)

    n = mesh.n_unknowns
    eye = np.eye(n)
    D1 = assemble_first_order(mesh)
    R = assemble_penalty(mesh, problem.tau)
    frac = _MatrixCache(mesh, problem.order, dt)

    if check_spectrum:
        lead = max_real_eigenvalue(frac(0) + R)
        if lead > 0:
            warnings.warn(
                f"penalized fractional operator has an eigenvalue with real part "
                f"{lead:.3e} > 0; time stepping may be unstable",
                UnstableSpectrumWarning,
                stacklevel=2,
            )

    t0 = time.perf_counter()
    u_prev = np.asarray(problem.u0(mesh.nodes), dtype=np.float64).copy()
    snaps: dict[float, np.ndarray] = {}
    history = [float(np.max(np.abs(u_prev), initial=0.0))]

    def record(k: int, u: np.ndarray) -> None:
        if k in steps:
            snaps[steps[k]] = _with_boundary(mesh, u, 0.0, 0.0)[1]

    record(0, u_prev)
    if nsteps == 0:
        u = u_prev
    else:
        implicit_first = R if problem.penalize_first_step else 0.0
        u = (
            u_prev
            + dt * eps * (frac(0) + implicit_first) @ u_prev
            - dt * u_prev * (D1 @ u_prev)
        )
        history.append(float(np.max(np.abs(u), initial=0.0)))
        _check_state(u, 1, history)
        record(1, u)

    factor = None
    factor_level = None
    for k in range(1, nsteps):
        level = k + 1 if problem.order.time_dependent else 0
        if factor is None or level != factor_level:
            A = eye - dt * eps * (frac(k + 1) + R)
            factor = la.lu_factor(A)
            factor_level = level

        explicit = frac(k - 1) + R if problem.penalize_explicit else frac(k - 1)
        with np.errstate(over="ignore", invalid="ignore"):
            g = u_prev + dt * eps * (explicit @ u_prev) - 2.0 * dt * u * (D1 @ u)
        _check_state(g, k + 1, history)
        u_prev, u = u, la.lu_solve(factor, g, check_finite=False)

        history.append(float(np.max(np.abs(u), initial=0.0)))
        _check_state(u, k + 1, history)
        record(k + 1, u)

    x, u_all = _with_boundary(mesh, u, 0.0, 0.0)
    return SolveReport(
        x=x,
        u=u_all,
        u_unknowns=u,
        mesh=mesh,
        snapshots=snaps,
        diagnostics={
            "steps": float(nsteps),
            "assemblies": float(frac.assemblies),
            "max_abs_u": float(max(history)),
            "time": time.perf_counter() - t0,
        },
    )


def _check_state(u: np.ndarray, step: int, history: list[float]) -> None:
    if not np.all(np.isfinite(u)):
        tail = ", ".join(f"{v:.3e}" for v in history[-10:])
        raise InstabilityError(
            f"non-finite solution at step {step}; recent max|u|: [{tail}]",
            step=step,
            history=list(history),
        )


# }}}


# {{{ exact solutions used in the examples


def example41_rhs(order: OrderField, lam: float = 0.0, L_terms: int = 50):
    """Right-hand side for the exact solution ``sin(pi x)`` on ``[-1, 1]``."""
    from mdscm.fracops import sin_rl_series

    def f(x):
        return lam**2 * np.sin(np.pi * x) - sin_rl_series(order(x), x, L_terms)

    return f


def example42_exact(order: OrderField):
    """Exact solution ``(1 - x) (1 + x)**(alpha(x) - 1)``."""

    def u(x):
        a = order(x)
        return (1 - x) * (1 + x) ** (a - 1)

    return u


def example42_rhs(order: OrderField, lam: float = 0.0):
    r"""Right-hand side ``lam**2 u + Gamma(1 + alpha(x))``."""
    exact = example42_exact(order)

    def f(x):
        a = order(x)
        return lam**2 * exact(x) + np.vectorize(math.gamma)(1 + a)

    return f


# }}}
