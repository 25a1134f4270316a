"""Spectra, condition numbers and convergence tables."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from mdscm.jacobi import JacobiParams
from mdscm.mesh import (
    ElementMesh,
    make_composite_left,
    make_geometric,
    make_graded,
    make_uniform,
)
from mdscm.solvers import HelmholtzProblem, SolveReport, solve_helmholtz

logger = logging.getLogger(__name__)


class AnalysisError(RuntimeError):
    pass


# {{{ spectra


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues sorted by real part, then imaginary part.

    .. attribute:: tag

        Free-form description of the matrix (``tau``, ``alpha``, ``M``, ...).
    """

    eigenvalues: np.ndarray = field(repr=False)
    tag: Mapping[str, object] = field(default_factory=dict)

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def __len__(self) -> int:
        return self.eigenvalues.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re", "im"])
        for z in self.eigenvalues:
            writer.writerow([f"{z.real:.17g}", f"{z.imag:.17g}"])
        return buf.getvalue()


def _check_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def eigenvalues(A, **tag) -> SpectrumReport:
    """Full spectrum of a dense real matrix.

    LAPACK's nonsymmetric driver (Hessenberg reduction and shifted QR)
    does the work; complex eigenvalues of a real matrix come out in exact
    conjugate pairs.
    """
    A = _check_square(A)
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(f"eigenvalue iteration did not converge: {exc}") from exc

    lam = np.asarray(lam, dtype=np.complex128)
    # purge the sign of zero so that sorting and CSV output are stable
    lam = (lam.real + 0.0) + 1j * (lam.imag + 0.0)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    lam.setflags(write=False)
    return SpectrumReport(eigenvalues=lam, tag=dict(tag))


def condition_number_l2(A) -> float:
    """``sigma_max / sigma_min``; infinite for singular matrices."""
    A = _check_square(A)
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


# }}}


# {{{ errors and convergence


def linf_error(report: SolveReport, exact: Callable) -> float:
    """Maximum nodal error, boundary nodes included."""
    ref = np.asarray(exact(report.x), dtype=np.float64)
    return float(np.max(np.abs(report.u - ref)))


@dataclass(frozen=True)
class ConvergenceRow:
    """One point of a refinement study; failed solves carry ``error = nan``."""

    sweep_var: str
    value: int
    error: float
    tau: float
    mesh_kind: str
    q: float | None = None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None


@dataclass(frozen=True)
class MeshSpec:
    """Recipe for a mesh on an interval; ``M`` and ``N`` are swept."""

    kind: str = "uniform"
    M: int = 4
    N: int = 4
    q: float | None = None
    params: JacobiParams = JacobiParams()
    split: float | None = None
    M_geo: int = 0

    def build(self, x_L: float, x_R: float) -> ElementMesh:
        if self.kind == "uniform":
            return make_uniform(x_L, x_R, self.M, self.N, self.params)
        if self.kind == "graded":
            return make_graded(x_L, x_R, self.M, self.N, self.q, self.params)
        if self.kind == "geometric":
            return make_geometric(x_L, x_R, self.M, self.N, self.q, self.params)
        if self.kind == "composite":
            split = 0.5 * (x_L + x_R) if self.split is None else self.split
            return make_composite_left(
                x_L, split, x_R, self.M, self.M_geo, self.N, self.q, self.params
            )
        raise ValueError(f"unknown mesh kind {self.kind!r}")


SWEEP_FIELDS = {"p": "N", "h": "M"}


def convergence_study(
    template: HelmholtzProblem,
    exact: Callable,
    sweep: Mapping[str, Sequence[int]],
    mesh: MeshSpec,
    taus: Sequence[float] | None = None,
) -> list[ConvergenceRow]:
    """Solve *template* over a p-sweep (``{"p": [N, ...]}``) or h-sweep
    (``{"h": [M, ...]}``) and every penalty in *taus*.

    Rows follow sweep order, then *taus* order. A solve that raises becomes
    a row with ``error = nan`` and the message in ``failure``.
    """
    if len(sweep) != 1:
        raise ValueError(f"sweep must name exactly one of 'p' or 'h': {dict(sweep)}")
    (var, values), = sweep.items()
    if var not in SWEEP_FIELDS:
        raise ValueError(f"unknown sweep variable {var!r}")
    values = list(values)
    if not values:
        raise ValueError("empty sweep")
    taus = [template.tau] if taus is None else list(taus)
    if not taus:
        raise ValueError("empty penalty list")

    rows = []
    x_L, x_R = template.interval
    for v in values:
        spec = dataclasses.replace(mesh, **{SWEEP_FIELDS[var]: int(v)})
        for tau in taus:
            problem = dataclasses.replace(template, tau=float(tau))
            try:
                report = solve_helmholtz(problem, spec.build(x_L, x_R))
                err, failure = linf_error(report, exact), None
            except Exception as exc:  # noqa: BLE001 -- recorded, sweep goes on
                logger.warning("solve failed for %s=%s, tau=%s: %s", var, v, tau, exc)
                err, failure = float("nan"), f"{type(exc).__name__}: {exc}"
            rows.append(
                ConvergenceRow(
                    sweep_var=var,
                    value=int(v),
                    error=err,
                    tau=float(tau),
                    mesh_kind=mesh.kind,
                    q=mesh.q,
                    failure=failure,
                )
            )
    return rows


def convergence_to_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sweep_var", "value", "tau", "error"])
    for r in rows:
        writer.writerow([r.sweep_var, r.value, f"{r.tau:.17g}", f"{r.error:.17g}"])
    return buf.getvalue()


# }}}
