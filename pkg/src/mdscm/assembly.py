"""Global matrices of the multi-domain collocation scheme.

Every routine first builds a "full" operator whose columns run over all
nodes (unknowns followed by ``x_L`` and ``x_R``) and whose rows are the
collocation targets (the unknowns). The square system matrix is the leading
block; the two boundary columns give the lifting vectors.

Targets at an interface ``x_k`` are evaluated as the right endpoint of the
element to their left, both for the fractional and the first derivative.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from mdscm.fracops import OrderField, as_order_field, frac_deriv_lagrange
from mdscm.mesh import ElementMesh

logger = logging.getLogger(__name__)


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FracDiffMatrix:
    """Multi-domain fractional differentiation matrix and its boundary columns.

    .. attribute:: full

        Array of shape ``(n, n + 2)``: the last two columns hold the
        derivatives of the boundary basis functions at the targets.
    """

    full: np.ndarray = field(repr=False)
    mesh: ElementMesh = field(repr=False)
    order: OrderField
    t: float = 0.0
    alpha: np.ndarray = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        n = self.mesh.n_unknowns
        return self.full[:, :n]

    @property
    def boundary_columns(self) -> np.ndarray:
        n = self.mesh.n_unknowns
        return self.full[:, n:]

    def block_slices(self) -> dict[str, list[slice]]:
        """Row/column ranges of the element blocks and the interface block."""
        offsets = np.cumsum([0, *(n - 1 for n in self.mesh.degrees)])
        elems = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        iface = slice(int(offsets[-1]), self.mesh.n_unknowns)
        return {"elements": elems, "interfaces": [iface]}

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _target_alpha(mesh: ElementMesh, order: OrderField, t: float) -> np.ndarray:
    try:
        return order(mesh.nodes, t)
    except ValueError as exc:
        raise AssemblyError(f"order field rejected at t={t}: {exc}") from exc


def assemble_mdfdm(
    mesh: ElementMesh,
    order,
    t: float = 0.0,
    *,
    delta: float | None = None,
    L: int | None = None,
) -> FracDiffMatrix:
    """Assemble the fractional differentiation matrix for ``alpha(x, t)``.

    Each row uses the order at its own target node. Contributions come from
    the element owning the target (Riemann-Liouville derivative of the local
    Lagrange basis) and from every element to its left (history term); the
    elements to the right contribute nothing.

    :arg delta: fixed hybrid switching radius for the history term, see
        :func:`mdscm.fracops.recurrence_region`.
    :arg L: fixed tail quadrature order.
    """
    order = as_order_field(order)
    alpha = _target_alpha(mesh, order, t)

    x = mesh.nodes
    owner = mesh.target_elements
    local = mesh.target_local
    n = mesh.n_unknowns

    full = np.zeros((n, mesh.n_full))
    for k in range(mesh.M):
        basis = mesh.basis(k)
        cols = mesh.dof_map[k]
        h = mesh.widths[k]

        rows = np.flatnonzero(owner == k)
        if rows.size:
            y = basis.nodes[local[rows]]
            vals = frac_deriv_lagrange(basis, alpha[rows], y, side="inside")
            full[np.ix_(rows, cols)] += (vals * (2.0 / h) ** alpha[rows]).T

        rows = np.flatnonzero(owner > k)
        if rows.size:
            y = 2.0 * (x[rows] - mesh.boundaries[k]) / h - 1.0
            vals = frac_deriv_lagrange(
                basis, alpha[rows], y, side="beyond", delta=delta, L=L
            )
            full[np.ix_(rows, cols)] += (vals * (2.0 / h) ** alpha[rows]).T

    bad = ~np.isfinite(full)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise AssemblyError(
            f"non-finite entry at (row={i}, col={j}): target x={x[i]!r}, "
            f"alpha={alpha[i]!r}, source x={mesh.full_nodes[j]!r}"
        )

    full.setflags(write=False)
    alpha.setflags(write=False)
    return FracDiffMatrix(full=full, mesh=mesh, order=order, t=t, alpha=alpha)


def penalty_full(mesh: ElementMesh, tau: float) -> np.ndarray:
    """Jump of the first derivative at the interfaces, scaled by *tau*."""
    if tau < 0:
        raise ValueError(f"penalty parameter must be non-negative: {tau}")

    full = np.zeros((mesh.n_unknowns, mesh.n_full))
    if tau == 0:
        return full

    for i in range(1, mesh.M):
        row = mesh.interface_index(i)
        left, right = i - 1, i
        dl = mesh.basis(left).diff_matrix[-1] * (2.0 / mesh.widths[left])
        dr = mesh.basis(right).diff_matrix[0] * (2.0 / mesh.widths[right])
        full[row, mesh.dof_map[right]] += tau * dr
        full[row, mesh.dof_map[left]] -= tau * dl

    return full


def assemble_penalty(mesh: ElementMesh, tau: float) -> np.ndarray:
    """Penalty matrix acting on the unknowns; nonzero only in interface rows."""
    return penalty_full(mesh, tau)[:, : mesh.n_unknowns]


def first_order_full(mesh: ElementMesh) -> np.ndarray:
    full = np.zeros((mesh.n_unknowns, mesh.n_full))
    owner = mesh.target_elements
    local = mesh.target_local
    for k in range(mesh.M):
        rows = np.flatnonzero(owner == k)
        D = mesh.basis(k).diff_matrix * (2.0 / mesh.widths[k])
        full[np.ix_(rows, mesh.dof_map[k])] = D[local[rows]]
    return full


def assemble_first_order(mesh: ElementMesh) -> np.ndarray:
    """First-derivative matrix on the unknowns.

    Element-wise Lagrange differentiation; interface rows take the one-sided
    derivative from the element on the left.
    """
    return first_order_full(mesh)[:, : mesh.n_unknowns]


def boundary_lift(
    mesh: ElementMesh,
    D: FracDiffMatrix,
    lam: float,
    tau: float,
    u_L: float,
    u_R: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side corrections for non-homogeneous Dirichlet data.

    :returns: ``(f_adjust, r)`` such that the collocation system reads
        ``(lam**2 I - D - R) u = f(x) + f_adjust - r``.
    """
    if D.mesh is not mesh:
        raise ValueError("matrix was assembled on a different mesh")

    # the boundary basis functions vanish at every unknown node, so the
    # lam**2 part of the lift is zero
    del lam
    bd = D.boundary_columns
    f_adjust = u_L * bd[:, 0] + u_R * bd[:, 1]

    rb = penalty_full(mesh, tau)[:, mesh.n_unknowns :]
    r = -(u_L * rb[:, 0] + u_R * rb[:, 1])
    return f_adjust, r


def matrix_to_csv(A: np.ndarray) -> str:
    """Nonzero entries as ``row, col, value`` lines."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col", "value"])
    for i, j in zip(*np.nonzero(A)):
        writer.writerow([i, j, f"{A[i, j]:.17g}"])
    return buf.getvalue()
