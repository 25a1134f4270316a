"""Element meshes on an interval and the global ordering of unknowns.

Unknowns are ordered as in the collocation system: the interior nodes of
element 1, then of element 2, ..., then the interface nodes ``x_1, ...,
x_{M-1}``. The boundary nodes ``x_0`` and ``x_M`` are not unknowns; where a
"full" vector is needed they are appended as the last two entries.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from mdscm.jacobi import JacobiBasis, JacobiParams, build_basis


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ElementMesh:
    """A partition ``x_L = x_0 < x_1 < ... < x_M = x_R`` with nodal bases.

    .. attribute:: degrees

        Polynomial degree ``N_k`` of each element.
    """

    boundaries: np.ndarray
    degrees: tuple[int, ...]
    params: JacobiParams = JacobiParams()
    kind: str = "custom"
    bases: dict[int, JacobiBasis] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        b = np.asarray(self.boundaries, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise MeshError("need at least two element boundaries")
        if not np.all(np.isfinite(b)):
            raise MeshError("element boundaries must be finite")
        if not np.all(np.diff(b) > 0):
            raise MeshError("element boundaries must be strictly increasing")
        if len(self.degrees) != b.size - 1:
            raise MeshError(
                f"got {len(self.degrees)} degrees for {b.size - 1} elements"
            )
        if any(n < 1 for n in self.degrees):
            raise MeshError(f"element degrees must be >= 1: {self.degrees}")

        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "degrees", tuple(int(n) for n in self.degrees))
        for n in set(self.degrees):
            self.bases.setdefault(n, build_basis(self.params, n))

    # {{{ geometry

    @property
    def M(self) -> int:
        return len(self.degrees)

    @property
    def x_L(self) -> float:
        return float(self.boundaries[0])

    @property
    def x_R(self) -> float:
        return float(self.boundaries[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def basis(self, k: int) -> JacobiBasis:
        """Nodal basis of element *k* (0-based)."""
        return self.bases[self.degrees[k]]

    def to_physical(self, k: int, y):
        """Map reference coordinates on element *k* to physical ones."""
        h = self.widths[k]
        return 0.5 * h * (np.asarray(y) + 1.0) + self.boundaries[k]

    def to_reference(self, k: int, x):
        h = self.widths[k]
        return 2.0 * (np.asarray(x) - self.boundaries[k]) / h - 1.0

    def element_nodes(self, k: int) -> np.ndarray:
        """Physical collocation nodes ``x_0^k, ..., x_N^k`` of element *k*."""
        x = self.to_physical(k, self.basis(k).nodes)
        # pin the endpoints so that shared interfaces agree bit for bit
        x[0], x[-1] = self.boundaries[k], self.boundaries[k + 1]
        return x

    # }}}

    # {{{ ordering

    @property
    def n_interior(self) -> int:
        return sum(n - 1 for n in self.degrees)

    @property
    def n_unknowns(self) -> int:
        return self.n_interior + self.M - 1

    @property
    def n_full(self) -> int:
        """Unknowns plus the two boundary nodes."""
        return self.n_unknowns + 2

    @property
    def left_boundary_index(self) -> int:
        return self.n_unknowns

    @property
    def right_boundary_index(self) -> int:
        return self.n_unknowns + 1

    def interface_index(self, i: int) -> int:
        """Global index of the node ``x_i`` for ``0 <= i <= M``."""
        if i == 0:
            return self.left_boundary_index
        if i == self.M:
            return self.right_boundary_index
        return self.n_interior + i - 1

    @cached_property
    def dof_map(self) -> tuple[np.ndarray, ...]:
        """For each element, the global (full) indices of its local nodes."""
        maps = []
        offset = 0
        for k, n in enumerate(self.degrees):
            idx = np.empty(n + 1, dtype=np.int64)
            idx[0] = self.interface_index(k)
            idx[-1] = self.interface_index(k + 1)
            idx[1:-1] = offset + np.arange(n - 1)
            offset += n - 1
            idx.setflags(write=False)
            maps.append(idx)
        return tuple(maps)

    @cached_property
    def full_nodes(self) -> np.ndarray:
        """Coordinates of all nodes in full ordering (unknowns, x_L, x_R)."""
        x = np.empty(self.n_full)
        for k in range(self.M):
            x[self.dof_map[k]] = self.element_nodes(k)
        x.setflags(write=False)
        return x

    @property
    def nodes(self) -> np.ndarray:
        """Coordinates of the unknowns in global order."""
        return self.full_nodes[: self.n_unknowns]

    @cached_property
    def target_elements(self) -> np.ndarray:
        """Element owning each unknown; interface ``x_k`` belongs to element ``k``
        (its left neighbour, 0-based ``k - 1``)."""
        owner = np.empty(self.n_unknowns, dtype=np.int64)
        for k in range(self.M):
            idx = self.dof_map[k]
            owner[idx[1:-1]] = k
            if k < self.M - 1:
                owner[idx[-1]] = k
        return owner

    @cached_property
    def target_local(self) -> np.ndarray:
        """Local node index of each unknown within its owning element."""
        local = np.empty(self.n_unknowns, dtype=np.int64)
        for k, n in enumerate(self.degrees):
            idx = self.dof_map[k]
            local[idx[1:-1]] = np.arange(1, n)
            if k < self.M - 1:
                local[idx[-1]] = n
        return local

    def sorted_order(self) -> np.ndarray:
        """Permutation sorting the full node vector by coordinate."""
        return np.argsort(self.full_nodes, kind="stable")

    # }}}

    def to_csv(self) -> str:
        """Element summary with columns ``element, left, width``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["element", "left", "width"])
        for k in range(self.M):
            writer.writerow([k + 1, f"{self.boundaries[k]:.17g}", f"{self.widths[k]:.17g}"])
        return buf.getvalue()


def interpolate_nodal(mesh: ElementMesh, full: np.ndarray, xq) -> np.ndarray:
    """Evaluate the piecewise Lagrange interpolant of *full* (full ordering) at *xq*."""
    xq = np.asarray(xq, dtype=np.float64)
    if np.any(xq < mesh.x_L) or np.any(xq > mesh.x_R):
        raise ValueError("interpolation points outside the mesh")

    elem = np.clip(np.searchsorted(mesh.boundaries, xq, side="right") - 1, 0, mesh.M - 1)
    out = np.empty(xq.shape)
    for k in np.unique(elem):
        sel = elem == k
        y = mesh.to_reference(k, xq[sel])
        out[sel] = full[mesh.dof_map[k]] @ mesh.basis(k).lagrange(y)
    return out


# {{{ generators


def _check_interval(x_L: float, x_R: float) -> None:
    if not (np.isfinite(x_L) and np.isfinite(x_R) and x_R > x_L):
        raise MeshError(f"degenerate interval [{x_L}, {x_R}]")


def _check_counts(M: int, N: int) -> None:
    if M < 1:
        raise MeshError(f"need at least one element: M={M}")
    if N < 2:
        raise MeshError(f"need N >= 2 for an interior node: N={N}")


def mesh_from_boundaries(
    boundaries, N: int, params: JacobiParams = JacobiParams(), kind: str = "custom"
) -> ElementMesh:
    b = np.asarray(boundaries, dtype=np.float64)
    return ElementMesh(b, (N,) * (b.size - 1), params=params, kind=kind)


def make_uniform(
    x_L: float, x_R: float, M: int, N: int, params: JacobiParams = JacobiParams()
) -> ElementMesh:
    _check_interval(x_L, x_R)
    _check_counts(M, N)

    j = np.arange(M + 1)
    b = x_L + (x_R - x_L) * j / M
    b[-1] = x_R
    return mesh_from_boundaries(b, N, params, kind="uniform")


def make_graded(
    x_L: float, x_R: float, M: int, N: int, q: float, params: JacobiParams = JacobiParams()
) -> ElementMesh:
    """Power-law graded mesh ``x_j = x_L + (x_R - x_L) (j / M)**q`` clustering at ``x_L``."""
    _check_interval(x_L, x_R)
    _check_counts(M, N)
    if not q > 1:
        raise MeshError(f"graded mesh needs q > 1: q={q}")

    j = np.arange(M + 1)
    b = x_L + (x_R - x_L) * (j / M) ** q
    return mesh_from_boundaries(b, N, params, kind="graded")


def make_geometric(
    x_L: float, x_R: float, M: int, N: int, q: float, params: JacobiParams = JacobiParams()
) -> ElementMesh:
    """Geometric mesh ``x_j = x_L + (x_R - x_L) q**(M - j)``, ``j >= 1``."""
    _check_interval(x_L, x_R)
    _check_counts(M, N)
    if not 0 < q < 1:
        raise MeshError(f"geometric mesh needs 0 < q < 1: q={q}")

    j = np.arange(1, M + 1)
    b = np.empty(M + 1)
    b[0] = x_L
    b[1:] = x_L + (x_R - x_L) * q ** (M - j)
    return mesh_from_boundaries(b, N, params, kind="geometric")


def make_composite_left(
    x_L: float,
    split: float,
    x_R: float,
    M_total: int,
    M_geo: int,
    N: int,
    q: float,
    params: JacobiParams = JacobiParams(),
) -> ElementMesh:
    """Geometric mesh on ``[x_L, split]`` followed by a uniform one on ``[split, x_R]``."""
    _check_interval(x_L, x_R)
    if not x_L < split < x_R:
        raise MeshError(f"split {split} must lie strictly inside [{x_L}, {x_R}]")
    if not 0 <= M_geo < M_total:
        raise MeshError(f"need 0 <= M_geo < M_total: M_geo={M_geo}, M_total={M_total}")

    if M_geo == 0:
        return make_uniform(x_L, x_R, M_total, N, params)

    geo = make_geometric(x_L, split, M_geo, N, q, params).boundaries
    uni = make_uniform(split, x_R, M_total - M_geo, N, params).boundaries
    b = np.concatenate([geo, uni[1:]])
    return mesh_from_boundaries(b, N, params, kind="composite")


# }}}
