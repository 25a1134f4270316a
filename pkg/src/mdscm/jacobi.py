"""Jacobi polynomials, Gauss-type quadrature and the Lagrange/Jacobi transform.

Everything here works on the reference element ``[-1, 1]`` with the weight
``(1 - y)**c * (1 + y)**d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln

NEWTON_TOL = 1.0e-14
NEWTON_MAXITER = 100


class QuadratureError(RuntimeError):
    """Raised when the Newton root solve for quadrature nodes fails."""


@dataclass(frozen=True)
class JacobiParams:
    """Exponents ``(c, d)`` of the Jacobi weight ``(1 - y)^c (1 + y)^d``."""

    c: float = 0.0
    d: float = 0.0

    def __post_init__(self) -> None:
        if not (self.c > -1.0 and self.d > -1.0):
            raise ValueError(f"Jacobi exponents must exceed -1: c={self.c}, d={self.d}")


LEGENDRE = JacobiParams(0.0, 0.0)


# {{{ recurrence coefficients


@dataclass(frozen=True)
class RecurrenceCoeffs:
    r"""Coefficients of the value and derivative recurrences of degree ``j``.

    .. math::

        P_{j+1} = (A_j y - B_j) P_j - C_j P_{j-1},
        \qquad
        P_j = \hat{A}_j P'_{j-1} + \hat{B}_j P'_j + \hat{C}_j P'_{j+1}.
    """

    A: float
    B: float
    C: float
    Ahat: float
    Bhat: float
    Chat: float


def recurrence_coeffs(params: JacobiParams, j: int) -> RecurrenceCoeffs:
    """Recurrence coefficients for degree ``j >= 1``."""
    if j < 1:
        raise ValueError(f"recurrence is defined for j >= 1: got {j}")

    a, b = params.c, params.d
    s = a + b
    t = 2 * j + s

    A = (t + 1) * (t + 2) / (2 * (j + 1) * (j + s + 1))
    B = (b * b - a * a) * (t + 1) / (2 * (j + 1) * (j + s + 1) * t)
    C = (j + a) * (j + b) * (t + 2) / ((j + 1) * (j + s + 1) * t)

    # j + s == 0 only for j = 1, s = -1; the term multiplies P'_0 = 0 there
    if abs(j + s) < 1.0e-14:
        Ahat = 0.0
    else:
        Ahat = -2 * (j + a) * (j + b) / ((j + s) * t * (t + 1))
    Bhat = 2 * (a - b) / (t * (t + 2))
    Chat = 2 * (j + s + 1) / ((t + 1) * (t + 2))

    return RecurrenceCoeffs(A=A, B=B, C=C, Ahat=Ahat, Bhat=Bhat, Chat=Chat)


# }}}


# {{{ evaluation


def jacobi_all(params: JacobiParams, jmax: int, y) -> np.ndarray:
    """Evaluate ``P_0, ..., P_jmax`` at *y*.

    :returns: an array of shape ``(jmax + 1, *y.shape)``.
    """
    if jmax < 0:
        raise ValueError(f"degree must be non-negative: {jmax}")

    y = np.asarray(y, dtype=np.float64)
    a, b = params.c, params.d

    p = np.empty((jmax + 1, *y.shape))
    p[0] = 1.0
    if jmax >= 1:
        p[1] = 0.5 * ((a + b + 2) * y + (a - b))
    for j in range(1, jmax):
        rc = recurrence_coeffs(params, j)
        p[j + 1] = (rc.A * y - rc.B) * p[j] - rc.C * p[j - 1]

    return p


def eval_jacobi(params: JacobiParams, j: int, y):
    """Evaluate the Jacobi polynomial ``P_j^{c,d}`` at *y*."""
    return jacobi_all(params, j, y)[j]


def jacobi_deriv(params: JacobiParams, j: int, y):
    """Evaluate the first derivative of ``P_j^{c,d}`` at *y*."""
    if j == 0:
        return np.zeros_like(np.asarray(y, dtype=np.float64))

    shifted = JacobiParams(params.c + 1, params.d + 1)
    return 0.5 * (j + params.c + params.d + 1) * eval_jacobi(shifted, j - 1, y)


def jacobi_at_endpoints(params: JacobiParams, jmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Values ``P_j(-1)`` and ``P_j(1)`` for ``j = 0, ..., jmax``."""
    p = jacobi_all(params, jmax, np.array([-1.0, 1.0]))
    return p[:, 0], p[:, 1]


def jacobi_norms(params: JacobiParams, jmax: int) -> np.ndarray:
    r"""Squared norms :math:`\gamma_j = \|P_j\|^2_{w}` for ``j = 0, ..., jmax``."""
    a, b = params.c, params.d
    j = np.arange(jmax + 1, dtype=np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_gamma = (
            (a + b + 1) * np.log(2.0)
            + gammaln(j + a + 1)
            + gammaln(j + b + 1)
            - gammaln(j + 1)
            - gammaln(j + a + b + 1)
            - np.log(2 * j + a + b + 1)
        )
    gamma = np.exp(log_gamma)

    # closed form for j = 0 avoids 0/0 when c + d = -1
    gamma[0] = np.exp(
        (a + b + 1) * np.log(2.0) + gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2)
    )
    return gamma


# }}}


# {{{ quadrature


def _newton_roots(params: JacobiParams, n: int) -> np.ndarray:
    """Roots of ``P_n^{c,d}`` by Newton iteration with deflation.

    Initial guesses are Chebyshev-Gauss points; each new root is deflated
    against the ones already found.
    """
    roots = np.empty(n)
    for k in range(n):
        r = -np.cos((2 * k + 1) * np.pi / (2 * n))
        if k > 0:
            r = 0.5 * (r + roots[k - 1])

        for _ in range(NEWTON_MAXITER):
            p = eval_jacobi(params, n, r)
            dp = jacobi_deriv(params, n, r)
            s = np.sum(1.0 / (r - roots[:k]))
            delta = -p / (dp - s * p)
            r += delta
            if abs(delta) < NEWTON_TOL:
                break
        else:
            raise QuadratureError(
                f"Newton iteration did not converge for root {k} of P_{n}"
                f"^({params.c}, {params.d}) (last step {abs(delta):.3e})"
            )
        roots[k] = r

    return np.sort(roots)


def jacobi_gauss(params: JacobiParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi-Gauss quadrature with *n* nodes (exact up to degree ``2n - 1``)."""
    if n < 1:
        raise ValueError(f"need at least one node: {n}")

    a, b = params.c, params.d
    x = _newton_roots(params, n)
    dp = jacobi_deriv(params, n, x)

    logc = (
        (a + b + 1) * np.log(2.0)
        + gammaln(n + a + 1)
        + gammaln(n + b + 1)
        - gammaln(n + 1)
        - gammaln(n + a + b + 1)
    )
    w = np.exp(logc) / ((1 - x**2) * dp**2)
    return x, w


def gauss_nodes_weights(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss rule with ``L + 1`` nodes, exact up to degree ``2L + 1``."""
    if L < 0:
        raise ValueError(f"L must be non-negative: {L}")
    return jacobi_gauss(LEGENDRE, L + 1)


def jgl_nodes_weights(params: JacobiParams, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi-Gauss-Lobatto rule with ``N + 1`` nodes, including both endpoints.

    Interior nodes are the roots of ``P'_N``, i.e. of ``P_{N-1}^{c+1,d+1}``.
    Their weights follow from the Gauss rule for the shifted weight, and the
    two endpoint weights are fixed by exactness on ``1`` and ``y``.
    """
    if N < 1:
        raise ValueError(f"need N >= 1: {N}")

    x = np.empty(N + 1)
    w = np.empty(N + 1)
    x[0], x[-1] = -1.0, 1.0

    if N > 1:
        shifted = JacobiParams(params.c + 1, params.d + 1)
        xi, wi = jacobi_gauss(shifted, N - 1)
        x[1:-1] = xi
        w[1:-1] = wi / (1 - xi**2)

    # moments of the weight: int w = gamma_0, int y w = (d - c)/(c + d + 2) gamma_0
    m0 = jacobi_norms(params, 0)[0]
    m1 = m0 * (params.d - params.c) / (params.c + params.d + 2)
    r0 = m0 - np.sum(w[1:-1])
    r1 = m1 - np.sum(w[1:-1] * x[1:-1])
    w[0] = 0.5 * (r0 - r1)
    w[-1] = 0.5 * (r0 + r1)

    return x, w


# }}}


# {{{ basis


@dataclass(frozen=True)
class JacobiBasis:
    """Lagrange basis on the Jacobi-Gauss-Lobatto nodes of degree *N*.

    .. attribute:: l

        The matrix of coefficients ``l[i, j]`` such that
        ``L_j(y) = sum_i l[i, j] P_i(y)``.
    """

    params: JacobiParams
    N: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    l: np.ndarray = field(repr=False)  # noqa: E741

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        return first_deriv_matrix(self)

    def lagrange(self, y) -> np.ndarray:
        """Evaluate all Lagrange polynomials at *y*, shape ``(N + 1, *y.shape)``."""
        p = jacobi_all(self.params, self.N, y)
        return np.tensordot(self.l.T, p, axes=1)


def build_basis(params: JacobiParams, N: int) -> JacobiBasis:
    """Construct the nodal basis and its expansion in Jacobi polynomials."""
    if N < 1:
        raise ValueError(f"need N >= 1: {N}")

    y, w = jgl_nodes_weights(params, N)
    gamma = jacobi_norms(params, N)

    norm = gamma.copy()
    norm[N] = (2 + (params.c + params.d + 1) / N) * gamma[N]

    p = jacobi_all(params, N, y)
    l = p * w[None, :] / norm[:, None]  # noqa: E741

    for arr in (y, w, gamma, l):
        arr.setflags(write=False)

    return JacobiBasis(params=params, N=N, nodes=y, weights=w, gamma=gamma, l=l)


def first_deriv_matrix(basis: JacobiBasis) -> np.ndarray:
    """Lagrange differentiation matrix with entries ``D[m, j] = L_j'(y_m)``.

    Uses barycentric weights, with the diagonal set by the negative row sum
    so that constants are differentiated exactly.
    """
    y = basis.nodes
    diff = y[:, None] - y[None, :]
    np.fill_diagonal(diff, 1.0)

    bary = 1.0 / np.prod(diff, axis=1)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -np.sum(D, axis=1))

    D.setflags(write=False)
    return D


# }}}
