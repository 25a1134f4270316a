r"""Variable-order left Riemann-Liouville derivatives on the reference element.

Two kinds of values are needed to assemble the multi-domain matrix. For a
target inside the element (``-1 < y <= 1``) we need

.. math::

    {}_{-1}D_y^{\alpha} P_j(y) = \frac{d^k}{dy^k} \hat{R}_j(y),

and for a target beyond it (``y > 1``) the history term

.. math::

    \tilde{D}_{-1}^{1,\alpha} P_j(y) = \frac{d^k}{dy^k} \breve{R}_j(y),

where :math:`\hat{R}_j` and :math:`\breve{R}_j` are fractional integrals of
order :math:`\mu = k - \alpha` over ``[-1, y]`` and ``[-1, 1]`` respectively.
Both families obey inhomogeneous three-term recurrences in ``j``, which is
what is implemented here. Far from the element the recurrence for
:math:`\breve{R}_j` loses accuracy and a Gauss-Legendre rule is used instead.

All functions are vectorized over the target points: *y* and *alpha* are
broadcast against each other and the output carries the degree index first.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.special import gammaln, rgamma

from mdscm.jacobi import (
    JacobiBasis,
    JacobiParams,
    gauss_nodes_weights,
    jacobi_all,
    jacobi_at_endpoints,
    recurrence_coeffs,
)

logger = logging.getLogger(__name__)

INTEGER_GAP = 1.0e-8
"""Minimal distance of a fractional order from the integers."""

RECURRENCE_GROWTH_LIMIT = 1.0e2
"""Largest tolerated amplification of round-off in the forward recurrence."""

TAIL_QUADRATURE_TOL = 1.0e-17

QUADRATURE_NEAR_SINGULAR = 1.0e-3


class OrderFieldError(ValueError):
    """Raised when a fractional order leaves its admissible range."""


class NearSingularWarning(RuntimeWarning):
    """Emitted when the tail quadrature is used too close to the element."""


# {{{ order field


def check_orders(alpha, bounds: tuple[float, float] | None = None) -> np.ndarray:
    """Validate an array of fractional orders and return it as floats.

    Orders must lie in ``(0, 2)``, keep away from the integers by
    :data:`INTEGER_GAP` and all share the same branch ``k = ceil(alpha)``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.size == 0:
        return alpha

    if not np.all(np.isfinite(alpha)):
        raise OrderFieldError("fractional order is not finite")

    amin, amax = float(alpha.min()), float(alpha.max())
    if amin <= 0.0 or amax >= 2.0:
        raise OrderFieldError(f"fractional order outside (0, 2): [{amin}, {amax}]")

    dist = np.abs(alpha - np.round(alpha))
    if np.any(dist < INTEGER_GAP):
        bad = float(alpha.flat[np.argmin(dist)])
        raise OrderFieldError(f"fractional order too close to an integer: {bad!r}")

    if math.ceil(amin) != math.ceil(amax):
        raise OrderFieldError(
            f"fractional order crosses an integer: [{amin}, {amax}] spans two branches"
        )

    if bounds is not None:
        lo, hi = bounds
        if amin < lo or amax > hi:
            raise OrderFieldError(
                f"fractional order [{amin}, {amax}] outside declared bounds [{lo}, {hi}]"
            )

    return alpha


@dataclass(frozen=True)
class OrderField:
    """A fractional order ``alpha(x, t)`` evaluated pointwise.

    Use :meth:`constant` or :meth:`from_expression` to construct one; *func*
    must accept numpy arrays ``x`` and a scalar ``t``.
    """

    func: Callable[[np.ndarray, float], np.ndarray]
    bounds: tuple[float, float] | None = None
    time_dependent: bool = False
    label: str = ""
    value: float | None = None

    def __post_init__(self) -> None:
        if self.bounds is not None:
            lo, hi = self.bounds
            if lo > hi:
                raise OrderFieldError(f"empty bounds: {self.bounds}")
            check_orders([lo, hi])

    @classmethod
    def constant(cls, alpha: float) -> OrderField:
        alpha = float(alpha)
        check_orders([alpha])
        return cls(
            func=lambda x, t=0.0: np.full(np.shape(x), alpha),
            bounds=(alpha, alpha),
            time_dependent=False,
            label=repr(alpha),
            value=alpha,
        )

    @classmethod
    def from_expression(
        cls, text: str, bounds: tuple[float, float] | None = None
    ) -> OrderField:
        """Build a field from an expression in ``x`` and ``t``, e.g. ``"1.1 + (x+1)/2.5"``."""
        from mdscm.expr import parse_order_expr

        expr = parse_order_expr(text)
        if expr.is_constant():
            return cls.constant(expr.evaluate(0.0, 0.0))

        return cls(
            func=expr.evaluate,
            bounds=bounds,
            time_dependent=expr.depends_on("t"),
            label=text,
        )

    @property
    def is_constant(self) -> bool:
        return self.value is not None

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        alpha = np.broadcast_to(np.asarray(self.func(x, t), dtype=np.float64), x.shape)
        return check_orders(alpha, self.bounds)


def as_order_field(order) -> OrderField:
    if isinstance(order, OrderField):
        return order
    if isinstance(order, str):
        return OrderField.from_expression(order)
    return OrderField.constant(order)


# }}}


# {{{ recurrences


@dataclass(frozen=True)
class _Coeffs:
    """Per-degree coefficient arrays for ``j = 1, ..., jmax - 1``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    kminus: np.ndarray
    kplus: np.ndarray
    p1_left: float
    p1_right: float


def _coeffs(params: JacobiParams, jmax: int) -> _Coeffs:
    js = range(1, max(jmax, 1))
    rc = [recurrence_coeffs(params, j) for j in js]
    A = np.array([r.A for r in rc])
    B = np.array([r.B for r in rc])
    C = np.array([r.C for r in rc])
    Ahat = np.array([r.Ahat for r in rc])
    Bhat = np.array([r.Bhat for r in rc])
    Chat = np.array([r.Chat for r in rc])

    pm, pp = jacobi_at_endpoints(params, jmax + 1)
    j = np.arange(1, max(jmax, 1))
    kminus = Ahat * pm[j - 1] + Bhat * pm[j] + Chat * pm[j + 1]
    kplus = Ahat * pp[j - 1] + Bhat * pp[j] + Chat * pp[j + 1]

    return _Coeffs(
        A=A, B=B, C=C, Ahat=Ahat, Bhat=Bhat, Chat=Chat,
        kminus=kminus, kplus=kplus,
        p1_left=float(pm[1]), p1_right=float(pp[1]),
    )  # fmt: skip


def _split_order(alpha) -> tuple[np.ndarray, np.ndarray]:
    alpha = check_orders(alpha)
    k = np.ceil(alpha).astype(np.int64)
    return k, k - alpha


def _pow(base: np.ndarray, expo: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.power(base, expo)


def _rl_levels(
    params: JacobiParams,
    jmax: int,
    y: np.ndarray,
    mu: np.ndarray,
    mmax: int,
    *,
    beyond: bool,
) -> np.ndarray:
    """Forward recurrence for the fractional integrals and their derivatives.

    :returns: an array ``out[m, j, ...]`` for ``m <= mmax`` and ``j <= jmax``.
    """
    cf = _coeffs(params, jmax)
    s2 = 0.5 * (params.c + params.d + 2)

    out = np.empty((mmax + 1, jmax + 1, *y.shape))
    yp = y + 1.0
    ym = y - 1.0

    for m in range(mmax + 1):
        g0 = rgamma(mu + 1 - m)
        g1 = rgamma(mu + 2 - m)
        left0 = _pow(yp, mu - m) * g0
        left1 = _pow(yp, mu + 1 - m) * g1
        if beyond:
            right0 = _pow(ym, mu - m) * g0
            right1 = _pow(ym, mu + 1 - m) * g1
            out[m, 0] = left0 - right0
            if jmax >= 1:
                out[m, 1] = (
                    cf.p1_left * left0 - cf.p1_right * right0 + s2 * (left1 - right1)
                )
        else:
            out[m, 0] = left0
            if jmax >= 1:
                out[m, 1] = cf.p1_left * left0 + s2 * left1

        for i, j in enumerate(range(1, jmax)):
            den = 1.0 + mu * cf.A[i] * cf.Chat[i]
            At = cf.A[i] / den
            Bt = (cf.B[i] + mu * cf.A[i] * cf.Bhat[i]) / den
            Ct = (cf.C[i] + mu * cf.A[i] * cf.Ahat[i]) / den
            Dt = cf.A[i] * cf.kminus[i] / den

            # d^m/dy^m [(y+1)^mu / Gamma(mu)] = mu (y+1)^(mu-m) / Gamma(mu+1-m)
            src = Dt * mu * left0
            if beyond:
                Et = cf.A[i] * cf.kplus[i] / den
                src = src - Et * mu * right0

            nxt = (At * y - Bt) * out[m, j] - Ct * out[m, j - 1] + src
            if m > 0:
                nxt = nxt + m * At * out[m - 1, j]
            out[m, j + 1] = nxt

    return out


def _points(y, alpha) -> tuple[np.ndarray, np.ndarray]:
    y, alpha = np.broadcast_arrays(
        np.asarray(y, dtype=np.float64), np.asarray(alpha, dtype=np.float64)
    )
    return y, alpha


def rhat(params: JacobiParams, jmax: int, y, alpha, m: int | None = None) -> np.ndarray:
    r"""Derivatives :math:`d^m/dy^m \hat{R}_j(y)` for ``j = 0, ..., jmax``.

    :arg m: derivative level; defaults to ``k = ceil(alpha)``, in which case
        the result is the Riemann-Liouville derivative of ``P_j``.
    :returns: an array of shape ``(jmax + 1, *y.shape)``.
    """
    y, alpha = _points(y, alpha)
    if np.any(y <= -1.0) or np.any(y > 1.0):
        raise ValueError("rhat needs -1 < y <= 1")

    k, mu = _split_order(alpha)
    mmax = int(k.max(initial=1)) if m is None else m
    if m is not None and np.any(m > k):
        raise ValueError(f"derivative level {m} exceeds ceil(alpha)")

    levels = _rl_levels(params, jmax, y, mu, mmax, beyond=False)
    if m is not None:
        return levels[m]
    return np.take_along_axis(levels, k[None, None, ...], axis=0)[0]


def rbreve(
    params: JacobiParams, jmax: int, y, alpha, m: int | None = None
) -> np.ndarray:
    r"""Derivatives :math:`d^m/dy^m \breve{R}_j(y)` for ``y > 1`` by recurrence."""
    y, alpha = _points(y, alpha)
    if np.any(y <= 1.0):
        raise ValueError("rbreve needs y > 1")

    k, mu = _split_order(alpha)
    mmax = int(k.max(initial=1)) if m is None else m
    if m is not None and np.any(m > k):
        raise ValueError(f"derivative level {m} exceeds ceil(alpha)")

    levels = _rl_levels(params, jmax, y, mu, mmax, beyond=True)
    if m is not None:
        return levels[m]
    return np.take_along_axis(levels, k[None, None, ...], axis=0)[0]


# }}}


# {{{ derivatives of Jacobi and Lagrange polynomials


def frac_deriv_jacobi_inside(params: JacobiParams, jmax: int, alpha, y) -> np.ndarray:
    """Riemann-Liouville derivative ``_{-1}D_y^alpha P_j(y)`` for ``-1 < y <= 1``."""
    return rhat(params, jmax, y, alpha)


def tail_quadrature(
    params: JacobiParams, jmax: int, alpha, y, L: int | None = None
) -> np.ndarray:
    r"""History term by a Gauss-Legendre rule,

    .. math::

        \tilde{D}_{-1}^{1,\alpha} P_j(y) = \frac{1}{\Gamma(-\alpha)}
            \int_{-1}^1 \frac{P_j(s)}{(y - s)^{\alpha + 1}} \,\mathrm{d}s.
    """
    y, alpha = _points(y, alpha)
    if np.any(y <= 1.0):
        raise ValueError("tail quadrature needs y > 1")
    if np.any(y - 1.0 < QUADRATURE_NEAR_SINGULAR):
        warnings.warn(
            f"tail quadrature used at y - 1 = {float(np.min(y - 1.0)):.3e}; "
            "result may be inaccurate",
            NearSingularWarning,
            stacklevel=2,
        )

    if L is None:
        L = default_tail_order(jmax, float(np.min(y, initial=np.inf)))
    xi, wi = _gauss_cached(L)
    p = jacobi_all(params, jmax, xi) * wi

    kernel = _pow(y[..., None] - xi, -alpha[..., None] - 1.0)
    return rgamma(-alpha) * np.moveaxis(kernel @ p.T, -1, 0)


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_cached(L: int) -> tuple[np.ndarray, np.ndarray]:
    if L not in _GAUSS_CACHE:
        _GAUSS_CACHE[L] = gauss_nodes_weights(L)
    return _GAUSS_CACHE[L]


def default_tail_order(jmax: int, ymin: float = np.inf) -> int:
    """Number of tail quadrature points for degrees up to *jmax*.

    The Gauss-Legendre error for a kernel singular at ``ymin`` decays like
    ``rho**(-2 L)`` with ``rho = ymin + sqrt(ymin**2 - 1)``, so the rule is
    enlarged beyond ``max(2 jmax, 32)`` when targets come close to the element.
    """
    L = max(2 * jmax, 32)
    if np.isfinite(ymin) and ymin > 1.0:
        log_rho = np.log(ymin + np.sqrt(ymin * ymin - 1.0))
        L = max(L, int(np.ceil(-np.log(TAIL_QUADRATURE_TOL) / (2.0 * log_rho))))
    return L


def recurrence_region(y, jmax: int, delta: float | None = None) -> np.ndarray:
    """Mask of the points ``y > 1`` where the recurrence is preferred.

    With an explicit *delta* the recurrence is used for ``y <= 1 + delta``.
    Otherwise it is used while the growth factor ``rho(y)**jmax`` of the
    dominant solution, ``rho = y + sqrt(y**2 - 1)``, stays below
    :data:`RECURRENCE_GROWTH_LIMIT`.
    """
    y = np.asarray(y, dtype=np.float64)
    if delta is not None:
        return y <= 1.0 + delta

    rho = y + np.sqrt(np.maximum(y * y - 1.0, 0.0))
    return jmax * np.log(rho) <= np.log(RECURRENCE_GROWTH_LIMIT)


def dtilde_jacobi(
    params: JacobiParams,
    jmax: int,
    alpha,
    y,
    mode: Literal["recurrence", "quadrature", "auto"] = "auto",
    *,
    delta: float | None = None,
    L: int | None = None,
) -> np.ndarray:
    """History term ``D~_{-1}^{1,alpha} P_j(y)`` for targets ``y > 1``."""
    y, alpha = _points(y, alpha)

    if mode == "recurrence":
        return rbreve(params, jmax, y, alpha)
    if mode == "quadrature":
        return tail_quadrature(params, jmax, alpha, y, L=L)
    if mode != "auto":
        raise ValueError(f"unknown mode: {mode!r}")

    out = np.empty((jmax + 1, *y.shape))
    near = recurrence_region(y, jmax, delta)
    if np.any(near):
        out[:, near] = rbreve(params, jmax, y[near], alpha[near])
    if np.any(~near):
        out[:, ~near] = tail_quadrature(params, jmax, alpha[~near], y[~near], L=L)

    return out


def frac_deriv_lagrange(
    basis: JacobiBasis,
    alpha,
    y,
    side: Literal["inside", "beyond"] = "inside",
    j: int | None = None,
    **kwargs,
) -> np.ndarray:
    """Derivatives of the Lagrange basis of *basis* at the points *y*.

    For ``side="inside"`` this is ``_{-1}D_y^alpha L_j(y)`` with
    ``-1 < y <= 1``, for ``side="beyond"`` it is the history term of ``L_j``
    at ``y > 1``. Extra keyword arguments go to :func:`dtilde_jacobi`.

    :returns: values for all ``j`` with shape ``(N + 1, *y.shape)``, or the
        single row *j* if given.
    """
    if side == "inside":
        vals = rhat(basis.params, basis.N, y, alpha)
    elif side == "beyond":
        vals = dtilde_jacobi(basis.params, basis.N, alpha, y, **kwargs)
    else:
        raise ValueError(f"unknown side: {side!r}")

    out = np.tensordot(basis.l.T, vals, axes=1)
    return out if j is None else out[j]


# }}}


# {{{ closed forms


def monomial_frac_deriv(n: int, alpha, y, a: float = -1.0):
    r"""Closed form of :math:`{}_aD_y^{\alpha} (y - a)^n`.

    .. math::

        \frac{\Gamma(n + 1)}{\Gamma(n + 1 - \alpha)} (y - a)^{n - \alpha}
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if n < 0:
        raise ValueError(f"n must be non-negative: {n}")

    ni = n - alpha
    if np.any((ni < 0) & (np.abs(ni - np.round(ni)) == 0.0)):
        raise ValueError(f"Gamma pole: n - alpha is a negative integer for n={n}")

    return math.factorial(n) * rgamma(n + 1 - alpha) * _pow(y - a, n - alpha)


def sin_rl_series(alpha, x, L_terms: int = 50) -> np.ndarray:
    r"""Truncated power series of :math:`{}_{-1}D_x^{\alpha(x)} \sin(\pi x)`.

    Uses :math:`\sin(\pi x) = -\sin(\pi (x + 1))` expanded around ``x = -1``
    and differentiated term by term. Terms are formed in log space.
    """
    alpha, x = np.broadcast_arrays(
        np.asarray(alpha, dtype=np.float64), np.asarray(x, dtype=np.float64)
    )
    z = x + 1.0
    out = np.zeros(x.shape)

    with np.errstate(divide="ignore"):
        logz = np.log(z)
    for k in range(L_terms + 1):
        p = 2 * k + 1 - alpha
        sign = np.sign(rgamma(2 * k + 2 - alpha))
        with np.errstate(invalid="ignore"):
            logt = (2 * k + 1) * np.log(np.pi) + p * logz - gammaln(2 * k + 2 - alpha)
        term = np.where(z > 0.0, sign * np.exp(logt), 0.0)
        out += (-1) ** (k + 1) * term

    return out


# }}}
