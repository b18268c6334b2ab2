"""Two-parameter Mittag-Leffler function on the non-positive real axis.

Three evaluators cover ``x <= 0`` for ``0 < alpha < 1``:

* the Taylor series (with Neumaier summation) for ``|x| <= series_radius``,
* the trapezoidal rule on a parabolic Hankel contour for the inverse Laplace
  transform ``E(-x) = (2 pi i)^-1 int e^s s^(alpha-beta) / (s^alpha + x) ds``
  in between,
* the algebraic asymptotic expansion for ``|x| >= asymptotic_radius``.

For ``alpha < 1`` the denominator ``s^alpha + x`` has no zeros on the principal
sheet, so the contour integral carries no residues. For ``alpha >= 1`` only the
series is used, switching to extended precision when cancellation would
swamp double precision.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, rgamma

Array = np.ndarray

#: The series is used while ``|x|**(1/alpha) <= SERIES_SCALE``; cancellation
#: then costs at most about ``exp(SERIES_SCALE)`` ulps.
SERIES_SCALE = 3.0
#: Number of terms kept in the asymptotic expansion.
ASYMPTOTIC_TERMS = 20
#: Absolute size of the first neglected asymptotic term at the switch radius.
ASYMPTOTIC_TOL = 1e-16
#: Trapezoidal nodes on the parabolic contour.
CONTOUR_NODES = 32


def series_radius(alpha: float) -> float:
    return SERIES_SCALE**alpha


def asymptotic_radius(alpha: float, beta: float, n_terms: int = ASYMPTOTIC_TERMS) -> float:
    """Smallest ``|x|`` at which the truncated expansion is trusted."""
    nxt = abs(float(rgamma(beta - (n_terms + 1) * alpha)))
    if nxt == 0.0:
        nxt = abs(float(rgamma(beta - (n_terms + 2) * alpha)))
    r = (nxt / ASYMPTOTIC_TOL) ** (1.0 / (n_terms + 1)) if nxt > 0 else 1.0
    return max(r, series_radius(alpha))


def ml_series(alpha: float, beta: float, x: Array) -> Array:
    """Taylor series, summed with Neumaier compensation."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    amax = float(ax.max()) if ax.size else 0.0
    s = np.zeros_like(x)
    comp = np.zeros_like(x)
    logx = np.log(np.where(ax > 0, ax, 1.0))
    sign = np.where(x < 0, -1.0, 1.0)
    i = 0
    while True:
        if i == 0:
            term = np.full_like(x, float(rgamma(beta)))
        else:
            term = np.where(
                ax > 0, sign**i * np.exp(i * logx - gammaln(i * alpha + beta)), 0.0
            )
        t = s + term
        comp += np.where(np.abs(s) >= np.abs(term), (s - t) + term, (term - t) + s)
        s = t
        i += 1
        if amax == 0.0:
            break
        # stop once the largest remaining term is tiny and past its peak
        la = math.log(amax)
        cur = i * la - gammaln(i * alpha + beta)
        if i > 2 and cur < -40.0 and (i + 1) * la - gammaln((i + 1) * alpha + beta) < cur:
            break
        if i > 100000:
            raise ArithmeticError("Mittag-Leffler series failed to converge")
    return s + comp


def ml_contour(alpha: float, beta: float, x: Array, n_nodes: int = CONTOUR_NODES) -> Array:
    """Inverse Laplace transform on a parabolic contour (``0 < alpha < 1``).

    The contour ``s(u) = N (0.1309 - 0.1194 u^2 + 0.25 i u)`` and the midpoint
    trapezoidal rule on ``u in [-pi, pi]`` follow Weideman and Trefethen.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("the contour evaluator needs 0 < alpha < 1")
    x = np.asarray(x, dtype=np.float64)
    du = 2.0 * np.pi / n_nodes
    # conjugate symmetry: sum over u > 0 and take twice the imaginary part
    u = (np.arange(n_nodes // 2) + 0.5) * du
    s = n_nodes * (0.1309 - 0.1194 * u**2 + 0.25j * u)
    ds = n_nodes * (-2.0 * 0.1194 * u + 0.25j)
    wts = np.exp(s) * s ** (alpha - beta) * ds
    sa = s**alpha
    val = (wts / (sa + (-x)[..., None])).sum(axis=-1)
    return val.imag * du / np.pi


def ml_asymptotic(
    alpha: float, beta: float, x: Array, n_terms: int = ASYMPTOTIC_TERMS
) -> Array:
    """``-sum_{k=1}^K x^-k / Gamma(beta - k alpha)`` for ``x < 0``."""
    x = np.asarray(x, dtype=np.float64)
    inv = 1.0 / x
    out = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(1, n_terms + 1):
        p = p * inv
        out -= p * rgamma(beta - k * alpha)
    return out


def _ml_series_mp(alpha: float, beta: float, x: float) -> float:
    import mpmath as mp

    # digits lost to cancellation ~ log10 of the largest term
    big = max(
        (i * math.log(abs(x)) - float(gammaln(i * alpha + beta))) / math.log(10)
        for i in range(0, 4000)
    )
    with mp.workdps(int(max(big, 0)) + 30):
        a, b, z = mp.mpf(alpha), mp.mpf(beta), mp.mpf(x)
        s, i = mp.mpf(0), 0
        tol = mp.mpf(10) ** (-mp.mp.dps + 5)
        while True:
            term = z**i * mp.rgamma(i * a + b)
            s += term
            if i > 5 and abs(term) < tol * max(abs(s), mp.mpf(10) ** -300):
                break
            i += 1
        return float(s)


def mittag_leffler(alpha: float, beta: float, x: Array | float) -> Array | float:
    """``E_{alpha,beta}(x)`` for real ``x <= 0``.

    Accepts scalars or arrays; the output has the shape of ``x``.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"need alpha > 0 and beta > 0, got {alpha}, {beta}")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x > 0) or np.any(np.isnan(x)):
        raise ValueError("only the non-positive real axis is supported")

    out = np.empty_like(x)
    ax = -x
    rs = series_radius(alpha)
    near = ax <= rs
    if near.any():
        out[near] = ml_series(alpha, beta, x[near])

    if alpha < 1.0:
        ra = asymptotic_radius(alpha, beta)
        far = ax >= ra
        mid = ~near & ~far
        if mid.any():
            out[mid] = ml_contour(alpha, beta, x[mid])
        if far.any():
            out[far] = ml_asymptotic(alpha, beta, x[far])
    else:
        for i in np.flatnonzero(~near):
            out[i] = _ml_series_mp(alpha, beta, float(x[i]))

    return float(out[0]) if scalar else out
