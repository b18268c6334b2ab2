"""Graded time grids and the Riemann-Liouville calculus of piecewise constants.

For a function ``w`` that equals ``w_k`` on ``(t_{k-1}, t_k)`` the fractional
integral of order ``1 - alpha`` is

    I(t) = sum_k w_k [(t - t_{k-1})_+^p - (t - t_k)_+^p] / Gamma(2 - alpha),

with ``p = 1 - alpha``. ``I`` is continuous, so integrating ``I' = D^alpha w``
over the ``j``-th interval gives ``I(t_j) - I(t_{j-1}) = sum_k b_{j,k} w_k``.
These ``b_{j,k}`` are the memory weights of the dG(0) time stepping.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

Array = np.ndarray

#: Rows of a weight table are cached only when the grid has at most this many intervals.
ROW_CACHE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class GradedGrid:
    """Temporal grid ``t_j = (j / J)**sigma * T``."""

    J: int
    sigma: float
    T: float = 1.0
    times: Array = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if int(self.J) != self.J or self.J < 2:
            raise ValueError(f"need J >= 2 intervals, got {self.J}")
        if not self.sigma >= 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {self.sigma}")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got {self.T}")
        t = (np.arange(self.J + 1) / self.J) ** self.sigma * self.T
        t[0] = 0.0
        t[-1] = self.T
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @property
    def taus(self) -> Array:
        return np.diff(self.times)

    @property
    def tau(self) -> float:
        """The largest step, ``tau_J``."""
        return float(self.times[-1] - self.times[-2])


def graded_grid(J: int, sigma: float, T: float = 1.0) -> GradedGrid:
    return GradedGrid(J, sigma, T)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")


def _times_of(grid: GradedGrid | Array) -> Array:
    return grid.times if isinstance(grid, GradedGrid) else np.asarray(grid, dtype=np.float64)


def weight_row(times: Array, alpha: float, j: int) -> Array:
    """``b_{j,1..j}`` on an arbitrary increasing grid ``times``."""
    p = 1.0 - alpha
    t = times
    tau = t[j] - t[j - 1]
    a = t[j - 1] - t[:j]
    # d_m = (t_j - t_m)^p - (t_{j-1} - t_m)^p, grouped so that the two
    # powers sharing the base t_m are differenced without cancellation
    d = np.empty(j + 1)
    pos = a[:-1]
    d[:-2] = pos**p * np.expm1(p * np.log1p(tau / pos))
    d[-2] = tau**p
    d[-1] = 0.0
    return (d[:-1] - d[1:]) / math.gamma(2.0 - alpha)


class ConvWeights:
    """Lazily computed memory weights ``b_{j,k}`` for one grid and order."""

    def __init__(self, grid: GradedGrid | Array, alpha: float) -> None:
        _check_alpha(alpha)
        self.times = _times_of(grid)
        self.alpha = float(alpha)
        self.J = len(self.times) - 1
        self._cache: Optional[dict[int, Array]] = {} if self.J <= ROW_CACHE_LIMIT else None
        self._lock = threading.Lock()

    def row(self, j: int) -> Array:
        if not 1 <= j <= self.J:
            raise IndexError(f"row {j} outside 1..{self.J}")
        if self._cache is None:
            return weight_row(self.times, self.alpha, j)
        with self._lock:
            r = self._cache.get(j)
            if r is None:
                r = weight_row(self.times, self.alpha, j)
                r.flags.writeable = False
                self._cache[j] = r
        return r

    def diagonal(self) -> Array:
        """``b_{j,j} = tau_j**(1 - alpha) / Gamma(2 - alpha)``."""
        return np.diff(self.times) ** (1.0 - self.alpha) / math.gamma(2.0 - self.alpha)


def conv_weights_row(grid: GradedGrid | Array, alpha: float, j: int) -> Array:
    _check_alpha(alpha)
    t = _times_of(grid)
    if not 1 <= j <= len(t) - 1:
        raise IndexError(f"row {j} outside 1..{len(t) - 1}")
    return weight_row(t, alpha, j)


def frac_integral_piecewise(
    grid: GradedGrid | Array, alpha: float, values: Array, t: float
) -> float:
    """``(D^{-(1-alpha)} w)(t)`` for ``w`` piecewise constant with the given values."""
    _check_alpha(alpha)
    times = _times_of(grid)
    if not 0.0 < t <= times[-1]:
        raise ValueError(f"t = {t} outside (0, {times[-1]}]")
    p = 1.0 - alpha
    left = np.clip(t - times[:-1], 0.0, None) ** p
    right = np.clip(t - times[1:], 0.0, None) ** p
    return float(np.dot(values, left - right) / math.gamma(2.0 - alpha))


def stability_bound(alpha: float, L: float) -> float:
    """Largest admissible step ``(1 / (L Gamma(2 - alpha)))**(1 / alpha)``."""
    if L <= 0:
        return math.inf
    return (1.0 / (L * math.gamma(2.0 - alpha))) ** (1.0 / alpha)


def eta_predictors(
    alpha: float, sigma: float, J: int, atol: float = 1e-12
) -> tuple[Optional[float], Optional[float]]:
    """Predicted rates ``(eta1, eta2)``; ``None`` where a formula is not defined.

    The middle branches are taken when ``sigma`` equals ``2 - alpha`` (resp. 2)
    within ``atol``.
    """
    if J < 2:
        raise ValueError("need J >= 2")
    lnJ = math.log(J)

    def branch(crit: float, upper: float) -> Optional[float]:
        if sigma < 1.0 or sigma >= upper:
            return None
        e = sigma - crit
        if abs(e) <= atol:
            return J ** (-crit / 2.0) * math.sqrt(lnJ)
        # (J^e - 1) / e, for either sign of e
        return J ** (-sigma / 2.0) * math.sqrt(math.expm1(e * lnJ) / e)

    return branch(2.0 - alpha, 3.0 - alpha), branch(2.0, 3.0)
