"""Interval averages of vector-valued functions of time.

Each average ``tau_j^-1 int_{t_{j-1}}^{t_j} v(t) dt`` is computed by adaptive
Gauss-Kronrod (7/15) bisection. The first interval is pre-split geometrically
towards ``t = 0`` where the integrands of interest behave like ``t^alpha``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

Array = np.ndarray

#: Absolute accuracy target for every averaged value.
AVERAGE_TOL = 1e-10
#: Geometric pre-splitting depth of the first interval.
FIRST_INTERVAL_LEVELS = 40
MAX_SUBINTERVALS = 20000

_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
])


class QuadratureError(ArithmeticError):
    def __init__(self, interval: int, message: str) -> None:
        self.interval = interval
        super().__init__(f"interval {interval}: {message}")


def _integrate(
    func: Callable[[Array], Array], pieces: list[tuple[float, float]], atol: float
) -> tuple[Array, float]:
    """Integral over the union of ``pieces`` with a global error budget ``atol``."""
    # all GK nodes of a batch of subintervals are evaluated in one call
    def gk(batch: list[tuple[float, float]]) -> tuple[Array, Array]:
        a = np.array([p[0] for p in batch])
        b = np.array([p[1] for p in batch])
        c, r = 0.5 * (a + b), 0.5 * (b - a)
        t = (c[:, None] + r[:, None] * _XK).ravel()
        fv = np.asarray(func(t), dtype=np.float64).reshape(len(batch), len(_XK), -1)
        k15 = np.einsum("q,bqn->bn", _WK, fv) * r[:, None]
        g7 = np.einsum("q,bqn->bn", _WG, fv[:, 1::2]) * r[:, None]
        err = np.max(np.abs(k15 - g7), axis=1)
        return k15, err

    span = pieces[-1][1] - pieces[0][0]
    total = 0.0
    pending = list(pieces)
    err_total = 0.0
    n_seen = 0
    while pending:
        n_seen += len(pending)
        if n_seen > MAX_SUBINTERVALS:
            raise ArithmeticError("subdivision limit reached")
        vals, errs = gk(pending)
        nxt = []
        for (a, b), v, e in zip(pending, vals, errs):
            # local budget proportional to the subinterval length
            if e <= atol * (b - a) / span or b - a <= 1e-15 * max(abs(a), abs(b), 1e-300):
                total = total + v
                err_total += e
            else:
                m = 0.5 * (a + b)
                nxt += [(a, m), (m, b)]
        pending = nxt
    return total, err_total


def interval_averages(
    func: Callable[[Array], Array], times: Array, atol: float = AVERAGE_TOL
) -> Array:
    """Averages of ``func`` over ``(times[j-1], times[j])`` as rows of an array.

    ``func`` maps a 1D array of times to an array of shape ``(len(t), n)``
    and must be bounded; an integrand that cannot be resolved to ``atol``
    raises :class:`QuadratureError`.
    """
    times = np.asarray(times, dtype=np.float64)
    rows = []
    for j in range(1, len(times)):
        a, b = float(times[j - 1]), float(times[j])
        tau = b - a
        if j == 1 and a == 0.0:
            cuts = [0.0] + [b * 2.0**-k for k in range(FIRST_INTERVAL_LEVELS, -1, -1)]
            pieces = list(zip(cuts[:-1], cuts[1:]))
        else:
            pieces = [(a, b)]
        try:
            integral, _ = _integrate(func, pieces, atol * tau)
        except ArithmeticError as exc:
            raise QuadratureError(j, str(exc)) from exc
        rows.append(np.asarray(integral) / tau)
    return np.array(rows)
