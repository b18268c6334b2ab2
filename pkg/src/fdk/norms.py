"""Error functionals between two space-time dG(0) solutions.

Both solutions are constant in time between breakpoints, so every functional
is evaluated exactly on the union of the two time grids. Spatial comparisons
are made on the finer of two nested meshes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fracquad import GradedGrid, weight_row
from .mesh_fem import Mesh1D, assemble_mass, assemble_stiffness, prolong_values
from .solver import PiecewiseConstant
from .timeavg import interval_averages

Array = np.ndarray

#: Breakpoints closer than this (relative to T) are identified.
MERGE_RTOL = 1e-14
#: ``Q`` below ``-NEGATIVE_Q_RTOL * scale`` is reported as suspicious.
NEGATIVE_Q_RTOL = 1e-9


def _times(x: GradedGrid | PiecewiseConstant | Array) -> Array:
    t = getattr(x, "times", x)
    return np.asarray(t, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class MergedTimeline:
    breakpoints: Array
    index_a: Array
    index_b: Array

    @property
    def steps(self) -> Array:
        return np.diff(self.breakpoints)


def merge(grid_a, grid_b) -> MergedTimeline:
    """Union of two time grids with maps from merged to source intervals (0-based)."""
    ta, tb = _times(grid_a), _times(grid_b)
    T = ta[-1]
    if abs(ta[-1] - tb[-1]) > MERGE_RTOL * T or ta[0] != 0.0 or tb[0] != 0.0:
        raise ValueError(f"time grids cover different intervals: [0, {ta[-1]}] vs [0, {tb[-1]}]")
    allt = np.sort(np.concatenate((ta, tb)))
    keep = np.concatenate(([True], np.diff(allt) > MERGE_RTOL * T))
    bp = allt[keep]
    bp[-1] = T
    # a point within tolerance of T would leave a sliver interval
    if len(bp) > 2 and bp[-1] - bp[-2] <= MERGE_RTOL * T:
        bp = np.delete(bp, -2)
    mids = 0.5 * (bp[:-1] + bp[1:])
    ia = np.clip(np.searchsorted(ta, mids, side="right") - 1, 0, len(ta) - 2)
    ib = np.clip(np.searchsorted(tb, mids, side="right") - 1, 0, len(tb) - 2)
    return MergedTimeline(bp, ia, ib)


def _finer_mesh(u: PiecewiseConstant, v: PiecewiseConstant) -> Mesh1D:
    fine, coarse = (u.mesh, v.mesh) if u.mesh.n_cells >= v.mesh.n_cells else (v.mesh, u.mesh)
    if fine.n_cells % coarse.n_cells:
        raise ValueError(
            f"spatial meshes are not nested ({u.mesh.n_cells} and {v.mesh.n_cells} cells)"
        )
    return fine


def _difference(u: PiecewiseConstant, v: PiecewiseConstant) -> tuple[Mesh1D, MergedTimeline, Array]:
    fine = _finer_mesh(u, v)
    tl = merge(u, v)
    du = prolong_values(u.values, u.mesh, fine)
    dv = prolong_values(v.values, v.mesh, fine)
    return fine, tl, du[tl.index_a] - dv[tl.index_b]


def error_e0(u: PiecewiseConstant, ref: PiecewiseConstant, norm: str = "l2") -> float:
    """Norm of the difference of the final slabs.

    ``norm="l2"`` (default) is the quantity whose tabulated values and h^2
    rate the spatial error estimate describes; ``norm="h1"`` gives the H1
    seminorm, which for P1 elements converges only like h.
    """
    fine = _finer_mesh(u, ref)
    d = prolong_values(u.values[-1], u.mesh, fine) - prolong_values(
        ref.values[-1], ref.mesh, fine
    )
    if norm == "l2":
        mat = assemble_mass(fine)
    elif norm == "h1":
        mat = assemble_stiffness(fine)
    else:
        raise ValueError(f"norm must be 'l2' or 'h1', got {norm!r}")
    return math.sqrt(max(float(mat.quad_form(d)), 0.0))


def error_e2_e3(u: PiecewiseConstant, ref: PiecewiseConstant) -> tuple[float, float]:
    """``L2(0,T; H1)`` and ``L2(0,T; L2)`` norms of the difference."""
    fine, tl, d = _difference(u, ref)
    dt = tl.steps
    h1 = assemble_stiffness(fine).quad_form(d)
    l2 = assemble_mass(fine).quad_form(d)
    return math.sqrt(max(float(dt @ h1), 0.0)), math.sqrt(max(float(dt @ l2), 0.0))


def frac_quadratic_form(
    times: Array, alpha: float, values: Array, mass=None, block: int = 256
) -> tuple[float, float]:
    """``Q = sum_j sum_{k<=j} b_{j,k} <e_k, e_j>`` and the scale ``sum_j b_{j,j} |e_j|^2``.

    ``values`` holds one row per interval; with ``mass`` given the inner
    product is ``e^T M e``, otherwise ``values`` is treated as scalar or
    Euclidean data.
    """
    times = np.asarray(times, dtype=np.float64)
    e = np.asarray(values, dtype=np.float64)
    if e.ndim == 1:
        e = e[:, None]
    me = mass.matvec(e) if mass is not None else e
    m = e.shape[0]
    q = 0.0
    scale = 0.0
    for j0 in range(0, m, block):
        j1 = min(j0 + block, m)
        bw = np.zeros((j1 - j0, j1))
        for j in range(j0 + 1, j1 + 1):
            bw[j - 1 - j0, :j] = weight_row(times, alpha, j)
        g = e[j0:j1] @ me[:j1].T
        q += float(np.sum(bw * g))
        scale += float(np.sum(bw[np.arange(j1 - j0), np.arange(j0, j1)] * np.diag(g[:, j0:j1])))
    return q, scale


def frac_energy(u: PiecewiseConstant, ref: PiecewiseConstant, alpha: float) -> float:
    """``sqrt(<D^alpha e, e>)`` for ``e = u - ref``, clamped at zero."""
    return _frac_energy(u, ref, alpha)[0]


def _frac_energy(u, ref, alpha) -> tuple[float, bool]:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
    fine, tl, d = _difference(u, ref)
    q, scale = frac_quadratic_form(tl.breakpoints, alpha, d, assemble_mass(fine))
    flagged = q < -NEGATIVE_Q_RTOL * scale
    if flagged:
        warnings.warn(
            f"fractional energy is negative beyond roundoff: Q={q:.3e}, scale={scale:.3e}",
            RuntimeWarning,
            stacklevel=3,
        )
    return math.sqrt(max(q, 0.0)), flagged


@dataclass(frozen=True)
class ErrorReport:
    e0: float
    e1: float
    e2: float
    e3: float
    e1_flagged: bool = False
    meta: dict = field(default_factory=dict, compare=False)


def error_report(u: PiecewiseConstant, ref: PiecewiseConstant, alpha: float) -> ErrorReport:
    e1, flagged = _frac_energy(u, ref, alpha)
    e2, e3 = error_e2_e3(u, ref)
    meta = {
        "J": u.J,
        "n_cells": u.mesh.n_cells,
        "ref_J": ref.J,
        "ref_n_cells": ref.mesh.n_cells,
    }
    return ErrorReport(error_e0(u, ref), e1, e2, e3, flagged, meta)


def observed_order(errors: Sequence[tuple[float, float]]) -> list[float]:
    """Observed convergence orders between consecutive ``(parameter, error)`` rows.

    The order is ``log(err_{i-1} / err_i) / |log(p_i / p_{i-1})|``, so halving
    ``h`` or doubling ``J`` both give ``log2`` of the error ratio.
    """
    if len(errors) < 2:
        raise ValueError("need at least two rows to estimate an order")
    for p, e in errors:
        if not (e > 0 and math.isfinite(e)):
            raise ValueError(f"errors must be positive and finite, got {e}")
        if not p > 0:
            raise ValueError(f"refinement parameters must be positive, got {p}")
    out = []
    for (p0, e0), (p1, e1) in zip(errors[:-1], errors[1:]):
        ratio = abs(math.log(p1 / p0))
        if ratio == 0:
            raise ValueError("consecutive rows have the same parameter")
        out.append(math.log(e0 / e1) / ratio)
    return out


def p_tau_project(
    v: Callable[[Array], Array], grid: GradedGrid | Array, mesh: Mesh1D
) -> PiecewiseConstant:
    """Interval averages of ``v`` (vectorised over time) on ``grid``."""
    times = _times(grid)
    return PiecewiseConstant(mesh, times, interval_averages(v, times))
