"""Spectral solution of the linear semidiscrete problem (``f = 0``).

With the discrete eigenpairs ``A v_k = lam_k M v_k`` (M-orthonormal) the
semidiscrete solution is

    u_h(t) = sum_k E_{alpha,1}(-lam_k t^alpha) c_k v_k,   c_k = v_k^T M P_h u0,

which serves as an independent reference for the dG(0) solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fracquad import GradedGrid
from .mesh_fem import (
    FeFunction,
    InitialDatum,
    Mesh1D,
    assemble_mass,
    discrete_eigenpairs,
    l2_project,
)
from .mittag_leffler import mittag_leffler
from .norms import p_tau_project
from .solver import PiecewiseConstant

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    mesh: Mesh1D
    alpha: float
    coeffs: Array
    eigenvalues: Array
    eigenvectors: Array
    T: float = 1.0

    @property
    def u0h(self) -> FeFunction:
        return FeFunction(self.mesh, self.coeffs @ self.eigenvectors)


def build(mesh: Mesh1D, alpha: float, u0: InitialDatum, T: float = 1.0) -> SpectralSolution:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
    lam, vecs = discrete_eigenpairs(mesh)
    u0h = l2_project(u0, mesh)
    coeffs = vecs @ assemble_mass(mesh).matvec(u0h.coeffs)
    return SpectralSolution(mesh, float(alpha), coeffs, lam, vecs, float(T))


def evaluate_many(sol: SpectralSolution, ts: Array) -> Array:
    """Nodal values at each time in ``ts``, one row per time."""
    ts = np.asarray(ts, dtype=np.float64)
    if np.any(ts < 0) or np.any(ts > sol.T):
        raise ValueError(f"times must lie in [0, {sol.T}]")
    arg = -np.outer(ts**sol.alpha, sol.eigenvalues)
    e = mittag_leffler(sol.alpha, 1.0, arg.ravel()).reshape(arg.shape)
    return (e * sol.coeffs) @ sol.eigenvectors


def evaluate(sol: SpectralSolution, t: float) -> FeFunction:
    if t == 0:
        return sol.u0h
    return FeFunction(sol.mesh, evaluate_many(sol, np.array([t]))[0])


def interval_averages(sol: SpectralSolution, grid: GradedGrid | Array) -> PiecewiseConstant:
    """Interval averages of the spectral solution on ``grid``."""
    return p_tau_project(lambda t: evaluate_many(sol, t), grid, sol.mesh)
