"""dG(0)-in-time / P1-in-space solver for ``D^alpha (u - u0) - u_xx = f(u)``.

On the ``j``-th interval the unknown nodal vector ``W = U_j`` solves

    sum_{k<j} b_{j,k} M (U_k - u0h) + b_{j,j} M (W - u0h) + tau_j A W - tau_j F(W) = 0,

where ``F(W)_i = int f(W) phi_i``. The systems are solved by Newton's method
marching ``j = 1, ..., J``.
"""

from __future__ import annotations

import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .fracquad import ConvWeights, GradedGrid, stability_bound
from .mesh_fem import (
    FeFunction,
    InitialDatum,
    Mesh1D,
    TridiagonalMatrix,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    datum_spec,
    l2_project,
)

Array = np.ndarray
logger = logging.getLogger(__name__)


# {{{ nonlinearities


@dataclass(frozen=True)
class NonlinearSpec:
    """Reaction term ``f`` with derivative and Lipschitz constant ``L``."""

    name: str
    f: Callable[[Array], Array] = field(compare=False, repr=False)
    fprime: Callable[[Array], Array] = field(compare=False, repr=False)
    L: float

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"


def sqrt1p() -> NonlinearSpec:
    return NonlinearSpec(
        "sqrt1p",
        lambda s: np.sqrt(1.0 + s * s),
        lambda s: s / np.sqrt(1.0 + s * s),
        1.0,
    )


def zero() -> NonlinearSpec:
    return NonlinearSpec("zero", np.zeros_like, np.zeros_like, 0.0)


def linear(lam: float) -> NonlinearSpec:
    lam = float(lam)
    return NonlinearSpec(
        f"linear({lam!r})", lambda s: lam * s, lambda s: np.full_like(s, lam), abs(lam)
    )


def nonlinearity_from_name(name: str) -> NonlinearSpec:
    if name == "sqrt1p":
        return sqrt1p()
    if name == "zero":
        return zero()
    m = re.fullmatch(r"linear\(([^)]+)\)", name.strip())
    if m:
        return linear(float(m.group(1)))
    raise ValueError(f"unknown nonlinearity {name!r}")


# }}}


class StabilityError(ValueError):
    """The largest time step violates the unique-solvability bound."""


class StepFailure(RuntimeError):
    """Newton's method did not converge on one time interval."""

    def __init__(self, j: int, residual_norm: float, message: str = "") -> None:
        self.j = j
        self.residual_norm = residual_norm
        self.partial: Optional[SpaceTimeSolution] = None
        super().__init__(
            message
            or f"Newton failed on interval {j}: residual norm {residual_norm:.3e}"
        )


@dataclass(frozen=True, eq=False)
class SolverConfig:
    mesh: Mesh1D
    grid: GradedGrid
    alpha: float
    nonlinearity: NonlinearSpec
    u0: InitialDatum
    newton_tol: float = 1e-13
    newton_max_iter: int = 50
    quadrature_points: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.alpha}")
        bound = stability_bound(self.alpha, self.nonlinearity.L)
        if self.grid.tau >= bound:
            raise StabilityError(
                f"largest step {self.grid.tau:.6g} violates the bound "
                f"{bound:.6g} for alpha={self.alpha}, L={self.nonlinearity.L}"
            )
        if self.grid.tau >= 0.5 * bound:
            warnings.warn(
                f"largest step {self.grid.tau:.6g} exceeds half the stability "
                f"bound {bound:.6g}",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def u0_spec(self) -> str:
        return datum_spec(self.u0)

    @cached_property
    def mass(self) -> TridiagonalMatrix:
        return assemble_mass(self.mesh)

    @cached_property
    def stiffness(self) -> TridiagonalMatrix:
        return assemble_stiffness(self.mesh)

    @cached_property
    def u0h(self) -> FeFunction:
        return l2_project(self.u0, self.mesh)

    @cached_property
    def weights(self) -> ConvWeights:
        return ConvWeights(self.grid, self.alpha)


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """A function of ``(x, t)``, P1 in space and constant on each time interval."""

    mesh: Mesh1D
    times: Array
    values: Array

    def __post_init__(self) -> None:
        t = np.array(self.times, dtype=np.float64)
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (len(t) - 1, self.mesh.dim):
            raise ValueError(
                f"values must have shape ({len(t) - 1}, {self.mesh.dim}), got {v.shape}"
            )
        if np.any(np.diff(t) <= 0):
            raise ValueError("time breakpoints must be strictly increasing")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def J(self) -> int:
        return len(self.times) - 1

    @property
    def slabs(self) -> list[FeFunction]:
        return [FeFunction(self.mesh, v) for v in self.values]

    def slab(self, j: int) -> FeFunction:
        """Value on ``(t_{j-1}, t_j)``, ``1 <= j <= J``."""
        return FeFunction(self.mesh, self.values[j - 1])


@dataclass(frozen=True, eq=False)
class SpaceTimeSolution(PiecewiseConstant):
    """Discrete solution together with the data that produced it."""

    u0h: Optional[FeFunction] = None
    alpha: float = math.nan
    sigma: float = math.nan
    nonlinearity: str = ""
    u0_spec: str = ""
    newton_iters: tuple[int, ...] = ()

    @property
    def T(self) -> float:
        return float(self.times[-1])


# {{{ residual and Jacobian


def _history(cfg: SolverConfig, j: int, history: Sequence[FeFunction] | Array) -> Array:
    if j == 1:
        return np.zeros(cfg.mesh.dim)
    hist = np.array([getattr(u, "coeffs", u) for u in history], dtype=np.float64)
    if hist.shape[0] < j - 1:
        raise ValueError(f"step {j} needs {j - 1} previous slabs, got {hist.shape[0]}")
    b = cfg.weights.row(j)
    return cfg.mass.matvec(b[:-1] @ (hist[: j - 1] - cfg.u0h.coeffs))


def _residual(cfg: SolverConfig, j: int, w: Array, hist_term: Array) -> Array:
    bjj = cfg.weights.row(j)[-1]
    tau = cfg.grid.times[j] - cfg.grid.times[j - 1]
    r = hist_term + bjj * cfg.mass.matvec(w - cfg.u0h.coeffs) + tau * cfg.stiffness.matvec(w)
    if not cfg.nonlinearity.is_zero:
        r -= tau * assemble_load(cfg.mesh, cfg.nonlinearity.f, w, cfg.quadrature_points)
    return r


def _jacobian(cfg: SolverConfig, j: int, w: Array) -> TridiagonalMatrix:
    bjj = cfg.weights.row(j)[-1]
    tau = cfg.grid.times[j] - cfg.grid.times[j - 1]
    jac = bjj * cfg.mass + tau * cfg.stiffness
    if not cfg.nonlinearity.is_zero:
        mf = assemble_weighted_mass(
            cfg.mesh, cfg.nonlinearity.fprime, w, cfg.quadrature_points
        )
        jac = jac - tau * mf
    return jac


def residual(
    j: int, W: FeFunction | Array, history: Sequence[FeFunction] | Array, cfg: SolverConfig
) -> Array:
    """Residual of the ``j``-th interval equations tested with every ``phi_i``."""
    w = np.asarray(getattr(W, "coeffs", W), dtype=np.float64)
    return _residual(cfg, j, w, _history(cfg, j, history))


def jacobian(j: int, W: FeFunction | Array, cfg: SolverConfig) -> TridiagonalMatrix:
    """Derivative of :func:`residual` with respect to ``W``."""
    w = np.asarray(getattr(W, "coeffs", W), dtype=np.float64)
    return _jacobian(cfg, j, w)


# }}}


def _newton(
    cfg: SolverConfig, j: int, guess: Array, hist_term: Array
) -> tuple[Array, int, float]:
    w = guess.copy()
    r = _residual(cfg, j, w, hist_term)
    rnorm = float(np.linalg.norm(r))
    it = 0
    while rnorm > cfg.newton_tol:
        if it >= cfg.newton_max_iter:
            raise StepFailure(j, rnorm)
        try:
            w -= _jacobian(cfg, j, w).solve(r)
        except np.linalg.LinAlgError as exc:
            raise StepFailure(j, rnorm, f"singular Jacobian on interval {j}: {exc}") from exc
        r = _residual(cfg, j, w, hist_term)
        rnorm = float(np.linalg.norm(r))
        it += 1
        if not math.isfinite(rnorm):
            raise StepFailure(j, rnorm)
    return w, it, rnorm


def step(j: int, history: Sequence[FeFunction] | Array, cfg: SolverConfig) -> FeFunction:
    """Solve for ``U_j`` given ``U_1, ..., U_{j-1}``."""
    hist_term = _history(cfg, j, history)
    if j == 1:
        guess = cfg.u0h.coeffs
    else:
        guess = np.asarray(getattr(history[j - 2], "coeffs", history[j - 2]))
    w, _, _ = _newton(cfg, j, guess, hist_term)
    return FeFunction(cfg.mesh, w)


def solve(cfg: SolverConfig) -> SpaceTimeSolution:
    """March ``j = 1, ..., J``."""
    J, n = cfg.grid.J, cfg.mesh.dim
    u0h = cfg.u0h.coeffs
    slabs = np.empty((J, n))
    # rows hold M (U_k - u0h); the history term of row j is b_{j,<j} @ these
    mdiff = np.empty((J, n))
    iters = []
    w = u0h
    for j in range(1, J + 1):
        b = cfg.weights.row(j)
        hist_term = b[:-1] @ mdiff[: j - 1] if j > 1 else np.zeros(n)
        try:
            w, it, _ = _newton(cfg, j, w, hist_term)
        except StepFailure as exc:
            if j > 1:
                exc.partial = _pack(cfg, slabs[: j - 1], tuple(iters))
            logger.warning("solve aborted: %s", exc)
            raise
        slabs[j - 1] = w
        mdiff[j - 1] = cfg.mass.matvec(w - u0h)
        iters.append(it)
    return _pack(cfg, slabs, tuple(iters))


def _pack(cfg: SolverConfig, slabs: Array, iters: tuple[int, ...]) -> SpaceTimeSolution:
    return SpaceTimeSolution(
        mesh=cfg.mesh,
        times=cfg.grid.times[: len(slabs) + 1],
        values=slabs,
        u0h=cfg.u0h,
        alpha=cfg.alpha,
        sigma=cfg.grid.sigma,
        nonlinearity=cfg.nonlinearity.name,
        u0_spec=cfg.u0_spec,
        newton_iters=iters,
    )
