"""Uniform P1 finite elements on the unit interval with homogeneous Dirichlet data.

Everything here is strictly tridiagonal: a function in the discrete space is
stored by its values at the interior nodes, and the mass and stiffness
matrices are kept as three diagonals.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate
from scipy.linalg import lapack

Array = np.ndarray


@dataclass(frozen=True)
class Mesh1D:
    """Uniform partition of (0, 1) into ``n_cells`` cells."""

    n_cells: int

    def __post_init__(self) -> None:
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"a mesh needs at least 2 cells, got {self.n_cells}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> Array:
        return np.arange(self.n_cells + 1) / self.n_cells

    @property
    def interior(self) -> Array:
        return self.nodes[1:-1]

    @property
    def dim(self) -> int:
        """Number of degrees of freedom (interior nodes)."""
        return self.n_cells - 1


def build_mesh(n_cells: int) -> Mesh1D:
    return Mesh1D(n_cells)


@dataclass(frozen=True, eq=False)
class FeFunction:
    """A continuous piecewise linear function vanishing at 0 and 1."""

    mesh: Mesh1D
    coeffs: Array

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.float64)
        if c.shape != (self.mesh.dim,):
            raise ValueError(
                f"expected {self.mesh.dim} interior values, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("FeFunction coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def nodal_values(self) -> Array:
        """Values at all nodes, boundary zeros included."""
        return np.concatenate(([0.0], self.coeffs, [0.0]))

    def __call__(self, x: Array | float) -> Array:
        return np.interp(x, self.mesh.nodes, self.nodal_values())


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    """Square tridiagonal matrix stored by its three diagonals."""

    sub: Array
    diag: Array
    sup: Array

    def __post_init__(self) -> None:
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ValueError("off-diagonals must have length n - 1")

    @property
    def n(self) -> int:
        return len(self.diag)

    def __add__(self, other: TridiagonalMatrix) -> TridiagonalMatrix:
        return TridiagonalMatrix(
            self.sub + other.sub, self.diag + other.diag, self.sup + other.sup
        )

    def __sub__(self, other: TridiagonalMatrix) -> TridiagonalMatrix:
        return TridiagonalMatrix(
            self.sub - other.sub, self.diag - other.diag, self.sup - other.sup
        )

    def __rmul__(self, s: float) -> TridiagonalMatrix:
        return TridiagonalMatrix(s * self.sub, s * self.diag, s * self.sup)

    def matvec(self, x: Array) -> Array:
        """Apply the matrix along the last axis of ``x``."""
        x = np.asarray(x, dtype=np.float64)
        y = self.diag * x
        y[..., :-1] += self.sup * x[..., 1:]
        y[..., 1:] += self.sub * x[..., :-1]
        return y

    def quad_form(self, x: Array) -> Array:
        """``x^T K x`` along the last axis."""
        return np.sum(x * self.matvec(x), axis=-1)

    def solve(self, b: Array) -> Array:
        """Solve ``K x = b`` by tridiagonal Gaussian elimination (LAPACK gtsv)."""
        _, _, _, x, info = lapack.dgtsv(self.sub, self.diag, self.sup, b)
        if info > 0:
            raise np.linalg.LinAlgError(f"zero pivot in tridiagonal solve at row {info}")
        return x

    def to_dense(self) -> Array:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.sub, self.sup))


def assemble_mass(mesh: Mesh1D) -> TridiagonalMatrix:
    n, h = mesh.dim, mesh.h
    off = np.full(n - 1, h / 6.0)
    return TridiagonalMatrix(off, np.full(n, 2.0 * h / 3.0), off.copy())


def assemble_stiffness(mesh: Mesh1D) -> TridiagonalMatrix:
    n, h = mesh.dim, mesh.h
    off = np.full(n - 1, -1.0 / h)
    return TridiagonalMatrix(off, np.full(n, 2.0 / h), off.copy())


def gauss_rule(npts: int) -> tuple[Array, Array]:
    """Gauss-Legendre points and weights on the reference cell [0, 1]."""
    s, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (s + 1.0), 0.5 * w


def assemble_weighted_mass(
    mesh: Mesh1D, weight: Callable[[Array], Array], nodal: Array, npts: int = 3
) -> TridiagonalMatrix:
    """Mass matrix with coefficient ``weight(v(x))`` where ``v`` has interior values ``nodal``.

    Integrals are taken with an ``npts``-point Gauss rule on every cell.
    """
    s, w = gauss_rule(npts)
    full = np.concatenate(([0.0], nodal, [0.0]))
    vq = full[:-1, None] * (1.0 - s) + full[1:, None] * s
    gq = weight(vq) * (mesh.h * w)
    m_ll = gq @ ((1.0 - s) ** 2)
    m_lr = gq @ (s * (1.0 - s))
    m_rr = gq @ (s**2)
    # cell e couples nodes e and e + 1; interior node i is global node i + 1
    diag = m_rr[:-1] + m_ll[1:]
    off = m_lr[1:-1]
    return TridiagonalMatrix(off, diag, off.copy())


def assemble_load(
    mesh: Mesh1D, func: Callable[[Array], Array], nodal: Array, npts: int = 3
) -> Array:
    """Vector of ``int func(v(x)) phi_i(x) dx`` by per-cell Gauss quadrature."""
    s, w = gauss_rule(npts)
    full = np.concatenate(([0.0], nodal, [0.0]))
    vq = full[:-1, None] * (1.0 - s) + full[1:, None] * s
    fq = func(vq) * (mesh.h * w)
    left = fq @ (1.0 - s)
    right = fq @ s
    return right[:-1] + left[1:]


# {{{ initial data


def _pow_diff(b: Array, a: Array, p: float) -> Array:
    """``b**p - a**p`` for ``0 <= a < b`` without cancellation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pos = a > 0
    aa = np.where(pos, a, 1.0)
    return np.where(pos, aa**p * np.expm1(p * np.log1p((b - a) / aa)), b**p)


@dataclass(frozen=True)
class PowerLaw:
    """``x**gamma`` on (0, 1)."""

    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > -0.5:
            raise ValueError(f"x**{self.gamma} is not square integrable on (0, 1)")

    @property
    def spec(self) -> str:
        return f"power_law({self.gamma!r})"

    def __call__(self, x: Array) -> Array:
        return np.asarray(x, dtype=np.float64) ** self.gamma

    def load_vector(self, mesh: Mesh1D) -> Array:
        return _power_load(mesh, self.gamma)


@dataclass(frozen=True)
class PowerProduct:
    """``x**gamma * (1 - x)`` on (0, 1)."""

    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > -0.5:
            raise ValueError(f"x**{self.gamma}(1-x) is not square integrable on (0, 1)")

    @property
    def spec(self) -> str:
        return f"power_product({self.gamma!r})"

    def __call__(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return x**self.gamma * (1.0 - x)

    def load_vector(self, mesh: Mesh1D) -> Array:
        return _power_load(mesh, self.gamma) - _power_load(mesh, self.gamma + 1.0)


@dataclass(frozen=True)
class Sine:
    """``sin(k pi x)``."""

    k: int

    @property
    def spec(self) -> str:
        return f"sine({self.k})"

    def __call__(self, x: Array) -> Array:
        return np.sin(self.k * np.pi * np.asarray(x, dtype=np.float64))

    def load_vector(self, mesh: Mesh1D) -> Array:
        om, h = self.k * np.pi, mesh.h
        # int sin(om x) phi_i dx = sin(om x_i) * 4 sin^2(om h / 2) / (om^2 h)
        return np.sin(om * mesh.interior) * 4.0 * np.sin(0.5 * om * h) ** 2 / (om**2 * h)


def _power_load(mesh: Mesh1D, gamma: float) -> Array:
    # per cell [a, b]: I0 = int x^g, I1 = int x^(g+1); rising hat (I1 - a I0)/h,
    # falling hat (b I0 - I1)/h
    x, h = mesh.nodes, mesh.h
    a, b = x[:-1], x[1:]
    i0 = _pow_diff(b, a, gamma + 1.0) / (gamma + 1.0)
    i1 = _pow_diff(b, a, gamma + 2.0) / (gamma + 2.0)
    rising = (i1 - a * i0) / h
    falling = (b * i0 - i1) / h
    return rising[:-1] + falling[1:]


InitialDatum = Union[str, PowerLaw, PowerProduct, Sine, FeFunction, Callable[[Array], Array]]

_DATUM_RE = re.compile(r"^\s*(power_law|power_product|sine)\(\s*([^)]+)\)\s*$")


def parse_datum(spec: str) -> PowerLaw | PowerProduct | Sine:
    """Parse ``power_law(g)``, ``power_product(g)`` or ``sine(k)``."""
    m = _DATUM_RE.match(spec)
    if m is None:
        raise ValueError(f"unknown initial datum {spec!r}")
    kind, arg = m.groups()
    if kind == "sine":
        return Sine(int(arg))
    return (PowerLaw if kind == "power_law" else PowerProduct)(float(arg))


def datum_spec(u0: InitialDatum) -> str:
    """A string identifying ``u0`` for cache keys and file headers."""
    if isinstance(u0, str):
        u0 = parse_datum(u0)
    if isinstance(u0, (PowerLaw, PowerProduct, Sine)):
        return u0.spec
    if isinstance(u0, FeFunction):
        import hashlib

        digest = hashlib.sha256(u0.coeffs.tobytes()).hexdigest()[:16]
        return f"fe({u0.mesh.n_cells},{digest})"
    return f"callable({getattr(u0, '__qualname__', type(u0).__name__)})"


def _callable_load(mesh: Mesh1D, func: Callable, tol: float = 1e-10) -> Array:
    x, h = mesh.nodes, mesh.h
    b = np.zeros(mesh.dim)
    for e in range(mesh.n_cells):
        a_, b_ = x[e], x[e + 1]
        for node, shape in ((e, lambda s: (b_ - s) / h), (e + 1, lambda s: (s - a_) / h)):
            if node == 0 or node == mesh.n_cells:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, _ = integrate.quad(
                        lambda s: float(func(s)) * shape(s),
                        a_, b_, epsabs=tol, epsrel=tol, limit=200,
                    )
                except integrate.IntegrationWarning as exc:
                    raise ArithmeticError(
                        f"quadrature for the initial datum did not converge on "
                        f"cell [{a_}, {b_}]: {exc}"
                    ) from exc
            b[node - 1] += val
    return b


def l2_project(u0: InitialDatum, mesh: Mesh1D) -> FeFunction:
    """L2-orthogonal projection onto the P1 space of ``mesh``."""
    if isinstance(u0, str):
        u0 = parse_datum(u0)
    if isinstance(u0, FeFunction):
        if u0.mesh == mesh:
            return u0
        b = _callable_load(mesh, u0)
    elif isinstance(u0, (PowerLaw, PowerProduct, Sine)):
        b = u0.load_vector(mesh)
    elif callable(u0):
        b = _callable_load(mesh, u0)
    else:
        raise TypeError(f"unsupported initial datum {u0!r}")
    return FeFunction(mesh, assemble_mass(mesh).solve(b))


# }}}


def discrete_eigenpairs(mesh: Mesh1D) -> tuple[Array, Array]:
    """Eigenpairs of ``A v = lam M v`` in closed form.

    Returns the eigenvalues (increasing) and a matrix whose ``k``-th row holds
    the M-orthonormal eigenvector ``sin(k pi x_i)`` (scaled).
    """
    n, h = mesh.n_cells, mesh.h
    k = np.arange(1, n)
    c = np.cos(k * np.pi * h)
    lam = 6.0 * (1.0 - c) / (h**2 * (2.0 + c))
    vecs = np.sin(np.outer(k, mesh.interior) * np.pi)
    # M sin_k = h (2 + cos(k pi h)) / 3 * sin_k and |sin_k|^2 = n / 2
    mu = h * (2.0 + c) / 3.0
    vecs /= np.sqrt(mu * n / 2.0)[:, None]
    return lam, vecs


def fe_norms(v: FeFunction) -> tuple[float, float]:
    """``(L2 norm, H1 seminorm)``."""
    c = v.coeffs
    l2 = float(assemble_mass(v.mesh).quad_form(c))
    h1 = float(assemble_stiffness(v.mesh).quad_form(c))
    return math.sqrt(max(l2, 0.0)), math.sqrt(max(h1, 0.0))


def prolong_values(values: Array, coarse: Mesh1D, fine: Mesh1D) -> Array:
    """Prolong interior values (last axis) from ``coarse`` to the nested ``fine`` mesh."""
    if fine.n_cells % coarse.n_cells:
        raise ValueError(
            f"meshes are not nested: {fine.n_cells} cells is not a multiple "
            f"of {coarse.n_cells}"
        )
    values = np.asarray(values, dtype=np.float64)
    r = fine.n_cells // coarse.n_cells
    if r == 1:
        return values.copy()
    pad = [(0, 0)] * (values.ndim - 1) + [(1, 1)]
    full = np.pad(values, pad)
    # new node r*e + m lies at fraction m / r of coarse cell e
    frac = np.arange(r) / r
    out = full[..., :-1, None] * (1.0 - frac) + full[..., 1:, None] * frac
    out = out.reshape(*values.shape[:-1], -1)
    return out[..., 1:]


def prolong(v: FeFunction, fine: Mesh1D) -> FeFunction:
    return FeFunction(fine, prolong_values(v.coeffs, v.mesh, fine))
