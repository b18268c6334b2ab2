"""Acceptance checks, one per criterion, each reporting pass or fail with its numbers."""

from __future__ import annotations

import math
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import harness, norms, spectral
from .fracquad import GradedGrid, graded_grid, stability_bound, weight_row
from .mesh_fem import Sine, assemble_mass, assemble_stiffness, build_mesh, discrete_eigenpairs
from .mittag_leffler import (
    asymptotic_radius,
    ml_asymptotic,
    ml_contour,
    ml_series,
    mittag_leffler,
    series_radius,
)
from .solver import (
    PiecewiseConstant,
    SolverConfig,
    StabilityError,
    linear,
    sqrt1p,
    solve,
    zero,
)
from .solver import jacobian as solver_jacobian
from .solver import residual as solver_residual

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _in_band(values, target: float, tol: float) -> bool:
    return bool(values) and all(abs(v - target) <= tol for v in values)


def _fmt(values) -> str:
    return "[" + ", ".join(f"{v:.3f}" for v in values) + "]"


# {{{ criteria


def check_weights() -> tuple[bool, str]:
    worst = 0.0
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
        g2 = math.gamma(2.0 - alpha)
        for sigma in (1.0, 1.5, 2.0, 2.2):
            for J in (4, 64, 1024):
                t = graded_grid(J, sigma).times
                p = 1.0 - alpha
                for j in range(1, J + 1):
                    b = weight_row(t, alpha, j)
                    exact = (t[j] ** p - t[j - 1] ** p) / g2
                    scale = float(np.max(np.abs(b)))
                    worst = max(worst, abs(float(np.sum(b)) - exact) / scale)
    return worst <= 1e-12, f"max relative telescoping defect {worst:.2e} (tol 1e-12)"


def check_mittag_leffler() -> tuple[bool, str]:
    e1 = abs(mittag_leffler(1.0, 1.0, -1.0) - math.exp(-1.0))
    ref = math.e * math.erfc(1.0)
    e2 = abs(mittag_leffler(0.5, 1.0, -1.0) - ref)
    # neighbouring evaluators must agree where the dispatcher switches
    overlap = 0.0
    for alpha in np.round(np.arange(0.1, 0.95, 0.1), 10):
        for beta in (1.0, 2.0):
            rs = -series_radius(alpha)
            ra = -asymptotic_radius(alpha, beta)
            s, c = ml_series(alpha, beta, np.array([rs]))[0], ml_contour(alpha, beta, np.array([rs]))[0]
            c2, a2 = ml_contour(alpha, beta, np.array([ra]))[0], ml_asymptotic(alpha, beta, np.array([ra]))[0]
            overlap = max(overlap, abs(s - c) / abs(s), abs(c2 - a2) / abs(a2))
    ok = e1 <= 1e-12 and e2 <= 1e-10 and overlap <= 1e-9
    return ok, (
        f"|E_1,1(-1)-1/e|={e1:.1e}, |E_.5,1(-1)-e erfc 1|={e2:.1e}, "
        f"switch-radius disagreement {overlap:.1e}"
    )


def check_eigen() -> tuple[bool, str]:
    worst_val = worst_vec = 0.0
    for n in (4, 8):
        mesh = build_mesh(n)
        lam, vecs = discrete_eigenpairs(mesh)
        M = assemble_mass(mesh).to_dense()
        A = assemble_stiffness(mesh).to_dense()
        dense_lam, dense_vecs = scipy.linalg.eigh(A, M)
        worst_val = max(worst_val, float(np.max(np.abs(lam - dense_lam) / dense_lam)))
        # eigenvalues are simple, so the vectors agree up to sign
        signs = np.sign(np.sum(vecs * dense_vecs.T, axis=1))
        worst_vec = max(worst_vec, float(np.max(np.abs(vecs - signs[:, None] * dense_vecs.T))))
    ok = worst_val <= 1e-10 and worst_vec <= 1e-10
    return ok, f"eigenvalue rel. error {worst_val:.1e}, eigenvector error {worst_vec:.1e}"


def check_jacobian(samples: int = 50) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED)
    mesh = build_mesh(16)
    cfg = SolverConfig(mesh, graded_grid(32, 2.0), 0.5, sqrt1p(), Sine(1))
    worst = 0.0
    for _ in range(samples):
        j = int(rng.integers(1, 33))
        hist = rng.normal(size=(j - 1, mesh.dim))
        w = rng.normal(size=mesh.dim) * rng.uniform(0.1, 5.0)
        jac = solver_jacobian(j, w, cfg).to_dense()
        fd = np.empty_like(jac)
        for i in range(mesh.dim):
            eps = 1e-6 * max(1.0, abs(w[i]))
            e = np.zeros(mesh.dim)
            e[i] = eps
            fd[:, i] = (solver_residual(j, w + e, hist, cfg) - solver_residual(j, w - e, hist, cfg)) / (2 * eps)
        worst = max(worst, float(np.linalg.norm(fd - jac) / np.linalg.norm(jac)))
    return worst <= 1e-5, f"max relative Frobenius error over {samples} samples {worst:.1e} (tol 1e-5)"


def check_linear_oracle() -> tuple[bool, str]:
    mesh = build_mesh(32)
    parts = []
    ok = True
    for alpha in (0.3, 0.5, 0.7):
        sol = spectral.build(mesh, alpha, Sine(1))
        errs = []
        for J in (16, 32, 64, 128):
            grid = graded_grid(J, 2.0)
            u = solve(SolverConfig(mesh, grid, alpha, zero(), Sine(1)))
            errs.append((J, norms.error_e2_e3(u, spectral.interval_averages(sol, grid))[1]))
        orders = norms.observed_order(errs)
        decreasing = all(b[1] < a[1] for a, b in zip(errs, errs[1:]))
        ok &= decreasing and min(orders) >= 0.4
        parts.append(f"alpha={alpha}: orders {_fmt(orders)}")
    return ok, "; ".join(parts) + " (need decreasing, >= 0.4)"


def _sweep(exp: harness.ExperimentConfig) -> list[harness.TableRow]:
    rows = harness.run_experiment(exp)
    bad = [r for r in rows if r.failed]
    if bad:
        raise RuntimeError(f"{len(bad)} rows failed: {bad[0].failed}")
    return rows


def check_experiment1() -> tuple[bool, str]:
    exp = harness.ExperimentConfig("1", (0.5,), (2.2,), (1024,), (8, 16, 32), 256, 1024)
    rows = _sweep(exp)
    o0, o2, o3 = (harness.sweep_orders(rows, 0.5, 2.2, k) for k in (0, 2, 3))
    ok = _in_band(o0, 1.96, 0.15) and _in_band(o3, 1.85, 0.20) and _in_band(o2, 0.86, 0.15)
    return ok, (
        f"E0 orders {_fmt(o0)} (1.96+-0.15), E3 {_fmt(o3)} (1.85+-0.20), "
        f"E2 {_fmt(o2)} (0.86+-0.15)"
    )


def check_experiment2() -> tuple[bool, str]:
    exp = harness.ExperimentConfig("2", (0.5,), (1.0,), (32, 64, 128), (128,), 128, 2048)
    rows = _sweep(exp)
    o1, o3 = (harness.sweep_orders(rows, 0.5, 1.0, k) for k in (1, 3))
    ok = _in_band(o3, 0.52, 0.15) and _in_band(o1, 0.28, 0.15)
    return ok, f"E3 orders {_fmt(o3)} (0.52+-0.15), E1 {_fmt(o1)} (0.28+-0.15)"


def check_experiment3() -> tuple[bool, str]:
    exp = harness.ExperimentConfig(
        "3", (0.5,), (1.0, 2.0), (64, 128, 256), (128,), 128, 2048, u0="power_product(0.51)"
    )
    rows = _sweep(exp)
    s2_e3 = harness.sweep_orders(rows, 0.5, 2.0, 3)
    s2_e1 = harness.sweep_orders(rows, 0.5, 2.0, 1)
    s1_e3 = harness.sweep_orders(rows, 0.5, 1.0, 3)
    ok = _in_band(s2_e3, 1.00, 0.15) and _in_band(s2_e1, 0.74, 0.15) and _in_band(s1_e3, 0.69, 0.15)
    return ok, (
        f"sigma=2: E3 orders {_fmt(s2_e3)} (1.00+-0.15), E1 {_fmt(s2_e1)} (0.74+-0.15); "
        f"sigma=1: E3 {_fmt(s1_e3)} (0.69+-0.15)"
    )


def check_stability_gate(samples: int = 200) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 9)
    mesh = build_mesh(4)
    misses = 0
    for _ in range(samples):
        alpha = float(rng.uniform(0.05, 0.95))
        L = float(rng.uniform(0.1, 50.0))
        J = int(rng.integers(2, 20))
        bound = stability_bound(alpha, L)
        above = GradedGrid(J, 1.0, T=bound * J * float(rng.uniform(1.0, 3.0)))
        below = GradedGrid(J, 1.0, T=bound * J * float(rng.uniform(0.1, 0.99)))
        try:
            SolverConfig(mesh, above, alpha, linear(L), Sine(1))
            misses += 1
        except StabilityError:
            pass
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                SolverConfig(mesh, below, alpha, linear(L), Sine(1))
            except StabilityError:
                misses += 1
    return misses == 0, f"{samples} random (alpha, L): {misses} misclassified configurations"


def _random_times(rng: np.random.Generator) -> np.ndarray:
    J = int(rng.integers(1, 25))
    if rng.random() < 0.5:
        return graded_grid(max(J, 2), float(rng.uniform(1.0, 3.0))).times
    inner = np.sort(rng.uniform(0.0, 1.0, size=J - 1))
    t = np.concatenate(([0.0], inner, [1.0]))
    return np.unique(t)


def check_frac_energy(samples: int = 1000) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 10)
    mesh = build_mesh(4)
    worst = math.inf
    zero_ok = True
    for _ in range(samples):
        ta, tb = _random_times(rng), _random_times(rng)
        u = PiecewiseConstant(mesh, ta, rng.normal(size=(len(ta) - 1, mesh.dim)))
        v = PiecewiseConstant(mesh, tb, rng.normal(size=(len(tb) - 1, mesh.dim)))
        alpha = float(rng.uniform(0.05, 0.95))
        tl = norms.merge(u, v)
        d = u.values[tl.index_a] - v.values[tl.index_b]
        q, scale = norms.frac_quadratic_form(tl.breakpoints, alpha, d, assemble_mass(mesh))
        worst = min(worst, q / scale)
        zero_ok &= norms.frac_energy(u, u, alpha) == 0.0 and q > 0
    ok = worst >= -1e-9 and zero_ok
    return ok, f"min Q/scale over {samples} samples {worst:.3e}; zero iff e = 0: {zero_ok}"


def check_determinism() -> tuple[bool, str]:
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        outs = [Path(tmp) / f"run{i}.csv" for i in range(2)]
        codes = [
            main(["run", "--experiment", "2", "--scale", "desk", "--deterministic", "--out", str(p)])
            for p in outs
        ]
        same = outs[0].read_bytes() == outs[1].read_bytes()
        nrows = len(outs[0].read_text().splitlines()) - 1
    return codes == [0, 0] and same, f"exit codes {codes}, {nrows} rows, identical: {same}"


# }}}


CRITERIA: list[tuple[int, str, Callable[[], tuple[bool, str]]]] = [
    (1, "weight telescoping", check_weights),
    (2, "Mittag-Leffler evaluation", check_mittag_leffler),
    (3, "discrete eigenpairs", check_eigen),
    (4, "Jacobian vs finite differences", check_jacobian),
    (5, "linear spectral oracle convergence", check_linear_oracle),
    (6, "experiment 1 spatial orders", check_experiment1),
    (7, "experiment 2 temporal orders", check_experiment2),
    (8, "experiment 3 temporal orders", check_experiment3),
    (9, "stability gate", check_stability_gate),
    (10, "fractional energy nonnegativity", check_frac_energy),
    (11, "CSV determinism", check_determinism),
]


def run_check(number: int) -> CheckResult:
    _, title, fn = next(c for c in CRITERIA if c[0] == number)
    start = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failed criterion, not an aborted suite
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(number, title, passed, detail, time.perf_counter() - start)


def run_all(numbers: Optional[list[int]] = None) -> list[CheckResult]:
    return [run_check(n) for n, _, _ in CRITERIA if numbers is None or n in numbers]
