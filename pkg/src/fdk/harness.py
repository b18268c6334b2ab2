"""Convergence tables for the three numerical experiments.

A sweep fixes ``(alpha, sigma)`` and refines either the mesh width (``h``
sweep) or the number of time steps (``J`` sweep). Every test solution is
compared against one reference solution per ``(alpha, u0)``; references are
cached on disk and reused across runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from filelock import FileLock

from .fracquad import eta_predictors, graded_grid
from .mesh_fem import build_mesh, parse_datum
from .norms import error_report, observed_order
from .solver import (
    SolverConfig,
    SpaceTimeSolution,
    StabilityError,
    StepFailure,
    nonlinearity_from_name,
    solve,
)
from .storage import CacheFormatError, load_solution, save_solution

logger = logging.getLogger(__name__)

COLUMNS = (
    "experiment", "alpha", "sigma", "J", "n_cells",
    "E0", "ord0", "E1", "ord1", "E2", "ord2", "E3", "ord3",
    "eta1", "eta2", "seconds",
)
#: Minimum refinement factor of the reference along the swept parameter.
REF_FACTOR = 4

#: A grading exponent, or the string ``"2-alpha"``.
SigmaSpec = Union[float, str]


def resolve_sigma(spec: SigmaSpec, alpha: float) -> float:
    if isinstance(spec, str):
        if spec.replace(" ", "") != "2-alpha":
            raise ValueError(f"unknown grading spec {spec!r}")
        return 2.0 - alpha
    return float(spec)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    alphas: tuple[float, ...]
    sigmas: tuple[SigmaSpec, ...]
    Js: tuple[int, ...]
    n_cells: tuple[int, ...]
    n_cells_ref: int
    J_ref: int
    sigma_ref: float = 2.2
    u0: str = "power_law(-0.49)"
    nonlinearity: str = "sqrt1p"
    quadrature_points: int = 3
    T: float = 1.0
    out: Optional[str] = None
    cache_dir: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("alphas", "sigmas", "Js", "n_cells"):
            if not getattr(self, name):
                raise ValueError(f"sweep list {name!r} is empty")
        if len(self.Js) > 1 and len(self.n_cells) > 1:
            raise ValueError("refine either J or n_cells, not both")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ValueError(f"fractional order must lie in (0, 1), got {a}")
        # the reference must be finer: by REF_FACTOR along the swept
        # parameter, and at least as fine along the fixed one
        for vals, ref, swept in (
            (self.n_cells, self.n_cells_ref, self.sweep == "h"),
            (self.Js, self.J_ref, self.sweep == "J"),
        ):
            need = REF_FACTOR * max(vals) if swept else max(vals)
            if ref < need:
                raise ValueError(f"reference resolution {ref} is below {need}")
        for n in self.n_cells:
            if self.n_cells_ref % n:
                raise ValueError(f"mesh {n} is not nested in the reference {self.n_cells_ref}")
        parse_datum(self.u0)
        nonlinearity_from_name(self.nonlinearity)

    @property
    def sweep(self) -> str:
        return "h" if len(self.n_cells) > 1 else "J"

    def points(self) -> list[tuple[int, int]]:
        """``(J, n_cells)`` pairs of one sweep, coarse to fine."""
        if self.sweep == "h":
            return [(self.Js[0], n) for n in sorted(self.n_cells)]
        return [(J, self.n_cells[0]) for J in sorted(self.Js)]


def _desk(experiment: int) -> ExperimentConfig:
    if experiment == 1:
        return ExperimentConfig(
            "1", (0.1, 0.5, 0.8), (2.2,), (1024,), (8, 16, 32), 256, 1024
        )
    if experiment == 2:
        return ExperimentConfig(
            "2", (0.2, 0.5, 0.8), (1.0,), (32, 64, 128), (128,), 128, 2048
        )
    if experiment == 3:
        return ExperimentConfig(
            "3", (0.2, 0.5, 0.8), (1.0, "2-alpha", 2.0), (64, 128, 256), (128,), 128, 2048,
            u0="power_product(0.51)",
        )
    raise ValueError(f"unknown experiment {experiment!r}")


def _paper(experiment: int) -> ExperimentConfig:
    if experiment == 1:
        return ExperimentConfig(
            "1", (0.1, 0.2, 1 / 3, 0.5, 0.8), (2.2,), (2**16,), (8, 16, 32, 64), 2048, 2**16
        )
    if experiment == 2:
        return ExperimentConfig(
            "2", (0.2, 0.5, 0.8), (1.0,), tuple(2**k for k in range(5, 13)), (2048,),
            2048, 2**16,
        )
    if experiment == 3:
        return ExperimentConfig(
            "3", (0.2, 0.5, 0.8), (1.0, "2-alpha", 2.0), tuple(2**k for k in range(8, 15)),
            (2048,), 2048, 2**16, u0="power_product(0.51)",
        )
    raise ValueError(f"unknown experiment {experiment!r}")


def preset(experiment: int, scale: str = "desk", **overrides) -> ExperimentConfig:
    """Default sweep of an experiment; ``scale="paper"`` takes hours."""
    if scale == "desk":
        cfg = _desk(experiment)
    elif scale == "paper":
        cfg = _paper(experiment)
    else:
        raise ValueError(f"scale must be 'desk' or 'paper', got {scale!r}")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg


# {{{ reference cache


def cache_key(
    alpha: float,
    sigma: float,
    J: int,
    n_cells: int,
    u0: str,
    nonlinearity: str,
    quadrature_points: int = 3,
    T: float = 1.0,
) -> str:
    """Hex digest identifying a solve; floats are keyed by their exact repr."""
    frag = {
        "alpha": repr(float(alpha)),
        "sigma": repr(float(sigma)),
        "T": repr(float(T)),
        "J": int(J),
        "n_cells": int(n_cells),
        "u0": u0,
        "nonlinearity": nonlinearity,
        "quadrature_points": int(quadrature_points),
        "format": "FDK1",
    }
    raw = json.dumps(frag, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


def default_cache_dir() -> Path:
    env = os.environ.get("FDK_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "fdk"


def _matches(sol: SpaceTimeSolution, cfg: SolverConfig) -> bool:
    return (
        sol.alpha == cfg.alpha
        and sol.sigma == cfg.grid.sigma
        and sol.J == cfg.grid.J
        and sol.mesh.n_cells == cfg.mesh.n_cells
        and sol.nonlinearity == cfg.nonlinearity.name
        and sol.u0_spec == cfg.u0_spec
        and sol.T == cfg.grid.T
    )


def cached_solve(cfg: SolverConfig, cache_dir: Optional[str | os.PathLike]) -> SpaceTimeSolution:
    """Solve, or load a previous solve of the same configuration from ``cache_dir``."""
    if cache_dir is None:
        return solve(cfg)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = cache_key(
        cfg.alpha, cfg.grid.sigma, cfg.grid.J, cfg.mesh.n_cells, cfg.u0_spec,
        cfg.nonlinearity.name, cfg.quadrature_points, cfg.grid.T,
    )
    path = cache_dir / f"{key}.fdk"
    with FileLock(str(cache_dir / f"{key}.lock")):
        if path.exists():
            try:
                sol = load_solution(path)
                if _matches(sol, cfg):
                    logger.info("reference %s loaded from cache", key[:12])
                    return sol
                logger.warning("cache entry %s has a mismatched header, recomputing", key[:12])
            except (CacheFormatError, OSError) as exc:
                logger.warning("cache entry %s unreadable (%s), recomputing", key[:12], exc)
        sol = solve(cfg)
        save_solution(sol, path)
        return sol


# }}}


@dataclass(frozen=True)
class TableRow:
    experiment: str
    alpha: float
    sigma: float
    J: int
    n_cells: int
    e0: Optional[float] = None
    e1: Optional[float] = None
    e2: Optional[float] = None
    e3: Optional[float] = None
    orders: tuple[Optional[float], ...] = (None, None, None, None)
    eta1: Optional[float] = None
    eta2: Optional[float] = None
    seconds: Optional[float] = None
    newton_max: int = 0
    newton_mean: float = 0.0
    failed: Optional[str] = None
    e1_flagged: bool = field(default=False, compare=False)

    @property
    def errors(self) -> tuple[Optional[float], ...]:
        return (self.e0, self.e1, self.e2, self.e3)


def _solver_config(exp: ExperimentConfig, alpha: float, sigma: float, J: int, n: int) -> SolverConfig:
    return SolverConfig(
        mesh=build_mesh(n),
        grid=graded_grid(J, sigma, exp.T),
        alpha=alpha,
        nonlinearity=nonlinearity_from_name(exp.nonlinearity),
        u0=parse_datum(exp.u0),
        quadrature_points=exp.quadrature_points,
    )


def _run_row(
    exp: ExperimentConfig, alpha: float, sigma: float, J: int, n: int, ref: SpaceTimeSolution
) -> TableRow:
    eta1, eta2 = eta_predictors(alpha, sigma, J)
    base = dict(experiment=exp.experiment, alpha=alpha, sigma=sigma, J=J, n_cells=n,
                eta1=eta1, eta2=eta2)
    start = time.perf_counter()
    try:
        sol = solve(_solver_config(exp, alpha, sigma, J, n))
        rep = error_report(sol, ref, alpha)
    except (StabilityError, StepFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("row alpha=%g sigma=%g J=%d n=%d failed: %s", alpha, sigma, J, n, exc)
        return TableRow(**base, failed=f"{type(exc).__name__}: {exc}")
    return TableRow(
        **base,
        e0=rep.e0, e1=rep.e1, e2=rep.e2, e3=rep.e3,
        seconds=time.perf_counter() - start,
        newton_max=max(sol.newton_iters, default=0),
        newton_mean=float(np.mean(sol.newton_iters)) if sol.newton_iters else 0.0,
        e1_flagged=rep.e1_flagged,
    )


def _with_orders(rows: list[TableRow], sweep: str) -> list[TableRow]:
    out = []
    prev = None
    for row in rows:
        if row.failed is not None:
            out.append(row)
            prev = None
            continue
        orders: tuple[Optional[float], ...] = (None,) * 4
        if prev is not None:
            p0, p1 = (1 / prev.n_cells, 1 / row.n_cells) if sweep == "h" else (prev.J, row.J)
            orders = tuple(
                observed_order([(p0, a), (p1, b)])[0] if a > 0 and b > 0 else None
                for a, b in zip(prev.errors, row.errors)
            )
        row = replace(row, orders=orders)
        out.append(row)
        prev = row
    return out


def run_experiment(
    exp: ExperimentConfig, jobs: int = 1, deterministic: bool = False
) -> list[TableRow]:
    """Run every sweep of ``exp``; writes the CSV table when ``exp.out`` is set."""
    cache = exp.cache_dir if exp.cache_dir is not None else default_cache_dir()
    refs: dict[float, SpaceTimeSolution] = {}
    for alpha in exp.alphas:
        cfg = _solver_config(exp, alpha, exp.sigma_ref, exp.J_ref, exp.n_cells_ref)
        refs[alpha] = cached_solve(cfg, cache)

    tasks = [
        (alpha, resolve_sigma(s, alpha), J, n)
        for alpha in exp.alphas
        for s in exp.sigmas
        for J, n in exp.points()
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_run_row, exp, a, s, J, n, refs[a]) for a, s, J, n in tasks]
            flat = [f.result() for f in futs]
    else:
        flat = [_run_row(exp, a, s, J, n, refs[a]) for a, s, J, n in tasks]

    per_sweep = len(exp.points())
    rows: list[TableRow] = []
    for i in range(0, len(flat), per_sweep):
        rows += _with_orders(flat[i : i + per_sweep], exp.sweep)
    if exp.out is not None:
        write_csv(rows, exp.out, deterministic=deterministic)
    return rows


# {{{ CSV


def _fmt(x: Optional[float], spec: str) -> str:
    return "" if x is None else format(x, spec)


def row_fields(row: TableRow, deterministic: bool = False) -> list[str]:
    head = [row.experiment, repr(row.alpha), repr(row.sigma), str(row.J), str(row.n_cells)]
    eta = [_fmt(row.eta1, ".6e"), _fmt(row.eta2, ".6e")]
    secs = "" if deterministic or row.seconds is None else f"{row.seconds:.3f}"
    if row.failed is not None:
        return head + [f"FAILED ({row.failed})"] + [""] * 7 + eta + [secs]
    body = []
    for e, o in zip(row.errors, row.orders):
        body += [_fmt(e, ".10e"), _fmt(o, ".4f")]
    return head + body + eta + [secs]


def format_csv(rows: Sequence[TableRow], deterministic: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow(row_fields(row, deterministic))
    return buf.getvalue()


def write_csv(rows: Sequence[TableRow], path: str | os.PathLike, deterministic: bool = False) -> Path:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(rows, deterministic), encoding="utf-8")
    return path


# }}}


def sweep_orders(rows: Sequence[TableRow], alpha: float, sigma: float, which: int) -> list[float]:
    """Observed orders of ``E_which`` in the sweep ``(alpha, sigma)``, NaN where undefined."""
    sel = [r for r in rows if r.alpha == alpha and math.isclose(r.sigma, sigma, abs_tol=1e-12)]
    return [
        math.nan if r.orders[which] is None else float(r.orders[which]) for r in sel[1:]
    ]
