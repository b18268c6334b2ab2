from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdk import spectral
from fdk.fracquad import graded_grid
from fdk.mesh_fem import PowerLaw, Sine, assemble_mass, build_mesh, discrete_eigenpairs
from fdk.mittag_leffler import mittag_leffler
from fdk.norms import p_tau_project
from fdk.timeavg import QuadratureError, interval_averages


def test_averages_of_power_function():
    # t^g averages: (b^(g+1) - a^(g+1)) / ((g+1)(b-a)), singular derivative at 0
    times = graded_grid(10, 1.0).times
    for g in (0.1, 0.5, 0.9):
        avg = interval_averages(lambda t: (t**g)[:, None], times)[:, 0]
        a, b = times[:-1], times[1:]
        np.testing.assert_allclose(avg, (b ** (g + 1) - a ** (g + 1)) / ((g + 1) * (b - a)), rtol=1e-9, atol=1e-10)


def test_averages_vector_valued_and_shape():
    times = np.array([0.0, 0.3, 1.0])
    out = interval_averages(lambda t: np.stack([np.ones_like(t), t, t * t], axis=1), times)
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[1], [1.0, 0.65, (1 - 0.027) / (3 * 0.7)], rtol=1e-13)


def test_unbounded_integrand_fails_loudly():
    with pytest.raises(QuadratureError) as info:
        interval_averages(lambda t: (t**-0.3)[:, None], np.array([0.0, 0.5, 1.0]))
    assert info.value.interval == 1


def test_quadrature_failure_reports_interval():
    times = np.array([0.0, 0.5, 1.0])

    def bad(t):
        return np.where(t > 0.6, np.nan, 1.0)[:, None]

    with pytest.raises(QuadratureError) as info:
        interval_averages(bad, times)
    assert info.value.interval == 2


def test_spectral_solution_at_zero_and_modes():
    mesh = build_mesh(16)
    sol = spectral.build(mesh, 0.5, Sine(2))
    assert spectral.evaluate(sol, 0.0) is not None
    np.testing.assert_allclose(spectral.evaluate(sol, 0.0).coeffs, sol.u0h.coeffs)
    # sin(2 pi x) projects onto the second discrete mode only
    assert np.count_nonzero(np.abs(sol.coeffs) > 1e-12) == 1
    lam = sol.eigenvalues[1]
    t = 0.37
    expect = mittag_leffler(0.5, 1.0, -lam * t**0.5) * sol.u0h.coeffs
    np.testing.assert_allclose(spectral.evaluate(sol, t).coeffs, expect, rtol=1e-12, atol=1e-15)


def test_spectral_half_order_against_erfc():
    # E_{1/2,1}(-z) = exp(z^2) erfc(z): independent closed form
    mesh = build_mesh(8)
    sol = spectral.build(mesh, 0.5, Sine(1))
    t = 0.2
    z = sol.eigenvalues[0] * math.sqrt(t)
    factor = float(mp.exp(mp.mpf(z) ** 2) * mp.erfc(z))
    np.testing.assert_allclose(spectral.evaluate(sol, t).coeffs, factor * sol.u0h.coeffs, rtol=1e-12)


def test_spectral_interval_averages_closed_form():
    # int_a^b E_a(-lam t^a) dt = b E_{a,2}(-lam b^a) - a E_{a,2}(-lam a^a)
    mesh = build_mesh(8)
    alpha = 0.4
    sol = spectral.build(mesh, alpha, PowerLaw(-0.49))
    grid = graded_grid(12, 2.0)
    avg = spectral.interval_averages(sol, grid).values
    t = grid.times

    def prim(tt):
        e2 = np.array([mittag_leffler(alpha, 2.0, -lam * tt**alpha) for lam in sol.eigenvalues])
        return tt * e2

    expect = np.array([
        ((prim(b) - prim(a)) * sol.coeffs) @ sol.eigenvectors / (b - a)
        for a, b in zip(t[:-1], t[1:])
    ])
    np.testing.assert_allclose(avg, expect, atol=1e-9)


def test_spectral_coeffs_reconstruct_projection():
    mesh = build_mesh(12)
    sol = spectral.build(mesh, 0.7, PowerLaw(-0.49))
    lam, V = discrete_eigenpairs(mesh)
    np.testing.assert_allclose(sol.coeffs @ V, sol.u0h.coeffs, atol=1e-12)
    M = assemble_mass(mesh)
    np.testing.assert_allclose(sol.coeffs, V @ M.matvec(sol.u0h.coeffs))


def test_spectral_rejects_bad_input():
    mesh = build_mesh(4)
    with pytest.raises(ValueError):
        spectral.build(mesh, 1.0, Sine(1))
    sol = spectral.build(mesh, 0.5, Sine(1))
    with pytest.raises(ValueError):
        spectral.evaluate_many(sol, np.array([1.5]))


def test_p_tau_project_examples():
    mesh = build_mesh(4)
    w = np.array([1.0, -2.0, 0.5])
    grid = graded_grid(6, 2.0)
    const = p_tau_project(lambda t: np.tile(w, (len(t), 1)), grid, mesh)
    np.testing.assert_allclose(const.values, np.tile(w, (6, 1)), rtol=1e-14)
    lin = p_tau_project(lambda t: np.outer(t, w), grid, mesh)
    mids = 0.5 * (grid.times[:-1] + grid.times[1:])
    np.testing.assert_allclose(lin.values, np.outer(mids, w), rtol=1e-13, atol=1e-15)


def test_p_tau_shared_with_spectral():
    mesh = build_mesh(8)
    sol = spectral.build(mesh, 0.5, Sine(1))
    grid = graded_grid(8, 2.0)
    a = spectral.interval_averages(sol, grid).values
    b = p_tau_project(lambda t: spectral.evaluate_many(sol, t), grid, mesh).values
    np.testing.assert_array_equal(a, b)


@given(J=st.integers(2, 12), sigma=st.floats(1.0, 3.0))
@settings(max_examples=15, deadline=None)
def test_averages_preserve_total_integral(J, sigma):
    # sum_j tau_j avg_j = int_0^T v
    times = graded_grid(J, sigma).times
    avg = interval_averages(lambda t: np.sqrt(t)[:, None], times)[:, 0]
    assert float(np.diff(times) @ avg) == pytest.approx(2 / 3, abs=1e-9)
