from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from fdk.fracquad import graded_grid
from fdk.mesh_fem import FeFunction, assemble_mass, build_mesh, fe_norms
from fdk.norms import (
    error_e0,
    error_e2_e3,
    error_report,
    frac_energy,
    frac_quadratic_form,
    merge,
    observed_order,
)
from fdk.solver import PiecewiseConstant


def _pc(mesh, times, values):
    return PiecewiseConstant(mesh, np.asarray(times, float), np.asarray(values, float))


def _random_pc(rng, mesh, J=None):
    J = J or int(rng.integers(1, 15))
    t = np.unique(np.concatenate(([0.0, 1.0], rng.uniform(0, 1, size=J - 1))))
    return _pc(mesh, t, rng.normal(size=(len(t) - 1, mesh.dim)))


def _reslice(u: PiecewiseConstant, extra) -> PiecewiseConstant:
    """Same function of time with additional breakpoints."""
    t = np.unique(np.concatenate((u.times, extra)))
    idx = np.searchsorted(u.times, 0.5 * (t[:-1] + t[1:]), side="right") - 1
    return _pc(u.mesh, t, u.values[idx])


# {{{ merge


def test_merge_identical_grids():
    g = graded_grid(8, 2.2)
    tl = merge(g, g)
    np.testing.assert_array_equal(tl.breakpoints, g.times)
    np.testing.assert_array_equal(tl.index_a, np.arange(8))


def test_merge_small_examples():
    tl = merge(graded_grid(2, 1.0), graded_grid(2, 2.0))
    np.testing.assert_allclose(tl.breakpoints, [0, 0.25, 0.5, 1.0])
    np.testing.assert_array_equal(tl.index_a, [0, 0, 1])
    np.testing.assert_array_equal(tl.index_b, [0, 1, 1])
    # {0.25, 0.5, 0.75} and {1/16, 1/4, 9/16} share 0.25
    tl = merge(graded_grid(4, 1.0), graded_grid(4, 2.0))
    np.testing.assert_allclose(tl.breakpoints[1:-1], [1 / 16, 0.25, 0.5, 9 / 16, 0.75])


def test_merge_dedups_within_tolerance_and_rejects_mismatch():
    a = np.array([0.0, 0.5, 1.0])
    b = np.array([0.0, 0.5 + 1e-16, 1.0])
    assert len(merge(a, b).breakpoints) == 3
    with pytest.raises(ValueError):
        merge(a, np.array([0.0, 0.5, 2.0]))


@given(Ja=st.integers(2, 60), Jb=st.integers(2, 60), sa=st.floats(1, 3), sb=st.floats(1, 3))
@settings(max_examples=60, deadline=None)
def test_merge_invariants(Ja, Jb, sa, sb):
    ga, gb = graded_grid(Ja, sa), graded_grid(Jb, sb)
    tl = merge(ga, gb)
    bp = tl.breakpoints
    assert bp[0] == 0.0 and bp[-1] == 1.0 and np.all(np.diff(bp) > 0)
    for g, idx in ((ga, tl.index_a), (gb, tl.index_b)):
        # every source breakpoint present, maps monotone and onto
        assert np.all(np.min(np.abs(bp[:, None] - g.times[None, :]), axis=0) <= 1e-14)
        assert np.all(np.diff(idx) >= 0)
        np.testing.assert_array_equal(np.unique(idx), np.arange(g.J))
        # each merged interval lies inside its source interval
        assert np.all(g.times[idx] <= bp[:-1] + 1e-14) and np.all(bp[1:] <= g.times[idx + 1] + 1e-14)


# }}}


def test_e0_examples():
    m2 = build_mesh(2)
    hat = _pc(m2, [0, 1], [[1.0]])
    zero = _pc(m2, [0, 1], [[0.0]])
    assert error_e0(hat, zero, norm="h1") == pytest.approx(2.0, rel=1e-15)
    assert error_e0(hat, zero) == pytest.approx(math.sqrt(1 / 3), rel=1e-15)
    assert error_e0(hat, hat) == 0.0
    with pytest.raises(ValueError):
        error_e0(hat, zero, norm="max")
    with pytest.raises(ValueError):
        error_e0(_pc(build_mesh(3), [0, 1], [[0.0, 0.0]]), _pc(build_mesh(4), [0, 1], [[0.0] * 3]))


def test_e0_uses_final_slab_only():
    m = build_mesh(4)
    u = _pc(m, [0, 0.5, 1], [[9.0, 9.0, 9.0], [1.0, 0.0, 0.0]])
    v = _pc(m, [0, 0.2, 1], [[-5.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    M = assemble_mass(m)
    assert error_e0(u, v) == pytest.approx(math.sqrt(M.quad_form(np.array([1.0, 0, 0]))))


def test_e2_e3_constant_in_time():
    m = build_mesh(4)
    v = np.array([1.0, -0.5, 2.0])
    T = 2.0
    u = _pc(m, [0, T], [v])
    z = _pc(m, [0, 0.3, T], [np.zeros(3), np.zeros(3)])
    e2, e3 = error_e2_e3(u, z)
    l2, h1 = fe_norms(FeFunction(m, v))
    assert e2 == pytest.approx(math.sqrt(T) * h1, rel=1e-14)
    assert e3 == pytest.approx(math.sqrt(T) * l2, rel=1e-14)


def test_e2_e3_mixed_meshes_prolongs():
    coarse, fine = build_mesh(2), build_mesh(4)
    u = _pc(coarse, [0, 1], [[1.0]])
    v = _pc(fine, [0, 1], [[0.5, 1.0, 0.5]])
    assert error_e2_e3(u, v) == pytest.approx((0.0, 0.0), abs=1e-15)


def test_frac_energy_single_interval():
    m = build_mesh(4)
    v = np.array([1.0, 2.0, -1.0])
    T, alpha = 1.5, 0.3
    u = _pc(m, [0, T], [v])
    z = _pc(m, [0, T], [np.zeros(3)])
    Q = T ** (1 - alpha) / math.gamma(2 - alpha) * assemble_mass(m).quad_form(v)
    assert frac_energy(u, z, alpha) == pytest.approx(math.sqrt(Q), rel=1e-14)


def _caputo_pair_quadrature(times, e, alpha):
    """int_0^T (D^alpha e) e dt for scalar piecewise constant e, by adaptive quadrature."""
    g = math.gamma(1 - alpha)

    def d_alpha(t):
        k = np.arange(len(e))
        left = np.where(t > times[k], np.abs(t - times[k]) ** -alpha, 0.0)
        right = np.where(t > times[k + 1], np.abs(t - times[k + 1]) ** -alpha, 0.0)
        return float(e @ (left - right)) / g

    total = 0.0
    for j in range(len(e)):
        a, b = times[j], times[j + 1]
        # the only singularity inside (a, b] is (t - a)^-alpha at the left end
        total += e[j] * scipy.integrate.quad(d_alpha, a, b, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
    return total


@pytest.mark.parametrize("seed", range(5))
def test_frac_quadratic_form_against_quadrature(seed):
    rng = np.random.default_rng(seed)
    times = np.array([0.0, rng.uniform(0.1, 0.9), 1.0])
    e = rng.normal(size=2)
    q, _ = frac_quadratic_form(times, 0.5, e)
    assert q == pytest.approx(_caputo_pair_quadrature(times, e, 0.5), rel=1e-5)


def test_frac_quadratic_form_blocks_agree():
    rng = np.random.default_rng(7)
    times = graded_grid(300, 2.0).times
    e = rng.normal(size=(300, 4))
    q1, s1 = frac_quadratic_form(times, 0.4, e, block=7)
    q2, s2 = frac_quadratic_form(times, 0.4, e, block=1000)
    assert q1 == pytest.approx(q2, rel=1e-12) and s1 == pytest.approx(s2, rel=1e-12)


@given(seed=st.integers(0, 10**6), alpha=st.floats(0.05, 0.95))
@settings(max_examples=100, deadline=None)
def test_frac_energy_nonnegative_and_definite(seed, alpha):
    rng = np.random.default_rng(seed)
    m = build_mesh(4)
    u, v = _random_pc(rng, m), _random_pc(rng, m)
    tl = merge(u, v)
    d = u.values[tl.index_a] - v.values[tl.index_b]
    q, scale = frac_quadratic_form(tl.breakpoints, alpha, d, assemble_mass(m))
    assert q >= -1e-9 * scale
    assert q > 0
    assert frac_energy(u, u, alpha) == 0.0


@given(seed=st.integers(0, 10**6), alpha=st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_errors_symmetric(seed, alpha):
    rng = np.random.default_rng(seed)
    coarse, fine = build_mesh(4), build_mesh(8)
    u, v = _random_pc(rng, coarse), _random_pc(rng, fine)
    a, b = error_report(u, v, alpha), error_report(v, u, alpha)
    for x, y in zip((a.e0, a.e1, a.e2, a.e3), (b.e0, b.e1, b.e2, b.e3)):
        assert x == pytest.approx(y, rel=1e-13, abs=1e-15)


@given(seed=st.integers(0, 10**6), alpha=st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_errors_invariant_under_reslicing(seed, alpha):
    rng = np.random.default_rng(seed)
    m = build_mesh(4)
    u, v = _random_pc(rng, m), _random_pc(rng, m)
    u2 = _reslice(u, rng.uniform(0, 1, size=5))
    v2 = _reslice(v, rng.uniform(0, 1, size=3))
    a, b = error_report(u, v, alpha), error_report(u2, v2, alpha)
    for x, y in zip((a.e1, a.e2, a.e3), (b.e1, b.e2, b.e3)):
        assert x == pytest.approx(y, rel=1e-12, abs=1e-14)


@given(seed=st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    m = build_mesh(4)
    u, v, w = (_random_pc(rng, m) for _ in range(3))
    uv, vw, uw = error_e2_e3(u, v), error_e2_e3(v, w), error_e2_e3(u, w)
    for k in range(2):
        assert uw[k] <= uv[k] + vw[k] + 1e-12


def test_report_metadata_and_flag():
    m = build_mesh(4)
    u = _pc(m, [0, 0.5, 1], np.ones((2, 3)))
    v = _pc(build_mesh(8), [0, 1], np.zeros((1, 7)))
    r = error_report(u, v, 0.5)
    assert r.meta == {"J": 2, "n_cells": 4, "ref_J": 1, "ref_n_cells": 8}
    assert not r.e1_flagged and min(r.e0, r.e1, r.e2, r.e3) > 0


def test_observed_order_examples():
    assert observed_order([(1.0, 1e-2), (0.5, 2.5e-3)]) == [pytest.approx(2.0)]
    assert observed_order([(0.125, 3.78e-3), (0.0625, 9.86e-4)])[0] == pytest.approx(1.94, abs=5e-3)
    assert observed_order([(32, 1e-2), (64, 1e-2)]) == [0.0]
    assert observed_order([(32, 1.42e-1), (64, 1.18e-1)])[0] == pytest.approx(0.27, abs=5e-3)
    for bad in ([(1, 0.0), (2, 1.0)], [(1, 1.0)], [(1, 1.0), (1, 0.5)], [(1, -1.0), (2, 1.0)]):
        with pytest.raises(ValueError):
            observed_order(bad)
