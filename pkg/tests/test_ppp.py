import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from multirat.config import BoundaryMode, ConfigError, TierSpec, Window
from multirat.ppp import (WindowTooLargeError, choose_window_radius, distance, interference_tail,
                          sample_deployment)


def fig1_tiers():
    lam1 = 1e-6
    return (TierSpec(1, lam1, 40.0), TierSpec(2, 10 * lam1, 1.0), TierSpec(3, 50 * lam1, 0.5),
            TierSpec(4, 100 * lam1, 0.2, rat="U"))


def test_empty_process_is_a_valid_deployment():
    tiers = (TierSpec(1, 0.0, 1.0), TierSpec(2, 0.0, 1.0, rat="U"))
    dep = sample_deployment(tiers, {"L": 0.0}, Window(100.0), seed=3)
    assert dep.n_aps == 0
    assert dep.tier_counts == (0, 0)
    assert dep.users["L"].shape == (0, 2)


def test_tier_counts_match_poisson_mean_on_large_window():
    tiers = fig1_tiers()
    win = Window(5000.0)
    expected = np.array([t.intensity * win.area for t in tiers])
    np.testing.assert_allclose(expected, [78.54, 785.4, 3927.0, 7854.0], rtol=1e-3)
    counts = np.array([sample_deployment(tiers, {}, win, s).tier_counts for s in range(1000)])
    se = np.sqrt(expected / len(counts))
    assert np.all(np.abs(counts.mean(axis=0) - expected) <= 3 * se)


@pytest.mark.property("Poisson dispersion and uniformity")
def test_poisson_dispersion():
    tiers = fig1_tiers()
    win = Window(2000.0)
    counts = np.array([sample_deployment(tiers, {}, win, s).tier_counts for s in range(2000)], float)
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1)
    expected = np.array([t.intensity * win.area for t in tiers])
    assert np.all(np.abs(mean - expected) <= 3 * np.sqrt(expected / len(counts)))
    assert np.all(np.abs(var / mean - 1.0) <= 0.10)


@pytest.mark.property("Poisson dispersion and uniformity")
@pytest.mark.parametrize("boundary", ["truncation", "torus"])
def test_positions_uniform_over_quadrants(boundary):
    tiers = (TierSpec(1, 1e-3, 1.0), TierSpec(2, 1e-3, 1.0, rat="U"))
    dep = sample_deployment(tiers, {"L": 2e-3}, Window(300.0, boundary), seed=11)
    for x, y in [(dep.x, dep.y), tuple(dep.users["L"].T)]:
        q = np.bincount((x > 0).astype(int) * 2 + (y > 0).astype(int), minlength=4)
        assert stats.chisquare(q).pvalue > 0.01


@pytest.mark.property("Poisson dispersion and uniformity")
def test_radial_law_on_disk():
    tiers = (TierSpec(1, 2e-3, 1.0, rat="U"),)
    dep = sample_deployment(tiers, {}, Window(200.0), seed=5)
    r2 = (dep.x ** 2 + dep.y ** 2) / 200.0 ** 2
    assert np.all(r2 <= 1.0)
    assert stats.kstest(r2, "uniform").pvalue > 0.01


def test_band_marks_are_independent():
    tiers = (TierSpec(1, 1e-3, 1.0, rat="U"),)
    dep = sample_deployment(tiers, {}, Window(1800.0), seed=2)
    assert dep.n_aps > 10_000
    assert abs(np.corrcoef(dep.fading_l, dep.fading_u)[0, 1]) < 0.05
    assert abs(np.corrcoef(dep.shadow_l_inv, dep.shadow_u_inv)[0, 1]) < 0.05
    assert abs(np.corrcoef(np.log(dep.shadow_l_inv), np.log(dep.shadow_u_inv))[0, 1]) < 0.05


def test_mark_laws():
    tiers = (TierSpec(1, 1e-3, 1.0, rat="U"),)
    dep = sample_deployment(tiers, {}, Window(1000.0), seed=8, shadowing_db=math.sqrt(3.0))
    assert stats.kstest(dep.fading_l, "expon").pvalue > 0.01
    s_ln = math.sqrt(3.0) * math.log(10) / 10
    assert stats.kstest(np.log(dep.shadow_u_inv) / s_ln, "norm").pvalue > 0.01
    flat = sample_deployment(tiers, {}, Window(300.0), seed=8, shadowing_db=0.0)
    assert np.all(flat.shadow_l_inv == 1.0) and np.all(flat.shadow_u_inv == 1.0)


def _as_bytes(dep):
    parts = [dep.x, dep.y, dep.tier, dep.fading_l, dep.fading_u, dep.shadow_l_inv, dep.shadow_u_inv]
    parts += [dep.users[k] for k in sorted(dep.users)]
    return b"".join(np.ascontiguousarray(p).tobytes() for p in parts)


def test_same_seed_same_deployment_bytes():
    tiers = fig1_tiers()
    a = sample_deployment(tiers, {"L": 1e-4, "U": 1e-4}, Window(1500.0), seed=42)
    b = sample_deployment(tiers, {"L": 1e-4, "U": 1e-4}, Window(1500.0), seed=42)
    c = sample_deployment(tiers, {"L": 1e-4, "U": 1e-4}, Window(1500.0), seed=43)
    assert _as_bytes(a) == _as_bytes(b)
    assert _as_bytes(a) != _as_bytes(c)


def test_user_intensity_change_keeps_access_points():
    tiers = fig1_tiers()
    a = sample_deployment(tiers, {"L": 1e-5}, Window(1500.0), seed=9)
    b = sample_deployment(tiers, {"L": 5e-4}, Window(1500.0), seed=9)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.shadow_l_inv, b.shadow_l_inv)


def test_deployment_arrays_are_read_only():
    dep = sample_deployment(fig1_tiers(), {"L": 1e-5}, Window(500.0), seed=1)
    with pytest.raises(ValueError):
        dep.x[0] = 1.0


def test_point_view():
    dep = sample_deployment(fig1_tiers(), {}, Window(1000.0), seed=1)
    p = dep.point(0)
    assert p.position == (dep.x[0], dep.y[0])
    assert p.void is None and p.access is None


@pytest.mark.parametrize("radius", [0.0, -5.0, math.inf])
def test_bad_window_radius(radius):
    with pytest.raises(ConfigError):
        Window(radius)


def test_window_too_large():
    with pytest.raises(WindowTooLargeError, match="window too large"):
        sample_deployment(fig1_tiers(), {}, Window(1e5), seed=1, max_points=1e5)


def test_distance_examples():
    w = Window(10.0)
    assert distance((1.0, 2.0), (1.0, 2.0), w) == 0.0
    assert distance((0.0, 0.0), (3.0, 4.0), w) == 5.0
    torus = Window(5.0, BoundaryMode.TORUS)
    assert distance((-4.5, 0.0), (4.5, 0.0), torus) == pytest.approx(1.0)
    assert distance((-4.5, 0.0), (4.5, 0.0), Window(5.0)) == pytest.approx(9.0)


coord = st.floats(-5.0, 5.0, allow_nan=False)


@given(coord, coord, coord, coord)
def test_torus_distance_properties(ax, ay, bx, by):
    torus = Window(5.0, BoundaryMode.TORUS)
    d = distance((ax, ay), (bx, by), torus)
    assert d == pytest.approx(distance((bx, by), (ax, ay), torus), abs=1e-12)
    assert d <= distance((ax, ay), (bx, by), Window(5.0)) + 1e-12
    assert d <= math.sqrt(2) * 5.0 + 1e-12


def test_window_radius_closed_form_example():
    tiers = (TierSpec(1, 1.0, 1.0, rat="U"),)
    assert interference_tail(tiers, 4.0, 100.0) == pytest.approx(math.pi * 1e-4)
    eps = 1e-3
    R = choose_window_radius(tiers, 4.0, eps)
    annulus = interference_tail(tiers, 4.0, 1.0) - interference_tail(tiers, 4.0, R)
    assert interference_tail(tiers, 4.0, R) == pytest.approx(eps * annulus, rel=1e-9)
    # any smaller radius violates the bound
    R2 = 0.999 * R
    annulus2 = interference_tail(tiers, 4.0, 1.0) - interference_tail(tiers, 4.0, R2)
    assert interference_tail(tiers, 4.0, R2) > eps * annulus2


def test_window_radius_scaling_with_tolerance():
    tiers = (TierSpec(1, 1.0, 1.0, rat="U"),)
    eps = 1e-6
    r1 = choose_window_radius(tiers, 4.0, eps)
    r2 = choose_window_radius(tiers, 4.0, eps / 2)
    assert r2 / r1 == pytest.approx(math.sqrt(2.0), rel=1e-6)


def test_window_radius_shrinks_with_alpha():
    tiers = (TierSpec(1, 1.0, 1.0, rat="U"),)
    radii = [choose_window_radius(tiers, a, 1e-3) for a in (2.5, 3.0, 3.5, 4.0, 5.0, 6.0)]
    assert all(b < a for a, b in zip(radii, radii[1:]))


def test_window_radius_errors():
    tiers = (TierSpec(1, 1.0, 1.0, rat="U"),)
    with pytest.raises(ConfigError):
        choose_window_radius(tiers, 2.0, 1e-3)
    with pytest.raises(ConfigError):
        choose_window_radius(tiers, 4.0, 0.0)
    with pytest.raises(ConfigError, match="not achievable"):
        choose_window_radius(tiers, 2.0001, 1e-300)
