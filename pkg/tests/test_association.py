import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from multirat.association import (AssociationError, analytic_void_probability, assoc_stats, associate,
                                  binomial_estimate, empirical_tier_frequencies,
                                  empirical_void_probability, guard_distances, weighted_distance_cdf)
from multirat.config import AssociationPolicy, ChannelParams, TierSpec, Window
from multirat.ppp import sample_deployment

from helpers import make_deployment

MMPA = AssociationPolicy("mmpa", "noncrossing")
MMPA_X = AssociationPolicy("mmpa", "crossing")


def test_singleton():
    dep = make_deployment([3.0], [4.0], [1], 1, users={"L": [[0.0, 0.0]]})
    tiers = (TierSpec(1, 1e-5, 1.0, rat="U"),)
    m = associate(dep, tiers, AssociationPolicy("mmpa", "crossing"), 4.0)
    assert m.serving["*"].tolist() == [0]
    assert m.counts.tolist() == [1] and not m.void[0]
    assert m.distance["*"][0] == pytest.approx(5.0)


def test_bna_equal_weights_is_nearest_eligible():
    tiers = (TierSpec(1, 1e-5, 1.0), TierSpec(2, 1e-5, 1.0), TierSpec(3, 1e-5, 1.0, rat="U"))
    g = np.random.default_rng(0)
    x, y = g.uniform(-500, 500, (2, 60))
    tier = np.repeat([1, 2, 3], 20)
    users = g.uniform(-400, 400, (200, 2))
    dep = make_deployment(x, y, tier, 3, users={"L": users, "U": users}, shadow_l=g.lognormal(0, 1, 60))
    pol = AssociationPolicy("bna", "noncrossing", bias=(1.0, 1.0, 1.0))
    m = associate(dep, tiers, pol, 4.0)
    d = np.hypot(dep.x[None, :] - users[:, :1], dep.y[None, :] - users[:, 1:])
    lic = dep.tier < 3
    np.testing.assert_array_equal(m.serving["L"], np.where(lic, d, np.inf).argmin(axis=1))
    np.testing.assert_array_equal(m.serving["U"], np.where(~lic, d, np.inf).argmin(axis=1))
    assert np.all(m.serving_tier["L"] < 3) and np.all(m.serving_tier["U"] == 3)


def test_mmpa_picks_stronger_shadowing_at_equal_distance():
    tiers = (TierSpec(1, 1e-5, 1.0), TierSpec(2, 1e-5, 1.0, rat="U"))
    dep = make_deployment([-1.0, 1.0], [0.0, 0.0], [1, 1], 2, users={"L": [[0.0, 0.0]]},
                          shadow_l=[1.0, 2.0])
    m = associate(dep, tiers, MMPA, 4.0)
    assert m.serving["L"][0] == 1


def test_void_flag_iff_no_users():
    tiers = (TierSpec(1, 1e-4, 1.0), TierSpec(2, 1e-4, 1.0, rat="U"))
    dep = sample_deployment(tiers, {"L": 2e-5, "U": 2e-5}, Window(800.0), seed=4)
    m = associate(dep, tiers, MMPA, 4.0)
    assert np.array_equal(m.void, m.counts == 0)
    assert m.counts.sum() == sum(len(u) for u in dep.users.values())


def test_empty_eligible_tier_is_an_error():
    tiers = (TierSpec(1, 1e-5, 1.0), TierSpec(2, 1e-5, 1.0, rat="U"))
    dep = make_deployment([0.0], [0.0], [2], 2, users={"L": [[1.0, 1.0]]})
    with pytest.raises(AssociationError):
        associate(dep, tiers, MMPA, 4.0)
    # the same layout is fine in crossing mode
    assert associate(dep, tiers, MMPA_X, 4.0).serving["*"].tolist() == [0]


@pytest.mark.property("MMPA scale invariance")
@given(st.floats(1e-3, 1e3), st.integers(0, 10_000))
def test_mmpa_scale_invariance(c, seed):
    tiers = (TierSpec(1, 1e-5, 40.0), TierSpec(2, 5e-5, 0.5), TierSpec(3, 1e-4, 0.2, rat="U"))
    scaled = tuple(replace(t, power=t.power * c) for t in tiers)
    dep = sample_deployment(tiers, {"L": 5e-5, "U": 5e-5}, Window(600.0), seed)
    for pol in (MMPA, MMPA_X):
        a = associate(dep, tiers, pol, 4.0)
        b = associate(dep, scaled, pol, 4.0)
        for k in a.serving:
            assert np.array_equal(a.serving[k], b.serving[k])
        assert np.array_equal(a.counts, b.counts)


def test_no_users_means_all_void():
    tiers = (TierSpec(1, 1e-4, 1.0), TierSpec(2, 1e-4, 1.0, rat="U"))
    maps = [associate(sample_deployment(tiers, {}, Window(500.0), s), tiers, MMPA, 4.0) for s in range(3)]
    assert empirical_void_probability(maps, 1, guard=0.0).value == 1.0


def test_void_probability_single_tier_nearest_ap():
    ch = ChannelParams(shadowing_db=0.0)
    tiers = (TierSpec(1, 1e-4, 1.0, rat="U"),)
    pol = AssociationPolicy("bna", "noncrossing", bias=(1.0,))
    users = {"U": 1e-4}
    nu = analytic_void_probability(tiers, pol, ch, users, 1)
    assert nu == pytest.approx((1 + 1 / 3.5) ** -3.5, rel=1e-12)
    assert nu == pytest.approx(0.4149, abs=5e-5)
    maps = [associate(sample_deployment(tiers, users, Window(1000.0, "torus"), s, 0.0), tiers, pol, 4.0)
            for s in range(60)]
    est = empirical_void_probability(maps, 1)
    assert abs(est.value - nu) <= max(0.01, 3 * est.stderr)


def test_analytic_void_examples():
    ch = ChannelParams(shadowing_db=0.0)
    tiers = (TierSpec(1, 1e-4, 1.0, rat="U"),)
    assert analytic_void_probability(tiers, MMPA, ch, {"U": 3.5e-4}, 1) == pytest.approx(2 ** -3.5)
    assert analytic_void_probability(tiers, MMPA, ch, {"U": 1e-15}, 1) == pytest.approx(1.0)


def test_void_formula_components(table_tiers, table_channel):
    s = assoc_stats(table_tiers, MMPA, table_channel)
    z = 0.5
    E = lambda c: math.exp(0.5 * (c * table_channel.sigma_ln) ** 2)
    zeta = 3.5 * E(z) * E(-z)
    np.testing.assert_allclose(s.zeta, zeta)
    assert np.all(s.zeta >= 3.5)
    mass = np.array([t.intensity * t.power ** z * E(z) for t in table_tiers])
    np.testing.assert_allclose(s.theta[:3], mass[:3] / mass[:3].sum())
    np.testing.assert_allclose(s.theta_hat, mass / mass.sum())
    assert s.theta[:3].sum() == pytest.approx(1.0) and s.theta_hat.sum() == pytest.approx(1.0)
    users = {"L": 3e-5, "U": 3e-5}
    for k in range(1, 5):
        load = users["L"] * s.theta[k - 1] if k < 4 else users["U"]
        lam = table_tiers[k - 1].intensity
        want = (1 + load / (zeta * lam)) ** -zeta
        assert analytic_void_probability(table_tiers, MMPA, table_channel, users, k) == pytest.approx(want)


@given(st.floats(1e-7, 1e-2), st.floats(1.01, 10.0), st.floats(1e-6, 1e-3))
def test_void_monotonicity(mu, factor, lam):
    ch = ChannelParams()
    one = lambda l: (TierSpec(1, l, 1.0, rat="U"),)
    nu = lambda l, m: analytic_void_probability(one(l), MMPA, ch, {"U": m}, 1)
    assert nu(lam, mu * factor) < nu(lam, mu)
    assert nu(lam * factor, mu) > nu(lam, mu)


def _licensed_share(tiers, channel):
    s = assoc_stats(tiers, MMPA, channel)
    return s.mass[:-1].sum() / s.mass.sum()


@pytest.mark.parametrize("ratio", [0.1, 1.0, 10.0, 100.0])
def test_crossing_void_dominates_when_unlicensed_mass_is_larger(table_tiers, table_channel, ratio):
    # pooled users see theta_hat = share * theta, so equal populations give
    # crossing void >= noncrossing void exactly when the licensed share <= 1/2
    tiers = table_tiers[:3] + (replace(table_tiers[3], intensity=3e-4),)
    assert _licensed_share(tiers, table_channel) <= 0.5
    mu = ratio * 5e-5
    users = {"L": mu, "U": mu}
    for k in range(1, 4):
        nc = analytic_void_probability(tiers, MMPA, table_channel, users, k)
        cr = analytic_void_probability(tiers, MMPA_X, table_channel, users, k)
        assert cr >= nc


@pytest.mark.parametrize("ratio", [0.1, 1.0, 10.0])
def test_crossing_void_ordering_follows_licensed_share(table_tiers, table_channel, ratio):
    share = _licensed_share(table_tiers, table_channel)
    assert share == pytest.approx(0.536, abs=1e-3)
    mu = ratio * 5e-5
    users = {"L": mu, "U": mu}
    for k in range(1, 4):
        nc = analytic_void_probability(table_tiers, MMPA, table_channel, users, k)
        cr = analytic_void_probability(table_tiers, MMPA_X, table_channel, users, k)
        assert (cr >= nc) == (2 * share <= 1)


def test_weighted_distance_cdf_examples():
    ch = ChannelParams(shadowing_db=0.0)
    tiers = (TierSpec(1, 1 / math.pi, 1.0, rat="U"),)
    pol = AssociationPolicy("mmpa", "crossing")
    assert weighted_distance_cdf(pol, tiers, ch, 0.0) == 0.0
    assert weighted_distance_cdf(pol, tiers, ch, 1.0) == pytest.approx(1 - math.exp(-1))


def _typical_users(tiers, policy, channel, n, radius=2500.0):
    """Serving tier and weighted distance of a typical user at the origin, one per deployment."""
    tier, wd = [], []
    for s in range(n):
        dep = sample_deployment(tiers, {}, Window(radius), s, channel.shadowing_db)
        dep = replace(dep, users={"L": np.zeros((1, 2))})
        m = associate(dep, tiers, policy, channel.alpha)
        key = "*" if policy.mode.value == "crossing" else "L"
        tier.append(int(m.serving_tier[key][0]))
        wd.append(float(m.weighted_distance[key][0]))
    return np.array(tier), np.array(wd)


@pytest.fixture(scope="module")
def fig1_typical():
    lam1 = 1e-6
    tiers = (TierSpec(1, lam1, 40.0), TierSpec(2, 10 * lam1, 1.0), TierSpec(3, 50 * lam1, 0.5),
             TierSpec(4, 100 * lam1, 0.2, rat="U"))
    ch = ChannelParams()
    return tiers, ch, {m: _typical_users(tiers, AssociationPolicy("mmpa", m), ch, 10_000)
                       for m in ("noncrossing", "crossing")}


@pytest.mark.property("weighted-distance KS")
@pytest.mark.parametrize("mode", ["noncrossing", "crossing"])
def test_weighted_distance_law(fig1_typical, mode):
    tiers, ch, res = fig1_typical
    _, wd = res[mode]
    pol = AssociationPolicy("mmpa", mode)
    ks = stats.kstest(wd, lambda x: weighted_distance_cdf(pol, tiers, ch, x))
    assert ks.statistic <= 0.02


@pytest.mark.property("weighted-distance KS")
@pytest.mark.parametrize("mode", ["noncrossing", "crossing"])
def test_weighted_distance_independent_of_serving_tier(fig1_typical, mode):
    _, _, res = fig1_typical
    tier, wd = res[mode]
    present = [k for k in np.unique(tier) if np.sum(tier == k) >= 200]
    assert len(present) >= 3
    for i, a in enumerate(present):
        for b in present[i + 1:]:
            assert stats.ks_2samp(wd[tier == a], wd[tier == b]).pvalue > 0.01


@pytest.mark.parametrize("mode", ["noncrossing", "crossing"])
def test_tier_selection_frequencies(fig1_typical, mode):
    tiers, ch, res = fig1_typical
    tier, _ = res[mode]
    s = assoc_stats(tiers, AssociationPolicy("mmpa", mode), ch)
    probs = s.theta[:3] if mode == "noncrossing" else s.theta_hat
    for k, p in enumerate(probs, start=1):
        est = binomial_estimate(int(np.sum(tier == k)), len(tier))
        assert abs(est.value - p) <= 3 * est.stderr


def test_empirical_frequencies_helper():
    tiers = (TierSpec(1, 1e-4, 1.0), TierSpec(2, 1e-4, 1.0, rat="U"))
    dep = sample_deployment(tiers, {"L": 1e-4}, Window(500.0), 1)
    m = associate(dep, tiers, MMPA, 4.0)
    f = empirical_tier_frequencies([m], "L", 2)
    assert f[0].value == 1.0 and f[1].value == 0.0


def test_edge_guard_excludes_boundary_aps():
    tiers = (TierSpec(1, 1e-4, 1.0, rat="U"),)
    maps = [associate(sample_deployment(tiers, {"U": 1e-4}, Window(600.0), s), tiers, MMPA, 4.0)
            for s in range(3)]
    g = guard_distances(maps, 1)
    assert 0 < g[0] < 600
    full = empirical_void_probability(maps, 1, guard=0.0)
    inner = empirical_void_probability(maps, 1)
    assert inner.n < full.n
    assert math.isnan(empirical_void_probability(maps, 1, guard=1e4).value)
