import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multirat.association import Estimate
from multirat.config import AssociationPolicy, ChannelParams, NetworkConfig, TierSpec, Window
from multirat.sir import (Band, ConditioningError, SimContext, SirSample, _sir, estimate_coexisting_coverage,
                          estimate_coverage, estimate_network_capacity, estimate_spectrum_efficiency,
                          sample_typical_sir, simulate_trial)

NC = AssociationPolicy("mmpa", "noncrossing")


def small_config(contending_l=True, shadow=math.sqrt(3.0)):
    t1 = TierSpec(1, 1e-4, 1.0, 2.0, 30.0) if contending_l else TierSpec(1, 1e-4, 1.0)
    return NetworkConfig((t1, TierSpec(2, 1e-4, 1.0, 1.0, 30.0, rat="U")),
                         ChannelParams(shadowing_db=shadow, gain_threshold=0.5, sir_threshold=1.0))


def test_sir_ratio_examples():
    # unit-distance server against one interferer at distance 2, alpha = 4
    assert _sir(1.0, 2.0 ** -4) == 16.0
    assert _sir(1.0, 0.0) == math.inf


def _samples(vals, band=Band.LICENSED, tier=1):
    return [SirSample(band, tier, v) for v in vals]


def test_coverage_extremes():
    s = _samples([0.0, 0.5, 3.0, math.inf])
    assert estimate_coverage(s, 0.0)[Band.LICENSED].value == 1.0
    assert estimate_coverage(s, 1e300)[Band.LICENSED].value == 0.25
    assert estimate_coverage(s, 1.0)[(Band.LICENSED, 1)].value == 0.5


@pytest.mark.property("coverage monotone in threshold")
@given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=200), st.floats(0.0, 100.0), st.floats(1.0, 10.0))
def test_coverage_monotone_in_threshold(vals, theta, f):
    s = _samples(vals)
    lo = estimate_coverage(s, theta)[Band.LICENSED].value
    hi = estimate_coverage(s, theta * f)[Band.LICENSED].value
    assert hi <= lo


def test_coexisting_coverage_weights():
    per = {1: Estimate(0.8, 0.01, 100), 2: Estimate(0.6, 0.02, 100)}
    e = estimate_coexisting_coverage(per, (0.5, 0.5))
    assert e.value == pytest.approx(0.7)
    assert e.stderr == pytest.approx(math.hypot(0.005, 0.01))
    single = estimate_coexisting_coverage({2: Estimate(0.6, 0.02, 100)}, (0.0, 1.0))
    assert single.value == 0.6 and single.stderr == 0.02


def test_spectrum_efficiency_zero_sir():
    s = _samples([0.0] * 5) + _samples([0.0] * 5, Band.LIC_UNLICENSED) + _samples([0.0] * 5, Band.UNLICENSED, 2)
    r = estimate_spectrum_efficiency(s, Estimate(0.5, 0, 1), Estimate(0.3, 0, 1))
    assert r.C_L.value == 0.0 and r.C_U.value == 0.0 and r.capped_fraction == 0.0


def test_spectrum_efficiency_unit_sir():
    s = _samples([1.0] * 4) + _samples([1.0] * 4, Band.LIC_UNLICENSED) + _samples([1.0] * 4, Band.UNLICENSED, 2)
    r = estimate_spectrum_efficiency(s, Estimate(0.5, 0, 1), Estimate(0.3, 0, 1))
    assert r.C_L.value == pytest.approx(1.5)
    assert r.C_U.value == pytest.approx(0.3)


def test_spectrum_efficiency_caps_infinite_sir():
    s = _samples([math.inf, 1.0])
    r = estimate_spectrum_efficiency(s, Estimate(0.0, 0, 1), Estimate(0.0, 0, 1), gamma_max=1e6)
    assert r.C_L.value == pytest.approx((math.log2(1 + 1e6) + 1.0) / 2)
    assert r.capped_fraction == 0.5
    assert math.isnan(r.C_U.value)


def test_network_capacity_assembly():
    one = Estimate(1.0, 0.0, 1)
    cap = estimate_network_capacity([1e-5, 0.0], [Estimate(0.5, 0, 1), one], Estimate(0.6, 0, 1), one,
                                    Estimate(2.0, 0, 1), one)
    assert cap.value == pytest.approx(6e-6)
    zero = Estimate(0.0, 0.0, 1)
    cap = estimate_network_capacity([1e-5, 1e-5], [zero, zero], one, one, one, one)
    assert cap.value == 0.0


# ------------------------------------------------------------- simulation

WIN = Window(300.0)
USERS = {"L": 1e-4, "U": 1e-4}


def test_lu_sample_needs_a_contending_server():
    cfg = small_config(contending_l=False)
    with pytest.raises(ConditioningError):
        sample_typical_sir(cfg, NC, "Lu", 1, WIN, USERS)
    ll = sample_typical_sir(cfg, NC, "Ll", 1, WIN, USERS)
    assert ll.band is Band.LICENSED and ll.serving_tier == 1 and ll.sir > 0


def test_lu_samples_are_granted():
    cfg = small_config()
    ctx = SimContext(cfg, NC, WIN, USERS)
    got = 0
    for seed in range(60):
        rec = simulate_trial(ctx, "L", seed)
        assert rec.lu_attempted
        for s in rec.samples:
            if s.band is Band.LIC_UNLICENSED:
                got += 1
                assert s.granted is True
        assert rec.lu_accepted == any(s.band is Band.LIC_UNLICENSED for s in rec.samples)
    assert got > 10


def test_unlicensed_population_is_served_by_last_tier():
    ctx = SimContext(small_config(), NC, WIN, USERS)
    for seed in range(10):
        rec = simulate_trial(ctx, "U", seed)
        assert rec.serving_tier == 2
        assert [s.band for s in rec.samples] == [Band.UNLICENSED]


def test_trials_are_reproducible():
    ctx = SimContext(small_config(), NC, WIN, USERS)
    a = simulate_trial(ctx, "L", 42)
    b = simulate_trial(ctx, "L", 42)
    assert a.samples == b.samples
    assert all(np.array_equal(getattr(a.counts, f), getattr(b.counts, f)) for f in a.counts.__dataclass_fields__)
    assert simulate_trial(ctx, "L", 43).samples != a.samples


def _ll_coverage(mu, trials=400):
    ctx = SimContext(small_config(), NC, WIN, {"L": mu, "U": mu})
    s = [x for seed in range(trials) for x in simulate_trial(ctx, "L", seed).samples]
    return estimate_coverage(s, 1.0)[Band.LICENSED]


def test_licensed_coverage_falls_as_load_grows():
    ladder = [_ll_coverage(mu) for mu in (1e-5, 1e-4, 1e-3)]
    for a, b in zip(ladder, ladder[1:]):
        assert a.value >= b.value - 2 * math.hypot(a.stderr, b.stderr)
    assert ladder[0].value > ladder[-1].value


def test_independent_void_model():
    ctx = SimContext(small_config(), NC, WIN, USERS, void_model="independent")
    rec = simulate_trial(ctx, "L", 5)
    assert rec.samples and rec.samples[0].band is Band.LICENSED
    with pytest.raises(ValueError):
        simulate_trial(SimContext(small_config(), NC, WIN, USERS, void_model="x"), "L", 5)


def test_crossing_mode_uses_pooled_population():
    pol = AssociationPolicy("mmpa", "crossing")
    ctx = SimContext(small_config(), pol, WIN, {"L": 2e-4})
    tiers = {simulate_trial(ctx, "L", s).serving_tier for s in range(40)}
    assert tiers == {1, 2}
    assert simulate_trial(ctx, "L", 0).population == "*"
