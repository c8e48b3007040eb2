"""User association, void cells, and association statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .config import (AssociationPolicy, BoundaryMode, ChannelParams, ConfigError, Mode, Scheme,
                     TierSpec)
from .ppp import Deployment


class AssociationError(RuntimeError):
    """A user population has no eligible AP to associate with."""


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int

    def __iter__(self):
        yield self.value
        yield self.stderr


def binomial_estimate(successes: int, trials: int) -> Estimate:
    if trials <= 0:
        return Estimate(math.nan, math.nan, 0)
    p = successes / trials
    return Estimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / trials), trials)


# ------------------------------------------------------------------ weights

def weight_moment(tier: TierSpec, policy: AssociationPolicy, channel: ChannelParams, s: float) -> float:
    """E[W^s] for the association weight of one tier."""
    if policy.scheme is Scheme.BNA:
        return policy.bias[tier.index - 1] ** s
    return tier.power ** s * math.exp(0.5 * (s * channel.sigma_ln) ** 2)


def ap_weights(dep: Deployment, tiers: Sequence[TierSpec], policy: AssociationPolicy) -> np.ndarray:
    if policy.scheme is Scheme.BNA:
        bias = np.asarray(policy.bias, dtype=float)
        return bias[dep.tier - 1]
    power = np.array([t.power for t in tiers])
    return power[dep.tier - 1] * dep.shadow_l_inv


def eligible_tiers(population: str, K: int, mode: Mode) -> list[int]:
    if mode is Mode.CROSSING:
        return list(range(1, K + 1))
    if population == "L":
        return list(range(1, K))
    if population == "U":
        return [K]
    raise ConfigError(f"unknown user population {population!r}")


def _transformed_mass(tiers, policy, channel, ks) -> float:
    z = channel.delta_exp
    return sum(tiers[k - 1].intensity * weight_moment(tiers[k - 1], policy, channel, z) for k in ks)


@dataclass(frozen=True)
class AssocStats:
    """Analytic association quantities for a configuration.

    ``theta`` holds the noncrossing probabilities, normalised over the licensed
    tiers (so entry K is the tier-K transformed mass relative to the licensed
    mass); ``theta_hat`` holds the crossing probabilities over all tiers.
    """
    theta: np.ndarray
    theta_hat: np.ndarray
    zeta: np.ndarray
    lambda_tilde: np.ndarray
    mass: np.ndarray  # lambda_k E[W_k^{2/alpha}]


def assoc_stats(tiers: Sequence[TierSpec], policy: AssociationPolicy, channel: ChannelParams) -> AssocStats:
    z = channel.delta_exp
    K = len(tiers)
    mass = np.array([t.intensity * weight_moment(t, policy, channel, z) for t in tiers])
    mixed = np.array([weight_moment(t, policy, channel, z) * weight_moment(t, policy, channel, -z)
                      for t in tiers])
    lic = mass[:K - 1].sum()
    # with no licensed tiers the network is single-RAT and tier K takes everyone
    theta = mass / lic if lic > 0 else np.where(np.arange(K) == K - 1, 1.0, 0.0)
    theta_hat = mass / mass.sum()
    lam = np.array([t.intensity for t in tiers])
    return AssocStats(theta, theta_hat, 3.5 * mixed, lam * mixed, mass)


def analytic_void_probability(tiers: Sequence[TierSpec], policy: AssociationPolicy,
                              channel: ChannelParams, user_intensities: Mapping[str, float],
                              k: int) -> float:
    """Probability that a tier-k AP serves nobody (gamma-approximation of the cell size)."""
    st = assoc_stats(tiers, policy, channel)
    K = len(tiers)
    lam = tiers[k - 1].intensity
    zeta = st.zeta[k - 1]
    mu_l = user_intensities.get("L", 0.0)
    mu_u = user_intensities.get("U", 0.0)
    if policy.mode is Mode.CROSSING:
        load = (mu_l + mu_u) * st.theta_hat[k - 1]
    elif k < K:
        load = mu_l * st.theta[k - 1]
    else:
        load = mu_u
    if lam <= 0:
        return 1.0
    return float((1.0 + load / (zeta * lam)) ** (-zeta))


def weighted_distance_cdf(policy: AssociationPolicy, tiers: Sequence[TierSpec], channel: ChannelParams,
                          x, population: str = "L"):
    """CDF of the serving AP's weighted distance W*^(-1/alpha)|X*| seen from a typical user."""
    ks = eligible_tiers(population, len(tiers), policy.mode)
    lam = _transformed_mass(tiers, policy, channel, ks)
    x = np.asarray(x, dtype=float)
    return 1.0 - np.exp(-math.pi * x * x * lam)


# -------------------------------------------------------------- simulation

@dataclass(frozen=True)
class AssociationMap:
    mode: Mode
    serving: Mapping[str, np.ndarray]         # global AP index per user
    serving_tier: Mapping[str, np.ndarray]
    weighted_distance: Mapping[str, np.ndarray]
    distance: Mapping[str, np.ndarray]
    counts: np.ndarray                        # tagged users per AP
    ap_tier: np.ndarray
    ap_radius: np.ndarray                     # |X| for each AP, for edge guards
    window_radius: float
    torus: bool

    @property
    def void(self) -> np.ndarray:
        return self.counts == 0


def associate(dep: Deployment, tiers: Sequence[TierSpec], policy: AssociationPolicy,
              alpha: float) -> AssociationMap:
    """Assign every user to the eligible AP with the largest ``W * d^-alpha``."""
    K = len(tiers)
    w = ap_weights(dep, tiers, policy)
    scale_all = w ** (-1.0 / alpha)
    hw = dep.window.radius
    period = dep.window.period
    pops = dict(dep.users)
    if policy.mode is Mode.CROSSING:
        pops = {"*": np.vstack([pops[p] for p in sorted(pops)]) if pops else np.empty((0, 2))}
    serving, stier, wdist, dist = {}, {}, {}, {}
    counts = np.zeros(dep.n_aps, dtype=np.int64)
    for name, pts in pops.items():
        ks = eligible_tiers("L" if name == "*" else name, K, policy.mode)
        sel = np.flatnonzero(np.isin(dep.tier, ks))
        if len(pts) and len(sel) == 0:
            raise AssociationError(f"population {name!r} has users but tiers {ks} have no APs")
        j, wd = _kernels.weighted_nearest(pts[:, 0], pts[:, 1], dep.x[sel], dep.y[sel],
                                          scale_all[sel], hw, period)
        g = sel[j] if len(pts) else np.empty(0, dtype=np.int64)
        serving[name] = g
        stier[name] = dep.tier[g]
        wdist[name] = wd
        dist[name] = wd / scale_all[g] if len(pts) else np.empty(0)
        counts += np.bincount(g, minlength=dep.n_aps)
    return AssociationMap(policy.mode, serving, stier, wdist, dist, counts, dep.tier,
                          np.hypot(dep.x, dep.y), hw,
                          dep.window.boundary is BoundaryMode.TORUS)


def serving_of(amap: AssociationMap, population: str):
    """(serving index, tier, weighted distance) arrays for a population under either mode."""
    if amap.mode is Mode.CROSSING:
        return amap.serving["*"], amap.serving_tier["*"], amap.weighted_distance["*"]
    return amap.serving[population], amap.serving_tier[population], amap.weighted_distance[population]


def guard_distances(maps: Sequence[AssociationMap], K: int, quantile: float = 0.99) -> np.ndarray:
    """Per-tier edge guard: the given quantile of user-to-serving-AP distance, pooled over maps."""
    guards = np.zeros(K)
    if not maps or maps[0].torus:
        return guards
    for k in range(1, K + 1):
        d = [m.distance[p][m.serving_tier[p] == k] for m in maps for p in m.distance]
        d = np.concatenate(d) if d else np.empty(0)
        if len(d):
            guards[k - 1] = float(np.quantile(d, quantile))
    return guards


def interior_mask(amap: AssociationMap, k: int, guard: float) -> np.ndarray:
    m = amap.ap_tier == k
    if not amap.torus:
        m &= amap.ap_radius <= amap.window_radius - guard
    return m


def empirical_void_probability(maps: Sequence[AssociationMap], k: int, quantile: float = 0.99,
                               guard: float | None = None) -> Estimate:
    """Pooled fraction of interior tier-k APs without users, with a binomial standard error."""
    if not maps:
        raise ValueError("at least one association map is required")
    K = int(max(m.ap_tier.max(initial=k) for m in maps))
    if guard is None:
        guard = guard_distances(maps, K, quantile)[k - 1]
    void = total = 0
    for m in maps:
        sel = interior_mask(m, k, guard)
        total += int(sel.sum())
        void += int((m.counts[sel] == 0).sum())
    return binomial_estimate(void, total)


def empirical_tier_frequencies(maps: Sequence[AssociationMap], population: str, K: int) -> list[Estimate]:
    """Fraction of users served by each tier, pooled over maps."""
    hits = np.zeros(K, dtype=np.int64)
    n = 0
    for m in maps:
        key = "*" if m.mode is Mode.CROSSING else population
        t = m.serving_tier[key]
        hits += np.bincount(t - 1, minlength=K)[:K]
        n += len(t)
    return [binomial_estimate(int(h), n) for h in hits]


def guard_estimate(tiers: Sequence[TierSpec], policy: AssociationPolicy, channel: ChannelParams,
                   quantile: float = 0.99, draws: int = 200_000) -> np.ndarray:
    """Per-tier quantile of the physical user-to-serving-AP distance, from the serving-geometry law.

    A typical user's serving weighted distance is Rayleigh with the eligible
    transformed mass; given the serving tier k the AP weight follows the
    tier's weight law tilted by ``w^(2/alpha)``; the physical distance is the
    weighted distance times ``W*^(1/alpha)``.  Evaluated with a fixed internal
    random stream so the result is deterministic.
    """
    from . import rng as _rng
    K = len(tiers)
    z = channel.delta_exp
    s = channel.sigma_ln
    gen = _rng.stream(0, _rng.AUX, 2**31 - 1)
    u = gen.exponential(1.0, draws)
    e = gen.normal(0.0, 1.0, draws)
    out = np.zeros(K)
    for k in range(1, K + 1):
        pop = "U" if (policy.mode is Mode.NONCROSSING and k == K) else "L"
        lam = _transformed_mass(tiers, policy, channel, eligible_tiers(pop, K, policy.mode))
        if lam <= 0:
            continue
        rt = np.sqrt(u / (math.pi * lam))
        if policy.scheme is Scheme.BNA:
            w = np.full(draws, policy.bias[k - 1])
        else:
            w = tiers[k - 1].power * np.exp(s * e + z * s * s)
        out[k - 1] = float(np.quantile(rt * w ** (1.0 / channel.alpha), quantile))
    return out
