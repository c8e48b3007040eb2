"""Typical-user SIR sampling and Monte Carlo coverage / capacity estimators.

A trial places a typical user at the origin, draws a deployment with the
background user populations, associates everyone, runs one contention slot
and measures the typical user's SIR in each band it can use.

Link gains toward the typical user are drawn per trial and per AP, independent
of the marks that drive association and the contention gate:

* licensed band: fresh Rayleigh fading; shadowing is the AP's association mark;
* unlicensed band: fresh Rayleigh fading; tier-K APs use their association
  shadowing mark, licensed-tier APs a fresh log-normal draw.

The licensed-user unlicensed-band sample is conditioned on the serving AP
holding the unlicensed channel: the server's gate gain is redrawn from its law
conditioned on clearing the threshold (it is independent of everything else)
and the contention win is enforced by rejection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import rng as _rng
from .association import AssociationMap, AssociationPolicy, Estimate, associate, binomial_estimate
from .config import ChannelParams, Mode, NetworkConfig, Window
from .csma import gate_gains, run_contention
from .ppp import sample_deployment


class Band(str, Enum):
    LICENSED = "Ll"       # licensed user, licensed band
    LIC_UNLICENSED = "Lu"  # licensed user, unlicensed band (server granted)
    UNLICENSED = "U"      # unlicensed-tier user


class ConditioningError(RuntimeError):
    """The serving AP did not win the unlicensed channel; the caller should resample."""


DEFAULT_GAMMA_MAX = 1e6


@dataclass(frozen=True)
class SirSample:
    band: Band
    serving_tier: int
    sir: float
    granted: bool | None = None


@dataclass
class TierCounts:
    """Per-tier counters from interior APs of one or more trials."""
    aps: np.ndarray
    void: np.ndarray
    gate_nonvoid: np.ndarray   # non-void APs whose gate gain clears the threshold
    contending: np.ndarray
    granted: np.ndarray
    contending_blind: np.ndarray   # same slot with void flags ignored
    granted_blind: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "TierCounts":
        return cls(*(np.zeros(K, dtype=np.int64) for _ in range(7)))

    def merge(self, other: "TierCounts") -> "TierCounts":
        return TierCounts(*(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__))

    def void_probability(self, k: int) -> Estimate:
        return binomial_estimate(int(self.void[k - 1]), int(self.aps[k - 1]))

    def gate_probability(self, k: int) -> Estimate:
        return binomial_estimate(int(self.gate_nonvoid[k - 1]), int(self.aps[k - 1] - self.void[k - 1]))

    def access_probability(self, k: int, void_aware: bool = True) -> Estimate:
        if void_aware:
            return binomial_estimate(int(self.granted[k - 1]), int(self.contending[k - 1]))
        return binomial_estimate(int(self.granted_blind[k - 1]), int(self.contending_blind[k - 1]))


@dataclass
class TrialRecord:
    """Everything one typical-user trial produced."""
    population: str
    serving_tier: int
    samples: list[SirSample]
    counts: TierCounts
    lu_attempted: bool = False
    lu_accepted: bool = False


@dataclass(frozen=True)
class SimContext:
    config: NetworkConfig
    policy: AssociationPolicy
    window: Window
    user_intensities: Mapping[str, float]
    void_guard: Sequence[float] | None = None   # per-tier edge guard for void/gate counters
    access_guard: float = 0.0                  # edge guard for contention counters
    void_model: str = "correlated"          # or "independent"
    void_aware_contention: bool = True
    count_void_blind: bool = False          # also run a void-blind slot for the counters


def _tier_counts(ctx: SimContext, dep, void, outcome, blind) -> TierCounts:
    K = ctx.config.K
    guard = np.zeros(K) if ctx.void_guard is None else np.asarray(ctx.void_guard, dtype=float)
    r = np.hypot(dep.x, dep.y)
    if ctx.window.period > 0:
        inner_v = inner_a = np.ones(dep.n_aps, dtype=bool)
    else:
        inner_v = r <= ctx.window.radius - guard[dep.tier - 1]
        inner_a = r <= ctx.window.radius - ctx.access_guard
    gate = gate_gains(dep) >= ctx.config.channel.gain_threshold

    def per_tier(mask):
        return np.bincount(dep.tier[mask] - 1, minlength=K)[:K].astype(np.int64)

    zero = np.zeros(K, dtype=np.int64)
    return TierCounts(per_tier(inner_v), per_tier(void & inner_v), per_tier(gate & ~void & inner_v),
                      per_tier(outcome.contending & inner_a), per_tier(outcome.granted & inner_a),
                      per_tier(blind.contending & inner_a) if blind is not None else zero,
                      per_tier(blind.granted & inner_a) if blind is not None else zero)


def _independent_voids(gen, dep, void, server, K):
    """Replace void flags by independent draws with each tier's realised void fraction."""
    out = void.copy()
    for k in range(1, K + 1):
        sel = dep.tier == k
        if sel.any():
            out[sel] = gen.random(int(sel.sum())) < void[sel].mean()
    out[server] = False
    return out


def _sir(signal, interf):
    if interf <= 0.0:
        return math.inf
    return signal / interf


def simulate_trial(ctx: SimContext, population: str, seed: int) -> TrialRecord:
    """One typical user of ``population`` ("L" or "U"; any value in crossing mode)."""
    cfg = ctx.config
    ch: ChannelParams = cfg.channel
    K = cfg.K
    alpha = ch.alpha
    tiers = cfg.tiers
    crossing = ctx.policy.mode is Mode.CROSSING
    pop = "L" if crossing else population
    dep = sample_deployment(tiers, ctx.user_intensities, ctx.window, seed, ch.shadowing_db)
    users = dict(dep.users)
    users[pop] = np.vstack([np.zeros((1, 2)), users.get(pop, np.empty((0, 2)))])
    dep = replace(dep, users=users)
    amap = associate(dep, tiers, ctx.policy, alpha)
    key = "*" if crossing else pop
    server = int(amap.serving[key][0])
    s_tier = int(dep.tier[server])
    void = amap.void

    gen = _rng.stream(seed, _rng.LINKS)
    n = dep.n_aps
    h_l = gen.exponential(1.0, n)
    h_u = gen.exponential(1.0, n)
    s_ln = ch.sigma_ln
    g_u_link = np.exp(gen.normal(0.0, s_ln, n)) if s_ln > 0 else np.ones(n)
    if ctx.void_model == "independent":
        void = _independent_voids(gen, dep, void, server, K)
    elif ctx.void_model != "correlated":
        raise ValueError(f"unknown void model {ctx.void_model!r}")

    power = np.array([t.power for t in tiers])[dep.tier - 1]
    path = np.hypot(dep.x, dep.y) ** (-alpha)
    lic = dep.tier < K
    u_shadow = np.where(lic, g_u_link, dep.shadow_l_inv)
    rx_l = power * h_l * dep.shadow_l_inv * path
    rx_u = power * h_u * u_shadow * path
    others = np.ones(n, dtype=bool)
    others[server] = False

    outcome = _contention_with_voids(ctx, dep, void, seed, None)
    blind = None
    if ctx.count_void_blind:
        blind = run_contention(dep, None, tiers, ch.gain_threshold, seed, void_aware=False)
    counts = _tier_counts(ctx, dep, amap.void, outcome, blind)

    samples: list[SirSample] = []
    rec = TrialRecord(key if crossing else pop, s_tier, samples, counts)
    if s_tier < K:
        i_l = float(rx_l[others & lic & ~void].sum())
        samples.append(SirSample(Band.LICENSED, s_tier, _sir(rx_l[server], i_l)))
        # unlicensed-band sample conditioned on the server holding the channel
        rec.lu_attempted = True
        if tiers[s_tier - 1].contends:
            gate = gate_gains(dep).copy()
            gate[server] = _conditional_gate(gen, ch)
            forced = _contention_with_voids(ctx, dep, void, seed, gate)
            if forced.granted[server]:
                rec.lu_accepted = True
                i_u = float(rx_u[others & forced.granted].sum())
                samples.append(SirSample(Band.LIC_UNLICENSED, s_tier, _sir(rx_u[server], i_u), True))
    else:
        i_u = float(rx_u[others & outcome.granted].sum())
        samples.append(SirSample(Band.UNLICENSED, s_tier, _sir(rx_u[server], i_u),
                                 bool(outcome.granted[server])))
    return rec


def _contention_with_voids(ctx, dep, void, seed, gate_override):
    """Contention where the void flags are given explicitly (possibly re-drawn)."""
    amap = AssociationMap(ctx.policy.mode, {}, {}, {}, {}, np.where(void, 0, 1), dep.tier,
                          np.hypot(dep.x, dep.y), dep.window.radius, dep.window.period > 0)
    return run_contention(dep, amap, ctx.config.tiers, ctx.config.channel.gain_threshold, seed,
                          void_aware=ctx.void_aware_contention, gate_override=gate_override)


def _conditional_gate(gen, ch: ChannelParams) -> float:
    """Draw H G'^-1 conditioned on H G'^-1 >= delta (H ~ Exp(1), G' log-normal).

    P(pass | G') = exp(-delta G'), so G' is accepted with that probability and
    then, by memorylessness, H = delta G' + Exp(1).
    """
    delta = ch.gain_threshold
    s = ch.sigma_ln
    while True:
        g = np.exp(gen.normal(0.0, s, 256)) if s > 0 else np.ones(256)
        ok = gen.random(256) < np.exp(-delta * g)
        if ok.any():
            gp = float(g[np.argmax(ok)])
            h = delta * gp + float(gen.exponential(1.0))
            return h / gp


def sample_typical_sir(config: NetworkConfig, policy: AssociationPolicy, band: Band | str, seed: int,
                       window: Window, user_intensities: Mapping[str, float], **kw) -> SirSample:
    """Single SIR draw for ``band``.

    Raises :class:`ConditioningError` when the drawn typical user cannot give a
    sample in that band: its server is in the wrong RAT, or for the
    licensed-user unlicensed band the server did not win the channel.
    """
    band = Band(band)
    pop = "U" if band is Band.UNLICENSED else "L"
    ctx = SimContext(config, policy, window, user_intensities, **kw)
    rec = simulate_trial(ctx, pop, seed)
    for s in rec.samples:
        if s.band is band:
            return s
    raise ConditioningError(f"trial {seed} produced no {band.value} sample "
                            f"(serving tier {rec.serving_tier})")


# ------------------------------------------------------------ estimators

def estimate_coverage(samples: Iterable[SirSample], theta: float) -> dict:
    """Coverage per band and per (band, serving tier): fraction of samples with SIR >= theta."""
    hits: dict = {}
    for s in samples:
        for key in (s.band, (s.band, s.serving_tier)):
            h, n = hits.get(key, (0, 0))
            hits[key] = (h + (s.sir >= theta), n + 1)
    return {k: binomial_estimate(h, n) for k, (h, n) in hits.items()}


def estimate_coexisting_coverage(per_tier: Mapping[int, Estimate], weights: Sequence[float]) -> Estimate:
    """Weighted sum of per-serving-tier coverages; weights indexed by tier - 1.

    Standard error by the delta method with the weights treated as known.
    """
    val = 0.0
    var = 0.0
    n = 0
    for k, w in enumerate(weights, start=1):
        if w == 0:
            continue
        e = per_tier[k]
        val += w * e.value
        var += (w * e.stderr) ** 2
        n += e.n
    return Estimate(val, math.sqrt(var), n)


def _mean_log_rate(samples, band, gamma_max):
    v = np.array([math.log2(1.0 + min(s.sir, gamma_max)) for s in samples if s.band is band])
    if len(v) == 0:
        return Estimate(math.nan, math.nan, 0)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
    return Estimate(float(v.mean()), se, len(v))


def _product(a: Estimate, b: Estimate) -> Estimate:
    var = (b.value * a.stderr) ** 2 + (a.value * b.stderr) ** 2
    return Estimate(a.value * b.value, math.sqrt(var), min(a.n, b.n))


@dataclass(frozen=True)
class SpectrumEfficiency:
    C_L: Estimate
    C_U: Estimate
    capped_fraction: float


def estimate_spectrum_efficiency(samples: Sequence[SirSample], access_fraction: Estimate,
                                 tier_k_access: Estimate, gamma_max: float = DEFAULT_GAMMA_MAX
                                 ) -> SpectrumEfficiency:
    """C_L = E log2(1+SIR_Ll) + f E log2(1+SIR_Lu); C_U = (rho_K p_K) E log2(1+SIR_U).

    ``access_fraction`` is ``f = sum_k rho_k p_k assoc_k`` over licensed tiers
    and ``tier_k_access`` is ``rho_K p_K``; pass ``Estimate(x, 0, 1)`` for
    analytic values.  SIR values are capped at ``gamma_max`` before the log.
    """
    ll = _mean_log_rate(samples, Band.LICENSED, gamma_max)
    lu = _mean_log_rate(samples, Band.LIC_UNLICENSED, gamma_max)
    uu = _mean_log_rate(samples, Band.UNLICENSED, gamma_max)
    if ll.n:
        part = _product(access_fraction, lu) if lu.n else Estimate(0.0, 0.0, 0)
        C_L = Estimate(ll.value + part.value, math.hypot(ll.stderr, part.stderr), ll.n)
    else:
        C_L = Estimate(math.nan, math.nan, 0)
    C_U = _product(tier_k_access, uu) if uu.n else Estimate(math.nan, math.nan, 0)
    capped = [s.sir > gamma_max for s in samples]
    return SpectrumEfficiency(C_L, C_U, float(np.mean(capped)) if capped else 0.0)


def estimate_network_capacity(intensity: Sequence[float], nonvoid: Sequence[Estimate],
                              P_L: Estimate, P_U: Estimate, C_L: Estimate, C_U: Estimate) -> Estimate:
    """sum_{k<K} lambda_k (1-nu_k) P_L C_L + lambda_K (1-nu_K) P_U C_U, in bps/Hz/m^2."""
    K = len(intensity)
    val = 0.0
    var = 0.0
    for k in range(K):
        P, C = (P_L, C_L) if k < K - 1 else (P_U, C_U)
        q = nonvoid[k]
        if intensity[k] == 0 or q.value == 0:
            continue
        lam = intensity[k]
        term = lam * q.value * P.value * C.value
        val += term
        var += (lam * P.value * C.value * q.stderr) ** 2 + (lam * q.value * C.value * P.stderr) ** 2 \
            + (lam * q.value * P.value * C.stderr) ** 2
    n = min((e.n for e in (P_L, P_U, C_L, C_U) if e.n), default=0)
    return Estimate(val, math.sqrt(var), n)
