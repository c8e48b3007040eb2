"""Opportunistic CSMA contention on a sampled deployment."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from . import rng as _rng
from .association import (AssociationMap, Estimate, ap_weights, binomial_estimate, eligible_tiers,
                          weight_moment)
from .config import AssociationPolicy, BoundaryMode, ChannelParams, Mode, Scheme, TierSpec
from .geometry import disk_pair_distance_cdf, lens_area
from .ppp import Deployment

NOT_CONTENDING, DENIED, GRANTED = 0, 1, 2
_LABELS = {NOT_CONTENDING: "not-contending", DENIED: "denied", GRANTED: "granted"}


class NoContendersError(RuntimeError):
    """A tier had no contending APs in any outcome."""


@dataclass(frozen=True)
class ContentionOutcome:
    access: np.ndarray      # per AP: NOT_CONTENDING, DENIED or GRANTED
    backoff: np.ndarray     # NaN for non-contenders
    gate: np.ndarray        # unlicensed gate gain cleared the threshold
    tier: np.ndarray
    x: np.ndarray
    y: np.ndarray
    window_radius: float
    torus: bool

    @property
    def granted(self) -> np.ndarray:
        return self.access == GRANTED

    @property
    def contending(self) -> np.ndarray:
        return self.access != NOT_CONTENDING

    def access_label(self, i: int) -> str:
        return _LABELS[int(self.access[i])]

    def counts(self, k: int) -> tuple[int, int]:
        sel = self.tier == k
        return int(np.sum(self.granted & sel)), int(np.sum(self.contending & sel))


def gate_gains(dep: Deployment) -> np.ndarray:
    return dep.fading_u * dep.shadow_u_inv


def run_contention(dep: Deployment, amap: AssociationMap | None, tiers: Sequence[TierSpec],
                   delta: float, seed: int, void_aware: bool = True,
                   gate_override: np.ndarray | None = None) -> ContentionOutcome:
    """One slot of opportunistic CSMA.

    Contenders are non-void APs of contending tiers whose unlicensed gate gain
    is at least ``delta``.  Every AP draws a uniform fraction from the
    contention stream (so outcomes with and without void flags share
    backoffs); contenders scale it by their tier's window.  A contender is
    granted iff no other contender inside its sensing disk has a smaller
    backoff (index breaks exact ties).
    """
    n = dep.n_aps
    tau = np.array([t.max_backoff for t in tiers], dtype=float)[dep.tier - 1] if n else np.empty(0)
    rs = np.array([t.sensing_radius for t in tiers], dtype=float)[dep.tier - 1] if n else np.empty(0)
    gain = gate_gains(dep) if gate_override is None else gate_override
    gate = gain >= delta
    contend = gate & np.isfinite(tau)
    if void_aware:
        if amap is None:
            raise ValueError("void-aware contention needs an association map")
        contend &= ~amap.void
    u = _rng.stream(seed, _rng.CONTENTION).random(n)
    backoff = np.where(contend, u * np.where(np.isfinite(tau), tau, 0.0), np.nan)
    access = np.zeros(n, dtype=np.int8)
    idx = np.flatnonzero(contend)
    if len(idx):
        win = _kernels.sensing_winners(dep.x[idx], dep.y[idx], backoff[idx], rs[idx],
                                       dep.window.radius, dep.window.period)
        access[idx] = np.where(win, GRANTED, DENIED)
    return ContentionOutcome(access, backoff, gate, dep.tier, dep.x, dep.y, dep.window.radius,
                             dep.window.boundary is BoundaryMode.TORUS)


def empirical_access_probability(outcomes: Sequence[ContentionOutcome], k: int,
                                 guard: float = 0.0) -> Estimate:
    """Granted / contending among tier-k APs at least ``guard`` inside the window."""
    g = c = 0
    for o in outcomes:
        sel = (o.tier == k) & o.contending
        if not o.torus:
            sel &= np.hypot(o.x, o.y) <= o.window_radius - guard
        c += int(sel.sum())
        g += int((sel & o.granted).sum())
    if c == 0:
        raise NoContendersError(f"tier {k} has no contending APs in the given outcomes")
    return binomial_estimate(g, c)


def empirical_gate_probability(deps: Sequence[Deployment], maps: Sequence[AssociationMap],
                               delta: float, k: int) -> Estimate:
    """Fraction of non-void tier-k APs whose gate gain clears ``delta``."""
    hit = tot = 0
    for d, m in zip(deps, maps):
        sel = (d.tier == k) & ~m.void
        tot += int(sel.sum())
        hit += int((sel & (gate_gains(d) >= delta)).sum())
    return binomial_estimate(hit, tot)


# ----------------------------------------------------------- mean areas

@dataclass(frozen=True)
class MeanAreaTable:
    """Mean area of a tier-k AP's sensing disk open to tier-m contenders, ``areas[k-1, m-1]``."""
    areas: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray
    mode: Mode
    source: str = "monte-carlo"


def _full_table(tiers, mode, source):
    K = len(tiers)
    full = np.array([[t.sensing_area] * K for t in tiers])
    return MeanAreaTable(full, np.zeros((K, K)), np.zeros(K, dtype=np.int64), Mode(mode), source)


def _exclusion_applies(k: int, m: int, K: int, mode: Mode) -> bool:
    # the served user of a tier-k AP only excludes tiers it could have picked
    if mode is Mode.CROSSING:
        return True
    if m == K:
        return False
    return k < K


def estimate_mean_areas(deployments: Sequence[Deployment], maps: Sequence[AssociationMap],
                        tiers: Sequence[TierSpec], policy: AssociationPolicy, channel: ChannelParams,
                        seed: int = 0, guard: float = 0.0) -> MeanAreaTable:
    """Monte Carlo mean contention areas around tagged non-void APs.

    For every interior non-void AP of a contending tier one of its users is
    drawn.  For contender tier m the exclusion disk is centred on that user
    with radius ``r* (W_m / W*)^(1/alpha)``, where ``r*`` and ``W*`` are the
    user's distance to the AP and the AP's weight and ``W_m`` is a fresh draw
    of a tier-m weight.  The uncovered part of the sensing disk is averaged.
    """
    K = len(tiers)
    mode = policy.mode
    alpha = channel.alpha
    sums = np.zeros((K, K))
    sq = np.zeros((K, K))
    cnt = np.zeros(K, dtype=np.int64)
    for t_idx, (dep, amap) in enumerate(zip(deployments, maps)):
        gen = _rng.stream(seed, _rng.AUX, t_idx)
        w_all = ap_weights(dep, tiers, policy)
        for pop in sorted(amap.serving):
            srv = amap.serving[pop]
            dist = amap.distance[pop]
            if len(srv) == 0:
                continue
            perm = gen.permutation(len(srv))
            aps, first = np.unique(srv[perm], return_index=True)
            r_star = dist[perm][first]
            for k in range(1, K + 1):
                t = tiers[k - 1]
                sel = dep.tier[aps] == k
                if not t.contends or not np.any(sel):
                    continue
                ap_k = aps[sel]
                if dep.window.boundary is BoundaryMode.TRUNCATION:
                    inner = np.hypot(dep.x[ap_k], dep.y[ap_k]) <= dep.window.radius - guard
                else:
                    inner = np.ones(len(ap_k), dtype=bool)
                ap_k = ap_k[inner]
                rk = r_star[sel][inner]
                wk = w_all[ap_k]
                n = len(ap_k)
                if n == 0:
                    continue
                cnt[k - 1] += n
                for m in range(1, K + 1):
                    if _exclusion_applies(k, m, K, mode):
                        wm = _draw_weights(gen, tiers[m - 1], policy, channel, n)
                        rd = rk * (wm / wk) ** (1.0 / alpha)
                        a = t.sensing_area - lens_area(t.sensing_radius, rd, rk)
                    else:
                        a = np.full(n, t.sensing_area)
                    sums[k - 1, m - 1] += a.sum()
                    sq[k - 1, m - 1] += (a * a).sum()
    table = _full_table(tiers, mode, "monte-carlo")
    areas = table.areas.copy()
    err = np.zeros((K, K))
    for k in range(K):
        if cnt[k] > 0:
            mean = sums[k] / cnt[k]
            var = np.maximum(sq[k] / cnt[k] - mean ** 2, 0.0)
            areas[k] = mean
            err[k] = np.sqrt(var / max(cnt[k] - 1, 1))
    return MeanAreaTable(areas, err, cnt, mode, "monte-carlo")


def _draw_weights(gen, tier: TierSpec, policy: AssociationPolicy, channel: ChannelParams, n: int):
    if policy.scheme is Scheme.BNA:
        return np.full(n, policy.bias[tier.index - 1])
    s = channel.sigma_ln
    return tier.power * (np.exp(gen.normal(0.0, s, n)) if s > 0 else np.ones(n))


def mean_areas_semi_analytic(tiers: Sequence[TierSpec], policy: AssociationPolicy,
                             channel: ChannelParams, nodes: int = 24) -> MeanAreaTable:
    """Mean contention areas by quadrature over the user-centric serving geometry.

    Seen from a typical user, the serving AP's weighted distance is Rayleigh
    with the eligible transformed mass, independent of its tier, and the
    serving AP's weight is the tier's weight law tilted by ``w^(2/alpha)``.
    The exclusion disk for tier m then has radius ``r~ W_m^(1/alpha)`` and
    sits at distance ``r~ W*^(1/alpha)`` from the AP.
    """
    K = len(tiers)
    mode = policy.mode
    alpha = channel.alpha
    z = 2.0 / alpha
    s = channel.sigma_ln
    xs, ws = np.polynomial.hermite.hermgauss(nodes)
    ws = ws / math.sqrt(math.pi)
    # Rayleigh radius through Gauss-Laguerre in u = pi*Lambda*r^2 ~ Exp(1)
    lu, lw = np.polynomial.laguerre.laggauss(2 * nodes)
    areas = _full_table(tiers, mode, "semi-analytic").areas.copy()
    for k in range(1, K + 1):
        tk = tiers[k - 1]
        if not tk.contends:
            continue
        pop = "U" if (mode is Mode.NONCROSSING and k == K) else "L"
        elig = eligible_tiers(pop, K, mode)
        lam = sum(tiers[j - 1].intensity * weight_moment(tiers[j - 1], policy, channel, z) for j in elig)
        if lam <= 0:
            continue
        rt = np.sqrt(lu / (math.pi * lam))
        if policy.scheme is Scheme.BNA or s == 0:
            wstar = np.array([_const_weight(tk, policy)])
            wsw = np.array([1.0])
        else:
            wstar = tk.power * np.exp(math.sqrt(2.0) * s * xs + z * s * s)   # tilted log-normal
            wsw = ws
        for m in range(1, K + 1):
            if not _exclusion_applies(k, m, K, mode):
                continue
            tm = tiers[m - 1]
            if policy.scheme is Scheme.BNA or s == 0:
                wm = np.array([_const_weight(tm, policy)])
                wmw = np.array([1.0])
            else:
                wm = tm.power * np.exp(math.sqrt(2.0) * s * xs)
                wmw = ws
            R = rt[:, None, None]
            d = R * wstar[None, :, None] ** (1.0 / alpha)
            rd = R * wm[None, None, :] ** (1.0 / alpha)
            a = tk.sensing_area - lens_area(tk.sensing_radius, rd, d)
            areas[k - 1, m - 1] = float(np.einsum("i,j,k,ijk->", lw, wsw, wmw, a))
    K_ = len(tiers)
    return MeanAreaTable(areas, np.zeros((K_, K_)), np.zeros(K_, dtype=np.int64), mode, "semi-analytic")


def _const_weight(t: TierSpec, policy: AssociationPolicy) -> float:
    return policy.bias[t.index - 1] if policy.scheme is Scheme.BNA else t.power


# ----------------------------------------------------------- hard-core check

@dataclass(frozen=True)
class ThinningReport:
    radius: float
    observed_pairs: int
    expected_pairs: float
    ratio: float
    sufficient: bool
    outcomes: int


def verify_mhpp_thinning(outcomes: Sequence[ContentionOutcome], tiers: Sequence[TierSpec],
                         radius: float | None = None, min_expected: float = 10.0) -> ThinningReport:
    """Granted-granted pair count below ``radius`` relative to uniformly placed points.

    The reference is the same number of granted APs placed independently and
    uniformly on the window, so a ratio near 1 means no repulsion and a ratio
    well below 1 shows the hard-core thinning.  ``radius`` defaults to half
    the smallest sensing radius among contending tiers.
    """
    if radius is None:
        radius = 0.5 * min(t.sensing_radius for t in tiers if t.contends)
    obs = 0
    exp = 0.0
    cache: dict[tuple, float] = {}
    for o in outcomes:
        g = np.flatnonzero(o.granted)
        n = len(g)
        if n < 2:
            continue
        key = (o.window_radius, o.torus)
        if key not in cache:
            if o.torus:
                cache[key] = min(math.pi * radius ** 2 / (2 * o.window_radius) ** 2, 1.0)
            else:
                cache[key] = disk_pair_distance_cdf(radius, o.window_radius)
        exp += n * (n - 1) / 2.0 * cache[key]
        period = 2 * o.window_radius if o.torus else 0.0
        obs += _kernels.count_pairs(o.x[g], o.y[g], radius, o.window_radius, period)
    ratio = obs / exp if exp > 0 else math.nan
    return ThinningReport(radius, obs, exp, ratio, exp >= min_expected, len(outcomes))
