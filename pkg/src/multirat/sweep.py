"""Sweep orchestration: Monte Carlo trials and analytic counterparts per sweep point, CSV output."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng as _rng
from .analytic import (BoundSet, CapacitySet, ModelInputs, access_probability, capacity_bounds,
                       coexisting_weights, coverage_bounds_crossing, coverage_bounds_noncrossing,
                       gain_threshold_probability)
from .association import (AssocStats, Estimate, analytic_void_probability, assoc_stats, associate,
                          binomial_estimate, guard_estimate)
from .config import ConfigError, Mode, Window
from .csma import MeanAreaTable, estimate_mean_areas, mean_areas_semi_analytic
from .ppp import choose_window_radius, sample_deployment
from .scenario import Scenario
from .sir import (Band, SimContext, TierCounts, TrialRecord, estimate_coexisting_coverage,
                  estimate_coverage, estimate_network_capacity, estimate_spectrum_efficiency,
                  simulate_trial)

log = logging.getLogger(__name__)

WORKERS_ENV = "MULTIRAT_WORKERS"
CSV_HEADER = ("sweep_value", "metric", "mc_estimate", "mc_stderr", "analytic_bound", "analytic_limit",
              "sample_count", "wall_time_s")
GUARD_WINDOW_FACTOR = 4.0   # auto window is at least this many edge guards wide
_AREA_KEY = 0xA12EA         # seed-key tag for the mean-area pilot deployments
_POP_INDEX = {"L": 0, "U": 1}


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    metric: str
    mc_estimate: float | None = None
    mc_stderr: float | None = None
    analytic_bound: float | None = None
    analytic_limit: float | None = None
    sample_count: int | None = None
    wall_time_s: float | None = None

    @property
    def failed(self) -> bool:
        return self.metric.startswith("FAILED")


def _clean(v):
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


def _row(x, metric, est: Estimate | None = None, bound=None, limit=None, n=None, wall=None) -> ResultRow:
    mc = se = None
    if est is not None:
        mc, se, n = _clean(est.value), _clean(est.stderr), est.n
    return ResultRow(float(x), metric, mc, se, _clean(bound), _clean(limit),
                     None if n is None else int(n), _clean(wall))


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


# ------------------------------------------------------------ geometry setup

def auto_window_radius(scenario: Scenario) -> float:
    """Window radius that bounds both the interference tail and the edge guard.

    The interference part measures distance in units of the mean nearest-AP
    spacing ``1/sqrt(pi sum lambda)``; the guard part keeps the interior
    region a sizeable fraction of the window.  The guard is taken over both
    association modes so that switching modes keeps the same window, and with
    it the same deployments for a given seed.
    """
    cfg = scenario.config
    lam = sum(t.intensity for t in cfg.tiers)
    r0 = 1.0 / math.sqrt(math.pi * lam)
    r_tail = choose_window_radius(cfg.tiers, cfg.channel.alpha, scenario.simulation.window_tolerance, r0)
    g = max(float(np.max(guard_estimate(cfg.tiers, replace(scenario.policy, mode=m), cfg.channel,
                                        scenario.simulation.guard_quantile))) for m in Mode)
    return max(r_tail, GUARD_WINDOW_FACTOR * g)


def scenario_window(scenario: Scenario) -> Window:
    sim = scenario.simulation
    radius = auto_window_radius(scenario) if sim.window == "auto" else float(sim.window)
    return Window(radius, sim.boundary)


def edge_guards(scenario: Scenario) -> tuple[np.ndarray, float]:
    """Per-tier void guard and the contention guard (largest void guard plus sensing radius)."""
    cfg = scenario.config
    if scenario.simulation.boundary.value == "torus":
        return np.zeros(cfg.K), 0.0
    g = guard_estimate(cfg.tiers, scenario.policy, cfg.channel, scenario.simulation.guard_quantile)
    rs = max((t.sensing_radius for t in cfg.tiers if t.contends), default=0.0)
    return g, float(g.max() + rs)


def mean_area_table(scenario: Scenario, users: dict, window: Window | None = None) -> MeanAreaTable:
    sim = scenario.simulation
    cfg = scenario.config
    if isinstance(sim.areas, tuple):
        K = cfg.K
        return MeanAreaTable(np.array(sim.areas, dtype=float), np.zeros((K, K)), np.zeros(K, dtype=np.int64),
                             scenario.policy.mode, "user")
    if sim.areas == "semi-analytic":
        return mean_areas_semi_analytic(cfg.tiers, scenario.policy, cfg.channel)
    window = window or scenario_window(scenario)
    _, guard = edge_guards(scenario)
    deps, maps = [], []
    for i in range(sim.area_deployments):
        d = sample_deployment(cfg.tiers, users, window, _rng.derive_seed(sim.seed, _AREA_KEY, i),
                              cfg.channel.shadowing_db)
        deps.append(d)
        maps.append(associate(d, cfg.tiers, scenario.policy, cfg.channel.alpha))
    return estimate_mean_areas(deps, maps, cfg.tiers, scenario.policy, cfg.channel,
                               seed=_rng.derive_seed(sim.seed, _AREA_KEY), guard=guard)


# ------------------------------------------------------------ analytic side

@dataclass(frozen=True)
class AnalyticPoint:
    stats: AssocStats
    nu: np.ndarray
    p: np.ndarray
    rho: np.ndarray
    rho_void_blind: np.ndarray
    inputs: ModelInputs
    areas: MeanAreaTable
    coverage: BoundSet | None
    capacity: CapacitySet | None
    user_share_l: float


def analytic_point(scenario: Scenario, users: dict, areas: MeanAreaTable, need_capacity: bool = True
                   ) -> AnalyticPoint:
    cfg = scenario.config
    ch = cfg.channel
    pol = scenario.policy
    K = cfg.K
    st = assoc_stats(cfg.tiers, pol, ch)
    nu = np.array([analytic_void_probability(cfg.tiers, pol, ch, users, k) for k in range(1, K + 1)])
    pk = gain_threshold_probability(ch.gain_threshold, ch.shadowing_db)
    p = np.array([pk if t.contends else 0.0 for t in cfg.tiers])
    rho = access_probability(cfg.tiers, areas.areas, nu, p, st.lambda_tilde)
    rho_blind = access_probability(cfg.tiers, areas.areas, np.zeros(K), p, st.lambda_tilde)
    inputs = ModelInputs(ch.alpha, ch.sigma_ln, nu, rho, p, st.theta, st.theta_hat,
                         np.array([t.intensity for t in cfg.tiers]), st.mass)
    theta = ch.sir_threshold
    share = scenario.users.share
    share_l = share.get("L", 0.0) / sum(share.values())
    crossing = pol.mode is Mode.CROSSING
    if crossing:
        cov = coverage_bounds_crossing(inputs, theta)
    else:
        cov = coverage_bounds_noncrossing(inputs, theta, user_share_l=share_l)
    cap = capacity_bounds(inputs, theta, pol.mode.value) if need_capacity else None
    return AnalyticPoint(st, nu, p, rho, rho_blind, inputs, areas, cov, cap, share_l)


# ------------------------------------------------------------ Monte Carlo side

def _trial_task(args):
    ctx, pop, seed = args
    return simulate_trial(ctx, pop, seed)


def run_trials(ctx: SimContext, tasks: Sequence[tuple[str, int]], workers: int = 1) -> list[TrialRecord]:
    """Run ``(population, seed)`` trials; result order matches ``tasks`` for any worker count."""
    if workers <= 1 or len(tasks) < 2:
        return [simulate_trial(ctx, pop, seed) for pop, seed in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_task, [(ctx, p, s) for p, s in tasks], chunksize=chunk))


def trial_tasks(scenario: Scenario, users: dict) -> list[tuple[str, int]]:
    """Trial keys; seeds do not depend on the sweep point or the association mode."""
    sim = scenario.simulation
    pops = ["L"] if scenario.policy.mode is Mode.CROSSING else [p for p in sorted(users) if users[p] > 0]
    if scenario.policy.mode is Mode.CROSSING and "L" not in users:
        pops = [sorted(users)[0]]
    return [(p, _rng.derive_seed(sim.seed, _POP_INDEX.get(p, 9), t)) for p in pops for t in range(sim.trials)]


@dataclass
class MonteCarloPoint:
    counts: TierCounts
    samples: list
    lu_attempted: int
    lu_accepted: int
    trials: int


def monte_carlo_point(scenario: Scenario, users: dict, window: Window, workers: int = 1) -> MonteCarloPoint:
    cfg = scenario.config
    vg, ag = edge_guards(scenario)
    ctx = SimContext(cfg, scenario.policy, window, users, void_guard=tuple(vg), access_guard=ag,
                     void_model=scenario.simulation.void_model,
                     count_void_blind="access" in scenario.metrics)
    recs = run_trials(ctx, trial_tasks(scenario, users), workers)
    counts = TierCounts.zeros(cfg.K)
    samples = []
    att = acc = 0
    for r in recs:
        counts = counts.merge(r.counts)
        samples.extend(r.samples)
        att += r.lu_attempted
        acc += r.lu_accepted
    return MonteCarloPoint(counts, samples, att, acc, len(recs))


def _product(a: Estimate, b: Estimate) -> Estimate:
    v = a.value * b.value
    se = math.sqrt((a.value * b.stderr) ** 2 + (b.value * a.stderr) ** 2)
    return Estimate(v, se, min(a.n, b.n))


def _granted_fraction(counts: TierCounts, k: int) -> Estimate:
    """Empirical rho_k p_k: the chance a non-void tier-k AP holds the unlicensed channel."""
    if counts.contending[k - 1] == 0:
        g = counts.gate_probability(k)
        return Estimate(0.0, 0.0, g.n) if g.n else Estimate(0.0, 0.0, 0)
    return _product(counts.access_probability(k), counts.gate_probability(k))


def point_rows(scenario: Scenario, x: float, ap: AnalyticPoint, mc: MonteCarloPoint | None,
               wall: float | None = None) -> list[ResultRow]:
    cfg = scenario.config
    K = cfg.K
    theta = cfg.channel.sir_threshold
    rows: list[ResultRow] = []
    fam = scenario.metrics

    def add(metric, est=None, bound=None, limit=None):
        rows.append(_row(x, metric, est, bound, limit, wall=wall))

    if "void" in fam:
        for k in range(1, K + 1):
            add(f"nu_{k}", mc.counts.void_probability(k) if mc else None, ap.nu[k - 1])
    if "access" in fam:
        for k in range(1, K + 1):
            if not cfg.tiers[k - 1].contends:
                continue
            add(f"rho_{k}", mc.counts.access_probability(k) if mc else None, ap.rho[k - 1])
            add(f"rho_{k}_void_blind", mc.counts.access_probability(k, False) if mc else None,
                ap.rho_void_blind[k - 1])
    cov = estimate_coverage(mc.samples, theta) if mc else {}
    weights = coexisting_weights(ap.inputs, scenario.policy.mode.value, ap.user_share_l)

    def band_est(b):
        return cov.get(b) if mc else None

    def p_cov_est():
        # per-serving-tier coverages weighted like the analytic combination
        nan = Estimate(math.nan, math.nan, 0)
        per = {k: cov.get((Band.UNLICENSED if k == K else Band.LICENSED, k), nan) for k in range(1, K + 1)}
        return estimate_coexisting_coverage(per, weights)

    if "coverage" in fam:
        b, lim = ap.coverage.bounds, ap.coverage.limits
        if K > 1:
            add("P_Ll", band_est(Band.LICENSED), b["P_Ll"], lim["P_Ll"])
            add("P_Lu", band_est(Band.LIC_UNLICENSED), b["P_Lu"], lim["P_Lu"])
        add("P_U", band_est(Band.UNLICENSED), b["P_U"], lim["P_U"])
        add("P_cov", p_cov_est() if mc else None, b["P_cov"], lim["P_cov"])
        if K > 1:
            add("lu_acceptance", binomial_estimate(mc.lu_accepted, mc.lu_attempted) if mc else None)
    if "capacity" in fam:
        b, lim = ap.capacity.bounds, ap.capacity.limits
        eff = cap = None
        if mc:
            theta_nc = ap.stats.theta
            frac_v = frac_var = 0.0
            for k in range(1, K):
                g = _granted_fraction(mc.counts, k)
                frac_v += theta_nc[k - 1] * g.value
                frac_var += (theta_nc[k - 1] * g.stderr) ** 2
            f = Estimate(frac_v, math.sqrt(frac_var), int(mc.counts.aps.sum()))
            eff = estimate_spectrum_efficiency(mc.samples, f, _granted_fraction(mc.counts, K),
                                               scenario.simulation.gamma_max)
            nonvoid = []
            for k in range(1, K + 1):
                v = mc.counts.void_probability(k)
                nonvoid.append(Estimate(1.0 - v.value, v.stderr, v.n) if v.n else Estimate(0.0, 0.0, 0))
            nan = Estimate(math.nan, math.nan, 0)
            cap = estimate_network_capacity([t.intensity for t in cfg.tiers], nonvoid,
                                            cov.get(Band.LICENSED, nan), cov.get(Band.UNLICENSED, nan),
                                            eff.C_L, eff.C_U)
        if K > 1:
            add("C_L", eff.C_L if eff else None, b["C_L"], lim["C_L"])
        add("C_U", eff.C_U if eff else None, b["C_U"], lim["C_U"])
        if eff:
            if K > 1:
                both = Estimate(eff.C_L.value + eff.C_U.value, math.hypot(eff.C_L.stderr, eff.C_U.stderr),
                                eff.C_L.n + eff.C_U.n)
            else:
                both = eff.C_U
        add("C_L+C_U", both if eff else None, b["C_L+C_U"], lim["C_L+C_U"])
        add("C_cov", cap, b["C_cov"], lim["C_cov"])
    return rows


# ------------------------------------------------------------------ sweep

def _failure_category(exc: BaseException) -> str:
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, OSError):
        return "io"
    return "runtime"


def evaluate_point(scenario: Scenario, x: float, simulate: bool = True, workers: int = 1) -> list[ResultRow]:
    t0 = time.perf_counter()
    users = scenario.users.intensities(scenario.config, x)
    window = scenario_window(scenario)
    need_areas = any(f in scenario.metrics for f in ("access", "coverage", "capacity"))
    if need_areas:
        areas = mean_area_table(scenario, users, window)
    else:
        areas = mean_areas_semi_analytic(scenario.config.tiers, scenario.policy, scenario.config.channel)
    ap = analytic_point(scenario, users, areas, need_capacity="capacity" in scenario.metrics)
    mc = monte_carlo_point(scenario, users, window, workers) if simulate else None
    wall = time.perf_counter() - t0 if scenario.timing else None
    return point_rows(scenario, x, ap, mc, wall)


def run_sweep(scenario: Scenario, simulate: bool = True, workers: int | None = None) -> list[ResultRow]:
    """All rows of a sweep, sorted by sweep value then metric name.

    A point that raises is reported as a single ``FAILED:<category>:<error>``
    row and the sweep continues.
    """
    workers = worker_count() if workers is None else workers
    rows: list[ResultRow] = []
    for x in scenario.users.sweep:
        try:
            rows.extend(evaluate_point(scenario, x, simulate, workers))
        except Exception as exc:  # noqa: BLE001 - reported per point by design
            msg = " ".join(str(exc).split())
            log.warning("sweep point %g failed: %s", x, msg)
            rows.append(ResultRow(float(x), f"FAILED:{_failure_category(exc)}:{type(exc).__name__}: {msg}"))
    return sort_rows(rows)


def sort_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.sweep_value, r.metric))


# -------------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".9g")


def format_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(r.sweep_value), r.metric, _fmt(r.mc_estimate), _fmt(r.mc_stderr),
                    _fmt(r.analytic_bound), _fmt(r.analytic_limit), _fmt(r.sample_count),
                    _fmt(r.wall_time_s)])
    return buf.getvalue()


def emit_csv(rows: Iterable[ResultRow], path: str | Path | None) -> None:
    """Write rows as UTF-8 CSV; ``None`` or ``"-"`` writes to standard output."""
    text = format_csv(rows)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")

    def num(s):
        return None if s == "" else float(s)

    rows = []
    for rec in reader:
        if len(rec) != len(CSV_HEADER):
            raise ValueError(f"expected {len(CSV_HEADER)} fields, got {len(rec)}")
        rows.append(ResultRow(float(rec[0]), rec[1], num(rec[2]), num(rec[3]), num(rec[4]), num(rec[5]),
                              None if rec[6] == "" else int(rec[6]), num(rec[7])))
    return rows


def read_csv(path: str | Path) -> list[ResultRow]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read CSV {path}: {exc.strerror or exc}") from exc
    return parse_csv(text)
