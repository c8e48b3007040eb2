"""Scenario files and built-in presets.

A scenario is a YAML mapping::

    name: my-run
    channel: {alpha: 4, shadowing_db: 1.732, gain_threshold: 4.481, sir_threshold: 0.5}
    tiers:
      - {intensity: 1.0e-6, power: 40}
      - {intensity: 1.0e-5, power: 1, max_backoff: 2, sensing_radius: 30}
      - {intensity: 1.0e-4, power: 0.2, max_backoff: 1, sensing_radius: 30, rat: U}
    association: {scheme: mmpa, mode: noncrossing}
    users:
      sweep: [0.1, 1, 10]      # user-to-reference intensity ratios
      reference_tier: 2        # or reference_intensity: 5.0e-5
      share: {L: 1, U: 1}      # mu_pop = ratio * lambda_ref * share[pop]
    simulation: {trials: 500, seed: 1, window: auto}
    output: {metrics: [coverage, capacity]}

``max_backoff`` accepts ``never`` (the default) for tiers that stay off the
unlicensed band.  In crossing mode the populations are pooled, so the total
user intensity is the sum over shares.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .config import (AssociationPolicy, BoundaryMode, ChannelParams, ConfigError, NetworkConfig,
                     Rat, TierSpec)

METRIC_FAMILIES = ("void", "access", "coverage", "capacity")
AREA_SOURCES = ("monte-carlo", "semi-analytic")


class ScenarioError(ConfigError):
    """Scenario file problem, with the offending field and line when known."""


@dataclass(frozen=True)
class UserSpec:
    sweep: tuple[float, ...]
    share: Mapping[str, float]
    reference_tier: int | None = None
    reference_intensity: float | None = None

    def reference(self, config: NetworkConfig) -> float:
        if self.reference_intensity is not None:
            return self.reference_intensity
        return config.tiers[self.reference_tier - 1].intensity

    def intensities(self, config: NetworkConfig, ratio: float) -> dict[str, float]:
        ref = self.reference(config)
        return {p: ratio * ref * s for p, s in sorted(self.share.items()) if s > 0}


@dataclass(frozen=True)
class SimulationSpec:
    trials: int = 500
    seed: int = 1
    window: float | str = "auto"
    boundary: BoundaryMode = BoundaryMode.TRUNCATION
    guard_quantile: float = 0.99
    areas: str | tuple[tuple[float, ...], ...] = "monte-carlo"
    area_deployments: int = 20
    void_model: str = "correlated"
    gamma_max: float = 1e6
    window_tolerance: float = 1e-3


@dataclass(frozen=True)
class Scenario:
    name: str
    config: NetworkConfig
    policy: AssociationPolicy
    users: UserSpec
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    metrics: tuple[str, ...] = ("coverage",)
    timing: bool = False
    description: str = ""

    def with_overrides(self, trials=None, seed=None, mode=None, metrics=None) -> "Scenario":
        d = scenario_to_dict(self)
        if trials is not None:
            d["simulation"]["trials"] = trials
        if seed is not None:
            d["simulation"]["seed"] = seed
        if mode is not None:
            d["association"]["mode"] = mode
        if metrics is not None:
            d["output"]["metrics"] = list(metrics)
        return scenario_from_dict(d)


# --------------------------------------------------------------- YAML with lines

class _LineMap(dict):
    lines: dict


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _LineMap()
    out.lines = {}
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        out[key] = loader.construct_object(v_node, deep=True)
        out.lines[key] = k_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


class _Ctx:
    """Field-path bookkeeping for error messages."""

    def __init__(self, source: str):
        self.source = source

    def fail(self, path: str, msg: str, mapping=None, key=None):
        line = None
        if isinstance(mapping, _LineMap) and key in mapping.lines:
            line = mapping.lines[key]
        where = f"{self.source}:{line}" if line else self.source
        raise ScenarioError(f"{where}: {path}: {msg}")


def _get(ctx, d, key, path, kind, default=..., allowed=None):
    if not isinstance(d, Mapping):
        ctx.fail(path, "expected a mapping")
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is ...:
            ctx.fail(full, "missing required field")
        return default
    v = d[key]
    try:
        if kind is float:
            if isinstance(v, str) and v.lower() in ("never", "inf", "infinity"):
                v = math.inf
            if isinstance(v, bool):
                raise TypeError
            v = float(v)
        elif kind is int:
            if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
                raise TypeError
            v = int(v)
        elif kind is str:
            if not isinstance(v, str):
                raise TypeError
    except (TypeError, ValueError):
        ctx.fail(full, f"expected {kind.__name__}, got {v!r}", d, key)
    if allowed is not None and v not in allowed:
        ctx.fail(full, f"must be one of {list(allowed)}, got {v!r}", d, key)
    return v


def _fail_on_field(ctx, exc, d, path, fields, parent, parent_key):
    """Re-raise a validation error at the field its message names, else at the block."""
    msg = str(exc)
    for f in fields:
        if f in msg and isinstance(d, Mapping) and f in d:
            ctx.fail(f"{path}.{f}", msg, d, f)
    ctx.fail(path, msg, parent, parent_key)


def _unknown(ctx, d, path, known):
    extra = [k for k in d if k not in known]
    if extra:
        ctx.fail(f"{path}.{extra[0]}" if path else str(extra[0]), "unknown field", d, extra[0])


def scenario_from_dict(d: Mapping[str, Any], source: str = "<scenario>") -> Scenario:
    ctx = _Ctx(source)
    if not isinstance(d, Mapping):
        ctx.fail("<root>", "scenario must be a mapping")
    _unknown(ctx, d, "", {"name", "description", "channel", "tiers", "association", "users",
                          "simulation", "output"})
    name = _get(ctx, d, "name", "", str, "scenario")

    ch = d.get("channel", {}) or {}
    _unknown(ctx, ch, "channel", {"alpha", "shadowing_db", "gain_threshold", "sir_threshold"})
    chd = ChannelParams()
    try:
        channel = ChannelParams(_get(ctx, ch, "alpha", "channel", float, chd.alpha),
                                _get(ctx, ch, "shadowing_db", "channel", float, chd.shadowing_db),
                                _get(ctx, ch, "gain_threshold", "channel", float, chd.gain_threshold),
                                _get(ctx, ch, "sir_threshold", "channel", float, chd.sir_threshold))
    except ScenarioError:
        raise
    except ConfigError as exc:
        _fail_on_field(ctx, exc, ch, "channel", ("alpha", "shadowing_db", "gain_threshold", "sir_threshold"),
                       d, "channel")

    raw_tiers = d.get("tiers")
    if not isinstance(raw_tiers, list) or not raw_tiers:
        ctx.fail("tiers", "expected a non-empty list of tiers", d, "tiers")
    tiers = []
    for i, t in enumerate(raw_tiers):
        p = f"tiers[{i}]"
        if not isinstance(t, Mapping):
            ctx.fail(p, "expected a mapping", d, "tiers")
        _unknown(ctx, t, p, {"intensity", "power", "max_backoff", "sensing_radius", "rat"})
        try:
            tiers.append(TierSpec(i + 1, _get(ctx, t, "intensity", p, float), _get(ctx, t, "power", p, float),
                                  _get(ctx, t, "max_backoff", p, float, math.inf),
                                  _get(ctx, t, "sensing_radius", p, float, 30.0),
                                  Rat(_get(ctx, t, "rat", p, str, "L", allowed=("L", "U")))))
        except ScenarioError:
            raise
        except ConfigError as exc:
            _fail_on_field(ctx, exc, t, p, ("intensity", "power", "max_backoff", "sensing_radius"), d, "tiers")
    try:
        config = NetworkConfig(tuple(tiers), channel)
    except ConfigError as exc:
        ctx.fail("tiers", str(exc), d, "tiers")

    a = d.get("association", {}) or {}
    _unknown(ctx, a, "association", {"scheme", "mode", "bias"})
    bias = a.get("bias")
    try:
        policy = AssociationPolicy(_get(ctx, a, "scheme", "association", str, "mmpa", ("mmpa", "bna")),
                                   _get(ctx, a, "mode", "association", str, "noncrossing",
                                        ("noncrossing", "crossing")),
                                   tuple(bias) if bias is not None else None)
    except ScenarioError:
        raise
    except (ConfigError, TypeError) as exc:
        ctx.fail("association", str(exc), d, "association")
    if policy.bias is not None and len(policy.bias) != config.K:
        ctx.fail("association.bias", f"expected {config.K} entries", a, "bias")

    u = d.get("users")
    if u is None:
        ctx.fail("users", "missing required field")
    _unknown(ctx, u, "users", {"sweep", "reference_tier", "reference_intensity", "share"})
    sweep = u.get("sweep")
    if not isinstance(sweep, list) or not sweep:
        ctx.fail("users.sweep", "expected a non-empty list", u, "sweep")
    try:
        sweep = tuple(float(v) for v in sweep)
    except (TypeError, ValueError):
        ctx.fail("users.sweep", "entries must be numbers", u, "sweep")
    if any(not (v > 0 and math.isfinite(v)) for v in sweep):
        ctx.fail("users.sweep", "entries must be finite and > 0", u, "sweep")
    if any(b <= a_ for a_, b in zip(sweep, sweep[1:])):
        ctx.fail("users.sweep", "must be strictly increasing", u, "sweep")
    rt = _get(ctx, u, "reference_tier", "users", int, None)
    ri = _get(ctx, u, "reference_intensity", "users", float, None)
    if (rt is None) == (ri is None):
        ctx.fail("users", "give exactly one of reference_tier or reference_intensity", d, "users")
    if rt is not None and not 1 <= rt <= config.K:
        ctx.fail("users.reference_tier", f"must be in 1..{config.K}", u, "reference_tier")
    if ri is not None and not ri > 0:
        ctx.fail("users.reference_intensity", "must be > 0", u, "reference_intensity")
    share_raw = u.get("share", {"L": 1.0, "U": 1.0})
    if not isinstance(share_raw, Mapping):
        ctx.fail("users.share", "expected a mapping", u, "share")
    _unknown(ctx, share_raw, "users.share", {"L", "U"})
    share = {p: _get(ctx, share_raw, p, "users.share", float, 0.0) for p in ("L", "U")}
    if any(v < 0 for v in share.values()) or sum(share.values()) <= 0:
        ctx.fail("users.share", "shares must be >= 0 with a positive total", u, "share")
    users = UserSpec(sweep, share, rt, ri)

    s = d.get("simulation", {}) or {}
    _unknown(ctx, s, "simulation", set(SimulationSpec.__dataclass_fields__))
    sd = SimulationSpec()
    window = s.get("window", sd.window)
    if window != "auto":
        window = _get(ctx, s, "window", "simulation", float)
        if not (window > 0 and math.isfinite(window)):
            ctx.fail("simulation.window", "must be 'auto' or a finite radius > 0", s, "window")
    areas = s.get("areas", sd.areas)
    if isinstance(areas, list):
        try:
            areas = tuple(tuple(float(x) for x in row) for row in areas)
        except (TypeError, ValueError):
            ctx.fail("simulation.areas", "expected a K x K table of numbers", s, "areas")
        if len(areas) != config.K or any(len(r) != config.K for r in areas):
            ctx.fail("simulation.areas", f"expected a {config.K} x {config.K} table", s, "areas")
    elif areas not in AREA_SOURCES:
        ctx.fail("simulation.areas", f"must be one of {list(AREA_SOURCES)} or a table", s, "areas")
    sim = SimulationSpec(
        trials=_get(ctx, s, "trials", "simulation", int, sd.trials),
        seed=_get(ctx, s, "seed", "simulation", int, sd.seed),
        window=window,
        boundary=BoundaryMode(_get(ctx, s, "boundary", "simulation", str, sd.boundary.value,
                                   ("truncation", "torus"))),
        guard_quantile=_get(ctx, s, "guard_quantile", "simulation", float, sd.guard_quantile),
        areas=areas,
        area_deployments=_get(ctx, s, "area_deployments", "simulation", int, sd.area_deployments),
        void_model=_get(ctx, s, "void_model", "simulation", str, sd.void_model,
                        ("correlated", "independent")),
        gamma_max=_get(ctx, s, "gamma_max", "simulation", float, sd.gamma_max),
        window_tolerance=_get(ctx, s, "window_tolerance", "simulation", float, sd.window_tolerance),
    )
    if sim.trials < 1:
        ctx.fail("simulation.trials", "must be >= 1", s, "trials")
    if sim.seed < 0:
        ctx.fail("simulation.seed", "must be >= 0", s, "seed")
    if not 0 < sim.guard_quantile < 1:
        ctx.fail("simulation.guard_quantile", "must be in (0, 1)", s, "guard_quantile")
    if not 0 < sim.window_tolerance < 1:
        ctx.fail("simulation.window_tolerance", "must be in (0, 1)", s, "window_tolerance")
    if sim.area_deployments < 1:
        ctx.fail("simulation.area_deployments", "must be >= 1", s, "area_deployments")

    o = d.get("output", {}) or {}
    _unknown(ctx, o, "output", {"metrics", "timing"})
    metrics = o.get("metrics", ["coverage"])
    if isinstance(metrics, str):
        metrics = [m.strip() for m in metrics.split(",") if m.strip()]
    if not isinstance(metrics, list) or not metrics:
        ctx.fail("output.metrics", "expected a non-empty list", o, "metrics")
    for m in metrics:
        if m not in METRIC_FAMILIES:
            ctx.fail("output.metrics", f"unknown metric family {m!r}; choose from {list(METRIC_FAMILIES)}",
                     o, "metrics")
    timing = o.get("timing", False)
    if not isinstance(timing, bool):
        ctx.fail("output.timing", "expected true or false", o, "timing")
    return Scenario(name, config, policy, users, sim, tuple(dict.fromkeys(metrics)), timing,
                    str(d.get("description", "")))


def _num(v: float):
    if math.isinf(v):
        return "never"
    return int(v) if float(v).is_integer() and abs(v) < 1e15 else v


def scenario_to_dict(sc: Scenario) -> dict:
    """Plain-data dump that :func:`scenario_from_dict` reads back to an equal scenario."""
    tiers = []
    for t in sc.config.tiers:
        e = {"intensity": t.intensity, "power": _num(t.power)}
        if t.contends:
            e["max_backoff"] = _num(t.max_backoff)
            e["sensing_radius"] = _num(t.sensing_radius)
        if t.rat is Rat.UNLICENSED:
            e["rat"] = "U"
        tiers.append(e)
    ch = sc.config.channel
    users: dict = {"sweep": list(sc.users.sweep), "share": dict(sc.users.share)}
    if sc.users.reference_tier is not None:
        users["reference_tier"] = sc.users.reference_tier
    else:
        users["reference_intensity"] = sc.users.reference_intensity
    sim = sc.simulation
    areas = sim.areas if isinstance(sim.areas, str) else [list(r) for r in sim.areas]
    assoc: dict = {"scheme": sc.policy.scheme.value, "mode": sc.policy.mode.value}
    if sc.policy.bias is not None:
        assoc["bias"] = list(sc.policy.bias)
    return {
        "name": sc.name,
        "description": sc.description,
        "channel": {"alpha": ch.alpha, "shadowing_db": ch.shadowing_db,
                    "gain_threshold": ch.gain_threshold, "sir_threshold": ch.sir_threshold},
        "tiers": tiers,
        "association": assoc,
        "users": users,
        "simulation": {"trials": sim.trials, "seed": sim.seed, "window": sim.window,
                       "boundary": sim.boundary.value, "guard_quantile": sim.guard_quantile,
                       "areas": areas, "area_deployments": sim.area_deployments,
                       "void_model": sim.void_model, "gamma_max": sim.gamma_max,
                       "window_tolerance": sim.window_tolerance},
        "output": {"metrics": list(sc.metrics), "timing": sc.timing},
    }


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


# ------------------------------------------------------------------ presets

SQRT3 = math.sqrt(3.0)
_LAMBDA1 = 1.0e-6


def _table_tiers():
    return [
        {"intensity": _LAMBDA1, "power": 40},
        {"intensity": 10 * _LAMBDA1, "power": 1, "max_backoff": 2, "sensing_radius": 30},
        {"intensity": 50 * _LAMBDA1, "power": 0.5, "max_backoff": 2, "sensing_radius": 30},
        {"intensity": 100 * _LAMBDA1, "power": 0.2, "max_backoff": 1, "sensing_radius": 30, "rat": "U"},
    ]


def _base(name, description, mode, sweep, reference_tier, metrics, trials, channel=None, tiers=None,
          **sim):
    return {
        "name": name,
        "description": description,
        "channel": channel or {"alpha": 4, "shadowing_db": SQRT3, "gain_threshold": 4.481,
                               "sir_threshold": 0.5},
        "tiers": tiers or _table_tiers(),
        "association": {"scheme": "mmpa", "mode": mode},
        "users": {"sweep": sweep, "reference_tier": reference_tier, "share": {"L": 1, "U": 1}},
        "simulation": {"trials": trials, "seed": 1, "window": "auto", **sim},
        "output": {"metrics": metrics},
    }


_FIG57_SWEEP = [0.1, 1.0, 10.0]

_PRESETS = {
    "fig1": _base(
        "fig1", "Void probability per tier, noncrossing MMPA, mu_L = mu_U, sweep mu_L / lambda_1. "
        "Desk scale: about 1 min.",
        "noncrossing", [10 ** 0.5, 10 ** 1.5, 10 ** 2.5], 1, ["void"], 200),
    "fig3": _base(
        "fig3", "Channel access probability with and without void flags, sweep mu_L / lambda_2. "
        "Gain threshold Delta = 1. Desk scale: about 1 min.",
        "noncrossing", [1.0, 10.0, 100.0], 2, ["void", "access"], 200,
        channel={"alpha": 4, "shadowing_db": SQRT3, "gain_threshold": 1.0, "sir_threshold": 0.5}),
    "fig5a": _base(
        "fig5a", "Link and coexisting coverage, noncrossing, mu_L = mu_U, sweep mu_L / lambda_3. "
        "Trials are per user population. Desk scale: about 2 min.",
        "noncrossing", _FIG57_SWEEP, 3, ["coverage"], 2500),
    "fig5b": _base(
        "fig5b", "Link and coexisting coverage, crossing, pooled mu = 2 mu_L, sweep mu_L / lambda_3. "
        "Desk scale: about 3 min.",
        "crossing", _FIG57_SWEEP, 3, ["coverage"], 5000),
    "fig6a": _base(
        "fig6a", "Mean spectrum efficiencies, noncrossing, mu_L = mu_U. Desk scale: about 1 min.",
        "noncrossing", _FIG57_SWEEP, 3, ["capacity"], 1000),
    "fig6b": _base(
        "fig6b", "Mean spectrum efficiencies, crossing, mu = 2 mu_L. Desk scale: about 1 min.",
        "crossing", _FIG57_SWEEP, 3, ["capacity"], 2000),
    "fig7a": _base(
        "fig7a", "Coexisting network capacity, noncrossing, mu_L = mu_U. Desk scale: about 1 min.",
        "noncrossing", _FIG57_SWEEP, 3, ["void", "coverage", "capacity"], 1000),
    "fig7b": _base(
        "fig7b", "Coexisting network capacity, crossing, mu = 2 mu_L. Desk scale: about 1 min.",
        "crossing", _FIG57_SWEEP, 3, ["void", "coverage", "capacity"], 2000),
}
_PRESETS["wifi-only-baseline"] = {
    **_base("wifi-only-baseline", "Unlicensed tier alone (no licensed APs), users mu_U = ratio * 5e-5 "
            "so the axis matches the fig5-7 sweeps. Desk scale: under 1 min.",
            "noncrossing", _FIG57_SWEEP, 1, ["coverage", "capacity"], 1000,
            tiers=[_table_tiers()[3]]),
    "users": {"sweep": _FIG57_SWEEP, "reference_intensity": 50 * _LAMBDA1, "share": {"L": 0, "U": 1}},
}

PRESET_NAMES = tuple(_PRESETS)


def preset_dict(name: str) -> dict:
    if name not in _PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return copy.deepcopy(_PRESETS[name])


def load_scenario(source: str | Path) -> Scenario:
    """Load a preset by name, or a YAML scenario file by path."""
    if isinstance(source, str) and source in _PRESETS:
        return scenario_from_dict(preset_dict(source), f"preset:{source}")
    path = Path(source)
    if not path.exists():
        if isinstance(source, str) and "/" not in source and not source.endswith((".yaml", ".yml")):
            raise ScenarioError(f"unknown preset {source!r}; available: {', '.join(PRESET_NAMES)}")
        raise FileNotFoundError(f"scenario file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ScenarioError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from exc
    return scenario_from_dict(data, str(path))
