"""Marked Poisson deployments on a finite window."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import rng as _rng
from .config import BoundaryMode, ConfigError, TierSpec, Window, validate_tiers

DEFAULT_MAX_POINTS = 5_000_000


class WindowTooLargeError(ConfigError):
    """Expected point count exceeds the configured memory cap."""


@dataclass(frozen=True)
class MarkedPoint:
    """One AP with its marks, as a read-only view assembled on demand."""
    position: tuple[float, float]
    tier: int
    fading_l: float
    fading_u: float
    shadow_l_inv: float
    shadow_u_inv: float
    void: bool | None = None
    backoff: float | None = None
    access: str | None = None


@dataclass(frozen=True)
class Deployment:
    """A realised marked pattern: APs sorted by tier, plus user populations.

    AP marks are stored column-wise.  ``fading_u``/``shadow_u_inv`` are the
    unlicensed-band gains an AP sees toward its own scheduled receiver; they
    drive the contention gate.  ``shadow_l_inv`` is the primary-band shadowing
    toward the origin and enters the association weight.
    """
    window: Window
    seed: int
    tier_counts: tuple[int, ...]
    x: np.ndarray
    y: np.ndarray
    tier: np.ndarray
    fading_l: np.ndarray
    fading_u: np.ndarray
    shadow_l_inv: np.ndarray
    shadow_u_inv: np.ndarray
    users: Mapping[str, np.ndarray]

    @property
    def n_aps(self) -> int:
        return len(self.x)

    @property
    def K(self) -> int:
        return len(self.tier_counts)

    def tier_slice(self, k: int) -> slice:
        lo = sum(self.tier_counts[:k - 1])
        return slice(lo, lo + self.tier_counts[k - 1])

    def point(self, i: int, association=None, contention=None) -> MarkedPoint:
        void = None if association is None else bool(association.void[i])
        backoff = access = None
        if contention is not None:
            b = contention.backoff[i]
            backoff = None if np.isnan(b) else float(b)
            access = contention.access_label(i)
        return MarkedPoint((float(self.x[i]), float(self.y[i])), int(self.tier[i]),
                           float(self.fading_l[i]), float(self.fading_u[i]),
                           float(self.shadow_l_inv[i]), float(self.shadow_u_inv[i]),
                           void, backoff, access)


def sigma_ln(shadowing_db: float) -> float:
    return shadowing_db * math.log(10.0) / 10.0


def uniform_points(gen: np.random.Generator, n: int, window: Window) -> tuple[np.ndarray, np.ndarray]:
    R = window.radius
    if window.boundary is BoundaryMode.TORUS:
        return gen.uniform(-R, R, n), gen.uniform(-R, R, n)
    r = R * np.sqrt(gen.random(n))
    phi = 2.0 * math.pi * gen.random(n)
    return r * np.cos(phi), r * np.sin(phi)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def sample_deployment(tiers: Sequence[TierSpec], user_intensities: Mapping[str, float],
                      window: Window, seed: int, shadowing_db: float = math.sqrt(3.0),
                      max_points: float = DEFAULT_MAX_POINTS) -> Deployment:
    """Draw one marked deployment.

    AP tiers and each user population use their own random streams, so
    changing a user intensity leaves the AP pattern untouched for the same
    seed (common random numbers across sweep points and association modes).
    """
    validate_tiers(tiers)
    if any(v < 0 for v in user_intensities.values()):
        raise ConfigError("user intensities must be >= 0")
    area = window.area
    expected = area * (sum(t.intensity for t in tiers) + sum(user_intensities.values()))
    if expected > max_points:
        raise WindowTooLargeError(
            f"window too large: expected {expected:.3g} points exceeds cap {max_points:.3g}")
    s_ln = sigma_ln(shadowing_db)
    gen = _rng.stream(seed, _rng.APS)
    cols = {k: [] for k in ("x", "y", "tier", "hl", "hu", "gl", "gu")}
    counts = []
    for t in tiers:
        n = int(gen.poisson(t.intensity * area))
        counts.append(n)
        px, py = uniform_points(gen, n, window)
        cols["x"].append(px)
        cols["y"].append(py)
        cols["tier"].append(np.full(n, t.index, dtype=np.int64))
        cols["hl"].append(gen.exponential(1.0, n))
        cols["hu"].append(gen.exponential(1.0, n))
        cols["gl"].append(np.exp(gen.normal(0.0, s_ln, n)) if s_ln > 0 else np.ones(n))
        cols["gu"].append(np.exp(gen.normal(0.0, s_ln, n)) if s_ln > 0 else np.ones(n))
    cat = {k: (np.concatenate(v) if v else np.empty(0)) for k, v in cols.items()}
    users = {}
    for p, name in enumerate(sorted(user_intensities)):
        ug = _rng.stream(seed, _rng.USERS, p)
        n = int(ug.poisson(user_intensities[name] * area))
        ux, uy = uniform_points(ug, n, window)
        pts = np.column_stack([ux, uy]) if n else np.empty((0, 2))
        _freeze(pts)
        users[name] = pts
    tier_arr = cat["tier"].astype(np.int64)
    _freeze(cat["x"], cat["y"], tier_arr, cat["hl"], cat["hu"], cat["gl"], cat["gu"])
    return Deployment(window, int(seed), tuple(counts), cat["x"], cat["y"], tier_arr,
                      cat["hl"], cat["hu"], cat["gl"], cat["gu"], users)


def wrap_offset(d, window: Window):
    """Minimum-image offset along one axis (identity in truncation mode)."""
    if window.boundary is BoundaryMode.TORUS:
        L = window.period
        return d - L * np.floor(d / L + 0.5)
    return d


def distance(a, b, window: Window):
    """Euclidean distance, or minimal wrapped distance on the square [-R, R]^2 in torus mode."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dx = wrap_offset(b[..., 0] - a[..., 0], window)
    dy = wrap_offset(b[..., 1] - a[..., 1], window)
    return np.hypot(dx, dy)


def choose_window_radius(tiers: Sequence[TierSpec], alpha: float, tolerance: float,
                         inner_radius: float = 1.0) -> float:
    """Smallest disk radius whose interference tail is below ``tolerance`` times the in-disk part.

    With unit-mean marks the mean interference at the origin from APs in the
    annulus ``a < r < b`` is ``S * 2*pi*(a^(2-alpha) - b^(2-alpha))/(alpha-2)``
    where ``S = sum_k lambda_k P_k``.  Requiring
    ``tail(R) <= tolerance * annulus(inner_radius, R)`` gives the closed form

        R = inner_radius * ((1 + tolerance) / tolerance) ** (1 / (alpha - 2)),

    in which ``S`` cancels.  ``inner_radius`` defaults to 1 m.
    """
    if not alpha > 2:
        raise ConfigError(f"alpha > 2 required, got {alpha}")
    if not tolerance > 0:
        raise ConfigError("tolerance must be > 0")
    if not inner_radius > 0:
        raise ConfigError("inner_radius must be > 0")
    with np.errstate(over="ignore"):
        R = inner_radius * float(np.power((1.0 + tolerance) / tolerance, 1.0 / (alpha - 2.0)))
    if not math.isfinite(R) or R > 1e12:
        raise ConfigError(f"tolerance {tolerance:g} is not achievable with alpha={alpha:g} (R={R:g})")
    return R


def interference_tail(tiers: Sequence[TierSpec], alpha: float, radius: float) -> float:
    """Mean interference from APs beyond ``radius`` with unit-mean marks."""
    s = sum(t.intensity * t.power for t in tiers)
    return s * 2.0 * math.pi * radius ** (2.0 - alpha) / (alpha - 2.0)
