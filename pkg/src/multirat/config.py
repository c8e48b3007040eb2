"""Static scenario description: tiers, channel parameters, observation window."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class ConfigError(ValueError):
    """Invalid scenario or parameter combination."""


class Rat(str, Enum):
    LICENSED = "L"   # licensed-band primary, may open an unlicensed carrier opportunistically
    UNLICENSED = "U"  # unlicensed-only tier (the last tier)


class BoundaryMode(str, Enum):
    TRUNCATION = "truncation"
    TORUS = "torus"


class Scheme(str, Enum):
    MMPA = "mmpa"
    BNA = "bna"


class Mode(str, Enum):
    NONCROSSING = "noncrossing"
    CROSSING = "crossing"


NEVER = math.inf  # backoff window sentinel for tiers that never contend


@dataclass(frozen=True)
class TierSpec:
    index: int
    intensity: float
    power: float
    max_backoff: float = NEVER
    sensing_radius: float = 30.0
    rat: Rat = Rat.LICENSED

    def __post_init__(self):
        object.__setattr__(self, "rat", Rat(self.rat))
        if self.index < 1:
            raise ConfigError(f"tier index must be >= 1, got {self.index}")
        if not self.intensity >= 0 or not math.isfinite(self.intensity):
            raise ConfigError(f"tier {self.index}: intensity must be finite and >= 0")
        if not self.power > 0:
            raise ConfigError(f"tier {self.index}: power must be > 0")
        if not self.max_backoff >= 0:
            raise ConfigError(f"tier {self.index}: max_backoff must be >= 0 or never")
        if self.contends and not self.sensing_radius > 0:
            raise ConfigError(f"tier {self.index}: sensing_radius must be > 0 for a contending tier")

    @property
    def contends(self) -> bool:
        return math.isfinite(self.max_backoff)

    @property
    def sensing_area(self) -> float:
        return math.pi * self.sensing_radius ** 2


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = 4.0
    shadowing_db: float = math.sqrt(3.0)
    gain_threshold: float = 4.481
    sir_threshold: float = 0.5

    def __post_init__(self):
        if not self.alpha > 2:
            raise ConfigError(f"alpha > 2 required, got {self.alpha}")
        if not self.gain_threshold > 0:
            raise ConfigError("gain_threshold (Delta) must be > 0")
        if not self.sir_threshold > 0:
            raise ConfigError("sir_threshold (theta) must be > 0")
        if not self.shadowing_db >= 0:
            raise ConfigError("shadowing_db must be >= 0")

    @property
    def sigma_ln(self) -> float:
        """Standard deviation of ln G for G log-normal with dB spread ``shadowing_db``."""
        return self.shadowing_db * math.log(10.0) / 10.0

    @property
    def delta_exp(self) -> float:
        """The exponent 2/alpha that recurs in every transformed-distance formula."""
        return 2.0 / self.alpha


@dataclass(frozen=True)
class Window:
    radius: float
    boundary: BoundaryMode = BoundaryMode.TRUNCATION

    def __post_init__(self):
        object.__setattr__(self, "boundary", BoundaryMode(self.boundary))
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ConfigError(f"window radius must be finite and > 0, got {self.radius}")

    @property
    def area(self) -> float:
        if self.boundary is BoundaryMode.TORUS:
            return (2.0 * self.radius) ** 2
        return math.pi * self.radius ** 2

    @property
    def period(self) -> float:
        """Side of the wrapping square in torus mode, 0 for truncation."""
        return 2.0 * self.radius if self.boundary is BoundaryMode.TORUS else 0.0


@dataclass(frozen=True)
class AssociationPolicy:
    scheme: Scheme = Scheme.MMPA
    mode: Mode = Mode.NONCROSSING
    bias: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.scheme is Scheme.BNA:
            if self.bias is None:
                raise ConfigError("BNA requires per-tier bias weights")
            if any(not b > 0 for b in self.bias):
                raise ConfigError("BNA bias weights must be > 0")
            object.__setattr__(self, "bias", tuple(float(b) for b in self.bias))


@dataclass(frozen=True)
class NetworkConfig:
    tiers: tuple[TierSpec, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)

    def __post_init__(self):
        tiers = tuple(self.tiers)
        object.__setattr__(self, "tiers", tiers)
        validate_tiers(tiers)

    @property
    def K(self) -> int:
        return len(self.tiers)

    @property
    def licensed(self) -> tuple[TierSpec, ...]:
        return self.tiers[:-1]

    @property
    def unlicensed(self) -> TierSpec:
        return self.tiers[-1]


def validate_tiers(tiers: Sequence[TierSpec]) -> None:
    if len(tiers) == 0:
        raise ConfigError("at least one tier is required")
    for pos, t in enumerate(tiers, start=1):
        if t.index != pos:
            raise ConfigError(f"tier indices must be 1..K in order; position {pos} has index {t.index}")
    u_tiers = [t.index for t in tiers if t.rat is Rat.UNLICENSED]
    if u_tiers != [len(tiers)]:
        raise ConfigError("exactly one tier must be unlicensed-only and it must be the last tier")
