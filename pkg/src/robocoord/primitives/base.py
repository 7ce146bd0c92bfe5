from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

from ..geometry import Region
from ..net import ConfigError


@dataclass(frozen=True)
class Send:
    """Reliable unicast to one peer."""

    dst: int
    payload: dict[str, Any]


@dataclass(frozen=True)
class Geocast:
    payload: dict[str, Any]
    region: Region
    window: int


@dataclass(frozen=True)
class Timer:
    delay: int
    token: tuple


Effect = Union[Send, Geocast, Timer]


@dataclass
class TimingParams:
    """Timing constants of the primitives, in ms.

    ``d`` is the agreement window, ``d1`` the soundness window, ``d2`` the
    progress bound (also the failure timeout) and ``d3`` the uncontended
    access bound. ``t_announce``/``t_echo`` are the two registration rounds.
    """

    d: int = 400
    d1: int = 4800
    d2: int = 60_000
    d3: int = 1000
    t_announce: int = 800
    t_echo: int = 800

    def validate(self, prefix: str = "timing") -> None:
        for name in ("d", "d1", "d2", "d3", "t_announce", "t_echo"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{prefix}.{name}", f"must be a positive integer, got {v!r}")
        if not self.d3 < self.d2:
            raise ConfigError(f"{prefix}.d3", "must be smaller than d2")

    @classmethod
    def for_delay(cls, mean_delay: int) -> "TimingParams":
        m = max(1, int(mean_delay))
        rounds = 8 * m
        # a member heard in either round registered at most 4 announce + 2 echo periods before ts
        return cls(d=4 * m, d1=4 * rounds + 2 * rounds, d2=60_000, d3=10 * m, t_announce=rounds, t_echo=rounds)

    def to_dict(self) -> dict[str, int]:
        return {k: getattr(self, k) for k in ("d", "d1", "d2", "d3", "t_announce", "t_echo")}

    @classmethod
    def from_dict(cls, d: dict[str, Any], mean_delay: int = 100) -> "TimingParams":
        base = cls.for_delay(mean_delay).to_dict()
        base.update(d)
        return cls(**base)
