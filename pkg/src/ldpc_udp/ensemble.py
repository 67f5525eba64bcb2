"""Code ensembles, protection modes, channel parameters, and shared scalar bookkeeping.

A regular (dv, dc) ensemble is augmented with the structure parameter x: every
check node is adjacent to exactly x reliable variable nodes (the parity bits,
which may see a cleaner channel than the message bits).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass


class ProtectionMode(enum.Enum):
    UNIFORM = "uniform"
    UDP = "udp"
    DOPING = "doping"


@dataclass(frozen=True)
class EnsembleSpec:
    """Regular (dv, dc) LDPC ensemble with x reliable VNs per CN.

    dv >= 3 (no degree-2 variable nodes), dc > dv (positive design rate),
    1 <= x <= dc - 2. When x is omitted it defaults to dv, clamped to dc - 2
    for the degenerate dc = dv + 1 case.
    """

    dv: int
    dc: int
    x: int = -1

    def __post_init__(self):
        if self.dv < 3:
            raise ValueError(f"dv must be >= 3, got {self.dv}")
        if self.dc <= self.dv:
            raise ValueError(f"dc must exceed dv, got ({self.dv},{self.dc})")
        if self.x == -1:
            object.__setattr__(self, "x", min(self.dv, self.dc - 2))
        if not 1 <= self.x <= self.dc - 2:
            raise ValueError(f"x must lie in [1, dc-2], got x={self.x} for dc={self.dc}")


@dataclass(frozen=True)
class ChannelSpec:
    """Crossover probabilities: p for regular (message) bits, pbar for reliable bits."""

    p: float
    pbar: float

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise ValueError(f"p must be in [0, 0.5), got {self.p}")
        if not 0.0 <= self.pbar < 0.5:
            raise ValueError(f"pbar must be in [0, 0.5), got {self.pbar}")

    @classmethod
    def for_mode(cls, mode: ProtectionMode, p: float, pbar: float | None = None) -> "ChannelSpec":
        if mode is ProtectionMode.UNIFORM:
            return cls(p, p)
        if mode is ProtectionMode.DOPING:
            return cls(p, 0.0)
        if pbar is None:
            raise ValueError("UDP mode needs an explicit pbar")
        if pbar > p:
            raise ValueError(f"UDP requires pbar <= p, got pbar={pbar} > p={p}")
        return cls(p, pbar)


def design_rate(spec: EnsembleSpec) -> float:
    """Design rate R = 1 - dv/dc of the regular ensemble."""
    return 1.0 - spec.dv / spec.dc


def average_crossover(p: float, pbar: float, rate: float) -> float:
    """Codeword-average crossover probability pbar*(1-R) + p*R."""
    return pbar * (1.0 - rate) + p * rate


def threshold_gain(p_protected: float, p_uniform: float) -> float:
    """Signed percentage threshold gain of a protected setup over uniform."""
    if p_uniform == 0.0:
        raise ZeroDivisionError("uniform threshold is zero")
    return (p_protected - p_uniform) / p_uniform * 100.0


def table_round(value: float, digits: int = 4) -> float:
    """Round as published tables do before comparing or computing gains."""
    return round(value, digits)


def spec_to_dict(spec: EnsembleSpec) -> dict:
    return {"dv": spec.dv, "dc": spec.dc, "x": spec.x}


def spec_from_dict(d: dict) -> EnsembleSpec:
    return EnsembleSpec(dv=int(d["dv"]), dc=int(d["dc"]), x=int(d.get("x", -1)))


def channel_to_dict(mode: ProtectionMode, ch: ChannelSpec) -> dict:
    return {"mode": mode.value, "p": ch.p, "pbar": ch.pbar}


def channel_from_dict(d: dict) -> tuple[ProtectionMode, ChannelSpec]:
    mode = ProtectionMode(d["mode"])
    return mode, ChannelSpec(float(d["p"]), float(d["pbar"]))


def dumps(spec: EnsembleSpec, mode: ProtectionMode, ch: ChannelSpec) -> str:
    return json.dumps({**spec_to_dict(spec), **channel_to_dict(mode, ch)})


def loads(s: str) -> tuple[EnsembleSpec, ProtectionMode, ChannelSpec]:
    d = json.loads(s)
    mode, ch = channel_from_dict(d)
    return spec_from_dict(d), mode, ch
