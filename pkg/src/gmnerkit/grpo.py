"""Group-relative advantages, reward-statistics filtering and the clipped surrogate."""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, fields
from typing import Sequence


def _check_group(rewards: Sequence[float]) -> list[float]:
    rewards = [float(r) for r in rewards]
    if not rewards:
        raise ValueError("a reward group needs at least one reward")
    if not all(math.isfinite(r) for r in rewards):
        raise ValueError(f"rewards must be finite: {rewards}")
    return rewards


def _pstdev(rewards: list[float]) -> float:
    # Rescale by a power of two (exact) so tiny spreads do not underflow to 0.
    m = max(abs(r) for r in rewards)
    if m == 0:
        return 0.0
    e = math.frexp(m)[1]
    return math.ldexp(statistics.pstdev([math.ldexp(r, -e) for r in rewards]), e)


@dataclass(frozen=True)
class GroupStats:
    mean: float
    std: float
    max: float
    median: float

    def to_dict(self) -> dict:
        return asdict(self)


def group_stats(rewards: Sequence[float]) -> GroupStats:
    """Population statistics of one group; the median of an even group is the midpoint."""
    rewards = _check_group(rewards)
    return GroupStats(
        mean=statistics.fmean(rewards),
        std=_pstdev(rewards),
        max=max(rewards),
        median=statistics.median(rewards),
    )


def group_advantages(rewards: Sequence[float]) -> list[float]:
    """Standardize rewards within a group; a zero-variance group gets all zeros."""
    rewards = _check_group(rewards)
    mu = statistics.fmean(rewards)
    sd = _pstdev(rewards)
    if sd == 0:
        return [0.0] * len(rewards)
    return [(r - mu) / sd for r in rewards]


@dataclass(frozen=True)
class FilterThresholds:
    min_std: float = 0.1
    min_max: float = 0.8
    median_low: float = 0.08
    median_high: float = 0.6

    def __post_init__(self) -> None:
        if self.median_low > self.median_high:
            raise ValueError("median_low must not exceed median_high")

    @classmethod
    def from_dict(cls, d: dict) -> FilterThresholds:
        return cls(**_known(cls, d, "filter"))


def filter_group(rewards: Sequence[float], t: FilterThresholds = FilterThresholds()) -> tuple[bool, GroupStats]:
    """Keep a group only if it is spread out, reaches a high reward and has a moderate median."""
    st = group_stats(rewards)
    keep = st.std >= t.min_std and st.max >= t.min_max and t.median_low <= st.median <= t.median_high
    return keep, st


@dataclass(frozen=True)
class ClipConfig:
    """Lower and upper clip widths around ratio 1; equal values give the symmetric clip."""

    eps_low: float = 0.15
    eps_high: float = 0.25

    def __post_init__(self) -> None:
        if not (0 < self.eps_low < 1 and 0 < self.eps_high):
            raise ValueError(f"need 0 < eps_low < 1 and eps_high > 0, got {self.eps_low}, {self.eps_high}")

    @classmethod
    def from_dict(cls, d: dict) -> ClipConfig:
        return cls(**_known(cls, d, "clip"))


def clipped_surrogate(ratios: Sequence[float], advantage: float, c: ClipConfig = ClipConfig()) -> float:
    """Length-normalized clipped objective for one response.

    ``ratios`` are the per-token probability ratios between the current
    and the sampling policy; the response-level advantage applies to
    every token.
    """
    if not ratios:
        raise ValueError("ratios must be non-empty")
    lo, hi = 1 - c.eps_low, 1 + c.eps_high
    terms = []
    for r in ratios:
        if not (math.isfinite(r) and r > 0):
            raise ValueError(f"probability ratios must be finite and positive, got {r!r}")
        terms.append(min(r * advantage, min(max(r, lo), hi) * advantage))
    return math.fsum(terms) / len(terms)


def _known(cls, d: dict, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {section} config keys: {sorted(unknown)}")
    return dict(d)
