"""Rule-based rewards for one completion scored against one gold sample.

Five components, each in [0, 1]: entity count, entity span (token F1
over Hungarian-matched pairs), type agreement, grounding (IoU above a
threshold, rescaled) and visual entailment (both located or both not).
The four matched-pair components average over the matched set; when
nothing is matched they are 1.0 if both sides are empty and 0.0
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from .core import EntityTriple, GmnerSample, clamp_triples, location_iou
from .matching import Matching, match_entities
from .parsing import ReasoningStyle, parse_completion

# (upper bound of the count bracket, weight); the last bracket is open-ended
# Weights in tenths, so the piecewise values are computed exactly.
_OVER_WEIGHTS = ((2, 4), (4, 2), (math.inf, 1))
_UNDER_WEIGHTS = ((2, 5), (4, 3), (math.inf, 2))


@dataclass(frozen=True)
class RewardConfig:
    lambda_count: float = 0.2
    lambda_span: float = 0.2
    lambda_type: float = 0.2
    lambda_ground: float = 0.2
    lambda_entail: float = 0.2
    sigma: float = 0.5
    format_penalty: float = 0.0

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{f.name} must be a finite number, got {v!r}")
        for name in ("lambda_count", "lambda_span", "lambda_type", "lambda_ground", "lambda_entail"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.sigma < 1:
            raise ValueError(f"sigma must be in [0, 1), got {self.sigma}")

    @property
    def weights(self) -> tuple[float, float, float, float, float]:
        return (self.lambda_count, self.lambda_span, self.lambda_type, self.lambda_ground, self.lambda_entail)

    @classmethod
    def from_dict(cls, d: dict) -> RewardConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown reward config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class RewardBreakdown:
    r_count: float
    r_span: float
    r_type: float
    r_ground: float
    r_entail: float
    total: float
    k: int
    p: int
    q: int
    format_ok: bool

    @property
    def components(self) -> tuple[float, float, float, float, float]:
        return (self.r_count, self.r_span, self.r_type, self.r_ground, self.r_entail)

    def to_dict(self) -> dict:
        return asdict(self)


def _bracket_weight(n: int, table) -> int:
    for upper, w in table:
        if n <= upper:
            return w
    raise AssertionError("unreachable")


def count_reward(p: int, q: int) -> float:
    """Score the predicted entity count ``p`` against the gold count ``q``.

    Over-prediction is penalized per extra entity with a weight that
    shrinks as ``q`` grows; under-prediction with a weight keyed on
    ``p``. Predicting entities for an empty gold set, or nothing for a
    non-empty one, scores 0.
    """
    if p < 0 or q < 0:
        raise ValueError("entity counts must be non-negative")
    if p == q:
        return 1.0
    if p > q > 0:
        return max(0, 10 - (p - q) * _bracket_weight(q, _OVER_WEIGHTS)) / 10
    if 0 < p < q:
        return max(0, 10 - (q - p) * _bracket_weight(p, _UNDER_WEIGHTS)) / 10
    return 0.0


def _pair_average(matching: Matching, scores: Sequence[float]) -> float:
    if matching.k == 0:
        return 1.0 if matching.n_pred == 0 and matching.n_gold == 0 else 0.0
    return math.fsum(scores) / matching.k


def span_reward(matching: Matching) -> float:
    return _pair_average(matching, [s.f1 for _, _, s in matching.pairs])


def type_reward(matching: Matching, preds: Sequence[EntityTriple], golds: Sequence[EntityTriple]) -> float:
    return _pair_average(
        matching, [1.0 if preds[i].etype == golds[j].etype else 0.0 for i, j, _ in matching.pairs]
    )


def grounding_reward(
    matching: Matching,
    preds: Sequence[EntityTriple],
    golds: Sequence[EntityTriple],
    sigma: float = 0.5,
) -> float:
    """Mean over matched pairs of ``max(0, (IoU - sigma) / (1 - sigma))``.

    Two missing boxes agree perfectly and score 1. A pair where only one
    side has a box (or the predicted box is degenerate) scores 0 but
    still counts toward the mean.
    """
    if not 0 <= sigma < 1:
        raise ValueError(f"sigma must be in [0, 1), got {sigma}")
    scores = []
    for i, j, _ in matching.pairs:
        a, b = preds[i].loc, golds[j].loc
        if a is None and b is None:
            scores.append(1.0)
            continue
        v = location_iou(a, b)
        scores.append(max(0.0, (v - sigma) / (1 - sigma)))
    return _pair_average(matching, scores)


def entailment_reward(matching: Matching, preds: Sequence[EntityTriple], golds: Sequence[EntityTriple]) -> float:
    return _pair_average(
        matching,
        [1.0 if preds[i].grounded == golds[j].grounded else 0.0 for i, j, _ in matching.pairs],
    )


def total_reward(components: Sequence[float], config: RewardConfig) -> float:
    if len(components) != 5:
        raise ValueError(f"expected 5 reward components, got {len(components)}")
    return math.fsum(w * r for w, r in zip(config.weights, components))


def score_triples(
    preds: Sequence[EntityTriple],
    golds: Sequence[EntityTriple],
    config: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    """Reward breakdown for an already-parsed, well-formed prediction."""
    m = match_entities(preds, golds)
    comps = (
        count_reward(len(preds), len(golds)),
        span_reward(m),
        type_reward(m, preds, golds),
        grounding_reward(m, preds, golds, config.sigma),
        entailment_reward(m, preds, golds),
    )
    return RewardBreakdown(*comps, total=total_reward(comps, config), k=m.k, p=len(preds), q=len(golds), format_ok=True)


def score_completion(
    completion: str,
    style: ReasoningStyle | str,
    sample: GmnerSample,
    config: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    parsed = parse_completion(completion, style)
    if not parsed.format_ok:
        return RewardBreakdown(
            0.0, 0.0, 0.0, 0.0, 0.0,
            total=config.format_penalty, k=0, p=len(parsed.answer), q=len(sample.gold), format_ok=False,
        )
    preds = clamp_triples(parsed.answer, sample.image_width, sample.image_height)
    return score_triples(preds, list(sample.gold), config)
