"""Corpus-level GMNER / MNER / EEG scores, VG metrics and modality-bias metrics.

Counts are micro-aggregated over the corpus. Within a sample each gold
triple certifies at most one prediction and vice versa: the certified
pairs form a maximum one-to-one matching under the mode's correctness
predicate, found by augmenting paths in listed order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from .core import EntityTriple, GmnerSample, TaskMode, iou, normalize_space, triple_correct


@dataclass(frozen=True)
class PRF:
    correct: int = 0
    predicted: int = 0
    gold: int = 0

    def __post_init__(self) -> None:
        if self.correct > min(self.predicted, self.gold):
            raise ValueError(f"correct={self.correct} exceeds predicted/gold counts")

    def __add__(self, other: PRF) -> PRF:
        return PRF(self.correct + other.correct, self.predicted + other.predicted, self.gold + other.gold)

    @property
    def precision(self) -> float:
        return self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "correct": self.correct,
            "predicted": self.predicted,
            "gold": self.gold,
        }


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def max_certified(preds: Sequence, golds: Sequence, ok: Callable[[object, object], bool]) -> int:
    """Size of a maximum one-to-one matching of ``preds`` to ``golds`` under ``ok``."""
    adj = [[j for j, g in enumerate(golds) if ok(p, g)] for p in preds]
    owner: list[Optional[int]] = [None] * len(golds)

    def augment(i: int, seen: set[int]) -> bool:
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if owner[j] is None or augment(owner[j], seen):
                owner[j] = i
                return True
        return False

    return sum(1 for i in range(len(preds)) if adj[i] and augment(i, set()))


def _aligned(predictions: Mapping[str, Sequence[EntityTriple]], golds: Sequence[GmnerSample]):
    ids = [s.id for s in golds]
    dupes = sorted(i for i, n in Counter(ids).items() if n > 1)
    if dupes:
        raise ValueError(f"duplicate gold sample ids: {dupes}")
    missing = sorted(set(ids) - set(predictions))
    extra = sorted(set(predictions) - set(ids))
    if missing or extra:
        raise ValueError(f"sample ids do not align: missing predictions for {missing}, no gold for {extra}")
    return [(list(predictions[s.id]), s) for s in golds]


def sample_prf(preds: Sequence[EntityTriple], golds: Sequence[EntityTriple], mode=TaskMode.GMNER, iou_threshold=0.5) -> PRF:
    n = max_certified(preds, golds, lambda p, g: triple_correct(p, g, mode, iou_threshold))
    return PRF(n, len(preds), len(golds))


def evaluate_corpus(
    predictions: Mapping[str, Sequence[EntityTriple]],
    golds: Sequence[GmnerSample],
    mode: TaskMode | str = TaskMode.GMNER,
    iou_threshold: float = 0.5,
) -> PRF:
    mode = TaskMode(mode)
    total = PRF()
    for preds, sample in _aligned(predictions, golds):
        total = total + sample_prf(preds, sample.gold, mode, iou_threshold)
    return total


# -- VG ----------------------------------------------------------------------

def _gold_boxes(sample: GmnerSample):
    return [t.loc for t in sample.gold if t.loc is not None]


def _pred_box(preds: Sequence[EntityTriple]):
    for t in preds:
        if t.loc is not None:
            return t.loc
    return None


def vg_counts(predictions, golds, iou_threshold: float = 0.5) -> dict:
    """Raw counts behind N-acc and one-target precision."""
    tp = fn = hits = one_target = 0
    for preds, sample in _aligned(predictions, golds):
        boxes = _gold_boxes(sample)
        pred = _pred_box(preds)
        if not boxes:
            if pred is None:
                tp += 1
            else:
                fn += 1
        elif len(boxes) == 1:
            one_target += 1
            if pred is not None and not pred.is_degenerate and iou(pred, boxes[0]) >= iou_threshold:
                hits += 1
    return {"no_target_tp": tp, "no_target_fn": fn, "one_target": one_target, "one_target_correct": hits}


def no_target_accuracy(predictions, golds) -> Optional[float]:
    """Fraction of no-target samples predicted without a box; None if there are none."""
    c = vg_counts(predictions, golds)
    n = c["no_target_tp"] + c["no_target_fn"]
    return c["no_target_tp"] / n if n else None


def vg_precision(predictions, golds, iou_threshold: float = 0.5) -> Optional[float]:
    c = vg_counts(predictions, golds, iou_threshold)
    return c["one_target_correct"] / c["one_target"] if c["one_target"] else None


# -- modality bias -----------------------------------------------------------

def textual_bias_counts(predictions, golds) -> PRF:
    """Counts over triples without a location: entity must match and both sides be None."""
    total = PRF()
    for preds, sample in _aligned(predictions, golds):
        p = [t for t in preds if t.loc is None]
        g = [t for t in sample.gold if t.loc is None]
        total = total + PRF(max_certified(p, g, lambda a, b: a.entity == b.entity), len(p), len(g))
    return total


def textual_bias_prf(predictions, golds) -> tuple[float, float, float]:
    c = textual_bias_counts(predictions, golds)
    return c.precision, c.recall, c.f1


def mentioned_in(entity: str, sentence: str) -> bool:
    return normalize_space(entity).casefold() in normalize_space(sentence).casefold()


def visual_bias_stats(
    predictions: Mapping[str, Sequence[EntityTriple]],
    sentences: Mapping[str, str],
) -> tuple[int, float]:
    """Number and share of predicted entities that never occur in their sentence."""
    absent = recalled = 0
    for sid, preds in predictions.items():
        if sid not in sentences:
            raise ValueError(f"no sentence for sample id {sid!r}")
        for t in preds:
            recalled += 1
            if not mentioned_in(t.entity, sentences[sid]):
                absent += 1
    return absent, (absent / recalled if recalled else 0.0)


def metrics_report(
    predictions: Mapping[str, Sequence[EntityTriple]],
    golds: Sequence[GmnerSample],
    mode: TaskMode | str = TaskMode.GMNER,
    iou_threshold: float = 0.5,
) -> dict:
    mode = TaskMode(mode)
    modes = {m.value: evaluate_corpus(predictions, golds, m, iou_threshold).to_dict() for m in TaskMode}
    vg = vg_counts(predictions, golds, iou_threshold)
    n_no = vg["no_target_tp"] + vg["no_target_fn"]
    tb = textual_bias_counts(predictions, golds)
    sentences = {s.id: s.sentence for s in golds}
    n_count, n_rate = visual_bias_stats(predictions, sentences)
    return {
        "mode": mode.value,
        "iou_threshold": iou_threshold,
        "samples": len(golds),
        "primary": modes[mode.value],
        "modes": modes,
        "vg": {
            "n_acc": vg["no_target_tp"] / n_no if n_no else None,
            "precision": vg["one_target_correct"] / vg["one_target"] if vg["one_target"] else None,
            **vg,
        },
        "bias": {
            "n_pre": tb.precision,
            "n_rec": tb.recall,
            "n_f1": tb.f1,
            "n_correct": tb.correct,
            "n_predict": tb.predicted,
            "n_gold": tb.gold,
            "n_count": n_count,
            "n_rate": n_rate,
            "total_recalled": sum(len(v) for v in predictions.values()),
        },
    }
