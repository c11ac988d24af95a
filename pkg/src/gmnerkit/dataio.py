"""JSONL ingestion and writing, GREC multi-target filtering, SFT/RL dataset split.

Sample records look like::

    {"id": "...", "sentence": "...", "image_ref": "...",
     "image_width": 640, "image_height": 480,
     "gold": [{"entity": "Spurs", "type": "organization", "bbox": [405, 216, 558, 324]},
              {"entity": "Premier League", "type": "organization", "bbox": null}]}
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, TypeVar

from .core import BBox, EntityTriple, GmnerSample, triple_from_dict, triple_to_dict
from .parsing import ReasoningStyle

logger = logging.getLogger(__name__)

T = TypeVar("T")


class DataError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


def iter_jsonl(path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                yield lineno, line


def read_jsonl(path, parse: Callable[[dict], T], strict: bool = True) -> tuple[list[T], list[str]]:
    """Parse every non-blank line with ``parse``.

    Strict mode raises :class:`DataError` on the first bad line; lenient
    mode skips it and returns a warning naming the line.
    """
    items: list[T] = []
    problems: list[str] = []
    for lineno, line in iter_jsonl(path):
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("record is not a JSON object")
            items.append(parse(obj))
        except (ValueError, KeyError, TypeError) as e:
            msg = str(e) if not isinstance(e, KeyError) else f"missing key {e}"
            if strict:
                raise DataError(path, lineno, msg) from e
            problems.append(f"{path}:{lineno}: skipped: {msg}")
            logger.warning(problems[-1])
    return items, problems


def write_jsonl(path, records: Iterable[dict]) -> None:
    write_text(path, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))


def write_json(path, obj) -> None:
    write_text(path, json.dumps(obj, ensure_ascii=False, indent=2) + "\n")


def write_text(path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- samples -----------------------------------------------------------------

def sample_from_dict(d: dict, clamp: bool = False) -> GmnerSample:
    gold = [triple_from_dict(g) for g in d.get("gold", [])]
    w, h = d["image_width"], d["image_height"]
    if clamp and isinstance(w, int) and isinstance(h, int):
        fixed = []
        for t in gold:
            if t.loc is not None and not t.loc.within(w, h):
                logger.warning("sample %s: clamping gold bbox %s of %r to %dx%d", d["id"], t.loc.as_list(), t.entity, w, h)
                t = EntityTriple(t.entity, t.etype, t.loc.clamp(w, h))
            fixed.append(t)
        gold = fixed
    return GmnerSample(
        id=str(d["id"]),
        sentence=d["sentence"],
        image_ref=d.get("image_ref", ""),
        image_width=w,
        image_height=h,
        gold=gold,
    )


def sample_to_dict(s: GmnerSample) -> dict:
    return {
        "id": s.id,
        "sentence": s.sentence,
        "image_ref": s.image_ref,
        "image_width": s.image_width,
        "image_height": s.image_height,
        "gold": [triple_to_dict(t) for t in s.gold],
    }


def load_samples(path, strict: bool = True) -> tuple[list[GmnerSample], list[str]]:
    """Load and validate gold samples.

    Lenient mode skips malformed records with a warning and clamps gold
    boxes that overshoot the image instead of rejecting the record.
    """
    return read_jsonl(path, lambda d: sample_from_dict(d, clamp=not strict), strict)


def write_samples(path, samples: Iterable[GmnerSample]) -> None:
    write_jsonl(path, (sample_to_dict(s) for s in samples))


# -- predictions, groups, schema records --------------------------------------

@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    completion: Optional[str] = None
    triples: Optional[tuple[EntityTriple, ...]] = None
    style: Optional[ReasoningStyle] = None

    def __post_init__(self) -> None:
        if self.completion is None and self.triples is None:
            raise ValueError(f"prediction for {self.sample_id!r} has neither completion nor triples")

    @classmethod
    def from_dict(cls, d: dict) -> PredictionRecord:
        # Output of the parse command carries its triples under "answer".
        triples = d.get("triples", d.get("answer"))
        return cls(
            sample_id=str(d["sample_id"]),
            completion=d.get("completion"),
            triples=None if triples is None else tuple(triple_from_dict(t) for t in triples),
            style=ReasoningStyle(d["style"]) if d.get("style") else None,
        )


@dataclass(frozen=True)
class CompletionGroup:
    sample_id: str
    completions: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.completions:
            raise ValueError(f"group {self.sample_id!r} is empty")

    @classmethod
    def from_dict(cls, d: dict) -> CompletionGroup:
        return cls(str(d["sample_id"]), tuple(d["completions"]))


@dataclass(frozen=True)
class SchemaRecord:
    sample_id: str
    style: ReasoningStyle
    prompt: str
    reasoning: str
    answer: tuple[EntityTriple, ...] = field(default_factory=tuple)

    @classmethod
    def from_dict(cls, d: dict) -> SchemaRecord:
        return cls(
            sample_id=str(d["sample_id"]),
            style=ReasoningStyle(d["style"]),
            prompt=d.get("prompt", ""),
            reasoning=d.get("reasoning", ""),
            answer=tuple(triple_from_dict(t) for t in d.get("answer", [])),
        )

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "style": self.style.value,
            "prompt": self.prompt,
            "reasoning": self.reasoning,
            "answer": [triple_to_dict(t) for t in self.answer],
        }


def split_schema_dataset(records: Sequence[T], fraction: float = 0.5, seed: int = 0) -> tuple[list[T], list[T]]:
    """Partition records into an SFT part and an RL remainder, by sample id.

    Each sample id is hashed together with the seed, so every record of a
    sample lands on the same side and the assignment of one id does not
    depend on which other ids are present. Input order is kept on both sides.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    d1: list[T] = []
    d2: list[T] = []
    for r in records:
        sid = r.sample_id if hasattr(r, "sample_id") else r["sample_id"]
        (d1 if _unit_hash(seed, str(sid)) < fraction else d2).append(r)
    return d1, d2


def _unit_hash(seed: int, key: str) -> float:
    digest = hashlib.sha256(f"{seed}\x00{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


# -- GREC --------------------------------------------------------------------

@dataclass(frozen=True)
class GrecSample:
    """A referring expression with zero or more gold regions."""

    id: str
    expression: str
    image_ref: str
    image_width: int
    image_height: int
    regions: tuple[BBox, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> GrecSample:
        return cls(
            id=str(d["id"]),
            expression=d["expression"],
            image_ref=d.get("image_ref", ""),
            image_width=d["image_width"],
            image_height=d["image_height"],
            regions=tuple(BBox(*r) for r in d.get("regions", [])),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "expression": self.expression,
            "image_ref": self.image_ref,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "regions": [r.as_list() for r in self.regions],
        }

    def to_gmner(self) -> GmnerSample:
        """Single-triple sample: the expression located at its region, or at None."""
        if len(self.regions) > 1:
            raise ValueError(f"GREC sample {self.id!r} has {len(self.regions)} regions")
        loc = self.regions[0] if self.regions else None
        return GmnerSample(
            self.id, self.expression, self.image_ref, self.image_width, self.image_height,
            [EntityTriple(self.expression, "miscellaneous", loc)],
        )


def filter_grec_multitarget(samples: Iterable[GrecSample]) -> tuple[list[GrecSample], int]:
    kept = []
    dropped = 0
    for s in samples:
        if len(s.regions) >= 2:
            dropped += 1
        else:
            kept.append(s)
    return kept, dropped
