"""Domain types, box geometry and per-triple correctness predicates."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

logger = logging.getLogger(__name__)

_WS = re.compile(r"\s+")


def normalize_space(text: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return _WS.sub(" ", text).strip()


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box ``(x1, y1, x2, y2)`` in pixels, origin top-left.

    Construction only checks that the coordinates are finite. Boxes
    that violate the ordering (``x1 < x2``, ``y1 < y2``) can still be
    built so that malformed model output stays representable; see
    :attr:`is_degenerate`.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise TypeError(f"bbox coordinate {name} must be a number, got {v!r}")
            if not math.isfinite(v):
                raise ValueError(f"bbox coordinate {name} is not finite: {v!r}")

    @property
    def is_degenerate(self) -> bool:
        return not (self.x1 < self.x2 and self.y1 < self.y2)

    @property
    def area(self) -> float:
        if self.is_degenerate:
            return 0.0
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    def within(self, width: float, height: float) -> bool:
        return (
            0 <= self.x1 <= width
            and 0 <= self.x2 <= width
            and 0 <= self.y1 <= height
            and 0 <= self.y2 <= height
        )

    def clamp(self, width: float, height: float) -> BBox:
        def c(v: float, hi: float) -> float:
            return min(max(v, 0), hi)

        return BBox(c(self.x1, width), c(self.y1, height), c(self.x2, width), c(self.y2, height))

    def validate(self) -> None:
        """Raise ``ValueError`` unless the box has positive area and non-negative coordinates."""
        if self.is_degenerate:
            raise ValueError(f"degenerate bbox {self.as_list()}: need x1 < x2 and y1 < y2")
        if min(self.x1, self.y1) < 0:
            raise ValueError(f"bbox {self.as_list()} has negative coordinates")


# A location is either a box or None (the entity is not grounded in the image).
Location = Optional[BBox]


class EntityType(str, Enum):
    PERSON = "person"
    ORGANIZATION = "organization"
    LOCATION = "location"
    MISCELLANEOUS = "miscellaneous"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class OtherType:
    """A type label outside the four-way taxonomy. Never equal to a canonical type."""

    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "text", normalize_space(self.text))

    def __str__(self) -> str:
        return self.text


TypeLabel = Union[EntityType, OtherType]

_CANONICAL = {t.value: t for t in EntityType}


def parse_type(text: str | TypeLabel) -> TypeLabel:
    if isinstance(text, (EntityType, OtherType)):
        return text
    key = normalize_space(text)
    return _CANONICAL.get(key.lower(), OtherType(key))


@dataclass(frozen=True)
class EntityTriple:
    """One ``(entity, type, location)`` prediction or gold label.

    The entity text is stored whitespace-normalized, so exact comparison
    of two triples' ``entity`` fields is the entity-match test used by
    rewards and metrics.
    """

    entity: str
    etype: TypeLabel
    loc: Location = None

    def __post_init__(self) -> None:
        ent = normalize_space(self.entity)
        if not ent:
            raise ValueError("entity text is empty")
        object.__setattr__(self, "entity", ent)
        object.__setattr__(self, "etype", parse_type(self.etype))
        if self.loc is not None and not isinstance(self.loc, BBox):
            raise TypeError(f"loc must be a BBox or None, got {self.loc!r}")

    @property
    def grounded(self) -> bool:
        return self.loc is not None


@dataclass(frozen=True)
class GmnerSample:
    id: str
    sentence: str
    image_ref: str
    image_width: int
    image_height: int
    gold: tuple[EntityTriple, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold", tuple(self.gold))
        for name in ("image_width", "image_height"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for t in self.gold:
            if t.loc is None:
                continue
            t.loc.validate()
            if not t.loc.within(self.image_width, self.image_height):
                raise ValueError(
                    f"gold bbox {t.loc.as_list()} for {t.entity!r} lies outside "
                    f"the {self.image_width}x{self.image_height} image"
                )


class TaskMode(str, Enum):
    GMNER = "gmner"
    MNER = "mner"
    EEG = "eeg"


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two valid boxes."""
    for box in (a, b):
        if box.is_degenerate:
            raise ValueError(f"iou of degenerate bbox {box.as_list()}")
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def location_iou(pred: Location, gold: Location) -> float:
    """IoU that treats a missing or degenerate box as zero overlap."""
    if pred is None or gold is None or pred.is_degenerate or gold.is_degenerate:
        return 0.0
    return iou(pred, gold)


def location_correct(pred: Location, gold: Location, iou_threshold: float = 0.5) -> bool:
    if pred is None and gold is None:
        return True
    if pred is None or gold is None:
        return False
    if pred.is_degenerate or gold.is_degenerate:
        return False
    return iou(pred, gold) >= iou_threshold


def triple_correct(
    pred: EntityTriple,
    gold: EntityTriple,
    mode: TaskMode = TaskMode.GMNER,
    iou_threshold: float = 0.5,
) -> bool:
    if not 0 < iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    mode = TaskMode(mode)
    if pred.entity != gold.entity:
        return False
    if mode is not TaskMode.EEG and pred.etype != gold.etype:
        return False
    if mode is not TaskMode.MNER and not location_correct(pred.loc, gold.loc, iou_threshold):
        return False
    return True


def clamp_triples(triples, width: int, height: int) -> list[EntityTriple]:
    """Clamp predicted boxes to the image frame, logging each adjustment."""
    out = []
    for t in triples:
        if t.loc is not None and not t.loc.within(width, height):
            clamped = t.loc.clamp(width, height)
            logger.warning(
                "clamping bbox %s of %r to %dx%d image: %s",
                t.loc.as_list(), t.entity, width, height, clamped.as_list(),
            )
            t = EntityTriple(t.entity, t.etype, clamped)
        out.append(t)
    return out


def triple_to_dict(t: EntityTriple) -> dict:
    return {"entity": t.entity, "type": str(t.etype), "bbox": t.loc.as_list() if t.loc else None}


def triple_from_dict(d: dict) -> EntityTriple:
    bbox = d.get("bbox")
    if bbox is not None:
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise ValueError(f"bbox must be [x1, y1, x2, y2] or null, got {bbox!r}")
        bbox = BBox(*bbox)
    return EntityTriple(d["entity"], d["type"], bbox)
