"""Parsing of tagged completions, answer serialization and prompt rendering.

A completion carries its reasoning in ``<process>`` and the prediction in
``<answer>``, one ``(entity text, entity type, None | (x1, y1, x2, y2))``
triple per line. The formal style also emits ``<entity_num>``,
``<mner>``, ``<entailment>`` and ``<location>`` tags; those are parsed
best-effort and never decide validity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Sequence

from .core import (
    BBox,
    EntityTriple,
    Location,
    TypeLabel,
    normalize_space,
    parse_type,
    triple_from_dict,
    triple_to_dict,
)

TEMPLATE_VERSION = "v1"
TEMPLATE_IDS = ("instruction", "formal", "conclusion", "distill")


class ReasoningStyle(str, Enum):
    FORMAL = "formal"
    CONCLUSION = "conclusion"
    DISTILL = "distill"


@dataclass
class ParsedCompletion:
    style: ReasoningStyle
    process_text: Optional[str] = None
    entity_num: Optional[int] = None
    mner_pairs: list[tuple[str, TypeLabel]] = field(default_factory=list)
    entailment_pairs: list[tuple[str, str]] = field(default_factory=list)
    location_pairs: list[tuple[str, Location]] = field(default_factory=list)
    answer: list[EntityTriple] = field(default_factory=list)
    format_ok: bool = False
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "style": self.style.value,
            "process": self.process_text,
            "entity_num": self.entity_num,
            "mner": [[e, str(t)] for e, t in self.mner_pairs],
            "entailment": [[e, v] for e, v in self.entailment_pairs],
            "location": [[e, loc.as_list() if loc else None] for e, loc in self.location_pairs],
            "answer": [triple_to_dict(t) for t in self.answer],
            "format_ok": self.format_ok,
            "diagnostics": list(self.diagnostics),
        }


# -- low-level scanning ------------------------------------------------------

_NUM = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
_BOX = re.compile(
    rf"^[(\[]\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*,\s*({_NUM})\s*[)\]]$"
)
_NONE = re.compile(r"^(?:none|null)$", re.I)
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")


def _tag_blocks(text: str, tag: str) -> list[str]:
    return re.findall(rf"<\s*{tag}\s*>(.*?)<\s*/\s*{tag}\s*>", text, flags=re.S | re.I)


def _has_open_tag(text: str, tag: str) -> bool:
    return re.search(rf"<\s*{tag}\s*>", text, flags=re.I) is not None


def _quote_end(text: str, pos: int) -> int:
    """Index of the quote closing a ``"`` at ``pos``, or -1 if it is a lone quote."""
    return text.find('"', pos + 1) if text[pos] == '"' else -1


def _paren_groups(text: str) -> tuple[list[str], bool]:
    """Inner text of each top-level ``(...)`` group, plus a balance flag.

    A double-quoted run is opaque, so quoted entities may hold brackets.
    """
    groups: list[str] = []
    depth = 0
    start = 0
    pos = 0
    while pos < len(text):
        ch = text[pos]
        end = _quote_end(text, pos)
        if end >= 0:
            pos = end + 1
            continue
        if ch == "(":
            if depth == 0:
                start = pos + 1
            depth += 1
        elif ch == ")" and depth > 0:
            depth -= 1
            if depth == 0:
                groups.append(text[start:pos])
        pos += 1
    if depth > 0:
        groups.append(text[start:])
        return groups, False
    return groups, True


def _split_top(text: str) -> list[str]:
    parts: list[str] = []
    depth = 0
    cur: list[str] = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        end = _quote_end(text, pos)
        if end >= 0:
            cur.append(text[pos:end + 1])
            pos = end + 1
            continue
        if ch in "([":
            depth += 1
        elif ch in ")]" and depth > 0:
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        pos += 1
    parts.append("".join(cur))
    return parts


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'`":
        s = s[1:-1].strip()
    return s


def _num(s: str) -> float:
    v = float(s)
    return int(v) if v.is_integer() else v


_NOT_LOC = object()


def parse_location(text: str):
    """Parse ``None`` or a 4-number box; returns a sentinel on failure."""
    s = _unquote(text)
    if _NONE.match(s):
        return None
    m = _BOX.match(s)
    if not m:
        return _NOT_LOC
    try:
        return BBox(*(_num(g) for g in m.groups()))
    except (ValueError, OverflowError):
        return _NOT_LOC


def _parse_triple(inner: str) -> Optional[EntityTriple]:
    fields = _split_top(inner)
    if len(fields) < 3:
        return None
    last = parse_location(fields[-1])
    if last is not _NOT_LOC:
        loc, type_field = last, fields[-2]
    else:
        # tolerate "(entity, location, type)" ordering
        prev = parse_location(fields[-2])
        if prev is _NOT_LOC:
            return None
        loc, type_field = prev, fields[-1]
    type_text = _unquote(type_field)
    if not type_text or any(c in type_text for c in "()[]"):
        return None
    entity = _unquote(",".join(fields[:-2]))
    if not normalize_space(entity):
        return None
    return EntityTriple(entity, parse_type(type_text), loc)


def _pairs(block: str) -> list[tuple[str, str]]:
    out = []
    for g in _paren_groups(block)[0]:
        fields = _split_top(g)
        if len(fields) < 2:
            continue
        ent = normalize_space(_unquote(",".join(fields[:-1])))
        if ent:
            out.append((ent, fields[-1].strip()))
    return out


def parse_answer_block(block: str) -> tuple[list[EntityTriple], list[str]]:
    """Parse the content of an ``<answer>`` block into triples and problems."""
    triples: list[EntityTriple] = []
    problems: list[str] = []
    for lineno, raw in enumerate(block.splitlines(), 1):
        line = _BULLET.sub("", raw, count=1).strip()
        if not line:
            continue
        groups, balanced = _paren_groups(line)
        if not balanced:
            problems.append(f"answer line {lineno}: unbalanced parentheses: {line!r}")
        for g in groups:
            if "," not in g:
                continue  # parenthetical prose, not triple syntax
            t = _parse_triple(g)
            if t is None:
                problems.append(f"answer line {lineno}: cannot parse triple ({g})")
            else:
                triples.append(t)
    return triples, problems


# -- public API --------------------------------------------------------------

def parse_completion(text: str, style: ReasoningStyle | str = ReasoningStyle.FORMAL) -> ParsedCompletion:
    """Parse a model completion. Never raises on malformed text."""
    style = ReasoningStyle(style)
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    out = ParsedCompletion(style=style)

    process = _tag_blocks(text, "process")
    if process:
        out.process_text = process[-1].strip()

    nums = _tag_blocks(text, "entity_num")
    if nums:
        m = re.search(r"\d+", nums[-1])
        if m:
            out.entity_num = int(m.group())
        else:
            out.diagnostics.append(f"<entity_num> is not a number: {nums[-1].strip()!r}")

    for block in _tag_blocks(text, "mner"):
        out.mner_pairs.extend((e, parse_type(_unquote(t))) for e, t in _pairs(block))
    for block in _tag_blocks(text, "entailment"):
        for e, v in _pairs(block):
            v = _unquote(v).lower()
            if v in ("visible", "invisible"):
                out.entailment_pairs.append((e, v))
            else:
                out.diagnostics.append(f"<entailment> value for {e!r} is {v!r}")
    for block in _tag_blocks(text, "location"):
        for e, loc in _pairs(block):
            parsed = parse_location(loc)
            if parsed is _NOT_LOC:
                out.diagnostics.append(f"<location> for {e!r} is not a box or None")
            else:
                out.location_pairs.append((e, parsed))

    answers = _tag_blocks(text, "answer")
    if not answers:
        if _has_open_tag(text, "answer"):
            out.diagnostics.append("unterminated <answer> block")
        else:
            out.diagnostics.append("missing <answer> block")
        return out

    triples, problems = parse_answer_block(answers[-1])
    out.answer = triples
    out.diagnostics.extend(problems)
    out.format_ok = not problems

    if out.format_ok and out.entity_num is not None and out.entity_num != len(triples):
        out.diagnostics.append(
            f"<entity_num> says {out.entity_num} but <answer> holds {len(triples)} triples"
        )
    located = dict(out.location_pairs)
    for t in triples:
        if t.entity in located and located[t.entity] != t.loc:
            out.diagnostics.append(f"<location> and <answer> disagree on {t.entity!r}; using <answer>")
    return out


def _fmt_num(v: float) -> str:
    if isinstance(v, int):
        return str(v)
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_location(loc: Location) -> str:
    if loc is None:
        return "None"
    return "(" + ", ".join(_fmt_num(c) for c in loc.as_list()) + ")"


def _nests(text: str, opens: str, closes: str) -> bool:
    depth = 0
    for ch in text:
        if ch in opens:
            depth += 1
        elif ch in closes:
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def format_entity(entity: str) -> str:
    """Entity text as written in an answer line.

    Plain text in the usual case; wrapped in double quotes only when the
    plain form would not read back (stray brackets, or surrounding quotes
    that the parser would strip).
    """
    plain_ok = _nests(entity, "(", ")") and _nests(entity, "([", ")]") and '"' not in entity
    if plain_ok and _unquote(entity) == entity:
        return entity
    if '"' not in entity:
        return f'"{entity}"'
    return entity


def serialize_answer(triples: Iterable[EntityTriple]) -> str:
    return "\n".join(f"({format_entity(t.entity)}, {t.etype}, {format_location(t.loc)})" for t in triples)


def wrap_answer(answer_text: str) -> str:
    return f"<answer>{answer_text}</answer>"


# -- prompts -----------------------------------------------------------------

@dataclass(frozen=True)
class PromptSpec:
    template_id: str
    sentence: str
    image_placeholder: str = "<image>"
    shots: tuple[tuple[str, str, str], ...] = ()


@lru_cache(maxsize=None)
def load_template(template_id: str, version: str = TEMPLATE_VERSION) -> str:
    if template_id not in TEMPLATE_IDS:
        raise ValueError(f"unknown template_id {template_id!r}; expected one of {', '.join(TEMPLATE_IDS)}")
    path = resources.files("gmnerkit") / "templates" / f"{template_id}.{version}.txt"
    return path.read_text(encoding="utf-8").rstrip("\n")


def _input_block(sentence: str, image: str) -> str:
    return f"Text: {sentence}\nImage: {image}"


def render_prompt(spec: PromptSpec) -> str:
    """Instruction, optional style block, optional shots, then the query."""
    parts = [load_template("instruction")]
    if spec.template_id != "instruction":
        parts.append(load_template(spec.template_id))
    for n, (s, img, answer) in enumerate(spec.shots, 1):
        parts.append(f"Example {n}:\n{_input_block(s, img)}\nAnswer:\n{answer}")
    parts.append(_input_block(spec.sentence, spec.image_placeholder))
    return "\n\n".join(parts) + "\n"


def shots_from_records(records: Sequence[dict]) -> tuple[tuple[str, str, str], ...]:
    """Turn shot records (``sentence``, ``image``, ``answer``) into prompt shots."""
    shots = []
    for r in records:
        answer = r["answer"]
        if not isinstance(answer, str):
            answer = wrap_answer(serialize_answer(triple_from_dict(d) for d in answer))
        shots.append((r["sentence"], r.get("image", "<image>"), answer))
    return tuple(shots)
