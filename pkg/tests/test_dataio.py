import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gmnerkit.core import BBox, EntityTriple, GmnerSample
from gmnerkit.dataio import (
    CompletionGroup,
    DataError,
    GrecSample,
    PredictionRecord,
    SchemaRecord,
    filter_grec_multitarget,
    load_samples,
    read_jsonl,
    split_schema_dataset,
    write_samples,
)


def sample_dict(sid, bbox=(1, 1, 5, 5), w=10, h=10):
    return {
        "id": sid, "sentence": f"sentence {sid}", "image_ref": f"{sid}.jpg",
        "image_width": w, "image_height": h,
        "gold": [{"entity": "A", "type": "person", "bbox": list(bbox) if bbox else None}],
    }


def write_lines(path, lines):
    path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    return path


def test_load_three_samples(tmp_path):
    p = write_lines(tmp_path / "s.jsonl", [json.dumps(sample_dict(str(i))) for i in range(3)])
    samples, warnings = load_samples(p)
    assert [s.id for s in samples] == ["0", "1", "2"] and warnings == []
    assert samples[0].gold[0].loc == BBox(1, 1, 5, 5)


def test_lenient_skips_bad_line(tmp_path):
    lines = [json.dumps(sample_dict("0")), "{not json", json.dumps(sample_dict("2"))]
    p = write_lines(tmp_path / "s.jsonl", lines)
    samples, warnings = load_samples(p, strict=False)
    assert len(samples) == 2 and len(warnings) == 1
    assert ":2:" in warnings[0]
    with pytest.raises(DataError) as e:
        load_samples(p)
    assert e.value.lineno == 2


def test_out_of_bounds_box_strict_names_line(tmp_path):
    lines = [json.dumps(sample_dict("0")), json.dumps(sample_dict("1", bbox=(1, 1, 50, 5)))]
    p = write_lines(tmp_path / "s.jsonl", lines)
    with pytest.raises(DataError) as e:
        load_samples(p, strict=True)
    assert e.value.lineno == 2 and "s.jsonl:2" in str(e.value)


def test_out_of_bounds_box_lenient_clamps(tmp_path):
    p = write_lines(tmp_path / "s.jsonl", [json.dumps(sample_dict("1", bbox=(1, 1, 50, 5)))])
    (s,), _ = load_samples(p, strict=False)
    assert s.gold[0].loc == BBox(1, 1, 10, 5)


def test_missing_key_reported(tmp_path):
    d = sample_dict("0")
    del d["sentence"]
    p = write_lines(tmp_path / "s.jsonl", [json.dumps(d)])
    with pytest.raises(DataError, match="sentence"):
        load_samples(p)


@st.composite
def samples(draw):
    w, h = draw(st.integers(1, 500)), draw(st.integers(1, 500))
    gold = []
    for _ in range(draw(st.integers(0, 3))):
        loc = None
        if draw(st.booleans()):
            x1, y1 = draw(st.integers(0, w - 1)), draw(st.integers(0, h - 1))
            loc = BBox(x1, y1, draw(st.integers(x1 + 1, w)), draw(st.integers(y1 + 1, h)))
        ent = draw(st.text(alphabet="abc XYZ,()\"é", min_size=1, max_size=8).filter(str.strip))
        gold.append(EntityTriple(ent, draw(st.sampled_from(["person", "location", "team"])), loc))
    sid = draw(st.text(alphabet="abc123", min_size=1, max_size=6))
    return GmnerSample(sid, draw(st.text(max_size=20)), "img.png", w, h, gold)


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
@given(st.lists(samples(), max_size=5))
def test_round_trip(tmp_path, ss):
    p = tmp_path / "rt.jsonl"
    write_samples(p, ss)
    back, warnings = load_samples(p)
    assert back == ss and warnings == []


def test_write_is_atomic_and_leaves_no_temp(tmp_path):
    p = tmp_path / "out.jsonl"
    write_samples(p, [GmnerSample("a", "s", "i", 5, 5, [])])
    assert [f.name for f in tmp_path.iterdir()] == ["out.jsonl"]


def test_record_types():
    with pytest.raises(ValueError):
        PredictionRecord("a")
    r = PredictionRecord.from_dict({"sample_id": 1, "triples": [{"entity": "A", "type": "person", "bbox": None}]})
    assert r.sample_id == "1" and r.triples == (EntityTriple("A", "person"),)
    with pytest.raises(ValueError):
        CompletionGroup.from_dict({"sample_id": "a", "completions": []})
    rec = SchemaRecord.from_dict({"sample_id": "a", "style": "formal", "prompt": "p", "reasoning": "z",
                                  "answer": [{"entity": "A", "type": "person", "bbox": [0, 0, 1, 1]}]})
    assert SchemaRecord.from_dict(rec.to_dict()) == rec


def test_read_jsonl_rejects_non_object(tmp_path):
    p = write_lines(tmp_path / "x.jsonl", ["[1, 2]"])
    with pytest.raises(DataError):
        read_jsonl(p, dict)


def grec(sid, n):
    return GrecSample(sid, "the man on the left", "g.jpg", 100, 100,
                      tuple(BBox(i, i, i + 10, i + 10) for i in range(n)))


def test_grec_filter_examples():
    kept, dropped = filter_grec_multitarget([grec("two", 2), grec("zero", 0), grec("one", 1), grec("three", 3)])
    assert [s.id for s in kept] == ["zero", "one"] and dropped == 2


@given(st.lists(st.integers(0, 4), max_size=10))
def test_grec_filter_idempotent(ns):
    kept, _ = filter_grec_multitarget([grec(str(i), n) for i, n in enumerate(ns)])
    again, dropped = filter_grec_multitarget(kept)
    assert again == kept and dropped == 0


def test_grec_to_gmner():
    s = grec("one", 1).to_gmner()
    assert s.gold[0].loc == BBox(0, 0, 10, 10) and s.gold[0].entity == "the man on the left"
    assert grec("zero", 0).to_gmner().gold[0].loc is None
    assert GrecSample.from_dict(grec("one", 1).to_dict()) == grec("one", 1)
    with pytest.raises(ValueError):
        grec("two", 2).to_gmner()


def schema(sid, style="formal"):
    return SchemaRecord(sid, style, "p", "z")


@given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=3), max_size=30),
       st.floats(0.05, 0.95), st.integers(0, 1000))
def test_split_partition_and_coherence(ids, fraction, seed):
    records = [schema(i, s) for i in ids for s in ("formal", "distill")]
    d1, d2 = split_schema_dataset(records, fraction, seed)
    assert len(d1) + len(d2) == len(records)
    assert sorted(map(id, d1 + d2)) == sorted(map(id, records))
    assert not {r.sample_id for r in d1} & {r.sample_id for r in d2}
    assert split_schema_dataset(records, fraction, seed) == (d1, d2)


def test_split_fraction_concentration():
    records = [schema(f"s{i}") for i in range(100)]
    d1, _ = split_schema_dataset(records, 0.3, seed=0)
    assert 20 <= len({r.sample_id for r in d1}) <= 40


def test_split_accepts_dicts_and_rejects_bad_fraction():
    d1, d2 = split_schema_dataset([{"sample_id": "a"}, {"sample_id": "b"}], 0.5, 1)
    assert len(d1) + len(d2) == 2
    for f in (0, 1, 1.5):
        with pytest.raises(ValueError):
            split_schema_dataset([], f)
