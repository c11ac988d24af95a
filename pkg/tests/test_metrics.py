import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmnerkit.core import BBox, EntityTriple, GmnerSample, TaskMode, triple_correct
from gmnerkit.metrics import (
    PRF,
    evaluate_corpus,
    f1_score,
    max_certified,
    metrics_report,
    no_target_accuracy,
    sample_prf,
    textual_bias_prf,
    vg_precision,
    visual_bias_stats,
)
from oracles import max_matching_brute

BOX = BBox(0, 0, 10, 10)


def T(e, t="person", loc=None):
    return EntityTriple(e, t, loc)


def S(sid, gold, sentence="s"):
    return GmnerSample(sid, sentence, "img", 100, 100, gold)


def test_prf_examples():
    p = PRF(3, 4, 5)
    assert (p.precision, p.recall) == (0.75, 0.6)
    assert p.f1 == pytest.approx(2 / 3)
    assert PRF(0, 0, 0).f1 == 0.0
    assert PRF(0, 3, 2).f1 == 0.0
    with pytest.raises(ValueError):
        PRF(3, 2, 5)


@given(st.floats(0, 1), st.floats(0, 1))
def test_f1_properties(p, r):
    f = f1_score(p, r)
    assert 0 <= f <= 1
    if p == 0 or r == 0:
        assert f == 0
    assert (f == 1) == (p == 1 and r == 1)


def test_corpus_micro_example():
    golds = [
        S("a", [T("A", loc=BOX), T("B"), T("C")]),
        S("b", [T("D"), T("E", loc=BOX)]),
    ]
    preds = {
        "a": [T("A", loc=BOX), T("B"), T("X")],
        "b": [T("D")],
    }
    p = evaluate_corpus(preds, golds, TaskMode.GMNER)
    assert (p.correct, p.predicted, p.gold) == (3, 4, 5)
    assert (p.precision, p.recall) == (0.75, 0.6)
    assert p.f1 == pytest.approx(2 / 3)


def test_perfect_and_empty_predictions():
    golds = [S("a", [T("A", loc=BOX), T("B")]), S("b", [T("C")])]
    perfect = {s.id: list(s.gold) for s in golds}
    p = evaluate_corpus(perfect, golds)
    assert (p.precision, p.recall, p.f1) == (1.0, 1.0, 1.0)
    p = evaluate_corpus({"a": [], "b": []}, golds)
    assert (p.precision, p.recall, p.f1) == (0.0, 0.0, 0.0)


def test_duplicate_predictions_certified_once():
    p = sample_prf([T("A"), T("A")], [T("A")])
    assert (p.correct, p.predicted, p.gold) == (1, 2, 1)


def test_misaligned_ids_raise():
    golds = [S("a", [T("A")])]
    with pytest.raises(ValueError, match="zzz"):
        evaluate_corpus({"a": [], "zzz": []}, golds)
    with pytest.raises(ValueError, match="a"):
        evaluate_corpus({}, golds)


def test_max_certified_is_maximum_not_greedy():
    # greedy on the first pred would take gold 0 and strand pred 1
    ok = {(0, 0), (0, 1), (1, 0)}
    assert max_certified([0, 1], [0, 1], lambda i, j: (i, j) in ok) == 2


def test_max_certified_against_brute_force():
    rng = random.Random(2)
    for _ in range(300):
        n, m = rng.randint(0, 5), rng.randint(0, 5)
        ok = {(i, j) for i in range(n) for j in range(m) if rng.random() < 0.35}
        f = lambda i, j: (i, j) in ok  # noqa: E731
        assert max_certified(list(range(n)), list(range(m)), f) == max_matching_brute(n, m, f)


def _rand_triple(rng):
    loc = None if rng.random() < 0.4 else rng.choice([BOX, BBox(0, 0, 10, 6), BBox(5, 5, 20, 20)])
    return T(rng.choice("ABC"), rng.choice(["person", "location"]), loc)


def test_gmner_count_bounded_by_mner_and_eeg():
    rng = random.Random(9)
    for _ in range(300):
        golds, preds = [], {}
        for i in range(rng.randint(1, 4)):
            golds.append(S(str(i), [_rand_triple(rng) for _ in range(rng.randint(0, 4))]))
            preds[str(i)] = [_rand_triple(rng) for _ in range(rng.randint(0, 4))]
        g = evaluate_corpus(preds, golds, "gmner").correct
        assert g <= evaluate_corpus(preds, golds, "mner").correct
        assert g <= evaluate_corpus(preds, golds, "eeg").correct


def test_micro_aggregation_is_additive():
    rng = random.Random(4)
    for _ in range(50):
        a_g = [S(f"a{i}", [_rand_triple(rng) for _ in range(rng.randint(0, 3))]) for i in range(3)]
        b_g = [S(f"b{i}", [_rand_triple(rng) for _ in range(rng.randint(0, 3))]) for i in range(3)]
        a_p = {s.id: [_rand_triple(rng) for _ in range(rng.randint(0, 3))] for s in a_g}
        b_p = {s.id: [_rand_triple(rng) for _ in range(rng.randint(0, 3))] for s in b_g}
        joint = evaluate_corpus({**a_p, **b_p}, a_g + b_g)
        assert joint == evaluate_corpus(a_p, a_g) + evaluate_corpus(b_p, b_g)


def test_absent_only_corpus_eeg_matches_textual_bias():
    rng = random.Random(6)
    for _ in range(100):
        golds = [S(str(i), [T(rng.choice("ABC")) for _ in range(rng.randint(0, 3))]) for i in range(3)]
        preds = {s.id: [T(rng.choice("ABC")) for _ in range(rng.randint(0, 3))] for s in golds}
        e = evaluate_corpus(preds, golds, "eeg")
        assert textual_bias_prf(preds, golds) == (e.precision, e.recall, e.f1)


def test_no_target_accuracy_examples():
    golds = [S(str(i), [T("E")]) for i in range(4)]
    preds = {"0": [T("E")], "1": [T("E")], "2": [], "3": [T("E", loc=BOX)]}
    assert no_target_accuracy(preds, golds) == 0.75
    assert no_target_accuracy({s.id: [] for s in golds}, golds) == 1.0
    assert no_target_accuracy({s.id: [T("E", loc=BOX)] for s in golds}, golds) == 0.0
    assert no_target_accuracy({"x": []}, [S("x", [T("E", loc=BOX)])]) is None


def test_vg_precision_examples():
    gold = BBox(0, 0, 10, 10)
    golds = [S(str(i), [T("E", loc=gold)]) for i in range(4)]
    preds = {
        "0": [T("E", loc=BBox(0, 0, 10, 6))],  # 0.6
        "1": [T("E", loc=BBox(0, 0, 10, 9))],  # 0.9
        "2": [T("E", loc=BBox(0, 0, 10, 4))],  # 0.4
        "3": [T("E")],
    }
    assert vg_precision(preds, golds) == 0.5
    assert vg_precision({s.id: [T("E", loc=gold)] for s in golds}, golds) == 1.0
    assert vg_precision({s.id: [] for s in golds}, golds) == 0.0
    assert vg_precision({"x": []}, [S("x", [])]) is None


def test_textual_bias_examples():
    golds = [S("a", [T("A"), T("B", loc=BOX)]), S("b", [T("C")])]
    preds = {"a": [T("A"), T("B"), T("Z")], "b": [T("C"), T("Q", loc=BOX)]}
    n_pre, n_rec, n_f1 = textual_bias_prf(preds, golds)
    assert (n_pre, n_rec) == (0.5, 1.0)
    assert n_f1 == pytest.approx(2 / 3)
    perfect = {s.id: list(s.gold) for s in golds}
    assert textual_bias_prf(perfect, golds) == (1.0, 1.0, 1.0)
    boxed = {"a": [T("A", loc=BOX)], "b": [T("C", loc=BOX)]}
    assert textual_bias_prf(boxed, golds) == (0.0, 0.0, 0.0)


def test_visual_bias_examples():
    assert visual_bias_stats({"f": [T("Kevin Durant")]}, {"f": "Iggy at the game"}) == (1, 1.0)
    sentences = {str(i): f"word{i} appears here" for i in range(10)}
    preds = {str(i): [T(f"word{i}")] for i in range(10)}
    assert visual_bias_stats(preds, sentences) == (0, 0.0)
    preds["3"] = [T("Spurs")]
    preds["7"] = [T("Premier League")]
    assert visual_bias_stats(preds, sentences) == (2, 0.2)
    assert visual_bias_stats({"a": []}, {"a": "x"}) == (0, 0.0)


def test_visual_bias_membership_rule():
    assert visual_bias_stats({"a": [T("kevin   DURANT")]}, {"a": "Kevin Durant\nscores"}) == (0, 0.0)


def test_metrics_report_shape():
    golds = [S("a", [T("A", loc=BOX), T("B")], "A and B"), S("b", [], "nothing")]
    preds = {"a": [T("A", loc=BOX), T("B")], "b": []}
    r = metrics_report(preds, golds, "gmner")
    assert r["primary"]["f1"] == 1.0
    assert set(r["modes"]) == {"gmner", "mner", "eeg"}
    assert r["vg"]["n_acc"] == 1.0 and r["vg"]["precision"] == 1.0
    assert r["bias"]["n_count"] == 0 and r["bias"]["total_recalled"] == 2
    ratios = [r["primary"][k] for k in ("precision", "recall", "f1")] + [r["bias"]["n_rate"]]
    assert all(0 <= x <= 1 for x in ratios)


def test_sample_prf_uses_triple_correct():
    p, g = T("A", loc=BBox(0, 0, 10, 5)), T("A", loc=BOX)
    assert sample_prf([p], [g], TaskMode.GMNER, 0.5).correct == int(triple_correct(p, g))
    assert sample_prf([p], [g], TaskMode.GMNER, 0.6).correct == 0
