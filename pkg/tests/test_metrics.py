import numpy as np
import pytest
from oracles import brute_weighted_f1

from tcaug.model.metrics import accuracy, group_metrics, per_class_metrics, split_majority, weighted_f1


def test_hand_example():
    pc = per_class_metrics(list("AABB"), list("ABBB"))
    assert pc["A"]["f1"] == pytest.approx(100 * 2 / 3)
    assert pc["B"]["f1"] == pytest.approx(100 * 4 / 5)
    assert weighted_f1(list("AABB"), list("ABBB")) == pytest.approx(73.3333333, abs=1e-6)


def test_perfect_and_single_class():
    assert weighted_f1(list("ABCA"), list("ABCA")) == 100.0
    assert weighted_f1(["x"] * 5, ["x"] * 5) == 100.0


def test_errors():
    with pytest.raises(ValueError):
        weighted_f1([], [])
    with pytest.raises(ValueError):
        weighted_f1(["a"], ["a", "b"])


def test_zero_denominators():
    pc = per_class_metrics(["a", "a"], ["b", "b"])
    assert pc["a"] == {"precision": 0.0, "recall": 0.0, "f1": 0.0, "support": 2}
    assert pc["b"]["support"] == 0
    assert weighted_f1(["a", "a"], ["b", "b"]) == 0.0


def test_against_confusion_matrix_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(1, 7))
        n = int(rng.integers(1, 51))
        yt = rng.integers(0, k, n).tolist()
        yp = rng.integers(0, k, n).tolist()
        assert abs(weighted_f1(yt, yp) - brute_weighted_f1(yt, yp)) <= 1e-9


def test_supports_sum_and_accuracy():
    yt, yp = list("AABBBCC"), list("ABBBCCA")
    pc = per_class_metrics(yt, yp)
    assert sum(m["support"] for m in pc.values()) == 7
    assert accuracy(yt, yp) == pytest.approx(400 / 7)


def _toy4():
    # A: 3 of 4 right (one to B); B: 2/2; C: 1/2 (one to D); D: 2/2
    yt = list("AAAABBCCDD")
    yp = list("AAABBBCDDD")
    return per_class_metrics(yt, yp)


def test_group_metrics_hand_values():
    g = group_metrics(_toy4(), {"A", "B"})
    maj, mino = g["majority"], g["minority"]
    assert maj["support"] == 6 and mino["support"] == 4
    assert maj["precision"] == pytest.approx(100 * 8 / 9)
    assert maj["recall"] == pytest.approx(100 * 5 / 6)
    assert maj["weighted_f1"] == pytest.approx(100 * 88 / 105)
    assert mino["precision"] == pytest.approx(100 * 5 / 6)
    assert mino["recall"] == pytest.approx(75.0)
    assert mino["weighted_f1"] == pytest.approx(100 * 11 / 15)


def test_group_metrics_edge_cases():
    pc = _toy4()
    yt, yp = list("AAAABBCCDD"), list("AAABBBCDDD")
    with pytest.raises(ValueError):
        group_metrics(pc, set(pc))  # empty minority group
    with pytest.raises(ValueError):
        group_metrics(pc, {"Z"})
    two = per_class_metrics(list("ab"), list("ab"))
    g = group_metrics(two, {"a"})
    assert g["majority"]["weighted_f1"] == two["a"]["f1"]
    assert g["minority"]["precision"] == two["b"]["precision"]
    # support-weighted recombination of the two groups gives the overall score
    g = group_metrics(pc, {"A", "B"})
    whole = (g["majority"]["weighted_f1"] * 6 + g["minority"]["weighted_f1"] * 4) / 10
    assert whole == pytest.approx(weighted_f1(yt, yp))


def test_split_majority():
    counts = {"a": 100, "b": 50, "c": 10, "d": 5}
    assert split_majority(counts) == {"a", "b"}
    assert split_majority(counts, 1) == {"a"}
