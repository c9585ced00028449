import math
from collections import Counter

import numpy as np
import pytest

from knnga.data_model import AttributeSpec, Dataset, Role
from knnga.errors import EmptyTrainingSet, KTooLarge, SchemaMismatch
from knnga.knn_core import (
    KnnConfig,
    MissingPolicy,
    Weighting,
    classify,
    classify_batch,
    distance,
)
from knnga.preprocess import Normalization, apply, fit

XY_SCHEMA = (AttributeSpec.numeric("x"), AttributeSpec.numeric("y"),
             AttributeSpec.nominal("cls", ["A", "B"], role=Role.CLASS))
MIXED_SCHEMA = (AttributeSpec.numeric("u"), AttributeSpec.nominal("c", ["r", "g", "b"]),
                AttributeSpec.numeric("v"), AttributeSpec.nominal("f", ["t", "f"]),
                AttributeSpec.nominal("cls", ["A", "B", "C"], role=Role.CLASS))


def test_distance_examples():
    assert distance((0.0, 0.0, 0), (3.0, 4.0, 1), XY_SCHEMA) == 5.0
    one_nominal = (AttributeSpec.nominal("c", ["r", "g"]), AttributeSpec.nominal("cls", ["A"], role=Role.CLASS))
    assert distance((0, 0), (1, 0), one_nominal) == 1.0
    assert distance((1, 0), (1, 0), one_nominal) == 0.0


def test_distance_missing_policies():
    a = (None, 0, 0.5, None, 0)
    b = (0.25, 1, 0.5, 0, 1)
    # mean impute: u -> fill 0.75, delta 0.5; c differs: 1; v: 0; f missing: 0.5
    assert distance(a, b, MIXED_SCHEMA, MissingPolicy.MEAN_IMPUTE, fill={0: 0.75, 2: 0.0}) == \
        pytest.approx(math.sqrt(0.25 + 1 + 0 + 0.25))
    assert distance(a, b, MIXED_SCHEMA, MissingPolicy.MAX_PENALTY) == pytest.approx(math.sqrt(3.0))
    with pytest.raises(ValueError):
        distance(a, b, MIXED_SCHEMA, MissingPolicy.MEAN_IMPUTE)
    with pytest.raises(SchemaMismatch):
        distance((0.0, 0), b, MIXED_SCHEMA)


def _random_row(rng):
    return (float(rng.random()), int(rng.integers(3)), float(rng.random()), int(rng.integers(2)), 0)


def test_metric_axioms_random_triples():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        a, b, c = _random_row(rng), _random_row(rng), _random_row(rng)
        dab = distance(a, b, MIXED_SCHEMA)
        assert dab >= 0.0
        assert dab == distance(b, a, MIXED_SCHEMA)
        assert distance(a, c, MIXED_SCHEMA) <= dab + distance(b, c, MIXED_SCHEMA) + 1e-9
        assert distance(a, a, MIXED_SCHEMA) == 0.0
        if dab == 0.0:
            assert a[:4] == b[:4]


def _two_clusters():
    rows = [(0.0, 0.0, 0), (0.1, 0.2, 0), (0.2, 0.1, 0), (0.15, 0.05, 0),
            (10.0, 10.0, 1), (10.2, 9.9, 1), (9.8, 10.1, 1), (10.1, 10.3, 1)]
    return Dataset(XY_SCHEMA, tuple(rows), "clusters")


def _oracle(train: Dataset, query, k, weighting=Weighting.MAJORITY, norm=Normalization.MINMAX):
    """Brute force on normalized complete rows: sort by (distance, index), count votes."""
    m = fit(train, norm)
    t = apply(m, train)
    q = apply(m, train.with_rows([query])).rows[0]
    ranked = sorted(range(len(t)), key=lambda i: (distance(q, t.rows[i], t.schema), i))[:k]
    votes = Counter()
    for i in ranked:
        d = distance(q, t.rows[i], t.schema)
        votes[t.rows[i][t.class_index]] += 1.0 if weighting is Weighting.MAJORITY else 1.0 / (d + 1e-9)
    best = max(votes.values())
    return min(c for c, v in votes.items() if v == best)


def test_single_row_training_set():
    d = Dataset(XY_SCHEMA, ((1.0, 2.0, 0),))
    assert classify(d, fit(d), d.rows[0], KnnConfig(k=1)).label == 0


def test_two_clusters_k3():
    d = _two_clusters()
    query = (9.9, 10.0, 0)
    pred = classify(d, fit(d), query, KnnConfig(k=3))
    assert pred.label == 1 == _oracle(d, query, 3)
    m = fit(d)
    t, q = apply(m, d), apply(m, d.with_rows([query])).rows[0]
    brute = sorted(range(len(d)), key=lambda i: (distance(q, t.rows[i], t.schema), i))[:3]
    assert [n.index for n in pred.neighbors] == brute == [4, 6, 5]


def test_k_equals_train_size_gives_modal_class():
    d = Dataset(XY_SCHEMA, ((0.0, 0.0, 1), (1.0, 1.0, 1), (5.0, 5.0, 0), (2.0, 9.0, 1), (4.0, 4.0, 0)))
    for q in [(0.0, 0.0, 0), (5.0, 5.0, 0), (100.0, -3.0, 0)]:
        assert classify(d, fit(d), q, KnnConfig(k=len(d))).label == 1


def test_vote_tie_goes_to_lower_class_index():
    d = Dataset(XY_SCHEMA, ((1.0, 0.0, 1), (-1.0, 0.0, 0)))
    pred = classify(d, fit(d, Normalization.NONE), (0.0, 0.0, 0), KnnConfig(k=2, normalization="none"))
    assert pred.weights == (1.0, 1.0) and pred.label == 0


def test_neighbor_tie_keeps_lower_index():
    d = Dataset(XY_SCHEMA, ((1.0, 0.0, 1), (-1.0, 0.0, 0), (0.0, 1.0, 0)))
    pred = classify(d, fit(d, Normalization.NONE), (0.0, 0.0, 0), KnnConfig(k=1, normalization="none"))
    assert pred.neighbors[0].index == 0 and pred.label == 1


def test_inverse_distance_exact_match_dominates():
    d = Dataset(XY_SCHEMA, ((0.0, 0.0, 1), (0.1, 0.0, 0), (0.0, 0.1, 0)))
    m = fit(d, Normalization.NONE)
    cfg = KnnConfig(k=3, weighting=Weighting.INVERSE_DISTANCE, normalization="none")
    assert classify(d, m, (0.0, 0.0, 0), cfg).label == 1
    assert classify(d, m, (0.0, 0.0, 0), KnnConfig(k=3, normalization="none")).label == 0


def test_inverse_distance_equal_distances_matches_majority():
    rows = ((1.0, 0.0, 0), (-1.0, 0.0, 1), (0.0, 1.0, 1), (0.0, -1.0, 0))
    d = Dataset(XY_SCHEMA, rows)
    m = fit(d, Normalization.NONE)
    q = (0.0, 0.0, 0)
    a = classify(d, m, q, KnnConfig(k=4, weighting=Weighting.INVERSE_DISTANCE, normalization="none"))
    b = classify(d, m, q, KnnConfig(k=4, normalization="none"))
    assert a.label == b.label


def test_errors():
    d = _two_clusters()
    with pytest.raises(KTooLarge):
        classify(d, fit(d), d.rows[0], KnnConfig(k=9))
    empty = Dataset(XY_SCHEMA, ())
    with pytest.raises(EmptyTrainingSet):
        classify(empty, fit(d), d.rows[0], KnnConfig(k=1))
    with pytest.raises(SchemaMismatch):
        classify(d, fit(d), (1.0, 2.0), KnnConfig(k=1))
    with pytest.raises(ValueError):
        KnnConfig(k=0)


def test_batch_empty_and_equivalence(heart):
    m = fit(heart)
    cfg = KnnConfig(k=5)
    assert classify_batch(heart, m, [], cfg) == []
    queries = heart.rows[:40]
    batch = classify_batch(heart, m, queries, cfg)
    assert batch == [classify(heart, m, q, cfg) for q in queries]
    assert classify_batch(heart, m, queries, cfg, workers=4) == batch


def test_batch_matches_brute_force_oracle(weather):
    m = fit(weather)
    for k in (1, 3, 5):
        for weighting in Weighting:
            cfg = KnnConfig(k=k, weighting=weighting)
            got = [p.label for p in classify_batch(weather, m, weather.rows, cfg)]
            want = [_oracle(weather, q, k, weighting) for q in weather.rows]
            assert got == want


def test_self_classification_k1(heart):
    m = fit(heart)
    preds = classify_batch(heart, m, heart, KnnConfig(k=1))
    assert [p.label for p in preds] == heart.labels.tolist()


def test_permuting_training_rows_keeps_labels(heart):
    rng = np.random.default_rng(5)
    perm = rng.permutation(len(heart))
    shuffled = heart.subset(perm.tolist())
    queries = [heart.rows[i][:13] + (0,) for i in range(0, 270, 9)]
    for k in (1, 3, 5):
        cfg = KnnConfig(k=k)
        a = classify_batch(heart, fit(heart), queries, cfg)
        b = classify_batch(shuffled, fit(shuffled), queries, cfg)
        assert [p.label for p in a] == [p.label for p in b]


def test_missing_values_are_classified(weather):
    rows = [list(r) for r in weather.rows]
    rows[0][1] = None
    rows[3][0] = None
    d = weather.with_rows(rows)
    for policy in MissingPolicy:
        preds = classify_batch(d, fit(d), d, KnnConfig(k=3, missing_policy=policy))
        assert len(preds) == 14
