import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, roc_auc_score

from fcmwdtw.errors import UndefinedMetricError
from fcmwdtw.metrics import evaluate, pr_auc, roc_auc
from oracles import average_precision_sweep, roc_auc_pairs


def test_roc_examples():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert roc_auc([3, 3, 3, 3], [0, 1, 0, 1]) == 0.5


def test_pr_examples():
    assert pr_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert pr_auc([0.9, 0.1], [1, 0]) == 1.0


def test_pr_random_scores_approach_positive_rate():
    rng = np.random.default_rng(2024)
    labels = (rng.random(10_000) < 0.1).astype(int)
    rate = labels.mean()
    assert pr_auc(rng.random(10_000), labels) == pytest.approx(rate, abs=0.02)


@pytest.mark.parametrize("fn", [roc_auc, pr_auc])
def test_one_class_is_undefined(fn):
    with pytest.raises(UndefinedMetricError):
        fn([0.1, 0.2], [0, 0])
    with pytest.raises(UndefinedMetricError):
        fn([0.1, 0.2], [1, 1])


labelled = st.integers(2, 120).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 15).map(float), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@settings(max_examples=150, deadline=None)
@given(labelled)
def test_against_brute_force_and_sklearn(data):
    scores, labels = data
    assert roc_auc(scores, labels) == pytest.approx(roc_auc_pairs(scores, labels), abs=1e-9)
    assert pr_auc(scores, labels) == pytest.approx(average_precision_sweep(scores, labels), abs=1e-9)
    assert roc_auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores), abs=1e-9)
    assert pr_auc(scores, labels) == pytest.approx(average_precision_score(labels, scores), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(labelled)
def test_roc_monotone_invariance_and_reversal(data):
    scores, labels = np.array(data[0]), data[1]
    base = roc_auc(scores, labels)
    assert roc_auc(np.exp(scores / 4) * 3 - 1, labels) == pytest.approx(base, abs=1e-12)
    if len(set(scores)) == len(scores):
        assert base + roc_auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


def test_reversal_without_ties(rng):
    scores = rng.random(50)
    labels = (rng.random(50) < 0.3).astype(int)
    labels[:2] = [0, 1]
    assert roc_auc(scores, labels) + roc_auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


def test_evaluate_counts():
    res = evaluate([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert (res.n_pos, res.n_neg) == (2, 2) and res.roc_auc == pytest.approx(0.75)
