import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zslias.errors import ValidationError
from zslias.metrics import (confusion, distribution_distances, gaussian_divergences, per_class_accuracy,
                            sliced_wasserstein, wasserstein_1d)


def test_per_class_accuracy_examples():
    assert per_class_accuracy([0, 1, 1], [0, 1, 1]) == 1.0
    # class 0 (1 sample) all right, class 1 (9 samples) all wrong
    assert per_class_accuracy([0] + [0] * 9, [0] + [1] * 9) == 0.5


def test_per_class_accuracy_errors():
    with pytest.raises(ValidationError):
        per_class_accuracy([0, 1], [0])
    with pytest.raises(ValidationError, match="empty"):
        per_class_accuracy([], [])


def test_per_class_accuracy_brute_force():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 5, 300)
    preds = np.where(rng.random(300) < 0.6, labels, rng.integers(0, 5, 300))
    accs = []
    for c in range(5):
        idx = [i for i in range(300) if labels[i] == c]
        accs.append(sum(preds[i] == c for i in idx) / len(idx))
    assert per_class_accuracy(preds, labels) == pytest.approx(sum(accs) / 5)


def test_confusion_properties():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 4, 100)
    preds = rng.integers(0, 4, 100)
    cm = confusion(preds, labels, 4)
    assert cm.counts.sum(axis=1).tolist() == np.bincount(labels, minlength=4).tolist()
    assert cm.counts.sum(axis=0).tolist() == np.bincount(preds, minlength=4).tolist()
    diag = np.diag(cm.percent) / 100
    assert diag.mean() == pytest.approx(per_class_accuracy(preds, labels))
    perfect = confusion(labels, labels, 4)
    assert np.array_equal(perfect.counts, np.diag(np.bincount(labels, minlength=4)))


def test_confusion_out_of_range():
    with pytest.raises(ValidationError, match="out of range"):
        confusion([0, 3], [0, 1], 3)


def test_confusion_csv_header():
    text = confusion([0, 1], [0, 1], 2, ("cat", "dog")).to_csv()
    assert text.splitlines()[0] == "true\\pred,cat,dog"


def test_wasserstein_closed_forms():
    x = np.random.default_rng(2).normal(size=(30, 3))
    assert sliced_wasserstein(x, x) == 0.0
    assert sliced_wasserstein(np.zeros((5, 1)), np.full((7, 1), -2.5), n_projections=3) == pytest.approx(2.5)


def test_wasserstein_1d_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(3)
    for n, m in [(10, 10), (7, 13), (50, 3)]:
        u, v = rng.normal(size=n), rng.normal(1.0, 2.0, size=m)
        assert wasserstein_1d(u, v) == pytest.approx(scipy_stats.wasserstein_distance(u, v), rel=1e-10)


def test_wasserstein_errors():
    with pytest.raises(ValidationError, match="empty"):
        sliced_wasserstein(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(ValidationError, match="dimension"):
        sliced_wasserstein(np.zeros((2, 2)), np.zeros((3, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_translation_moves_distance_by_at_most_shift(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(20, 4)), rng.normal(size=(25, 4))
    v = rng.normal(size=4)
    diff = abs(sliced_wasserstein(x + v, y) - sliced_wasserstein(x, y))
    assert diff <= np.linalg.norm(v) + 1e-9


def test_gaussian_closed_forms():
    # identical fitted moments
    x = np.array([[-1.0], [1.0]])
    assert gaussian_divergences(x, x) == {"kl": 0.0, "hellinger": 0.0, "bhattacharyya": 0.0}
    mu = 1.7
    out = gaussian_divergences(x, x + mu)
    assert out["kl"] == pytest.approx(mu ** 2 / 2)
    assert out["bhattacharyya"] == pytest.approx(mu ** 2 / 8)
    assert out["hellinger"] == pytest.approx(np.sqrt(1 - np.exp(-mu ** 2 / 8)))


def test_gaussian_needs_two_samples():
    with pytest.raises(ValidationError):
        gaussian_divergences(np.zeros((1, 2)), np.zeros((3, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_ranges_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(15, 3))
    y = rng.normal(rng.normal(size=3), rng.uniform(0.2, 3.0), size=(12, 3))
    a, b = distribution_distances(x, y), distribution_distances(y, x)
    assert 0.0 <= a["hellinger"] <= 1.0
    assert a["kl"] >= 0.0
    for k in ("wasserstein", "hellinger", "bhattacharyya"):
        assert a[k] == pytest.approx(b[k], rel=1e-9, abs=1e-12)
