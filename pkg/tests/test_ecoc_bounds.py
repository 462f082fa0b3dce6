import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zslias.ecoc_bounds import (BoundReport, attribute_distance, bound_report, check_error_correcting,
                                decode_all, decode_nearest, empirical_attribute_loss, generalization_bound,
                                min_attribute_distance, pac_bound, pairwise_distances, test_error_bound)
from zslias.errors import ValidationError

# mpmath, 30 digits: 10*(4 ln 40 + 24 ln 130) and 0.1 + sqrt((50 (ln 40 + 1) + ln 80) / 1000)
PAC_10_1_005_2 = 1315.763446273897
TEST_ERR_01_1000_50_005 = 0.5886982702449137


@pytest.mark.parametrize("a, b, d", [([1, 0, 1], [1, 1, 0], 2), ([1, 1, 0], [1, 1, 0], 0), ([0, 0], [1, 1], 2)])
def test_attribute_distance(a, b, d):
    assert attribute_distance(a, b) == d


def test_attribute_distance_length_mismatch():
    with pytest.raises(ValidationError):
        attribute_distance([0, 1], [0, 1, 1])


def test_min_distance_examples():
    assert min_attribute_distance([[0, 0], [0, 1], [1, 1]]) == 1
    assert min_attribute_distance([[0, 0, 0], [1, 1, 1]]) == 3


def test_min_distance_duplicate_rows():
    with pytest.raises(ValidationError, match="tau = 0"):
        min_attribute_distance([[0, 1], [0, 1]])


def test_decode_examples():
    assert decode_nearest([0, 1], [[0, 0], [0, 1]]) == 1
    assert decode_nearest([1, 1, 1], [[0, 0, 0], [1, 1, 0]]) == 1
    # equidistant (distance 1) from rows 0 and 2
    assert decode_nearest([0, 1, 0], [[0, 0, 0], [1, 1, 1], [0, 1, 1]]) == 0


def test_decode_empty_candidates():
    with pytest.raises(ValidationError, match="empty"):
        decode_nearest([0, 1], np.zeros((0, 2)))


def test_decode_all_matches_single():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, (6, 9))
    c = rng.integers(0, 2, (40, 9))
    assert decode_all(c, a).tolist() == [decode_nearest(r, a) for r in c]


def test_check_error_correcting_examples():
    a = np.array([[0, 0, 0, 0], [1, 1, 0, 0], [0, 1, 1, 1]])
    assert check_error_correcting(a, [0, 1, 2], a) == []
    # predicted codeword is another class's signature
    assert check_error_correcting(a[[1]], [0], a) == []


@pytest.mark.parametrize("args, expected", [((85, 30, 0.1), 0.566667), ((7, 3, 0.0), 0.0), ((4, 2, 0.5), 2.0)])
def test_generalization_bound_examples(args, expected):
    assert generalization_bound(*args) == pytest.approx(expected, abs=1e-6)


def test_generalization_bound_tau_zero():
    with pytest.raises(ValidationError):
        generalization_bound(4, 0, 0.1)


def test_empirical_loss_examples():
    a = np.array([[0, 1, 0, 1], [1, 0, 0, 1]])
    y = np.array([0, 1, 1, 0])
    per, mean = empirical_attribute_loss(a[y], y, a)
    assert per.tolist() == [0, 0, 0, 0] and mean == 0.0
    flipped = a[y].copy()
    flipped[:, 0] ^= 1
    per, mean = empirical_attribute_loss(flipped, y, a)
    assert per.tolist() == [1, 0, 0, 0] and mean == 0.25


def test_empirical_loss_brute_force():
    rng = np.random.default_rng(5)
    a = rng.integers(0, 2, (5, 7))
    y = rng.integers(0, 5, 60)
    c = rng.integers(0, 2, (60, 7))
    per, mean = empirical_attribute_loss(c, y, a)
    expected = [sum(int(c[n, m] != a[y[n], m]) for n in range(60)) / 60 for m in range(7)]
    assert per.tolist() == pytest.approx(expected)
    assert mean == pytest.approx(sum(expected) / 7)


def test_pac_bound_oracle():
    assert pac_bound(10, 1, 0.05, 2) == pytest.approx(PAC_10_1_005_2, abs=1e-6)


def test_test_error_bound_oracle():
    assert test_error_bound(0.1, 1000, 50, 0.05) == pytest.approx(TEST_ERR_01_1000_50_005, abs=1e-9)
    # zero training error leaves only the square-root term
    assert test_error_bound(0.0, 1000, 50, 0.05) == pytest.approx(TEST_ERR_01_1000_50_005 - 0.1, abs=1e-9)


@pytest.mark.parametrize("args", [(10, 0, 0.05, 2), (10, 11, 0.05, 2), (10, 1, 0.0, 2), (10, 1, 0.05, 0)])
def test_pac_bound_rejects(args):
    with pytest.raises(ValidationError):
        pac_bound(*args)


def test_test_error_bound_rejects():
    with pytest.raises(ValidationError):
        test_error_bound(0.1, 10, 25, 0.05)
    with pytest.raises(ValidationError):
        test_error_bound(1.5, 10, 5, 0.05)


def test_bound_report_json_fields():
    a = np.array([[0, 0, 1], [1, 1, 0], [0, 1, 1]])
    rep = bound_report(a[[0, 1, 2, 2]], [0, 1, 2, 2], a)
    d = json.loads(rep.to_json())
    assert set(d) == {"n_attributes", "tau", "mean_loss", "generalization_bound", "empirical_error",
                      "per_attribute_loss"}
    assert isinstance(rep, BoundReport)
    assert d["generalization_bound"] == 0.0 and d["empirical_error"] == 0.0


def random_instance(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 11))
    na = int(rng.integers(max(1, int(np.ceil(np.log2(k)))), 21))
    while True:
        a = rng.integers(0, 2, (k, na))
        if len({r.tobytes() for r in a}) == k:
            break
    n = int(rng.integers(1, 201))
    y = rng.integers(0, k, n)
    flip = rng.random((n, na)) < rng.uniform(0, 0.6)
    c = np.where(flip, 1 - a[y], a[y])
    return a, y, c


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decoder_error_never_exceeds_bound(seed):
    a, y, c = random_instance(seed)
    rep = bound_report(c, y, a)
    assert rep.empirical_error <= rep.generalization_bound
    assert rep.generalization_bound == 2 * rep.n_attributes * rep.mean_loss / rep.tau
    assert check_error_correcting(c, y, a) == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pairwise_distances_metric(seed):
    a, _, _ = random_instance(seed)
    d = pairwise_distances(a)
    assert np.array_equal(d, d.T) and not np.diag(d).any()
    k = d.shape[0]
    for i in range(k):
        for j in range(k):
            assert np.all(d[i, j] <= d[i] + d[:, j])
