import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cdsnet.metrics import (
    class_accuracy,
    class_prior,
    confusion_matrix,
    evaluate_logits,
    instance_accuracy,
    logit_adjust,
    per_class_recall,
    predict,
)
from cdsnet.tensor import ContractError, DimensionError

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
# multiples of 1/8: distinct logits stay distinct after a rounded constant shift
grid = st.integers(-400, 400).map(lambda k: k / 8)


class TestLogitAdjust:
    def test_tau_zero_is_identity(self, rng):
        lg = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(logit_adjust(lg, np.array([0.5, 0.3, 0.2]), 0.0), lg)

    def test_hand_example_flips_argmax(self):
        out = logit_adjust(np.array([2.0, 1.0]), np.array([0.9, 0.1]), 1.0)
        np.testing.assert_allclose(out, [2.0 - math.log(0.9), 1.0 - math.log(0.1)])
        assert out.round(3).tolist() == [2.105, 3.303]
        assert predict(out) == 1

    def test_zero_prior_rejected(self):
        with pytest.raises(ContractError):
            logit_adjust(np.zeros((1, 2)), np.array([1.0, 0.0]))

    def test_non_finite_tau_rejected(self):
        with pytest.raises(ContractError):
            logit_adjust(np.zeros((1, 2)), np.array([0.5, 0.5]), float("nan"))

    def test_class_count_mismatch(self):
        with pytest.raises(DimensionError):
            logit_adjust(np.zeros((1, 3)), np.array([0.5, 0.5]))

    @given(arrays(np.float64, (6, 5), elements=grid), st.floats(0, 5))
    def test_uniform_prior_keeps_argmax(self, lg, tau):
        np.testing.assert_array_equal(predict(logit_adjust(lg, np.full(5, 0.2), tau)), predict(lg))

    @given(st.floats(0.51, 0.99), st.floats(1e-3, 10), finite)
    def test_rarer_class_wins_ties(self, pa, tau, l):
        out = logit_adjust(np.array([l, l]), np.array([pa, 1 - pa]), tau)
        assert out[1] > out[0]


class TestPrior:
    def test_normalized(self):
        p = class_prior([5000, 2500, 83])
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(p, np.array([5000, 2500, 83]) / 7583)

    def test_zero_count_floor(self):
        p = class_prior([9, 0])
        assert p[1] > 0
        # floor 1/(total+N) before renormalizing
        np.testing.assert_allclose(p, np.array([1.0, 1 / 11]) / (1 + 1 / 11))

    def test_negative_counts_rejected(self):
        with pytest.raises(ContractError):
            class_prior([3, -1])


class TestAccuracy:
    def test_all_correct(self):
        y = np.array([0, 1, 2, 2])
        assert instance_accuracy(y, y) == 1.0 and class_accuracy(y, y, 3) == 1.0

    def test_ninety_ten(self):
        y = np.array([0] * 90 + [1] * 10)
        p = np.zeros(100, dtype=int)
        assert instance_accuracy(p, y) == pytest.approx(0.9)
        assert class_accuracy(p, y, 2) == pytest.approx(0.5)

    def test_absent_class_excluded(self):
        y = np.array([0, 0, 1])
        p = np.array([0, 1, 1])
        assert np.isnan(per_class_recall(p, y, 3)[2])
        assert class_accuracy(p, y, 3) == pytest.approx(0.75)

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            instance_accuracy(np.array([], dtype=int), np.array([], dtype=int))

    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60), st.randoms())
    def test_permutation_invariance(self, pairs, rnd):
        p, y = map(np.array, zip(*pairs))
        perm = list(range(len(p)))
        rnd.shuffle(perm)
        assert instance_accuracy(p[perm], y[perm]) == instance_accuracy(p, y)
        assert class_accuracy(p[perm], y[perm], 5) == class_accuracy(p, y, 5)

    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
    def test_bounded(self, pairs):
        p, y = map(np.array, zip(*pairs))
        assert 0 <= instance_accuracy(p, y) <= 1
        assert 0 <= class_accuracy(p, y, 5) <= 1

    def test_balanced_symmetric_errors(self):
        # each class: 3 right, 1 sent to the next class
        y = np.repeat(np.arange(4), 4)
        p = y.copy()
        p[3::4] = (y[3::4] + 1) % 4
        assert instance_accuracy(p, y) == class_accuracy(p, y, 4) == 0.75


class TestConfusion:
    def test_perfect_is_diagonal(self):
        y = np.array([0, 1, 1, 2])
        cm = confusion_matrix(y, y, 3)
        np.testing.assert_array_equal(cm, np.diag([1, 2, 1]))

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=80))
    def test_rows_and_trace(self, pairs):
        p, y = map(np.array, zip(*pairs))
        cm = confusion_matrix(p, y, 6)
        np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(y, minlength=6))
        assert abs(np.trace(cm) / cm.sum() - instance_accuracy(p, y)) < 1e-9

    def test_out_of_range(self):
        with pytest.raises(ContractError):
            confusion_matrix(np.array([3]), np.array([0]), 3)


class TestReport:
    def test_schema(self, rng):
        lg = rng.standard_normal((20, 3))
        y = rng.integers(0, 3, 20)
        rep = evaluate_logits(lg, y, ["a", "b", "c"], prior=np.array([0.6, 0.3, 0.1]), tau=1.0)
        d = json.loads(rep.to_json())
        assert set(d) == {"i_acc", "c_acc", "per_class", "confusion", "logit_adjustment"}
        assert d["logit_adjustment"] == {"enabled": True, "tau": 1.0}
        assert [c["name"] for c in d["per_class"]] == ["a", "b", "c"]
        assert sum(c["support"] for c in d["per_class"]) == 20

    def test_unadjusted(self, rng):
        lg = rng.standard_normal((10, 2))
        rep = evaluate_logits(lg, np.zeros(10, dtype=int), ["a", "b"])
        assert rep.logit_adjustment["enabled"] is False
        assert rep.per_class[1]["recall"] is None
