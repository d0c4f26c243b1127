import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairclass.metrics import (
    confusion_counts,
    disparate_impact,
    disparate_mistreatment,
    fairness_metric,
    final_metrics,
    group_rate,
    metrics_report,
    rate_gap,
)

import oracles
from conftest import make_dataset


def data_for(y, s):
    return make_dataset(np.zeros((len(y), 1)), y, s)


class TestConfusion:
    def test_perfect(self):
        c = confusion_counts([1, -1], [1, -1])
        assert (c.tp, c.tn, c.fp, c.fn) == (1, 1, 0, 0)

    def test_inverted(self):
        c = confusion_counts([1, -1], [-1, 1])
        assert (c.fn, c.fp) == (1, 1)

    def test_mixed(self):
        c = confusion_counts([1, 1, -1, -1], [1, -1, 1, -1])
        assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_counts([1, -1], [1])

    def test_split_by_sensitive_sums(self):
        c = confusion_counts([1, 1, -1, -1, 1], [1, -1, 1, -1, 1], s=[0, 1, 0, 1, 1])
        c0, c1 = c.by_sensitive
        for f in ("tp", "tn", "fp", "fn"):
            assert getattr(c0, f) + getattr(c1, f) == getattr(c, f)


class TestFinalMetrics:
    def test_accuracy_from_counts(self):
        y = [1] * 55 + [-1] * 45
        pred = [1] * 50 + [-1] * 5 + [-1] * 40 + [1] * 5
        m = final_metrics(y, pred)
        assert m.accuracy == pytest.approx(0.90)
        assert (m.counts.tp, m.counts.tn, m.counts.fp, m.counts.fn) == (50, 40, 5, 5)

    def test_all_correct(self):
        m = final_metrics([1, -1, 1], [1, -1, 1])
        assert (m.accuracy, m.fpr, m.fnr) == (1.0, 0.0, 0.0)

    def test_no_negatives(self):
        m = final_metrics([1, 1], [1, -1])
        assert math.isnan(m.fpr) and math.isnan(m.tnr)
        assert m.fnr == 0.5 and m.recall == m.tpr == 0.5

    def test_ten_fields(self):
        keys = set(final_metrics([1, -1], [1, 1]).to_dict())
        assert keys == {"Accuracy", "FPR", "FNR", "TPR", "TNR", "Recall", "TP", "FP", "TN", "FN"}


class TestDisparateImpact:
    def test_equal_rates(self):
        d = data_for([1] * 4, [0, 0, 1, 1])
        assert disparate_impact(d, [1, -1, 1, -1], "s") == 0.0

    def test_ratio_two_and_half_agree(self):
        s = [0] * 4 + [1] * 4
        d = data_for([1] * 8, s)
        a = disparate_impact(d, [1, 1, -1, -1, 1, -1, -1, -1], "s")
        b = disparate_impact(d, [1, -1, -1, -1, 1, 1, -1, -1], "s")
        assert a == b == 0.5

    def test_quarter_vs_half(self):
        s = [0] * 4 + [1] * 4
        d = data_for([1] * 8, s)
        assert disparate_impact(d, [1, -1, -1, -1, 1, 1, -1, -1], "s") == 0.5

    def test_one_sided_zero(self):
        d = data_for([1] * 4, [0, 0, 1, 1])
        assert disparate_impact(d, [-1, -1, 1, -1], "s") == 1.0

    def test_two_sided_zero(self):
        d = data_for([1] * 4, [0, 0, 1, 1])
        assert disparate_impact(d, [-1] * 4, "s") == 0.0

    def test_empty_category(self):
        d = data_for([1] * 3, [0, 0, 0])
        with pytest.raises(ValueError):
            disparate_impact(d, [1, -1, 1], "s")


class TestRateGaps:
    def test_identical_confusion(self):
        y = [1, -1, 1, -1]
        d = data_for(y, [0, 0, 1, 1])
        for kind in ("FPR", "FNR", "TPR", "TNR"):
            assert rate_gap(d, y, [1, 1, 1, 1], "s", kind) == 0.0

    def test_fpr_gap(self):
        # ten negatives per category; 3 false positives in s=0, 1 in s=1
        y = [-1] * 20
        s = [0] * 10 + [1] * 10
        pred = [1] * 3 + [-1] * 7 + [1] + [-1] * 9
        assert rate_gap(data_for(y, s), y, pred, "s", "FPR") == pytest.approx(0.2)

    def test_tpr_equals_fnr_gap(self, rng):
        y = rng.choice([-1, 1], 30)
        s = rng.integers(0, 2, 30)
        y[:4], s[:4] = (1, 1, -1, -1), (0, 1, 0, 1)
        pred = rng.choice([-1, 1], 30)
        d = data_for(y, s)
        assert rate_gap(d, y, pred, "s", "TPR") == pytest.approx(rate_gap(d, y, pred, "s", "FNR"), abs=1e-15)

    def test_empty_set_named(self):
        y = [1, 1, -1]
        d = data_for(y, [0, 1, 1])
        with pytest.raises(ValueError, match="DN_0"):
            group_rate(d, y, [1, 1, 1], "s", "FPR", 0)


class TestDisparateMistreatment:
    def test_mean_of_gaps(self):
        # FPR gap 0.2 and FNR gap 0.4
        y = [-1] * 10 + [1] * 5 + [-1] * 10 + [1] * 5
        s = [0] * 15 + [1] * 15
        pred = [1] * 3 + [-1] * 7 + [-1] * 2 + [1] * 3 + [1] + [-1] * 9 + [1] * 5
        d = data_for(y, s)
        assert rate_gap(d, y, pred, "s", "FPR") == pytest.approx(0.2)
        assert rate_gap(d, y, pred, "s", "FNR") == pytest.approx(0.4)
        assert disparate_mistreatment(d, y, pred, "s") == pytest.approx(0.3)

    def test_parity(self):
        y = [1, -1, 1, -1]
        assert disparate_mistreatment(data_for(y, [0, 0, 1, 1]), y, y, "s") == 0.0

    def test_maximal(self):
        y = [1, -1, 1, -1]
        pred = [1, -1, -1, 1]
        assert disparate_mistreatment(data_for(y, [0, 0, 1, 1]), y, pred, "s") == 1.0


class TestReport:
    def test_nan_for_undefined(self):
        y = [1, 1, -1]
        r = metrics_report(data_for(y, [0, 1, 1]), y, [1, 1, 1], ["s"])
        assert math.isnan(r["DM[s]"]) and r["DI[s]"] == 0.0

    def test_dispatch(self):
        y = [1, -1, 1, -1]
        d = data_for(y, [0, 0, 1, 1])
        assert fairness_metric("dm", d, y, y, "s") == 0.0
        assert fairness_metric("TNR", d, y, y, "s") == 0.0


pairs = st.lists(
    st.tuples(st.sampled_from([-1, 1]), st.sampled_from([-1, 1]), st.integers(0, 1)),
    min_size=4,
    max_size=40,
)


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(pairs)
    def test_matches_brute_force(self, rows):
        y, pred, s = (list(c) for c in zip(*rows))
        d = data_for(y, s)
        for name in ("DI", "DM", "FPR", "FNR", "TPR", "TNR"):
            try:
                want = oracles.metric(name, y, pred, s)
            except ValueError:
                with pytest.raises(ValueError):
                    fairness_metric(name, d, y, pred, "s")
                continue
            got = fairness_metric(name, d, y, pred, "s")
            assert abs(got - want) <= 1e-12
            assert 0.0 <= got <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(pairs)
    def test_di_symmetric_in_categories(self, rows):
        y, pred, s = (list(c) for c in zip(*rows))
        if len(set(s)) < 2:
            return
        flipped = [1 - k for k in s]
        assert disparate_impact(data_for(y, s), pred, "s") == pytest.approx(
            disparate_impact(data_for(y, flipped), pred, "s"), abs=1e-15
        )

    def test_independent_predictions_are_fair(self):
        # same (label, prediction) pattern repeated in both categories
        y = [1, 1, -1, -1] * 2
        pred = [1, -1, 1, -1] * 2
        s = [0] * 4 + [1] * 4
        d = data_for(y, s)
        assert disparate_impact(d, pred, "s") == 0.0
        assert rate_gap(d, y, pred, "s", "FPR") == 0.0
        assert rate_gap(d, y, pred, "s", "FNR") == 0.0
