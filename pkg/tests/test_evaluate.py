import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aberrant.core import PredictionRecord
from aberrant.errors import EmptyInput, LengthMismatch
from aberrant.evaluate import (
    BoxStats,
    ClusterReport,
    GateDecision,
    box_stats,
    cluster_aberrancy,
    default_grid,
    gate_clusters,
    kde,
    production_metrics,
    silverman_bandwidth,
)


def kernel_sum(x, values, h):
    return sum(math.exp(-0.5 * ((x - v) / h) ** 2) for v in values) / (len(values) * h * math.sqrt(2 * math.pi))


def sorted_quantile(xs, p):
    xs = sorted(xs)
    pos = p * (len(xs) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])


def rec(rid, predicted, truth):
    return PredictionRecord(rid, "i.pgm", "s.pgm", None, predicted, truth, 0.5)


class TestKde:
    def test_single_value(self):
        curve = kde([0.5])
        assert curve.grid[np.argmax(curve.density)] == pytest.approx(0.5, abs=0.01)
        assert curve.bandwidth == 0.01
        assert abs(curve.integral() - 1.0) <= 0.02

    def test_symmetric_values(self):
        curve = kde([0.1, 0.3, 0.45, 0.55, 0.7, 0.9])
        np.testing.assert_allclose(curve.grid, 1.0 - curve.grid[::-1], atol=1e-12)
        np.testing.assert_allclose(curve.density, curve.density[::-1], atol=1e-9)

    def test_two_peaks_against_kernel_sum(self):
        values = [0.2, 0.8]
        grid = np.array([0.0, 0.2, 0.5, 0.8, 1.0])
        curve = kde(values, grid, bandwidth=0.05)
        for x, d in zip(grid, curve.density):
            assert d == pytest.approx(kernel_sum(x, values, 0.05), rel=1e-12)
        assert curve.density[1] == pytest.approx(curve.density[3], rel=1e-12)
        assert curve.density[1] > curve.density[2]

    def test_silverman(self):
        x = np.array([0.1, 0.4, 0.5, 0.9, 0.3])
        sd = np.std(x, ddof=1)
        iqr = np.percentile(x, 75) - np.percentile(x, 25)
        assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 5 ** -0.2)
        assert silverman_bandwidth([0.3, 0.3, 0.3]) == 0.01

    def test_silverman_rounding_ties_fall_back(self):
        # near-ties that differ in the last bits leave an IQR of ~1e-16
        tie = 0.1 + 0.2
        x = [0.3] * 10 + [tie] * 10 + [0.05, 0.9]
        assert silverman_bandwidth(x) == 0.01

    def test_auto_bandwidth_floored_at_grid_step(self):
        values = np.r_[np.full(30, 0.5), np.linspace(0.5, 0.5001, 30), [0.0, 1.0]]
        grid = default_grid()
        assert silverman_bandwidth(values) < grid[1] - grid[0]
        curve = kde(values)
        assert curve.bandwidth == pytest.approx(grid[1] - grid[0])
        assert curve.integral() == pytest.approx(1.0, abs=0.02)
        assert kde(values, bandwidth=1e-4).bandwidth == 1e-4

    def test_empty(self):
        with pytest.raises(EmptyInput):
            kde([])

    def test_grid_must_ascend(self):
        with pytest.raises(ValueError):
            kde([0.5], grid=[0.0, 1.0, 0.5])

    def test_default_grid(self):
        grid = default_grid()
        assert len(grid) == 256 and grid[0] == -0.2 and grid[-1] == 1.2

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=60))
    def test_nonnegative(self, values):
        assert kde(values).density.min() >= 0.0


class TestBoxStats:
    def test_one_to_five(self):
        b = box_stats([5, 3, 1, 4, 2])
        assert (b.min, b.q1, b.median, b.q3, b.max) == (1, 2, 3, 4, 5)
        assert b.outliers == ()
        assert (b.whisker_low, b.whisker_high) == (1, 5)

    def test_constant(self):
        b = box_stats([0.7] * 6)
        assert b == BoxStats(0.7, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7, ())

    def test_outlier(self):
        b = box_stats([1, 2, 3, 4, 100])
        # fence q3 + 1.5 * IQR = 4 + 3 = 7
        assert b.outliers == (100.0,)
        assert b.whisker_high == 4

    def test_empty(self):
        with pytest.raises(EmptyInput):
            box_stats([])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=100))
    def test_matches_sort_oracle(self, values):
        b = box_stats(values)
        xs = sorted(values)
        q1, med, q3 = (sorted_quantile(xs, p) for p in (0.25, 0.5, 0.75))
        tol = 1e-9 * max(1.0, max(abs(v) for v in xs))
        assert b.q1 == pytest.approx(q1, abs=tol)
        assert b.median == pytest.approx(med, abs=tol)
        assert b.q3 == pytest.approx(q3, abs=tol)
        assert b.min == xs[0] and b.max == xs[-1]
        assert b.min <= b.q1 <= b.median <= b.q3 <= b.max
        lo, hi = b.q1 - 1.5 * (b.q3 - b.q1), b.q3 + 1.5 * (b.q3 - b.q1)
        inside = [v for v in xs if lo <= v <= hi]
        assert (b.whisker_low, b.whisker_high) == (min(inside), max(inside))
        assert list(b.outliers) == [v for v in xs if v < lo or v > hi]


class TestClusterAberrancy:
    def test_all_perfect(self):
        records = [rec(str(i), "pos", "pos") for i in range(5)]
        (report,) = cluster_aberrancy(records, [1.0] * 5, [0] * 5, tau=0.1)
        assert report.aberrancy_rate == 0.0 and report.n == 5

    @pytest.mark.parametrize("below, expected", [(81, 0.81), (25, 0.25)])
    def test_reported_rates(self, below, expected):
        values = [0.03] * below + [0.6] * (100 - below)
        records = [rec(str(i), "pos", "neg") for i in range(100)]
        (report,) = cluster_aberrancy(records, values, [4] * 100, tau=0.1)
        assert report.aberrancy_rate == expected

    def test_unscored_excluded_and_ordering(self):
        records = [rec(str(i), "pos", "pos") for i in range(5)]
        reports = cluster_aberrancy(records, [0.05, None, 0.5, 0.5, None], [2, 2, 0, 2, 0], tau=0.1, cluster_ids=range(4))
        assert [r.cluster_id for r in reports] == [0, 1, 2, 3]
        by_id = {r.cluster_id: r for r in reports}
        assert by_id[2].n == 2 and by_id[2].n_unscored == 1 and by_id[2].aberrancy_rate == 0.5
        assert by_id[0].n == 1 and by_id[0].n_unscored == 1
        assert by_id[1].aberrancy_rate is None and by_id[1].density is None
        assert sum(r.n for r in reports) == 3

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            cluster_aberrancy([rec("a", "pos", "pos")], [0.5, 0.4], [0])

    def test_report_dict_round_trip(self):
        records = [rec(str(i), "pos", "pos") for i in range(4)]
        (report,) = cluster_aberrancy(records, [0.05, 0.2, 0.5, 0.9], [1] * 4)
        again = ClusterReport.from_dict(report.to_dict())
        assert again.to_dict() == report.to_dict()


class TestGate:
    RATES = {0: 0.00, 1: 0.25, 2: 0.04, 3: 0.01, 4: 0.81, 5: 0.04}

    def test_reported_rates_gate_one_and_four(self):
        decision = gate_clusters(self.RATES, 0.2)
        assert decision.gated == {1, 4}
        assert decision.kept == {0, 2, 3, 5}

    def test_rho_one_gates_nothing(self):
        assert gate_clusters(self.RATES, 1.0).gated == frozenset()

    def test_rho_zero_gates_any_aberrancy(self):
        assert gate_clusters(self.RATES, 0.0).gated == {1, 2, 3, 4, 5}

    def test_missing_rate_is_kept(self):
        assert gate_clusters({0: None, 1: 0.5}, 0.2).kept == {0}

    def test_empty(self):
        with pytest.raises(EmptyInput):
            gate_clusters({}, 0.2)

    @given(st.dictionaries(st.integers(0, 9), st.floats(0, 1), min_size=1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_rho(self, rates, r1, r2):
        lo, hi = sorted((r1, r2))
        high, low = gate_clusters(rates, hi), gate_clusters(rates, lo)
        assert high.gated <= low.gated
        assert high.gated | high.kept == set(rates) and not high.gated & high.kept


class TestProductionMetrics:
    def test_all_correct_nothing_gated(self):
        records = [rec(str(i), "pos", "pos") for i in range(4)] + [rec("n", "neg", "neg")]
        m = production_metrics(records, [0, 0, 1, 1, 1], GateDecision(frozenset({0, 1}), frozenset()))
        assert m.baseline_precision == m.gated_precision == 1.0
        assert m.recall_delta == 0.0

    def test_gating_a_false_positive_cluster(self):
        records = (
            [rec(f"tp{i}", "pos", "pos") for i in range(6)]
            + [rec("fp0", "pos", "neg")]
            + [rec(f"fpx{i}", "pos", "neg") for i in range(3)]
        )
        assignments = [0] * 7 + [1] * 3
        m = production_metrics(records, assignments, GateDecision(frozenset({0}), frozenset({1})))
        assert m.baseline_precision == pytest.approx(0.6)
        assert m.gated_precision == pytest.approx(6 / 7)
        assert m.gated_precision == pytest.approx(0.857, abs=1e-3)
        assert m.recall_delta == 0.0
        assert m.per_cluster_precision == {0: pytest.approx(6 / 7), 1: 0.0}

    def test_gating_everything(self):
        records = [rec("a", "pos", "pos"), rec("b", "pos", "neg")]
        m = production_metrics(records, [0, 1], GateDecision(frozenset(), frozenset({0, 1})))
        assert m.gated_precision is None
        assert m.gated_recall == 0.0
        assert m.precision_delta is None

    def test_no_positive_predictions(self):
        m = production_metrics([rec("a", "neg", "pos")], [0], GateDecision(frozenset({0}), frozenset()))
        assert m.baseline_precision is None
        assert m.per_cluster_precision == {0: None}
        assert m.baseline_recall == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            production_metrics([rec("a", "pos", "pos")], [0, 1], GateDecision(frozenset({0}), frozenset()))

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.tuples(st.booleans(), st.booleans(), st.integers(0, 3)), min_size=1, max_size=40),
        st.integers(0, 3),
    )
    def test_removing_pure_false_positive_cluster_never_hurts(self, rows, junk):
        records = [rec(str(i), "pos" if p else "neg", "pos" if t else "neg") for i, (p, t, _) in enumerate(rows)]
        assignments = [c for _, _, c in rows]
        # append a cluster whose positive predictions are all false positives
        records += [rec(f"j{i}", "pos", "neg") for i in range(junk + 1)]
        assignments += [9] * (junk + 1)
        kept_ids = frozenset(assignments) - {9}
        base = production_metrics(records, assignments, GateDecision(frozenset(assignments), frozenset()))
        gated = production_metrics(records, assignments, GateDecision(kept_ids, frozenset({9})))
        if base.baseline_recall is not None:
            assert gated.gated_recall >= base.gated_recall
        if gated.gated_precision is not None:
            assert gated.gated_precision >= base.gated_precision
