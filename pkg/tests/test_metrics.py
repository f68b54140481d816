import json

import numpy as np
import pytest

from loadsr.errors import DataError, SeriesTooShortError, ShapeError
from loadsr.metrics import (
    EvalReport,
    MetricConfig,
    evaluate,
    mse,
    window_maxima,
    window_peak_errors,
    wpe,
)
from loadsr.series import SrPair, baseline_upsample, downsample
from loadsr.synth import naive_wpe_oracle

from conftest import make_series


def cfg(window_hours=1, samples_per_hour=4, stride=1):
    return MetricConfig(window_hours=window_hours, samples_per_hour=samples_per_hour,
                        stride_samples=stride)


class TestMse:
    def test_two_unit_errors(self):
        assert mse([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_identity(self):
        x = np.arange(10.0)
        assert mse(x, x) == 0.0

    def test_shifted_peak(self):
        # hand oracle: (25 + 25) / 4
        assert mse([0.0, 0.0, 5.0, 0.0], [0.0, 5.0, 0.0, 0.0]) == 12.5

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            mse([1.0], [1.0, 2.0])


class TestWpe:
    def test_shift_within_single_window_not_penalized(self):
        value = wpe([0.0, 5.0, 0.0, 0.0], [0.0, 0.0, 5.0, 0.0], cfg(window_hours=1))
        assert value == 0.0

    def test_shift_across_window_boundaries(self):
        # naive oracle by hand: ref maxima (5,5,5,1,1), rec maxima (5,1,1,1,1)
        ref = [0.0, 0.0, 5.0, 0.0, 1.0, 1.0, 1.0, 1.0]
        rec = [5.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]
        assert wpe(ref, rec, cfg(window_hours=1)) == 1.6

    def test_identity_any_config(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 2, 64)
        for w in (1, 2, 3):
            for stride in (1, 2, 5):
                assert wpe(x, x, cfg(window_hours=w, stride=stride)) == 0.0

    def test_too_short(self):
        with pytest.raises(SeriesTooShortError):
            wpe([1.0, 2.0], [1.0, 2.0], cfg(window_hours=1))

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        ref = rng.normal(0, 1, 40)
        rec = rng.normal(0, 1, 40)
        c = cfg(window_hours=2)
        base_wpe = wpe(ref, rec, c)
        base_mse = mse(ref, rec)
        for shift in (-3.5, 0.25, 100.0):
            assert wpe(ref + shift, rec + shift, c) == pytest.approx(base_wpe, rel=1e-12)
            assert mse(ref + shift, rec + shift) == pytest.approx(base_mse, rel=1e-9)

    def test_zero_iff_equal_window_maxima(self):
        ref = [0.0, 5.0, 1.0, 1.0]
        rec = [5.0, 0.0, 1.0, 0.5]  # same maxima in every 2-sample window except the last
        c = MetricConfig(window_hours=1, samples_per_hour=2)
        assert wpe(ref, rec, c) > 0.0
        rec2 = [5.0, 0.0, 1.0, 1.0]
        assert wpe(ref, rec2, c) > 0.0  # window (0,5) vs (5,0): max equal; (5,1) vs (0,1): differ
        rec3 = [1.0, 5.0, 1.0, 1.0]
        assert wpe(ref, rec3, c) == 0.0


class TestWindowMaxima:
    def test_matches_bruteforce(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(1, 80))
            w = int(rng.integers(1, n + 1))
            x = rng.normal(0, 5, n)
            fast = window_maxima(x, w)
            brute = [max(x[i:i + w]) for i in range(n - w + 1)]
            assert fast == brute

    def test_ties_and_plateaus(self):
        x = [2.0, 2.0, 2.0, 1.0, 1.0, 2.0]
        assert window_maxima(x, 3) == [2.0, 2.0, 2.0, 2.0]


class TestOracleEquivalence:
    def test_fast_wpe_equals_naive_on_randomized_suite(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(8, 513))
            w_samples = int(rng.integers(1, 9))
            config = MetricConfig(window_hours=1, samples_per_hour=w_samples)
            ref = rng.normal(0, 3, n)
            rec = ref + rng.normal(0, 1, n) * (rng.random(n) < 0.5)
            assert wpe(ref, rec, config) == naive_wpe_oracle(ref, rec, config)

    def test_per_window_errors_identical(self):
        from loadsr.synth import naive_window_peak_errors
        rng = np.random.default_rng(77)
        for _ in range(100):
            n = int(rng.integers(12, 120))
            config = MetricConfig(window_hours=1, samples_per_hour=int(rng.integers(1, 9)),
                                  stride_samples=int(rng.integers(1, 5)))
            ref = rng.normal(0, 3, n)
            rec = rng.normal(0, 3, n)
            assert window_peak_errors(ref, rec, config) == \
                naive_window_peak_errors(ref, rec, config)


def _pair_and_rec(values, factor=4):
    high = make_series(values)
    low = downsample(high, factor)
    return SrPair(low, high, factor), baseline_upsample(low, factor)


class TestEvaluate:
    def test_identical_reconstruction_gives_zeros(self):
        high = make_series(np.repeat([1.0, 2.0], 8))
        pair = SrPair(downsample(high, 4), high, 4)
        report = evaluate([(pair, high)], ["CA"], cfg(window_hours=1))
        for entry in report.entries:
            assert entry.mse == 0.0
            assert entry.wpe == 0.0
        assert {e.group for e in report.entries} == {"CA", "pooled"}

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            evaluate([], [], cfg())

    def test_pooling_across_groups(self):
        rng = np.random.default_rng(5)
        items, labels = [], []
        for i, region in enumerate(["CA", "CA", "NY"]):
            pair, rec = _pair_and_rec(rng.normal(1, 0.5, 32))
            items.append((pair, rec))
            labels.append(region)
        report = evaluate(items, labels, cfg(window_hours=1), method="baseline")
        by_group = {e.group: e for e in report.entries}
        assert by_group["CA"].n_series == 2
        assert by_group["NY"].n_series == 1
        assert by_group["pooled"].n_series == 3
        assert by_group["pooled"].n_samples == 96
        # pooled MSE is per-sample pooling, not mean of group means
        total_sq = sum(e.mse * e.n_samples for e in report.entries if e.group != "pooled")
        assert by_group["pooled"].mse == pytest.approx(total_sq / 96, rel=1e-12)

    def test_constraint_violations_flagged_not_dropped(self):
        pair, rec = _pair_and_rec(np.ones(16))
        broken = rec.with_values(rec.values + 0.05)
        report = evaluate([(pair, broken)], ["CA"], cfg(window_hours=1))
        entry = next(e for e in report.entries if e.group == "CA")
        assert entry.constraint_violations == 1
        assert entry.n_series == 1

    def test_label_count_mismatch(self):
        pair, rec = _pair_and_rec(np.ones(16))
        with pytest.raises(ShapeError):
            evaluate([(pair, rec)], ["CA", "NY"], cfg())


class TestEvalReport:
    def test_json_layout_mirrors_methods_by_region(self):
        rng = np.random.default_rng(9)
        items = []
        labels = []
        for region in ("CA", "NY", "TX"):
            pair, rec = _pair_and_rec(rng.normal(1, 0.6, 96))
            items.append((pair, rec))
            labels.append(region)
        report = EvalReport(metadata={"seed": 1, "data_digest": "x", "model_version": 1})
        for w in (1, 3):
            report = report.merge(
                evaluate(items, labels, cfg(window_hours=w), method="baseline")
            )
        doc = report.to_json_dict()
        assert list(doc) == ["report_version", "config", "groups", "pooled", "metadata"]
        assert [g["group"] for g in doc["groups"]] == ["CA", "NY", "TX"]
        methods = doc["groups"][0]["methods"]
        assert [m["method"] for m in methods] == ["baseline"]
        assert sorted(methods[0]["wpe"]) == ["1", "3"]
        # serialization is stable
        assert report.to_json() == report.to_json()
        json.loads(report.to_json())

    def test_merge_conflicting_metadata_rejected(self):
        a = EvalReport(metadata={"seed": 1})
        b = EvalReport(metadata={"seed": 2})
        with pytest.raises(DataError):
            a.merge(b)
