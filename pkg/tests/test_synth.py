import numpy as np
import pytest

from loadsr.errors import DataError
from loadsr.metrics import MetricConfig
from loadsr.series import SrPair, baseline_upsample, check_energy_constraint, downsample
from loadsr.synth import (
    PeakShape,
    SynthProfile,
    generate_household,
    make_synthetic_corpus,
    naive_wpe_oracle,
)


def profile(**overrides):
    kwargs = dict(
        base_load_kw=0.5,
        morning_peak=PeakShape(7.5, 1.0, 1.0),
        evening_peak=PeakShape(19.0, 1.5, 2.0),
        spike_rate_per_day=6.0,
        spike_magnitude_kw=3.0,
        solar_capacity_kw=0.0,
        noise_std_kw=0.02,
        seed=42,
    )
    kwargs.update(overrides)
    return SynthProfile(**kwargs)


class TestGenerateHousehold:
    def test_seeded_determinism_is_bitwise(self):
        a = generate_household(profile(), days=5)
        b = generate_household(profile(), days=5)
        assert np.array_equal(a.values, b.values)
        assert a.start_time == b.start_time

    def test_shape_and_cadence(self):
        s = generate_household(profile(), days=3)
        assert len(s) == 96 * 3
        assert s.interval_seconds == 900

    def test_nonnegative_without_solar_noise_spikes(self):
        p = profile(solar_capacity_kw=0.0, noise_std_kw=0.0, spike_rate_per_day=0.0)
        s = generate_household(p, days=4)
        assert s.values.min() >= 0.0

    def test_base_only_profile_is_quarter_kwh(self):
        p = profile(
            base_load_kw=1.0,
            morning_peak=PeakShape(7.5, 1.0, 0.0),
            evening_peak=PeakShape(19.0, 1.0, 0.0),
            spike_rate_per_day=0.0,
            solar_capacity_kw=0.0,
            noise_std_kw=0.0,
        )
        s = generate_household(p, days=2)
        assert np.allclose(s.values, 0.25, rtol=0, atol=0)

    def test_solar_can_go_negative(self):
        p = profile(base_load_kw=0.1, solar_capacity_kw=4.0, spike_rate_per_day=0.0,
                    noise_std_kw=0.0,
                    morning_peak=PeakShape(7.5, 1.0, 0.0),
                    evening_peak=PeakShape(19.0, 1.0, 0.0))
        s = generate_household(p, days=1)
        assert s.values.min() < 0.0

    def test_daily_energy_matches_closed_form(self):
        # independent oracle: evaluate the documented construction directly
        # at the 96 slot midpoints and integrate (0.25 h per slot)
        p = profile(noise_std_kw=0.0, spike_rate_per_day=0.0, solar_capacity_kw=2.0,
                    base_load_kw=0.7)
        hours = (np.arange(96) + 0.5) / 4.0
        power = np.full(96, 0.7)
        for center, width, mag in ((7.5, 1.0, 1.0), (19.0, 1.5, 2.0)):
            power = power + mag * np.exp(-0.5 * ((hours - center) / width) ** 2)
        sun = (hours >= 6) & (hours <= 18)
        power[sun] -= 2.0 * np.sin(np.pi * (hours[sun] - 6) / 12) ** 2
        expected_daily = float(np.sum(power * 0.25))

        s = generate_household(p, days=3)
        daily = s.values.reshape(3, 96).sum(axis=1)
        assert np.allclose(daily, expected_daily, rtol=0, atol=1e-12)

    def test_spiky_days_carry_expected_extra_energy(self):
        p = profile(noise_std_kw=0.0, spike_rate_per_day=8.0, spike_magnitude_kw=3.0)
        base = profile(noise_std_kw=0.0, spike_rate_per_day=0.0, spike_magnitude_kw=3.0)
        days = 200
        spiky = generate_household(p, days=days).values.sum()
        calm = generate_household(base, days=days).values.sum()
        # expected extra: rate * mean width (2) * magnitude * 0.25 kWh per day
        expected = days * 8.0 * 2.0 * 3.0 * 0.25
        assert spiky - calm == pytest.approx(expected, rel=0.1)

    def test_invalid_profiles_rejected(self):
        with pytest.raises(DataError):
            profile(spike_magnitude_kw=0.0)
        with pytest.raises(DataError):
            profile(base_load_kw=-1.0)
        with pytest.raises(DataError):
            PeakShape(7.0, 0.0, 1.0)
        with pytest.raises(DataError):
            generate_household(profile(), days=0)


class TestCorpus:
    def test_three_households_three_regions(self):
        corpus = make_synthetic_corpus(3, seed=1, days=2)
        assert [region for _, region in corpus] == ["CA", "NY", "TX"]
        ids = [s.household_id for s, _ in corpus]
        assert len(set(ids)) == 3

    def test_same_seed_identical(self):
        a = make_synthetic_corpus(6, seed=9, days=2)
        b = make_synthetic_corpus(6, seed=9, days=2)
        for (sa, ra), (sb, rb) in zip(a, b):
            assert ra == rb
            assert sa.household_id == sb.household_id
            assert np.array_equal(sa.values, sb.values)

    def test_different_seed_differs(self):
        a = make_synthetic_corpus(3, seed=1, days=2)
        b = make_synthetic_corpus(3, seed=2, days=2)
        assert not np.array_equal(a[0][0].values, b[0][0].values)

    def test_downsample_upsample_conserves(self):
        for series, _ in make_synthetic_corpus(5, seed=4, days=2):
            low = downsample(series, 4)
            rec = baseline_upsample(low, 4)
            assert check_energy_constraint(SrPair(low, rec, 4), 1e-9).passed


class TestNaiveOracle:
    def test_single_sample_window_is_mean_abs_diff(self):
        rng = np.random.default_rng(3)
        ref = rng.normal(0, 2, 50)
        rec = rng.normal(0, 2, 50)
        config = MetricConfig(window_hours=1, samples_per_hour=1)
        assert naive_wpe_oracle(ref, rec, config) == pytest.approx(
            np.abs(ref - rec).mean(), rel=1e-12)

    def test_full_series_window_is_peak_difference(self):
        ref = [1.0, 7.0, 3.0, 2.0]
        rec = [2.0, 2.0, 4.0, 1.0]
        config = MetricConfig(window_hours=1, samples_per_hour=4)
        assert naive_wpe_oracle(ref, rec, config) == 3.0
