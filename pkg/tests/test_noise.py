import math

import numpy as np
import pytest

from ionclock.chain import resolve_preset
from ionclock.errors import ConfigError, DomainError, InsufficientDataError
from ionclock.noise import (
    Bump,
    NoiseModel,
    estimate_psd,
    evaluate_psd,
    fundamental_linewidth_hz,
    synthesize_trace,
)

PRESETS = ("pump_free", "sbs_free", "sbs_coil", "pump_coil")


class TestEvaluatePsd:
    def test_zero_model_is_zero(self):
        assert evaluate_psd(NoiseModel(), 1e3) == 0.0

    def test_white_plateau_matches_flw_anchor(self):
        # 47 kHz Lorentzian linewidth plateau: S = 47e3/pi everywhere
        model = NoiseModel(h={0: 47e3 / math.pi})
        for f in (10.0, 1e3, 1e6):
            assert evaluate_psd(model, f) == pytest.approx(1.4961e4, rel=1e-3)

    def test_bump_plus_terms_direct_sum(self):
        # independent oracle: sum the pieces by hand at the bump center
        bump = Bump(250e3, 50e3, 777.0)
        model = NoiseModel(h={0: 3.0, -1: 100.0}, bumps=(bump,), floor_hz2_per_hz=2.0)
        f = 250e3
        expected = 3.0 + 100.0 / f + 777.0 + 2.0
        assert evaluate_psd(model, f) == pytest.approx(expected, rel=1e-12)

    def test_nonpositive_frequency_rejected(self):
        with pytest.raises(DomainError):
            evaluate_psd(NoiseModel(h={0: 1.0}), 0.0)
        with pytest.raises(DomainError):
            evaluate_psd(NoiseModel(h={0: 1.0}), np.array([1.0, -2.0]))

    def test_negative_coefficients_rejected(self):
        with pytest.raises(DomainError):
            NoiseModel(h={0: -1.0})
        with pytest.raises(DomainError):
            Bump(1e3, -5.0, 1.0)

    def test_psd_nonnegative_on_presets(self):
        f = np.logspace(0, 7.3, 400)
        for name in PRESETS:
            assert np.all(evaluate_psd(resolve_preset(name), f) >= 0.0)


class TestSynthesize:
    def test_zero_model_gives_zero_trace(self):
        trace = synthesize_trace(NoiseModel(model_id="null"), 0.01, 100e3, seed=4)
        assert np.all(trace.samples == 0.0)

    def test_white_psd_flat_mid_band(self):
        h0 = 50.0
        model = NoiseModel(h={0: h0}, model_id="white")
        trace = synthesize_trace(model, 2.0, 1e6, seed=9)
        est = estimate_psd(trace, 1 << 14)
        mid = (est.freqs_hz > 5e3) & (est.freqs_hz < 4e5)
        assert np.mean(est.psd_hz2_per_hz[mid]) == pytest.approx(h0, rel=0.1)

    def test_servo_bump_visible_in_coil_locked_pump_spectrum(self):
        # The 250 kHz servo bump belongs to the pump-direct lock; the
        # SBS lock is bump-suppressed.
        pump_coil = resolve_preset("pump_coil")
        sbs_coil = resolve_preset("sbs_coil")
        trace = synthesize_trace(pump_coil, 0.2, 2e6, seed=3, include_drift=False)
        est = estimate_psd(trace, 1 << 13)
        bump_band = est.band_average(230e3, 270e3)
        assert bump_band > 1.7 * est.band_average(300e3, 430e3)
        assert bump_band > 1.7 * est.band_average(500e3, 800e3)
        f = np.array([170e3, 250e3, 330e3])
        sbs_psd = evaluate_psd(sbs_coil, f)
        assert sbs_psd[1] < 1.5 * max(sbs_psd[0], sbs_psd[2])

    def test_determinism_byte_identical(self):
        model = resolve_preset("sbs_free")
        a = synthesize_trace(model, 0.05, 1e6, seed=123)
        b = synthesize_trace(model, 0.05, 1e6, seed=123)
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_linearity_of_variance(self):
        base = NoiseModel(h={0: 10.0, -1: 200.0}, model_id="lin")
        scaled = NoiseModel(h={0: 40.0, -1: 800.0}, model_id="lin")
        ratios = []
        for seed in range(20):
            v1 = synthesize_trace(base, 0.02, 2e5, seed=seed).samples.var()
            v4 = synthesize_trace(scaled, 0.02, 2e5, seed=seed).samples.var()
            ratios.append(v4 / v1)
        assert np.mean(ratios) == pytest.approx(4.0, rel=1e-6)

    def test_too_few_samples_rejected(self):
        with pytest.raises(ConfigError):
            synthesize_trace(NoiseModel(h={0: 1.0}), 1e-5, 1e6, seed=0)

    def test_nyquist_violation_rejected(self):
        with pytest.raises(ConfigError):
            synthesize_trace(resolve_preset("pump_free"), 1.0, 200e3, seed=0)


class TestEstimatePsd:
    def test_sine_parseval_area(self):
        # pure tone of amplitude A carries area A^2/2 in the one-sided PSD
        rate, f0, amp = 100e3, 10e3, 7.0
        t = np.arange(1 << 16) / rate
        from ionclock.noise import FrequencyTrace

        trace = FrequencyTrace(rate, amp * np.sin(2 * math.pi * f0 * t), seed=0)
        est = estimate_psd(trace, 1 << 12)
        peak = np.abs(est.freqs_hz - f0) < 200.0
        area = np.trapezoid(est.psd_hz2_per_hz[peak], est.freqs_hz[peak])
        assert area == pytest.approx(amp**2 / 2.0, rel=0.02)

    def test_parseval_total_variance(self):
        trace = synthesize_trace(NoiseModel(h={0: 5.0}, model_id="w"), 1.0, 2e5, seed=2)
        est = estimate_psd(trace, 1 << 12)
        integral = np.trapezoid(est.psd_hz2_per_hz, est.freqs_hz)
        assert integral == pytest.approx(np.var(trace.samples), rel=0.05)

    def test_sbs_plateau_gives_flw_near_12(self):
        # the 1/f tail only clears the white plateau well above 1 MHz
        trace = synthesize_trace(resolve_preset("sbs_free"), 0.3, 2e7, seed=5)
        est = estimate_psd(trace, 1 << 15)
        plateau = est.band_average(5e6, 9.5e6)
        assert math.pi * plateau == pytest.approx(12.0, rel=0.12)

    def test_segment_validation(self):
        trace = synthesize_trace(NoiseModel(h={0: 1.0}, model_id="w"), 0.01, 1e5, seed=1)
        with pytest.raises(DomainError):
            estimate_psd(trace, 1000)  # not a power of two
        with pytest.raises(InsufficientDataError):
            estimate_psd(trace, 1 << 12)


class TestRoundTrip:
    @pytest.mark.parametrize("name", PRESETS)
    @pytest.mark.parametrize("seed", [1, 17])
    def test_estimate_matches_model_log_band_averaged(self, name, seed):
        model = resolve_preset(name)
        trace = synthesize_trace(model, 1.0, 2e6, seed=seed, include_drift=False)
        est = estimate_psd(trace, 1 << 16)
        edges = np.logspace(math.log10(40.0), math.log10(8e5), 30)
        devs = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mask = (est.freqs_hz >= lo) & (est.freqs_hz < hi)
            if mask.sum() < 3:
                continue
            est_avg = float(np.mean(est.psd_hz2_per_hz[mask]))
            mod_avg = float(np.mean(evaluate_psd(model, est.freqs_hz[mask])))
            devs.append(abs(math.log(est_avg / mod_avg)))
        assert np.mean(devs) < 0.10


def test_fundamental_linewidth_reads_plateau():
    assert fundamental_linewidth_hz(resolve_preset("pump_free")) == pytest.approx(47e3, rel=0.01)
    assert fundamental_linewidth_hz(resolve_preset("sbs_free")) == pytest.approx(12.0, rel=0.10)
