import math
from dataclasses import replace

import numpy as np
import pytest

from ionclock.chain import (
    COIL_REFERENCE,
    PUMP_COIL_SERVO,
    SBS_COIL_SERVO,
    DriftProcess,
    ServoConfig,
    TempScenario,
    apply_cavity_lock,
    apply_sbs_stage,
    coil_drift,
    pump_coil_locked_model,
    pump_free_model,
    resolve_preset,
    sbs_coil_locked_model,
    sbs_free_model,
)
from ionclock.errors import DomainError
from ionclock.metrology import ilw_beta_separation, ilw_reverse_one_over_pi
from ionclock.noise import NoiseModel, evaluate_psd, fundamental_linewidth_hz


class TestSbsStage:
    def test_flw_reduction_anchor(self):
        sbs = apply_sbs_stage(pump_free_model())
        assert fundamental_linewidth_hz(sbs) == pytest.approx(12.0, rel=0.10)

    def test_zero_noise_pump_passes_through_as_zero(self):
        out = apply_sbs_stage(NoiseModel(model_id="null"), lock_shoulder=None)
        assert evaluate_psd(out, 1e4) == 0.0

    def test_free_running_ilw_anchor(self):
        sbs = apply_sbs_stage(pump_free_model())
        assert ilw_reverse_one_over_pi(sbs, 500.0, 30e6) == pytest.approx(7e3, rel=0.10)

    def test_missing_plateau_rejected(self):
        with pytest.raises(DomainError):
            apply_sbs_stage(NoiseModel(h={-1: 100.0}))

    def test_locked_input_rejected(self):
        with pytest.raises(DomainError):
            apply_sbs_stage(sbs_coil_locked_model())


class TestCavityLock:
    def test_sbs_coil_ilw_anchor(self):
        model = apply_cavity_lock(sbs_free_model(), SBS_COIL_SERVO, COIL_REFERENCE)
        assert ilw_reverse_one_over_pi(model, 500.0, 30e6) == pytest.approx(580.0, rel=0.15)

    def test_pump_direct_lock_ilw_anchor(self):
        model = apply_cavity_lock(pump_free_model(), PUMP_COIL_SERVO, COIL_REFERENCE)
        assert ilw_reverse_one_over_pi(model, 500.0, 330e3) == pytest.approx(10e3, rel=0.15)

    def test_infinite_gain_pins_psd_to_cavity_floor(self):
        servo = ServoConfig(bandwidth_hz=250e3, low_freq_gain_db=300.0, slope=3,
                            integrator_corner_hz=1e-6)
        locked = apply_cavity_lock(pump_free_model(), servo, COIL_REFERENCE)
        for f in (1e3, 5e3, 10e3):  # well below the 250 kHz bandwidth
            assert evaluate_psd(locked, f) == pytest.approx(evaluate_psd(COIL_REFERENCE, f), rel=0.02)

    def test_psd_unchanged_well_above_bandwidth(self):
        locked = sbs_coil_locked_model()
        base = sbs_free_model()
        for f in (3e6, 10e6):
            assert evaluate_psd(locked, f) == pytest.approx(evaluate_psd(base, f), rel=0.02)

    def test_relock_changes_ilw_by_under_one_percent(self):
        # bump-suppressed lock applied twice is idempotent
        locked = sbs_coil_locked_model()
        relocked = apply_cavity_lock(locked, SBS_COIL_SERVO, COIL_REFERENCE)
        a = ilw_reverse_one_over_pi(locked, 500.0, 30e6)
        b = ilw_reverse_one_over_pi(relocked, 500.0, 30e6)
        assert abs(b - a) / a < 0.01

    def test_no_excess_noise_outside_the_bump_band(self):
        # outside the servo bump, the lock only moves laser noise toward
        # the (lower) cavity noise; it never amplifies the laser PSD
        laser = pump_free_model()
        locked = pump_coil_locked_model()
        f = np.logspace(math.log10(500.0), 7.0, 300)
        configured = np.zeros_like(f)
        for bump in locked.bumps:  # servo bump + gain peaking are configured additions
            configured += bump.psd(f)
        ref = (evaluate_psd(COIL_REFERENCE, f) + PUMP_COIL_SERVO.detector_floor_hz2_per_hz)
        total = np.asarray(evaluate_psd(locked, f))
        allowed = np.asarray(evaluate_psd(laser, f)) + configured + ref
        assert np.all(total <= allowed * 1.0001)


class TestCoilDrift:
    def test_millikelvin_step_response_anchor(self):
        drift = DriftProcess(temp_error=TempScenario(step_k=1e-3),
                             residual_random_walk_hz2_per_s=0.0)
        trace = coil_drift(drift, 2400.0, 2.0, seed=0)
        asymptote = 2.5e6
        assert trace.samples[-1] == pytest.approx(asymptote, rel=0.01)
        at_tau = trace.samples[int(420.0 / 2.0)]
        assert at_tau / asymptote == pytest.approx(1.0 - math.exp(-1.0), rel=0.01)

    def test_zero_inputs_give_flat_zero(self):
        drift = DriftProcess(residual_random_walk_hz2_per_s=0.0)
        trace = coil_drift(drift, 100.0, 1.0, seed=3)
        assert np.all(trace.samples == 0.0)

    def test_30_microkelvin_hourly_budget(self):
        # 2.5 GHz/K x 30 uK -> 75 kHz asymptote, under the 100 kHz/hour budget
        drift = DriftProcess(temp_error=TempScenario(step_k=30e-6),
                             residual_random_walk_hz2_per_s=0.0)
        trace = coil_drift(drift, 3600.0, 5.0, seed=0)
        assert trace.samples[-1] == pytest.approx(75e3, rel=0.01)
        assert trace.samples[-1] < 100e3

    def test_coarse_dt_rejected(self):
        with pytest.raises(DomainError):
            coil_drift(DriftProcess(), 100.0, 50.0, seed=0)

    def test_sample_to_sample_continuity(self):
        drift = DriftProcess(temp_error=TempScenario(step_k=1e-3))
        dt = 2.0
        trace = coil_drift(drift, 1200.0, dt, seed=7)
        steps = np.abs(np.diff(trace.samples))
        bound = (
            drift.temp_sensitivity_hz_per_k * 1e-3 * dt / drift.settle_tau_s
            + 6.0 * math.sqrt(drift.residual_random_walk_hz2_per_s * dt)
        )
        assert np.all(steps <= bound)

    def test_drift_determinism(self):
        drift = DriftProcess()
        a = coil_drift(drift, 60.0, 0.5, seed=9)
        b = coil_drift(drift, 60.0, 0.5, seed=9)
        assert a.samples.tobytes() == b.samples.tobytes()


class TestPresetRegression:
    """The frozen chain composition reproduces its calibration anchors."""

    def test_composite_equals_frozen_anchor_values(self):
        model = sbs_coil_locked_model()
        assert ilw_reverse_one_over_pi(model, 500.0, 30e6) == pytest.approx(580.0, rel=0.15)
        assert ilw_beta_separation(model, 500.0, 30e6) == pytest.approx(6e3, rel=0.25)

    def test_unknown_preset_rejected(self):
        with pytest.raises(DomainError):
            resolve_preset("nonsense")

    def test_locked_presets_carry_drift(self):
        assert sbs_coil_locked_model().drift is not None
        assert pump_free_model().drift is None
