import math
from dataclasses import replace

import numpy as np
import pytest

from ionclock.bench import ClockConfig, ProbePulse, preset_bench, quiet_bench
from ionclock.clock import DriftInjection
from ionclock.errors import ClockUnlockError, DomainError
from ionclock.experiments import (
    InterleaveSchedule,
    ScanPlan,
    min_shelve_pulses,
    rabi_scan,
    ramsey_scan,
    run_interleaved,
    spam_experiment,
    waterfall_spectroscopy,
)
from ionclock.ion import DetectionConfig, MotionalConfig, PumpConfig
from ionclock.metrology import fit_lineshape

NO_CLOCK = InterleaveSchedule(enabled=False)
#: an interleaved-but-idle clock: probes far off any line never excite,
#: so corrections stay exactly zero and runs match non-interleaved ones
IDLE_CLOCK = ClockConfig(half_width_hz=5e6, gain_hz=300.0, probe=ProbePulse(60e-6),
                         warmup_cycles=3)


class TestScanPlan:
    def test_validation(self):
        with pytest.raises(DomainError):
            ScanPlan((), trials=5)
        with pytest.raises(DomainError):
            ScanPlan((0.0,), trials=0)
        with pytest.raises(DomainError):
            ScanPlan((0.0,), order="zigzag")

    def test_linear_builder(self):
        plan = ScanPlan.linear(10e3, 11, trials=7)
        assert len(plan.detunings_hz) == 11
        assert plan.detunings_hz[0] == -5e3
        assert plan.detunings_hz[-1] == 5e3


class TestWaterfallSpectroscopy:
    def test_far_off_resonance_probability_near_zero(self):
        cfg = quiet_bench()
        plan = ScanPlan((250e3, 300e3, 400e3), trials=30)
        res = waterfall_spectroscopy(cfg, plan, seed=2, schedule=NO_CLOCK)
        assert np.all(res.ps < 0.05)

    def test_shot_accounting_exact(self):
        cfg = preset_bench("sbs_coil")
        plan = ScanPlan.linear(10e3, 5, trials=4)
        res = waterfall_spectroscopy(cfg, plan, seed=3)
        shots = plan.trials * len(plan.detunings_hz)
        clock_cycles = res.counters["clock_cycles"]
        assert res.counters["detect_calls"] == shots + 2 * clock_cycles
        assert clock_cycles == cfg.clock.warmup_cycles + shots

    def test_reproducible_byte_for_byte(self):
        cfg = preset_bench("sbs_coil")
        plan = ScanPlan.linear(8e3, 5, trials=3)
        a = waterfall_spectroscopy(cfg, plan, seed=5, collect_records=True)
        b = waterfall_spectroscopy(cfg, plan, seed=5, collect_records=True)
        assert a.rows == b.rows
        assert a.records == b.records
        assert list(a.csv_rows()) == list(b.csv_rows())

    def test_waterfall_broadens_never_narrows_under_drift(self):
        cfg = quiet_bench(pump=PumpConfig(n_cycles=2))
        ramp = DriftInjection("triangle", amplitude_hz=1e9, rate_hz_per_s=800.0)
        plan = ScanPlan.linear(12e3, 21, trials=60, order="waterfall")
        broadenings = []
        for seed in (0, 1):
            free = waterfall_spectroscopy(cfg, plan, seed=seed, schedule=NO_CLOCK)
            drifted = waterfall_spectroscopy(cfg, plan, seed=seed, schedule=NO_CLOCK,
                                             injection=ramp)
            f_free = fit_lineshape(free.xs, free.ps).fwhm_hz
            f_drift = fit_lineshape(drifted.xs, drifted.ps).fwhm_hz
            assert f_drift >= f_free - 100.0
            broadenings.append(f_drift - f_free)
        assert np.mean(broadenings) > 500.0


class TestRabiScan:
    def test_noiseless_sinusoid(self):
        cfg = quiet_bench(motional=MotionalConfig(0.0, 0.0))
        durations = [0.0, 3e-6, 7.5e-6, 15e-6, 22.5e-6, 30e-6]
        res = rabi_scan(cfg, durations, seed=4, schedule=NO_CLOCK, shots_per_point=60)
        for d, p in zip(durations, res.ps):
            expected = math.sin(math.pi * cfg.rabi_hz * d) ** 2
            assert p == pytest.approx(expected, abs=4.0 * math.sqrt(0.25 / 60) + 0.01)

    def test_negative_duration_rejected(self):
        with pytest.raises(DomainError):
            rabi_scan(quiet_bench(), [-1e-6], seed=0)


class TestRamseyScan:
    def test_zero_delay_full_contrast(self):
        cfg = quiet_bench(motional=MotionalConfig(0.0, 0.0))
        res = ramsey_scan(cfg, [0.0, 5e-6, 10e-6, 15e-6], seed=6, schedule=NO_CLOCK,
                          shots_per_point=30, fit_decay=False)
        assert res.rows[0].p_excite > 0.9
        assert np.all(res.contrasts <= 1.0)
        assert np.all(res.contrasts >= 0.0)

    def test_contrast_not_increasing_without_noise(self):
        cfg = quiet_bench(motional=MotionalConfig(0.0, 0.0))
        res = ramsey_scan(cfg, [0.0, 20e-6, 60e-6], seed=7, schedule=NO_CLOCK,
                          shots_per_point=30, fit_decay=False)
        assert res.rows[0].p_excite >= max(r.p_excite for r in res.rows[1:]) - 0.1

    def test_too_few_phases_rejected(self):
        with pytest.raises(DomainError):
            ramsey_scan(quiet_bench(), [1e-6] * 4, seed=0, phases=3)


class TestSpam:
    def test_perfect_configuration_gives_unit_fidelity(self):
        cfg = quiet_bench(
            motional=MotionalConfig(0.0, 0.0),
            detection=DetectionConfig(bright_rate_cps=15000.0, dark_rate_cps=0.0,
                                      threshold_counts=1),
        )
        res = spam_experiment(cfg, 200, seed=8, schedule=NO_CLOCK, n_shelve_pulses=1)
        assert res.fidelity == 1.0

    def test_min_shots_enforced(self):
        with pytest.raises(DomainError):
            spam_experiment(quiet_bench(), 50, seed=0)

    def test_pulse_count_bounds(self):
        with pytest.raises(DomainError):
            spam_experiment(quiet_bench(), 200, seed=0, n_shelve_pulses=9)

    def test_histogram_is_bimodal(self):
        cfg = preset_bench("sbs_coil")
        res = spam_experiment(cfg, 300, seed=9, schedule=NO_CLOCK, n_shelve_pulses=2)
        dark_median = np.median(res.counts_dark_prep)
        bright_median = np.median(res.counts_bright_prep)
        assert dark_median < res.threshold <= bright_median


class TestInterleaving:
    def test_zero_drift_idle_clock_matches_uninterleaved(self):
        # with nothing to correct the servo stays at exactly zero and
        # every shot consumes the same named rng streams
        cfg = quiet_bench(clock=IDLE_CLOCK)
        plan = ScanPlan.linear(8e3, 7, trials=5)
        inter = waterfall_spectroscopy(cfg, plan, seed=10, schedule=InterleaveSchedule())
        plain = waterfall_spectroscopy(cfg, plan, seed=10, schedule=NO_CLOCK)
        assert inter.rows == plain.rows
        assert all(corr == 0.0 for _, _, corr in inter.telemetry)

    def test_telemetry_records_correction_per_shot(self):
        cfg = preset_bench("sbs_coil")
        plan = ScanPlan.linear(8e3, 3, trials=2)
        res = waterfall_spectroscopy(cfg, plan, seed=11)
        assert len(res.telemetry) == 6
        tags = [t for t, _, _ in res.telemetry]
        assert tags == sorted(tags, key=tags.index)  # append-only order

    def test_unlock_aborts_with_diagnostic(self):
        # ramp slightly above the gain-limited slew: the loop rails and
        # the saturation monitor aborts the run
        cfg = quiet_bench()
        clock_cfg = ClockConfig(half_width_hz=1600.0, gain_hz=200.0,
                                probe=ProbePulse(250e-6), warmup_cycles=0,
                                unlock_after=40)
        capability = clock_cfg.gain_hz / 8.5e-3  # Hz per second of cycles
        runaway = DriftInjection("triangle", amplitude_hz=1e9,
                                 rate_hz_per_s=1.3 * capability)
        plan = ScanPlan.linear(8e3, 5, trials=60)
        with pytest.raises(ClockUnlockError) as err:
            waterfall_spectroscopy(cfg, plan, seed=12, injection=runaway,
                                   clock_cfg=clock_cfg)
        assert err.value.cycle is not None

    def test_interleave_cancels_slow_drift_broadening(self):
        # 100 Hz/s ramp: uncorrected scans broaden by the drift span;
        # clock-interleaved scans stay near the drift-free width
        cfg = quiet_bench(pump=PumpConfig(n_cycles=2),
                          clock=ClockConfig(half_width_hz=1600.0, gain_hz=400.0,
                                            probe=ProbePulse(250e-6), warmup_cycles=10))
        ramp = DriftInjection("triangle", amplitude_hz=1e9, rate_hz_per_s=1000.0)
        plan = ScanPlan.linear(12e3, 21, trials=40)
        free = waterfall_spectroscopy(cfg, plan, seed=13, schedule=NO_CLOCK)
        f_free = fit_lineshape(free.xs, free.ps).fwhm_hz
        drifted = waterfall_spectroscopy(cfg, plan, seed=13, schedule=NO_CLOCK, injection=ramp)
        f_drift = fit_lineshape(drifted.xs, drifted.ps).fwhm_hz
        locked = waterfall_spectroscopy(cfg, plan, seed=13, injection=ramp)
        f_locked = fit_lineshape(locked.xs, locked.ps).fwhm_hz
        drift_span = 1000.0 * drifted.sim_wall_time_s
        assert f_drift > f_free + 0.2 * drift_span
        assert abs(f_locked - f_free) < 0.25 * (f_drift - f_free) + 300.0

    def test_run_interleaved_wrapper(self):
        cfg = preset_bench("sbs_coil")

        def experiment(runner):
            runner.before_shot("probe")
            return runner.correction()

        result, telemetry = run_interleaved(cfg, 14, InterleaveSchedule(), experiment)
        assert len(telemetry) == 1
        assert telemetry[0][2] == result


class TestMinShelvePulses:
    def test_strictly_fewer_pulses_for_sbs_chain(self):
        k_sbs, _ = min_shelve_pulses(preset_bench("sbs_coil"), seed=41, n_shots=400)
        k_coil, _ = min_shelve_pulses(preset_bench("pump_coil"), seed=41, n_shots=400)
        assert 0 < k_sbs < k_coil
