"""Experiment orchestration: waterfall spectroscopy, Rabi scans,
phase-swept Ramsey interferometry, and SPAM runs, each optionally
interleaved with two-point clock cycles for absolute frequency
stability.

A shot is cool -> optical pump -> qubit pulse(s) -> detect, advancing a
simulated wall clock through the duty-cycle model so drift accrues
realistically between shots. When interleaving is enabled, every shot
is preceded by clock cycles and every 674 nm pulse in the shot carries
the current clock correction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bench import Bench, BenchConfig, ClockConfig, ProbePulse
from .clock import ClockServoState, DriftInjection, clock_cycle
from .errors import ClockUnlockError, DomainError
from .ion import IonState, detect, evolve_pulse, free_evolution, optical_pump, shelve_multi
from .metrology import CoherenceFit, fit_contrast_decay


@dataclass(frozen=True)
class ScanPlan:
    detunings_hz: tuple[float, ...]
    trials: int = 50
    order: str = "waterfall"  # "waterfall" | "ltr"
    shots_per_point_per_trial: int = 1

    def __post_init__(self):
        if not self.detunings_hz:
            raise DomainError("scan needs at least one detuning")
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if self.order not in ("waterfall", "ltr"):
            raise DomainError(f"unknown scan order {self.order!r}")

    @staticmethod
    def linear(span_hz: float, points: int, trials: int = 50, order: str = "waterfall",
               center_hz: float = 0.0) -> "ScanPlan":
        d = center_hz + np.linspace(-span_hz / 2.0, span_hz / 2.0, points)
        return ScanPlan(tuple(float(x) for x in d), trials=trials, order=order)


@dataclass(frozen=True)
class InterleaveSchedule:
    enabled: bool = True
    clock_cycles_per_shot: int = 1

    def __post_init__(self):
        if self.enabled and self.clock_cycles_per_shot < 1:
            raise DomainError("need at least one clock cycle per shot when interleaving")


class InterleavedRunner:
    """Shared machinery: bench + optional clock servo + telemetry."""

    def __init__(
        self,
        cfg: BenchConfig,
        seed: int,
        schedule: InterleaveSchedule = InterleaveSchedule(),
        injection: DriftInjection | None = None,
        clock_cfg: ClockConfig | None = None,
    ):
        inj = injection.as_callable() if injection is not None else None
        self.bench = Bench(cfg, seed, injection=inj)
        self.schedule = schedule
        self.clock_cfg = clock_cfg or cfg.clock
        self.servo: ClockServoState | None = None
        self.telemetry: list[tuple[str, float, float]] = []
        self._cycle = 0
        if schedule.enabled:
            self.servo = ClockServoState(
                half_width_hz=self.clock_cfg.half_width_hz, gain_hz=self.clock_cfg.gain()
            )
            for _ in range(self.clock_cfg.warmup_cycles):
                self._one_clock_cycle()

    def _one_clock_cycle(self):
        clock_cycle(self.bench, self.servo, self._cycle, self.clock_cfg,
                    clock_seed=self.bench.seed, clock_tag="ilk")
        self._cycle += 1
        window = self.clock_cfg.unlock_after
        # two unlock signatures: the loop railing at its slew limit, or
        # the line lost entirely (no excitation on either flank)
        railed = self._cycle >= window and self.servo.slew_saturation(window) >= 0.8
        lost = self.servo.no_excitation_run > window
        if railed or lost:
            mode = "slewing at the gain limit" if railed else "seeing no excitation"
            raise ClockUnlockError(
                f"clock unlocked: {mode} for over {window} cycles "
                f"(cycle {self._cycle}, correction {self.servo.correction_hz:.1f} Hz)",
                cycle=self._cycle,
                correction_hz=self.servo.correction_hz,
            )

    def before_shot(self, tag: str):
        if self.servo is None:
            return
        for _ in range(self.schedule.clock_cycles_per_shot):
            self._one_clock_cycle()
        self.telemetry.append((tag, self.bench.t_wall, self.servo.correction_hz))

    def correction(self) -> float:
        return 0.0 if self.servo is None else self.servo.correction_hz


def run_interleaved(
    cfg: BenchConfig,
    seed: int,
    schedule: InterleaveSchedule,
    experiment,
    injection: DriftInjection | None = None,
    clock_cfg: ClockConfig | None = None,
):
    """Run ``experiment(runner)`` under a clock-interleaved schedule.

    Returns (experiment result, clock telemetry). The run aborts with
    ClockUnlockError if the servo slews at its limit for more than the
    configured number of consecutive cycles.
    """
    runner = InterleavedRunner(cfg, seed, schedule, injection, clock_cfg)
    result = experiment(runner)
    return result, runner.telemetry


def _prepare(runner: InterleavedRunner, tag: str, rng, rabi_scale: float,
             target_m_s: float = -0.5, pump: bool = True) -> IonState:
    """Cool + optically pump one shot's ion; advances the wall clock."""
    bench = runner.bench
    cfg = bench.cfg
    bench.cool()
    if not pump:
        return IonState.ground(target_m_s)
    state = IonState.spin_mixture_sample(rng)
    static = bench.quasi_static_offset() + runner.correction()
    counter = itertools.count()

    def trace_fn(duration_s):
        return bench.pulse_noise(f"{tag}:pump{next(counter)}", duration_s)

    state = optical_pump(
        state,
        cfg.table,
        cfg.rabi_hz * rabi_scale,
        rng,
        cfg.pump,
        target_m_s=target_m_s,
        trace_fn=trace_fn,
        static_detuning_hz=static,
    )
    bench.advance(cfg.pump.n_cycles * (cfg.pump.pulse674_s + cfg.pump.pulse1033_s))
    return state


def _detect_shot(runner, state, rng, shot_id, tag, detuning_hz=0.0, phase_rad=0.0):
    bench = runner.bench
    record = detect(
        state, bench.cfg.detection, rng,
        shot_id=shot_id, sequence_tag=tag,
        detuning_hz=detuning_hz, phase_rad=phase_rad, t_wall_s=bench.t_wall,
    )
    bench.advance(bench.cfg.timing.detect_s)
    bench.counters["detect_calls"] += 1
    bench.counters["shots"] += 1
    return record


@dataclass(frozen=True)
class ScanRow:
    x: float
    p_excite: float
    stderr: float
    n: int


@dataclass(frozen=True)
class ScanResult:
    rows: tuple[ScanRow, ...]
    kind: str
    telemetry: tuple = ()
    records: tuple = ()
    counters: dict = field(default_factory=dict)
    sim_wall_time_s: float = 0.0

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.rows])

    @property
    def ps(self) -> np.ndarray:
        return np.array([r.p_excite for r in self.rows])

    CSV_HEADER = ("x", "p", "stderr", "n")

    def csv_rows(self):
        for r in self.rows:
            yield (f"{r.x:.6f}", f"{r.p_excite:.6f}", f"{r.stderr:.6f}", r.n)


def _binomial_rows(xs, hits, totals) -> tuple[ScanRow, ...]:
    rows = []
    for x, k, n in zip(xs, hits, totals):
        p = k / n if n else 0.0
        rows.append(ScanRow(float(x), p, math.sqrt(p * (1.0 - p) / n) if n else 0.0, int(n)))
    return tuple(rows)


def waterfall_spectroscopy(
    cfg: BenchConfig,
    plan: ScanPlan,
    seed: int,
    schedule: InterleaveSchedule = InterleaveSchedule(),
    injection: DriftInjection | None = None,
    probe: ProbePulse | None = None,
    clock_cfg: ClockConfig | None = None,
    collect_records: bool = False,
) -> ScanResult:
    """Scan excitation probability vs detuning.

    Waterfall order samples every frequency once per trial (immune to
    artificial narrowing by drift); "ltr" order dwells on each frequency
    for all its trials in sequence. Probabilities are the dark-verdict
    fractions with binomial standard errors.
    """
    runner = InterleavedRunner(cfg, seed, schedule, injection, clock_cfg)
    bench = runner.bench
    probe = probe or cfg.spectroscopy_probe
    n_pts = len(plan.detunings_hz)
    hits = np.zeros(n_pts, dtype=int)
    totals = np.zeros(n_pts, dtype=int)
    records = []

    if plan.order == "waterfall":
        sequence = [(t, p) for t in range(plan.trials) for p in range(n_pts)]
    else:
        sequence = [(t, p) for p in range(n_pts) for t in range(plan.trials)]

    shot_id = 0
    for trial, pi in sequence:
        for rep in range(plan.shots_per_point_per_trial):
            tag = f"spec:{pi}:{trial}:{rep}"
            runner.before_shot(tag)
            rng = bench.shot_rng(tag)
            scale = cfg.motional.rabi_scale(rng)
            state = _prepare(runner, tag, rng, scale)
            d = plan.detunings_hz[pi]
            entry = bench.nearest_entry(d)
            static = (
                (d - entry.detuning_hz)
                + bench.quasi_static_offset()
                + runner.correction()
            )
            noise, rate = bench.pulse_noise(f"{tag}:probe", probe.duration_s)
            state = evolve_pulse(
                state, entry, probe.rabi() * scale, probe.duration_s,
                laser_trace=noise, trace_rate_hz=rate, static_detuning_hz=static,
            )
            bench.advance(probe.duration_s)
            record = _detect_shot(runner, state, rng, shot_id, tag, detuning_hz=d)
            shot_id += 1
            totals[pi] += 1
            hits[pi] += int(not record.bright)
            if collect_records:
                records.append(record)

    return ScanResult(
        rows=_binomial_rows(plan.detunings_hz, hits, totals),
        kind="spectroscopy",
        telemetry=tuple(runner.telemetry),
        records=tuple(records),
        counters=dict(bench.counters),
        sim_wall_time_s=bench.t_wall,
    )


def rabi_scan(
    cfg: BenchConfig,
    durations_s,
    seed: int,
    schedule: InterleaveSchedule = InterleaveSchedule(),
    shots_per_point: int = 40,
    injection: DriftInjection | None = None,
) -> ScanResult:
    """Resonant Rabi flopping: excitation vs pulse duration."""
    durations_s = tuple(float(d) for d in durations_s)
    if any(d < 0 for d in durations_s):
        raise DomainError("pulse durations must be non-negative")
    runner = InterleavedRunner(cfg, seed, schedule, injection)
    bench = runner.bench
    hits = np.zeros(len(durations_s), dtype=int)
    totals = np.zeros(len(durations_s), dtype=int)
    shot_id = 0
    for trial in range(shots_per_point):
        for di, duration in enumerate(durations_s):
            tag = f"rabi:{di}:{trial}"
            runner.before_shot(tag)
            rng = bench.shot_rng(tag)
            scale = cfg.motional.rabi_scale(rng)
            state = _prepare(runner, tag, rng, scale)
            static = bench.quasi_static_offset() + runner.correction()
            if duration > 0:
                noise, rate = bench.pulse_noise(f"{tag}:pulse", duration)
                state = evolve_pulse(
                    state, bench.reference, cfg.rabi_hz * scale, duration,
                    laser_trace=noise, trace_rate_hz=rate, static_detuning_hz=static,
                )
                bench.advance(duration)
            record = _detect_shot(runner, state, rng, shot_id, tag)
            shot_id += 1
            totals[di] += 1
            hits[di] += int(not record.bright)
    return ScanResult(
        rows=_binomial_rows(durations_s, hits, totals),
        kind="rabi",
        telemetry=tuple(runner.telemetry),
        counters=dict(bench.counters),
        sim_wall_time_s=bench.t_wall,
    )


@dataclass(frozen=True)
class RamseyResult:
    rows: tuple[ScanRow, ...]  # x = delay_s, p_excite = contrast
    fringes: dict
    flagged: tuple[float, ...]
    fit: CoherenceFit | None
    telemetry: tuple = ()
    counters: dict = field(default_factory=dict)
    sim_wall_time_s: float = 0.0

    @property
    def delays_s(self) -> np.ndarray:
        return np.array([r.x for r in self.rows])

    @property
    def contrasts(self) -> np.ndarray:
        return np.array([r.p_excite for r in self.rows])

    CSV_HEADER = ("delay_s", "contrast", "stderr", "n")

    def csv_rows(self):
        for r in self.rows:
            yield (f"{r.x:.9f}", f"{r.p_excite:.6f}", f"{r.stderr:.6f}", r.n)


def _fit_fringe(phases, ps, shots_per_point):
    """Least-squares sinusoid over phase; returns (offset, amplitude).

    The raw amplitude estimate b^2 + c^2 is biased upward by the
    binomial noise variance of the points; subtracting E[var] keeps the
    fitted contrast from flooring at the shot-noise level at long
    delays.
    """
    ph = np.asarray(phases)
    ps = np.asarray(ps)
    basis = np.column_stack([np.ones_like(ph), np.cos(ph), np.sin(ph)])
    coef, *_ = np.linalg.lstsq(basis, ps, rcond=None)
    a, b, c = coef
    var_point = float(np.mean(ps * (1.0 - ps))) / shots_per_point
    amp_sq = b**2 + c**2 - 4.0 * var_point / len(ph)
    return float(a), math.sqrt(max(amp_sq, 0.0))


def ramsey_scan(
    cfg: BenchConfig,
    delays_s,
    seed: int,
    phases: int = 8,
    shots_per_point: int = 25,
    schedule: InterleaveSchedule = InterleaveSchedule(),
    injection: DriftInjection | None = None,
    fit_decay: bool = True,
) -> RamseyResult:
    """Phase-swept Ramsey: two pi/2 pulses separated by each delay, with
    the second pulse's phase swept over 2 pi.

    The contrast per delay is (max-min)/(max+min) of the fitted
    sinusoid. Sweeping phase captures the full contrast even when slow
    noise has shifted the fringe. Delays with a degenerate fringe fit
    are flagged and excluded from the decay fit.
    """
    if phases < 4:
        raise DomainError("need at least 4 phases spanning 2*pi")
    delays_s = tuple(float(d) for d in delays_s)
    runner = InterleavedRunner(cfg, seed, schedule, injection)
    bench = runner.bench
    t_half = 1.0 / (4.0 * cfg.rabi_hz)  # nominal pi/2 duration
    phase_grid = [2.0 * math.pi * k / phases for k in range(phases)]
    rows, flagged = [], []
    fringes = {}
    shot_id = 0
    for di, delay in enumerate(delays_s):
        p_at_phase = []
        for phi_i, phi in enumerate(phase_grid):
            hits = 0
            for rep in range(shots_per_point):
                tag = f"ramsey:{di}:{phi_i}:{rep}"
                runner.before_shot(tag)
                rng = bench.shot_rng(tag)
                scale = cfg.motional.rabi_scale(rng)
                state = _prepare(runner, tag, rng, scale)
                static = bench.quasi_static_offset() + runner.correction()
                total = 2.0 * t_half + delay
                rate = cfg.fast_rate_hz
                n1 = max(int(round(t_half * rate)), 1)
                nd = int(round(delay * rate))
                noise, rate = bench.pulse_noise(f"{tag}:seq", (2 * n1 + nd + 2) / rate)
                rabi = cfg.rabi_hz * scale
                state = evolve_pulse(
                    state, bench.reference, rabi, t_half,
                    laser_trace=noise[:n1], trace_rate_hz=rate, static_detuning_hz=static,
                )
                if delay > 0:
                    phase_acc = 2.0 * math.pi * (
                        static * delay + float(np.sum(noise[n1 : n1 + nd])) / rate
                    )
                    state = free_evolution(state, bench.reference, phase_acc)
                state = evolve_pulse(
                    state, bench.reference, rabi, t_half, phase_rad=phi,
                    laser_trace=noise[n1 + nd : n1 + nd + n1], trace_rate_hz=rate,
                    static_detuning_hz=static,
                )
                bench.advance(total)
                record = _detect_shot(runner, state, rng, shot_id, tag,
                                      phase_rad=phi)
                shot_id += 1
                hits += int(not record.bright)
            p_at_phase.append(hits / shots_per_point)
        offset, amplitude = _fit_fringe(phase_grid, p_at_phase, shots_per_point)
        fringes[delay] = (tuple(phase_grid), tuple(p_at_phase))
        if offset <= 1e-6:
            flagged.append(delay)
            contrast = 0.0
        else:
            contrast = min(max(amplitude / offset, 0.0), 1.0)
        stderr = math.sqrt(max(offset * (1 - offset), 0.0) / (phases * shots_per_point))
        rows.append(ScanRow(delay, contrast, stderr, phases * shots_per_point))

    fit = None
    if fit_decay:
        good = [r for r in rows if r.x not in flagged]
        if len(good) >= 4:
            fit = fit_contrast_decay([r.x for r in good], [r.p_excite for r in good])
    return RamseyResult(
        rows=tuple(rows),
        fringes=fringes,
        flagged=tuple(flagged),
        fit=fit,
        telemetry=tuple(runner.telemetry),
        counters=dict(bench.counters),
        sim_wall_time_s=bench.t_wall,
    )


@dataclass(frozen=True)
class SpamResult:
    fidelity: float
    fidelity_dark_prep: float
    fidelity_bright_prep: float
    counts_dark_prep: tuple[int, ...]
    counts_bright_prep: tuple[int, ...]
    threshold: int
    overlap_fraction: float
    n_shelve_pulses: int
    n_shots: int
    counters: dict = field(default_factory=dict)
    sim_wall_time_s: float = 0.0

    def histogram(self, max_count: int | None = None):
        all_counts = list(self.counts_dark_prep) + list(self.counts_bright_prep)
        hi = max(all_counts) if max_count is None else max_count
        bins = np.arange(0, hi + 2)
        return bins, np.histogram(all_counts, bins=bins)[0]


def spam_experiment(
    cfg: BenchConfig,
    n_shots: int,
    seed: int,
    schedule: InterleaveSchedule = InterleaveSchedule(),
    n_shelve_pulses: int = 3,
) -> SpamResult:
    """Full state-preparation-and-measurement run.

    Alternating shots prepare the two qubit states: "dark-prep" pumps
    into S(-1/2) and shelves it into D sublevels (expect a dark
    verdict); "bright-prep" pumps into S(+1/2), which the shelving
    pulses do not address (expect bright). Fidelity is the correct
    -verdict fraction over both.
    """
    if n_shots < 100:
        raise DomainError("SPAM statistics need at least 100 shots")
    if not (1 <= n_shelve_pulses <= len(cfg.shelve_targets)):
        raise DomainError(
            f"shelve pulse count must be in [1, {len(cfg.shelve_targets)}]"
        )
    runner = InterleavedRunner(cfg, seed, schedule)
    bench = runner.bench
    targets = cfg.shelve_targets[:n_shelve_pulses]
    pulse_list = [(m_d, cfg.shelve_pulse_s) for m_d in targets]
    counts = {"dark": [], "bright": []}
    correct = {"dark": 0, "bright": 0}
    for shot_id in range(n_shots):
        prep = "dark" if shot_id % 2 == 0 else "bright"
        target_m_s = -0.5 if prep == "dark" else +0.5
        tag = f"spam:{prep}:{shot_id}"
        runner.before_shot(tag)
        rng = bench.shot_rng(tag)
        scale = cfg.motional.rabi_scale(rng)
        state = _prepare(runner, tag, rng, scale, target_m_s=target_m_s)
        static = bench.quasi_static_offset() + runner.correction()
        counter = itertools.count()

        def trace_fn(duration_s, _tag=tag):
            return bench.pulse_noise(f"{_tag}:shelve{next(counter)}", duration_s)

        state = shelve_multi(
            state, cfg.table, cfg.rabi_hz * scale, pulse_list,
            trace_fn=trace_fn, static_detuning_hz=static,
        )
        bench.advance(n_shelve_pulses * cfg.shelve_pulse_s)
        record = _detect_shot(runner, state, rng, shot_id, tag)
        counts[prep].append(record.counts)
        expected_bright = prep == "bright"
        correct[prep] += int(record.bright == expected_bright)

    n_dark = len(counts["dark"])
    n_bright = len(counts["bright"])
    fidelity = (correct["dark"] + correct["bright"]) / n_shots
    overlap = 1.0 - fidelity  # misclassified fraction at the threshold
    return SpamResult(
        fidelity=fidelity,
        fidelity_dark_prep=correct["dark"] / n_dark,
        fidelity_bright_prep=correct["bright"] / n_bright,
        counts_dark_prep=tuple(counts["dark"]),
        counts_bright_prep=tuple(counts["bright"]),
        threshold=cfg.detection.threshold(),
        overlap_fraction=overlap,
        n_shelve_pulses=n_shelve_pulses,
        n_shots=n_shots,
        counters=dict(bench.counters),
        sim_wall_time_s=bench.t_wall,
    )


def min_shelve_pulses(
    cfg: BenchConfig,
    seed: int,
    target_fidelity: float = 0.99,
    n_shots: int = 600,
    schedule: InterleaveSchedule = InterleaveSchedule(enabled=False),
) -> tuple[int, dict[int, float]]:
    """Smallest shelving pulse count reaching the target SPAM fidelity.

    Returns (count, {count: fidelity}); count is 0 if no depth reaches
    the target.
    """
    fidelities = {}
    for k in range(1, len(cfg.shelve_targets) + 1):
        result = spam_experiment(cfg, n_shots, seed, schedule=schedule, n_shelve_pulses=k)
        fidelities[k] = result.fidelity
        if result.fidelity >= target_fidelity:
            return k, fidelities
    return 0, fidelities
