"""Two-point optical-clock lock on the ion transition.

Each cycle probes the two half-maximum flanks of the reference
transition (cool, pi-probe, detect per side) and steers the probe
frequency by the excitation imbalance:

    correction += gain * (right_excited - left_excited)

so the correction per cycle is bounded by the gain exactly, the update
is unbiased on a symmetric line at zero offset, and corrections track
slow drift of the laser relative to the ion. Cooling is modeled as a
state reset to the addressed S sublevel (cooling + implicit pumping);
ion-loss events are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bench import Bench, BenchConfig, ClockConfig
from .errors import DomainError
from .ion import IonState, detect, evolve_pulse
from .rng import stream


@dataclass
class ClockServoState:
    half_width_hz: float
    gain_hz: float
    correction_hz: float = 0.0
    history: list[tuple[int, int, bool, float]] = field(default_factory=list)
    recent_steps: list = field(default_factory=list)
    no_excitation_run: int = 0

    _RECENT_CAP = 256

    def __post_init__(self):
        if self.half_width_hz <= 0:
            raise DomainError("half width must be positive")
        if self.gain_hz <= 0:
            raise DomainError("gain must be positive")

    def record_step(self, delta: float) -> None:
        self.recent_steps.append(delta)
        if len(self.recent_steps) > self._RECENT_CAP:
            del self.recent_steps[: -self._RECENT_CAP]

    def slew_saturation(self, window: int) -> float:
        """|net movement| over the last ``window`` cycles as a fraction
        of the maximum possible slew; ~1 means the loop is railed."""
        if len(self.recent_steps) < window:
            return 0.0
        recent = self.recent_steps[-window:]
        return abs(sum(recent)) / (window * self.gain_hz)


@dataclass(frozen=True)
class DriftInjection:
    """Artificial drift added to the transition frequency seen by the servo.

    A triangle with a very large amplitude degenerates into a linear
    ramp over any finite run.
    """

    waveform: str = "none"  # "none" | "triangle"
    amplitude_hz: float = 0.0
    rate_hz_per_s: float = 0.0

    def __post_init__(self):
        if self.waveform not in ("none", "triangle"):
            raise DomainError(f"unknown drift waveform {self.waveform!r}")
        if self.rate_hz_per_s < 0:
            raise DomainError("drift rate must be non-negative")

    def __call__(self, t: float) -> float:
        if self.waveform == "none" or self.rate_hz_per_s == 0.0 or self.amplitude_hz == 0.0:
            return 0.0
        period = 4.0 * self.amplitude_hz / self.rate_hz_per_s
        x = (t % period) / period
        if x < 0.25:
            return 4.0 * self.amplitude_hz * x
        if x < 0.75:
            return self.amplitude_hz * (2.0 - 4.0 * x)
        return 4.0 * self.amplitude_hz * (x - 1.0)

    def as_callable(self):
        return None if self.waveform == "none" else self


def _probe_once(bench: Bench, servo: ClockServoState, side: int, rng,
                clock_cfg: ClockConfig, tag: str) -> bool:
    """One side probe: cool -> pi pulse at +-half_width -> detect.

    Cooling resets the optical qubit to the addressed S sublevel."""
    cfg = bench.cfg
    bench.cool()
    state = IonState.ground(-0.5)
    probe = clock_cfg.probe
    static = (
        bench.quasi_static_offset()
        + servo.correction_hz
        + side * servo.half_width_hz
    )
    noise, rate = bench.pulse_noise(tag, probe.duration_s)
    rabi = probe.rabi() * cfg.motional.rabi_scale(rng)
    state = evolve_pulse(
        state,
        bench.reference,
        rabi,
        probe.duration_s,
        laser_trace=noise,
        trace_rate_hz=rate,
        static_detuning_hz=static,
    )
    bench.advance(probe.duration_s)
    record = detect(state, cfg.detection, rng, sequence_tag=tag, detuning_hz=static,
                    t_wall_s=bench.t_wall)
    bench.advance(cfg.timing.detect_s)
    bench.counters["detect_calls"] += 1
    return not record.bright  # excited = shelved = dark


def clock_cycle(
    bench: Bench,
    servo: ClockServoState,
    cycle_idx: int,
    clock_cfg: ClockConfig | None = None,
    clock_seed: int | None = None,
    clock_tag: str = "clk",
) -> float:
    """Probe both flanks once (or n_avg times each) and apply the update.

    Returns the correction increment. History gains one entry per side:
    (cycle, side, excited, correction before update).
    """
    clock_cfg = clock_cfg or bench.cfg.clock
    seed = bench.seed if clock_seed is None else clock_seed
    fractions = {}
    for side in (-1, +1):
        hits = 0
        for k in range(clock_cfg.n_avg):
            # rng streams are keyed by (seed, cycle, side) only, so two
            # servos with identical seeds draw identical verdicts; the
            # clock_tag individualizes the per-probe laser noise
            rng = stream(seed, f"clock:{cycle_idx}:{side}:{k}")
            tag = f"{clock_tag}:{cycle_idx}:{side}:{k}"
            hits += int(_probe_once(bench, servo, side, rng, clock_cfg, tag))
        fractions[side] = hits / clock_cfg.n_avg
        servo.history.append((cycle_idx, side, fractions[side] > 0.5, servo.correction_hz))
    imbalance = fractions[+1] - fractions[-1]
    delta = servo.gain_hz * imbalance
    servo.correction_hz += delta
    servo.record_step(delta)
    if fractions[-1] == 0.0 and fractions[+1] == 0.0:
        servo.no_excitation_run += 1
    else:
        servo.no_excitation_run = 0
    bench.counters["clock_cycles"] += 1
    return delta


@dataclass(frozen=True)
class ClockRun:
    times_s: np.ndarray
    corrections_hz: np.ndarray
    injected_hz: np.ndarray
    residual_hz: np.ndarray
    cycle_s: float
    servo: ClockServoState

    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(self.residual_hz**2)))

    CSV_HEADER = ("t_s", "correction_hz", "injected_hz", "residual_hz")

    def csv_rows(self):
        for row in zip(self.times_s, self.corrections_hz, self.injected_hz, self.residual_hz):
            yield tuple(f"{v:.6f}" for v in row)


def run_clock(
    cfg: BenchConfig,
    n_cycles: int,
    seed: int,
    drift: DriftInjection = DriftInjection(),
    clock_cfg: ClockConfig | None = None,
    clock_tag: str = "clk",
) -> ClockRun:
    """Run a single two-point lock for ``n_cycles``.

    Corrections track (transition shift - slow laser offset);
    ``residual_hz`` is the instantaneous servo error, i.e. how far the
    corrected probe center sat from the (possibly shifted) line at each
    cycle start.
    """
    if n_cycles < 1:
        raise DomainError("need at least one clock cycle")
    clock_cfg = clock_cfg or cfg.clock
    bench = Bench(cfg, seed, injection=drift.as_callable())
    servo = ClockServoState(half_width_hz=clock_cfg.half_width_hz, gain_hz=clock_cfg.gain())
    times, corrections, injected, residual = [], [], [], []
    for i in range(n_cycles):
        t0 = bench.t_wall
        clock_cycle(bench, servo, i, clock_cfg, clock_seed=seed, clock_tag=clock_tag)
        times.append(t0)
        corrections.append(servo.correction_hz)
        injected.append(bench.timeline.transition_shift(t0))
        residual.append(bench.quasi_static_offset(t0) + servo.correction_hz)
    times = np.asarray(times)
    cycle_s = float(times[1] - times[0]) if len(times) > 1 else bench.t_wall
    return ClockRun(
        times_s=times,
        corrections_hz=np.asarray(corrections),
        injected_hz=np.asarray(injected),
        residual_hz=np.asarray(residual),
        cycle_s=cycle_s,
        servo=servo,
    )


@dataclass(frozen=True)
class DualClockRun:
    run_a: ClockRun
    run_b: ClockRun
    difference_hz: np.ndarray
    times_s: np.ndarray
    cycle_s: float

    def rms_difference(self) -> float:
        return float(np.sqrt(np.mean(self.difference_hz**2)))


def dual_clock_run(
    cfg: BenchConfig,
    n_cycles: int,
    seeds: tuple[int, int],
    drift_a: DriftInjection = DriftInjection(),
    clock_cfg: ClockConfig | None = None,
    timeline_seed: int | None = None,
) -> DualClockRun:
    """Two independent locks alternating cycles on one ion/laser timeline.

    Both servos see the same laser noise and drift, so their correction
    difference isolates servo noise. ``drift_a`` shifts the transition
    as seen by clock A only (triangle-recovery comparison); identical
    seeds with a noiseless bench give a difference of exactly zero.
    """
    clock_cfg = clock_cfg or cfg.clock
    seed_a, seed_b = seeds
    bench = Bench(cfg, seed_a if timeline_seed is None else timeline_seed)
    inj = drift_a.as_callable()
    servo_a = ClockServoState(clock_cfg.half_width_hz, clock_cfg.gain())
    servo_b = ClockServoState(clock_cfg.half_width_hz, clock_cfg.gain())
    t_a, c_a, r_a, w_a = [], [], [], []
    t_b, c_b, r_b = [], [], []
    for i in range(n_cycles):
        t0 = bench.t_wall
        shift = 0.0 if inj is None else inj(t0)
        # clock A probes the shifted transition: offset its frame in, out
        servo_a.correction_hz -= shift
        clock_cycle(bench, servo_a, i, clock_cfg, clock_seed=seed_a, clock_tag="clkA")
        servo_a.correction_hz += shift
        t_a.append(t0)
        c_a.append(servo_a.correction_hz)
        w_a.append(shift)
        r_a.append(bench.quasi_static_offset(t0) - shift + servo_a.correction_hz)

        t0 = bench.t_wall
        clock_cycle(bench, servo_b, i, clock_cfg, clock_seed=seed_b, clock_tag="clkB")
        t_b.append(t0)
        c_b.append(servo_b.correction_hz)
        r_b.append(bench.quasi_static_offset(t0) + servo_b.correction_hz)
    run_a = ClockRun(np.asarray(t_a), np.asarray(c_a), np.asarray(w_a), np.asarray(r_a),
                     float(t_a[1] - t_a[0]) if len(t_a) > 1 else 0.0, servo_a)
    run_b = ClockRun(np.asarray(t_b), np.asarray(c_b), np.zeros(len(t_b)), np.asarray(r_b),
                     float(t_b[1] - t_b[0]) if len(t_b) > 1 else 0.0, servo_b)
    return DualClockRun(
        run_a=run_a,
        run_b=run_b,
        difference_hz=run_a.corrections_hz - run_b.corrections_hz,
        times_s=run_a.times_s,
        cycle_s=run_a.cycle_s,
    )


def recover_drift(run: ClockRun, window_s: float = 0.8, lag_compensate: bool = True) -> np.ndarray:
    """Estimate the injected drift waveform from a correction series.

    Centered moving average over ``window_s``; optionally removes the
    deterministic first-order loop delay by shifting the smoothed series
    to best overlap the injected record (a pure time shift, so it cannot
    manufacture tracking that the servo did not do).
    """
    c = run.corrections_hz
    n_win = max(int(round(window_s / run.cycle_s)) | 1, 1)
    kernel = np.ones(n_win) / n_win
    pad = n_win // 2
    padded = np.concatenate([np.full(pad, c[0]), c, np.full(pad, c[-1])])
    smooth = np.convolve(padded, kernel, mode="valid")
    if not lag_compensate or np.allclose(run.injected_hz, 0.0):
        return smooth
    target = run.injected_hz
    max_shift = max(int(2.0 / run.cycle_s), 1)
    best_shift, best_err = 0, float("inf")
    for shift in range(0, max_shift):
        est = np.roll(smooth, -shift)
        sl = slice(0, len(c) - max_shift)
        err = float(np.mean((est[sl] - target[sl]) ** 2))
        if err < best_err:
            best_shift, best_err = shift, err
    out = np.roll(smooth, -best_shift)
    out[len(c) - best_shift:] = smooth[-1]
    return out
