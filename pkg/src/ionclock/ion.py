"""Sr-88 ion model: Zeeman-split quadrupole transition table, two-level
pulse evolution under laser noise, frequency-selective optical pumping,
multi-pulse shelving, and fluorescence detection.

The optical qubit lives on the S1/2 <-> D5/2 quadrupole line at 674 nm.
States are pure amplitude vectors over {S(-1/2), S(+1/2), D(-5/2) ...
D(+5/2)}; a pulse addresses one (S, D) sublevel pair and evolves it with
a piecewise-constant Bloch propagator per laser-trace sample, which
keeps every operation exactly unitary. Auxiliary lasers (422 cooling,
1033 quench) enter only as instantaneous population maps plus their
duty-cycle timing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, DomainError, SelectionRuleError
from .noise import FrequencyTrace

MU_B_OVER_H_HZ_PER_G = 1.3996e6
G_S_DEFAULT = 2.0025
G_D_DEFAULT = 1.2003
SIDEBAND_OFFSET_HZ = 900e3

S_LEVELS = (-0.5, 0.5)
D_LEVELS = (-2.5, -1.5, -0.5, 0.5, 1.5, 2.5)
_S_INDEX = {m: i for i, m in enumerate(S_LEVELS)}
_D_INDEX = {m: 2 + i for i, m in enumerate(D_LEVELS)}
DIM = 8


@dataclass(frozen=True)
class TransitionEntry:
    m_s: float
    m_d: float
    detuning_hz: float
    rabi_weight: float = 1.0
    kind: str = "carrier"  # or "sideband_red"/"sideband_blue"

    @property
    def label(self) -> str:
        return f"S({self.m_s:+.1f})->D({self.m_d:+.1f}){'' if self.kind == 'carrier' else ':' + self.kind}"


@dataclass(frozen=True)
class TransitionTable:
    b_field_gauss: float
    entries: tuple[TransitionEntry, ...]
    sideband_offset_hz: float = SIDEBAND_OFFSET_HZ

    def find(self, m_s: float, m_d: float, kind: str = "carrier") -> TransitionEntry:
        for e in self.entries:
            if e.m_s == m_s and e.m_d == m_d and e.kind == kind:
                return e
        raise DomainError(f"no table entry for S({m_s})->D({m_d}) [{kind}]")

    def carriers(self) -> tuple[TransitionEntry, ...]:
        return tuple(e for e in self.entries if e.kind == "carrier")


def zeeman_table(
    b_gauss: float,
    g_s: float = G_S_DEFAULT,
    g_d: float = G_D_DEFAULT,
    include_sidebands: bool = False,
    sideband_weight: float = 0.1,
    sideband_offset_hz: float = SIDEBAND_OFFSET_HZ,
) -> TransitionTable:
    """All quadrupole-allowed S1/2 -> D5/2 transitions in a field B.

    Detunings are mu_B*B*(g_D*m_D - g_S*m_S)/h relative to the reference
    transition S(-1/2) -> D(-5/2), so the reference sits at exactly 0.
    Selection rule: |m_D - m_S| <= 2.
    """
    if b_gauss < 0:
        raise DomainError("field must be non-negative")
    scale = MU_B_OVER_H_HZ_PER_G * b_gauss

    def shift(m_s, m_d):
        return scale * (g_d * m_d - g_s * m_s)

    ref = shift(-0.5, -2.5)
    entries = []
    for m_s in S_LEVELS:
        for m_d in D_LEVELS:
            if abs(m_d - m_s) > 2.0:
                continue
            det = shift(m_s, m_d) - ref
            entries.append(TransitionEntry(m_s, m_d, det))
            if include_sidebands:
                entries.append(
                    TransitionEntry(
                        m_s, m_d, det - sideband_offset_hz, sideband_weight, "sideband_red"
                    )
                )
                entries.append(
                    TransitionEntry(
                        m_s, m_d, det + sideband_offset_hz, sideband_weight, "sideband_blue"
                    )
                )
    entries.sort(key=lambda e: e.detuning_hz)
    return TransitionTable(
        b_field_gauss=b_gauss, entries=tuple(entries), sideband_offset_hz=sideband_offset_hz
    )


class IonState:
    """Pure state over the 8-level {S1/2, D5/2} manifold."""

    __slots__ = ("amps",)

    def __init__(self, amps):
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (DIM,):
            raise DomainError(f"state vector must have {DIM} amplitudes")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-9:
            raise DomainError(f"state norm {norm} deviates from 1 beyond 1e-9")
        self.amps = amps

    @staticmethod
    def ground(m_s: float = -0.5) -> "IonState":
        amps = np.zeros(DIM, dtype=complex)
        amps[_S_INDEX[m_s]] = 1.0
        return IonState(amps)

    @staticmethod
    def in_d(m_d: float) -> "IonState":
        amps = np.zeros(DIM, dtype=complex)
        amps[_D_INDEX[m_d]] = 1.0
        return IonState(amps)

    @staticmethod
    def spin_mixture_sample(rng) -> "IonState":
        """Draw S(-1/2) or S(+1/2) with equal probability (unpumped ion)."""
        return IonState.ground(-0.5 if rng.random() < 0.5 else 0.5)

    def population(self, idx: int) -> float:
        return float(abs(self.amps[idx]) ** 2)

    def p_s(self, m_s: float) -> float:
        return self.population(_S_INDEX[m_s])

    def p_d(self, m_d: float) -> float:
        return self.population(_D_INDEX[m_d])

    @property
    def p_bright(self) -> float:
        return float(np.sum(np.abs(self.amps[:2]) ** 2))

    @property
    def p_dark(self) -> float:
        return float(np.sum(np.abs(self.amps[2:]) ** 2))


def _propagate_two_level(c_g, c_e, omega_hz, phase_rad, dets_hz, dt_s):
    """Sequential piecewise-constant propagators on one two-level pair.

    H/h = -det*sz/2 + omega*(cos(phi) sx + sin(phi) sy)/2 in Hz units;
    each sample applies U = cos(th) I - i sin(th) (n . sigma).
    """
    drive = omega_hz * cmath.exp(-1j * phase_rad)  # couples e<-g
    for det in dets_hz:
        w = math.hypot(omega_hz, det)
        if w == 0.0:
            continue
        theta = math.pi * w * dt_s
        cos_t = math.cos(theta)
        sin_w = math.sin(theta) / w
        ugg = cos_t + 1j * sin_w * det
        uge = -1j * sin_w * drive.conjugate()
        ueg = -1j * sin_w * drive
        uee = cos_t - 1j * sin_w * det
        c_g, c_e = ugg * c_g + uge * c_e, ueg * c_g + uee * c_e
    return c_g, c_e


def evolve_pulse(
    state: IonState,
    transition: TransitionEntry,
    rabi_hz: float,
    duration_s: float,
    phase_rad: float = 0.0,
    laser_trace: FrequencyTrace | np.ndarray | None = None,
    static_detuning_hz: float = 0.0,
    trace_rate_hz: float | None = None,
) -> IonState:
    """Two-level Bloch evolution of the addressed (S, D) pair.

    The instantaneous detuning is static_detuning + trace(t), held
    piecewise constant over each trace sample. ``rabi_hz`` is the full
    population-cycle rate: a resonant pulse of duration 1/(2*rabi)
    transfers all population. The returned state is unit-norm; a
    zero-duration pulse is the exact identity.
    """
    if duration_s < 0:
        raise DomainError("pulse duration must be non-negative")
    if abs(transition.m_d - transition.m_s) > 2.0:
        raise SelectionRuleError(
            f"transition S({transition.m_s})->D({transition.m_d}) violates |dm| <= 2"
        )
    if duration_s == 0.0:
        return IonState(state.amps.copy())

    if laser_trace is None:
        dets = np.asarray([static_detuning_hz])
        dt = duration_s
    else:
        if isinstance(laser_trace, FrequencyTrace):
            samples = laser_trace.samples
            rate = laser_trace.rate_hz
        else:
            samples = np.asarray(laser_trace, dtype=float)
            if trace_rate_hz is None:
                raise DomainError("trace_rate_hz is required with a bare sample array")
            rate = trace_rate_hz
        n = max(int(round(duration_s * rate)), 1)
        if n > len(samples):
            raise CoverageError(
                f"trace covers {len(samples) / rate:.3e} s, pulse needs {duration_s:.3e} s"
            )
        dets = samples[:n] + static_detuning_hz
        dt = duration_s / n

    gi = _S_INDEX[transition.m_s]
    ei = _D_INDEX[transition.m_d]
    amps = state.amps.copy()
    c_g, c_e = _propagate_two_level(
        complex(amps[gi]),
        complex(amps[ei]),
        rabi_hz * transition.rabi_weight,
        phase_rad,
        dets.tolist(),
        dt,
    )
    amps[gi] = c_g
    amps[ei] = c_e
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)))
    return IonState(amps / norm)


def free_evolution(state: IonState, transition: TransitionEntry, phase_rad: float) -> IonState:
    """Relative phase accumulated on the addressed D level during a dark
    delay: phase_rad = 2*pi * integral of detuning dt."""
    amps = state.amps.copy()
    amps[_D_INDEX[transition.m_d]] *= cmath.exp(1j * phase_rad)
    return IonState(amps)


def quench(state: IonState, m_d: float, branching_to_minus: float, rng) -> IonState:
    """1033 nm repump of one D sublevel, as an instantaneous collapse.

    Population in D(m_d) is pumped through P3/2 and lands in S(-1/2)
    with probability ``branching_to_minus``, else S(+1/2). The rest of
    the state is projected and renormalized (quantum-trajectory style).
    """
    di = _D_INDEX[m_d]
    p = float(abs(state.amps[di]) ** 2)
    if rng.random() < p:
        target = -0.5 if rng.random() < branching_to_minus else 0.5
        return IonState.ground(target)
    amps = state.amps.copy()
    amps[di] = 0.0
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)))
    if norm == 0.0:  # numerically p was 1
        target = -0.5 if rng.random() < branching_to_minus else 0.5
        return IonState.ground(target)
    return IonState(amps / norm)


@dataclass(frozen=True)
class PumpConfig:
    n_cycles: int = 10
    pulse674_s: float = 15e-6
    pulse1033_s: float = 50e-6
    branching_to_minus: float = 2.0 / 3.0


def optical_pump(
    state: IonState,
    table: TransitionTable,
    rabi_hz: float,
    rng,
    cfg: PumpConfig = PumpConfig(),
    target_m_s: float = -0.5,
    trace_fn=None,
    static_detuning_hz: float = 0.0,
) -> IonState:
    """Frequency-selective optical pumping into one S sublevel.

    Each cycle drives the opposite spin state up to a D level (674 nm,
    resonant on that transition) and quenches it back down (1033 nm);
    the quench branching makes the target population non-decreasing in
    expectation. ``trace_fn(duration_s)`` supplies per-pulse laser noise
    as (samples, rate); None means a noiseless drive.
    """
    if cfg.n_cycles < 1:
        raise DomainError("need at least one pumping cycle")
    source_m_s = +0.5 if target_m_s == -0.5 else -0.5
    # mirror of the S(+1/2)->D(-3/2) pumping transition
    m_d = source_m_s - 2.0 if target_m_s == -0.5 else source_m_s + 2.0
    entry = table.find(source_m_s, m_d)
    branching = cfg.branching_to_minus if target_m_s == -0.5 else 1.0 - cfg.branching_to_minus
    for _ in range(cfg.n_cycles):
        if trace_fn is None:
            trace, rate = None, None
        else:
            trace, rate = trace_fn(cfg.pulse674_s)
        state = evolve_pulse(
            state,
            entry,
            rabi_hz,
            cfg.pulse674_s,
            laser_trace=trace,
            trace_rate_hz=rate,
            static_detuning_hz=static_detuning_hz,
        )
        state = quench(state, m_d, branching, rng)
    return state


def shelve_multi(
    state: IonState,
    table: TransitionTable,
    rabi_hz: float,
    pulse_list,
    source_m_s: float = -0.5,
    trace_fn=None,
    static_detuning_hz: float = 0.0,
) -> IonState:
    """Sequential shelving pulses from one S sublevel into D sublevels.

    ``pulse_list`` is a sequence of (m_d, duration_s) targets; residual
    source population decreases multiplicatively with each pulse.
    """
    if not pulse_list:
        raise DomainError("pulse list must be non-empty")
    for m_d, duration in pulse_list:
        if abs(m_d - source_m_s) > 2.0:
            raise SelectionRuleError(f"shelving S({source_m_s})->D({m_d}) violates |dm| <= 2")
        entry = table.find(source_m_s, m_d)
        if trace_fn is None:
            trace, rate = None, None
        else:
            trace, rate = trace_fn(duration)
        state = evolve_pulse(
            state,
            entry,
            rabi_hz,
            duration,
            laser_trace=trace,
            trace_rate_hz=rate,
            static_detuning_hz=static_detuning_hz,
        )
    return state


@dataclass(frozen=True)
class DetectionConfig:
    """Fluorescence detection: Poisson counts over a fixed window.

    ``threshold_counts=None`` picks the threshold minimizing the summed
    Poisson misclassification tails for the configured rates.
    """

    bright_rate_cps: float = 15000.0
    dark_rate_cps: float = 500.0
    window_s: float = 2e-3
    threshold_counts: int | None = None

    def __post_init__(self):
        if not (self.bright_rate_cps > self.dark_rate_cps >= 0.0):
            raise DomainError("need bright_rate > dark_rate >= 0")
        if self.window_s <= 0:
            raise DomainError("detection window must be positive")

    @property
    def bright_mean(self) -> float:
        return self.bright_rate_cps * self.window_s

    @property
    def dark_mean(self) -> float:
        return self.dark_rate_cps * self.window_s

    def threshold(self) -> int:
        if self.threshold_counts is not None:
            return self.threshold_counts
        return optimal_threshold(self.bright_mean, self.dark_mean)

    def misclassification(self) -> float:
        """P(dark >= thr) + P(bright < thr) at the active threshold."""
        thr = self.threshold()
        return _poisson_tail_ge(self.dark_mean, thr) + (1.0 - _poisson_tail_ge(self.bright_mean, thr))


def _poisson_tail_ge(mean: float, k: int) -> float:
    """P(X >= k) for X ~ Poisson(mean)."""
    if k <= 0:
        return 1.0
    if mean == 0.0:
        return 0.0
    term = math.exp(-mean)
    cdf = term
    for i in range(1, k):
        term *= mean / i
        cdf += term
    return max(0.0, 1.0 - cdf)


def optimal_threshold(bright_mean: float, dark_mean: float) -> int:
    """Threshold minimizing summed misclassification tails."""
    best_k, best_err = 1, math.inf
    for k in range(1, int(bright_mean * 3) + 2):
        err = _poisson_tail_ge(dark_mean, k) + (1.0 - _poisson_tail_ge(bright_mean, k))
        if err < best_err:
            best_k, best_err = k, err
    return best_k


@dataclass(frozen=True)
class ShotRecord:
    shot_id: int
    sequence_tag: str
    counts: int
    bright: bool
    detuning_hz: float
    phase_rad: float
    t_wall_s: float

    @property
    def verdict(self) -> str:
        return "bright" if self.bright else "dark"

    CSV_HEADER = ("shot_id", "sequence_tag", "counts", "verdict", "detuning_hz", "phase_rad", "t_wall")

    def csv_row(self):
        return (
            self.shot_id,
            self.sequence_tag,
            self.counts,
            self.verdict,
            f"{self.detuning_hz:.6f}",
            f"{self.phase_rad:.6f}",
            f"{self.t_wall_s:.6f}",
        )


def detect(
    state: IonState,
    cfg: DetectionConfig,
    rng,
    shot_id: int = 0,
    sequence_tag: str = "",
    detuning_hz: float = 0.0,
    phase_rad: float = 0.0,
    t_wall_s: float = 0.0,
) -> ShotRecord:
    """Collapse S vs D by population and draw the photon count."""
    bright_state = rng.random() < state.p_bright
    mean = cfg.bright_mean if bright_state else cfg.dark_mean
    counts = int(rng.poisson(mean)) if mean > 0 else 0
    return ShotRecord(
        shot_id=shot_id,
        sequence_tag=sequence_tag,
        counts=counts,
        bright=counts >= cfg.threshold(),
        detuning_hz=detuning_hz,
        phase_rad=phase_rad,
        t_wall_s=t_wall_s,
    )


@dataclass(frozen=True)
class MotionalConfig:
    """Thermal motion entering as per-shot Rabi-frequency scatter.

    A thermally distributed phonon number n scales the carrier coupling
    by (1 - eta^2 n) (Debye-Waller). Defaults calibrate the mean pi-flip
    probability to about 0.92 for a Doppler-cooled ion.
    """

    lamb_dicke: float = 0.1
    nbar: float = 12.0

    def rabi_scale(self, rng) -> float:
        if self.nbar <= 0 or self.lamb_dicke == 0:
            return 1.0
        p = 1.0 / (1.0 + self.nbar)
        n = rng.geometric(p) - 1  # support starting at 0
        return max(1.0 - self.lamb_dicke**2 * n, 0.05)

    def mean_pi_fidelity(self, n_draws: int = 20000, seed: int = 0) -> float:
        from .rng import stream

        rng = stream(seed, "motional:calib")
        scales = np.array([self.rabi_scale(rng) for _ in range(n_draws)])
        return float(np.mean(np.sin(math.pi / 2.0 * scales) ** 2))
