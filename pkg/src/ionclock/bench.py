"""The simulated bench: one laser chain driving one trapped ion.

A :class:`BenchConfig` is a frozen description (noise model, transition
table, pulse/detection parameters, timing); instantiating a
:class:`Bench` with a seed builds the run-scoped laser timeline, the
wall clock, and the counters. Everything stochastic flows from the seed
through named streams, so (config, seed) pins every byte of a run.

Laser noise reaches the ion through three channels:

* a slow trace (noise below ``f_split_hz``), synthesized once over the
  run and sampled as a quasi-static offset per pulse;
* per-pulse fast traces (noise above ``f_split_hz``) at the pulse
  sample rate, driving the Bloch stepper sample by sample;
* the deterministic-plus-random-walk coil drift and any injected
  transition-frequency waveform, evaluated on the wall clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .chain import DriftProcess, resolve_preset
from .errors import DomainError
from .ion import (
    DetectionConfig,
    IonState,
    MotionalConfig,
    PumpConfig,
    TransitionTable,
    zeeman_table,
)
from .noise import NoiseModel, synthesize_band
from .rng import stream


@dataclass(frozen=True)
class TimingConfig:
    cool_s: float = 2e-3
    detect_s: float = 2e-3


@dataclass(frozen=True)
class ProbePulse:
    """A pi-pulse probe: rabi_hz=None means the pi rate for the duration."""

    duration_s: float
    rabi_hz: float | None = None

    def rabi(self) -> float:
        return self.rabi_hz if self.rabi_hz is not None else 1.0 / (2.0 * self.duration_s)


@dataclass(frozen=True)
class ClockConfig:
    """Two-point lock parameters for this bench."""

    half_width_hz: float = 3000.0
    gain_hz: float | None = None  # default: half_width/4
    probe: ProbePulse = field(default_factory=lambda: ProbePulse(60e-6))
    n_avg: int = 1
    warmup_cycles: int = 40
    unlock_after: int = 60

    def gain(self) -> float:
        return self.gain_hz if self.gain_hz is not None else self.half_width_hz / 4.0


@dataclass(frozen=True)
class BenchConfig:
    model: NoiseModel
    table: TransitionTable
    rabi_hz: float = 1.0 / (2.0 * 15e-6)  # 15 us pi time
    motional: MotionalConfig = field(default_factory=MotionalConfig)
    pump: PumpConfig = field(default_factory=PumpConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    clock: ClockConfig = field(default_factory=ClockConfig)
    spectroscopy_probe: ProbePulse = field(default_factory=lambda: ProbePulse(300e-6))
    shelve_pulse_s: float = 15e-6
    shelve_targets: tuple[float, ...] = (-2.5, -1.5, -0.5, 0.5, 1.5)
    fast_rate_hz: float = 2.5e6
    f_split_hz: float = 4e3
    d_lifetime_s: float = math.inf


#: Bench clock settings per chain. The interleaved servo runs a longer,
#: weaker probe than the bare 60 us module default: a 60 us pi probe has
#: a ~15 kHz Fourier-limited lineshape, which costs so much discriminator
#: slope that single-shot servo noise would dominate the qubit
#: experiments. Gains are set for a few-hundred-Hz residual.
_CHAIN_CLOCK = {
    "sbs_coil": ClockConfig(half_width_hz=3000.0, gain_hz=600.0, probe=ProbePulse(150e-6),
                            n_avg=2, warmup_cycles=25),
    "pump_coil": ClockConfig(half_width_hz=6000.0, gain_hz=900.0, probe=ProbePulse(60e-6)),
}
_CHAIN_SPEC_PROBE = {
    "sbs_coil": ProbePulse(400e-6),
    "pump_coil": ProbePulse(200e-6),
}


def preset_bench(chain: str = "sbs_coil", b_field_gauss: float = 5.9, **overrides) -> BenchConfig:
    """Bench configuration for a named laser-chain preset."""
    model = resolve_preset(chain)
    cfg = BenchConfig(
        model=model,
        table=zeeman_table(b_field_gauss),
        clock=_CHAIN_CLOCK.get(chain, ClockConfig()),
        spectroscopy_probe=_CHAIN_SPEC_PROBE.get(chain, ProbePulse(300e-6)),
    )
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def quiet_bench(**overrides) -> BenchConfig:
    """Noiseless bench (zero PSD, no drift) for oracle-style tests."""
    cfg = BenchConfig(model=NoiseModel(model_id="quiet"), table=zeeman_table(5.9))
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


class _BlockSeries:
    """Lazily extended sampled series, generated block by block."""

    def __init__(self, rate_hz: float, block_s: float, make_block: Callable[[int], np.ndarray]):
        self.rate = rate_hz
        self.block_n = max(int(round(block_s * rate_hz)), 2)
        self.make_block = make_block
        self.blocks: list[np.ndarray] = []

    def value_at(self, t: float) -> float:
        idx = int(t * self.rate)
        while idx >= len(self.blocks) * self.block_n:
            self.blocks.append(self.make_block(len(self.blocks)))
        block, off = divmod(idx, self.block_n)
        return float(self.blocks[block][off])


class LaserTimeline:
    """Run-scoped realization of the laser offset seen by the ion."""

    BLOCK_S = 20.0
    DRIFT_DT_S = 5e-3

    def __init__(
        self,
        model: NoiseModel,
        seed: int,
        f_split_hz: float,
        injection: Callable[[float], float] | None = None,
    ):
        self.model = model
        self.seed = seed
        self.f_split = f_split_hz
        self.injection = injection
        slow_rate = 4.0 * f_split_hz

        def make_slow(i: int) -> np.ndarray:
            rng = stream(seed, f"timeline:slow:{i}")
            return synthesize_band(model, self.BLOCK_S, slow_rate, rng, f_hi=f_split_hz)

        self._slow = _BlockSeries(slow_rate, self.BLOCK_S, make_slow)
        self._drift_state = (0.0, 0.0)  # (thermal, walk) carried across blocks
        self._drift = _BlockSeries(1.0 / self.DRIFT_DT_S, self.BLOCK_S, self._make_drift_block)
        self._fast_cache_tag = None
        self._fast_cache = None

    def _make_drift_block(self, i: int) -> np.ndarray:
        drift = self.model.drift
        n = self._drift.block_n
        if drift is None:
            return np.zeros(n)
        dt = self.DRIFT_DT_S
        t = (i * n + np.arange(n)) * dt
        thermal_prev, walk_prev = self._drift_state
        target = drift.temp_sensitivity_hz_per_k * np.asarray(drift.temp_error(t), dtype=float)
        a = math.exp(-dt / drift.settle_tau_s)
        thermal = np.empty(n)
        prev = thermal_prev
        for j in range(n):
            prev = prev * a + target[j] * (1.0 - a)
            thermal[j] = prev
        rng = stream(self.seed, f"timeline:drift:{i}")
        steps = rng.standard_normal(n) * math.sqrt(drift.residual_random_walk_hz2_per_s * dt)
        walk = walk_prev + np.cumsum(steps)
        self._drift_state = (float(thermal[-1]), float(walk[-1]))
        return thermal + walk

    def laser_slow_offset(self, t: float) -> float:
        """Sub-split-band laser noise plus coil drift at wall time t."""
        return self._slow.value_at(t) + self._drift.value_at(t)

    def transition_shift(self, t: float) -> float:
        return 0.0 if self.injection is None else float(self.injection(t))

    def pulse_noise(self, tag: str, duration_s: float, rate_hz: float) -> np.ndarray:
        """Fast-band (> f_split) noise samples covering ``duration_s``."""
        pad_s = max(duration_s, 2.0 / self.f_split)
        rng = stream(self.seed, f"timeline:fast:{tag}")
        trace = synthesize_band(self.model, pad_s, rate_hz, rng, f_lo=self.f_split)
        n = max(int(round(duration_s * rate_hz)), 2)
        return trace[:n]


class Bench:
    """Runtime pairing of a BenchConfig with a seed."""

    def __init__(
        self,
        cfg: BenchConfig,
        seed: int,
        injection: Callable[[float], float] | None = None,
    ):
        self.cfg = cfg
        self.seed = seed
        self.timeline = LaserTimeline(cfg.model, seed, cfg.f_split_hz, injection)
        self.t_wall = 0.0
        self.counters: dict[str, int] = {"detect_calls": 0, "shots": 0, "clock_cycles": 0}
        self.reference = cfg.table.find(-0.5, -2.5)

    def advance(self, dt_s: float) -> None:
        if dt_s < 0:
            raise DomainError("cannot advance the wall clock backwards")
        self.t_wall += dt_s

    def shot_rng(self, tag: str) -> np.random.Generator:
        return stream(self.seed, f"shot:{tag}")

    def pulse_noise(self, tag: str, duration_s: float) -> tuple[np.ndarray, float]:
        return self.timeline.pulse_noise(tag, duration_s, self.cfg.fast_rate_hz), self.cfg.fast_rate_hz

    def quasi_static_offset(self, t: float | None = None) -> float:
        t = self.t_wall if t is None else t
        return self.timeline.laser_slow_offset(t) - self.timeline.transition_shift(t)

    def cool(self) -> None:
        """Doppler cooling window (422/1092/1033 duty); advances the clock."""
        self.advance(self.cfg.timing.cool_s)

    def nearest_entry(self, detuning_hz: float):
        """Table entry closest to an absolute probe detuning."""
        entries = self.cfg.table.entries
        dets = np.array([e.detuning_hz for e in entries])
        return entries[int(np.argmin(np.abs(dets - detuning_hz)))]
