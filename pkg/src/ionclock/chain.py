"""Laser stabilization chain: pump -> SBS stage -> cavity lock, plus the
resonator's thermal drift process.

The four named chain stages are built here and frozen as golden presets.
Free-running stages are plain power-law + bump models; locked stages are
lock compositions of a laser model with the shared coil-reference model
(see :class:`ionclock.noise.LockStage`). Preset coefficients were
calibrated so the metrology module reproduces the stage anchor numbers
(fundamental linewidths 47 kHz / 12 Hz, integral linewidths 182 kHz /
7 kHz / 580 Hz / 10 kHz, beta-separation widths 316 kHz / 31 kHz) and
are pinned by regression tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError
from .noise import Bump, FrequencyTrace, LockStage, NoiseModel, StagePreset, evaluate_psd
from .rng import stream


class LockTarget(Enum):
    SBS_TO_COIL = "sbs_to_coil"
    PUMP_TO_COIL = "pump_to_coil"


@dataclass(frozen=True)
class ServoConfig:
    """Phenomenological cavity-lock loop: bandwidth, gain plateau, bump.

    The servo bump is a Lorentzian at the loop bandwidth whose height is
    ``bump_height_factor`` times the laser PSD there; factor 0 models a
    bump-suppressed lock. ``detector_floor_hz2_per_hz`` is the error
    -signal noise written onto the laser below the bandwidth;
    ``gain_peak`` is optional in-loop gain peaking (a mid-frequency
    noise hump below the bandwidth, typical of a marginally compensated
    loop).
    """

    bandwidth_hz: float
    low_freq_gain_db: float = 60.0
    bump_height_factor: float = 0.0
    lock_target: LockTarget = LockTarget.SBS_TO_COIL
    slope: int = 2
    detector_floor_hz2_per_hz: float = 0.0
    bump_width_hz: float | None = None
    gain_peak: Bump | None = None
    integrator_corner_hz: float = 20.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise DomainError("servo bandwidth must be positive")
        if not math.isfinite(self.low_freq_gain_db):
            raise DomainError("servo gain must be finite")
        if self.gain_peak is not None and self.gain_peak.center_hz >= self.bandwidth_hz:
            raise DomainError("gain peaking must sit below the loop bandwidth")


@dataclass(frozen=True)
class TempScenario:
    """Temperature setpoint error T_err(t) in kelvin: optional step + sine."""

    step_k: float = 0.0
    step_at_s: float = 0.0
    sine_amp_k: float = 0.0
    sine_period_s: float = 3600.0

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.where(t >= self.step_at_s, self.step_k, 0.0)
        if self.sine_amp_k:
            out = out + self.sine_amp_k * np.sin(2.0 * math.pi * t / self.sine_period_s)
        return out


@dataclass(frozen=True)
class DriftProcess:
    """Slow drift of the locked laser, inherited from the coil resonator.

    Frequency follows temperature error through a first-order low-pass
    (sensitivity 2.5 GHz/K, 1/e settle 420 s), plus a random-walk
    residual whose diffusion is calibrated to ~4 kHz peak wander per
    minute (order 100 Hz/s).
    """

    temp_sensitivity_hz_per_k: float = 2.5e9
    settle_tau_s: float = 420.0
    temp_error: TempScenario | Callable[[np.ndarray], np.ndarray] = field(
        default_factory=TempScenario
    )
    residual_random_walk_hz2_per_s: float = 2.7e5

    def __post_init__(self):
        if self.settle_tau_s <= 0:
            raise DomainError("settle time must be positive")
        if self.temp_sensitivity_hz_per_k < 0:
            raise DomainError("temperature sensitivity must be non-negative")

    def thermal_response(self, t) -> np.ndarray:
        """Deterministic thermal frequency shift at times t (s).

        Exact discrete solve of tau*dy/dt = sens*T_err - y on the given
        grid, assuming T_err is piecewise constant between samples.
        """
        t = np.asarray(t, dtype=float)
        target = self.temp_sensitivity_hz_per_k * np.asarray(self.temp_error(t), dtype=float)
        y = np.zeros_like(t)
        for i in range(1, len(t)):
            a = math.exp(-(t[i] - t[i - 1]) / self.settle_tau_s)
            y[i] = y[i - 1] * a + target[i - 1] * (1.0 - a)
        return y

    def random_walk(self, t, seed: int, tag: str = "driftwalk") -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.residual_random_walk_hz2_per_s == 0 or len(t) < 2:
            return np.zeros_like(t)
        rng = stream(seed, tag)
        dt = np.diff(t)
        steps = rng.standard_normal(len(dt)) * np.sqrt(
            self.residual_random_walk_hz2_per_s * np.abs(dt)
        )
        return np.concatenate([[0.0], np.cumsum(steps)])

    def offsets(self, t, seed: int) -> np.ndarray:
        return self.thermal_response(t) + self.random_walk(t, seed)


def coil_drift(drift: DriftProcess, duration_s: float, dt_s: float, seed: int) -> FrequencyTrace:
    """Slow drift trace: thermal response plus random-walk residual."""
    if dt_s > drift.settle_tau_s / 10.0:
        raise DomainError("dt must be at most settle_tau/10")
    n = max(int(round(duration_s / dt_s)) + 1, 2)
    t = np.arange(n) * dt_s
    return FrequencyTrace(
        rate_hz=1.0 / dt_s, samples=drift.offsets(t, seed), seed=seed, model_id="coil_drift"
    )


# --- stage operations -------------------------------------------------------

SBS_FLW_REDUCTION = 3917.0  # 47 kHz -> 12 Hz
SBS_FLICKER_REDUCTION = 50.0
SBS_WALK_REDUCTION = 3.0
#: Residual noise of the pump-to-SBS-resonator lock (a weak PDH lock by
#: current modulation), appearing as a shoulder near 9 kHz.
SBS_LOCK_SHOULDER = Bump.from_area(9e3, 4e3, 2.8e7)


def apply_sbs_stage(
    pump: NoiseModel,
    flw_reduction: float = SBS_FLW_REDUCTION,
    flicker_reduction: float = SBS_FLICKER_REDUCTION,
    walk_reduction: float = SBS_WALK_REDUCTION,
    lock_shoulder: Bump | None = SBS_LOCK_SHOULDER,
) -> NoiseModel:
    """Brillouin nonlinear noise filtering of the pump laser.

    The white plateau drops by ``flw_reduction``; low-frequency power-law
    terms drop by the calibrated factors that land the free-running SBS
    integral linewidth near 7 kHz. Pump bumps are filtered with the
    plateau, and the resonator-lock shoulder is added on top.
    """
    if pump.lock is not None:
        raise DomainError("SBS stage applies to a free-running pump model")
    h = dict(pump.h)
    if h.get(0, 0.0) <= 0:
        if any(v > 0 for v in h.values()) or pump.bumps or pump.floor_hz2_per_hz:
            raise DomainError("pump model must have a white plateau h0 > 0")
    reductions = {0: flw_reduction, 1: flw_reduction, 2: flw_reduction,
                  -1: flicker_reduction, -2: walk_reduction}
    h = {a: v / reductions[a] for a, v in h.items()}
    bumps = tuple(
        replace(b, height_hz2_per_hz=b.height_hz2_per_hz / flw_reduction) for b in pump.bumps
    )
    if lock_shoulder is not None:
        bumps = bumps + (lock_shoulder,)
    return NoiseModel(
        h=h,
        bumps=bumps,
        floor_hz2_per_hz=pump.floor_hz2_per_hz / flw_reduction,
        drift=pump.drift,
        model_id=pump.model_id + "+sbs",
    )


def apply_cavity_lock(
    laser: NoiseModel, servo: ServoConfig, cavity_floor: NoiseModel
) -> NoiseModel:
    """PDH lock of ``laser`` onto the cavity described by ``cavity_floor``.

    Below the loop bandwidth the laser PSD is pulled to the cavity noise
    (plus the servo's detector floor), limited by the finite loop gain;
    above it the laser is untouched; near it an optional servo bump is
    added.
    """
    lock = LockStage(
        base=laser,
        reference=cavity_floor,
        bandwidth_hz=servo.bandwidth_hz,
        slope=servo.slope,
        low_freq_gain_db=servo.low_freq_gain_db,
        detector_floor_hz2_per_hz=servo.detector_floor_hz2_per_hz,
        integrator_corner_hz=servo.integrator_corner_hz,
    )
    bumps: tuple[Bump, ...] = ()
    if servo.bump_height_factor > 0:
        width = servo.bump_width_hz or servo.bandwidth_hz / 5.0
        height = servo.bump_height_factor * float(evaluate_psd(laser, servo.bandwidth_hz))
        bumps = (Bump(servo.bandwidth_hz, width, height),)
    if servo.gain_peak is not None:
        bumps = bumps + (servo.gain_peak,)
    return NoiseModel(
        h={},
        bumps=bumps,
        floor_hz2_per_hz=0.0,
        drift=cavity_floor.drift,
        lock=lock,
        model_id=laser.model_id + "+coil",
    )


# --- frozen presets ---------------------------------------------------------

#: Coil-resonator reference noise as seen through a lock: thermorefractive
#: floor, technical 1/f, a narrow acoustic feature near 520 Hz, and a
#: modulation/pickup spur at 25 kHz. The acoustic feature is Gaussian
#: -shaped: a Lorentzian tail above the 500-600 Hz region would dominate
#: the reverse-1/pi phase integral.
COIL_REFERENCE = NoiseModel(
    h={-1: 1.7e5},
    bumps=(
        Bump.from_area(520.0, 42.0, 5.0e6, shape="gauss"),
        Bump.from_area(25e3, 30.0, 2.0e6),
    ),
    floor_hz2_per_hz=10.0,
    model_id="coil_reference",
)

SBS_COIL_SERVO = ServoConfig(
    bandwidth_hz=300e3,
    low_freq_gain_db=60.0,
    bump_height_factor=0.0,
    lock_target=LockTarget.SBS_TO_COIL,
    detector_floor_hz2_per_hz=3.0,
)

PUMP_COIL_SERVO = ServoConfig(
    bandwidth_hz=250e3,
    low_freq_gain_db=30.0,
    bump_height_factor=1.0,
    lock_target=LockTarget.PUMP_TO_COIL,
    slope=3,
    detector_floor_hz2_per_hz=300.0,
    bump_width_hz=50e3,
    gain_peak=Bump.from_area(45e3, 20e3, 2.25e8),
    integrator_corner_hz=50.0,
)

_DEFAULT_DRIFT = DriftProcess()


def pump_free_model() -> NoiseModel:
    """Free-running ECDL pump: 47 kHz FLW plateau, strong low-frequency
    noise, and a controller noise shoulder near 180 kHz."""
    return NoiseModel(
        h={0: 47e3 / math.pi, -1: 1.0e8, -2: 2.6e11},
        bumps=(Bump.from_area(180e3, 20e3, 1.7e10),),
        model_id="pump_free",
    )


def sbs_free_model() -> NoiseModel:
    return apply_sbs_stage(pump_free_model()).with_id("sbs_free")


def sbs_coil_locked_model() -> NoiseModel:
    model = apply_cavity_lock(sbs_free_model(), SBS_COIL_SERVO, COIL_REFERENCE)
    return replace(model, drift=_DEFAULT_DRIFT, model_id="sbs_coil")


def pump_coil_locked_model() -> NoiseModel:
    model = apply_cavity_lock(pump_free_model(), PUMP_COIL_SERVO, COIL_REFERENCE)
    return replace(model, drift=_DEFAULT_DRIFT, model_id="pump_coil")


_PRESET_BUILDERS = {
    StagePreset.PUMP_FREE: pump_free_model,
    StagePreset.SBS_FREE: sbs_free_model,
    StagePreset.SBS_COIL_LOCKED: sbs_coil_locked_model,
    StagePreset.PUMP_COIL_LOCKED: pump_coil_locked_model,
}


def resolve_preset(preset: StagePreset | str) -> NoiseModel:
    if isinstance(preset, str):
        try:
            preset = StagePreset(preset)
        except ValueError:
            names = ", ".join(p.value for p in StagePreset)
            raise DomainError(f"unknown preset {preset!r}; expected one of: {names}") from None
    return _PRESET_BUILDERS[preset]()
