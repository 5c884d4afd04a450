"""Laser frequency-noise models and time-domain trace synthesis.

A :class:`NoiseModel` is a one-sided frequency-noise PSD

    S_nu(f) = sum_a h_a * f**a  +  sum bumps  +  floor        [Hz^2/Hz]

with power-law exponents a in {-2, -1, 0, 1, 2}, parameterized spectral
bumps, and a flat thermorefractive-style floor. Stabilized-laser models
additionally carry a ``lock`` composition (see :class:`LockStage`) that
blends a base laser model with a reference-cavity model through a servo
suppression function.

Traces are synthesized by frequency-domain shaping of white Gaussian
noise, which gives exact PSD control at O(n log n) cost. The synthesis
band is [1/duration, rate/2]; behavior below the band belongs to the
slow drift process attached to the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import ConfigError, DomainError, InsufficientDataError
from .rng import stream

if TYPE_CHECKING:
    from .chain import DriftProcess

ALPHAS = (-2, -1, 0, 1, 2)


@dataclass(frozen=True)
class Bump:
    """One spectral bump: servo bump, modulation pedestal, acoustic line.

    ``width_hz`` is the full width at half maximum. ``shape`` selects the
    line profile: "lorentz" (default, standard servo-bump approximation)
    or "gauss" for sharply band-limited features whose far tails must not
    leak into phase-noise integrals.
    """

    center_hz: float
    width_hz: float
    height_hz2_per_hz: float
    shape: str = "lorentz"

    def __post_init__(self):
        if self.center_hz <= 0 or self.width_hz <= 0:
            raise DomainError("bump center and width must be positive")
        if self.height_hz2_per_hz < 0:
            raise DomainError("bump height must be non-negative")
        if self.shape not in ("lorentz", "gauss"):
            raise DomainError(f"unknown bump shape {self.shape!r}")

    def psd(self, f):
        f = np.asarray(f, dtype=float)
        if self.shape == "lorentz":
            hwhm = 0.5 * self.width_hz
            return self.height_hz2_per_hz / (1.0 + ((f - self.center_hz) / hwhm) ** 2)
        sigma = self.width_hz / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return self.height_hz2_per_hz * np.exp(-0.5 * ((f - self.center_hz) / sigma) ** 2)

    @property
    def area_hz2(self) -> float:
        """Analytic integral of the bump over all frequencies."""
        if self.shape == "lorentz":
            return self.height_hz2_per_hz * math.pi * 0.5 * self.width_hz
        sigma = self.width_hz / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return self.height_hz2_per_hz * sigma * math.sqrt(2.0 * math.pi)

    @staticmethod
    def from_area(center_hz, width_hz, area_hz2, shape="lorentz") -> "Bump":
        if shape == "lorentz":
            height = 2.0 * area_hz2 / (math.pi * width_hz)
        else:
            sigma = width_hz / (2.0 * math.sqrt(2.0 * math.log(2.0)))
            height = area_hz2 / (sigma * math.sqrt(2.0 * math.pi))
        return Bump(center_hz, width_hz, height, shape)


@dataclass(frozen=True)
class LockStage:
    """Servo composition of a base laser with a reference cavity.

    The loop suppression g(f) tends to 1 above the bandwidth and to the
    gain-limited plateau 10**(-gain_db/10) below it:

        S_out = S_base * g + (S_ref + detector_floor) * (1 - g) + bump

    ``slope`` is the loop rolloff order (2 = integrator-squared). Below
    ``integrator_corner_hz`` the plateau gives way to integrating action
    (suppression deepens as f^2 again), so a random-walking laser stays
    bounded against the reference at very low offsets.
    """

    base: "NoiseModel"
    reference: "NoiseModel"
    bandwidth_hz: float
    slope: int = 2
    low_freq_gain_db: float = 60.0
    detector_floor_hz2_per_hz: float = 0.0
    integrator_corner_hz: float = 20.0

    def suppression(self, f):
        f = np.asarray(f, dtype=float)
        r = (f / self.bandwidth_hz) ** (2 * self.slope)
        g = r / (1.0 + r)
        g_min = 10.0 ** (-self.low_freq_gain_db / 10.0)
        plateau = g_min / (1.0 + (self.integrator_corner_hz / f) ** 2)
        return np.maximum(g, plateau)


@dataclass(frozen=True)
class NoiseModel:
    """One-sided frequency-noise PSD of one laser stage.

    ``h`` maps power-law exponent alpha to its coefficient h_alpha in
    Hz^2/Hz at 1 Hz offset. All coefficients must be non-negative.
    """

    h: dict[int, float] = field(default_factory=dict)
    bumps: tuple[Bump, ...] = ()
    floor_hz2_per_hz: float = 0.0
    drift: Optional["DriftProcess"] = None
    lock: LockStage | None = None
    model_id: str = "custom"

    def __post_init__(self):
        for alpha, coeff in self.h.items():
            if alpha not in ALPHAS:
                raise DomainError(f"unsupported power-law exponent {alpha}")
            if coeff < 0:
                raise DomainError(f"h[{alpha}] must be non-negative")
        if self.floor_hz2_per_hz < 0:
            raise DomainError("floor must be non-negative")

    def with_id(self, model_id: str) -> "NoiseModel":
        return replace(self, model_id=model_id)

    def all_bump_centers(self) -> list[float]:
        centers = [b.center_hz for b in self.bumps]
        if self.lock is not None:
            centers += self.lock.base.all_bump_centers()
            centers += self.lock.reference.all_bump_centers()
        return centers


class StagePreset(Enum):
    """Named laser-chain stages with frozen, calibrated noise models."""

    PUMP_FREE = "pump_free"
    SBS_FREE = "sbs_free"
    SBS_COIL_LOCKED = "sbs_coil"
    PUMP_COIL_LOCKED = "pump_coil"

    def model(self) -> NoiseModel:
        from .chain import resolve_preset

        return resolve_preset(self)


def evaluate_psd(model: NoiseModel, f) -> np.ndarray | float:
    """Evaluate the one-sided frequency-noise PSD at offset f (Hz).

    Accepts scalars or arrays; all frequencies must be positive.
    """
    arr = np.asarray(f, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise DomainError("PSD is defined for finite f > 0 only")
    out = np.zeros_like(arr)
    for alpha, coeff in model.h.items():
        if coeff:
            out += coeff * arr ** float(alpha)
    for bump in model.bumps:
        out += bump.psd(arr)
    out += model.floor_hz2_per_hz
    if model.lock is not None:
        g = model.lock.suppression(arr)
        base = evaluate_psd(model.lock.base, arr)
        ref = evaluate_psd(model.lock.reference, arr) + model.lock.detector_floor_hz2_per_hz
        out += base * g + ref * (1.0 - g)
    if np.isscalar(f):
        return float(out)
    return out


def fundamental_linewidth_hz(model: NoiseModel, f_probe_hz: float = 10e6) -> float:
    """Lorentzian linewidth pi*h0 inferred from the white plateau.

    The plateau is read off the full composed PSD at a high offset where
    power-law terms and bumps have died away.
    """
    return math.pi * float(evaluate_psd(model, f_probe_hz))


@dataclass(frozen=True)
class FrequencyTrace:
    """Uniformly sampled instantaneous laser frequency offset (Hz)."""

    rate_hz: float
    samples: np.ndarray
    seed: int
    model_id: str = "custom"

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise DomainError("sample rate must be positive")
        if len(self.samples) < 2:
            raise DomainError("a trace needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("trace contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.rate_hz

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.rate_hz


def _shaped_noise(model, n, rate_hz, rng, f_lo=None, f_hi=None) -> np.ndarray:
    """White Gaussian noise shaped to the model PSD over [f_lo, f_hi]."""
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    psd = np.zeros_like(freqs)
    psd[1:] = evaluate_psd(model, freqs[1:])
    if f_lo is not None:
        psd[freqs < f_lo] = 0.0
    if f_hi is not None:
        psd[freqs > f_hi] = 0.0
    if not np.any(psd):
        return np.zeros(n)
    # One-sided PSD -> rfft bin scale: E|X_k|^2 = S(f_k) * rate * n / 2
    scale = np.sqrt(psd * rate_hz * n / 2.0)
    re = rng.standard_normal(len(freqs))
    im = rng.standard_normal(len(freqs))
    spec = scale * (re + 1j * im) / math.sqrt(2.0)
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = scale[-1] * re[-1]
    return np.fft.irfft(spec, n=n)


def synthesize_trace(
    model: NoiseModel,
    duration_s: float,
    rate_hz: float,
    seed: int,
    include_drift: bool = True,
    stream_tag: str = "synth",
) -> FrequencyTrace:
    """Synthesize a frequency trace whose PSD follows ``model``.

    Parameters
    ----------
    model : NoiseModel
    duration_s, rate_hz : trace length and sample rate. duration*rate
        must be at least 64 samples and rate/2 must clear every bump
        center in the (composed) model.
    seed : root seed; the trace stream is derived from (seed, stream_tag,
        model_id) so identical inputs give byte-identical traces.
    include_drift : add the model's slow drift process, if any.
    """
    n = int(round(duration_s * rate_hz))
    if n < 64:
        raise ConfigError("duration*rate must give at least 64 samples")
    for center in model.all_bump_centers():
        if center >= rate_hz / 2.0:
            raise ConfigError(
                f"Nyquist violation: bump at {center:g} Hz needs rate > {2 * center:g} Hz"
            )
    rng = stream(seed, f"{stream_tag}:{model.model_id}")
    samples = _shaped_noise(model, n, rate_hz, rng)
    if include_drift and model.drift is not None:
        t = np.arange(n) / rate_hz
        samples = samples + model.drift.offsets(t, seed)
    return FrequencyTrace(rate_hz=rate_hz, samples=samples, seed=seed, model_id=model.model_id)


def synthesize_band(
    model: NoiseModel,
    duration_s: float,
    rate_hz: float,
    rng: np.random.Generator,
    f_lo: float | None = None,
    f_hi: float | None = None,
) -> np.ndarray:
    """Band-restricted synthesis used internally by the pulse machinery.

    No Nyquist guard: components above rate/2 are simply excluded, which
    is what per-pulse traces at modest rates want.
    """
    n = max(int(round(duration_s * rate_hz)), 2)
    return _shaped_noise(model, n, rate_hz, rng, f_lo=f_lo, f_hi=f_hi)


@dataclass(frozen=True)
class PsdEstimate:
    freqs_hz: np.ndarray
    psd_hz2_per_hz: np.ndarray
    segment_len: int
    n_segments: int
    rate_hz: float

    def band_average(self, f_lo, f_hi) -> float:
        mask = (self.freqs_hz >= f_lo) & (self.freqs_hz <= f_hi)
        if not np.any(mask):
            raise DomainError("empty averaging band")
        return float(np.mean(self.psd_hz2_per_hz[mask]))


def estimate_psd(trace: FrequencyTrace, segment_len: int) -> PsdEstimate:
    """Averaged-periodogram (Welch, Hann, 50% overlap) PSD of a trace.

    The estimate is one-sided and Parseval-consistent: its integral
    matches the variance of the detrended trace to within a few percent.
    """
    if segment_len < 2 or (segment_len & (segment_len - 1)) != 0:
        raise DomainError("segment length must be a power of two")
    if segment_len > len(trace.samples):
        raise InsufficientDataError(
            f"trace has {len(trace.samples)} samples, fewer than segment_len={segment_len}"
        )
    from scipy import signal

    freqs, psd = signal.welch(
        trace.samples,
        fs=trace.rate_hz,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend="constant",
        return_onesided=True,
        average="mean",
    )
    n_segments = 1 + (len(trace.samples) - segment_len) // (segment_len // 2)
    return PsdEstimate(
        freqs_hz=freqs[1:],
        psd_hz2_per_hz=psd[1:],
        segment_len=segment_len,
        n_segments=n_segments,
        rate_hz=trace.rate_hz,
    )
