"""Frequency-metrology analysis: Allan deviation, integral linewidths,
lineshape fits, and coherence-decay fits.

Two integral-linewidth estimators are provided:

* reverse 1/pi: integrate the phase-noise PSD S_phi = S_nu/f^2 downward
  from f_max; the linewidth is the frequency where the accumulated
  integral first reaches 1/pi rad^2.
* beta separation: the linewidth is sqrt(8 ln2 * A) where A is the area
  of S_nu over the region lying above the line 8 ln2 f / pi^2.

PSD integrals use trapezoids on log-spaced samples (>= 200 points per
decade) since the integrands are power-law dominated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import DegenerateDataError, DomainError, InsufficientDataError
from .noise import FrequencyTrace, NoiseModel, evaluate_psd

BETA_COEFF = 8.0 * math.log(2.0) / math.pi**2


# --- Allan deviation --------------------------------------------------------


@dataclass(frozen=True)
class AdevResult:
    taus_s: np.ndarray
    sigma_y: np.ndarray
    n_samples: np.ndarray
    carrier_hz: float
    skipped_taus_s: tuple[float, ...] = ()

    def sigma_at(self, tau_s: float) -> float:
        idx = int(np.argmin(np.abs(self.taus_s - tau_s)))
        return float(self.sigma_y[idx])


def _as_freq_samples(freq_offsets) -> tuple[np.ndarray, float]:
    if isinstance(freq_offsets, FrequencyTrace):
        return np.asarray(freq_offsets.samples, dtype=float), 1.0 / freq_offsets.rate_hz
    raise DomainError("pass a FrequencyTrace or (samples, dt) to allan_deviation")


def allan_deviation(
    freq_offsets,
    carrier_hz: float,
    taus_s=None,
    dt_s: float | None = None,
) -> AdevResult:
    """Overlapping Allan deviation of fractional frequency y = df/carrier.

    Parameters
    ----------
    freq_offsets : FrequencyTrace, or array of frequency offsets in Hz
        (e.g. per-cycle clock corrections) with ``dt_s`` giving their
        spacing.
    carrier_hz : optical carrier used to fractionalize.
    taus_s : averaging times to evaluate; defaults to an octave-spaced
        ladder. Taus with fewer than 2 overlapping pairs are omitted and
        reported in ``skipped_taus_s``.
    """
    if isinstance(freq_offsets, FrequencyTrace):
        y, dt = _as_freq_samples(freq_offsets)
    else:
        y = np.asarray(freq_offsets, dtype=float)
        if dt_s is None:
            raise DomainError("dt_s is required for a bare sample array")
        dt = float(dt_s)
    if len(y) < 3:
        raise InsufficientDataError("Allan deviation needs at least 3 samples")
    if carrier_hz <= 0:
        raise DomainError("carrier must be positive")
    y = y / carrier_hz

    n = len(y)
    if taus_s is None:
        max_m = n // 3
        ms = np.unique((2 ** np.arange(0, math.floor(math.log2(max(max_m, 1))) + 1)).astype(int))
        taus_s = ms * dt
    taus_s = np.atleast_1d(np.asarray(taus_s, dtype=float))
    if np.any(np.diff(taus_s) <= 0):
        raise DomainError("taus must be strictly increasing")

    cum = np.concatenate([[0.0], np.cumsum(y)])
    out_t, out_s, out_n, skipped = [], [], [], []
    for tau in taus_s:
        m = int(round(tau / dt))
        if m < 1 or n - 2 * m + 1 < 2:
            skipped.append(float(tau))
            continue
        block = (cum[m:] - cum[:-m]) / m  # means of m consecutive samples
        d = block[m:] - block[:-m]
        out_t.append(m * dt)
        out_s.append(math.sqrt(0.5 * float(np.mean(d**2))))
        out_n.append(len(d))
    if skipped:
        warnings.warn(f"omitted taus with too few pairs: {skipped}", stacklevel=2)
    return AdevResult(
        taus_s=np.asarray(out_t),
        sigma_y=np.asarray(out_s),
        n_samples=np.asarray(out_n),
        carrier_hz=carrier_hz,
        skipped_taus_s=tuple(skipped),
    )


def white_fm_adev(h0_hz2_per_hz: float, tau_s, carrier_hz: float):
    """Analytic white-FM oracle: sigma_y(tau) = sqrt(h0/(2 tau))/carrier."""
    tau_s = np.asarray(tau_s, dtype=float)
    return np.sqrt(h0_hz2_per_hz / (2.0 * tau_s)) / carrier_hz


# --- integral linewidths ----------------------------------------------------


def _model_bumps(model: NoiseModel):
    bumps = list(model.bumps)
    if model.lock is not None:
        bumps += _model_bumps(model.lock.base)
        bumps += _model_bumps(model.lock.reference)
    return bumps


def sample_log_psd(model_or_psd, f_min: float, f_max: float, points_per_decade: int = 200):
    """Return (f, S_nu) log-sampled over [f_min, f_max].

    For a NoiseModel the log grid is refined with linear windows around
    each bump so that features narrower than the log spacing still
    integrate correctly.
    """
    if f_min <= 0 or f_max <= f_min:
        raise DomainError("need 0 < f_min < f_max")
    if isinstance(model_or_psd, NoiseModel):
        decades = math.log10(f_max / f_min)
        n = max(int(decades * points_per_decade) + 1, 16)
        f = np.logspace(math.log10(f_min), math.log10(f_max), n)
        extra = []
        for bump in _model_bumps(model_or_psd):
            lo = max(bump.center_hz - 5.0 * bump.width_hz, f_min)
            hi = min(bump.center_hz + 5.0 * bump.width_hz, f_max)
            if hi > lo:
                extra.append(np.linspace(lo, hi, 121))
        if extra:
            f = np.unique(np.concatenate([f] + extra))
        return f, np.asarray(evaluate_psd(model_or_psd, f))
    f, s = model_or_psd
    f = np.asarray(f, dtype=float)
    s = np.asarray(s, dtype=float)
    mask = (f >= f_min) & (f <= f_max)
    if mask.sum() < 4:
        raise DomainError("PSD samples do not cover the requested band")
    return f[mask], s[mask]


def ilw_reverse_one_over_pi(
    model_or_psd, f_min: float, f_max: float, points_per_decade: int = 200
) -> float:
    """Reverse-1/pi integral linewidth over [f_min, f_max].

    Integrates S_phi = S_nu/f^2 downward from f_max and returns the
    frequency where the accumulated phase variance first reaches
    1/pi rad^2 (log-interpolated); returns f_min if it never does.
    """
    f, s_nu = sample_log_psd(model_or_psd, f_min, f_max, points_per_decade)
    s_phi = s_nu / f**2
    # cumulative trapezoid integral from the top end downward
    seg = 0.5 * (s_phi[1:] + s_phi[:-1]) * np.diff(f)
    cum_from_top = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    target = 1.0 / math.pi
    if cum_from_top[0] < target:
        return float(f_min)
    idx = int(np.argmax(cum_from_top < target))  # first index below target
    lo, hi = idx - 1, idx
    c_lo, c_hi = cum_from_top[lo], cum_from_top[hi]
    if c_lo == c_hi:
        return float(f[lo])
    frac = (c_lo - target) / (c_lo - c_hi)
    return float(f[lo] * (f[hi] / f[lo]) ** frac)


def ilw_beta_separation(
    model_or_psd, f_min: float, f_max: float, points_per_decade: int = 200
) -> float:
    """Beta-separation-line integral linewidth over [f_min, f_max].

    A = integral of S_nu where S_nu(f) > 8 ln2 f / pi^2; returns
    sqrt(8 ln2 A), or 0 if the PSD never crosses the beta line.
    """
    f, s_nu = sample_log_psd(model_or_psd, f_min, f_max, points_per_decade)
    above = s_nu > BETA_COEFF * f
    if not np.any(above):
        return 0.0
    integrand = np.where(above, s_nu, 0.0)
    area = float(np.trapezoid(integrand, f))
    return math.sqrt(8.0 * math.log(2.0) * area)


@dataclass(frozen=True)
class LinewidthReport:
    flw_hz: float
    ilw_one_over_pi_hz: float
    ilw_beta_hz: float
    band: tuple[float, float]

    def __post_init__(self):
        if self.band[0] <= 0 or self.band[1] <= self.band[0]:
            raise DomainError("invalid linewidth band")


def linewidth_report(model: NoiseModel, f_min: float, f_max: float) -> LinewidthReport:
    from .noise import fundamental_linewidth_hz

    return LinewidthReport(
        flw_hz=fundamental_linewidth_hz(model),
        ilw_one_over_pi_hz=ilw_reverse_one_over_pi(model, f_min, f_max),
        ilw_beta_hz=ilw_beta_separation(model, f_min, f_max),
        band=(f_min, f_max),
    )


# --- lineshape fit ----------------------------------------------------------

_LN16 = 4.0 * math.log(2.0)


def _gauss(x, center, fwhm, amp):
    return amp * np.exp(-_LN16 * ((x - center) / fwhm) ** 2)


def _sinc2(x, center, fwhm, amp):
    # sinc^2 with its own FWHM parameterization (FWHM of sinc^2 = 0.8859/T)
    arg = 0.8859 * (x - center) / fwhm
    return amp * np.sinc(arg) ** 2


@dataclass(frozen=True)
class LineshapeFit:
    center_hz: float
    fwhm_hz: float
    amplitude: float
    residual_rms: float
    ok: bool = True
    model: str = "gauss"


def binomial_sigma(p, n) -> np.ndarray:
    """Per-point standard error for excitation fractions, with a
    Jeffreys-style floor so p = 0 or 1 points keep finite weight."""
    p = np.asarray(p, dtype=float)
    k = p * n
    return np.sqrt((k + 0.5) * (n - k + 0.5) / n**3)


def fit_lineshape(detunings_hz, p_excite, model: str = "gauss", sigma=None,
                  core_refit: bool = True) -> LineshapeFit:
    """Least-squares line fit to (detuning, excitation) points.

    Gaussian by default (laser-noise-limited regime); ``model="sinc2"``
    selects the Fourier-limited pulse lineshape instead. ``sigma`` gives
    optional per-point standard errors for a weighted fit.

    With ``core_refit`` (default) the fit runs twice: once over all
    points and once restricted to +-1.5 fitted widths around the fitted
    center, so far wings and spectral pedestals cannot drag the width.
    On failure a LineshapeFit with ok=False and the data RMS as residual
    is returned.
    """
    x = np.asarray(detunings_hz, dtype=float)
    y = np.asarray(p_excite, dtype=float)
    sig = None if sigma is None else np.asarray(sigma, dtype=float)
    if len(x) < 5:
        raise InsufficientDataError("need at least 5 points spanning the peak")
    shape = {"gauss": _gauss, "sinc2": _sinc2}.get(model)
    if shape is None:
        raise DomainError(f"unknown lineshape model {model!r}")
    amp0 = float(np.max(y))
    center0 = float(x[np.argmax(y)])
    above = x[y > amp0 / 2.0]
    fwhm0 = float(above.max() - above.min()) if len(above) > 1 else float(np.ptp(x)) / 4.0
    fwhm0 = max(fwhm0, float(np.min(np.abs(np.diff(x)))) if len(x) > 1 else 1.0)

    def solve(xs, ys, sg, p0):
        popt, _ = curve_fit(shape, xs, ys, p0=p0, maxfev=5000, sigma=sg)
        return popt

    try:
        popt = solve(x, y, sig, [center0, fwhm0, max(amp0, 1e-6)])
        if core_refit:
            window = np.abs(x - popt[0]) <= 1.5 * abs(popt[1])
            if 5 <= window.sum() < len(x):
                popt = solve(x[window], y[window],
                             None if sig is None else sig[window], list(popt))
        resid = y - shape(x, *popt)
        return LineshapeFit(
            center_hz=float(popt[0]),
            fwhm_hz=abs(float(popt[1])),
            amplitude=float(popt[2]),
            residual_rms=float(np.sqrt(np.mean(resid**2))),
            ok=True,
            model=model,
        )
    except RuntimeError:
        return LineshapeFit(
            center_hz=center0,
            fwhm_hz=fwhm0,
            amplitude=amp0,
            residual_rms=float(np.sqrt(np.mean((y - np.mean(y)) ** 2))),
            ok=False,
            model=model,
        )


def raw_fwhm(detunings_hz, p_excite) -> float:
    """Half-maximum crossing width straight off the data, no fit."""
    x = np.asarray(detunings_hz, dtype=float)
    y = np.asarray(p_excite, dtype=float)
    half = np.max(y) / 2.0
    above = np.where(y >= half)[0]
    if len(above) < 2:
        return 0.0
    return float(x[above[-1]] - x[above[0]])


# --- coherence decay --------------------------------------------------------


@dataclass(frozen=True)
class CoherenceFit:
    tau_coh_s: float
    contrast_0: float
    residual_rms: float
    model: str = "exp"

    def __post_init__(self):
        if self.tau_coh_s <= 0:
            raise DomainError("coherence time must be positive")


def fit_contrast_decay(delays_s, contrasts, model: str = "exp") -> CoherenceFit:
    """Fit C(T) = C0 exp(-T/tau) (or Gaussian exp(-(T/tau)^2)) to Ramsey
    contrast points."""
    t = np.asarray(delays_s, dtype=float)
    c = np.asarray(contrasts, dtype=float)
    if len(t) < 4:
        raise InsufficientDataError("need at least 4 delay points")
    if np.any((c < 0) | (c > 1)):
        raise DomainError("contrasts must lie in [0, 1]")
    if np.allclose(c, c[0]):
        raise DegenerateDataError("all contrasts equal; decay time undefined")
    if model == "exp":
        def decay(x, c0, tau):
            return c0 * np.exp(-x / tau)
    elif model == "gauss":
        def decay(x, c0, tau):
            return c0 * np.exp(-((x / tau) ** 2))
    else:
        raise DomainError(f"unknown decay model {model!r}")
    span = float(t.max() - t.min()) or float(t.max())
    popt, _ = curve_fit(
        decay, t, c, p0=[max(c.max(), 1e-3), span / 2.0],
        bounds=([0.0, span * 1e-4], [1.5, span * 1e4]), maxfev=5000,
    )
    resid = c - decay(t, *popt)
    return CoherenceFit(
        tau_coh_s=float(popt[1]),
        contrast_0=float(min(max(popt[0], 0.0), 1.0)),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        model=model,
    )


def coherence_linewidth(tau_coh_s: float) -> float:
    """Linewidth implied by a coherence time: delta_nu = 1/(pi tau)."""
    if tau_coh_s <= 0:
        raise DomainError("coherence time must be positive")
    return 1.0 / (math.pi * tau_coh_s)


def coherence_time(linewidth_hz: float) -> float:
    """Inverse of :func:`coherence_linewidth`."""
    if linewidth_hz <= 0:
        raise DomainError("linewidth must be positive")
    return 1.0 / (math.pi * linewidth_hz)
