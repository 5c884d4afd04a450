"""Matplotlib figure rendering for the CLI report paths.

Figures are written to files next to the CSV outputs; the Agg backend
keeps everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 130


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def psd_figure(path, curves, title="frequency-noise PSD", ilw_notes=None):
    """Log-log PSD overlay; curves = [(freqs, psd, label), ...]."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for freqs, psd, label in curves:
        ax.loglog(freqs, np.maximum(psd, 1e-12), label=label, lw=1.2)
    ax.set_xlabel("offset frequency (Hz)")
    ax.set_ylabel(r"$S_\nu(f)$ (Hz$^2$/Hz)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if ilw_notes:
        ax.text(0.02, 0.04, "\n".join(ilw_notes), transform=ax.transAxes, fontsize=8,
                va="bottom", bbox=dict(boxstyle="round", fc="w", alpha=0.8))
    if len(curves) > 1 or True:
        ax.legend(fontsize=8)
    return _finish(fig, path)


def adev_figure(path, results, title="Allan deviation", guide=None):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for res, label in results:
        ax.loglog(res.taus_s, res.sigma_y, "o-", ms=3, lw=1.0, label=label)
    if guide is not None:
        taus = np.asarray(results[0][0].taus_s)
        ax.loglog(taus, guide / np.sqrt(taus), "--", color="gray",
                  label=rf"{guide:.1e}$/\sqrt{{\tau}}$")
    ax.set_xlabel(r"averaging time $\tau$ (s)")
    ax.set_ylabel(r"$\sigma_y(\tau)$")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def lineshape_figure(path, xs, ps, stderr=None, fit=None, title="spectroscopy"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(np.asarray(xs) / 1e3, ps, yerr=stderr, fmt="o", ms=3, lw=0.8, capsize=2)
    if fit is not None and fit.ok:
        grid = np.linspace(min(xs), max(xs), 400)
        ln16 = 4.0 * np.log(2.0)
        curve = fit.amplitude * np.exp(-ln16 * ((grid - fit.center_hz) / fit.fwhm_hz) ** 2)
        ax.plot(grid / 1e3, curve, "-", lw=1.2,
                label=f"Gaussian fit: FWHM {fit.fwhm_hz / 1e3:.2f} kHz")
        ax.legend(fontsize=8)
    ax.set_xlabel("detuning (kHz)")
    ax.set_ylabel("excitation probability")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def contrast_figure(path, delays_s, contrasts, fit=None, title="Ramsey contrast decay"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(np.asarray(delays_s) * 1e6, contrasts, "o", ms=4)
    if fit is not None:
        grid = np.linspace(0, max(delays_s), 300)
        ax.plot(grid * 1e6, fit.contrast_0 * np.exp(-grid / fit.tau_coh_s), "-", lw=1.2,
                label=rf"$\tau_{{1/e}}$ = {fit.tau_coh_s * 1e6:.1f} $\mu$s")
        ax.legend(fontsize=8)
    ax.set_xlabel(r"Ramsey delay ($\mu$s)")
    ax.set_ylabel("fringe contrast")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def rabi_figure(path, durations_s, ps, title="Rabi flopping"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(np.asarray(durations_s) * 1e6, ps, "o-", ms=3, lw=0.9)
    ax.set_xlabel(r"pulse duration ($\mu$s)")
    ax.set_ylabel("excitation probability")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def clock_figure(path, run, recovered=None, title="clock corrections"):
    fig, ax = plt.subplots(figsize=(6.8, 4.0))
    ax.plot(run.times_s, run.corrections_hz / 1e3, lw=0.7, label="correction")
    if np.any(run.injected_hz):
        ax.plot(run.times_s, run.injected_hz / 1e3, "--", lw=1.0, label="injected drift")
    if recovered is not None:
        ax.plot(run.times_s, np.asarray(recovered) / 1e3, lw=1.0, label="recovered")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (kHz)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def dual_clock_figure(path, dual, title="dual clock comparison"):
    fig, axes = plt.subplots(2, 1, figsize=(6.8, 5.6), sharex=True)
    axes[0].plot(dual.run_a.times_s, dual.run_a.corrections_hz / 1e3, lw=0.7, label="clock A")
    axes[0].plot(dual.run_b.times_s, dual.run_b.corrections_hz / 1e3, lw=0.7, label="clock B")
    axes[0].set_ylabel("correction (kHz)")
    axes[0].legend(fontsize=8)
    axes[0].grid(alpha=0.3)
    rms = float(np.sqrt(np.mean(dual.difference_hz**2)))
    axes[1].plot(dual.times_s, dual.difference_hz, lw=0.7, color="purple")
    axes[1].set_ylabel("difference (Hz)")
    axes[1].set_xlabel("time (s)")
    axes[1].set_title(f"RMS difference {rms:.0f} Hz", fontsize=9)
    axes[1].grid(alpha=0.3)
    fig.suptitle(title)
    return _finish(fig, path)


def histogram_figure(path, counts_dark, counts_bright, threshold, title="photon counts"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    hi = max(max(counts_dark, default=0), max(counts_bright, default=0)) + 2
    bins = np.arange(0, hi + 1) - 0.5
    ax.hist(counts_dark, bins=bins, alpha=0.65, label="prepared dark (shelved)")
    ax.hist(counts_bright, bins=bins, alpha=0.65, label="prepared bright")
    ax.axvline(threshold - 0.5, color="k", ls="--", lw=1.0, label=f"threshold = {threshold}")
    ax.set_xlabel("photon counts per window")
    ax.set_ylabel("shots")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def trace_figure(path, trace, max_points=20000, title="frequency trace"):
    fig, ax = plt.subplots(figsize=(6.8, 3.6))
    step = max(len(trace.samples) // max_points, 1)
    t = trace.times_s[::step]
    ax.plot(t, trace.samples[::step] / 1e3, lw=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency offset (kHz)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)
