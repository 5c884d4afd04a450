"""Command-line interface.

Every subcommand writes delimited result tables, a manifest, and (unless
--no-figure) a rendered figure into the output directory. Exit codes:
0 success, 2 configuration error, 3 numerical/domain failure, 4 a
reproduction scenario's checks failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import plots, runio, scenarios
from .bench import preset_bench
from .chain import resolve_preset
from .clock import ClockRun, DriftInjection, dual_clock_run, recover_drift, run_clock
from .errors import ConfigError, IonClockError
from .experiments import (
    InterleaveSchedule,
    ScanPlan,
    rabi_scan,
    ramsey_scan,
    spam_experiment,
    waterfall_spectroscopy,
)
from .metrology import (
    allan_deviation,
    coherence_linewidth,
    fit_contrast_decay,
    fit_lineshape,
    linewidth_report,
    raw_fwhm,
    sample_log_psd,
)
from .noise import estimate_psd, evaluate_psd, synthesize_trace
from .runio import load_config, read_series_csv, read_trace_binary, read_trace_csv, write_csv

PRESETS = ("pump_free", "sbs_free", "sbs_coil", "pump_coil")


def _common(parser, seed_default=1):
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=seed_default)
    parser.add_argument("--preset", default="sbs_coil", choices=PRESETS)
    parser.add_argument("--config", default=None, help="optional TOML run config")
    parser.add_argument("--no-figure", action="store_true", help="skip figure rendering")


def _outdir(args, name) -> Path:
    out = Path(args.out) if args.out else Path("runs") / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    """Resolve (bench config, run config) from flags and optional file."""
    if args.config:
        cfg = load_config(args.config)
        bench = runio.bench_from_config(cfg)
        return bench, cfg, cfg.seed
    return preset_bench(args.preset), None, args.seed


def _read_trace(path):
    if str(path).endswith(".csv"):
        return read_trace_csv(path)
    return read_trace_binary(path)


def _schedule(args):
    if getattr(args, "no_interleave", False):
        return InterleaveSchedule(enabled=False)
    return InterleaveSchedule()


def cmd_synth(args):
    out = _outdir(args, "synth")
    model = resolve_preset(args.preset)
    trace = synthesize_trace(model, args.duration, args.rate, args.seed)
    files = []
    bin_path = out / "trace.bin"
    runio.write_trace_binary(bin_path, trace)
    files.append(bin_path)
    if args.csv:
        csv_path = out / "trace.csv"
        runio.write_trace_csv(csv_path, trace)
        files.append(csv_path)
    if not args.no_figure:
        files.append(plots.trace_figure(out / "trace.png", trace,
                                        title=f"{args.preset} trace ({args.duration:g} s)"))
    runio.write_manifest(out, "synth", None, files, sim_wall_time_s=trace.duration_s)
    print(f"wrote {len(trace.samples)} samples to {out}")
    return 0


def cmd_psd(args):
    out = _outdir(args, "psd")
    trace = _read_trace(args.trace)
    est = estimate_psd(trace, args.segment_len)
    files = [out / "psd.csv"]
    write_csv(files[0], ("f_hz", "psd_hz2_per_hz"),
              ((f"{f:.6f}", f"{p:.8e}") for f, p in zip(est.freqs_hz, est.psd_hz2_per_hz)))
    if not args.no_figure:
        curves = [(est.freqs_hz, est.psd_hz2_per_hz, "Welch estimate")]
        if trace.model_id in PRESETS:
            model = resolve_preset(trace.model_id)
            curves.append((est.freqs_hz, np.asarray(evaluate_psd(model, est.freqs_hz)), "model"))
        files.append(plots.psd_figure(out / "psd.png", curves,
                                      title=f"PSD of {Path(args.trace).name}"))
    runio.write_manifest(out, "psd", None, files)
    print(f"PSD with {est.n_segments} segments -> {out}")
    return 0


def cmd_adev(args):
    out = _outdir(args, "adev")
    if args.input.endswith(".csv"):
        t, v = read_series_csv(args.input, args.column)
        dt = float(np.median(np.diff(t))) if len(t) > 1 else 1.0
        result = allan_deviation(v, args.carrier, dt_s=dt)
    else:
        result = allan_deviation(_read_trace(args.input), args.carrier)
    files = [out / "adev.csv"]
    write_csv(files[0], ("tau_s", "sigma_y", "n"),
              ((f"{t:.6f}", f"{s:.6e}", n)
               for t, s, n in zip(result.taus_s, result.sigma_y, result.n_samples)))
    if not args.no_figure:
        files.append(plots.adev_figure(out / "adev.png", [(result, Path(args.input).name)]))
    runio.write_manifest(out, "adev", None, files)
    print(f"ADEV over {len(result.taus_s)} taus -> {out}")
    return 0


def cmd_linewidth(args):
    out = _outdir(args, "linewidth")
    model = resolve_preset(args.preset)
    report = linewidth_report(model, args.fmin, args.fmax)
    files = [out / "linewidth.csv"]
    write_csv(files[0], ("quantity", "hz"),
              [("flw", f"{report.flw_hz:.4f}"),
               ("ilw_one_over_pi", f"{report.ilw_one_over_pi_hz:.2f}"),
               ("ilw_beta_separation", f"{report.ilw_beta_hz:.2f}"),
               ("band_lo", f"{args.fmin:.1f}"), ("band_hi", f"{args.fmax:.1f}")])
    if not args.no_figure:
        f, s = sample_log_psd(model, max(args.fmin / 5, 0.1), args.fmax)
        notes = [f"FLW = {report.flw_hz:.1f} Hz",
                 f"ILW(1/pi) = {report.ilw_one_over_pi_hz:.0f} Hz",
                 f"ILW(beta) = {report.ilw_beta_hz:.0f} Hz"]
        files.append(plots.psd_figure(out / "psd.png", [(f, s, args.preset)],
                                      title=f"{args.preset} noise model", ilw_notes=notes))
    runio.write_manifest(out, "linewidth", None, files)
    print(f"{args.preset}: FLW {report.flw_hz:.2f} Hz, ILW(1/pi) {report.ilw_one_over_pi_hz:.0f} Hz, "
          f"beta {report.ilw_beta_hz:.0f} Hz -> {out}")
    return 0


def cmd_fitline(args):
    out = _outdir(args, "fitline")
    xs, ps = read_series_csv(args.input, args.column)
    fit = fit_lineshape(xs, ps, model=args.model)
    files = [out / "fit.csv"]
    write_csv(files[0], ("quantity", "value"),
              [("center_hz", f"{fit.center_hz:.3f}"), ("fwhm_hz", f"{fit.fwhm_hz:.3f}"),
               ("amplitude", f"{fit.amplitude:.5f}"), ("residual_rms", f"{fit.residual_rms:.5f}"),
               ("raw_fwhm_hz", f"{raw_fwhm(xs, ps):.3f}"), ("converged", fit.ok)])
    if not args.no_figure:
        files.append(plots.lineshape_figure(out / "fit.png", xs, ps, fit=fit))
    runio.write_manifest(out, "fitline", None, files)
    print(f"FWHM {fit.fwhm_hz:.1f} Hz (center {fit.center_hz:.1f} Hz) -> {out}")
    return 0


def cmd_fitcoh(args):
    out = _outdir(args, "fitcoh")
    ts, cs = read_series_csv(args.input, args.column)
    fit = fit_contrast_decay(ts, cs, model=args.model)
    width = coherence_linewidth(fit.tau_coh_s)
    files = [out / "fit.csv"]
    write_csv(files[0], ("quantity", "value"),
              [("tau_coh_s", f"{fit.tau_coh_s:.9f}"), ("contrast_0", f"{fit.contrast_0:.5f}"),
               ("residual_rms", f"{fit.residual_rms:.5f}"),
               ("coherence_linewidth_hz", f"{width:.3f}")])
    if not args.no_figure:
        files.append(plots.contrast_figure(out / "fit.png", ts, cs, fit=fit))
    runio.write_manifest(out, "fitcoh", None, files)
    print(f"tau = {fit.tau_coh_s * 1e6:.1f} us -> linewidth {width:.0f} Hz -> {out}")
    return 0


def _drift_from_args(args):
    if args.drift == "none":
        return DriftInjection()
    kind, *params = args.drift.split(":")
    if kind != "triangle" or len(params) != 2:
        raise ConfigError("drift spec must be 'none' or 'triangle:<amplitude_hz>:<rate_hz_per_s>'")
    return DriftInjection("triangle", amplitude_hz=float(params[0]), rate_hz_per_s=float(params[1]))


def cmd_clock(args):
    out = _outdir(args, "clock")
    bench, cfg, seed = _load(args)
    run = run_clock(bench, args.cycles, seed=seed, drift=_drift_from_args(args))
    files = [out / "corrections.csv"]
    write_csv(files[0], ClockRun.CSV_HEADER, run.csv_rows())
    recovered = recover_drift(run) if np.any(run.injected_hz) else None
    if not args.no_figure:
        files.append(plots.clock_figure(out / "clock.png", run, recovered=recovered))
    runio.write_manifest(out, "clock", cfg, files, sim_wall_time_s=run.times_s[-1],
                         extra={"rms_residual_hz": run.rms_residual()})
    print(f"{args.cycles} cycles, residual RMS {run.rms_residual():.0f} Hz -> {out}")
    return 0


def cmd_dualclock(args):
    out = _outdir(args, "dualclock")
    bench, cfg, seed = _load(args)
    dual = dual_clock_run(bench, args.cycles, seeds=(seed, seed + 1),
                          drift_a=_drift_from_args(args), clock_cfg=scenarios.DUAL_CLOCK)
    files = [out / "difference.csv"]
    write_csv(files[0], ("t_s", "corr_a_hz", "corr_b_hz", "difference_hz"),
              ((f"{t:.6f}", f"{a:.3f}", f"{b:.3f}", f"{d:.3f}")
               for t, a, b, d in zip(dual.times_s, dual.run_a.corrections_hz,
                                     dual.run_b.corrections_hz, dual.difference_hz)))
    adev = allan_deviation(dual.difference_hz / np.sqrt(2.0), scenarios.CARRIER_HZ,
                           dt_s=dual.cycle_s)
    files.append(out / "adev.csv")
    write_csv(files[-1], ("tau_s", "sigma_y", "n"),
              ((f"{t:.6f}", f"{s:.6e}", n)
               for t, s, n in zip(adev.taus_s, adev.sigma_y, adev.n_samples)))
    if not args.no_figure:
        files.append(plots.dual_clock_figure(out / "dualclock.png", dual))
        files.append(plots.adev_figure(out / "adev.png", [(adev, "difference/sqrt(2)")],
                                       title="dual-clock stability"))
    runio.write_manifest(out, "dualclock", cfg, files, sim_wall_time_s=dual.times_s[-1],
                         extra={"rms_difference_hz": dual.rms_difference()})
    print(f"RMS difference {dual.rms_difference():.0f} Hz -> {out}")
    return 0


def cmd_spectroscopy(args):
    out = _outdir(args, "spectroscopy")
    bench, cfg, seed = _load(args)
    span = args.span if args.span > 0 else scenarios.SCAN_SPAN.get(args.preset, 40e3)
    plan = ScanPlan.linear(span, args.points, trials=args.trials, order=args.order)
    result = waterfall_spectroscopy(bench, plan, seed=seed, schedule=_schedule(args))
    fit = fit_lineshape(result.xs, result.ps)
    files = [out / "result.csv"]
    write_csv(files[0], ("detuning_hz", "p", "stderr", "n"), result.csv_rows())
    if not args.no_figure:
        files.append(plots.lineshape_figure(out / "line.png", result.xs, result.ps,
                                            stderr=[r.stderr for r in result.rows], fit=fit,
                                            title=f"{args.preset} spectroscopy ({args.order})"))
    runio.write_manifest(out, "spectroscopy", cfg, files, sim_wall_time_s=result.sim_wall_time_s,
                         extra={"fwhm_hz": fit.fwhm_hz, "raw_fwhm_hz": raw_fwhm(result.xs, result.ps),
                                "center_hz": fit.center_hz, "amplitude": fit.amplitude})
    print(f"fitted FWHM {fit.fwhm_hz:.0f} Hz (amplitude {fit.amplitude:.2f}) -> {out}")
    return 0


def cmd_rabi(args):
    out = _outdir(args, "rabi")
    bench, cfg, seed = _load(args)
    durations = np.linspace(0.0, args.max_duration, args.points)
    result = rabi_scan(bench, durations, seed=seed, schedule=_schedule(args),
                       shots_per_point=args.shots)
    files = [out / "result.csv"]
    write_csv(files[0], ("duration_s", "p", "stderr", "n"), result.csv_rows())
    if not args.no_figure:
        files.append(plots.rabi_figure(out / "rabi.png", result.xs, result.ps,
                                       title=f"{args.preset} Rabi flopping"))
    runio.write_manifest(out, "rabi", cfg, files, sim_wall_time_s=result.sim_wall_time_s,
                         extra={"first_max": float(np.max(result.ps[: args.points // 2 + 1]))})
    print(f"first-flip maximum {np.max(result.ps[:args.points // 2 + 1]):.2f} -> {out}")
    return 0


def cmd_ramsey(args):
    out = _outdir(args, "ramsey")
    bench, cfg, seed = _load(args)
    delays = ([d * 1e-6 for d in args.delays_us] if args.delays_us
              else list(scenarios.RAMSEY_DELAYS.get(args.preset, scenarios.RAMSEY_DELAYS["sbs_coil"])))
    result = ramsey_scan(bench, delays, seed=seed, phases=args.phases,
                         shots_per_point=args.shots, schedule=_schedule(args))
    files = [out / "result.csv"]
    write_csv(files[0], ("delay_s", "contrast", "stderr", "n"), result.csv_rows())
    extra = {}
    if result.fit:
        extra = {"tau_coh_s": result.fit.tau_coh_s,
                 "coherence_linewidth_hz": coherence_linewidth(result.fit.tau_coh_s)}
    if not args.no_figure:
        files.append(plots.contrast_figure(out / "contrast.png", result.delays_s,
                                           result.contrasts, fit=result.fit,
                                           title=f"{args.preset} Ramsey"))
    runio.write_manifest(out, "ramsey", cfg, files, sim_wall_time_s=result.sim_wall_time_s,
                         extra=extra)
    tau_us = result.fit.tau_coh_s * 1e6 if result.fit else float("nan")
    print(f"1/e coherence time {tau_us:.1f} us -> {out}")
    return 0


def cmd_spam(args):
    out = _outdir(args, "spam")
    bench, cfg, seed = _load(args)
    result = spam_experiment(bench, args.shots, seed=seed, schedule=_schedule(args),
                             n_shelve_pulses=args.shelve_pulses)
    files = [out / "result.csv"]
    write_csv(files[0], ("quantity", "value"),
              [("fidelity", f"{result.fidelity:.5f}"),
               ("fidelity_dark_prep", f"{result.fidelity_dark_prep:.5f}"),
               ("fidelity_bright_prep", f"{result.fidelity_bright_prep:.5f}"),
               ("threshold_counts", result.threshold),
               ("overlap_fraction", f"{result.overlap_fraction:.5f}"),
               ("n_shelve_pulses", result.n_shelve_pulses)])
    files.append(out / "counts.csv")
    write_csv(files[-1], ("prepared", "counts"),
              [("dark", c) for c in result.counts_dark_prep]
              + [("bright", c) for c in result.counts_bright_prep])
    if not args.no_figure:
        files.append(plots.histogram_figure(out / "histogram.png", result.counts_dark_prep,
                                            result.counts_bright_prep, result.threshold,
                                            title=f"{args.preset} SPAM ({args.shots} shots)"))
    runio.write_manifest(out, "spam", cfg, files, sim_wall_time_s=result.sim_wall_time_s,
                         extra={"fidelity": result.fidelity})
    print(f"SPAM fidelity {result.fidelity:.4f} ({args.shelve_pulses} shelve pulses) -> {out}")
    return 0


# --- canned reproduction scenarios -------------------------------------------


def _repro_noise_stages(out, args):
    curves, notes = [], []
    from .metrology import sample_log_psd as sample

    for preset in PRESETS:
        model = resolve_preset(preset)
        band = (500.0, 330e3) if preset == "pump_coil" else (500.0, 30e6)
        rep = linewidth_report(model, *band)
        f, s = sample(model, 10.0, 30e6)
        curves.append((f, s, preset))
        notes.append(f"{preset}: FLW {rep.flw_hz:.0f} Hz, ILW {rep.ilw_one_over_pi_hz:.3g} Hz, "
                     f"beta {rep.ilw_beta_hz:.3g} Hz")
    files = [plots.psd_figure(out / "noise_stages.png", curves,
                              title="laser chain stage noise", ilw_notes=None)]
    write_csv(out / "linewidths.csv", ("stage", "summary"), list(zip(PRESETS, notes)))
    files.append(out / "linewidths.csv")
    checks = []
    for preset, lo, hi, method in [("sbs_coil", 493, 667, "ilw"), ("pump_coil", 8500, 11500, "ilw"),
                                   ("pump_free", 268.6e3, 363.4e3, "beta")]:
        band = (500.0, 330e3) if preset == "pump_coil" else (500.0, 30e6)
        rep = linewidth_report(resolve_preset(preset), *band)
        value = rep.ilw_one_over_pi_hz if method == "ilw" else rep.ilw_beta_hz
        checks.append(scenarios.Check(f"{preset} {method}", value, lo, hi))
    return files, checks


def _repro_clock_drift(out, args):
    run, recovered, rms, checks = scenarios.drift_tracking_scenario(seed=args.seed)
    write_csv(out / "corrections.csv", ClockRun.CSV_HEADER, run.csv_rows())
    files = [out / "corrections.csv",
             plots.clock_figure(out / "tracking.png", run, recovered=recovered,
                                title=f"triangle tracking (recovery RMS {rms:.0f} Hz)")]
    return files, checks


def _repro_dual_clock(out, args):
    dual, adev, rms, coeff, checks = scenarios.dual_clock_scenario(seeds=(args.seed, args.seed + 1))
    write_csv(out / "difference.csv", ("t_s", "difference_hz"),
              ((f"{t:.4f}", f"{d:.2f}") for t, d in zip(dual.times_s, dual.difference_hz)))
    files = [out / "difference.csv",
             plots.dual_clock_figure(out / "dualclock.png", dual),
             plots.adev_figure(out / "adev.png", [(adev, "difference/sqrt(2)")],
                               title="dual-clock stability", guide=coeff)]
    return files, checks


def _repro_spam(out, args):
    result, k, fidelities, checks = scenarios.spam_scenario("pump_coil", seed=args.seed)
    result_sbs, k_sbs, fid_sbs, checks_sbs = scenarios.spam_scenario("sbs_coil", seed=args.seed)
    write_csv(out / "fidelities.csv", ("chain", "pulses", "fidelity"),
              [("pump_coil", a, f"{b:.4f}") for a, b in fidelities.items()]
              + [("sbs_coil", a, f"{b:.4f}") for a, b in fid_sbs.items()])
    files = [out / "fidelities.csv",
             plots.histogram_figure(out / "histogram.png", result.counts_dark_prep,
                                    result.counts_bright_prep, result.threshold,
                                    title="coil-chain SPAM histogram")]
    checks = checks + checks_sbs + [
        scenarios.Check("sbs pulses < coil pulses", float(k_sbs < k), 1.0, 1.0)
    ]
    return files, checks


def _repro_linewidths(out, args):
    files, checks = [], []
    for chain in ("sbs_coil", "pump_coil"):
        result, fit, raw, ch = scenarios.spectroscopy_scenario(chain, seed=args.seed)
        write_csv(out / f"{chain}_line.csv", ("detuning_hz", "p", "stderr", "n"),
                  result.csv_rows())
        files.append(out / f"{chain}_line.csv")
        files.append(plots.lineshape_figure(out / f"{chain}_line.png", result.xs, result.ps,
                                            fit=fit, title=f"{chain} carrier line"))
        checks += ch
    return files, checks


def _repro_ramsey(out, args):
    files, checks = [], []
    for chain in ("sbs_coil", "pump_coil"):
        result, ch = scenarios.ramsey_scenario(chain, seed=args.seed)
        write_csv(out / f"{chain}_contrast.csv", ("delay_s", "contrast", "stderr", "n"),
                  result.csv_rows())
        files.append(out / f"{chain}_contrast.csv")
        files.append(plots.contrast_figure(out / f"{chain}_contrast.png", result.delays_s,
                                           result.contrasts, fit=result.fit,
                                           title=f"{chain} Ramsey decay"))
        checks += ch
    return files, checks


def _repro_rabi(out, args):
    result, first_max, checks = scenarios.rabi_scenario("sbs_coil", seed=args.seed)
    write_csv(out / "rabi.csv", ("duration_s", "p", "stderr", "n"), result.csv_rows())
    files = [out / "rabi.csv",
             plots.rabi_figure(out / "rabi.png", result.xs, result.ps,
                               title=f"sbs_coil Rabi (first max {first_max:.2f})")]
    return files, checks


def _repro_coherence(out, args):
    spec, ram, fit, mismatch, checks = scenarios.coherence_consistency_scenario(seed=args.seed)
    write_csv(out / "line.csv", ("detuning_hz", "p", "stderr", "n"), spec.csv_rows())
    write_csv(out / "contrast.csv", ("delay_s", "contrast", "stderr", "n"), ram.csv_rows())
    files = [out / "line.csv", out / "contrast.csv",
             plots.lineshape_figure(out / "line.png", spec.xs, spec.ps, fit=fit),
             plots.contrast_figure(out / "contrast.png", ram.delays_s, ram.contrasts,
                                   fit=ram.fit,
                                   title=f"self-consistency mismatch {mismatch:.2f}")]
    return files, checks


REPRODUCE = {
    "noise-stages": _repro_noise_stages,
    "clock-drift": _repro_clock_drift,
    "dual-clock": _repro_dual_clock,
    "spam-histogram": _repro_spam,
    "linewidths": _repro_linewidths,
    "ramsey-coherence": _repro_ramsey,
    "rabi-flops": _repro_rabi,
    "coherence-consistency": _repro_coherence,
}


def cmd_reproduce(args):
    out = _outdir(args, f"reproduce-{args.figure_id}")
    try:
        builder = REPRODUCE[args.figure_id]
    except KeyError:
        raise ConfigError(
            f"unknown figure id {args.figure_id!r}; available: {', '.join(sorted(REPRODUCE))}"
        ) from None
    files, checks = builder(out, args)
    write_csv(out / "checks.csv", ("check", "value", "lo", "hi", "verdict"),
              ((c.name, f"{c.value:.6g}", f"{c.lo:.6g}", f"{c.hi:.6g}",
                "PASS" if c.ok else "FAIL") for c in checks))
    files.append(out / "checks.csv")
    runio.write_manifest(out, f"reproduce {args.figure_id}", None, files)
    for check in checks:
        print(check.line())
    if not all(c.ok for c in checks):
        return 4
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionclock",
        description="Stabilized-laser / trapped-ion clock bench simulator and metrology toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a laser frequency trace")
    _common(p)
    p.add_argument("--duration", type=float, default=0.5, help="trace length (s)")
    p.add_argument("--rate", type=float, default=2e6, help="sample rate (Hz)")
    p.add_argument("--csv", action="store_true", help="also write the CSV form")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("psd", help="Welch PSD of a stored trace")
    _common(p)
    p.add_argument("trace", help="trace file (.bin or .csv)")
    p.add_argument("--segment-len", type=int, default=1 << 15)
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("adev", help="overlapping Allan deviation")
    _common(p)
    p.add_argument("input", help="trace file or corrections CSV")
    p.add_argument("--carrier", type=float, default=scenarios.CARRIER_HZ)
    p.add_argument("--column", default="correction_hz", help="CSV column to analyze")
    p.set_defaults(func=cmd_adev)

    p = sub.add_parser("linewidth", help="integral linewidths of a preset model")
    _common(p)
    p.add_argument("--fmin", type=float, default=500.0)
    p.add_argument("--fmax", type=float, default=30e6)
    p.set_defaults(func=cmd_linewidth)

    p = sub.add_parser("fitline", help="Gaussian lineshape fit of a scan CSV")
    _common(p)
    p.add_argument("input")
    p.add_argument("--column", default="p")
    p.add_argument("--model", default="gauss", choices=("gauss", "sinc2"))
    p.set_defaults(func=cmd_fitline)

    p = sub.add_parser("fitcoh", help="contrast-decay fit of a Ramsey CSV")
    _common(p)
    p.add_argument("input")
    p.add_argument("--column", default="contrast")
    p.add_argument("--model", default="exp", choices=("exp", "gauss"))
    p.set_defaults(func=cmd_fitcoh)

    p = sub.add_parser("clock", help="run the two-point ion lock")
    _common(p)
    p.add_argument("--cycles", type=int, default=2000)
    p.add_argument("--drift", default="none", help="none or triangle:<amp_hz>:<rate_hz_per_s>")
    p.set_defaults(func=cmd_clock)

    p = sub.add_parser("dualclock", help="two interleaved independent locks")
    _common(p)
    p.add_argument("--cycles", type=int, default=3000)
    p.add_argument("--drift", default="none", help="injected drift for clock A")
    p.set_defaults(func=cmd_dualclock)

    p = sub.add_parser("spectroscopy", help="waterfall carrier spectroscopy")
    _common(p)
    p.add_argument("--span", type=float, default=-1.0)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--order", default="waterfall", choices=("waterfall", "ltr"))
    p.add_argument("--no-interleave", action="store_true")
    p.set_defaults(func=cmd_spectroscopy)

    p = sub.add_parser("rabi", help="Rabi flopping scan")
    _common(p)
    p.add_argument("--max-duration", type=float, default=60e-6)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--shots", type=int, default=40)
    p.add_argument("--no-interleave", action="store_true")
    p.set_defaults(func=cmd_rabi)

    p = sub.add_parser("ramsey", help="phase-swept Ramsey scan")
    _common(p)
    p.add_argument("--delays-us", type=float, nargs="*", default=None)
    p.add_argument("--phases", type=int, default=8)
    p.add_argument("--shots", type=int, default=25)
    p.add_argument("--no-interleave", action="store_true")
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("spam", help="state preparation and measurement run")
    _common(p)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--shelve-pulses", type=int, default=3)
    p.add_argument("--no-interleave", action="store_true")
    p.set_defaults(func=cmd_spam)

    p = sub.add_parser("reproduce", help="run a canned reproduction scenario")
    _common(p, seed_default=11)
    p.add_argument("figure_id", help=", ".join(sorted(REPRODUCE)))
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except IonClockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
