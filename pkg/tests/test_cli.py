import json
from pathlib import Path

import pytest

from ionclock.cli import main
from ionclock.runio import write_csv


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trace_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run_cli("synth", "--preset", "sbs_free", "--duration", "0.1",
                   "--rate", "1e6", "--seed", "5", "--csv", "--out", out) == 0
    return out


def test_synth_outputs(trace_dir):
    assert (trace_dir / "trace.bin").exists()
    assert (trace_dir / "trace.csv").exists()
    assert (trace_dir / "trace.png").exists()
    manifest = json.loads((trace_dir / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert len(manifest["outputs"]) == 3


def test_psd_command(trace_dir, tmp_path):
    out = tmp_path / "psd"
    assert run_cli("psd", trace_dir / "trace.bin", "--segment-len", "8192", "--out", out) == 0
    assert (out / "psd.csv").exists()
    assert (out / "psd.png").exists()


def test_adev_command(trace_dir, tmp_path):
    out = tmp_path / "adev"
    assert run_cli("adev", trace_dir / "trace.bin", "--out", out) == 0
    assert (out / "adev.csv").exists()


def test_linewidth_command(tmp_path):
    out = tmp_path / "lw"
    assert run_cli("linewidth", "--preset", "sbs_coil", "--out", out) == 0
    rows = (out / "linewidth.csv").read_text().splitlines()
    assert rows[0] == "quantity,hz"
    ilw = float(dict(r.split(",") for r in rows[1:])["ilw_one_over_pi"])
    assert 493 < ilw < 667


def test_fitline_command(tmp_path):
    import math

    data = tmp_path / "line.csv"
    xs = [(-10e3 + 500 * i) for i in range(41)]
    write_csv(data, ("detuning_hz", "p"),
              ((f"{x}", f"{0.8 * math.exp(-4 * math.log(2) * (x / 6e3) ** 2):.6f}") for x in xs))
    out = tmp_path / "fit"
    assert run_cli("fitline", data, "--out", out) == 0
    rows = dict(r.split(",") for r in (out / "fit.csv").read_text().splitlines()[1:])
    assert abs(float(rows["fwhm_hz"]) - 6e3) < 50.0


def test_fitcoh_command(tmp_path):
    import math

    data = tmp_path / "coh.csv"
    ts = [5e-6 * (i + 1) for i in range(8)]
    write_csv(data, ("delay_s", "contrast"),
              ((f"{t:.9f}", f"{math.exp(-t / 60e-6):.6f}") for t in ts))
    out = tmp_path / "fit"
    assert run_cli("fitcoh", data, "--out", out) == 0
    rows = dict(r.split(",") for r in (out / "fit.csv").read_text().splitlines()[1:])
    assert abs(float(rows["coherence_linewidth_hz"]) - 5.3e3) < 60.0


def test_clock_command(tmp_path):
    out = tmp_path / "clock"
    assert run_cli("clock", "--cycles", "120", "--seed", "3", "--out", out) == 0
    lines = (out / "corrections.csv").read_text().splitlines()
    assert lines[0] == "t_s,correction_hz,injected_hz,residual_hz"
    assert len(lines) == 121


def test_dualclock_command(tmp_path):
    out = tmp_path / "dual"
    assert run_cli("dualclock", "--cycles", "150", "--seed", "4", "--out", out) == 0
    assert (out / "difference.csv").exists()
    assert (out / "adev.csv").exists()


def test_spectroscopy_command_and_schema(tmp_path):
    out = tmp_path / "spec"
    assert run_cli("spectroscopy", "--preset", "sbs_coil", "--points", "11",
                   "--trials", "6", "--seed", "2", "--out", out) == 0
    lines = (out / "result.csv").read_text().splitlines()
    assert lines[0] == "detuning_hz,p,stderr,n"
    assert len(lines) == 12
    manifest = json.loads((out / "manifest.json").read_text())
    assert "fwhm_hz" in manifest["results"]


def test_rabi_command(tmp_path):
    out = tmp_path / "rabi"
    assert run_cli("rabi", "--points", "9", "--shots", "8", "--max-duration", "30e-6",
                   "--seed", "2", "--no-interleave", "--out", out) == 0
    assert (out / "result.csv").exists()


def test_ramsey_command(tmp_path):
    out = tmp_path / "ramsey"
    assert run_cli("ramsey", "--delays-us", "5", "25", "55", "90", "--phases", "6",
                   "--shots", "8", "--seed", "2", "--no-interleave", "--out", out) == 0
    assert (out / "result.csv").exists()


def test_spam_command(tmp_path):
    out = tmp_path / "spam"
    assert run_cli("spam", "--shots", "120", "--shelve-pulses", "2", "--seed", "2",
                   "--no-interleave", "--out", out) == 0
    assert (out / "histogram.png").exists()
    assert (out / "counts.csv").exists()


def test_reproduce_noise_stages(tmp_path):
    out = tmp_path / "repro"
    assert run_cli("reproduce", "noise-stages", "--out", out) == 0
    checks = (out / "checks.csv").read_text()
    assert "PASS" in checks and "FAIL" not in checks


def test_reproduce_unknown_id_is_config_error(tmp_path):
    assert run_cli("reproduce", "no-such-figure", "--out", tmp_path / "x") == 2


def test_bad_config_file_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[run]\nseed = 1\nnope = true\n")
    assert run_cli("clock", "--cycles", "10", "--config", bad, "--out", tmp_path / "c") == 2


def test_config_file_drives_run(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[run]\nseed = 9\n[chain]\npreset = 'sbs_coil'\n")
    out = tmp_path / "clock"
    assert run_cli("clock", "--cycles", "50", "--config", cfg, "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["run"]["seed"] == 9
    assert manifest["input_hashes"]["config"]
