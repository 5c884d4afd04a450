"""Run configuration, manifests, and file persistence.

Configs are TOML with a strict schema: unknown keys are rejected, every
defaulted field is recorded so the manifest can list it, and the seed is
mandatory. Writes are atomic (temp file + rename) and everything a run
emits is a pure function of (config, seed), so re-running overwrites
with byte-identical content; the manifest's wall time is the simulated
duty-cycle time, not host time, to keep manifests hash-stable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError, DomainError
from .noise import FrequencyTrace

ARTIFACT_VERSION = "0.1.0"

_REQUIRED = object()

#: Config schema: dotted section -> {key: default}. ``_REQUIRED`` keys
#: must be present in the file.
CONFIG_SCHEMA: dict[str, dict[str, object]] = {
    "run": {"seed": _REQUIRED, "outdir": "runs/out"},
    "chain": {"preset": "sbs_coil", "stages": []},
    "ion": {
        "b_field_gauss": 5.9,
        "g_s": 2.0025,
        "g_d": 1.2003,
        "rabi_hz": 1.0 / (2.0 * 15e-6),
        "lamb_dicke": 0.1,
        "nbar": 12.0,
        "pump_cycles": 10,
        "branching_to_minus": 2.0 / 3.0,
    },
    "detection": {
        "bright_rate_cps": 15000.0,
        "dark_rate_cps": 500.0,
        "window_s": 2e-3,
        "threshold_counts": -1,  # -1: optimal Poisson threshold
    },
    "clock": {
        "half_width_hz": -1.0,  # -1: chain default
        "gain_hz": -1.0,
        "probe_duration_s": -1.0,
        "n_avg": 1,
        "warmup_cycles": 40,
    },
    "interleave": {"enabled": True, "cycles_per_shot": 1},
    "drift": {"waveform": "none", "amplitude_hz": 0.0, "rate_hz_per_s": 0.0},
    "spectroscopy": {
        "span_hz": -1.0,  # -1: chain default
        "points": 61,
        "trials": 50,
        "order": "waterfall",
        "probe_duration_s": -1.0,
    },
    "rabi": {"max_duration_s": 60e-6, "points": 25, "shots_per_point": 40},
    "ramsey": {"delays_us": [], "phases": 8, "shots_per_point": 25},
    "spam": {"shots": 1000, "shelve_pulses": 3},
    "synth": {"duration_s": 0.5, "rate_hz": 2e6},
}


@dataclass(frozen=True)
class RunConfig:
    sections: dict
    defaults_applied: tuple[str, ...]
    source_path: str | None = None
    source_sha256: str | None = None

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.sections[section][key]

    @property
    def seed(self) -> int:
        return int(self.sections["run"]["seed"])


def _resolve(sections: dict) -> tuple[dict, list[str]]:
    resolved: dict = {}
    defaults: list[str] = []
    for section, keys in CONFIG_SCHEMA.items():
        given = sections.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in given:
            if key not in keys:
                raise ConfigError(f"unknown config key: {section}.{key}")
        out = {}
        for key, default in keys.items():
            if key in given:
                out[key] = given[key]
            else:
                if default is _REQUIRED:
                    raise ConfigError(f"missing required config key: {section}.{key}")
                out[key] = default
                defaults.append(f"{section}.{key}")
        resolved[section] = out
    for section in sections:
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section: [{section}]")
    return resolved, defaults


def load_config(path: str | Path) -> RunConfig:
    """Load and fully resolve a run config file.

    Every defaulted field is recorded in ``defaults_applied`` (there are
    no silent defaults); unknown sections or keys are rejected.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        sections = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    resolved, defaults = _resolve(sections)
    return RunConfig(
        sections=resolved,
        defaults_applied=tuple(defaults),
        source_path=str(path),
        source_sha256=hashlib.sha256(raw).hexdigest(),
    )


def config_from_dict(sections: dict) -> RunConfig:
    resolved, defaults = _resolve(sections)
    return RunConfig(sections=resolved, defaults_applied=tuple(defaults))


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise DomainError(f"cannot serialize config value {value!r}")


def dump_config(cfg: RunConfig) -> str:
    """Serialize a resolved config back to normalized TOML text."""
    lines = []
    for section in CONFIG_SCHEMA:
        lines.append(f"[{section}]")
        for key in CONFIG_SCHEMA[section]:
            lines.append(f"{key} = {_toml_scalar(cfg.sections[section][key])}")
        lines.append("")
    return "\n".join(lines)


def bench_from_config(cfg: RunConfig):
    """Build a BenchConfig from a resolved run config."""
    from dataclasses import replace

    from .bench import ClockConfig, ProbePulse, preset_bench
    from .ion import DetectionConfig, MotionalConfig, PumpConfig, zeeman_table

    chain = cfg["chain.preset"]
    ion = cfg.sections["ion"]
    det = cfg.sections["detection"]
    clk = cfg.sections["clock"]
    bench = preset_bench(chain, b_field_gauss=float(ion["b_field_gauss"]))
    bench = replace(
        bench,
        table=zeeman_table(float(ion["b_field_gauss"]), g_s=float(ion["g_s"]), g_d=float(ion["g_d"])),
        rabi_hz=float(ion["rabi_hz"]),
        motional=MotionalConfig(lamb_dicke=float(ion["lamb_dicke"]), nbar=float(ion["nbar"])),
        pump=PumpConfig(
            n_cycles=int(ion["pump_cycles"]),
            branching_to_minus=float(ion["branching_to_minus"]),
        ),
        detection=DetectionConfig(
            bright_rate_cps=float(det["bright_rate_cps"]),
            dark_rate_cps=float(det["dark_rate_cps"]),
            window_s=float(det["window_s"]),
            threshold_counts=None if det["threshold_counts"] < 0 else int(det["threshold_counts"]),
        ),
    )
    clock = bench.clock
    if clk["half_width_hz"] > 0:
        clock = replace(clock, half_width_hz=float(clk["half_width_hz"]))
    if clk["gain_hz"] > 0:
        clock = replace(clock, gain_hz=float(clk["gain_hz"]))
    if clk["probe_duration_s"] > 0:
        clock = replace(clock, probe=ProbePulse(float(clk["probe_duration_s"])))
    clock = replace(clock, n_avg=int(clk["n_avg"]), warmup_cycles=int(clk["warmup_cycles"]))
    bench = replace(bench, clock=clock)
    spec = cfg.sections["spectroscopy"]
    if spec["probe_duration_s"] > 0:
        bench = replace(bench, spectroscopy_probe=ProbePulse(float(spec["probe_duration_s"])))
    return bench


# --- CSV / trace / manifest persistence --------------------------------------


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_csv(path: str | Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


TRACE_MAGIC = b"IONCLK.FTRACE.1\x00"  # 16-byte magic + version


def write_trace_binary(path: str | Path, trace: FrequencyTrace) -> None:
    header = json.dumps(
        {
            "rate_hz": trace.rate_hz,
            "n": len(trace.samples),
            "seed": trace.seed,
            "model_id": trace.model_id,
        },
        sort_keys=True,
    ).encode("utf-8")
    blob = (
        TRACE_MAGIC
        + len(header).to_bytes(4, "little")
        + header
        + np.asarray(trace.samples, dtype="<f8").tobytes()
    )
    atomic_write_bytes(path, blob)


def read_trace_binary(path: str | Path) -> FrequencyTrace:
    data = Path(path).read_bytes()
    if data[:16] != TRACE_MAGIC:
        raise ConfigError(f"{path} is not a frequency-trace file")
    hlen = int.from_bytes(data[16:20], "little")
    header = json.loads(data[20 : 20 + hlen])
    samples = np.frombuffer(data[20 + hlen :], dtype="<f8")
    if len(samples) != header["n"]:
        raise ConfigError(f"{path}: truncated trace payload")
    return FrequencyTrace(
        rate_hz=header["rate_hz"],
        samples=samples.copy(),
        seed=header["seed"],
        model_id=header["model_id"],
    )


def write_trace_csv(path: str | Path, trace: FrequencyTrace) -> None:
    buf = io.StringIO()
    buf.write(f"# rate_hz={trace.rate_hz!r} seed={trace.seed} model_id={trace.model_id}\n")
    buf.write("t_s,df_hz\n")
    for i, v in enumerate(trace.samples):
        buf.write(f"{i / trace.rate_hz:.9f},{v:.6f}\n")
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def read_trace_csv(path: str | Path) -> FrequencyTrace:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ConfigError(f"{path}: missing trace header line")
    meta = dict(part.split("=", 1) for part in lines[0][1:].split())
    samples = np.array([float(line.split(",")[1]) for line in lines[2:] if line])
    return FrequencyTrace(
        rate_hz=float(meta["rate_hz"]),
        samples=samples,
        seed=int(meta["seed"]),
        model_id=meta["model_id"],
    )


def read_series_csv(path: str | Path, column: str):
    """Read one numeric column from a headered CSV; returns (t or index, values)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ConfigError(f"{path}: no column {column!r}")
        tcol = reader.fieldnames[0]
        t, v = [], []
        for row in reader:
            t.append(float(row[tcol]))
            v.append(float(row[column]))
    return np.asarray(t), np.asarray(v)


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    outdir: str | Path,
    command: str,
    config: RunConfig | None,
    outputs,
    sim_wall_time_s: float = 0.0,
    extra: dict | None = None,
) -> Path:
    """Write the run manifest (atomically, after all outputs exist).

    The manifest captures the resolved config, the provenance of every
    defaulted field, input and output hashes, and the simulated wall
    time. Identical (config, seed) runs produce byte-identical
    manifests.
    """
    outdir = Path(outdir)
    entries = []
    for name in sorted(str(p) for p in outputs):
        p = Path(name)
        entries.append(
            {"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
        )
    manifest = {
        "artifact": "ionclock",
        "version": ARTIFACT_VERSION,
        "command": command,
        "config": config.sections if config else None,
        "defaults_applied": list(config.defaults_applied) if config else [],
        "input_hashes": {"config": config.source_sha256} if config and config.source_sha256 else {},
        "outputs": entries,
        "sim_wall_time_s": round(float(sim_wall_time_s), 9),
    }
    if extra:
        manifest["results"] = extra
    path = outdir / "manifest.json"
    atomic_write_bytes(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return path
