import json
import math

import numpy as np
import pytest

from ionclock.errors import ConfigError
from ionclock.noise import FrequencyTrace, NoiseModel, synthesize_trace
from ionclock.runio import (
    bench_from_config,
    config_from_dict,
    dump_config,
    load_config,
    read_trace_binary,
    read_trace_csv,
    write_csv,
    write_manifest,
    write_trace_binary,
    write_trace_csv,
)

MINIMAL = """
[run]
seed = 7
"""


class TestConfig:
    def test_minimal_config_resolves_defaults(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(MINIMAL)
        cfg = load_config(path)
        assert cfg.seed == 7
        assert cfg["chain.preset"] == "sbs_coil"
        assert "chain.preset" in cfg.defaults_applied
        assert "run.seed" not in cfg.defaults_applied

    def test_missing_seed_rejected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[run]\noutdir = 'x'\n")
        with pytest.raises(ConfigError, match="run.seed"):
            load_config(path)

    def test_unknown_key_rejected_with_path(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[run]\nseed = 1\nbanana = 2\n")
        with pytest.raises(ConfigError, match="run.banana"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[run]\nseed = 1\n[mystery]\nx = 1\n")
        with pytest.raises(ConfigError, match="mystery"):
            load_config(path)

    def test_parse_error_diagnostic(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[run\nseed = 1\n")
        with pytest.raises(ConfigError, match="parse error"):
            load_config(path)

    def test_dump_load_round_trip_is_normalization(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(MINIMAL + "[ion]\nb_field_gauss = 4.4\n")
        cfg = load_config(path)
        normalized = dump_config(cfg)
        # the normalization oracle: dumping the reloaded dump is a fixed point
        path2 = tmp_path / "run2.toml"
        path2.write_text(normalized)
        assert dump_config(load_config(path2)) == normalized

    def test_b_field_override_reaches_zeeman_table(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[run]\nseed = 1\n[ion]\nb_field_gauss = 5.9\n")
        bench = bench_from_config(load_config(path))
        assert bench.table.find(0.5, -1.5).detuning_hz == pytest.approx(-6.67e6, abs=0.4e6)

    def test_clock_overrides(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[run]\nseed = 1\n[clock]\nhalf_width_hz = 2500.0\ngain_hz = 100.0\n")
        bench = bench_from_config(load_config(path))
        assert bench.clock.half_width_hz == 2500.0
        assert bench.clock.gain() == 100.0


class TestTraceFiles:
    def make_trace(self):
        return synthesize_trace(NoiseModel(h={0: 4.0}, model_id="sbs_free"), 0.01, 50e3, seed=3)

    def test_binary_round_trip(self, tmp_path):
        trace = self.make_trace()
        path = tmp_path / "t.bin"
        write_trace_binary(path, trace)
        back = read_trace_binary(path)
        assert back.rate_hz == trace.rate_hz
        assert back.seed == trace.seed
        assert back.model_id == trace.model_id
        assert np.array_equal(back.samples, trace.samples)

    def test_binary_magic_guard(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a trace file at all....")
        with pytest.raises(ConfigError):
            read_trace_binary(path)

    def test_csv_round_trip(self, tmp_path):
        trace = self.make_trace()
        path = tmp_path / "t.csv"
        write_trace_csv(path, trace)
        back = read_trace_csv(path)
        assert back.rate_hz == trace.rate_hz
        assert np.allclose(back.samples, trace.samples, atol=1e-6)


class TestManifests:
    def test_header_only_csv_and_manifest(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(path, ("a", "b", "c"), [])
        assert path.read_text() == "a,b,c\n"
        manifest = write_manifest(tmp_path, "test", None, [path], sim_wall_time_s=0.0)
        data = json.loads(manifest.read_text())
        assert data["outputs"][0]["path"] == "empty.csv"

    def test_manifest_hash_stable_across_reruns(self, tmp_path):
        cfgfile = tmp_path / "run.toml"
        cfgfile.write_text(MINIMAL)
        blobs = []
        for _ in range(2):
            out = tmp_path / "out"
            out.mkdir(exist_ok=True)
            csvp = out / "r.csv"
            write_csv(csvp, ("x",), [(1,), (2,)])
            m = write_manifest(out, "unit", load_config(cfgfile), [csvp], sim_wall_time_s=1.25)
            blobs.append(m.read_bytes())
        assert blobs[0] == blobs[1]

    def test_defaults_recorded_in_manifest(self, tmp_path):
        cfgfile = tmp_path / "run.toml"
        cfgfile.write_text(MINIMAL)
        out = tmp_path / "out"
        out.mkdir()
        m = write_manifest(out, "unit", load_config(cfgfile), [], sim_wall_time_s=0.0)
        data = json.loads(m.read_text())
        assert "detection.bright_rate_cps" in data["defaults_applied"]
        assert data["config"]["run"]["seed"] == 7
