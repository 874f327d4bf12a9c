"""Tests for config parsing, the CLI commands, and the self-test."""
import numpy as np
import pytest

from ringmd.cli import (PRESETS, ScenarioConfig, load_config, main, parse_config,
                        _selftest_checks)
from ringmd.diagnostics import EnergyTrace
from ringmd.errors import ConfigError

MINI_CONFIG = """\
[scenario]
preset = custom
seed = 11
n_steps = 20
record_every = 2

[system]
n_molecules = 2
p_beads = 2
cell_edge = 6.2
temperature = 0.3

[integrator]
scheme = impulse_r
h = 0.02
"""


class TestConfigParsing:
    def test_minimal_custom_config(self):
        config = parse_config(MINI_CONFIG)
        assert config.preset == "custom"
        assert config.seed == 11
        assert config.n_steps == 20
        assert config.scheme == "impulse_r"
        assert config.p_beads == 2

    def test_preset_fills_defaults(self):
        config = parse_config("[scenario]\npreset = table2\n")
        assert config.n_molecules == 8
        assert config.p_beads == 16
        assert config.truncation == "none"
        assert config.scheme == "impulse_r"

    def test_table3_preset_matches_scenario(self):
        config = parse_config("[scenario]\npreset = table3\n")
        assert config.p_beads == 8
        assert config.truncation == "nearest_image"
        assert config.scheme == "rattle_i"
        assert config.delta_h == pytest.approx(config.h / 10.0)

    def test_table4_preset_matches_scenario(self):
        config = parse_config("[scenario]\npreset = table4\n")
        assert config.n_molecules == 27
        assert config.p_beads == 4
        assert config.truncation == "cutoff"
        assert config.r_cut == 8.0
        assert config.delta_r == 4.5

    def test_override_beats_preset(self):
        config = parse_config("[scenario]\npreset = table2\n"
                              "[integrator]\nscheme = molly_r\nh = 0.05\n")
        assert config.scheme == "molly_r"
        assert config.h == 0.05
        assert config.p_beads == 16

    def test_unknown_key_is_hard_error(self):
        with pytest.raises(ConfigError, match="line 2.*unknown key"):
            parse_config("[scenario]\nfrobnicate = 3\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[thermostat]\n")

    def test_malformed_line_names_position(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("[scenario]\njust some words\n")

    def test_type_error_names_key(self):
        with pytest.raises(ConfigError, match="n_steps"):
            parse_config("[scenario]\nn_steps = soon\n")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            parse_config("[scenario]\npreset = table9\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="outside"):
            parse_config("seed = 3\n")

    def test_comments_and_blanks_ignored(self):
        config = parse_config("# leading comment\n\n[scenario]\nseed = 5  # tail\n")
        assert config.seed == 5

    def test_roundtrip(self):
        """Serializing and re-parsing reproduces the identical config."""
        config = parse_config(MINI_CONFIG)
        again = parse_config(config.to_text())
        assert again == config

    def test_roundtrip_all_presets(self):
        for preset in PRESETS:
            config = parse_config(f"[scenario]\npreset = {preset}\n")
            assert parse_config(config.to_text()) == config


def write_config(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestRunCommand:
    def test_small_run_writes_trace_and_summary(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MINI_CONFIG)
        out = str(tmp_path / "trace.csv")
        code = main(["run", "--config", cfg, "--out", out])
        assert code == 0
        trace = EnergyTrace.from_csv(out)
        assert len(trace) == 11            # 20 steps, every 2, plus step 0
        assert trace.metadata["scheme"] == "impulse_r"
        summary = (tmp_path / "trace.csv.summary.txt").read_text()
        for key in ("drift", "noise", "delta_e", "delta_e_r"):
            assert key in summary

    def test_csv_header_schema(self, tmp_path):
        cfg = write_config(tmp_path, MINI_CONFIG)
        out = str(tmp_path / "t.csv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        lines = (tmp_path / "t.csv").read_text().splitlines()
        header = next(l for l in lines if not l.startswith("#"))
        assert header == "step,time,kinetic,spring,potential,total,max_g,max_f"

    def test_identical_bytes_on_rerun(self, tmp_path):
        cfg = write_config(tmp_path, MINI_CONFIG)
        out1 = str(tmp_path / "a.csv")
        out2 = str(tmp_path / "b.csv")
        assert main(["run", "--config", cfg, "--out", out1]) == 0
        assert main(["run", "--config", cfg, "--out", out2]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_seed_override_changes_trace(self, tmp_path):
        cfg = write_config(tmp_path, MINI_CONFIG)
        out1 = str(tmp_path / "a.csv")
        out2 = str(tmp_path / "b.csv")
        assert main(["run", "--config", cfg, "--out", out1]) == 0
        assert main(["run", "--config", cfg, "--out", out2, "--seed", "99"]) == 0
        t1 = EnergyTrace.from_csv(out1)
        t2 = EnergyTrace.from_csv(out2)
        assert not np.array_equal(t1.total, t2.total)

    def test_stepper_failure_exit_code(self, tmp_path):
        hot = MINI_CONFIG.replace("temperature = 0.3", "temperature = 5.0") \
                         .replace("h = 0.02", "h = 0.3")
        cfg = write_config(tmp_path, hot)
        out = str(tmp_path / "fail.csv")
        code = main(["run", "--config", cfg, "--out", out])
        assert code == 2
        trace = EnergyTrace.from_csv(out)    # partial trace preserved
        assert trace.metadata["failed"] is True
        assert len(trace) >= 1

    def test_missing_config_is_validation_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_bad_config_is_validation_error(self, tmp_path):
        cfg = write_config(tmp_path, "[scenario]\nbogus = 1\n")
        assert main(["run", "--config", cfg]) == 1


class TestAnalyzeCommand:
    def _write_trace(self, path, scheme, h, c):
        t = np.linspace(0.0, 10.0, 21)
        kin = np.full(21, 2.0)
        total = 5.0 + c * t
        trace = EnergyTrace(steps=np.arange(21), times=t, kinetic=kin,
                            spring=np.zeros(21), potential=total - kin, total=total,
                            max_g=np.zeros(21), max_f=np.zeros(21),
                            metadata={"scheme": scheme, "h": h, "delta_h": 0.0})
        trace.to_csv(path)

    def test_constant_trace_zero_metrics(self, tmp_path, capsys):
        path = tmp_path / "const.csv"
        self._write_trace(path, "impulse_r", 0.02, 0.0)
        assert main(["analyze", str(path)]) == 0
        out = capsys.readouterr().out
        row = [l for l in out.splitlines() if l.startswith("impulse_r")][0]
        assert "0.0000e+00" in row

    def test_linear_trace_slope_recovered(self, tmp_path, capsys):
        path = tmp_path / "lin.csv"
        self._write_trace(path, "impulse_r", 0.02, 0.75)
        assert main(["analyze", str(path)]) == 0
        out = capsys.readouterr().out
        row = [l for l in out.splitlines() if l.startswith("impulse_r")][0]
        # drift = slope / K = 0.75 / 2
        assert f"{0.75 / 2.0:.4e}" in row

    def test_rows_sorted_and_csv_written(self, tmp_path, capsys):
        paths = []
        for scheme, h in (("molly_r", 0.05), ("impulse_r", 0.05), ("impulse_r", 0.02)):
            p = tmp_path / f"{scheme}_{h}.csv"
            self._write_trace(p, scheme, h, 0.1)
            paths.append(str(p))
        out_csv = tmp_path / "summary.csv"
        assert main(["analyze", *paths, "--csv", str(out_csv)]) == 0
        out = capsys.readouterr().out
        schemes = [l.split()[0] for l in out.splitlines()[1:] if l.strip()]
        assert schemes == ["impulse_r", "impulse_r", "molly_r"]
        text = out_csv.read_text().splitlines()
        assert text[0] == "scheme,h,delta_h,drift,noise,delta_e,delta_e_r"
        assert len(text) == 4


class TestSelftest:
    def test_all_checks_pass(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        for name in ("basis orthogonality", "free-flow exactness", "reversibility",
                     "P=1 oracle equivalence", "force gradients"):
            assert name in out

    def test_fault_injection_negative_control(self, capsys):
        """Flipping the sign of Chat must break free-flow exactness."""
        assert main(["selftest", "--inject-chat-sign-error"]) == 1
        out = capsys.readouterr().out
        assert "FAIL  free-flow exactness" in out
