"""Config parsing and the CLI surface."""

import math
from pathlib import Path

import pytest

from circneedlets.cli import main
from circneedlets.config import ConfigError, parse_config

BASE_CONFIG = """
frame.s = 3
frame.B = 1.4
frame.eta = 1e-3
density.kind = gaussian_bump
experiment.seed = 20260810
"""


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


class TestConfig:
    def test_defaults_filled_in(self):
        cfg = parse_config(BASE_CONFIG)
        assert cfg.frame.B == 1.4
        assert cfg.n_grid == [8000, 12000]
        assert cfg.kappa0_grid == [0.10, 0.15, 0.20]
        assert cfg.replications == 100
        assert cfg.clip is True
        assert cfg.estimate_kappa0 == 0.10

    def test_seed_required(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config("frame.B = 1.4\n")

    def test_bad_scale_rejected_before_compute(self):
        with pytest.raises(ConfigError, match="frame"):
            parse_config(BASE_CONFIG.replace("frame.B = 1.4", "frame.B = 0.9"))

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(BASE_CONFIG + "frame.gamma = 2\n")

    def test_lists_and_comments(self):
        cfg = parse_config(BASE_CONFIG + "experiment.n_grid = 500, 600 # trailing comment\n")
        assert cfg.n_grid == [500, 600]

    def test_echo_is_deterministic(self):
        a = parse_config(BASE_CONFIG).echo()
        b = parse_config(BASE_CONFIG).echo()
        assert a == b
        assert "experiment.seed=20260810" in a

    def test_density_params_forwarded(self):
        cfg = parse_config(BASE_CONFIG + "density.width = 0.5\ndensity.exponent_sign = 1\n")
        assert cfg.density.width == 0.5
        assert cfg.density.exponent_sign == 1


SMALL_RUN = """
frame.s = 3
frame.B = 1.4
frame.eta = 1e-3
density.kind = gaussian_bump
experiment.seed = 99
experiment.n_grid = 500, 800
experiment.kappa0_grid = 0.10, 0.20
experiment.replications = 8
rate.n_grid = 400, 800, 1600, 3200
rate.kappa0 = 0.2
bias.J_grid = 4, 6
bias.K_grid = 8, 12
tightness.functions = 4
tightness.band = 6
"""


class TestCli:
    def test_estimate_writes_outputs_and_is_deterministic(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["estimate", "--config", str(cfg), "--out", str(out1), "--n", "600"]) == 0
        assert main(["estimate", "--config", str(cfg), "--out", str(out2), "--n", "600"]) == 0
        assert (out1 / "density.csv").read_bytes() == (out2 / "density.csv").read_bytes()
        assert (out1 / "survivors.csv").read_bytes() == (out2 / "survivors.csv").read_bytes()

    def test_estimate_zero_threshold_matches_linear(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN)
        out = tmp_path / "zero"
        assert main(["estimate", "--config", str(cfg), "--out", str(out), "--kappa0", "0"]) == 0
        rows = (out / "density.csv").read_text().splitlines()[2:]
        for row in rows:
            _, _, thr, lin = row.split(",")
            assert thr == lin

    def test_tables_run_and_checks_pass(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN)
        out = tmp_path / "tables"
        code = main(["tables", "--config", str(cfg), "--out", str(out), "--threads", "2"])
        table1 = (out / "table1.csv").read_text().splitlines()
        assert table1[1].startswith("j,n500_k0.1,n500_k0.2,n800_k0.1,n800_k0.2,Q_n500,Q_n800")
        assert (out / "table2.csv").exists()
        assert code == 0

    def test_tables_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN)
        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        main(["tables", "--config", str(cfg), "--out", str(out1)])
        main(["tables", "--config", str(cfg), "--out", str(out2), "--threads", "3"])
        for name in ("table1.csv", "table2.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_rate_outputs_reference_slopes(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN + "experiment.replications = 6\n")
        out = tmp_path / "rate"
        code = main(["rate", "--config", str(cfg), "--out", str(out)])
        refs = dict(
            tuple(line.split(","))
            for line in (out / "rate_references.csv").read_text().splitlines()[2:]
        )
        assert float(refs["1.0"]) == pytest.approx(-2.0 / 3.0)
        assert code == 0

    def test_bias_grid(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN)
        out = tmp_path / "bias"
        code = main(["bias", "--config", str(cfg), "--out", str(out)])
        lines = (out / "bias.csv").read_text().splitlines()
        assert lines[1].startswith("J,K,R,I1,I2,I3")
        assert len(lines) == 2 + 4  # 2x2 grid
        assert code == 0

    def test_frame_check_small(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN + "tightness.functions = 3\n")
        out = tmp_path / "fc"
        code = main(["frame-check", "--config", str(cfg), "--out", str(out)])
        checks = (out / "checks.csv").read_text()
        assert "tightness-sandwich" in checks
        assert code == 0

    def test_config_error_exit_code(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN.replace("frame.B = 1.4", "frame.B = 0.9"))
        assert main(["frame-check", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2

    def test_missing_seed_exit_code(self, tmp_path):
        cfg = write_config(tmp_path, "frame.B = 1.4\n")
        assert main(["tables", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, SMALL_RUN)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["estimate", "--config", str(cfg), "--out", str(out1)])
        main(["estimate", "--config", str(cfg), "--out", str(out2), "--seed", "12345"])
        assert (out1 / "density.csv").read_bytes() != (out2 / "density.csv").read_bytes()
