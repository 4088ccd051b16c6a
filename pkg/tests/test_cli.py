"""Command-line interface: commands, exit codes, CSV determinism,
config handling, and the figures written alongside reports."""

import math

import pytest

from keyid.cli import main
from keyid.config import RunConfig, parse_config
from keyid.cuspforms import read_table
from keyid.errors import ConfigError
from keyid.fuchsian import clear_orbit_cache
from keyid.identity import clear_h_cache

FAST_GRID = [
    "x_min = 0.1", "x_max = 0.4", "y_min = 0.18", "y_max = 0.26",
    "nx = 2", "ny = 1", "threads = 1", "figures = false",
]


class TestSignatureCommand:
    def test_level_one(self, capsys):
        assert main(["signature", "--level", "1"]) == 0
        out = capsys.readouterr().out
        assert "genus 0" in out and "volume 1.047197551197" in out

    def test_level_eleven(self, capsys):
        assert main(["signature", "--level", "11"]) == 0
        out = capsys.readouterr().out
        assert f"{4 * math.pi:.12f}" in out

    def test_unsupported_level_exits_two(self, capsys):
        assert main(["signature", "--level", "12"]) == 2
        assert "squarefree" in capsys.readouterr().err


class TestHeatCommand:
    def test_free_mode_prints_khh_only(self, capsys):
        assert main(["heat", "--free", "--t", "1", "--z", "0,1", "--w", "0,2"]) == 0
        out = capsys.readouterr().out
        assert "khh" in out and "khyp" not in out

    def test_symmetry(self, capsys):
        assert main(["heat", "--level", "11", "--t", "1",
                     "--z", "0.2,1.4", "--w", "0.3,1.1"]) == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert main(["heat", "--level", "11", "--t", "1",
                     "--z", "0.3,1.1", "--w", "0.2,1.4"]) == 0
        second = capsys.readouterr().out.splitlines()[0]
        a = float(first.split("=")[1])
        b = float(second.split("=")[1])
        assert abs(a - b) <= 1e-10 * abs(a)

    def test_radius_bump_stability(self, capsys):
        assert main(["heat", "--level", "11", "--t", "1", "--z", "0.2,1.4"]) == 0
        base = float(capsys.readouterr().out.splitlines()[0].split("=")[1])
        assert main(["heat", "--level", "11", "--t", "1", "--z", "0.2,1.4",
                     "--radius", "+2"]) == 0
        bumped = float(capsys.readouterr().out.splitlines()[0].split("=")[1])
        assert abs(base - bumped) <= 1e-6


class TestConfig:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_parse_and_comments(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# comment\nlevel1 = 37\n\ntarget = 0.02  # inline\n")
        cfg = parse_config(str(p))
        assert cfg.level1 == 37 and cfg.target == 0.02

    def test_unknown_key_is_hard_error(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("level1 = 11\nlevel3 = 5\n")
        with pytest.raises(ConfigError) as err:
            parse_config(str(p))
        assert "line 2" in str(err.value)

    def test_malformed_line_reports_position(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("level1 = 11\n   nonsense here\n")
        with pytest.raises(ConfigError) as err:
            parse_config(str(p))
        assert "line 2" in str(err.value) and "col 4" in str(err.value)

    def test_malformed_config_exits_two(self, tmp_path, capsys):
        p = tmp_path / "bad.cfg"
        p.write_text("x_min = not_a_number\n")
        code = main(["verify-surface", "--config", str(p)])
        assert code == 2
        assert "line 1" in capsys.readouterr().err


class TestVerifySurfaceCommand:
    def test_deterministic_csv(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("\n".join(FAST_GRID) + "\n")
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["verify-surface", "--config", str(cfg),
                     "--out", str(out1), "--threads", "2"]) == 0
        clear_orbit_cache()
        clear_h_cache()
        assert main(["verify-surface", "--config", str(cfg),
                     "--out", str(out2), "--threads", "2"]) == 0
        capsys.readouterr()
        assert out1.read_bytes() == out2.read_bytes()
        header = out1.read_text().splitlines()[0]
        assert header == "x,y,lhs,rhs,residual,error_budget"

    def test_budget_violation_exits_three(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("\n".join(FAST_GRID + ["target = 1e-5"]) + "\n")
        code = main(["verify-surface", "--config", str(cfg),
                     "--out", str(tmp_path / "c.csv")])
        assert code == 3
        assert "budget" in capsys.readouterr().err

    def test_figures_written(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("\n".join(FAST_GRID[:-1]) + "\n")  # figures stay on
        out = tmp_path / "fig.csv"
        assert main(["verify-surface", "--config", str(cfg),
                     "--out", str(out)]) == 0
        capsys.readouterr()
        assert (tmp_path / "fig_residuals.png").exists()


class TestVerifyProductCommand:
    def test_small_product_run(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("\n".join(FAST_GRID + ["points1 = 2", "points2 = 2"]) + "\n")
        out = tmp_path / "p.csv"
        assert main(["verify-product", "--config", str(cfg),
                     "--out", str(out)]) == 0
        txt = capsys.readouterr().out
        assert "g1*g2 = 1" in txt
        lines = out.read_text().splitlines()
        assert lines[0] == "x1,y1,x2,y2,lhs,term1,term2,term3,term4,residual,error_budget"
        assert len(lines) == 5
        # printed terms sum to the right side within rounding
        for line in lines[1:]:
            vals = [float(tok) for tok in line.split(",")]
            lhs, t1, t2, t3, t4, res = vals[4], vals[5], vals[6], vals[7], vals[8], vals[9]
            rhs = t1 + t2 + t3 + t4
            assert abs(lhs - rhs) <= max(res * 1.01 * max(abs(lhs), abs(rhs)), 1e-300)

    def test_mixed_levels_header(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("\n".join(
            FAST_GRID + ["points1 = 1", "points2 = 1", "level2 = 37"]) + "\n")
        assert main(["verify-product", "--config", str(cfg),
                     "--out", str(tmp_path / "q.csv")]) == 0
        assert "g1*g2 = 2" in capsys.readouterr().out


class TestCoeffsCommand:
    def test_dump_format_round_trips(self, tmp_path, capsys):
        out = tmp_path / "c11.txt"
        assert main(["coeffs", "--level", "11", "--out", str(out)]) == 0
        capsys.readouterr()
        level, rows = read_table(out)
        assert level == 11 and len(rows) == 1 and rows[0][0] == 1

    def test_stdout_header(self, capsys):
        assert main(["coeffs", "--level", "37"]) == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert first == "level 37 dim 2 order 256"
