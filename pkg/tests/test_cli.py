import json

import numpy as np
import pytest

from maeig.cli import ConfigError, parse_domain, run_command
from maeig.fieldio import read_field
from maeig.geometry import ConvexPolygon, Disk, Ellipse, Rectangle


class TestParseDomain:
    def test_disk_short(self):
        d = parse_domain("disk:1")
        assert isinstance(d, Disk) and d.radius == 1.0

    def test_disk_full(self):
        d = parse_domain("disk:0.5,-1,2")
        assert d.center == (0.5, -1.0) and d.radius == 2.0

    def test_square(self):
        d = parse_domain("square:1")
        assert isinstance(d, Rectangle) and d.corner1 == (1.0, 1.0)

    def test_ellipse(self):
        d = parse_domain("ellipse:2,1,0.3")
        assert isinstance(d, Ellipse) and d.rotation == 0.3

    def test_polygon(self):
        d = parse_domain("polygon:0,0;1,0;0,1")
        assert isinstance(d, ConvexPolygon)

    @pytest.mark.parametrize("bad", ["disk", "disk:1,2", "blob:1", "square:abc"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ConfigError):
            parse_domain(bad)


class TestRunCommand:
    def test_dirichlet_run(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            ["dirichlet", "--domain", "disk:1", "--h", "0.125", "--f", "1.0", "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["residual"] <= 1e-8
        assert summary["u_min"] == pytest.approx(-0.5, abs=1e-4)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["h"] == 0.125
        assert manifest["exit_code"] == 0

    def test_eigen_run_contract(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(["eigen", "--domain", "disk:1", "--h", "0.125", "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["lambda"] > 0
        assert summary["w_sup_norm"] == 1.0

    def test_system_run_p2(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            ["system", "--p", "2", "--domain", "square:1", "--h", "0.0625", "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["u_minus_v_sup"] <= 1e-5

    def test_invalid_input_exit_2(self, tmp_path):
        assert run_command(["system", "--p", "-1", "--domain", "disk:1", "--out", str(tmp_path)]) == 2
        assert run_command(["eigen", "--domain", "nope:1", "--out", str(tmp_path)]) == 2
        assert run_command(["eigen", "--domain", "disk:1", "--h", "9", "--out", str(tmp_path)]) == 2

    def test_nonconvergence_exit_1(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            [
                "dirichlet", "--domain", "disk:1", "--h", "0.125", "--out", str(out),
                "--max-outer", "1", "--no-newton",
            ]
        )
        assert code == 1
        summary = json.loads((out / "summary.json").read_text())
        assert "error" in summary

    def test_field_dump_and_plot_data(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            [
                "eigen", "--domain", "disk:1", "--h", "0.25", "--out", str(out),
                "--dump-fields", "--emit-plot-data", "--history",
            ]
        )
        assert code == 0
        dump = read_field(out / "w.field")
        assert dump.name == "w"
        assert np.nanmax(np.abs(dump.values)) == pytest.approx(1.0, abs=1e-12)
        plot = (out / "plot_w.csv").read_text().splitlines()
        assert plot[0] == "x,y,value"
        assert len(plot) == 1 + np.count_nonzero(~np.isnan(dump.values))
        assert (out / "history.csv").exists()

    def test_sweep_run(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            [
                "sweep", "--domain", "disk:1", "--h", "0.125",
                "--p-list", "2.0,2.1", "--out", str(out),
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert [e["p"] for e in summary["entries"]] == [2.0, 2.1]

    def test_verify_subset(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            [
                "verify", "--domain", "disk:1", "--h", "0.125", "--p", "2.2",
                "--checks", "nibp,amgm,uvn,cd1,sup_bounds,distance_bounds",
                "--out", str(out),
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["all_passed"]
        assert {r["check"] for r in summary["checks"]} == {
            "nibp", "amgm", "uvn_identity", "cd1_invariant", "sup_bounds", "distance_bounds",
        }

    def test_verify_all_checks(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            [
                "verify", "--all", "--domain", "disk:1", "--h", "0.125", "--p", "2.2",
                "--out", str(out),
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["all_passed"]
        assert len(summary["checks"]) == 8
        assert summary["k"] == 4  # verification runs default to the wide stencil

    def test_verify_rejects_unknown_check(self, tmp_path):
        code = run_command(
            ["verify", "--domain", "disk:1", "--p", "2", "--checks", "bogus", "--out", str(tmp_path)]
        )
        assert code == 2

    def test_sweep_jobs_flag(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            [
                "sweep", "--domain", "disk:1", "--h", "0.25",
                "--p-list", "2.0,2.1", "--jobs", "2", "--out", str(out),
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert all("sigma" in e for e in summary["entries"])

    def test_output_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MAEIG_OUT", str(tmp_path / "root"))
        code = run_command(["eigen", "--domain", "disk:1", "--h", "0.25"])
        assert code == 0
        runs = list((tmp_path / "root").glob("eigen-*/summary.json"))
        assert len(runs) == 1


class TestConfigFile:
    def test_config_file_with_flag_override(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text(
            "# comment line\n"
            "domain = disk:1\n"
            "h = 0.25\n"
            "f_const = 4.0\n"
        )
        out = tmp_path / "run"
        code = run_command(
            ["dirichlet", "--config", str(cfgfile), "--h", "0.125", "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["h"] == 0.125  # flag wins
        assert summary["f_const"] == 4.0  # file value kept

    def test_config_file_error_has_line_number(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("domain = disk:1\nwibble = 3\n")
        code = run_command(["eigen", "--config", str(cfgfile), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_missing_config_file(self, tmp_path):
        code = run_command(
            ["eigen", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]
        )
        assert code == 2


class TestDeterminism:
    def test_byte_identical_summaries(self, tmp_path):
        args = ["eigen", "--domain", "disk:1", "--h", "0.125", "--seed", "3"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_command(args + ["--out", str(out1)]) == 0
        assert run_command(args + ["--out", str(out2)]) == 0
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_verify_deterministic(self, tmp_path):
        args = [
            "verify", "--domain", "disk:1", "--h", "0.25", "--p", "2.0",
            "--checks", "minkowski,cd1", "--seed", "9",
        ]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_command(args + ["--out", str(out1)]) == 0
        assert run_command(args + ["--out", str(out2)]) == 0
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
