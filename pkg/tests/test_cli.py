from __future__ import annotations

import numpy as np
import pytest

from implicit_pf import csvio
from implicit_pf.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "filter", "--bogus")
        assert code == 1
        assert "usage" in err

    def test_missing_command(self, capsys):
        assert run(capsys)[0] == 1

    def test_bad_values(self, capsys):
        assert run(capsys, "filter", "--particles", "0")[0] == 1
        assert run(capsys, "filter", "--resample", "sometimes")[0] == 1
        assert run(capsys, "table3", "--ratios", "1,-2", "--runs", "2")[0] == 1

    def test_missing_truth_file(self, capsys, tmp_path):
        assert run(capsys, "filter", "--truth", str(tmp_path / "nope.csv"))[0] == 1

    def test_truth_with_wrong_columns(self, capsys, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("step,b\n1,1.5\n")
        assert run(capsys, "filter", "--truth", str(path))[0] == 1

    def test_selftest(self, capsys):
        code, out, _ = run(capsys, "selftest")
        assert code == 0
        assert out.count("PASS") == len(out.strip().splitlines())


class TestOutputs:
    def test_simulate_matches_golden(self, capsys):
        code, out, _ = run(capsys, "simulate", "--seed", "1")
        assert code == 0
        with open("tests/data/truth_seed1.csv") as fh:
            assert out == fh.read()

    def test_filter_repeatable(self, capsys):
        a = run(capsys, "filter", "--seed", "1", "--particles", "2")
        b = run(capsys, "filter", "--seed", "1", "--particles", "2")
        assert a[0] == 0 and a[1] == b[1]
        header, rows = csvio.loads(a[1])
        assert header == csvio.SCHEMAS["filter"] and len(rows) == 160

    def test_filter_truth_file_matches_simulated(self, capsys, tmp_path):
        path = tmp_path / "truth.csv"
        assert run(capsys, "simulate", "--seed", "4", "--steps", "30", "--out", str(path))[0] == 0
        from_file = run(capsys, "filter", "--seed", "4", "--particles", "5", "--truth", str(path))[1]
        direct = run(capsys, "filter", "--seed", "4", "--particles", "5", "--steps", "30")[1]
        assert from_file == direct

    def test_bearings_only_truth(self, capsys, tmp_path):
        path = tmp_path / "b.csv"
        text = run(capsys, "simulate", "--steps", "10")[1]
        header, rows = csvio.loads(text)
        csvio.write(path, header, [[r[0], None, None, None, None, r[5]] for r in rows])
        code, out, _ = run(capsys, "filter", "--truth", str(path), "--particles", "3")
        assert code == 0
        _, est = csvio.loads(out)
        assert est[0][3] is None and est[0][1] is not None

    def test_dump_particles(self, capsys, tmp_path):
        path = tmp_path / "p.csv"
        assert run(capsys, "filter", "--steps", "12", "--particles", "7", "--dump-particles", str(path))[0] == 0
        rows = csvio.read_table(path, "particles")
        assert [r["particle"] for r in rows] == list(range(7))
        assert all(r["step"] == 12 for r in rows)

    def test_table3_rows(self, capsys):
        code, out, _ = run(capsys, "table3", "--runs", "4", "--particles", "3", "--seed", "7")
        assert code == 0
        header, rows = csvio.loads(out)
        assert header == csvio.SCHEMAS["table3"]
        assert len(rows) == 12
        assert all(r[3] == 4 for r in rows)

    def test_estimate_sigma_from_scan_file(self, capsys, tmp_path):
        path = tmp_path / "scan.csv"
        csvio.write(path, csvio.SCHEMAS["table3"], [(0.5, 1.2, 0.01, 10, 0), (1.0, 1.05, 0.01, 10, 0),
                                                    (2.0, 0.85, 0.01, 10, 0)])
        code, out, _ = run(capsys, "estimate-sigma", "--scan", str(path))
        assert code == 0
        _, rows = csvio.loads(out)
        sigma, ratio, points = rows[0]
        assert ratio == pytest.approx(1.25)
        assert sigma == pytest.approx(1.25e-6)
        assert float(points) == pytest.approx(1.25)

    def test_estimate_sigma_without_crossing_is_numerical_failure(self, capsys, tmp_path):
        path = tmp_path / "scan.csv"
        csvio.write(path, csvio.SCHEMAS["table3"], [(0.5, 1.2, 0.01, 10, 0), (2.0, 1.1, 0.01, 10, 0)])
        assert run(capsys, "estimate-sigma", "--scan", str(path))[0] == 2

    def test_fig1_series(self, capsys):
        code, out, _ = run(capsys, "fig1", "--steps", "8", "--particles", "4", "--runs", "2")
        assert code == 0
        _, rows = csvio.loads(out)
        names = {r[0] for r in rows}
        assert names == {f"{s}/run{r}" for s in ("truth", "baseline", "perturbed", "jittered") for r in (0, 1)}

    def test_table2_columns(self, capsys):
        code, out, _ = run(capsys, "table2", "--runs", "3", "--particles", "3", "--steps", "80")
        assert code == 0
        _, rows = csvio.loads(out)
        assert [r[0] for r in rows] == [40, 80]
        assert all(r[5] == 3 and r[6] == 3 for r in rows)

    def test_table1_columns(self, capsys):
        code, out, _ = run(capsys, "table1", "--accepted", "20", "--steps", "40")
        assert code == 0
        _, rows = csvio.loads(out)
        assert rows[0][0] == 40 and rows[0][3] == 20


class TestSettings:
    def test_config_file_and_env_precedence(self, capsys, tmp_path, monkeypatch):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 3\nparticles = 4\nsteps = 20\n")
        from_file = run(capsys, "filter", "--config", str(cfg))[1]
        explicit = run(capsys, "filter", "--seed", "3", "--particles", "4", "--steps", "20")[1]
        assert from_file == explicit
        monkeypatch.setenv("FILTER_SEED", "5")
        from_env = run(capsys, "filter", "--config", str(cfg))[1]
        assert from_env == run(capsys, "filter", "--seed", "5", "--particles", "4", "--steps", "20")[1]
        assert run(capsys, "filter", "--config", str(cfg), "--seed", "3")[1] == explicit

    def test_bad_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = red\n")
        assert run(capsys, "filter", "--config", str(cfg))[0] == 1

    def test_options_before_command(self, capsys):
        a = run(capsys, "--seed", "2", "--steps", "15", "simulate")[1]
        b = run(capsys, "simulate", "--seed", "2", "--steps", "15")[1]
        assert a == b

    def test_hex_seed(self, capsys):
        assert run(capsys, "simulate", "--seed", "0x10", "--steps", "5")[1] == \
            run(capsys, "simulate", "--seed", "16", "--steps", "5")[1]

    def test_workers_do_not_change_output(self, capsys):
        args = ("table2", "--runs", "120", "--particles", "3", "--steps", "40")
        a = run(capsys, *args)[1]
        b = run(capsys, *args, "--workers", "2")[1]
        assert a == b
        _, rows = csvio.loads(a)
        assert np.isfinite(rows[0][2])
