import json
import subprocess
import sys
import numpy as np
import pytest

import modedecomp as md
from modedecomp.cli import (
    main,
    read_phases_csv,
    read_report,
    read_signal_csv,
    write_phases_csv,
    write_signal_csv,
)
from modedecomp.errors import NonMonotonePhase, ParseError


def run_synth(out, samples=2048, noise="0", seed="7", extra=()):
    return main(["synth", "--example", "ex4_1", "--samples", str(samples),
                 "--noise-var", noise, "--seed", seed, "--out", str(out),
                 *extra])


class TestCsvRoundTrip:
    def test_signal_roundtrip_lossless(self, tmp_path):
        ex = md.gen_example_4_1(512, 1.0, 3)
        path = tmp_path / "sig.csv"
        write_signal_csv(path, ex.signal)
        back = read_signal_csv(path)
        assert np.array_equal(back.times, ex.signal.times)
        assert np.array_equal(back.values, ex.signal.values)

    def test_phases_roundtrip(self, tmp_path):
        ex = md.gen_example_4_1(256, 0.0, 3)
        path = tmp_path / "phases.csv"
        write_phases_csv(path, ex.signal.times, list(ex.priors))
        times, priors = read_phases_csv(path)
        assert np.array_equal(times, ex.signal.times)
        for got, want in zip(priors, ex.priors):
            assert np.array_equal(got.phase, want.phase)
            assert np.array_equal(got.amplitude, want.amplitude)

    def test_minimal_signal_file(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("t,value\n0,1.5\n0.5,2\n")
        sig = read_signal_csv(path)
        assert len(sig) == 2

    def test_non_monotone_phase_column(self, tmp_path):
        path = tmp_path / "phases.csv"
        path.write_text("t,p1\n0,0.0\n0.5,1.0\n1.0,0.5\n")
        with pytest.raises(NonMonotonePhase):
            read_phases_csv(path)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,value\n0,1\nnope,2\n")
        with pytest.raises(ParseError) as err:
            read_signal_csv(path)
        assert ":3" in str(err.value)


class TestSynthCommand:
    def test_writes_expected_files(self, tmp_path):
        out = tmp_path / "d"
        assert run_synth(out) == 0
        assert (out / "signal.csv").exists()
        assert (out / "phases.csv").exists()
        assert (out / "meta.json").exists()
        truth = out / "truth"
        assert (truth / "clean.csv").exists()
        assert (truth / "mode_1.csv").exists()
        assert (truth / "mode_2.csv").exists()
        assert (truth / "shape_c0_k1.csv").exists()
        meta = json.loads((out / "meta.json").read_text())
        assert meta["seed"] == 7
        assert "rng" in meta

    def test_spec_file_synth(self, tmp_path):
        spec = {"components": [
            {"fundamental": 24, "shape": {"variant": 1},
             "phase_wiggle": {"kind": "sin", "amp": 0.004},
             "amplitude": {"const": 1.0, "cos1": 0.1}},
            {"fundamental": 40, "shape": {"variant": 2}},
        ]}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "d"
        code = main(["synth", "--spec", str(spec_path), "--samples", "1024",
                     "--noise-var", "0", "--seed", "1", "--out", str(out)])
        assert code == 0
        sig = read_signal_csv(out / "signal.csv")
        assert len(sig) == 1024
        _, priors = read_phases_csv(out / "phases.csv")
        assert len(priors) == 2


class TestDecomposeCommands:
    def test_mmd_end_to_end(self, tmp_path):
        data = tmp_path / "data"
        run_synth(data, samples=4096)
        out = tmp_path / "fit"
        code = main(["mmd", "--signal", str(data / "signal.csv"),
                     "--phases", str(data / "phases.csv"),
                     "--m0", "2", "--j1", "5", "--j2", "5",
                     "--bins", "64", "--out", str(out)])
        assert code == 0
        for name in ("mode_1.csv", "mode_2.csv", "residual.csv",
                     "coefficients.csv", "report.json",
                     "shape_c0_k1.csv", "shape_c2_k2.csv", "shape_s-1_k1.csv"):
            assert (out / name).exists(), name
        # coefficient rows exist exactly for every band of every component
        rows = (out / "coefficients.csv").read_text().strip().splitlines()
        assert rows[0] == "k,n,a_n,b_n"
        assert len(rows) - 1 == 2 * 5  # two components, bands -2..2
        report = read_report(out / "report.json")
        assert report["stop_reason"] in ("ResidualSmall", "Stalled", "MaxIter")
        assert report["config"]["m0"] == 2
        assert "input_path" not in report["config"]
        assert report["gamma"] is not None

    def test_gmd_end_to_end(self, tmp_path):
        data = tmp_path / "data"
        run_synth(data, samples=4096)
        out = tmp_path / "fit"
        code = main(["gmd", "--signal", str(data / "signal.csv"),
                     "--phases", str(data / "phases.csv"),
                     "--max-iter", "5", "--bins", "64", "--out", str(out)])
        assert code == 0
        for name in ("mode_1.csv", "shape_1.csv", "shape_2.csv",
                     "residual.csv", "report.json"):
            assert (out / name).exists(), name

    def test_zero_signal_run(self, tmp_path):
        t = md.sample_grid(256)
        zero = md.make_signal(t, np.zeros(256))
        prior = md.make_prior(20.0 * t)
        data = tmp_path / "data"
        data.mkdir()
        write_signal_csv(data / "signal.csv", zero)
        write_phases_csv(data / "phases.csv", t, [prior])
        out = tmp_path / "fit"
        code = main(["gmd", "--signal", str(data / "signal.csv"),
                     "--phases", str(data / "phases.csv"),
                     "--bins", "32", "--out", str(out)])
        assert code == 0
        report = read_report(out / "report.json")
        assert report["stop_reason"] == "ResidualSmall"
        residual = read_signal_csv(out / "residual.csv")
        assert np.all(residual.values == 0.0)

    def test_grid_mismatch_is_validation_error(self, tmp_path):
        data = tmp_path / "data"
        run_synth(data, samples=512)
        other = md.sample_grid(256)
        write_phases_csv(data / "phases2.csv", other,
                         [md.make_prior(10.0 * other)])
        code = main(["gmd", "--signal", str(data / "signal.csv"),
                     "--phases", str(data / "phases2.csv"),
                     "--out", str(tmp_path / "x")])
        assert code == 1


class TestDiagnoseCommand:
    def test_phase_statistics(self, tmp_path):
        data = tmp_path / "data"
        run_synth(data, samples=4096)
        out = tmp_path / "diag"
        code = main(["diagnose", "--phases", str(data / "phases.csv"),
                     "--h", "0.05", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "well_diff.json").read_text())
        assert payload["gamma"] >= 0
        assert "beta" in payload and "contraction_bound" in payload

    def test_residual_autocorrelation(self, tmp_path):
        data = tmp_path / "data"
        run_synth(data, samples=1024, noise="1.0")
        out = tmp_path / "diag"
        code = main(["diagnose", "--residual", str(data / "signal.csv"),
                     "--max-lag", "20", "--out", str(out)])
        assert code == 0
        lines = (out / "autocorrelation.csv").read_text().strip().splitlines()
        assert lines[0] == "lag,rho"
        assert len(lines) == 22

    def test_requires_exactly_one_input(self, tmp_path):
        assert main(["diagnose", "--out", str(tmp_path)]) == 1


class TestShapeCsv:
    def test_roundtrip(self, tmp_path):
        from modedecomp.cli import read_shape_csv, write_shape_csv
        table = md.ecg_like_shape(128, 2)
        write_shape_csv(tmp_path / "s.csv", table)
        back = read_shape_csv(tmp_path / "s.csv")
        assert np.array_equal(back.bins, table.bins)

    def test_coefficients_readable(self, tmp_path):
        from modedecomp.cli import read_coefficients_csv
        data = tmp_path / "data"
        run_synth(data, samples=1024)
        out = tmp_path / "fit"
        main(["mmd", "--signal", str(data / "signal.csv"),
              "--phases", str(data / "phases.csv"),
              "--m0", "1", "--j1", "2", "--j2", "2", "--bins", "32",
              "--out", str(out)])
        coeffs = read_coefficients_csv(out / "coefficients.csv")
        assert set(coeffs) == {(k, n) for k in (1, 2) for n in (-1, 0, 1)}
        assert coeffs[(1, 0)][1] == 0.0  # no sine branch at band 0


class TestIidGrid:
    def test_synth_iid_grid(self, tmp_path):
        out = tmp_path / "d"
        assert run_synth(out, samples=1024, extra=("--grid", "iid")) == 0
        sig = read_signal_csv(out / "signal.csv")
        assert np.all(np.diff(sig.times) > 0)
        assert not np.allclose(np.diff(sig.times), 1.0 / 1024)


class TestThreadCap:
    def test_invalid_value_rejected(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MMD_THREADS", "zero")
        assert main(["diagnose", "--residual", "x", "--out",
                     str(tmp_path)]) == 1

    def test_valid_value_recorded(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MMD_THREADS", "4")
        data = tmp_path / "data"
        run_synth(data, samples=512)
        out = tmp_path / "fit"
        main(["gmd", "--signal", str(data / "signal.csv"),
              "--phases", str(data / "phases.csv"),
              "--max-iter", "2", "--bins", "32", "--out", str(out)])
        assert read_report(out / "report.json")["threads"] == 4


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["mmd", "--bogus"]) == 1
        err = capsys.readouterr().err
        assert "usage" in err.lower()

    def test_missing_file_is_io_error(self, tmp_path):
        code = main(["gmd", "--signal", str(tmp_path / "absent.csv"),
                     "--phases", str(tmp_path / "absent2.csv"),
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "modedecomp", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "synth" in proc.stdout


class TestReportSchema:
    def test_report_round_trip_config(self, tmp_path):
        data = tmp_path / "data"
        run_synth(data, samples=2048)
        out = tmp_path / "fit"
        main(["mmd", "--signal", str(data / "signal.csv"),
              "--phases", str(data / "phases.csv"),
              "--m0", "1", "--j1", "3", "--j2", "3", "--bins", "32",
              "--out", str(out)])
        report = read_report(out / "report.json")
        for key in ("residual_norms", "shape_increment_norms", "stop_reason",
                    "iterations", "gamma", "beta", "contraction_bound",
                    "seed", "config"):
            assert key in report
        again = read_report(out / "report.json")
        assert again["config"] == report["config"]

    def test_pipeline_determinism(self, tmp_path):
        def run(idx):
            data = tmp_path / f"data{idx}"
            run_synth(data, samples=2048, noise="0.5")
            fit = tmp_path / f"fit{idx}"
            main(["mmd", "--signal", str(data / "signal.csv"),
                  "--phases", str(data / "phases.csv"),
                  "--m0", "1", "--j1", "3", "--j2", "3", "--bins", "32",
                  "--out", str(fit)])
            return ((data / "signal.csv").read_bytes(),
                    (fit / "report.json").read_bytes(),
                    (fit / "coefficients.csv").read_bytes())

        assert run(1) == run(2)
