"""Unit tests for the command-line entry point."""

import io
import json
import subprocess
import sys
from pathlib import Path
from unittest.mock import Mock, patch

import numpy as np
import pandas as pd
import pytest

from efgm.errors import NumericError
from efgm.geometry import extreme_point_count
from efgm.model_spec import load_model
from efgm.sampling import sample
from runtime.cli import bounds_frame, extreme_points_frame, main
from tests.helpers import frac, read_golden

REPO_ROOT = Path(__file__).parent.parent
FGM_D2 = json.dumps({"type": "theta", "d": 2, "values": [1.0]})
VERTEX_D3 = json.dumps({"type": "theta", "d": 3, "values": [0, 1]})
BETA_D3 = json.dumps({"type": "beta", "d": 3, "alpha": 1.0})


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _csv(text):
    return pd.read_csv(io.StringIO(text))


class TestReadOutCommands:
    """Test check, convert, extreme-points and bounds."""

    def test_check_admissible_json(self, capsys):
        """Test a JSON admissibility report."""
        code, out, _ = _run(capsys, ["check", "--model", VERTEX_D3, "--format", "json"])
        assert code == 0
        report = json.loads(out)
        assert report["admissible"] is True
        assert len(report["margins"]) == 4

    def test_check_csv_margins(self, capsys):
        """Test the CSV form lists g(m) per m."""
        code, out, _ = _run(capsys, ["check", "--model", BETA_D3])
        assert code == 0
        frame = _csv(out)
        assert list(frame.columns) == ["m", "margin"]
        assert len(frame) == 4
        assert (frame["margin"] >= 0).all()

    def test_check_inadmissible(self, capsys):
        """Test exit 2 with the violating margin named."""
        model = json.dumps({"type": "theta", "d": 3, "values": [0, 1.01]})
        code, out, err = _run(capsys, ["check", "--model", model])
        assert code == 2
        assert out == ""
        error = json.loads(err.strip().splitlines()[-1])
        assert error["error"] == "InadmissibleError"
        assert error["index"] == 1
        assert "g(1)" in error["message"]

    def test_convert(self, capsys):
        """Test theta to N_d pmf and zeta."""
        code, out, _ = _run(capsys, ["convert", "--model", VERTEX_D3, "--to", "ndpmf"])
        assert code == 0
        assert np.allclose(_csv(out).iloc[0], [0.25, 0.0, 0.75, 0.0])
        code, out, _ = _run(capsys, ["convert", "--model", VERTEX_D3, "--to", "zeta", "--format", "json"])
        assert json.loads(out)[0]["zeta_2"] == pytest.approx(0.25)

    @pytest.mark.parametrize("d", [3, 4, 10])
    def test_extreme_points_golden(self, capsys, d):
        """Test extreme-point rows against the exact tables."""
        code, out, _ = _run(capsys, ["extreme-points", "--d", str(d)])
        assert code == 0
        frame = _csv(out)
        golden = read_golden(f"extreme_points_d{d}.csv")
        assert list(frame.columns) == list(golden[0].keys())
        assert len(frame) == len(golden) == extreme_point_count(d)
        for (_, row), expected in zip(frame.iterrows(), golden):
            assert np.allclose(row.to_numpy(dtype=float), [frac(v) for v in expected.values()], atol=1e-12)

    def test_centre_row_last(self):
        """Test the even-d centre point closes the table."""
        frame = extreme_points_frame(4)
        assert frame.iloc[-1]["j1"] == frame.iloc[-1]["j2"] == 2

    def test_bounds_golden(self, capsys):
        """Test the END rows for d = 2..12."""
        for row in read_golden("end_theta.csv"):
            d = int(row["d"])
            code, out, _ = _run(capsys, ["bounds", "--d", str(d)])
            assert code == 0
            frame = _csv(out).set_index("bound")
            theta_columns = [f"theta_{k}" for k in range(2, d + 1)]
            expected = [frac(v) for v in row["theta"].split(";")]
            assert np.allclose(frame.loc["END", theta_columns], expected, atol=1e-12)
            assert np.allclose(frame.loc["EPD", theta_columns], [(1 + (-1) ** k) / 2 for k in range(2, d + 1)])

    def test_bounds_d7(self):
        """Test the d = 7 END row and both laws."""
        frame = bounds_frame(7).set_index("bound")
        assert np.allclose(frame.loc["END", [f"theta_{k}" for k in range(2, 8)]],
                           [-1 / 7, 0, 3 / 35, 0, -1 / 7, 0])
        assert frame.loc["END", "p_3"] == frame.loc["END", "p_4"] == 0.5
        assert frame.loc["EPD", "p_0"] == frame.loc["EPD", "p_7"] == 0.5


class TestPointCommands:
    """Test cdf and density."""

    def test_cdf(self, capsys):
        """Test the bivariate cdf value."""
        code, out, _ = _run(capsys, ["cdf", "--model", FGM_D2, "--point", "0.5,0.5"])
        assert code == 0
        assert float(out) == pytest.approx(0.3125)

    def test_density(self, capsys):
        """Test the bivariate density value."""
        code, out, _ = _run(capsys, ["density", "--model", FGM_D2, "--point", "0.1,0.1"])
        assert code == 0
        assert float(out) == pytest.approx(1.64)

    def test_point_values_as_json(self, capsys):
        """Test --format json wraps the value in an object."""
        code, out, _ = _run(capsys, ["cdf", "--model", FGM_D2, "--point", "0.5,0.5", "--format", "json"])
        assert code == 0
        assert json.loads(out) == {"value": pytest.approx(0.3125)}
        code, out, _ = _run(capsys, ["density", "--model", FGM_D2, "--point", "0.1,0.1", "--format", "json"])
        assert code == 0
        assert json.loads(out)["value"] == pytest.approx(1.64)

    def test_boundary_point(self, capsys):
        """Test a boundary point is invalid for the density."""
        code, _, err = _run(capsys, ["density", "--model", FGM_D2, "--point", "0,0.5"])
        assert code == 2
        assert json.loads(err.strip().splitlines()[-1])["invariant"] == "point-range"

    def test_malformed_point(self, capsys):
        """Test non-numeric coordinates."""
        code, _, _ = _run(capsys, ["cdf", "--model", FGM_D2, "--point", "a,b"])
        assert code == 2


class TestSampleAndEstimate:
    """Test sample, estimate and simstudy."""

    def test_sample_reproducible(self, capsys, tmp_path, monkeypatch):
        """Test identical bytes for the same seed and any thread count."""
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sample", "--model", BETA_D3, "--n", "500", "--seed", "7", "--out", str(first)]) == 0
        monkeypatch.setenv("EFGM_THREADS", "2")
        assert main(["sample", "--model", BETA_D3, "--n", "500", "--seed", "7", "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        frame = pd.read_csv(first)
        assert list(frame.columns) == ["u1", "u2", "u3"]
        assert len(frame) == 500

    def test_sample_stdout_round_trips(self, capsys):
        """Test 17 significant digits reproduce the doubles."""
        code, out, _ = _run(capsys, ["sample", "--model", VERTEX_D3, "--n", "20", "--seed", "3"])
        assert code == 0
        expected = sample(load_model(VERTEX_D3).to_model(), 20, 3).rows
        parsed = pd.read_csv(io.StringIO(out), float_precision="round_trip").to_numpy()
        assert np.array_equal(parsed, expected)

    def test_sample_mixture(self, capsys, tmp_path):
        """Test sampling through the mixing variable."""
        out = tmp_path / "mix.csv"
        assert main(["sample", "--model", BETA_D3, "--n", "100", "--seed", "1", "--mixture", "--out", str(out)]) == 0
        assert pd.read_csv(out).shape == (100, 3)

    def test_sample_mixture_needs_mixing_model(self, capsys):
        """Test --mixture with a theta model."""
        code, _, _ = _run(capsys, ["sample", "--model", VERTEX_D3, "--n", "10", "--seed", "1", "--mixture"])
        assert code == 2

    def test_sample_to_s3(self, capsys):
        """Test writing a sample to S3."""
        s3 = Mock()
        with patch("runtime.cli._s3_client", return_value=s3):
            code = main(["sample", "--model", BETA_D3, "--n", "5", "--seed", "1", "--out", "s3://bucket/out/u.csv"])
        assert code == 0
        kwargs = s3.put_object.call_args.kwargs
        assert kwargs["Bucket"] == "bucket"
        assert kwargs["Key"] == "out/u.csv"
        assert kwargs["Body"].startswith("u1,u2,u3\n")

    def test_estimate(self, capsys, tmp_path):
        """Test an EM fit from a sample file with a weights table."""
        data, weights = tmp_path / "data.csv", tmp_path / "weights.csv"
        assert main(["sample", "--model", BETA_D3, "--n", "2000", "--seed", "11", "--out", str(data)]) == 0
        code, out, _ = _run(capsys, ["estimate", "--input", str(data), "--weights-out", str(weights)])
        assert code == 0
        result = json.loads(out)
        assert set(result) == {"theta", "loglik", "iterations", "converged"}
        assert len(result["theta"]) == 2
        table = pd.read_csv(weights)
        assert list(table.columns) == ["j1", "j2", "weight"]
        assert len(table) == extreme_point_count(3)
        assert table["weight"].sum() == pytest.approx(1.0)

    def test_estimate_headerless_pseudo_obs(self, capsys, tmp_path, rng):
        """Test raw data without a header through pseudo-observations."""
        path = tmp_path / "raw.csv"
        np.savetxt(path, rng.normal(size=(300, 3)), delimiter=",")
        code, out, _ = _run(capsys, ["estimate", "--input", str(path), "--pseudo-obs", "--max-iter", "50"])
        assert code == 0
        assert json.loads(out)["iterations"] <= 50

    def test_estimate_bad_data(self, capsys, tmp_path):
        """Test non-numeric values and missing files."""
        path = tmp_path / "bad.csv"
        path.write_text("u1,u2\n0.1,x\n")
        assert _run(capsys, ["estimate", "--input", str(path)])[0] == 2
        assert _run(capsys, ["estimate", "--input", str(tmp_path / "missing.csv")])[0] == 2

    def test_numeric_failure_exit_code(self, capsys, tmp_path):
        """Test a numerical failure exits with status 1."""
        path = tmp_path / "data.csv"
        path.write_text("0.2,0.3\n0.6,0.7\n")
        with patch("runtime.cli.em_fit", side_effect=NumericError("NaN trace", invariant="em-trace")):
            code, _, err = _run(capsys, ["estimate", "--input", str(path)])
        assert code == 1
        assert json.loads(err.strip().splitlines()[-1])["invariant"] == "em-trace"

    def test_simstudy(self, capsys, tmp_path):
        """Test the summary table and per-replication output."""
        summary, boxplot = tmp_path / "summary.csv", tmp_path / "reps.csv"
        code = main(["simstudy", "--d", "3", "--n", "300", "--reps", "2", "--seed", "5", "--model", BETA_D3,
                     "--out", str(summary), "--boxplot-out", str(boxplot)])
        assert code == 0
        table = pd.read_csv(summary)
        assert table["statistic"].tolist()[0] == "Real parameter"
        assert len(table) == 7
        assert len(pd.read_csv(boxplot)) == 2

    def test_simstudy_needs_model_off_d10(self, capsys):
        """Test simstudy without a model for d != 10."""
        code, _, _ = _run(capsys, ["simstudy", "--d", "4", "--n", "10", "--reps", "1", "--seed", "1"])
        assert code == 2

    def test_invalid_threads(self, capsys):
        """Test a thread count below one."""
        code, _, _ = _run(capsys, ["sample", "--model", BETA_D3, "--n", "5", "--seed", "1", "--threads", "0"])
        assert code == 2

    def test_unknown_flag(self, capsys):
        """Test unknown flags are errors."""
        with pytest.raises(SystemExit) as exc:
            main(["bounds", "--d", "3", "--colour"])
        assert exc.value.code == 2

    @pytest.mark.slow
    def test_sample_then_estimate_d10(self, capsys, tmp_path):
        """Test the pipeline recovers theta_2 of the study model."""
        data = tmp_path / "study.csv"
        model = str(REPO_ROOT / "models" / "simulation_study_d10.yaml")
        assert main(["sample", "--model", model, "--n", "10000", "--seed", "2024", "--out", str(data)]) == 0
        code, out, _ = _run(capsys, ["estimate", "--input", str(data)])
        assert code == 0
        assert json.loads(out)["theta"][0] == pytest.approx(0.0667, abs=0.02)


def test_module_entry_point():
    """Test `python -m runtime.cli` runs as a script."""
    result = subprocess.run(
        [sys.executable, "-m", "runtime.cli", "extreme-points", "--d", "3"],
        cwd=REPO_ROOT, capture_output=True, text=True, check=False,
    )
    assert result.returncode == 0
    assert result.stdout.splitlines()[0] == "j1,j2,p_j1,p_j2,theta_2,theta_3"
    assert len(result.stdout.splitlines()) == 5
