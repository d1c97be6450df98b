import json
import subprocess
import sys

import numpy as np
import pytest

from paneitz.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def values(out):
    return [float(line.split("value=")[1].split()[0]) for line in out.splitlines() if "value=" in line]


class TestApply:
    def test_flat_quartic(self, capsys):
        code, out, _ = run(capsys, "apply", "--metric", "flat-euclidean-4", "--op", "paneitz", "--phi", "x0^4", "--at", "0,0,0,0")
        assert code == 0
        assert values(out) == [24.0]
        assert "fourth_order_part=24" in out and "divergence_part=0" in out

    def test_cylinder_kernel(self, capsys):
        code, out, _ = run(capsys, "apply", "--op", "cylinder-closed-form", "--phi", "cos(t)*cos(chi)", "--points", "5")
        assert code == 0
        assert np.max(np.abs(values(out))) < 1e-10

    def test_cylinder_cos_t(self, capsys):
        code, out, _ = run(
            capsys, "apply", "--metric", "einstein-cylinder", "--op", "paneitz", "--phi", "cos(t)", "--at", "0.5,1,1,1", "--at=-0.2,2,1.5,3"
        )
        assert code == 0
        np.testing.assert_allclose(values(out), [-3 * np.cos(0.5), -3 * np.cos(-0.2)], atol=1e-9)

    @pytest.mark.parametrize("op", ["yamabe", "paneitz4", "biharmonic"])
    def test_other_operators(self, capsys, op):
        code, out, _ = run(capsys, "apply", "--metric", "flat-minkowski-4", "--op", op, "--phi", "t^4", "--at", "0.5,0,0,0")
        assert code == 0
        expected = {"yamabe": 12 * 0.25, "paneitz4": 24.0, "biharmonic": 24.0}[op]
        assert values(out)[0] == pytest.approx(expected)

    def test_bad_requests(self, capsys):
        assert run(capsys, "apply", "--metric", "sphere-9", "--op", "yamabe", "--phi", "1")[0] == 2
        assert run(capsys, "apply", "--metric", "sphere-2", "--op", "yamabe", "--phi", "x5")[0] == 2
        assert run(capsys, "apply", "--metric", "sphere-2", "--op", "yamabe", "--phi", "1", "--at", "1,2,3")[0] == 2
        code, _, err = run(capsys, "apply", "--metric", "sphere-2", "--op", "paneitz", "--phi", "1", "--at", "1,1")
        assert code == 2 and "dimension" in err

    def test_config_metric(self, capsys, tmp_path):
        cfg = tmp_path / "m.yaml"
        cfg.write_text("custom_metrics:\n  - dimension: 2\n    components: ['1', '0', '1']\n")
        code, out, _ = run(capsys, "apply", "--config", str(cfg), "--op", "yamabe", "--phi", "x0^2+x1^2", "--at", "0.1,0.2")
        assert code == 0 and values(out) == [pytest.approx(4.0)]


class TestVerify:
    def test_points_zero_is_config_error(self, capsys):
        code, _, err = run(capsys, "verify", "--suite", "jets", "--points", "0")
        assert code == 2 and "config error" in err

    def test_json_report(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "flatness", "--points", "5", "--seeds", "1", "--no-timestamp")
        rep = json.loads(out)
        assert code == 0 and set(rep) == {"config", "records", "summary", "version"}

    def test_failure_exit_code(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "yamabe", "--dims", "3", "--points", "3", "--seeds", "1", "--tol", "1e-30", "--format", "text")
        assert code == 1 and "FAIL" in out

    def test_output_file_and_config(self, capsys, tmp_path):
        cfg = tmp_path / "suite.yaml"
        cfg.write_text("suite: cylinder\npoints: 3\nseeds: [0, 4]\nformat: json\n")
        dest = tmp_path / "r.json"
        code, out, _ = run(capsys, "verify", "--config", str(cfg), "--no-timestamp", "--output", str(dest), "--points", "2")
        rep = json.loads(dest.read_text())
        assert code == 0 and out == ""
        assert rep["config"]["seeds"] == [0, 4] and rep["config"]["points"] == 2

    def test_byte_identical(self, tmp_path):
        args = [sys.executable, "-m", "paneitz", "verify", "--suite", "all", "--dims", "3", "--points", "2", "--seeds", "1", "--no-timestamp"]
        a = subprocess.run(args, capture_output=True, check=True).stdout
        b = subprocess.run(args, capture_output=True, check=True).stdout
        assert a == b and a


def test_catalog_list(capsys):
    code, out, _ = run(capsys, "catalog", "list")
    assert code == 0
    for name in ("flat-euclidean-N", "einstein-cylinder", "conformally-flat-N"):
        assert name in out
