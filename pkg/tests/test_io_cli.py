import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from metricgeom import io
from metricgeom.cli import ConfigError, main, parse_config
from metricgeom.metric import FiniteMetricSpace, PointMap
from metricgeom.spaces import path_graph_metric
from metricgeom.subriemannian import INFINITY, ApproximantSchedule, cc_distance, default_grid, model_catalog


def run_cli(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def three_points(tmp_path):
    path = tmp_path / "three.txt"
    io.write_distance_matrix(path, path_graph_metric([0, 1, 3]))
    return path


class TestFormats:
    def test_distance_matrix_roundtrip(self, tmp_path):
        X = FiniteMetricSpace.from_points(np.random.default_rng(0).normal(size=(6, 2)))
        io.write_distance_matrix(tmp_path / "d.txt", X)
        assert np.array_equal(io.read_distance_matrix(tmp_path / "d.txt").dist, X.dist)

    def test_point_map_roundtrip(self, tmp_path):
        X = path_graph_metric([0, 1, 3])
        f = PointMap(X, np.random.default_rng(1).normal(size=(3, 4)))
        io.write_point_map(tmp_path / "f.txt", f)
        assert np.array_equal(io.read_point_map(tmp_path / "f.txt", X).image, f.image)

    def test_cloud_roundtrip(self, tmp_path):
        pts = np.random.default_rng(2).normal(size=(5, 3))
        io.write_cloud(tmp_path / "c.txt", pts)
        assert np.array_equal(io.read_cloud(tmp_path / "c.txt"), pts)

    def test_wrong_kind(self, tmp_path):
        io.write_cloud(tmp_path / "c.txt", np.zeros((2, 2)))
        with pytest.raises(io.FormatError):
            io.read_distance_matrix(tmp_path / "c.txt")

    def test_wrong_version(self, tmp_path):
        (tmp_path / "d.txt").write_text("# metricgeom distance-matrix v9\n1\n0\n")
        with pytest.raises(io.FormatError):
            io.read_distance_matrix(tmp_path / "d.txt")

    def test_bad_rows(self, tmp_path):
        (tmp_path / "d.txt").write_text("2\n0 1\n1\n")
        with pytest.raises(io.FormatError):
            io.read_distance_matrix(tmp_path / "d.txt")

    def test_point_map_labels(self, tmp_path):
        X = path_graph_metric([0, 1, 3])
        (tmp_path / "f.txt").write_text("0 1.0\n1 2.0\n7 3.0\n")
        with pytest.raises(io.FormatError):
            io.read_point_map(tmp_path / "f.txt", X)

    def test_csv_infinity(self, tmp_path):
        io.write_csv(tmp_path / "t.csv", "distances", ["p", "d"], [((0.0, 1.0), math.inf)])
        cols, rows = io.read_csv(tmp_path / "t.csv", "distances")
        assert cols == ["p", "d"] and rows == [["0.0 1.0", "infinity"]]

    def test_json_infinity(self):
        assert json.loads(io.dumps_json({"m": INFINITY, "x": np.float64(0.5)})) == {"m": "infinity", "x": 0.5}


class TestConfig:
    def test_ccdist_defaults(self):
        cfg = parse_config({"model": "heisenberg"}, "ccdist")
        assert cfg.params["h"] == 1 / 32 and cfg.params["radius"] == 2 and cfg.params["m"] == INFINITY
        assert cfg.seed == 0

    def test_fraction_and_infinity(self):
        cfg = parse_config({"model": "grushin", "h": "1/16", "m": "infinity"}, "ccdist")
        assert cfg.params["h"] == 1 / 16 and cfg.params["m"] == INFINITY

    def test_negative_epsilon(self, three_points):
        with pytest.raises(ConfigError):
            parse_config({"input": str(three_points), "epsilon": -0.5}, "pull")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="foo"):
            parse_config({"model": "heisenberg", "foo": 1}, "ccdist")

    def test_flag_not_applicable(self):
        with pytest.raises(ConfigError):
            parse_config({}, "collapse", {"norm": "sup"})

    def test_command_from_file(self):
        assert parse_config({"command": "collapse"}).command == "collapse"
        with pytest.raises(ConfigError):
            parse_config({"command": "collapse"}, "ccdist")

    def test_tube_preconditions(self):
        with pytest.raises(ConfigError):
            parse_config({"delta": 0.2, "eta": 0.1}, "verify-tube")

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            parse_config({}, "collapse", seed=2**64)


class TestRun:
    def test_ccdist_matches_module(self, tmp_path, capsys):
        code, out, _ = run_cli(["ccdist", "--resolution", "1/8", "--output", tmp_path], capsys)
        assert code == 0
        rep = json.loads(out)
        S = model_catalog("heisenberg", default_grid("heisenberg", 1 / 8))
        expected = cc_distance(S, ApproximantSchedule.for_structure(S), (0, 0, 0), (0, 0, 1))
        assert rep["metrics"]["distances"] == [expected]
        cols, rows = io.read_csv(tmp_path / "distances.csv", "distances")
        assert cols == ["p", "q", "m", "distance"]
        assert float(rows[0][3]) == expected and rows[0][2] == "infinity"
        assert json.loads((tmp_path / "report.json").read_text())["pass"] is True

    def test_embed_three_points(self, three_points, tmp_path, capsys):
        code, out, _ = run_cli(["embed", "--config", self._cfg(tmp_path, input=str(three_points)),
                                "--output", tmp_path / "out"], capsys)
        assert code == 0
        f = io.read_point_map(tmp_path / "out" / "pointmap.txt", path_graph_metric([0, 1, 3]))
        assert len({tuple(r) for r in f.image}) == 3
        assert json.loads(out)["metrics"]["delta_final"] == 0.0

    def test_pull_unreachable(self, three_points, tmp_path, capsys):
        code, _, err = run_cli(["pull", "--config", self._cfg(tmp_path, input=str(three_points)),
                                "--epsilon", "0.5"], capsys)
        assert code == 1
        msg = json.loads(err.strip())
        assert msg["error"] == "UnreachableError" and "\n" not in err.strip()

    def test_pull_identity(self, three_points, tmp_path, capsys):
        code, out, _ = run_cli(["pull", "--config", self._cfg(tmp_path, input=str(three_points)),
                                "--epsilon", "2", "--output", tmp_path / "o"], capsys)
        assert code == 0
        _, rows = io.read_csv(tmp_path / "o" / "pull.csv", "pull")
        assert [float(r[3]) for r in rows] == [1.0, 3.0, 2.0]

    def test_defect_threshold_fails(self, tmp_path, capsys):
        code, out, _ = run_cli(["defect", "--config", self._cfg(tmp_path, max_defect=0.1)], capsys)
        assert code == 2
        rep = json.loads(out)
        assert rep["pass"] is False and rep["metrics"]["defect"] >= 0.16

    def test_path_defect(self, three_points, tmp_path, capsys):
        X = path_graph_metric([0, 1, 3])
        io.write_point_map(tmp_path / "f.txt", PointMap(X, [0.0, 2.0, 6.0]))
        code, out, _ = run_cli(["defect", "--config", self._cfg(
            tmp_path, kind="path", input=str(three_points), map=str(tmp_path / "f.txt"), curves=10)], capsys)
        assert code == 0
        assert json.loads(out)["metrics"]["defect"] == pytest.approx(1.0, rel=1e-12)

    def test_collapse(self, tmp_path, capsys):
        code, out, _ = run_cli(["collapse", "--output", tmp_path], capsys)
        assert code == 0
        m = json.loads(out)["metrics"]
        assert m["nonincreasing"] and len(m["ratios"]) == 2

    def test_unknown_key_exit(self, tmp_path, capsys):
        code, _, err = run_cli(["ccdist", "--config", self._cfg(tmp_path, foo=1)], capsys)
        assert code == 1 and "foo" in json.loads(err)["message"]

    def test_malformed_yaml(self, tmp_path, capsys):
        p = tmp_path / "bad.yaml"
        p.write_text("model: [heisenberg\n")
        code, _, err = run_cli(["ccdist", "--config", p], capsys)
        assert code == 1 and json.loads(err)["error"] == "ConfigError"

    def test_missing_input(self, tmp_path, capsys):
        code, _, err = run_cli(["embed", "--config", self._cfg(tmp_path, input=str(tmp_path / "nope.txt"))], capsys)
        assert code == 1

    def test_deterministic_outputs(self, tmp_path, capsys):
        X = FiniteMetricSpace.from_points(np.random.default_rng(4).uniform(size=(25, 2)))
        io.write_distance_matrix(tmp_path / "x.txt", X)
        cfg = self._cfg(tmp_path, input=str(tmp_path / "x.txt"))
        for out in ("a", "b"):
            assert run_cli(["embed", "--config", cfg, "--seed", "7", "--output", tmp_path / out], capsys)[0] == 0
        assert (tmp_path / "a" / "pointmap.txt").read_bytes() == (tmp_path / "b" / "pointmap.txt").read_bytes()
        ra = json.loads((tmp_path / "a" / "report.json").read_text())
        rb = json.loads((tmp_path / "b" / "report.json").read_text())
        ra.pop("duration"), rb.pop("duration")
        ra["config"].pop("output"), rb["config"].pop("output")
        assert ra == rb

    def test_verify_tube_segment(self, tmp_path, capsys):
        code, out, _ = run_cli(["verify-tube", "--config", self._cfg(tmp_path, model="segment", density=0.05,
                                                                     pairs=20)], capsys)
        assert code == 0 and json.loads(out)["metrics"]["pairs_tested"] == 20

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "metricgeom", "defect", "--norm", "euclidean"],
                           capture_output=True, text=True, check=False)
        assert r.returncode == 0
        assert json.loads(r.stdout)["metrics"]["defect"] <= 1e-9

    @staticmethod
    def _cfg(tmp_path, **kw):
        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump(kw))
        return p
