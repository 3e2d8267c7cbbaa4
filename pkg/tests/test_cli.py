import csv

import numpy as np
import pytest
from click.testing import CliRunner

from harpia.cli import main
from harpia.volume import Volume, load_volume, save_volume


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def volume_path(tmp_path, rng):
    data = rng.integers(0, 256, size=(16, 12, 12), dtype=np.uint8)
    path = tmp_path / "in.vol"
    save_volume(Volume(data), path)
    return path, data


class TestRun:
    def test_identity_roundtrip(self, runner, tmp_path, volume_path):
        path, data = volume_path
        out = tmp_path / "out.vol"
        result = runner.invoke(main, ["run", "identity", str(path), str(out)])
        assert result.exit_code == 0, result.output
        assert np.array_equal(load_volume(out).data, data)

    def test_unknown_op_exit_2(self, runner, tmp_path, volume_path):
        path, _ = volume_path
        result = runner.invoke(main, ["run", "bogus", str(path), str(tmp_path / "o.vol")])
        assert result.exit_code == 2

    def test_bad_param_exit_2(self, runner, tmp_path, volume_path):
        path, _ = volume_path
        result = runner.invoke(
            main,
            ["run", "gaussian", str(path), str(tmp_path / "o.vol"), "--param", "sigma"],
        )
        assert result.exit_code == 2

    def test_missing_input_exit_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["run", "identity", str(tmp_path / "nope.vol"), str(tmp_path / "o.vol")]
        )
        assert result.exit_code == 2

    def test_too_small_budget_exit_1(self, runner, tmp_path, volume_path):
        path, _ = volume_path
        result = runner.invoke(
            main,
            [
                "run", "median", str(path), str(tmp_path / "o.vol"),
                "--param", "radius=3", "--budget-bytes", "64",
            ],
        )
        assert result.exit_code == 1

    def test_plan_dump(self, runner, tmp_path, volume_path):
        path, _ = volume_path
        result = runner.invoke(
            main,
            [
                "run", "mean", str(path), str(tmp_path / "o.vol"),
                "--param", "radius=1", "--plan",
                "--budget-bytes", str(12 * 12 * 8 * 12), "--fraction", "1.0",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "chunks=" in result.output

    def test_gaussian_matches_library_path(self, runner, tmp_path, volume_path):
        from harpia.registry import run_operator

        path, data = volume_path
        out = tmp_path / "g.vol"
        result = runner.invoke(
            main, ["run", "gaussian", str(path), str(out), "--param", "sigma=1.0"]
        )
        assert result.exit_code == 0, result.output
        expected, _ = run_operator(data, "gaussian", {"sigma": 1.0})
        assert np.array_equal(load_volume(out).data, expected)


class TestSubcommands:
    def test_threshold_otsu(self, runner, tmp_path, volume_path):
        path, data = volume_path
        out = tmp_path / "t.vol"
        result = runner.invoke(main, ["threshold", "otsu", str(path), str(out)])
        assert result.exit_code == 0, result.output
        labels = load_volume(out).data
        assert set(np.unique(labels)) <= {0, 1}

    def test_threshold_local(self, runner, tmp_path, volume_path):
        path, _ = volume_path
        out = tmp_path / "t.vol"
        result = runner.invoke(
            main,
            ["threshold", "local", str(path), str(out), "--kind", "niblack", "--window", "2"],
        )
        assert result.exit_code == 0, result.output

    def test_morph(self, runner, tmp_path, volume_path):
        path, data = volume_path
        out = tmp_path / "m.vol"
        result = runner.invoke(
            main, ["morph", "erode", str(path), str(out), "--se", "ball:1"]
        )
        assert result.exit_code == 0, result.output
        assert (load_volume(out).data <= data).all()

    def test_watershed(self, runner, tmp_path, rng):
        landscape = rng.random((4, 8, 8)).astype(np.float32)
        markers = np.zeros((4, 8, 8), dtype=np.uint16)
        markers[:, 1, 1] = 1
        markers[:, 6, 6] = 2
        lp = tmp_path / "land.vol"
        mp = tmp_path / "mark.vol"
        save_volume(Volume(landscape), lp)
        save_volume(Volume(markers), mp)
        out = tmp_path / "ws.vol"
        result = runner.invoke(
            main, ["watershed", "--landscape", str(lp), "--markers", str(mp), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        labels = load_volume(out).data
        assert set(np.unique(labels)) == {1, 2}

    def test_crop(self, runner, tmp_path, volume_path):
        path, data = volume_path
        out = tmp_path / "c.vol"
        result = runner.invoke(main, ["crop", str(path), str(out), "--z", "2:6"])
        assert result.exit_code == 0, result.output
        assert np.array_equal(load_volume(out).data, data[2:6])

    def test_crop_bad_range_exit_2(self, runner, tmp_path, volume_path):
        path, _ = volume_path
        result = runner.invoke(main, ["crop", str(path), str(tmp_path / "c.vol"), "--z", "9"])
        assert result.exit_code == 2


class TestBench:
    def test_csv_schema_and_rows(self, runner, tmp_path):
        out = tmp_path / "bench.csv"
        result = runner.invoke(
            main,
            [
                "bench", "--op", "mean", "--param", "radius=1",
                "--ladder", "4,8", "--base-yx", "8", "--repeats", "2",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["size_bytes", "mean_s", "std_s", "peak_bytes", "residual_bytes"]
        assert len(rows) == 3
        assert int(rows[1][0]) == 4 * 8 * 8
        assert int(rows[2][0]) == 8 * 8 * 8
        assert all(int(r[4]) == 0 for r in rows[1:])

    def test_bad_ladder_exit_2(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["bench", "--op", "mean", "--ladder", "8,4", "--out", str(tmp_path / "b.csv")],
        )
        assert result.exit_code == 2

    def test_seeded_reproducible_sizes(self, runner, tmp_path):
        from harpia.bench import synthesize

        a = synthesize(8, 16, "uint8", 42)
        b = synthesize(8, 16, "uint8", 42)
        assert np.array_equal(a, b)
        c = synthesize(8, 16, "uint8", 43)
        assert not np.array_equal(a, c)
