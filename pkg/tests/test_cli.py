import json
import os

import numpy as np
import pytest

from uavradar.bench import read_estimates_csv
from uavradar.cli import main


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "seq"
    assert main(["simulate", "--seed", "3", "--duration", "1.0",
                 "--out", str(out)]) == 0
    return out


class TestSimulate:
    def test_bench_writes_all_sequences(self, tmp_path, capsys):
        out = tmp_path / "bench"
        code, stdout, _ = run_cli(["simulate", "--bench", "sim-bench-v1",
                                   "--duration", "0.2", "--out", str(out),
                                   "--json"], capsys)
        assert code == 0
        dirs = sorted(os.listdir(out))
        assert dirs == [f"seq{i:02d}" for i in range(10)]
        summary = json.loads(stdout)
        assert summary["sequences"] == 10
        assert summary["drone_scatterers"] == 9

    def test_deterministic(self, tmp_path, capsys):
        for name in ("a", "b"):
            code, _, _ = run_cli(["simulate", "--seed", "3", "--duration", "0.5",
                                  "--out", str(tmp_path / name)], capsys)
            assert code == 0
        for fname in ("config.txt", "gt.csv", "frames.rcube"):
            assert (tmp_path / "a" / fname).read_bytes() == \
                   (tmp_path / "b" / fname).read_bytes()

    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--seed", "1"])
        assert exc.value.code == 2


class TestLocate:
    def test_row_count_and_schema(self, tiny_dataset, tmp_path, capsys):
        est = tmp_path / "est.csv"
        code, stdout, _ = run_cli(["locate", "--method", "fft3d",
                                   "--in", str(tiny_dataset),
                                   "--out", str(est), "--json"], capsys)
        assert code == 0
        rows = read_estimates_csv(est)
        assert len(rows) == 10
        assert all(r[3] in ("ok", "no_target") for r in rows)
        assert json.loads(stdout)["frames"] == 10

    def test_workers_accepted_for_music(self, tiny_dataset, tmp_path, capsys):
        est = tmp_path / "est.csv"
        code, _, _ = run_cli(["locate", "--method", "music2d",
                              "--in", str(tiny_dataset), "--out", str(est),
                              "--workers", "2"], capsys)
        assert code == 0
        assert len(read_estimates_csv(est)) == 10

    def test_unknown_method_exits_2_listing_valid(self, tiny_dataset, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["locate", "--method", "warp", "--in", str(tiny_dataset),
                  "--out", str(tmp_path / "x.csv")])
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "music3d" in err and "pointcloud" in err

    def test_missing_dataset_is_runtime_error(self, tmp_path, capsys):
        code, _, err = run_cli(["locate", "--method", "fft2d",
                                "--in", str(tmp_path / "nope"),
                                "--out", str(tmp_path / "x.csv")], capsys)
        assert code == 1
        assert "locate" in err


class TestBench:
    def test_two_method_report(self, tiny_dataset, tmp_path, capsys):
        out = tmp_path / "rep"
        code, stdout, _ = run_cli(["bench", "--in", str(tiny_dataset),
                                   "--out", str(out), "--method", "fft2d",
                                   "--method", "fft3d", "--json"], capsys)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert sorted(report["methods"]) == ["fft2d", "fft3d"]
        assert sorted(json.loads(stdout)["methods"]) == ["fft2d", "fft3d"]


class TestExport:
    def test_heatmap_count_arithmetic(self, tiny_dataset, tmp_path, capsys):
        out = tmp_path / "htmp"
        code, stdout, _ = run_cli(["export", "--in", str(tiny_dataset),
                                   "--out", str(out), "--chirps", "16",
                                   "--json"], capsys)
        assert code == 0
        summary = json.loads(stdout)
        assert summary["heatmaps_per_record"] == 96
        assert summary["records"] == 10
        assert (out / "manifest.csv").exists()

    def test_idempotent(self, tiny_dataset, tmp_path, capsys):
        outs = []
        for name in ("m", "n"):
            out = tmp_path / name
            run_cli(["export", "--in", str(tiny_dataset), "--out", str(out),
                     "--chirps", "2"], capsys)
            outs.append((out / "seqseq.htmp").read_bytes())
        assert outs[0] == outs[1]
