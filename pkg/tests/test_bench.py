import json
import math

import numpy as np
import pytest

from uavradar.bench import (
    ErrorReport,
    RuntimeReport,
    error_stats,
    error_vs_distance,
    make_pipelines,
    read_estimates_csv,
    run_benchmark,
    write_estimates_csv,
)
from uavradar.simulate import SimSequence, sim_bench_scene


class TestErrorStats:
    def test_three_four_five(self):
        gt = {0: (0, 1, 0), 1: (0, 1, 0), 2: (0, 1, 0)}
        est = {0: (0.03, 1, 0), 1: (0, 1.04, 0), 2: (0, 1, -0.05)}
        report = error_stats(est, gt)
        assert report.mean == pytest.approx(4.0)
        assert report.std == pytest.approx(0.816496580927726)  # population
        assert report.max == pytest.approx(5.0)
        assert report.min == pytest.approx(3.0)
        assert report.min <= report.mean <= report.max

    def test_perfect_estimates(self):
        gt = {i: (0.5, 2.0, 0.1) for i in range(4)}
        report = error_stats({i: (0.5, 2.0, 0.1) for i in range(4)}, gt)
        assert report.mean == 0.0 and report.max == 0.0

    def test_dropped_counted_and_excluded(self):
        gt = {0: (0, 2, 0), 1: (0, 2, 0), 2: (0, 2, 0)}
        est = {0: (0, 2.1, 0), 1: None, 2: (0, 1.9, 0)}
        report = error_stats(est, gt)
        assert report.dropped_frames == 1
        assert len(report.errors_cm) == 2

    def test_no_matches_rejected(self):
        with pytest.raises(ValueError):
            error_stats({5: (0, 0, 0)}, {0: (0, 1, 0)})

    def test_cdf_monotone_and_bounded(self):
        rng = np.random.default_rng(0)
        gt = {i: (0, 2, 0) for i in range(50)}
        est = {i: (0, 2 + rng.uniform(-0.2, 0.2), 0) for i in range(50)}
        cdf = error_stats(est, gt).cdf
        assert np.all(np.diff(cdf[:, 0]) >= 0)
        assert np.all(np.diff(cdf[:, 1]) > 0)
        assert cdf[-1, 1] == 1.0
        assert cdf[0, 1] == pytest.approx(1 / 50)


class TestErrorVsDistance:
    def test_single_bin(self):
        out = error_vs_distance([5.0, 7.0], [2.05, 2.06])
        assert len(out) == 1
        center, mean, count = out[0]
        assert center == pytest.approx(2.05)
        assert mean == pytest.approx(6.0)
        assert count == 2

    def test_flat_curve_for_uniform_errors(self):
        ranges = np.linspace(1.2, 3.7, 60)
        out = error_vs_distance(np.full(60, 4.0), ranges)
        assert all(mean == pytest.approx(4.0) for _, mean, _ in out)

    def test_reweighted_means_recover_overall_mean(self):
        rng = np.random.default_rng(1)
        errors = rng.uniform(1, 40, 200)
        ranges = rng.uniform(1.0, 4.0, 200)
        out = error_vs_distance(errors, ranges)
        total = sum(mean * count for _, mean, count in out)
        n = sum(count for _, _, count in out)
        assert total / n == pytest.approx(errors.mean(), rel=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            error_vs_distance([], [])


class TestRuntimeReport:
    def test_validation(self):
        RuntimeReport(method="fft2d", mean_ms=1.0, workers=2)
        with pytest.raises(ValueError):
            RuntimeReport(method="fft2d", mean_ms=0.0)


@pytest.fixture(scope="module")
def result_dir(tmp_path_factory, cfg, layout):
    seq = SimSequence(sim_bench_scene(0, duration=1.5, cfg=cfg), cfg, layout, 0)
    out = tmp_path_factory.mktemp("bench")
    pipelines = make_pipelines(cfg, layout, methods=("fft2d", "fft3d"))
    result = run_benchmark([seq], pipelines, out_dir=out, warmup=2)
    return result, out


class TestRunBenchmark:
    def test_reports_present(self, result_dir):
        result, _ = result_dir
        assert set(result.error_reports) == {"fft2d", "fft3d"}
        assert set(result.runtime_reports) == {"fft2d", "fft3d"}
        assert result.runtime_reports["fft3d"].mean_ms > 0

    def test_artifacts_written(self, result_dir):
        _, out = result_dir
        report = json.loads((out / "report.json").read_text())
        assert set(report["methods"]) == {"fft2d", "fft3d"}
        for name in ("fft2d", "fft3d"):
            entry = report["methods"][name]
            assert entry["min_cm"] <= entry["mean_cm"] <= entry["max_cm"]
            assert (out / f"cdf_{name}.csv").exists()
            assert (out / f"err_vs_dist_{name}.csv").exists()

    def test_deterministic_errors(self, cfg, layout):
        seq = SimSequence(sim_bench_scene(1, duration=0.8, cfg=cfg), cfg, layout, 1)
        pipes = make_pipelines(cfg, layout, methods=("fft3d",))
        a = run_benchmark([seq], pipes, warmup=0).error_reports["fft3d"]
        b = run_benchmark([seq], pipes, warmup=0).error_reports["fft3d"]
        assert np.array_equal(a.errors_cm, b.errors_cm)

    def test_unknown_method_rejected(self, cfg, layout):
        with pytest.raises(ValueError, match="unknown"):
            make_pipelines(cfg, layout, methods=("warp",))


class TestEstimatesCsv:
    def test_round_trip_with_carry_forward(self, tmp_path):
        rows = [
            (0, 0.0, (1.0, 2.0, 0.5), "ok"),
            (1, 0.1, None, "no_target"),
            (2, 0.2, (1.1, 2.1, 0.4), "ok"),
        ]
        path = tmp_path / "est.csv"
        write_estimates_csv(path, rows)
        back = read_estimates_csv(path)
        assert back[0] == (0, 0.0, (1.0, 2.0, 0.5), "ok")
        # no-target frame carries the last estimate forward, flagged
        assert back[1] == (1, 0.1, (1.0, 2.0, 0.5), "no_target")
        assert back[2][3] == "ok"
