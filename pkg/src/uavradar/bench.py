"""Evaluation protocol: error statistics, CDF, error-vs-distance curves and
per-frame runtime comparison across the localization pipelines.

Frames where a pipeline raises NoTargetError (or any per-frame failure)
are counted as dropped and excluded from the error statistics; the bench
carries the last good estimate forward in the per-frame CSV and flags it.
Runtime is wall-clock per frame, excluding frame synthesis/input, with
the first `warmup` calls per pipeline discarded.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from uavradar import dsp, music
from uavradar.radar import PositionEstimate, RadarConfig, VirtualArrayLayout

METHOD_NAMES = ("pointcloud", "fft2d", "fft3d", "music2d", "music3d")


def make_pipelines(cfg: RadarConfig, layout: VirtualArrayLayout,
                   methods=METHOD_NAMES, workers: int = 1,
                   grid: music.SweepGrid | None = None,
                   music_samples: int = music.DEFAULT_SAMPLES_PER_SNAPSHOT) -> dict:
    """Name -> callable(DataCube) -> PositionEstimate for each method."""
    grid = grid or music.SweepGrid()
    table = {
        "pointcloud": lambda cube: dsp.locate_point_cloud(cube, cfg, layout),
        "fft2d": lambda cube: dsp.locate_fft_2d(cube, cfg, layout),
        "fft3d": lambda cube: dsp.locate_fft_3d(cube, cfg, layout),
        "music2d": lambda cube: music.locate_music_2d(
            cube, cfg, layout, grid, workers=workers, n_samples=music_samples),
        "music3d": lambda cube: music.locate_music_3d(
            cube, cfg, layout, grid, workers=workers, n_samples=music_samples),
    }
    unknown = set(methods) - set(table)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; valid: {sorted(table)}")
    return {m: table[m] for m in methods}


@dataclass
class ErrorReport:
    """Per-frame 3-D Euclidean errors [cm] and their summaries."""

    errors_cm: np.ndarray
    gt_ranges_m: np.ndarray
    dropped_frames: int

    @property
    def mean(self) -> float:
        return float(self.errors_cm.mean())

    @property
    def std(self) -> float:
        return float(self.errors_cm.std())  # population std

    @property
    def max(self) -> float:
        return float(self.errors_cm.max())

    @property
    def min(self) -> float:
        return float(self.errors_cm.min())

    @property
    def cdf(self) -> np.ndarray:
        """(n, 2) sorted (error_cm, fraction <= error) pairs, ending at 1.0."""
        e = np.sort(self.errors_cm)
        return np.column_stack([e, np.arange(1, len(e) + 1) / len(e)])

    @property
    def by_distance(self) -> list:
        return error_vs_distance(self.errors_cm, self.gt_ranges_m)

    def summary(self) -> dict:
        return {"mean_cm": self.mean, "std_cm": self.std, "max_cm": self.max,
                "min_cm": self.min, "frames": int(len(self.errors_cm)),
                "dropped_frames": int(self.dropped_frames)}


@dataclass
class RuntimeReport:
    method: str
    mean_ms: float
    workers: int = 1

    def __post_init__(self):
        if self.mean_ms <= 0 or self.workers < 1:
            raise ValueError("runtime and worker count must be positive")


def error_stats(estimates: dict, ground_truth: dict) -> ErrorReport:
    """Match estimates to ground truth by frame index.

    `estimates`: frame -> (x, y, z) or None for a no-target frame.
    `ground_truth`: frame -> (x, y, z). Matched frames whose estimate is
    None count as dropped and are excluded from the statistics.
    """
    errors, ranges = [], []
    dropped = 0
    matched = 0
    for frame, gt in ground_truth.items():
        if frame not in estimates:
            continue
        matched += 1
        est = estimates[frame]
        if est is None:
            dropped += 1
            continue
        gt = np.asarray(gt, dtype=float)
        errors.append(float(np.linalg.norm(np.asarray(est, dtype=float) - gt)) * 100.0)
        ranges.append(float(np.linalg.norm(gt)))
    if matched == 0:
        raise ValueError("no frames matched between estimates and ground truth")
    if not errors:
        raise ValueError("all matched frames were dropped; no errors to report")
    return ErrorReport(errors_cm=np.asarray(errors), gt_ranges_m=np.asarray(ranges),
                       dropped_frames=dropped)


def error_vs_distance(errors_cm, gt_ranges_m, step: float = 0.1) -> list:
    """Mean error per distance bin of width `step` [m]; empty bins omitted.

    Returns [(bin_center_m, mean_error_cm, count)], sorted by distance.
    """
    errors_cm = np.asarray(errors_cm, dtype=float)
    gt_ranges_m = np.asarray(gt_ranges_m, dtype=float)
    if errors_cm.size == 0:
        raise ValueError("no errors to bin")
    bins = np.floor(gt_ranges_m / step).astype(int)
    out = []
    for b in np.unique(bins):
        sel = bins == b
        out.append(((b + 0.5) * step, float(errors_cm[sel].mean()), int(sel.sum())))
    return out


@dataclass
class BenchResult:
    error_reports: dict = field(default_factory=dict)  # method -> ErrorReport
    runtime_reports: dict = field(default_factory=dict)  # method -> RuntimeReport
    estimates: dict = field(default_factory=dict)  # method -> {(seq, frame): xyz|None}


def run_benchmark(sequences, pipelines: dict, out_dir=None, frame_stride: int = 1,
                  warmup: int = 5, workers: int = 1) -> BenchResult:
    """Run every pipeline over every sequence and collect reports.

    One pipeline runs at a time so runtime comparisons are fair. Frames
    are subsampled by `frame_stride`. Writes report.json, cdf_<m>.csv and
    err_vs_dist_<m>.csv into `out_dir` when given.
    """
    result = BenchResult()
    for name, fn in pipelines.items():
        per_frame_ms = []
        calls = 0
        estimates, truth = {}, {}
        for seq in sequences:
            gt_rows = seq.ground_truth()
            indices = [int(r[0]) for r in gt_rows[::frame_stride]]
            gt_map = {int(r[0]): r[2:5] for r in gt_rows}
            for cube in seq.frames(indices):
                t0 = time.perf_counter()
                try:
                    est = fn(cube)
                    xyz = est.as_array()
                except (dsp.NoTargetError, ValueError):
                    xyz = None
                elapsed = time.perf_counter() - t0
                calls += 1
                if calls > warmup:
                    per_frame_ms.append(elapsed * 1e3)
                key = (seq.sequence_id, cube.frame_index)
                estimates[key] = xyz
                truth[key] = gt_map[cube.frame_index]
        result.estimates[name] = estimates
        result.error_reports[name] = error_stats(estimates, truth)
        mean_ms = float(np.mean(per_frame_ms)) if per_frame_ms else float("nan")
        result.runtime_reports[name] = RuntimeReport(method=name, mean_ms=mean_ms,
                                                     workers=workers)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


def write_artifacts(result: BenchResult, out_dir) -> None:
    """Emit report.json plus per-method CDF and error-vs-distance CSVs."""
    os.makedirs(out_dir, exist_ok=True)
    report = {"methods": {}}
    for name, er in result.error_reports.items():
        rt = result.runtime_reports.get(name)
        entry = er.summary()
        if rt is not None and math.isfinite(rt.mean_ms):
            entry["runtime_ms_mean"] = rt.mean_ms
            entry["workers"] = rt.workers
        report["methods"][name] = entry
        with open(os.path.join(out_dir, f"cdf_{name}.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["error_cm", "fraction"])
            w.writerows(er.cdf.tolist())
        with open(os.path.join(out_dir, f"err_vs_dist_{name}.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["bin_center_m", "mean_error_cm", "count"])
            w.writerows(er.by_distance)
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)


ESTIMATE_HEADER = ["frame", "t", "x", "y", "z", "status"]


def write_estimates_csv(path, rows) -> None:
    """rows: (frame, t, xyz or None, status). No-target frames carry the
    last good estimate forward, flagged by status."""
    last = (float("nan"),) * 3
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(ESTIMATE_HEADER)
        for frame, t, xyz, status in rows:
            if xyz is not None:
                last = tuple(float(v) for v in xyz)
            w.writerow([int(frame), repr(float(t))] + [repr(v) for v in last] + [status])


def read_estimates_csv(path) -> list:
    """Rows back as (frame, t, (x, y, z), status)."""
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ESTIMATE_HEADER:
            raise ValueError(f"bad estimates header {header}")
        for row in reader:
            out.append((int(row[0]), float(row[1]),
                        tuple(float(v) for v in row[2:5]), row[5]))
    return out
