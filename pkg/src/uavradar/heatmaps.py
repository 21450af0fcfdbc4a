"""Per-chirp range-angle heatmaps and their binary training-set export.

Each chirp of a (clutter-removed) frame yields 6 heatmaps of shape
[256 range bins][180 angle bins]: one range-azimuth map per azimuth
sub-array (2) and one range-elevation map per vertical pair (4). Maps are
magnitudes, max-normalized per map to [0, 1]; an all-zero map passes
through unchanged.

HTMP record format (little-endian), concatenated per file:

    offset  size  field
    0       4     magic b"HTMP"
    4       2     version (u16), currently 1
    6       8     dims: n_maps u16, rows u16, cols u16, chirps u16
    14      ...   float32 data, C-order over [chirps][n_maps][rows][cols]
    ...     24    label: 3 x float64 (x, y, z)

The manifest is a CSV of (record_index, file_offset, frame_index,
sequence_id); records for sequence S live in `seq<S>.htmp`.
"""

from __future__ import annotations

import csv
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

from uavradar.dsp import clutter_removal, range_fft
from uavradar.radar import DataCube, RadarConfig, VirtualArrayLayout

logger = logging.getLogger(__name__)

MAGIC = b"HTMP"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHH")
N_MAPS = 6
MAP_ROWS = 256
MAP_COLS = 180


@dataclass
class ChirpHeatmaps:
    """2 range-azimuth + 4 range-elevation maps for one chirp of one frame."""

    azimuth_maps: np.ndarray  # (2, rows, cols)
    elevation_maps: np.ndarray  # (4, rows, cols)
    chirp_index: int
    frame_index: int

    def stacked(self) -> np.ndarray:
        """(6, rows, cols): azimuth maps first, then elevation maps."""
        return np.concatenate([self.azimuth_maps, self.elevation_maps], axis=0)


def _normalize(m: np.ndarray) -> np.ndarray:
    peak = m.max()
    return m / peak if peak > 0 else m


def chirp_heatmaps(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                   chirp_index: int, nfft_range: int = MAP_ROWS,
                   nfft_angle: int = MAP_COLS,
                   profiles: np.ndarray | None = None) -> ChirpHeatmaps:
    """Heatmaps for one chirp; frame-level clutter removal is applied first.

    Pass precomputed clutter-removed `profiles` to amortize the range FFT
    across the chirps of a frame.
    """
    if chirp_index < 0 or chirp_index >= cube.samples.shape[0]:
        raise ValueError(f"chirp {chirp_index} out of range")
    if profiles is None:
        profiles = clutter_removal(range_fft(cube, nfft_range))
    p = profiles[chirp_index]  # (nfft_range, 12)

    az = np.empty((2, nfft_range, nfft_angle))
    for i, row in enumerate(layout.azimuth_rows):
        spec = np.fft.fftshift(np.fft.fft(p[:, list(row)], n=nfft_angle, axis=1), axes=1)
        az[i] = _normalize(np.abs(spec))
    el = np.empty((4, nfft_range, nfft_angle))
    for j, (lo, hi) in enumerate(layout.elevation_pairs):
        spec = np.fft.fftshift(np.fft.fft(p[:, [lo, hi]], n=nfft_angle, axis=1), axes=1)
        el[j] = _normalize(np.abs(spec))
    return ChirpHeatmaps(azimuth_maps=az, elevation_maps=el,
                         chirp_index=chirp_index, frame_index=cube.frame_index)


def select_chirps(nc: int, chirps_per_sample: int) -> np.ndarray:
    """Uniformly subsampled chirp indices: 0, Nc/k, 2*Nc/k, ..."""
    if chirps_per_sample < 1 or chirps_per_sample > nc:
        raise ValueError("chirps_per_sample must be in [1, Nc]")
    return np.arange(chirps_per_sample) * (nc // chirps_per_sample)


def frame_record(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                 chirps_per_sample: int = 16) -> np.ndarray:
    """(chirps, 6, rows, cols) float32 heatmap stack for one frame."""
    profiles = clutter_removal(range_fft(cube, MAP_ROWS))
    chirps = select_chirps(cube.samples.shape[0], chirps_per_sample)
    out = np.empty((len(chirps), N_MAPS, MAP_ROWS, MAP_COLS), dtype=np.float32)
    for k, ci in enumerate(chirps):
        hm = chirp_heatmaps(cube, cfg, layout, int(ci), profiles=profiles)
        out[k] = hm.stacked().astype(np.float32)
    return out


def write_record(f, heatmaps: np.ndarray, label) -> int:
    """Append one record; returns its byte offset in the file."""
    heatmaps = np.ascontiguousarray(heatmaps, dtype=np.float32)
    chirps, n_maps, rows, cols = heatmaps.shape
    offset = f.tell()
    f.write(_HEADER.pack(MAGIC, VERSION, n_maps, rows, cols, chirps))
    f.write(heatmaps.astype("<f4").tobytes())
    f.write(np.asarray(label, dtype="<f8").tobytes())
    return offset


def read_record(f, offset: int | None = None):
    """Read one record at `offset` (or the current position).

    Returns (heatmaps float32 (chirps, n_maps, rows, cols), label float64 (3,)).
    """
    if offset is not None:
        f.seek(offset)
    head = f.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise ValueError(f"truncated record header at offset {f.tell() - len(head)}")
    magic, version, n_maps, rows, cols, chirps = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ValueError(f"bad record magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported record version {version}")
    count = chirps * n_maps * rows * cols
    data = np.frombuffer(f.read(count * 4), dtype="<f4", count=count)
    label = np.frombuffer(f.read(24), dtype="<f8", count=3)
    return data.reshape(chirps, n_maps, rows, cols), label


MANIFEST_HEADER = ["record_index", "file_offset", "frame_index", "sequence_id"]


def export_training_set(sequences, out_dir, chirps_per_sample: int = 16,
                        frame_stride: int = 1) -> int:
    """Export heatmap records plus a manifest for a list of sequences.

    Each sequence must expose cfg, layout, sequence_id, frames() and
    ground_truth(); frames lacking a ground-truth row are skipped with a
    log entry. Returns the number of records written.
    """
    os.makedirs(out_dir, exist_ok=True)
    record_index = 0
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as mf:
        manifest = csv.writer(mf)
        manifest.writerow(MANIFEST_HEADER)
        for seq in sequences:
            gt = {int(row[0]): row[2:5] for row in seq.ground_truth()}
            path = os.path.join(out_dir, f"seq{seq.sequence_id}.htmp")
            with open(path, "wb") as f:
                for cube in seq.frames():
                    if cube.frame_index % frame_stride != 0:
                        continue
                    if cube.frame_index not in gt:
                        logger.warning("frame %d of sequence %s has no ground truth; skipped",
                                       cube.frame_index, seq.sequence_id)
                        continue
                    rec = frame_record(cube, seq.cfg, seq.layout, chirps_per_sample)
                    offset = write_record(f, rec, gt[cube.frame_index])
                    manifest.writerow([record_index, offset, cube.frame_index,
                                       seq.sequence_id])
                    record_index += 1
    return record_index


def read_manifest(path) -> list:
    """Manifest rows as dicts with int fields."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != MANIFEST_HEADER:
            raise ValueError(f"bad manifest header {header}")
        return [dict(zip(MANIFEST_HEADER, map(int, row))) for row in reader]


def dump_tensor(path, array: np.ndarray, label=(0.0, 0.0, 0.0)) -> None:
    """Write any array as a single HTMP record (debug/plot interchange).

    Arrays with fewer than 4 dims gain leading singleton axes.
    """
    arr = np.asarray(array, dtype=np.float32)
    while arr.ndim < 4:
        arr = arr[None]
    if arr.ndim != 4:
        raise ValueError("tensor dump supports up to 4 dims")
    with open(path, "wb") as f:
        write_record(f, arr, label)


def load_tensor(path):
    """Read back a single-record tensor file; returns (array, label)."""
    with open(path, "rb") as f:
        return read_record(f, 0)
