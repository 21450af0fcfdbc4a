"""Binary capture container (`RCUB`), timestamps, and ground-truth alignment.

File layout (all little-endian):

    offset  size  field
    0       4     magic b"RCUB"
    4       2     version (u16), currently 1
    6       8     config digest (first 8 bytes of sha256 of the config text)
    14      4     frame_count (u32)
    18      1     sample encoding (u8): 0 = int16 interleaved IQ, 1 = float32 complex
    19      ...   frames, chirp-major then sample then antenna

int16 mode stores each complex sample as (I: i16, Q: i16) scaled by 2**15;
values outside [-1, 1) clip. float32 mode stores (re: f32, im: f32) and
round-trips complex64 cubes bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np

from uavradar.radar import DataCube, RadarConfig, config_to_text

MAGIC = b"RCUB"
VERSION = 1
ENC_INT16 = 0
ENC_FLOAT32 = 1
_HEADER = struct.Struct("<4sH8sIB")


class CaptureFormatError(ValueError):
    """Structured parse failure; `offset` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def config_digest(cfg: RadarConfig) -> bytes:
    return hashlib.sha256(config_to_text(cfg).encode()).digest()[:8]


@dataclass(frozen=True)
class RawCaptureHeader:
    version: int
    digest: bytes
    frame_count: int
    encoding: int


def _frame_nbytes(cfg: RadarConfig, encoding: int) -> int:
    n = cfg.chirps_per_frame * cfg.samples_per_chirp * 12
    return n * (4 if encoding == ENC_INT16 else 8)


def write_capture(path, cubes, cfg: RadarConfig, encoding: int = ENC_FLOAT32,
                  n_frames: int | None = None) -> int:
    """Write cubes to an RCUB file; returns the number of frames written.

    `cubes` may be any iterable; pass `n_frames` to stream without
    materializing the whole sequence.
    """
    if n_frames is None:
        cubes = list(cubes)
        n_frames = len(cubes)
    written = 0
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, config_digest(cfg), n_frames, encoding))
        for cube in cubes:
            cube.validate(cfg)
            flat = np.ascontiguousarray(cube.samples, dtype=np.complex64).ravel()
            if encoding == ENC_INT16:
                scaled = np.clip(np.round(flat.view(np.float32) * 32768.0), -32768, 32767)
                f.write(scaled.astype("<i2").tobytes())
            elif encoding == ENC_FLOAT32:
                f.write(flat.astype("<c8").tobytes())
            else:
                raise ValueError(f"unknown encoding {encoding}")
            written += 1
    if written != n_frames:
        raise ValueError(f"frame count mismatch: header says {n_frames}, wrote {written}")
    return written


def read_header(data: bytes) -> RawCaptureHeader:
    if len(data) < _HEADER.size:
        raise CaptureFormatError(f"file too short for header ({len(data)} bytes)", 0)
    magic, version, digest, frame_count, encoding = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CaptureFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise CaptureFormatError(f"unsupported version {version}", 4)
    if encoding not in (ENC_INT16, ENC_FLOAT32):
        raise CaptureFormatError(f"unknown sample encoding {encoding}", 18)
    return RawCaptureHeader(version, digest, frame_count, encoding)


def parse_capture(data: bytes, cfg: RadarConfig, start_time: float = 0.0):
    """Iterate DataCubes out of RCUB bytes.

    Pull-based: frames decode lazily. Raises CaptureFormatError naming the
    offending byte offset (and frame) on truncation, and checks that the
    total length matches the header's frame count up front.
    """
    header = read_header(data)
    if header.digest != config_digest(cfg):
        raise CaptureFormatError("config digest mismatch: file was recorded "
                                 "with a different radar config", 6)
    per_frame = _frame_nbytes(cfg, header.encoding)
    expected = _HEADER.size + header.frame_count * per_frame
    if len(data) != expected:
        frame = (len(data) - _HEADER.size) // per_frame if len(data) >= _HEADER.size else 0
        raise CaptureFormatError(
            f"truncated capture: expected {expected} bytes, got {len(data)} "
            f"(breaks inside frame {frame})", len(data))

    def frames():
        shape = (cfg.chirps_per_frame, cfg.samples_per_chirp, 12)
        for i in range(header.frame_count):
            off = _HEADER.size + i * per_frame
            raw = data[off:off + per_frame]
            if header.encoding == ENC_INT16:
                iq = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
                samples = (iq[0::2] + 1j * iq[1::2]).astype(np.complex64).reshape(shape)
            else:
                samples = np.frombuffer(raw, dtype="<c8").reshape(shape)
            yield DataCube(samples=samples, frame_index=i,
                           timestamp=start_time + i * cfg.frame_period)

    return frames()


def extrapolate_timestamps(start_time: float, frame_period: float, n_frames: int) -> np.ndarray:
    """t_i = start_time + i * frame_period for i in [0, n_frames)."""
    if frame_period <= 0:
        raise ValueError("frame_period must be positive")
    return start_time + np.arange(n_frames) * frame_period


def align_ground_truth(frame_times, gt_times, gt_positions):
    """Linearly interpolate ground-truth positions at each frame time.

    Frames outside the ground-truth time span are dropped. Returns
    (kept_frame_indices, positions (k, 3), dropped_count).
    """
    frame_times = np.asarray(frame_times, dtype=float)
    gt_times = np.asarray(gt_times, dtype=float)
    gt_positions = np.asarray(gt_positions, dtype=float)
    if len(gt_times) < 2:
        raise ValueError("need at least 2 ground-truth samples to interpolate")
    if np.any(np.diff(gt_times) <= 0):
        raise ValueError("ground-truth times must be strictly increasing")
    keep = (frame_times >= gt_times[0]) & (frame_times <= gt_times[-1])
    kept = np.nonzero(keep)[0]
    out = np.column_stack([
        np.interp(frame_times[kept], gt_times, gt_positions[:, k]) for k in range(3)
    ])
    return kept, out, int(len(frame_times) - len(kept))


# --- dataset directory: config.txt + gt.csv + frames.rcube ------------------

GT_HEADER = ["frame_index", "t", "x", "y", "z"]


def write_gt_csv(path, rows) -> None:
    """rows: iterable of (frame_index, t, x, y, z)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(GT_HEADER)
        for r in rows:
            w.writerow([int(r[0])] + [repr(float(v)) for v in r[1:]])


def read_gt_csv(path) -> np.ndarray:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != GT_HEADER:
            raise ValueError(f"bad gt.csv header {header}, expected {GT_HEADER}")
        rows = [[float(v) for v in row] for row in reader]
    return np.asarray(rows, dtype=float).reshape(-1, 5)


def write_dataset(path, cubes, gt_rows, cfg: RadarConfig,
                  encoding: int = ENC_FLOAT32, n_frames: int | None = None) -> None:
    """Write a dataset directory: config.txt, gt.csv, frames.rcube."""
    import os

    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config.txt"), "w") as f:
        f.write(config_to_text(cfg))
    write_gt_csv(os.path.join(path, "gt.csv"), gt_rows)
    write_capture(os.path.join(path, "frames.rcube"), cubes, cfg, encoding, n_frames)


def read_dataset(path):
    """Read a dataset directory; returns (cfg, frame iterator, gt array)."""
    import os

    from uavradar.radar import load_config

    cfg = load_config(os.path.join(path, "config.txt"))
    gt = read_gt_csv(os.path.join(path, "gt.csv"))
    with open(os.path.join(path, "frames.rcube"), "rb") as f:
        data = f.read()
    start = float(gt[0, 1]) if len(gt) else 0.0
    return cfg, parse_capture(data, cfg, start_time=start), gt


class DiskSequence:
    """Frame source over a dataset directory, mirroring SimSequence."""

    def __init__(self, path, sequence_id=None, layout=None):
        import os

        from uavradar.radar import default_layout, load_config

        self.path = path
        self.cfg = load_config(os.path.join(path, "config.txt"))
        self.layout = layout or default_layout(self.cfg)
        self.gt = read_gt_csv(os.path.join(path, "gt.csv"))
        self.sequence_id = sequence_id if sequence_id is not None else os.path.basename(
            os.path.normpath(path))

    def __len__(self):
        return len(self.gt)

    def frames(self, indices=None):
        with open(f"{self.path}/frames.rcube", "rb") as f:
            data = f.read()
        start = float(self.gt[0, 1]) if len(self.gt) else 0.0
        wanted = set(indices) if indices is not None else None
        for cube in parse_capture(data, self.cfg, start_time=start):
            if wanted is None or cube.frame_index in wanted:
                yield cube

    def ground_truth(self) -> np.ndarray:
        return self.gt
