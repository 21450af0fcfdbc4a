import numpy as np
import pytest

from uavradar.capture import (
    ENC_FLOAT32,
    ENC_INT16,
    CaptureFormatError,
    align_ground_truth,
    config_digest,
    extrapolate_timestamps,
    parse_capture,
    read_gt_csv,
    read_header,
    write_capture,
    write_gt_csv,
)
from uavradar.radar import DataCube, RadarConfig


@pytest.fixture
def small_cfg():
    return RadarConfig(samples_per_chirp=16, chirps_per_frame=4,
                       chirp_period=60e-6, frame_period=0.1)


def random_cubes(cfg, n, seed=0, scale=0.5):
    # int16 mode clips outside [-1, 1), so keep test samples strictly inside
    rng = np.random.default_rng(seed)
    shape = (cfg.chirps_per_frame, cfg.samples_per_chirp, 12)
    return [DataCube(samples=(rng.uniform(-scale, scale, shape)
                              + 1j * rng.uniform(-scale, scale, shape)).astype(np.complex64),
                     frame_index=i, timestamp=i * cfg.frame_period)
            for i in range(n)]


class TestRoundTrips:
    def test_float32_bit_exact(self, tmp_path, small_cfg):
        cubes = random_cubes(small_cfg, 3)
        path = tmp_path / "c.rcube"
        write_capture(path, cubes, small_cfg, ENC_FLOAT32)
        back = list(parse_capture(path.read_bytes(), small_cfg))
        assert len(back) == 3
        for orig, parsed in zip(cubes, back):
            assert np.array_equal(orig.samples, parsed.samples)

    def test_int16_quantization_bound(self, tmp_path, small_cfg):
        cubes = random_cubes(small_cfg, 2, scale=0.9)
        path = tmp_path / "c.rcube"
        write_capture(path, cubes, small_cfg, ENC_INT16)
        back = list(parse_capture(path.read_bytes(), small_cfg))
        for orig, parsed in zip(cubes, back):
            err = np.abs(orig.samples - parsed.samples).max()
            assert err <= 2.0 ** -15

    def test_frame_indices_and_timestamps(self, tmp_path, small_cfg):
        cubes = random_cubes(small_cfg, 4)
        path = tmp_path / "c.rcube"
        write_capture(path, cubes, small_cfg)
        back = list(parse_capture(path.read_bytes(), small_cfg, start_time=1.5))
        assert [c.frame_index for c in back] == [0, 1, 2, 3]
        assert back[2].timestamp == pytest.approx(1.5 + 2 * small_cfg.frame_period)


class TestFormatErrors:
    def test_bad_magic_at_offset_zero(self, small_cfg):
        with pytest.raises(CaptureFormatError) as exc:
            read_header(b"JUNK" + b"\x00" * 32)
        assert exc.value.offset == 0

    def test_truncation_names_frame_and_offset(self, tmp_path, small_cfg):
        cubes = random_cubes(small_cfg, 3)
        path = tmp_path / "c.rcube"
        write_capture(path, cubes, small_cfg)
        data = path.read_bytes()
        cut = data[: len(data) - 100]  # breaks inside frame 2
        with pytest.raises(CaptureFormatError, match="frame 2") as exc:
            parse_capture(cut, small_cfg)
        assert exc.value.offset == len(cut)

    def test_config_digest_mismatch(self, tmp_path, small_cfg):
        cubes = random_cubes(small_cfg, 1)
        path = tmp_path / "c.rcube"
        write_capture(path, cubes, small_cfg)
        other = RadarConfig()
        assert config_digest(other) != config_digest(small_cfg)
        with pytest.raises(CaptureFormatError, match="digest"):
            parse_capture(path.read_bytes(), other)

    def test_unknown_encoding(self, small_cfg):
        import struct

        head = struct.pack("<4sH8sIB", b"RCUB", 1, b"\x00" * 8, 0, 7)
        with pytest.raises(CaptureFormatError) as exc:
            read_header(head)
        assert exc.value.offset == 18


class TestTimestamps:
    def test_basic_extrapolation(self):
        assert np.allclose(extrapolate_timestamps(0.0, 0.1, 3), [0.0, 0.1, 0.2])

    def test_empty(self):
        assert extrapolate_timestamps(5.0, 0.1, 0).size == 0

    def test_last_frame_of_a_minute(self):
        # oracle: 100.05 + 599 * 0.1
        ts = extrapolate_timestamps(100.05, 0.1, 600)
        assert ts[599] == pytest.approx(159.95, abs=1e-9)

    def test_bad_period(self):
        with pytest.raises(ValueError):
            extrapolate_timestamps(0.0, 0.0, 5)


class TestAlignment:
    def test_exact_sample_hit(self):
        gt_t = np.array([0.0, 1.0, 2.0])
        gt_p = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2]], dtype=float)
        kept, pos, dropped = align_ground_truth([1.0], gt_t, gt_p)
        assert dropped == 0
        assert np.allclose(pos[0], [1, 1, 1])

    def test_midpoint_interpolation(self):
        gt_t = np.array([0.0, 1.0])
        gt_p = np.array([[0, 0, 0], [1, 1, 1]], dtype=float)
        _, pos, _ = align_ground_truth([0.5], gt_t, gt_p)
        assert np.allclose(pos[0], [0.5, 0.5, 0.5])

    def test_out_of_span_dropped(self):
        gt_t = np.array([1.0, 2.0])
        gt_p = np.zeros((2, 3))
        kept, pos, dropped = align_ground_truth([0.5, 1.5, 2.5], gt_t, gt_p)
        assert dropped == 2
        assert list(kept) == [1]

    def test_monotone_intervals(self):
        rng = np.random.default_rng(0)
        gt_t = np.cumsum(rng.uniform(0.05, 0.2, 50))
        gt_p = rng.standard_normal((50, 3))
        frames = np.sort(rng.uniform(gt_t[0], gt_t[-1], 30))
        _, pos, _ = align_ground_truth(frames, gt_t, gt_p)
        idx = np.searchsorted(gt_t, frames)
        assert np.all(np.diff(idx) >= 0)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            align_ground_truth([0.5], np.array([1.0]), np.zeros((1, 3)))


class TestGtCsv:
    def test_round_trip(self, tmp_path):
        rows = [(0, 0.0, 1.25, 2.5, -0.125), (1, 0.1, 1.3, 2.4, 0.0)]
        path = tmp_path / "gt.csv"
        write_gt_csv(path, rows)
        back = read_gt_csv(path)
        assert np.array_equal(back, np.asarray(rows))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="header"):
            read_gt_csv(path)
