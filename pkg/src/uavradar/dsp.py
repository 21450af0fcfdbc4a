"""Classical FFT-based processing: range/Doppler/angle transforms, clutter
removal, CFAR detection, and the point-cloud / 2D-FFT / 3D-FFT localizers.

Conventions:
  * range profiles are complex arrays [chirp][range_bin][antenna];
  * the range-Doppler map is fftshifted so bin Nc/2 is zero velocity;
  * map values are noncoherently integrated power (sum of |.|^2 over the
    12 antennas), which is what the CA-CFAR threshold theory assumes;
  * angle spectra use `nfft` bins uniform in sine space; bin k maps to
    inter-element phase 2*pi*(k - nfft/2)/nfft.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal.windows import hann

from uavradar.cluster import dbscan, largest_cluster
from uavradar.radar import (
    DataCube,
    PositionEstimate,
    RadarConfig,
    VirtualArrayLayout,
    freq_to_range,
    phase_to_angle,
    phase_to_velocity,
    spherical_to_cart,
)


class NoTargetError(RuntimeError):
    """Raised when a frame yields no usable detection/peak."""


def angle_bin_omegas(nfft: int = 180) -> np.ndarray:
    """Inter-element phases [rad] of the fftshifted angle-FFT bins."""
    return 2.0 * math.pi * np.fft.fftshift(np.fft.fftfreq(nfft))


def range_axis(cfg: RadarConfig, nfft: int) -> np.ndarray:
    """Range [m] of each range-FFT bin: freq_to_range(k * fs / nfft)."""
    freqs = np.arange(nfft) * cfg.adc_sample_rate / nfft
    return freqs * (freq_to_range(1.0, cfg))


def range_fft(cube: DataCube, nfft: int = 256) -> np.ndarray:
    """Hann-windowed, zero-padded FFT along the sample axis.

    Returns complex profiles of shape [Nc, nfft, 12]. nfft must be at least
    the number of samples per chirp.
    """
    samples = np.asarray(cube.samples)
    nc, ns, nva = samples.shape
    if nfft < ns:
        raise ValueError(f"nfft={nfft} smaller than samples per chirp {ns}")
    window = hann(ns, sym=False)
    return np.fft.fft(samples * window[None, :, None], n=nfft, axis=1)


def clutter_removal(profiles: np.ndarray) -> np.ndarray:
    """Null static returns: subtract the per-(range bin, antenna) chirp mean."""
    if profiles.shape[0] < 2:
        raise ValueError("clutter removal needs at least 2 chirps")
    return profiles - profiles.mean(axis=0, keepdims=True)


@dataclass
class RangeDopplerMap:
    """Detection statistic plus the complex per-antenna source for AoA lookup."""

    values: np.ndarray  # (Nc, Nr) noncoherent power
    source: np.ndarray | None  # (Nc, Nr, 12) complex, post Doppler FFT
    cfg: RadarConfig

    @classmethod
    def from_values(cls, values, cfg: RadarConfig) -> "RangeDopplerMap":
        """Wrap a bare statistic map (no per-antenna source), e.g. for tests."""
        return cls(values=np.asarray(values, dtype=float), source=None, cfg=cfg)


def doppler_fft(profiles: np.ndarray, cfg: RadarConfig) -> RangeDopplerMap:
    """Hann-windowed FFT along the chirp axis, fftshifted so bin Nc/2 is
    zero velocity.

    The map statistic is the power summed noncoherently across antennas;
    the chirp window keeps strong targets from spraying Doppler sidelobes
    across the CFAR threshold.
    """
    window = hann(profiles.shape[0], sym=False)
    spec = np.fft.fftshift(np.fft.fft(profiles * window[:, None, None], axis=0), axes=0)
    values = np.square(np.abs(spec)).sum(axis=2)
    return RangeDopplerMap(values=values, source=spec, cfg=cfg)


def doppler_bin_to_velocity(bin_index: int, nc: int, cfg: RadarConfig) -> float:
    """Radial velocity [m/s] of an fftshifted Doppler bin."""
    omega = 2.0 * math.pi * (bin_index - nc // 2) / nc
    return phase_to_velocity(omega, cfg)


@dataclass(frozen=True)
class Detection:
    range_bin: int
    doppler_bin: int
    range: float
    radial_velocity: float
    snr: float  # dB over the local CFAR noise estimate


def cfar_2d(rd_map: RangeDopplerMap, guard=(2, 2), train=(4, 8),
            pfa: float = 1e-3) -> list:
    """Cell-averaging CFAR over the range-Doppler map.

    A cell fires when value > alpha * mean(training cells), with
    alpha = N * (pfa**(-1/N) - 1) for N training cells; this holds the
    false-alarm probability at `pfa` for exponentially distributed cell
    power. Windows clamp at the map edges (N and alpha are per-cell).
    Detections are returned sorted by SNR, descending.
    """
    values = np.asarray(rd_map.values, dtype=float)
    if values.ndim != 2:
        raise ValueError("expected a 2-D map")
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must be in (0, 1)")
    h, w = values.shape
    g0, g1 = guard
    t0, t1 = train
    if t0 < 1 and t1 < 1:
        raise ValueError("need at least one training cell extent")

    pad = np.zeros((h + 1, w + 1))
    pad[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)

    def box(half0, half1):
        i = np.arange(h)[:, None]
        j = np.arange(w)[None, :]
        r0 = np.clip(i - half0, 0, h)
        r1 = np.clip(i + half0 + 1, 0, h)
        c0 = np.clip(j - half1, 0, w)
        c1 = np.clip(j + half1 + 1, 0, w)
        total = pad[r1, c1] - pad[r0, c1] - pad[r1, c0] + pad[r0, c0]
        count = (r1 - r0) * (c1 - c0)
        return total, count

    outer_sum, outer_n = box(g0 + t0, g1 + t1)
    guard_sum, guard_n = box(g0, g1)
    train_sum = outer_sum - guard_sum
    n_train = outer_n - guard_n
    alpha = n_train * (pfa ** (-1.0 / n_train) - 1.0)
    threshold = alpha * train_sum / n_train
    hits = values > threshold

    out = []
    nc = values.shape[0]
    for i, j in zip(*np.nonzero(hits)):
        noise = train_sum[i, j] / n_train[i, j]
        snr = 10.0 * math.log10(values[i, j] / noise) if noise > 0 else math.inf
        out.append(Detection(
            range_bin=int(j),
            doppler_bin=int(i),
            range=freq_to_range(j * rd_map.cfg.adc_sample_rate / w, rd_map.cfg),
            radial_velocity=doppler_bin_to_velocity(int(i), nc, rd_map.cfg),
            snr=snr,
        ))
    out.sort(key=lambda d: (-d.snr, d.doppler_bin, d.range_bin))
    return out


def aoa_fft(snapshot: np.ndarray, layout: VirtualArrayLayout, cfg: RadarConfig,
            nfft: int = 180) -> tuple:
    """(azimuth, elevation) [rad] from the 12 complex values at one cell.

    Elevation comes from the circular mean of the 4 vertical-pair phase
    differences. Azimuth comes from the peak of the zero-padded FFT over
    the 8-element aperture, after phase-aligning the upper row using the
    elevation estimate.
    """
    snapshot = np.asarray(snapshot)
    if snapshot.shape != (12,):
        raise ValueError("snapshot must hold 12 complex values")
    if not np.any(snapshot):
        raise ValueError("all-zero snapshot: angle undefined")

    pairs = layout.elevation_pairs
    z = sum(snapshot[hi] * np.conj(snapshot[lo]) for lo, hi in pairs)
    omega_el = float(np.angle(z))
    elevation = phase_to_angle(omega_el, layout.spacing, cfg)

    aperture = list(layout.azimuth_aperture)
    vec = snapshot[aperture].astype(complex).copy()
    zs = np.array([layout.positions[i][1] for i in aperture])
    vec *= np.exp(-1j * omega_el * zs)  # undo the z-offset phase of the upper row
    spectrum = np.fft.fftshift(np.fft.fft(vec, n=nfft))
    k = int(np.argmax(np.abs(spectrum)))
    omega_az = float(angle_bin_omegas(nfft)[k])
    azimuth = phase_to_angle(omega_az, layout.spacing, cfg)
    return azimuth, elevation


@dataclass
class PointCloud:
    """Sparse 3-D points: columns (x, y, z, radial_velocity, intensity)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 5)

    def __len__(self):
        return len(self.points)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]


def detections_to_point_cloud(detections, rd_map: RangeDopplerMap,
                              layout: VirtualArrayLayout) -> PointCloud:
    """Lift CFAR detections to 3-D via per-detection angle estimation."""
    if rd_map.source is None:
        raise ValueError("range-Doppler map carries no per-antenna source")
    rows = []
    for det in detections:
        snapshot = rd_map.source[det.doppler_bin, det.range_bin, :]
        if not np.any(snapshot):
            continue
        az, el = aoa_fft(snapshot, layout, rd_map.cfg)
        x, y, z = spherical_to_cart(det.range, az, el)
        rows.append([x, y, z, det.radial_velocity,
                     float(rd_map.values[det.doppler_bin, det.range_bin])])
    return PointCloud(points=np.asarray(rows, dtype=float).reshape(-1, 5))


def locate_point_cloud(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                       dbscan_eps: float = 0.25, dbscan_min_pts: int = 3,
                       nfft_range: int = 256, cfar_pfa: float = 1e-3) -> PositionEstimate:
    """Full point-cloud pipeline: CFAR detections -> 3-D points -> DBSCAN ->
    centroid of the largest cluster.

    Raises NoTargetError when CFAR finds nothing or no cluster forms.
    """
    profiles = clutter_removal(range_fft(cube, nfft_range))
    rd = doppler_fft(profiles, cfg)
    detections = cfar_2d(rd, pfa=cfar_pfa)
    if not detections:
        raise NoTargetError(f"frame {cube.frame_index}: no CFAR detections")
    cloud = detections_to_point_cloud(detections, rd, layout)
    if len(cloud) == 0:
        raise NoTargetError(f"frame {cube.frame_index}: no usable detections")
    labels = dbscan(cloud.xyz, eps=dbscan_eps, min_pts=dbscan_min_pts)
    members = largest_cluster(cloud.xyz, labels)
    if members.size == 0:
        raise NoTargetError(f"frame {cube.frame_index}: no cluster "
                            f"({len(cloud)} isolated points)")
    centroid = cloud.xyz[members].mean(axis=0)
    return PositionEstimate(*centroid, timestamp=cube.timestamp)


def _argmax_with_tiebreak(power: np.ndarray, rel_db: float = 0.1) -> tuple:
    """Deterministic peak pick: when several separate peaks lie within
    `rel_db` of the maximum (an ambiguous double-peak), the one with the
    lowest range bin, then lowest angle bin(s), wins.

    Only local maxima compete, so the rule never walks down the mainlobe
    of a single smooth peak.
    """
    peak = float(power.max())
    if peak <= 0:
        raise NoTargetError("degenerate map: no positive peak")
    candidates = np.argwhere(power >= peak * 10.0 ** (-rel_db / 10.0))
    candidates = candidates[np.lexsort(candidates.T[::-1])]
    shape = power.shape
    offsets = np.array(np.meshgrid(*([[-1, 0, 1]] * power.ndim), indexing="ij"))
    offsets = offsets.reshape(power.ndim, -1).T
    for cand in candidates:
        value = power[tuple(cand)]
        neighbors = np.clip(cand[None, :] + offsets, 0, np.array(shape) - 1)
        if all(power[tuple(nb)] <= value for nb in neighbors):
            return tuple(int(v) for v in cand)
    return tuple(int(v) for v in candidates[0])


def _first_chirp_profile(cube: DataCube, nfft_range: int) -> np.ndarray:
    """Chirp 0 of the clutter-removed range profiles, shape (nfft, 12)."""
    return clutter_removal(range_fft(cube, nfft_range))[0]


def azimuth_heatmap(profile: np.ndarray, layout: VirtualArrayLayout,
                    nfft_angle: int = 180) -> np.ndarray:
    """Range-azimuth power map from the 8-element aperture (z offsets ignored)."""
    aperture = list(layout.azimuth_aperture)
    spectrum = np.fft.fftshift(np.fft.fft(profile[:, aperture], n=nfft_angle, axis=1), axes=1)
    return np.square(np.abs(spectrum))


def elevation_heatmap(profile: np.ndarray, layout: VirtualArrayLayout,
                      nfft_angle: int = 180) -> np.ndarray:
    """Range-elevation power map from the vertical pairs (x phases ignored).

    The pair columns are summed coherently across x (a boresight-azimuth
    assumption) and the two z rows are zero-padded into the angle FFT. Off
    boresight this decoheres; that is the documented weakness of treating
    the two 2-D heatmaps independently.
    """
    lo = profile[:, [p[0] for p in layout.elevation_pairs]].sum(axis=1)
    hi = profile[:, [p[1] for p in layout.elevation_pairs]].sum(axis=1)
    stacked = np.stack([lo, hi], axis=1)
    spectrum = np.fft.fftshift(np.fft.fft(stacked, n=nfft_angle, axis=1), axes=1)
    return np.square(np.abs(spectrum))


def locate_fft_2d(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                  nfft_range: int = 256, nfft_angle: int = 180) -> PositionEstimate:
    """2-D FFT localizer: independent range-azimuth and range-elevation maps.

    Range and azimuth come from the global peak of the azimuth map;
    elevation from the elevation map at that same range bin. The two maps
    are never cross-checked, so a wrong peak in either produces a large
    3-D error.
    """
    profile = _first_chirp_profile(cube, nfft_range)
    az_map = azimuth_heatmap(profile, layout, nfft_angle)
    el_map = elevation_heatmap(profile, layout, nfft_angle)
    omegas = angle_bin_omegas(nfft_angle)

    r_bin, az_bin = _argmax_with_tiebreak(az_map)
    (el_bin,) = _argmax_with_tiebreak(el_map[r_bin][None, :])[1:]
    r = range_axis(cfg, nfft_range)[r_bin]
    azimuth = phase_to_angle(float(omegas[az_bin]), layout.spacing, cfg)
    elevation = phase_to_angle(float(omegas[el_bin]), layout.spacing, cfg)
    return PositionEstimate(*spherical_to_cart(r, azimuth, elevation),
                            timestamp=cube.timestamp)


def joint_heatmap_3d(profile: np.ndarray, layout: VirtualArrayLayout,
                     nfft_angle: int = 180) -> np.ndarray:
    """Joint (range, azimuth-sine, elevation-sine) power from all 12 antennas.

    Computed as the zero-filled planar-array FFT: elements occupy an 8 x 2
    (x, z) grid with 4 slots empty, so the separable FFT equals steered
    beamforming on the full sine-space grid.
    """
    nr = profile.shape[0]
    grid = np.zeros((nr, 8, 2), dtype=complex)
    for v, (x, z) in enumerate(layout.positions):
        grid[:, int(round(x)), int(round(z))] += profile[:, v]
    fx = np.fft.fftshift(np.fft.fft(grid, n=nfft_angle, axis=1), axes=1)
    phase = np.exp(-1j * angle_bin_omegas(nfft_angle))
    joint = fx[:, :, 0][:, :, None] + fx[:, :, 1][:, :, None] * phase[None, None, :]
    return np.square(np.abs(joint))


def locate_fft_3d(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                  nfft_range: int = 256, nfft_angle: int = 180) -> PositionEstimate:
    """3-D FFT localizer: global peak of the joint range x angle x angle map.

    The peak's sine-space coordinates are direction cosines, so the
    position inversion is exact: u_x and u_z read off the angle bins and
    u_y completes the unit vector.
    """
    profile = _first_chirp_profile(cube, nfft_range)
    joint = joint_heatmap_3d(profile, layout, nfft_angle)
    r_bin, az_bin, el_bin = _argmax_with_tiebreak(joint)

    omegas = angle_bin_omegas(nfft_angle)
    scale = cfg.wavelength / (2.0 * math.pi * layout.spacing)
    ux = float(omegas[az_bin]) * scale
    uz = float(omegas[el_bin]) * scale
    uy = math.sqrt(max(0.0, 1.0 - ux * ux - uz * uz))
    r = range_axis(cfg, nfft_range)[r_bin]
    return PositionEstimate(r * ux, r * uy, r * uz, timestamp=cube.timestamp)


def detections_to_csv(path, detections_by_frame) -> None:
    """Write (frame, range_bin, doppler_bin, range_m, velocity_mps, snr_db) rows."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "range_bin", "doppler_bin", "range_m",
                    "velocity_mps", "snr_db"])
        for frame, dets in detections_by_frame:
            for d in dets:
                w.writerow([frame, d.range_bin, d.doppler_bin,
                            f"{d.range:.6f}", f"{d.radial_velocity:.6f}",
                            f"{d.snr:.3f}"])
