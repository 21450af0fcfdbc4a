"""Subspace super-resolution localization over the paper-style sweep grids.

The pseudospectrum is the classic noise-subspace projection

    P(g) = 1 / (a(g)^H E E^H a(g)) = 1 / ||E^H a(g)||^2

with E the eigenvectors of the snapshot covariance belonging to its
smallest eigenvalues. Snapshots are the frame's chirps after static
clutter has been subtracted (chirp-mean removal in the time domain, the
FFT-linear image of profile-domain clutter removal). Steering vectors are
Kronecker products of a fast-time beat tone over a contiguous block of
ADC samples and the array phase vector, so range, azimuth and elevation
are swept jointly.

Grid-cell evaluation is embarrassingly parallel: `workers` splits the
grid into chunks evaluated concurrently with BLAS pinned to one thread,
so the worker count is the only parallelism knob.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from threadpoolctl import threadpool_limits

from uavradar.radar import (
    DataCube,
    PositionEstimate,
    RadarConfig,
    VirtualArrayLayout,
    azimuth_from_paper_deg,
    range_to_beat_freq,
    spherical_to_cart,
)

DEFAULT_SAMPLES_PER_SNAPSHOT = 6


def _default_ranges():
    return tuple(np.round(np.arange(1.0, 4.0 + 1e-9, 0.1), 6))


def _default_azimuths():
    return tuple(float(a) for a in range(30, 151))


def _default_elevations():
    return tuple(float(e) for e in range(-15, 16))


@dataclass(frozen=True)
class SweepGrid:
    """Search grid: ranges [m], azimuths [deg, 30..150], elevations [deg]."""

    ranges: tuple = field(default_factory=_default_ranges)
    azimuths: tuple = field(default_factory=_default_azimuths)
    elevations: tuple = field(default_factory=_default_elevations)

    def __post_init__(self):
        for name in ("ranges", "azimuths", "elevations"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.size == 0 or np.any(np.diff(vals) <= 0):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
        if self.ranges[0] <= 0:
            raise ValueError("ranges must be positive")
        if self.azimuths[0] < 0.0 or self.azimuths[-1] > 180.0:
            raise ValueError("azimuths leave the visible half-space")
        if self.elevations[0] < -90.0 or self.elevations[-1] > 90.0:
            raise ValueError("elevations leave the visible region")

    @property
    def shape(self) -> tuple:
        return (len(self.ranges), len(self.azimuths), len(self.elevations))


@dataclass
class CovarianceMatrix:
    """Hermitian snapshot covariance (1/K) sum x x^H."""

    values: np.ndarray
    snapshot_count: int

    def __post_init__(self):
        self.values = np.asarray(self.values)
        n, m = self.values.shape
        if n != m:
            raise ValueError("covariance must be square")

    def validate(self) -> None:
        """Check Hermitian symmetry and positive semidefiniteness."""
        v = self.values
        herm = np.abs(v - v.conj().T).max()
        if herm > 1e-12 * max(1.0, np.abs(v).max()):
            raise ValueError(f"covariance not Hermitian (asymmetry {herm:g})")
        eig = np.linalg.eigvalsh(v)
        tr = float(np.real(np.trace(v)))
        if eig[0] < -1e-9 * max(tr, 1.0):
            raise ValueError(f"covariance not PSD (min eigenvalue {eig[0]:g})")


def covariance(snapshots) -> CovarianceMatrix:
    """Sample covariance of row-vector snapshots, symmetrized exactly."""
    snapshots = np.asarray(snapshots)
    if snapshots.ndim != 2 or snapshots.shape[0] < 1:
        raise ValueError("need at least one snapshot of uniform length")
    k = snapshots.shape[0]
    cov = snapshots.T @ snapshots.conj() / k
    cov = (cov + cov.conj().T) / 2.0
    return CovarianceMatrix(values=cov, snapshot_count=k)


def regularize(cov: CovarianceMatrix, scale: float = 1e-6) -> CovarianceMatrix:
    """Add a trace-proportional ridge; eigenvectors (and spectra) unchanged."""
    n = cov.values.shape[0]
    ridge = scale * float(np.real(np.trace(cov.values)))
    return CovarianceMatrix(values=cov.values + ridge * np.eye(n), snapshot_count=cov.snapshot_count)


def noise_subspace(cov: CovarianceMatrix, n_sources: int) -> np.ndarray:
    """Orthonormal basis (n, n - n_sources) of the noise subspace."""
    n = cov.values.shape[0]
    if not 1 <= n_sources < n:
        raise ValueError(f"n_sources must be in [1, {n - 1}], got {n_sources}")
    _, vecs = np.linalg.eigh(cov.values)  # ascending eigenvalues
    return vecs[:, : n - n_sources]


def steering_vector(grid_point, cfg: RadarConfig, layout: VirtualArrayLayout,
                    mode: str = "angle-only", antennas=None,
                    n_samples: int = DEFAULT_SAMPLES_PER_SNAPSHOT) -> np.ndarray:
    """Steering vector for one grid point.

    angle-only: `grid_point` is (azimuth_rad, elevation_rad); returns the
    12-element (or `antennas`-subset) array phase vector.
    joint-range: `grid_point` is (range_m, azimuth_rad, elevation_rad);
    returns the Kronecker product of the beat tone over `n_samples`
    contiguous ADC samples with the array phase vector.
    """
    pos = layout.positions_m()
    idx = list(antennas) if antennas is not None else list(range(12))
    if mode == "angle-only":
        az, el = grid_point
    elif mode == "joint-range":
        r, az, el = grid_point
        if r <= 0:
            raise ValueError("range must be positive")
    else:
        raise ValueError(f"unknown steering mode {mode!r}")
    if abs(az) > math.pi / 2 or abs(el) > math.pi / 2:
        raise ValueError("grid point outside the visible region")
    ux = math.sin(az) * math.cos(el)
    uz = math.sin(el)
    proj = pos[idx, 0] * ux + pos[idx, 1] * uz
    va = np.exp(2j * math.pi * proj / cfg.wavelength)
    if mode == "angle-only":
        return va
    f_b = range_to_beat_freq(r, cfg)
    tone = np.exp(2j * math.pi * f_b * np.arange(n_samples) / cfg.adc_sample_rate)
    return np.kron(tone, va)


def music_snapshots(cube: DataCube, antennas, n_samples: int) -> np.ndarray:
    """Chirp snapshots: clutter-subtracted, first `n_samples` ADC samples,
    antenna subset, flattened sample-major. Shape (Nc, n_samples * len(antennas))."""
    samples = np.asarray(cube.samples, dtype=np.complex128)
    if samples.shape[0] < 2:
        raise ValueError("need at least 2 chirps for snapshots")
    data = samples - samples.mean(axis=0, keepdims=True)
    block = data[:, :n_samples, :][:, :, list(antennas)]
    return block.reshape(block.shape[0], -1)


def pseudospectrum(noise_basis: np.ndarray, steering: np.ndarray,
                   workers: int = 1) -> np.ndarray:
    """P = 1 / ||E^H a||^2 for each steering column; real and positive."""
    den = _projected_power(noise_basis, steering, workers)
    return 1.0 / np.maximum(den, np.finfo(float).tiny)


def _projected_power(noise_basis: np.ndarray, steering: np.ndarray,
                     workers: int = 1) -> np.ndarray:
    """||E^H a||^2 per steering column, chunked across workers."""
    eh = np.ascontiguousarray(noise_basis.conj().T)
    ncols = steering.shape[1]
    if workers <= 1:
        with threadpool_limits(limits=1):
            return np.square(np.abs(eh @ steering)).sum(axis=0)
    chunks = np.array_split(np.arange(ncols), workers * 4)
    out = np.empty(ncols)

    def run(chunk):
        with threadpool_limits(limits=1):
            out[chunk] = np.square(np.abs(eh @ steering[:, chunk])).sum(axis=0)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, [c for c in chunks if c.size]))
    return out


@lru_cache(maxsize=8)
def _steering_matrix_2d(cfg: RadarConfig, layout: VirtualArrayLayout, grid: SweepGrid,
                        axis: str, n_samples: int) -> np.ndarray:
    """Joint-range steering matrix for one 2-D sweep.

    axis="azimuth": (ranges x azimuths) over the 8-element azimuth aperture
    at zero elevation. axis="elevation": (ranges x elevations) over the
    elevation-pair elements at boresight azimuth.
    """
    if axis == "azimuth":
        idx = list(layout.azimuth_aperture)
        angles = [azimuth_from_paper_deg(a) for a in grid.azimuths]
        phases = [math.sin(a) for a in angles]
        coord = layout.positions_m()[idx, 0]
    elif axis == "elevation":
        idx = sorted({i for p in layout.elevation_pairs for i in p})
        phases = [math.sin(math.radians(e)) for e in grid.elevations]
        coord = layout.positions_m()[idx, 1]
    else:
        raise ValueError(axis)
    va = np.exp(2j * math.pi * np.outer(coord, phases) / cfg.wavelength)  # (nva, A)
    tones = _range_tones(cfg, grid.ranges, n_samples)  # (R, S)
    a = np.einsum("rs,vq->svrq", tones, va)
    return a.reshape(len(idx) * n_samples, -1)  # rows sample-major, cols r-major


def _azimuth_cosines(grid: SweepGrid, oversample: int) -> np.ndarray:
    """Azimuth sweep positions as direction cosines u_x = sin(azimuth).

    The azimuth axis is swept in u_x, decoupled from elevation, so the
    grid argmax selects the nearest cell independently per axis (coupled
    sin(az)*cos(el) steering lets azimuth quantization tip the shallow
    elevation axis onto second-nearest cells). `oversample` refines the
    spec sweep so the azimuth quantization stays well inside half of the
    reporting step.
    """
    lo, hi = grid.azimuths[0], grid.azimuths[-1]
    n = (len(grid.azimuths) - 1) * oversample + 1
    az_deg = np.linspace(lo, hi, n)
    return np.sin([azimuth_from_paper_deg(a) for a in az_deg])


@lru_cache(maxsize=4)
def _steering_matrix_3d(cfg: RadarConfig, layout: VirtualArrayLayout, grid: SweepGrid,
                        n_samples: int, az_oversample: int) -> np.ndarray:
    """Joint (range x azimuth-cosine x elevation) steering over all 12 antennas."""
    pos = layout.positions_m()
    ux = _azimuth_cosines(grid, az_oversample)
    uz = np.sin(np.radians(np.asarray(grid.elevations)))
    proj = (pos[:, 0][:, None, None] * ux[None, :, None]
            + pos[:, 1][:, None, None] * uz[None, None, :])
    va = np.exp(2j * math.pi * proj / cfg.wavelength).reshape(12, -1)  # (12, A*E)
    tones = _range_tones(cfg, grid.ranges, n_samples)  # (R, S)
    a = np.einsum("rs,vq->svrq", tones, va)
    return a.reshape(12 * n_samples, -1)  # cols ordered (r, ux, el) C-style


def _range_tones(cfg: RadarConfig, ranges, n_samples: int) -> np.ndarray:
    freqs = np.array([range_to_beat_freq(r, cfg) for r in ranges])
    n = np.arange(n_samples)
    return np.exp(2j * math.pi * np.outer(freqs, n) / cfg.adc_sample_rate)


def _prepare(cube: DataCube, antennas, n_samples: int, n_sources: int):
    """Snapshots -> (noise basis, regularized flag)."""
    snaps = music_snapshots(cube, antennas, n_samples)
    cov = covariance(snaps)
    regularized = cov.snapshot_count <= cov.values.shape[0]
    if regularized:
        cov = regularize(cov)
    return noise_subspace(cov, n_sources), regularized


def locate_music_2d(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                    grid: SweepGrid | None = None, n_sources: int = 1,
                    workers: int = 1, n_samples: int = DEFAULT_SAMPLES_PER_SNAPSHOT,
                    return_details: bool = False):
    """Two separate 2-D sweeps: range-azimuth on the azimuth aperture and
    range-elevation on the vertical pairs, combined like the 2-D FFT
    localizer (range and azimuth from the first sweep, elevation from the
    second at that range)."""
    if not np.any(cube.samples):
        raise ValueError("zero cube: no signal to localize")
    grid = grid or SweepGrid()
    az_idx = tuple(layout.azimuth_aperture)
    el_idx = tuple(sorted({i for p in layout.elevation_pairs for i in p}))

    e_az, reg_az = _prepare(cube, az_idx, n_samples, n_sources)
    e_el, reg_el = _prepare(cube, el_idx, n_samples, n_sources)
    a_az = _steering_matrix_2d(cfg, layout, grid, "azimuth", n_samples)
    a_el = _steering_matrix_2d(cfg, layout, grid, "elevation", n_samples)

    p_az = pseudospectrum(e_az, a_az, workers).reshape(len(grid.ranges), len(grid.azimuths))
    p_el = pseudospectrum(e_el, a_el, workers).reshape(len(grid.ranges), len(grid.elevations))

    ri, ai = np.unravel_index(int(np.argmax(p_az)), p_az.shape)
    ei = int(np.argmax(p_el[ri]))
    r = grid.ranges[ri]
    azimuth = azimuth_from_paper_deg(grid.azimuths[ai])
    elevation = math.radians(grid.elevations[ei])
    est = PositionEstimate(*spherical_to_cart(r, azimuth, elevation),
                           timestamp=cube.timestamp)
    if return_details:
        return est, {"regularized": reg_az or reg_el,
                     "azimuth_spectrum": p_az, "elevation_spectrum": p_el}
    return est


def locate_music_3d(cube: DataCube, cfg: RadarConfig, layout: VirtualArrayLayout,
                    grid: SweepGrid | None = None, n_sources: int = 1,
                    workers: int | None = None,
                    n_samples: int = DEFAULT_SAMPLES_PER_SNAPSHOT,
                    az_oversample: int = 2, return_details: bool = False):
    """Joint sweep over the full (range x azimuth x elevation) grid using
    all 12 antennas; the global pseudospectrum peak gives the position.

    The peak cell's steering direction is inverted exactly: elevation is
    the cell's angle, azimuth follows from its direction cosine via
    asin(u_x / cos(el)).
    """
    if not np.any(cube.samples):
        raise ValueError("zero cube: no signal to localize")
    import os

    grid = grid or SweepGrid()
    workers = workers if workers is not None else (os.cpu_count() or 1)
    e, reg = _prepare(cube, tuple(range(12)), n_samples, n_sources)
    a = _steering_matrix_3d(cfg, layout, grid, n_samples, az_oversample)
    ux = _azimuth_cosines(grid, az_oversample)
    shape = (len(grid.ranges), len(ux), len(grid.elevations))
    p = pseudospectrum(e, a, workers).reshape(shape)

    ri, ai, ei = np.unravel_index(int(np.argmax(p)), shape)
    r = grid.ranges[ri]
    elevation = math.radians(grid.elevations[ei])
    sin_az = min(1.0, max(-1.0, float(ux[ai]) / math.cos(elevation)))
    azimuth = math.asin(sin_az)
    est = PositionEstimate(*spherical_to_cart(r, azimuth, elevation),
                           timestamp=cube.timestamp)
    if return_details:
        return est, {"regularized": reg, "spectrum": p, "azimuth_cosines": ux}
    return est
