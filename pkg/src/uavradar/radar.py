"""Core FMCW radar types and the closed-form range/velocity/angle equations.

Everything downstream (simulator, FFT pipelines, MUSIC, heatmap export)
shares the three dechirped-IF relations implemented here:

    range:    d = f_if * c / (2 * S)
    velocity: v = lambda * dphi / (4 * pi * Tc)
    angle:    theta = asin(lambda * omega / (2 * pi * d))

All values are SI. Angles are boresight-zero signed radians internally;
use :func:`azimuth_to_paper_deg` / :func:`azimuth_from_paper_deg` for the
30..150 degree reporting convention. The radar frame is right-handed with
y forward, x right, z up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT


@dataclass(frozen=True)
class RadarConfig:
    """Chirp/frame/antenna parameters from which all resolutions derive.

    Attributes:
        carrier_freq: carrier frequency [Hz]
        chirp_slope: frequency slope S of the chirp [Hz/s]
        adc_sample_rate: IF sampling rate fs [Hz]
        samples_per_chirp: ADC samples per chirp, Ns
        chirps_per_frame: chirps per frame, Nc
        chirp_period: chirp repetition period Tc [s]
        frame_period: frame repetition period [s]
    """

    carrier_freq: float = 60.0e9
    chirp_slope: float = 60.0e12
    adc_sample_rate: float = 5.0e6
    samples_per_chirp: int = 256
    chirps_per_frame: int = 128
    chirp_period: float = 60.0e-6
    frame_period: float = 0.1

    def __post_init__(self):
        for name in ("carrier_freq", "chirp_slope", "adc_sample_rate",
                     "chirp_period", "frame_period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.samples_per_chirp < 2:
            raise ValueError("samples_per_chirp must be >= 2")
        if self.chirps_per_frame < 1:
            raise ValueError("chirps_per_frame must be >= 1")
        if self.chirp_period < self.samples_per_chirp / self.adc_sample_rate:
            raise ValueError("chirp_period shorter than the ADC acquisition window")
        if self.frame_period < self.chirps_per_frame * self.chirp_period:
            raise ValueError("frame_period shorter than the chirp train")

    @property
    def wavelength(self) -> float:
        """Carrier wavelength [m]."""
        return SPEED_OF_LIGHT / self.carrier_freq


@dataclass(frozen=True)
class DerivedParams:
    """Resolution/ambiguity limits implied by a RadarConfig."""

    range_resolution: float
    max_range: float
    velocity_resolution: float
    max_unambiguous_velocity: float


def freq_to_range(f_if: float, cfg: RadarConfig) -> float:
    """Convert an IF beat frequency [Hz] to target range [m].

    Raises ValueError for negative frequencies.
    """
    if f_if < 0:
        raise ValueError(f"IF frequency must be non-negative, got {f_if}")
    return f_if * SPEED_OF_LIGHT / (2.0 * cfg.chirp_slope)


def range_to_beat_freq(r: float, cfg: RadarConfig) -> float:
    """Inverse of :func:`freq_to_range`: beat frequency [Hz] of a target at r [m]."""
    if r < 0:
        raise ValueError(f"range must be non-negative, got {r}")
    return 2.0 * cfg.chirp_slope * r / SPEED_OF_LIGHT


def phase_to_velocity(delta_phi: float, cfg: RadarConfig) -> float:
    """Convert a chirp-to-chirp phase difference [rad] to radial velocity [m/s].

    Sign convention: positive velocity = target receding from the sensor.
    The input must already be wrapped to [-pi, pi]; aliased phases are the
    caller's problem.
    """
    if abs(delta_phi) > math.pi:
        raise ValueError(f"phase difference {delta_phi} outside [-pi, pi]")
    return cfg.wavelength * delta_phi / (4.0 * math.pi * cfg.chirp_period)


def velocity_to_phase(v: float, cfg: RadarConfig) -> float:
    """Inverse of :func:`phase_to_velocity` (unwrapped; may exceed pi)."""
    return 4.0 * math.pi * v * cfg.chirp_period / cfg.wavelength


def phase_to_angle(omega: float, spacing: float, cfg: RadarConfig) -> float:
    """Convert an inter-antenna phase difference [rad] to angle of arrival [rad].

    `spacing` is the physical separation of the antenna pair [m]. Zero phase
    maps to boresight. Raises ValueError when the implied sine leaves [-1, 1]
    (no physical direction in the visible region).
    """
    arg = cfg.wavelength * omega / (2.0 * math.pi * spacing)
    if abs(arg) > 1.0:
        raise ValueError(f"phase {omega} maps outside the visible region (sin={arg})")
    return math.asin(arg)


def angle_to_phase(theta: float, spacing: float, cfg: RadarConfig) -> float:
    """Inverse of :func:`phase_to_angle`."""
    return 2.0 * math.pi * spacing * math.sin(theta) / cfg.wavelength


def derived_params(cfg: RadarConfig) -> DerivedParams:
    """Resolution and ambiguity limits for a config.

    range_resolution uses the sampled bandwidth B = S * Ns / fs; max_range
    is the Nyquist limit freq_to_range(fs / 2).
    """
    bandwidth = cfg.chirp_slope * cfg.samples_per_chirp / cfg.adc_sample_rate
    return DerivedParams(
        range_resolution=SPEED_OF_LIGHT / (2.0 * bandwidth),
        max_range=freq_to_range(cfg.adc_sample_rate / 2.0, cfg),
        velocity_resolution=cfg.wavelength / (2.0 * cfg.chirps_per_frame * cfg.chirp_period),
        max_unambiguous_velocity=cfg.wavelength / (4.0 * cfg.chirp_period),
    )


@dataclass(frozen=True)
class VirtualArrayLayout:
    """Positions and sub-array structure of the 12-element virtual array.

    `positions` are (x, z) offsets in the antenna plane in units of the
    element spacing d (normally lambda/2). Two disjoint azimuth rows of 4
    elements each form, concatenated, an 8-element uniform aperture along x;
    the remaining 4 elements sit above azimuth row 0 and complete the 4
    vertical (elevation) pairs.
    """

    positions: tuple  # 12 (x, z) tuples, units of `spacing`
    azimuth_rows: tuple  # 2 tuples of 4 indices, uniform x spacing, common z
    elevation_pairs: tuple  # 4 (low, high) index pairs, common x, dz = 1
    spacing: float  # element spacing d [m]

    def __post_init__(self):
        if len(self.positions) != 12:
            raise ValueError("virtual array must have exactly 12 elements")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if len(self.azimuth_rows) != 2 or any(len(r) != 4 for r in self.azimuth_rows):
            raise ValueError("expected 2 azimuth rows of 4 elements")
        if len(self.elevation_pairs) != 4:
            raise ValueError("expected 4 elevation pairs")
        seen = set()
        for row in self.azimuth_rows:
            zs = {self.positions[i][1] for i in row}
            if len(zs) != 1:
                raise ValueError("azimuth row elements must share a common z")
            xs = [self.positions[i][0] for i in row]
            dx = np.diff(sorted(xs))
            if not np.allclose(dx, 1.0):
                raise ValueError("azimuth row must have uniform unit x spacing")
            if seen & set(row):
                raise ValueError("azimuth rows must be disjoint")
            seen |= set(row)
        for lo, hi in self.elevation_pairs:
            xl, zl = self.positions[lo]
            xh, zh = self.positions[hi]
            if xl != xh or not math.isclose(zh - zl, 1.0):
                raise ValueError("elevation pair must share x and be 1 spacing apart in z")

    @property
    def azimuth_aperture(self) -> tuple:
        """Indices of the 8-element azimuth aperture, ordered by x."""
        idx = list(self.azimuth_rows[0]) + list(self.azimuth_rows[1])
        return tuple(sorted(idx, key=lambda i: self.positions[i][0]))

    def positions_m(self) -> np.ndarray:
        """(12, 2) array of (x, z) element positions in meters."""
        return np.asarray(self.positions, dtype=float) * self.spacing


def default_layout(cfg: RadarConfig | None = None) -> VirtualArrayLayout:
    """The assumed 3Tx/4Rx virtual array at lambda/2 spacing.

    Elements 0-7 form an 8-element azimuth line at z=0, split into two
    4-element sub-arrays (x=0..3 and x=4..7). Elements 8-11 sit one
    spacing above the middle of the line (z=1, x=2..5) and complete the 4
    vertical pairs. Centering the elevated elements keeps the joint
    angle-angle beamformer separable without azimuth/elevation phase
    leakage. The true device layout is not public; this is a documented
    assumption that yields exactly 2 azimuth sub-arrays and 4 elevation
    pairs.
    """
    cfg = cfg or RadarConfig()
    d = cfg.wavelength / 2.0
    positions = tuple(
        [(float(x), 0.0) for x in range(8)]
        + [(float(x), 1.0) for x in range(2, 6)]
    )
    return VirtualArrayLayout(
        positions=positions,
        azimuth_rows=((0, 1, 2, 3), (4, 5, 6, 7)),
        elevation_pairs=((2, 8), (3, 9), (4, 10), (5, 11)),
        spacing=d,
    )


@dataclass
class DataCube:
    """One frame of complex baseband samples, indexed [chirp][sample][antenna]."""

    samples: np.ndarray  # complex, shape (Nc, Ns, 12)
    frame_index: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 3:
            raise ValueError(f"expected 3-D cube, got shape {self.samples.shape}")
        if not np.iscomplexobj(self.samples):
            raise ValueError("cube samples must be complex")
        self.samples.flags.writeable = False

    def validate(self, cfg: RadarConfig) -> None:
        expected = (cfg.chirps_per_frame, cfg.samples_per_chirp, 12)
        if self.samples.shape != expected:
            raise ValueError(f"cube shape {self.samples.shape} != {expected}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("cube contains non-finite samples")


@dataclass(frozen=True)
class PositionEstimate:
    """3-D position in the radar frame (y forward, x right, z up) plus timestamp."""

    x: float
    y: float
    z: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.z, self.timestamp))):
            raise ValueError("position estimate must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def spherical_to_cart(r: float, azimuth: float, elevation: float) -> tuple:
    """(range, azimuth, elevation) -> (x, y, z) in the radar frame."""
    return (
        r * math.cos(elevation) * math.sin(azimuth),
        r * math.cos(elevation) * math.cos(azimuth),
        r * math.sin(elevation),
    )


def cart_to_spherical(x: float, y: float, z: float) -> tuple:
    """(x, y, z) -> (range, azimuth, elevation); inverse of spherical_to_cart."""
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0:
        return 0.0, 0.0, 0.0
    return r, math.atan2(x, y), math.asin(z / r)


def azimuth_to_paper_deg(azimuth_rad: float) -> float:
    """Boresight-zero azimuth [rad] -> 30..150 degree reporting convention."""
    return 90.0 + math.degrees(azimuth_rad)


def azimuth_from_paper_deg(azimuth_deg: float) -> float:
    """30..150 degree azimuth -> boresight-zero radians."""
    return math.radians(azimuth_deg - 90.0)


# Keys of the flat `key = value` config text format, in file order.
CONFIG_KEYS = (
    "carrier_freq",
    "chirp_slope",
    "adc_sample_rate",
    "samples_per_chirp",
    "chirps_per_frame",
    "chirp_period",
    "frame_period",
)


def config_to_text(cfg: RadarConfig) -> str:
    """Serialize a config as one `key = value` per line (SI units)."""
    lines = []
    for key in CONFIG_KEYS:
        lines.append(f"{key} = {getattr(cfg, key)!r}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> RadarConfig:
    """Parse the flat key-value format produced by :func:`config_to_text`."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = val.strip()
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise ValueError(f"config missing keys: {missing}")
    kwargs = {}
    for key in CONFIG_KEYS:
        if key in ("samples_per_chirp", "chirps_per_frame"):
            kwargs[key] = int(values[key])
        else:
            kwargs[key] = float(values[key])
    return RadarConfig(**kwargs)


def save_config(cfg: RadarConfig, path) -> None:
    with open(path, "w") as f:
        f.write(config_to_text(cfg))


def load_config(path) -> RadarConfig:
    with open(path) as f:
        return config_from_text(f.read())
