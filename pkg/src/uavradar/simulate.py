"""Synthetic drone scenes and dechirped-IF frame synthesis.

Replaces instrumented data collection: a point-scatterer drone (body plus
rotating blade tips) flies a smooth random trajectory through a room, and
each frame is rendered as the ideal dechirped IF data cube. Ground truth
is known exactly, which is what the evaluation layer scores against.

The forward model is the exact inverse of the three closed-form relations
in :mod:`uavradar.radar`: beat frequency 2*S*r/c along samples, phase step
4*pi*v*Tc/lambda along chirps, and per-element phase (2*pi/lambda)*(p . u)
across the virtual array. Superposition holds, so frames of combined
scenes equal the sum of the per-scene frames when noise is disabled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from uavradar.radar import (
    DataCube,
    RadarConfig,
    VirtualArrayLayout,
    default_layout,
    derived_params,
    range_to_beat_freq,
    velocity_to_phase,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DroneModel:
    """Point-scatterer drone: one body reflector plus rotating blade tips.

    Far-side rotors (on the hemisphere of the body facing away from the
    sensor) are attenuated by `body_occlusion_factor`, modelling shadowing
    by the airframe. Blade tips carry `tip_amplitude_ratio * body_rcs`.
    """

    body_rcs: float = 1.0
    rotor_count: int = 4
    blade_tips_per_rotor: int = 2
    rotor_radius: float = 0.06
    rotor_rpm: float = 8000.0
    rotor_offsets: tuple = (
        (0.15, 0.15, 0.02),
        (-0.15, 0.15, 0.02),
        (-0.15, -0.15, 0.02),
        (0.15, -0.15, 0.02),
    )
    body_occlusion_factor: float = 0.4
    tip_amplitude_ratio: float = 0.6

    def __post_init__(self):
        if self.rotor_radius <= 0:
            raise ValueError("rotor_radius must be positive")
        if self.rotor_rpm < 0:
            raise ValueError("rotor_rpm must be non-negative")
        if not 0.0 <= self.body_occlusion_factor <= 1.0:
            raise ValueError("body_occlusion_factor must be in [0, 1]")
        if len(self.rotor_offsets) != self.rotor_count:
            raise ValueError("need one offset per rotor")


@dataclass
class Trajectory:
    """Time-ordered (t, position, velocity) samples of the drone flight."""

    times: np.ndarray  # (n,) strictly increasing [s]
    positions: np.ndarray  # (n, 3) [m]
    velocities: np.ndarray  # (n, 3) [m/s]
    duration: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        self.velocities = np.asarray(self.velocities, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def at(self, t: float) -> tuple:
        """Position and velocity at time t (nearest sample)."""
        i = int(np.argmin(np.abs(self.times - t)))
        return self.positions[i], self.velocities[i]


@dataclass
class Scene:
    """A drone flight plus static clutter, receiver noise and multipath ghosts."""

    drone: DroneModel
    trajectory: Trajectory
    static_clutter: list = field(default_factory=list)  # [(position, amplitude)]
    noise_std: float = 0.0  # std of the complex noise per sample
    multipath_ghosts: list = field(default_factory=list)  # [(delay_m, rel_amplitude)]
    seed: int = 0  # base seed; per-frame noise derives from (seed, frame)

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        for _, amp in self.static_clutter:
            if amp < 0:
                raise ValueError("clutter amplitudes must be non-negative")
        for _, amp in self.multipath_ghosts:
            if amp < 0:
                raise ValueError("ghost amplitudes must be non-negative")


@dataclass(frozen=True)
class Scatterer:
    """One point reflector as seen at a frame instant."""

    position: tuple  # (x, y, z) [m]
    amplitude: float
    radial_velocity: float  # [m/s], positive = receding


def gen_trajectory(seed: int, duration: float, bounds, max_speed: float,
                   frame_rate: float = 10.0, margin: float = 0.95) -> Trajectory:
    """Smooth (C-infinity) random flight inside an axis-aligned box.

    Each axis is a seeded sum of low-frequency sinusoids whose amplitudes
    are normalized so the position stays inside `bounds` and the analytic
    speed bound stays at or below `max_speed`. Deterministic per seed;
    samples are taken at `frame_rate`. max_speed == 0 degenerates to a
    hover at a seeded fixed point.

    Args:
        bounds: ((xmin, xmax), (ymin, ymax), (zmin, zmax)) in meters.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (3, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError("bounds must be a non-empty 3-D box")
    if max_speed < 0:
        raise ValueError("max_speed must be non-negative")

    rng = np.random.default_rng(seed)
    n_components = 4
    freqs = rng.uniform(0.02, 0.10, size=(3, n_components))  # Hz
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(3, n_components))
    raw_amps = rng.uniform(0.5, 1.0, size=(3, n_components))

    centers = bounds.mean(axis=1)
    half_widths = (bounds[:, 1] - bounds[:, 0]) / 2.0
    # Normalize per axis so sum of |amplitudes| fits inside the margin.
    amps = raw_amps / raw_amps.sum(axis=1, keepdims=True)
    amps *= (half_widths * margin)[:, None]

    # Analytic bound on speed: |v| <= sqrt(sum_axis (sum_k a*2*pi*f)^2).
    axis_vmax = (amps * 2.0 * math.pi * freqs).sum(axis=1)
    vbound = float(np.linalg.norm(axis_vmax))
    scale = 1.0 if vbound == 0 else min(1.0, max_speed / vbound)
    if max_speed == 0:
        scale = 0.0
        centers = rng.uniform(bounds[:, 0], bounds[:, 1])
    amps = amps * scale

    n = int(round(duration * frame_rate))
    t = np.arange(n) / frame_rate
    w = 2.0 * math.pi * freqs
    arg = w[:, :, None] * t[None, None, :] + phases[:, :, None]
    pos = centers[:, None] + (amps[:, :, None] * np.sin(arg)).sum(axis=1)
    vel = (amps[:, :, None] * w[:, :, None] * np.cos(arg)).sum(axis=1)
    return Trajectory(times=t, positions=pos.T, velocities=vel.T, duration=duration)


def scatterers_at(drone: DroneModel, position, velocity, t: float) -> list:
    """Scatterer list for a drone at a given pose and instant.

    Returns the body scatterer followed by rotor_count * blade_tips_per_rotor
    blade-tip scatterers. Tips sit on horizontal circles of rotor_radius
    around each rotor hub and add their (projected) tangential velocity to
    the body's radial velocity. Adjacent rotors spin in opposite directions.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    r = float(np.linalg.norm(position))
    u = position / r if r > 0 else np.array([0.0, 1.0, 0.0])
    body_vr = float(velocity @ u)

    heading = math.atan2(velocity[0], velocity[1]) if np.linalg.norm(velocity[:2]) > 1e-12 else 0.0
    ch, sh = math.cos(heading), math.sin(heading)
    # Rotation about z mapping body-frame offsets into the world frame.
    rot = np.array([[ch, sh, 0.0], [-sh, ch, 0.0], [0.0, 0.0, 1.0]])

    out = [Scatterer(tuple(position), drone.body_rcs, body_vr)]
    omega = 2.0 * math.pi * drone.rotor_rpm / 60.0
    tip_amp = drone.body_rcs * drone.tip_amplitude_ratio
    for ri, offset in enumerate(drone.rotor_offsets):
        hub = position + rot @ np.asarray(offset, dtype=float)
        occluded = (hub - position) @ u > 0  # hub on the hemisphere facing away
        amp = tip_amp * (drone.body_occlusion_factor if occluded else 1.0)
        spin = 1.0 if ri % 2 == 0 else -1.0
        for bi in range(drone.blade_tips_per_rotor):
            phase = spin * omega * t + 2.0 * math.pi * (bi / drone.blade_tips_per_rotor + ri / len(drone.rotor_offsets))
            tip = hub + drone.rotor_radius * np.array([math.cos(phase), math.sin(phase), 0.0])
            tip_vel = velocity + spin * omega * drone.rotor_radius * np.array(
                [-math.sin(phase), math.cos(phase), 0.0])
            rr = float(np.linalg.norm(tip))
            uu = tip / rr if rr > 0 else u
            out.append(Scatterer(tuple(tip), amp, float(tip_vel @ uu)))
    return out


def synthesize_from_scatterers(scatterers, cfg: RadarConfig, layout: VirtualArrayLayout,
                               noise_std: float = 0.0, rng=None,
                               frame_index: int = 0, timestamp: float = 0.0) -> DataCube:
    """Render a frame from an explicit scatterer list.

    Each scatterer contributes a separable complex tone: beat frequency
    along samples, Doppler phase step along chirps, geometric phase across
    the array. Scatterers beyond the Nyquist range are dropped (counted in
    a warning). Complex white noise of std `noise_std` is added, and the
    result is quantized to complex64 so that on-disk float32 round trips
    are bit-exact.
    """
    nc, ns = cfg.chirps_per_frame, cfg.samples_per_chirp
    lam = cfg.wavelength
    max_range = derived_params(cfg).max_range
    pos_m = layout.positions_m()

    n_idx = np.arange(ns)
    m_idx = np.arange(nc)
    cube = np.zeros((nc, ns, 12), dtype=np.complex128)
    dropped = 0
    for sc in scatterers:
        p = np.asarray(sc.position, dtype=float)
        r = float(np.linalg.norm(p))
        if r >= max_range:
            dropped += 1
            continue
        if r == 0 or sc.amplitude == 0:
            continue
        u = p / r
        f_b = range_to_beat_freq(r, cfg)
        sample_vec = np.exp(2j * math.pi * f_b * n_idx / cfg.adc_sample_rate)
        chirp_vec = np.exp(1j * velocity_to_phase(sc.radial_velocity, cfg) * m_idx)
        proj = pos_m[:, 0] * u[0] + pos_m[:, 1] * u[2]  # element (x, z) against (u_x, u_z)
        va_vec = np.exp(2j * math.pi * proj / lam)
        phase0 = np.exp(4j * math.pi * r / lam)
        cube += (sc.amplitude * phase0) * np.einsum("m,n,v->mnv", chirp_vec, sample_vec, va_vec)
    if dropped:
        logger.warning("synthesize_frame: dropped %d scatterer(s) beyond max range %.2f m",
                       dropped, max_range)
    if noise_std > 0:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.standard_normal((nc, ns, 12)) + 1j * rng.standard_normal((nc, ns, 12))
        cube += noise * (noise_std / math.sqrt(2.0))
    return DataCube(samples=cube.astype(np.complex64), frame_index=frame_index,
                    timestamp=timestamp)


def frame_scatterers(scene: Scene, frame_index: int) -> list:
    """All scatterers (drone + clutter + ghosts) at a frame's reference time."""
    t = float(scene.trajectory.times[frame_index])
    position, velocity = scene.trajectory.positions[frame_index], scene.trajectory.velocities[frame_index]
    scatterers = scatterers_at(scene.drone, position, velocity, t)
    body = scatterers[0]
    for pos, amp in scene.static_clutter:
        scatterers.append(Scatterer(tuple(pos), amp, 0.0))
    for delay_m, rel_amp in scene.multipath_ghosts:
        p = np.asarray(body.position, dtype=float)
        r = float(np.linalg.norm(p))
        ghost_pos = p * ((r + delay_m) / r) if r > 0 else p
        scatterers.append(Scatterer(tuple(ghost_pos), body.amplitude * rel_amp,
                                    body.radial_velocity))
    return scatterers


def synthesize_frame(scene: Scene, cfg: RadarConfig, layout: VirtualArrayLayout,
                     frame_index: int) -> DataCube:
    """Render one frame of a scene. Pure in (scene, cfg, frame_index)."""
    if frame_index < 0 or frame_index >= len(scene.trajectory):
        raise ValueError(f"frame {frame_index} outside trajectory span")
    rng = np.random.default_rng((scene.seed, frame_index))
    return synthesize_from_scatterers(
        frame_scatterers(scene, frame_index), cfg, layout,
        noise_std=scene.noise_std, rng=rng, frame_index=frame_index,
        timestamp=float(scene.trajectory.times[frame_index]),
    )


def noise_std_for_sample_snr(snr_db: float, amplitude: float = 1.0) -> float:
    """Complex-noise std giving a per-ADC-sample SNR for a tone of `amplitude`."""
    return amplitude / (10.0 ** (snr_db / 20.0))


# --- the standard seeded benchmark -----------------------------------------

SIM_BENCH_V1 = {
    "name": "sim-bench-v1",
    "sequences": 10,
    "duration": 60.0,
    "bounds": ((-1.0, 1.0), (1.2, 3.8), (-0.3, 0.8)),
    "max_speed": 2.0,
    "body_snr_db": 15.0,
    "ghost": (0.6, 0.3),
    "clutter": (((0.5, 3.5, -0.2), 3.0), ((-0.8, 2.0, -0.3), 2.0)),
}


def sim_bench_scene(seq_index: int, duration: float | None = None,
                    cfg: RadarConfig | None = None) -> Scene:
    """Scene for sequence `seq_index` (seed = index) of sim-bench-v1."""
    cfg = cfg or RadarConfig()
    spec = SIM_BENCH_V1
    traj = gen_trajectory(seq_index, duration or spec["duration"], spec["bounds"],
                          spec["max_speed"], frame_rate=1.0 / cfg.frame_period)
    return Scene(
        drone=DroneModel(),
        trajectory=traj,
        static_clutter=[(np.array(p), a) for p, a in spec["clutter"]],
        noise_std=noise_std_for_sample_snr(spec["body_snr_db"]),
        multipath_ghosts=[spec["ghost"]],
        seed=seq_index,
    )


@dataclass
class SimSequence:
    """Lazily synthesized frame source for one benchmark sequence."""

    scene: Scene
    cfg: RadarConfig
    layout: VirtualArrayLayout
    sequence_id: int = 0

    def __len__(self):
        return len(self.scene.trajectory)

    def frame(self, i: int) -> DataCube:
        return synthesize_frame(self.scene, self.cfg, self.layout, i)

    def frames(self, indices=None):
        for i in indices if indices is not None else range(len(self)):
            yield self.frame(i)

    def ground_truth(self) -> np.ndarray:
        """(n, 5) array of (frame_index, t, x, y, z)."""
        traj = self.scene.trajectory
        return np.column_stack([np.arange(len(traj)), traj.times, traj.positions])


def sim_bench_sequences(cfg: RadarConfig | None = None,
                        layout: VirtualArrayLayout | None = None,
                        duration: float | None = None) -> list:
    """All 10 lazily-evaluated sim-bench-v1 sequences."""
    cfg = cfg or RadarConfig()
    layout = layout or default_layout(cfg)
    return [SimSequence(sim_bench_scene(i, duration, cfg), cfg, layout, sequence_id=i)
            for i in range(SIM_BENCH_V1["sequences"])]


def write_sequence(path, seq: SimSequence, encoding: int | None = None) -> None:
    """Synthesize a sequence and write it as a dataset directory (streaming)."""
    from uavradar import capture

    capture.write_dataset(
        path, seq.frames(), seq.ground_truth(), seq.cfg,
        encoding=capture.ENC_FLOAT32 if encoding is None else encoding,
        n_frames=len(seq),
    )
