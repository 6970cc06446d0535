"""Elliptical waypoint generation and kinematically limited pose sampling."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import EulerPose, RigidTransform, wrap_degrees

logger = logging.getLogger(__name__)

GRAVITY = 9.81
DEFAULT_RATE = 15.0
MAX_PITCH_DEG = 30.0


class UAVModel(enum.Enum):
    AVATA_2 = "DJI Avata 2"
    MAVIC_MINI = "DJI Mavic Mini"
    PHANTOM_4 = "DJI Phantom 4"
    MATRICE_210_RTK_V2 = "Matrice 210 RTK V2"
    MATRICE_600_PRO = "Matrice 600 Pro"
    MATRICE_300_RTK = "Matrice 300 RTK"
    K3_MINI = "K3 Mini (E99)"


@dataclass(frozen=True)
class UAVSpec:
    model: UAVModel
    mass: float  # kg
    dims: tuple  # (L, W, H) metres
    max_speed: float  # m/s

    def __post_init__(self):
        if self.max_speed <= 0 or self.mass <= 0 or min(self.dims) <= 0:
            raise ValueError(f"invalid UAV spec for {self.model}")

    @property
    def max_dimension(self) -> float:
        return max(self.dims)

    def to_dict(self) -> dict:
        return {"model": self.model.value, "mass": self.mass, "dims": list(self.dims),
                "max_speed": self.max_speed}

    @classmethod
    def from_dict(cls, d: dict) -> "UAVSpec":
        return cls(UAVModel(d["model"]), float(d["mass"]), tuple(float(x) for x in d["dims"]),
                   float(d["max_speed"]))


UAV_SPECS = {
    UAVModel.AVATA_2: UAVSpec(UAVModel.AVATA_2, 0.377, (0.185, 0.212, 0.064), 27.0),
    UAVModel.MAVIC_MINI: UAVSpec(UAVModel.MAVIC_MINI, 0.249, (0.159, 0.202, 0.055), 13.0),
    UAVModel.PHANTOM_4: UAVSpec(UAVModel.PHANTOM_4, 1.38, (0.289, 0.289, 0.196), 20.0),
    UAVModel.MATRICE_210_RTK_V2: UAVSpec(UAVModel.MATRICE_210_RTK_V2, 4.69, (0.883, 0.886, 0.398), 15.0),
    UAVModel.MATRICE_600_PRO: UAVSpec(UAVModel.MATRICE_600_PRO, 10.5, (1.668, 1.518, 0.727), 18.0),
    UAVModel.MATRICE_300_RTK: UAVSpec(UAVModel.MATRICE_300_RTK, 3.6, (0.810, 0.670, 0.430), 23.0),
    # dimensions folded
    UAVModel.K3_MINI: UAVSpec(UAVModel.K3_MINI, 0.12, (0.130, 0.070, 0.055), 5.0),
}


def derive_seed(*keys: int) -> int:
    """Stable 63-bit seed from a tuple of integers (e.g. scene seed, uav id)."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass(frozen=True)
class TrajectoryConfig:
    a: float = 15.0
    b: float = 8.0
    h0: float = 15.0
    dh_bound: float = 3.0
    n_waypoints: int = 20
    anchor: RigidTransform = field(default_factory=RigidTransform.identity)
    seed: int = 0
    # ellipse center offset along the anchor's forward axis per revolution
    drift_per_rev: float = 0.0

    def __post_init__(self):
        if not self.a > self.b > 0:
            raise ValueError(f"need a > b > 0, got a={self.a}, b={self.b}")
        if not 15 <= self.n_waypoints <= 25:
            raise ValueError(f"n_waypoints must be in [15, 25], got {self.n_waypoints}")
        if self.dh_bound < 0:
            raise ValueError("dh_bound must be non-negative")


def generate_waypoints(cfg: TrajectoryConfig, revolutions: int = 1) -> np.ndarray:
    """Waypoints evenly spaced in angle on the anchor's ellipse, shape (n * revolutions, 3)."""
    if revolutions < 1:
        raise ValueError("revolutions must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_waypoints
    theta = 2.0 * np.pi * np.arange(n * revolutions) / n
    dh = rng.uniform(-cfg.dh_bound, cfg.dh_bound, size=theta.size)
    local = np.stack([
        cfg.a * np.cos(theta) + cfg.drift_per_rev * theta / (2.0 * np.pi),
        cfg.b * np.sin(theta),
        cfg.h0 + dh,
    ], axis=1)
    return cfg.anchor.apply(local)


@dataclass
class PoseTrack:
    """Uniformly sampled 6-DoF track. Angles in degrees, FLU body / ENU world."""

    uav_id: int
    rate: float
    ticks: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray

    def __len__(self) -> int:
        return len(self.ticks)

    @property
    def timestamps(self) -> np.ndarray:
        return self.ticks / self.rate

    def pose(self, k: int) -> EulerPose:
        return EulerPose(self.positions[k], self.roll[k], self.pitch[k], self.yaw[k])

    @property
    def samples(self) -> list:
        return [(float(t), self.pose(k), self.velocities[k]) for k, t in enumerate(self.timestamps)]

    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.velocities, axis=1)


def _drop_duplicates(waypoints: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    keep = [0]
    for i in range(1, len(waypoints)):
        if np.linalg.norm(waypoints[i] - waypoints[keep[-1]]) <= tol:
            logger.warning("skipping duplicate waypoint %d", i)
            continue
        keep.append(i)
    return waypoints[keep]


def _limit_speed(s: np.ndarray, target: np.ndarray, accel: float) -> np.ndarray:
    """Trapezoidal profile over arc length: rest-to-rest, bounded by `target`."""
    v = target.copy()
    v[0] = 0.0
    v[-1] = 0.0
    ds = np.diff(s)
    for k in range(1, len(v)):
        v[k] = min(v[k], math.sqrt(v[k - 1] ** 2 + 2.0 * accel * ds[k - 1]))
    for k in range(len(v) - 2, -1, -1):
        v[k] = min(v[k], math.sqrt(v[k + 1] ** 2 + 2.0 * accel * ds[k]))
    return v


def sample_poses(waypoints, spec: UAVSpec, rate: float = DEFAULT_RATE, seed: int = 0, *,
                 uav_id: int = 0, duration: float | None = None, closed: bool = False,
                 speed_range: tuple = (0.3, 0.8), accel_factor: float = 0.5,
                 yaw_time_constant: float = 0.2, samples_per_segment: int = 64) -> PoseTrack:
    """Fly a smooth cubic path through `waypoints` and sample it at `rate` Hz.

    Each segment gets a cruise speed drawn from ``speed_range * max_speed``;
    transitions (and the start/end from hover) are accel-limited at
    ``accel_factor * max_speed`` m/s^2. Roll and pitch follow a coordinated
    turn model from the sampled lateral and longitudinal accelerations. If
    `duration` is given the track has exactly ``round(duration * rate)``
    samples and the UAV hovers at the last waypoint once the path is done.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    pts = _drop_duplicates(np.asarray(waypoints, dtype=float))
    if len(pts) < 2:
        raise ValueError("need at least two distinct waypoints")
    rng = np.random.default_rng(seed)

    if closed:
        pts = np.vstack([pts, pts[:1]])
    knots = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    spline = CubicSpline(knots, pts, bc_type="periodic" if closed else "natural")
    n_seg = len(pts) - 1

    # arc length table
    u = np.concatenate([np.linspace(knots[i], knots[i + 1], samples_per_segment, endpoint=False)
                        for i in range(n_seg)] + [knots[-1:]])
    seg_of = np.minimum(np.searchsorted(knots, u, side="right") - 1, n_seg - 1)
    du_speed = np.linalg.norm(spline(u, 1), axis=1)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (du_speed[1:] + du_speed[:-1]) * np.diff(u))])

    lo, hi = speed_range
    cruise = rng.uniform(lo, hi, size=n_seg) * spec.max_speed
    v = _limit_speed(s, cruise[seg_of], accel_factor * spec.max_speed)
    v_mid = 0.5 * (v[1:] + v[:-1])
    with np.errstate(divide="ignore"):
        dt = np.where(v_mid > 0, np.diff(s) / v_mid, 0.0)
    t_dense = np.concatenate([[0.0], np.cumsum(dt)])

    if duration is None:
        n_samples = int(math.floor(t_dense[-1] * rate)) + 1
    else:
        n_samples = int(round(duration * rate))
        if n_samples < 1:
            raise ValueError("duration too short for a single sample")
    ticks = np.arange(n_samples, dtype=np.int64)
    t = ticks / rate
    s_t = np.interp(t, t_dense, s)
    u_t = np.interp(s_t, s, u)
    positions = spline(u_t)

    velocities = np.gradient(positions, 1.0 / rate, axis=0) if n_samples > 1 else np.zeros((1, 3))
    accel = np.gradient(velocities, 1.0 / rate, axis=0) if n_samples > 1 else np.zeros((1, 3))

    tangent = spline(u_t, 1)
    heading = np.arctan2(tangent[:, 1], tangent[:, 0])
    fwd = np.stack([np.cos(heading), np.sin(heading)], axis=1)
    right = np.stack([np.sin(heading), -np.cos(heading)], axis=1)
    a_lon = np.einsum("ij,ij->i", accel[:, :2], fwd)
    a_lat = np.einsum("ij,ij->i", accel[:, :2], right)
    roll = np.degrees(np.arctan2(a_lat, GRAVITY))
    pitch = np.clip(np.degrees(np.arctan2(a_lon, GRAVITY)), -MAX_PITCH_DEG, MAX_PITCH_DEG)

    # first-order lag on the unwrapped heading
    raw = np.unwrap(heading)
    beta = 1.0 - math.exp(-1.0 / (rate * yaw_time_constant)) if yaw_time_constant > 0 else 1.0
    yaw = np.empty_like(raw)
    yaw[0] = raw[0]
    for k in range(1, len(raw)):
        yaw[k] = yaw[k - 1] + beta * (raw[k] - yaw[k - 1])

    return PoseTrack(uav_id=uav_id, rate=float(rate), ticks=ticks, positions=positions,
                     velocities=velocities, roll=roll, pitch=pitch,
                     yaw=wrap_degrees(np.degrees(yaw)))


def revolutions_needed(cfg: TrajectoryConfig, spec: UAVSpec, duration: float,
                       speed_range: tuple = (0.3, 0.8)) -> int:
    """Enough laps that the fastest cruise speed cannot exhaust the path early."""
    # Ramanujan's ellipse perimeter approximation
    a, b = cfg.a, cfg.b
    perimeter = math.pi * (3 * (a + b) - math.sqrt((3 * a + b) * (a + 3 * b)))
    return max(1, int(math.ceil(duration * speed_range[1] * spec.max_speed / perimeter)) + 1)
