"""Ray-cast LiDAR, per-target radar and weather degradation."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .boxes import BBox3D
from .geometry import RigidTransform

GROUND_ID = -1
_BOX_REFLECTIVITY = 0.9
_GROUND_REFLECTIVITY = 0.35
_LIDAR_STREAM = 0x4C49
_RADAR_STREAM = 0x5241


# ---------------------------------------------------------------------------
# weather


@dataclass(frozen=True)
class WeatherProfile:
    condition: str
    w_weather: float
    dropout_prob: float = 0.0
    range_noise_sigma: float = 0.0
    velocity_noise_sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must be in [0, 1]")
        if self.w_weather <= 0 or self.range_noise_sigma < 0 or self.velocity_noise_sigma < 0:
            raise ValueError(f"invalid weather parameters for {self.condition}")

    @property
    def is_identity(self) -> bool:
        return self.dropout_prob == 0.0 and self.range_noise_sigma == 0.0 and self.velocity_noise_sigma == 0.0

    def to_dict(self) -> dict:
        return {"condition": self.condition, "w_weather": self.w_weather, "dropout_prob": self.dropout_prob,
                "range_noise_sigma": self.range_noise_sigma, "velocity_noise_sigma": self.velocity_noise_sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "WeatherProfile":
        return cls(**d)


@functools.lru_cache(maxsize=1)
def _weather_table() -> dict:
    text = resources.files("uavbench").joinpath("weather_profiles.json").read_text()
    return json.loads(text)


WEATHER_CONDITIONS = ("clear_day", "clear_night", "rain_day", "rain_night",
                      "fog_day", "fog_night", "snow_day", "snow_night")


def weather_profile(condition: str, **overrides) -> WeatherProfile:
    """Default profile for one of the eight conditions; ``clear``/``fog`` etc. mean the day variant."""
    name = condition if "_" in condition else f"{condition}_day"
    table = _weather_table()
    if name not in table:
        raise KeyError(f"unknown weather condition {condition!r}; choose from {sorted(table)}")
    return WeatherProfile(condition=name, **{**table[name], **overrides})


# ---------------------------------------------------------------------------
# LiDAR


@dataclass(frozen=True)
class LidarConfig:
    channels: int = 256
    hfov: float = 120.0  # total, degrees
    vfov: float = 20.0  # half-angle, degrees (+/-)
    rate: float = 15.0
    points_per_second: float = 2.5e6
    max_range: float = 200.0
    pose: RigidTransform = field(default_factory=RigidTransform.identity)  # sensor FLU -> world

    def __post_init__(self):
        if self.channels < 1 or self.azimuth_steps < 1:
            raise ValueError("need at least one channel and one azimuth step")
        if not (0 < self.hfov <= 360 and 0 <= self.vfov < 90 and self.max_range > 0):
            raise ValueError("invalid LiDAR field of view or range")

    @property
    def points_per_frame(self) -> int:
        return int(self.points_per_second / self.rate)

    @property
    def azimuth_steps(self) -> int:
        return self.points_per_frame // self.channels

    @property
    def num_rays(self) -> int:
        return self.channels * self.azimuth_steps

    def elevations(self) -> np.ndarray:
        """Channel elevations in radians, ascending."""
        return _grid_angles(self.channels, 2.0 * self.vfov)

    def azimuths(self) -> np.ndarray:
        """Azimuth steps in radians, ascending, positive to the left."""
        return _grid_angles(self.azimuth_steps, self.hfov)

    def ray_directions(self) -> np.ndarray:
        """Unit directions in the sensor FLU frame, channel-major, shape (num_rays, 3)."""
        return _ray_directions(self.channels, self.azimuth_steps, self.hfov, self.vfov)

    def to_dict(self) -> dict:
        return {"channels": self.channels, "hfov": self.hfov, "vfov": self.vfov, "rate": self.rate,
                "points_per_second": self.points_per_second, "max_range": self.max_range}


def _grid_angles(n: int, span_deg: float) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return np.radians(np.linspace(-span_deg / 2.0, span_deg / 2.0, n))


@functools.lru_cache(maxsize=8)
def _ray_directions(channels, steps, hfov, vfov) -> np.ndarray:
    el = _grid_angles(channels, 2.0 * vfov)[:, None]
    az = _grid_angles(steps, hfov)[None, :]
    d = np.stack(np.broadcast_arrays(np.cos(el) * np.cos(az), np.cos(el) * np.sin(az),
                                     np.sin(el)), axis=-1).reshape(-1, 3)
    d.setflags(write=False)
    return d


@dataclass
class LidarScan:
    """Returns in the sensor FLU frame."""

    points: np.ndarray  # (N, 3) metres
    intensity: np.ndarray  # (N,) in [0, 1]
    ray_index: np.ndarray  # (N,) index into the config's ray grid
    target: np.ndarray  # (N,) box instance id or GROUND_ID
    num_rays: int
    max_range: float

    def __len__(self) -> int:
        return len(self.points)

    @property
    def ranges(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    @classmethod
    def empty(cls, num_rays: int, max_range: float) -> "LidarScan":
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64),
                   num_rays, max_range)

    def subset(self, mask) -> "LidarScan":
        return LidarScan(self.points[mask], self.intensity[mask], self.ray_index[mask],
                         self.target[mask], self.num_rays, self.max_range)

    def to_float32(self) -> np.ndarray:
        """(N, 4) little-endian float32 x, y, z, intensity records."""
        out = np.empty((len(self), 4), dtype="<f4")
        out[:, :3] = self.points
        out[:, 3] = self.intensity
        return out


def _world_directions(dirs: np.ndarray, rot: np.ndarray):
    # explicit elementwise products keep results reproducible by a scalar oracle
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    return tuple(rot[i, 0] * dx + rot[i, 1] * dy + rot[i, 2] * dz for i in range(3))


def _slab_hit(origin, wdx, wdy, wdz, box: BBox3D):
    """Entry/exit distances of rays against an oriented box."""
    r = box.rotation
    rel = [origin[m] - box.center[m] for m in range(3)]
    half = box.half_extents
    t_near = t_far = None
    for k in range(3):
        lo = r[0, k] * rel[0] + r[1, k] * rel[1] + r[2, k] * rel[2]
        ld = r[0, k] * wdx + r[1, k] * wdy + r[2, k] * wdz
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half[k] - lo) / ld
            t2 = (half[k] - lo) / ld
        n, f = np.minimum(t1, t2), np.maximum(t1, t2)
        t_near = n if t_near is None else np.maximum(t_near, n)
        t_far = f if t_far is None else np.minimum(t_far, f)
    return t_near, t_far


def _angular_window(idx_sorted: np.ndarray, lo: float, hi: float) -> np.ndarray:
    i0 = max(int(np.searchsorted(idx_sorted, lo, side="left")) - 1, 0)
    i1 = min(int(np.searchsorted(idx_sorted, hi, side="right")) + 1, len(idx_sorted))
    return np.arange(i0, i1)


def _candidate_rays(cfg: LidarConfig, box: BBox3D) -> np.ndarray | None:
    """Ray indices whose direction may meet the box's bounding sphere; None means all."""
    pose = cfg.pose
    c = pose.rotation.T @ (box.center - pose.translation)
    dist = float(np.linalg.norm(c))
    rho = float(np.linalg.norm(box.half_extents))
    if dist <= rho * 1.001 + 1e-6 or dist - rho > cfg.max_range:
        return None if dist <= rho * 1.001 + 1e-6 else np.zeros(0, np.int64)
    alpha = math.asin(rho / dist) * 1.001 + 1e-9
    el_c = math.atan2(c[2], math.hypot(c[0], c[1]))
    el = cfg.elevations()
    rows = _angular_window(el, el_c - alpha, el_c + alpha)
    if abs(el_c) + alpha >= math.pi / 2 or len(rows) == 0:
        cols = np.arange(cfg.azimuth_steps) if len(rows) else np.zeros(0, np.int64)
    else:
        ratio = math.sin(alpha) / math.cos(abs(el_c) + alpha)
        if ratio >= 1.0:
            cols = np.arange(cfg.azimuth_steps)
        else:
            beta = math.asin(ratio) * 1.001 + 1e-9
            az = cfg.azimuths()
            az_c = math.atan2(c[1], c[0])
            parts = []
            for shift in (-2 * math.pi, 0.0, 2 * math.pi):
                lo, hi = az_c - beta + shift, az_c + beta + shift
                if hi >= az[0] and lo <= az[-1]:
                    parts.append(_angular_window(az, lo, hi))
            cols = np.unique(np.concatenate(parts)) if parts else np.zeros(0, np.int64)
    return (rows[:, None] * cfg.azimuth_steps + cols[None, :]).ravel()


def raycast(cfg: LidarConfig, boxes, ground_z: float | None = 0.0) -> LidarScan:
    """Noise-free nearest hits of the ray grid against boxes and a ground plane.

    Boxes are in world coordinates. Ties go to the earlier primitive
    (ground first, then boxes in list order).
    """
    dirs = cfg.ray_directions()
    n = len(dirs)
    rot, origin = cfg.pose.rotation, cfg.pose.translation
    wdx, wdy, wdz = _world_directions(dirs, rot)
    best_t = np.full(n, np.inf)
    best_id = np.full(n, -2, dtype=np.int64)

    if ground_z is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            tg = (ground_z - origin[2]) / wdz
        ok = (wdz < 0) & (tg > 0) & (tg <= cfg.max_range)
        best_t[ok] = tg[ok]
        best_id[ok] = GROUND_ID

    for box in boxes:
        cand = _candidate_rays(cfg, box)
        if cand is None:
            cand = np.arange(n)
        if len(cand) == 0:
            continue
        t_near, t_far = _slab_hit(origin, wdx[cand], wdy[cand], wdz[cand], box)
        hit = (t_near <= t_far) & (t_near > 0) & (t_near <= cfg.max_range) & (t_near < best_t[cand])
        idx = cand[hit]
        best_t[idx] = t_near[hit]
        best_id[idx] = box.instance_id

    ray = np.flatnonzero(best_id != -2)
    t = best_t[ray]
    target = best_id[ray]
    refl = np.where(target == GROUND_ID, _GROUND_REFLECTIVITY, _BOX_REFLECTIVITY)
    intensity = refl * (1.0 - 0.5 * t / cfg.max_range)
    return LidarScan(dirs[ray] * t[:, None], intensity, ray, target, n, cfg.max_range)


def lidar_scan(cfg: LidarConfig, uav_boxes, ground_z: float | None, weather: WeatherProfile,
               seed: int) -> LidarScan:
    return apply_weather(raycast(cfg, uav_boxes, ground_z), weather, seed)


# ---------------------------------------------------------------------------
# radar


@dataclass(frozen=True)
class RadarConfig:
    hfov: float = 120.0  # total, degrees
    vfov: float = 40.0  # total, degrees
    max_range: float = 30.0
    points_per_second: float = 0.5e6
    rate: float = 15.0
    returns_per_target: int = 5
    pose: RigidTransform = field(default_factory=RigidTransform.identity)  # sensor FRD -> world

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    @property
    def max_returns_per_frame(self) -> int:
        return int(self.points_per_second / self.rate)

    def to_dict(self) -> dict:
        return {"hfov": self.hfov, "vfov": self.vfov, "max_range": self.max_range,
                "points_per_second": self.points_per_second, "rate": self.rate,
                "returns_per_target": self.returns_per_target}


@dataclass
class RadarScan:
    range: np.ndarray
    azimuth: np.ndarray  # degrees, positive to the right
    elevation: np.ndarray  # degrees, positive up
    radial_velocity: np.ndarray  # m/s, positive receding
    target_id: np.ndarray
    max_range: float = 30.0

    def __len__(self) -> int:
        return len(self.range)

    def subset(self, mask) -> "RadarScan":
        return RadarScan(self.range[mask], self.azimuth[mask], self.elevation[mask],
                         self.radial_velocity[mask], self.target_id[mask], self.max_range)

    def to_records(self) -> list:
        return [{"range": float(r), "azimuth": float(a), "elevation": float(e),
                 "radial_velocity": float(v), "target_id": int(i)}
                for r, a, e, v, i in zip(self.range, self.azimuth, self.elevation,
                                         self.radial_velocity, self.target_id)]

    @classmethod
    def from_records(cls, records: list, max_range: float = 30.0) -> "RadarScan":
        cols = {k: np.array([r[k] for r in records], dtype=float)
                for k in ("range", "azimuth", "elevation", "radial_velocity")}
        ids = np.array([r["target_id"] for r in records], dtype=np.int64)
        return cls(cols["range"], cols["azimuth"], cols["elevation"], cols["radial_velocity"], ids, max_range)


def radar_scan(cfg: RadarConfig, uav_states, weather: WeatherProfile, seed: int) -> RadarScan:
    """One cluster of returns per UAV inside the radar's FoV and range.

    `uav_states` holds (position, velocity) or (position, velocity, target_id)
    in world coordinates.
    """
    rot, origin = cfg.pose.rotation, cfg.pose.translation
    rows = []
    for k, state in enumerate(uav_states):
        pos, vel = np.asarray(state[0], dtype=float), np.asarray(state[1], dtype=float)
        tid = int(state[2]) if len(state) > 2 else k
        p = rot.T @ (pos - origin)
        rng = float(np.linalg.norm(p))
        if rng == 0.0 or rng > cfg.max_range:
            continue
        # + 0.0 turns a signed zero into +0.0
        az = math.degrees(math.atan2(p[1], p[0])) + 0.0
        el = math.degrees(math.atan2(-p[2], math.hypot(p[0], p[1]))) + 0.0
        if abs(az) > cfg.hfov / 2.0 or abs(el) > cfg.vfov / 2.0:
            continue
        v = rot.T @ vel
        radial = float(v[0] * p[0] + v[1] * p[1] + v[2] * p[2]) / rng
        rows.extend([(rng, az, el, radial, tid)] * cfg.returns_per_target)
    rows = rows[: cfg.max_returns_per_frame]
    if not rows:
        scan = RadarScan(*(np.zeros(0) for _ in range(4)), np.zeros(0, np.int64), cfg.max_range)
    else:
        arr = np.array(rows, dtype=float)
        scan = RadarScan(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4].astype(np.int64), cfg.max_range)
    return apply_weather(scan, weather, seed)


# ---------------------------------------------------------------------------
# weather degradation


def apply_weather(scan, weather: WeatherProfile, seed: int):
    """Dropout plus Gaussian range (and radar velocity) noise; identity in clear weather.

    LiDAR draws are indexed by ray, so a return's perturbation depends only on
    (seed, ray index) and not on which other rays hit.
    """
    if weather.is_identity:
        return scan
    if isinstance(scan, LidarScan):
        rng = np.random.default_rng(np.random.SeedSequence([seed, _LIDAR_STREAM]))
        u = rng.random(scan.num_rays)[scan.ray_index]
        eps = rng.standard_normal(scan.num_rays)[scan.ray_index] * weather.range_noise_sigma
        r = scan.ranges
        r_new = r + eps
        keep = (u >= weather.dropout_prob) & (r_new > 0) & (r_new <= scan.max_range)
        out = scan.subset(keep)
        out.points = out.points * (r_new[keep] / r[keep])[:, None]
        return out
    if isinstance(scan, RadarScan):
        n = len(scan)
        rng = np.random.default_rng(np.random.SeedSequence([seed, _RADAR_STREAM]))
        u = rng.random(n)
        r_new = np.clip(scan.range + rng.standard_normal(n) * weather.range_noise_sigma, 0.0, scan.max_range)
        v_new = scan.radial_velocity + rng.standard_normal(n) * weather.velocity_noise_sigma
        out = replace(scan, range=r_new, radial_velocity=v_new)
        return out.subset(u >= weather.dropout_prob)
    raise TypeError(f"unsupported scan type {type(scan).__name__}")


def read_lidar_bin(data: bytes) -> np.ndarray:
    if len(data) % 16:
        raise ValueError(f"LiDAR payload length {len(data)} is not a multiple of 16 bytes")
    return np.frombuffer(data, dtype="<f4").reshape(-1, 4)
