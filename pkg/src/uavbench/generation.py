"""Scenario configuration and the world-tick generation loop."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import DifficultyThresholds, ObjectAnnotation, difficulty_score, project_bbox3d
from .boxes import BBox3D
from .dataset_io import ClipManifest, ClipWriter, FrameRecord, UAVEntry
from .geometry import (Calibration, CameraModel, EulerPose, FrameConvention, RigidTransform,
                       euler_to_matrix, intrinsics_from_fov, sensor_to_world)
from .sensors import LidarConfig, RadarConfig, lidar_scan, radar_scan, weather_profile
from .trajectory import (UAV_SPECS, PoseTrack, TrajectoryConfig, UAVModel, derive_seed,
                         generate_waypoints, revolutions_needed, sample_poses)

logger = logging.getLogger(__name__)

# Matrice 300 RTK is the most common platform; the rest share the remainder.
DEFAULT_MODEL_WEIGHTS = {m.value: (0.25 if m is UAVModel.MATRICE_300_RTK else 0.125) for m in UAVModel}


@dataclass
class ScenarioConfig:
    scene: str = "town01"
    weather: str = "clear_day"
    duration: float = 20.0
    rate: float = 15.0
    n_uavs: int | None = None  # None draws 1..7 per clip
    uav_models: list | None = None  # explicit model names, cycled; None samples by weight
    model_weights: dict = field(default_factory=lambda: dict(DEFAULT_MODEL_WEIGHTS))
    # elliptical path, per-UAV draws
    a_range: tuple = (12.0, 18.0)
    b_range: tuple = (5.0, 10.0)
    h0_range: tuple = (8.0, 18.0)
    dh_bound: float = 3.0
    n_waypoints: int = 20
    anchor_distance_range: tuple = (28.0, 38.0)
    anchor_lateral_range: tuple = (-8.0, 8.0)
    anchor_yaw_range: tuple = (-20.0, 20.0)
    drift_per_rev: float = 1.0
    speed_range: tuple = (0.3, 0.8)
    # sensor rig; all sensors look along +x (East), tilted up
    sensor_height: float = 1.5
    sensor_pitch: float = -20.0
    ir_baseline: float = 0.3
    image_width: int = 1280
    image_height: int = 720
    camera_hfov: float = 90.0
    lidar: dict = field(default_factory=dict)  # LidarConfig overrides
    radar: dict = field(default_factory=dict)  # RadarConfig overrides
    enable_lidar: bool = True
    ground_z: float = 0.0
    difficulty_easy_below: float = 60.0
    difficulty_hard_from: float = 150.0

    def __post_init__(self):
        if self.n_uavs is not None and not 1 <= self.n_uavs <= 7:
            raise ValueError(f"n_uavs must be within 1..7, got {self.n_uavs}")
        if self.duration <= 0 or self.rate <= 0:
            raise ValueError("duration and rate must be positive")
        for name in ("a_range", "b_range", "h0_range", "anchor_distance_range", "anchor_lateral_range",
                     "anchor_yaw_range", "speed_range"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.b_range[1] >= self.a_range[0]:
            raise ValueError("b_range must lie below a_range (flattened ellipse)")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.rate))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SensorRig:
    rgb: CameraModel
    ir: CameraModel
    lidar: LidarConfig
    radar: RadarConfig

    @property
    def calibration(self) -> Calibration:
        return Calibration(
            cameras={"rgb": self.rgb, "ir": self.ir},
            mounts={"lidar": (FrameConvention.LIDAR_FLU, self.lidar.pose.inverse()),
                    "radar": (FrameConvention.RADAR_FRD, self.radar.pose.inverse())},
        )


def build_rig(cfg: ScenarioConfig) -> SensorRig:
    base = np.array([0.0, 0.0, cfg.sensor_height])
    intr = intrinsics_from_fov(cfg.image_width, cfg.image_height, cfg.camera_hfov)
    rgb = intr.mounted(base, pitch=cfg.sensor_pitch)
    # IR camera sits to the right of the RGB camera (negative y in ENU)
    ir = intr.mounted(base + np.array([0.0, -cfg.ir_baseline, 0.0]), pitch=cfg.sensor_pitch)
    lidar_pose = sensor_to_world(base + np.array([0.0, 0.0, 0.2]), FrameConvention.LIDAR_FLU,
                                 pitch=cfg.sensor_pitch)
    radar_pose = sensor_to_world(base + np.array([0.0, 0.0, -0.2]), FrameConvention.RADAR_FRD,
                                 pitch=cfg.sensor_pitch)
    lidar = LidarConfig(**{"rate": cfg.rate, **cfg.lidar, "pose": lidar_pose})
    radar = RadarConfig(**{"rate": cfg.rate, **cfg.radar, "pose": radar_pose})
    return SensorRig(rgb, ir, lidar, radar)


@dataclass
class SimulatedUAV:
    entry: UAVEntry
    trajectory: TrajectoryConfig
    track: PoseTrack

    def box(self, k: int) -> BBox3D:
        """World-frame box at tick k."""
        length, width, height = self.entry.spec.dims
        return BBox3D(self.track.positions[k], (width, height, length),
                      euler_to_matrix(self.track.roll[k], self.track.pitch[k], self.track.yaw[k]),
                      self.entry.instance_id, self.entry.spec.model.value)


def _pick_models(cfg: ScenarioConfig, rng: np.random.Generator, n: int) -> list:
    if cfg.uav_models:
        return [UAVModel(cfg.uav_models[k % len(cfg.uav_models)]) for k in range(n)]
    names = sorted(cfg.model_weights)
    p = np.array([cfg.model_weights[m] for m in names], dtype=float)
    picks = rng.choice(len(names), size=n, p=p / p.sum())
    return [UAVModel(names[i]) for i in picks]


def simulate_uavs(cfg: ScenarioConfig, seed: int) -> list:
    """Per-UAV trajectory configs and sampled tracks covering the clip."""
    rng = np.random.default_rng(derive_seed(seed, 0))
    n = cfg.n_uavs if cfg.n_uavs is not None else int(rng.integers(1, 8))
    uavs = []
    for k, model in enumerate(_pick_models(cfg, rng, n)):
        instance_id = k + 1
        uav_seed = derive_seed(seed, instance_id)
        urng = np.random.default_rng(uav_seed)
        dist = urng.uniform(*cfg.anchor_distance_range)
        lateral = urng.uniform(*cfg.anchor_lateral_range)
        yaw = urng.uniform(*cfg.anchor_yaw_range)
        anchor = RigidTransform(euler_to_matrix(0.0, 0.0, yaw), [dist, lateral, 0.0])
        traj = TrajectoryConfig(a=urng.uniform(*cfg.a_range), b=urng.uniform(*cfg.b_range),
                                h0=urng.uniform(*cfg.h0_range), dh_bound=cfg.dh_bound,
                                n_waypoints=cfg.n_waypoints, anchor=anchor,
                                seed=int(urng.integers(2 ** 63)), drift_per_rev=cfg.drift_per_rev)
        spec = UAV_SPECS[model]
        revs = revolutions_needed(traj, spec, cfg.duration, cfg.speed_range)
        waypoints = generate_waypoints(traj, revolutions=revs)
        # start a random fraction of the way round so UAVs are not in lockstep
        shift = int(urng.integers(traj.n_waypoints))
        waypoints = waypoints[shift:]
        track = sample_poses(waypoints, spec, cfg.rate, int(urng.integers(2 ** 63)), uav_id=instance_id,
                             duration=cfg.duration, speed_range=cfg.speed_range)
        uavs.append(SimulatedUAV(UAVEntry(instance_id, spec, uav_seed), traj, track))
    return uavs


def annotate(uavs, k: int, cam: CameraModel, weather, thresholds: DifficultyThresholds) -> list:
    """Camera-frame ground truth for every UAV in front of the camera at tick k."""
    out = []
    for uav in uavs:
        cam_box = uav.box(k).transformed(cam.extrinsic)
        if cam_box.center[2] <= 0:
            continue
        d = float(np.linalg.norm(cam_box.center))
        pose = EulerPose(cam_box.center, uav.track.roll[k], uav.track.pitch[k], uav.track.yaw[k])
        out.append(ObjectAnnotation(
            instance_id=uav.entry.instance_id,
            uav_class=uav.entry.spec.model.value,
            bbox3d=cam_box,
            pose=pose,
            difficulty=difficulty_score(d, uav.entry.spec.max_dimension, weather, thresholds),
            bbox2d=project_bbox3d(cam_box, cam),
        ))
    return out


def iter_scene(cfg: ScenarioConfig, seed: int, with_sensors: bool = True):
    """Advance the world one tick at a time; yields (uavs, FrameRecord) per tick."""
    rig = build_rig(cfg)
    weather = weather_profile(cfg.weather)
    thresholds = DifficultyThresholds(cfg.difficulty_easy_below, cfg.difficulty_hard_from)
    uavs = simulate_uavs(cfg, seed)
    clip_tag = f"{seed & 0xFFFFFFFF:08x}"
    empty = np.zeros((0, 4), dtype="<f4")
    for tick in range(cfg.frame_count):
        # every sensor below reads the world state of this tick only
        boxes = [u.box(tick) for u in uavs]
        annotations = annotate(uavs, tick, rig.rgb, weather, thresholds)
        lidar = empty
        if with_sensors and cfg.enable_lidar:
            scan = lidar_scan(rig.lidar, boxes, cfg.ground_z, weather, derive_seed(seed, tick, 1))
            lidar = scan.to_float32()
            hits = dict(zip(*np.unique(scan.target, return_counts=True)))
            for a in annotations:
                a.lidar_points = int(hits.get(a.instance_id, 0))
        states = [(u.track.positions[tick], u.track.velocities[tick], u.entry.instance_id) for u in uavs]
        radar = radar_scan(rig.radar, states if with_sensors else [], weather, derive_seed(seed, tick, 2))
        yield uavs, FrameRecord(tick, tick, lidar, radar, annotations, sync_token=f"{clip_tag}-{tick:06d}")


def run_generation(cfg: ScenarioConfig, seed: int, out_dir, clip_id: str | None = None) -> Path:
    """Simulate one clip and write it under ``out_dir/clip_<id>``."""
    clip_id = clip_id or f"{seed & 0xFFFFFFFF:08x}"
    root = Path(out_dir) / f"clip_{clip_id}"
    rig = build_rig(cfg)
    writer = None
    for uavs, frame in iter_scene(cfg, seed):
        if writer is None:
            manifest = ClipManifest(
                clip_id=clip_id, scene=cfg.scene, weather=weather_profile(cfg.weather), rate=cfg.rate,
                duration=cfg.duration, uavs=[u.entry for u in uavs],
                config={"seed": seed, "scenario": cfg.to_dict(), "lidar": rig.lidar.to_dict(),
                        "radar": rig.radar.to_dict()},
            )
            writer = ClipWriter(root, manifest, rig.calibration)
        writer.append_frame(frame)
    if writer is None:
        raise ValueError("scenario produced no frames")
    return writer.finalize()


def generate_clips(cfg: ScenarioConfig, seed: int, out_dir, n_clips: int = 1) -> list:
    paths = []
    for c in range(n_clips):
        clip_seed = derive_seed(seed, 1_000_003, c)
        paths.append(run_generation(cfg, clip_seed, out_dir, clip_id=f"{c:04d}"))
        logger.info("wrote %s", paths[-1])
    return paths


def simulate_annotations(cfg: ScenarioConfig, seed: int) -> list:
    """Annotation-only pass (no sensor synthesis), one list of objects per frame."""
    return [frame.annotations for _, frame in iter_scene(cfg, seed, with_sensors=False)]
