"""Ground-truth records, difficulty stratification and dataset statistics."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxes import BBox2D, BBox3D
from .geometry import CameraModel, EulerPose, wrap_degrees
from .sensors import WeatherProfile

LEVELS = ("easy", "moderate", "hard")


class StatsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# 2D labels


def project_bbox3d(box: BBox3D, cam: CameraModel) -> BBox2D | None:
    """Image-clipped hull of the projected corners of a camera-frame box.

    Corners with non-positive depth are ignored. Returns None when no corner
    is in front of the camera or the clipped hull is empty.
    """
    corners = box.corners()
    z = corners[:, 2]
    front = corners[z > 0]
    if len(front) == 0:
        return None
    u = cam.fx * (front[:, 0] / front[:, 2]) + cam.cx
    v = cam.fy * (front[:, 1] / front[:, 2]) + cam.cy
    u0, u1 = max(float(u.min()), 0.0), min(float(u.max()), float(cam.width))
    v0, v1 = max(float(v.min()), 0.0), min(float(v.max()), float(cam.height))
    if u0 >= u1 or v0 >= v1:
        return None
    return BBox2D(u0, v0, u1, v1, box.instance_id)


# ---------------------------------------------------------------------------
# difficulty


@dataclass(frozen=True)
class DifficultyThresholds:
    easy_below: float = 60.0
    hard_from: float = 150.0

    def __post_init__(self):
        if not self.easy_below <= self.hard_from:
            raise ValueError("easy threshold must not exceed hard threshold")

    def level(self, score: float) -> str:
        if score < self.easy_below:
            return "easy"
        if score < self.hard_from:
            return "moderate"
        return "hard"


@dataclass(frozen=True)
class DifficultyRecord:
    d: float
    s: float
    w_weather: float
    score: float
    level: str

    def to_dict(self) -> dict:
        return {"d": self.d, "s": self.s, "w_weather": self.w_weather, "score": self.score, "level": self.level}

    @classmethod
    def from_dict(cls, d: dict) -> "DifficultyRecord":
        return cls(d["d"], d["s"], d["w_weather"], d["score"], d["level"])


def difficulty_score(d: float, s: float, weather, thresholds: DifficultyThresholds = DifficultyThresholds()
                     ) -> DifficultyRecord:
    """Distance-to-size ratio scaled by the weather visibility weight."""
    if not s > 0:
        raise ValueError(f"UAV size must be positive, got {s}")
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    w = weather.w_weather if isinstance(weather, WeatherProfile) else float(weather)
    score = d / s * w
    return DifficultyRecord(float(d), float(s), float(w), float(score), thresholds.level(score))


# ---------------------------------------------------------------------------
# per-object record


@dataclass
class ObjectAnnotation:
    """One UAV in one frame. Geometry in the RGB camera RDF frame.

    ``pose.position`` is the box center in the camera frame; roll/pitch/yaw
    are the body attitude relative to the gravity-aligned world frame.
    """

    instance_id: int
    uav_class: str
    bbox3d: BBox3D
    pose: EulerPose
    difficulty: DifficultyRecord
    bbox2d: BBox2D | None = None
    lidar_points: int = 0

    def to_dict(self) -> dict:
        b = self.bbox3d
        return {
            "instance_id": self.instance_id,
            "class": self.uav_class,
            "bbox2d": None if self.bbox2d is None else [float(x) for x in self.bbox2d.as_array()],
            "bbox3d": {"center": [float(x) for x in b.center], "size": [float(x) for x in b.size],
                       "rotation": [float(x) for x in b.rotation.ravel()]},
            "pose": {"position": [float(x) for x in self.pose.position], "roll": self.pose.roll,
                     "pitch": self.pose.pitch, "yaw": self.pose.yaw},
            "difficulty": self.difficulty.to_dict(),
            "lidar_points": self.lidar_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectAnnotation":
        b = d["bbox3d"]
        box = BBox3D(b["center"], b["size"], np.array(b["rotation"]).reshape(3, 3), d["instance_id"], d["class"])
        p = d["pose"]
        pose = EulerPose(p["position"], p["roll"], p["pitch"], p["yaw"])
        box2d = None if d["bbox2d"] is None else BBox2D(*d["bbox2d"], instance_id=d["instance_id"])
        return cls(d["instance_id"], d["class"], box, pose, DifficultyRecord.from_dict(d["difficulty"]),
                   box2d, d.get("lidar_points", 0))


# ---------------------------------------------------------------------------
# statistics


def circular_std(angles_deg) -> float:
    """Circular standard deviation in degrees."""
    a = np.radians(np.asarray(angles_deg, dtype=float))
    if a.size == 0:
        return 0.0
    r = float(np.hypot(np.mean(np.cos(a)), np.mean(np.sin(a))))
    return math.degrees(math.sqrt(-2.0 * math.log(min(max(r, 1e-300), 1.0))))


@dataclass
class StatsReport:
    n_clips: int
    n_frames: int
    n_annotations: int
    distance_edges: np.ndarray
    distance_counts: np.ndarray
    type_counts: dict
    angle_edges: np.ndarray
    roll_counts: np.ndarray
    pitch_counts: np.ndarray
    yaw_counts: np.ndarray
    level_counts: dict
    circular_std: dict = field(default_factory=dict)
    fraction_20_60: float = 0.0

    def summary(self) -> str:
        lines = [f"clips: {self.n_clips}  frames: {self.n_frames}  annotations: {self.n_annotations}",
                 f"distance in [20, 60] m: {100 * self.fraction_20_60:.1f}%"]
        total = sum(self.type_counts.values())
        for name, n in sorted(self.type_counts.items(), key=lambda kv: -kv[1]):
            lines.append(f"  {name:<20s} {n:8d}  {100 * n / total:5.1f}%")
        lines.append("difficulty: " + ", ".join(f"{k}={self.level_counts.get(k, 0)}" for k in LEVELS))
        lines.append("circular std (deg): " + ", ".join(f"{k}={v:.2f}" for k, v in self.circular_std.items()))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "n_clips": self.n_clips, "n_frames": self.n_frames, "n_annotations": self.n_annotations,
            "distance_hist": {"edges": self.distance_edges.tolist(), "counts": self.distance_counts.tolist()},
            "type_counts": dict(self.type_counts),
            "orientation_hist": {"edges": self.angle_edges.tolist(), "roll": self.roll_counts.tolist(),
                                 "pitch": self.pitch_counts.tolist(), "yaw": self.yaw_counts.tolist()},
            "level_counts": dict(self.level_counts),
            "circular_std": dict(self.circular_std),
            "fraction_20_60": self.fraction_20_60,
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "distance_hist.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_start_m", "bin_end_m", "count"])
            for lo, hi, c in zip(self.distance_edges[:-1], self.distance_edges[1:], self.distance_counts):
                w.writerow([f"{lo:g}", f"{hi:g}", int(c)])
        with open(out / "uav_types.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["uav_class", "count", "proportion"])
            total = sum(self.type_counts.values())
            for name, c in sorted(self.type_counts.items()):
                w.writerow([name, c, f"{c / total:.6f}"])
        with open(out / "orientation_hist.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_start_deg", "bin_end_deg", "roll", "pitch", "yaw"])
            e = self.angle_edges
            for i in range(len(e) - 1):
                w.writerow([f"{e[i]:g}", f"{e[i + 1]:g}", int(self.roll_counts[i]),
                            int(self.pitch_counts[i]), int(self.yaw_counts[i])])
        with open(out / "difficulty.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "count"])
            for level in LEVELS:
                w.writerow([level, self.level_counts.get(level, 0)])
        (out / "stats.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        (out / "summary.txt").write_text(self.summary() + "\n")


def _clip_frames(clip):
    frames = clip.frames if hasattr(clip, "frames") else clip
    return [f.annotations if hasattr(f, "annotations") else f for f in frames]


def compute_stats(clips, distance_bin: float = 10.0, angle_bin: float = 10.0) -> StatsReport:
    """Histograms of distance, UAV type, attitude and difficulty over annotated clips.

    `clips` is an iterable of clips; a clip is a sequence of frames (or has
    ``.frames``) and a frame is a sequence of ObjectAnnotation (or has
    ``.annotations``).
    """
    distances, rolls, pitches, yaws, yaw_steps = [], [], [], [], []
    types, levels = Counter(), Counter()
    n_clips = n_frames = 0
    for clip in clips:
        n_clips += 1
        last_yaw = {}
        for frame in _clip_frames(clip):
            n_frames += 1
            seen = {}
            for obj in frame:
                distances.append(obj.difficulty.d)
                rolls.append(obj.pose.roll)
                pitches.append(obj.pose.pitch)
                yaws.append(obj.pose.yaw)
                types[obj.uav_class] += 1
                levels[obj.difficulty.level] += 1
                if obj.instance_id in last_yaw:
                    yaw_steps.append(float(wrap_degrees(obj.pose.yaw - last_yaw[obj.instance_id])))
                seen[obj.instance_id] = obj.pose.yaw
            last_yaw = seen
    if n_frames == 0 or not distances:
        raise StatsError("no annotated frames to summarise")

    d = np.asarray(distances)
    top = max(100.0, math.ceil(d.max() / distance_bin) * distance_bin + distance_bin)
    d_edges = np.arange(0.0, top + 0.5 * distance_bin, distance_bin)
    d_counts, _ = np.histogram(d, bins=d_edges)
    a_edges = np.arange(-180.0, 180.0 + 0.5 * angle_bin, angle_bin)
    return StatsReport(
        n_clips=n_clips, n_frames=n_frames, n_annotations=len(distances),
        distance_edges=d_edges, distance_counts=d_counts,
        type_counts=dict(types),
        angle_edges=a_edges,
        roll_counts=np.histogram(rolls, bins=a_edges)[0],
        pitch_counts=np.histogram(pitches, bins=a_edges)[0],
        yaw_counts=np.histogram(yaws, bins=a_edges)[0],
        level_counts={k: levels.get(k, 0) for k in LEVELS},
        circular_std={"roll": circular_std(rolls), "pitch": circular_std(pitches),
                      "yaw": circular_std(yaws), "yaw_increment": circular_std(yaw_steps)},
        fraction_20_60=float(np.mean((d >= 20.0) & (d <= 60.0))),
    )
