"""Clip persistence and the shared-tick synchronisation contract.

Layout::

    clip_<id>/
        manifest.json      written last; its presence marks a finished clip
        calib.json
        frames/<n>.json
        lidar/<n>.bin      little-endian float32 (x, y, z, intensity) records

Timestamps are integer tick counts at the manifest's rate; every payload of
a frame must carry the frame's tick.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import ObjectAnnotation
from .geometry import Calibration
from .sensors import RadarScan, WeatherProfile
from .trajectory import UAVSpec

FORMAT_VERSION = 1
LIDAR_RECORD_BYTES = 16
MAX_UAVS = 7


class ClipFormatError(ValueError):
    """Schema or consistency violation; names the frame and field when known."""

    def __init__(self, message: str, frame: int | None = None, field: str | None = None):
        self.frame, self.field = frame, field
        where = []
        if frame is not None:
            where.append(f"frame {frame}")
        if field is not None:
            where.append(field)
        super().__init__(": ".join(where + [message]))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


@dataclass
class UAVEntry:
    instance_id: int
    spec: UAVSpec
    seed: int

    def to_dict(self) -> dict:
        return {"instance_id": self.instance_id, "spec": self.spec.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "UAVEntry":
        return cls(int(d["instance_id"]), UAVSpec.from_dict(d["spec"]), int(d["seed"]))


@dataclass
class ClipManifest:
    clip_id: str
    scene: str
    weather: WeatherProfile
    rate: float = 15.0
    duration: float = 20.0
    uavs: list = field(default_factory=list)
    frame_count: int = 0
    config: dict = field(default_factory=dict)

    @property
    def expected_frames(self) -> int:
        return int(round(self.duration * self.rate))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "clip_id": self.clip_id,
            "scene": self.scene,
            "weather": self.weather.to_dict(),
            "rate": self.rate,
            "duration": self.duration,
            "frame_count": self.frame_count,
            "timestamp_unit": "tick",
            "uavs": [u.to_dict() for u in self.uavs],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClipManifest":
        if d.get("format_version") != FORMAT_VERSION:
            raise ClipFormatError(f"unsupported format_version {d.get('format_version')!r}", field="manifest")
        return cls(d["clip_id"], d["scene"], WeatherProfile.from_dict(d["weather"]), d["rate"], d["duration"],
                   [UAVEntry.from_dict(u) for u in d["uavs"]], d["frame_count"], d.get("config", {}))


@dataclass
class FrameRecord:
    """All modalities captured at one world tick."""

    frame_index: int
    tick: int
    lidar: np.ndarray  # (N, 4) float32
    radar: RadarScan
    annotations: list  # ObjectAnnotation
    lidar_tick: int | None = None
    radar_tick: int | None = None
    annotations_tick: int | None = None
    sync_token: str = ""

    def __post_init__(self):
        self.lidar = np.asarray(self.lidar, dtype="<f4").reshape(-1, 4)
        for name in ("lidar_tick", "radar_tick", "annotations_tick"):
            if getattr(self, name) is None:
                setattr(self, name, self.tick)

    def timestamp(self, rate: float) -> float:
        return self.tick / rate

    def payload_ticks(self) -> dict:
        return {"lidar": self.lidar_tick, "radar": self.radar_tick, "annotations": self.annotations_tick}

    def to_dict(self) -> dict:
        n = self.frame_index
        return {
            "frame_index": n,
            "tick": self.tick,
            "sync_token": self.sync_token,
            "payloads": {
                "lidar": {"path": f"lidar/{n:06d}.bin", "tick": self.lidar_tick,
                          "num_points": int(len(self.lidar)), "format": "float32x4-le"},
                "radar": {"tick": self.radar_tick, "max_range": self.radar.max_range,
                          "returns": self.radar.to_records()},
                "annotations": {"tick": self.annotations_tick,
                                "objects": [a.to_dict() for a in self.annotations]},
            },
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameRecord):
            return NotImplemented
        return (self.to_dict() == other.to_dict()
                and self.lidar.tobytes() == other.lidar.tobytes())


@dataclass
class Clip:
    manifest: ClipManifest
    calibration: Calibration
    frames: list


def _check_sync(frame: FrameRecord, expected_tick: int) -> None:
    if frame.tick != expected_tick:
        raise ClipFormatError(f"tick {frame.tick} breaks the sequence (expected {expected_tick})",
                              frame.frame_index, "tick")
    for name, tick in frame.payload_ticks().items():
        if tick != frame.tick:
            raise ClipFormatError(f"timestamp mismatch: payload tick {tick} != frame tick {frame.tick}",
                                  frame.frame_index, f"payloads.{name}.tick")


class ClipWriter:
    """Single-writer clip builder; ``finalize`` writes the manifest last."""

    def __init__(self, root, manifest: ClipManifest, calibration: Calibration):
        self.root = Path(root)
        self.manifest = manifest
        self.calibration = calibration
        self.frame_count = 0
        self._first_tick = None
        (self.root / "frames").mkdir(parents=True, exist_ok=True)
        (self.root / "lidar").mkdir(parents=True, exist_ok=True)
        stale = self.root / "manifest.json"
        if stale.exists():
            stale.unlink()
        calibration.save(self.root / "calib.json")

    def append_frame(self, frame: FrameRecord) -> None:
        if frame.frame_index != self.frame_count:
            raise ClipFormatError(f"expected frame_index {self.frame_count}", frame.frame_index, "frame_index")
        if self._first_tick is None:
            self._first_tick = frame.tick
        _check_sync(frame, self._first_tick + self.frame_count)
        n = frame.frame_index
        (self.root / "lidar" / f"{n:06d}.bin").write_bytes(frame.lidar.tobytes())
        (self.root / "frames" / f"{n:06d}.json").write_text(_dumps(frame.to_dict()))
        self.frame_count += 1

    def finalize(self) -> Path:
        if self.frame_count == 0:
            raise ClipFormatError("refusing to finalize an empty clip", field="frame_count")
        self.manifest.frame_count = self.frame_count
        if self.manifest.expected_frames != self.frame_count:
            raise ClipFormatError(f"{self.frame_count} frames written but duration x rate = "
                                  f"{self.manifest.expected_frames}", field="frame_count")
        tmp = self.root / "manifest.json.tmp"
        tmp.write_text(_dumps(self.manifest.to_dict()))
        os.replace(tmp, self.root / "manifest.json")
        return self.root


def write_clip(clip: Clip, root) -> Path:
    writer = ClipWriter(root, clip.manifest, clip.calibration)
    for frame in clip.frames:
        writer.append_frame(frame)
    return writer.finalize()


def _read_frame(root: Path, n: int, manifest: ClipManifest) -> FrameRecord:
    path = root / "frames" / f"{n:06d}.json"
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ClipFormatError("frame file missing", n, str(path.relative_to(root))) from None
    except json.JSONDecodeError as exc:
        raise ClipFormatError(f"invalid JSON ({exc})", n) from None
    try:
        payloads = d["payloads"]
        lid, rad, ann = payloads["lidar"], payloads["radar"], payloads["annotations"]
        if d["frame_index"] != n:
            raise ClipFormatError(f"frame_index {d['frame_index']} stored in file for frame {n}", n, "frame_index")
        bin_path = root / lid["path"]
        if not bin_path.exists():
            raise ClipFormatError("LiDAR payload missing", n, "payloads.lidar.path")
        raw = bin_path.read_bytes()
        expected = lid["num_points"] * LIDAR_RECORD_BYTES
        if len(raw) != expected:
            raise ClipFormatError(f"payload length {len(raw)} bytes, expected {expected} "
                                  f"({lid['num_points']} points)", n, "payloads.lidar")
        lidar = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).copy()
        radar = RadarScan.from_records(rad["returns"], rad["max_range"])
        objects = [ObjectAnnotation.from_dict(o) for o in ann["objects"]]
        frame = FrameRecord(n, d["tick"], lidar, radar, objects, lid["tick"], rad["tick"], ann["tick"],
                            d["sync_token"])
    except KeyError as exc:
        raise ClipFormatError(f"missing field {exc.args[0]!r}", n) from None
    known = {u.instance_id for u in manifest.uavs}
    ids = [o.instance_id for o in frame.annotations]
    if len(ids) != len(set(ids)) or not set(ids) <= known or len(ids) > MAX_UAVS:
        raise ClipFormatError(f"instance ids {ids} inconsistent with manifest {sorted(known)}",
                              n, "payloads.annotations.objects")
    return frame


def read_manifest(root) -> ClipManifest:
    root = Path(root)
    path = root / "manifest.json"
    if not path.exists():
        raise ClipFormatError(f"{root}: no manifest.json (clip missing or not finalized)", field="manifest")
    return ClipManifest.from_dict(json.loads(path.read_text()))


def read_clip(root) -> Clip:
    """Load and validate a finished clip."""
    root = Path(root)
    manifest = read_manifest(root)
    calibration = Calibration.load(root / "calib.json")
    if manifest.frame_count != manifest.expected_frames:
        raise ClipFormatError(f"frame_count {manifest.frame_count} != duration x rate "
                              f"{manifest.expected_frames}", field="manifest.frame_count")
    on_disk = len(list((root / "frames").glob("*.json")))
    if on_disk != manifest.frame_count:
        raise ClipFormatError(f"{on_disk} frame files, manifest says {manifest.frame_count}",
                              field="manifest.frame_count")
    frames = []
    for n in range(manifest.frame_count):
        frame = _read_frame(root, n, manifest)
        _check_sync(frame, (frames[0].tick if frames else frame.tick) + n)
        frames.append(frame)
    return Clip(manifest, calibration, frames)


def find_clips(root) -> list:
    """Finished clip directories at or below `root`."""
    root = Path(root)
    if (root / "manifest.json").exists():
        return [root]
    return sorted(p.parent for p in root.glob("*/manifest.json"))
