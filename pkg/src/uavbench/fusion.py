"""LiDAR-guided RGB/IR feature alignment and fusion, score-level fusion and NMS.

Pixel convention follows :mod:`uavbench.geometry`: cell (row i, col j) has
its center at (u, v) = (j + 0.5, i + 0.5), and features are sampled at a
projected position from cell (floor(v), floor(u)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .boxes import BBox2D, BBox3D, iou_2d, iou_3d
from .geometry import CameraModel, project_points


class FusionError(ValueError):
    pass


@dataclass
class FeatureGrid:
    values: np.ndarray  # (H, W, D)
    frame_tag: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise FusionError(f"feature grid must be H x W x D with all sizes >= 1, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise FusionError("feature grid contains non-finite values")

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def stack(cls, *groups, frame_tag: str = "") -> "FeatureGrid":
        """Channel-wise concatenation of per-modality H x W (x C) maps."""
        parts = [g[..., None] if np.ndim(g) == 2 else np.asarray(g) for g in groups]
        return cls(np.concatenate(parts, axis=-1), frame_tag)


def _values(grid) -> np.ndarray:
    return grid.values if isinstance(grid, FeatureGrid) else np.asarray(grid)


@dataclass
class FusionConfig:
    r: float = 4
    K: int = 5
    weights: np.ndarray | None = None  # (D', 2D); None keeps the plain concatenation
    bias: np.ndarray | None = None  # (D',)
    aggregation: str = "mean"

    def __post_init__(self):
        if self.r < 0:
            raise FusionError("neighbourhood radius must be >= 0")
        if self.K < 1:
            raise FusionError("K must be >= 1")
        if self.aggregation != "mean":
            raise FusionError(f"unsupported aggregation {self.aggregation!r}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.ndim != 2:
                raise FusionError("fusion weights must be a 2D matrix")
            if self.bias is None:
                self.bias = np.zeros(self.weights.shape[0])
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=float)

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        return cls(r=d.get("r", 4), K=d.get("K", 5), weights=d.get("weights"), bias=d.get("bias"),
                   aggregation=d.get("aggregation", "mean"))

    @classmethod
    def load(cls, path) -> "FusionConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# correspondences


class CorrespondencePair(NamedTuple):
    p_rgb: np.ndarray
    p_ir: np.ndarray
    source_point_index: int


@dataclass
class Correspondences:
    p_rgb: np.ndarray  # (N, 2)
    p_ir: np.ndarray  # (N, 2)
    point_index: np.ndarray  # (N,)

    def __len__(self) -> int:
        return len(self.point_index)

    def __iter__(self):
        for k in range(len(self)):
            yield CorrespondencePair(self.p_rgb[k], self.p_ir[k], int(self.point_index[k]))

    @classmethod
    def from_pairs(cls, p_rgb, p_ir, point_index=None) -> "Correspondences":
        p_rgb = np.asarray(p_rgb, dtype=float).reshape(-1, 2)
        p_ir = np.asarray(p_ir, dtype=float).reshape(-1, 2)
        if point_index is None:
            point_index = np.arange(len(p_rgb))
        return cls(p_rgb, p_ir, np.asarray(point_index, dtype=np.int64))

    def scaled(self, rgb_scale=(1.0, 1.0), ir_scale=(1.0, 1.0)) -> "Correspondences":
        """Map image-pixel coordinates onto feature-grid coordinates."""
        return Correspondences(self.p_rgb * np.asarray(rgb_scale), self.p_ir * np.asarray(ir_scale),
                               self.point_index)


def build_correspondences(points, cam_rgb: CameraModel, cam_ir: CameraModel) -> Correspondences:
    """Project world points into both views; keep points visible in both, in input order."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    uv_rgb, z_rgb = project_points(pts, cam_rgb)
    uv_ir, z_ir = project_points(pts, cam_ir)
    ok = (z_rgb > 0) & (z_ir > 0) & cam_rgb.in_image(uv_rgb) & cam_ir.in_image(uv_ir)
    idx = np.flatnonzero(ok)
    return Correspondences(uv_rgb[idx], uv_ir[idx], idx)


# ---------------------------------------------------------------------------
# neighbourhood index


class PixelBuckets:
    """Hash grid of RGB projections keyed by integer pixel cell.

    Built once and then only read. ``neighbourhoods`` returns, for every
    pixel whose Chebyshev window of half-width r contains at least one
    projection, the candidate pairs with their squared distance to the
    pixel center.
    """

    def __init__(self, p_rgb: np.ndarray, height: int, width: int, r: float):
        self.p = np.asarray(p_rgb, dtype=float).reshape(-1, 2)
        self.height, self.width, self.r = int(height), int(width), float(r)
        cells = np.floor(self.p).astype(np.int64)
        self.cell_col, self.cell_row = cells[:, 0], cells[:, 1]
        key = self.cell_row * (self.width + 2 * self._reach + 2) + self.cell_col
        self._order = np.argsort(key, kind="stable")
        self._keys = key[self._order]

    @property
    def _reach(self) -> int:
        # one extra ring covers any rounding in the cell assignment
        return int(math.ceil(self.r)) + 1

    def _bucket(self, row: int, col: int) -> np.ndarray:
        key = row * (self.width + 2 * self._reach + 2) + col
        lo, hi = np.searchsorted(self._keys, [key, key + 1])
        return self._order[lo:hi]

    def query(self, i: int, j: int) -> np.ndarray:
        """Pair indices inside the window of pixel (i, j), ascending."""
        cu, cv = j + 0.5, i + 0.5
        found = []
        for row in range(i - self._reach, i + self._reach + 1):
            for col in range(j - self._reach, j + self._reach + 1):
                for k in self._bucket(row, col):
                    u, v = self.p[k]
                    if abs(u - cu) <= self.r and abs(v - cv) <= self.r:
                        found.append(int(k))
        return np.array(sorted(found), dtype=np.int64)

    def neighbourhoods(self):
        """All (pixel, pair, squared distance) memberships, vectorised over pairs."""
        pix, pair, dist2 = [], [], []
        u, v = self.p[:, 0], self.p[:, 1]
        ids = np.arange(len(self.p))
        reach = self._reach
        for di in range(-reach, reach + 1):
            row = self.cell_row + di
            dv = v - (row + 0.5)
            ok_row = (row >= 0) & (row < self.height) & (np.abs(dv) <= self.r)
            for dj in range(-reach, reach + 1):
                col = self.cell_col + dj
                du = u - (col + 0.5)
                ok = ok_row & (col >= 0) & (col < self.width) & (np.abs(du) <= self.r)
                if not ok.any():
                    continue
                pix.append(row[ok] * self.width + col[ok])
                pair.append(ids[ok])
                dist2.append(du[ok] * du[ok] + dv[ok] * dv[ok])
        if not pix:
            z = np.zeros(0, np.int64)
            return z, z, np.zeros(0)
        return np.concatenate(pix), np.concatenate(pair), np.concatenate(dist2)


def neighbourhood_sets(corr: Correspondences, height: int, width: int, r: float) -> dict:
    """{(i, j): sorted pair indices} for every non-empty neighbourhood."""
    pix, pair, _ = PixelBuckets(corr.p_rgb, height, width, r).neighbourhoods()
    order = np.lexsort((pair, pix))
    pix, pair = pix[order], pair[order]
    out = {}
    if len(pix):
        starts = np.flatnonzero(np.r_[True, pix[1:] != pix[:-1]])
        for s, e in zip(starts, np.r_[starts[1:], len(pix)]):
            out[divmod(int(pix[s]), width)] = pair[s:e].copy()
    return out


def sample_cells(p: np.ndarray, height: int, width: int) -> np.ndarray:
    """Flat index of the nearest feature cell for each position (clamped to the grid)."""
    col = np.clip(np.floor(p[:, 0]).astype(np.int64), 0, width - 1)
    row = np.clip(np.floor(p[:, 1]).astype(np.int64), 0, height - 1)
    return row * width + col


def align_ir_features(f_ir, corr: Correspondences, cfg: FusionConfig, height: int, width: int) -> FeatureGrid:
    """Resample IR-branch features into RGB pixel space.

    For each RGB pixel, the pairs whose RGB projection falls in its window
    are ranked by distance to the pixel center (ties by pair index); the IR
    features at the first K of them are averaged. Pixels with no pair get
    the zero vector.
    """
    ir = _values(f_ir)
    if ir.ndim != 3:
        raise FusionError("IR features must be H x W x D")
    if ir.shape[:2] != (height, width):
        raise FusionError(f"IR grid {ir.shape[:2]} does not match RGB grid {(height, width)}")
    depth = ir.shape[2]
    ir_flat = ir.reshape(-1, depth)

    pix, pair, dist2 = PixelBuckets(corr.p_rgb, height, width, cfg.r).neighbourhoods()
    acc = np.zeros((height * width, depth), dtype=np.result_type(ir.dtype, np.float64))
    count = np.zeros(height * width, dtype=np.int64)
    if len(pix):
        order = np.lexsort((pair, dist2, pix))
        pix, pair = pix[order], pair[order]
        starts = np.flatnonzero(np.r_[True, pix[1:] != pix[:-1]])
        group_start = np.repeat(starts, np.diff(np.r_[starts, len(pix)]))
        rank = np.arange(len(pix)) - group_start
        keep = rank < cfg.K
        pix, pair, rank = pix[keep], pair[keep], rank[keep]
        cells = sample_cells(corr.p_ir[pair], height, width)
        # sum neighbours in rank order so the result is reproducible term by term
        for k in range(cfg.K):
            sel = rank == k
            if not sel.any():
                break
            acc[pix[sel]] += ir_flat[cells[sel]]
            count[pix[sel]] += 1
    filled = count > 0
    acc[filled] /= count[filled, None]
    return FeatureGrid(acc.reshape(height, width, depth), frame_tag="rgb")


def fuse_grids(f_rgb, f_ir_aligned, cfg: FusionConfig) -> FeatureGrid:
    """Per-pixel concat followed by a 1x1 linear map (weights, bias)."""
    rgb, ir = _values(f_rgb), _values(f_ir_aligned)
    if rgb.shape[:2] != ir.shape[:2]:
        raise FusionError(f"grid sizes differ: {rgb.shape[:2]} vs {ir.shape[:2]}")
    cat = np.concatenate([rgb, ir], axis=-1).astype(float)
    if cfg.weights is None:
        return FeatureGrid(cat, "rgb")
    if cfg.weights.shape[1] != cat.shape[-1]:
        raise FusionError(f"fusion weights expect {cfg.weights.shape[1]} input channels, got {cat.shape[-1]}")
    if cfg.bias.shape != (cfg.weights.shape[0],):
        raise FusionError("bias length must match the fusion output depth")
    return FeatureGrid(cat @ cfg.weights.T + cfg.bias, "rgb")


def lidar_guided_fusion(points, cam_rgb: CameraModel, cam_ir: CameraModel, f_rgb, f_ir,
                        cfg: FusionConfig = None) -> FeatureGrid:
    """End-to-end alignment and fusion from world-frame LiDAR points."""
    cfg = cfg or FusionConfig()
    rgb = _values(f_rgb)
    height, width = rgb.shape[:2]
    ir_h, ir_w = _values(f_ir).shape[:2]
    corr = build_correspondences(points, cam_rgb, cam_ir).scaled(
        (width / cam_rgb.width, height / cam_rgb.height), (ir_w / cam_ir.width, ir_h / cam_ir.height))
    aligned = align_ir_features(f_ir, corr, cfg, height, width)
    return fuse_grids(rgb, aligned, cfg)


# ---------------------------------------------------------------------------
# score-level fusion


@dataclass(frozen=True)
class ScoreWeights:
    rgb: float = 0.3
    ir: float = 0.3
    lidar: float = 0.2
    radar: float = 0.2

    def __post_init__(self):
        if abs(sum(self.as_array()) - 1.0) > 1e-12:
            raise FusionError(f"score weights must sum to 1, got {sum(self.as_array())!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.rgb, self.ir, self.lidar, self.radar])


def late_fusion_score(scores, weights: ScoreWeights = ScoreWeights()):
    """Weighted average of (RGB, IR, LiDAR-projection, radar-projection) confidences."""
    s = np.asarray(scores, dtype=float)
    if s.shape[-1] != 4:
        raise FusionError("expected four branch scores")
    w = weights.as_array()
    out = s[..., 0] * w[0] + s[..., 1] * w[1] + s[..., 2] * w[2] + s[..., 3] * w[3]
    return float(out) if out.ndim == 0 else out


@dataclass
class Detection:
    box: object  # BBox2D | BBox3D
    score: float
    label: str = ""
    extra: dict = field(default_factory=dict)


def fuse_branch_detections(branches, weights: ScoreWeights = ScoreWeights()) -> Detection:
    """Fuse one object's four branch detections: weighted score, geometry from the most confident branch."""
    if len(branches) != 4:
        raise FusionError("expected one detection per branch (RGB, IR, LiDAR, radar)")
    scores = [b.score for b in branches]
    best = branches[int(np.argmax(scores))]
    return Detection(best.box, late_fusion_score(scores, weights), best.label,
                     {**best.extra, "source_branch": int(np.argmax(scores))})


def _overlap(a, b) -> float:
    if isinstance(a, BBox3D):
        return iou_3d(a, b)
    return iou_2d(a, b)


def nms(detections, iou_threshold: float = 0.5) -> list:
    """Greedy non-maximum suppression; accepts Detection or (box, score) items.

    Equal scores keep insertion order.
    """
    items = [d if isinstance(d, Detection) else Detection(d[0], float(d[1])) for d in detections]
    order = sorted(range(len(items)), key=lambda k: -items[k].score)
    kept = []
    for k in order:
        if all(_overlap(items[k].box, items[j].box) <= iou_threshold for j in kept):
            kept.append(k)
    return [detections[k] for k in kept]


# ---------------------------------------------------------------------------
# binary tensor files: u32 H, W, D little-endian, then row-major float32


def write_tensor(path, grid) -> None:
    v = np.ascontiguousarray(_values(grid), dtype="<f4")
    if v.ndim != 3:
        raise FusionError("tensor must be H x W x D")
    with open(path, "wb") as fh:
        fh.write(np.array(v.shape, dtype="<u4").tobytes())
        fh.write(v.tobytes())


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FusionError(f"{path}: truncated tensor header")
    h, w, d = (int(x) for x in np.frombuffer(data[:12], dtype="<u4"))
    expected = 12 + 4 * h * w * d
    if len(data) != expected:
        raise FusionError(f"{path}: expected {expected} bytes for {h}x{w}x{d}, found {len(data)}")
    return np.frombuffer(data[12:], dtype="<f4").reshape(h, w, d).copy()
