"""Metrics for pose estimation, detection, single-object tracking and trajectory forecasting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boxes import BBox3D, iou_2d, iou_3d
from .geometry import geodesic_angle

DEFAULT_IOU = {"2d": 0.5, "3d": 0.25}
PRECISION_PIXELS = 20.0
NORM_PRECISION_THRESHOLD = 0.2


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# pose


@dataclass(frozen=True)
class PoseErrorReport:
    rot_err: float  # degrees
    pos_err: float  # metres
    size_err: float  # metres


def pose_errors(pred: BBox3D, gt: BBox3D) -> PoseErrorReport:
    rot = min(geodesic_angle(pred.rotation, gt.rotation), 180.0)
    pos = float(np.linalg.norm(pred.center - gt.center))
    size = float(np.mean(np.abs(np.subtract(pred.size, gt.size))))
    return PoseErrorReport(rot, pos, size)


def mean_pose_errors(reports) -> PoseErrorReport:
    reports = list(reports)
    if not reports:
        raise EvaluationError("no matched poses")
    return PoseErrorReport(*(float(np.mean([getattr(r, k) for r in reports]))
                             for k in ("rot_err", "pos_err", "size_err")))


# ---------------------------------------------------------------------------
# average precision


def _normalise_preds(preds):
    out = []
    for p in preds:
        if len(p) == 2:
            out.append((0, p[0], float(p[1])))
        else:
            out.append((p[0], p[1], float(p[2])))
    return out


def _normalise_gts(gts):
    return [(g[0], g[1]) if isinstance(g, tuple) and len(g) == 2 else (0, g) for g in gts]


def precision_recall(preds, gts, mode: str = "2d", iou_thr: float | None = None):
    """Greedy score-ordered matching. Returns (precision, recall, is_tp) per ranked prediction.

    `preds` items are (box, score) or (frame, box, score); `gts` items are
    box or (frame, box). Each prediction takes the best-overlapping GT of its
    frame that is still unmatched.
    """
    thr = DEFAULT_IOU[mode] if iou_thr is None else iou_thr
    overlap = iou_2d if mode == "2d" else iou_3d
    preds, gts = _normalise_preds(preds), _normalise_gts(gts)
    by_frame = {}
    for k, (frame, box) in enumerate(gts):
        by_frame.setdefault(frame, []).append(k)
    matched = np.zeros(len(gts), dtype=bool)
    order = sorted(range(len(preds)), key=lambda k: -preds[k][2])
    tp = np.zeros(len(preds), dtype=bool)
    for rank, k in enumerate(order):
        frame, box, _ = preds[k]
        best, best_iou = -1, -1.0
        for g in by_frame.get(frame, []):
            if matched[g]:
                continue
            iou = overlap(box, gts[g][1])
            if iou > best_iou:
                best, best_iou = g, iou
        if best >= 0 and best_iou >= thr:
            matched[best] = True
            tp[rank] = True
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    recall = ctp / max(len(gts), 1)
    precision = ctp / np.maximum(ctp + cfp, 1)
    return precision, recall, tp


def average_precision(preds, gts, mode: str = "2d", iou_thr: float | None = None) -> float:
    """Area under the all-points interpolated precision/recall curve."""
    if mode not in DEFAULT_IOU:
        raise EvaluationError(f"mode must be '2d' or '3d', got {mode!r}")
    preds, gts = list(preds), list(gts)
    if not gts:
        return 1.0 if not preds else 0.0
    if not preds:
        return 0.0
    precision, recall, _ = precision_recall(preds, gts, mode, iou_thr)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


# ---------------------------------------------------------------------------
# single-object tracking


@dataclass
class TrackEvalResult:
    auc: float
    precision: float
    precision_norm: float
    success_curve: np.ndarray = field(repr=False, default=None)
    thresholds: np.ndarray = field(repr=False, default=None)


def tracking_metrics(pred_boxes, gt_boxes) -> TrackEvalResult:
    """Success AUC, 20-pixel precision and size-normalised precision (all in percent).

    Boxes are per-frame [u_min, v_min, u_max, v_max].
    """
    pred = np.asarray(pred_boxes, dtype=float).reshape(-1, 4)
    gt = np.asarray(gt_boxes, dtype=float).reshape(-1, 4)
    if len(gt) == 0:
        raise EvaluationError("empty sequence")
    if len(pred) != len(gt):
        raise EvaluationError(f"frame count mismatch: {len(pred)} predictions vs {len(gt)} ground truth")
    ious = np.array([iou_2d(p, g) for p, g in zip(pred, gt)])
    thresholds = np.linspace(0.0, 1.0, 101)
    success = (ious[None, :] >= thresholds[:, None]).mean(axis=1)

    c_pred = (pred[:, :2] + pred[:, 2:]) / 2.0
    c_gt = (gt[:, :2] + gt[:, 2:]) / 2.0
    err = np.linalg.norm(c_pred - c_gt, axis=1)
    wh = gt[:, 2:] - gt[:, :2]
    norm_err = np.linalg.norm((c_pred - c_gt) / wh, axis=1)
    return TrackEvalResult(
        auc=100.0 * float(success.mean()),
        precision=100.0 * float(np.mean(err <= PRECISION_PIXELS)),
        precision_norm=100.0 * float(np.mean(norm_err <= NORM_PRECISION_THRESHOLD)),
        success_curve=success,
        thresholds=thresholds,
    )


# ---------------------------------------------------------------------------
# trajectory forecasting


@dataclass
class TrajEvalResult:
    ade: dict  # horizon (s) -> metres
    fde: dict

    def rows(self):
        return [(h, self.ade[h], self.fde[h]) for h in sorted(self.ade)]


def ade_fde(pred_track, gt_track, horizons=(1, 3, 5), rate: float = 15.0) -> TrajEvalResult:
    """Displacement errors over the first ``h * rate`` predicted frames for each horizon h."""
    pred = np.asarray(pred_track, dtype=float)
    gt = np.asarray(gt_track, dtype=float)
    n = min(len(pred), len(gt))
    err = np.linalg.norm(pred[:n] - gt[:n], axis=-1)
    ade, fde = {}, {}
    for h in horizons:
        steps = int(round(h * rate))
        if steps < 1 or steps > n:
            raise EvaluationError(f"horizon {h} s needs {steps} predicted frames, only {n} available")
        ade[h] = float(err[:steps].mean())
        fde[h] = float(err[steps - 1])
    return TrajEvalResult(ade, fde)


class KalmanCV:
    """Linear Kalman filter on [x, y, z, vx, vy, vz] with a constant-velocity model.

    Process noise is white acceleration with std ``sigma_a``; position
    measurements have std ``sigma_z``.
    """

    def __init__(self, dt: float, sigma_a: float = 1.0, sigma_z: float = 0.1):
        self.dt = dt
        eye = np.eye(3)
        self.F = np.block([[eye, dt * eye], [np.zeros((3, 3)), eye]])
        self.H = np.hstack([eye, np.zeros((3, 3))])
        g = np.array([[0.5 * dt * dt], [dt]])
        self.Q = np.kron(g @ g.T, eye) * sigma_a ** 2
        self.R = eye * sigma_z ** 2
        self.x = np.zeros(6)
        self.P = np.eye(6)

    def initialise(self, z0, z1) -> None:
        """Two-point start: position from z1, velocity from the difference."""
        z0, z1 = np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)
        dt, r = self.dt, self.R[0, 0]
        self.x = np.concatenate([z1, (z1 - z0) / dt])
        block = np.array([[r, r / dt], [r / dt, 2 * r / dt ** 2]])
        self.P = np.kron(block, np.eye(3))

    def predict(self) -> np.ndarray:
        self.x = self.F @ self.x
        self.P = self.F @ self.P @ self.F.T + self.Q
        return self.x[:3]

    def update(self, z) -> None:
        y = np.asarray(z, dtype=float) - self.H @ self.x
        s = self.H @ self.P @ self.H.T + self.R
        k = np.linalg.solve(s, self.H @ self.P).T
        self.x = self.x + k @ y
        self.P = (np.eye(6) - k @ self.H) @ self.P


def kalman_cv_predict(observed, horizon: float, rate: float = 15.0, sigma_a: float = 1.0,
                      sigma_z: float = 0.1) -> np.ndarray:
    """Filter the observed positions, then extrapolate ``horizon * rate`` frames without updates."""
    obs = np.asarray(observed, dtype=float).reshape(-1, 3)
    if len(obs) < 2:
        raise EvaluationError("need at least two observations")
    kf = KalmanCV(1.0 / rate, sigma_a, sigma_z)
    kf.initialise(obs[0], obs[1])
    for z in obs[2:]:
        kf.predict()
        kf.update(z)
    steps = int(round(horizon * rate))
    return np.array([kf.predict().copy() for _ in range(steps)]).reshape(steps, 3)
