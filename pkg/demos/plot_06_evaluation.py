"""
Scoring detections, tracks and trajectory forecasts
===================================================

"""

import numpy as np

from uavbench.boxes import BBox2D, BBox3D
from uavbench.evaluation import ade_fde, average_precision, kalman_cv_predict, pose_errors, tracking_metrics
from uavbench.geometry import euler_to_matrix

# pose error between two boxes: geodesic rotation, centre distance, mean size deviation
gt = BBox3D([0.0, 0.0, 30.0], (0.8, 0.4, 0.7))
pred = BBox3D([0.3, -0.1, 30.5], (0.75, 0.45, 0.7), euler_to_matrix(0, 0, 12))
print(pose_errors(pred, gt))

# average precision: three ground-truth boxes, five ranked predictions
A, B, C, FAR = (BBox2D(x, 0, x + 10, 10) for x in (0, 50, 100, 300))
preds = [(A, 0.9), (FAR, 0.8), (B, 0.7), (FAR, 0.6), (C, 0.5)]
print("AP@0.5:", round(average_precision(preds, [A, B, C]), 4))

# tracking: success AUC and precision of a tracker drifting 1 px per frame
gt_boxes = np.array([[100 + 3 * k, 60, 140 + 3 * k, 90] for k in range(60)], dtype=float)
drift = gt_boxes + np.arange(60)[:, None] * [1, 0, 1, 0]
r = tracking_metrics(drift, gt_boxes)
print(f"AUC {r.auc:.1f}  P {r.precision:.1f}  P_norm {r.precision_norm:.1f}")

# trajectory forecasting: observe 1 s at 15 Hz, forecast 1, 3 and 5 s with a constant-velocity filter
t = np.arange(90) / 15.0
straight = np.column_stack([4 * t, -2 * t, 10 + 0 * t])
curved = np.column_stack([15 * np.cos(t / 2), 7 * np.sin(t / 2), 10 + 0 * t])
for name, track in (("straight", straight), ("curved", curved)):
    res = ade_fde(kalman_cv_predict(track[:15], 5.0), track[15:])
    print(name, {h: (round(a, 3), round(f, 3)) for h, a, f in res.rows()})
