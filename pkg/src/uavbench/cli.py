"""Command line entry point: generate, stats, eval, fuse."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .annotation import compute_stats
from .boxes import BBox2D, BBox3D
from .dataset_io import find_clips, read_clip
from .fusion import FusionConfig, lidar_guided_fusion, read_tensor, write_tensor
from .generation import ScenarioConfig, generate_clips
from .geometry import Calibration
from .sensors import WEATHER_CONDITIONS, read_lidar_bin

logger = logging.getLogger("uavbench")


def _box3d(d: dict) -> BBox3D:
    return BBox3D(d["center"], d["size"], np.array(d.get("rotation", np.eye(3).ravel())).reshape(3, 3))


def _load_gt(gt_dir):
    clips = [read_clip(p) for p in find_clips(gt_dir)]
    if not clips:
        raise SystemExit(f"no finished clips under {gt_dir}")
    return {c.manifest.clip_id: c for c in clips}


def _clip_key(item: dict, clips: dict) -> str:
    if "clip" in item:
        return str(item["clip"])
    if len(clips) != 1:
        raise SystemExit("prediction entries must name their clip when --gt holds several clips")
    return next(iter(clips))


def _eval_detection(pred: dict, clips: dict, mode: str, iou: float | None) -> dict:
    gts, preds = [], []
    for cid, clip in clips.items():
        for f in clip.frames:
            for a in f.annotations:
                if mode == "2d" and a.bbox2d is not None:
                    gts.append(((cid, f.frame_index), a.bbox2d))
                elif mode == "3d":
                    gts.append(((cid, f.frame_index), a.bbox3d))
    for det in pred["detections"]:
        box = BBox2D(*det["bbox2d"]) if mode == "2d" else _box3d(det["bbox3d"])
        preds.append(((_clip_key(det, clips), int(det["frame"])), box, float(det["score"])))
    ap = ev.average_precision(preds, gts, mode, iou)
    return {"task": f"det{mode}", "iou_threshold": iou if iou is not None else ev.DEFAULT_IOU[mode],
            "num_gt": len(gts), "num_pred": len(preds), "ap": ap}


def _gt_index(clips: dict) -> dict:
    return {(cid, f.frame_index, a.instance_id): a for cid, c in clips.items() for f in c.frames
            for a in f.annotations}


def _eval_pose(pred: dict, clips: dict) -> dict:
    index = _gt_index(clips)
    reports = []
    for p in pred["poses"]:
        key = (_clip_key(p, clips), int(p["frame"]), int(p["instance_id"]))
        if key not in index:
            raise SystemExit(f"no ground truth for clip {key[0]} frame {key[1]} instance {key[2]}")
        reports.append(ev.pose_errors(_box3d(p["bbox3d"]), index[key].bbox3d))
    mean = ev.mean_pose_errors(reports)
    return {"task": "pose", "num_matched": len(reports), "rot_err_deg": mean.rot_err,
            "pos_err_m": mean.pos_err, "size_err_m": mean.size_err}


def _eval_track(pred: dict, clips: dict) -> dict:
    index = _gt_index(clips)
    rows = []
    for t in pred["tracks"]:
        cid, iid = _clip_key(t, clips), int(t["instance_id"])
        p_boxes, g_boxes = [], []
        for n, box in enumerate(t["boxes"]):
            gt = index.get((cid, n, iid))
            if gt is None or gt.bbox2d is None:
                continue
            g_boxes.append(gt.bbox2d.as_array())
            # a missing prediction counts as a total miss
            p_boxes.append(box if box is not None else [-1e6, -1e6, -1e6 + 1, -1e6 + 1])
        res = ev.tracking_metrics(p_boxes, g_boxes)
        rows.append({"clip": cid, "instance_id": iid, "frames": len(g_boxes), "auc": res.auc,
                     "precision": res.precision, "precision_norm": res.precision_norm})
    out = {"task": "track", "sequences": rows}
    for k in ("auc", "precision", "precision_norm"):
        out[k] = float(np.mean([r[k] for r in rows])) if rows else float("nan")
    return out


def _instance_track(clip, iid: int) -> dict:
    return {f.frame_index: a.bbox3d.center for f in clip.frames for a in f.annotations if a.instance_id == iid}


def _eval_traj(pred: dict | None, clips: dict, horizons, baseline: str | None) -> dict:
    results = []
    if baseline == "kalman":
        for cid, clip in clips.items():
            rate = clip.manifest.rate
            obs, hmax = int(round(rate)), int(round(max(horizons) * rate))
            for u in clip.manifest.uavs:
                track = _instance_track(clip, u.instance_id)
                frames = sorted(track)
                if len(frames) < obs + hmax or frames[obs + hmax - 1] - frames[0] != obs + hmax - 1:
                    continue
                seq = np.array([track[n] for n in frames[: obs + hmax]])
                p = ev.kalman_cv_predict(seq[:obs], max(horizons), rate)
                results.append(ev.ade_fde(p, seq[obs:], horizons, rate))
    else:
        for t in pred["trajectories"]:
            cid, iid = _clip_key(t, clips), int(t["instance_id"])
            clip = clips[cid]
            track = _instance_track(clip, iid)
            start = int(t["start_frame"])
            positions = np.asarray(t["positions"], dtype=float)
            gt = np.array([track[start + k] for k in range(len(positions)) if start + k in track])
            results.append(ev.ade_fde(positions[: len(gt)], gt, horizons, clip.manifest.rate))
    if not results:
        raise SystemExit("no trajectories long enough to evaluate")
    out = {"task": "traj", "num_trajectories": len(results), "horizons": {}}
    for h in horizons:
        out["horizons"][f"{h:g}"] = {"ade": float(np.mean([r.ade[h] for r in results])),
                                   "fde": float(np.mean([r.fde[h] for r in results]))}
    return out


def _print_table(summary: dict) -> None:
    w = csv.writer(sys.stdout)
    w.writerow(["metric", "value"])
    for k, v in summary.items():
        if k == "horizons":
            for h, d in v.items():
                w.writerow([f"ADE@{h}s", f"{d['ade']:.6f}"])
                w.writerow([f"FDE@{h}s", f"{d['fde']:.6f}"])
        elif k != "sequences":
            w.writerow([k, f"{v:.6f}" if isinstance(v, float) else v])


def cmd_generate(args) -> int:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    if args.weather:
        cfg.weather = args.weather
    if args.uavs is not None:
        cfg.n_uavs = args.uavs
    cfg = ScenarioConfig.from_dict(cfg.to_dict())
    paths = generate_clips(cfg, args.seed, args.out, args.clips)
    for p in paths:
        print(p)
    return 0


def cmd_stats(args) -> int:
    clips = [read_clip(p) for p in find_clips(args.dir)]
    report = compute_stats(clips)
    out = Path(args.out) if args.out else Path(args.dir) / "stats"
    report.write(out)
    print(report.summary())
    print(f"tables written to {out}")
    return 0


def cmd_eval(args) -> int:
    clips = _load_gt(args.gt)
    pred = json.loads(Path(args.pred).read_text()) if args.pred else None
    if pred is None and not (args.task == "traj" and args.baseline):
        raise SystemExit("--pred is required")
    if args.task in ("det2d", "det3d"):
        summary = _eval_detection(pred, clips, args.task[3:], args.iou)
    elif args.task == "pose":
        summary = _eval_pose(pred, clips)
    elif args.task == "track":
        summary = _eval_track(pred, clips)
    else:
        summary = _eval_traj(pred, clips, tuple(args.horizons), args.baseline)
    _print_table(summary)
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_fuse(args) -> int:
    rgb, ir = read_tensor(args.rgb_grid), read_tensor(args.ir_grid)
    calib = Calibration.load(args.calib)
    raw = read_lidar_bin(Path(args.points).read_bytes())[:, :3].astype(float)
    points = calib.mounts["lidar"][1].inverse().apply(raw) if "lidar" in calib.mounts else raw
    cfg = FusionConfig.load(args.config) if args.config else FusionConfig()
    fused = lidar_guided_fusion(points, calib.cameras["rgb"], calib.cameras["ir"], rgb, ir, cfg)
    write_tensor(args.out, fused)
    h, w, d = fused.shape
    print(f"fused grid {h}x{w}x{d} written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate clips")
    g.add_argument("--config", help="scenario JSON file (defaults if omitted)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--weather", choices=WEATHER_CONDITIONS)
    g.add_argument("--uavs", type=int, help="UAVs per clip (1-7)")
    g.add_argument("--clips", type=int, default=1)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="dataset distribution statistics")
    s.add_argument("dir")
    s.add_argument("--out", help="output directory for CSV tables (default DIR/stats)")
    s.set_defaults(func=cmd_stats)

    e = sub.add_parser("eval", help="score predictions against generated clips")
    e.add_argument("--task", required=True, choices=["pose", "det2d", "det3d", "track", "traj"])
    e.add_argument("--pred", help="prediction JSON file")
    e.add_argument("--gt", required=True, help="clip directory or a directory of clips")
    e.add_argument("--iou", type=float, help="IoU threshold for det2d/det3d")
    e.add_argument("--horizons", type=float, nargs="+", default=[1, 3, 5])
    e.add_argument("--baseline", choices=["kalman"], help="traj: evaluate a built-in predictor")
    e.add_argument("--out", help="write the machine-readable summary here")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("fuse", help="LiDAR-guided RGB/IR feature fusion")
    f.add_argument("--rgb-grid", required=True)
    f.add_argument("--ir-grid", required=True)
    f.add_argument("--points", required=True, help="LiDAR .bin (sensor frame when calib has a lidar mount)")
    f.add_argument("--calib", required=True)
    f.add_argument("--config", help="fusion JSON config (r, K, weights, bias)")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fuse)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
