import csv
import io
import json

import numpy as np
import pytest

from uavbench.cli import main
from uavbench.dataset_io import find_clips, read_clip
from uavbench.fusion import read_tensor, write_tensor


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "scenario.json"
    cfg.write_text(json.dumps({"duration": 7.0, "n_uavs": 2,
                               "lidar": {"channels": 16, "points_per_second": 16 * 60 * 15.0}}))
    assert main(["generate", "--config", str(cfg), "--seed", "5", "--out", str(root / "data"),
                 "--weather", "fog_day"]) == 0
    return root


def run_eval(capsys, *argv):
    assert main(["eval", *argv]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["metric", "value"]
    return dict(rows[1:])


def test_generate_writes_clip(dataset):
    clips = find_clips(dataset / "data")
    assert len(clips) == 1
    clip = read_clip(clips[0])
    assert len(clip.frames) == 105 and clip.manifest.weather.condition == "fog_day"
    assert clip.manifest.config["scenario"]["n_uavs"] == 2


def test_stats(dataset, capsys):
    assert main(["stats", str(dataset / "data")]) == 0
    assert "tables written" in capsys.readouterr().out
    assert (dataset / "data" / "stats" / "distance_hist.csv").exists()


def test_eval_det2d_and_det3d_on_ground_truth(dataset, tmp_path, capsys):
    clip = read_clip(find_clips(dataset / "data")[0])
    dets2d, dets3d = [], []
    for f in clip.frames:
        for a in f.annotations:
            b = a.bbox3d
            dets3d.append({"frame": f.frame_index, "score": 0.9, "bbox3d": {
                "center": b.center.tolist(), "size": list(b.size), "rotation": b.rotation.ravel().tolist()}})
            if a.bbox2d is not None:
                dets2d.append({"frame": f.frame_index, "score": 0.9, "bbox2d": a.bbox2d.as_array().tolist()})
    p2, p3 = tmp_path / "d2.json", tmp_path / "d3.json"
    p2.write_text(json.dumps({"detections": dets2d}))
    p3.write_text(json.dumps({"detections": dets3d}))
    out = run_eval(capsys, "--task", "det2d", "--pred", str(p2), "--gt", str(dataset / "data"))
    assert float(out["ap"]) == 1.0
    summary = tmp_path / "s.json"
    out = run_eval(capsys, "--task", "det3d", "--pred", str(p3), "--gt", str(dataset / "data"),
                   "--out", str(summary))
    assert float(out["ap"]) == 1.0 and json.loads(summary.read_text())["iou_threshold"] == 0.25


def test_eval_pose(dataset, tmp_path, capsys):
    clip = read_clip(find_clips(dataset / "data")[0])
    poses = []
    for f in clip.frames[:10]:
        for a in f.annotations:
            b = a.bbox3d
            poses.append({"frame": f.frame_index, "instance_id": a.instance_id, "bbox3d": {
                "center": (b.center + [3.0, 4.0, 0.0]).tolist(), "size": list(b.size),
                "rotation": b.rotation.ravel().tolist()}})
    path = tmp_path / "pose.json"
    path.write_text(json.dumps({"poses": poses}))
    out = run_eval(capsys, "--task", "pose", "--pred", str(path), "--gt", str(dataset / "data"))
    assert float(out["pos_err_m"]) == pytest.approx(5.0, abs=1e-6)
    assert float(out["rot_err_deg"]) < 1e-5 and float(out["size_err_m"]) == 0.0


def test_eval_track(dataset, tmp_path, capsys):
    clip = read_clip(find_clips(dataset / "data")[0])
    iid = clip.manifest.uavs[0].instance_id
    boxes = []
    for f in clip.frames:
        a = next((a for a in f.annotations if a.instance_id == iid), None)
        boxes.append(a.bbox2d.as_array().tolist() if a is not None and a.bbox2d is not None else None)
    path = tmp_path / "track.json"
    path.write_text(json.dumps({"tracks": [{"instance_id": iid, "boxes": boxes}]}))
    out = run_eval(capsys, "--task", "track", "--pred", str(path), "--gt", str(dataset / "data"))
    assert float(out["auc"]) == 100.0 and float(out["precision"]) == 100.0


def test_eval_traj_prediction_and_baseline(dataset, tmp_path, capsys):
    clip = read_clip(find_clips(dataset / "data")[0])
    iid = clip.manifest.uavs[0].instance_id
    track = [a.bbox3d.center.tolist() for f in clip.frames for a in f.annotations if a.instance_id == iid]
    path = tmp_path / "traj.json"
    path.write_text(json.dumps({"trajectories": [
        {"instance_id": iid, "start_frame": 15, "positions": track[15:90]}]}))
    out = run_eval(capsys, "--task", "traj", "--pred", str(path), "--gt", str(dataset / "data"))
    assert float(out["ADE@5s"]) == 0.0
    out = run_eval(capsys, "--task", "traj", "--baseline", "kalman", "--gt", str(dataset / "data"))
    assert 0 < float(out["FDE@1s"]) <= float(out["FDE@5s"])


def test_eval_requires_predictions(dataset):
    with pytest.raises(SystemExit):
        main(["eval", "--task", "det2d", "--gt", str(dataset / "data")])


def test_fuse(dataset, tmp_path, capsys):
    clip_dir = find_clips(dataset / "data")[0]
    rng = np.random.default_rng(0)
    write_tensor(tmp_path / "rgb.bin", rng.normal(size=(90, 160, 3)).astype(np.float32))
    write_tensor(tmp_path / "ir.bin", rng.normal(size=(90, 160, 2)).astype(np.float32))
    cfg = tmp_path / "fusion.json"
    cfg.write_text(json.dumps({"r": 1, "K": 3}))
    assert main(["fuse", "--rgb-grid", str(tmp_path / "rgb.bin"), "--ir-grid", str(tmp_path / "ir.bin"),
                 "--points", str(clip_dir / "lidar" / "000000.bin"), "--calib", str(clip_dir / "calib.json"),
                 "--config", str(cfg), "--out", str(tmp_path / "fused.bin")]) == 0
    fused = read_tensor(tmp_path / "fused.bin")
    assert fused.shape == (90, 160, 5)
    assert np.abs(fused[..., 3:]).sum() > 0  # some pixels received aligned IR features
    assert "fused grid 90x160x5" in capsys.readouterr().out
