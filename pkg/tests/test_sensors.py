import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import raycast_oracle
from uavbench.boxes import BBox3D
from uavbench.geometry import FrameConvention, RigidTransform, euler_to_matrix, sensor_to_world
from uavbench.sensors import (
    GROUND_ID,
    WEATHER_CONDITIONS,
    LidarConfig,
    LidarScan,
    RadarConfig,
    WeatherProfile,
    apply_weather,
    lidar_scan,
    radar_scan,
    raycast,
    read_lidar_bin,
    weather_profile,
)

CLEAR = weather_profile("clear")


def small_lidar(channels=21, steps=61, hfov=120.0, vfov=20.0, **kw):
    return LidarConfig(channels=channels, hfov=hfov, vfov=vfov, rate=1.0,
                       points_per_second=channels * steps, **kw)


def random_box(rng, k, near=15.0):
    return BBox3D(rng.uniform([-near, -near, -3], [near, near, 6]), rng.uniform(0.2, 4.0, 3),
                  euler_to_matrix(*rng.uniform(-180, 180, 3)), instance_id=k)


# --- weather profiles -------------------------------------------------------

def test_eight_conditions_with_anchor_weights():
    assert len(WEATHER_CONDITIONS) == 8
    assert weather_profile("clear_day").w_weather == 1.0
    assert weather_profile("fog_day").w_weather == 2.5
    assert weather_profile("fog").condition == "fog_day"
    for name in WEATHER_CONDITIONS:
        p = weather_profile(name)
        assert p.w_weather >= 1.0
        if name.startswith("clear"):
            assert p.dropout_prob == 0 and p.is_identity


def test_fog_is_strongest():
    fog = weather_profile("fog_day")
    for name in WEATHER_CONDITIONS:
        assert weather_profile(name).dropout_prob <= fog.dropout_prob or name.startswith("fog")


def test_weather_overrides_and_validation():
    assert weather_profile("rain", dropout_prob=0.5).dropout_prob == 0.5
    with pytest.raises(KeyError):
        weather_profile("hail")
    with pytest.raises(ValueError):
        WeatherProfile("x", 1.0, dropout_prob=1.5)
    p = weather_profile("snow_night")
    assert WeatherProfile.from_dict(p.to_dict()) == p


# --- LiDAR grid -------------------------------------------------------------

def test_default_lidar_budget():
    cfg = LidarConfig()
    assert cfg.points_per_frame == 166666
    assert cfg.azimuth_steps == 166666 // 256
    assert cfg.num_rays <= cfg.points_per_frame
    d = cfg.ray_directions()
    assert d.shape == (cfg.num_rays, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-15)


def test_ray_grid_angles():
    cfg = small_lidar(5, 7, hfov=120, vfov=20)
    d = cfg.ray_directions().reshape(5, 7, 3)
    el = np.degrees(np.arcsin(d[..., 2]))
    az = np.degrees(np.arctan2(d[..., 1], d[..., 0]))
    assert np.allclose(el[:, 0], [-20, -10, 0, 10, 20], atol=1e-12)
    assert np.allclose(az[0], np.linspace(-60, 60, 7), atol=1e-12)


# --- ray casting ------------------------------------------------------------

def test_empty_scene_no_ground():
    scan = raycast(small_lidar(), [], ground_z=None)
    assert len(scan) == 0
    # level sensor with the ground below but out of range
    scan = raycast(small_lidar(max_range=5.0, pose=RigidTransform(translation=[0, 0, 100])), [], ground_z=0.0)
    assert len(scan) == 0


def test_unit_cube_ahead():
    cfg = small_lidar(41, 121, hfov=60, vfov=10)
    box = BBox3D([10.0, 0.0, 0.0], (1.0, 1.0, 1.0), instance_id=3)
    scan = raycast(cfg, [box], ground_z=None)
    assert len(scan) > 0 and set(scan.target) == {3}
    r = scan.ranges
    assert r.min() >= 9.5 and r.max() <= 10.5 + 1e-9
    centre = 20 * 121 + 60  # middle channel, middle azimuth
    k = np.flatnonzero(scan.ray_index == centre)
    assert len(k) == 1 and scan.ranges[k[0]] == 9.5


def test_ground_hits_and_intensity():
    # pitched 45 degrees down (positive pitch about the left axis), every ray meets the ground
    pose = sensor_to_world([0, 0, 2.0], FrameConvention.LIDAR_FLU, pitch=45.0)
    cfg = small_lidar(pose=pose)
    scan = raycast(cfg, [], ground_z=0.0)
    assert len(scan) == cfg.num_rays
    world = pose.apply(scan.points)
    assert np.allclose(world[:, 2], 0.0, atol=1e-9)
    assert np.all(scan.target == GROUND_ID)
    assert np.all((scan.intensity > 0) & (scan.intensity <= 1))


def test_box_occludes_ground():
    pose = RigidTransform(translation=[0, 0, 2.0])
    cfg = small_lidar(pose=pose)
    box = BBox3D([6.0, 0.0, 1.0], (8.0, 4.0, 2.0), instance_id=0)
    with_box = raycast(cfg, [box], ground_z=0.0)
    without = raycast(cfg, [], ground_z=0.0)
    assert (with_box.target == 0).any()
    blocked = np.isin(without.ray_index, with_box.ray_index[with_box.target == 0])
    assert blocked.any()


@pytest.mark.parametrize("seed", range(12))
def test_raycast_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    nbox = int(rng.integers(0, 4))
    boxes = [random_box(rng, k) for k in range(nbox)]
    hfov = float(rng.choice([90.0, 120.0, 360.0]))
    pose = sensor_to_world(rng.uniform(-2, 2, 3) + [0, 0, 3], FrameConvention.LIDAR_FLU,
                           *rng.uniform([-20, -30, -180], [20, 30, 180]))
    cfg = small_lidar(int(rng.integers(8, 24)), int(rng.integers(30, 90)), hfov=hfov,
                      vfov=float(rng.uniform(5, 40)), max_range=float(rng.uniform(10, 60)), pose=pose)
    ground = None if seed % 3 == 0 else float(rng.uniform(-1, 1))
    scan = raycast(cfg, boxes, ground_z=ground)
    oracle = raycast_oracle(cfg, boxes, ground)
    assert sorted(oracle) == scan.ray_index.tolist()
    dirs = cfg.ray_directions()
    for k, ray in enumerate(scan.ray_index):
        t, target = oracle[int(ray)]
        assert scan.target[k] == target
        assert np.array_equal(scan.points[k], dirs[ray] * t)


def test_sensor_inside_box_sees_nothing_of_it():
    cfg = small_lidar()
    box = BBox3D([0.0, 0.0, 0.0], (4.0, 4.0, 4.0), instance_id=1)
    assert len(raycast(cfg, [box], ground_z=None)) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(2, 40), st.floats(10, 360), st.floats(1, 60), st.integers(0, 1000))
def test_returns_inside_fov(channels, steps, hfov, vfov, seed):
    rng = np.random.default_rng(seed)
    cfg = small_lidar(channels, steps, hfov=hfov, vfov=vfov, max_range=40.0,
                      pose=RigidTransform(translation=[0, 0, 1.5]))
    scan = lidar_scan(cfg, [random_box(rng, k) for k in range(3)], 0.0, weather_profile("rain"), seed)
    if len(scan) == 0:
        return
    p = scan.points
    az = np.degrees(np.arctan2(p[:, 1], p[:, 0]))
    el = np.degrees(np.arctan2(p[:, 2], np.hypot(p[:, 0], p[:, 1])))
    assert np.all(np.abs(az) <= hfov / 2 + 1e-9)
    assert np.all(np.abs(el) <= vfov + 1e-9)
    assert np.all(scan.ranges <= cfg.max_range + 1e-9)


# --- weather degradation ----------------------------------------------------

def ground_config():
    pose = sensor_to_world([0, 0, 2.0], FrameConvention.LIDAR_FLU, pitch=45.0)
    return LidarConfig(channels=100, hfov=90, vfov=20, rate=15, points_per_second=1.5e6, pose=pose)


def test_clear_weather_is_identity():
    cfg = small_lidar(pose=RigidTransform(translation=[0, 0, 2]))
    scan = raycast(cfg, [], 0.0)
    assert apply_weather(scan, CLEAR, 7) is scan


def test_fog_dropout_retention():
    cfg = ground_config()
    clean = raycast(cfg, [], 0.0)
    assert len(clean) == 100_000
    fog = weather_profile("fog_day")
    assert fog.dropout_prob == 0.3
    kept = apply_weather(clean, fog, seed=123)
    assert abs(len(kept) / len(clean) - 0.7) <= 0.01


def test_full_dropout_empties_scan():
    clean = raycast(small_lidar(pose=RigidTransform(translation=[0, 0, 2])), [], 0.0)
    assert len(apply_weather(clean, weather_profile("fog", dropout_prob=1.0), 0)) == 0


def test_range_noise_statistics():
    clean = raycast(ground_config(), [], 0.0)
    noisy = apply_weather(clean, weather_profile("fog", dropout_prob=0.0, range_noise_sigma=0.1), seed=9)
    assert len(noisy) == len(clean)
    diff = noisy.ranges - clean.ranges
    assert abs(diff.std() - 0.1) <= 0.005
    # noise acts along the ray
    cos = np.einsum("ij,ij->i", noisy.points, clean.points) / (noisy.ranges * clean.ranges)
    assert np.allclose(cos, 1.0, atol=1e-12)


def test_weather_is_seeded_per_ray():
    cfg = ground_config()
    clean = raycast(cfg, [], 0.0)
    fog = weather_profile("fog")
    a = apply_weather(clean, fog, 5)
    b = apply_weather(clean, fog, 5)
    assert np.array_equal(a.points, b.points)
    # dropping unrelated rays beforehand does not change surviving perturbations
    half = apply_weather(clean.subset(clean.ray_index % 2 == 0), fog, 5)
    sel = np.isin(a.ray_index, half.ray_index)
    assert np.array_equal(a.points[sel], half.points)


def test_lidar_binary_round_trip():
    scan = raycast(small_lidar(pose=RigidTransform(translation=[0, 0, 2])), [], 0.0)
    raw = scan.to_float32().tobytes()
    back = read_lidar_bin(raw)
    assert back.dtype == np.dtype("<f4") and back.shape == (len(scan), 4)
    assert np.array_equal(back[:, :3], scan.points.astype(np.float32))
    with pytest.raises(ValueError):
        read_lidar_bin(raw[:-3])


# --- radar ------------------------------------------------------------------

def test_radar_boresight_receding():
    scan = radar_scan(RadarConfig(), [([10.0, 0, 0], [5.0, 0, 0], 4)], CLEAR, 0)
    assert len(scan) == 5
    assert np.all(scan.radial_velocity == 5.0)
    assert np.all(scan.target_id == 4) and np.all(scan.range == 10.0)
    assert np.all(scan.azimuth == 0.0) and np.all(scan.elevation == 0.0)


def test_radar_perpendicular_motion():
    scan = radar_scan(RadarConfig(), [([10.0, 0, 0], [0, 3.0, 0])], CLEAR, 0)
    assert np.all(scan.radial_velocity == 0.0)


def test_radar_range_cutoff():
    cfg = RadarConfig()
    assert len(radar_scan(cfg, [([31.0, 0, 0], [0, 0, 0])], CLEAR, 0)) == 0
    assert len(radar_scan(cfg, [([30.0, 0, 0], [0, 0, 0])], CLEAR, 0)) == 5


def test_radar_angles_frd():
    cfg = RadarConfig()
    # FRD: +y is right, -z is up
    s = radar_scan(cfg, [([10.0, 10.0, 0.0], [0, 0, 0])], CLEAR, 0)
    assert s.azimuth[0] == pytest.approx(45.0)
    s = radar_scan(cfg, [([10.0, 0.0, -3.0], [0, 0, 0])], CLEAR, 0)
    assert s.elevation[0] == pytest.approx(math.degrees(math.atan(0.3)))
    # outside the 40 degree vertical window
    assert len(radar_scan(cfg, [([10.0, 0.0, -10.0], [0, 0, 0])], CLEAR, 0)) == 0
    assert len(radar_scan(cfg, [([-10.0, 0.0, 0.0], [0, 0, 0])], CLEAR, 0)) == 0


def test_radar_mounted_in_world():
    pose = sensor_to_world([0, 0, 1.5], FrameConvention.RADAR_FRD, yaw=90.0)
    cfg = RadarConfig(pose=pose)
    s = radar_scan(cfg, [([0.0, 20.0, 1.5], [0.0, -4.0, 0.0])], CLEAR, 0)
    assert s.range[0] == pytest.approx(20.0) and s.radial_velocity[0] == pytest.approx(-4.0)


def test_radar_weather_noise():
    cfg = RadarConfig(returns_per_target=1)
    states = [([10.0, 0, 0], [5.0, 0, 0], k) for k in range(20000)]
    w = weather_profile("fog", dropout_prob=0.0, velocity_noise_sigma=0.2, range_noise_sigma=0.0)
    s = radar_scan(cfg, states, w, 1)
    assert abs((s.radial_velocity - 5.0).std() - 0.2) < 0.01
    assert np.all(s.range <= cfg.max_range)


def test_radar_records_round_trip():
    s = radar_scan(RadarConfig(), [([10.0, 2.0, -1.0], [1.0, 2.0, 3.0], 2)], weather_profile("rain"), 3)
    from uavbench.sensors import RadarScan
    back = RadarScan.from_records(s.to_records(), s.max_range)
    assert np.array_equal(back.range, s.range) and np.array_equal(back.target_id, s.target_id)
