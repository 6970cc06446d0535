"""
Ground truth, difficulty levels and dataset statistics
======================================================

"""

from uavbench.annotation import compute_stats, difficulty_score
from uavbench.generation import ScenarioConfig, simulate_annotations
from uavbench.sensors import weather_profile

# the difficulty score grows with distance, shrinks with object size and is scaled by weather
for d, s, w in [(0.81, 0.81, "clear_day"), (50, 0.81, "clear_day"), (30, 0.289, "fog_day")]:
    rec = difficulty_score(d, s, weather_profile(w))
    print(f"d={d:6.2f} m  size={s:.3f} m  {w:<9s} score={rec.score:7.1f}  {rec.level}")

# annotate three default clips without running the sensors, then summarise
cfg = ScenarioConfig()
clips = [simulate_annotations(cfg, seed) for seed in range(3)]
first = clips[0][0][0]
print("first object:", first.instance_id, first.uav_class, first.bbox2d)

report = compute_stats(clips)
print(report.summary())
