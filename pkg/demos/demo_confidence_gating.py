#!/usr/bin/env python3
"""Confidence gating: DER as a function of the selection percentage.

Injects role-ambiguous filler sentences into the benchmark, then sweeps
the fraction of most-confident segments used for profile estimation.
Keeping every segment lets misassigned fillers contaminate the
profiles; keeping too few makes the profile estimates noisy.
"""

from rolediar import bench
from rolediar.cli import benchmark_spec
from rolediar.der import der_curve
from rolediar.diarize import PipelineConfig

print("building a 10-session benchmark with 20% filler sentences...")
world = bench.build_benchmark(benchmark_spec(seed=5, num_sessions=10, filler=0.2))
sessions = [bench.session_data(world, s, "asr", "sentence-marks") for s in world.sessions]
config = PipelineConfig(text_segmentation="sentence-marks")

percents = [float(p) for p in range(10, 101, 10)]
curve = der_curve(sessions, percents, config)

lo = min(v for _, v in curve)
hi = max(v for _, v in curve)
print("\n  top%   DER    ")
for p, v in curve:
    bar = "#" * int(round(36 * (v - lo) / (hi - lo + 1e-9)))
    print(f"  {p:4.0f}  {v:6.2f}  {bar}")

best_p, best_v = min(curve, key=lambda pv: (pv[1], pv[0]))
print(f"\nbest operating point: top {best_p:g}% at {best_v:.2f} DER "
      f"(ungated: {curve[-1][1]:.2f})")
