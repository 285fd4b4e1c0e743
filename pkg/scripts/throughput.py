"""Per-frame latency of projection plus one tracker step.

    python3 scripts/throughput.py --points 120000 --tracks 20 --iters 100
"""
import argparse
import gc
import math
import statistics
import time

import numpy as np

from pointit.pcio import Category, DetectionRecord, PointCloud
from pointit.projection import project
from pointit.tracker import Tracker


def sweep(n, rng):
    az = rng.uniform(-math.pi, math.pi, n)
    el = rng.uniform(math.radians(-24.9), math.radians(2.0), n)
    d = rng.uniform(2, 80, n)
    xyz = np.column_stack([d * np.cos(el) * np.cos(az), d * np.cos(el) * np.sin(az), d * np.sin(el)])
    return PointCloud(np.column_stack([xyz, rng.uniform(0, 1, n)]).astype(np.float32))


def detections(frame, n, shape=(64, 512)):
    out = []
    for k in range(n):
        c0, r0 = (24 * k) % (shape[1] - 20) + frame % 2, 8 + (k % 5) * 10
        box = (c0, r0, c0 + 16, r0 + 8)
        mask = np.zeros(shape, bool)
        mask[r0:r0 + 8, c0:c0 + 16] = True
        out.append(DetectionRecord(frame, Category.CAR, 0.9, box, mask))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=120_000)
    ap.add_argument("--tracks", type=int, default=20)
    ap.add_argument("--iters", type=int, default=100)
    args = ap.parse_args()

    cloud = sweep(args.points, np.random.default_rng(0))
    tracker = Tracker()
    for f in range(3):
        tracker.step(f, detections(f, args.tracks), project(cloud))

    proj, step = [], []
    gc.collect()
    gc.disable()
    for f in range(3, 3 + args.iters):
        dets = detections(f, args.tracks)
        t0 = time.perf_counter()
        image = project(cloud)
        t1 = time.perf_counter()
        tracker.step(f, dets, image)
        t2 = time.perf_counter()
        proj.append(t1 - t0)
        step.append(t2 - t1)
    gc.enable()

    total = [a + b for a, b in zip(proj, step)]
    for name, xs in (("projection", proj), ("tracker step", step), ("total", total)):
        print(f"{name:>12}: median {statistics.median(xs) * 1e3:6.2f} ms  "
              f"p95 {np.percentile(xs, 95) * 1e3:6.2f} ms")
    print(f"{len(tracker.tracks)} live tracks, {int(image.valid.sum())} occupied cells")


if __name__ == "__main__":
    main()
