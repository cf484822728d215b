#!/usr/bin/env python3
"""Time the raster kernels under both backends and check they agree.

Runs each workload with the pure numpy implementation and the compiled
extension, reports best-of-N wall times, and fails loudly if the two
backends ever disagree on a result. Invoke from the repo root:

    python3 scripts/bench_backends.py [--repeat N] [--objects N]
"""

import argparse
import time

import numpy as np

from binpick import kernels
from binpick.grasp import detect_grasps
from binpick.world import Gripper, Location, default_workspace, generate_scene, rasterize


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_workloads(n_objects):
    ws = default_workspace()
    gripper = Gripper()
    world = generate_scene(
        n_objects,
        seed=1234,
        workspace=ws,
        shape_kind="mixed",
        pile_count=3,
        pile_spread=5.0,
        pile_contact=True,
        clearance=0.0,
    )
    bin_frame = rasterize(world, ws.bin_region, 2.0)

    # a busy synthetic label image for the per-kernel loops
    inst = np.zeros((256, 256), dtype=np.int32)
    sem = np.zeros((256, 256), dtype=np.int32)
    rng = np.random.default_rng(7)
    centers = rng.uniform(20.0, 236.0, size=(40, 2))
    radii = rng.uniform(4.0, 12.0, size=40)

    def paint():
        inst.fill(0)
        sem.fill(0)
        for k in range(40):
            kernels.paint_disk(
                inst, sem, k + 1, (k % 3) + 1, centers[k, 0], centers[k, 1], radii[k]
            )
        return inst.copy()

    def raster():
        f = rasterize(world, ws.bin_region, 2.0)
        return f.instance_mask

    def flood():
        total = 0
        base = paint()
        for k in range(40):
            total += kernels.flood_size(
                base, k + 1, int(centers[k, 0]), int(centers[k, 1])
            )
        return total

    def trace():
        base = paint()
        out = []
        for k in range(40):
            sr, sc = int(centers[k, 0]), int(centers[k, 1])
            if base[sr, sc] != k + 1:
                continue
            n = kernels.flood_size(base, k + 1, sr, sc)
            out.append(
                kernels.trace_boundary(base, k + 1, sr, sc, n, 0, 0, 255, 255)
            )
        return [np.asarray(b) for b in out]

    def probe():
        base = paint()
        hits = 0
        for r in range(8, 248, 3):
            for c in range(8, 248, 3):
                if kernels.disk_hits_label(base, float(r), float(c), 2.5):
                    hits += 1
        return hits

    def annulus():
        base = paint()
        total = 0
        for k in range(40):
            total += kernels.annulus_label_count(
                base, centers[k, 0], centers[k, 1], radii[k], radii[k] + 6.0
            )
        return total

    def grasps():
        found = detect_grasps(bin_frame, gripper)
        return [(g.item_id, g.u1, g.v1, g.u2, g.v2) for g in found]

    n_bin = world.count_at(Location.IN_BIN)
    return [
        ("paint_disk x40 (256px)", paint),
        (f"rasterize bin ({n_bin} items)", raster),
        ("flood_size x40", flood),
        ("trace_boundary x40", trace),
        ("disk_hits_label 6.4k probes", probe),
        ("annulus_label_count x40", annulus),
        ("detect_grasps bin frame", grasps),
    ]


def equal(a, b):
    if isinstance(a, np.ndarray):
        return isinstance(b, np.ndarray) and np.array_equal(a, b)
    if isinstance(a, list):
        return len(a) == len(b) and all(equal(x, y) for x, y in zip(a, b))
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    ap.add_argument("--objects", type=int, default=60, help="scene size")
    args = ap.parse_args()

    workloads = build_workloads(args.objects)

    try:
        kernels.set_backend("cython")
    except ImportError:
        raise SystemExit(
            "compiled extension not available; build it first "
            "(pip install -e . --no-build-isolation)"
        )

    rows = []
    mismatches = 0
    for name, fn in workloads:
        kernels.set_backend("python")
        ref = fn()
        t_py = best_of(fn, args.repeat)
        kernels.set_backend("cython")
        got = fn()
        t_cy = best_of(fn, args.repeat)
        ok = equal(ref, got)
        mismatches += 0 if ok else 1
        rows.append((name, t_py * 1e3, t_cy * 1e3, t_py / t_cy, ok))

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'python ms':>10}  {'cython ms':>10}  {'speedup':>8}  match")
    for name, py, cy, ratio, ok in rows:
        print(f"{name:<{width}}  {py:>10.3f}  {cy:>10.3f}  {ratio:>7.1f}x  {'yes' if ok else 'NO'}")

    if mismatches:
        raise SystemExit(f"{mismatches} workload(s) disagree between backends")


if __name__ == "__main__":
    main()
