"""ID switches on crossing scenarios as a function of the IoU weight.

    python3 scripts/crossing_ablation.py --seeds 20 --gaps 5 10 20
"""
import argparse
import time

from pointit.assoc import AssocConfig
from pointit.dsgen import Degrade, instances_to_ground_truth
from pointit.motmetrics import evaluate, gt_boxes, track_boxes
from pointit.sim import crossing_scenario, frames_to_tracker_input, synthesize
from pointit.tracker import TrackerConfig, run_sequence


def run(gap, alphas, seeds, drop, jitter):
    totals = {a: [0, 0.0] for a in alphas}
    for seed in range(seeds):
        frames = synthesize(crossing_scenario(gap, seed=seed))
        gt = gt_boxes({sf.frame: instances_to_ground_truth(sf.ground_truth) for sf in frames})
        inp = frames_to_tracker_input(frames, Degrade(drop, jitter, seed=seed))
        for a in alphas:
            ev = evaluate(gt, track_boxes(run_sequence(inp, TrackerConfig(assoc=AssocConfig.from_alpha(a)))))
            totals[a][0] += ev.id_sw
            totals[a][1] += ev.mota / seeds
    return totals


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--gaps", type=float, nargs="+", default=[5.0, 10.0, 20.0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75, 1.0])
    ap.add_argument("--drop", type=float, default=0.1)
    ap.add_argument("--jitter", type=float, default=1.5)
    args = ap.parse_args()

    t0 = time.perf_counter()
    print(f"{'gap':>5}  {'alpha':>5}  {'ID_sw':>5}  {'MOTA':>6}")
    for gap in args.gaps:
        for a, (id_sw, mota) in run(gap, args.alphas, args.seeds, args.drop, args.jitter).items():
            print(f"{gap:5.1f}  {a:5.2f}  {id_sw:5d}  {mota:6.3f}")
    print(f"# {args.seeds} seeds per row, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
