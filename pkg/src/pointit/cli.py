"""Command-line frontend.

Subcommands: project, gen-dataset, track, eval, simulate. Exit status is 0 on
success, 1 on a runtime failure (unreadable or corrupt data) and 2 on a
usage or configuration error.

The optional ``--config`` file is INI-style::

    [projection]
    rows = 64
    cols = 512
    azimuth_max = 2.0          # degrees
    azimuth_min = -24.9
    zenith_halfwidth = 45.0

    [tracker]
    alpha = 0.5                # weight of IoU; distance gets 1 - alpha
    gate = 0.3
    max_age = 3
    min_hits = 2

    [degrade]
    drop_probability = 0.0
    box_jitter_px = 0.0
    score_floor = 0.5
    seed = 0

    [box_filter]               # diagonals, space separated
    p0 = 10 10 10 10 1e4 1e4 1e4
    q = 1 1 1 1 0.01 0.01 1e-4
    r = 1 1 10 10

    [center_filter]
    p0 = 1 1 1 100 100 100 100 100
    q = 0.01 0.01 0.01 0.1 0.1 0.1 0.1 0.1
    r = 0.25 0.25 0.25

Command-line flags override the file.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from pointit.assoc import AssocConfig
from pointit.dsgen import Degrade, instances_to_detections, instances_to_ground_truth, rasterize_instances
from pointit.errors import ConfigError, FormatError, PointitError, SpecError
from pointit.filters import BOX_NOISE, CENTER_NOISE, Noise
from pointit.motmetrics import (
    evaluate,
    format_keyvalue,
    format_table,
    gt_boxes,
    render_svg,
    track_boxes,
)
from pointit.pcio import (
    Category,
    read_detections,
    read_kitti_tracking_labels,
    read_tracks,
    read_velodyne,
    write_detections,
    write_tracks,
    write_velodyne,
)
from pointit.projection import ProjectionConfig, project, write_dump
from pointit.sim import crossing_scenario, format_scenario, read_scenario, synthesize
from pointit.tracker import Tracker, TrackerConfig

log = logging.getLogger("pointit")

TRAIN_SEQUENCES = tuple(f"{i:04d}" for i in range(19))
TEST_SEQUENCES = ("0019", "0020")


class UsageError(PointitError):
    pass


@dataclass(frozen=True)
class RunConfig:
    projection: ProjectionConfig = ProjectionConfig()
    tracker: TrackerConfig = TrackerConfig()
    degrade: Degrade = Degrade()


def _diagonal(section, key, size, default: np.ndarray) -> np.ndarray:
    if key not in section:
        return default
    vals = [float(v) for v in section[key].split()]
    if len(vals) != size:
        raise ConfigError(f"[{section.name}] {key} needs {size} values, got {len(vals)}")
    return np.diag(vals)


def _noise(cp, name, base: Noise, n_state: int, n_obs: int) -> Noise:
    if not cp.has_section(name):
        return base
    sec = cp[name]
    return Noise(_diagonal(sec, "p0", n_state, base.p0), _diagonal(sec, "q", n_state, base.q),
                 _diagonal(sec, "r", n_obs, base.r))


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional INI file and flag overrides.

    Weights are validated here, before any work starts.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from None
    for name in ("projection", "tracker", "degrade"):
        if not cp.has_section(name):
            cp.add_section(name)
    try:
        pr = cp["projection"]
        projection = ProjectionConfig(
            pr.getint("rows", 64), pr.getint("cols", 512),
            math.radians(pr.getfloat("azimuth_max", 2.0)),
            math.radians(pr.getfloat("azimuth_min", -24.9)),
            math.radians(pr.getfloat("zenith_halfwidth", 45.0)))
        tr = cp["tracker"]
        alpha = overrides.get("alpha", tr.getfloat("alpha", 0.5))
        assoc = AssocConfig.from_alpha(alpha, overrides.get("gate", tr.getfloat("gate", 0.3)))
        tracker = TrackerConfig(
            assoc,
            max_age=overrides.get("max_age", tr.getint("max_age", 3)),
            min_hits=overrides.get("min_hits", tr.getint("min_hits", 2)),
            box_noise=_noise(cp, "box_filter", BOX_NOISE, 7, 4),
            center_noise=_noise(cp, "center_filter", CENTER_NOISE, 8, 3),
        )
        dg = cp["degrade"]
        degrade = Degrade(
            overrides.get("drop", dg.getfloat("drop_probability", 0.0)),
            overrides.get("jitter", dg.getfloat("box_jitter_px", 0.0)),
            overrides.get("score_floor", dg.getfloat("score_floor", 0.5)),
            overrides.get("seed", dg.getint("seed", 0)),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return RunConfig(projection, tracker, degrade)


# ---------------------------------------------------------------------------
# subcommands


def _frame_of(path: Path) -> int:
    try:
        return int(path.stem)
    except ValueError:
        raise FormatError(f"{path}: file name is not a frame index") from None


def cmd_project(args) -> int:
    cfg = load_config(args.config)
    src = Path(args.input_dir)
    if not src.is_dir():
        raise UsageError(f"input directory not found: {src}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = dropped = 0
    for path in sorted(src.glob("*.bin")):
        cloud = read_velodyne(path)
        write_dump(project(cloud, cfg.projection), out / f"{path.stem}.sph")
        frames += 1
        dropped += cloud.dropped
    print(f"{frames} frames, {dropped} dropped points")
    return 0


def _parse_range(text):
    if text is None:
        return None
    lo, _, hi = text.partition(":")
    return (int(lo) if lo else None, int(hi) if hi else None)


def _in_range(frame, rng):
    if rng is None:
        return True
    lo, hi = rng
    return (lo is None or frame >= lo) and (hi is None or frame < hi)


def cmd_gen_dataset(args) -> int:
    cfg = load_config(args.config, {"drop": args.drop, "jitter": args.jitter, "seed": args.seed})
    root = Path(args.kitti_root)
    if args.sequences:
        seqs = args.sequences
    elif args.split == "train":
        seqs = TRAIN_SEQUENCES
    elif args.split == "test":
        seqs = TEST_SEQUENCES
    else:
        seqs = sorted(p.stem for p in (root / "label_02").glob("*.txt"))
    frange = _parse_range(args.frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shape = cfg.projection.shape
    for seq in seqs:
        label_path = root / "label_02" / f"{seq}.txt"
        calib_path = root / "calib" / f"{seq}.txt"
        if not label_path.is_file():
            raise UsageError(f"label file not found: {label_path}")
        if not calib_path.is_file():
            raise ConfigError(f"calibration file not found: {calib_path}")
        labels = read_kitti_tracking_labels(label_path, calib_path)
        dets, gts = [], []
        kept_frames = 0
        for frame, objs in labels.items():
            if not _in_range(frame, frange):
                continue
            bin_path = root / "velodyne" / seq / f"{frame:06d}.bin"
            if not bin_path.is_file():
                log.warning("missing sweep %s", bin_path)
                continue
            inst = rasterize_instances(project(read_velodyne(bin_path), cfg.projection), objs, frame=frame)
            if inst.instances:
                kept_frames += 1
            gts += instances_to_ground_truth(inst)
            dets += instances_to_detections(inst, cfg.degrade)
        write_detections(gts, out / f"{seq}.gt.txt", shape)
        write_detections(dets, out / f"{seq}.det.txt", shape)
        print(f"{seq}: {kept_frames} frames, {len(gts)} instances, {len(dets)} detections")
    return 0


def cmd_track(args) -> int:
    cfg = load_config(args.config, {"alpha": args.alpha, "gate": args.gate,
                                    "max_age": args.max_age, "min_hits": args.min_hits})
    clouds = Path(args.clouds)
    if not clouds.is_dir():
        raise UsageError(f"cloud directory not found: {clouds}")
    if not Path(args.detections).is_file():
        raise UsageError(f"detection file not found: {args.detections}")
    dets = read_detections(args.detections, cfg.projection.shape)
    tracker = Tracker(cfg.tracker)
    outputs = {}
    for path in sorted(clouds.glob("*.bin"), key=_frame_of):
        frame = _frame_of(path)
        image = project(read_velodyne(path), cfg.projection)
        outputs[frame] = tracker.step(frame, dets.get(frame, []), image)
    write_tracks(outputs, args.out)
    n_ids = len({t.track_id for ts in outputs.values() for t in ts})
    print(f"{len(outputs)} frames, {n_ids} track ids")
    return 0


def _read_hypotheses(path):
    """Track output, or a ground-truth style sidecar (9 fields) for self-evaluation."""
    with open(path) as f:
        first = next((ln.split() for ln in f if ln.strip() and not ln.lstrip().startswith("#")), [])
    if len(first) == 9:
        return gt_boxes(read_detections(path))
    return track_boxes(read_tracks(path))


def cmd_eval(args) -> int:
    for p in (args.gt, args.hyp):
        if not Path(p).is_file():
            raise UsageError(f"file not found: {p}")
    gt = gt_boxes(read_detections(args.gt))
    if any(b.id is None for bs in gt.values() for b in bs):
        raise FormatError(f"{args.gt}: ground truth records need a track_id column")
    hyp = _read_hypotheses(args.hyp)
    category = Category.parse(args.category) if args.category else None
    ev = evaluate(gt, hyp, category=category)
    report = format_table({Path(args.hyp).stem: ev}) + format_keyvalue(ev)
    if args.out:
        Path(args.out).write_text(report)
    sys.stdout.write(report)
    if args.svg_dir:
        svg = Path(args.svg_dir)
        svg.mkdir(parents=True, exist_ok=True)
        for f in sorted(set(gt) | set(hyp)):
            (svg / f"{f:06d}.svg").write_text(render_svg(gt.get(f, []), hyp.get(f, [])))
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, {"drop": args.drop, "jitter": args.jitter, "seed": args.seed})
    if args.spec:
        if not Path(args.spec).is_file():
            raise UsageError(f"scenario file not found: {args.spec}")
        spec = read_scenario(args.spec)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
    else:
        spec = crossing_scenario(args.depth_gap, frames=args.frames,
                                 seed=args.seed if args.seed is not None else 0,
                                 sensor=cfg.projection)
    frames = synthesize(spec)
    out = Path(args.out)
    (out / "velodyne").mkdir(parents=True, exist_ok=True)
    gts, dets = [], []
    for sf in frames:
        write_velodyne(sf.cloud, out / "velodyne" / f"{sf.frame:06d}.bin")
        gts += instances_to_ground_truth(sf.ground_truth)
        dets += instances_to_detections(sf.ground_truth, cfg.degrade)
    shape = spec.sensor.shape
    write_detections(gts, out / "gt.txt", shape)
    write_detections(dets, out / "detections.txt", shape)
    (out / "scenario.ini").write_text(format_scenario(spec))
    n_traj = len({g.track_id for g in gts})
    print(f"{len(frames)} frames, {n_traj} trajectories, {len(dets)} detections")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointit", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file (see module docs)")

    sp = sub.add_parser("project", help="project velodyne sweeps to spherical image dumps")
    sp.add_argument("input_dir", help="directory of .bin sweeps")
    sp.add_argument("out", help="output directory for .sph dumps")
    common(sp)
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("gen-dataset", help="instance ground truth and oracle detections from KITTI tracking")
    sp.add_argument("kitti_root", help="directory holding velodyne/, label_02/ and calib/")
    sp.add_argument("out", help="output directory for <seq>.gt.txt and <seq>.det.txt")
    sp.add_argument("--split", choices=("train", "test", "all"), default="all",
                    help="train = 0000-0018, test = 0019 and 0020")
    sp.add_argument("--sequences", nargs="+", help="explicit sequence names (overrides --split)")
    sp.add_argument("--frames", help="half-open frame range A:B, either end optional")
    sp.add_argument("--drop", type=float, help="oracle detector drop probability")
    sp.add_argument("--jitter", type=float, help="oracle detector box jitter, pixels")
    sp.add_argument("--seed", type=int, help="oracle detector seed")
    common(sp)
    sp.set_defaults(func=cmd_gen_dataset)

    sp = sub.add_parser("track", help="run the tracker over a sequence")
    sp.add_argument("--clouds", required=True, help="directory of <frame>.bin sweeps")
    sp.add_argument("--detections", required=True, help="detection sidecar file")
    sp.add_argument("--out", required=True, help="track output file")
    sp.add_argument("--alpha", type=float, help="IoU weight; distance weight is 1 - alpha (default 0.5)")
    sp.add_argument("--gate", type=float, help="minimum similarity for a match (default 0.3)")
    sp.add_argument("--max-age", type=int, help="frames a track may coast (default 3)")
    sp.add_argument("--min-hits", type=int, help="updates before a track is reported (default 2)")
    common(sp)
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("eval", help="CLEAR-MOT metrics of a track output against ground truth")
    sp.add_argument("--gt", required=True, help="ground-truth sidecar (with track_id column)")
    sp.add_argument("--hyp", required=True, help="track output file")
    sp.add_argument("--out", help="also write the report here")
    sp.add_argument("--category", help="evaluate one category only, e.g. Car")
    sp.add_argument("--svg-dir", help="write per-frame box overlays as SVG")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("simulate", help="generate a synthetic sequence")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="scenario file")
    src.add_argument("--preset", choices=("crossing",), help="built-in scenario")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, help="random seed (overrides the scenario)")
    sp.add_argument("--depth-gap", type=float, default=10.0, help="crossing preset: depth gap, metres")
    sp.add_argument("--frames", type=int, default=20, help="crossing preset: frame count")
    sp.add_argument("--drop", type=float, help="oracle detector drop probability")
    sp.add_argument("--jitter", type=float, help="oracle detector box jitter, pixels")
    common(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (UsageError, ConfigError, SpecError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PointitError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
