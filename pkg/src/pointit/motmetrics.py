"""CLEAR-MOT evaluation in spherical-image pixel space."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from pointit.assoc import hungarian, iou_matrix
from pointit.errors import InputError
from pointit.pcio import Category

IOU_THRESHOLD = 0.5
_INVALID = 1e6


@dataclass(frozen=True)
class MotBox:
    id: int
    box: tuple[float, float, float, float]
    category: Category = Category.CAR


@dataclass
class SequenceEval:
    mota: float
    motp: float
    mt: int
    ml: int
    id_sw: int
    fm: int
    fp: int
    fn: int
    gt_total: int
    matches: int = 0
    gt_trajectories: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def match_frame(gt: Sequence[MotBox], hyp: Sequence[MotBox], prior: Mapping[int, int] | None = None,
                threshold: float = IOU_THRESHOLD) -> dict[int, tuple[int, float]]:
    """Correspondences {gt id: (hyp id, iou)} for one frame.

    Pairs from the previous frame that still overlap by ``threshold`` are kept
    first; the rest are matched by Hungarian on IoU.
    """
    prior = prior or {}
    gt_ids = [g.id for g in gt]
    hyp_ids = [h.id for h in hyp]
    if not gt or not hyp:
        return {}
    ious = iou_matrix(np.array([g.box for g in gt], float), np.array([h.box for h in hyp], float))
    out: dict[int, tuple[int, float]] = {}
    hyp_pos = {hid: k for k, hid in enumerate(hyp_ids)}
    used_g, used_h = set(), set()
    for gi, gid in enumerate(gt_ids):
        hid = prior.get(gid)
        if hid is None or hid not in hyp_pos or hyp_pos[hid] in used_h:
            continue
        hj = hyp_pos[hid]
        if ious[gi, hj] >= threshold:
            out[gid] = (hid, float(ious[gi, hj]))
            used_g.add(gi)
            used_h.add(hj)
    rest_g = [i for i in range(len(gt)) if i not in used_g]
    rest_h = [j for j in range(len(hyp)) if j not in used_h]
    if rest_g and rest_h:
        sub = ious[np.ix_(rest_g, rest_h)]
        cost = np.where(sub >= threshold, 1.0 - sub, _INVALID)
        for a, b in hungarian(cost):
            gi, hj = rest_g[a], rest_h[b]
            if ious[gi, hj] >= threshold:
                out[gt_ids[gi]] = (hyp_ids[hj], float(ious[gi, hj]))
    return out


def evaluate(gt_sequence: Mapping[int, Sequence[MotBox]], hyp_sequence: Mapping[int, Sequence[MotBox]],
             category: Category | None = None, threshold: float = IOU_THRESHOLD) -> SequenceEval:
    if category is not None:
        gt_sequence = {f: [b for b in bs if b.category == category] for f, bs in gt_sequence.items()}
        hyp_sequence = {f: [b for b in bs if b.category == category] for f, bs in hyp_sequence.items()}
    gt_total = sum(len(v) for v in gt_sequence.values())
    if gt_total == 0:
        raise InputError("ground truth is empty; MOTA is undefined")

    fp = fn = id_sw = fm = matches = 0
    iou_sum = 0.0
    prior: dict[int, int] = {}        # gt id -> hyp id, previous frame only
    last_hyp: dict[int, int] = {}     # gt id -> last hyp id it was ever matched to
    present: dict[int, int] = {}
    tracked: dict[int, int] = {}
    was_tracked: dict[int, bool] = {}  # status at the gt's previous appearance
    frames = sorted(set(gt_sequence) | set(hyp_sequence))
    for f in frames:
        gt = list(gt_sequence.get(f, ()))
        hyp = list(hyp_sequence.get(f, ()))
        corr = match_frame(gt, hyp, prior, threshold)
        fp += len(hyp) - len(corr)
        fn += len(gt) - len(corr)
        matches += len(corr)
        for g in gt:
            present[g.id] = present.get(g.id, 0) + 1
            m = corr.get(g.id)
            if m is None:
                was_tracked[g.id] = False
                continue
            hid, ov = m
            iou_sum += ov
            tracked[g.id] = tracked.get(g.id, 0) + 1
            if g.id in last_hyp and last_hyp[g.id] != hid:
                id_sw += 1
            if g.id in last_hyp and not was_tracked.get(g.id, True):
                fm += 1
            last_hyp[g.id] = hid
            was_tracked[g.id] = True
        prior = {gid: hid for gid, (hid, _) in corr.items()}

    ratios = [tracked.get(gid, 0) / n for gid, n in present.items()]
    return SequenceEval(
        mota=1.0 - (fn + fp + id_sw) / gt_total,
        motp=iou_sum / matches if matches else 0.0,
        mt=sum(r > 0.8 for r in ratios),
        ml=sum(r < 0.2 for r in ratios),
        id_sw=id_sw, fm=fm, fp=fp, fn=fn, gt_total=gt_total,
        matches=matches, gt_trajectories=len(present),
    )


REPORT_COLUMNS = ("MOTA", "MOTP", "MT", "ML", "ID_sw", "FM", "FP", "FN")


def _row(ev: SequenceEval) -> list[str]:
    return [f"{ev.mota:.3f}", f"{ev.motp:.3f}", str(ev.mt), str(ev.ml),
            str(ev.id_sw), str(ev.fm), str(ev.fp), str(ev.fn)]


def format_table(results: Mapping[str, SequenceEval]) -> str:
    header = ["name", *REPORT_COLUMNS]
    rows = [[name, *_row(ev)] for name, ev in results.items()]
    widths = [max(len(r[k]) for r in [header, *rows]) for k in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def format_keyvalue(ev: SequenceEval, prefix: str = "") -> str:
    vals = dict(zip(REPORT_COLUMNS, _row(ev)))
    vals["GT"] = str(ev.gt_total)
    return "".join(f"{prefix}{k}={v}\n" for k, v in vals.items())


def render_svg(gt: Sequence[MotBox], hyp: Sequence[MotBox], shape=(64, 512), scale: int = 2) -> str:
    """Box overlay for one frame: ground truth green, hypotheses red with ids."""
    H, W = shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * scale}" height="{H * scale}">',
             f'<rect width="{W * scale}" height="{H * scale}" fill="black"/>']
    for color, boxes in (("lime", gt), ("red", hyp)):
        for b in boxes:
            c0, r0, c1, r1 = (v * scale for v in b.box)
            parts.append(f'<rect x="{c0:.1f}" y="{r0:.1f}" width="{c1 - c0:.1f}" height="{r1 - r0:.1f}" '
                         f'fill="none" stroke="{color}"/>')
            parts.append(f'<text x="{c0:.1f}" y="{r0 - 1:.1f}" fill="{color}" font-size="8">{b.id}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def gt_boxes(records_per_frame) -> dict[int, list[MotBox]]:
    """MotBoxes from ground-truth detection records (which carry track ids)."""
    return {f: [MotBox(r.track_id, tuple(float(v) for v in r.box2d), r.category) for r in recs]
            for f, recs in records_per_frame.items()}


def track_boxes(tracks_per_frame) -> dict[int, list[MotBox]]:
    return {f: [MotBox(t.track_id, tuple(t.box2d), t.category) for t in ts]
            for f, ts in tracks_per_frame.items()}
