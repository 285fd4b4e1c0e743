"""Instance ground truth on spherical images from 3D box labels.

Also serves as the oracle detector: ground-truth instances can be degraded
(dropped, box-jittered, re-scored) into detection records.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from pointit.pcio import Box3D, Category, DetectionRecord, LabeledObject
from pointit.projection import SphericalImage, center_from_mask

BOX_MARGIN = 0.05
MIN_CELLS = 8
KEPT_CATEGORIES = frozenset({Category.CAR, Category.PEDESTRIAN, Category.CYCLIST})


def point_in_box(points, box: Box3D, margin: float = BOX_MARGIN):
    """Containment test in the box frame, with half-extents grown by ``margin``.

    Accepts a single point (returns bool) or an (N, >=3) array (returns a mask).
    """
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)[:, :3] - np.asarray(box.center, dtype=np.float64)
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    # rotate by -yaw
    xr = c * p[:, 0] + s * p[:, 1]
    yr = -s * p[:, 0] + c * p[:, 1]
    inside = ((np.abs(xr) <= box.l / 2 + margin)
              & (np.abs(yr) <= box.w / 2 + margin)
              & (np.abs(p[:, 2]) <= box.h / 2 + margin))
    return bool(inside[0]) if single else inside


def mask_box(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight half-open (col_min, row_min, col_max, row_max) bounds of a non-empty mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1


@dataclass
class Instance:
    track_id: int
    category: Category
    mask: np.ndarray = field(repr=False)
    box2d: tuple[int, int, int, int]
    center3d: tuple[float, float, float]


@dataclass
class InstanceFrame:
    frame: int
    instances: list[Instance]


def rasterize_instances(image: SphericalImage, objects: Sequence[LabeledObject], frame: int | None = None,
                        min_cells: int = MIN_CELLS, margin: float = BOX_MARGIN,
                        categories: Iterable[Category] | None = KEPT_CATEGORIES) -> InstanceFrame:
    if frame is None:
        frame = objects[0].frame if objects else 0
    if categories is not None:
        categories = set(categories)
        objects = [o for o in objects if o.category in categories]
    H, W = image.shape
    if not objects:
        return InstanceFrame(frame, [])

    rr, cc = np.nonzero(image.valid)
    xyz = image.channels[rr, cc, :3].astype(np.float64)
    owner = np.full(len(xyz), -1)
    best = np.full(len(xyz), np.inf)
    for k, obj in enumerate(objects):
        inside = point_in_box(xyz, obj.box3d, margin)
        if not inside.any():
            continue
        d = np.full(len(xyz), np.inf)
        d[inside] = np.linalg.norm(xyz[inside] - np.asarray(obj.box3d.center), axis=1)
        take = d < best
        owner[take] = k
        best[take] = d[take]

    instances = []
    for k, obj in enumerate(objects):
        sel = owner == k
        if sel.sum() < min_cells:
            continue
        mask = np.zeros((H, W), bool)
        mask[rr[sel], cc[sel]] = True
        instances.append(Instance(obj.track_id, obj.category, mask, mask_box(mask),
                                  center_from_mask(image, mask)))
    instances.sort(key=lambda inst: inst.track_id)
    return InstanceFrame(frame, instances)


def instances_to_ground_truth(frame: InstanceFrame) -> list[DetectionRecord]:
    return [DetectionRecord(frame.frame, inst.category, 1.0, inst.box2d, inst.mask.copy(), inst.track_id)
            for inst in frame.instances]


@dataclass(frozen=True)
class Degrade:
    drop_probability: float = 0.0
    box_jitter_px: float = 0.0
    score_floor: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must lie in [0, 1]")
        if self.box_jitter_px < 0:
            raise ValueError("box_jitter_px must be >= 0")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ValueError("score_floor must lie in [0, 1]")


def instances_to_detections(frame: InstanceFrame, degrade: Degrade = Degrade()) -> list[DetectionRecord]:
    """Simulate a detector from ground-truth instances.

    The random stream is keyed on (seed, frame), so a frame's detections do not
    depend on which other frames were generated.
    """
    rng = np.random.default_rng([degrade.seed, frame.frame])
    out = []
    for inst in frame.instances:
        H, W = inst.mask.shape
        # draw every variate up front so the stream layout is fixed per instance
        drop = rng.random() < degrade.drop_probability
        offsets = np.rint(rng.normal(0.0, 1.0, 4) * degrade.box_jitter_px).astype(int)
        score = float(rng.uniform(degrade.score_floor, 1.0))
        if drop:
            continue
        c0, r0, c1, r1 = np.asarray(inst.box2d) + offsets
        c0, c1 = int(np.clip(c0, 0, W - 1)), int(np.clip(c1, 1, W))
        r0, r1 = int(np.clip(r0, 0, H - 1)), int(np.clip(r1, 1, H))
        if c1 <= c0 or r1 <= r0:
            continue
        mask = np.zeros_like(inst.mask)
        mask[r0:r1, c0:c1] = inst.mask[r0:r1, c0:c1]
        if not mask.any():
            continue
        out.append(DetectionRecord(frame.frame, inst.category, score, (c0, r0, c1, r1), mask))
    return out
