"""Extended SORT: per-frame predict, associate, update, birth and death."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from pointit.assoc import AssocConfig, AssocResult, associate
from pointit.errors import SequenceError
from pointit.filters import (
    BOX_NOISE,
    CENTER_NOISE,
    BoxState,
    CenterState,
    Noise,
    box_init,
    box_predict,
    box_to_observation,
    box_update,
    center_init,
    center_predict,
    center_update,
)
from pointit.pcio import Category, DetectionRecord, PointCloud, TrackOutput
from pointit.projection import ProjectionConfig, SphericalImage, center_from_mask, project

NAN3 = (float("nan"),) * 3


@dataclass(frozen=True)
class TrackerConfig:
    assoc: AssocConfig = AssocConfig()
    max_age: int = 3
    min_hits: int = 2
    box_noise: Noise = BOX_NOISE
    center_noise: Noise = CENTER_NOISE

    def __post_init__(self):
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")


@dataclass
class Track:
    id: int
    category: Category
    box_filter: BoxState
    center_filter: CenterState | None
    hits: int = 1
    time_since_update: int = 0
    age: int = 0

    @property
    def center(self) -> tuple[float, float, float]:
        return NAN3 if self.center_filter is None else self.center_filter.position


@dataclass
class FrameDecision:
    """Association outcome for one category in one frame, in track-id terms."""

    matches: list[tuple[int, int]]  # (detection index in frame, track id)
    unmatched_detections: list[int]
    unmatched_tracks: list[int]
    spawned: list[int] = field(default_factory=list)


class Tracker:
    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config
        self.tracks: list[Track] = []
        self.frame: int | None = None
        self.next_id = 1
        self.decisions: dict[Category, FrameDecision] = {}

    def _spawn(self, det: DetectionRecord, center) -> Track:
        cfg = self.config
        t = Track(
            self.next_id,
            det.category,
            box_init(box_to_observation(det.box2d), cfg.box_noise),
            None if center is None else center_init(center, cfg.center_noise),
        )
        self.next_id += 1
        self.tracks.append(t)
        return t

    def step(self, frame: int, detections: Sequence[DetectionRecord],
             image: SphericalImage | None = None) -> list[TrackOutput]:
        if self.frame is not None and frame <= self.frame:
            raise SequenceError(f"frame {frame} does not follow frame {self.frame}")
        self.frame = frame
        cfg = self.config

        centers = [center_from_mask(image, d.mask, d.box2d) if image is not None else None for d in detections]

        for t in self.tracks:
            t.box_filter = box_predict(t.box_filter, cfg.box_noise)
            if t.center_filter is not None:
                t.center_filter = center_predict(t.center_filter, cfg.center_noise)
            t.age += 1
            t.time_since_update += 1

        self.decisions = {}
        categories = sorted({d.category for d in detections} | {t.category for t in self.tracks},
                            key=lambda c: c.value)
        for cat in categories:
            det_idx = [i for i, d in enumerate(detections) if d.category == cat]
            trks = [t for t in self.tracks if t.category == cat]
            res = associate(
                np.array([detections[i].box2d for i in det_idx], float).reshape(-1, 4),
                np.array([centers[i] or NAN3 for i in det_idx], float).reshape(-1, 3),
                np.array([t.box_filter.box for t in trks], float).reshape(-1, 4),
                np.array([t.center for t in trks], float).reshape(-1, 3),
                cfg.assoc,
            )
            decision = self._apply(res, det_idx, trks, detections, centers)
            self.decisions[cat] = decision

        self.tracks = [t for t in self.tracks if t.time_since_update <= cfg.max_age]
        return self._outputs(frame)

    def _apply(self, res: AssocResult, det_idx, trks, detections, centers) -> FrameDecision:
        cfg = self.config
        for i, j, _ in res.matches:
            det, t = detections[det_idx[i]], trks[j]
            t.box_filter = box_update(t.box_filter, box_to_observation(det.box2d), cfg.box_noise)
            c = centers[det_idx[i]]
            if c is not None:
                if t.center_filter is None:
                    t.center_filter = center_init(c, cfg.center_noise)
                else:
                    t.center_filter = center_update(t.center_filter, c, cfg.center_noise)
            t.hits += 1
            t.time_since_update = 0
        spawned = [self._spawn(detections[det_idx[i]], centers[det_idx[i]]).id
                   for i in res.unmatched_detections]
        return FrameDecision(
            [(det_idx[i], trks[j].id) for i, j, _ in res.matches],
            [det_idx[i] for i in res.unmatched_detections],
            [trks[j].id for j in res.unmatched_predictions],
            spawned,
        )

    def _outputs(self, frame: int) -> list[TrackOutput]:
        min_hits = self.config.min_hits
        out = []
        for t in self.tracks:
            if t.time_since_update == 0:
                if not (t.hits >= min_hits or t.age < min_hits):
                    continue
            elif t.hits < min_hits:
                continue
            out.append(TrackOutput(frame, t.id, t.category, t.box_filter.box, t.center,
                                   coasted=t.time_since_update > 0))
        out.sort(key=lambda o: o.track_id)
        return out


def run_sequence(frames: Iterable[tuple[int, PointCloud | SphericalImage | None, Sequence[DetectionRecord]]],
                 config: TrackerConfig = TrackerConfig(),
                 projection: ProjectionConfig = ProjectionConfig()) -> dict[int, list[TrackOutput]]:
    """Fold ``Tracker.step`` over ``(frame, cloud or image, detections)`` triples."""
    tracker = Tracker(config)
    out = {}
    for frame, scan, dets in frames:
        image = project(scan, projection) if isinstance(scan, PointCloud) else scan
        out[frame] = tracker.step(frame, dets, image)
    return out
