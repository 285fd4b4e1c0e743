"""Readers and writers for LiDAR sweeps, KITTI tracking labels, detection
sidecars and track outputs.

Detection sidecar, one record per line::

    frame category score col_min row_min col_max row_max rle

The ground-truth variant inserts ``track_id`` after ``frame``. Boxes are
half-open pixel ranges ``[col_min, col_max) x [row_min, row_max)``. The mask
is run-length encoded over the row-major H x W grid as alternating runs of
zeros and ones, starting with zeros: ``5:3:10`` is five 0s, three 1s, ten 0s.
A ``# shape H W`` comment sets the grid size for the records that follow.

Track output, one line per (frame, track)::

    frame track_id category col_min row_min col_max row_max cx cy cz
"""
from __future__ import annotations

import enum
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from pointit.errors import ConfigError, FormatError

DEFAULT_SHAPE = (64, 512)


class Category(str, enum.Enum):
    CAR = "Car"
    PEDESTRIAN = "Pedestrian"
    CYCLIST = "Cyclist"
    OTHER = "Other"

    @classmethod
    def parse(cls, name: str) -> "Category":
        for c in cls:
            if c.value.lower() == name.lower():
                return c
        return cls.OTHER


# ---------------------------------------------------------------------------
# LiDAR sweeps


@dataclass
class PointCloud:
    """One sweep as an (N, 4) float32 array of x, y, z, reflectivity."""

    points: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32)
        if pts.size == 0:
            pts = pts.reshape(0, 4)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"points must have shape (N, 4), got {pts.shape}")
        self.points = pts

    def __len__(self):
        return len(self.points)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def reflectivity(self) -> np.ndarray:
        return self.points[:, 3]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 4), dtype=np.float32))


def read_velodyne(path) -> PointCloud:
    data = Path(path).read_bytes()
    if len(data) % 16:
        whole = len(data) - len(data) % 16
        raise FormatError(f"{path}: truncated point record at byte offset {whole} "
                          f"(file length {len(data)} is not a multiple of 16)")
    pts = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float32)
    finite = np.isfinite(pts).all(axis=1)
    dropped = int((~finite).sum())
    pts = pts[finite]
    # reflectivity is documented as [0, 1]; KITTI stores it that way already
    np.clip(pts[:, 3], 0.0, 1.0, out=pts[:, 3])
    return PointCloud(pts, dropped=dropped)


def write_velodyne(cloud: PointCloud, path) -> None:
    Path(path).write_bytes(np.ascontiguousarray(cloud.points, dtype="<f4").tobytes())


# ---------------------------------------------------------------------------
# KITTI tracking labels


@dataclass(frozen=True)
class Box3D:
    center: tuple[float, float, float]
    size: tuple[float, float, float]  # h, w, l
    yaw: float

    @property
    def h(self):
        return self.size[0]

    @property
    def w(self):
        return self.size[1]

    @property
    def l(self):
        return self.size[2]


@dataclass(frozen=True)
class LabeledObject:
    frame: int
    track_id: int
    category: Category
    box3d: Box3D


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def read_kitti_calib(calib_path) -> dict[str, np.ndarray]:
    """Parse a KITTI calib file into {key: flat float array}.

    Both ``Tr_velo_cam 1 2 ...`` (tracking) and ``Tr_velo_to_cam: 1 2 ...``
    (object) spellings are accepted.
    """
    out = {}
    with open(calib_path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            key = parts[0].rstrip(":")
            try:
                out[key] = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise FormatError(f"{calib_path}:{lineno}: non-numeric calibration entry") from None
    return out


def velo_from_camera_transform(calib: Mapping[str, np.ndarray]) -> np.ndarray:
    """4x4 matrix mapping rectified camera coordinates to LiDAR coordinates."""
    tr = None
    for key in ("Tr_velo_cam", "Tr_velo_to_cam"):
        if key in calib:
            tr = calib[key]
            break
    if tr is None or tr.size != 12:
        raise ConfigError("calibration has no 3x4 Tr_velo_cam transform")
    velo_to_cam = np.eye(4)
    velo_to_cam[:3, :4] = tr.reshape(3, 4)
    for key in ("R_rect", "R0_rect"):
        if key in calib and calib[key].size == 9:
            rect = np.eye(4)
            rect[:3, :3] = calib[key].reshape(3, 3)
            velo_to_cam = rect @ velo_to_cam
            break
    return np.linalg.inv(velo_to_cam)


def camera_label_to_box3d(location, dims_hwl, rotation_y, cam_to_velo: np.ndarray) -> Box3D:
    h, w, l = (float(v) for v in dims_hwl)
    p = cam_to_velo @ np.array([*location, 1.0], dtype=float)
    center = (float(p[0]), float(p[1]), float(p[2] + h / 2.0))
    return Box3D(center, (h, w, l), wrap_angle(-float(rotation_y) - math.pi / 2.0))


def read_kitti_tracking_labels(label_path, calib_path) -> dict[int, list[LabeledObject]]:
    """Objects per frame, in LiDAR coordinates, sorted by frame then track_id.

    ``DontCare`` entries are skipped.
    """
    if calib_path is None or not os.path.exists(calib_path):
        raise ConfigError(f"calibration file not found: {calib_path}")
    cam_to_velo = velo_from_camera_transform(read_kitti_calib(calib_path))
    objects = []
    with open(label_path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 17:
                raise FormatError(f"{label_path}:{lineno}: expected 17 fields, got {len(parts)}")
            if parts[2] == "DontCare":
                continue
            try:
                frame, track_id = int(parts[0]), int(parts[1])
                h, w, l, x, y, z, ry = (float(v) for v in parts[10:17])
            except ValueError:
                raise FormatError(f"{label_path}:{lineno}: malformed numeric field") from None
            if min(h, w, l) <= 0:
                raise FormatError(f"{label_path}:{lineno}: non-positive box dimension")
            box = camera_label_to_box3d((x, y, z), (h, w, l), ry, cam_to_velo)
            objects.append(LabeledObject(frame, track_id, Category.parse(parts[2]), box))
    objects.sort(key=lambda o: (o.frame, o.track_id))
    grouped: dict[int, list[LabeledObject]] = {}
    for obj in objects:
        grouped.setdefault(obj.frame, []).append(obj)
    return grouped


# ---------------------------------------------------------------------------
# Run-length masks


def rle_encode(mask: np.ndarray) -> str:
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return "0"
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return ":".join(str(r) for r in runs)


def rle_decode(rle: str, shape: tuple[int, int]) -> np.ndarray:
    n = shape[0] * shape[1]
    try:
        runs = [int(v) for v in rle.split(":")]
    except ValueError:
        raise FormatError(f"invalid RLE string {rle!r}") from None
    if any(r < 0 for r in runs):
        raise FormatError("negative run length in RLE")
    if sum(runs) != n:
        raise FormatError(f"RLE decodes to {sum(runs)} cells, expected {n}")
    values = np.arange(len(runs)) % 2 == 1
    return np.repeat(values, runs).reshape(shape)


# ---------------------------------------------------------------------------
# Detection sidecars


@dataclass
class DetectionRecord:
    frame: int
    category: Category
    score: float
    box2d: tuple[int, int, int, int]  # col_min, row_min, col_max, row_max (half-open)
    mask: np.ndarray = field(repr=False)
    track_id: int | None = None

    @property
    def shape(self):
        return self.mask.shape


def validate_detection(det: DetectionRecord) -> None:
    H, W = det.mask.shape
    c0, r0, c1, r1 = det.box2d
    if not (0 <= c0 < c1 <= W and 0 <= r0 < r1 <= H):
        raise FormatError(f"box {det.box2d} outside a {H}x{W} image or degenerate")
    if not 0.0 <= det.score <= 1.0:
        raise FormatError(f"score {det.score} outside [0, 1]")
    inside = det.mask[r0:r1, c0:c1].sum()
    total = det.mask.sum()
    if total == 0:
        raise FormatError("empty mask")
    if inside != total:
        raise FormatError(f"{int(total - inside)} mask cells fall outside box {det.box2d}")


def read_detections(path, shape: tuple[int, int] = DEFAULT_SHAPE) -> dict[int, list[DetectionRecord]]:
    """Parse a detection (or ground-truth) sidecar, grouped by frame."""
    grouped: dict[int, list[DetectionRecord]] = defaultdict(list)
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                parts = s[1:].split()
                if len(parts) == 3 and parts[0] == "shape":
                    shape = (int(parts[1]), int(parts[2]))
                continue
            parts = s.split()
            if len(parts) == 8:
                track_id = None
                fields = parts
            elif len(parts) == 9:
                track_id = int(parts[1])
                fields = parts[:1] + parts[2:]
            else:
                raise FormatError(f"{path}:{lineno}: expected 8 or 9 fields, got {len(parts)}")
            try:
                frame = int(fields[0])
                score = float(fields[2])
                box = tuple(int(v) for v in fields[3:7])
                mask = rle_decode(fields[7], shape)
                det = DetectionRecord(frame, Category.parse(fields[1]), score, box, mask, track_id)
                validate_detection(det)
            except FormatError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed numeric field") from None
            grouped[frame].append(det)
    return dict(sorted(grouped.items()))


def format_detection(det: DetectionRecord) -> str:
    c0, r0, c1, r1 = det.box2d
    head = f"{det.frame}" if det.track_id is None else f"{det.frame} {det.track_id}"
    return f"{head} {det.category.value} {det.score:.6f} {c0} {r0} {c1} {r1} {rle_encode(det.mask)}"


def write_detections(dets: Iterable[DetectionRecord], path, shape: tuple[int, int] = DEFAULT_SHAPE) -> None:
    dets = sorted(dets, key=lambda d: (d.frame, -1 if d.track_id is None else d.track_id))
    with open(path, "w") as f:
        f.write(f"# shape {shape[0]} {shape[1]}\n")
        for det in dets:
            f.write(format_detection(det) + "\n")


# ---------------------------------------------------------------------------
# Track outputs


@dataclass(frozen=True)
class TrackOutput:
    frame: int
    track_id: int
    category: Category
    box2d: tuple[float, float, float, float]
    center: tuple[float, float, float]
    coasted: bool = False


def format_track(t: TrackOutput) -> str:
    c0, r0, c1, r1 = t.box2d
    cx, cy, cz = t.center
    return (f"{t.frame} {t.track_id} {t.category.value} "
            f"{c0:.2f} {r0:.2f} {c1:.2f} {r1:.2f} {cx:.4f} {cy:.4f} {cz:.4f}")


def write_tracks(tracks_per_frame: Iterable[Sequence[TrackOutput]] | Mapping[int, Sequence[TrackOutput]],
                 path) -> None:
    if isinstance(tracks_per_frame, Mapping):
        tracks_per_frame = tracks_per_frame.values()
    rows = sorted((t for frame in tracks_per_frame for t in frame),
                  key=lambda t: (t.frame, t.track_id))
    try:
        with open(path, "w") as f:
            for t in rows:
                f.write(format_track(t) + "\n")
    except OSError as e:
        raise OSError(f"cannot write tracks to {path}: {e.strerror}") from e


def read_tracks(path) -> dict[int, list[TrackOutput]]:
    grouped: dict[int, list[TrackOutput]] = defaultdict(list)
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 10:
                raise FormatError(f"{path}:{lineno}: expected 10 fields, got {len(parts)}")
            try:
                t = TrackOutput(
                    int(parts[0]), int(parts[1]), Category.parse(parts[2]),
                    tuple(float(v) for v in parts[3:7]),
                    tuple(float(v) for v in parts[7:10]),
                )
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed numeric field") from None
            grouped[t.frame].append(t)
    return dict(sorted(grouped.items()))
