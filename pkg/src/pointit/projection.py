"""Spherical projection of a LiDAR sweep onto an H x W x 4 image.

Elevation ``alpha = arcsin(z / |p|)`` and horizontal angle
``beta = arcsin(y / |p_xy|)`` are floor-binned with angular widths derived
from the image size and field of view. Row 0 is the top beam, column 0 is
``beta = +zenith_halfwidth`` (left). Only the front hemisphere (x > 0) is kept.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pointit.pcio import PointCloud


@dataclass(frozen=True)
class ProjectionConfig:
    rows: int = 64
    cols: int = 512
    azimuth_max: float = math.radians(2.0)
    azimuth_min: float = math.radians(-24.9)
    zenith_halfwidth: float = math.radians(45.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if not self.azimuth_max > self.azimuth_min:
            raise ValueError("azimuth_max must exceed azimuth_min")
        if not 0.0 < self.zenith_halfwidth < math.pi / 2:
            raise ValueError("zenith_halfwidth must lie in (0, pi/2)")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def row_width(self) -> float:
        return (self.azimuth_max - self.azimuth_min) / self.rows

    @property
    def col_width(self) -> float:
        return 2.0 * self.zenith_halfwidth / self.cols


@dataclass
class SphericalImage:
    channels: np.ndarray  # (H, W, 4) float32
    valid: np.ndarray  # (H, W) bool
    point_index: np.ndarray = field(repr=False)  # (H, W) int64, -1 where empty

    @property
    def shape(self):
        return self.valid.shape

    @classmethod
    def empty(cls, shape) -> "SphericalImage":
        H, W = shape
        return cls(np.zeros((H, W, 4), np.float32), np.zeros((H, W), bool),
                   np.full((H, W), -1, np.int64))


def angles(points) -> tuple[np.ndarray, np.ndarray]:
    """(alpha, beta) for one point or an (N, >=3) array. Zero-norm points give NaN."""
    p = np.asarray(points, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    rxy = np.sqrt(x * x + y * y)
    r = np.sqrt(x * x + y * y + z * z)
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.arcsin(z / r)
        beta = np.arcsin(y / rxy)
    return alpha, beta


def pixel_coords(alpha, beta, config: ProjectionConfig):
    """Vectorized floor binning. Returns (rows, cols, in_view)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        rf = np.floor((config.azimuth_max - alpha) / config.row_width)
        cf = np.floor((config.zenith_halfwidth - beta) / config.col_width)
        ok = (rf >= 0) & (rf < config.rows) & (cf >= 0) & (cf < config.cols)
    rows = np.where(ok, rf, -1).astype(np.int64)
    cols = np.where(ok, cf, -1).astype(np.int64)
    return rows, cols, ok


def bin_angles(alpha: float, beta: float, config: ProjectionConfig) -> tuple[int, int] | None:
    r, c, ok = pixel_coords(alpha, beta, config)
    if not bool(ok):
        return None
    return int(r), int(c)


def pixel_of(point, config: ProjectionConfig) -> tuple[int, int] | None:
    """Cell a single point projects to, or None if out of view or behind the sensor."""
    if not point[0] > 0:
        return None
    a, b = angles(point)
    return bin_angles(float(a), float(b), config)


def project(cloud: PointCloud, config: ProjectionConfig = ProjectionConfig()) -> SphericalImage:
    """Bin every in-view point; the nearest point wins each cell."""
    H, W = config.shape
    img = SphericalImage.empty((H, W))
    pts = cloud.points
    if len(pts) == 0:
        return img
    # cheap, deliberately loose wedge test; exact binning below decides
    slope = math.tan(config.zenith_halfwidth + 1e-3) if config.zenith_halfwidth < 1.5 else np.inf
    xs = pts[:, 0]
    ahead = (xs > 0) & (np.abs(pts[:, 1]) <= xs * slope)
    front = np.flatnonzero(ahead)
    q = np.compress(ahead, pts, axis=0)
    x, y, z = (q[:, k].astype(np.float64) for k in range(3))
    rxy2 = x * x + y * y
    rng = np.sqrt(rxy2 + z * z)
    with np.errstate(invalid="ignore", divide="ignore"):
        rf = np.floor((config.azimuth_max - np.arcsin(z / rng)) / config.row_width)
        cf = np.floor((config.zenith_halfwidth - np.arcsin(y / np.sqrt(rxy2))) / config.col_width)
        ok = (rf >= 0) & (rf < H) & (cf >= 0) & (cf < W)
    sel = np.flatnonzero(ok)
    if sel.size == 0:
        return img
    idx = front[sel]
    rng = rng[sel]
    cell = rf[sel].astype(np.int64) * W + cf[sel].astype(np.int64)
    best = np.full(H * W, np.inf)
    np.minimum.at(best, cell, rng)
    cand = np.flatnonzero(rng == best[cell])
    winners, cell = idx[cand], cell[cand]

    # exact range ties: resolve on the full point value so input order never matters
    counts = np.bincount(cell, minlength=H * W)
    if (counts > 1).any():
        keep = np.ones(len(cand), bool)
        for c in np.flatnonzero(counts > 1):
            members = np.flatnonzero(cell == c)
            keys = [tuple(pts[winners[m]].tolist()) + (int(winners[m]),) for m in members]
            chosen = min(zip(keys, members))[1]
            keep[members] = False
            keep[chosen] = True
        winners, cell = winners[keep], cell[keep]

    img.channels.reshape(-1, 4)[cell] = pts[winners]
    img.valid.reshape(-1)[cell] = True
    img.point_index.reshape(-1)[cell] = winners
    return img


def center_from_mask(image: SphericalImage, mask: np.ndarray, box=None) -> tuple[float, float, float] | None:
    """Mean (x, y, z) over cells that are both masked and valid.

    ``box`` (c0, r0, c1, r1), when given, must contain the mask; only that
    window is scanned.
    """
    mask = np.asarray(mask, bool)
    channels, valid = image.channels, image.valid
    if box is not None:
        c0, r0, c1, r1 = box
        win = np.s_[r0:r1, c0:c1]
        mask, channels, valid = mask[win], channels[win], valid[win]
    sel = mask & valid
    if not sel.any():
        return None
    xyz = channels[sel][:, :3].astype(np.float64)
    # offset by the first point so a constant-valued mask returns that point exactly
    ref = xyz[0]
    c = ref + (xyz - ref).mean(axis=0)
    return float(c[0]), float(c[1]), float(c[2])


# Debug dump: little-endian int32 H, int32 W, then H*W*4 float32 channels
# row-major, H*W uint8 validity, H*W int64 point indices (-1 = empty).

def write_dump(image: SphericalImage, path) -> None:
    H, W = image.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<ii", H, W))
        f.write(np.ascontiguousarray(image.channels, "<f4").tobytes())
        f.write(np.ascontiguousarray(image.valid, np.uint8).tobytes())
        f.write(np.ascontiguousarray(image.point_index, "<i8").tobytes())


def read_dump(path) -> SphericalImage:
    data = Path(path).read_bytes()
    H, W = struct.unpack_from("<ii", data, 0)
    off = 8
    n = H * W
    ch = np.frombuffer(data, "<f4", n * 4, off).reshape(H, W, 4).astype(np.float32)
    off += n * 16
    valid = np.frombuffer(data, np.uint8, n, off).reshape(H, W).astype(bool)
    off += n
    index = np.frombuffer(data, "<i8", n, off).reshape(H, W).astype(np.int64)
    return SphericalImage(ch, valid, index)
