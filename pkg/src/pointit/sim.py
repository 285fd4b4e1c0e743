"""Synthetic LiDAR scenes of moving cuboids over a ground plane.

Scenario files are INI-style key=value text::

    [scenario]
    frames = 20
    density = 50          # points per square metre on visible faces
    noise = 0.01          # gaussian position noise, metres
    seed = 0
    ground = yes
    ground_density = 0.2

    [object 1]            # the section suffix is the track id
    category = Car
    size = 1.5 1.6 3.9    # h w l
    waypoints = 0 10 -4 -0.95 1.5708; 19 10 4 -0.95 1.5708   # t x y z yaw

An optional ``[sensor]`` section sets rows, cols and the field of view in
degrees (azimuth_max, azimuth_min, zenith_halfwidth).
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from pointit.dsgen import InstanceFrame, point_in_box, rasterize_instances
from pointit.errors import SpecError
from pointit.pcio import Box3D, Category, LabeledObject, PointCloud
from pointit.projection import ProjectionConfig, project

GROUND_Z = -1.7
CAR_SIZE = (1.5, 1.6, 3.9)


@dataclass(frozen=True)
class Waypoint:
    t: float
    x: float
    y: float
    z: float
    yaw: float = 0.0


@dataclass(frozen=True)
class ObjectSpec:
    track_id: int
    category: Category
    size: tuple[float, float, float]  # h, w, l
    waypoints: tuple[Waypoint, ...]

    def pose(self, t: float) -> tuple[np.ndarray, float]:
        wps = self.waypoints
        ts = np.array([w.t for w in wps])
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(wps) - 1))
        a = wps[k]
        if t <= a.t or k == len(wps) - 1:
            return np.array([a.x, a.y, a.z]), a.yaw
        b = wps[k + 1]
        f = (t - a.t) / (b.t - a.t)
        pa, pb = np.array([a.x, a.y, a.z]), np.array([b.x, b.y, b.z])
        return pa + f * (pb - pa), a.yaw + f * (b.yaw - a.yaw)

    def box(self, t: float) -> Box3D:
        c, yaw = self.pose(t)
        return Box3D((float(c[0]), float(c[1]), float(c[2])), self.size, yaw)


@dataclass(frozen=True)
class ScenarioSpec:
    objects: tuple[ObjectSpec, ...]
    frames: int = 20
    density: float = 50.0
    noise: float = 0.01
    seed: int = 0
    sensor: ProjectionConfig = ProjectionConfig()
    ground: bool = True
    ground_density: float = 0.2
    ground_range: float = 50.0

    def validate(self) -> None:
        if self.frames < 1:
            raise SpecError("scenario needs at least one frame")
        if not self.density > 0:
            raise SpecError("density must be positive")
        if self.noise < 0:
            raise SpecError("noise must be non-negative")
        ids = [o.track_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SpecError("duplicate object ids")
        for o in self.objects:
            if not o.waypoints:
                raise SpecError(f"object {o.track_id} has no waypoints")
            if min(o.size) <= 0:
                raise SpecError(f"object {o.track_id} has a non-positive dimension")
            ts = [w.t for w in o.waypoints]
            if ts != sorted(ts) or len(set(ts)) != len(ts):
                raise SpecError(f"object {o.track_id} waypoint times must strictly increase")
            if ts[0] < 0 or ts[-1] >= self.frames:
                raise SpecError(f"object {o.track_id} waypoint times outside [0, {self.frames})")


@dataclass
class SimFrame:
    frame: int
    cloud: PointCloud
    objects: list[LabeledObject]
    labels: np.ndarray = field(repr=False)  # source track id per point, 0 = ground
    ground_truth: InstanceFrame | None = None


def _footprint(box: Box3D) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    hl, hw = box.l / 2, box.w / 2
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array(box.center[:2])


def boxes_overlap(a: Box3D, b: Box3D) -> bool:
    """Separating-axis test on the ground footprints plus a z-interval check."""
    if abs(a.center[2] - b.center[2]) >= (a.h + b.h) / 2:
        return False
    pa, pb = _footprint(a), _footprint(b)
    for poly in (pa, pb):
        for k in range(4):
            edge = poly[(k + 1) % 4] - poly[k]
            axis = np.array([-edge[1], edge[0]])
            qa, qb = pa @ axis, pb @ axis
            if qa.max() <= qb.min() or qb.max() <= qa.min():
                return False
    return True


def _sample_faces(box: Box3D, density: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the (up to) three faces turned towards the origin."""
    c = np.asarray(box.center, float)
    cy, sy = math.cos(box.yaw), math.sin(box.yaw)
    axes = [np.array([cy, sy, 0.0]), np.array([-sy, cy, 0.0]), np.array([0.0, 0.0, 1.0])]
    half = [box.l / 2, box.w / 2, box.h / 2]
    out = []
    for k in range(3):
        side = float(np.dot(-c, axes[k]))
        if side == 0:
            continue
        u, v = [i for i in range(3) if i != k]
        area = 4 * half[u] * half[v]
        n = max(1, int(round(area * density)))
        st = rng.uniform(-1.0, 1.0, size=(n, 2))
        pts = (c + math.copysign(half[k], side) * axes[k]
               + (st[:, :1] * half[u]) * axes[u] + (st[:, 1:] * half[v]) * axes[v])
        out.append(pts)
    return np.concatenate(out) if out else np.zeros((0, 3))


def synthesize(spec: ScenarioSpec, rasterize: bool = True) -> list[SimFrame]:
    spec.validate()
    frames = []
    for f in range(spec.frames):
        boxes = [o.box(f) for o in spec.objects]
        for a in range(len(boxes)):
            for b in range(a + 1, len(boxes)):
                if boxes_overlap(boxes[a], boxes[b]):
                    raise SpecError(f"objects {spec.objects[a].track_id} and {spec.objects[b].track_id} "
                                    f"overlap at frame {f}")
        rng = np.random.default_rng([spec.seed, f])
        chunks, labels = [], []
        for o, box in zip(spec.objects, boxes):
            pts = _sample_faces(box, spec.density, rng)
            chunks.append(pts)
            labels.append(np.full(len(pts), o.track_id))
        if spec.ground:
            area = spec.ground_range * 2 * spec.ground_range
            n = int(round(area * spec.ground_density))
            g = np.column_stack([
                rng.uniform(0.5, 0.5 + spec.ground_range, n),
                rng.uniform(-spec.ground_range, spec.ground_range, n),
                np.full(n, GROUND_Z),
            ])
            keep = np.ones(n, bool)
            for box in boxes:
                keep &= ~point_in_box(g, box, margin=0.1 + 4 * spec.noise)
            chunks.append(g[keep])
            labels.append(np.zeros(int(keep.sum()), int))
        xyz = np.concatenate(chunks) if chunks else np.zeros((0, 3))
        lab = np.concatenate(labels) if labels else np.zeros(0, int)
        if spec.noise > 0:
            xyz = xyz + rng.normal(0.0, spec.noise, xyz.shape)
        refl = rng.uniform(0.05, 0.95, len(xyz))
        cloud = PointCloud(np.column_stack([xyz, refl]).astype(np.float32))
        objs = [LabeledObject(f, o.track_id, o.category, box) for o, box in zip(spec.objects, boxes)]
        sf = SimFrame(f, cloud, objs, lab)
        if rasterize:
            sf.ground_truth = rasterize_instances(project(cloud, spec.sensor), objs, frame=f, categories=None)
        frames.append(sf)
    return frames


def crossing_scenario(depth_gap: float, frames: int = 20, near_range: float = 15.0,
                      lateral: float = 4.0, category: Category = Category.CAR,
                      size: tuple[float, float, float] = CAR_SIZE, seed: int = 0,
                      **kwargs) -> ScenarioSpec:
    """Two objects sweeping across the view in opposite directions.

    Both move laterally at the same speed, passing y = 0 at mid-sequence, so
    their image paths cross there while their depths stay ``depth_gap`` apart.
    """
    if not depth_gap > 0:
        raise SpecError("depth_gap must be positive")
    if frames < 2:
        raise SpecError("crossing needs at least two frames")
    far_range = near_range + depth_gap
    z = GROUND_Z + size[0] / 2
    end = frames - 1
    near = ObjectSpec(1, category, size, (
        Waypoint(0, near_range, -lateral, z, math.pi / 2),
        Waypoint(end, near_range, lateral, z, math.pi / 2)))
    far = ObjectSpec(2, category, size, (
        Waypoint(0, far_range, lateral, z, -math.pi / 2),
        Waypoint(end, far_range, -lateral, z, -math.pi / 2)))
    return ScenarioSpec((near, far), frames=frames, seed=seed, **kwargs)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_scenario(text: str) -> ScenarioSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise SpecError(f"unreadable scenario: {e}") from None
    if not cp.has_section("scenario"):
        raise SpecError("missing [scenario] section")
    try:
        sc = cp["scenario"]
        sensor = ProjectionConfig()
        if cp.has_section("sensor"):
            se = cp["sensor"]
            sensor = ProjectionConfig(
                se.getint("rows", 64), se.getint("cols", 512),
                math.radians(se.getfloat("azimuth_max", 2.0)),
                math.radians(se.getfloat("azimuth_min", -24.9)),
                math.radians(se.getfloat("zenith_halfwidth", 45.0)))
        objects = []
        for name in cp.sections():
            if not name.startswith("object"):
                continue
            sec = cp[name]
            track_id = int(name.split()[-1])
            size = tuple(_floats(sec["size"]))
            if len(size) != 3:
                raise SpecError(f"[{name}] size needs h w l")
            wps = []
            for chunk in sec["waypoints"].split(";"):
                vals = _floats(chunk)
                if len(vals) not in (4, 5):
                    raise SpecError(f"[{name}] waypoint needs t x y z [yaw]")
                wps.append(Waypoint(*vals))
            objects.append(ObjectSpec(track_id, Category.parse(sec.get("category", "Car")), size, tuple(wps)))
        spec = ScenarioSpec(
            tuple(objects),
            frames=sc.getint("frames", 20),
            density=sc.getfloat("density", 50.0),
            noise=sc.getfloat("noise", 0.01),
            seed=sc.getint("seed", 0),
            sensor=sensor,
            ground=sc.getboolean("ground", True),
            ground_density=sc.getfloat("ground_density", 0.2),
            ground_range=sc.getfloat("ground_range", 50.0),
        )
    except (KeyError, ValueError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(f"invalid scenario: {e}") from None
    spec.validate()
    return spec


def read_scenario(path) -> ScenarioSpec:
    return parse_scenario(Path(path).read_text())


def format_scenario(spec: ScenarioSpec) -> str:
    s = spec.sensor
    lines = [
        "[scenario]",
        f"frames = {spec.frames}",
        f"density = {spec.density!r}",
        f"noise = {spec.noise!r}",
        f"seed = {spec.seed}",
        f"ground = {'yes' if spec.ground else 'no'}",
        f"ground_density = {spec.ground_density!r}",
        f"ground_range = {spec.ground_range!r}",
        "",
        "[sensor]",
        f"rows = {s.rows}",
        f"cols = {s.cols}",
        f"azimuth_max = {math.degrees(s.azimuth_max)!r}",
        f"azimuth_min = {math.degrees(s.azimuth_min)!r}",
        f"zenith_halfwidth = {math.degrees(s.zenith_halfwidth)!r}",
    ]
    for o in spec.objects:
        wps = "; ".join(" ".join(repr(float(v)) for v in (w.t, w.x, w.y, w.z, w.yaw)) for w in o.waypoints)
        lines += ["", f"[object {o.track_id}]", f"category = {o.category.value}",
                  f"size = {' '.join(repr(float(v)) for v in o.size)}", f"waypoints = {wps}"]
    return "\n".join(lines) + "\n"


def frames_to_tracker_input(frames: Sequence[SimFrame], degrade=None):
    """(frame, cloud, detections) triples for ``run_sequence``."""
    from pointit.dsgen import Degrade, instances_to_detections

    degrade = degrade or Degrade()
    return [(sf.frame, sf.cloud, instances_to_detections(sf.ground_truth, degrade)) for sf in frames]
