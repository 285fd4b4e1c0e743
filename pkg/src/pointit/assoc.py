"""Hybrid association graph and Hungarian assignment.

The similarity between detection i and predicted track j is

    graph[i, j] = weight_iou * iou(box_i, box_j) + weight_dist * exp(-|P_i - P_j|)

and assignment minimises ``1 - graph``. Pairs whose similarity falls below
the gate are returned unmatched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AssocConfig:
    weight_iou: float = 0.5
    weight_dist: float = 0.5
    gate: float = 0.3

    def __post_init__(self):
        for name in ("weight_iou", "weight_dist", "gate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not math.isclose(self.weight_iou + self.weight_dist, 1.0, abs_tol=1e-12):
            raise ValueError(f"weight_iou + weight_dist must equal 1, got "
                             f"{self.weight_iou} + {self.weight_dist}")

    @classmethod
    def from_alpha(cls, alpha: float, gate: float = 0.3) -> "AssocConfig":
        return cls(alpha, 1.0 - alpha, gate)


@dataclass
class AssocResult:
    matches: list[tuple[int, int, float]] = field(default_factory=list)  # (detection, prediction, similarity)
    unmatched_detections: list[int] = field(default_factory=list)
    unmatched_predictions: list[int] = field(default_factory=list)


def iou(box_a, box_b) -> float:
    """IoU of two (x_min, y_min, x_max, y_max) boxes; 0 if either is degenerate."""
    return float(iou_matrix(np.asarray([box_a], float), np.asarray([box_b], float))[0, 0])


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    a = np.asarray(boxes_a, float).reshape(-1, 4)[:, None, :]
    b = np.asarray(boxes_b, float).reshape(-1, 4)[None, :, :]
    iw = np.clip(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0, None)
    ih = np.clip(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0, None)
    inter = iw * ih
    area_a = np.clip(a[..., 2] - a[..., 0], 0, None) * np.clip(a[..., 3] - a[..., 1], 0, None)
    area_b = np.clip(b[..., 2] - b[..., 0], 0, None) * np.clip(b[..., 3] - b[..., 1], 0, None)
    union = area_a + area_b - inter
    out = np.zeros(inter.shape)
    ok = (area_a > 0) & (area_b > 0) & (union > 0)
    np.divide(inter, union, out=out, where=ok)
    return out


def distance_score(p_i, p_j) -> float:
    d = np.asarray(p_i, float) - np.asarray(p_j, float)
    return math.exp(-math.sqrt(float(d @ d)))


def distance_matrix(centers_a: np.ndarray, centers_b: np.ndarray) -> np.ndarray:
    """exp(-euclidean distance); rows or columns holding NaN centres score 0."""
    a = np.asarray(centers_a, float).reshape(-1, 3)[:, None, :]
    b = np.asarray(centers_b, float).reshape(-1, 3)[None, :, :]
    dist = np.sqrt(((a - b) ** 2).sum(axis=-1))
    return np.where(np.isnan(dist), 0.0, np.exp(-np.nan_to_num(dist, nan=np.inf)))


def build_graph(det_boxes, det_centers, pred_boxes, pred_centers, config: AssocConfig) -> np.ndarray:
    """Similarity matrix, detections x predictions, with entries in [0, 1].

    Missing centres are passed as NaN rows and contribute zero distance score.
    """
    n, m = len(det_boxes), len(pred_boxes)
    if n == 0 or m == 0:
        return np.zeros((n, m))
    graph = config.weight_iou * iou_matrix(det_boxes, pred_boxes)
    if config.weight_dist > 0:
        graph = graph + config.weight_dist * distance_matrix(det_centers, pred_centers)
    return np.clip(graph, 0.0, 1.0)


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost assignment of min(n, m) pairs for an n x m cost matrix.

    Shortest augmenting path with row/column potentials, O(n^2 m).
    Returns (row, col) pairs sorted by row.
    """
    a = np.asarray(cost, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if a.size == 0:
        return []
    if not np.all(np.isfinite(a)):
        raise ValueError("cost matrix must be finite")
    transposed = a.shape[0] > a.shape[1]
    if transposed:
        a = a.T
    n, m = a.shape
    # 1-based bookkeeping; column 0 is the virtual source
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    pairs = [(int(p[j]) - 1, j - 1) for j in range(1, m + 1) if p[j]]
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)


def assignment_cost(cost, pairs) -> float:
    c = np.asarray(cost, float)
    return float(sum(c[i, j] for i, j in sorted(pairs)))


def associate_graph(graph: np.ndarray, gate: float) -> AssocResult:
    n, m = graph.shape
    res = AssocResult()
    matched_d, matched_p = set(), set()
    if n and m:
        for i, j in hungarian(1.0 - graph):
            if graph[i, j] >= gate:
                res.matches.append((i, j, float(graph[i, j])))
                matched_d.add(i)
                matched_p.add(j)
    res.unmatched_detections = [i for i in range(n) if i not in matched_d]
    res.unmatched_predictions = [j for j in range(m) if j not in matched_p]
    return res


def associate(det_boxes, det_centers, pred_boxes, pred_centers, config: AssocConfig) -> AssocResult:
    graph = build_graph(det_boxes, det_centers, pred_boxes, pred_centers, config)
    return associate_graph(graph, config.gate)
