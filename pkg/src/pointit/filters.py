"""Linear Kalman filters for the two target models.

Box model (pixel space), state ``[x_p, y_p, s, r, vx_p, vy_p, vs]`` with
constant velocity on centre and area; the aspect ratio has no rate term.

Center model (world space), state ``[x, y, z, vx, vy, vz, ax, ay]`` with
constant acceleration in x, y and constant velocity in z. One step is one frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointit.errors import InputError

MIN_POSITIVE = 1e-6


def _diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class Noise:
    p0: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @classmethod
    def from_diagonals(cls, p0, q, r) -> "Noise":
        return cls(_diag(p0), _diag(q), _diag(r))


BOX_NOISE = Noise.from_diagonals(
    p0=[10, 10, 10, 10, 1e4, 1e4, 1e4],
    q=[1, 1, 1, 1, 0.01, 0.01, 1e-4],
    r=[1, 1, 10, 10],
)

CENTER_NOISE = Noise.from_diagonals(
    p0=[1, 1, 1, 100, 100, 100, 100, 100],
    q=[0.01] * 3 + [0.1] * 3 + [0.1] * 2,
    r=[0.25] * 3,
)

BOX_F = np.eye(7)
BOX_F[0, 4] = BOX_F[1, 5] = BOX_F[2, 6] = 1.0
BOX_H = np.eye(4, 7)

CENTER_F = np.eye(8)
CENTER_F[0, 3] = CENTER_F[1, 4] = CENTER_F[2, 5] = 1.0
CENTER_F[0, 6] = CENTER_F[1, 7] = 0.5
CENTER_F[3, 6] = CENTER_F[4, 7] = 1.0
CENTER_H = np.eye(3, 8)

for _m in (BOX_F, BOX_H, CENTER_F, CENTER_H):
    _m.flags.writeable = False


@dataclass(frozen=True)
class BoxState:
    x: np.ndarray
    P: np.ndarray = field(repr=False)

    @property
    def box(self) -> tuple[float, float, float, float]:
        return state_to_box(self.x[:4])


@dataclass(frozen=True)
class CenterState:
    x: np.ndarray
    P: np.ndarray = field(repr=False)

    @property
    def position(self) -> tuple[float, float, float]:
        return float(self.x[0]), float(self.x[1]), float(self.x[2])


def box_to_observation(box) -> np.ndarray:
    """(col_min, row_min, col_max, row_max) -> (x_p, y_p, s, r)."""
    c0, r0, c1, r1 = (float(v) for v in box)
    w, h = c1 - c0, r1 - r0
    return np.array([(c0 + c1) / 2.0, (r0 + r1) / 2.0, w * h, w / h])


def state_to_box(z) -> tuple[float, float, float, float]:
    x, y, s, r = (float(v) for v in z[:4])
    s, r = max(s, MIN_POSITIVE), max(r, MIN_POSITIVE)
    w = np.sqrt(s * r)
    h = s / w
    return x - w / 2.0, y - h / 2.0, x + w / 2.0, y + h / 2.0


def _symmetrize(P):
    return (P + P.T) / 2.0


def _predict(x, P, F, Q):
    return F @ x, _symmetrize(F @ P @ F.T + Q)


def _update(x, P, z, H, R):
    # H observes the leading m state components, so H P H^T and P H^T are slices
    m = len(H)
    PHt = P[:, :m]
    K = np.linalg.solve(P[:m, :m] + R, PHt.T).T
    x = x + K @ (z - x[:m])
    # Joseph form keeps P positive semi-definite under rounding
    A = np.eye(len(x))
    A[:, :m] -= K
    P = A @ P @ A.T + K @ R @ K.T
    return x, _symmetrize(P)


def box_init(observation, noise: Noise = BOX_NOISE) -> BoxState:
    z = np.asarray(observation, dtype=float)
    x = np.zeros(7)
    x[:4] = z
    return BoxState(x, noise.p0.copy())


def box_predict(state: BoxState, noise: Noise = BOX_NOISE) -> BoxState:
    x = state.x
    if x[2] + x[6] <= 0:
        # a shrinking box would reach zero area: stop the area rate
        x = x.copy()
        x[6] = 0.0
    return BoxState(*_predict(x, state.P, BOX_F, noise.q))


def box_update(state: BoxState, observation, noise: Noise = BOX_NOISE) -> BoxState:
    z = np.asarray(observation, dtype=float)
    if z.shape != (4,) or not np.all(np.isfinite(z)):
        raise InputError(f"box observation must be 4 finite values, got {observation!r}")
    if z[2] <= 0 or z[3] <= 0:
        raise InputError(f"box area and aspect ratio must be positive, got s={z[2]}, r={z[3]}")
    x, P = _update(state.x, state.P, z, BOX_H, noise.r)
    x[2] = max(x[2], MIN_POSITIVE)
    x[3] = max(x[3], MIN_POSITIVE)
    return BoxState(x, P)


def box_innovation(state: BoxState, observation) -> np.ndarray:
    return np.asarray(observation, dtype=float) - BOX_H @ state.x


def center_init(observation, noise: Noise = CENTER_NOISE) -> CenterState:
    x = np.zeros(8)
    x[:3] = np.asarray(observation, dtype=float)
    return CenterState(x, noise.p0.copy())


def center_predict(state: CenterState, noise: Noise = CENTER_NOISE) -> CenterState:
    return CenterState(*_predict(state.x, state.P, CENTER_F, noise.q))


def center_update(state: CenterState, observation, noise: Noise = CENTER_NOISE) -> CenterState:
    z = np.asarray(observation, dtype=float)
    if z.shape != (3,) or not np.all(np.isfinite(z)):
        raise InputError(f"center observation must be 3 finite values, got {observation!r}")
    return CenterState(*_update(state.x, state.P, z, CENTER_H, noise.r))


def center_innovation(state: CenterState, observation) -> np.ndarray:
    return np.asarray(observation, dtype=float) - CENTER_H @ state.x
