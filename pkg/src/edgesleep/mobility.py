"""Gauss-Markov user mobility with reflecting borders, plus handover detection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .config import MobilityConfig


@dataclass(frozen=True)
class MobilityParams:
    alpha: float = 0.75
    mean_speed: float = 1.4
    mean_direction: float | None = None
    speed_sigma: float = 0.3
    direction_sigma: float = 0.3
    step_dt: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.step_dt <= 0:
            raise ValueError("step_dt must be > 0")

    @classmethod
    def from_config(cls, cfg: MobilityConfig) -> "MobilityParams":
        return cls(cfg.alpha, cfg.mean_speed, cfg.mean_direction, cfg.speed_sigma,
                   cfg.direction_sigma, cfg.step_dt)


@dataclass(frozen=True)
class User:
    id: int
    position: tuple
    speed: float
    direction: float
    service_id: int
    associated_ec: int = -1
    # per-user mean heading; mirrored together with the heading at the borders
    mean_direction: float = 0.0


def gauss_markov_update(speed, direction, mean_dir, params: MobilityParams, z_speed, z_dir):
    """One AR(1) step of speed and heading given standard-normal draws."""
    a = params.alpha
    s = math.sqrt(max(0.0, 1.0 - a * a))
    new_speed = a * speed + (1 - a) * params.mean_speed + s * params.speed_sigma * z_speed
    new_dir = a * direction + (1 - a) * mean_dir + s * params.direction_sigma * z_dir
    return np.maximum(new_speed, 0.0), new_dir


def _reflect(pos, heading, mean_dir, lo, hi, axis):
    """Mirror coordinates that left [lo, hi]; flip the matching heading component."""
    pos = np.array(pos, dtype=float, copy=True)
    heading = np.array(heading, dtype=float, copy=True)
    mean_dir = np.array(mean_dir, dtype=float, copy=True)
    for _ in range(4):  # one pass suffices unless a step exceeds the arena width
        below = pos < lo
        above = pos > hi
        if not (below.any() or above.any()):
            break
        pos = np.where(below, 2 * lo - pos, pos)
        pos = np.where(above, 2 * hi - pos, pos)
        flip = below | above
        if axis == 0:
            heading = np.where(flip, math.pi - heading, heading)
            mean_dir = np.where(flip, math.pi - mean_dir, mean_dir)
        else:
            heading = np.where(flip, -heading, heading)
            mean_dir = np.where(flip, -mean_dir, mean_dir)
    return np.clip(pos, lo, hi), heading, mean_dir


def advance(xy, speed, direction, mean_dir, params, arena, z_speed, z_dir):
    """Vectorised step for arrays of users. Returns (xy, speed, direction, mean_dir)."""
    speed, direction = gauss_markov_update(speed, direction, mean_dir, params, z_speed, z_dir)
    dx = speed * np.cos(direction) * params.step_dt
    dy = speed * np.sin(direction) * params.step_dt
    x, direction, mean_dir = _reflect(xy[:, 0] + dx, direction, mean_dir, 0.0, arena[0], 0)
    y, direction, mean_dir = _reflect(xy[:, 1] + dy, direction, mean_dir, 0.0, arena[1], 1)
    return np.column_stack([x, y]), speed, direction, mean_dir


def step_user(user: User, params: MobilityParams, rng: np.random.Generator,
              arena: tuple = (math.inf, math.inf)) -> User:
    z = rng.standard_normal(2)
    xy, sp, d, md = advance(np.array([user.position], dtype=float), np.array([user.speed]),
                            np.array([user.direction]), np.array([user.mean_direction]),
                            params, arena, z[:1], z[1:])
    return replace(user, position=(float(xy[0, 0]), float(xy[0, 1])), speed=float(sp[0]),
                   direction=float(d[0]), mean_direction=float(md[0]))


def locate(topology, user: User) -> int:
    return topology.coverage(*user.position)


@dataclass
class Trajectory:
    """Pre-computed positions and covering ECs at every mobility step."""

    step_dt: float
    xy: np.ndarray  # (steps+1, U, 2)
    cells: np.ndarray  # (steps+1, U)

    def cells_at(self, t: float) -> np.ndarray:
        k = min(int(math.floor(t / self.step_dt + 1e-9)), len(self.cells) - 1)
        return self.cells[max(k, 0)]

    def handovers(self) -> list:
        """(step, user, old_ec, new_ec) for every change of covering EC."""
        out = []
        changed = np.nonzero(self.cells[1:] != self.cells[:-1])
        for k, u in zip(*changed):
            out.append((int(k) + 1, int(u), int(self.cells[k, u]), int(self.cells[k + 1, u])))
        return out

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "user_id", "x", "y", "ec"])
            for k in range(len(self.cells)):
                t = k * self.step_dt
                for u in range(self.cells.shape[1]):
                    w.writerow([repr(t), u, repr(float(self.xy[k, u, 0])),
                                repr(float(self.xy[k, u, 1])), int(self.cells[k, u])])


def simulate_trajectory(topology, n_users: int, params: MobilityParams, duration: float,
                        rng: np.random.Generator) -> Trajectory:
    arena = topology.arena
    steps = int(math.ceil(duration / params.step_dt))
    xy = np.column_stack([rng.uniform(0, arena[0], n_users), rng.uniform(0, arena[1], n_users)])
    speed = np.full(n_users, params.mean_speed, dtype=float)
    if params.mean_direction is None:
        mean_dir = rng.uniform(-math.pi, math.pi, n_users)
    else:
        mean_dir = np.full(n_users, float(params.mean_direction))
    direction = mean_dir.copy()
    out = np.empty((steps + 1, n_users, 2))
    out[0] = xy
    for k in range(steps):
        z = rng.standard_normal((2, n_users))
        xy, speed, direction, mean_dir = advance(xy, speed, direction, mean_dir, params, arena,
                                                 z[0], z[1])
        out[k + 1] = xy
    cells = np.stack([topology.coverage_many(out[k]) for k in range(steps + 1)])
    return Trajectory(params.step_dt, out, cells)
