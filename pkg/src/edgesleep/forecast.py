"""Per-EC, per-service load forecasts over a finite horizon.

A frame is an (E, S) array of request rates by origin cell. ``Forecast.load_matrix``
lifts a frame to the (E, E, S) served/origin/service tensor with load on the diagonal.

Forecast file format (text, whitespace separated, ``#`` starts a comment line)::

    E S H step_dt
    <frame 0: E rows of S non-negative rates>
    ...
    <frame H-1>

Blank lines are ignored. Rows are origin ECs in id order, columns services in id order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ForecastError(ValueError):
    pass


@dataclass
class Forecast:
    step_dt: float
    frames: np.ndarray  # (H, E, S)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ForecastError("forecast needs at least one (E, S) frame")
        if (self.frames < 0).any():
            raise ForecastError("forecast rates must be >= 0")

    @property
    def horizon_steps(self) -> int:
        return self.frames.shape[0]

    def load_matrix(self, k: int) -> np.ndarray:
        return origin_to_load(self.frames[k])


def origin_to_load(frame: np.ndarray) -> np.ndarray:
    e, s = frame.shape
    load = np.zeros((e, e, s))
    idx = np.arange(e)
    load[idx, idx, :] = frame
    return load


def origin_frame(cells, services, rate, n_ecs: int, n_services: int) -> np.ndarray:
    """Request rate per (origin EC, service) for users at ``cells`` requesting ``services``."""
    frame = np.zeros((n_ecs, n_services))
    np.add.at(frame, (np.asarray(cells), np.asarray(services)), rate)
    return frame


class PersistenceForecaster:
    name = "persistence"

    def predict(self, history, horizon: int, step_dt: float, now: float = 0.0) -> Forecast:
        if len(history) == 0:
            raise ForecastError("history must be non-empty")
        last = np.asarray(history[-1], dtype=float)
        return Forecast(step_dt, np.repeat(last[None], horizon, axis=0))


class EWMAForecaster:
    """Exponentially weighted level of past frames, held flat over the horizon."""

    name = "ewma"

    def __init__(self, weight: float = 0.5):
        if not 0 < weight <= 1:
            raise ValueError("weight must lie in (0, 1]")
        self.weight = weight

    def predict(self, history, horizon: int, step_dt: float, now: float = 0.0) -> Forecast:
        if len(history) == 0:
            raise ForecastError("history must be non-empty")
        level = np.asarray(history[0], dtype=float)
        for frame in history[1:]:
            level = self.weight * np.asarray(frame, dtype=float) + (1 - self.weight) * level
        return Forecast(step_dt, np.repeat(level[None], horizon, axis=0))


class OracleForecaster:
    """Reads the realised future from a pre-simulated trajectory (upper-bound predictor)."""

    name = "oracle"

    def __init__(self, trajectory, services, rate: float, n_ecs: int, n_services: int):
        self.trajectory = trajectory
        self.services = np.asarray(services)
        self.rate = rate
        self.n_ecs = n_ecs
        self.n_services = n_services

    def frame_at(self, t: float) -> np.ndarray:
        return origin_frame(self.trajectory.cells_at(t), self.services, self.rate,
                            self.n_ecs, self.n_services)

    def predict(self, history, horizon: int, step_dt: float, now: float = 0.0) -> Forecast:
        frames = np.stack([self.frame_at(now + k * step_dt) for k in range(horizon)])
        return Forecast(step_dt, frames)


class FileForecaster:
    """Serves forecasts from files ``<dir>/tick_<index:06d>.txt``, one per orchestrator tick."""

    name = "file"

    def __init__(self, directory, tick_dt: float, n_ecs: int | None = None,
                 n_services: int | None = None):
        self.directory = Path(directory)
        self.tick_dt = tick_dt
        self.shape = (n_ecs, n_services)

    def predict(self, history, horizon: int, step_dt: float, now: float = 0.0) -> Forecast:
        idx = int(round(now / self.tick_dt))
        fc = ingest_forecast_file(self.directory / f"tick_{idx:06d}.txt", *self.shape)
        return fc


def ingest_forecast_file(path, n_ecs: int | None = None, n_services: int | None = None) -> Forecast:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ForecastError(f"cannot read forecast file {path}: {exc}") from None
    rows = [ln.split() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ForecastError(f"{path}: empty forecast file")
    head = rows[0]
    if len(head) != 4:
        raise ForecastError(f"{path}: header must be 'E S H step_dt'")
    try:
        e, s, h = int(head[0]), int(head[1]), int(head[2])
        step_dt = float(head[3])
    except ValueError:
        raise ForecastError(f"{path}: malformed header {' '.join(head)!r}") from None
    if h < 1:
        raise ForecastError(f"{path}: horizon H must be >= 1, got {h}")
    if e < 1 or s < 1 or not step_dt > 0 or not math.isfinite(step_dt):
        raise ForecastError(f"{path}: invalid header values")
    if n_ecs is not None and e != n_ecs:
        raise ForecastError(f"{path}: file has E={e}, scenario has {n_ecs} ECs")
    if n_services is not None and s != n_services:
        raise ForecastError(f"{path}: file has S={s}, scenario has {n_services} services")
    body = rows[1:]
    if len(body) != e * h:
        got = len(body) // e if e else 0
        raise ForecastError(f"{path}: expected {h} frames of {e} rows, frame {got} is incomplete"
                            if len(body) < e * h else f"{path}: more rows than {h} frames")
    frames = np.empty((h, e, s))
    for k in range(h):
        for r in range(e):
            row = body[k * e + r]
            if len(row) != s:
                raise ForecastError(f"{path}: frame {k}, row {r} has {len(row)} values, expected {s}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ForecastError(f"{path}: frame {k}, row {r} is not numeric") from None
            if any(v < 0 or not math.isfinite(v) for v in vals):
                raise ForecastError(f"{path}: frame {k}, row {r} has a negative or non-finite rate")
            frames[k, r] = vals
    return Forecast(step_dt, frames)


def write_forecast_file(path, forecast: Forecast) -> None:
    h, e, s = forecast.frames.shape
    out = [f"{e} {s} {h} {forecast.step_dt!r}"]
    for k in range(h):
        out.append(f"# frame {k}")
        for r in range(e):
            out.append(" ".join(repr(float(v)) for v in forecast.frames[k, r]))
    Path(path).write_text("\n".join(out) + "\n")


def make_forecaster(cfg, trajectory=None, services=None, n_ecs=None):
    f = cfg.forecast
    if f.kind == "oracle":
        return OracleForecaster(trajectory, services, cfg.services.request_rate, n_ecs,
                                cfg.services.count)
    if f.kind == "persistence":
        return PersistenceForecaster()
    if f.kind == "ewma":
        return EWMAForecaster(f.ewma_weight)
    return FileForecaster(f.path, cfg.policy.tick_dt, n_ecs, cfg.services.count)
