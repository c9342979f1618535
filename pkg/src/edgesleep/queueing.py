"""Multi-core preemptive-resume priority queueing at an EC.

Class 0 is served first. Within a class requests are FIFO; a preempted request goes
back to the head of its class queue and later resumes with its remaining time.

``ECQueue`` is the event-level reference; ``BatchQueue`` runs the same discipline
through a compiled kernel over batches of arrivals and is what the engine uses.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _qkernel

HIGH, LOW = 0, 1
USER, LIFECYCLE = 0, 1


@dataclass(eq=False)
class Request:
    id: int
    klass: int
    arrival_t: float
    service_demand: float
    owner: int = -1
    remaining: float = math.nan
    resumed_at: float = math.nan
    finished_at: float = math.nan

    def __post_init__(self):
        if math.isnan(self.remaining):
            self.remaining = self.service_demand


class ECQueue:
    """Reference implementation driven one event at a time."""

    def __init__(self, cores: int, n_classes: int = 2):
        if cores < 1:
            raise ValueError("cores must be >= 1")
        self.cores = cores
        self.waiting = [deque() for _ in range(n_classes)]
        self.running: list[Request] = []

    @property
    def counts(self) -> dict:
        """(h_wait, l_wait, h_run, l_run) for the two-class case."""
        run = [sum(1 for r in self.running if r.klass == k) for k in range(len(self.waiting))]
        return {"h_wait": len(self.waiting[0]), "l_wait": len(self.waiting[1]),
                "h_run": run[0], "l_run": run[1]}

    def _start(self, req: Request, now: float, events: list) -> None:
        req.resumed_at = now
        self.running.append(req)
        events.append(("start", req, now + req.remaining))

    def enqueue(self, req: Request, now: float) -> list:
        events = []
        if len(self.running) < self.cores:
            self._start(req, now, events)
            return events
        lower = [r for r in self.running if r.klass > req.klass]
        if lower:
            worst = max(r.klass for r in lower)
            # most recently (re)started request of the lowest class present
            victim = max((r for r in lower if r.klass == worst),
                         key=lambda r: (r.resumed_at, r.id))
            victim.remaining -= now - victim.resumed_at
            victim.resumed_at = math.nan
            self.running.remove(victim)
            self.waiting[victim.klass].appendleft(victim)
            events.append(("preempt", victim, now))
            self._start(req, now, events)
        else:
            self.waiting[req.klass].append(req)
        return events

    def complete(self, req: Request, now: float) -> list:
        if req not in self.running:
            raise ValueError("request is not running")
        self.running.remove(req)
        req.remaining = 0.0
        req.finished_at = now
        events = [("done", req, now)]
        for q in self.waiting:
            if q:
                self._start(q.popleft(), now, events)
                break
        return events

    def next_completion(self):
        if not self.running:
            return math.inf, None
        r = min(self.running, key=lambda r: (r.resumed_at + r.remaining, r.id))
        return r.resumed_at + r.remaining, r

    def check(self) -> None:
        """Assert the discipline's structural invariants."""
        assert len(self.running) <= self.cores
        if len(self.running) < self.cores:
            assert not any(self.waiting), "idle core while requests wait"
        for k, q in enumerate(self.waiting):
            if q:
                assert not any(r.klass > k for r in self.running), "lower class runs while higher waits"


def simulate_reference(cores: int, arrivals) -> list:
    """Drive ``ECQueue`` over ``(t, klass, demand)`` arrivals; returns finish times."""
    q = ECQueue(cores)
    reqs = [Request(i, k, t, d) for i, (t, k, d) in enumerate(arrivals)]
    i = 0
    while True:
        tc, rc = q.next_completion()
        ta = reqs[i].arrival_t if i < len(reqs) else math.inf
        if tc == math.inf and ta == math.inf:
            break
        if tc <= ta:
            q.complete(rc, tc)
        else:
            q.enqueue(reqs[i], ta)
            i += 1
        q.check()
    return [r.finished_at for r in reqs]


def sample_user_service_time(rng: np.random.Generator, mu_s: float, size=None,
                             law: str = "exponential"):
    if mu_s <= 0:
        raise ValueError("mu_s must be > 0")
    if law == "deterministic":
        if size is None:
            return 1.0 / mu_s
        return np.full(size, 1.0 / mu_s)
    if law != "exponential":
        raise ValueError(f"unknown service law {law!r}")
    return rng.exponential(1.0 / mu_s, size)


class BatchQueue:
    """Per-EC queue state carried between kernel calls.

    Jobs that are still in the system after a call are kept as parallel arrays in
    ``self.carry`` (running first, then class-0 queue, then class-1 queue).
    """

    FIELDS = ("arr", "rem", "demand", "cls", "budget", "svc", "kind", "tag", "resumed", "where")

    def __init__(self, cores: int, n_services: int):
        self.cores = cores
        self.svc_ok = np.zeros(n_services, dtype=np.int8)
        self.carry = _empty_jobs()

    def in_system(self) -> int:
        return len(self.carry["arr"])

    def advance(self, t0: float, t1: float, new: dict, count_from: float = 0.0):
        """Run the discipline over [t0, t1) with ``new`` arrivals (sorted by time).

        Returns (stats, lifecycle_done) with stats = [total, violated, completed,
        sum_sojourn, sum_wait, busy_core_seconds] and lifecycle_done = list of (tag, t).
        """
        c = self.carry
        out = _qkernel.advance(
            t0, t1, self.cores, count_from, self.svc_ok,
            c["arr"], c["rem"], c["demand"], c["cls"], c["budget"], c["svc"], c["kind"],
            c["tag"], c["resumed"], c["where"],
            new["arr"], new["demand"], new["cls"], new["budget"], new["svc"], new["kind"],
            new["tag"],
        )
        stats, done_tag, done_t, *carry = out
        self.carry = dict(zip(self.FIELDS, carry))
        return stats, list(zip(done_tag.tolist(), done_t.tolist()))

    def flush(self, count_from: float = 0.0) -> tuple:
        """Drop everything in the system; returns (violated users, lifecycle tags dropped)."""
        c = self.carry
        users = (c["kind"] == USER) & (c["arr"] >= count_from)
        tags = c["tag"][c["kind"] == LIFECYCLE].tolist()
        self.carry = _empty_jobs()
        return int(users.sum()), tags

    def busy_now(self) -> int:
        return int((self.carry["where"] == 0).sum())

    def pending_lifecycle(self) -> bool:
        return bool((self.carry["kind"] == LIFECYCLE).any())


def _empty_jobs() -> dict:
    return make_jobs(np.empty(0), np.empty(0), np.empty(0, dtype=np.int64),
                     np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                     np.empty(0, dtype=np.int64), carry=True)


def make_jobs(arr, demand, cls, budget, svc, kind, tag, carry=False) -> dict:
    jobs = {
        "arr": np.ascontiguousarray(arr, dtype=np.float64),
        "demand": np.ascontiguousarray(demand, dtype=np.float64),
        "cls": np.ascontiguousarray(cls, dtype=np.int64),
        "budget": np.ascontiguousarray(budget, dtype=np.float64),
        "svc": np.ascontiguousarray(svc, dtype=np.int64),
        "kind": np.ascontiguousarray(kind, dtype=np.int64),
        "tag": np.ascontiguousarray(tag, dtype=np.int64),
    }
    if carry:
        jobs["rem"] = jobs["demand"].copy()
        jobs["resumed"] = np.full(len(jobs["arr"]), np.nan)
        jobs["where"] = np.zeros(len(jobs["arr"]), dtype=np.int64)
    return jobs


def simulate_batch(cores: int, arr, demand, cls=None, t_end: float | None = None,
                   count_from: float = 0.0):
    """Run the compiled discipline over one batch of arrivals (no service gating).

    Returns the stats vector of ``BatchQueue.advance``.
    """
    n = len(arr)
    cls = np.ones(n, dtype=np.int64) if cls is None else cls
    q = BatchQueue(cores, 1)
    q.svc_ok[:] = 1
    jobs = make_jobs(arr, demand, cls, np.full(n, np.inf), np.zeros(n, dtype=np.int64),
                     np.zeros(n, dtype=np.int64), np.full(n, -1, dtype=np.int64))
    stats, _ = q.advance(0.0, np.inf if t_end is None else t_end, jobs, count_from)
    return stats
