"""Reachability, load offloading and the iterative coverage heuristic.

Load tensors are indexed ``load[serving_ec, origin_ec, service]`` (request rates).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..power import ACTIVE


@dataclass(frozen=True)
class Capacity:
    """What a serving EC can absorb when it receives offloaded load."""

    resources: tuple  # R_EC
    demand: tuple  # R_s, held once per distinct service served
    rate_cap: float  # cores * per-core service rate
    margin: float = 0.0
    enabled: bool = True  # False: offloading disabled, every test fails

    def fits(self, n_services_after: int, rate_after: float) -> bool:
        if not self.enabled:
            return False
        scale = 1.0 - self.margin
        for need, have in zip(self.demand, self.resources):
            if n_services_after * need > have * scale + 1e-9:
                return False
        return rate_after < self.rate_cap * scale


@dataclass
class KnobSet:
    variant: str = "pnap"
    offload_margin: float = 0.0
    sa_idle_threshold: float = math.inf
    wake_margin: float = 5.0
    tick_dt: float = 5.0


VARIANT_MARGIN = {"pnap": 0.0, "pnap_p": 0.0, "pnap_sa": 0.0, "pnap_t": 0.3}


def reachability_matrix(pair_latency: np.ndarray, t_wireless: float, t_s_estimate: float,
                        t_max: float) -> np.ndarray:
    """reach[q, w]: serving load of origin q at w stays within t_max."""
    return (t_wireless + pair_latency + t_s_estimate) <= t_max


def reachability_set(topology, ec: int, t_max: float, link_loads=None, t_wireless: float = 0.0,
                     t_s_estimate: float = 0.0) -> set:
    from ..latency import LinkModel
    lat = LinkModel(topology).pair_latency(link_loads)
    reach = reachability_matrix(lat, t_wireless, t_s_estimate, t_max)
    return {int(w) for w in np.nonzero(reach[ec])[0]}


class _Served:
    """Incremental per-EC aggregates of a load tensor."""

    def __init__(self, load: np.ndarray):
        self.rate = load.sum(axis=(1, 2))
        self.svc_rate = load.sum(axis=1)  # (E, S)
        self.n_svc = (self.svc_rate > 0).sum(axis=1)


def candidate_order(hops: np.ndarray) -> list:
    """For each origin q: ECs by ascending hop distance from q, then id."""
    n = hops.shape[0]
    return [sorted(range(n), key=lambda w: (hops[q, w], w)) for q in range(n)]


@dataclass
class OffloadStats:
    tests: int = 0


def offload(n: int, reach: np.ndarray, load: np.ndarray, capacity: Capacity, order: list,
            stats: OffloadStats | None = None, served: _Served | None = None):
    """Try to move every (origin, service) load held at ``n`` to another loaded EC.

    Candidates w must be reachable from both n and the origin q, and already carry load.
    Returns ``(success, newload)``; on failure the input tensor is returned unchanged.
    """
    E, _, S = load.shape
    new = load.copy()
    agg = served if served is not None else _Served(load)
    rate = agg.rate.copy()
    svc_rate = agg.svc_rate.copy()
    n_svc = agg.n_svc.copy()
    origins, services = np.nonzero(load[n])
    for q, s in zip(origins.tolist(), services.tolist()):
        amount = new[n, q, s]
        if amount <= 0:
            continue
        for w in order[q]:
            if w == n or not reach[n, w] or not reach[q, w] or rate[w] <= 0:
                continue
            if stats is not None:
                stats.tests += 1
            adds_service = svc_rate[w, s] <= 0
            if capacity.fits(n_svc[w] + (1 if adds_service else 0), rate[w] + amount):
                new[w, q, s] += amount
                new[n, q, s] = 0.0
                rate[w] += amount
                rate[n] -= amount
                svc_rate[w, s] += amount
                svc_rate[n, s] -= amount
                if adds_service:
                    n_svc[w] += 1
                break
    if new[n].sum() == 0:
        return True, new
    return False, load


@dataclass
class CoverageResult:
    members: frozenset
    load: np.ndarray
    rounds: int = 0
    tests_per_round: list = field(default_factory=list)


def coverage(load: np.ndarray, reach: np.ndarray, ec_active, capacity: Capacity,
             order: list, compiled: bool = False) -> CoverageResult:
    """Repeatedly empty the least-loaded EC (non-active ones first) until no offload succeeds.

    ``compiled`` runs the numba twin of the same loop (used inside simulations).
    """
    if compiled:
        return _coverage_compiled(load, reach, ec_active, capacity, order)
    E = load.shape[0]
    load = np.array(load, dtype=float, copy=True)
    active = [bool(a) for a in ec_active]
    tests_per_round = []
    rounds = 0
    change = True
    while change:
        change = False
        rounds += 1
        stats = OffloadStats()
        served = _Served(load)
        nodes = sorted(range(E), key=lambda e: (1 if active[e] else 0, served.rate[e], e))
        for n in nodes:
            if served.rate[n] > 0:
                ok, new = offload(n, reach, load, capacity, order, stats, served)
                if ok:
                    load = new
                    change = True
                    break
        tests_per_round.append(stats.tests)
    members = frozenset(int(e) for e in range(E) if load[e].sum() > 0)
    return CoverageResult(members, load, rounds, tests_per_round)


@dataclass
class HorizonPlan:
    keep: frozenset
    need_frame: dict  # ec -> first frame index needed (absent: never)
    frames: list  # CoverageResult per frame


def aggregate_horizon(frame_results: list, in_use=()) -> HorizonPlan:
    """Union of per-frame coverage sets plus ECs currently serving users."""
    need = {}
    for k, res in enumerate(frame_results):
        for e in res.members:
            need.setdefault(e, k)
    for e in in_use:
        need[e] = 0
    return HorizonPlan(frozenset(need), need, frame_results)


def select_sleep_depth(need_time_s: float, table, wake_margin: float = 0.0,
                       round_trip: bool = False) -> str:
    """Deepest sleep state that can be left again before ``need_time_s``.

    With ``round_trip`` the entry delay is charged too.
    """
    if math.isinf(need_time_s):
        return table.deepest
    best = ACTIVE
    for name in table.order:
        cost = table.up_delay[name] + wake_margin
        if round_trip:
            cost += table.down_delay[name]
        if cost <= need_time_s:
            best = name
    return best


def greedy_cover(load: np.ndarray, reach: np.ndarray, capacity: Capacity, order: list):
    """Classic greedy set cover used by the reactive baseline.

    Picks, one EC at a time, the EC able to absorb the largest still-unassigned
    (origin, service) demand. Returns ``(members, assignment)`` where assignment maps
    (origin, service) -> serving EC; unassignable demand stays at its origin.
    """
    E, _, S = load.shape
    demand = load.sum(axis=0)  # (origin, service)
    items = [(q, s, float(demand[q, s])) for q in range(E) for s in range(S) if demand[q, s] > 0]
    items.sort(key=lambda it: (-it[2], it[0], it[1]))
    unassigned = list(items)
    assignment = {}
    members = []
    while unassigned:
        best = None
        for w in range(E):
            if w in members:
                continue
            got, svcs, rate = [], set(), 0.0
            for (q, s, r) in unassigned:
                if not reach[q, w]:
                    continue
                n_after = len(svcs | {s})
                if capacity.fits(n_after, rate + r):
                    got.append((q, s, r))
                    svcs.add(s)
                    rate += r
            value = sum(r for *_, r in got)
            if got and (best is None or value > best[0] + 1e-12):
                best = (value, w, got)
        if best is None:
            for (q, s, _) in unassigned:
                assignment[(q, s)] = q
                if q not in members:
                    members.append(q)
            break
        _, w, got = best
        members.append(w)
        taken = {(q, s) for q, s, _ in got}
        for q, s in taken:
            assignment[(q, s)] = w
        unassigned = [it for it in unassigned if (it[0], it[1]) not in taken]
    return frozenset(members), assignment


def _coverage_compiled(load, reach, ec_active, capacity, order) -> CoverageResult:
    from ._ckernel import coverage_kernel
    out, rounds, tests = coverage_kernel(
        np.ascontiguousarray(load, dtype=np.float64), np.ascontiguousarray(reach, dtype=np.bool_),
        np.asarray(ec_active, dtype=np.bool_), np.asarray(capacity.resources, dtype=np.float64),
        np.asarray(capacity.demand, dtype=np.float64), float(capacity.rate_cap),
        float(capacity.margin), bool(capacity.enabled), np.asarray(order, dtype=np.int64))
    members = frozenset(int(e) for e in range(out.shape[0]) if out[e].sum() > 0)
    return CoverageResult(members, out, int(rounds), [int(x) for x in tests])
