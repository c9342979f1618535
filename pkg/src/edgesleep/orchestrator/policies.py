"""Orchestration policies and the commands they hand to the engine.

A policy sees the engine state through a small read-only surface (``st``):
``t, E, S, cells, user_service, assoc, ec, inst, latency, reach, order, rate, cfg,
power, demand, resources, rate_cap, forecast(), lifecycle_lead(), pending_lifecycle(e)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..forecast import origin_frame, origin_to_load
from ..lifecycle import ServiceState
from ..lifecycle import footprint as _footprint
from ..power import ACTIVE, PowerTable
from ..queueing import HIGH, LOW
from .coverage import (VARIANT_MARGIN, Capacity, aggregate_horizon, coverage, greedy_cover,
                       select_sleep_depth)

RUNNING, PAUSED, STOPPED = ServiceState.RUNNING, ServiceState.PAUSED, ServiceState.STOPPED


@dataclass(frozen=True)
class EcTransition:
    ec: int
    target: str
    issue_t: float


@dataclass(frozen=True)
class ServiceTransition:
    ec: int
    service: int
    target: ServiceState
    issue_t: float
    priority: int = HIGH


@dataclass(frozen=True)
class Associate:
    user: int
    ec: int
    issue_t: float


def command_row(cmd) -> list:
    """Flat CSV row: t, kind, ec, service, user, target, priority."""
    if isinstance(cmd, EcTransition):
        return [repr(cmd.issue_t), "ec", cmd.ec, "", "", cmd.target, ""]
    if isinstance(cmd, ServiceTransition):
        return [repr(cmd.issue_t), "service", cmd.ec, cmd.service, "", cmd.target.name,
                cmd.priority]
    return [repr(cmd.issue_t), "associate", cmd.ec, "", cmd.user, "", ""]


# ---------------------------------------------------------------------------
# shared building blocks


def serving_matrix(st) -> np.ndarray:
    out = np.zeros((st.E, st.S), dtype=bool)
    for e in range(st.E):
        if st.ec[e].active:
            for s in range(st.S):
                out[e, s] = st.inst[e][s].serving
    return out


def ready_matrix(st, slack: float) -> np.ndarray:
    """Serving, or starting and past its nominal completion plus ``slack``.

    The planner's own schedule says such services are up, so it routes users to them.
    """
    out = serving_matrix(st)
    for e in range(st.E):
        if st.ec[e].active:
            for s in range(st.S):
                tr = st.inst[e][s].in_transition
                if tr is not None and tr[1] == RUNNING and st.t >= tr[2] + slack:
                    out[e, s] = True
    return out


def current_frame(st) -> np.ndarray:
    return origin_frame(st.cells, st.user_service, st.rate, st.E, st.S)


def associate_users(st, serving: np.ndarray, prefer: dict | None = None,
                    force: bool = False) -> np.ndarray:
    """New serving EC per user.

    Order of preference: the planned EC for the user's (cell, service) when it serves
    and is within budget (``force``: even if not serving yet), the current EC if it still
    serves within budget, the lowest-latency EC serving within budget, the lowest-latency
    serving EC anywhere, else unchanged.
    """
    new = st.assoc.copy()
    reach, lat = st.reach, st.latency
    for u in range(len(new)):
        q, s, cur = int(st.cells[u]), int(st.user_service[u]), int(new[u])
        w0 = prefer.get((q, s)) if prefer else None
        if w0 is not None and reach[q, w0] and (force or serving[w0, s]):
            new[u] = w0
            continue
        if cur >= 0 and serving[cur, s] and reach[q, cur]:
            continue
        ok = np.nonzero(serving[:, s] & reach[q])[0]
        if len(ok):
            new[u] = int(ok[np.argmin(lat[q, ok])])
            continue
        ok = np.nonzero(serving[:, s])[0]
        if len(ok):
            new[u] = int(ok[np.argmin(lat[q, ok])])
        elif cur < 0:
            new[u] = q
    return new


def association_commands(st, new) -> list:
    return [Associate(int(u), int(new[u]), st.t) for u in np.nonzero(new != st.assoc)[0]]


def can_sleep(st, e: int, assoc) -> bool:
    if not st.ec[e].active or st.pending_lifecycle(e):
        return False
    if any(inst.transitioning for inst in st.inst[e]):
        return False
    return not bool((np.asarray(assoc) == e).any())


def service_commands(st, required: dict, priority: int, assoc) -> list:
    """Start the required services at each active EC, pausing or stopping idle ones for room.

    ``required`` maps EC -> services ordered by importance. A service counts as idle when it
    is not required there and no user is associated to it there.
    """
    cmds = []
    demand, caps = st.demand, st.resources
    busy = {(int(a), int(s)) for a, s in zip(assoc, st.user_service) if a >= 0}
    for e in sorted(required):
        if not st.ec[e].active:
            continue
        want = list(dict.fromkeys(required[e]))
        state = [inst.state for inst in st.inst[e]]
        locked = [inst.transitioning for inst in st.inst[e]]
        usage = np.zeros(len(caps))
        for s in range(st.S):
            usage += _footprint(state[s], demand)

        def fits(extra):
            return bool(np.all(usage + extra <= np.asarray(caps) + 1e-9))

        for s in want:
            if state[s] == RUNNING or locked[s]:
                continue
            extra = np.subtract(_footprint(RUNNING, demand), _footprint(state[s], demand))
            while not fits(extra):
                victim = _pick_victim(st, e, state, locked, want, busy, usage, extra, caps, demand)
                if victim is None:
                    break
                v, target = victim
                cmds.append(ServiceTransition(e, v, target, st.t, priority))
                usage += np.subtract(_footprint(target, demand), _footprint(state[v], demand))
                state[v] = target
                locked[v] = True
            if fits(extra):
                cmds.append(ServiceTransition(e, s, RUNNING, st.t, priority))
                usage += extra
                state[s] = RUNNING
                locked[s] = True
    return cmds


def _pick_victim(st, e, state, locked, want, busy, usage, extra, caps, demand):
    short = (usage + extra) > np.asarray(caps) + 1e-9
    for s in range(st.S):
        if locked[s] or s in want or (e, s) in busy or state[s] == STOPPED:
            continue
        # pausing frees cpu only; stopping frees everything
        for target in ((PAUSED, STOPPED) if state[s] == RUNNING else (STOPPED,)):
            freed = np.subtract(_footprint(state[s], demand), _footprint(target, demand))
            if np.all(freed[short] > 0):
                return s, target
    return None


def sleep_allowed_ecs(st, assoc):
    return [e for e in range(st.E) if can_sleep(st, e, assoc)]


# ---------------------------------------------------------------------------
# policies


class Policy:
    name = "base"
    user_class = LOW
    lifecycle_class = HIGH

    def __init__(self, cfg, power: PowerTable):
        self.cfg = cfg
        self.power = power
        self._required = {}

    def on_tick(self, st) -> list:
        return []

    def on_mobility(self, st) -> list:
        """Between ticks: hand users over and finish starts at ECs that just woke up."""
        new = associate_users(st, serving_matrix(st))
        cmds = association_commands(st, new)
        pending = {e: v for e, v in self._required.items() if st.ec[e].active}
        cmds += service_commands(st, pending, self.lifecycle_class, new)
        return cmds


def _capacity(cfg, margin: float, enabled: bool = True) -> Capacity:
    return Capacity(tuple(cfg.ec.capacity), tuple(cfg.services.demand),
                    cfg.ec.cores * cfg.queue.service_rate, margin, enabled)


def _services_by_load(load_at_e: np.ndarray) -> list:
    """Services with load at an EC, heaviest first (load_at_e: (origin, service))."""
    per = load_at_e.sum(axis=0)
    return [int(s) for s in sorted(np.nonzero(per > 0)[0], key=lambda s: (-per[s], s))]


def _users_services(st, assoc, e) -> list:
    return sorted({int(s) for a, s in zip(assoc, st.user_service) if a == e})


class PNap(Policy):
    """Forecast-driven coverage over a horizon, multi-state sleep and proactive lifecycle."""

    def __init__(self, cfg, power: PowerTable, variant: str = "pnap"):
        super().__init__(cfg, power)
        self.name = variant
        pol = cfg.policy
        margin = pol.offload_margin if pol.offload_margin is not None else VARIANT_MARGIN[variant]
        self.capacity = _capacity(cfg, margin, enabled=variant != "pnap_sa")
        if variant == "pnap_p":
            self.user_class, self.lifecycle_class = HIGH, LOW
        self.horizon_s = cfg.forecast.horizon * cfg.forecast.step_dt
        self.sa_idle = pol.sa_idle_threshold if pol.sa_idle_threshold is not None else self.horizon_s
        self._cache = {}

    def frame_coverage(self, st, frame, active):
        key = (frame.tobytes(), st.reach.tobytes(), active.tobytes())
        res = self._cache.get(key)
        if res is None:
            if len(self._cache) > 4096:
                self._cache.clear()
            res = coverage(origin_to_load(frame), st.reach, active, self.capacity, st.order,
                           compiled=True)
            self._cache[key] = res
        return res

    def on_tick(self, st) -> list:
        fc = st.forecast()
        step = fc.step_dt
        active = np.array([ec.active for ec in st.ec])
        results = [self.frame_coverage(st, f, active) for f in fc.frames]
        serving = ready_matrix(st, st.lifecycle_lead() - st.lc_table.t_start)

        planned = {}
        w_, q_, s_ = np.nonzero(results[0].load)
        for w, q, s in zip(w_.tolist(), q_.tolist(), s_.tolist()):
            planned[(q, s)] = w
        new = associate_users(st, serving, planned)
        cmds = association_commands(st, new)
        in_use = {int(e) for e in new if e >= 0}
        plan = aggregate_horizon(results, in_use)

        tick = self.cfg.policy.tick_dt
        margin = self.cfg.policy.wake_margin
        lead = st.lifecycle_lead()
        for e in range(st.E):
            ec = st.ec[e]
            if ec.in_transition is not None:
                continue
            k = plan.need_frame.get(e)
            need_s = math.inf if k is None else k * step
            if ec.state != ACTIVE:
                if need_s <= self.power.up_delay[ec.state] + margin + lead + tick:
                    cmds.append(EcTransition(e, ACTIVE, st.t))
                continue
            if k == 0:
                continue
            if self.name == "pnap_sa" and self._traffic_soon(fc, e):
                continue
            depth = select_sleep_depth(need_s, self.power, margin + tick, round_trip=True)
            if depth != ACTIVE and can_sleep(st, e, new):
                cmds.append(EcTransition(e, depth, st.t))

        window = lead + tick
        required = {}
        for e in plan.keep:
            svcs = _users_services(st, new, e)
            for k, res in enumerate(results):
                if k * step > window:
                    break
                svcs += _services_by_load(res.load[e])
            if svcs:
                required[e] = list(dict.fromkeys(svcs))
        self._required = required
        cmds += service_commands(st, required, self.lifecycle_class, new)
        return cmds

    def on_mobility(self, st) -> list:
        ready = ready_matrix(st, st.lifecycle_lead() - st.lc_table.t_start)
        new = associate_users(st, ready)
        cmds = association_commands(st, new)
        pending = {e: v for e, v in self._required.items() if st.ec[e].active}
        return cmds + service_commands(st, pending, self.lifecycle_class, new)

    def _traffic_soon(self, fc, e) -> bool:
        for k in range(fc.horizon_steps):
            if k * fc.step_dt >= self.sa_idle:
                break
            if fc.frames[k, e].sum() > 0:
                return True
        return False


class Sleepy(Policy):
    """Coverage on the current load only, one sleep state, services started on demand."""

    name = "sleepy"

    def __init__(self, cfg, power: PowerTable):
        super().__init__(cfg, power)
        self.capacity = _capacity(cfg, 0.0)
        self.state_name = power.order[0]

    def on_tick(self, st) -> list:
        active = np.array([ec.active for ec in st.ec])
        res = coverage(origin_to_load(current_frame(st)), st.reach, active, self.capacity, st.order,
                       compiled=True)
        planned = {}
        w_, q_, s_ = np.nonzero(res.load)
        for w, q, s in zip(w_.tolist(), q_.tolist(), s_.tolist()):
            planned[(q, s)] = w
        new = associate_users(st, serving_matrix(st), planned)
        cmds = association_commands(st, new)
        keep = set(res.members) | {int(e) for e in new if e >= 0}
        for e in range(st.E):
            ec = st.ec[e]
            if ec.in_transition is not None:
                continue
            if e in keep and ec.state != ACTIVE:
                cmds.append(EcTransition(e, ACTIVE, st.t))
            elif e not in keep and can_sleep(st, e, new):
                cmds.append(EcTransition(e, self.state_name, st.t))
        required = {}
        for e in keep:
            svcs = _users_services(st, new, e) + _services_by_load(res.load[e])
            if svcs:
                required[e] = list(dict.fromkeys(svcs))
        self._required = required
        cmds += service_commands(st, required, self.lifecycle_class, new)
        return cmds


class AlwaysOn(Policy):
    """Every EC stays active; users are served locally, services started on demand."""

    name = "always_on"

    def _plan(self, st) -> list:
        local = {(int(q), int(s)): int(q) for q, s in zip(st.cells, st.user_service)}
        new = associate_users(st, serving_matrix(st), local)
        cmds = association_commands(st, new)
        required = {}
        for q, s in zip(st.cells.tolist(), st.user_service.tolist()):
            required.setdefault(q, []).append(s)
        for e in range(st.E):
            required.setdefault(e, [])
            required[e] = list(dict.fromkeys(required[e] + _users_services(st, new, e)))
        self._required = {e: v for e, v in required.items() if v}
        return cmds + service_commands(st, self._required, self.lifecycle_class, new)

    def on_tick(self, st) -> list:
        return self._plan(st)

    def on_mobility(self, st) -> list:
        return self._plan(st)


class Reactive(Policy):
    """Per-tick cover of the current load, acting as if transitions were instantaneous.

    Unchosen ECs go straight to the deepest sleep state and users are moved to the
    chosen ECs at once, whether or not those are ready.
    """

    name = "reactive"

    def __init__(self, cfg, power: PowerTable):
        super().__init__(cfg, power)
        self.capacity = _capacity(cfg, 0.0)
        self.solver = cfg.policy.reactive_solver

    def _decide(self, st):
        if self.solver == "exact":
            return self._exact(st)
        load = origin_to_load(current_frame(st))
        members, assignment = greedy_cover(load, st.reach, self.capacity, st.order)
        return members, assignment

    def _exact(self, st):
        from .ideal import TinyInstance, _solve_step
        cfg = self.cfg
        lat = cfg.t_wireless + st.latency + st.t_s_estimate
        inst = TinyInstance(cfg.grid.rows, cfg.grid.cols, st.S,
                            tuple(int(s) for s in st.user_service),
                            (tuple(int(c) for c in st.cells),), cfg.services.latency_limit,
                            lat, tuple(cfg.ec.capacity), tuple(cfg.services.demand),
                            cfg.ec.cores, cfg.queue.service_rate, st.rate, 1.0,
                            self.power.p_idle, self.power.p_peak, dict(self.power.sleep_power),
                            cfg.objective.w_power, cfg.objective.w_violation)
        inst.check_size()
        dec = _solve_step(inst, inst.origins[0])
        assignment = {}
        for u, w in enumerate(dec.assign):
            assignment[(int(st.cells[u]), int(st.user_service[u]))] = int(w)
        return frozenset(dec.active), assignment

    def on_tick(self, st) -> list:
        members, assignment = self._decide(st)
        new = st.assoc.copy()
        for u in range(len(new)):
            w = assignment.get((int(st.cells[u]), int(st.user_service[u])))
            if w is not None:
                new[u] = w
        cmds = association_commands(st, new)
        deepest = self.power.deepest
        for e in range(st.E):
            ec = st.ec[e]
            if ec.in_transition is not None:
                continue
            if e in members and ec.state != ACTIVE:
                cmds.append(EcTransition(e, ACTIVE, st.t))
            elif e not in members and can_sleep(st, e, new):
                cmds.append(EcTransition(e, deepest, st.t))
        required = {}
        for (q, s), w in sorted(assignment.items()):
            required.setdefault(w, []).append(s)
        self._required = required
        return cmds + service_commands(st, required, self.lifecycle_class, new)


ENGINE_POLICIES = ("pnap", "pnap_p", "pnap_sa", "pnap_t", "sleepy", "reactive", "always_on")


def sleepy_power_table(cfg) -> PowerTable:
    t = cfg.policy.sleepy_table
    p = cfg.power
    return PowerTable(p.p_peak, p.p_idle, {cfg.policy.sleepy_state: t.power},
                      {cfg.policy.sleepy_state: t.down_delay}, {cfg.policy.sleepy_state: t.up_delay},
                      {cfg.policy.sleepy_state: t.down_power}, {cfg.policy.sleepy_state: t.up_power})


def make_policy(cfg) -> Policy:
    name = cfg.policy.name
    if name == "sleepy":
        return Sleepy(cfg, sleepy_power_table(cfg))
    power = PowerTable.from_config(cfg.power)
    if name in VARIANT_MARGIN:
        return PNap(cfg, power, name)
    if name == "reactive":
        return Reactive(cfg, power)
    if name == "always_on":
        return AlwaysOn(cfg, power)
    raise ValueError(f"unknown policy {name!r}")
