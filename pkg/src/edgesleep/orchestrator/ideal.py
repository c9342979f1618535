"""Exhaustive ideal schedule on tiny instances and an LP-format model exporter.

The ideal schedule assumes zero transition delays, so time steps decouple and each
step is solved by enumeration: active EC set, service placement, user association.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..lifecycle import ServiceState, footprint, transition_time
from ..power import ACTIVE

MAX_ECS, MAX_USERS, MAX_SERVICES, MAX_STEPS = 4, 6, 2, 20


class InstanceTooLarge(ValueError):
    pass


@dataclass
class TinyInstance:
    rows: int
    cols: int
    n_services: int
    user_service: tuple
    origins: tuple  # origins[t][u] -> covering EC at step t
    t_max: float
    latency: np.ndarray  # (E, E): full request latency origin -> serving EC
    resources: tuple = (5, 6)
    demand: tuple = (1, 1)
    cores: int = 5
    mu_s: float = 186.0
    rate: float = 100.0  # per-user requests/s
    step_dt: float = 1.0
    p_idle: float = 150.0
    p_peak: float = 243.0
    sleep_power: dict = field(default_factory=lambda: {"S1": 133.0, "S3": 97.0, "S4": 49.0})
    w_power: float = 1.0
    w_violation: float = 1.0

    @property
    def n_ecs(self) -> int:
        return self.rows * self.cols

    @property
    def n_users(self) -> int:
        return len(self.user_service)

    @property
    def steps(self) -> int:
        return len(self.origins)

    @property
    def requests_per_step(self) -> float:
        return self.rate * self.step_dt

    @property
    def rate_cap(self) -> float:
        return self.cores * self.mu_s

    @property
    def load_power(self) -> float:
        """Extra watts per user served (busy-core share of the peak-idle range)."""
        return self.rate / self.rate_cap * (self.p_peak - self.p_idle)

    @property
    def max_services_per_ec(self) -> int:
        return min(int(r // d) if d > 0 else 10**9 for r, d in zip(self.resources, self.demand))

    def check_size(self) -> None:
        if (self.n_ecs > MAX_ECS or self.n_users > MAX_USERS or self.n_services > MAX_SERVICES
                or self.steps > MAX_STEPS):
            raise InstanceTooLarge(
                f"instance {self.n_ecs} ECs/{self.n_users} users/{self.n_services} services/"
                f"{self.steps} steps exceeds {MAX_ECS}/{MAX_USERS}/{MAX_SERVICES}/{MAX_STEPS}")


@dataclass
class StepDecision:
    active: tuple  # EC ids kept active
    running: dict  # ec -> tuple of running services
    assign: tuple  # user -> ec
    violated: tuple  # users whose latency exceeds t_max
    cost: float


@dataclass
class IdealSchedule:
    steps: list
    total_cost: float  # sum over steps
    objective: float  # per-step average

    @property
    def violations(self) -> int:
        return sum(len(d.violated) for d in self.steps)


def ideal_schedule(inst: TinyInstance) -> IdealSchedule:
    inst.check_size()
    steps = [_solve_step(inst, inst.origins[t]) for t in range(inst.steps)]
    total = sum(d.cost for d in steps)
    return IdealSchedule(steps, total, total / max(inst.steps, 1))


def _solve_step(inst: TinyInstance, origins) -> StepDecision:
    E, U = inst.n_ecs, inst.n_users
    sleep_p = min(inst.sleep_power.values())
    wanted = sorted(set(inst.user_service))
    cap_s = inst.max_services_per_ec
    penalty = inst.w_violation * inst.requests_per_step
    best = None
    if U == 0:
        cost = inst.w_power * E * sleep_p
        return StepDecision((), {}, (), (), cost)
    base_load = inst.w_power * inst.load_power * U
    for k in range(1, E + 1):
        for active in itertools.combinations(range(E), k):
            fixed = inst.w_power * (k * inst.p_idle + (E - k) * sleep_p) + base_load
            if best is not None and fixed > best.cost + 1e-12:
                continue
            subsets = [c for r in range(0, min(cap_s, len(wanted)) + 1)
                       for c in itertools.combinations(wanted, r)]
            for placement in itertools.product(subsets, repeat=k):
                running = dict(zip(active, placement))
                res = _assign(inst, origins, running)
                if res is None:
                    continue
                assign, late = res
                cost = fixed + penalty * len(late)
                if best is None or cost < best.cost - 1e-12:
                    best = StepDecision(active, {e: tuple(s) for e, s in running.items()},
                                        assign, late, cost)
    if best is None:
        raise ValueError("no feasible association exists for this step")
    return best


def _assign(inst, origins, running):
    """Min-violation association of users to active ECs running their service."""
    U = inst.n_users
    options = []
    for u in range(U):
        s, q = inst.user_service[u], origins[u]
        opts = [(0 if inst.latency[q, e] <= inst.t_max else 1, e)
                for e, svcs in running.items() if s in svcs]
        if not opts:
            return None
        options.append(sorted(opts))
    cap = inst.rate_cap
    best = [None, None]
    loads = {e: 0.0 for e in running}
    assign = [0] * U

    def dfs(u, late):
        if best[0] is not None and late >= best[0]:
            return
        if u == U:
            best[0] = late
            best[1] = list(assign)
            return
        for pen, e in options[u]:
            if loads[e] + inst.rate < cap:
                loads[e] += inst.rate
                assign[u] = e
                dfs(u + 1, late + pen)
                loads[e] -= inst.rate

    dfs(0, 0)
    if best[1] is None:
        return None
    chosen = tuple(best[1])
    late = tuple(u for u in range(U) if inst.latency[origins[u], chosen[u]] > inst.t_max)
    return chosen, late


def random_tiny_instance(rng: np.random.Generator, latency_fn=None) -> TinyInstance:
    """Random feasible tiny instance on a small grid.

    ``latency_fn(rows, cols) -> (E, E)`` supplies pair latencies; by default 1 ms
    wireless + 1 ms service budget + 1.1 ms per hop.
    """
    rows, cols = [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (1, 4)][rng.integers(0, 6)]
    E = rows * cols
    U = int(rng.integers(0, MAX_USERS + 1))
    S = int(rng.integers(1, MAX_SERVICES + 1))
    T = int(rng.integers(1, MAX_STEPS + 1))
    if latency_fn is None:
        hops = np.array([[abs(a // cols - b // cols) + abs(a % cols - b % cols) for b in range(E)]
                         for a in range(E)])
        latency = 0.002 + 0.0011 * hops
    else:
        latency = latency_fn(rows, cols)
    # budget admits 0..2 hops, never sitting exactly on a latency value
    t_max = float(latency.min() + 0.0011 * int(rng.integers(0, 3)) + 0.0005)
    user_service = tuple(int(x) for x in rng.integers(0, S, U))
    origins = []
    pos = rng.integers(0, E, U)
    for _ in range(T):
        origins.append(tuple(int(p) for p in pos))
        move = rng.random(U) < 0.3
        pos = np.where(move, rng.integers(0, E, U), pos)
    return TinyInstance(rows, cols, S, user_service, tuple(origins), t_max, latency,
                        w_violation=1000.0)


# ---------------------------------------------------------------------------
# LP export

_PSI = {ServiceState.STOPPED: "stopped", ServiceState.PAUSED: "paused",
        ServiceState.RUNNING: "running"}


def export_lp(inst: TinyInstance, T: int | None = None, ideal: bool = False,
              lifecycle_table=None, up_delay=None, down_delay=None) -> str:
    """CPLEX-LP text of the joint sleep/lifecycle/association model over T steps.

    The objective is the sum over steps (T times the per-step average). Latencies are
    written in milliseconds. Products of binaries are split into linear rows. With
    ``ideal`` the transition-recording rows are left out and all delays are zero.
    Delays are given in seconds and rounded up to whole steps.
    """
    T = inst.steps if T is None else T
    if T < 1:
        raise ValueError("T must be >= 1")
    if T > inst.steps:
        raise ValueError("instance has fewer steps than T")
    E, U, S = inst.n_ecs, inst.n_users, inst.n_services
    sleeps = sorted(inst.sleep_power, key=lambda k: -inst.sleep_power[k])
    phis = [ACTIVE] + sleeps
    psis = list(_PSI)
    lat_ms = inst.latency * 1e3
    big_m = float(lat_ms.max())
    tmax_ms = inst.t_max * 1e3
    eps = 1e-6

    def steps_of(seconds):
        return 0 if ideal else int(math.ceil(seconds / inst.step_dt - 1e-9))

    def c(u, e, t): return f"c_u{u}_e{e}_t{t}"
    def z(e, s, p, t): return f"z_e{e}_s{s}_{_PSI[p]}_t{t}"
    def l(e, s, p, t): return f"l_e{e}_s{s}_{_PSI[p]}_t{t}"
    def st(e, f, t): return f"st_e{e}_{f}_t{t}"
    def qv(e, f, t): return f"q_e{e}_{f}_t{t}"
    def v(u, t): return f"v_u{u}_t{t}"

    power = {ACTIVE: inst.p_idle, **inst.sleep_power}
    obj = []
    for t in range(T):
        for e in range(E):
            for f in phis:
                obj.append((inst.w_power * power[f], st(e, f, t)))
            for u in range(U):
                obj.append((inst.w_power * inst.load_power, c(u, e, t)))
        for u in range(U):
            obj.append((inst.w_violation * inst.requests_per_step, v(u, t)))

    rows = []

    def row(name, terms, sense, rhs):
        rows.append((name, terms, sense, rhs))

    lc_time = {}
    if lifecycle_table is not None:
        for a in psis:
            for b in psis:
                if a != b:
                    lc_time[(a, b)] = transition_time(a, b, lifecycle_table)
    for t in range(T):
        org = inst.origins[t]
        for u in range(U):
            row(f"x1_u{u}_t{t}", [(1, c(u, e, t)) for e in range(E)], "=", 1)
            s_u = inst.user_service[u]
            for e in range(E):
                row(f"x4a_u{u}_e{e}_t{t}", [(1, c(u, e, t)), (-1, z(e, s_u, ServiceState.RUNNING, t))],
                    "<=", 0)
                row(f"x4b_u{u}_e{e}_t{t}", [(1, c(u, e, t)), (-1, st(e, ACTIVE, t))], "<=", 0)
                row(f"v1a_u{u}_e{e}_t{t}",
                    [(1, v(u, t)), (-1, c(u, e, t)), (-1, l(e, s_u, ServiceState.RUNNING, t))], ">=", -1)
                row(f"v1b_u{u}_e{e}_t{t}",
                    [(1, v(u, t)), (-1, c(u, e, t)), (-1, qv(e, ACTIVE, t))], ">=", -1)
            row(f"v2_u{u}_t{t}", [(float(lat_ms[org[u], e]), c(u, e, t)) for e in range(E)]
                + [(-big_m, v(u, t))], "<=", tmax_ms)
        for e in range(E):
            row(f"st_one_e{e}_t{t}", [(1, st(e, f, t)) for f in phis], "=", 1)
            for s in range(S):
                row(f"z1_e{e}_s{s}_t{t}", [(1, z(e, s, p, t)) for p in psis], "=", 1)
                for p in psis:
                    row(f"l3_e{e}_s{s}_{_PSI[p]}_t{t}", [(1, z(e, s, p, t)), (-1, l(e, s, p, t))],
                        ">=", 0)
            for r, cap in enumerate(inst.resources):
                terms = []
                for s in range(S):
                    for p in psis:
                        coef = footprint(p, inst.demand)[r]
                        if coef:
                            terms.append((coef, z(e, s, p, t)))
                if terms:
                    row(f"r1_e{e}_r{r}_t{t}", terms, "<=", cap)
            if U:
                row(f"r2_e{e}_t{t}", [(inst.rate, c(u, e, t)) for u in range(U)], "<=",
                    inst.rate_cap - eps)
            for f in phis:
                row(f"l4_e{e}_{f}_t{t}", [(1, st(e, f, t)), (-1, qv(e, f, t))], ">=", 0)
            if t >= 1:
                for a in sleeps:
                    for b in sleeps:
                        if a != b:
                            row(f"nosleep2sleep_e{e}_{a}_{b}_t{t}",
                                [(1, st(e, a, t - 1)), (1, st(e, b, t))], "<=", 1)
                for f in sleeps:
                    for s in range(S):
                        for p in psis:
                            row(f"st1a_e{e}_{f}_s{s}_{_PSI[p]}_t{t}",
                                [(1, z(e, s, p, t)), (-1, z(e, s, p, t - 1)), (1, st(e, f, t))], "<=", 1)
                            row(f"st1b_e{e}_{f}_s{s}_{_PSI[p]}_t{t}",
                                [(1, z(e, s, p, t - 1)), (-1, z(e, s, p, t)), (1, st(e, f, t))], "<=", 1)
                if not ideal:
                    for s in range(S):
                        for a in psis:
                            for b in psis:
                                if a == b:
                                    continue
                                d = steps_of(lc_time.get((a, b), 0.0))
                                for delta in range(d + 1):
                                    if t + delta < T:
                                        row(f"l1_e{e}_s{s}_{_PSI[a]}_{_PSI[b]}_t{t}_d{delta}",
                                            [(1, l(e, s, b, t + delta)), (-1, z(e, s, a, t - 1)),
                                             (-1, z(e, s, b, t))], ">=", -1)
                    for a in phis:
                        for b in phis:
                            if a == b or (a != ACTIVE and b != ACTIVE):
                                continue
                            secs = ((down_delay or {}).get(b, 0.0) if a == ACTIVE
                                    else (up_delay or {}).get(a, 0.0))
                            for delta in range(steps_of(secs) + 1):
                                if t + delta < T:
                                    row(f"l2_e{e}_{a}_{b}_t{t}_d{delta}",
                                        [(1, qv(e, b, t + delta)), (-1, st(e, a, t - 1)),
                                         (-1, st(e, b, t))], ">=", -1)

    names = set(n for _, n in obj)
    for _, terms, _, _ in rows:
        names.update(n for _, n in terms)
    out = ["\\ joint EC sleep / service lifecycle / association model",
           f"\\ E={E} U={U} S={S} T={T} ideal={ideal}",
           "\\ objective = sum over steps of weighted power + weighted violated requests",
           f"\\ latency rows in ms, big-M = {big_m!r} (largest origin->server latency)",
           "Minimize", " obj: " + _fmt_terms(obj), "Subject To"]
    for name, terms, sense, rhs in rows:
        out.append(f" {name}: {_fmt_terms(terms)} {sense} {_num(rhs)}")
    out.append("Binaries")
    for n in sorted(names):
        out.append(f" {n}")
    out.append("End")
    return "\n".join(out) + "\n"


def _num(x) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _fmt_terms(terms) -> str:
    parts = []
    for coef, name in terms:
        coef = float(coef)
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {name}")
    text = " ".join(parts)
    if text.startswith("+ "):
        text = text[2:]
    # keep lines short enough for strict LP readers
    chunks, line = [], ""
    for tok in text.split(" "):
        if len(line) + len(tok) > 200:
            chunks.append(line)
            line = ""
        line = f"{line} {tok}" if line else tok
    chunks.append(line)
    return "\n   ".join(chunks)
