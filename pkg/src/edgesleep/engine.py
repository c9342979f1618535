"""Discrete-event simulation core.

Macro events (mobility steps, orchestrator ticks, EC transition completions, the
warm-up boundary and the end of the run) split the timeline into intervals. Inside an
interval associations are fixed, so every EC's request queue is advanced over the
interval in one call of the compiled queue kernel, which also completes lifecycle
commands at their exact times.
"""
from __future__ import annotations

import collections
import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import config as _config
from .forecast import make_forecaster, origin_frame
from .latency import LinkModel
from .lifecycle import (LifecycleTable, ServiceInstance, ServiceState, TransitionRejected,
                        begin_transition, complete_transition, footprint,
                        transition_time)
from .mobility import MobilityParams, simulate_trajectory
from .orchestrator.coverage import candidate_order, reachability_matrix
from .orchestrator.policies import (Associate, EcTransition, ServiceTransition, command_row,
                                    make_policy)
from .power import (ACTIVE, ECActivity, EnergyMeter, PowerTransitionRejected,
                    begin_ec_transition, complete_ec_transition)
from .queueing import HIGH, LIFECYCLE, USER, BatchQueue, make_jobs, sample_user_service_time
from .scenario import build_topology

EPS = 1e-9
TRACE_KINDS = ("power", "latency", "commands", "mobility")


class InvariantError(RuntimeError):
    """A model invariant failed; carries the tail of the event trace."""

    def __init__(self, message: str, tail=()):
        self.tail = list(tail)
        text = message
        if self.tail:
            text += "\nlast events:\n  " + "\n  ".join(self.tail)
        super().__init__(text)


@dataclass
class MetricsReport:
    policy: str
    t_max: float
    seed: int
    duration: float
    warmup: float
    energy_J: float
    energy_per_ec: list
    energy_ratio: float
    requests_total: int
    requests_violated: int
    availability: float
    state_occupancy: dict  # label -> fraction of EC-time
    occupancy_per_ec: list
    transition_counts: list
    transitions_total: int
    lifecycle_commands: int
    mean_lifecycle_wait: float
    objective: float
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def occupancy(self, label: str) -> float:
        return self.state_occupancy.get(label, 0.0)

    @property
    def mean_active_ecs(self) -> float:
        return self.occupancy(ACTIVE) * len(self.energy_per_ec)

    def csv_row(self) -> dict:
        row = {
            "policy": self.policy,
            "t_max_ms": round(self.t_max * 1e3, 6),
            "seed": self.seed,
            "energy_J": self.energy_J,
            "energy_ratio": self.energy_ratio,
            "availability": self.availability,
            "requests_total": self.requests_total,
            "requests_violated": self.requests_violated,
            "transitions_total": self.transitions_total,
        }
        for label in OCCUPANCY_LABELS:
            row[f"occupancy_{label.lower()}"] = self.occupancy(label)
        row["mean_active_ecs"] = self.mean_active_ecs
        row["mean_s4_ecs"] = self.occupancy("S4") * len(self.energy_per_ec)
        row["objective"] = self.objective
        return row


OCCUPANCY_LABELS = ("Active", "S1", "S2", "S3", "S4", "transition")
CSV_COLUMNS = list(MetricsReport("", 0, 0, 1, 0, 0, [], 0, 0, 0, 1, {}, [], [], 0, 0, 0, 0)
                   .csv_row())


def service_time_estimate(cfg) -> float:
    """Service-time allowance used in reachability: the 99th percentile unless configured."""
    if cfg.policy.service_time_budget is not None:
        return cfg.policy.service_time_budget
    if cfg.queue.service_law == "exponential":
        return -math.log(0.01) / cfg.queue.service_rate
    return 1.0 / cfg.queue.service_rate


def random_streams(seed: int) -> dict:
    """Independent per-purpose generators split from the master seed."""
    names = ("mobility", "arrivals", "service_times", "services")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def tiny_instance_from_config(cfg, steps: int):
    """The first ``steps`` mobility steps of a scenario as a step-wise instance."""
    from .orchestrator.ideal import TinyInstance
    topo = build_topology(cfg)
    streams = random_streams(cfg.sim.seed)
    services = streams["services"].integers(0, cfg.services.count, cfg.users)
    params = MobilityParams.from_config(cfg.mobility)
    traj = simulate_trajectory(topo, cfg.users, params, steps * params.step_dt,
                               streams["mobility"])
    latency = (cfg.t_wireless + LinkModel(topo).pair_latency() + service_time_estimate(cfg))
    origins = tuple(tuple(int(c) for c in traj.cells[k]) for k in range(steps))
    return TinyInstance(
        cfg.grid.rows, cfg.grid.cols, cfg.services.count, tuple(int(s) for s in services),
        origins, cfg.services.latency_limit, latency, tuple(cfg.ec.capacity),
        tuple(cfg.services.demand), cfg.ec.cores, cfg.queue.service_rate,
        cfg.services.request_rate, params.step_dt, cfg.power.p_idle, cfg.power.p_peak,
        {k: v.power for k, v in cfg.power.states.items()}, cfg.objective.w_power,
        cfg.objective.w_violation)


class Simulation:
    def __init__(self, cfg, traces=()):
        cfg.validate()
        unknown = set(traces) - set(TRACE_KINDS)
        if unknown:
            raise ValueError(f"unknown trace kinds {sorted(unknown)}")
        self.cfg = cfg
        self.traces = set(traces)
        self.topology = build_topology(cfg)
        self.E = self.topology.n
        self.S = cfg.services.count
        self.U = cfg.users
        self.rate = cfg.services.request_rate
        self.t_max = cfg.services.latency_limit
        self.t_w = cfg.t_wireless
        self.demand = tuple(cfg.services.demand)
        self.resources = tuple(cfg.ec.capacity)
        self.cores = cfg.ec.cores
        self.rate_cap = cfg.ec.cores * cfg.queue.service_rate
        self.lc_table = LifecycleTable.from_config(cfg.lifecycle)
        self.t_s_estimate = service_time_estimate(cfg)
        streams = random_streams(cfg.sim.seed)
        self.arr_rng, self.svc_rng = streams["arrivals"], streams["service_times"]
        self.user_service = streams["services"].integers(0, self.S, self.U)
        params = MobilityParams.from_config(cfg.mobility)
        self.trajectory = simulate_trajectory(self.topology, self.U, params, cfg.sim.duration,
                                              streams["mobility"])
        self.step_dt = params.step_dt

        self.policy = make_policy(cfg)
        self.power = self.policy.power
        self.forecaster = make_forecaster(cfg, self.trajectory, self.user_service, self.E)
        self.links = LinkModel(self.topology)
        self.order = candidate_order(self.topology.hops)

        self.ec = [ECActivity() for _ in range(self.E)]
        self.inst = [[ServiceInstance(e, s) for s in range(self.S)] for e in range(self.E)]
        self.queues = [BatchQueue(self.cores, self.S) for _ in range(self.E)]
        self.meters = [EnergyMeter(trace=[] if "power" in self.traces else None)
                       for _ in range(self.E)]
        self.transitions = [0] * self.E
        self.cells = self.trajectory.cells_at(0.0).copy()
        self.assoc = np.full(self.U, -1, dtype=np.int64)
        self.t = 0.0
        self.total = 0
        self.violated = 0
        self.lc_pending = {}  # tag -> (ec, service, issue_t, duration, priority)
        self.lc_new = [[] for _ in range(self.E)]  # jobs to inject at the next interval start
        self.lc_tag = 0
        self.lc_waits = []
        self.lc_waits_high = []
        self.lc_count = 0
        self.history = collections.deque(maxlen=64)
        self.tail = collections.deque(maxlen=40)
        self.command_log = [] if "commands" in self.traces else None
        self.latency_log = [] if "latency" in self.traces else None
        self._window = None
        self._caps = np.asarray(self.resources, dtype=float)
        self._fp_table = np.array([footprint(st, self.demand) for st in ServiceState], dtype=float)
        self._refresh_latency()

    # -- read-only surface used by policies ---------------------------------

    def forecast(self):
        f = self.cfg.forecast
        return self.forecaster.predict(list(self.history), f.horizon, f.step_dt, self.t)

    def lifecycle_lead(self) -> float:
        """Start lead time: start duration plus twice the mean high-priority lifecycle wait."""
        waits = self.lc_waits_high
        wait = float(np.mean(waits[-200:])) if waits else 0.0
        return self.lc_table.t_start + 2.0 * wait

    def pending_lifecycle(self, e: int) -> bool:
        return bool(self.lc_new[e]) or self.queues[e].pending_lifecycle()

    # -- setup --------------------------------------------------------------

    def _refresh_latency(self):
        ok = self.assoc >= 0
        loads = self.links.loads(self.cells[ok], self.assoc[ok], np.full(ok.sum(), self.rate))
        self.latency = self.links.pair_latency(loads)
        self.reach = reachability_matrix(self.latency, self.t_w, self.t_s_estimate, self.t_max)

    def _warm_start(self):
        """Services of each cell's users run locally (up to capacity); others go nearest."""
        per_cell = collections.Counter(zip(self.cells.tolist(), self.user_service.tolist()))
        slots = min(int(r // d) if d > 0 else self.S for r, d in zip(self.resources, self.demand))
        running = [set() for _ in range(self.E)]
        for e in range(self.E):
            wanted = sorted({s for (q, s) in per_cell if q == e},
                            key=lambda s: (-per_cell[(e, s)], s))
            running[e].update(wanted[:slots])
        for u in range(self.U):
            q, s = int(self.cells[u]), int(self.user_service[u])
            if s in running[q]:
                self.assoc[u] = q
                continue
            for w in sorted(range(self.E), key=lambda w: (self.latency[q, w], w)):
                if s in running[w] or len(running[w]) < slots:
                    running[w].add(s)
                    self.assoc[u] = w
                    break
        for e in range(self.E):
            for s in running[e]:
                self.inst[e][s].state = ServiceState.RUNNING
                self.queues[e].svc_ok[s] = 1
        self._refresh_latency()

    # -- main loop ------------------------------------------------------------

    def run(self) -> MetricsReport:
        cfg = self.cfg
        T, warm = cfg.sim.duration, cfg.sim.warmup
        tick_dt = cfg.policy.tick_dt
        self._warm_start()
        k_mob, k_tick = 0, 0
        self.history.append(origin_frame(self.cells, self.user_service, self.rate, self.E, self.S))
        while True:
            t = self.t
            for e in range(self.E):
                tr = self.ec[e].in_transition
                if tr is not None and tr[2] <= t + EPS:
                    state = complete_ec_transition(self.ec[e])
                    self._log(f"t={t:.6f} EC {e} reached {state}")
            if t >= T - EPS:
                break
            mob_due = k_mob * self.step_dt <= t + EPS
            tick_due = k_tick * tick_dt <= t + EPS
            if mob_due:
                self.cells = self.trajectory.cells_at(t).copy()
                self._refresh_latency()
                k_mob += 1
            cmds = []
            if tick_due:
                self.history.append(origin_frame(self.cells, self.user_service, self.rate,
                                                 self.E, self.S))
                cmds = self.policy.on_tick(self)
                k_tick += 1
            elif mob_due:
                cmds = self.policy.on_mobility(self)
            if cmds:
                self._apply(cmds)
            if mob_due or cmds:
                self._refresh_latency()
            self._audit()
            cands = [k_mob * self.step_dt, k_tick * tick_dt, T]
            if warm > t + EPS:
                cands.append(warm)
            cands += [ec.in_transition[2] for ec in self.ec if ec.in_transition is not None]
            t_next = min(cands)
            if t_next <= t + EPS:
                raise InvariantError(f"clock failed to advance at t={t}", self.tail)
            self._advance(t, t_next, counting=t >= warm - EPS)
            self.t = t_next
        return self._report()

    # -- commands -------------------------------------------------------------

    def _apply(self, cmds):
        for cmd in cmds:
            if self.command_log is not None:
                self.command_log.append(command_row(cmd))
            try:
                if isinstance(cmd, Associate):
                    if not 0 <= cmd.ec < self.E:
                        raise InvariantError(f"association to unknown EC {cmd.ec}", self.tail)
                    self.assoc[cmd.user] = cmd.ec
                elif isinstance(cmd, EcTransition):
                    self._ec_command(cmd)
                elif isinstance(cmd, ServiceTransition):
                    self._service_command(cmd)
                else:
                    raise InvariantError(f"unknown command {cmd!r}", self.tail)
            except (TransitionRejected, PowerTransitionRejected) as exc:
                raise InvariantError(f"t={self.t}: policy issued a locked command {cmd}: {exc}",
                                     self.tail) from None
            self._log(f"t={self.t:.6f} {cmd}")

    def _ec_command(self, cmd):
        e, ec = cmd.ec, self.ec[cmd.ec]
        if cmd.target != ACTIVE:
            if not ec.active:
                raise PowerTransitionRejected(f"EC {e} is not active")
            if self.pending_lifecycle(e) or any(i.transitioning for i in self.inst[e]):
                raise PowerTransitionRejected(f"EC {e} has lifecycle operations in progress")
            users, _ = self.queues[e].flush(self.cfg.sim.warmup)
            self.total += users
            self.violated += users
        begin_ec_transition(ec, cmd.target, self.t, self.power)
        self.transitions[e] += 1

    def _service_command(self, cmd):
        e, s = cmd.ec, cmd.service
        inst = self.inst[e][s]
        begin_transition(inst, cmd.target, self.t, self.ec[e].active, self.lc_table)
        used = np.zeros(len(self.resources))
        for other in self.inst[e]:
            used += other.held(self.demand)
        if np.any(used > np.asarray(self.resources) + EPS):
            raise TransitionRejected(f"EC {e} resources {used.tolist()} exceed {self.resources}")
        prev = inst.in_transition[0]
        dur = transition_time(prev, cmd.target, self.lc_table)
        self.queues[e].svc_ok[s] = 0
        tag = self.lc_tag
        self.lc_tag += 1
        self.lc_pending[tag] = (e, s, self.t, dur, cmd.priority)
        self.lc_new[e].append((self.t, dur, cmd.priority,
                               1.0 if cmd.target == ServiceState.RUNNING else 0.0, s, tag))
        self.lc_count += 1

    # -- interval advance -----------------------------------------------------

    def _arrivals(self, t0):
        """Arrivals of the mobility window containing t0 (generated once per window)."""
        k = int(math.floor(t0 / self.step_dt + EPS))
        if self._window is None or self._window[0] != k:
            counts = self.arr_rng.poisson(self.rate * self.step_dt, self.U)
            n = int(counts.sum())
            users = np.repeat(np.arange(self.U), counts)
            times = k * self.step_dt + self.arr_rng.random(n) * self.step_dt
            order = np.argsort(times, kind="stable")
            demand = sample_user_service_time(self.svc_rng, self.cfg.queue.service_rate, n,
                                              self.cfg.queue.service_law)
            self._window = (k, times[order], users[order], demand)
        return self._window[1:]

    def _advance(self, t0, t1, counting):
        times, users, demand = self._arrivals(t0)
        i0, i1 = np.searchsorted(times, [t0, t1], side="left")
        at, au, ad = times[i0:i1], users[i0:i1], demand[i0:i1]
        srv = self.assoc[au]
        active = np.array([ec.active for ec in self.ec])
        ok = (srv >= 0) & active[np.maximum(srv, 0)]
        if counting:
            dropped = int((~ok).sum())
            self.total += dropped
            self.violated += dropped
        count_from = self.cfg.sim.warmup
        user_cls = self.policy.user_class
        by_ec = collections.defaultdict(list)
        idx = np.nonzero(ok)[0]
        if len(idx):
            srv_ok = srv[idx]
            order = np.argsort(srv_ok, kind="stable")
            idx, srv_ok = idx[order], srv_ok[order]
            cuts = np.nonzero(np.diff(srv_ok))[0] + 1
            for part in np.split(idx, cuts):
                by_ec[int(srv[part[0]])] = part
        dt = t1 - t0
        for e in range(self.E):
            ec = self.ec[e]
            q = self.queues[e]
            part = by_ec.get(e)
            lc = self.lc_new[e]
            busy = 0.0
            if ec.active and (part is not None or lc or q.in_system()):
                jobs = self._jobs(e, part, at, au, ad, lc, user_cls)
                self.lc_new[e] = []
                stats, done = q.advance(t0, t1, jobs, count_from)
                self.total += int(stats[0])
                self.violated += int(stats[1])
                busy = float(stats[5])
                for tag, td in done:
                    self._lifecycle_done(tag, td)
                if self.latency_log is not None and stats[0] > 0:
                    self.latency_log.append([repr(t0), repr(t1), e, int(stats[0]), int(stats[1]),
                                             repr(stats[3] / max(stats[2], 1))])
            if not counting:
                continue
            if ec.in_transition is not None:
                label, watts = "transition", ec.in_transition[3]
                self.meters[e].add(t0, t1, label, watts * dt)
            elif ec.state == ACTIVE:
                energy = (self.power.p_idle * dt
                          + (self.power.p_peak - self.power.p_idle) * busy / self.cores)
                self.meters[e].add(t0, t1, ACTIVE, energy)
            else:
                self.meters[e].add(t0, t1, ec.state, self.power.sleep_power[ec.state] * dt)

    def _jobs(self, e, part, at, au, ad, lc, user_cls):
        if part is None:
            part = np.empty(0, dtype=np.int64)
        u = au[part]
        q = self.cells[u]
        tf = self.latency[q, e]
        budget = self.t_max - self.t_w - tf
        budget = np.where(np.isfinite(budget), budget, -1.0)
        n_lc = len(lc)
        arr = np.concatenate([[j[0] for j in lc], at[part]])
        dem = np.concatenate([[j[1] for j in lc], ad[part]])
        cls = np.concatenate([[j[2] for j in lc], np.full(len(part), user_cls)])
        bud = np.concatenate([[j[3] for j in lc], budget])
        svc = np.concatenate([[j[4] for j in lc], self.user_service[u]])
        kind = np.concatenate([np.full(n_lc, LIFECYCLE), np.full(len(part), USER)])
        tag = np.concatenate([[j[5] for j in lc], np.full(len(part), -1)])
        return make_jobs(arr, dem, cls, bud, svc, kind, tag)

    def _lifecycle_done(self, tag, td):
        e, s, issued, dur, prio = self.lc_pending.pop(tag)
        complete_transition(self.inst[e][s])
        wait = max(td - issued - dur, 0.0)
        self.lc_waits.append(wait)
        if prio == HIGH:
            self.lc_waits_high.append(wait)
        self._log(f"t={td:.6f} service {s} at EC {e} reached {self.inst[e][s].state.name}")

    # -- audits and reporting -------------------------------------------------

    def _log(self, text):
        self.tail.append(text)

    def _audit(self):
        if self.U and (self.assoc < 0).any():
            raise InvariantError("user without association", self.tail)
        fp = self._fp_table
        for e in range(self.E):
            insts = self.inst[e]
            states = [int(i.state) for i in insts]
            used = fp[states].sum(axis=0)
            if np.any(used > self._caps + EPS):
                raise InvariantError(f"EC {e} resources {used.tolist()} exceed {self.resources}",
                                     self.tail)
            moving = [i.in_transition is not None for i in insts]
            ec = self.ec[e]
            if (ec.state != ACTIVE or ec.in_transition is not None) and any(moving):
                raise InvariantError(f"service transition on non-active EC {e}", self.tail)
            serving = [st == 2 and not m for st, m in zip(states, moving)]
            if serving != [bool(x) for x in self.queues[e].svc_ok]:
                raise InvariantError(f"serving flags at EC {e} out of sync", self.tail)

    def _report(self) -> MetricsReport:
        cfg = self.cfg
        span = cfg.sim.duration - cfg.sim.warmup
        occ_ec = []
        for m in self.meters:
            covered = sum(m.occupancy.values())
            if abs(covered - span) > 1e-6 * max(span, 1.0):
                raise InvariantError(f"energy trace covers {covered} s of {span} s", self.tail)
            occ_ec.append({k: v / span for k, v in sorted(m.occupancy.items())})
        labels = sorted({k for o in occ_ec for k in o})
        occupancy = {k: sum(o.get(k, 0.0) for o in occ_ec) / self.E for k in labels}
        energy = [m.energy for m in self.meters]
        total_e = float(sum(energy))
        avail = 1.0 - self.violated / self.total if self.total else 1.0
        obj = (cfg.objective.w_power * total_e / span
               + cfg.objective.w_violation * self.violated / span)
        return MetricsReport(
            policy=cfg.policy.name, t_max=self.t_max, seed=cfg.sim.seed,
            duration=cfg.sim.duration, warmup=cfg.sim.warmup,
            energy_J=total_e, energy_per_ec=energy,
            energy_ratio=total_e / (self.E * self.power.p_peak * span),
            requests_total=int(self.total), requests_violated=int(self.violated),
            availability=avail, state_occupancy=occupancy, occupancy_per_ec=occ_ec,
            transition_counts=list(self.transitions), transitions_total=int(sum(self.transitions)),
            lifecycle_commands=self.lc_count,
            mean_lifecycle_wait=float(np.mean(self.lc_waits)) if self.lc_waits else 0.0,
            objective=obj, config=cfg.to_dict(),
        )

    def write_traces(self, out: Path) -> None:
        out = Path(out)
        if "power" in self.traces:
            with open(out / "trace_power.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t0", "t1", "ec", "watts"])
                for e, m in enumerate(self.meters):
                    for t0, t1, p in m.trace:
                        w.writerow([repr(t0), repr(t1), e, repr(p)])
        if "commands" in self.traces:
            with open(out / "trace_commands.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "kind", "ec", "service", "user", "target", "priority"])
                w.writerows(self.command_log)
        if "latency" in self.traces:
            with open(out / "trace_latency.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t0", "t1", "ec", "requests", "violated", "mean_sojourn"])
                w.writerows(self.latency_log)
        if "mobility" in self.traces:
            self.trajectory.dump_csv(out / "trace_mobility.csv")


def run(cfg, policy: str | None = None, seed: int | None = None) -> MetricsReport:
    over = {}
    if policy is not None:
        over["policy.name"] = policy
    if seed is not None:
        over["sim.seed"] = seed
    if over:
        cfg = cfg.with_overrides(over)
    return Simulation(cfg).run()


# ---------------------------------------------------------------------------
# sweeps


def _cell_config(cfg, policy, t_max, seed):
    return cfg.with_overrides({"policy.name": policy, "services.latency_limit": t_max,
                               "sim.seed": seed})


def _run_cell(args):
    cfg, key = args
    return key, Simulation(cfg).run().to_json()


def sweep_cells(policies, t_max_list, seeds) -> list:
    if not policies or not t_max_list or not seeds:
        raise ValueError("policies, t_max values and seeds must all be non-empty")
    t_vals = sorted(dict.fromkeys(float(t) for t in t_max_list))
    pols = list(dict.fromkeys(policies))
    sds = list(dict.fromkeys(int(s) for s in seeds))
    return [(p, t, s) for p in pols for t in t_vals for s in sds]


def sweep(cfg, policies, t_max_list, seeds, jobs: int = 1, out_dir=None,
          progress=None) -> list:
    """Run the cross product; returns MetricsReports ordered by (policy, t_max, seed).

    With ``out_dir`` every finished cell is written to ``cells/`` and listed in
    ``manifest.json``, and cells already listed there are loaded instead of rerun.
    """
    cells = sweep_cells(policies, t_max_list, seeds)
    done = {}
    manifest = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir / "cells").mkdir(parents=True, exist_ok=True)
        manifest = out_dir / "manifest.json"
        if manifest.exists():
            for name in json.loads(manifest.read_text()).get("done", []):
                path = out_dir / "cells" / f"{name}.json"
                if path.exists():
                    done[name] = path.read_text()
    todo = []
    for p, t, s in cells:
        name = cell_name(p, t, s)
        if name not in done:
            todo.append((_cell_config(cfg, p, t, s), name))

    def record(name, text):
        done[name] = text
        if out_dir is not None:
            (out_dir / "cells" / f"{name}.json").write_text(text)
            manifest.write_text(json.dumps({"done": sorted(done)}, indent=1))
        if progress:
            progress(name)

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for name, text in pool.map(_run_cell, [(c, n) for c, n in todo]):
                record(name, text)
    else:
        for c, n in todo:
            record(*_run_cell((c, n)))
    return [report_from_json(done[cell_name(*c)]) for c in cells]


def cell_name(policy, t_max, seed) -> str:
    return f"{policy}_t{t_max * 1e3:.6g}ms_s{seed}"


def report_from_json(text: str) -> MetricsReport:
    return MetricsReport(**json.loads(text))


def write_rows(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in reports:
            w.writerow(r.csv_row())


def summarize(reports) -> dict:
    """Mean and sample standard deviation per (policy, t_max) cell for every metric."""
    groups = collections.defaultdict(list)
    for r in reports:
        groups[(r.policy, r.csv_row()["t_max_ms"])].append(r.csv_row())
    out = {}
    for (pol, tms), rows in sorted(groups.items()):
        cell = {"n": len(rows)}
        for col in CSV_COLUMNS:
            if col in ("policy", "t_max_ms", "seed"):
                continue
            vals = np.array([row[col] for row in rows], dtype=float)
            cell[col] = {"mean": float(vals.mean()),
                         "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0}
        out.setdefault(pol, {})[f"{tms:g}"] = cell
    return out


def dumps_config(cfg) -> str:
    return _config.dumps(cfg)
