"""EC activity states (Active plus ACPI-style sleep levels), power draw and energy."""
from __future__ import annotations

from dataclasses import dataclass, field

ACTIVE = "Active"


class PowerTransitionRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerTable:
    p_peak: float
    p_idle: float
    sleep_power: dict
    down_delay: dict
    up_delay: dict
    down_power: dict
    up_power: dict
    # shallow -> deep
    order: tuple = ()

    def __post_init__(self):
        if not self.order:
            object.__setattr__(self, "order", tuple(self.sleep_power))

    @classmethod
    def from_config(cls, cfg, states: dict | None = None) -> "PowerTable":
        states = cfg.states if states is None else states
        return cls(
            p_peak=float(cfg.p_peak),
            p_idle=float(cfg.p_idle),
            sleep_power={k: float(v.power) for k, v in states.items()},
            down_delay={k: float(v.down_delay) for k, v in states.items()},
            up_delay={k: float(v.up_delay) for k, v in states.items()},
            down_power={k: float(v.down_power) for k, v in states.items()},
            up_power={k: float(v.up_power) for k, v in states.items()},
            order=tuple(states),
        )

    @property
    def deepest(self) -> str:
        return self.order[-1]

    def check_ordering(self) -> list:
        """Problems with the depth ordering (empty when the table is consistent)."""
        issues = []
        prev = (self.p_idle, -1.0)
        for name in self.order:
            p, up = self.sleep_power[name], self.up_delay[name]
            if not p < prev[0]:
                issues.append(f"{name}: power {p} not below {prev[0]}")
            if not up > prev[1]:
                issues.append(f"{name}: wake delay {up} not above {prev[1]}")
            prev = (p, up)
        if self.p_peak < self.p_idle:
            issues.append("p_peak below p_idle")
        return issues


@dataclass
class ECActivity:
    """Activity state of one EC. While transitioning, ``state`` is the source state."""

    state: str = ACTIVE
    # (target, started_at, completes_at, transition_power)
    in_transition: tuple | None = None

    @property
    def active(self) -> bool:
        return self.state == ACTIVE and self.in_transition is None

    @property
    def target(self) -> str:
        return self.in_transition[0] if self.in_transition else self.state


def instantaneous_power(ec: ECActivity, busy_cores: float, total_cores: int,
                        table: PowerTable) -> float:
    """Active: idle plus a share of the peak-idle range proportional to busy cores."""
    if ec.in_transition is not None:
        return ec.in_transition[3]
    if ec.state == ACTIVE:
        if not 0 <= busy_cores <= total_cores:
            raise ValueError("busy_cores out of range")
        return table.p_idle + (busy_cores / total_cores) * (table.p_peak - table.p_idle)
    return table.sleep_power[ec.state]


def transition_spec(current: str, target: str, table: PowerTable) -> tuple:
    """(delay, power) for an allowed Active <-> sleep edge."""
    if current == ACTIVE and target in table.sleep_power:
        return table.down_delay[target], table.down_power[target]
    if target == ACTIVE and current in table.sleep_power:
        return table.up_delay[current], table.up_power[current]
    raise PowerTransitionRejected(f"transition {current} -> {target} is not allowed")


def begin_ec_transition(ec: ECActivity, target: str, now: float, table: PowerTable) -> float:
    if ec.in_transition is not None:
        raise PowerTransitionRejected("EC is already transitioning")
    delay, power = transition_spec(ec.state, target, table)
    done = now + delay
    ec.in_transition = (target, now, done, power)
    return done


def complete_ec_transition(ec: ECActivity) -> str:
    if ec.in_transition is None:
        raise RuntimeError("no transition in progress")
    ec.state = ec.in_transition[0]
    ec.in_transition = None
    return ec.state


def integrate_energy(trace) -> float:
    """Energy in joules of a piecewise-constant trace.

    ``trace`` holds ``(t_start, t_end, watts)`` segments, or ``(t, watts)`` breakpoints
    where each power holds until the next breakpoint (the last one must be ``(t_end, None)``).
    """
    segs = _segments(trace)
    total = 0.0
    last_end = None
    for t0, t1, p in sorted(segs, key=lambda s: (s[0], s[1])):
        if t1 < t0:
            raise ValueError(f"segment ends before it starts: {(t0, t1)}")
        if last_end is not None and t0 < last_end - 1e-12:
            raise ValueError(f"overlapping segments at t={t0}")
        total += p * (t1 - t0)
        last_end = t1
    return total


def _segments(trace):
    trace = list(trace)
    if not trace:
        return []
    if len(trace[0]) == 3:
        return trace
    out = []
    for (t0, p), (t1, _) in zip(trace, trace[1:]):
        out.append((t0, t1, p))
    return out


@dataclass
class EnergyMeter:
    """Accumulates energy, state occupancy and a power trace for one EC."""

    energy: float = 0.0
    occupancy: dict = field(default_factory=dict)
    transitions: int = 0
    trace: list | None = None

    def add(self, t0: float, t1: float, label: str, energy: float) -> None:
        dt = t1 - t0
        if dt <= 0:
            return
        self.energy += energy
        self.occupancy[label] = self.occupancy.get(label, 0.0) + dt
        if self.trace is not None:
            self.trace.append((t0, t1, energy / dt))
