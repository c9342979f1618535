"""Per-(EC, service) lifecycle FSM: Stopped <-> Running <-> Paused."""
from __future__ import annotations

import enum
from dataclasses import dataclass


class ServiceState(enum.IntEnum):
    STOPPED = 0
    PAUSED = 1
    RUNNING = 2


class TransitionRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class LifecycleTable:
    t_start: float = 0.510
    t_stop: float = 0.510
    t_pause: float = 0.096
    t_resume: float = 0.096

    def __post_init__(self):
        if min(self.t_start, self.t_stop, self.t_pause, self.t_resume) < 0:
            raise ValueError("lifecycle transition times must be >= 0")

    @classmethod
    def from_config(cls, cfg) -> "LifecycleTable":
        return cls(cfg.t_start, cfg.t_stop, cfg.t_pause, cfg.t_resume)


def _edge_time(a: ServiceState, b: ServiceState, table: LifecycleTable) -> float:
    S, P, R = ServiceState.STOPPED, ServiceState.PAUSED, ServiceState.RUNNING
    return {
        (S, R): table.t_start,
        (R, S): table.t_stop,
        (R, P): table.t_pause,
        (P, R): table.t_resume,
    }[(a, b)]


def transition_time(src: ServiceState, dst: ServiceState, table: LifecycleTable) -> float:
    """Time to move between two states; Stopped and Paused connect only through Running."""
    src, dst = ServiceState(src), ServiceState(dst)
    if src == dst:
        return 0.0
    if ServiceState.RUNNING in (src, dst):
        return _edge_time(src, dst, table)
    return _edge_time(src, ServiceState.RUNNING, table) + _edge_time(ServiceState.RUNNING, dst, table)


# (cpu, memory) multipliers per state
_USAGE = {
    ServiceState.STOPPED: (0, 0),
    ServiceState.PAUSED: (0, 1),
    ServiceState.RUNNING: (1, 1),
}


def footprint(state: ServiceState, demand) -> tuple:
    """Resources held in a state. Components beyond cpu are treated as memory-like."""
    cpu_on, mem_on = _USAGE[ServiceState(state)]
    return tuple(d * (cpu_on if i == 0 else mem_on) for i, d in enumerate(demand))


@dataclass
class ServiceInstance:
    ec_id: int
    service_id: int
    state: ServiceState = ServiceState.STOPPED
    # (previous_state, target_state, completes_at); completes_at may be None while the
    # command still sits in the EC queue
    in_transition: tuple | None = None

    @property
    def transitioning(self) -> bool:
        return self.in_transition is not None

    @property
    def serving(self) -> bool:
        return self.state == ServiceState.RUNNING and self.in_transition is None

    def held(self, demand) -> tuple:
        """Resources charged now. A transitioning instance is charged at its target state."""
        return footprint(self.state, demand)


def begin_transition(instance: ServiceInstance, target: ServiceState, now: float,
                     ec_active: bool, table: LifecycleTable) -> float:
    """Lock the instance onto ``target``; returns the nominal completion time.

    The instance state reads as the target for the whole transition.
    """
    target = ServiceState(target)
    if instance.in_transition is not None:
        raise TransitionRejected(
            f"service {instance.service_id} at EC {instance.ec_id} is already transitioning")
    if not ec_active:
        raise TransitionRejected(f"EC {instance.ec_id} is not active")
    if target == instance.state:
        raise TransitionRejected("no-op transition")
    done = now + transition_time(instance.state, target, table)
    instance.in_transition = (instance.state, target, done)
    instance.state = target
    return done


def complete_transition(instance: ServiceInstance) -> None:
    if instance.in_transition is None:
        raise RuntimeError("no transition in progress")
    instance.in_transition = None
