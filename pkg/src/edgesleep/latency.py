"""End-to-end latency: wireless constant + per-hop M/D/1 link delay and processing + EC sojourn."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LinkSaturated(ArithmeticError):
    pass


def link_queue_delay(lambda_l: float, mu_l: float) -> float:
    """Mean M/D/1 sojourn on a link: (2 - rho) / (2 mu (1 - rho))."""
    if mu_l <= 0:
        raise ValueError("mu_l must be > 0")
    rho = lambda_l / mu_l
    if rho >= 1:
        raise LinkSaturated(f"link utilisation {rho:.3f} >= 1")
    return (2 - rho) / (2 * mu_l * (1 - rho))


def forwarding_latency(path, link_loads, t_p: float | None = None) -> float:
    """Sum of link delay plus processing over a path of Link objects.

    ``link_loads`` maps link -> arrival rate (dict keyed by Link, or a sequence aligned
    with the path). ``t_p`` overrides each link's own processing constant.
    """
    total = 0.0
    for i, link in enumerate(path):
        if isinstance(link_loads, dict):
            lam = link_loads.get(link, 0.0)
        else:
            lam = link_loads[i]
        proc = link.proc_time if t_p is None else t_p
        total += link_queue_delay(lam, link.service_rate) + proc
    return total


@dataclass(frozen=True)
class LatencySample:
    request_id: int
    t_wireless: float
    t_f: float
    t_s: float
    dropped: bool = False

    @property
    def t_u(self) -> float:
        return self.t_wireless + self.t_f + self.t_s


def sla_verdict(sample: LatencySample, t_max: float, service_transitioning: bool = False,
                ec_waking: bool = False) -> str:
    if sample.dropped or service_transitioning or ec_waking:
        return "violated"
    return "ok" if sample.t_u <= t_max else "violated"


class LinkModel:
    """Vectorised link delays for a topology: loads per link, delays per EC pair."""

    def __init__(self, topology):
        self.topology = topology
        n, L = topology.n, len(topology.links)
        self.mu = np.array([l.service_rate for l in topology.links], dtype=float)
        self.proc = np.array([l.proc_time for l in topology.links], dtype=float)
        # incidence[a, b, l] = 1 when link l is on the route a -> b
        self.incidence = np.zeros((n, n, L), dtype=np.float64)
        for a in range(n):
            for b in range(n):
                for li in topology.paths[a][b]:
                    self.incidence[a, b, li] = 1.0

    def loads(self, origin, serving, rates) -> np.ndarray:
        """Aggregate rate per link from flows origin[i] -> serving[i] at rates[i]."""
        origin = np.asarray(origin, dtype=np.int64)
        serving = np.asarray(serving, dtype=np.int64)
        rates = np.asarray(rates, dtype=float)
        if len(origin) == 0:
            return np.zeros(len(self.mu))
        return np.einsum("il,i->l", self.incidence[origin, serving], rates)

    def link_delays(self, loads) -> np.ndarray:
        """Per-link delay including processing; inf where saturated."""
        rho = np.asarray(loads, dtype=float) / self.mu
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(rho < 1, (2 - rho) / (2 * self.mu * (1 - rho)), np.inf)
        return d + self.proc

    def pair_latency(self, loads=None) -> np.ndarray:
        """Forwarding latency for every (origin, serving) pair."""
        if loads is None:
            loads = np.zeros(len(self.mu))
        d = self.link_delays(loads)
        finite = np.where(np.isfinite(d), d, 0.0)
        lat = self.incidence @ finite
        sat = self.incidence @ (~np.isfinite(d)).astype(float)
        return np.where(sat > 0, math.inf, lat)
