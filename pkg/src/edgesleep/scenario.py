"""Static world: grid of edge clouds, links, coverage cells and hop routes."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig


@dataclass(frozen=True)
class EdgeCloud:
    id: int
    grid_pos: tuple
    cores: int
    capacity: tuple


@dataclass(frozen=True)
class Service:
    id: int
    demand: tuple
    latency_limit: float
    request_rate_per_user: float


@dataclass(frozen=True)
class Link:
    endpoints: tuple  # (a, b) with a < b
    service_rate: float
    proc_time: float


@dataclass
class Topology:
    rows: int
    cols: int
    cell_size: float
    ecs: list
    links: list
    # paths[a][b]: tuple of link indices from a to b
    paths: list = field(repr=False)
    hops: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.ecs)

    @property
    def arena(self) -> tuple:
        return (self.cols * self.cell_size, self.rows * self.cell_size)

    def ec_at(self, row: int, col: int) -> int:
        return row * self.cols + col

    def coverage(self, x: float, y: float) -> int:
        """Covering EC of a plane position; positions outside the arena clamp to the border cell."""
        col = min(max(int(x // self.cell_size), 0), self.cols - 1)
        row = min(max(int(y // self.cell_size), 0), self.rows - 1)
        return row * self.cols + col

    def coverage_many(self, xy: np.ndarray) -> np.ndarray:
        col = np.clip((xy[:, 0] // self.cell_size).astype(np.int64), 0, self.cols - 1)
        row = np.clip((xy[:, 1] // self.cell_size).astype(np.int64), 0, self.rows - 1)
        return row * self.cols + col

    def cell_center(self, ec: int) -> tuple:
        row, col = divmod(ec, self.cols)
        return ((col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size)

    def neighbors(self, ec: int) -> list:
        out = []
        for (a, b) in (l.endpoints for l in self.links):
            if a == ec:
                out.append(b)
            elif b == ec:
                out.append(a)
        return sorted(out)

    def serialize(self) -> str:
        lines = [f"grid {self.rows} {self.cols} {self.cell_size!r}"]
        lines += [f"ec {e.id} {e.grid_pos[0]} {e.grid_pos[1]} {e.cores} {list(e.capacity)}" for e in self.ecs]
        lines += [f"link {l.endpoints[0]} {l.endpoints[1]} {l.service_rate!r} {l.proc_time!r}"
                  for l in self.links]
        for a in range(self.n):
            for b in range(self.n):
                lines.append(f"route {a} {b} {list(self.paths[a][b])}")
        return "\n".join(lines)


def build_topology(config: ScenarioConfig) -> Topology:
    g = config.grid
    if g.rows < 1 or g.cols < 1:
        raise ConfigError("grid: rows and cols must be >= 1")
    if config.links.service_rate <= 0:
        raise ConfigError("links.service_rate: must be > 0")
    ecs = [
        EdgeCloud(id=r * g.cols + c, grid_pos=(r, c), cores=config.ec.cores,
                  capacity=tuple(config.ec.capacity))
        for r in range(g.rows) for c in range(g.cols)
    ]
    links = []
    for r in range(g.rows):
        for c in range(g.cols):
            a = r * g.cols + c
            if c + 1 < g.cols:
                links.append(Link((a, a + 1), config.links.service_rate, config.links.proc_time))
            if r + 1 < g.rows:
                links.append(Link((a, a + g.cols), config.links.service_rate, config.links.proc_time))
    paths, hops = _all_routes(len(ecs), links)
    return Topology(g.rows, g.cols, g.cell_size, ecs, links, paths, hops)


def _all_routes(n: int, links: list):
    adj = [[] for _ in range(n)]
    link_of = {}
    for i, l in enumerate(links):
        a, b = l.endpoints
        adj[a].append(b)
        adj[b].append(a)
        link_of[(a, b)] = link_of[(b, a)] = i
    for nb in adj:
        nb.sort()
    paths = [[()] * n for _ in range(n)]
    hops = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        # BFS visiting neighbours in ascending id: the first parent found is on the
        # lexicographically smallest shortest node sequence from src
        dist = [-1] * n
        seq = [None] * n
        dist[src] = 0
        seq[src] = (src,)
        frontier = [src]
        while frontier:
            nxt = {}
            for u in frontier:
                for v in adj[u]:
                    if dist[v] == -1:
                        cand = seq[u] + (v,)
                        if v not in nxt or cand < nxt[v]:
                            nxt[v] = cand
            for v, s in nxt.items():
                dist[v] = len(s) - 1
                seq[v] = s
            frontier = sorted(nxt)
        for dst in range(n):
            if seq[dst] is None:
                raise ConfigError("grid: topology is not connected")
            s = seq[dst]
            paths[src][dst] = tuple(link_of[(s[i], s[i + 1])] for i in range(len(s) - 1))
            hops[src, dst] = len(s) - 1
    return paths, hops


def route(topology: Topology, src: int, dst: int) -> list:
    """Minimum-hop path from ``src`` to ``dst`` as a list of Link objects."""
    n = topology.n
    if not (0 <= src < n and 0 <= dst < n):
        raise KeyError(f"unknown EC in route({src}, {dst})")
    return [topology.links[i] for i in topology.paths[src][dst]]


def build_services(config: ScenarioConfig) -> list:
    s = config.services
    return [Service(i, tuple(s.demand), s.latency_limit, s.request_rate) for i in range(s.count)]
