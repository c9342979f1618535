import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesleep.config import ConfigError, ScenarioConfig
from edgesleep.scenario import build_topology, route


def grid(rows, cols, cell=100.0):
    cfg = ScenarioConfig()
    cfg.grid.rows, cfg.grid.cols, cfg.grid.cell_size = rows, cols, cell
    return build_topology(cfg)


def test_five_by_five():
    topo = grid(5, 5)
    assert topo.n == 25
    assert len(topo.links) == 40
    assert topo.neighbors(0) == [1, 5]
    assert len({e.id for e in topo.ecs}) == 25


def test_single_cell():
    topo = grid(1, 1)
    assert topo.n == 1 and topo.links == []
    for x, y in [(0, 0), (50, 50), (99.9, 0.1)]:
        assert topo.coverage(x, y) == 0


def test_routes():
    assert len(route(grid(2, 2), 0, 3)) == 2
    t3 = grid(3, 3)
    assert route(t3, 4, 4) == []
    assert len(route(t3, 0, 1)) == 1
    assert len(route(t3, 0, 8)) == 4
    # lexicographically smallest node sequence: 0-1-2-5-8
    nodes = [0]
    for link in route(t3, 0, 8):
        a, b = link.endpoints
        nodes.append(b if a == nodes[-1] else a)
    assert nodes == [0, 1, 2, 5, 8]
    with pytest.raises(KeyError):
        route(t3, 0, 9)


def test_errors():
    cfg = ScenarioConfig()
    cfg.grid.rows = 0
    with pytest.raises(ConfigError):
        build_topology(cfg)
    cfg = ScenarioConfig()
    cfg.links.service_rate = 0.0
    with pytest.raises(ConfigError):
        build_topology(cfg)


def test_rebuild_is_identical():
    assert grid(4, 3).serialize() == grid(4, 3).serialize()


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 5), cols=st.integers(1, 5), data=st.data())
def test_hops_symmetric_and_triangle(rows, cols, data):
    topo = grid(rows, cols)
    h = topo.hops
    assert (h == h.T).all()
    n = topo.n
    assert (h[:, None, :] <= h[:, :, None] + h[None, :, :]).all()
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1))
    ra, rb = divmod(a, cols)
    rb_, cb = divmod(b, cols)
    assert h[a, b] == abs(ra - rb_) + abs(rb - cb)
    assert len(route(topo, a, b)) == h[a, b]


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 5), cols=st.integers(1, 5),
       pts=st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=50))
def test_coverage_is_total_and_partitions(rows, cols, pts):
    topo = grid(rows, cols, 37.0)
    w, hgt = topo.arena
    xy = np.array([(x * w, y * hgt) for x, y in pts])
    cells = topo.coverage_many(xy)
    assert ((cells >= 0) & (cells < topo.n)).all()
    for (x, y), c in zip(xy, cells):
        assert topo.coverage(x, y) == c
        r, col = divmod(int(c), cols)
        assert col * 37.0 <= x <= (col + 1) * 37.0 and r * 37.0 <= y <= (r + 1) * 37.0
