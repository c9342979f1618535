import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesleep.config import ScenarioConfig
from edgesleep.latency import (LatencySample, LinkModel, LinkSaturated, forwarding_latency,
                               link_queue_delay, sla_verdict)
from edgesleep.queueing import simulate_batch
from edgesleep.scenario import Link, build_topology, route


def test_link_delay_values():
    assert link_queue_delay(0, 1000) == pytest.approx(1e-3)
    assert link_queue_delay(500, 1000) == pytest.approx(1.5e-3)
    assert link_queue_delay(999, 1000) == pytest.approx(0.5005, rel=1e-3)
    with pytest.raises(LinkSaturated):
        link_queue_delay(1000, 1000)


def test_link_delay_matches_simulated_md1():
    rng = np.random.default_rng(2)
    lam, mu, n = 700.0, 1000.0, 400_000
    arr = np.cumsum(rng.exponential(1 / lam, n))
    stats = simulate_batch(1, arr, np.full(n, 1 / mu))
    assert stats[3] / stats[2] == pytest.approx(link_queue_delay(lam, mu), rel=0.05)


def test_forwarding_latency():
    assert forwarding_latency([], {}) == 0.0
    path = [Link((0, 1), 1000.0, 1e-4), Link((1, 2), 1000.0, 1e-4)]
    assert forwarding_latency(path, [0.0, 0.0]) == pytest.approx(2.2e-3)
    loads = {path[0]: 300.0, path[1]: 800.0}
    expect = sum((2 - r) / (2 * 1000 * (1 - r)) + 1e-4 for r in (0.3, 0.8))
    assert forwarding_latency(path, loads) == pytest.approx(expect)


def test_sla_verdict():
    s = LatencySample(0, 0.001, 0.002, 0.004)
    assert sla_verdict(s, 0.007) == "ok"
    assert sla_verdict(s, 0.0069) == "violated"
    assert sla_verdict(s, 0.01, service_transitioning=True) == "violated"
    assert sla_verdict(s, 0.01, ec_waking=True) == "violated"
    assert sla_verdict(LatencySample(0, 0, 0, 0, dropped=True), 1.0) == "violated"


def _topo():
    return build_topology(ScenarioConfig())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 24), st.integers(0, 24), st.floats(0, 500)),
                max_size=30))
def test_link_loads_are_flow_sums(flows):
    topo = _topo()
    lm = LinkModel(topo)
    origin = [f[0] for f in flows]
    serving = [f[1] for f in flows]
    rates = [f[2] for f in flows]
    loads = lm.loads(origin, serving, rates)
    expect = np.zeros(len(topo.links))
    for q, w, r in flows:
        for li in topo.paths[q][w]:
            expect[li] += r
    assert np.allclose(loads, expect)
    lat = lm.pair_latency(loads)
    for q, w, _ in flows[:5]:
        want = forwarding_latency(route(topo, q, w), {l: loads[topo.links.index(l)]
                                                      for l in route(topo, q, w)})
        assert lat[q, w] == pytest.approx(want)


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(1, 1e5), a=st.floats(0, 0.99), b=st.floats(0, 0.99))
def test_delay_monotone_in_load(mu, a, b):
    lo, hi = sorted((a, b))
    assert link_queue_delay(lo * mu, mu) <= link_queue_delay(hi * mu, mu)
