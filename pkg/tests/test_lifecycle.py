import pytest
from hypothesis import given, settings, strategies as st

from edgesleep.lifecycle import (LifecycleTable, ServiceInstance, ServiceState as S,
                                 TransitionRejected, begin_transition, complete_transition,
                                 footprint, transition_time)

TABLE = LifecycleTable()


def test_transition_times():
    assert transition_time(S.STOPPED, S.RUNNING, TABLE) == pytest.approx(0.510)
    assert transition_time(S.RUNNING, S.PAUSED, TABLE) == pytest.approx(0.096)
    assert transition_time(S.STOPPED, S.PAUSED, TABLE) == pytest.approx(0.606)
    assert transition_time(S.PAUSED, S.STOPPED, TABLE) == pytest.approx(0.606)
    assert transition_time(S.RUNNING, S.RUNNING, TABLE) == 0.0


def test_begin_transition_locks():
    inst = ServiceInstance(0, 0, S.RUNNING)
    assert begin_transition(inst, S.PAUSED, 10.0, True, TABLE) == pytest.approx(10.096)
    assert inst.state == S.PAUSED and inst.transitioning and not inst.serving
    with pytest.raises(TransitionRejected):
        begin_transition(inst, S.STOPPED, 10.01, True, TABLE)
    complete_transition(inst)
    assert not inst.transitioning


def test_mid_start_rejects_stop():
    inst = ServiceInstance(0, 0)
    begin_transition(inst, S.RUNNING, 0.0, True, TABLE)
    with pytest.raises(TransitionRejected):
        begin_transition(inst, S.STOPPED, 0.1, True, TABLE)


def test_sleeping_ec_rejects():
    with pytest.raises(TransitionRejected):
        begin_transition(ServiceInstance(0, 0), S.RUNNING, 0.0, False, TABLE)


def test_footprints():
    assert footprint(S.RUNNING, (1, 1)) == (1, 1)
    assert footprint(S.PAUSED, (1, 1)) == (0, 1)
    assert footprint(S.STOPPED, (3, 2)) == (0, 0)


def test_transition_charged_at_target():
    inst = ServiceInstance(0, 0, S.RUNNING)
    begin_transition(inst, S.STOPPED, 0.0, True, TABLE)
    assert inst.held((1, 1)) == (0, 0)


@settings(max_examples=60, deadline=None)
@given(seq=st.lists(st.sampled_from(list(S)), min_size=1, max_size=12),
       gaps=st.lists(st.floats(0, 2), min_size=12, max_size=12))
def test_completion_never_early_and_one_state(seq, gaps):
    inst = ServiceInstance(0, 0)
    now = 0.0
    for target, gap in zip(seq, gaps):
        if target == inst.state:
            with pytest.raises(TransitionRejected):
                begin_transition(inst, target, now, True, TABLE)
            continue
        prev = inst.state
        done = begin_transition(inst, target, now, True, TABLE)
        assert done >= now + transition_time(prev, target, TABLE) - 1e-12
        assert inst.state in set(S)
        now = done + gap
        complete_transition(inst)
