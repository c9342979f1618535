import os
import re
import tempfile

import numpy as np
import pytest

from edgesleep.lifecycle import LifecycleTable
from edgesleep.orchestrator.ideal import (InstanceTooLarge, TinyInstance, export_lp,
                                          ideal_schedule, random_tiny_instance)

highspy = pytest.importorskip("highspy")


def inst(rows, cols, users, origins, t_max=0.005, services=1):
    E = rows * cols
    hops = np.array([[abs(a // cols - b // cols) + abs(a % cols - b % cols) for b in range(E)]
                     for a in range(E)])
    return TinyInstance(rows, cols, services, tuple(users), tuple(tuple(o) for o in origins),
                        t_max, 0.002 + 0.0011 * hops, mu_s=186.0, w_violation=1000.0)


def solve_lp(text):
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as fh:
        fh.write(text)
    try:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", 0.0)
        h.readModel(fh.name)
        h.run()
        return h.getInfo().objective_function_value, h.modelStatusToString(h.getModelStatus())
    finally:
        os.unlink(fh.name)


def test_single_user_single_ec():
    i = inst(1, 1, [0], [[0]] * 3)
    sch = ideal_schedule(i)
    assert sch.violations == 0
    assert all(d.active == (0,) for d in sch.steps)
    assert sch.total_cost == pytest.approx(3 * (150 + i.load_power))


def test_one_server_suffices():
    i = inst(1, 2, [0, 0], [[0, 1]], t_max=0.0035)
    sch = ideal_schedule(i)
    assert len(sch.steps[0].active) == 1 and sch.violations == 0


def test_zero_users_all_deepest():
    i = inst(2, 2, [], [[]] * 2)
    sch = ideal_schedule(i)
    assert sch.total_cost == pytest.approx(2 * 4 * 49.0)
    assert all(d.active == () for d in sch.steps)


def test_size_cap():
    with pytest.raises(InstanceTooLarge):
        ideal_schedule(inst(1, 5, [0], [[0]]))
    with pytest.raises(InstanceTooLarge):
        ideal_schedule(inst(1, 1, [0] * 7, [[0] * 7]))


def test_lp_contains_assignment_row():
    text = export_lp(inst(1, 1, [0], [[0]]), 1)
    assert re.search(r"x1_u0_t0: 1 c_u0_e0_t0 = 1", text)
    assert "Binaries" in text and text.rstrip().endswith("End")


def _count_rows(text):
    body = text.split("Subject To")[1].split("Binaries")[0]
    return len(re.findall(r"^ \S+:", body, flags=re.M))


def test_row_count_linear_in_t():
    i = inst(1, 2, [0, 0], [[0, 1]] * 12)
    counts = [_count_rows(export_lp(i, T, ideal=True)) for T in (2, 3, 4, 5)]
    assert len(set(np.diff(counts))) == 1
    # lock rows are cut at the horizon end; once T passes the longest delay the growth is affine
    delays = dict(lifecycle_table=LifecycleTable(), up_delay={"S1": 2, "S3": 3, "S4": 4},
                  down_delay={"S1": 1, "S3": 2, "S4": 3})
    counts = [_count_rows(export_lp(i, T, **delays)) for T in (8, 9, 10, 11)]
    assert len(set(np.diff(counts))) == 1


def test_lp_matches_ideal_on_random_instances():
    rng = np.random.default_rng(77)
    for _ in range(15):
        i = random_tiny_instance(rng)
        sch = ideal_schedule(i)
        obj, status = solve_lp(export_lp(i, ideal=True))
        assert status == "Optimal"
        assert round(obj) == round(sch.total_cost)
        assert sch.violations == 0


def test_lp_with_delays_is_solvable():
    i = inst(1, 2, [0], [[0], [1], [1]])
    text = export_lp(i, lifecycle_table=LifecycleTable(), up_delay={"S1": 2.0, "S3": 10.0,
                     "S4": 48.0}, down_delay={"S1": 2.0, "S3": 4.0, "S4": 9.0})
    obj, status = solve_lp(text)
    assert status == "Optimal"
    # delays only constrain, never help
    assert obj >= ideal_schedule(i).total_cost - 1e-6
