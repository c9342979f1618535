import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesleep.config import ScenarioConfig
from edgesleep.forecast import (EWMAForecaster, Forecast, ForecastError, OracleForecaster,
                                PersistenceForecaster, ingest_forecast_file, origin_frame,
                                origin_to_load, write_forecast_file)
from edgesleep.mobility import MobilityParams, simulate_trajectory
from edgesleep.scenario import build_topology


def test_persistence_repeats_last():
    hist = [np.zeros((3, 2)), np.arange(6.0).reshape(3, 2)]
    fc = PersistenceForecaster().predict(hist, 4, 5.0)
    assert fc.horizon_steps == 4
    assert all(np.array_equal(f, hist[-1]) for f in fc.frames)


def test_ewma_weight_one_is_persistence():
    rng = np.random.default_rng(0)
    hist = [rng.random((4, 3)) for _ in range(5)]
    a = EWMAForecaster(1.0).predict(hist, 3, 5.0).frames
    b = PersistenceForecaster().predict(hist, 3, 5.0).frames
    assert np.array_equal(a, b)


def test_empty_history_rejected():
    with pytest.raises(ForecastError):
        PersistenceForecaster().predict([], 3, 5.0)


def test_oracle_equals_realised_future():
    topo = build_topology(ScenarioConfig())
    p = MobilityParams(speed_sigma=0.0, direction_sigma=0.0)
    tr = simulate_trajectory(topo, 30, p, 120, np.random.default_rng(4))
    svc = np.random.default_rng(1).integers(0, 8, 30)
    fc = OracleForecaster(tr, svc, 100.0, 25, 8).predict([], 12, 5.0, now=20.0)
    for k in range(12):
        cells = tr.cells[int(20 + 5 * k)]
        want = np.zeros((25, 8))
        for u in range(30):
            want[cells[u], svc[u]] += 100.0
        assert np.array_equal(fc.frames[k], want)


def test_load_matrix_is_diagonal():
    frame = np.array([[1.0, 0.0], [0.0, 2.0]])
    load = origin_to_load(frame)
    assert load.shape == (2, 2, 2)
    assert load[0, 0, 0] == 1 and load[1, 1, 1] == 2 and load.sum() == 3


def test_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    fc = Forecast(5.0, rng.random((10, 25, 8)) * 100)
    path = tmp_path / "f.txt"
    write_forecast_file(path, fc)
    got = ingest_forecast_file(path, 25, 8)
    assert got.horizon_steps == 10 and got.step_dt == 5.0
    assert np.array_equal(got.frames, fc.frames)


def test_file_errors(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("2 1 1 5.0\n1.0\n-1.0\n")
    with pytest.raises(ForecastError, match="frame 0, row 1"):
        ingest_forecast_file(p)
    p.write_text("2 1 0 5.0\n")
    with pytest.raises(ForecastError, match="H"):
        ingest_forecast_file(p)
    p.write_text("2 1 2 5.0\n1\n1\n1\n")
    with pytest.raises(ForecastError, match="frame 1"):
        ingest_forecast_file(p)
    p.write_text("2 1 1 5.0\n1\n1\n")
    with pytest.raises(ForecastError, match="E=2"):
        ingest_forecast_file(p, 25, 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), w=st.floats(0.05, 1.0), h=st.integers(1, 8))
def test_predictors_are_pure(seed, w, h):
    rng = np.random.default_rng(seed)
    hist = [rng.random((5, 3)) for _ in range(4)]
    for f in (PersistenceForecaster(), EWMAForecaster(w)):
        a = f.predict(hist, h, 1.0).frames
        b = f.predict([x.copy() for x in hist], h, 1.0).frames
        assert np.array_equal(a, b) and (a >= 0).all() and len(a) == h


def test_origin_frame_sums_rates():
    f = origin_frame([0, 0, 2], [1, 1, 0], 100.0, 3, 2)
    assert f[0, 1] == 200 and f[2, 0] == 100 and f.sum() == 300
