from __future__ import annotations

import threading

import numpy as np
import pytest

from qrck import experiments as ex
from qrck.quantum import Encoding, EncodingSpec, ReservoirSpec
from qrck.training import StateStack


def small_setup(**kw):
    res = ReservoirSpec(1, 2, EncodingSpec(Encoding.AMPLITUDE_SQRT, 1), 1.0, 1.0, 0.7, washout=20)
    base = dict(task="mackey_glass", reservoir=res, ridge=1e-10, n_train=300, n_test=60)
    base.update(kw)
    return ex.ForecastSetup(**base)


def test_run_trials_keeps_seed_order_with_threads():
    seen = []
    lock = threading.Lock()

    def fn(seed):
        with lock:
            seen.append(seed)
        return [ex.row(seed, "mstar", 0, "m", float(seed))]

    batches = []
    rows = ex.run_trials(fn, [3, 1, 2, 0], threads=3, sink=batches.append)
    assert [r["seed"] for r in rows] == [3, 1, 2, 0]
    assert [b[0]["seed"] for b in batches] == [3, 1, 2, 0]
    assert sorted(seen) == [0, 1, 2, 3]


def test_forecast_trial_is_deterministic_and_complete():
    setup = small_setup(modes=("mstar", "primal_full"))
    a = ex.forecast_trial(setup, 0)
    assert a == ex.forecast_trial(setup, 0)
    metrics = {r["metric"] for r in a}
    assert metrics == {"horizon_steps", "horizon_relative", "horizon_lyapunov", "rms_train_error", "clip_count", "readout_terms"}
    # the complete-basis primal and M* give the same fit error
    rms = {r["mode"]: r["value"] for r in a if r["metric"] == "rms_train_error"}
    assert abs(rms["mstar"] - rms["primal_full"]) <= 1e-6


def test_noisy_inputs_seeded_and_in_range():
    spec = small_setup().reservoir
    series = np.full((100, 1), 0.99)
    a = ex.noisy_inputs(series, 0.05, spec, 4)
    assert np.array_equal(a, ex.noisy_inputs(series, 0.05, spec, 4))
    assert a.max() <= 1.0 and not np.array_equal(a, series)
    assert ex.noisy_inputs(series, 0.0, spec, 4) is series


def test_make_series_scaling():
    s = ex.make_series("lorenz", 1, 400, 50)
    assert np.isclose(s.train.min(), 0.05) and np.isclose(s.train.max(), 0.95)
    assert s.lyapunov is not None and s.dt == 0.02
    raw = s.to_physical(s.train)
    assert np.isclose(s.sigma, np.sqrt(np.mean(np.sum((raw - raw.mean(axis=0)) ** 2, axis=1))))
    with pytest.raises(ValueError):
        ex.make_series("weather", 0, 10, 10)


def test_grid_search_picks_best_and_records_table():
    base = small_setup(modes=("mstar", "pauli"), subset_sizes=(4,))
    grid = {"evolution_time": (0.7, 0.7), "ridge": (1e-10,)}
    result = ex.grid_search(base, grid, [0])
    assert len(result.table) == 2 and result.table[0][1] == result.table[1][1]
    # equal scores keep the first point; requested modes come back
    assert result.best.modes == ("mstar", "pauli")
    with pytest.raises(KeyError):
        ex.grid_search(base, {"tfim_g": (1,)}, [0])


def test_select_ridge_prefers_smaller_on_ties(rng):
    psis = rng.standard_normal((40, 2)) + 0j
    psis /= np.linalg.norm(psis, axis=1, keepdims=True)
    states = StateStack(psis, True)
    labels = np.zeros(40, dtype=int)
    labels[::2] = 1
    best, scores = ex.select_ridge(states, labels, 2, [1.0, 1e-3], 0.25, 0)
    assert set(scores) == {1e-3, 1.0}
    top = max(scores.values())
    assert best == min(lam for lam, s in scores.items() if s == top)
    assert ex.select_ridge(states, labels, 2, [0.5], 0.25, 0) == (0.5, {})


def test_classification_experiment_rows():
    setup = ex.ClassificationSetup(
        n_qubits=2, ridge_grid=(1e-3,), subset_sizes=(1, 4, 16), n_samples=200,
        modes=("mstar", "pauli", "zstring", "primal_zzz"), synthetic={"n_classes": 3, "dim": 5, "separation": 2.0},
    )
    rows = ex.classification_experiment(setup, 0)
    assert rows[0]["metric"] == "ridge" and rows[0]["value"] == 1e-3
    sizes = {(r["mode"], r["subset_size"]) for r in rows if r["metric"] == "test_accuracy"}
    # only 4 strings of Z weight <= 2 exist on two qubits
    assert ("primal_zzz", 4) in sizes and ("primal_zzz", 16) not in sizes
    assert ("zstring", 4) in sizes and ("zstring", 16) not in sizes
    assert all(0 <= r["value"] <= 1 for r in rows if r["metric"] == "test_accuracy")
