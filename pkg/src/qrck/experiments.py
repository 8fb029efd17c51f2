"""End-to-end pipelines: forecasting trials, grid search and classification sweeps.

Every function here is deterministic given its seeds. Results are returned as
plain dict rows with keys ``seed, mode, subset_size, metric, value,
censored`` which the command line layer turns into tables.

Readout modes:

``mstar``        the optimal observable from the kernel solve, used directly
``primal_full``  ridge re-fit on the complete (normalized) Pauli basis
``pauli``        re-fit on the top-k Pauli strings ranked from M*
``zstring``      re-fit on the top-k Z-strings after rotating by each V
``primal_zzz``   constrained primal on identity, Z and ZZ strings (first k)
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import decompose as dec
from .pauli import codes_up_to_weight
from .quantum import EncodingSpec, ReservoirSpec, qelm_states, reservoir_unitary
from .training import (
    ObservableModel,
    StateStack,
    classify,
    dual_solve,
    fit_primal,
    gram,
    optimal_observable,
)
from .tasks import classification as cls
from .tasks.datasets import ScaleTransform, gen_harmonic, gen_lorenz, gen_mackey_glass
from .tasks.forecast import closed_loop_forecast, next_step_pairs
from .tasks.metrics import accuracy, forecast_horizon, rms_error, trajectory_sigma

FORECAST_TASKS = ("lorenz", "mackey_glass", "harmonic")
READOUT_MODES = ("mstar", "primal_full", "pauli", "zstring")
CLASSIFY_MODES = ("mstar", "pauli", "zstring", "primal_zzz")


def row(seed, mode, subset_size, metric, value, censored=False) -> dict:
    return {
        "seed": int(seed),
        "mode": mode,
        "subset_size": int(subset_size),
        "metric": metric,
        "value": float(value),
        "censored": bool(censored),
    }


# ------------------------------------------------------------------- series


@dataclass
class SeriesSplit:
    train: np.ndarray  # encoded-range samples used for training and warm-up
    test: np.ndarray  # encoded-range truth following the training block
    to_physical: Callable[[np.ndarray], np.ndarray]
    sigma: float  # trajectory spread in physical units
    dt: float
    lyapunov: float | None


def make_series(task: str, seed: int, n_train: int, n_test: int, params: dict | None = None) -> SeriesSplit:
    """Generate a task series and split it into training and test blocks."""
    params = dict(params or {})
    total = n_train + n_test
    if task == "lorenz":
        lo, hi = params.get("scale_lo", 0.05), params.get("scale_hi", 0.95)
        ds = gen_lorenz(None, total, params.get("dt_sample", 0.02), seed)
        raw = ds.samples
        scale = ScaleTransform.fit(raw[:n_train], lo, hi)
        # test values outside the training range are kept; only inputs get clipped
        z = scale.forward(raw)
        return SeriesSplit(z[:n_train], z[n_train:], scale.inverse, trajectory_sigma(raw[:n_train]), ds.dt, ds.lyapunov_exponent)
    if task == "mackey_glass":
        ds = gen_mackey_glass(total, seed, params.get("scale_lo", 0.0), params.get("scale_hi", 0.3))
        z = ds.samples
        return SeriesSplit(z[:n_train], z[n_train:], ds.scale_transform.inverse, trajectory_sigma(ds.raw()[:n_train]), ds.dt, ds.lyapunov_exponent)
    if task == "harmonic":
        ds = gen_harmonic(
            params.get("n_frequencies", 9), params.get("omega0", 0.5), total, params.get("dt", 0.2), seed,
            peak=params.get("peak", 0.95),
        )
        z = ds.samples
        return SeriesSplit(z[:n_train], z[n_train:], lambda v: v, trajectory_sigma(z[:n_train]), ds.dt, None)
    raise ValueError(f"unknown forecasting task {task!r}")


# ----------------------------------------------------------------- forecast


@dataclass
class ForecastSetup:
    task: str
    reservoir: ReservoirSpec
    ridge: float = 1e-8
    n_train: int = 4000
    n_test: int = 800
    input_noise: float = 0.0  # std of Gaussian noise on training inputs
    data: dict = field(default_factory=dict)
    subset_sizes: tuple[int, ...] = ()
    modes: tuple[str, ...] = ("mstar",)
    max_weight: int | None = None
    refit_ridge: float | None = None  # None: same as ridge


def noisy_inputs(series: np.ndarray, noise: float, spec: ReservoirSpec, seed: int) -> np.ndarray:
    if noise <= 0:
        return series
    rng = np.random.default_rng([seed, 7919])
    lo, hi = spec.encoding.input_range
    return np.clip(series + noise * rng.standard_normal(series.shape), lo, hi)


@dataclass
class TrainedForecaster:
    states: StateStack
    targets: np.ndarray
    m_star: np.ndarray  # (C, D, D)
    alpha: np.ndarray


def train_forecaster(setup: ForecastSetup, train: np.ndarray, u: np.ndarray, seed: int) -> TrainedForecaster:
    spec = setup.reservoir
    # out-of-range training data means a scaling mistake; the encoder rejects it
    inputs = noisy_inputs(train, setup.input_noise, spec, seed)
    states, _ = next_step_pairs(inputs, spec, u)
    discard = spec.washout if spec.n_ancilla else 0
    targets = train[discard + 1 :]
    sol = dual_solve(gram(states), targets, setup.ridge)
    return TrainedForecaster(states, targets, optimal_observable(states, sol), sol.alpha)


def _readouts(setup: ForecastSetup, tf: TrainedForecaster):
    """Yield ``(mode, subset_size, observables)`` for every requested readout."""
    refit_ridge = setup.ridge if setup.refit_ridge is None else setup.refit_ridge
    dim = tf.m_star.shape[-1]
    n = dim.bit_length() - 1
    if "mstar" in setup.modes:
        yield "mstar", 4**n, tf.m_star
    if "primal_full" in setup.modes:
        sol = fit_primal(tf.states, tf.targets, list(range(4**n)), refit_ridge, 1, True)
        yield "primal_full", 4**n, sol.as_observables()
    if "pauli" in setup.modes and setup.subset_sizes:
        sub = dec.rank_operators([dec.pauli_decompose(m, c) for c, m in enumerate(tf.m_star)], dec.PAULI, setup.max_weight)
        for k in setup.subset_sizes:
            if k <= len(sub):
                yield "pauli", k, dec.refit_subset(sub.head(k), tf.states, tf.targets, refit_ridge).as_observables()
    if "zstring" in setup.modes and setup.subset_sizes:
        sub = dec.rank_operators([dec.diagonalize(m, c) for c, m in enumerate(tf.m_star)], dec.ZSTRING, setup.max_weight)
        for k in setup.subset_sizes:
            if k <= len(sub):
                yield "zstring", k, dec.refit_subset(sub.head(k), tf.states, tf.targets, refit_ridge).as_observables()


def forecast_trial(setup: ForecastSetup, seed: int, u: np.ndarray | None = None) -> list[dict]:
    """Train on one generated series and forecast the following test block."""
    spec = setup.reservoir
    if u is None:
        u = reservoir_unitary(spec)
    series = make_series(setup.task, seed, setup.n_train, setup.n_test, setup.data)
    tf = train_forecaster(setup, series.train, u, seed)
    warm = series.train
    truth = series.to_physical(series.test)
    rows = []
    for mode, size, obs in _readouts(setup, tf):
        model = ObservableModel(obs)
        fit = model.predict(tf.states)
        fr = closed_loop_forecast(model, spec, u, warm, setup.n_test)
        steps, lyap, censored = forecast_horizon(
            truth, series.to_physical(fr.predicted), series.sigma, series.dt, series.lyapunov, return_censored=True
        )
        rows.append(row(seed, mode, size, "horizon_steps", steps, censored))
        rows.append(row(seed, mode, size, "horizon_relative", steps / setup.n_test, censored))
        if lyap is not None:
            rows.append(row(seed, mode, size, "horizon_lyapunov", lyap, censored))
        rows.append(row(seed, mode, size, "rms_train_error", rms_error(tf.targets, fit)))
        rows.append(row(seed, mode, size, "clip_count", fr.clip_count))
        rows.append(row(seed, mode, size, "readout_terms", size * tf.targets.shape[1]))
    return rows


def run_trials(
    fn: Callable[[int], list[dict]], seeds: Sequence[int], threads: int = 1, sink: Callable[[list[dict]], None] | None = None
) -> list[dict]:
    """Run ``fn(seed)`` for every seed; rows come back (and reach ``sink``) in seed order."""
    seeds = list(seeds)
    out: list[dict] = []

    def collect(results):
        for rows in results:
            if sink is not None:
                sink(rows)
            out.extend(rows)

    if threads <= 1 or len(seeds) <= 1:
        collect(fn(s) for s in seeds)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            collect(pool.map(fn, seeds))
    return out


def forecast_trials(setup: ForecastSetup, seeds: Sequence[int], threads: int = 1, sink=None) -> list[dict]:
    u = reservoir_unitary(setup.reservoir)
    return run_trials(lambda s: forecast_trial(setup, s, u), seeds, threads, sink)


def metric_values(rows: list[dict], metric: str, mode: str = "mstar", subset_size: int | None = None) -> np.ndarray:
    return np.array(
        [
            r["value"]
            for r in rows
            if r["metric"] == metric and r["mode"] == mode and (subset_size is None or r["subset_size"] == subset_size)
        ]
    )


@dataclass
class GridResult:
    best: ForecastSetup
    table: list[tuple[dict, float]]  # (parameters, mean horizon) in grid order


GRID_KEYS = ("tfim_h", "tfim_j", "evolution_time", "ridge", "input_noise")


def grid_search(base: ForecastSetup, grid: dict[str, Sequence], seeds: Sequence[int], threads: int = 1) -> GridResult:
    """Pick the setup with the largest mean M* horizon on ``seeds``.

    ``grid`` maps any of ``tfim_h, tfim_j, evolution_time, ridge,
    input_noise`` to candidate values. Ties keep the earlier grid point.
    """
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise KeyError(f"unknown grid keys {sorted(unknown)}")
    keys = list(grid)
    table = []
    best, best_score = None, -np.inf
    for values in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, values))
        res_kw = {k: params[k] for k in ("tfim_h", "tfim_j", "evolution_time") if k in params}
        setup_kw = {k: params[k] for k in ("ridge", "input_noise") if k in params}
        setup = replace(base, reservoir=replace(base.reservoir, **res_kw), modes=("mstar",), **setup_kw)
        rows = forecast_trials(setup, seeds, threads)
        score = float(np.mean(metric_values(rows, "horizon_steps")))
        table.append((params, score))
        if score > best_score:
            best, best_score = setup, score
    return GridResult(replace(best, modes=base.modes), table)


# ----------------------------------------------------------- classification


@dataclass
class ClassificationSetup:
    n_qubits: int = 5
    encoding: str = "RotationalPairedYZ"
    tfim_h: float = 10.0
    tfim_j: float = 10.0
    evolution_time: float = 1.0
    ridge_grid: tuple[float, ...] = (1e-6,)
    refit_ridge: float | None = None
    validation_fraction: float = 0.2
    p_max: int = 1
    subset_sizes: tuple[int, ...] = (1, 2, 4, 8, 12, 16)
    max_weight: int | None = None
    modes: tuple[str, ...] = ("mstar", "pauli", "primal_zzz")
    n_samples: int = 10000
    test_fraction: float = 0.2
    images_path: str | None = None
    labels_path: str | None = None
    synthetic: dict = field(default_factory=dict)

    def reservoir(self) -> ReservoirSpec:
        enc = EncodingSpec(self.encoding, self.input_dim)
        return ReservoirSpec(self.n_qubits, 0, enc, self.tfim_h, self.tfim_j, self.evolution_time)

    @property
    def input_dim(self) -> int:
        return 2 * self.n_qubits if self.encoding == "RotationalPairedYZ" else self.n_qubits


def load_classification_data(setup: ClassificationSetup, seed: int) -> cls.ClassificationDataset:
    if setup.images_path:
        full = cls.load_idx(setup.images_path, setup.labels_path, setup.test_fraction, seed)
        features, labels = full.features, full.labels
        if setup.n_samples < len(labels):
            keep = np.sort(np.random.default_rng([seed, 1]).choice(len(labels), setup.n_samples, replace=False))
            features, labels = features[keep], labels[keep]
        train, test = cls.split_indices(len(labels), setup.test_fraction, seed)
        return cls.ClassificationDataset(features, labels, train, test)
    return cls.gaussian_mixture(n_samples=setup.n_samples, seed=seed, test_fraction=setup.test_fraction, **setup.synthetic)


def _encoded_states(setup: ClassificationSetup, ds: cls.ClassificationDataset, u: np.ndarray):
    x_tr, y_tr, x_te, y_te = ds.split()
    z_tr, basis = cls.pca_reduce(x_tr, setup.input_dim)
    z_te = np.clip(basis.project(x_te), 0.0, 1.0)
    spec = setup.reservoir()
    return StateStack(qelm_states(z_tr, spec, u), True), y_tr, StateStack(qelm_states(z_te, spec, u), True), y_te


def select_ridge(states: StateStack, labels: np.ndarray, n_classes: int, grid: Sequence[float], fraction: float, seed: int):
    """Ridge value with the best M* validation accuracy; ties keep the smaller value."""
    grid = sorted(grid)
    if len(grid) == 1:
        return grid[0], {}
    fit_idx, val_idx = cls.split_indices(len(labels), fraction, seed + 1)
    fit = StateStack(states.data[fit_idx], states.pure)
    val = StateStack(states.data[val_idx], states.pure)
    k = gram(fit)
    y = cls.one_hot_targets(labels[fit_idx], n_classes)
    scores = {}
    for lam in grid:
        sol = dual_solve(k, y, lam)
        scores[lam] = accuracy(classify(ObservableModel(optimal_observable(fit, sol)).predict(val)), labels[val_idx])
    best = max(grid, key=lambda lam: (scores[lam], -lam))
    return best, scores


@dataclass
class ClassifierFit:
    train_states: StateStack
    train_labels: np.ndarray
    test_states: StateStack
    test_labels: np.ndarray
    targets: np.ndarray  # one-vs-rest, (P, C)
    ridge: float
    m_star: np.ndarray
    alpha: np.ndarray


def fit_classifier(setup: ClassificationSetup, seed: int = 0) -> ClassifierFit:
    """Encode, pick the kernel ridge on a validation split and build M*."""
    u = reservoir_unitary(setup.reservoir())
    ds = load_classification_data(setup, seed)
    s_tr, y_tr, s_te, y_te = _encoded_states(setup, ds, u)
    ridge, _ = select_ridge(s_tr, y_tr, ds.n_classes, setup.ridge_grid, setup.validation_fraction, seed)
    targets = cls.one_hot_targets(y_tr, ds.n_classes)
    sol = dual_solve(gram(s_tr), targets, ridge)
    return ClassifierFit(s_tr, y_tr, s_te, y_te, targets, ridge, optimal_observable(s_tr, sol), sol.alpha)


def classification_experiment(setup: ClassificationSetup, seed: int = 0) -> list[dict]:
    fit = fit_classifier(setup, seed)
    s_tr, s_te, y_te, targets, m_star = fit.train_states, fit.test_states, fit.test_labels, fit.targets, fit.m_star
    refit_ridge = fit.ridge if setup.refit_ridge is None else setup.refit_ridge
    n = setup.n_qubits
    rows = [row(seed, "mstar", 0, "ridge", fit.ridge)]

    def score(model) -> float:
        return accuracy(classify(model.predict(s_te)), y_te)

    if "mstar" in setup.modes:
        rows.append(row(seed, "mstar", 4**n, "test_accuracy", score(ObservableModel(m_star))))
    if "pauli" in setup.modes:
        sub = dec.rank_operators([dec.pauli_decompose(m, c) for c, m in enumerate(m_star)], dec.PAULI, setup.max_weight)
        for k in setup.subset_sizes:
            if k <= len(sub):
                model = dec.refit_subset(sub.head(k), s_tr, targets, refit_ridge, setup.p_max)
                rows.append(row(seed, "pauli", k, "test_accuracy", score(model)))
    if "zstring" in setup.modes:
        sub = dec.rank_operators([dec.diagonalize(m, c) for c, m in enumerate(m_star)], dec.ZSTRING, setup.max_weight)
        for k in setup.subset_sizes:
            if k <= len(sub):
                model = dec.refit_subset(sub.head(k), s_tr, targets, refit_ridge, setup.p_max)
                rows.append(row(seed, "zstring", k, "test_accuracy", score(model)))
    if "primal_zzz" in setup.modes:
        zz = codes_up_to_weight(n, 2, "Z")
        for k in setup.subset_sizes:
            if k <= len(zz):
                model = fit_primal(s_tr, targets, zz[:k], refit_ridge, setup.p_max, True)
                rows.append(row(seed, "primal_zzz", k, "test_accuracy", score(model)))
    return rows
