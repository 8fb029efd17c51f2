"""Experiment execution and result emission."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .. import decompose as dec
from .. import experiments as ex
from ..errors import IoError, QRCKError, RunExists
from ..quantum import reservoir_unitary
from ..readout_io import TrainedReadout, save_readout
from ..tasks.classification import pca_reduce
from ..tasks.datasets import save_series
from ..tasks.metrics import rms_error
from ..training import ObservableModel
from .config import ExperimentConfig

log = logging.getLogger("qrck")

RESULT_COLUMNS = ("run_id", "task", "seed", "mode", "subset_size", "metric", "value", "censored")


@dataclass(frozen=True)
class ResultRow:
    run_id: str
    task: str
    seed: int
    mode: str
    subset_size: int
    metric: str
    value: float
    censored: bool = False

    def record(self) -> list[str]:
        return [
            self.run_id,
            self.task,
            str(self.seed),
            self.mode,
            str(self.subset_size),
            self.metric,
            repr(float(self.value)),
            "true" if self.censored else "false",
        ]

    @classmethod
    def from_record(cls, rec: dict) -> ResultRow:
        return cls(
            rec["run_id"], rec["task"], int(rec["seed"]), rec["mode"], int(rec["subset_size"]),
            rec["metric"], float(rec["value"]), rec["censored"] == "true",
        )


def default_run_id(config: ExperimentConfig, command: str, seed_offset: int = 0) -> str:
    if config["run_id"]:
        return config["run_id"]
    blob = json.dumps({"config": config.echo(), "command": command, "seed_offset": seed_offset}, sort_keys=True)
    return f"{config.task}-{command}-{hashlib.sha256(blob.encode()).hexdigest()[:10]}"


class RunDirectory:
    """Owns ``<output>/<run_id>/``; refuses to reuse an existing run id.

    Result rows go through :meth:`write`, which is the single writer for the
    per-task tables and flushes after every batch.
    """

    def __init__(self, output_dir, run_id: str):
        self.path = Path(output_dir) / run_id
        self.run_id = run_id
        if self.path.exists():
            raise RunExists(f"run {run_id!r} already exists at {self.path}; refusing to overwrite")
        try:
            self.path.mkdir(parents=True)
        except OSError as exc:
            raise IoError(f"cannot create {self.path}: {exc}") from exc
        self.files: list[Path] = []
        self._tables: dict[str, Path] = {}

    def table(self, task: str) -> Path:
        if task not in self._tables:
            p = self.path / f"{task}.csv"
            self._append(p, [list(RESULT_COLUMNS)])
            self._tables[task] = p
            self.files.append(p)
        return self._tables[task]

    def _append(self, path: Path, records: Iterable[list[str]]) -> None:
        try:
            with path.open("a", encoding="utf-8", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerows(records)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc

    def write(self, rows: Sequence[ResultRow]) -> None:
        for task in dict.fromkeys(r.task for r in rows):
            self._append(self.table(task), [r.record() for r in rows if r.task == task])

    def artifact(self, name: str) -> Path:
        p = self.path / name
        self.files.append(p)
        return p

    def write_manifest(self, manifest: dict) -> Path:
        p = self.path / "manifest.json"
        manifest = dict(manifest, files=[f.name for f in self.files])
        try:
            p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {p}: {exc}") from exc
        return p


def versions() -> dict[str, str]:
    import scipy

    from .. import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "qrck": __version__}


def emit_results(rows: Sequence[ResultRow], output_dir, run_id: str, task: str, manifest: dict | None = None) -> list[Path]:
    """Write one table per task plus ``manifest.json``; an empty row set gives a header-only table."""
    run = RunDirectory(output_dir, run_id)
    run.table(task)
    run.write(rows)
    m = run.write_manifest(dict(manifest or {}, run_id=run_id))
    return run.files + [m]


# ------------------------------------------------------------------ setups


def forecast_setup(config: ExperimentConfig, modes: Sequence[str] | None = None) -> ex.ForecastSetup:
    return ex.ForecastSetup(
        task=config.task,
        reservoir=config.reservoir(),
        ridge=config["training.ridge"],
        n_train=config["evaluation.n_train"],
        n_test=config["evaluation.n_test"],
        input_noise=config["training.input_noise"],
        data=config.data_params(),
        subset_sizes=config.subset_sizes(),
        modes=tuple(modes or config.modes()),
        max_weight=config["training.max_weight"],
        refit_ridge=config["training.refit_ridge"],
    )


def classification_setup(config: ExperimentConfig, modes: Sequence[str] | None = None) -> ex.ClassificationSetup:
    res = config.reservoir()
    return ex.ClassificationSetup(
        n_qubits=res.n_qubits,
        encoding=res.encoding.scheme.value,
        tfim_h=res.tfim_h,
        tfim_j=res.tfim_j,
        evolution_time=res.evolution_time,
        ridge_grid=config["training.ridge_grid"] or (config["training.ridge"],),
        refit_ridge=config["training.refit_ridge"],
        validation_fraction=config["training.validation_fraction"],
        p_max=config["training.p_max"],
        subset_sizes=config.subset_sizes(),
        max_weight=config["training.max_weight"],
        modes=tuple(modes or config.modes()),
        n_samples=config["data.n_samples"],
        test_fraction=config["data.test_fraction"],
        images_path=config["data.images_path"],
        labels_path=config["data.labels_path"],
        synthetic={k: config["data." + k] for k in ("n_classes", "dim", "separation")},
    )


def effective_parameters(setup) -> dict:
    if isinstance(setup, ex.ForecastSetup):
        r = setup.reservoir
        return {
            "reservoir.tfim_h": r.tfim_h,
            "reservoir.tfim_j": r.tfim_j,
            "reservoir.evolution_time": r.evolution_time,
            "training.ridge": setup.ridge,
            "training.input_noise": setup.input_noise,
            "training.modes": list(setup.modes),
            "training.subset_sizes": list(setup.subset_sizes),
        }
    return {"training.modes": list(setup.modes), "training.subset_sizes": list(setup.subset_sizes)}


# ------------------------------------------------------------------ running


COMMANDS = ("gen-data", "train", "decompose", "forecast", "classify", "sweep", "report")


def run_experiment(
    config: ExperimentConfig,
    command: str = "sweep",
    run_id: str = "run",
    threads: int = 1,
    seed_offset: int = 0,
    sink: Callable[[list[ResultRow]], None] | None = None,
    info: dict | None = None,
) -> list[ResultRow]:
    """Run ``forecast``, ``classify`` or ``sweep`` for ``config`` and return the rows.

    ``sweep`` evaluates the full-M* reference, the complete-basis primal and
    both ranked re-fit families at every configured subset size. With
    ``evaluation.tune`` the forecasting parameters are first chosen by grid
    search on the tuning seeds. ``info`` receives the effective parameters.
    """
    task = config.task
    if command not in ("forecast", "classify", "sweep"):
        raise ValueError(f"run_experiment does not handle {command!r}")
    if command == "classify" and config.is_forecast or command == "forecast" and not config.is_forecast:
        raise ValueError(f"command {command!r} does not apply to task {task!r}")
    info = {} if info is None else info

    def emit(dict_rows: list[dict]) -> None:
        batch = [ResultRow(run_id, task, **r) for r in dict_rows]
        if sink is not None:
            sink(batch)

    try:
        seeds = config.seeds(seed_offset)
        if config.is_forecast:
            setup = forecast_setup(config, ex.READOUT_MODES if command == "sweep" else None)
            if config["evaluation.tune"]:
                grid = config.grid()
                log.info("grid search over %s on seeds %s", grid, config.tune_seeds(seed_offset))
                result = ex.grid_search(setup, grid, config.tune_seeds(seed_offset), threads)
                setup = result.best
                info["grid"] = [{"parameters": p, "mean_horizon_steps": s} for p, s in result.table]
            info["effective"] = effective_parameters(setup)
            log.info("forecasting %s on seeds %s", task, seeds)
            dict_rows = ex.forecast_trials(setup, seeds, threads, sink=emit)
        else:
            setup = classification_setup(config, ex.CLASSIFY_MODES if command == "sweep" else None)
            info["effective"] = effective_parameters(setup)
            log.info("classification on seeds %s", seeds)
            dict_rows = ex.run_trials(lambda s: ex.classification_experiment(setup, s), seeds, threads, sink=emit)
    except QRCKError as exc:
        exc.task = task
        raise
    return [ResultRow(run_id, task, **r) for r in dict_rows]


def _trained_observable(config: ExperimentConfig, seed: int):
    """``(m_star, alpha, ridge, fit_rms)`` for one seed; ``fit_rms`` is None for classification."""
    if config.is_forecast:
        setup = forecast_setup(config)
        u = reservoir_unitary(setup.reservoir)
        series = ex.make_series(config.task, seed, setup.n_train, setup.n_test, setup.data)
        tf = ex.train_forecaster(setup, series.train, u, seed)
        fit = ObservableModel(tf.m_star).predict(tf.states)
        return tf.m_star, tf.alpha, setup.ridge, rms_error(tf.targets, fit)
    fit = ex.fit_classifier(classification_setup(config), seed)
    return fit.m_star, fit.alpha, fit.ridge, None


def generate_data(config: ExperimentConfig, run: RunDirectory, seeds: Sequence[int]) -> None:
    """Write the generated (forecasting) or PCA-reduced (classification) data per seed."""
    for seed in seeds:
        name = f"data_{config.task}_seed{seed}.csv"
        if config.is_forecast:
            s = ex.make_series(config.task, seed, config["evaluation.n_train"], config["evaluation.n_test"], config.data_params())
            data = np.concatenate([s.train, s.test])
            cols = ["x", "y", "z"] if data.shape[1] == 3 else ["z"]
            save_series(run.artifact(name), np.column_stack([data, np.arange(len(data)) >= len(s.train)]), cols + ["is_test"])
        else:
            setup = classification_setup(config)
            ds = ex.load_classification_data(setup, seed)
            x_tr, _, x_te, _ = ds.split()
            _, basis = pca_reduce(x_tr, setup.input_dim)
            z = np.clip(basis.project(ds.features), 0.0, 1.0)
            is_test = np.zeros(len(ds.labels))
            is_test[ds.test_index] = 1
            cols = [f"pc{i}" for i in range(setup.input_dim)] + ["label", "is_test"]
            save_series(run.artifact(name), np.column_stack([z, ds.labels, is_test]), cols)
        log.info("wrote %s", name)


def train_readouts(config: ExperimentConfig, run: RunDirectory, seeds: Sequence[int]) -> list[ResultRow]:
    """Fit M* per seed and save it as a QRCK1 readout (Pauli weights plus dual coefficients)."""
    rows = []
    res = config.reservoir()
    for seed in seeds:
        m_star, alpha, ridge, fit_rms = _trained_observable(config, seed)
        coefs = np.stack([dec.pauli_decompose(m, c).coefficients for c, m in enumerate(m_star)])
        n_ops = coefs.shape[1]
        readout = TrainedReadout(res, ridge, 1, list(range(n_ops)), np.ones(n_ops), coefs, alpha)
        save_readout(run.artifact(f"readout_{config.task}_seed{seed}.txt"), readout)
        rows.append(ResultRow(run.run_id, config.task, seed, "mstar", n_ops, "ridge", ridge))
        if fit_rms is not None:
            rows.append(ResultRow(run.run_id, config.task, seed, "mstar", n_ops, "rms_train_error", fit_rms))
    return rows


def decompose_observables(config: ExperimentConfig, run: RunDirectory, seeds: Sequence[int]) -> None:
    mode = config["training.decomposition"]
    for seed in seeds:
        m_star = _trained_observable(config, seed)[0]
        if mode == dec.PAULI:
            decomps = [dec.pauli_decompose(m, c) for c, m in enumerate(m_star)]
        else:
            decomps = [dec.diagonalize(m, c) for c, m in enumerate(m_star)]
        subset = dec.rank_operators(decomps, mode, config["training.max_weight"])
        dec.export_table(run.artifact(f"decomposition_{config.task}_{mode}_seed{seed}.csv"), decomps, subset)


def read_results(path) -> list[ResultRow]:
    try:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            return [ResultRow.from_record(rec) for rec in csv.DictReader(fh)]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


SUMMARY_COLUMNS = ("run_id", "task", "mode", "subset_size", "metric", "n", "mean", "std", "n_censored")


def summarize(rows: Sequence[ResultRow]) -> list[list]:
    """Mean and standard deviation (ddof=0) across seeds per (run, task, mode, size, metric)."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.run_id, r.task, r.mode, r.subset_size, r.metric), []).append(r)
    out = []
    for key in sorted(groups):
        vals = np.array([r.value for r in groups[key]])
        out.append([*key, len(vals), float(vals.mean()), float(vals.std()), sum(r.censored for r in groups[key])])
    return out


def write_report(output_dir, run_id: str | None = None) -> Path:
    """Aggregate every results table under ``output_dir`` (or one run) into ``report.csv``."""
    root = Path(output_dir)
    runs = [root / run_id] if run_id else sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
    rows: list[ResultRow] = []
    for run in runs:
        for table in sorted(run.glob("*.csv")):
            with table.open(encoding="utf-8") as fh:
                header = fh.readline().strip()
            if header == ",".join(RESULT_COLUMNS):
                rows.extend(read_results(table))
    target = root / (f"report_{run_id}.csv" if run_id else "report.csv")
    try:
        root.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            w.writerows([*r[:6], repr(r[6]), repr(r[7]), r[8]] for r in summarize(rows))
    except OSError as exc:
        raise IoError(f"cannot write {target}: {exc}") from exc
    return target


def manifest_for(config: ExperimentConfig, command: str, run_id: str, seeds, seed_offset: int, threads: int, started: float, info: dict) -> dict:
    return {
        "run_id": run_id,
        "command": command,
        "task": config.task,
        "config": config.echo(),
        "config_source": config.source,
        "seeds": list(seeds),
        "tune_seeds": config.tune_seeds(seed_offset) if config["evaluation.tune"] else [],
        "seed_offset": seed_offset,
        "threads": threads,
        "versions": versions(),
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 3),
        **info,
    }
