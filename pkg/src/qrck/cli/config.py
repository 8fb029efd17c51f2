"""Flat ``section.key = value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Lists are comma separated. Unknown keys, duplicates and out-of-range values
are errors. Task-specific defaults fill everything the file leaves out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..errors import IoError, ParseError, ValidationError
from ..quantum import Encoding, EncodingSpec, ReservoirSpec, TFIMVariant

TASKS = ("lorenz", "mackey_glass", "harmonic", "classify")
FORECAST_MODES = ("mstar", "primal_full", "pauli", "zstring")
CLASSIFY_MODES = ("mstar", "pauli", "zstring", "primal_zzz")
DECOMPOSITIONS = ("pauli", "zstring", "eigen")


@dataclass(frozen=True)
class Field:
    kind: str  # int, float, str, bool, path, ints, floats, strs
    default: Any = None
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple[str, ...] = ()
    optional: bool = False  # empty value means None


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _all(pred):
    return lambda vs: all(pred(v) for v in vs)


FIELDS: dict[str, Field] = {
    "task": Field("str", None, choices=TASKS),
    "run_id": Field("str", ""),
    "reservoir.n_input": Field("int", 1, lambda v: v >= 1, ">= 1"),
    "reservoir.n_ancilla": Field("int", 0, _non_negative, ">= 0"),
    "reservoir.encoding": Field("str", "AmplitudeSqrt", choices=tuple(e.value for e in Encoding)),
    "reservoir.input_dim": Field("int", 0, _non_negative, ">= 0 (0 derives it from n_input)"),
    "reservoir.tfim_h": Field("float", 1.0),
    "reservoir.tfim_j": Field("float", 1.0),
    "reservoir.evolution_time": Field("float", 1.0, _positive, "> 0"),
    "reservoir.tfim_axis_variant": Field("str", TFIMVariant.X_FIELD_ZZ.value, choices=tuple(v.value for v in TFIMVariant)),
    "reservoir.washout": Field("int", 100, _non_negative, ">= 0"),
    "training.ridge": Field("float", 1e-8, _positive, "> 0"),
    "training.ridge_grid": Field("floats", (), _all(_positive), "all > 0"),
    "training.refit_ridge": Field("float", None, _positive, "> 0", optional=True),
    "training.p_max": Field("int", 1, lambda v: 1 <= v <= 4, "in [1, 4]"),
    "training.subset_sizes": Field("ints", (), _all(lambda v: v >= 1), "all >= 1"),
    "training.modes": Field("strs", ()),
    "training.decomposition": Field("str", "pauli", choices=DECOMPOSITIONS),
    "training.max_weight": Field("int", None, _non_negative, ">= 0", optional=True),
    "training.input_noise": Field("float", 0.0, _non_negative, ">= 0"),
    "training.validation_fraction": Field("float", 0.2, lambda v: 0 < v < 1, "in (0, 1)"),
    "data.dt_sample": Field("float", 0.02, _positive, "> 0"),
    "data.scale_lo": Field("float", 0.05),
    "data.scale_hi": Field("float", 0.95),
    "data.n_frequencies": Field("int", 9, lambda v: v >= 1, ">= 1"),
    "data.omega0": Field("float", 0.5, _positive, "> 0"),
    "data.dt": Field("float", 0.2, _positive, "> 0"),
    "data.peak": Field("float", 0.95, lambda v: 0 < v <= 1, "in (0, 1]"),
    "data.images_path": Field("path", None, optional=True),
    "data.labels_path": Field("path", None, optional=True),
    "data.n_samples": Field("int", 10000, lambda v: v >= 10, ">= 10"),
    "data.test_fraction": Field("float", 0.2, lambda v: 0 < v < 1, "in (0, 1)"),
    "data.n_classes": Field("int", 10, lambda v: v >= 2, ">= 2"),
    "data.dim": Field("int", 20, lambda v: v >= 1, ">= 1"),
    "data.separation": Field("float", 1.0, _positive, "> 0"),
    "evaluation.seeds": Field("ints", (), _all(_non_negative), "all >= 0"),
    "evaluation.n_trials": Field("int", 10, lambda v: v >= 1, ">= 1"),
    "evaluation.n_train": Field("int", 3000, lambda v: v >= 2, ">= 2"),
    "evaluation.n_test": Field("int", 500, lambda v: v >= 1, ">= 1"),
    "evaluation.tune": Field("bool", False),
    "evaluation.tune_seeds": Field("ints", (100, 101, 102), _all(_non_negative), "all >= 0"),
    "grid.tfim_h": Field("floats", ()),
    "grid.tfim_j": Field("floats", ()),
    "grid.evolution_time": Field("floats", (), _all(_positive), "all > 0"),
    "grid.ridge": Field("floats", (), _all(_positive), "all > 0"),
    "grid.input_noise": Field("floats", (), _all(_non_negative), "all >= 0"),
    "output.directory": Field("str", "results"),
}

# Per-task defaults layered over the field defaults. The forecasting values
# are the outcomes of the small grid searches recorded in the project notes.
TASK_DEFAULTS: dict[str, dict[str, Any]] = {
    "lorenz": {
        "reservoir.n_input": 3,
        "reservoir.n_ancilla": 1,
        "reservoir.encoding": "AmplitudeSqrt",
        "reservoir.tfim_h": 1.0,
        "reservoir.tfim_j": 2.0,
        "training.ridge": 1e-10,
        "evaluation.n_train": 4000,
        "evaluation.n_test": 800,
        "grid.tfim_h": (1.0, 2.0),
        "grid.tfim_j": (1.0, 2.0),
        "grid.ridge": (1e-10, 1e-8),
    },
    "mackey_glass": {
        "reservoir.n_input": 1,
        "reservoir.n_ancilla": 3,
        "reservoir.encoding": "AmplitudeSqrt",
        "reservoir.evolution_time": 0.7,
        "training.ridge": 1e-12,
        "data.scale_lo": 0.0,
        "data.scale_hi": 0.3,
        "evaluation.n_train": 3000,
        "evaluation.n_test": 600,
        "grid.evolution_time": (0.5, 0.7),
        "grid.ridge": (1e-12, 1e-11),
    },
    "harmonic": {
        "reservoir.n_input": 1,
        "reservoir.n_ancilla": 3,
        "reservoir.encoding": "AmplitudeSymmetric",
        "reservoir.tfim_axis_variant": TFIMVariant.Z_FIELD_XX.value,
        "reservoir.tfim_h": 9.325,
        "reservoir.tfim_j": 0.448,
        "training.ridge": 1e-8,
        "training.input_noise": 0.01,
        "evaluation.n_train": 3000,
        "evaluation.n_test": 500,
        "evaluation.tune_seeds": (100, 101, 102, 103, 104),
        "grid.tfim_h": (3.0, 9.325),
        "grid.tfim_j": (0.448, 0.6),
        "grid.ridge": (1e-10, 1e-8),
    },
    "classify": {
        "reservoir.n_input": 5,
        "reservoir.n_ancilla": 0,
        "reservoir.encoding": "RotationalPairedYZ",
        "reservoir.tfim_h": 10.0,
        "reservoir.tfim_j": 10.0,
        "reservoir.washout": 0,
        "training.ridge": 1e-6,
        "training.ridge_grid": (1e-6, 1e-4, 1e-2, 1e-1, 1.0),
        "training.subset_sizes": (1, 2, 4, 8, 12, 16),
        "evaluation.n_trials": 1,
    },
}


@dataclass
class ExperimentConfig:
    """Fully defaulted configuration; ``values`` holds every field of :data:`FIELDS`."""

    values: dict[str, Any]
    source: str | None = None
    explicit: frozenset[str] = field(default_factory=frozenset)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def task(self) -> str:
        return self.values["task"]

    @property
    def is_forecast(self) -> bool:
        return self.task != "classify"

    def echo(self) -> dict[str, Any]:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())}

    def seeds(self, offset: int = 0) -> list[int]:
        base = self.values["evaluation.seeds"] or tuple(range(self.values["evaluation.n_trials"]))
        return [s + offset for s in base]

    def tune_seeds(self, offset: int = 0) -> list[int]:
        return [s + offset for s in self.values["evaluation.tune_seeds"]]

    def modes(self) -> tuple[str, ...]:
        if self.values["training.modes"]:
            return tuple(self.values["training.modes"])
        return ("mstar",) if self.is_forecast else CLASSIFY_MODES

    def reservoir(self) -> ReservoirSpec:
        v = self.values
        enc = Encoding(v["reservoir.encoding"])
        dim = v["reservoir.input_dim"] or (2 * v["reservoir.n_input"] if enc is Encoding.ROTATIONAL_PAIRED_YZ else v["reservoir.n_input"])
        return ReservoirSpec(
            v["reservoir.n_input"],
            v["reservoir.n_ancilla"],
            EncodingSpec(enc, dim),
            v["reservoir.tfim_h"],
            v["reservoir.tfim_j"],
            v["reservoir.evolution_time"],
            v["reservoir.tfim_axis_variant"],
            v["reservoir.washout"],
        )

    def subset_sizes(self) -> tuple[int, ...]:
        if self.values["training.subset_sizes"]:
            return tuple(self.values["training.subset_sizes"])
        full = 4 ** self.reservoir().n_qubits
        sizes, k = [], 1
        while k < full:
            sizes.append(k)
            k *= 2
        return tuple(sizes + [full])

    def data_params(self) -> dict[str, Any]:
        keys = {
            "lorenz": ("dt_sample", "scale_lo", "scale_hi"),
            "mackey_glass": ("scale_lo", "scale_hi"),
            "harmonic": ("n_frequencies", "omega0", "dt", "peak"),
            "classify": (),
        }[self.task]
        return {k: self.values["data." + k] for k in keys}

    def grid(self) -> dict[str, tuple]:
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("grid.") and v}


def _convert(key: str, spec: Field, raw: str, line: int | None, col: int | None):
    text = raw.strip()
    if spec.optional and text in ("", "none", "None"):
        return None
    try:
        if spec.kind == "int":
            return int(text)
        if spec.kind == "float":
            return float(text)
        if spec.kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if spec.kind in ("str", "path"):
            if not text:
                raise ValueError("empty value")
            return text
        items = [t.strip() for t in text.split(",") if t.strip()]
        conv = {"ints": int, "floats": float, "strs": str}[spec.kind]
        return tuple(conv(t) for t in items)
    except ValueError as exc:
        raise ValidationError(f"{exc} (line {line}, col {col})" if line else str(exc), field=key) from exc


def _validate(key: str, spec: Field, value) -> None:
    if value is None:
        if spec.optional:
            return
        raise ValidationError("missing required value", field=key)
    if spec.choices and value not in spec.choices:
        raise ValidationError(f"{value!r} not one of {', '.join(spec.choices)}", field=key)
    if spec.kind == "path" and not Path(value).exists():
        raise ValidationError(f"path {value!r} does not exist", field=key)
    if spec.check is not None and not spec.check(value):
        raise ValidationError(f"value {value!r} out of range ({spec.rule})", field=key)


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    raw: dict[str, tuple[str, int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ParseError("expected 'key = value'", line=lineno, position=col)
        key_part, value_part = body.split("=", 1)
        key = key_part.strip()
        if not key or any(c.isspace() for c in key):
            raise ParseError(f"malformed key {key_part.strip()!r}", line=lineno, position=len(key_part) - len(key_part.lstrip()) + 1)
        if key in raw:
            raise ParseError(f"duplicate key {key!r}", line=lineno, position=body.index(key) + 1)
        raw[key] = (value_part, lineno, len(key_part) + 2)

    unknown = [k for k in raw if k not in FIELDS]
    if unknown:
        raise ValidationError(f"unknown key (line {raw[unknown[0]][1]})", field=unknown[0])
    if "task" not in raw:
        raise ValidationError("missing required key", field="task")

    parsed = {k: _convert(k, FIELDS[k], *raw[k]) for k in raw}
    task = parsed["task"]
    _validate("task", FIELDS["task"], task)
    values = {k: f.default for k, f in FIELDS.items()}
    values.update(TASK_DEFAULTS[task])
    values.update(parsed)
    for k, f in FIELDS.items():
        _validate(k, f, values[k])

    allowed = FORECAST_MODES if task != "classify" else CLASSIFY_MODES
    for m in values["training.modes"]:
        if m not in allowed:
            raise ValidationError(f"mode {m!r} not one of {', '.join(allowed)}", field="training.modes")
    if values["data.scale_lo"] >= values["data.scale_hi"]:
        raise ValidationError("scale_lo must be below scale_hi", field="data.scale_lo")
    if (values["data.images_path"] is None) != (values["data.labels_path"] is None):
        raise ValidationError("images_path and labels_path go together", field="data.labels_path")
    config = ExperimentConfig(values, source, frozenset(parsed))
    try:
        config.reservoir()
    except ValueError as exc:
        raise ValidationError(str(exc), field="reservoir") from exc
    return config


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
