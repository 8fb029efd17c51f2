"""Benchmark time series: Lorenz-63, Mackey-Glass and random harmonic signals."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, IoError, ParseError, RangeViolation

LORENZ_LYAPUNOV = 0.89
MACKEY_GLASS_LYAPUNOV = 6e-3

LORENZ_SIGMA, LORENZ_RHO, LORENZ_BETA = 10.0, 28.0, 8.0 / 3.0
MG_DELAY, MG_BETA, MG_GAMMA, MG_POWER = 17.0, 0.2, 0.1, 10
MG_SUBSTEP = 0.1
TRANSIENT = 1000


@dataclass
class ScaleTransform:
    """Per-dimension affine map sending ``[data_min, data_max]`` to ``[lo, hi]``."""

    data_min: np.ndarray
    data_max: np.ndarray
    lo: float
    hi: float

    @classmethod
    def fit(cls, data: np.ndarray, lo: float, hi: float) -> ScaleTransform:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[0] == 1 and data.shape[1] > 1:
            data = data.T
        if hi <= lo:
            raise ValueError("need hi > lo")
        return cls(data.min(axis=0), data.max(axis=0), float(lo), float(hi))

    @property
    def _span(self) -> np.ndarray:
        span = self.data_max - self.data_min
        return np.where(span > 0, span, 1.0)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.lo + (x - self.data_min) * ((self.hi - self.lo) / self._span)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.data_min + (y - self.lo) * (self._span / (self.hi - self.lo))

    def check(self, y: np.ndarray, slack: float = 1e-12) -> None:
        y = np.asarray(y)
        bad = (y < self.lo - slack) | (y > self.hi + slack)
        if np.any(bad):
            idx = int(np.nonzero(bad.reshape(bad.shape[0], -1).any(axis=1))[0][0])
            raise RangeViolation(f"scaled value outside [{self.lo}, {self.hi}]", index=idx)


@dataclass
class TimeSeriesDataset:
    samples: np.ndarray  # (T, d)
    dt: float
    scale_transform: ScaleTransform | None = None
    lyapunov_exponent: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def raw(self) -> np.ndarray:
        """Samples mapped back through the scale transform (if any)."""
        if self.scale_transform is None:
            return self.samples.copy()
        return self.scale_transform.inverse(self.samples)


# ---------------------------------------------------------------- Lorenz-63


def lorenz_rhs(z: np.ndarray) -> np.ndarray:
    x, y, w = z[..., 0], z[..., 1], z[..., 2]
    return np.stack(
        [LORENZ_SIGMA * (y - x), x * (LORENZ_RHO - w) - y, x * y - LORENZ_BETA * w], axis=-1
    )


def rk4_step(f, z: np.ndarray, h: float) -> np.ndarray:
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _lorenz_rk4(x: float, y: float, w: float, h: float) -> tuple[float, float, float]:
    # scalar RK4, several times faster than numpy on 3-vectors
    s, r, b = LORENZ_SIGMA, LORENZ_RHO, LORENZ_BETA
    ax, ay, aw = s * (y - x), x * (r - w) - y, x * y - b * w
    x2, y2, w2 = x + 0.5 * h * ax, y + 0.5 * h * ay, w + 0.5 * h * aw
    bx, by, bw = s * (y2 - x2), x2 * (r - w2) - y2, x2 * y2 - b * w2
    x3, y3, w3 = x + 0.5 * h * bx, y + 0.5 * h * by, w + 0.5 * h * bw
    cx, cy, cw = s * (y3 - x3), x3 * (r - w3) - y3, x3 * y3 - b * w3
    x4, y4, w4 = x + h * cx, y + h * cy, w + h * cw
    dx, dy, dw = s * (y4 - x4), x4 * (r - w4) - y4, x4 * y4 - b * w4
    k = h / 6.0
    return (
        x + k * (ax + 2.0 * bx + 2.0 * cx + dx),
        y + k * (ay + 2.0 * by + 2.0 * cy + dy),
        w + k * (aw + 2.0 * bw + 2.0 * cw + dw),
    )


def gen_lorenz(
    x0=None,
    n_samples: int = 10000,
    dt_sample: float = 0.02,
    seed: int = 0,
    max_substep: float = 1e-3,
    transient: int = TRANSIENT,
) -> TimeSeriesDataset:
    """Lorenz-63 trajectory sampled every ``dt_sample``, unscaled.

    ``x0=None`` draws a random start near the attractor from ``seed``. The
    first ``transient`` samples are discarded.
    """
    if dt_sample <= 0:
        raise ValueError("dt_sample must be positive")
    if x0 is None:
        rng = np.random.default_rng(seed)
        x0 = rng.uniform([-15.0, -20.0, 5.0], [15.0, 20.0, 40.0])
    x, y, w = (float(v) for v in np.asarray(x0, dtype=float).reshape(3))
    n_sub = int(np.ceil(dt_sample / max_substep - 1e-9))
    h = dt_sample / n_sub
    out = np.empty((n_samples, 3))
    for i in range(transient + n_samples):
        for _ in range(n_sub):
            x, y, w = _lorenz_rk4(x, y, w, h)
        if i >= transient:
            out[i - transient] = (x, y, w)
    return TimeSeriesDataset(out, dt_sample, None, LORENZ_LYAPUNOV)


# ------------------------------------------------------------- Mackey-Glass


def _mg_rhs(z: float, z_delayed: float) -> float:
    return MG_BETA * z_delayed / (1.0 + z_delayed**MG_POWER) - MG_GAMMA * z


def mackey_glass_raw(
    n_samples: int, seed: int = 0, history: float = 0.9, noise: float = 1e-3, transient: int = TRANSIENT
) -> np.ndarray:
    """Unscaled Mackey-Glass samples at unit spacing.

    RK4 on a 0.1 grid; the delayed value at half steps comes from the cubic
    through the four surrounding grid points of the history buffer.
    """
    lag = int(round(MG_DELAY / MG_SUBSTEP))
    per_sample = int(round(1.0 / MG_SUBSTEP))
    n_steps = (transient + n_samples) * per_sample
    rng = np.random.default_rng(seed)
    buf = np.empty(lag + 2 + n_steps)
    buf[: lag + 2] = history + (noise * rng.uniform(-1.0, 1.0, lag + 2) if noise else 0.0)
    h = MG_SUBSTEP
    # buf[k] holds z at grid time (k - lag - 1) * h; current index starts at lag + 1
    out = np.empty(n_samples)
    k = lag + 1
    for step in range(n_steps):
        z = buf[k]
        d0 = buf[k - lag]
        d1 = buf[k - lag + 1]
        dm1 = buf[k - lag - 1]
        d2 = buf[k - lag + 2]
        # cubic midpoint between d0 and d1
        dmid = (-dm1 + 9.0 * d0 + 9.0 * d1 - d2) / 16.0
        k1 = _mg_rhs(z, d0)
        k2 = _mg_rhs(z + 0.5 * h * k1, dmid)
        k3 = _mg_rhs(z + 0.5 * h * k2, dmid)
        k4 = _mg_rhs(z + h * k3, d1)
        buf[k + 1] = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k += 1
        if (step + 1) % per_sample == 0:
            i = (step + 1) // per_sample - 1 - transient
            if i >= 0:
                out[i] = buf[k]
    return out


def gen_mackey_glass(n_samples: int = 5000, seed: int = 0, lo: float = 0.0, hi: float = 0.3) -> TimeSeriesDataset:
    raw = mackey_glass_raw(n_samples, seed)[:, None]
    scale = ScaleTransform.fit(raw, lo, hi)
    return TimeSeriesDataset(np.clip(scale.forward(raw), lo, hi), 1.0, scale, MACKEY_GLASS_LYAPUNOV)


# ----------------------------------------------------------------- harmonic


def harmonic_signal(t: np.ndarray, a: np.ndarray, b: np.ndarray, omega0: float) -> np.ndarray:
    k = np.arange(1, len(a) + 1)
    phase = np.outer(t, k * omega0)
    return np.cos(phase) @ a + np.sin(phase) @ b


def gen_harmonic(
    n_frequencies: int = 9,
    omega0: float = 0.5,
    n_samples: int = 3000,
    dt: float = 0.2,
    seed: int = 0,
    amplitudes: tuple[np.ndarray, np.ndarray] | None = None,
    peak: float | None = 0.95,
) -> TimeSeriesDataset:
    """Sum of ``n_frequencies`` harmonics of ``omega0`` with random amplitudes.

    Amplitudes are uniform on [-1, 1] unless given. The signal is rescaled so
    that its peak over a full period is ``peak``; ``peak=None`` skips that.
    """
    if n_frequencies < 1:
        raise ValueError("n_frequencies must be >= 1")
    if amplitudes is None:
        rng = np.random.default_rng(seed)
        a = rng.uniform(-1.0, 1.0, n_frequencies)
        b = rng.uniform(-1.0, 1.0, n_frequencies)
    else:
        a, b = (np.asarray(v, dtype=float) for v in amplitudes)
        if a.shape != (n_frequencies,) or b.shape != (n_frequencies,):
            raise DimensionMismatch("amplitude vectors must have length n_frequencies")
    t = np.arange(n_samples) * dt
    z = harmonic_signal(t, a, b, omega0)
    scale = None
    if peak is not None:
        period = 2.0 * np.pi / omega0
        dense = harmonic_signal(np.linspace(0.0, period, 8192, endpoint=False), a, b, omega0)
        m = max(np.max(np.abs(dense)), np.max(np.abs(z)))
        factor = peak / m if m > 0 else 1.0
        z = z * factor
        scale = ScaleTransform(np.array([-1.0 / factor]), np.array([1.0 / factor]), -1.0, 1.0)
    return TimeSeriesDataset(z[:, None], dt, scale, None)


# ------------------------------------------------------------ export/import


def save_series(path, data: np.ndarray, columns: list[str] | None = None) -> None:
    """Delimited text with a one-line header naming the columns."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if columns is None:
        columns = [f"z{i}" for i in range(data.shape[1])]
    if len(columns) != data.shape[1]:
        raise DimensionMismatch(f"{len(columns)} column names for {data.shape[1]} columns")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in data:
                writer.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_series(path) -> tuple[list[str], np.ndarray]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ParseError("empty dataset file", line=1)
    header = rows[0]
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    return header, np.array(values, dtype=float).reshape(-1, len(header))
