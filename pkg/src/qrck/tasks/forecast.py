"""Autoregressive training and closed-loop forecasting with a (stateful) reservoir."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..quantum import ReservoirSpec, drive, encode_batch, qelm_states
from ..training import StateStack
from .metrics import forecast_horizon


@dataclass
class ForecastResult:
    predicted: np.ndarray  # (n_steps, d)
    truth: np.ndarray | None = None
    horizon_steps: int | None = None
    horizon_lyapunov: float | None = None
    rms_train_error: float | None = None
    clip_count: int = 0
    censored: bool = False

    def evaluate(self, truth: np.ndarray, sigma: float, dt: float, lyapunov: float | None = None) -> ForecastResult:
        truth = np.asarray(truth, dtype=float).reshape(self.predicted.shape)
        steps, lyap, censored = forecast_horizon(truth, self.predicted, sigma, dt, lyapunov, return_censored=True)
        self.truth = truth
        self.horizon_steps = steps
        self.horizon_lyapunov = lyap
        self.censored = censored
        return self


def reservoir_states(series: np.ndarray, spec: ReservoirSpec, u: np.ndarray, discard: int | None = None) -> StateStack:
    """Feature states for every sample of ``series`` after the washout.

    Stateful reservoirs return density matrices; memoryless ones pure vectors.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if spec.n_ancilla == 0:
        return StateStack(qelm_states(series, spec, u), True)
    rhos, _ = drive(series, spec, u, discard=spec.washout if discard is None else discard)
    return StateStack(rhos, False)


def next_step_pairs(series: np.ndarray, spec: ReservoirSpec, u: np.ndarray) -> tuple[StateStack, np.ndarray]:
    """States after inputs ``z_t`` paired with targets ``z_{t+1}``, washout removed."""
    series = np.atleast_2d(np.asarray(series, dtype=float))
    discard = spec.washout if spec.n_ancilla else 0
    states = reservoir_states(series[:-1], spec, u, discard)
    return states, series[discard + 1 :]


def closed_loop_forecast(
    model,
    spec: ReservoirSpec,
    u: np.ndarray,
    warm_series: np.ndarray,
    n_steps: int,
    clip: bool = True,
) -> ForecastResult:
    """Drive through ``warm_series``, then feed predictions back for ``n_steps``.

    ``model.predict`` maps a state stack to next-sample predictions. The first
    prediction follows the last warm sample. Predictions are clipped to the
    encoding range before re-encoding (``clip=False`` lets out-of-range values
    raise :class:`RangeViolation`); the stored predictions are unclipped.
    """
    warm = np.atleast_2d(np.asarray(warm_series, dtype=float))
    if warm.shape[1] != spec.encoding.input_dim:
        raise DimensionMismatch(f"warm series has dimension {warm.shape[1]}, encoding expects {spec.encoding.input_dim}")
    lo, hi = spec.encoding.input_range
    d = warm.shape[1]
    out = np.empty((n_steps, d))
    clips = 0
    if spec.n_ancilla == 0:
        z = warm[-1]
        for k in range(n_steps):
            pred = np.asarray(model.predict(StateStack(qelm_states(z[None], spec, u), True)))[0]
            out[k] = pred
            z = np.clip(pred, lo, hi) if clip else pred
            clips += int(np.any(z != pred))
        return ForecastResult(out, clip_count=clips)
    if warm.shape[0] <= spec.washout:
        raise ValueError(f"warm series of length {warm.shape[0]} does not pass the washout of {spec.washout}")
    d_in, d_mem = 2**spec.n_input, 2**spec.n_ancilla
    rhos, eta_m = drive(warm[:-1], spec, u, discard=warm.shape[0] - 1)
    udag = u.conj().T
    z = warm[-1]
    for k in range(n_steps):
        psi = encode_batch(z[None], spec.encoding)[0]
        rho = u @ np.kron(np.outer(psi, psi.conj()), eta_m) @ udag
        eta_m = np.einsum("iaib->ab", rho.reshape(d_in, d_mem, d_in, d_mem))
        pred = np.asarray(model.predict(StateStack(rho[None], False)))[0]
        out[k] = pred
        z = np.clip(pred, lo, hi) if clip else pred
        clips += int(np.any(z != pred))
    return ForecastResult(out, clip_count=clips)
