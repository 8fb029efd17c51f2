"""Error metrics: forecast horizon, RMS training error and classification accuracy."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch


def _pair(truth, predicted) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if truth.shape != predicted.shape:
        raise DimensionMismatch(f"shapes {truth.shape} and {predicted.shape} differ")
    if truth.ndim == 1:
        truth, predicted = truth[:, None], predicted[:, None]
    return truth, predicted


def trajectory_sigma(series) -> float:
    """Root of the mean squared Euclidean distance to the trajectory mean."""
    z = np.asarray(series, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    return float(np.sqrt(np.mean(np.sum((z - z.mean(axis=0)) ** 2, axis=1))))


def forecast_horizon(truth, predicted, sigma: float, dt: float, lyapunov: float | None = None, return_censored=False):
    """Number of steps before the Euclidean error first exceeds ``sigma``.

    Returns ``(steps, steps * dt * lyapunov)`` (the second entry is None
    without ``lyapunov``). If the error never exceeds ``sigma`` the full
    window length is returned and the result is censored.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    truth, predicted = _pair(truth, predicted)
    err = np.sqrt(np.sum((truth - predicted) ** 2, axis=1))
    # NaN counts as exceeding
    over = ~(err <= sigma)
    censored = not bool(np.any(over))
    steps = truth.shape[0] if censored else int(np.argmax(over))
    lyap = steps * dt * lyapunov if lyapunov is not None else None
    if return_censored:
        return steps, lyap, censored
    return steps, lyap


def rms_error(truth, predicted) -> float:
    truth, predicted = _pair(truth, predicted)
    if truth.shape[0] == 0:
        raise DimensionMismatch("empty input")
    return float(np.sqrt(np.mean(np.sum((truth - predicted) ** 2, axis=1))))


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise DimensionMismatch(f"{predictions.shape} predictions for {labels.shape} labels")
    if predictions.size == 0:
        raise DimensionMismatch("empty input")
    return float(np.mean(predictions == labels))
