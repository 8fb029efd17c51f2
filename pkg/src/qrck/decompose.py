"""Decompositions of an optimal observable into measurable operator subsets.

Two routes are supported:

* Pauli projection ``M = sum_k c_k P_k`` with ``c_k = tr(M P_k) / 2**N``.
* Diagonalization ``M = V diag(lam) V^dagger``. The spectrum is written as a
  combination of Z-strings, ``diag(lam) = sum_s beta_s Z_s``, via the
  Walsh-Hadamard transform. Measuring the Z-strings after rotating the state
  by ``V^dagger`` reproduces ``tr(M rho)``.

Subsets are ranked by the Euclidean norm of an operator's coefficients across
output channels. The identity (code 0 in both routes) is always placed first,
remaining ties go to the lower code.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, IoError, NonRealResult, RangeViolation
from .numerics import TOL, check_hermitian, hermitian_eig
from .pauli import code_label, pauli_expectations, pauli_sum, pauli_weights, z_string_code
from .training import PrimalSolution, as_stack, fit_primal

PAULI = "pauli"
ZSTRING = "zstring"
EIGEN = "eigen"


def _n_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class PauliDecomposition:
    coefficients: np.ndarray  # (4**N,), indexed by Pauli code
    channel: int = 0

    @property
    def n_qubits(self) -> int:
        return (len(self.coefficients).bit_length() - 1) // 2

    def reconstruct(self) -> np.ndarray:
        return pauli_sum(self.coefficients)


def pauli_decompose(m_star: np.ndarray, channel: int = 0) -> PauliDecomposition:
    """All ``4**N`` Pauli coefficients of a Hermitian matrix."""
    m = check_hermitian(m_star)
    dim = m.shape[0]
    _n_qubits(dim)
    c = pauli_expectations(m, keep_complex=True) / dim
    residue = float(np.max(np.abs(c.imag), initial=0.0))
    if residue > TOL.non_real:
        raise NonRealResult(f"Pauli coefficients have imaginary residue {residue:.3e}")
    return PauliDecomposition(c.real.copy(), channel)


# ------------------------------------------------------------------ spectral


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis.

    ``out[s] = sum_b values[b] (-1)**popcount(s & b)``, computed with
    ``log2(n)`` butterfly passes.
    """
    a = np.array(values, dtype=float, copy=True)
    n = a.shape[-1]
    _n_qubits(n)
    lead = a.shape[:-1]
    h = 1
    while h < n:
        a = a.reshape(lead + (n // (2 * h), 2, h))
        top = a[..., 0, :] + a[..., 1, :]
        bottom = a[..., 0, :] - a[..., 1, :]
        a = np.stack([top, bottom], axis=-2)
        h *= 2
    return a.reshape(lead + (n,))


def spectrum_to_z(eigenvalues: np.ndarray) -> np.ndarray:
    """Z-string coefficients ``beta_s`` with ``sum_s beta_s Z_s = diag(eigenvalues)``."""
    lam = np.asarray(eigenvalues, dtype=float)
    return fwht(lam) / lam.shape[-1]


def z_to_spectrum(beta: np.ndarray) -> np.ndarray:
    return fwht(beta)


@dataclass(frozen=True)
class SpectralDecomposition:
    v: np.ndarray  # columns are eigenvectors, eigenvalues descending
    eigenvalues: np.ndarray
    z_coefficients: np.ndarray
    channel: int = 0

    @property
    def n_qubits(self) -> int:
        return _n_qubits(len(self.eigenvalues))

    def reconstruct(self) -> np.ndarray:
        return (self.v * self.eigenvalues) @ self.v.conj().T

    def expectation(self, states) -> np.ndarray:
        """``sum_b lam_b <b|V^dagger rho V|b>`` for a batch of states."""
        s = as_stack(states).rotated(self.v)
        if s.pure:
            probs = np.abs(s.data) ** 2
        else:
            probs = np.einsum("ibb->ib", s.data).real
        return probs @ self.eigenvalues


def diagonalize(m_star: np.ndarray, channel: int = 0, method: str = "lapack") -> SpectralDecomposition:
    """Eigen-decomposition with eigenvalues in descending order and their Z-string coefficients."""
    m = check_hermitian(m_star)
    w, v = hermitian_eig(m, method=method)
    w, v = w[::-1].copy(), v[:, ::-1].copy()
    result = SpectralDecomposition(v, w, spectrum_to_z(w), channel)
    err = np.max(np.abs(result.reconstruct() - m), initial=0.0)
    if err > 1e-8 * max(1.0, float(np.max(np.abs(m), initial=0.0))):
        raise ArithmeticError(f"eigen-decomposition reconstruction error {err:.3e}")
    return result


# ------------------------------------------------------------------- ranking


@dataclass(frozen=True)
class OperatorSubset:
    """Ranked operator identifiers, shared by all channels.

    ``mode`` is ``"pauli"`` (identifiers are Pauli codes), ``"zstring"``
    (Z-string indices ``s``, measured after rotating by each channel's V) or
    ``"eigen"`` (eigenvector indices ``b``, i.e. projectors ``V|b><b|V^dagger``).
    """

    selection: tuple[int, ...]
    rank_scores: tuple[float, ...]
    mode: str = PAULI
    n_qubits: int = 0
    rotations: tuple[np.ndarray, ...] = ()

    def __len__(self):
        return len(self.selection)

    def head(self, k: int) -> OperatorSubset:
        if not 1 <= k <= len(self.selection):
            raise RangeViolation(f"subset size {k} outside [1, {len(self.selection)}]")
        return OperatorSubset(self.selection[:k], self.rank_scores[:k], self.mode, self.n_qubits, self.rotations)

    def labels(self) -> list[str]:
        if self.mode == PAULI:
            return [code_label(c, self.n_qubits) for c in self.selection]
        if self.mode == ZSTRING:
            return [code_label(z_string_code(s, self.n_qubits), self.n_qubits) for s in self.selection]
        return [format(b, f"0{self.n_qubits}b") for b in self.selection]


def _ranked(scores: np.ndarray, candidates=None, pin_identity: bool = True) -> tuple[list[int], list[float]]:
    idx = np.arange(len(scores)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    pinned = pin_identity and bool(np.any(idx == 0))
    rest = idx[idx != 0] if pinned else idx
    # stable sort on -score keeps lower codes first among ties
    rest = rest[np.argsort(-scores[rest], kind="stable")]
    order = ([0] if pinned else []) + rest.tolist()
    return order, [float(scores[i]) for i in order]


def rank_operators(
    decomps: Sequence[PauliDecomposition] | Sequence[SpectralDecomposition],
    mode: str = PAULI,
    max_weight: int | None = None,
) -> OperatorSubset:
    """Rank operators by the Euclidean norm of their coefficients across channels.

    ``mode`` is ``"pauli"`` for Pauli decompositions; for spectral ones
    ``"zstring"`` ranks by ``|beta_s|`` and ``"eigen"`` by ``|lam_b|``.
    ``max_weight`` keeps only Pauli strings (or Z-strings) up to that weight.
    The identity is listed first whatever its score (eigen mode has no
    identity element and is ranked purely by score).
    """
    decomps = list(decomps)
    if not decomps:
        raise ValueError("no decompositions given")
    if mode == PAULI:
        if not all(isinstance(d, PauliDecomposition) for d in decomps):
            raise TypeError("pauli mode needs PauliDecomposition inputs")
        coefs = np.stack([d.coefficients for d in decomps])
        n = decomps[0].n_qubits
        rotations: tuple = ()
    elif mode in (ZSTRING, EIGEN):
        if not all(isinstance(d, SpectralDecomposition) for d in decomps):
            raise TypeError(f"{mode} mode needs SpectralDecomposition inputs")
        coefs = np.stack([d.z_coefficients if mode == ZSTRING else d.eigenvalues for d in decomps])
        n = decomps[0].n_qubits
        rotations = tuple(d.v for d in decomps)
    else:
        raise ValueError(f"unknown ranking mode {mode!r}")
    if len({c.shape for c in coefs}) != 1:
        raise DimensionMismatch("channels have different qubit counts")
    scores = np.sqrt(np.sum(coefs**2, axis=0))
    candidates = None
    if max_weight is not None and mode != EIGEN:
        if mode == PAULI:
            weights = pauli_weights(n)
        else:
            weights = np.array([bin(s).count("1") for s in range(2**n)])
        candidates = np.nonzero(weights <= max_weight)[0]
    order, ranked_scores = _ranked(scores, candidates, pin_identity=mode != EIGEN)
    return OperatorSubset(tuple(order), tuple(ranked_scores), mode, n, rotations)


# ---------------------------------------------------------------- truncation


def truncate(decomp: PauliDecomposition, keep: int) -> tuple[np.ndarray, float]:
    """Keep the ``keep`` top-ranked Pauli terms.

    Returns ``(M_trunc, bound)`` with ``bound = ||M - M_trunc||_HS``, which
    dominates ``|tr((M - M_trunc) rho)|`` for every state ``rho``.
    """
    mask = _kept_mask(decomp, keep)
    c = np.where(mask, decomp.coefficients, 0.0)
    m_trunc = pauli_sum(c)
    dim = 2**decomp.n_qubits
    bound = float(np.sqrt(dim * np.sum(decomp.coefficients[~mask] ** 2)))
    return m_trunc, bound


def truncation_tail(decomp: PauliDecomposition, keep: int) -> float:
    """Squared coefficient tail ``sum_{k not kept} c_k**2`` (diagnostic only)."""
    mask = _kept_mask(decomp, keep)
    return float(np.sum(decomp.coefficients[~mask] ** 2))


def _kept_mask(decomp: PauliDecomposition, keep: int) -> np.ndarray:
    total = len(decomp.coefficients)
    if not 0 <= keep <= total:
        raise RangeViolation(f"keep={keep} outside [0, {total}]")
    mask = np.zeros(total, dtype=bool)
    if keep:
        order = rank_operators([decomp]).selection
        mask[list(order[:keep])] = True
    return mask


# --------------------------------------------------------------------- refit


@dataclass
class ChannelReadout:
    """One primal readout per output channel (Z-string and eigen modes)."""

    channels: list[PrimalSolution]

    def predict(self, states) -> np.ndarray:
        return np.concatenate([c.predict(states) for c in self.channels], axis=1)

    def as_observables(self) -> np.ndarray:
        return np.concatenate([c.as_observables() for c in self.channels], axis=0)


def _projector_operators(n_qubits: int, indices: Sequence[int]) -> list[np.ndarray]:
    dim = 2**n_qubits
    ops = []
    for b in indices:
        p = np.zeros((dim, dim), dtype=complex)
        p[b, b] = 1.0
        ops.append(p)
    return ops


def refit_subset(
    subset: OperatorSubset, states, targets, ridge: float, p_max: int = 1, normalize: bool = True
) -> PrimalSolution | ChannelReadout:
    """Re-fit ridge weights on the measured values of a ranked subset.

    Pauli mode fits all channels jointly on the shared strings. Z-string and
    eigen modes rotate every state by ``V_c^dagger`` of channel ``c`` and fit
    that channel on its own. ``normalize`` uses unit Hilbert-Schmidt operators
    so that the ridge penalty matches the kernel objective.
    """
    if len(subset) == 0:
        raise ValueError("operator subset is empty")
    s = as_stack(states)
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if subset.mode == PAULI:
        return fit_primal(s, y, [int(c) for c in subset.selection], ridge, p_max, normalize)
    if len(subset.rotations) != y.shape[1]:
        raise DimensionMismatch(f"{len(subset.rotations)} rotations for {y.shape[1]} target channels")
    if subset.mode == ZSTRING:
        ops = [int(z_string_code(i, subset.n_qubits)) for i in subset.selection]
    else:
        ops = _projector_operators(subset.n_qubits, subset.selection)
    fits = [fit_primal(s, y[:, c], ops, ridge, p_max, normalize, rotation=v) for c, v in enumerate(subset.rotations)]
    return ChannelReadout(fits)


# -------------------------------------------------------------------- export


def export_table(path, decomps: Sequence[PauliDecomposition] | Sequence[SpectralDecomposition], subset: OperatorSubset) -> Path:
    """Write ``channel,operator_code,operator_label,coefficient,rank_score`` rows.

    Rows follow the ranking order, one per (operator, channel).
    """
    path = Path(path)
    labels = subset.labels()
    score = dict(zip(subset.selection, subset.rank_scores))
    lines = ["channel,operator_code,operator_label,coefficient,rank_score"]
    for op, label in zip(subset.selection, labels):
        for d in decomps:
            if isinstance(d, PauliDecomposition):
                coef = d.coefficients[op]
            elif subset.mode == ZSTRING:
                coef = d.z_coefficients[op]
            else:
                coef = d.eigenvalues[op]
            lines.append(f"{d.channel},{op},{label},{float(coef)!r},{float(score[op])!r}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return path
