"""Readout training: constrained primal, unconstrained primal and kernel (dual) forms.

States can be passed as a list of :class:`~qrck.quantum.QuantumState` or as
stacked arrays: ``(P, D)`` for pure state vectors, ``(P, D, D)`` for density
matrices. Targets are ``(P,)`` or ``(P, C)``; multi-output problems are solved
column by column against the same Gram matrix (one-vs-rest for classes).

Monomial ordering is graded lexicographic: all degree-1 terms ``v_1..v_M``,
then degree-2 terms ``v_1 v_1, v_1 v_2, .., v_M v_M`` and so on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotOrthogonal
from .numerics import spd_solve
from .pauli import pauli_expectations, pauli_sum, pure_pauli_expectations
from .quantum import QuantumState

DEFAULT_RIDGE_TIMESERIES = 1e-8
DEFAULT_RIDGE_CLASSIFICATION = 1e-6


class StateStack:
    """Stacked states with a flag telling vectors from density matrices."""

    __slots__ = ("data", "pure")

    def __init__(self, data: np.ndarray, pure: bool):
        self.data = data
        self.pure = pure

    def __len__(self):
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def densities(self) -> np.ndarray:
        if not self.pure:
            return self.data
        return self.data[:, :, None] * self.data[:, None, :].conj()

    def rotated(self, v: np.ndarray) -> StateStack:
        """States conjugated by ``V^dagger``: ``V^dagger rho V``."""
        vdag = v.conj().T
        if self.pure:
            return StateStack(self.data @ vdag.T, True)
        return StateStack(vdag @ self.data @ v, False)


def as_stack(states) -> StateStack:
    if isinstance(states, StateStack):
        return states
    if isinstance(states, QuantumState):
        states = [states]
    if isinstance(states, np.ndarray):
        if states.ndim == 2:
            return StateStack(states.astype(complex, copy=False), True)
        if states.ndim == 3:
            return StateStack(states.astype(complex, copy=False), False)
        raise DimensionMismatch(f"cannot interpret array of shape {states.shape} as states")
    states = list(states)
    if not states:
        raise ValueError("no states given")
    dims = {s.dim for s in states}
    if len(dims) != 1:
        raise DimensionMismatch(f"states have mixed dimensions {sorted(dims)}")
    if all(s.is_pure for s in states):
        return StateStack(np.stack([s.vector for s in states]), True)
    return StateStack(np.stack([s.density() for s in states]), False)


def _targets(y) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return y[:, None], True
    return y, False


# --------------------------------------------------------------------------
# kernel / dual form
# --------------------------------------------------------------------------


def cross_kernel(a, b) -> np.ndarray:
    """``K_ij = tr(rho_i sigma_j)`` between two state collections."""
    a, b = as_stack(a), as_stack(b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"state dimensions {a.dim} and {b.dim} differ")
    if a.pure and b.pure:
        return np.abs(a.data.conj() @ b.data.T) ** 2
    if a.pure:
        # <psi|rho|psi> for every pair
        return np.einsum("ia,jab,ib->ij", a.data.conj(), b.data, a.data, optimize=True).real
    if b.pure:
        return cross_kernel(b, a).T
    fa = a.data.reshape(len(a), -1)
    fb = b.data.reshape(len(b), -1)
    # tr(A B) = sum_ab A_ab conj(B_ab) for Hermitian B
    return (fa @ fb.conj().T).real


def gram(states) -> np.ndarray:
    """Symmetric Gram matrix ``K_ij = tr(rho_i rho_j)``."""
    k = cross_kernel(states, states)
    return 0.5 * (k + k.T)


def check_gram(k: np.ndarray) -> None:
    if np.max(np.abs(k - k.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(k))):
        raise ValueError("Gram matrix is not symmetric")
    w = np.linalg.eigvalsh(k)
    if w[0] < -1e-8 * max(w[-1], 0.0):
        raise ValueError(f"Gram matrix is not PSD (min eigenvalue {w[0]:.3e})")
    diag = np.diag(k)
    if np.any(diag <= 0) or np.any(diag > 1 + 1e-10):
        raise ValueError("Gram diagonal must lie in (0, 1]")


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray  # (P, C)
    ridge: float


def dual_solve(k: np.ndarray, y, ridge: float) -> DualSolution:
    """``alpha = (K + ridge 1)^-1 Y`` by Cholesky; raises ``NotPositiveDefinite``."""
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    y, _ = _targets(y)
    k = np.asarray(k, dtype=float)
    if y.shape[0] != k.shape[0]:
        raise DimensionMismatch(f"{y.shape[0]} targets for a {k.shape[0]}x{k.shape[0]} Gram matrix")
    a = k + ridge * np.eye(k.shape[0])
    return DualSolution(spd_solve(a, y), float(ridge))


def optimal_observable(states, solution: DualSolution) -> np.ndarray:
    """``M*_c = sum_i alpha_ic rho_i`` for every channel; shape ``(C, D, D)``."""
    s = as_stack(states)
    alpha = solution.alpha
    if alpha.shape[0] != len(s):
        raise DimensionMismatch(f"{alpha.shape[0]} coefficients for {len(s)} states")
    if s.pure:
        # sum_i a_i |psi_i><psi_i| = Psi^T diag(a) Psi^*
        m = np.einsum("ic,ia,ib->cab", alpha, s.data, s.data.conj(), optimize=True)
    else:
        m = np.tensordot(alpha.T, s.data, axes=(1, 0))
    return 0.5 * (m + m.conj().transpose(0, 2, 1))


@dataclass
class KernelModel:
    """Dual predictor ``f_c(x) = sum_i alpha_ic K(x_i, x)``."""

    solution: DualSolution
    train_states: StateStack

    def predict(self, states) -> np.ndarray:
        return cross_kernel(states, self.train_states) @ self.solution.alpha


@dataclass
class ObservableModel:
    """Predictor ``f_c(x) = tr(M_c rho(x))`` for explicit observables ``(C, D, D)``."""

    observables: np.ndarray

    def predict(self, states) -> np.ndarray:
        s = as_stack(states)
        m = self.observables
        if s.dim != m.shape[-1]:
            raise DimensionMismatch(f"state dimension {s.dim} vs observable {m.shape[-1]}")
        if s.pure:
            return np.einsum("ia,cab,ib->ic", s.data.conj(), m, s.data, optimize=True).real
        # tr(M rho) = sum_ab M_ab rho_ba
        return np.einsum("cab,iba->ic", m, s.data, optimize=True).real


def fit_kernel(states, y, ridge: float) -> KernelModel:
    s = as_stack(states)
    return KernelModel(dual_solve(gram(s), y, ridge), s)


# --------------------------------------------------------------------------
# primal form
# --------------------------------------------------------------------------


def feature_matrix(states, operators: Sequence[np.ndarray]) -> np.ndarray:
    """``Phi_ik = tr(M_k rho_i)`` for arbitrary Hermitian operators."""
    s = as_stack(states)
    ops = np.asarray(operators)
    if ops.ndim == 2:
        ops = ops[None]
    if ops.shape[-1] != s.dim:
        raise DimensionMismatch(f"operator dimension {ops.shape[-1]} vs state {s.dim}")
    return ObservableModel(ops).predict(s)


def pauli_feature_matrix(states, codes: Sequence[int] | None = None, normalize: bool = False) -> np.ndarray:
    """``tr(P_k rho_i)`` for Pauli codes (all ``4**N`` if ``codes`` is None).

    ``normalize=True`` divides by ``sqrt(2**N)`` so that the operators
    ``P_k / sqrt(2**N)`` are Hilbert-Schmidt orthonormal.
    """
    s = as_stack(states)
    phi = pure_pauli_expectations(s.data) if s.pure else pauli_expectations(s.data)
    if codes is not None:
        phi = phi[:, np.asarray(codes, dtype=np.int64)]
    if normalize:
        phi = phi / np.sqrt(s.dim)
    return phi


def monomial_indices(m: int, p_max: int) -> list[tuple[int, ...]]:
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    out: list[tuple[int, ...]] = []
    for p in range(1, p_max + 1):
        out.extend(combinations_with_replacement(range(m), p))
    return out


def readout_dimension(m: int, p_max: int) -> int:
    return comb(m + p_max, p_max) - 1


def monomial_expand(v: np.ndarray, p_max: int) -> np.ndarray:
    """All monomials of total degree ``1..p_max`` in graded lexicographic order.

    Works on a single vector ``(M,)`` or a batch ``(B, M)``.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vb = v[None] if single else v
    if p_max == 1:
        return v.copy()
    m = vb.shape[1]
    cols = [vb]
    prev = vb
    prev_index = [(i,) for i in range(m)]
    for _ in range(2, p_max + 1):
        # extend each degree-(p-1) monomial by factors with index >= its last index
        new_cols = []
        new_index = []
        for j, idx in enumerate(prev_index):
            last = idx[-1]
            new_cols.append(prev[:, j : j + 1] * vb[:, last:])
            new_index.extend(idx + (k,) for k in range(last, m))
        prev = np.concatenate(new_cols, axis=1)
        prev_index = new_index
        cols.append(prev)
    out = np.concatenate(cols, axis=1)
    return out[0] if single else out


def ridge_weights(phi: np.ndarray, y, ridge: float) -> np.ndarray:
    """``(Phi^T Phi + ridge 1)^-1 Phi^T Y``, via the dual identity when P < m."""
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    y, _ = _targets(y)
    phi = np.asarray(phi, dtype=float)
    p, m = phi.shape
    if y.shape[0] != p:
        raise DimensionMismatch(f"{y.shape[0]} targets for {p} feature rows")
    if p < m:
        return phi.T @ spd_solve(phi @ phi.T + ridge * np.eye(p), y)
    return spd_solve(phi.T @ phi + ridge * np.eye(m), phi.T @ y)


@dataclass
class PrimalSolution:
    """Linear readout ``f = W^T R(x)`` over measured operators.

    ``operators`` holds Pauli codes (``int``) or explicit Hermitian matrices.
    Measured values are multiplied by ``scale`` (one factor per operator)
    before monomial expansion. ``rotation`` (Z-string mode) conjugates every
    state by ``V^dagger`` before measuring.
    """

    weights: np.ndarray  # (m_ro, C)
    operators: list = field(default_factory=list)
    p_max: int = 1
    scale: np.ndarray | None = None
    rotation: np.ndarray | None = None
    ridge: float = 0.0
    n_qubits: int = 0

    @property
    def uses_codes(self) -> bool:
        return bool(self.operators) and all(isinstance(o, (int, np.integer)) for o in self.operators)

    def measure(self, states) -> np.ndarray:
        s = as_stack(states)
        if self.rotation is not None:
            s = s.rotated(self.rotation)
        if self.uses_codes:
            v = pauli_feature_matrix(s, self.operators)
        else:
            v = feature_matrix(s, self.operators)
        if self.scale is not None:
            v = v * self.scale
        return v

    def readout_vector(self, states) -> np.ndarray:
        return monomial_expand(self.measure(states), self.p_max)

    def predict(self, states) -> np.ndarray:
        return self.readout_vector(states) @ self.weights

    def as_observables(self) -> np.ndarray:
        """Equivalent observables ``(C, D, D)``; only defined for ``p_max == 1``."""
        if self.p_max != 1:
            raise ValueError("a monomial readout is not linear in the state")
        scale = np.ones(len(self.operators)) if self.scale is None else self.scale
        coef = self.weights * scale[:, None]
        if self.uses_codes:
            full = np.zeros((coef.shape[1], 4**self.n_qubits))
            np.add.at(full.T, np.asarray(self.operators, dtype=np.int64), coef)
            m = pauli_sum(full)
        else:
            ops = np.asarray([np.asarray(o) for o in self.operators])
            m = np.tensordot(coef.T, ops, axes=(1, 0))
        if self.rotation is not None:
            m = self.rotation @ m @ self.rotation.conj().T
        return m


def primal_solve(phi: np.ndarray, y, ridge: float) -> np.ndarray:
    """Ridge weights for a given feature matrix; see :func:`ridge_weights`."""
    return ridge_weights(phi, y, ridge)


def fit_primal(
    states,
    y,
    operators: Sequence,
    ridge: float,
    p_max: int = 1,
    normalize: bool = True,
    rotation: np.ndarray | None = None,
) -> PrimalSolution:
    """Measure ``operators`` on ``states``, expand monomials and fit ridge weights.

    With ``normalize=True`` every operator is rescaled to unit Hilbert-Schmidt
    norm, which makes a complete Pauli set reproduce the kernel predictor at
    the same ridge value.
    """
    s = as_stack(states)
    ops = list(operators)
    if not ops:
        raise ValueError("operator set is empty")
    sol = PrimalSolution(np.zeros((0, 0)), ops, p_max, None, rotation, ridge, s.dim.bit_length() - 1)
    if normalize:
        if sol.uses_codes:
            sol.scale = np.full(len(ops), 1.0 / np.sqrt(s.dim))
        else:
            sol.scale = np.array([1.0 / np.sqrt(np.sum(np.abs(o) ** 2)) for o in ops])
    r = sol.readout_vector(s)
    sol.weights = ridge_weights(r, y, ridge)
    return sol


def dual_to_primal_weights(
    solution: DualSolution, states, operators: Sequence[np.ndarray], orthonormal: bool = False
) -> np.ndarray:
    """Weights ``w`` with ``sum_k w_k M_k`` closest (in HS norm) to ``M*``.

    ``orthonormal=True`` assumes HS-orthogonal operators (validated) and
    returns ``(Phi^T alpha)_k / tr(M_k^2)``. Otherwise ``G^+ Phi^T alpha`` with
    ``G_kl = tr(M_k M_l)``, the pseudo-inverse cutting eigenvalues below
    ``1e-10`` times the largest.
    """
    ops = np.asarray(operators)
    if ops.ndim == 2:
        ops = ops[None]
    m = ops.shape[0]
    flat = ops.reshape(m, -1)
    g = (flat @ flat.conj().T).real
    phi = feature_matrix(states, ops)
    b = phi.T @ solution.alpha
    if orthonormal:
        off = g - np.diag(np.diag(g))
        if np.max(np.abs(off), initial=0.0) > 1e-10:
            raise NotOrthogonal(f"max |tr(M_k M_l)| off-diagonal = {np.max(np.abs(off)):.3e}")
        return b / np.diag(g)[:, None]
    w, v = np.linalg.eigh(g)
    cutoff = 1e-10 * max(w[-1], 0.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (v * inv) @ v.T @ b


def predict(model, states) -> np.ndarray:
    """Evaluate any trained model; returns ``(B, C)`` (or ``(C,)`` for one state)."""
    single = isinstance(states, QuantumState)
    out = model.predict(states)
    return out[0] if single else out


def classify(scores) -> np.ndarray | int:
    """Argmax over channels; ties go to the lowest index."""
    scores = np.asarray(scores)
    if scores.shape[-1] < 2:
        raise ValueError("classification needs at least two channels")
    idx = np.argmax(scores, axis=-1)
    return int(idx) if scores.ndim == 1 else idx


def training_loss(phi_or_k: np.ndarray, coef: np.ndarray, y) -> float:
    y, _ = _targets(y)
    r = phi_or_k @ coef - y
    return float(0.5 * np.sum(r * r))
