"""Dense complex linear algebra used throughout the simulator.

Matrices are plain ``numpy.ndarray`` objects. Dimensions stay at or below
``2**10`` so every routine here is dense and direct.

All numerical tolerances live in :data:`TOL`; call :func:`configure` to
override them in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from functools import reduce
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonRealResult, NotHermitian, NotPositiveDefinite


@dataclass
class Tolerances:
    hermitian: float = 1e-12  # entrywise, relative to max(1, max|A|)
    hermitian_input: float = 1e-10  # accepted asymmetry before symmetrizing
    non_real: float = 1e-10
    jacobi: float = 1e-14
    jacobi_max_sweeps: int = 60


TOL = Tolerances()


def configure(**overrides) -> Tolerances:
    """Override module tolerances, e.g. ``configure(non_real=1e-8)``."""
    names = {f.name for f in fields(Tolerances)}
    for key, value in overrides.items():
        if key not in names:
            raise KeyError(f"unknown tolerance {key!r}")
        setattr(TOL, key, value)
    return TOL


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending, real
    eigenvectors: np.ndarray  # unitary, columns


def _hermiticity_error(h: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    return float(np.max(np.abs(h - h.conj().T))) / scale if h.size else 0.0


def is_hermitian(h: np.ndarray, tol: float | None = None) -> bool:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    return _hermiticity_error(h) <= (TOL.hermitian if tol is None else tol)


def check_hermitian(h: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Validate ``h`` and return its symmetrized copy ``(h + h^dagger)/2``."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {h.shape}")
    err = _hermiticity_error(h)
    limit = TOL.hermitian_input if tol is None else tol
    if err > limit:
        raise NotHermitian(f"max|A - A^dagger| (relative) = {err:.3e} exceeds {limit:.1e}")
    return 0.5 * (h + h.conj().T)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of several factors, leftmost factor most significant."""
    return reduce(np.kron, factors)


def jacobi_eigh(h: np.ndarray) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Each rotation first removes the phase of the pivot ``a_pq`` and then
    applies the classical real Jacobi rotation, so the accumulated transform
    stays unitary. Cost is O(n^3) per sweep with a Python loop over pivots,
    which limits practical use to n of a few hundred.
    """
    a = check_hermitian(h).astype(complex, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n <= 1:
        return EigenDecomposition(a.real.diagonal().copy(), v)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    for _ in range(TOL.jacobi_max_sweeps):
        off = np.sqrt(max(np.sum(np.abs(a) ** 2) - np.sum(np.abs(a.diagonal()) ** 2), 0.0))
        if off <= TOL.jacobi * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= TOL.jacobi * scale * 1e-3:
                    continue
                phase = apq / r
                theta = (a[q, q].real - a[p, p].real) / (2.0 * r)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # J acts on columns (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                jpp, jpq = c, s
                jqp, jqq = -s * np.conj(phase), c * np.conj(phase)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = col_p * jpp + col_q * jqp
                a[:, q] = col_p * jpq + col_q * jqq
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = np.conj(jpp) * row_p + np.conj(jqp) * row_q
                a[q, :] = np.conj(jpq) * row_p + np.conj(jqq) * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[q, q] = a[q, q].real
                a[p, p] = a[p, p].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = vp * jpp + vq * jqp
                v[:, q] = vp * jpq + vq * jqq
    evals = a.diagonal().real
    order = np.argsort(evals, kind="stable")
    return EigenDecomposition(evals[order], v[:, order])


def hermitian_eig(h: np.ndarray, method: str = "lapack") -> EigenDecomposition:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    ``method="lapack"`` (default) uses ``numpy.linalg.eigh``; ``"jacobi"``
    uses :func:`jacobi_eigh`. Raises :class:`NotHermitian`.
    """
    if method == "jacobi":
        return jacobi_eigh(h)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    hs = check_hermitian(h)
    w, v = np.linalg.eigh(hs)
    return EigenDecomposition(w, v)


def hermitian_expm(h: np.ndarray, t: float) -> np.ndarray:
    """Return ``exp(-i t h)`` computed from the eigen-decomposition of ``h``."""
    w, v = hermitian_eig(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a`` by Cholesky.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, matrix has {a.shape[0]}")
    if np.iscomplexobj(a):
        if np.max(np.abs(a.imag), initial=0.0) > TOL.non_real * max(1.0, np.max(np.abs(a.real), initial=0.0)):
            raise NotPositiveDefinite("matrix is not real symmetric")
        a = a.real
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product ``tr(a b)`` of two Hermitian matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    # tr(ab) = sum_ij a_ij b_ji
    value = np.sum(a * b.T)
    if abs(value.imag) > TOL.non_real * max(1.0, abs(value.real)):
        raise NonRealResult(f"tr(ab) has imaginary part {value.imag:.3e}")
    return float(value.real)


def hs_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))
