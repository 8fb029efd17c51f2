"""Pauli strings and fast transforms between matrices and Pauli coefficients.

Conventions (used everywhere in the package):

* Single-qubit letters are indexed ``I=0, X=1, Y=2, Z=3``.
* Qubit 0 is the most significant: it is the leftmost Kronecker factor, the
  leftmost character of a label such as ``"XZI"``, and the most significant
  base-4 digit of a Pauli code. State index bits follow the same order.
* ``pauli_matrix`` returns raw strings with ``tr(P_k^2) = 2**n``.

The transforms below never build a ``4**n x 4**n`` matrix. They act on one
qubit axis at a time, costing ``O(n 4**n)`` per operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np

LETTERS = "IXYZ"

SIGMA = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# rows: I, X, Y, Z; columns: (rho_00, rho_01, rho_10, rho_11) of one qubit
# slot. Row p gives tr(sigma^p rho) restricted to that slot.
_TO_PAULI = np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1j, -1j, 0], [1, 0, 0, -1]], dtype=complex
)
# columns: I, X, Y, Z; rows: matrix entries (00, 01, 10, 11) of sigma^p
_FROM_PAULI = np.array([s.reshape(4) for s in SIGMA], dtype=complex).T


@dataclass(frozen=True, order=True)
class PauliString:
    n_qubits: int
    code: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if not 0 <= self.code < 4**self.n_qubits:
            raise ValueError(f"code {self.code} out of range for {self.n_qubits} qubits")

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        label = label.upper()
        code = 0
        for ch in label:
            code = 4 * code + LETTERS.index(ch)
        return cls(len(label), code)

    @classmethod
    def from_letters(cls, letters) -> PauliString:
        code = 0
        for p in letters:
            code = 4 * code + int(p)
        return cls(len(letters), code)

    @property
    def letters(self) -> tuple[int, ...]:
        return code_letters(self.code, self.n_qubits)

    @property
    def label(self) -> str:
        return "".join(LETTERS[p] for p in self.letters)

    @property
    def weight(self) -> int:
        return sum(1 for p in self.letters if p)

    def matrix(self) -> np.ndarray:
        return pauli_matrix(self)

    def __str__(self):
        return self.label


def code_letters(code: int, n_qubits: int) -> tuple[int, ...]:
    digits = []
    for _ in range(n_qubits):
        digits.append(code % 4)
        code //= 4
    return tuple(reversed(digits))


def code_label(code: int, n_qubits: int) -> str:
    return "".join(LETTERS[p] for p in code_letters(code, n_qubits))


@lru_cache(maxsize=None)
def pauli_weights(n_qubits: int) -> np.ndarray:
    """Pauli weight of every code ``0 .. 4**n - 1``."""
    w = np.zeros(1, dtype=np.int64)
    for _ in range(n_qubits):
        w = (w[:, None] + np.array([0, 1, 1, 1])[None, :]).reshape(-1)
    w.setflags(write=False)
    return w


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    if isinstance(p, str):
        p = PauliString.from_label(p)
    out = np.ones((1, 1), dtype=complex)
    for letter in p.letters:
        out = np.kron(out, SIGMA[letter])
    return out


def z_string_code(s: int, n_qubits: int) -> int:
    """Pauli code of the Z-string ``Z_s`` whose bit ``j`` (qubit 0 = MSB) selects Z."""
    code = 0
    for j in range(n_qubits):
        bit = (s >> (n_qubits - 1 - j)) & 1
        code = 4 * code + (3 if bit else 0)
    return code


def codes_up_to_weight(n_qubits: int, max_weight: int, letters: str = "XYZ") -> list[int]:
    """Codes of all strings of weight <= ``max_weight`` over ``letters``.

    Ordered by weight, then by code. ``codes_up_to_weight(n, 2, "Z")`` gives
    the identity followed by the Z and ZZ strings.
    """
    allowed = [LETTERS.index(c) for c in letters]
    out = []
    for w in range(0, max_weight + 1):
        group = []
        for sites in combinations(range(n_qubits), w):
            for choice in product(allowed, repeat=w):
                digits = [0] * n_qubits
                for site, letter in zip(sites, choice):
                    digits[site] = letter
                group.append(PauliString.from_letters(digits).code)
        out.extend(sorted(group))
    return out


def _n_from_dim(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _interleave(mats: np.ndarray, n: int) -> np.ndarray:
    """(B, D, D) -> (B, 4, ..., 4) with axis j holding qubit j's (row, col) pair."""
    b = mats.shape[0]
    t = mats.reshape((b,) + (2,) * (2 * n))
    perm = [0]
    for j in range(n):
        perm += [1 + j, 1 + n + j]
    return t.transpose(perm).reshape((b,) + (4,) * n)


def _deinterleave(t: np.ndarray, n: int) -> np.ndarray:
    b = t.shape[0]
    t = t.reshape((b,) + (2,) * (2 * n))
    # axes are (r0, c0, r1, c1, ...); bring back to (r0..r_{n-1}, c0..c_{n-1})
    perm = [0] + [1 + 2 * j for j in range(n)] + [2 + 2 * j for j in range(n)]
    d = 2**n
    return t.transpose(perm).reshape(b, d, d)


def _apply_each_axis(t: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    for axis in range(1, n + 1):
        t = np.moveaxis(np.tensordot(t, m, axes=([axis], [1])), -1, axis)
    return t


def pauli_expectations(rhos: np.ndarray, chunk: int = 1024, keep_complex: bool = False) -> np.ndarray:
    """``tr(P_k rho)`` for every Pauli code ``k``.

    ``rhos`` is a single ``(D, D)`` matrix or a stack ``(B, D, D)``. The
    result has shape ``(4**n,)`` or ``(B, 4**n)``; it is real unless
    ``keep_complex`` is set (useful for checking Hermiticity residue).
    """
    rhos = np.asarray(rhos)
    single = rhos.ndim == 2
    if single:
        rhos = rhos[None]
    n = _n_from_dim(rhos.shape[-1])
    out = np.empty((rhos.shape[0], 4**n), dtype=complex if keep_complex else float)
    for start in range(0, rhos.shape[0], chunk):
        block = _interleave(rhos[start : start + chunk], n)
        block = _apply_each_axis(block, _TO_PAULI, n).reshape(block.shape[0], -1)
        out[start : start + chunk] = block if keep_complex else block.real
    return out[0] if single else out


def pure_pauli_expectations(psis: np.ndarray, chunk: int = 512) -> np.ndarray:
    """``<psi|P_k|psi>`` for a stack of state vectors ``(B, D)``."""
    psis = np.asarray(psis)
    single = psis.ndim == 1
    if single:
        psis = psis[None]
    out = np.empty((psis.shape[0], psis.shape[1] ** 2))
    for start in range(0, psis.shape[0], chunk):
        block = psis[start : start + chunk]
        rho = block[:, :, None] * block[:, None, :].conj()
        out[start : start + chunk] = pauli_expectations(rho)
    return out[0] if single else out


def pauli_sum(coefficients: np.ndarray) -> np.ndarray:
    """Inverse transform: ``sum_k c_k P_k`` for real (or complex) ``c``."""
    c = np.asarray(coefficients)
    single = c.ndim == 1
    if single:
        c = c[None]
    n = _n_from_dim(int(round(np.sqrt(c.shape[-1]))))
    t = c.astype(complex).reshape((c.shape[0],) + (4,) * n)
    t = _apply_each_axis(t, _FROM_PAULI, n)
    mats = _deinterleave(t, n)
    return mats[0] if single else mats
