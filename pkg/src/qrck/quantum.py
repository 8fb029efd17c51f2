"""Quantum states, data encodings, TFIM reservoirs and the QRC update.

Register layout: the joint state is ``input (x) memory``, input qubits first
(most significant), matching the Pauli conventions in :mod:`qrck.pauli`.
Stateless feature maps (no memory qubits) keep pure state vectors; stateful
runs carry density matrices because the partial trace mixes the memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import AncillaPresent, DimensionMismatch, NonRealResult, RangeViolation
from .numerics import TOL, check_hermitian, hermitian_expm
from .pauli import SIGMA

MAX_QUBITS = 12
RANGE_SLACK = 1e-12


class Encoding(str, Enum):
    ROTATIONAL_Y = "RotationalY"
    ROTATIONAL_PAIRED_YZ = "RotationalPairedYZ"
    AMPLITUDE_SQRT = "AmplitudeSqrt"
    AMPLITUDE_SYMMETRIC = "AmplitudeSymmetric"


class TFIMVariant(str, Enum):
    X_FIELD_ZZ = "XfieldZZcoupling"
    Z_FIELD_XX = "ZfieldXXcoupling"


INPUT_RANGE = {
    Encoding.ROTATIONAL_Y: (0.0, 1.0),
    Encoding.ROTATIONAL_PAIRED_YZ: (0.0, 1.0),
    Encoding.AMPLITUDE_SQRT: (0.0, 1.0),
    Encoding.AMPLITUDE_SYMMETRIC: (-1.0, 1.0),
}


@dataclass(frozen=True)
class QuantumState:
    """Pure (``vector``) or mixed (``matrix``) state on ``n_qubits`` qubits."""

    n_qubits: int
    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.vector is None) == (self.matrix is None):
            raise ValueError("exactly one of vector/matrix must be given")
        dim = 2**self.n_qubits
        data = self.vector if self.vector is not None else self.matrix
        expected = (dim,) if self.vector is not None else (dim, dim)
        if data.shape != expected:
            raise DimensionMismatch(f"expected shape {expected}, got {data.shape}")

    @classmethod
    def pure(cls, psi: np.ndarray) -> QuantumState:
        psi = np.asarray(psi, dtype=complex)
        return cls(int(round(np.log2(psi.shape[0]))), vector=psi)

    @classmethod
    def mixed(cls, rho: np.ndarray) -> QuantumState:
        rho = np.asarray(rho, dtype=complex)
        return cls(int(round(np.log2(rho.shape[0]))), matrix=rho)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> QuantumState:
        d = 2**n_qubits
        return cls(n_qubits, matrix=np.eye(d, dtype=complex) / d)

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def density(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.outer(self.vector, self.vector.conj())

    def purity(self) -> float:
        if self.vector is not None:
            return float(np.vdot(self.vector, self.vector).real ** 2)
        return float(np.sum(np.abs(self.matrix) ** 2))

    def check(self) -> None:
        """Raise ``ValueError`` if the state violates its invariants."""
        if self.vector is not None:
            norm = np.linalg.norm(self.vector)
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"state vector norm {norm!r} != 1")
            return
        rho = check_hermitian(self.matrix)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"trace {tr!r} != 1")
        evals = np.linalg.eigvalsh(rho)
        if evals[0] < -1e-10:
            raise ValueError(f"negative eigenvalue {evals[0]!r}")


@dataclass(frozen=True)
class EncodingSpec:
    scheme: Encoding
    input_dim: int

    def __post_init__(self):
        object.__setattr__(self, "scheme", Encoding(self.scheme))
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.scheme is Encoding.ROTATIONAL_PAIRED_YZ and self.input_dim % 2:
            raise ValueError("RotationalPairedYZ needs an even input dimension")

    @property
    def qubits_used(self) -> int:
        if self.scheme is Encoding.ROTATIONAL_PAIRED_YZ:
            return self.input_dim // 2
        return self.input_dim

    @property
    def input_range(self) -> tuple[float, float]:
        return INPUT_RANGE[self.scheme]


@dataclass(frozen=True)
class ReservoirSpec:
    """Reservoir layout and TFIM parameters.

    The Hamiltonian is ``H = -h sum_j X_j - J sum_j Z_j Z_{j+1}`` on an open
    chain over all ``n_input + n_ancilla`` qubits (X and Z swapped for the
    ``ZfieldXXcoupling`` variant). Only the products ``t*h`` and ``t*J``
    enter the unitary.
    """

    n_input: int
    n_ancilla: int
    encoding: EncodingSpec
    tfim_h: float = 1.0
    tfim_j: float = 1.0
    evolution_time: float = 1.0
    tfim_axis_variant: TFIMVariant = TFIMVariant.X_FIELD_ZZ
    washout: int = 100

    def __post_init__(self):
        object.__setattr__(self, "tfim_axis_variant", TFIMVariant(self.tfim_axis_variant))
        if self.n_input < 1 or self.n_ancilla < 0:
            raise ValueError("need n_input >= 1 and n_ancilla >= 0")
        if self.n_qubits > MAX_QUBITS:
            raise ValueError(f"{self.n_qubits} qubits exceeds the {MAX_QUBITS}-qubit memory guard")
        if self.washout < 0:
            raise ValueError("washout must be >= 0")
        if self.encoding.qubits_used != self.n_input:
            raise ValueError(
                f"encoding {self.encoding.scheme.value} of dimension {self.encoding.input_dim} "
                f"uses {self.encoding.qubits_used} qubits, reservoir has n_input={self.n_input}"
            )

    @property
    def n_qubits(self) -> int:
        return self.n_input + self.n_ancilla

    @property
    def th(self) -> float:
        return self.evolution_time * self.tfim_h

    @property
    def tj(self) -> float:
        return self.evolution_time * self.tfim_j


def _qubit_vectors(z: np.ndarray, scheme: Encoding) -> np.ndarray:
    """Single-qubit amplitudes, shape (B, n_qubits, 2)."""
    if scheme is Encoding.ROTATIONAL_Y:
        return np.stack([np.cos(np.pi * z), np.sin(np.pi * z)], axis=-1).astype(complex)
    if scheme is Encoding.ROTATIONAL_PAIRED_YZ:
        # R_Z(2 pi b) R_Y(2 pi a)|0>; R_Z acts after R_Y so that b is not a global phase
        a, b = z[..., 0::2], z[..., 1::2]
        phase = np.exp(1j * np.pi * b)
        return np.stack([np.cos(np.pi * a) * phase.conj(), np.sin(np.pi * a) * phase], axis=-1)
    if scheme is Encoding.AMPLITUDE_SQRT:
        zc = np.clip(z, 0.0, 1.0)
        return np.stack([np.sqrt(zc), np.sqrt(1.0 - zc)], axis=-1).astype(complex)
    if scheme is Encoding.AMPLITUDE_SYMMETRIC:
        zc = np.clip(z, -1.0, 1.0)
        return np.stack([zc, np.sqrt(1.0 - zc * zc)], axis=-1).astype(complex)
    raise ValueError(f"unknown encoding {scheme!r}")


def check_range(z: np.ndarray, spec: EncodingSpec) -> None:
    lo, hi = spec.input_range
    z = np.asarray(z, dtype=float)
    bad = (z < lo - RANGE_SLACK) | (z > hi + RANGE_SLACK) | ~np.isfinite(z)
    if np.any(bad):
        rows = np.nonzero(bad.reshape(bad.shape[0], -1).any(axis=1))[0] if z.ndim > 1 else [0]
        idx = int(rows[0])
        raise RangeViolation(
            f"{spec.scheme.value} expects inputs in [{lo}, {hi}]; sample {idx} is out of range", index=idx
        )


def encode_batch(z: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """Encode a batch of inputs ``(B, d)`` into product state vectors ``(B, 2**N_I)``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != spec.input_dim:
        raise DimensionMismatch(f"expected input dimension {spec.input_dim}, got {z.shape[1]}")
    check_range(z, spec)
    q = _qubit_vectors(z, spec.scheme)
    out = q[:, 0, :]
    for j in range(1, q.shape[1]):
        out = (out[:, :, None] * q[:, j, None, :]).reshape(out.shape[0], -1)
    return out


def encode(z: Sequence[float], spec: EncodingSpec) -> QuantumState:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionMismatch("encode takes a single input vector")
    return QuantumState.pure(encode_batch(z[None], spec)[0])


def _site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    return np.kron(np.kron(np.eye(2**site), op), np.eye(2 ** (n - site - 1)))


def build_tfim(spec: ReservoirSpec) -> np.ndarray:
    n = spec.n_qubits
    field_op, coupling_op = (SIGMA[1], SIGMA[3])
    if spec.tfim_axis_variant is TFIMVariant.Z_FIELD_XX:
        field_op, coupling_op = SIGMA[3], SIGMA[1]
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        h -= spec.tfim_h * _site_operator(field_op, j, n)
    for j in range(n - 1):
        h -= spec.tfim_j * _site_operator(coupling_op, j, n) @ _site_operator(coupling_op, j + 1, n)
    return h


def reservoir_unitary(spec: ReservoirSpec) -> np.ndarray:
    if spec.evolution_time == 0:
        return np.eye(2**spec.n_qubits, dtype=complex)
    return hermitian_expm(build_tfim(spec), spec.evolution_time)


def qelm_state(x: Sequence[float], spec: ReservoirSpec, u: np.ndarray | None = None) -> QuantumState:
    """Stateless feature map ``U |psi(x)>``; ``u=None`` skips the unitary."""
    if spec.n_ancilla:
        raise AncillaPresent("qelm_state requires n_ancilla == 0")
    psi = encode(x, spec.encoding).vector
    if u is not None:
        psi = u @ psi
    return QuantumState.pure(psi)


def qelm_states(xs: np.ndarray, spec: ReservoirSpec, u: np.ndarray | None = None) -> np.ndarray:
    """Batched :func:`qelm_state` returning a ``(B, D)`` array of vectors."""
    if spec.n_ancilla:
        raise AncillaPresent("qelm_states requires n_ancilla == 0")
    psis = encode_batch(xs, spec.encoding)
    return psis if u is None else psis @ u.T


def partial_trace_input(rho: QuantumState | np.ndarray, layout: ReservoirSpec) -> QuantumState:
    mat = rho.density() if isinstance(rho, QuantumState) else np.asarray(rho)
    d_in, d_mem = 2**layout.n_input, 2**layout.n_ancilla
    if mat.shape != (d_in * d_mem, d_in * d_mem):
        raise DimensionMismatch(f"state shape {mat.shape} does not match layout {d_in}x{d_mem}")
    reduced = np.einsum("iaib->ab", mat.reshape(d_in, d_mem, d_in, d_mem))
    return QuantumState(layout.n_ancilla, matrix=reduced)


def _joint_density(psi_in: np.ndarray, eta_m: np.ndarray) -> np.ndarray:
    eta_i = np.outer(psi_in, psi_in.conj())
    return np.kron(eta_i, eta_m)


def qrc_step(
    eta_m: QuantumState, z: Sequence[float], u: np.ndarray, spec: ReservoirSpec
) -> tuple[QuantumState, QuantumState]:
    """One QRC update: returns ``(U (eta_I(z) x eta_M) U^dagger, tr_I of it)``."""
    if eta_m.n_qubits != spec.n_ancilla:
        raise DimensionMismatch(f"memory has {eta_m.n_qubits} qubits, spec says {spec.n_ancilla}")
    psi_in = encode(z, spec.encoding).vector
    joint = _joint_density(psi_in, eta_m.density())
    rho = u @ joint @ u.conj().T
    return QuantumState(spec.n_qubits, matrix=rho), partial_trace_input(rho, spec)


def drive(
    series: np.ndarray,
    spec: ReservoirSpec,
    u: np.ndarray,
    eta_m: np.ndarray | None = None,
    discard: int = 0,
    encoded: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the stateful reservoir over ``series`` and stack the full states.

    Returns ``(rhos, eta_m_final)`` where ``rhos`` has shape
    ``(T - discard, D, D)``. ``eta_m`` defaults to the maximally mixed state.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    psis = encode_batch(series, spec.encoding) if encoded is None else encoded
    d_in, d_mem = 2**spec.n_input, 2**spec.n_ancilla
    if eta_m is None:
        eta_m = np.eye(d_mem, dtype=complex) / d_mem
    udag = u.conj().T
    d = d_in * d_mem
    t_total = psis.shape[0]
    out = np.empty((max(t_total - discard, 0), d, d), dtype=complex)
    for t in range(t_total):
        rho = u @ _joint_density(psis[t], eta_m) @ udag
        eta_m = np.einsum("iaib->ab", rho.reshape(d_in, d_mem, d_in, d_mem))
        if t >= discard:
            out[t - discard] = rho
    return out, eta_m


def run_reservoir(series: np.ndarray, spec: ReservoirSpec, u: np.ndarray | None = None) -> list[QuantumState]:
    """States ``rho_t`` for ``t`` in ``[washout, T)``.

    Without memory qubits this is the per-sample stateless feature map and the
    washout is not applied. Out-of-range samples raise :class:`RangeViolation`
    carrying the sample index.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if u is None:
        u = reservoir_unitary(spec)
    if spec.n_ancilla == 0:
        psis = qelm_states(series, spec, u)
        return [QuantumState(spec.n_qubits, vector=p) for p in psis]
    rhos, _ = drive(series, spec, u, discard=spec.washout)
    return [QuantumState(spec.n_qubits, matrix=r) for r in rhos]


def expectation(rho: QuantumState | np.ndarray, m: np.ndarray) -> float:
    """``tr(M rho)``; pure states use ``<psi|M|psi>``."""
    m = np.asarray(m)
    if isinstance(rho, QuantumState):
        data = rho.vector if rho.is_pure else rho.matrix
    else:
        data = np.asarray(rho)
    if data.shape[0] != m.shape[0]:
        raise DimensionMismatch(f"state dimension {data.shape[0]} vs operator {m.shape[0]}")
    if data.ndim == 1:
        value = np.vdot(data, m @ data)
    else:
        value = np.sum(m * data.T)
    if abs(value.imag) > TOL.non_real * max(1.0, abs(value.real)):
        raise NonRealResult(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def trace_distance(a: QuantumState | np.ndarray, b: QuantumState | np.ndarray) -> float:
    ma = a.density() if isinstance(a, QuantumState) else np.asarray(a)
    mb = b.density() if isinstance(b, QuantumState) else np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(ma - mb))))
