from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density, random_unitary
from qrck.errors import AncillaPresent, DimensionMismatch, NonRealResult, RangeViolation
from qrck.pauli import SIGMA, pauli_matrix
from qrck.quantum import (
    Encoding,
    EncodingSpec,
    QuantumState,
    ReservoirSpec,
    TFIMVariant,
    build_tfim,
    drive,
    encode,
    encode_batch,
    expectation,
    partial_trace_input,
    qelm_state,
    qelm_states,
    qrc_step,
    reservoir_unitary,
    run_reservoir,
    trace_distance,
)

SX, SY, SZ = SIGMA[1], SIGMA[2], SIGMA[3]
ROT_Y = EncodingSpec(Encoding.ROTATIONAL_Y, 1)
AMP = EncodingSpec(Encoding.AMPLITUDE_SQRT, 1)


def qelm_spec(n, scheme=Encoding.ROTATIONAL_Y, h=1.0, j=1.0, t=1.0):
    dim = 2 * n if scheme is Encoding.ROTATIONAL_PAIRED_YZ else n
    return ReservoirSpec(n, 0, EncodingSpec(scheme, dim), h, j, t, washout=0)


def test_encode_examples():
    assert np.allclose(encode([0.0], ROT_Y).vector, [1, 0])
    assert np.isclose(expectation(encode([0.5], AMP), SX), 1.0)
    s = encode([0.25], ROT_Y)
    assert abs(expectation(s, SZ)) < 1e-15
    assert np.isclose(expectation(s, SX), 1.0)


def test_single_qubit_expectation_table():
    zs = np.linspace(0, 1, 100)
    rot = encode_batch(zs[:, None], ROT_Y)
    amp = encode_batch(zs[:, None], AMP)

    def ev(psis, op):
        return np.einsum("ia,ab,ib->i", psis.conj(), op, psis).real

    assert np.allclose(ev(rot, SX), np.sin(2 * np.pi * zs), atol=1e-12)
    assert np.allclose(ev(rot, SZ), np.cos(2 * np.pi * zs), atol=1e-12)
    assert np.allclose(ev(rot, SY), 0, atol=1e-12)
    assert np.allclose(ev(amp, SX), 2 * np.sqrt(zs * (1 - zs)), atol=1e-12)
    assert np.allclose(ev(amp, SZ), 2 * zs - 1, atol=1e-12)
    assert np.allclose(ev(amp, SY), 0, atol=1e-12)


def test_symmetric_amplitude_covers_full_circle():
    spec = EncodingSpec(Encoding.AMPLITUDE_SYMMETRIC, 1)
    assert np.allclose(encode([-1.0], spec).vector, [-1, 0])
    assert np.allclose(encode([0.0], spec).vector, [0, 1])


def test_paired_encoding_uses_both_inputs():
    spec = EncodingSpec(Encoding.ROTATIONAL_PAIRED_YZ, 2)
    a = encode([0.25, 0.0], spec)
    b = encode([0.25, 0.25], spec)
    assert trace_distance(a, b) > 0.5
    # the second angle rotates the x-component into y
    assert np.isclose(expectation(b, SY), 1.0)


def test_encoding_validation():
    with pytest.raises(ValueError):
        EncodingSpec(Encoding.ROTATIONAL_PAIRED_YZ, 3)
    with pytest.raises(RangeViolation) as info:
        encode_batch(np.array([[0.2], [1.5]]), AMP)
    assert info.value.index == 1
    with pytest.raises(DimensionMismatch):
        encode([0.1, 0.2], AMP)


def test_tfim_single_site_and_diagonal_coupling():
    h = build_tfim(ReservoirSpec(1, 0, ROT_Y, 1.0, 5.0))
    assert np.allclose(h, -SX)
    spec = ReservoirSpec(2, 0, EncodingSpec(Encoding.ROTATIONAL_Y, 2), 0.0, 1.0)
    assert np.allclose(build_tfim(spec), np.diag([-1, 1, 1, -1]))


def test_tfim_traceless_and_hermitian():
    h = build_tfim(qelm_spec(3))
    # each term is a non-identity Pauli string, hence traceless
    assert abs(np.trace(h)) < 1e-14
    assert np.allclose(h, h.conj().T)


def test_tfim_variant_swaps_axes():
    spec = ReservoirSpec(2, 0, EncodingSpec(Encoding.ROTATIONAL_Y, 2), 0.7, 0.3, tfim_axis_variant=TFIMVariant.Z_FIELD_XX)
    expected = -0.7 * (pauli_matrix("ZI") + pauli_matrix("IZ")) - 0.3 * pauli_matrix("XX")
    assert np.allclose(build_tfim(spec), expected)


def test_unitary_examples():
    assert np.allclose(reservoir_unitary(ReservoirSpec(1, 0, ROT_Y, 1.0, 1.0, 0.0)), np.eye(2))
    # exp(i pi/2 sigma_x) = i sigma_x
    u = reservoir_unitary(ReservoirSpec(1, 0, ROT_Y, 1.0, 1.0, np.pi / 2))
    assert np.allclose(u, 1j * SX, atol=1e-14)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 3), st.integers(1, 4))
def test_unitarity(h, j, t, n):
    u = reservoir_unitary(qelm_spec(n, h=h, j=j, t=t))
    assert np.allclose(u @ u.conj().T, np.eye(2**n), atol=1e-10)


def test_only_products_with_time_matter():
    a = reservoir_unitary(qelm_spec(3, h=2.0, j=1.0, t=0.5))
    b = reservoir_unitary(qelm_spec(3, h=1.0, j=0.5, t=1.0))
    assert np.allclose(a, b, atol=1e-12)


def test_qelm_state_identity_and_purity(rng):
    spec = qelm_spec(2)
    x = rng.uniform(0, 1, 2)
    assert np.allclose(qelm_state(x, spec).vector, encode(x, spec.encoding).vector)
    s = qelm_state(x, spec, reservoir_unitary(spec))
    assert np.isclose(s.purity(), 1.0)
    s.check()
    with pytest.raises(AncillaPresent):
        qelm_state([0.1], ReservoirSpec(1, 1, AMP))


def test_rotational_kernel_is_cos_squared(rng):
    spec = qelm_spec(1)
    u = random_unitary(rng, 2)
    x, y = rng.uniform(0, 1, 2)
    for uu in (None, u):
        a = qelm_state([x], spec, uu).vector
        b = qelm_state([y], spec, uu).vector
        assert abs(abs(np.vdot(a, b)) ** 2 - np.cos(np.pi * (x - y)) ** 2) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_kernel_invariant_under_global_conjugation(seed):
    rng = np.random.default_rng(seed)
    spec = qelm_spec(2, Encoding.AMPLITUDE_SQRT)
    xs = rng.uniform(0, 1, (2, 2))
    u = random_unitary(rng, 4)
    a, b = qelm_states(xs, spec)
    ua, ub = qelm_states(xs, spec, u)
    assert abs(abs(np.vdot(a, b)) ** 2 - abs(np.vdot(ua, ub)) ** 2) < 1e-12


def test_partial_trace_examples(rng):
    spec = ReservoirSpec(1, 1, AMP)
    psi = encode([0.3], AMP).vector
    eta = random_density(rng, 2)
    joint = np.kron(np.outer(psi, psi.conj()), eta)
    assert np.allclose(partial_trace_input(joint, spec).matrix, eta, atol=1e-15)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace_input(np.outer(bell, bell), spec).matrix, np.eye(2) / 2)
    out = partial_trace_input(random_density(rng, 4), spec)
    assert abs(np.trace(out.matrix) - 1) < 1e-12


def test_qrc_step_identity_keeps_memory(rng):
    spec = ReservoirSpec(1, 2, AMP)
    eta = QuantumState.mixed(random_density(rng, 4))
    rho, nxt = qrc_step(eta, [0.4], np.eye(8), spec)
    assert np.allclose(nxt.matrix, eta.matrix, atol=1e-15)
    rho.check()


@given(st.integers(0, 2**32 - 1))
def test_qrc_step_trace_preserving_and_positive(seed):
    rng = np.random.default_rng(seed)
    spec = ReservoirSpec(1, 2, AMP, 1.0, 1.0, 1.0)
    eta = QuantumState.mixed(random_density(rng, 4))
    rho, nxt = qrc_step(eta, [rng.uniform()], reservoir_unitary(spec), spec)
    for s in (rho, nxt):
        assert abs(np.trace(s.matrix) - 1) < 1e-12
        assert np.linalg.eigvalsh(s.matrix).min() >= -1e-10


def test_echo_state_two_trajectories_converge(rng):
    spec = ReservoirSpec(1, 3, AMP, 1.0, 1.0, 1.0)
    u = reservoir_unitary(spec)
    series = rng.uniform(0, 1, (300, 1))
    _, a = drive(series, spec, u, eta_m=random_density(rng, 8))
    _, b = drive(series, spec, u, eta_m=random_density(rng, 8))
    assert trace_distance(a, b) < 1e-3


def test_constant_input_reaches_fixed_point():
    spec = ReservoirSpec(1, 3, AMP, 1.0, 1.0, 1.0, washout=0)
    rhos, _ = drive(np.full((200, 1), 0.3), spec, reservoir_unitary(spec))
    assert trace_distance(rhos[-1], rhos[-2]) < 1e-6


def test_run_reservoir_bookkeeping(rng):
    spec = ReservoirSpec(1, 2, AMP, washout=0)
    assert len(run_reservoir(rng.uniform(0, 1, (5, 1)), spec)) == 5
    spec = ReservoirSpec(1, 2, AMP, washout=3)
    assert len(run_reservoir(rng.uniform(0, 1, (5, 1)), spec)) == 2


def test_run_reservoir_stateless_is_order_independent(rng):
    spec = qelm_spec(2)
    xs = rng.uniform(0, 1, (6, 2))
    u = reservoir_unitary(spec)
    fwd = run_reservoir(xs, spec, u)
    rev = run_reservoir(xs[::-1], spec, u)[::-1]
    for i, (a, b) in enumerate(zip(fwd, rev)):
        assert np.allclose(a.vector, b.vector)
        assert np.allclose(a.vector, qelm_state(xs[i], spec, u).vector)


def test_expectation_basics():
    assert expectation(encode([0.0], ROT_Y), SZ) == 1.0
    with pytest.raises(NonRealResult):
        expectation(encode([0.1], ROT_Y), np.array([[0, 1j], [0, 0]]))


@pytest.mark.parametrize("scheme", [Encoding.ROTATIONAL_Y, Encoding.AMPLITUDE_SQRT, Encoding.AMPLITUDE_SYMMETRIC])
def test_y_strings_vanish_on_product_states(rng, scheme):
    n = 3
    spec = EncodingSpec(scheme, n)
    lo, hi = spec.input_range
    psis = encode_batch(rng.uniform(lo, hi, (20, n)), spec)
    for label in ("YII", "IYZ", "XYX", "YYY"):
        p = pauli_matrix(label)
        vals = np.einsum("ia,ab,ib->i", psis.conj(), p, psis)
        assert np.abs(vals).max() <= 1e-14


@pytest.mark.parametrize("scheme", list(Encoding))
def test_product_expectation_factorizes(rng, scheme):
    n = 2
    dim = 2 * n if scheme is Encoding.ROTATIONAL_PAIRED_YZ else n
    spec = EncodingSpec(scheme, dim)
    lo, hi = spec.input_range
    z = rng.uniform(lo, hi, dim)
    psi = encode(z, spec).vector
    singles = [encode([z[j]], EncodingSpec(scheme, 1)).vector for j in range(n)] if scheme is not Encoding.ROTATIONAL_PAIRED_YZ else [
        encode(z[2 * j : 2 * j + 2], EncodingSpec(scheme, 2)).vector for j in range(n)
    ]
    for a in range(4):
        for b in range(4):
            full = np.vdot(psi, np.kron(SIGMA[a], SIGMA[b]) @ psi)
            prod = np.vdot(singles[0], SIGMA[a] @ singles[0]) * np.vdot(singles[1], SIGMA[b] @ singles[1])
            assert abs(full - prod) <= 1e-12
