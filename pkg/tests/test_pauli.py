from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density, random_hermitian, random_pure
from qrck.pauli import (
    SIGMA,
    PauliString,
    code_label,
    codes_up_to_weight,
    pauli_expectations,
    pauli_matrix,
    pauli_sum,
    pauli_weights,
    pure_pauli_expectations,
    z_string_code,
)


def naive_expectations(rho, n):
    """tr(P rho) for every Pauli string built by explicit Kronecker products."""
    out = []
    for letters in itertools.product(range(4), repeat=n):
        p = np.ones((1, 1))
        for k in letters:
            p = np.kron(p, SIGMA[k])
        out.append(np.trace(p @ rho))
    return np.array(out)


def test_identity_code():
    assert np.array_equal(pauli_matrix(PauliString(2, 0)), np.eye(4))


def test_qubit_zero_is_most_significant():
    assert np.array_equal(np.diag(pauli_matrix("ZI")).real, [1, 1, -1, -1])
    assert np.array_equal(np.diag(pauli_matrix("IZ")).real, [1, -1, 1, -1])


def test_label_and_code_round_trip():
    p = PauliString.from_label("XZI")
    assert p.code == 1 * 16 + 3 * 4 + 0
    assert p.label == "XZI" and p.weight == 2
    assert code_label(p.code, 3) == "XZI"
    assert PauliString.from_letters(p.letters) == p


def test_out_of_range_code():
    with pytest.raises(ValueError):
        PauliString(1, 4)


@given(st.integers(1, 3), st.data())
def test_orthogonality(n, data):
    k = data.draw(st.integers(0, 4**n - 1))
    l = data.draw(st.integers(0, 4**n - 1))
    tr = np.trace(pauli_matrix(PauliString(n, k)) @ pauli_matrix(PauliString(n, l)))
    assert tr == (2**n if k == l else 0)


def test_weights_match_labels():
    w = pauli_weights(3)
    assert all(w[c] == sum(ch != "I" for ch in code_label(c, 3)) for c in range(64))


def test_z_string_codes():
    assert code_label(z_string_code(0b101, 3), 3) == "ZIZ"
    assert code_label(z_string_code(0, 3), 3) == "III"


def test_codes_up_to_weight_z_and_zz():
    codes = codes_up_to_weight(3, 2, "Z")
    assert [code_label(c, 3) for c in codes] == ["III", "IIZ", "IZI", "ZII", "IZZ", "ZIZ", "ZZI"]
    # all strings of weight <= 1 over XYZ on 2 qubits: 1 + 2*3
    assert len(codes_up_to_weight(2, 1)) == 7


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fast_expectations_match_naive(rng, n):
    rho = random_density(rng, 2**n)
    assert np.allclose(pauli_expectations(rho), naive_expectations(rho, n).real, atol=1e-13)


def test_pure_expectations_match_density_route(rng):
    psis = np.array([random_pure(rng, 8) for _ in range(5)])
    rhos = np.einsum("ia,ib->iab", psis, psis.conj())
    assert np.allclose(pure_pauli_expectations(psis), pauli_expectations(rhos), atol=1e-14)


def test_keep_complex_exposes_imaginary_part():
    m = np.array([[0, 1], [0, 0]], dtype=complex)  # not Hermitian
    c = pauli_expectations(m, keep_complex=True)
    assert np.abs(c.imag).max() > 0.5


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_pauli_sum_inverts_expectations(seed, n):
    h = random_hermitian(np.random.default_rng(seed), 2**n)
    c = pauli_expectations(h) / 2**n
    assert np.allclose(pauli_sum(c), h, atol=1e-12)
