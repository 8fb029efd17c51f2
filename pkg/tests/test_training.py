from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density, random_pure
from qrck.errors import DimensionMismatch, NotOrthogonal
from qrck.pauli import SIGMA, pauli_matrix
from qrck.quantum import Encoding, EncodingSpec, QuantumState, ReservoirSpec, qelm_states, reservoir_unitary
from qrck.training import (
    DualSolution,
    ObservableModel,
    StateStack,
    classify,
    cross_kernel,
    dual_solve,
    dual_to_primal_weights,
    feature_matrix,
    fit_kernel,
    fit_primal,
    gram,
    monomial_expand,
    optimal_observable,
    pauli_feature_matrix,
    predict,
    primal_solve,
    readout_dimension,
    training_loss,
)


def qelm_data(rng, n, p, scheme=Encoding.ROTATIONAL_Y, unitary=True):
    spec = ReservoirSpec(n, 0, EncodingSpec(scheme, n), 1.0, 1.0, 1.0, washout=0)
    u = reservoir_unitary(spec) if unitary else None
    return lambda count: StateStack(qelm_states(rng.uniform(0, 1, (count, n)), spec, u), True)


def test_gram_examples():
    psi = np.array([1.0, 0.0], dtype=complex)
    assert np.allclose(gram(np.stack([psi, psi])), [[1, 1], [1, 1]])
    k = gram(np.stack([psi, np.array([0, 1], dtype=complex)]))
    assert k[0, 1] == 0
    spec = ReservoirSpec(1, 0, EncodingSpec(Encoding.ROTATIONAL_Y, 1), washout=0)
    s = qelm_states(np.array([[0.25], [0.0]]), spec)
    assert np.isclose(gram(s)[0, 1], 0.5, atol=1e-15)


def test_cross_kernel_pure_mixed_agree(rng):
    psis = np.array([random_pure(rng, 4) for _ in range(3)])
    rhos = np.einsum("ia,ib->iab", psis, psis.conj())
    mixed = np.array([random_density(rng, 4) for _ in range(2)])
    pp = cross_kernel(StateStack(psis, True), StateStack(psis, True))
    mm = cross_kernel(StateStack(rhos, False), StateStack(rhos, False))
    assert np.allclose(pp, mm, atol=1e-14)
    pm = cross_kernel(StateStack(psis, True), StateStack(mixed, False))
    direct = np.array([[np.trace(a @ b).real for b in mixed] for a in rhos])
    assert np.allclose(pm, direct, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_gram_is_psd(seed):
    rng = np.random.default_rng(seed)
    k = gram(qelm_data(rng, 2, 20)(20))
    w = np.linalg.eigvalsh(k)
    assert w[0] >= -1e-8 * w[-1]


def test_dual_solve_examples(rng):
    y = rng.standard_normal((4, 2))
    sol = dual_solve(np.eye(4), y, 1e-12)
    assert np.allclose(sol.alpha, y / (1 + 1e-12))
    assert np.allclose(dual_solve(np.array([[1.0]]), np.array([2.0]), 1.0).alpha, [[1.0]])
    k = gram(qelm_data(rng, 3, 30)(30))
    y = rng.standard_normal(30)
    sol = dual_solve(k, y, 1e-6)
    res = (k + 1e-6 * np.eye(30)) @ sol.alpha[:, 0] - y
    assert np.linalg.norm(res) / np.linalg.norm(y) <= 1e-8


def test_optimal_observable_examples(rng):
    psi = random_pure(rng, 4)
    s = StateStack(psi[None], True)
    assert np.allclose(optimal_observable(s, DualSolution(np.ones((1, 1)), 1.0))[0], np.outer(psi, psi.conj()))
    assert not optimal_observable(s, DualSolution(np.zeros((1, 1)), 1.0)).any()


def test_observable_matches_kernel_sum(rng):
    make = qelm_data(rng, 3, 40)
    train, test = make(40), make(20)
    y = rng.standard_normal((40, 2))
    model = fit_kernel(train, y, 1e-4)
    m = optimal_observable(train, model.solution)
    # direct double sum sum_i alpha_i tr(rho_i rho)
    direct = np.array(
        [[sum(model.solution.alpha[i, c] * abs(np.vdot(train.data[i], x)) ** 2 for i in range(40)) for c in range(2)] for x in test.data]
    )
    assert np.allclose(ObservableModel(m).predict(test), direct, atol=1e-10)
    assert np.allclose(model.predict(test), direct, atol=1e-10)


def test_feature_matrix_examples(rng):
    s = qelm_data(rng, 2, 5, unitary=False)(5)
    assert np.allclose(feature_matrix(s, [np.eye(4)])[:, 0], 1)
    assert np.allclose(feature_matrix(s, [pauli_matrix("YZ"), pauli_matrix("XY")]), 0, atol=1e-15)


def test_complete_basis_row_norms(rng):
    rhos = np.array([random_density(rng, 4, rank=2) for _ in range(6)])
    phi = pauli_feature_matrix(StateStack(rhos, False))
    purity = np.einsum("iab,iba->i", rhos, rhos).real
    assert np.allclose((phi**2).sum(axis=1), 4 * purity)


def test_monomial_expand_examples():
    assert np.allclose(monomial_expand(np.array([2.0, 3.0]), 2), [2, 3, 4, 6, 9])
    v = np.array([0.1, 0.2, 0.3])
    assert np.array_equal(monomial_expand(v, 1), v)
    assert readout_dimension(3, 2) == 9 and len(monomial_expand(v, 2)) == 9


def test_primal_identity_features():
    y = np.array([[1.0], [-2.0], [3.0]])
    assert np.allclose(primal_solve(np.eye(3), y, 1e-12), y)


def test_primal_duplicate_columns_share_weight(rng):
    x = rng.standard_normal(10)
    w = primal_solve(np.column_stack([x, x]), 3 * x, 0.1)
    assert np.isfinite(w).all() and np.isclose(w[0, 0], w[1, 0])
    # closed form: both weights equal 3 s / (2 s + lambda), s = x.x
    s = x @ x
    assert np.isclose(w[0, 0], 3 * s / (2 * s + 0.1))


@pytest.mark.parametrize("n,p,lam", [(2, 10, 1e-6), (2, 40, 1e-2), (3, 10, 1e-2), (3, 40, 1e-6)])
def test_complete_pauli_primal_equals_dual(rng, n, p, lam):
    make = qelm_data(rng, n, p)
    train, test = make(p), make(50)
    y = rng.standard_normal((p, 2))
    dual = fit_kernel(train, y, lam).predict(test)
    primal = fit_primal(train, y, list(range(4**n)), lam).predict(test)
    assert np.max(np.abs(dual - primal)) <= 1e-8


def test_dual_to_primal_reconstructs_observable(rng):
    train = qelm_data(rng, 2, 15)(15)
    sol = dual_solve(gram(train), rng.standard_normal(15), 1e-3)
    m = optimal_observable(train, sol)[0]
    ops = [pauli_matrix(f"{a}{b}") for a in "IXYZ" for b in "IXYZ"]
    w = dual_to_primal_weights(sol, train, ops, orthonormal=True)
    recon = np.tensordot(w[:, 0], np.array(ops), axes=1)
    assert np.linalg.norm(recon - m) / np.linalg.norm(m) <= 1e-8
    assert np.allclose(dual_to_primal_weights(sol, train, ops), w, atol=1e-10)
    # self-projection: operator set {M*} gets weight one
    assert np.isclose(dual_to_primal_weights(sol, train, [m])[0, 0], 1.0)


def test_dual_to_primal_redundant_pair_splits_weight(rng):
    train = qelm_data(rng, 1, 6)(6)
    sol = dual_solve(gram(train), rng.standard_normal(6), 1e-3)
    z = SIGMA[3]
    w = dual_to_primal_weights(sol, train, [z, z])
    single = dual_to_primal_weights(sol, train, [z])
    assert np.allclose(w[:, 0], single[0, 0] / 2)
    with pytest.raises(NotOrthogonal):
        dual_to_primal_weights(sol, train, [z, z], orthonormal=True)


def test_predict_interpolates_training_points(rng):
    train = qelm_data(rng, 3, 12)(12)
    y = rng.standard_normal(12)
    model = fit_kernel(train, y, 1e-12)
    assert np.allclose(model.predict(train)[:, 0], y, atol=1e-6)
    assert not ObservableModel(np.zeros((1, 8, 8))).predict(train).any()


def test_predict_single_state(rng):
    train = qelm_data(rng, 1, 5)(5)
    model = fit_kernel(train, rng.standard_normal(5), 1e-3)
    out = predict(model, QuantumState.pure(train.data[0]))
    assert out.shape == (1,)


def test_classify_rules():
    assert classify([0.1, 0.9]) == 1
    assert classify([0.5, 0.5]) == 0
    assert list(classify(np.array([[1, 0], [0, 1]]))) == [0, 1]
    with pytest.raises(ValueError):
        classify([1.0])


def test_one_hot_interpolation_recovers_label(rng):
    train = qelm_data(rng, 3, 10)(10)
    labels = np.arange(10) % 3
    y = -np.ones((10, 3))
    y[np.arange(10), labels] = 1
    model = fit_kernel(train, y, 1e-10)
    assert np.array_equal(classify(model.predict(train)), labels)


def test_representer_orthogonal_perturbation(rng):
    train = qelm_data(rng, 3, 6)(6)
    sol = dual_solve(gram(train), rng.standard_normal(6), 1e-3)
    m = optimal_observable(train, sol)[0]
    # random Hermitian made HS-orthogonal to every training state
    a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    h = (a + a.conj().T) / 2
    basis = train.densities().reshape(6, -1)
    q, _ = np.linalg.qr(basis.T)
    flat = h.reshape(-1)
    perp = (flat - q @ (q.conj().T @ flat)).reshape(8, 8)
    perp = (perp + perp.conj().T) / 2
    assert np.max(np.abs(basis.conj() @ perp.reshape(-1))) < 1e-10
    base = ObservableModel(m[None]).predict(train)
    moved = ObservableModel((m + perp)[None]).predict(train)
    assert np.allclose(base, moved, atol=1e-10)


def test_training_loss_monotone_in_ridge(rng):
    train = qelm_data(rng, 2, 25)(25)
    k = gram(train)
    y = rng.standard_normal(25)
    losses = [training_loss(k, dual_solve(k, y, lam).alpha, y) for lam in np.logspace(-8, 1, 10)]
    # the loss saturates at the projection residual for tiny ridge; allow solver jitter there
    assert all(b >= a * (1 - 1e-8) for a, b in zip(losses, losses[1:]))


def test_multiclass_equals_independent_channels(rng):
    train = qelm_data(rng, 2, 20)(20)
    k = gram(train)
    y = rng.standard_normal((20, 3))
    joint = dual_solve(k, y, 1e-3).alpha
    for c in range(3):
        assert np.array_equal(joint[:, c], dual_solve(k, y[:, c], 1e-3).alpha[:, 0])


def test_dimension_checks(rng):
    train = qelm_data(rng, 2, 5)(5)
    with pytest.raises(DimensionMismatch):
        ObservableModel(np.zeros((1, 2, 2))).predict(train)
    with pytest.raises(DimensionMismatch):
        primal_solve(np.ones((3, 2)), np.ones(4), 1.0)
