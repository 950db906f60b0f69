from __future__ import annotations

import numpy as np
import pytest

from ..gates import PAULI_X, embed_qubit
from ..qstate import (
    RegisterState,
    SiteLevel,
    StateMode,
    apply_kraus,
    apply_operator,
    apply_unitary,
    basis_vector,
    jump_weights,
    kraus_effects,
    level_probabilities,
    new_register,
    partial_trace,
    product_state,
    qubit_vector,
    state_fidelity,
    tensor,
    to_density,
)


def test_register_index_is_little_endian_over_sites():
    state = new_register([SiteLevel.Q1, SiteLevel.Q0])
    assert state.data[1] == pytest.approx(1.0)

    state = new_register([SiteLevel.Q0, SiteLevel.Q1])
    assert state.data[6] == pytest.approx(1.0)


def test_operator_on_second_site_moves_only_that_site():
    state = new_register([SiteLevel.Q0, SiteLevel.Q0])
    flipped = apply_operator(state, embed_qubit(PAULI_X), [1])

    probs = level_probabilities(flipped)
    assert probs[0, SiteLevel.Q0] == pytest.approx(1.0)
    assert probs[1, SiteLevel.Q1] == pytest.approx(1.0)


def test_pure_and_density_modes_agree_after_an_operator():
    psi = product_state([qubit_vector(1, 1j), basis_vector(SiteLevel.Q0)])
    op = np.kron(embed_qubit(PAULI_X), embed_qubit(PAULI_X))

    pure = apply_operator(psi, op, [0, 1])
    dense = apply_operator(to_density(psi), op, [0, 1])

    assert np.allclose(to_density(pure).data, dense.data)


def test_repeated_site_is_rejected():
    state = new_register([SiteLevel.Q0, SiteLevel.Q0])
    with pytest.raises(ValueError):
        apply_operator(state, np.eye(36), [0, 0])


def test_non_unitary_matrix_is_rejected():
    state = new_register([SiteLevel.Q0])
    with pytest.raises(ValueError):
        apply_unitary(state, 2.0 * np.eye(6), [0])


def test_partial_trace_needs_density_mode():
    state = new_register([SiteLevel.Q0, SiteLevel.Q1])
    with pytest.raises(ValueError):
        partial_trace(state, [0])


def test_partial_trace_of_product_returns_each_factor():
    plus = qubit_vector(1, 1)
    state = to_density(product_state([plus, basis_vector(SiteLevel.LOST)]))

    data = partial_trace(state, [0])
    ancilla = partial_trace(state, [1])

    assert np.allclose(data.data, np.outer(plus, plus.conj()))
    assert ancilla.data[5, 5] == pytest.approx(1.0)
    assert data.n == ancilla.n == 1


def test_tensor_puts_first_argument_on_lower_sites():
    joint = tensor(new_register([SiteLevel.Q1]), new_register([SiteLevel.L3]))
    probs = level_probabilities(joint)

    assert probs[0, SiteLevel.Q1] == pytest.approx(1.0)
    assert probs[1, SiteLevel.L3] == pytest.approx(1.0)


def test_fidelity_between_pure_and_mixed_states():
    zero = new_register([SiteLevel.Q0])
    one = new_register([SiteLevel.Q1])
    mixed = RegisterState(0.5 * (to_density(zero).data + to_density(one).data), StateMode.DENSITY, zero.roles)

    assert state_fidelity(zero, zero) == pytest.approx(1.0)
    assert state_fidelity(zero, one) == pytest.approx(0.0)
    assert state_fidelity(zero, mixed) == pytest.approx(0.5)
    assert state_fidelity(mixed, mixed) == pytest.approx(1.0)


def test_kraus_on_density_preserves_trace():
    state = to_density(new_register([SiteLevel.Q0]))
    kraus = [np.sqrt(0.3) * embed_qubit(PAULI_X), np.sqrt(0.7) * np.eye(6)]

    out = apply_kraus(state, kraus, [0])

    out.check()
    assert level_probabilities(out)[0, SiteLevel.Q1] == pytest.approx(0.3)


def test_sampled_kraus_needs_rng_and_renormalises():
    state = new_register([SiteLevel.Q0])
    kraus = [np.sqrt(0.3) * embed_qubit(PAULI_X), np.sqrt(0.7) * np.eye(6)]

    with pytest.raises(ValueError):
        apply_kraus(state, kraus, [0])
    out = apply_kraus(state, kraus, [0], rng=np.random.default_rng(3))
    assert out.norm() == pytest.approx(1.0)


def test_check_flags_unnormalised_state():
    state = RegisterState(2.0 * basis_vector(SiteLevel.Q0), StateMode.PURE, new_register([SiteLevel.Q0]).roles)
    with pytest.raises(ValueError):
        state.check()


def test_bell_state_marginals_are_maximally_mixed():
    bell = np.zeros(36, dtype=complex)
    bell[0] = bell[1 + 6] = 1 / np.sqrt(2)
    rho = to_density(RegisterState(bell, StateMode.PURE, new_register([SiteLevel.Q0] * 2).roles))

    for site in (0, 1):
        reduced = partial_trace(rho, [site]).data
        expected = np.zeros((6, 6))
        expected[0, 0] = expected[1, 1] = 0.5
        assert np.allclose(reduced, expected, atol=1e-12)


def test_jump_weights_match_the_norm_of_each_branch():
    rng = np.random.default_rng(4)
    psi = rng.normal(size=216) + 1j * rng.normal(size=216)
    state = RegisterState(psi / np.linalg.norm(psi), StateMode.PURE, new_register([SiteLevel.Q0] * 3).roles)
    ops = [rng.normal(size=(36, 36)) + 1j * rng.normal(size=(36, 36)) for _ in range(3)]

    for sites in ([2, 0], [0, 1], [1, 2]):
        weights = jump_weights(state, kraus_effects(ops), sites)
        expected = [apply_operator(state, op, sites).norm() for op in ops]
        assert np.allclose(weights, expected, rtol=1e-10)
