from __future__ import annotations

import math

import numpy as np
import pytest

from ..circuits import LduKind, build_ldu
from ..gates import (
    PAULI_X,
    CanonicalCNOT,
    CanonicalCZ,
    CanonicalH,
    CanonicalX,
    Entangle,
    FeedbackZ,
    GlobalR,
    LocalZ,
    PhaseFrame,
    RydbergPi,
    VirtualZ,
    apply_gate,
    check_lost_conserved,
    circuit_unitary,
    matrix_of,
    resolve_frame,
    rotation,
    rzz,
)
from ..qstate import (
    SiteLevel,
    basis_vector,
    is_unitary,
    level_probabilities,
    new_register,
    product_state,
    qubit_vector,
    state_fidelity,
)


def _run(state, gates):
    frame = PhaseFrame.zeros(state.n)
    for gate in gates:
        state, frame = apply_gate(state, gate, frame)
    return resolve_frame(state, frame)


@pytest.mark.parametrize("theta", [0.3, math.pi / 2, -1.1, math.pi])
def test_virtual_z_matches_light_shift_before_a_global_pulse(theta):
    psi = product_state([qubit_vector(0.6, 0.8j)])

    virtual = _run(psi, [VirtualZ(theta, 0), GlobalR(math.pi / 2, 0.4)])
    physical = _run(psi, [LocalZ(theta, 0), GlobalR(math.pi / 2, 0.4)])

    assert state_fidelity(virtual, physical) == pytest.approx(1.0, abs=1e-12)


def test_global_pi_pulse_leaves_leaked_levels_alone():
    state = product_state([basis_vector(SiteLevel.L3), basis_vector(SiteLevel.Q0)])
    out = _run(state, [GlobalR(math.pi, 0.0)])

    probs = level_probabilities(out)
    assert probs[0, SiteLevel.L3] == pytest.approx(1.0)
    assert probs[1, SiteLevel.Q1] == pytest.approx(1.0)


def test_rydberg_pi_swaps_q1_and_rydberg():
    out = _run(new_register([SiteLevel.Q1]), [RydbergPi(0)])
    assert level_probabilities(out)[0, SiteLevel.RYD] == pytest.approx(1.0)

    out = _run(new_register([SiteLevel.Q0]), [RydbergPi(0)])
    assert level_probabilities(out)[0, SiteLevel.Q0] == pytest.approx(1.0)


def test_cnot_uses_first_site_as_control():
    state = new_register([SiteLevel.Q1, SiteLevel.Q0])
    out = _run(state, [CanonicalCNOT(0, 1)])
    assert level_probabilities(out)[1, SiteLevel.Q1] == pytest.approx(1.0)


def test_entangle_is_unitary_in_any_frame():
    frame = PhaseFrame((0.3, -1.2))
    matrix = matrix_of(Entangle(math.pi / 2, (0, 1)), frame)
    assert is_unitary(matrix)


def test_echoed_entangle_pair_produces_a_bell_state():
    gates = [GlobalR(math.pi / 2), Entangle(math.pi / 2, (0, 1)), GlobalR(math.pi / 2)]
    unitary = circuit_unitary(gates, 2)
    column = unitary[:, 0]

    assert abs(column[0]) ** 2 == pytest.approx(0.5)
    assert abs(column[1 + 6]) ** 2 == pytest.approx(0.5)


def test_feedback_z_needs_a_recorded_bit():
    state = new_register([SiteLevel.Q0, SiteLevel.Q0])
    frame = PhaseFrame.zeros(2)
    with pytest.raises(ValueError):
        apply_gate(state, FeedbackZ(1, 0), frame)

    _, advanced = apply_gate(state, FeedbackZ(1, 0), frame, classical_bits={0: 1})
    assert advanced.offsets == (0.0, math.pi)


def test_circuit_unitary_rejects_feedback():
    with pytest.raises(ValueError):
        circuit_unitary([FeedbackZ(1, 0)], 2)


def test_pair_gate_needs_distinct_sites():
    with pytest.raises(ValueError):
        matrix_of(Entangle(math.pi / 2, (1, 1)), PhaseFrame.zeros(2))


def test_global_pulse_conserves_lost_population():
    state = product_state([basis_vector(SiteLevel.LOST), qubit_vector(1, 1)])
    out = _run(state, [GlobalR(math.pi / 3, 1.0), Entangle(math.pi / 2, (0, 1))])
    assert level_probabilities(out)[0, SiteLevel.LOST] == pytest.approx(1.0)
    assert np.isclose(out.norm(), 1.0)


QUBIT_BLOCK = [0, 1, 6, 7]


def _same_up_to_phase(a, b):
    overlap = abs(np.trace(a.conj().T @ b)) / a.shape[0]
    return overlap == pytest.approx(1.0, abs=1e-12)


def test_entangle_block_is_an_echoed_zz_rotation():
    rng = np.random.default_rng(11)
    for theta, phi in rng.uniform(-math.pi, math.pi, size=(20, 2)):
        matrix = matrix_of(Entangle(theta, (0, 1), phi), PhaseFrame.zeros(2))
        block = matrix[np.ix_(QUBIT_BLOCK, QUBIT_BLOCK)]
        echo = rotation(math.pi, phi)
        expected = np.kron(echo, echo) @ rzz(theta)
        assert np.max(np.abs(block - expected)) < 1e-12


@pytest.mark.parametrize("theta", [0.2, math.pi / 2, -2.3])
def test_zz_rotation_commutes_with_the_echo(theta):
    flip = np.kron(PAULI_X, PAULI_X)
    assert np.allclose(flip @ rzz(theta) @ flip, rzz(theta), atol=1e-12)


def test_lost_partner_still_receives_the_echo_pulse():
    state = product_state([basis_vector(SiteLevel.Q0), basis_vector(SiteLevel.LOST)])
    out, _ = apply_gate(state, Entangle(math.pi / 2, (0, 1)), PhaseFrame.zeros(2), strict=True)

    probs = level_probabilities(out)
    assert probs[0, SiteLevel.Q1] == pytest.approx(1.0)
    assert probs[1, SiteLevel.LOST] == pytest.approx(1.0)


def test_hardware_optimised_unit_matches_native_on_qubits():
    native = build_ldu(LduKind.STANDARD_NATIVE)
    optimised = build_ldu(LduKind.STANDARD_HW_OPT)

    a = circuit_unitary(native.gates(), 2)[np.ix_(QUBIT_BLOCK, QUBIT_BLOCK)]
    b = circuit_unitary(optimised.gates(), 2)[np.ix_(QUBIT_BLOCK, QUBIT_BLOCK)]
    assert _same_up_to_phase(a, b)


@pytest.mark.parametrize(
    "gate",
    [
        GlobalR(math.pi / 2, 0.3),
        LocalZ(1.1, 0),
        Entangle(math.pi / 2, (0, 1)),
        CanonicalCNOT(0, 1),
        CanonicalCZ((0, 1)),
        CanonicalH(0),
        CanonicalX(1),
        RydbergPi(0),
    ],
)
def test_no_gate_moves_lost_population(gate):
    mixed = np.array([1, 1, 1, 1, 1, 1], dtype=complex) / math.sqrt(6)
    state = product_state([mixed, basis_vector(SiteLevel.LOST)])
    out, _ = apply_gate(state, gate, PhaseFrame((0.4, -0.9)), strict=True)

    before, after = level_probabilities(state), level_probabilities(out)
    for site in (0, 1):
        assert after[site, SiteLevel.LOST] == pytest.approx(before[site, SiteLevel.LOST], abs=1e-12)


def test_strict_check_reports_lost_population_changes():
    present = new_register([SiteLevel.Q0])
    lost = new_register([SiteLevel.LOST])
    with pytest.raises(RuntimeError, match="LOST"):
        check_lost_conserved(lost, present, GlobalR(math.pi))
