from __future__ import annotations

import math

import numpy as np
import pytest

from ..circuits import (
    ANCILLA,
    DATA,
    CircuitBuilder,
    CircuitSpec,
    LduKind,
    Measure,
    NoiseHook,
    PREP_TARGETS,
    build_bell_fidelity,
    build_ldu,
    build_prepared_ldu,
    build_state_prep,
    check_process_matrix,
    extract_process_matrix,
    format_circuit,
    parse_circuit,
    target_vector,
)
from ..gates import Entangle, FeedbackZ, GlobalR, circuit_unitary
from ..measure import Outcome
from ..qstate import RegisterState, SiteLevel, StateMode, apply_operator, new_register, partial_trace, state_fidelity, to_density

STANDARD_KINDS = [kind for kind in LduKind if kind.is_standard]


@pytest.mark.parametrize("kind", STANDARD_KINDS, ids=lambda kind: kind.value)
def test_standard_units_have_identity_and_flip_blocks(kind):
    check = check_process_matrix(extract_process_matrix(kind))
    assert check.identity_block
    assert check.flip_block
    assert check.off_blocks_zero


def test_process_matrix_is_only_defined_for_standard_units():
    with pytest.raises(ValueError):
        extract_process_matrix(LduKind.SWAP)


def test_entangle_without_its_noise_hooks_is_rejected():
    roles = CircuitBuilder("x").roles
    with pytest.raises(ValueError):
        CircuitSpec("bare", roles, (Entangle(math.pi / 2, (0, 1)),))


def test_feedback_must_follow_the_measurement_it_reads():
    roles = CircuitBuilder("x").roles
    with pytest.raises(ValueError):
        CircuitSpec("early", roles, (FeedbackZ(ANCILLA, DATA), Measure(DATA)))


def test_unknown_hook_and_out_of_range_site_are_rejected():
    roles = CircuitBuilder("x").roles
    with pytest.raises(ValueError):
        CircuitSpec("hook", roles, (NoiseHook("cosmic_ray", (0,)),))
    with pytest.raises(ValueError):
        CircuitSpec("site", roles, (Measure(2),))


def test_builder_inserts_gate_noise_after_each_entangling_gate():
    circuit = CircuitBuilder("pair").entangle(math.pi / 2).build()
    kinds = [step.kind for step in circuit.steps if isinstance(step, NoiseHook)]
    assert kinds[:3] == ["depolarize2", "gate_loss", "gate_loss"]
    assert "rydberg_propagation" in kinds


def test_bell_sequence_needs_an_odd_gate_count():
    with pytest.raises(ValueError):
        build_bell_fidelity(2)
    assert len([g for g in build_bell_fidelity(3).gates() if isinstance(g, Entangle)]) == 3


@pytest.mark.parametrize("target", PREP_TARGETS)
def test_state_preparation_reaches_each_axis(target):
    circuit = build_state_prep(target)
    unitary = circuit_unitary(circuit.gates(), circuit.n, circuit.roles)
    state = to_density(apply_operator(new_register([SiteLevel.Q0, SiteLevel.Q0]), unitary, [0, 1]))

    data = partial_trace(state, [DATA])
    ket = RegisterState(target_vector(target), StateMode.PURE, data.roles)
    assert state_fidelity(ket, data) == pytest.approx(1.0, abs=1e-12)


def test_prepared_unit_only_absorbs_native_standard_pulses():
    with pytest.raises(ValueError):
        build_prepared_ldu(LduKind.SWAP, "+x")
    circuit = build_prepared_ldu(LduKind.STANDARD_NATIVE, "+x", measure_data=True)
    assert circuit.measured_sites() == [DATA, ANCILLA]


def test_unit_readouts_follow_their_semantics():
    assert build_ldu(LduKind.STANDARD_NATIVE).measured_sites() == [ANCILLA]
    assert build_ldu(LduKind.SWAP).semantics.leak_outcome is Outcome.NEITHER
    teleport = build_ldu(LduKind.TELEPORT_NATIVE)
    assert teleport.measured_sites() == [DATA]
    assert teleport.semantics.information_site == ANCILLA
    assert teleport.semantics.refill_state == "+x"


@pytest.mark.parametrize("kind", list(LduKind), ids=lambda kind: kind.value)
def test_text_form_reproduces_the_circuit(kind):
    circuit = build_ldu(kind)
    assert parse_circuit(format_circuit(circuit)) == circuit


def test_text_form_requires_its_schema_line():
    with pytest.raises(ValueError):
        parse_circuit("GlobalR theta=1.0 phi=0.0\n")


def test_text_form_rejects_unknown_steps():
    text = format_circuit(CircuitBuilder("x").gate(GlobalR(math.pi)).build())
    with pytest.raises(ValueError):
        parse_circuit(text + "Teleport site=0\n")


def test_target_vector_rejects_unknown_names():
    with pytest.raises(ValueError):
        target_vector("+z")
    assert np.allclose(target_vector("1")[:2], [0, 1])
