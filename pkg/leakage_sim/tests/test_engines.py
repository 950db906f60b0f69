from __future__ import annotations

import pytest

from ..circuits import ANCILLA, DATA, CircuitBuilder, LduKind, Measure, build_ldu
from ..config import NoiseModel
from ..engines import DensityEngine, Experiment, TrajectoryEngine, joint_density
from ..measure import Outcome
from ..qstate import SiteLevel
from ..services.scenario_service import compare_outputs
from ..services.scenarios import with_presence_image

ZERO, ONE, NEITHER = Outcome.ZERO, Outcome.ONE, Outcome.NEITHER


def _truth_table(level: SiteLevel) -> Experiment:
    circuit = with_presence_image(build_ldu(LduKind.STANDARD_NATIVE, measure_data=True))
    return Experiment(level.name.lower(), circuit, (level, SiteLevel.Q0))


def _teleport(kind: LduKind, data: SiteLevel) -> Experiment:
    circuit = build_ldu(kind).with_steps([Measure(ANCILLA)])
    return Experiment(f"{kind.value}/{data.name}", circuit, (data, SiteLevel.Q0))


def test_trajectories_do_not_depend_on_worker_count():
    experiment = _truth_table(SiteLevel.Q0)
    serial = TrajectoryEngine(NoiseModel(), seed=3, workers=1, chunk_size=7).run(experiment, 60)
    threaded = TrajectoryEngine(NoiseModel(), seed=3, workers=4, chunk_size=7).run(experiment, 60)

    assert serial.tally == threaded.tally
    assert serial.records == threaded.records
    assert [record.shot for record in threaded.records] == list(range(60))


def test_process_pool_matches_serial_shots():
    experiment = _truth_table(SiteLevel.LOST)
    serial = TrajectoryEngine(NoiseModel(), seed=8, workers=1, chunk_size=10).run(experiment, 40)
    pooled = TrajectoryEngine(NoiseModel(), seed=8, workers=2, chunk_size=10, processes=True).run(experiment, 40)

    assert pooled.tally == serial.tally
    assert pooled.records == serial.records


def test_shot_records_carry_their_seed_path():
    output = TrajectoryEngine(NoiseModel(), seed=11).run(_truth_table(SiteLevel.Q0), 3, experiment_index=2)
    assert [record.seed_path for record in output.records] == [(11, 2, 0), (11, 2, 1), (11, 2, 2)]


def test_trajectory_run_needs_shots():
    with pytest.raises(ValueError):
        TrajectoryEngine(NoiseModel(), seed=0).run(_truth_table(SiteLevel.Q0), 0)


def test_noiseless_unit_flags_only_a_missing_data_atom():
    engine = DensityEngine(NoiseModel.noiseless())

    present = engine.run(_truth_table(SiteLevel.Q0))
    absent = engine.run(_truth_table(SiteLevel.LOST))

    assert present.tally[(ZERO, ZERO)] == pytest.approx(1.0)
    assert absent.tally[(NEITHER, ONE)] == pytest.approx(1.0)


def test_noiseless_trajectories_match_the_truth_table_exactly():
    output = TrajectoryEngine(NoiseModel.noiseless(), seed=1).run(_truth_table(SiteLevel.LOST), 25)
    assert output.tally == {(NEITHER, ONE): 25.0}


def test_canonical_teleport_moves_the_data_bit_to_the_ancilla():
    output = DensityEngine(NoiseModel.noiseless()).run(_teleport(LduKind.TELEPORT_CANONICAL, SiteLevel.Q1))
    assert output.probability(lambda key: key[ANCILLA] is ONE) == pytest.approx(1.0)


def test_teleport_from_a_missing_atom_leaves_an_unbiased_ancilla():
    output = DensityEngine(NoiseModel.noiseless()).run(_teleport(LduKind.TELEPORT_NATIVE, SiteLevel.LOST))

    assert output.probability(lambda key: key[DATA] is NEITHER) == pytest.approx(1.0)
    assert output.probability(lambda key: key[ANCILLA] is ZERO) == pytest.approx(0.5)


def test_density_branches_sum_to_a_normalised_state():
    output = DensityEngine(NoiseModel()).run(_truth_table(SiteLevel.Q0), shots=1000.0)

    assert sum(output.tally.values()) == pytest.approx(1000.0)
    joint_density(output).check(tol=1e-9)


def test_joint_density_needs_density_output():
    output = TrajectoryEngine(NoiseModel(), seed=0).run(_truth_table(SiteLevel.Q0), 2)
    with pytest.raises(ValueError):
        joint_density(output)


def test_density_engine_refuses_large_registers():
    circuit = CircuitBuilder("wide", n=4).build()
    with pytest.raises(ValueError):
        DensityEngine(NoiseModel()).run(Experiment("wide", circuit, (SiteLevel.Q0,) * 4))


def test_experiment_must_prepare_every_site():
    with pytest.raises(ValueError):
        Experiment("short", build_ldu(LduKind.SWAP), (SiteLevel.Q0,))


def test_sampled_frequencies_stay_within_the_bound_of_exact_probabilities():
    experiment = _truth_table(SiteLevel.Q0)
    sampled = TrajectoryEngine(NoiseModel(), seed=21, workers=2).run(experiment, 4000)
    exact = DensityEngine(NoiseModel()).run(experiment, shots=4000.0)

    comparisons = compare_outputs(sampled, exact)

    assert comparisons
    assert all(item.within_bound for item in comparisons)
