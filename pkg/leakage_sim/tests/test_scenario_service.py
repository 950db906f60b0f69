from __future__ import annotations

import math

import numpy as np
import pytest

from ..circuits import ANCILLA, DATA, LduKind, build_ldu, build_state_prep, build_teleport_readout
from ..config import NoiseModel, RunConfig
from ..gates import rotation, rz
from ..qstate import SiteLevel
from ..services.scenario_service import ScenarioService, deviation_bound, list_scenarios
from ..services.scenarios import ScenarioContext, lost_partner_correction, ramsey_phases, scenario_library
from ..utils.io import read_results, read_shot_log

SCENARIOS = {
    "loss_truth_table",
    "input_state_sweep",
    "ramsey",
    "anti_trapping",
    "hyperfine_leakage",
    "teleport",
    "bell_decay",
    "ancilla_loss",
    "swap_refill",
    "rydberg_leakage",
}


def build_config(**overrides) -> RunConfig:
    settings = {
        "scenario": "loss_truth_table",
        "shots": 200,
        "seed": 5,
        "engine": "trajectory",
        "workers": 2,
        "noise": NoiseModel(),
    }
    settings.update(overrides)
    return RunConfig(**settings)


def test_library_lists_every_scenario():
    assert set(list_scenarios()) == SCENARIOS
    assert all(summary for summary in list_scenarios().values())


def test_unknown_scenario_is_a_value_error():
    service = ScenarioService(build_config(scenario="tomography"))
    with pytest.raises(ValueError, match="known scenarios"):
        service.run()


def test_deviation_bound_has_a_granularity_floor():
    assert deviation_bound(0.0, 100) == pytest.approx(0.01)
    assert deviation_bound(0.5, 100) == pytest.approx(4 * 0.05 + 0.01)


def test_trajectory_run_writes_results_and_shot_log(tmp_path):
    config = build_config(output=tmp_path / "out" / "results.json", shot_log=tmp_path / "shots.tsv")

    document = ScenarioService(config).run()

    result = document.scenario("loss_truth_table")
    assert result.engine == "trajectory"
    assert result.counts["present"].total == 200
    assert 0.8 < result.metrics["present_accuracy"] <= 1.0

    loaded = read_results(config.output)
    assert loaded.scenario("loss_truth_table").metrics == result.metrics
    assert loaded.config["seed"] == 5
    assert len(read_shot_log(config.shot_log)) == 400


def test_same_seed_reproduces_the_metrics():
    first = ScenarioService(build_config()).run_trajectories()
    second = ScenarioService(build_config(workers=1)).run_trajectories()
    assert first.scenarios[0].metrics == second.scenarios[0].metrics


def test_density_run_scales_expected_counts_by_shots():
    document = ScenarioService(build_config(engine="dm", shots=1000)).run()

    result = document.scenarios[0]
    assert result.engine == "density"
    assert result.counts["present"].total == pytest.approx(1000.0)
    assert 0.0 < result.metrics["exclusion_rate"] < 0.5


def test_both_engines_attach_a_comparison():
    document = ScenarioService(build_config(engine="both", shots=300)).run()

    sampled, exact = document.scenarios
    assert (sampled.engine, exact.engine) == ("trajectory", "density")
    assert sampled.comparisons
    assert not exact.comparisons
    assert {item.experiment for item in sampled.comparisons} == {"present", "absent"}


def test_compare_engines_only_uses_compared_experiments():
    service = ScenarioService(build_config(scenario="teleport", shots=100))
    experiments = {item.experiment for item in service.compare_engines()}
    assert experiments == {"transfer/0", "transfer/1", "data_lost"}


def test_lost_ancilla_leaves_standard_unit_data_recoverable():
    config = build_config(scenario="ancilla_loss", engine="density", noise=NoiseModel.noiseless())

    metrics = ScenarioService(config).run().scenarios[0].metrics

    assert metrics["standard_min_fidelity"] == pytest.approx(1.0, abs=1e-9)
    assert metrics["swap_max_fidelity"] < 1.0

    correction = lost_partner_correction(build_ldu(LduKind.STANDARD_NATIVE), lost_site=ANCILLA, kept_site=DATA)
    expected = rotation(math.pi, 0.0) @ rz(math.pi)
    overlap = abs(np.trace(expected.conj().T @ correction[:2, :2])) / 2
    assert overlap == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(correction[2:, 2:], np.eye(4), atol=1e-12)


def test_teleported_fringes_start_from_prepared_atoms():
    context = ScenarioContext(model=NoiseModel(), shots=10, seed=5, engine="density")
    experiments = scenario_library()["teleport"].experiments(context)
    fringes = [item for item in experiments if item.label.startswith("fringe/")]

    assert fringes
    for item in fringes:
        target, index = item.label.split("/")[1:]
        unprepared = build_teleport_readout(float(ramsey_phases()[int(index)]), leading_pulse=False)
        assert item.initial_vectors is None
        assert item.prepare == (SiteLevel.Q0, SiteLevel.Q0)
        assert item.circuit.gates() == build_state_prep(target).gates() + unprepared.gates()


def test_anti_trap_time_is_recovered_from_exact_survival():
    config = build_config(scenario="anti_trapping", engine="density")

    metrics = ScenarioService(config).run().scenarios[0].metrics

    assert metrics["antitrap_time"] == pytest.approx(23e-6, rel=0.05)
