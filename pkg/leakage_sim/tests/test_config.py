from __future__ import annotations

import pytest
from pydantic import ValidationError

from ..config import NoiseModel, RunConfig, load_calibration


def test_calibration_file_matches_model_defaults():
    assert load_calibration() == NoiseModel()


def test_noise_overrides_keep_other_parameters():
    model = NoiseModel().with_overrides({"f2q": 0.9, "p_prop": 0.0})
    assert model.f2q == 0.9
    assert model.p_prop == 0.0
    assert model.tau_at == NoiseModel().tau_at


def test_unknown_noise_parameter_is_rejected():
    with pytest.raises(ValueError, match="unknown noise parameter"):
        NoiseModel().with_overrides({"f3q": 0.9})


@pytest.mark.parametrize(
    "overrides",
    [{"f2q": 0.0}, {"eps_read": 1.5}, {"tau_at": -1e-6}, {"local_z_err": -0.1}, {"blockade_phase": float("nan")}],
)
def test_invalid_noise_values_are_rejected(overrides):
    with pytest.raises(ValidationError):
        NoiseModel().with_overrides(overrides)


def test_noise_model_is_frozen():
    with pytest.raises(ValidationError):
        NoiseModel().f2q = 0.5


def test_engine_aliases_are_normalised():
    assert RunConfig(engine="DM").engine == "density"
    assert RunConfig(engine="traj").engine == "trajectory"
    with pytest.raises(ValidationError):
        RunConfig(engine="gpu")


def test_run_settings_validation():
    with pytest.raises(ValidationError):
        RunConfig(shots=0)
    with pytest.raises(ValidationError):
        RunConfig(seed=-1)


def test_output_and_shot_log_must_differ(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig(output=tmp_path / "same", shot_log=tmp_path / "same")


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("LEAKAGE_SIM_SHOTS", "321")
    monkeypatch.setenv("LEAKAGE_SIM_ENGINE", "both")
    config = RunConfig()
    assert config.shots == 321
    assert config.engine == "both"


def test_toml_file_layers_over_the_calibration(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('scenario = "ramsey"\nshots = 50\n\n[noise]\nf2q = 0.95\n', encoding="utf-8")

    config = RunConfig.from_toml(path, seed=99)

    assert (config.scenario, config.shots, config.seed) == ("ramsey", 50, 99)
    assert config.noise.f2q == 0.95
    assert config.noise.p_hfl_0 == load_calibration().p_hfl_0


def test_missing_toml_file_is_a_value_error(tmp_path):
    with pytest.raises(ValueError):
        RunConfig.from_toml(tmp_path / "absent.toml")


def test_echo_leaves_out_worker_settings():
    payload = RunConfig(workers=3, parallelism="process").echo()
    assert "workers" not in payload
    assert "parallelism" not in payload
    assert payload["noise"]["f2q"] == NoiseModel().f2q
