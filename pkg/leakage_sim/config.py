import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict, TomlConfigSettingsSource

CALIBRATION_PATH = Path(__file__).resolve().parent / "data" / "calibration.toml"

ENGINE_ALIASES = {"traj": "trajectory", "dm": "density"}


class NoiseModel(BaseModel):
    """Calibrated error parameters of the processor. Times are in seconds, angles in radians."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Gate errors
    f2q: float = Field(default=0.967, description="Two-qubit entangling gate fidelity.")
    p1q_pi: float = Field(default=0.002, description="Error probability of a global pi pulse (scaled by area).")
    local_z_err: float = Field(default=0.02, description="Std. dev. of the light-shift LocalZ over-rotation.")
    eps_area: float = Field(default=0.0, description="Coherent fractional pulse-area error of global rotations.")

    # State preparation and measurement
    eps_prep: float = Field(default=0.005, description="Probability of preparing the other clock state.")
    eps_read: float = Field(default=0.005, description="Probability of a 0 <-> 1 readout misclassification.")
    p_meas_loss: float = Field(default=0.01, description="Probability a detected atom is lost by the image.")

    # Atom loss
    p_loss_gate: float = Field(default=0.013, description="Loss probability per atom per entangling gate.")
    tau_vac: float = Field(default=6.0, description="Background-gas loss time constant.")
    t_settle: float = Field(default=0.4, description="Idle time between the presence image and the circuit.")

    # Rydberg population
    tau_at: float = Field(default=23e-6, description="Anti-trapping 1/e time of a Rydberg atom.")
    tau_ryd: float = Field(default=170e-6, description="Rydberg radiative lifetime.")
    ryd_decay_to_l3: float = Field(default=0.5, description="Fraction of Rydberg decay landing in L3 (rest in L4).")
    p_prop: float = Field(default=0.10, description="Probability a Rydberg atom drags its gate partner to RYD.")
    blockade_phase: float = Field(default=math.pi / 4, description="Z phase on a partner blockaded by RYD.")
    p_l4_dressing: float = Field(default=0.035, description="Probability an L4 atom still dresses its partner.")

    # Hyperfine leakage pulse
    p_hfl_0: float = Field(default=0.955, description="Leak-pulse transfer probability Q0 -> L3.")
    p_hfl_1: float = Field(default=0.957, description="Leak-pulse transfer probability Q1 -> L4.")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        """Every error source switched off; anti-trapping and the leak pulse keep their physics."""
        return cls(
            f2q=1.0,
            p1q_pi=0.0,
            local_z_err=0.0,
            eps_area=0.0,
            eps_prep=0.0,
            eps_read=0.0,
            p_meas_loss=0.0,
            p_loss_gate=0.0,
            tau_vac=math.inf,
            tau_ryd=math.inf,
            p_prop=0.0,
            blockade_phase=0.0,
            p_l4_dressing=0.0,
        )

    def with_overrides(self, overrides: Mapping[str, Any]) -> "NoiseModel":
        unknown = sorted(set(overrides) - set(type(self).model_fields))
        if unknown:
            raise ValueError(f"unknown noise parameter(s): {', '.join(unknown)}")
        data = self.model_dump()
        data.update(overrides)
        return type(self).model_validate(data)

    # ------------------------------------------------------------------
    # Validators
    # ------------------------------------------------------------------
    @field_validator(
        "p1q_pi",
        "eps_prep",
        "eps_read",
        "p_meas_loss",
        "p_loss_gate",
        "ryd_decay_to_l3",
        "p_prop",
        "p_l4_dressing",
        "p_hfl_0",
        "p_hfl_1",
    )
    @classmethod
    def _validate_probability(cls, value: float, info):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{info.field_name} must be between 0 and 1.")
        return value

    @field_validator("tau_vac", "tau_at", "tau_ryd")
    @classmethod
    def _validate_time_constant(cls, value: float, info):
        if math.isnan(value) or value <= 0:
            raise ValueError(f"{info.field_name} must be > 0.")
        return value

    @field_validator("local_z_err", "t_settle")
    @classmethod
    def _validate_non_negative(cls, value: float, info):
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"{info.field_name} must be a finite value >= 0.")
        return value

    @field_validator("blockade_phase", "eps_area")
    @classmethod
    def _validate_finite(cls, value: float, info):
        if not math.isfinite(value):
            raise ValueError(f"{info.field_name} must be finite.")
        return value

    @field_validator("f2q")
    @classmethod
    def _validate_gate_fidelity(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("f2q must be in (0, 1].")
        return value


@lru_cache(maxsize=1)
def load_calibration(path: Path = CALIBRATION_PATH) -> NoiseModel:
    """Frozen calibration shipped with the package (the ``[noise]`` table)."""
    data = TomlConfigSettingsSource(RunConfig, toml_file=path)()
    return NoiseModel.model_validate(data.get("noise", {}))


class RunConfig(BaseSettings):
    """Settings of one simulator run."""

    model_config = SettingsConfigDict(
        env_prefix="LEAKAGE_SIM_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    scenario: str = Field(default="loss_truth_table", description="Scenario name from the library.")
    shots: int = Field(default=2000, description="Trajectory shots per experiment of the scenario.")
    seed: int = Field(default=7, description="Master seed for per-shot random streams.")
    engine: Literal["trajectory", "density", "both"] = Field(default="trajectory", description="Execution engine.")
    workers: int = Field(default=4, description="Parallel workers for trajectory shots.")
    parallelism: Literal["thread", "process"] = Field(
        default="thread", description="Run trajectory chunks on worker threads or worker processes."
    )
    output: Optional[Path] = Field(default=None, description="Where to write the results document.")
    shot_log: Optional[Path] = Field(default=None, description="Where to write raw shot records.")
    noise: NoiseModel = Field(default_factory=load_calibration, description="Noise parameters.")

    @classmethod
    def from_toml(cls, path: Path, **overrides: Any) -> "RunConfig":
        """Load ``scenario``/``shots``/``seed``/``engine`` keys and a ``[noise]`` table."""
        path = Path(path)
        if not path.exists():
            raise ValueError(f"config file {path} does not exist.")
        data: Dict[str, Any] = TomlConfigSettingsSource(cls, toml_file=path)()
        noise_table = data.pop("noise", {}) or {}
        data["noise"] = load_calibration().with_overrides(noise_table)
        data.update(overrides)
        return cls(**data)

    def echo(self) -> Dict[str, Any]:
        """JSON-friendly copy for results documents."""
        payload = self.model_dump(mode="json")
        payload.pop("workers", None)
        payload.pop("parallelism", None)
        return payload

    # ------------------------------------------------------------------
    # Validators
    # ------------------------------------------------------------------
    @field_validator("engine", mode="before")
    @classmethod
    def _normalize_engine(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = value.strip().lower()
            return ENGINE_ALIASES.get(value, value)
        return value

    @field_validator("shots", "workers")
    @classmethod
    def _validate_positive_int(cls, value: int, info):
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1.")
        return value

    @field_validator("seed")
    @classmethod
    def _validate_seed(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer.")
        return value

    @model_validator(mode="after")
    def _validate_relationships(self) -> "RunConfig":
        if self.output is not None and self.shot_log is not None and self.output == self.shot_log:
            raise ValueError("output and shot_log must be different files.")
        return self


run_config = RunConfig()
