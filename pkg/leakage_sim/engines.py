"""Execution of circuits: sampled pure-state trajectories and exact density branches."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .circuits import CircuitSpec, Hold, LeakPulse, Measure, NoiseHook
from .config import NoiseModel
from .gates import GATE_TYPES, FeedbackZ, PhaseFrame, apply_gate, resolve_frame
from .measure import (
    FeedbackBit,
    Outcome,
    OutcomeKey,
    ShotRecord,
    feedback_bit,
    llsd,
    llsd_branches,
)
from .noise import (
    Channel,
    antitrap_channel,
    depolarize2_channel,
    hyperfine_leak_channel,
    l4_dressing_channel,
    local_z_error_channel,
    loss_channel,
    pulse_error_channel,
    rydberg_propagation_channel,
    sample_preparation,
    spam_prepare,
)
from .qstate import (
    RegisterState,
    SiteLevel,
    StateMode,
    basis_vector,
    product_state,
    to_density,
)

logger = logging.getLogger(__name__)

BRANCH_WEIGHT_FLOOR = 1e-15
MAX_DENSITY_SITES = 3
MAX_MEASURED_SITES = 2
SPAM_LEVELS = (SiteLevel.Q0, SiteLevel.Q1, SiteLevel.LOST)


@dataclass(frozen=True, eq=False)
class Experiment:
    """A circuit plus how its atoms start.

    ``prepare`` names the intended level per site; Q0, Q1 and LOST go through the
    preparation error model, other levels are placed exactly. ``initial_vectors``
    replaces the preparation with an exact product state.
    """

    label: str
    circuit: CircuitSpec
    prepare: Tuple[SiteLevel, ...] = ()
    initial_vectors: Optional[Tuple[np.ndarray, ...]] = None

    def __post_init__(self) -> None:
        if self.initial_vectors is None and len(self.prepare) != self.circuit.n:
            raise ValueError(f"{self.label}: prepare must name a level for each of the {self.circuit.n} sites.")
        if self.initial_vectors is not None and len(self.initial_vectors) != self.circuit.n:
            raise ValueError(f"{self.label}: initial_vectors must cover every site.")


def outcome_string(outcomes: OutcomeKey) -> str:
    return "".join("-" if o is None else o.value for o in outcomes)


@dataclass
class RunOutput:
    """Tally of joint outcomes for one experiment.

    Trajectory runs count shots; density runs hold expected counts (probability
    times ``shots``) and keep the frame-resolved, unnormalised final state per key.
    """

    label: str
    engine: str
    shots: float
    tally: Dict[OutcomeKey, float] = field(default_factory=dict)
    records: List[ShotRecord] = field(default_factory=list)
    final_states: Dict[OutcomeKey, RegisterState] = field(default_factory=dict)

    def probability(self, predicate=None) -> float:
        if self.shots <= 0:
            return 0.0
        total = sum(count for key, count in self.tally.items() if predicate is None or predicate(key))
        return total / self.shots

    def as_strings(self) -> Dict[str, float]:
        return {outcome_string(key): count for key, count in sorted(self.tally.items(), key=lambda kv: outcome_string(kv[0]))}


# ------------------------------------------------------------------ #
# Channel resolution shared by both engines
# ------------------------------------------------------------------ #
@lru_cache(maxsize=512)
def resolve_hook(hook: NoiseHook, model: NoiseModel) -> Tuple[Channel, ...]:
    """Channels a hook stands for under ``model``; empty when the error is switched off."""
    kind, sites = hook.kind, hook.sites
    if kind == "depolarize2":
        return (depolarize2_channel(sites, model.f2q),) if model.f2q < 1.0 else ()
    if kind == "gate_loss":
        return (loss_channel(sites[0], model.p_loss_gate),) if model.p_loss_gate > 0 else ()
    if kind == "rydberg_propagation":
        if model.p_prop == 0 and model.blockade_phase == 0:
            return ()
        return (rydberg_propagation_channel(sites, model.p_prop, model.blockade_phase),)
    if kind == "l4_dressing":
        return (l4_dressing_channel(sites, model.p_l4_dressing, hook.theta),) if model.p_l4_dressing > 0 else ()
    if kind == "pulse_error":
        p = min(1.0, model.p1q_pi * abs(hook.theta) / math.pi)
        return (pulse_error_channel(sites[0], p),) if p > 0 else ()
    if kind == "local_z_error":
        return (local_z_error_channel(sites[0], model.local_z_err),) if model.local_z_err > 0 else ()
    if kind == "image_loss":
        return (loss_channel(sites[0], model.p_meas_loss),) if model.p_meas_loss > 0 else ()
    if kind == "settle":
        if model.t_settle == 0 or math.isinf(model.tau_vac):
            return ()
        return tuple(antitrap_channel(site, model.t_settle, model) for site in sites)
    raise ValueError(f"unknown noise hook {kind!r}.")


@lru_cache(maxsize=256)
def _hold_channels(dt: float, n: int, model: NoiseModel) -> Tuple[Channel, ...]:
    return tuple(antitrap_channel(site, dt, model) for site in range(n))


def step_channels(step, n: int, model: NoiseModel) -> Tuple[Channel, ...]:
    if isinstance(step, NoiseHook):
        return resolve_hook(step, model)
    if isinstance(step, Hold):
        return _hold_channels(float(step.dt), n, model)
    if isinstance(step, LeakPulse):
        return (hyperfine_leak_channel(step.site, model.p_hfl_0, model.p_hfl_1),)
    return ()


def _feedback_sources(circuit: CircuitSpec) -> Tuple[int, ...]:
    return tuple(sorted({step.source for step in circuit.steps if isinstance(step, FeedbackZ)}))


def _classical_bits(outcomes: OutcomeKey) -> Dict[int, int]:
    return {site: int(o is Outcome.ONE) for site, o in enumerate(outcomes) if o is not None}


# ------------------------------------------------------------------ #
# Trajectories
# ------------------------------------------------------------------ #
class TrajectoryEngine:
    """Independent pure-state shots with a private RNG stream per (experiment, shot).

    Chunks of shots run on a thread pool, or on a process pool when ``processes`` is
    set and more than one worker is requested. Counts do not depend on either choice.
    """

    name = "trajectory"

    def __init__(
        self,
        model: NoiseModel,
        seed: int,
        workers: int = 1,
        chunk_size: int = 500,
        progress: bool = False,
        keep_records: bool = True,
        processes: bool = False,
    ):
        self.model = model
        self.seed = int(seed)
        self.workers = max(1, int(workers))
        self.chunk_size = max(1, int(chunk_size))
        self.progress = progress
        self.keep_records = keep_records
        self.processes = processes

    def shot_rng(self, experiment_index: int, shot: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(experiment_index, shot))
        return np.random.default_rng(sequence)

    def _initial_state(self, experiment: Experiment, rng: np.random.Generator) -> RegisterState:
        roles = experiment.circuit.roles
        if experiment.initial_vectors is not None:
            return product_state(experiment.initial_vectors, StateMode.PURE, roles)
        vectors = []
        for level in experiment.prepare:
            level = SiteLevel(level)
            if level in SPAM_LEVELS:
                level = sample_preparation(level, self.model, rng)
            vectors.append(basis_vector(level))
        return product_state(vectors, StateMode.PURE, roles)

    def run_shot(self, experiment: Experiment, experiment_index: int, shot: int) -> Tuple[ShotRecord, RegisterState]:
        rng = self.shot_rng(experiment_index, shot)
        circuit = experiment.circuit
        n = circuit.n
        state = self._initial_state(experiment, rng)
        frame = PhaseFrame.zeros(n)
        outcomes: List[Optional[Outcome]] = [None] * n
        retained: List[Optional[bool]] = [None] * n
        for step in circuit.steps:
            if isinstance(step, GATE_TYPES):
                state, frame = apply_gate(state, step, frame, self.model.eps_area, _classical_bits(tuple(outcomes)))
            elif isinstance(step, Measure):
                result = llsd(state, step.site, self.model, rng)
                state = result.state
                outcomes[step.site] = result.outcome
                retained[step.site] = result.retained
            else:
                for channel in step_channels(step, n, self.model):
                    state = channel.apply(state, rng)
        sources = _feedback_sources(circuit)
        feedback: Tuple[Optional[FeedbackBit], ...] = ()
        if sources:
            feedback = tuple(
                feedback_bit(outcomes[site]) if site in sources and outcomes[site] is not None else None
                for site in range(n)
            )
        record = ShotRecord(
            shot=shot,
            outcomes=tuple(outcomes),
            retained=tuple(retained),
            feedback=feedback,
            seed_path=(self.seed, experiment_index, shot),
            label=experiment.label,
        )
        return record, resolve_frame(state, frame)

    def _run_chunk(
        self, experiment: Experiment, experiment_index: int, shots: range
    ) -> Tuple[Dict[OutcomeKey, float], List[ShotRecord]]:
        tally: Dict[OutcomeKey, float] = {}
        records: List[ShotRecord] = []
        for shot in shots:
            record = self.run_shot(experiment, experiment_index, shot)[0]
            tally[record.outcomes] = tally.get(record.outcomes, 0.0) + 1.0
            if self.keep_records:
                records.append(record)
        return tally, records

    def _executor(self) -> Executor:
        if self.processes and self.workers > 1:
            return ProcessPoolExecutor(max_workers=self.workers)
        return ThreadPoolExecutor(max_workers=self.workers)

    def run(self, experiment: Experiment, shots: int, experiment_index: int = 0) -> RunOutput:
        if shots < 1:
            raise ValueError("trajectory runs need shots >= 1.")
        start = time.perf_counter()
        chunks = [range(lo, min(lo + self.chunk_size, shots)) for lo in range(0, shots, self.chunk_size)]
        results: List[Tuple[Dict[OutcomeKey, float], List[ShotRecord]]] = [({}, []) for _ in chunks]
        with self._executor() as executor:
            futures = [executor.submit(self._run_chunk, experiment, experiment_index, chunk) for chunk in chunks]
            for index, future in enumerate(
                tqdm(futures, desc=experiment.label, unit="chunk", disable=not self.progress, leave=False)
            ):
                results[index] = future.result()

        output = RunOutput(label=experiment.label, engine=self.name, shots=float(shots))
        for chunk_tally, chunk_records in results:
            for key, count in chunk_tally.items():
                output.tally[key] = output.tally.get(key, 0.0) + count
            output.records.extend(chunk_records)
        logger.debug(
            "Ran %s trajectory shots of %s in %.2fs", shots, experiment.label, time.perf_counter() - start
        )
        return output


# ------------------------------------------------------------------ #
# Exact density branches
# ------------------------------------------------------------------ #
@dataclass
class _Branch:
    state: RegisterState
    frame: PhaseFrame
    outcomes: OutcomeKey


class DensityEngine:
    """Exact outcome probabilities by channel composition over measurement branches."""

    name = "density"

    def __init__(self, model: NoiseModel):
        self.model = model

    def _initial_state(self, experiment: Experiment) -> RegisterState:
        roles = experiment.circuit.roles
        if experiment.initial_vectors is not None:
            return to_density(product_state(experiment.initial_vectors, StateMode.PURE, roles))
        rho = np.ones((1, 1), dtype=complex)
        for level in experiment.prepare:
            level = SiteLevel(level)
            if level in SPAM_LEVELS:
                site_rho = spam_prepare(level, self.model)
            else:
                site_rho = np.outer(basis_vector(level), basis_vector(level).conj())
            rho = np.kron(site_rho, rho)
        return RegisterState(rho, StateMode.DENSITY, roles)

    @staticmethod
    def _check_size(circuit: CircuitSpec) -> None:
        if circuit.n > MAX_DENSITY_SITES:
            raise ValueError(f"density engine supports at most {MAX_DENSITY_SITES} sites, got {circuit.n}.")
        if len(circuit.measured_sites()) > MAX_MEASURED_SITES:
            raise ValueError(f"density engine supports at most {MAX_MEASURED_SITES} measured sites.")

    def _measure(self, branches: Sequence[_Branch], site: int) -> List[_Branch]:
        merged: Dict[Tuple[OutcomeKey, Tuple[float, ...]], _Branch] = {}
        for branch in branches:
            for mb in llsd_branches(branch.state, site, self.model):
                outcomes = list(branch.outcomes)
                outcomes[site] = mb.outcome
                key = (tuple(outcomes), branch.frame.offsets)
                if key in merged:
                    existing = merged[key]
                    existing.state = RegisterState(existing.state.data + mb.state.data, StateMode.DENSITY, mb.state.roles)
                else:
                    merged[key] = _Branch(mb.state, branch.frame, tuple(outcomes))
        return [b for b in merged.values() if b.state.norm() > BRANCH_WEIGHT_FLOOR]

    def branches(self, experiment: Experiment) -> List[_Branch]:
        circuit = experiment.circuit
        self._check_size(circuit)
        n = circuit.n
        branches = [_Branch(self._initial_state(experiment), PhaseFrame.zeros(n), (None,) * n)]
        for step in circuit.steps:
            if isinstance(step, Measure):
                branches = self._measure(branches, step.site)
                continue
            if isinstance(step, GATE_TYPES):
                for branch in branches:
                    branch.state, branch.frame = apply_gate(
                        branch.state, step, branch.frame, self.model.eps_area, _classical_bits(branch.outcomes)
                    )
                continue
            channels = step_channels(step, n, self.model)
            for branch in branches:
                for channel in channels:
                    branch.state = channel.apply(branch.state)
        return branches

    def run(self, experiment: Experiment, shots: float = 1.0) -> RunOutput:
        start = time.perf_counter()
        output = RunOutput(label=experiment.label, engine=self.name, shots=float(shots))
        for branch in self.branches(experiment):
            weight = branch.state.norm()
            logical = resolve_frame(branch.state, branch.frame)
            output.tally[branch.outcomes] = output.tally.get(branch.outcomes, 0.0) + weight * shots
            if branch.outcomes in output.final_states:
                previous = output.final_states[branch.outcomes]
                logical = RegisterState(previous.data + logical.data, StateMode.DENSITY, logical.roles)
            output.final_states[branch.outcomes] = logical
        logger.debug("Evaluated %s exactly in %.3fs", experiment.label, time.perf_counter() - start)
        return output


def joint_density(output: RunOutput) -> RegisterState:
    """Frame-resolved final state summed over every outcome branch (density runs only)."""
    if not output.final_states:
        raise ValueError("no final states recorded; use the density engine.")
    states = list(output.final_states.values())
    total = sum(state.data for state in states)
    return RegisterState(total, StateMode.DENSITY, states[0].roles)

