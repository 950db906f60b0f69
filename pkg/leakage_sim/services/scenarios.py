"""Named experiment scenarios: what to run and how to read the counts.

Each scenario lists its experiments (circuit plus preparation) for a given noise
model and turns the per-experiment tallies of either engine into a
:class:`ScenarioResult`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..circuits import (
    ANCILLA,
    DATA,
    CircuitBuilder,
    CircuitSpec,
    LduKind,
    Measure,
    NoiseHook,
    PREP_TARGETS,
    STANDARD_SEMANTICS,
    append_ldu,
    append_teleport_readout,
    build_anti_trap,
    build_bell_fidelity,
    build_ldu,
    build_prepared_ldu,
    build_ramsey,
    build_teleport_readout,
    target_vector,
)
from ..config import NoiseModel
from ..engines import DensityEngine, Experiment, RunOutput, joint_density
from ..gates import RydbergPi, circuit_unitary, embed_qubit
from ..measure import (
    ALWAYS,
    ANCILLA_DETECTED,
    BOTH_DETECTED,
    Outcome,
    OutcomeKey,
    PostselectionRule,
    merge_tables,
    postselect_tally,
)
from ..models import CountsTable, FitResult, IntervalEstimate, ScanData, ScanPoint, ScenarioResult
from ..noise import decay_transfer_matrix
from ..qstate import (
    LEVELS,
    RegisterState,
    SiteLevel,
    StateMode,
    apply_operator,
    basis_vector,
    partial_trace,
    qubit_vector,
    state_fidelity,
)
from ..stats import (
    BELL_FLOOR,
    antitrap_time,
    bell_fidelity,
    binomial_sigma,
    contrast_interval,
    fit_exp_decay,
    fit_parity,
    fit_ramsey_mle,
    per_loop_fidelity,
    wilson_interval,
)

logger = logging.getLogger(__name__)

US = 1e-6
RAMSEY_POINTS = 16
PARITY_POINTS = 8
ANTITRAP_HOLDS = tuple(t * US for t in (0, 5, 10, 15, 20, 30, 40, 60, 80, 100))
RYDBERG_HOLDS = tuple(t * US for t in (0, 10, 30, 60))
BELL_LOOPS = (1, 3, 5, 7, 9)
RANDOM_INPUTS = 20
FRINGE_TARGETS = ("-x", "+y")


@dataclass(frozen=True)
class ScenarioContext:
    model: NoiseModel
    shots: int
    seed: int
    engine: str


Analysis = Callable[[ScenarioContext, Mapping[str, RunOutput]], ScenarioResult]


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    experiments: Callable[[ScenarioContext], List[Experiment]]
    analyze: Analysis
    compared: Callable[[str], bool] = lambda label: True


# ------------------------------------------------------------------ #
# Shared helpers
# ------------------------------------------------------------------ #
def ramsey_phases(points: int = RAMSEY_POINTS) -> np.ndarray:
    return np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)


def parity_phases(points: int = PARITY_POINTS) -> np.ndarray:
    return np.linspace(0.0, math.pi, points, endpoint=False)


def with_presence_image(circuit: CircuitSpec) -> CircuitSpec:
    """Prefix the loss from the presence image and the settle time before the circuit."""
    prefix = (
        NoiseHook("image_loss", (DATA,)),
        NoiseHook("image_loss", (ANCILLA,)),
        NoiseHook("settle", (DATA, ANCILLA)),
    )
    return CircuitSpec(circuit.name, circuit.roles, prefix + circuit.steps, circuit.semantics)


def random_qubit_inputs(seed: int, tag: str, count: int = RANDOM_INPUTS) -> List[np.ndarray]:
    """Haar-random qubit states as six-level vectors, reproducible from ``(seed, tag)``."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(tag.encode())))
    amplitudes = rng.normal(size=(count, 2)) + 1j * rng.normal(size=(count, 2))
    return [qubit_vector(a, b) for a, b in amplitudes]


def is_outcome(site: int, outcome: Outcome) -> Callable[[OutcomeKey], bool]:
    return lambda key: key[site] is outcome


def count_fraction(
    output: RunOutput,
    accept: Callable[[OutcomeKey], bool],
    success: Callable[[OutcomeKey], bool],
) -> Tuple[float, float]:
    """``(k, n)``: accepted counts and the accepted counts that also succeed."""
    k = n = 0.0
    for key, count in output.tally.items():
        if accept(key):
            n += count
            if success(key):
                k += count
    return k, n


def estimate(k: float, n: float) -> Optional[IntervalEstimate]:
    return wilson_interval(min(k, n), n) if n > 0 else None


def _put(result: ScenarioResult, name: str, value: Optional[IntervalEstimate]) -> None:
    if value is None:
        logger.warning("%s: no accepted shots for %s", result.name, name)
        return
    result.estimates[name] = value
    result.metrics[name] = value.value


def _new_result(name: str, ctx: ScenarioContext) -> ScenarioResult:
    return ScenarioResult(name=name, engine=ctx.engine, shots=ctx.shots)


def _table(output: RunOutput, rule: PostselectionRule, interpret=None, condition: str = "") -> CountsTable:
    return postselect_tally(output.tally, rule, interpret, condition)


def _fringe_scan(label: str, outputs: Sequence[RunOutput], phases: Sequence[float], accept, success) -> ScanData:
    points = []
    for phi, output in zip(phases, outputs):
        k, n = count_fraction(output, accept, success)
        points.append(ScanPoint(phi_rad=float(phi), n=n, k=min(k, n)))
    return ScanData(label=label, points=points)


def _site_state(rho: RegisterState, site: int) -> Optional[RegisterState]:
    reduced = partial_trace(rho, [site])
    if reduced.norm() <= 1e-15:
        return None
    return reduced.normalized()


def _single_site(vec: np.ndarray, like: RegisterState) -> RegisterState:
    return RegisterState(np.asarray(vec, dtype=complex), StateMode.PURE, like.roles)


# ------------------------------------------------------------------ #
# Loss truth table and input-state sweep
# ------------------------------------------------------------------ #
PRESENT_OK = "present, no flag"
FALSE_FLAG = "false leak flag"
ACCIDENTAL_LOSS = "accidental loss, flagged"
LOST_UNFLAGGED = "data lost, not flagged"
ABSENT_OK = "absent, flagged"
ABSENT_MISSED = "absent, not flagged"


def truth_table_interpreter(condition: str) -> Callable[[OutcomeKey], str]:
    def interpret(outcomes: OutcomeKey) -> str:
        data, flagged = outcomes[DATA], outcomes[ANCILLA] is Outcome.ONE
        if condition == "absent":
            return ABSENT_OK if flagged else ABSENT_MISSED
        if data is Outcome.NEITHER:
            return ACCIDENTAL_LOSS if flagged else LOST_UNFLAGGED
        return FALSE_FLAG if flagged else PRESENT_OK

    return interpret


def _present_counts(table: CountsTable) -> Tuple[float, float]:
    """Correct and total present shots, leaving out shots whose data atom read NEITHER."""
    correct = table.count(interpretation=PRESENT_OK)
    return correct, correct + table.count(interpretation=FALSE_FLAG)


def _absent_counts(table: CountsTable) -> Tuple[float, float]:
    correct = table.count(interpretation=ABSENT_OK)
    return correct, correct + table.count(interpretation=ABSENT_MISSED)


def _loss_truth_table_experiments(ctx: ScenarioContext) -> List[Experiment]:
    circuit = with_presence_image(build_ldu(LduKind.STANDARD_NATIVE, measure_data=True))
    return [
        Experiment("present", circuit, (SiteLevel.Q0, SiteLevel.Q0)),
        Experiment("absent", circuit, (SiteLevel.LOST, SiteLevel.Q0)),
    ]


def _loss_truth_table_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("loss_truth_table", ctx)
    tables = {
        condition: _table(outputs[condition], ANCILLA_DETECTED, truth_table_interpreter(condition), condition)
        for condition in ("present", "absent")
    }
    result.counts.update(tables)
    result.counts["table"] = merge_tables(list(tables.values()), ANCILLA_DETECTED.name)
    _put(result, "present_accuracy", estimate(*_present_counts(tables["present"])))
    _put(result, "absent_accuracy", estimate(*_absent_counts(tables["absent"])))
    excluded = sum(t.excluded for t in tables.values())
    total = sum(t.total for t in tables.values())
    _put(result, "exclusion_rate", estimate(excluded, total))
    present = tables["present"]
    _put(result, "accidental_loss_rate", estimate(present.count(interpretation=ACCIDENTAL_LOSS), present.kept))
    return result


def _input_sweep_experiments(ctx: ScenarioContext) -> List[Experiment]:
    experiments = []
    for target in PREP_TARGETS:
        circuit = with_presence_image(build_prepared_ldu(LduKind.STANDARD_NATIVE, target, measure_data=True))
        experiments.append(Experiment(f"{target}/present", circuit, (SiteLevel.Q0, SiteLevel.Q0)))
        experiments.append(Experiment(f"{target}/absent", circuit, (SiteLevel.LOST, SiteLevel.Q0)))
    return experiments


def _input_sweep_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("input_state_sweep", ctx)
    pooled = {"present": [0.0, 0.0], "absent": [0.0, 0.0]}
    means: Dict[str, List[float]] = {"present": [], "absent": []}
    for target in PREP_TARGETS:
        for condition, counter in (("present", _present_counts), ("absent", _absent_counts)):
            label = f"{target}/{condition}"
            table = _table(outputs[label], ANCILLA_DETECTED, truth_table_interpreter(condition), condition)
            result.counts[label] = table
            k, n = counter(table)
            pooled[condition][0] += k
            pooled[condition][1] += n
            value = estimate(k, n)
            _put(result, f"{condition}_accuracy[{target}]", value)
            if value is not None:
                means[condition].append(value.value)
    for condition in ("present", "absent"):
        _put(result, f"{condition}_accuracy[average]", estimate(*pooled[condition]))
        if means[condition]:
            result.metrics[f"{condition}_accuracy_mean"] = float(np.mean(means[condition]))
    return result


# ------------------------------------------------------------------ #
# Ramsey coherence
# ------------------------------------------------------------------ #
def _ramsey_experiments(ctx: ScenarioContext) -> List[Experiment]:
    experiments = []
    for with_ldu in (False, True):
        for index, phi in enumerate(ramsey_phases()):
            experiments.append(
                Experiment(f"ldu={int(with_ldu)}/{index}", build_ramsey(with_ldu, float(phi)), (SiteLevel.Q0, SiteLevel.Q0))
            )
    return experiments


def _record_fringe(result: ScenarioResult, key: str, scan: ScanData) -> FitResult:
    result.scans[key] = scan
    fit = fit_ramsey_mle(scan)
    result.fits[key] = fit
    result.estimates[f"contrast[{key}]"] = contrast_interval(fit)
    result.metrics[f"contrast[{key}]"] = fit.parameters["contrast"]
    return fit


def _ramsey_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("ramsey", ctx)
    phases = ramsey_phases()
    for with_ldu, key in ((False, "without_ldu"), (True, "with_ldu")):
        series = [outputs[f"ldu={int(with_ldu)}/{i}"] for i in range(len(phases))]
        scan = _fringe_scan(key, series, phases, BOTH_DETECTED.accepts, is_outcome(DATA, Outcome.ONE))
        _record_fringe(result, key, scan)
    return result


# ------------------------------------------------------------------ #
# Anti-trapping of Rydberg atoms
# ------------------------------------------------------------------ #
def _anti_trap_experiments(ctx: ScenarioContext) -> List[Experiment]:
    return [Experiment(f"hold={i}", build_anti_trap(t), (SiteLevel.Q1,)) for i, t in enumerate(ANTITRAP_HOLDS)]


def _anti_trap_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("anti_trapping", ctx)
    survival = []
    for i, hold in enumerate(ANTITRAP_HOLDS):
        k, n = count_fraction(outputs[f"hold={i}"], ALWAYS.accepts, lambda key: key[DATA] is not Outcome.NEITHER)
        value = wilson_interval(k, n)
        survival.append(value)
        result.estimates[f"survival[{hold / US:g}us]"] = value
    fit = fit_exp_decay(ANTITRAP_HOLDS, survival)
    result.fits["survival"] = fit
    result.metrics["decay_time"] = fit.parameters["tau"]
    if fit.usable and fit.parameters["amplitude"] > 0:
        result.metrics["antitrap_time"] = antitrap_time(fit)
    return result


# ------------------------------------------------------------------ #
# Hyperfine leakage
# ------------------------------------------------------------------ #
HYPERFINE_CASES = (("F3", SiteLevel.Q0, SiteLevel.L3), ("F4", SiteLevel.Q1, SiteLevel.L4))


def build_hyperfine_flag() -> CircuitSpec:
    builder = CircuitBuilder("hyperfine_flag")
    builder.leak_pulse(DATA)
    append_ldu(builder, LduKind.STANDARD_NATIVE)
    builder.measure(ANCILLA)
    return builder.build(STANDARD_SEMANTICS)


def _hyperfine_experiments(ctx: ScenarioContext) -> List[Experiment]:
    pulsed = build_hyperfine_flag()
    reference = build_ldu(LduKind.STANDARD_NATIVE)
    experiments = []
    for case, prepared, leaked in HYPERFINE_CASES:
        experiments.append(Experiment(f"{case}/pulse", pulsed, (prepared, SiteLevel.Q0)))
        experiments.append(Experiment(f"{case}/leaked", reference, (leaked, SiteLevel.Q0)))
        experiments.append(Experiment(f"{case}/clean", reference, (prepared, SiteLevel.Q0)))
    return experiments


def _hyperfine_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("hyperfine_leakage", ctx)
    flagged = is_outcome(ANCILLA, Outcome.ONE)
    for case, prepared, _ in HYPERFINE_CASES:
        p_leak = ctx.model.p_hfl_0 if prepared is SiteLevel.Q0 else ctx.model.p_hfl_1
        rates = {}
        for part in ("pulse", "leaked", "clean"):
            label = f"{case}/{part}"
            result.counts[label] = _table(outputs[label], ANCILLA_DETECTED, condition=label)
            k, n = count_fraction(outputs[label], ANCILLA_DETECTED.accepts, flagged)
            rates[part] = (k / n if n else 0.0, n)
            _put(result, f"flag_rate[{label}]", estimate(k, n))
        measured, n_pulse = rates["pulse"]
        composed = p_leak * rates["leaked"][0] + (1.0 - p_leak) * rates["clean"][0]
        sigma = math.sqrt(
            binomial_sigma(measured, max(n_pulse, 1.0)) ** 2
            + (p_leak * binomial_sigma(rates["leaked"][0], max(rates["leaked"][1], 1.0))) ** 2
            + ((1.0 - p_leak) * binomial_sigma(rates["clean"][0], max(rates["clean"][1], 1.0))) ** 2
        )
        result.metrics[f"flag_rate[{case}]"] = measured
        result.metrics[f"composed_flag_rate[{case}]"] = composed
        result.metrics[f"composition_z[{case}]"] = (measured - composed) / sigma if sigma > 0 else 0.0
    return result


# ------------------------------------------------------------------ #
# Teleportation unit
# ------------------------------------------------------------------ #
def _with_ancilla_readout(circuit: CircuitSpec) -> CircuitSpec:
    return circuit.with_steps([Measure(ANCILLA)])


def build_addressed_readout(phi: float) -> CircuitSpec:
    """Only the analysis pulses of the teleport readout, without any entangling gate."""
    builder = CircuitBuilder(f"addressed_readout[{phi:.6g}]")
    append_teleport_readout(builder, phi)
    return builder.build()


TELEPORT_MEANINGS = {Outcome.ZERO: "no correction", Outcome.ONE: "Z feedback", Outcome.NEITHER: "erasure"}


def _teleport_meaning(outcomes: OutcomeKey) -> str:
    return TELEPORT_MEANINGS.get(outcomes[DATA], "")


def _teleport_experiments(ctx: ScenarioContext) -> List[Experiment]:
    native = _with_ancilla_readout(build_ldu(LduKind.TELEPORT_NATIVE))
    canonical = _with_ancilla_readout(build_ldu(LduKind.TELEPORT_CANONICAL))
    experiments = []
    for bit, level in (("0", SiteLevel.Q0), ("1", SiteLevel.Q1)):
        experiments.append(Experiment(f"transfer/{bit}", native, (level, SiteLevel.Q0)))
        experiments.append(Experiment(f"canonical/{bit}", canonical, (level, SiteLevel.Q0)))
    experiments.append(Experiment("data_lost", native, (SiteLevel.LOST, SiteLevel.Q0)))
    for target in FRINGE_TARGETS:
        for i, phi in enumerate(ramsey_phases()):
            experiments.append(
                Experiment(
                    f"fringe/{target}/{i}",
                    build_teleport_readout(float(phi), target=target),
                    (SiteLevel.Q0, SiteLevel.Q0),
                )
            )
    ground = basis_vector(SiteLevel.Q0)
    for i, phi in enumerate(ramsey_phases()):
        experiments.append(
            Experiment(f"addressed/{i}", build_addressed_readout(float(phi)), initial_vectors=(ground, target_vector("-x")))
        )
    return experiments


def _transfer_counts(outputs: Mapping[str, RunOutput], prefix: str) -> Tuple[float, float]:
    k_total = n_total = 0.0
    for bit, outcome in (("0", Outcome.ZERO), ("1", Outcome.ONE)):
        k, n = count_fraction(outputs[f"{prefix}/{bit}"], BOTH_DETECTED.accepts, is_outcome(ANCILLA, outcome))
        k_total += k
        n_total += n
    return k_total, n_total


def _teleport_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("teleport", ctx)
    for prefix in ("transfer", "canonical"):
        for bit in ("0", "1"):
            label = f"{prefix}/{bit}"
            result.counts[label] = _table(outputs[label], ALWAYS, _teleport_meaning, label)
    _put(result, "transfer_success", estimate(*_transfer_counts(outputs, "transfer")))
    _put(result, "canonical_transfer_success", estimate(*_transfer_counts(outputs, "canonical")))

    lost = outputs["data_lost"]
    result.counts["data_lost"] = _table(lost, ALWAYS, _teleport_meaning, "data_lost")
    ancilla_seen = lambda key: key[ANCILLA] is not Outcome.NEITHER
    _put(result, "lost_ancilla_zero", estimate(*count_fraction(lost, ancilla_seen, is_outcome(ANCILLA, Outcome.ZERO))))
    _put(result, "erasure_rate", estimate(*count_fraction(lost, ALWAYS.accepts, is_outcome(DATA, Outcome.NEITHER))))

    phases = ramsey_phases()
    ancilla_one = is_outcome(ANCILLA, Outcome.ONE)
    for target in FRINGE_TARGETS:
        series = [outputs[f"fringe/{target}/{i}"] for i in range(len(phases))]
        _record_fringe(result, f"teleported{target}", _fringe_scan(f"teleported{target}", series, phases, BOTH_DETECTED.accepts, ancilla_one))
    addressed = [outputs[f"addressed/{i}"] for i in range(len(phases))]
    _record_fringe(
        result,
        "addressed_baseline",
        _fringe_scan("addressed_baseline", addressed, phases, lambda key: key[ANCILLA] is not Outcome.NEITHER, ancilla_one),
    )
    return result


# ------------------------------------------------------------------ #
# Bell-state fidelity versus gate count
# ------------------------------------------------------------------ #
def bell_point(populations: RunOutput, parity_outputs: Sequence[RunOutput]) -> Tuple[IntervalEstimate, FitResult, Dict[str, float]]:
    """Fidelity estimate from one population run and one parity scan."""
    even = lambda key: (key[DATA], key[ANCILLA]) in ((Outcome.ZERO, Outcome.ZERO), (Outcome.ONE, Outcome.ONE))
    k00, n = count_fraction(populations, BOTH_DETECTED.accepts, lambda key: key[DATA] is Outcome.ZERO and key[ANCILLA] is Outcome.ZERO)
    k11, _ = count_fraction(populations, BOTH_DETECTED.accepts, lambda key: key[DATA] is Outcome.ONE and key[ANCILLA] is Outcome.ONE)
    if n <= 0:
        raise ValueError("no two-atom shots survived postselection.")
    rho00, rho11 = k00 / n, k11 / n
    scan = _fringe_scan("parity", parity_outputs, parity_phases(len(parity_outputs)), BOTH_DETECTED.accepts, even)
    fit = fit_parity(scan)
    amplitude = float(np.clip(fit.parameters["amplitude"], -1.0, 1.0))
    value = bell_fidelity(min(rho00, 1.0), min(rho11, 1.0), amplitude)
    sigma_pop = binomial_sigma(rho00 + rho11, n)
    sigma_amp = fit.uncertainties.get("amplitude", 0.0)
    sigma_amp = 0.0 if not math.isfinite(sigma_amp) else sigma_amp
    halfwidth = 0.5 * math.hypot(sigma_pop, sigma_amp)
    interval = IntervalEstimate(value=value, lo=max(0.0, value - halfwidth), hi=min(1.0, value + halfwidth), method="bell(populations+parity)")
    return interval, fit, {"rho00": rho00, "rho11": rho11, "amplitude": amplitude}


def _bell_experiments(ctx: ScenarioContext) -> List[Experiment]:
    prepare = (SiteLevel.Q0, SiteLevel.Q0)
    experiments = []
    for loops in BELL_LOOPS:
        experiments.append(Experiment(f"n={loops}/populations", build_bell_fidelity(loops), prepare))
        for i, phi in enumerate(parity_phases()):
            experiments.append(Experiment(f"n={loops}/parity/{i}", build_bell_fidelity(loops, float(phi)), prepare))
    return experiments


def gate_only_bell_fidelity(f2q: float) -> float:
    """Exact single-gate fidelity with the entangling-gate depolarizing as the only error."""
    model = NoiseModel.noiseless().with_overrides({"f2q": f2q})
    engine = DensityEngine(model)
    prepare = (SiteLevel.Q0, SiteLevel.Q0)
    populations = engine.run(Experiment("populations", build_bell_fidelity(1), prepare), shots=1.0)
    parity = [
        engine.run(Experiment(f"parity/{i}", build_bell_fidelity(1, float(phi)), prepare), shots=1.0)
        for i, phi in enumerate(parity_phases())
    ]
    interval, _, _ = bell_point(populations, parity)
    return interval.value


def _bell_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("bell_decay", ctx)
    fidelities = []
    for loops in BELL_LOOPS:
        parity = [outputs[f"n={loops}/parity/{i}"] for i in range(PARITY_POINTS)]
        interval, fit, parts = bell_point(outputs[f"n={loops}/populations"], parity)
        fidelities.append(interval)
        result.estimates[f"fidelity[n={loops}]"] = interval
        result.fits[f"parity[n={loops}]"] = fit
        for key, value in parts.items():
            result.metrics[f"{key}[n={loops}]"] = value
    result.metrics["fidelity_n1"] = fidelities[0].value
    decay = fit_exp_decay(BELL_LOOPS, fidelities, floor=BELL_FLOOR)
    result.fits["loop_decay"] = decay
    result.metrics["decay_loops"] = decay.parameters["tau"]
    result.metrics["per_loop_fidelity"] = per_loop_fidelity(decay)
    result.metrics["gate_only_fidelity_n1"] = gate_only_bell_fidelity(ctx.model.f2q)
    return result


# ------------------------------------------------------------------ #
# Ancilla loss and SWAP refill
# ------------------------------------------------------------------ #
def lost_partner_correction(circuit: CircuitSpec, lost_site: int, kept_site: int) -> np.ndarray:
    """Inverse of the qubit map a unit applies to ``kept_site`` when ``lost_site`` is LOST."""
    unitary = circuit_unitary(circuit.gates(), circuit.n, circuit.roles)
    lost = int(SiteLevel.LOST)
    idx = []
    for q in (0, 1):
        levels = [0] * circuit.n
        levels[kept_site], levels[lost_site] = q, lost
        idx.append(sum(level * LEVELS ** site for site, level in enumerate(levels)))
    block = unitary[np.ix_(idx, idx)]
    return embed_qubit(block.conj().T)


def _fidelity_with(state: Optional[RegisterState], vec: np.ndarray) -> float:
    if state is None:
        return 0.0
    return state_fidelity(_single_site(vec, state), state)


def _ancilla_loss_experiments(ctx: ScenarioContext) -> List[Experiment]:
    lost = basis_vector(SiteLevel.LOST)
    standard = build_ldu(LduKind.STANDARD_NATIVE)
    swap = build_ldu(LduKind.SWAP)
    experiments = []
    for i, psi in enumerate(random_qubit_inputs(ctx.seed, "ancilla_loss")):
        experiments.append(Experiment(f"standard/{i}", standard, initial_vectors=(psi, lost)))
        experiments.append(Experiment(f"swap/{i}", swap, initial_vectors=(psi, lost)))
    return experiments


def _ancilla_loss_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("ancilla_loss", ctx)
    inputs = random_qubit_inputs(ctx.seed, "ancilla_loss")
    correction = lost_partner_correction(build_ldu(LduKind.STANDARD_NATIVE), lost_site=ANCILLA, kept_site=DATA)
    standard_tally: Dict[OutcomeKey, float] = {}
    for i in range(len(inputs)):
        for key, count in outputs[f"standard/{i}"].tally.items():
            standard_tally[key] = standard_tally.get(key, 0.0) + count
    result.counts["standard"] = postselect_tally(standard_tally, ALWAYS, condition="ancilla lost")

    if not outputs["standard/0"].final_states:
        logger.info("ancilla_loss: fidelities need final states; only counts are reported for %s runs.", ctx.engine)
        return result

    standard_fid, swap_expected, swap_best = [], [], []
    for i, psi in enumerate(inputs):
        data_state = _site_state(joint_density(outputs[f"standard/{i}"]), DATA)
        corrected = apply_operator(data_state, correction, [0]) if data_state is not None else None
        standard_fid.append(_fidelity_with(corrected, psi))

        branches = outputs[f"swap/{i}"].final_states
        total = sum(state.norm() for state in branches.values())
        expected = best = 0.0
        for state in branches.values():
            weight = state.norm()
            if weight <= 1e-15:
                continue
            normalized = state.normalized()
            recoverable = max(_fidelity_with(_site_state(normalized, site), psi) for site in (DATA, ANCILLA))
            expected += weight / total * recoverable
            best = max(best, recoverable)
        swap_expected.append(expected)
        swap_best.append(best)
    result.metrics["standard_min_fidelity"] = float(min(standard_fid))
    result.metrics["standard_mean_fidelity"] = float(np.mean(standard_fid))
    result.metrics["swap_mean_fidelity"] = float(np.mean(swap_expected))
    result.metrics["swap_max_fidelity"] = float(max(swap_expected))
    result.metrics["swap_best_branch_fidelity"] = float(max(swap_best))
    return result


def _swap_refill_experiments(ctx: ScenarioContext) -> List[Experiment]:
    swap = build_ldu(LduKind.SWAP)
    ground = basis_vector(SiteLevel.Q0)
    experiments = [
        Experiment("present", swap, (SiteLevel.Q1, SiteLevel.Q0)),
        Experiment("absent", swap, (SiteLevel.LOST, SiteLevel.Q0)),
    ]
    for i, psi in enumerate(random_qubit_inputs(ctx.seed, "swap_refill")):
        experiments.append(Experiment(f"transfer/{i}", swap, initial_vectors=(psi, ground)))
    return experiments


def _swap_meaning(outcomes: OutcomeKey) -> str:
    return {Outcome.ZERO: "transferred", Outcome.NEITHER: "loss detected, refilled"}.get(outcomes[DATA], "unexpected data reading")


def _swap_refill_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("swap_refill", ctx)
    for condition in ("present", "absent"):
        result.counts[condition] = _table(outputs[condition], ALWAYS, _swap_meaning, condition)
    _put(result, "present_accuracy", estimate(*count_fraction(outputs["present"], ALWAYS.accepts, is_outcome(DATA, Outcome.ZERO))))
    _put(result, "absent_accuracy", estimate(*count_fraction(outputs["absent"], ALWAYS.accepts, is_outcome(DATA, Outcome.NEITHER))))

    if not outputs["absent"].final_states:
        return result
    inputs = random_qubit_inputs(ctx.seed, "swap_refill")
    fidelities = []
    for i, psi in enumerate(inputs):
        states = outputs[f"transfer/{i}"].final_states
        kept = [state for key, state in states.items() if key[DATA] is Outcome.ZERO]
        if not kept:
            fidelities.append(0.0)
            continue
        merged = RegisterState(sum(s.data for s in kept), StateMode.DENSITY, kept[0].roles)
        fidelities.append(_fidelity_with(_site_state(merged, ANCILLA), psi))
    result.metrics["transfer_min_fidelity"] = float(min(fidelities))
    result.metrics["transfer_mean_fidelity"] = float(np.mean(fidelities))
    refilled = [state for key, state in outputs["absent"].final_states.items() if key[DATA] is Outcome.NEITHER]
    if refilled:
        merged = RegisterState(sum(s.data for s in refilled), StateMode.DENSITY, refilled[0].roles)
        result.metrics["refill_ground_fidelity"] = _fidelity_with(_site_state(merged, ANCILLA), basis_vector(SiteLevel.Q0))
    return result


# ------------------------------------------------------------------ #
# Rydberg leakage of the ancilla
# ------------------------------------------------------------------ #
def build_rydberg_leak(hold: float) -> CircuitSpec:
    builder = CircuitBuilder("rydberg_leak")
    builder.gate(RydbergPi(ANCILLA)).hold(hold)
    builder.entangle(math.pi / 2, math.pi / 2)
    builder.measure(DATA, ANCILLA)
    return builder.build()


def _rydberg_experiments(ctx: ScenarioContext) -> List[Experiment]:
    return [
        Experiment(f"hold={i}", build_rydberg_leak(t), (SiteLevel.Q0, SiteLevel.Q1)) for i, t in enumerate(RYDBERG_HOLDS)
    ]


def _rydberg_analysis(ctx: ScenarioContext, outputs: Mapping[str, RunOutput]) -> ScenarioResult:
    result = _new_result("rydberg_leakage", ctx)
    ryd = int(SiteLevel.RYD)
    for i, hold in enumerate(RYDBERG_HOLDS):
        output = outputs[f"hold={i}"]
        tag = f"{hold / US:g}us"
        result.counts[tag] = _table(output, ALWAYS, condition=tag)
        _put(result, f"ancilla_neither[{tag}]", estimate(*count_fraction(output, ALWAYS.accepts, is_outcome(ANCILLA, Outcome.NEITHER))))
        _put(result, f"data_neither[{tag}]", estimate(*count_fraction(output, ALWAYS.accepts, is_outcome(DATA, Outcome.NEITHER))))
        still_rydberg = decay_transfer_matrix(ctx.model, hold)[ryd, ryd]
        result.metrics[f"propagation_expected[{tag}]"] = ctx.model.p_prop * still_rydberg
    return result


# ------------------------------------------------------------------ #
# Library
# ------------------------------------------------------------------ #
def scenario_library() -> Dict[str, Scenario]:
    scenarios = [
        Scenario(
            "loss_truth_table",
            "Standard native unit on present and absent data atoms; shot-by-shot logic table.",
            _loss_truth_table_experiments,
            _loss_truth_table_analysis,
        ),
        Scenario(
            "input_state_sweep",
            "Present/absent accuracies for six prepared data states plus the pooled average.",
            _input_sweep_experiments,
            _input_sweep_analysis,
        ),
        Scenario(
            "ramsey",
            "Data-atom Ramsey fringe with and without the unit; binomial MLE contrast.",
            _ramsey_experiments,
            _ramsey_analysis,
        ),
        Scenario(
            "anti_trapping",
            "Retention after a Rydberg hold; exponential fit of the anti-trap time.",
            _anti_trap_experiments,
            _anti_trap_analysis,
        ),
        Scenario(
            "hyperfine_leakage",
            "Leak-flag rates after a hyperfine leak pulse from either clock state, with references.",
            _hyperfine_experiments,
            _hyperfine_analysis,
        ),
        Scenario(
            "teleport",
            "Teleportation unit: basis transfer, erasure branch, teleported fringes, baselines.",
            _teleport_experiments,
            _teleport_analysis,
            compared=lambda label: label in ("transfer/0", "transfer/1", "data_lost"),
        ),
        Scenario(
            "bell_decay",
            "Bell fidelity from populations and parity versus the number of entangling gates.",
            _bell_experiments,
            _bell_analysis,
            compared=lambda label: label.startswith("n=1/"),
        ),
        Scenario(
            "ancilla_loss",
            "Standard and SWAP units with the ancilla lost beforehand; recoverable data fidelity.",
            _ancilla_loss_experiments,
            _ancilla_loss_analysis,
        ),
        Scenario(
            "swap_refill",
            "SWAP unit: transfer onto the fresh ancilla and refill when the data atom is gone.",
            _swap_refill_experiments,
            _swap_refill_analysis,
        ),
        Scenario(
            "rydberg_leakage",
            "Ancilla held in the Rydberg state before a gate: anti-trap loss and propagation.",
            _rydberg_experiments,
            _rydberg_analysis,
        ),
    ]
    return {scenario.name: scenario for scenario in scenarios}
