"""Circuit descriptions for every leakage-detection unit and experiment sequence.

Site 0 is the data atom and site 1 the ancilla throughout. Noise enters only
through explicit :class:`NoiseHook` steps so that the trajectory and density
engines insert identical channels at identical points.
"""

from __future__ import annotations

import math
import typing
from dataclasses import dataclass, fields
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .gates import (
    GATE_TYPES,
    CanonicalCNOT,
    CanonicalCZ,
    CanonicalH,
    CanonicalX,
    CanonicalZ,
    Entangle,
    FeedbackZ,
    GateOp,
    GlobalR,
    LocalZ,
    RydbergPi,
    VirtualZ,
    circuit_unitary,
)
from .measure import Outcome
from .qstate import LEVELS, SiteLevel, SiteRole, default_roles

CIRCUIT_SCHEMA = "# leakage-sim/circuit/v1"
DATA, ANCILLA = 0, 1
PAIR = (DATA, ANCILLA)


# ------------------------------------------------------------------ #
# Non-gate steps
# ------------------------------------------------------------------ #
@dataclass(frozen=True)
class NoiseHook:
    """Named channel insertion point, resolved against a NoiseModel at run time."""

    kind: str
    sites: Tuple[int, ...]
    theta: float = 0.0


@dataclass(frozen=True)
class Measure:
    site: int


@dataclass(frozen=True)
class Hold:
    dt: float


@dataclass(frozen=True)
class LeakPulse:
    site: int


HOOK_KINDS = (
    "depolarize2",
    "gate_loss",
    "rydberg_propagation",
    "l4_dressing",
    "pulse_error",
    "local_z_error",
    "image_loss",
    "settle",
)

Step = Union[GateOp, NoiseHook, Measure, Hold, LeakPulse]
STEP_TYPES = GATE_TYPES + (NoiseHook, Measure, Hold, LeakPulse)


class LduKind(str, Enum):
    STANDARD_CANONICAL = "standard_canonical"
    STANDARD_NATIVE = "standard_native"
    STANDARD_GLOBAL_ONLY = "standard_global_only"
    STANDARD_HW_OPT = "standard_hw_opt"
    STANDARD_CNOT = "standard_cnot"
    SWAP = "swap"
    TELEPORT_CANONICAL = "teleport_canonical"
    TELEPORT_NATIVE = "teleport_native"

    @property
    def is_standard(self) -> bool:
        return self.value.startswith("standard")


@dataclass(frozen=True)
class LeakSemantics:
    """What a circuit's readout means.

    ``detect_site`` reading ``leak_outcome`` flags leakage; ``clean_outcome`` is the
    expected reading without leakage (None when the reading carries data).
    ``information_site`` holds the data state at the end; ``refill_state`` names the
    state left there after a detected leak.
    """

    kind: str = "experiment"
    detect_site: int = ANCILLA
    leak_outcome: Optional[Outcome] = None
    clean_outcome: Optional[Outcome] = None
    information_site: int = DATA
    refill_state: str = ""


@dataclass(frozen=True)
class CircuitSpec:
    name: str
    roles: Tuple[SiteRole, ...]
    steps: Tuple[Step, ...]
    semantics: LeakSemantics = LeakSemantics()

    def __post_init__(self) -> None:
        n = len(self.roles)
        measured: set = set()
        steps = self.steps
        for index, step in enumerate(steps):
            for site in _step_sites(step):
                if not 0 <= site < n:
                    raise ValueError(f"step {index} ({step!r}) references site {site} outside {n} sites.")
            if isinstance(step, Measure):
                measured.add(step.site)
            if isinstance(step, FeedbackZ) and step.source not in measured:
                raise ValueError(f"FeedbackZ at step {index} reads site {step.source} before it is measured.")
            if isinstance(step, NoiseHook) and step.kind not in HOOK_KINDS:
                raise ValueError(f"unknown noise hook {step.kind!r}.")
            if isinstance(step, Entangle):
                follow = steps[index + 1 : index + 4]
                kinds = [s.kind for s in follow if isinstance(s, NoiseHook)]
                if kinds[:3] != ["depolarize2", "gate_loss", "gate_loss"]:
                    raise ValueError(f"Entangle at step {index} must be followed by its gate-noise hooks.")

    @property
    def n(self) -> int:
        return len(self.roles)

    def gates(self) -> List[GateOp]:
        return [step for step in self.steps if isinstance(step, GATE_TYPES)]

    def measured_sites(self) -> List[int]:
        return [step.site for step in self.steps if isinstance(step, Measure)]

    def with_steps(self, extra: Sequence[Step], name: Optional[str] = None) -> "CircuitSpec":
        return CircuitSpec(name or self.name, self.roles, self.steps + tuple(extra), self.semantics)


def _step_sites(step: Step) -> Tuple[int, ...]:
    if isinstance(step, (Entangle, CanonicalCZ)):
        return tuple(step.pair)
    if isinstance(step, CanonicalCNOT):
        return (step.control, step.target)
    if isinstance(step, FeedbackZ):
        return (step.site, step.source)
    if isinstance(step, NoiseHook):
        return step.sites
    if isinstance(step, (GlobalR, Hold)):
        return ()
    site = getattr(step, "site", None)
    return () if site is None else (site,)


# ------------------------------------------------------------------ #
# Builder
# ------------------------------------------------------------------ #
class CircuitBuilder:
    """Appends gates together with the noise hooks the processor attaches to them."""

    def __init__(self, name: str, n: int = 2, roles: Optional[Sequence[SiteRole]] = None):
        self.name = name
        self.roles = tuple(roles) if roles is not None else default_roles(n)
        self.steps: List[Step] = []

    def _active_sites(self) -> Tuple[int, ...]:
        return tuple(i for i, role in enumerate(self.roles) if role is not SiteRole.RESERVOIR)

    def global_r(self, theta: float, phi: float = 0.0) -> "CircuitBuilder":
        self.steps.append(GlobalR(theta, phi))
        for site in self._active_sites():
            self.steps.append(NoiseHook("pulse_error", (site,), theta))
        return self

    def virtual_z(self, theta: float, site: Optional[int] = None) -> "CircuitBuilder":
        self.steps.append(VirtualZ(theta, site))
        return self

    def local_z(self, theta: float, site: int = DATA) -> "CircuitBuilder":
        self.steps.append(LocalZ(theta, site))
        self.steps.append(NoiseHook("local_z_error", (site,)))
        return self

    def entangle(self, theta: float, echo_phi: float = math.pi / 2, pair: Tuple[int, int] = PAIR) -> "CircuitBuilder":
        self.steps.append(Entangle(theta, pair, echo_phi))
        self._two_qubit_hooks(pair)
        self.steps.append(NoiseHook("rydberg_propagation", pair))
        self.steps.append(NoiseHook("l4_dressing", pair, theta))
        return self

    def _two_qubit_hooks(self, pair: Tuple[int, int]) -> None:
        self.steps.append(NoiseHook("depolarize2", pair))
        self.steps.append(NoiseHook("gate_loss", (pair[0],)))
        self.steps.append(NoiseHook("gate_loss", (pair[1],)))

    def cz(self, pair: Tuple[int, int] = PAIR) -> "CircuitBuilder":
        self.steps.append(CanonicalCZ(pair))
        self._two_qubit_hooks(pair)
        return self

    def cnot(self, control: int, target: int) -> "CircuitBuilder":
        self.steps.append(CanonicalCNOT(control, target))
        self._two_qubit_hooks((control, target))
        return self

    def gate(self, gate: GateOp) -> "CircuitBuilder":
        self.steps.append(gate)
        return self

    def hook(self, kind: str, sites: Tuple[int, ...], theta: float = 0.0) -> "CircuitBuilder":
        self.steps.append(NoiseHook(kind, tuple(sites), theta))
        return self

    def measure(self, *sites: int) -> "CircuitBuilder":
        self.steps.extend(Measure(site) for site in sites)
        return self

    def hold(self, dt: float) -> "CircuitBuilder":
        if dt < 0:
            raise ValueError("hold time must be >= 0.")
        self.steps.append(Hold(dt))
        return self

    def leak_pulse(self, site: int = DATA) -> "CircuitBuilder":
        self.steps.append(LeakPulse(site))
        return self

    def build(self, semantics: LeakSemantics = LeakSemantics()) -> CircuitSpec:
        return CircuitSpec(self.name, self.roles, tuple(self.steps), semantics)


# ------------------------------------------------------------------ #
# Leakage-detection units
# ------------------------------------------------------------------ #
STANDARD_SEMANTICS = LeakSemantics(
    kind="standard",
    detect_site=ANCILLA,
    leak_outcome=Outcome.ONE,
    clean_outcome=Outcome.ZERO,
    information_site=DATA,
)
SWAP_SEMANTICS = LeakSemantics(
    kind="swap",
    detect_site=DATA,
    leak_outcome=Outcome.NEITHER,
    clean_outcome=Outcome.ZERO,
    information_site=ANCILLA,
    refill_state="0",
)


def _teleport_semantics(refill_state: str) -> LeakSemantics:
    return LeakSemantics(
        kind="teleport",
        detect_site=DATA,
        leak_outcome=Outcome.NEITHER,
        clean_outcome=None,
        information_site=ANCILLA,
        refill_state=refill_state,
    )


def _addressed_rx_half_pi(builder: CircuitBuilder) -> None:
    """R_x(pi/2) on the ancilla only: the data's two light-shift pi pulses undo its half."""
    builder.global_r(math.pi / 4, 0.0)
    builder.local_z(math.pi, DATA)
    builder.global_r(math.pi / 4, 0.0)
    builder.local_z(math.pi, DATA)


def append_ldu(builder: CircuitBuilder, kind: LduKind, leading_pulse: bool = True) -> None:
    """Append the gate sequence of one unit without its readout."""
    kind = LduKind(kind)
    if kind is LduKind.STANDARD_CANONICAL:
        builder.gate(CanonicalX(ANCILLA)).gate(CanonicalH(ANCILLA))
        builder.cz().gate(CanonicalX(DATA)).cz().gate(CanonicalX(DATA))
        builder.gate(CanonicalH(ANCILLA))
    elif kind is LduKind.STANDARD_NATIVE:
        if leading_pulse:
            builder.global_r(math.pi / 2, 0.0)
        builder.entangle(math.pi / 2, math.pi / 2).entangle(math.pi / 2, math.pi / 2)
        builder.global_r(math.pi / 2, 0.0).virtual_z(math.pi)
    elif kind is LduKind.STANDARD_GLOBAL_ONLY:
        for gate_type in (CanonicalH, CanonicalZ):
            builder.gate(gate_type(DATA)).gate(gate_type(ANCILLA))
        builder.cz()
        builder.gate(CanonicalX(DATA)).gate(CanonicalX(ANCILLA))
        builder.cz()
        for gate_type in (CanonicalH, CanonicalZ):
            builder.gate(gate_type(DATA)).gate(gate_type(ANCILLA))
    elif kind is LduKind.STANDARD_HW_OPT:
        if leading_pulse:
            builder.global_r(math.pi / 2, 0.0)
        builder.entangle(math.pi, 0.0)
        builder.global_r(-math.pi / 2, 0.0).virtual_z(math.pi)
    elif kind is LduKind.STANDARD_CNOT:
        builder.cnot(DATA, ANCILLA).gate(CanonicalX(DATA))
        builder.cnot(DATA, ANCILLA).gate(CanonicalX(DATA)).gate(CanonicalX(ANCILLA))
    elif kind is LduKind.SWAP:
        builder.cnot(DATA, ANCILLA).cnot(ANCILLA, DATA)
    elif kind is LduKind.TELEPORT_CANONICAL:
        builder.gate(CanonicalH(ANCILLA)).cz().gate(CanonicalH(DATA))
        builder.measure(DATA).gate(CanonicalH(ANCILLA)).gate(FeedbackZ(ANCILLA, DATA))
    elif kind is LduKind.TELEPORT_NATIVE:
        if leading_pulse:
            _addressed_rx_half_pi(builder)
        builder.entangle(math.pi / 2, 0.0)
        builder.global_r(-math.pi / 2, math.pi / 2).virtual_z(-math.pi / 2)
        builder.measure(DATA).gate(FeedbackZ(ANCILLA, DATA))


def semantics_of(kind: LduKind) -> LeakSemantics:
    kind = LduKind(kind)
    if kind.is_standard:
        return STANDARD_SEMANTICS
    if kind is LduKind.SWAP:
        return SWAP_SEMANTICS
    if kind is LduKind.TELEPORT_CANONICAL:
        return _teleport_semantics("0")
    return _teleport_semantics("+x")


def build_ldu(kind: LduKind, leading_pulse: bool = True, measure_data: bool = False) -> CircuitSpec:
    """One unit with its readout.

    Standard units read the ancilla (and the data too with ``measure_data``); SWAP
    reads the data site; teleport units read the data site mid-circuit and apply
    the feedback Z to the ancilla.
    """
    kind = LduKind(kind)
    builder = CircuitBuilder(kind.value)
    append_ldu(builder, kind, leading_pulse)
    if kind.is_standard:
        if measure_data:
            builder.measure(DATA)
        builder.measure(ANCILLA)
    elif kind is LduKind.SWAP:
        builder.measure(DATA)
    return builder.build(semantics_of(kind))


# ------------------------------------------------------------------ #
# Experiment sequences
# ------------------------------------------------------------------ #
PREP_ANGLES: Dict[str, Tuple[float, float]] = {
    "-y": (0.0, 0.0),
    "+y": (math.pi, 0.0),
    "+x": (math.pi / 2, 0.0),
    "-x": (-math.pi / 2, 0.0),
    "0": (math.pi / 2, -math.pi / 2),
    "1": (math.pi / 2, math.pi / 2),
}
PREP_TARGETS = tuple(PREP_ANGLES)

BLOCH_VECTORS: Dict[str, Tuple[complex, complex]] = {
    "0": (1, 0),
    "1": (0, 1),
    "+x": (1 / math.sqrt(2), 1 / math.sqrt(2)),
    "-x": (1 / math.sqrt(2), -1 / math.sqrt(2)),
    "+y": (1 / math.sqrt(2), 1j / math.sqrt(2)),
    "-y": (1 / math.sqrt(2), -1j / math.sqrt(2)),
}


def target_vector(target: str) -> np.ndarray:
    """Six-level vector of a named Bloch-axis state."""
    if target not in BLOCH_VECTORS:
        raise ValueError(f"unknown target {target!r}; expected one of {', '.join(PREP_TARGETS)}.")
    vec = np.zeros(LEVELS, dtype=complex)
    vec[0], vec[1] = BLOCH_VECTORS[target]
    return vec


def append_state_prep(builder: CircuitBuilder, target: str, data_site: int = DATA) -> None:
    if target not in PREP_ANGLES:
        raise ValueError(f"unknown target {target!r}; expected one of {', '.join(PREP_TARGETS)}.")
    xi, theta = PREP_ANGLES[target]
    builder.global_r(math.pi / 2, 0.0)
    if xi:
        builder.local_z(xi, data_site)
    if theta:
        builder.global_r(theta, math.pi / 2)


def build_state_prep(target: str, data_site: int = DATA) -> CircuitSpec:
    """Data on the ``target`` axis, ancilla left at -y (what a unit expects after its leading pulse)."""
    builder = CircuitBuilder(f"prep[{target}]")
    append_state_prep(builder, target, data_site)
    return builder.build()


def build_prepared_ldu(kind: LduKind, target: str, measure_data: bool = False) -> CircuitSpec:
    """State preparation followed by a unit whose leading pulse it absorbs."""
    kind = LduKind(kind)
    if kind not in (LduKind.STANDARD_NATIVE, LduKind.STANDARD_HW_OPT):
        raise ValueError("only native standard units absorb the preparation pulse.")
    builder = CircuitBuilder(f"{kind.value}[{target}]")
    append_state_prep(builder, target)
    append_ldu(builder, kind, leading_pulse=False)
    if measure_data:
        builder.measure(DATA)
    builder.measure(ANCILLA)
    return builder.build(STANDARD_SEMANTICS)


def build_ramsey(with_ldu: bool, phi: float) -> CircuitSpec:
    builder = CircuitBuilder(f"ramsey[ldu={int(with_ldu)}]")
    builder.global_r(math.pi / 2, 0.0)
    if with_ldu:
        append_ldu(builder, LduKind.STANDARD_NATIVE)
    builder.global_r(math.pi / 2, phi)
    builder.measure(DATA, ANCILLA)
    return builder.build()


def build_bell_fidelity(n_loops: int, phi: Optional[float] = None) -> CircuitSpec:
    """Bell state after ``n_loops`` echoed gates; ``phi`` adds the parity analysis pulse."""
    if n_loops < 1 or n_loops % 2 == 0:
        raise ValueError("n_loops must be a positive odd integer (even counts return a product state).")
    builder = CircuitBuilder(f"bell[{n_loops}]")
    builder.global_r(math.pi / 2, 0.0)
    for _ in range(n_loops):
        builder.entangle(math.pi / 2, math.pi / 2)
    builder.global_r(math.pi / 2, 0.0)
    if phi is not None:
        builder.global_r(math.pi / 2, phi)
    builder.measure(DATA, ANCILLA)
    return builder.build()


def build_anti_trap(hold: float) -> CircuitSpec:
    """Single atom: Q1 -> RYD, hold, RYD -> Q1, retention readout."""
    builder = CircuitBuilder("anti_trap", n=1, roles=(SiteRole.DATA,))
    builder.gate(RydbergPi(DATA)).hold(hold).gate(RydbergPi(DATA)).measure(DATA)
    return builder.build(LeakSemantics(kind="retention", detect_site=DATA, leak_outcome=Outcome.NEITHER))


def append_teleport_readout(builder: CircuitBuilder, phi: float) -> None:
    builder.global_r(math.pi / 4, phi)
    builder.local_z(math.pi, DATA)
    builder.global_r(math.pi / 4, phi)
    builder.measure(ANCILLA)


def build_teleport_readout(phi: float, leading_pulse: bool = True, target: Optional[str] = None) -> CircuitSpec:
    """Native teleport unit followed by an analysis pulse that only the ancilla feels.

    With ``target`` the data is first prepared on that axis from Q0 and the unit's
    leading pulse is absorbed by the preparation.
    """
    if target is None:
        builder = CircuitBuilder(f"teleport_readout[{phi:.6g}]")
    else:
        builder = CircuitBuilder(f"teleport_readout[{target},{phi:.6g}]")
        append_state_prep(builder, target)
        leading_pulse = False
    append_ldu(builder, LduKind.TELEPORT_NATIVE, leading_pulse)
    append_teleport_readout(builder, phi)
    return builder.build(semantics_of(LduKind.TELEPORT_NATIVE))


# ------------------------------------------------------------------ #
# Process matrix
# ------------------------------------------------------------------ #
PROCESS_LABELS = ("00", "01", "10", "11", "l0", "l1")
# (data level, ancilla level) per label; joint index is data + 6 * ancilla.
PROCESS_BASIS = (
    (SiteLevel.Q0, SiteLevel.Q0),
    (SiteLevel.Q0, SiteLevel.Q1),
    (SiteLevel.Q1, SiteLevel.Q0),
    (SiteLevel.Q1, SiteLevel.Q1),
    (SiteLevel.L3, SiteLevel.Q0),
    (SiteLevel.L3, SiteLevel.Q1),
)


@dataclass(frozen=True)
class ProcessCheck:
    identity_block: bool
    flip_block: bool
    off_blocks_zero: bool
    global_phase: float
    flip_phases: Tuple[float, float]

    @property
    def ok(self) -> bool:
        return self.identity_block and self.flip_block and self.off_blocks_zero


def extract_process_matrix(kind: LduKind) -> np.ndarray:
    """6x6 restriction of a standard unit's noiseless unitary to the qubit and leaked-data span."""
    kind = LduKind(kind)
    if not kind.is_standard:
        raise ValueError(f"process matrices are defined for standard units only, not {kind.value}.")
    circuit = build_ldu(kind)
    unitary = circuit_unitary(circuit.gates(), circuit.n, circuit.roles)
    idx = [int(d) + LEVELS * int(a) for d, a in PROCESS_BASIS]
    return unitary[np.ix_(idx, idx)]


def check_process_matrix(matrix: np.ndarray, tol: float = 1e-9) -> ProcessCheck:
    upper = matrix[:4, :4]
    lower = matrix[4:, 4:]
    phase = upper[0, 0] / abs(upper[0, 0]) if abs(upper[0, 0]) > tol else 1.0
    identity_block = bool(np.max(np.abs(upper - phase * np.eye(4))) <= tol)
    flip_block = bool(
        abs(lower[0, 0]) <= tol
        and abs(lower[1, 1]) <= tol
        and abs(abs(lower[0, 1]) - 1.0) <= tol
        and abs(abs(lower[1, 0]) - 1.0) <= tol
    )
    off = np.concatenate([matrix[:4, 4:].ravel(), matrix[4:, :4].ravel()])
    return ProcessCheck(
        identity_block=identity_block,
        flip_block=flip_block,
        off_blocks_zero=bool(np.max(np.abs(off)) <= tol),
        global_phase=float(np.angle(phase)),
        flip_phases=(float(np.angle(lower[0, 1])), float(np.angle(lower[1, 0]))),
    )


# ------------------------------------------------------------------ #
# Text form
# ------------------------------------------------------------------ #
_STEP_REGISTRY = {cls.__name__: cls for cls in STEP_TYPES}


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value) or "()"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str, hint):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is Union:
        if text == "none":
            return None
        hint = next(arg for arg in args if arg is not type(None))
        return _parse_value(text, hint)
    if origin is tuple:
        if text == "()":
            return ()
        item = args[0]
        return tuple(_parse_value(part, item) for part in text.split(","))
    if hint is float:
        return float(text)
    if hint is int:
        return int(text)
    if isinstance(hint, type) and issubclass(hint, Enum):
        return hint(text)
    return text


def format_circuit(circuit: CircuitSpec) -> str:
    """One step per line; angles in radians, times in seconds."""
    semantics = " ".join(f"{f.name}={_format_value(getattr(circuit.semantics, f.name))}" for f in fields(LeakSemantics))
    lines = [
        CIRCUIT_SCHEMA,
        f"@circuit name={circuit.name} roles={','.join(role.value for role in circuit.roles)}",
        f"@semantics {semantics}",
    ]
    for step in circuit.steps:
        params = " ".join(f"{f.name}={_format_value(getattr(step, f.name))}" for f in fields(step))
        lines.append(f"{type(step).__name__} {params}".rstrip())
    return "\n".join(lines) + "\n"


def _parse_fields(cls, tokens: Sequence[str]):
    hints = typing.get_type_hints(cls)
    values = {}
    for token in tokens:
        key, _, text = token.partition("=")
        if key not in hints:
            raise ValueError(f"{cls.__name__} has no parameter {key!r}.")
        values[key] = _parse_value(text, hints[key])
    return cls(**values)


def parse_circuit(text: str) -> CircuitSpec:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != CIRCUIT_SCHEMA:
        raise ValueError("missing circuit schema header.")
    name, roles, semantics = "", (), LeakSemantics()
    steps: List[Step] = []
    for line in lines[1:]:
        head, *tokens = line.split()
        if head == "@circuit":
            meta = dict(token.partition("=")[::2] for token in tokens)
            name = meta["name"]
            roles = tuple(SiteRole(role) for role in meta["roles"].split(","))
        elif head == "@semantics":
            semantics = _parse_fields(LeakSemantics, tokens)
        elif head in _STEP_REGISTRY:
            steps.append(_parse_fields(_STEP_REGISTRY[head], tokens))
        else:
            raise ValueError(f"unknown step kind {head!r}.")
    return CircuitSpec(name, roles, tuple(steps), semantics)
