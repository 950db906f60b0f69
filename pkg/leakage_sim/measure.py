"""Three-outcome low-loss state detection, feedback bits and postselection."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .config import NoiseModel
from .models import CountsRow, CountsTable
from .qstate import LEVELS, RegisterState, SiteLevel, StateMode, apply_operator, project

SHOTS_SCHEMA = "# leakage-sim/shots/v1"


class Outcome(str, Enum):
    ZERO = "0"
    ONE = "1"
    NEITHER = "N"


class FeedbackBit(str, Enum):
    ZERO = "0"
    ONE = "1"
    ERASURE = "E"


OUTCOME_LEVELS: Dict[Outcome, Tuple[SiteLevel, ...]] = {
    Outcome.ZERO: (SiteLevel.Q0, SiteLevel.L3),
    Outcome.ONE: (SiteLevel.Q1, SiteLevel.L4),
    Outcome.NEITHER: (SiteLevel.RYD, SiteLevel.LOST),
}

OutcomeKey = Tuple[Optional[Outcome], ...]


def ideal_outcome(level: SiteLevel) -> Outcome:
    for outcome, levels in OUTCOME_LEVELS.items():
        if SiteLevel(level) in levels:
            return outcome
    raise ValueError(f"unknown level {level!r}")


def feedback_bit(outcome: Outcome) -> FeedbackBit:
    """ONE asks for a Z correction; NEITHER flags an erasure and corrects nothing."""
    return {
        Outcome.ZERO: FeedbackBit.ZERO,
        Outcome.ONE: FeedbackBit.ONE,
        Outcome.NEITHER: FeedbackBit.ERASURE,
    }[Outcome(outcome)]


def _ket_bra(out_level: int, in_level: int) -> np.ndarray:
    op = np.zeros((LEVELS, LEVELS), dtype=complex)
    op[out_level, in_level] = 1.0
    return op


def _class_operators(outcome: Outcome) -> List[np.ndarray]:
    """Collapse operators of one ideal outcome; NEITHER leaves the site LOST."""
    lost = int(SiteLevel.LOST)
    if outcome is Outcome.NEITHER:
        return [_ket_bra(lost, int(level)) for level in OUTCOME_LEVELS[outcome]]
    return [sum(_ket_bra(int(level), int(level)) for level in OUTCOME_LEVELS[outcome])]


def _loss_operators(outcome: Outcome) -> List[np.ndarray]:
    lost = int(SiteLevel.LOST)
    return [_ket_bra(lost, int(level)) for level in OUTCOME_LEVELS[outcome]]


def _flip(outcome: Outcome) -> Outcome:
    return {Outcome.ZERO: Outcome.ONE, Outcome.ONE: Outcome.ZERO}.get(outcome, outcome)


class LlsdResult(NamedTuple):
    outcome: Outcome
    state: RegisterState
    retained: bool


@dataclass(frozen=True, eq=False)
class MeasurementBranch:
    """Unnormalised density-mode branch carrying one reported outcome."""

    outcome: Outcome
    state: RegisterState

    @property
    def weight(self) -> float:
        return self.state.norm()


def llsd(
    state: RegisterState,
    site: int,
    model: NoiseModel,
    rng: Optional[np.random.Generator] = None,
) -> LlsdResult:
    """Sample one detection of ``site``; the returned state is normalised."""
    if not 0 <= site < state.n:
        raise ValueError(f"site {site} out of range for a {state.n}-site register.")
    if not state.is_pure:
        if rng is None:
            raise ValueError("sampling a measurement requires an rng.")
        branches = llsd_branches(state, site, model)
        weights = np.array([b.weight for b in branches])
        pick = branches[int(rng.choice(len(branches), p=weights / weights.sum()))]
        if pick.outcome is Outcome.NEITHER:
            return LlsdResult(pick.outcome, pick.state.normalized(), False)
        lost_weight, lost_part = project(pick.state, site, [SiteLevel.LOST])
        if rng.random() < lost_weight / pick.weight:
            return LlsdResult(pick.outcome, lost_part.normalized(), False)
        kept_levels = [level for level in SiteLevel if level is not SiteLevel.LOST]
        return LlsdResult(pick.outcome, project(pick.state, site, kept_levels)[1].normalized(), True)
    if rng is None:
        raise ValueError("sampling a measurement requires an rng.")

    candidates: List[Tuple[Outcome, RegisterState]] = []
    for outcome in Outcome:
        for op in _class_operators(outcome):
            candidates.append((outcome, apply_operator(state, op, [site])))
    weights = np.array([branch.norm() for _, branch in candidates])
    true_outcome, collapsed = candidates[int(rng.choice(len(candidates), p=weights / weights.sum()))]
    collapsed = collapsed.normalized()

    retained = true_outcome is not Outcome.NEITHER
    if retained and rng.random() < model.p_meas_loss:
        jumps = [apply_operator(collapsed, op, [site]) for op in _loss_operators(true_outcome)]
        jump_weights = np.array([jump.norm() for jump in jumps])
        collapsed = jumps[int(rng.choice(len(jumps), p=jump_weights / jump_weights.sum()))].normalized()
        retained = False

    reported = true_outcome
    if true_outcome is not Outcome.NEITHER and rng.random() < model.eps_read:
        reported = _flip(true_outcome)
    return LlsdResult(reported, collapsed, retained)


def llsd_branches(state: RegisterState, site: int, model: NoiseModel) -> List[MeasurementBranch]:
    """Exact branches of one detection, keyed by the reported outcome.

    Measurement-induced loss is folded into each branch's state (the site ends in
    LOST for that part of the weight); branches with zero weight are dropped.
    """
    if state.is_pure:
        state = RegisterState(np.outer(state.data, state.data.conj()), StateMode.DENSITY, state.roles)
    per_class: Dict[Outcome, np.ndarray] = {}
    for outcome in Outcome:
        rho = sum(apply_operator(state, op, [site]).data for op in _class_operators(outcome))
        if outcome is not Outcome.NEITHER and model.p_meas_loss > 0:
            projected = RegisterState(rho, StateMode.DENSITY, state.roles)
            lost = sum(apply_operator(projected, op, [site]).data for op in _loss_operators(outcome))
            rho = (1.0 - model.p_meas_loss) * rho + model.p_meas_loss * lost
        per_class[outcome] = rho

    eps = model.eps_read
    reported = {
        Outcome.ZERO: (1.0 - eps) * per_class[Outcome.ZERO] + eps * per_class[Outcome.ONE],
        Outcome.ONE: eps * per_class[Outcome.ZERO] + (1.0 - eps) * per_class[Outcome.ONE],
        Outcome.NEITHER: per_class[Outcome.NEITHER],
    }
    branches = []
    for outcome, rho in reported.items():
        branch = MeasurementBranch(outcome, RegisterState(rho, StateMode.DENSITY, state.roles))
        if branch.weight > 1e-15:
            branches.append(branch)
    return branches


def outcome_probabilities(state: RegisterState, site: int, model: NoiseModel) -> Dict[Outcome, float]:
    probs = {outcome: 0.0 for outcome in Outcome}
    for branch in llsd_branches(state, site, model):
        probs[branch.outcome] += branch.weight
    return probs


# ------------------------------------------------------------------ #
# Shot records
# ------------------------------------------------------------------ #
@dataclass(frozen=True)
class ShotRecord:
    shot: int
    outcomes: OutcomeKey
    retained: Tuple[Optional[bool], ...]
    feedback: Tuple[Optional[FeedbackBit], ...] = ()
    seed_path: Tuple[int, ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.retained) != len(self.outcomes):
            raise ValueError("retained flags must cover every site.")
        for outcome, kept in zip(self.outcomes, self.retained):
            if outcome is Outcome.NEITHER and kept:
                raise ValueError("a site reading NEITHER cannot be retained.")


def _letter(value) -> str:
    return "-" if value is None else value.value


def format_shot_record(record: ShotRecord) -> str:
    """``shot<TAB>outcomes<TAB>retained<TAB>feedback<TAB>label<TAB>seed.path``."""
    retained = "".join("-" if r is None else ("1" if r else "0") for r in record.retained)
    return "\t".join(
        [
            str(record.shot),
            "".join(_letter(o) for o in record.outcomes),
            retained,
            "".join(_letter(f) for f in record.feedback) or "-",
            record.label or "-",
            ".".join(str(part) for part in record.seed_path) or "-",
        ]
    )


def parse_shot_record(line: str) -> ShotRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 6:
        raise ValueError(f"malformed shot record: {line!r}")
    shot, outcomes, retained, feedback, label, seed_path = parts
    return ShotRecord(
        shot=int(shot),
        outcomes=tuple(None if ch == "-" else Outcome(ch) for ch in outcomes),
        retained=tuple(None if ch == "-" else ch == "1" for ch in retained),
        feedback=() if feedback == "-" else tuple(None if ch == "-" else FeedbackBit(ch) for ch in feedback),
        seed_path=() if seed_path == "-" else tuple(int(part) for part in seed_path.split(".")),
        label="" if label == "-" else label,
    )


# ------------------------------------------------------------------ #
# Postselection
# ------------------------------------------------------------------ #
@dataclass(frozen=True)
class PostselectionRule:
    name: str
    predicate: Callable[[OutcomeKey], bool] = field(compare=False)

    def accepts(self, outcomes: OutcomeKey) -> bool:
        return bool(self.predicate(outcomes))


def _detected(site: int) -> Callable[[OutcomeKey], bool]:
    return lambda outcomes: site < len(outcomes) and outcomes[site] not in (None, Outcome.NEITHER)


ALWAYS = PostselectionRule("always", lambda outcomes: True)
ANCILLA_DETECTED = PostselectionRule("ancilla != N", _detected(1))
DATA_DETECTED = PostselectionRule("data != N", _detected(0))
BOTH_DETECTED = PostselectionRule("data != N and ancilla != N", lambda o: _detected(0)(o) and _detected(1)(o))

Interpreter = Callable[[OutcomeKey], str]


def tally_records(records: Iterable[ShotRecord]) -> Dict[OutcomeKey, float]:
    return dict(Counter(record.outcomes for record in records))


def postselect_tally(
    tally: Mapping[OutcomeKey, float],
    rule: PostselectionRule,
    interpret: Optional[Interpreter] = None,
    condition: str = "",
    data_site: int = 0,
    ancilla_site: int = 1,
) -> CountsTable:
    """Table rows over accepted outcome keys plus the excluded count."""
    grouped: Dict[Tuple[str, str, str], float] = {}
    excluded = 0.0
    total = 0.0
    for outcomes, count in tally.items():
        total += count
        if not rule.accepts(outcomes):
            excluded += count
            continue
        data = _letter(outcomes[data_site]) if data_site < len(outcomes) else "-"
        ancilla = _letter(outcomes[ancilla_site]) if ancilla_site < len(outcomes) else "-"
        meaning = interpret(outcomes) if interpret else ""
        grouped[(data, ancilla, meaning)] = grouped.get((data, ancilla, meaning), 0.0) + count
    rows = [
        CountsRow(condition=condition, data=data, ancilla=ancilla, interpretation=meaning, count=count)
        for (data, ancilla, meaning), count in sorted(grouped.items())
    ]
    return CountsTable(rule=rule.name, rows=rows, excluded=excluded, total=total)


def postselect(
    records: Sequence[ShotRecord],
    rule: PostselectionRule,
    interpret: Optional[Interpreter] = None,
    condition: str = "",
    data_site: int = 0,
    ancilla_site: int = 1,
) -> CountsTable:
    return postselect_tally(tally_records(records), rule, interpret, condition, data_site, ancilla_site)


def merge_tables(tables: Sequence[CountsTable], rule: str) -> CountsTable:
    rows = [row for table in tables for row in table.rows]
    return CountsTable(
        rule=rule,
        rows=rows,
        excluded=sum(t.excluded for t in tables),
        total=sum(t.total for t in tables),
    )


