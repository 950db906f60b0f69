"""Native and canonical gate set with its action on all six levels.

Single-site rotations act on the ``{Q0, Q1}`` block and leave ``L3, L4, RYD, LOST``
untouched. Rotation axes are taken relative to each site's local-oscillator
phase: a site whose frame offset is ``delta`` sees ``GlobalR(theta, phi)`` as a
rotation about ``phi - delta``. ``VirtualZ`` only advances that offset, so the
simulated state differs from the logical state by ``Rz(delta)`` per site until
:func:`resolve_frame` is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .qstate import (
    LEVELS,
    RegisterState,
    SiteLevel,
    SiteRole,
    apply_operator,
    embed_operator,
    is_unitary,
    level_probabilities,
)


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


# ------------------------------------------------------------------ #
# Gate descriptions
# ------------------------------------------------------------------ #
@dataclass(frozen=True)
class GlobalR:
    """Equatorial rotation by ``theta`` about axis ``phi`` on every non-reservoir site."""

    theta: float
    phi: float = 0.0


@dataclass(frozen=True)
class VirtualZ:
    """Phase advance of one site's oscillator, or of every site when ``site`` is None."""

    theta: float
    site: Optional[int] = None


@dataclass(frozen=True)
class LocalZ:
    """Physical light-shift Z rotation on one site."""

    theta: float
    site: int


@dataclass(frozen=True)
class Entangle:
    """Echoed dressing gate: ``Rzz(theta/2)``, global ``R(pi, echo_phi)``, ``Rzz(theta/2)``."""

    theta: float
    pair: Tuple[int, int]
    echo_phi: float = math.pi / 2


@dataclass(frozen=True)
class CanonicalCZ:
    pair: Tuple[int, int]


@dataclass(frozen=True)
class CanonicalH:
    site: int


@dataclass(frozen=True)
class CanonicalX:
    site: int


@dataclass(frozen=True)
class CanonicalZ:
    site: int


@dataclass(frozen=True)
class CanonicalCNOT:
    control: int
    target: int


@dataclass(frozen=True)
class FeedbackZ:
    """Z on ``site`` conditioned on the measured bit of ``source``."""

    site: int
    source: int


@dataclass(frozen=True)
class RydbergPi:
    """Ideal pi pulse exchanging ``Q1`` and ``RYD`` on one site."""

    site: int


GateOp = Union[
    GlobalR,
    VirtualZ,
    LocalZ,
    Entangle,
    CanonicalCZ,
    CanonicalH,
    CanonicalX,
    CanonicalZ,
    CanonicalCNOT,
    FeedbackZ,
    RydbergPi,
]

GATE_TYPES = (
    GlobalR,
    VirtualZ,
    LocalZ,
    Entangle,
    CanonicalCZ,
    CanonicalH,
    CanonicalX,
    CanonicalZ,
    CanonicalCNOT,
    FeedbackZ,
    RydbergPi,
)


@dataclass(frozen=True)
class PhaseFrame:
    offsets: Tuple[float, ...]

    @classmethod
    def zeros(cls, n: int) -> "PhaseFrame":
        return cls(tuple(0.0 for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.offsets)

    def advance(self, theta: float, site: Optional[int] = None) -> "PhaseFrame":
        if not math.isfinite(theta):
            raise ValueError("phase advance must be finite.")
        if site is None:
            return PhaseFrame(tuple(delta + theta for delta in self.offsets))
        _check_site(site, self.n)
        offsets = list(self.offsets)
        offsets[site] += theta
        return PhaseFrame(tuple(offsets))


# ------------------------------------------------------------------ #
# Matrix building blocks
# ------------------------------------------------------------------ #
def rotation(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -1j * s * np.exp(-1j * phi)], [-1j * s * np.exp(1j * phi), c]],
        dtype=complex,
    )


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rzz(theta: float) -> np.ndarray:
    """``exp(-i theta/2 Z(x)Z)`` on two qubits."""
    return np.diag(np.exp(-0.5j * theta * np.array([1, -1, -1, 1])))


def embed_qubit(matrix: np.ndarray) -> np.ndarray:
    """6x6 operator acting as ``matrix`` on the qubit block and identity elsewhere."""
    out = np.eye(LEVELS, dtype=complex)
    out[:2, :2] = matrix
    return out


def _pair_index(level_a: int, level_b: int) -> int:
    return level_a + LEVELS * level_b


def embed_pair_block(matrix: np.ndarray) -> np.ndarray:
    """36x36 operator acting as ``matrix`` on qubit(x)qubit, identity elsewhere.

    ``matrix`` is indexed little-endian, ``q = q_a + 2 * q_b``.
    """
    out = np.eye(LEVELS * LEVELS, dtype=complex)
    idx = [_pair_index(q % 2, q // 2) for q in range(4)]
    out[np.ix_(idx, idx)] = matrix
    return out


def two_qubit(op_a: np.ndarray, op_b: np.ndarray) -> np.ndarray:
    """4x4 little-endian product ``op_b (x) op_a``."""
    return np.kron(op_b, op_a)


def _check_site(site: int, n: int) -> None:
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for a {n}-site register.")


def _check_pair(pair: Sequence[int], n: int) -> None:
    a, b = pair
    _check_site(a, n)
    _check_site(b, n)
    if a == b:
        raise ValueError(f"pair sites must be distinct, got {tuple(pair)}.")


def dressing_matrix(theta: float) -> np.ndarray:
    """Bare ``Rzz(theta)`` on the pair's qubit block, identity when either atom is out of it."""
    return embed_pair_block(rzz(theta))


@lru_cache(maxsize=4096)
def _entangle_matrix(theta: float, phi_a: float, phi_b: float, scale: float = 1.0) -> np.ndarray:
    # A leaked partner sees no dressing, so the remaining atom gets only the echo pulse.
    echo = np.kron(embed_qubit(rotation(math.pi * scale, phi_b)), embed_qubit(rotation(math.pi * scale, phi_a)))
    half = dressing_matrix(theta / 2)
    full = half @ echo @ half
    full.setflags(write=False)
    return full


@lru_cache(maxsize=4096)
def _global_matrix(theta: float, phis: Tuple[float, ...]) -> np.ndarray:
    matrix = np.ones((1, 1), dtype=complex)
    for phi in phis:
        matrix = np.kron(embed_qubit(rotation(theta, phi)), matrix)
    matrix.setflags(write=False)
    return matrix


def _rydberg_pi() -> np.ndarray:
    out = np.eye(LEVELS, dtype=complex)
    q1, ryd = int(SiteLevel.Q1), int(SiteLevel.RYD)
    out[[q1, ryd], [q1, ryd]] = 0.0
    out[q1, ryd] = out[ryd, q1] = 1.0
    return out


# ------------------------------------------------------------------ #
# Public operations
# ------------------------------------------------------------------ #
def gate_sites(gate: GateOp, roles: Sequence[SiteRole]) -> Tuple[int, ...]:
    """Sites a gate's matrix acts on, in the order used by :func:`matrix_of`."""
    n = len(roles)
    if isinstance(gate, GlobalR):
        return tuple(i for i, role in enumerate(roles) if role is not SiteRole.RESERVOIR)
    if isinstance(gate, (Entangle, CanonicalCZ)):
        _check_pair(gate.pair, n)
        return tuple(gate.pair)
    if isinstance(gate, CanonicalCNOT):
        _check_pair((gate.control, gate.target), n)
        return (gate.control, gate.target)
    if isinstance(gate, VirtualZ):
        if gate.site is None:
            return tuple(range(n))
        _check_site(gate.site, n)
        return (gate.site,)
    if isinstance(gate, FeedbackZ):
        _check_site(gate.site, n)
        _check_site(gate.source, n)
        return (gate.site,)
    _check_site(gate.site, n)
    return (gate.site,)


def matrix_of(
    gate: GateOp,
    frame: PhaseFrame,
    roles: Optional[Sequence[SiteRole]] = None,
    area_error: float = 0.0,
) -> np.ndarray:
    """Unitary of ``gate`` on the sites returned by :func:`gate_sites`.

    ``area_error`` scales the area of every global pulse, including the echo of
    :class:`Entangle`, by ``1 + area_error``.
    """
    roles = tuple(roles) if roles is not None else tuple(SiteRole.DATA for _ in range(frame.n))
    sites = gate_sites(gate, roles)
    scale = 1.0 + area_error

    if isinstance(gate, GlobalR):
        return _global_matrix(float(gate.theta * scale), tuple(float(gate.phi - frame.offsets[s]) for s in sites))
    if isinstance(gate, VirtualZ):
        return np.eye(LEVELS ** len(sites), dtype=complex)
    if isinstance(gate, LocalZ):
        return embed_qubit(rz(gate.theta))
    if isinstance(gate, Entangle):
        a, b = gate.pair
        return _entangle_matrix(
            float(gate.theta),
            float(gate.echo_phi - frame.offsets[a]),
            float(gate.echo_phi - frame.offsets[b]),
            float(scale),
        )
    if isinstance(gate, CanonicalCZ):
        return embed_pair_block(np.diag([1, 1, 1, -1]).astype(complex))
    if isinstance(gate, CanonicalCNOT):
        # Sites are (control, target): control is the low-order qubit.
        cnot = np.zeros((4, 4), dtype=complex)
        for q in range(4):
            control, target = q % 2, q // 2
            cnot[control + 2 * (target ^ control), q] = 1.0
        return embed_pair_block(cnot)
    if isinstance(gate, CanonicalH):
        return embed_qubit(HADAMARD)
    if isinstance(gate, CanonicalX):
        return embed_qubit(PAULI_X)
    if isinstance(gate, CanonicalZ):
        return embed_qubit(PAULI_Z)
    if isinstance(gate, RydbergPi):
        return _rydberg_pi()
    if isinstance(gate, FeedbackZ):
        raise ValueError("FeedbackZ depends on a measured bit and has no fixed matrix.")
    raise TypeError(f"unsupported gate {gate!r}")


def apply_gate(
    state: RegisterState,
    gate: GateOp,
    frame: PhaseFrame,
    area_error: float = 0.0,
    classical_bits: Optional[Mapping[int, int]] = None,
    strict: bool = False,
) -> Tuple[RegisterState, PhaseFrame]:
    """Apply one gate; ``strict`` also checks that no LOST population moved."""
    if frame.n != state.n:
        raise ValueError("frame and state disagree on the number of sites.")
    if isinstance(gate, VirtualZ):
        gate_sites(gate, state.roles)
        return state, frame.advance(gate.theta, gate.site)
    if isinstance(gate, FeedbackZ):
        gate_sites(gate, state.roles)
        bit = (classical_bits or {}).get(gate.source)
        if bit is None:
            raise ValueError(f"no classical bit recorded for site {gate.source}.")
        return (state, frame.advance(math.pi, gate.site)) if bit == 1 else (state, frame)
    sites = gate_sites(gate, state.roles)
    if not sites:
        return state, frame
    out = apply_operator(state, matrix_of(gate, frame, state.roles, area_error), sites)
    if strict:
        check_lost_conserved(state, out, gate)
    return out, frame


def check_lost_conserved(before: RegisterState, after: RegisterState, gate: GateOp, tol: float = 1e-10) -> None:
    lost = int(SiteLevel.LOST)
    drift = level_probabilities(after).table[:, lost] - level_probabilities(before).table[:, lost]
    if np.max(np.abs(drift)) > tol:
        raise RuntimeError(f"{type(gate).__name__} moved population into or out of LOST.")


def frame_operator(frame: PhaseFrame) -> np.ndarray:
    """Full-space ``Rz(delta_i)`` per site, mapping the simulated state to the logical one."""
    matrix = np.ones((1, 1), dtype=complex)
    for delta in frame.offsets:
        matrix = np.kron(embed_qubit(rz(delta)), matrix)
    return matrix


def resolve_frame(state: RegisterState, frame: PhaseFrame) -> RegisterState:
    out = state
    for site, delta in enumerate(frame.offsets):
        if delta:
            out = apply_operator(out, embed_qubit(rz(delta)), [site])
    return out


def circuit_unitary(
    gates: Sequence[GateOp],
    n: int,
    roles: Optional[Sequence[SiteRole]] = None,
    area_error: float = 0.0,
) -> np.ndarray:
    """Frame-resolved unitary of a feedback-free gate list."""
    roles = tuple(roles) if roles is not None else tuple(SiteRole.DATA for _ in range(n))
    if len(roles) != n:
        raise ValueError("roles must name every site.")
    frame = PhaseFrame.zeros(n)
    total = np.eye(LEVELS ** n, dtype=complex)
    for gate in gates:
        if isinstance(gate, FeedbackZ):
            raise ValueError("circuit_unitary cannot contain FeedbackZ.")
        if isinstance(gate, VirtualZ):
            gate_sites(gate, roles)
            frame = frame.advance(gate.theta, gate.site)
            continue
        sites = gate_sites(gate, roles)
        if not sites:
            continue
        total = embed_operator(matrix_of(gate, frame, roles, area_error), sites, n) @ total
    total = frame_operator(frame) @ total
    if not is_unitary(total):
        raise RuntimeError("circuit product drifted from unitarity.")
    return total
