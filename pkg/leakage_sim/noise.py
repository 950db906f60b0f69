"""Stochastic and irreversible processes as Kraus channels.

Density-mode states get the exact operator sum. Pure states get one sampled
jump with probability ``||K psi||**2`` or, for channels that carry a
``unitary_sampler``, one sampled unitary from the continuous unravelling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .config import NoiseModel
from .gates import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, embed_qubit, rz
from .qstate import LEVELS, QUBIT_LEVELS, RegisterState, SiteLevel, apply_kraus, apply_operator, kraus_effects

SINGLE_PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)
QUBIT = tuple(int(level) for level in QUBIT_LEVELS)


@dataclass(frozen=True, eq=False)
class Channel:
    """Kraus operators acting on ``sites`` (little-endian over that list)."""

    name: str
    sites: Tuple[int, ...]
    kraus: Tuple[np.ndarray, ...]
    unitary_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None

    def apply(self, state: RegisterState, rng: Optional[np.random.Generator] = None) -> RegisterState:
        if state.is_pure and self.unitary_sampler is not None:
            if rng is None:
                raise ValueError("sampling a channel on a pure state requires an rng.")
            return apply_operator(state, self.unitary_sampler(rng), self.sites)
        if state.is_pure:
            return apply_kraus(state, self.kraus, self.sites, rng, self.effects)
        return apply_kraus(state, self.kraus, self.sites)

    @cached_property
    def effects(self) -> np.ndarray:
        return kraus_effects(self.kraus)

    def completeness_error(self) -> float:
        dim = self.kraus[0].shape[0]
        total = sum(op.conj().T @ op for op in self.kraus)
        return float(np.max(np.abs(total - np.eye(dim))))

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return self.completeness_error() <= tol


def _ket_bra(out_level: int, in_level: int, dim: int = LEVELS) -> np.ndarray:
    op = np.zeros((dim, dim), dtype=complex)
    op[out_level, in_level] = 1.0
    return op


def _pair_index(level_a: int, level_b: int) -> int:
    return level_a + LEVELS * level_b


def _mixed_unitary(name: str, sites: Sequence[int], unitaries: Sequence[np.ndarray], probs: Sequence[float]) -> Channel:
    kraus = tuple(math.sqrt(p) * u for u, p in zip(unitaries, probs) if p > 0)
    return Channel(name, tuple(sites), kraus)


# ------------------------------------------------------------------ #
# Gate errors
# ------------------------------------------------------------------ #
def depolarize2_channel(pair: Sequence[int], f2q: float) -> Channel:
    """Uniform non-identity two-qubit Pauli with probability ``15/16 * (1 - f2q)``.

    The qubit block is contracted by ``f2q`` towards the maximally mixed state. Each
    Pauli factor acts as identity on leak levels, so a partner outside the qubit
    block leaves single-qubit depolarizing of the same contraction on the other atom.
    """
    if not 0.0 < f2q <= 1.0:
        raise ValueError("f2q must be in (0, 1].")
    p = 15.0 / 16.0 * (1.0 - f2q)
    unitaries = [np.eye(LEVELS * LEVELS, dtype=complex)]
    probs = [1.0 - p]
    for p_a, p_b in itertools.product(range(4), repeat=2):
        if p_a == 0 and p_b == 0:
            continue
        unitaries.append(np.kron(embed_qubit(SINGLE_PAULIS[p_b]), embed_qubit(SINGLE_PAULIS[p_a])))
        probs.append(p / 15.0)
    return _mixed_unitary("depolarize2", pair, unitaries, probs)


def depolarize2(
    state: RegisterState, pair: Sequence[int], f2q: float, rng: Optional[np.random.Generator] = None
) -> RegisterState:
    return depolarize2_channel(pair, f2q).apply(state, rng)


def pulse_error_channel(site: int, p: float) -> Channel:
    """Random X, Y or Z on the qubit block with total probability ``p``."""
    unitaries = [np.eye(LEVELS, dtype=complex)] + [embed_qubit(P) for P in (PAULI_X, PAULI_Y, PAULI_Z)]
    return _mixed_unitary("pulse_error", (site,), unitaries, [1.0 - p, p / 3, p / 3, p / 3])


def local_z_error_channel(site: int, sigma: float) -> Channel:
    """Gaussian over-rotation ``Rz(eps)``, ``eps ~ N(0, sigma)``.

    The averaged channel is dephasing with flip probability ``(1 - exp(-sigma**2/2)) / 2``.
    """
    q = (1.0 - math.exp(-0.5 * sigma * sigma)) / 2.0
    base = _mixed_unitary(
        "local_z_error",
        (site,),
        [np.eye(LEVELS, dtype=complex), embed_qubit(PAULI_Z)],
        [1.0 - q, q],
    )

    def sample(rng: np.random.Generator) -> np.ndarray:
        return embed_qubit(rz(rng.normal(0.0, sigma)))

    return Channel(base.name, base.sites, base.kraus, sample if sigma > 0 else None)


# ------------------------------------------------------------------ #
# Loss and Rydberg processes
# ------------------------------------------------------------------ #
def loss_channel(site: int, p: float) -> Channel:
    if not 0.0 <= p <= 1.0:
        raise ValueError("loss probability must be in [0, 1].")
    kraus = [math.sqrt(1.0 - p) * np.eye(LEVELS, dtype=complex)]
    if p > 0:
        kraus += [math.sqrt(p) * _ket_bra(int(SiteLevel.LOST), level) for level in range(LEVELS)]
    return Channel("loss", (site,), tuple(kraus))


def loss_event(
    state: RegisterState, site: int, p: float, rng: Optional[np.random.Generator] = None
) -> RegisterState:
    return loss_channel(site, p).apply(state, rng)


def _rate(tau: float) -> float:
    return 0.0 if math.isinf(tau) else 1.0 / tau


def decay_generator(model: NoiseModel) -> np.ndarray:
    """Rate matrix ``G[dest, src]`` with columns summing to zero."""
    gen = np.zeros((LEVELS, LEVELS))
    ryd, lost = int(SiteLevel.RYD), int(SiteLevel.LOST)
    gamma_decay = _rate(model.tau_ryd)
    gen[lost, ryd] += _rate(model.tau_at)
    gen[int(SiteLevel.L3), ryd] += gamma_decay * model.ryd_decay_to_l3
    gen[int(SiteLevel.L4), ryd] += gamma_decay * (1.0 - model.ryd_decay_to_l3)
    for level in range(LEVELS):
        if level not in (ryd, lost):
            gen[lost, level] += _rate(model.tau_vac)
    gen[np.diag_indices(LEVELS)] = -gen.sum(axis=0)
    return gen


def decay_transfer_matrix(model: NoiseModel, dt: float) -> np.ndarray:
    if dt < 0:
        raise ValueError("hold time must be >= 0.")
    return np.clip(expm(decay_generator(model) * dt), 0.0, 1.0)


def antitrap_channel(site: int, dt: float, model: NoiseModel) -> Channel:
    """Competing anti-trapping, radiative decay and vacuum loss over ``dt`` seconds."""
    transfer = decay_transfer_matrix(model, dt)
    kraus = [np.diag(np.sqrt(np.diag(transfer))).astype(complex)]
    for dest, src in itertools.product(range(LEVELS), repeat=2):
        if dest != src and transfer[dest, src] > 0:
            kraus.append(math.sqrt(transfer[dest, src]) * _ket_bra(dest, src))
    return Channel("antitrap_decay", (site,), tuple(kraus))


def antitrap_and_decay(
    state: RegisterState, dt: float, model: NoiseModel, rng: Optional[np.random.Generator] = None
) -> RegisterState:
    for site in range(state.n):
        state = antitrap_channel(site, dt, model).apply(state, rng)
    return state


def rydberg_propagation_channel(pair: Sequence[int], p_prop: float, blockade_phase: float) -> Channel:
    """A RYD atom drags its qubit partner to RYD with ``p_prop``; otherwise the partner picks up a Z phase."""
    dim = LEVELS * LEVELS
    ryd = int(SiteLevel.RYD)
    keep = np.eye(dim, dtype=complex)
    blockaded = math.sqrt(1.0 - p_prop) * rz(blockade_phase)
    jumps = []
    for q_a in QUBIT:
        for q_b in QUBIT:
            keep[_pair_index(q_a, ryd), _pair_index(q_b, ryd)] = blockaded[q_a, q_b]
            keep[_pair_index(ryd, q_a), _pair_index(ryd, q_b)] = blockaded[q_a, q_b]
    if p_prop > 0:
        for q in QUBIT:
            jumps.append(math.sqrt(p_prop) * _ket_bra(_pair_index(ryd, ryd), _pair_index(q, ryd), dim))
            jumps.append(math.sqrt(p_prop) * _ket_bra(_pair_index(ryd, ryd), _pair_index(ryd, q), dim))
    return Channel("rydberg_propagation", tuple(pair), (keep, *jumps))


def rydberg_propagation(
    state: RegisterState,
    pair: Sequence[int],
    p_prop: float,
    blockade_phase: float = math.pi / 4,
    rng: Optional[np.random.Generator] = None,
) -> RegisterState:
    return rydberg_propagation_channel(pair, p_prop, blockade_phase).apply(state, rng)


def l4_dressing_channel(pair: Sequence[int], p: float, theta: float) -> Channel:
    """An L4 atom still dresses its partner with probability ``p``: partner gets ``Rz(-theta)``."""
    dim = LEVELS * LEVELS
    l4 = int(SiteLevel.L4)
    kicked = np.eye(dim, dtype=complex)
    partner = rz(-theta)
    for q_a in QUBIT:
        for q_b in QUBIT:
            kicked[_pair_index(q_a, l4), _pair_index(q_b, l4)] = partner[q_a, q_b]
            kicked[_pair_index(l4, q_a), _pair_index(l4, q_b)] = partner[q_a, q_b]
    return _mixed_unitary("l4_dressing", pair, [np.eye(dim, dtype=complex), kicked], [1.0 - p, p])


# ------------------------------------------------------------------ #
# Hyperfine leakage and SPAM
# ------------------------------------------------------------------ #
def hyperfine_leak_channel(site: int, p_0: float, p_1: float) -> Channel:
    q0, q1 = int(SiteLevel.Q0), int(SiteLevel.Q1)
    stay = np.eye(LEVELS, dtype=complex)
    stay[q0, q0] = math.sqrt(1.0 - p_0)
    stay[q1, q1] = math.sqrt(1.0 - p_1)
    kraus = [stay]
    if p_0 > 0:
        kraus.append(math.sqrt(p_0) * _ket_bra(int(SiteLevel.L3), q0))
    if p_1 > 0:
        kraus.append(math.sqrt(p_1) * _ket_bra(int(SiteLevel.L4), q1))
    return Channel("hyperfine_leak", (site,), tuple(kraus))


def hyperfine_leak_pulse(
    state: RegisterState, site: int, model: NoiseModel, rng: Optional[np.random.Generator] = None
) -> RegisterState:
    return hyperfine_leak_channel(site, model.p_hfl_0, model.p_hfl_1).apply(state, rng)


def _check_intended(intended: SiteLevel) -> SiteLevel:
    intended = SiteLevel(intended)
    if intended not in (SiteLevel.Q0, SiteLevel.Q1, SiteLevel.LOST):
        raise ValueError(f"cannot prepare {intended.name}; expected Q0, Q1 or LOST.")
    return intended


def spam_prepare(intended: SiteLevel, model: NoiseModel) -> np.ndarray:
    """6x6 density matrix of one freshly prepared site."""
    intended = _check_intended(intended)
    rho = np.zeros((LEVELS, LEVELS), dtype=complex)
    if intended is SiteLevel.LOST:
        rho[int(SiteLevel.LOST), int(SiteLevel.LOST)] = 1.0
        return rho
    other = SiteLevel.Q1 if intended is SiteLevel.Q0 else SiteLevel.Q0
    rho[int(intended), int(intended)] = 1.0 - model.eps_prep
    rho[int(other), int(other)] = model.eps_prep
    return rho


def sample_preparation(intended: SiteLevel, model: NoiseModel, rng: np.random.Generator) -> SiteLevel:
    intended = _check_intended(intended)
    if intended is SiteLevel.LOST or rng.random() >= model.eps_prep:
        return intended
    return SiteLevel.Q1 if intended is SiteLevel.Q0 else SiteLevel.Q0
