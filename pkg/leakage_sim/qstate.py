"""Joint state of a register of six-level atoms.

Every site carries the levels ``Q0, Q1, L3, L4, RYD, LOST`` in that order. Joint
indices are little-endian over sites: ``index = sum(level_i * 6**i)``, so in the
numpy tensor view the axis of site ``i`` is ``n - 1 - i`` and the full-space
matrix of a product operator is ``kron(op_{n-1}, ..., op_0)``. A k-site operator
passed together with a ``sites`` list uses the same little-endian order over
that list.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

LEVELS = 6
STATE_TOL = 1e-12
UNITARY_TOL = 1e-10


class SiteLevel(IntEnum):
    Q0 = 0
    Q1 = 1
    L3 = 2
    L4 = 3
    RYD = 4
    LOST = 5


QUBIT_LEVELS: Tuple[SiteLevel, ...] = (SiteLevel.Q0, SiteLevel.Q1)
LEAKED_LEVELS: Tuple[SiteLevel, ...] = (SiteLevel.L3, SiteLevel.L4, SiteLevel.RYD, SiteLevel.LOST)


class SiteRole(str, Enum):
    DATA = "data"
    ANCILLA = "ancilla"
    RESERVOIR = "reservoir"


class StateMode(str, Enum):
    PURE = "pure"
    DENSITY = "density"


@dataclass(frozen=True, eq=False)
class RegisterState:
    """State vector (pure) or density matrix over ``len(roles)`` atoms."""

    data: np.ndarray
    mode: StateMode
    roles: Tuple[SiteRole, ...]

    @property
    def n(self) -> int:
        return len(self.roles)

    @property
    def dim(self) -> int:
        return LEVELS ** self.n

    @property
    def is_pure(self) -> bool:
        return self.mode is StateMode.PURE

    def norm(self) -> float:
        """Squared norm (pure) or trace (density)."""
        if self.is_pure:
            return float(np.real(np.vdot(self.data, self.data)))
        return float(np.real(np.trace(self.data)))

    def check(self, tol: float = STATE_TOL) -> None:
        """Raise ValueError if the normalisation or positivity invariants are broken."""
        if abs(self.norm() - 1.0) > tol:
            raise ValueError(f"state is not normalised (norm {self.norm():.3e}).")
        if self.is_pure:
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian.")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
            raise ValueError("density matrix has negative eigenvalues.")

    def normalized(self) -> "RegisterState":
        weight = self.norm()
        if weight <= 0:
            raise ValueError("cannot normalise a zero-weight state.")
        scale = np.sqrt(weight) if self.is_pure else weight
        return RegisterState(self.data / scale, self.mode, self.roles)


@dataclass(frozen=True)
class LevelProbabilities:
    """Per-site marginal populations, shape ``(n, 6)``."""

    table: np.ndarray

    def site(self, index: int) -> Dict[SiteLevel, float]:
        return {level: float(self.table[index, level]) for level in SiteLevel}

    def __getitem__(self, key: Tuple[int, SiteLevel]) -> float:
        site, level = key
        return float(self.table[site, int(level)])


def default_roles(n: int) -> Tuple[SiteRole, ...]:
    roles = [SiteRole.DATA, SiteRole.ANCILLA] + [SiteRole.RESERVOIR] * max(0, n - 2)
    return tuple(roles[:n])


def basis_vector(level: SiteLevel) -> np.ndarray:
    vec = np.zeros(LEVELS, dtype=complex)
    vec[int(level)] = 1.0
    return vec


def qubit_vector(alpha: complex, beta: complex) -> np.ndarray:
    """Single-site vector ``alpha|Q0> + beta|Q1>``, normalised."""
    vec = np.zeros(LEVELS, dtype=complex)
    vec[0], vec[1] = alpha, beta
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("qubit amplitudes must not both be zero.")
    return vec / norm


def new_register(
    levels: Sequence[SiteLevel],
    mode: StateMode = StateMode.PURE,
    roles: Optional[Sequence[SiteRole]] = None,
) -> RegisterState:
    if not levels:
        raise ValueError("a register needs at least one site.")
    return product_state([basis_vector(SiteLevel(level)) for level in levels], mode, roles)


def product_state(
    site_vectors: Sequence[np.ndarray],
    mode: StateMode = StateMode.PURE,
    roles: Optional[Sequence[SiteRole]] = None,
) -> RegisterState:
    """Product state from one normalised 6-vector per site (site 0 first)."""
    if not site_vectors:
        raise ValueError("a register needs at least one site.")
    roles = tuple(roles) if roles is not None else default_roles(len(site_vectors))
    if len(roles) != len(site_vectors):
        raise ValueError("roles and site vectors differ in length.")
    vec = np.ones(1, dtype=complex)
    for site_vec in site_vectors:
        site_vec = np.asarray(site_vec, dtype=complex)
        if site_vec.shape != (LEVELS,):
            raise ValueError("site vectors must have six components.")
        vec = np.kron(site_vec, vec)
    state = RegisterState(vec, StateMode.PURE, roles)
    return to_density(state) if StateMode(mode) is StateMode.DENSITY else state


def to_density(state: RegisterState) -> RegisterState:
    if not state.is_pure:
        return state
    return RegisterState(np.outer(state.data, state.data.conj()), StateMode.DENSITY, state.roles)


# ------------------------------------------------------------------ #
# Operator application
# ------------------------------------------------------------------ #
def _axis(site: int, n: int) -> int:
    return n - 1 - site


def _validate_sites(sites: Sequence[int], n: int) -> Tuple[int, ...]:
    sites = tuple(int(s) for s in sites)
    if not sites:
        raise ValueError("at least one site is required.")
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site index in {sites}.")
    for site in sites:
        if not 0 <= site < n:
            raise ValueError(f"site {site} out of range for a {n}-site register.")
    return sites


def _contract(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    op_t = op.reshape((LEVELS,) * (2 * k))
    moved = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(moved, list(range(k)), list(axes))


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    eye = np.eye(matrix.shape[0])
    return bool(np.max(np.abs(matrix.conj().T @ matrix - eye)) <= tol)


def apply_operator(state: RegisterState, op: np.ndarray, sites: Sequence[int]) -> RegisterState:
    """Apply an arbitrary (not necessarily unitary) operator; no renormalisation."""
    n = state.n
    sites = _validate_sites(sites, n)
    op = np.asarray(op, dtype=complex)
    if op.shape != (LEVELS ** len(sites),) * 2:
        raise ValueError(f"operator shape {op.shape} does not match {len(sites)} site(s).")
    row_axes = [_axis(s, n) for s in reversed(sites)]
    if state.is_pure:
        tensor = state.data.reshape((LEVELS,) * n)
        out = _contract(tensor, op, row_axes).reshape(-1)
    else:
        tensor = state.data.reshape((LEVELS,) * (2 * n))
        col_axes = [axis + n for axis in row_axes]
        tensor = _contract(tensor, op, row_axes)
        out = _contract(tensor, op.conj(), col_axes).reshape(state.dim, state.dim)
    return RegisterState(out, state.mode, state.roles)


def apply_unitary(state: RegisterState, unitary: np.ndarray, sites: Sequence[int]) -> RegisterState:
    if not is_unitary(unitary):
        raise ValueError("matrix is not unitary within 1e-10.")
    return apply_operator(state, unitary, sites)


def apply_kraus(
    state: RegisterState,
    kraus_ops: Sequence[np.ndarray],
    sites: Sequence[int],
    rng: Optional[np.random.Generator] = None,
    effects: Optional[np.ndarray] = None,
) -> RegisterState:
    """Density mode: exact channel. Pure mode: one sampled jump, renormalised.

    Only the sampled operator is applied; ``effects`` (see :func:`kraus_effects`)
    can be passed in when the same operators are reused.
    """
    if not state.is_pure:
        total = np.zeros_like(state.data)
        for op in kraus_ops:
            total += apply_operator(state, op, sites).data
        return RegisterState(total, state.mode, state.roles)
    if rng is None:
        raise ValueError("sampling a channel on a pure state requires an rng.")
    if effects is None:
        effects = kraus_effects(kraus_ops)
    weights = jump_weights(state, effects, sites)
    choice = int(rng.choice(len(weights), p=weights / weights.sum()))
    return apply_operator(state, kraus_ops[choice], sites).normalized()


def kraus_effects(kraus_ops: Sequence[np.ndarray]) -> np.ndarray:
    """Stacked ``K^dagger K`` of each operator."""
    ops = np.asarray([np.asarray(op, dtype=complex) for op in kraus_ops])
    return np.einsum("kji,kjl->kil", ops.conj(), ops)


def site_matrix(state: RegisterState, sites: Sequence[int]) -> np.ndarray:
    """Reduced matrix of a pure state on ``sites``, indexed like a k-site operator."""
    n = state.n
    sites = _validate_sites(sites, n)
    row_axes = [_axis(s, n) for s in reversed(sites)]
    tensor = np.moveaxis(state.data.reshape((LEVELS,) * n), row_axes, list(range(len(sites))))
    block = tensor.reshape(LEVELS ** len(sites), -1)
    return block @ block.conj().T


def jump_weights(state: RegisterState, effects: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """``||K psi||**2`` for every operator, from the effects and the reduced site matrix."""
    rho = site_matrix(state, sites)
    return np.clip(np.real(np.einsum("kij,ji->k", effects, rho)), 0.0, None)


def embed_operator(op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Full ``6**n`` matrix of a k-site operator."""
    sites = _validate_sites(sites, n)
    dim = LEVELS ** n
    eye = np.eye(dim, dtype=complex).reshape((LEVELS,) * (2 * n))
    row_axes = [_axis(s, n) for s in reversed(sites)]
    return _contract(eye, np.asarray(op, dtype=complex), row_axes).reshape(dim, dim)


def level_projector(levels: Iterable[SiteLevel]) -> np.ndarray:
    diag = np.zeros(LEVELS)
    for level in levels:
        diag[int(level)] = 1.0
    return np.diag(diag).astype(complex)


def project(state: RegisterState, site: int, levels: Iterable[SiteLevel]) -> Tuple[float, RegisterState]:
    """Unnormalised projection of ``site`` onto ``levels`` and its weight."""
    projected = apply_operator(state, level_projector(levels), [site])
    return projected.norm(), projected


# ------------------------------------------------------------------ #
# Composition and reduction
# ------------------------------------------------------------------ #
def tensor(a: RegisterState, b: RegisterState) -> RegisterState:
    """Register with the sites of ``a`` followed by the sites of ``b``."""
    roles = a.roles + b.roles
    if a.is_pure and b.is_pure:
        return RegisterState(np.kron(b.data, a.data), StateMode.PURE, roles)
    rho_a, rho_b = to_density(a).data, to_density(b).data
    return RegisterState(np.kron(rho_b, rho_a), StateMode.DENSITY, roles)


def partial_trace(state: RegisterState, keep: Sequence[int]) -> RegisterState:
    """Reduced density matrix over ``keep`` (returned in increasing site order)."""
    if state.is_pure:
        raise ValueError("partial_trace needs a density-mode state; call to_density first.")
    n = state.n
    keep = sorted(_validate_sites(keep, n))
    letters = iter(string.ascii_letters)
    rows = [next(letters) for _ in range(n)]
    cols = list(rows)
    for site in keep:
        cols[_axis(site, n)] = next(letters)
    kept_axes = sorted(_axis(site, n) for site in keep)
    out = "".join(rows[a] for a in kept_axes) + "".join(cols[a] for a in kept_axes)
    tensor_view = state.data.reshape((LEVELS,) * (2 * n))
    reduced = np.einsum(f"{''.join(rows)}{''.join(cols)}->{out}", tensor_view)
    dim = LEVELS ** len(keep)
    roles = tuple(state.roles[site] for site in keep)
    return RegisterState(reduced.reshape(dim, dim), StateMode.DENSITY, roles)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    values = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * values) @ vectors.conj().T


def state_fidelity(a: RegisterState, b: RegisterState) -> float:
    if a.n != b.n:
        raise ValueError(f"cannot compare a {a.n}-site state with a {b.n}-site state.")
    if a.is_pure and b.is_pure:
        value = abs(np.vdot(a.data, b.data)) ** 2
    elif a.is_pure or b.is_pure:
        ket, rho = (a, b) if a.is_pure else (b, a)
        value = np.real(np.vdot(ket.data, rho.data @ ket.data))
    else:
        root = _psd_sqrt(a.data)
        inner = np.linalg.eigvalsh(root @ b.data @ root)
        value = np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2
    return float(np.clip(value, 0.0, 1.0))


def level_probabilities(state: RegisterState) -> LevelProbabilities:
    n = state.n
    if state.is_pure:
        populations = np.abs(state.data) ** 2
    else:
        populations = np.real(np.diag(state.data))
    grid = populations.reshape((LEVELS,) * n)
    table = np.zeros((n, LEVELS))
    for site in range(n):
        axis = _axis(site, n)
        others = tuple(a for a in range(n) if a != axis)
        table[site] = grid.sum(axis=others) if others else grid
    return LevelProbabilities(table)


def qubit_block_state(state: RegisterState, site: int) -> np.ndarray:
    """2x2 density matrix of ``site`` restricted to the qubit block (unnormalised)."""
    rho = partial_trace(to_density(state), [site]).data
    return rho[:2, :2]
