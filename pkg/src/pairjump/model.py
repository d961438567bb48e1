"""Interaction Hamiltonians ``H = sum_a A_a (x) B_a`` and the spin-star benchmark."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import (SIGMA_MINUS, SIGMA_PLUS, SPIN_DOWN, SPIN_UP, DimensionError,
                     embed, is_hermitian, operator, state_vector, tensor_product)


COUPLING_SCALINGS = ("n", "sqrt_n")


@dataclass(frozen=True)
class Channel:
    """One term ``A (x) B`` of the interaction."""

    system_op: np.ndarray
    env_op: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "system_op", operator(self.system_op))
        object.__setattr__(self, "env_op", operator(self.env_op))


@dataclass(frozen=True)
class InteractionHamiltonian:
    system_dim: int
    env_dim: int
    channels: tuple = ()
    require_hermitian: bool = False

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.system_dim < 1 or self.env_dim < 1:
            raise DimensionError("system and environment dims must be positive")
        for ch in self.channels:
            if ch.system_op.shape[0] != self.system_dim or ch.env_op.shape[0] != self.env_dim:
                raise DimensionError("channel operator dims do not match the Hamiltonian")
        if self.channels and not is_hermitian(assemble_total_hamiltonian(self)):
            if self.require_hermitian:
                raise ValueError("assembled interaction is not Hermitian")
            warnings.warn("assembled interaction Hamiltonian is not Hermitian", stacklevel=3)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def system_ops(self) -> np.ndarray:
        """Stacked system operators, shape ``(K, ds, ds)``."""
        if not self.channels:
            return np.zeros((0, self.system_dim, self.system_dim), dtype=np.complex128)
        return np.stack([ch.system_op for ch in self.channels])

    @property
    def env_ops(self) -> np.ndarray:
        if not self.channels:
            return np.zeros((0, self.env_dim, self.env_dim), dtype=np.complex128)
        return np.stack([ch.env_op for ch in self.channels])


@dataclass(frozen=True)
class SpinStarModel:
    """Central spin coupled to ``n_bath`` spins.

    Parameters
    ----------
    n_bath : int
        Number of bath spins ``N``.
    coupling : float
        Overall coupling ``C``.
    scaling : {"n", "sqrt_n"}
        Per-spin coupling ``C/N`` (default) or ``C/sqrt(N)``.  Starting from
        ``|+> (x) |-, ..., ->`` the occupation of ``|+>`` oscillates as
        ``cos^2(2 C_a sqrt(N) t)``, so only ``"sqrt_n"`` gives an
        ``N``-independent ``cos^2(2 C t)``.
    """

    n_bath: int
    coupling: float
    scaling: str = "n"

    def __post_init__(self):
        if int(self.n_bath) != self.n_bath or self.n_bath < 1:
            raise ValueError(f"n_bath must be a positive integer, got {self.n_bath}")
        if not (math.isfinite(self.coupling) and self.coupling > 0):
            raise ValueError(f"coupling must be positive, got {self.coupling}")
        if self.scaling not in COUPLING_SCALINGS:
            raise ValueError(f"scaling must be one of {COUPLING_SCALINGS}, got {self.scaling!r}")

    @property
    def per_spin_coupling(self) -> float:
        if self.scaling == "sqrt_n":
            return self.coupling / math.sqrt(self.n_bath)
        return self.coupling / self.n_bath

    @property
    def frequency(self) -> float:
        """Angular frequency of ``n_+(t) = cos^2(frequency * t)``."""
        return 2.0 * self.per_spin_coupling * math.sqrt(self.n_bath)

    @property
    def env_dim(self) -> int:
        return 2 ** self.n_bath


@dataclass(frozen=True)
class ProductState:
    """Separable state ``|system> (x) |environment>``; factors carry their own norms."""

    system: np.ndarray
    environment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "system", state_vector(self.system))
        object.__setattr__(self, "environment", state_vector(self.environment))

    def full(self) -> np.ndarray:
        """Joint vector; for diagnostics and the exact oracle only."""
        return tensor_product(self.system, self.environment)

    def norm_squared(self) -> float:
        return float(np.vdot(self.system, self.system).real
                     * np.vdot(self.environment, self.environment).real)


@dataclass(frozen=True)
class DyadicPair:
    """The pair behind ``D = |ket><bra|``."""

    ket: ProductState
    bra: ProductState = field(default=None)

    def __post_init__(self):
        if self.bra is None:
            object.__setattr__(self, "bra", self.ket)
        if (self.ket.system.shape != self.bra.system.shape
                or self.ket.environment.shape != self.bra.environment.shape):
            raise DimensionError("pair members live in different spaces")


def build_spin_star(model: SpinStarModel) -> InteractionHamiltonian:
    """Channels of ``2 sum_a C_a (s+ s-^(a) + s- s+^(a))``.

    For each bath spin (ascending) the channel with ``s+`` on the system
    comes first, then the one with ``s-``.  Both operators of a channel carry
    the prefactor ``sqrt(2 C_a)``, i.e. ``sqrt(2C/N)`` for the default scaling.
    """
    n = model.n_bath
    g = math.sqrt(2.0 * model.per_spin_coupling)
    channels = []
    for site in range(n):
        channels.append(Channel(g * SIGMA_PLUS, g * embed(SIGMA_MINUS, site, n)))
        channels.append(Channel(g * SIGMA_MINUS, g * embed(SIGMA_PLUS, site, n)))
    return InteractionHamiltonian(2, 2 ** n, channels, require_hermitian=True)


def initial_state(model: SpinStarModel) -> ProductState:
    """``|+> (x) |-, ..., ->``."""
    env = np.ones(1, dtype=np.complex128)
    for _ in range(model.n_bath):
        env = np.kron(env, SPIN_DOWN)
    return ProductState(SPIN_UP, env)


def assemble_total_hamiltonian(h: InteractionHamiltonian) -> np.ndarray:
    dim = h.system_dim * h.env_dim
    total = np.zeros((dim, dim), dtype=np.complex128)
    for ch in h.channels:
        total += np.kron(ch.system_op, ch.env_op)
    return total
