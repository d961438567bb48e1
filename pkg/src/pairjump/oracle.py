"""Exact reference dynamics by diagonalising the full interaction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import is_hermitian, partial_trace_env
from .model import SpinStarModel, assemble_total_hamiltonian

MAX_TOTAL_DIM = 2 ** 11


@dataclass(frozen=True)
class ExactSolution:
    times: np.ndarray
    rho_s: np.ndarray
    n_plus: np.ndarray
    states: np.ndarray

    def energy(self, h) -> np.ndarray:
        H = assemble_total_hamiltonian(h)
        return np.einsum("ti,ij,tj->t", self.states.conj(), H, self.states).real


def exact_evolve(h, psi0, times) -> ExactSolution:
    """Propagate the product state ``psi0`` with ``exp(-i H t)``.

    ``H`` is diagonalised once; ``rho_s(t)`` is the partial trace over the
    environment (system index slow).
    """
    times = np.asarray(times, dtype=float)
    dim = h.system_dim * h.env_dim
    if dim > MAX_TOTAL_DIM:
        raise ValueError(f"total dimension {dim} exceeds the exact-propagation cap {MAX_TOTAL_DIM}")
    H = assemble_total_hamiltonian(h)
    if not is_hermitian(H):
        raise ValueError("exact propagation needs a Hermitian interaction")
    evals, evecs = np.linalg.eigh(0.5 * (H + H.conj().T))
    coeffs = evecs.conj().T @ psi0.full()
    phases = np.exp(-1j * np.outer(times, evals))
    states = (phases * coeffs) @ evecs.T
    rho_s = np.stack([partial_trace_env(psi, h.system_dim) for psi in states])
    n_plus = rho_s[:, 0, 0].real
    return ExactSolution(times, rho_s, n_plus, states)


def analytic_occupation(coupling, t):
    """Closed-form occupation ``cos^2(2 C t)`` of the central ``|+>`` level.

    Exact for one bath spin, and for any ``N`` when the per-spin coupling is
    ``C/sqrt(N)``; see :func:`spin_star_occupation` for the general case.
    """
    return np.cos(2.0 * coupling * np.asarray(t)) ** 2


def spin_star_occupation(model: SpinStarModel, t):
    """Exact ``n_+(t)`` for ``model`` started in ``|+> (x) |-, ..., ->``.

    The dynamics stays in the two-dimensional span of ``|+, -...->`` and
    ``|-> (x) W`` (``W`` the symmetric one-excitation bath state), coupled by
    ``2 C_a sqrt(N)``.
    """
    return np.cos(model.frequency * np.asarray(t)) ** 2
