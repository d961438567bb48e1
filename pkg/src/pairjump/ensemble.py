"""Trajectory ensembles, reconstructed densities and growth-rate fits.

Trajectory ``i`` draws its noise from two private streams seeded by
``(master_seed, i, member)``.  Trajectories are processed in fixed blocks of
:data:`BLOCK_SIZE`, each block is reduced to (count, mean, M2) and blocks are
merged in index order.  Results are therefore bit-identical for any number of
worker threads.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import (DyadicPair, InteractionHamiltonian, ProductState, SpinStarModel,
                    build_spin_star, initial_state)
from .propagator import BatchPropagator, IntegrationParams
from .stochastic import Scheme

log = logging.getLogger(__name__)

BLOCK_SIZE = 2048
#: steps of noise drawn per stream at a time
NOISE_CHUNK = 64
#: fit window in units of ``C t``
DEFAULT_FIT_CT = (0.0, 1.5)


class EnsembleError(RuntimeError):
    """No trajectory survived."""


@dataclass(frozen=True)
class EnsembleStatistics:
    times: np.ndarray
    mean_norm: np.ndarray
    mean_norm_stderr: np.ndarray
    rho_s: np.ndarray
    rho_s_stderr: np.ndarray
    n_plus_mean: np.ndarray
    n_plus_std: np.ndarray
    n_plus_stderr: np.ndarray
    lambda_stat: np.ndarray
    lambda_stat_stderr: np.ndarray
    dead_count: int
    n_live: int
    n_traj: int
    scheme: Scheme


@dataclass(frozen=True)
class FitResult:
    lambda_s: float
    window: tuple
    residual: float
    intercept: float


def trajectory_streams(master_seed: int, index: int):
    """The two generators (one per pair member) of trajectory ``index``."""
    return tuple(np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index, m)))
                 for m in (0, 1))


def trajectory_noise(master_seed: int, indices, step_count: int, n_channels: int) -> np.ndarray:
    """Base noise of shape ``(2, T, step_count, K)`` for the given trajectories."""
    out = np.empty((2, len(indices), step_count, n_channels))
    for j, i in enumerate(indices):
        for m, rng in enumerate(trajectory_streams(master_seed, i)):
            out[m, j] = rng.standard_normal((step_count, n_channels))
    return out


class _NoiseFeed:
    """Lazily drawn ``(2, T, S, K)`` noise; each stream is read in step order."""

    def __init__(self, master_seed, indices, step_count, n_channels):
        self.streams = [trajectory_streams(master_seed, i) for i in indices]
        self.shape = (2, len(self.streams), step_count, n_channels)
        self._chunk = None
        self._start = 0

    def __getitem__(self, key):
        member, _, s = key
        if self._chunk is None or not self._start <= s < self._start + self._chunk.shape[2]:
            self._start = s
            n = min(NOISE_CHUNK, self.shape[2] - s)
            self._chunk = np.empty((2, self.shape[1], n, self.shape[3]))
            for j, pair in enumerate(self.streams):
                for m, rng in enumerate(pair):
                    self._chunk[m, j] = rng.standard_normal((n, self.shape[3]))
        return self._chunk[member, :, s - self._start]


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get("PAIRJUMP_THREADS") or os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValueError("thread count must be positive")
    return threads


def _features(phi1, chi1, phi2, chi2):
    """Per-trajectory real features: norm, norm product, Re/Im of rho_s terms."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _raw_features(phi1, chi1, phi2, chi2)


def _raw_features(phi1, chi1, phi2, chi2):
    pn1 = np.einsum("ti,ti->t", phi1.conj(), phi1).real
    xn1 = np.einsum("ti,ti->t", chi1.conj(), chi1).real
    pn2 = np.einsum("ti,ti->t", phi2.conj(), phi2).real
    xn2 = np.einsum("ti,ti->t", chi2.conj(), chi2).real
    n1, n2 = pn1 * xn1, pn2 * xn2
    overlap = np.einsum("ti,ti->t", chi2.conj(), chi1)
    rho = (overlap[:, None, None] * phi1[:, :, None] * phi2.conj()[:, None, :]).reshape(len(n1), -1)
    return np.column_stack([0.5 * (n1 + n2), n1 * n2, rho.real, rho.imag])


def _merge(a, b):
    """Chan et al. pairwise merge of ``(count, mean, M2)``."""
    na, ma, sa = a
    nb, mb, sb = b
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), sa + sb + delta ** 2 * (na * nb / n)


def _resolve(model, initial):
    if isinstance(model, SpinStarModel):
        return build_spin_star(model), initial if initial is not None else initial_state(model)
    if isinstance(model, InteractionHamiltonian):
        if initial is None:
            raise ValueError("a generic Hamiltonian needs an explicit initial state")
        return model, initial
    raise TypeError(f"unsupported model type {type(model).__name__}")


def run_ensemble(model, scheme, n_traj: int, params: IntegrationParams, master_seed: int = 0,
                 *, initial: ProductState | None = None, threads=None,
                 backend=None) -> EnsembleStatistics:
    """Propagate ``n_traj`` pairs starting from ``Psi1 = Psi2 = initial``.

    ``model`` is a :class:`SpinStarModel` or an :class:`InteractionHamiltonian`
    (then ``initial`` is required).  Dead trajectories are dropped from every
    average and counted in ``dead_count``.
    """
    if int(n_traj) != n_traj or n_traj < 1:
        raise ValueError(f"n_traj must be a positive integer, got {n_traj}")
    scheme = Scheme.parse(scheme)
    h, psi0 = _resolve(model, initial)
    threads = resolve_threads(threads)
    prop = BatchPropagator(h, scheme, params, backend)
    steps, k = params.step_count, h.n_channels
    blocks = [range(lo, min(lo + BLOCK_SIZE, n_traj)) for lo in range(0, n_traj, BLOCK_SIZE)]

    def run_block(indices):
        t = len(indices)
        noise = _NoiseFeed(master_seed, indices, steps, k)
        factors = [np.tile(psi0.system, (t, 1)), np.tile(psi0.environment, (t, 1))] * 2
        records = []
        alive = None
        for _, (p1, c1, p2, c2), alive in prop.iterate(factors, noise):
            records.append(_features(p1, c1, p2, c2))
        feats = np.stack(records)[:, alive]
        n = int(alive.sum())
        if n == 0:
            return 0, 0.0, 0.0
        mean = feats.mean(axis=1)
        m2 = ((feats - mean[:, None]) ** 2).sum(axis=1)
        return n, mean, m2

    if threads == 1 or len(blocks) == 1:
        results = map(run_block, blocks)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(run_block, blocks)
    total = (0, 0.0, 0.0)
    try:
        for res in results:
            total = _merge(total, res)
    finally:
        if threads > 1 and len(blocks) > 1:
            pool.shutdown()
    n_live, mean, m2 = total
    dead = n_traj - n_live
    if n_live == 0:
        raise EnsembleError(f"all {n_traj} trajectories died")
    if dead:
        log.warning("%d of %d trajectories died and were excluded", dead, n_traj)
    var = m2 / (n_live - 1) if n_live > 1 else np.zeros_like(mean)
    std = np.sqrt(var)
    err = std / math.sqrt(n_live)
    ds = h.system_dim
    nr = ds * ds
    rho = (mean[:, 2:2 + nr] + 1j * mean[:, 2 + nr:]).reshape(-1, ds, ds)
    rho_err = (err[:, 2:2 + nr] + 1j * err[:, 2 + nr:]).reshape(-1, ds, ds)
    return EnsembleStatistics(
        times=params.times,
        mean_norm=mean[:, 0],
        mean_norm_stderr=err[:, 0],
        rho_s=rho,
        rho_s_stderr=rho_err,
        n_plus_mean=mean[:, 2],
        n_plus_std=std[:, 2],
        n_plus_stderr=err[:, 2],
        # pure initial state: Tr(rho^2) = 1
        lambda_stat=mean[:, 1] - 1.0,
        lambda_stat_stderr=err[:, 1],
        dead_count=dead,
        n_live=n_live,
        n_traj=n_traj,
        scheme=scheme,
    )


def reconstruct_system_density(pairs) -> np.ndarray:
    """``(1/n) sum <chi2|chi1> |phi1><phi2|`` over a non-empty set of pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("cannot reconstruct a density from an empty set of pairs")
    ds = pairs[0].ket.system.size
    rho = np.zeros((ds, ds), dtype=np.complex128)
    for p in pairs:
        overlap = np.vdot(p.bra.environment, p.ket.environment)
        rho += overlap * np.outer(p.ket.system, p.bra.system.conj())
    return rho / len(pairs)


def occupation_probability(rho) -> float:
    """``Re <+|rho|+>``; the imaginary part is logged when noticeable."""
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise ValueError(f"expected a 2x2 system density, got {rho.shape}")
    if abs(rho[0, 0].imag) > 1e-8:
        log.debug("occupation has imaginary part %.3g", rho[0, 0].imag)
    return float(rho[0, 0].real)


def fit_growth_rate(stats, window) -> FitResult:
    """Least-squares fit of ``ln(mean_norm) = lambda_s t + c`` on ``window``.

    ``stats`` is an :class:`EnsembleStatistics` or a ``(times, mean_norm)`` pair.
    """
    if isinstance(stats, EnsembleStatistics):
        times, norms = stats.times, stats.mean_norm
    else:
        times, norms = (np.asarray(x, dtype=float) for x in stats)
    t_min, t_max = window
    eps = 1e-9 * max(abs(t_max), 1.0)
    sel = (times >= t_min - eps) & (times <= t_max + eps)
    if sel.sum() < 10:
        raise ValueError(f"fit window {window} holds only {int(sel.sum())} samples (need 10)")
    y = norms[sel]
    if not np.all(y > 0):
        raise ValueError("mean norm must be positive on the fit window")
    t = times[sel]
    slope, intercept = np.polyfit(t, np.log(y), 1)
    resid = np.log(y) - (slope * t + intercept)
    return FitResult(float(slope), (float(t_min), float(t_max)),
                     float(np.sqrt(np.mean(resid ** 2))), float(intercept))


def spin_star_fit_window(coupling: float, ct_window=DEFAULT_FIT_CT) -> tuple:
    """Convert a ``C t`` window to plain times."""
    return ct_window[0] / coupling, ct_window[1] / coupling


def pair_from_state(state: ProductState) -> DyadicPair:
    return DyadicPair(state, state)
