"""Euler-Maruyama propagation of dyadic pairs under the four noise schemes.

Both factors of a product state move independently:

    d|phi> = gamma sum_a a_a A_a |phi>,    d|chi> = gamma sum_a b_a B_a |chi>

with ``gamma = sqrt(dt) exp(-i pi/4)`` so that ``gamma**2 = dt / i``.  The
mean-field schemes add the drift ``(dt/i)(h_MF - <H>/2)`` to each factor and
couple the noise to centered operators only.

:func:`sse_step` and :func:`smf_step` advance one product state and serve as
the readable reference.  :class:`BatchPropagator` advances many trajectories
at once through :mod:`pairjump.kernels` and is what the ensemble driver uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .linalg import DeadTrajectoryError, norm_squared
from .model import DyadicPair, ProductState
from .stochastic import (DEGENERATE_RTOL, NoiseSample, Scheme, active_channels,
                         apply_noise_transform, optimal_transform)

#: a factor whose squared norm drops below this (or turns non-finite) is dead
DEAD_NORM = 1e-300
# rows per kernel call are capped so one (rows, K, d) image stack stays near this size
CHUNK_ELEMENTS = 2 ** 19


@dataclass(frozen=True)
class IntegrationParams:
    dt: float
    step_count: int

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.step_count) != self.step_count or self.step_count < 0:
            raise ValueError(f"step_count must be a non-negative integer, got {self.step_count}")

    @property
    def gamma(self) -> complex:
        return math.sqrt(self.dt) * complex(math.cos(-math.pi / 4), math.sin(-math.pi / 4))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.step_count + 1)

    @classmethod
    def from_tmax(cls, dt: float, tmax: float) -> "IntegrationParams":
        return cls(dt, int(round(tmax / dt)))


def sse_step(state: ProductState, h, params: IntegrationParams, noise: NoiseSample) -> ProductState:
    if len(noise) != h.n_channels:
        raise ValueError("noise sample does not match the channel count")
    g = params.gamma
    phi, chi = state.system, state.environment
    dphi = sum((a * (ch.system_op @ phi) for a, ch in zip(noise.a, h.channels)),
               np.zeros_like(phi))
    dchi = sum((b * (ch.env_op @ chi) for b, ch in zip(noise.b, h.channels)),
               np.zeros_like(chi))
    return ProductState(phi + g * dphi, chi + g * dchi)


def smf_step(state: ProductState, h, params: IntegrationParams, noise: NoiseSample) -> ProductState:
    if len(noise) != h.n_channels:
        raise ValueError("noise sample does not match the channel count")
    phi, chi = state.system, state.environment
    pn, xn = norm_squared(phi), norm_squared(chi)
    if not (pn > 0 and xn > 0):
        raise DeadTrajectoryError("mean-field step on a zero-norm factor")
    g, dt = params.gamma, params.dt
    ea = np.array([np.vdot(phi, ch.system_op @ phi) / pn for ch in h.channels])
    eb = np.array([np.vdot(chi, ch.env_op @ chi) / xn for ch in h.channels])
    half_energy = 0.5 * np.sum(ea * eb)
    dphi = -1j * dt * (-half_energy * phi)
    dchi = -1j * dt * (-half_energy * chi)
    for k, ch in enumerate(h.channels):
        a_phi = ch.system_op @ phi
        b_chi = ch.env_op @ chi
        dphi = dphi - 1j * dt * eb[k] * a_phi + g * noise.a[k] * (a_phi - ea[k] * phi)
        dchi = dchi - 1j * dt * ea[k] * b_chi + g * noise.b[k] * (b_chi - eb[k] * chi)
    return ProductState(phi + dphi, chi + dchi)


def transformed_noise(h, state: ProductState, scheme, base: NoiseSample) -> NoiseSample:
    """Noise the propagator actually applies: adaptive transform, inactive channels zeroed."""
    scheme = Scheme.parse(scheme)
    phi, chi = state.system, state.environment
    noise = apply_noise_transform(base, optimal_transform(h, phi, chi, scheme))
    mask = active_channels(h, phi, chi, scheme)
    return NoiseSample(np.where(mask, noise.a, 0), np.where(mask, noise.b, 0))


def reference_step(state: ProductState, h, params, scheme, base: NoiseSample) -> ProductState:
    """One step of any scheme using the single-state functions."""
    scheme = Scheme.parse(scheme)
    noise = transformed_noise(h, state, scheme, base)
    step = smf_step if scheme.mean_field else sse_step
    return step(state, h, params, noise)


def coarsen_noise(x: np.ndarray) -> np.ndarray:
    """Combine consecutive unit Gaussians pairwise along the step axis (``-2``).

    Used for common random numbers across step sizes: the coarse path at
    ``2 dt`` sees the same Brownian increments as the fine path at ``dt``.
    """
    x = np.asarray(x)
    if x.shape[-2] % 2:
        raise ValueError("number of steps must be even to coarsen")
    return (x[..., 0::2, :] + x[..., 1::2, :]) / math.sqrt(2.0)


class BatchPropagator:
    """Advance ``T`` independent trajectories of one scheme in lock step."""

    def __init__(self, h, scheme, params: IntegrationParams, backend=None):
        self.h = h
        self.scheme = Scheme.parse(scheme)
        self.params = params
        self.kern = kernels.get_backend(backend)
        self.a_stack = kernels.OperatorStack(h.system_ops)
        self.b_stack = kernels.OperatorStack(h.env_ops)
        width = h.n_channels * max(h.system_dim, h.env_dim)
        self.chunk_rows = max(64, CHUNK_ELEMENTS // max(width, 1))
        if self.scheme is Scheme.OSMF:
            self.a_adj = kernels.OperatorStack(h.system_ops, adjoint=True)
            self.b_adj = kernels.OperatorStack(h.env_ops, adjoint=True)

    def _moments(self, stack, vecs, alive):
        images = stack.apply(vecs, self.kern)
        norm2, first, second = self.kern.moments(vecs, images)
        safe = np.where(alive, norm2, 1.0)
        # overflowing rows yield nan here and are marked dead after the step
        with np.errstate(invalid="ignore", over="ignore"):
            return images, safe, first / safe[:, None], second / safe[:, None]

    def _adaptive(self, x, a_mom, b_mom, phi, chi):
        """Transformed noise ``(a, b)`` for OSSE/OSMF, zero on inactive channels."""
        (a_img, pn, ea, aa), (b_img, xn, eb, bb) = a_mom, b_mom
        sa, sb = self.a_stack.scales, self.b_stack.scales
        if self.scheme is Scheme.OSMF:
            kern = self.kern
            qa, aa = kern.center(a_img, ea, phi)
            qb, bb = kern.center(b_img, eb, chi)
            aa, bb = aa / pn[:, None], bb / xn[:, None]
            # A'^H A' phi and B'^H B' chi, per channel
            pa = kern.center_each(self.a_adj.apply_each(qa, kern), np.conj(ea), qa)
            pb = kern.center_each(self.b_adj.apply_each(qb, kern), np.conj(eb), qb)
            z = self.kern.phase_contraction(pa, qa, qb, pb) / (pn * xn)[:, None]
            z_scale = (sa * sb) ** 3
        else:
            z = ea * eb.conj()
            z_scale = sa * sb
        active = (aa > DEGENERATE_RTOL * sa ** 2) & (bb > DEGENERATE_RTOL * sb ** 2)
        u = np.sqrt(np.where(active, bb, 1.0) / np.where(active, aa, 1.0))
        theta = np.where(np.abs(z) > DEGENERATE_RTOL * z_scale, 0.5 * (math.pi - np.angle(z)), 0.0)
        c = np.exp(1j * theta) * np.sqrt(u)
        a = np.where(active, c * x, 0.0)
        b = np.where(active, x / c, 0.0)
        return a, b

    def step(self, phi, chi, x, alive=None):
        """Advance one member of every trajectory by one step.

        ``phi`` is ``(T, ds)``, ``chi`` is ``(T, de)`` and ``x`` the ``(T, K)``
        base Gaussians.  Returns the new factors and the updated alive mask.
        """
        phi = np.ascontiguousarray(phi, dtype=np.complex128)
        chi = np.ascontiguousarray(chi, dtype=np.complex128)
        x = np.asarray(x, dtype=float)
        n = phi.shape[0]
        if alive is None:
            alive = np.ones(n, dtype=bool)
        if n <= self.chunk_rows:
            return self._step_rows(phi, chi, x, alive)
        # rows are independent: work through cache-sized slices
        parts = [self._step_rows(phi[lo:lo + self.chunk_rows], chi[lo:lo + self.chunk_rows],
                                 x[lo:lo + self.chunk_rows], alive[lo:lo + self.chunk_rows])
                 for lo in range(0, n, self.chunk_rows)]
        return tuple(np.concatenate(p) for p in zip(*parts))

    def _step_rows(self, phi, chi, x, alive):
        n = phi.shape[0]
        g, dt = self.params.gamma, self.params.dt
        if self.scheme is Scheme.SSE:
            # no moments needed
            a_img = self.a_stack.apply(phi, self.kern)
            b_img = self.b_stack.apply(chi, self.kern)
        else:
            a_mom = self._moments(self.a_stack, phi, alive)
            b_mom = self._moments(self.b_stack, chi, alive)
            a_img, _, ea, _ = a_mom
            b_img, _, eb, _ = b_mom
        if self.scheme.optimized:
            a, b = self._adaptive(x, a_mom, b_mom, phi, chi)
        else:
            a = b = x.astype(np.complex128)
        ca, cb = g * a, g * b
        c0a = np.zeros(n, dtype=np.complex128)
        c0b = np.zeros(n, dtype=np.complex128)
        if self.scheme.mean_field:
            half_energy = 0.5 * np.sum(ea * eb, axis=1)
            c0a = -np.sum(ca * ea, axis=1) + 1j * dt * half_energy
            c0b = -np.sum(cb * eb, axis=1) + 1j * dt * half_energy
            ca = ca - 1j * dt * eb
            cb = cb - 1j * dt * ea
        new_phi = self.kern.combine(phi, np.ascontiguousarray(c0a), np.ascontiguousarray(ca), a_img)
        new_chi = self.kern.combine(chi, np.ascontiguousarray(c0b), np.ascontiguousarray(cb), b_img)
        pn = np.einsum("ti,ti->t", new_phi.conj(), new_phi).real
        xn = np.einsum("ti,ti->t", new_chi.conj(), new_chi).real
        ok = np.isfinite(pn) & np.isfinite(xn) & (pn >= DEAD_NORM) & (xn >= DEAD_NORM)
        alive = alive & ok
        new_phi[~alive] = 0.0
        new_chi[~alive] = 0.0
        return new_phi, new_chi, alive

    def iterate(self, pair_factors, noise):
        """Yield ``(step, (phi1, chi1, phi2, chi2), alive)`` for every step.

        ``pair_factors`` holds four ``(T, d)`` arrays; ``noise`` has shape
        ``(2, T, S, K)`` with one base-noise path per member and trajectory (any
        object with that ``shape`` supporting ``noise[m, :, s]`` works).
        A trajectory stays alive only while both members are.
        """
        phi1, chi1, phi2, chi2 = (np.array(f, dtype=np.complex128) for f in pair_factors)
        if isinstance(noise, np.ndarray) or not hasattr(noise, "shape"):
            noise = np.asarray(noise, dtype=float)
        n_traj = phi1.shape[0]
        steps = self.params.step_count
        if noise.shape != (2, n_traj, steps, self.h.n_channels):
            raise ValueError(f"noise has shape {noise.shape}, expected "
                             f"{(2, n_traj, steps, self.h.n_channels)}")
        alive = np.ones(n_traj, dtype=bool)
        yield 0, (phi1, chi1, phi2, chi2), alive
        for s in range(steps):
            phi1, chi1, alive1 = self.step(phi1, chi1, noise[0, :, s], alive)
            phi2, chi2, alive2 = self.step(phi2, chi2, noise[1, :, s], alive)
            alive = alive1 & alive2
            yield s + 1, (phi1, chi1, phi2, chi2), alive


@dataclass(frozen=True)
class PairTrajectory:
    """Recorded pairs ``pairs[s]`` at ``t = s * dt``; ``dead_at`` is the first dead step."""

    pairs: list
    dead_at: int | None = None

    @property
    def dead(self) -> bool:
        return self.dead_at is not None


def propagate_pair(pair: DyadicPair, h, params: IntegrationParams, scheme, rngs,
                   backend=None) -> PairTrajectory:
    """Propagate one dyadic pair; ``rngs`` holds one generator per member.

    Each member consumes ``K`` Gaussians per step from its own generator.
    Recording stops at the step where the trajectory dies.
    """
    rng1, rng2 = rngs
    k = h.n_channels
    noise = np.stack([rng1.standard_normal((params.step_count, k)),
                      rng2.standard_normal((params.step_count, k))])[:, None]
    prop = BatchPropagator(h, scheme, params, backend)
    factors = [pair.ket.system[None], pair.ket.environment[None],
               pair.bra.system[None], pair.bra.environment[None]]
    pairs = []
    for s, (p1, c1, p2, c2), alive in prop.iterate(factors, noise):
        if not alive[0]:
            return PairTrajectory(pairs, dead_at=s)
        pairs.append(DyadicPair(ProductState(p1[0], c1[0]), ProductState(p2[0], c2[0])))
    return PairTrajectory(pairs)
