"""Noise sampling, the ``(u, theta)`` gauge freedom and optimal noise factors.

Every scheme starts from the same real base noise ``a = b = x`` with
``x ~ N(0, 1)`` independently per channel.  The adaptive schemes rescale and
rotate it as ``a' = exp(i theta) sqrt(u) a`` and ``b' = exp(-i theta) b / sqrt(u)``
which leaves the product ``a b`` untouched sample by sample.

The functions here act on a single product state and are the reference used
to check the batched propagation engine.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .linalg import DeadTrajectoryError, norm_squared, normalized_expectation

#: relative threshold below which a second moment or a phase product counts as zero
DEGENERATE_RTOL = 1e-12


class Scheme(str, enum.Enum):
    SSE = "sse"
    OSSE = "osse"
    SMF = "smf"
    OSMF = "osmf"

    @property
    def mean_field(self) -> bool:
        return self in (Scheme.SMF, Scheme.OSMF)

    @property
    def optimized(self) -> bool:
        return self in (Scheme.OSSE, Scheme.OSMF)

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected one of "
                             f"{', '.join(s.value for s in cls)}") from None


@dataclass(frozen=True)
class NoiseSample:
    """Per-channel noise pairs ``(a, b)`` for one time step."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.complex128)
        b = np.asarray(self.b, dtype=np.complex128)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("noise components must be 1-d arrays of equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __len__(self):
        return self.a.size

    @classmethod
    def zeros(cls, n_channels: int) -> "NoiseSample":
        return cls(np.zeros(n_channels), np.zeros(n_channels))


@dataclass(frozen=True)
class NoiseTransform:
    """Per-channel scaling ``u > 0`` and phase ``theta`` in ``(-pi, pi]``."""

    u: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if u.shape != theta.shape or u.ndim != 1:
            raise ValueError("u and theta must be 1-d arrays of equal length")
        if not np.all(np.isfinite(u) & (u > 0)):
            raise ValueError("scaling factors must be positive and finite")
        if not np.all((theta > -math.pi) & (theta <= math.pi)):
            raise ValueError("phases must lie in (-pi, pi]")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def identity(cls, n_channels: int) -> "NoiseTransform":
        return cls(np.ones(n_channels), np.zeros(n_channels))


def wrap_angle(theta):
    """Reduce angles to ``(-pi, pi]``."""
    out = -np.remainder(-np.asarray(theta, dtype=float) + math.pi, 2 * math.pi) + math.pi
    return float(out) if np.ndim(out) == 0 else out


def sample_base_noise(n_channels: int, rng: np.random.Generator) -> NoiseSample:
    x = rng.standard_normal(n_channels)
    return NoiseSample(x, x)


def apply_noise_transform(sample: NoiseSample, transform: NoiseTransform) -> NoiseSample:
    if len(sample) != transform.u.size:
        raise ValueError("noise sample and transform have different channel counts")
    c = np.exp(1j * transform.theta) * np.sqrt(transform.u)
    return NoiseSample(c * sample.a, sample.b / c)


def _op_scale(op) -> float:
    return float(np.linalg.norm(op, 2))


def _moments(op, v, centered):
    """``(<O>, <O^H O>)`` of a (possibly centered) operator on ``v``."""
    n2 = norm_squared(v)
    if not n2 > 0.0:
        raise DeadTrajectoryError("moments on a zero-norm state")
    w = op @ v
    mean = np.vdot(v, w) / n2
    if centered:
        w = w - mean * v
    return complex(mean), float(np.vdot(w, w).real / n2)


def optimal_scaling_factor(channel, phi, chi, base_var_a: float = 1.0,
                           base_var_b: float = 1.0, centered: bool = False):
    """Scaling ``u`` minimising ``u E|a|^2 <A^H A> + E|b|^2 <B^H B> / u``.

    Returns ``None`` when either second moment vanishes (the channel is
    inactive and its stochastic term is dropped for this step).  With
    ``centered=True`` the operators are replaced by ``A - <A>`` and ``B - <B>``.
    """
    a_op, b_op = channel.system_op, channel.env_op
    _, aa = _moments(a_op, phi, centered)
    _, bb = _moments(b_op, chi, centered)
    if aa <= DEGENERATE_RTOL * _op_scale(a_op) ** 2 or bb <= DEGENERATE_RTOL * _op_scale(b_op) ** 2:
        return None
    return math.sqrt(base_var_b / base_var_a * bb / aa)


def phase_product(channel, phi, chi) -> complex:
    """``<A>_phi <B^H>_chi``."""
    return normalized_expectation(channel.system_op, phi) * np.conj(
        normalized_expectation(channel.env_op, chi))


def optimal_phase_factor(channel, phi, chi) -> float:
    z = phase_product(channel, phi, chi)
    scale = _op_scale(channel.system_op) * _op_scale(channel.env_op)
    if abs(z) <= DEGENERATE_RTOL * scale:
        return 0.0
    return wrap_angle((math.pi - np.angle(z)) / 2)


def alternative_phase_product(h, beta: int, phi, chi, centered: bool = False) -> complex:
    """``w_beta = sum_alpha <A_a^H A_a A_b>_phi <B_b^H B_a^H B_a>_chi``."""
    pn, xn = norm_squared(phi), norm_squared(chi)

    def shifted(op, v):
        if not centered:
            return op
        return op - (np.vdot(v, op @ v) / norm_squared(v)) * np.eye(op.shape[0])

    a_ops = [shifted(ch.system_op, phi) for ch in h.channels]
    b_ops = [shifted(ch.env_op, chi) for ch in h.channels]
    a_beta_phi = a_ops[beta] @ phi
    b_beta_chi = b_ops[beta] @ chi
    w = 0j
    for a_op, b_op in zip(a_ops, b_ops):
        left = np.vdot(a_op @ phi, a_op @ a_beta_phi) / pn
        right = np.vdot(b_op @ b_beta_chi, b_op @ chi) / xn
        w += left * right
    return complex(w)


def alternative_phase_factor(h, beta: int, phi, chi, centered: bool = False) -> float:
    """Phase that drives the phase-sensitive drift of ``<A^H A><B^H B>`` to ``-|w|``."""
    w = alternative_phase_product(h, beta, phi, chi, centered)
    ch = h.channels[beta]
    scale = (_op_scale(ch.system_op) * _op_scale(ch.env_op)) ** 3 or 1.0
    if abs(w) <= DEGENERATE_RTOL * scale:
        return 0.0
    return wrap_angle((math.pi - np.angle(w)) / 2)


def scaling_objective(u, aa, bb, var_a: float = 1.0, var_b: float = 1.0):
    """``u E|a|^2 <A^H A> + E|b|^2 <B^H B> / u``."""
    return u * var_a * aa + var_b * bb / u


def phase_objective(theta, z, corr: complex = 1.0):
    """``2 Re(exp(2 i theta) E[a b*] z)``."""
    return 2.0 * np.real(np.exp(2j * np.asarray(theta)) * corr * z)


def fluctuation_factor(channel, phi, chi) -> float:
    """Per-channel growth ``F`` along the optimal (OSSE) path."""
    _, aa = _moments(channel.system_op, phi, False)
    _, bb = _moments(channel.env_op, chi, False)
    ea = normalized_expectation(channel.system_op, phi)
    eb = normalized_expectation(channel.env_op, chi)
    return math.sqrt(aa * bb) - abs(ea) * abs(eb)


def mean_field_fluctuation_factor(channel, phi, chi) -> float:
    """Per-channel growth ``F^MF`` along the optimal mean-field (OSMF) path."""
    _, caa = _moments(channel.system_op, phi, True)
    _, cbb = _moments(channel.env_op, chi, True)
    return math.sqrt(caa * cbb)


def optimal_transform(h, phi, chi, scheme) -> NoiseTransform:
    """The adaptive transform the propagator uses, with inactive channels at ``u = 1``."""
    scheme = Scheme.parse(scheme)
    k = h.n_channels
    if not scheme.optimized:
        return NoiseTransform.identity(k)
    centered = scheme.mean_field
    u = np.ones(k)
    theta = np.zeros(k)
    for i, ch in enumerate(h.channels):
        ui = optimal_scaling_factor(ch, phi, chi, centered=centered)
        if ui is not None:
            u[i] = ui
        if centered:
            theta[i] = alternative_phase_factor(h, i, phi, chi, centered=True)
        else:
            theta[i] = optimal_phase_factor(ch, phi, chi)
    return NoiseTransform(u, theta)


def active_channels(h, phi, chi, scheme) -> np.ndarray:
    """Boolean mask of channels that keep their stochastic term this step."""
    scheme = Scheme.parse(scheme)
    if not scheme.optimized:
        return np.ones(h.n_channels, dtype=bool)
    return np.array([optimal_scaling_factor(ch, phi, chi, centered=scheme.mean_field) is not None
                     for ch in h.channels], dtype=bool)


def predicted_norm_growth(h, phi, chi, transform=None, scheme=Scheme.SSE) -> float:
    """Expected ``d<Psi|Psi>/dt`` per unit norm for one pair member.

    ``transform=None`` selects what the propagator would use: identity for
    SSE/SMF, the adaptive optimum for OSSE/OSMF.  Channels the propagator
    drops (inactive) contribute nothing.
    """
    scheme = Scheme.parse(scheme)
    if transform is None:
        transform = optimal_transform(h, phi, chi, scheme)
    active = active_channels(h, phi, chi, scheme)
    centered = scheme.mean_field
    rate = 0.0
    drift = 0j
    for i, ch in enumerate(h.channels):
        ea, aa = _moments(ch.system_op, phi, centered)
        eb, bb = _moments(ch.env_op, chi, centered)
        drift += ea * eb
        if not active[i]:
            continue
        u, theta = transform.u[i], transform.theta[i]
        rate += scaling_objective(u, aa, bb)
        if not centered:
            rate += phase_objective(theta, ea * np.conj(eb))
    if centered:
        # the mean-field drift only changes the norm through Im <H>
        rate += 2.0 * drift.imag
    return float(rate)
