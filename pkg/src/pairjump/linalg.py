"""Dense complex linear algebra on small Hilbert spaces.

States and operators are plain ``numpy`` arrays of dtype ``complex128``.
The validating constructors return read-only copies, so values can be shared
freely between workers.

Index convention: in a tensor product ``v (x) w`` the left factor is the slow
index, i.e. amplitude ``i * dim(w) + j`` equals ``v[i] * w[j]``.  The system
factor is always the left one.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_RTOL = 1e-12


class DimensionError(ValueError):
    """Operand dimensions do not match."""


class DeadTrajectoryError(ArithmeticError):
    """A state vector has (numerically) zero norm."""


def _frozen(arr):
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


def state_vector(amplitudes) -> np.ndarray:
    """Validate and freeze a state vector (norm is not required to be 1)."""
    v = _frozen(amplitudes)
    if v.ndim != 1 or v.size < 1:
        raise DimensionError(f"state vector must be 1-d and non-empty, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("state vector has non-finite amplitudes")
    return v


def operator(entries, hermitian: bool = False) -> np.ndarray:
    """Validate and freeze a square operator.

    With ``hermitian=True`` the matrix is checked against
    ``max|M - M^H| <= 1e-12 * max|M|``.
    """
    m = _frozen(entries)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"operator must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    if hermitian and not is_hermitian(m):
        raise ValueError("operator flagged Hermitian is not")
    return m


def is_hermitian(m, rtol: float = HERMITIAN_RTOL) -> bool:
    m = np.asarray(m)
    scale = np.max(np.abs(m)) if m.size else 0.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= rtol * scale)


def tensor_product(v, w) -> np.ndarray:
    return np.kron(np.asarray(v, dtype=np.complex128), np.asarray(w, dtype=np.complex128))


def apply_operator(op, v) -> np.ndarray:
    op = np.asarray(op)
    v = np.asarray(v)
    if op.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot apply {op.shape} operator to dim-{v.shape[0]} state")
    return op @ v


def inner_product(v, w) -> complex:
    """Return <v|w>, conjugate-linear in ``v``."""
    v = np.asarray(v)
    w = np.asarray(w)
    if v.shape != w.shape:
        raise DimensionError(f"inner product of shapes {v.shape} and {w.shape}")
    return complex(np.vdot(v, w))


def norm_squared(v) -> float:
    v = np.asarray(v)
    return float(np.vdot(v, v).real)


def normalized_expectation(op, v) -> complex:
    """Return <v|O|v> / <v|v>.

    Raises
    ------
    DeadTrajectoryError
        If ``v`` has zero norm.
    """
    n2 = norm_squared(v)
    if not n2 > 0.0:
        raise DeadTrajectoryError("expectation value on a zero-norm state")
    return inner_product(v, apply_operator(op, v)) / n2


def embed(op, site: int, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """Embed a single-site operator at ``site`` of an ``n_sites`` register."""
    out = np.eye(1, dtype=np.complex128)
    eye = np.eye(local_dim, dtype=np.complex128)
    for k in range(n_sites):
        out = np.kron(out, op if k == site else eye)
    return out


def partial_trace_env(psi, system_dim: int) -> np.ndarray:
    """Reduced system density matrix of a pure joint state ``psi``."""
    psi = np.asarray(psi)
    env_dim, rem = divmod(psi.size, system_dim)
    if rem:
        raise DimensionError(f"state of size {psi.size} is not divisible by system dim {system_dim}")
    m = psi.reshape(system_dim, env_dim)
    return m @ m.conj().T


def is_density_matrix(rho, herm_tol: float = 1e-12, trace_tol: float = 1e-10,
                      eig_tol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        return False
    if abs(np.trace(rho) - 1.0) > trace_tol:
        return False
    return bool(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) >= -eig_tol)


# Pauli ladder operators in the (|+>, |->) basis.
SIGMA_PLUS = operator([[0, 1], [0, 0]])
SIGMA_MINUS = operator([[0, 0], [1, 0]])
SPIN_UP = state_vector([1, 0])
SPIN_DOWN = state_vector([0, 1])
