"""Batch kernels for trajectory propagation, compiled when available.

Operator stacks are stored as one CSR matrix of shape ``(K * d, d)``; row
``k * d + i`` is row ``i`` of operator ``k``.  All kernels take C-contiguous
``complex128`` arrays shaped ``(T, d)`` (one vector per trajectory) or
``(T, K, d)`` (one vector per trajectory and operator).

``apply_stack(indptr, indices, data, K, V)``
    ``out[t, k] = O_k @ V[t]``.
``apply_each(indptr, indices, data, W)``
    ``out[t, k] = O_k @ W[t, k]``.
``moments(V, W)``
    ``(|V[t]|^2, <V[t]|W[t, k]>, |W[t, k]|^2)``.
``combine(V, c0, C, W)``
    ``(1 + c0[t]) V[t] + sum_k C[t, k] W[t, k]``.
``center(W, c, V)``
    ``(W[t, k] - c[t, k] V[t], |W[t, k] - c[t, k] V[t]|^2)``.
``center_each(W, c, U)``
    ``W[t, k] - c[t, k] U[t, k]``.
``phase_contraction(Pa, Qa, Qb, Pb)``
    ``w[t, b] = sum_a <Pa[t, a]|Qa[t, b]> <Qb[t, b]|Pb[t, a]>``.

The compiled module is used unless ``PAIRJUMP_BACKEND=python`` is set or it
failed to build; :data:`BACKEND` names the active one.
"""

import os

import numpy as np
import scipy.sparse as sp

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_BACKENDS = {"python": _fallback}
if _core is not None:
    _BACKENDS["cython"] = _core


def get_backend(name=None):
    """Return the kernel module named ``name`` (default: best available)."""
    if name is None:
        name = os.environ.get("PAIRJUMP_BACKEND", "cython" if _core is not None else "python")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; "
                         f"have {sorted(_BACKENDS)}") from None


def available_backends():
    return sorted(_BACKENDS)


BACKEND = next(name for name, mod in _BACKENDS.items() if mod is get_backend())


class OperatorStack:
    """A list of ``K`` square ``d x d`` operators packed for the batch kernels."""

    def __init__(self, ops, adjoint: bool = False):
        ops = np.asarray(ops, dtype=np.complex128)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"expected a (K, d, d) stack, got {ops.shape}")
        if adjoint:
            ops = ops.conj().transpose(0, 2, 1)
        self.n_ops, self.dim = ops.shape[0], ops.shape[1]
        mat = sp.csr_matrix(ops.reshape(self.n_ops * self.dim, self.dim))
        mat.sort_indices()
        self.indptr = np.ascontiguousarray(mat.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(mat.indices, dtype=np.int64)
        self.data = np.ascontiguousarray(mat.data, dtype=np.complex128)
        # spectral norms, for degeneracy thresholds
        self.scales = np.array([np.linalg.norm(o, 2) for o in ops]) if self.n_ops else np.zeros(0)

    def apply(self, vecs, backend):
        return backend.apply_stack(self.indptr, self.indices, self.data, self.n_ops,
                                   np.ascontiguousarray(vecs))

    def apply_each(self, vecs, backend):
        return backend.apply_each(self.indptr, self.indices, self.data,
                                  np.ascontiguousarray(vecs))
