"""Pure numpy/scipy versions of the batch kernels in ``_core.pyx``."""

import numpy as np
import scipy.sparse as sp


def _csr(indptr, indices, data, n_rows, n_cols):
    return sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols))


def apply_stack(indptr, indices, data, n_ops, vecs):
    n_traj, dim = vecs.shape
    mat = _csr(indptr, indices, data, n_ops * dim, dim)
    out = mat @ vecs.T
    return np.ascontiguousarray(out.reshape(n_ops, dim, n_traj).transpose(2, 0, 1))


def apply_each(indptr, indices, data, vecs):
    n_traj, n_ops, dim = vecs.shape
    out = np.empty_like(vecs)
    for k in range(n_ops):
        lo, hi = k * dim, (k + 1) * dim
        start = indptr[lo]
        block = _csr(indptr[lo:hi + 1] - start, indices[start:indptr[hi]],
                     data[start:indptr[hi]], dim, dim)
        out[:, k, :] = (block @ vecs[:, k, :].T).T
    return out


def moments(vecs, images):
    norm2 = np.einsum("ti,ti->t", vecs.conj(), vecs).real
    first = np.einsum("ti,tki->tk", vecs.conj(), images)
    second = np.einsum("tki,tki->tk", images.conj(), images).real
    return norm2, first, second


def combine(vecs, self_coef, coefs, images):
    return (1.0 + self_coef)[:, None] * vecs + np.einsum("tk,tki->ti", coefs, images)


def center(images, coef, vecs):
    out = images - coef[:, :, None] * vecs[:, None, :]
    return out, (out.real ** 2 + out.imag ** 2).sum(axis=2)


def center_each(images, coef, vecs):
    return images - coef[:, :, None] * vecs


def phase_contraction(pa, qa, qb, pb):
    left = np.matmul(pa.conj(), qa.transpose(0, 2, 1))  # [t, a, b]
    right = np.matmul(qb.conj(), pb.transpose(0, 2, 1))  # [t, b, a]
    return np.einsum("tab,tba->tb", left, right)
