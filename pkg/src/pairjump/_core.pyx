# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels; see ``pairjump.kernels`` for the calling contract."""

import numpy as np
cimport cython
from scipy.linalg.cython_blas cimport zgemm

ctypedef double complex cplx


def apply_stack(const long[::1] indptr, const long[::1] indices, const cplx[::1] data,
                Py_ssize_t n_ops, const cplx[:, ::1] vecs):
    cdef Py_ssize_t n_traj = vecs.shape[0], dim = vecs.shape[1]
    out_arr = np.empty((n_traj, n_ops, dim), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef Py_ssize_t t, k, i, p, row
    cdef cplx acc
    with nogil:
        for t in range(n_traj):
            for k in range(n_ops):
                for i in range(dim):
                    row = k * dim + i
                    acc = 0
                    for p in range(indptr[row], indptr[row + 1]):
                        acc = acc + data[p] * vecs[t, indices[p]]
                    out[t, k, i] = acc
    return out_arr


def apply_each(const long[::1] indptr, const long[::1] indices, const cplx[::1] data,
               const cplx[:, :, ::1] vecs):
    cdef Py_ssize_t n_traj = vecs.shape[0], n_ops = vecs.shape[1], dim = vecs.shape[2]
    out_arr = np.empty((n_traj, n_ops, dim), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef Py_ssize_t t, k, i, p, row
    cdef cplx acc
    with nogil:
        for t in range(n_traj):
            for k in range(n_ops):
                for i in range(dim):
                    row = k * dim + i
                    acc = 0
                    for p in range(indptr[row], indptr[row + 1]):
                        acc = acc + data[p] * vecs[t, k, indices[p]]
                    out[t, k, i] = acc
    return out_arr


def moments(const cplx[:, ::1] vecs, const cplx[:, :, ::1] images):
    cdef Py_ssize_t n_traj = images.shape[0], n_ops = images.shape[1], dim = images.shape[2]
    norm_arr = np.empty(n_traj, dtype=np.float64)
    first_arr = np.empty((n_traj, n_ops), dtype=np.complex128)
    second_arr = np.empty((n_traj, n_ops), dtype=np.float64)
    cdef double[::1] norm2 = norm_arr
    cdef cplx[:, ::1] first = first_arr
    cdef double[:, ::1] second = second_arr
    cdef Py_ssize_t t, k, i
    cdef double nacc, sacc
    cdef cplx facc, v, w
    with nogil:
        for t in range(n_traj):
            nacc = 0
            for i in range(dim):
                v = vecs[t, i]
                nacc = nacc + v.real * v.real + v.imag * v.imag
            norm2[t] = nacc
            for k in range(n_ops):
                facc = 0
                sacc = 0
                for i in range(dim):
                    v = vecs[t, i]
                    w = images[t, k, i]
                    facc = facc + v.conjugate() * w
                    sacc = sacc + w.real * w.real + w.imag * w.imag
                first[t, k] = facc
                second[t, k] = sacc
    return norm_arr, first_arr, second_arr


def combine(const cplx[:, ::1] vecs, const cplx[::1] self_coef,
            const cplx[:, ::1] coefs, const cplx[:, :, ::1] images):
    cdef Py_ssize_t n_traj = images.shape[0], n_ops = images.shape[1], dim = images.shape[2]
    out_arr = np.empty((n_traj, dim), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef Py_ssize_t t, k, i
    cdef cplx acc, c0
    with nogil:
        for t in range(n_traj):
            c0 = 1 + self_coef[t]
            for i in range(dim):
                acc = c0 * vecs[t, i]
                for k in range(n_ops):
                    acc = acc + coefs[t, k] * images[t, k, i]
                out[t, i] = acc
    return out_arr


def center(const cplx[:, :, ::1] images, const cplx[:, ::1] coef, const cplx[:, ::1] vecs):
    cdef Py_ssize_t n_traj = images.shape[0], n_ops = images.shape[1], dim = images.shape[2]
    out_arr = np.empty((n_traj, n_ops, dim), dtype=np.complex128)
    sq_arr = np.empty((n_traj, n_ops), dtype=np.float64)
    cdef cplx[:, :, ::1] out = out_arr
    cdef double[:, ::1] sq = sq_arr
    cdef Py_ssize_t t, k, i
    cdef cplx c, w
    cdef double acc
    with nogil:
        for t in range(n_traj):
            for k in range(n_ops):
                c = coef[t, k]
                acc = 0
                for i in range(dim):
                    w = images[t, k, i] - c * vecs[t, i]
                    out[t, k, i] = w
                    acc = acc + w.real * w.real + w.imag * w.imag
                sq[t, k] = acc
    return out_arr, sq_arr


def center_each(const cplx[:, :, ::1] images, const cplx[:, ::1] coef,
                const cplx[:, :, ::1] vecs):
    cdef Py_ssize_t n_traj = images.shape[0], n_ops = images.shape[1], dim = images.shape[2]
    out_arr = np.empty((n_traj, n_ops, dim), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef Py_ssize_t t, k, i
    cdef cplx c
    with nogil:
        for t in range(n_traj):
            for k in range(n_ops):
                c = coef[t, k]
                for i in range(dim):
                    out[t, k, i] = images[t, k, i] - c * vecs[t, k, i]
    return out_arr


cdef void _gram(const cplx* left, const cplx* right, int n_ops, int dim,
                cplx* out) noexcept nogil:
    """``out[c][r] = <left_r|right_c>`` for rows of two C-ordered ``(n_ops, dim)`` blocks."""
    cdef char trans_c = b'C', trans_n = b'N'
    cdef cplx one = 1, zero = 0
    zgemm(&trans_c, &trans_n, &n_ops, &n_ops, &dim, &one, <cplx*>left, &dim,
          <cplx*>right, &dim, &zero, out, &n_ops)


def phase_contraction(const cplx[:, :, ::1] pa, const cplx[:, :, ::1] qa,
                      const cplx[:, :, ::1] qb, const cplx[:, :, ::1] pb):
    cdef Py_ssize_t n_traj = pa.shape[0]
    cdef int n_ops = pa.shape[1], da = pa.shape[2], db = pb.shape[2]
    out_arr = np.zeros((n_traj, n_ops), dtype=np.complex128)
    left_arr = np.empty((n_ops, n_ops), dtype=np.complex128)
    right_arr = np.empty((n_ops, n_ops), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef cplx[:, ::1] left = left_arr
    cdef cplx[:, ::1] right = right_arr
    cdef Py_ssize_t t, a, b
    cdef cplx acc
    if n_traj == 0 or n_ops == 0:
        return out_arr
    with nogil:
        for t in range(n_traj):
            # left[b][a] = <pa_a|qa_b>, right[a][b] = <qb_b|pb_a>
            _gram(&pa[t, 0, 0], &qa[t, 0, 0], n_ops, da, &left[0, 0])
            _gram(&qb[t, 0, 0], &pb[t, 0, 0], n_ops, db, &right[0, 0])
            for b in range(n_ops):
                acc = 0
                for a in range(n_ops):
                    acc = acc + left[b, a] * right[a, b]
                out[t, b] = acc
    return out_arr
