import numpy as np
import pytest

from pairjump import kernels
from pairjump.kernels import OperatorStack, _fallback

from conftest import random_operator, random_state

needs_compiled = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                    reason="compiled extension not built")


def sparse_stack(rng, k, d, density=0.4):
    ops = np.array([random_operator(rng, d) for _ in range(k)])
    ops[rng.random(ops.shape) > density] = 0
    return ops


class TestOperatorStack:
    def test_apply_matches_dense(self, rng, backend):
        ops = sparse_stack(rng, 3, 5)
        vecs = np.array([random_state(rng, 5) for _ in range(4)])
        out = OperatorStack(ops).apply(vecs, kernels.get_backend(backend))
        np.testing.assert_allclose(out, np.einsum("kij,tj->tki", ops, vecs), atol=1e-12)

    def test_adjoint(self, rng, backend):
        ops = sparse_stack(rng, 2, 3)
        vecs = np.array([random_state(rng, 3) for _ in range(2)])
        out = OperatorStack(ops, adjoint=True).apply(vecs, kernels.get_backend(backend))
        np.testing.assert_allclose(out, np.einsum("kji,tj->tki", ops.conj(), vecs), atol=1e-12)

    def test_apply_each(self, rng, backend):
        ops = sparse_stack(rng, 3, 4)
        w = rng.standard_normal((5, 3, 4)) + 1j * rng.standard_normal((5, 3, 4))
        out = OperatorStack(ops).apply_each(w, kernels.get_backend(backend))
        np.testing.assert_allclose(out, np.einsum("kij,tkj->tki", ops, w), atol=1e-12)

    def test_scales_are_spectral_norms(self):
        st = OperatorStack([[[0, 3], [0, 0]], [[1, 0], [0, -2]]])
        np.testing.assert_allclose(st.scales, [3, 2])

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            OperatorStack(np.zeros((2, 3, 4)))

    def test_zero_operators(self, backend):
        out = OperatorStack(np.zeros((2, 3, 3))).apply(np.ones((1, 3), complex),
                                                      kernels.get_backend(backend))
        np.testing.assert_array_equal(out, 0)


def test_moments(rng, backend):
    kern = kernels.get_backend(backend)
    v = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    w = rng.standard_normal((6, 3, 4)) + 1j * rng.standard_normal((6, 3, 4))
    n2, first, second = kern.moments(v, w)
    np.testing.assert_allclose(n2, np.sum(abs(v) ** 2, 1))
    np.testing.assert_allclose(first, np.einsum("ti,tki->tk", v.conj(), w))
    np.testing.assert_allclose(second, np.sum(abs(w) ** 2, 2))


def test_combine(rng, backend):
    kern = kernels.get_backend(backend)
    v = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    w = rng.standard_normal((6, 3, 4)) + 1j * rng.standard_normal((6, 3, 4))
    c0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    c = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    out = kern.combine(v, c0, c, w)
    np.testing.assert_allclose(out, (1 + c0)[:, None] * v + np.einsum("tk,tki->ti", c, w))


def test_phase_contraction(rng, backend):
    kern = kernels.get_backend(backend)
    shape_a, shape_b = (3, 2, 4), (3, 2, 5)
    pa, qa = (rng.standard_normal(shape_a) + 1j * rng.standard_normal(shape_a) for _ in range(2))
    pb, qb = (rng.standard_normal(shape_b) + 1j * rng.standard_normal(shape_b) for _ in range(2))
    out = kern.phase_contraction(pa, qa, qb, pb)
    ref = np.einsum("tai,tbi,tbj,taj->tb", pa.conj(), qa, qb.conj(), pb)
    np.testing.assert_allclose(out, ref)


@needs_compiled
def test_backends_agree_on_random_batches(rng):
    fast, slow = kernels.get_backend("cython"), kernels.get_backend("python")
    st = OperatorStack(sparse_stack(rng, 6, 8))
    v = rng.standard_normal((50, 8)) + 1j * rng.standard_normal((50, 8))
    w_fast, w_slow = st.apply(v, fast), st.apply(v, slow)
    np.testing.assert_allclose(w_fast, w_slow, rtol=1e-13, atol=1e-13)
    for got, want in zip(fast.moments(v, w_fast), slow.moments(v, w_slow)):
        np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)
    c0 = rng.standard_normal(50) + 0j
    c = rng.standard_normal((50, 6)) + 0j
    np.testing.assert_allclose(fast.combine(v, c0, c, w_fast), slow.combine(v, c0, c, w_slow),
                               rtol=1e-13, atol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError, match="not available"):
        kernels.get_backend("fortran")


def test_fallback_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend("python") is _fallback
    assert kernels.BACKEND in kernels.available_backends()
