import numpy as np
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from aqecsim.linalg import (complete_basis, dag, expm, expm_frechet_weights, expm_hermitian_step, kron, ket,
                            partial_trace)
from conftest import random_density


def _herm(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + dag(a)) / 2


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_expm_matches_scipy(seed, d):
    rng = np.random.default_rng(seed)
    h = _herm(rng, d)
    for m in (-1j * h, h, rng.normal(size=(d, d))):
        assert np.allclose(expm(m), sla.expm(m), atol=1e-10)


def test_expm_zero_is_identity():
    assert np.allclose(expm(np.zeros((4, 4))), np.eye(4))


def test_hermitian_step_unitary():
    rng = np.random.default_rng(3)
    u, _, _ = expm_hermitian_step(_herm(rng, 7), 0.3)
    assert np.allclose(u @ dag(u), np.eye(7), atol=1e-12)


def test_frechet_matches_scipy():
    rng = np.random.default_rng(5)
    h, b = _herm(rng, 6), _herm(rng, 6)
    dt = 0.7
    _, w, v = expm_hermitian_step(h, dt)
    ours = v @ ((dag(v) @ (-1j * dt * b) @ v) * expm_frechet_weights(w, dt)) @ dag(v)
    ref = sla.expm_frechet(-1j * dt * h, -1j * dt * b, compute_expm=False)
    assert np.allclose(ours, ref, atol=1e-12)


def test_frechet_degenerate_spectrum():
    h = np.diag([1.0, 1.0, 2.0]).astype(complex)
    b = np.ones((3, 3), dtype=complex)
    _, w, v = expm_hermitian_step(h, 0.5)
    ours = v @ ((dag(v) @ (-0.5j * b) @ v) * expm_frechet_weights(w, 0.5)) @ dag(v)
    ref = sla.expm_frechet(-0.5j * h, -0.5j * b, compute_expm=False)
    assert np.allclose(ours, ref, atol=1e-12)


def test_partial_trace_product_state():
    rng = np.random.default_rng(0)
    a, b, c = random_density(rng, 2), random_density(rng, 3), random_density(rng, 4)
    full = kron(a, b, c)
    assert np.allclose(partial_trace(full, [2, 3, 4], [1]), b)
    assert np.allclose(partial_trace(full, [2, 3, 4], [0, 2]), np.kron(a, c))


def test_complete_basis_orthonormal():
    v = [(ket(4, 0) + ket(4, 1)) / np.sqrt(2)]
    rest = complete_basis(v, 4)
    m = np.array(v + rest)
    assert len(rest) == 3
    assert np.allclose(m.conj() @ m.T, np.eye(4), atol=1e-12)
