"""Lindblad master equation: vectorized generator, fixed-step RK4, exact channels.

Vectorization is row-major (``rho.reshape(-1)``), so ``vec(A rho B) = (A kron B^T) vec(rho)``,
the same convention as :attr:`QuantumChannel.superop`.
"""

import numpy as np
import scipy.linalg as sla

from .device import CollapseSet
from .linalg import dag
from .quantum import channel_from_superop, to_density

STEP_LIMIT = 0.1


class StepSizeError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _ops(collapse):
    if collapse is None:
        return []
    if isinstance(collapse, CollapseSet):
        return collapse.operators()
    return [np.asarray(c, dtype=complex) for c in collapse]


def liouvillian(h, collapse=None):
    """Superoperator of ``-i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)``."""
    h = np.asarray(h, dtype=complex)
    d = h.shape[0]
    eye = np.eye(d)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in _ops(collapse):
        ldl = dag(op) @ op
        gen += np.kron(op, op.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
    return gen


def _rate_scale(h, collapse):
    hn = np.linalg.norm(h, 2)
    if isinstance(collapse, CollapseSet):
        g = sum(e.rate * np.linalg.norm(e.op, 2) ** 2 for e in collapse)
    else:
        g = sum(np.linalg.norm(c, 2) ** 2 for c in _ops(collapse))
    return max(hn, g)


def _rk4(gen_at, v, t0, t, dt):
    n = int(round(t / dt))
    if n < 1 or abs(n * dt - t) > 1e-9 * max(t, 1.0):
        n = max(1, int(np.ceil(t / dt - 1e-12)))
    h = t / n
    for i in range(n):
        s = t0 + i * h
        g0, g1, g2 = gen_at(s), gen_at(s + 0.5 * h), gen_at(s + h)
        k1 = g0 @ v
        k2 = g1 @ (v + 0.5 * h * k1)
        k3 = g1 @ (v + 0.5 * h * k2)
        k4 = g2 @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


def lindblad_propagate(rho, h, collapse, t, dt, check=True, check_tol=1e-8):
    """Integrate the master equation for time ``t`` with fixed RK4 steps of size ``dt``.

    ``h`` is a matrix or a callable ``h(t)``. Raises :class:`StepSizeError` if
    ``dt * max(||H||, gamma) >= 0.1``. With ``check`` the run is repeated at
    ``dt/2`` and the two results must agree to ``check_tol``.
    """
    rho = to_density(rho)
    d = rho.shape[0]
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return rho.copy()
    if callable(h):
        probe = [h(s) for s in np.linspace(0.0, t, 5)]
        scale = max(_rate_scale(p, collapse) for p in probe)
        dissip = liouvillian(np.zeros((d, d)), collapse)
        eye = np.eye(d)

        def gen_at(s):
            hs = np.asarray(h(s), dtype=complex)
            return dissip - 1j * (np.kron(hs, eye) - np.kron(eye, hs.T))
    else:
        scale = _rate_scale(h, collapse)
        gen = liouvillian(h, collapse)

        def gen_at(s):
            return gen
    if dt * scale >= STEP_LIMIT:
        raise StepSizeError(f"dt = {dt} too coarse: dt * rate = {dt * scale:.3g} >= {STEP_LIMIT}")
    v = _rk4(gen_at, rho.reshape(-1), 0.0, t, dt)
    if check:
        v2 = _rk4(gen_at, rho.reshape(-1), 0.0, t, dt / 2)
        err = np.max(np.abs(v - v2))
        if err > check_tol:
            raise ConvergenceError(f"step-halving check failed: difference {err:.3g} > {check_tol}")
        v = v2
    out = v.reshape(d, d)
    return 0.5 * (out + dag(out))


def lindblad_channel(h, collapse, t, layout=None):
    """Exact channel ``exp(L t)`` for a time-independent generator, in Kraus form."""
    gen = liouvillian(h, collapse)
    d = np.asarray(h).shape[0]
    s = sla.expm(gen * t)
    return channel_from_superop(s, d, d, layout, layout)


def cavity_free_hamiltonian(energies, dim):
    """Diagonal cavity Hamiltonian from the first ``dim`` Fock energies."""
    energies = np.asarray(energies, dtype=float)
    if energies.shape[0] < dim:
        raise ValueError(f"need {dim} Fock energies, got {energies.shape[0]}")
    return np.diag(energies[:dim]).astype(complex)
