import numpy as np
import pytest

from aqecsim.device import CollapseSet
from aqecsim.linalg import ket
from aqecsim.lindblad import (ConvergenceError, StepSizeError, lindblad_channel, lindblad_propagate,
                              liouvillian)
from aqecsim.quantum import CARDINAL_INPUTS, destroy, to_density
from aqecsim.protocol import free_evolution_channel


def _decay(d, t1=1380.0):
    return CollapseSet().add("S1:decay", destroy(d), 1 / t1)


def test_fock1_decay_matches_exponential():
    rho = lindblad_propagate(ket(4, 1), np.zeros((4, 4)), _decay(4), 220.0, 1.0)
    assert rho[1, 1].real == pytest.approx(np.exp(-220 / 1380), abs=1e-4)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)


def test_no_dynamics_leaves_state():
    rho = to_density((ket(3, 0) + ket(3, 2)) / np.sqrt(2))
    assert np.allclose(lindblad_propagate(rho, np.zeros((3, 3)), None, 5.0, 0.1), rho)


def test_step_size_violation():
    with pytest.raises(StepSizeError):
        lindblad_propagate(ket(2, 0), np.diag([0.0, 10.0]), None, 1.0, 0.05)


def test_step_halving_flags_poor_resolution():
    with pytest.raises(ConvergenceError):
        lindblad_propagate(ket(2, 0), np.array([[0, 1.0], [1.0, 0]]), None, 50.0, 0.099, check_tol=1e-14)


def test_time_dependent_hamiltonian():
    # resonant drive of constant area pi/2 on sigma_x flips the qubit
    h = lambda t: np.pi / 2 * np.array([[0, 1.0], [1.0, 0]])
    rho = lindblad_propagate(ket(2, 0), h, None, 1.0, 0.002)
    assert rho[1, 1].real == pytest.approx(1.0, abs=1e-8)


def test_liouvillian_trace_preserving():
    l = liouvillian(np.diag([0.0, 1.0, 3.0]), _decay(3, 10.0))
    assert np.allclose(np.eye(3).reshape(-1) @ l, 0, atol=1e-14)


def test_exact_channel_agrees_with_rk4():
    h = np.diag([0.0, 0.3, 0.7]).astype(complex)
    rho0 = to_density((ket(3, 1) + ket(3, 2)) / np.sqrt(2))
    ch = lindblad_channel(h, _decay(3, 20.0), 7.0)
    rk = lindblad_propagate(rho0, h, _decay(3, 20.0), 7.0, 0.05)
    assert np.allclose(ch(rho0), rk, atol=1e-9)


def test_binomial_free_evolution_subspaces(params, code):
    ch = free_evolution_channel(params, 220.0)
    v = np.array([code.zero_l, code.one_l]).T
    # subspace weights, not projections on the exact words: the no-jump damping keeps
    # the state in span{|0>,|4>,|2>} (logical) and span{|1>,|3>} (error)
    d = np.mean([np.real(np.diag(ch(v @ to_density(psi) @ v.conj().T))) for psi in CARDINAL_INPUTS], axis=0)
    assert d[0] + d[2] + d[4] == pytest.approx(0.773, abs=0.010)
    assert d[1] + d[3] == pytest.approx(0.220, abs=0.010)
    assert ch.is_cptp()
