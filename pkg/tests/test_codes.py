import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqecsim.codes import (DeformedFrame, binomial_code, decode_kraus, decode_rows, decode_unitary,
                           deformed_states,
                           dual_subspace_property, encode_isometry, encode_rows, ideal_recovery_unitary,
                           knill_laflamme_check, recovery_rows)
from aqecsim.linalg import dag, ket
from aqecsim.quantum import QuantumChannel, destroy

KAPPA = 1 / 1380


def _frame(t=220.0):
    return DeformedFrame(t_fe=t, kappa=KAPPA, omegas=(0, 0.1, -0.3, 0.2, 0.5),
                         phi_g=(0, 0.2, 0.4, 0.1, 0.7), phi_e=(0, 0.3, 1.1, 0.5, 2.0))


def test_kl_single_loss_passes(code):
    kl = knill_laflamme_check(code, [np.eye(8), destroy(8)])
    assert kl.passed
    assert kl.alpha[1, 1].real == pytest.approx(2.0, abs=1e-12)


def test_kl_double_loss_fails(code):
    a = destroy(8)
    assert not knill_laflamme_check(code, [np.eye(8), a, a @ a]).passed


def test_row_counts(code):
    assert len(encode_rows(code)) == 6
    assert len(decode_rows(code)) == 7
    assert len(recovery_rows(_frame())) == 13


@given(st.floats(0.0, 500.0))
@settings(max_examples=20, deadline=None)
def test_recovery_unitary_honors_rows(t):
    code = binomial_code(8)
    fr = _frame(t)
    u = ideal_recovery_unitary(code, fr)
    assert np.allclose(u @ dag(u), np.eye(16), atol=1e-10)
    for src, tgt in recovery_rows(fr):
        assert abs(np.vdot(tgt, u @ src)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_undeformed_limit_maps_code_words(code):
    s = deformed_states(DeformedFrame(), 8)
    assert np.allclose(s.zero_l1, code.zero_l)
    assert np.allclose(s.zero_l2, code.zero_l)
    assert np.allclose(s.zero_e1, code.zero_e)


def test_deformed_states_continuous_in_t():
    a = deformed_states(_frame(100.0), 8).zero_l1
    b = deformed_states(_frame(100.0 + 1e-6), 8).zero_l1
    assert np.linalg.norm(a - b) < 1e-5


def test_encode_decode_identity(code):
    v = encode_isometry(code)
    dec = QuantumChannel(decode_kraus(code))
    for rho in (np.diag([1.0, 0]), np.full((2, 2), 0.5)):
        assert np.allclose(dec(v @ rho @ dag(v)), rho, atol=1e-12)


def test_dual_property(code):
    assert dual_subspace_property(code)
    u = decode_unitary(code, dual=True)
    out = u @ np.kron(ket(2, 0), code.dual)
    assert abs(np.vdot(np.kron(ket(2, 0), ket(8, 1)), out)) == pytest.approx(1.0)


def test_code_needs_five_levels():
    with pytest.raises(ValueError):
        binomial_code(4)
