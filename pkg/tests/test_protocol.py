import numpy as np
import pytest
import yaml

from aqecsim.codes import binomial_code
from aqecsim.device import TWO_PI, params_from_dict, profile_path
from aqecsim.protocol import (CycleConfig, FitError, budget_config, direct_reset_study, fit_cosine,
                              fit_process_decay, free_evolution_channel, ideal_aqec_limit_study,
                              ideal_recovery_channel, ideal_swap_model, round_channel, run_protocol,
                              swap_phase_calibration, sweep_tfe, total_dephasing_chi, trotterized_recovery)
from aqecsim.quantum import identity_channel, identity_chi, process_fidelity, to_density


def _synthetic(t, tau=1627.0, f0=0.75):
    return f0 * np.exp(-np.asarray(t) / tau) + 0.25


@pytest.fixture(scope="module")
def lossless():
    raw = yaml.safe_load(profile_path("paper-default").read_text())
    for m in raw["modes"].values():
        if m.get("t1_us") is not None:
            m["t1_us"] = 1e15
            m["t2_us"] = 2e15
    return params_from_dict(raw)


def test_round_channels_cptp(params):
    for cfg in (budget_config(params), CycleConfig(recovery="none"), CycleConfig(pass_enabled=False)):
        ch = round_channel(params, cfg)
        assert ch.completeness_error() < 1e-8
        assert ch.choi_min_eig() > -1e-8


def test_zero_rounds_is_identity(params):
    rep = run_protocol(CycleConfig(rounds=0), params)
    assert rep[0].f_chi == pytest.approx(1.0, abs=1e-12)


def test_ideal_recovery_without_dissipation(lossless):
    reps = run_protocol(CycleConfig(rounds=5, thermal=False), lossless)
    assert all(r.f_chi == pytest.approx(1.0, abs=1e-9) for r in reps)


def test_trace_preserved_over_20_rounds(params):
    cfg = budget_config(params, rounds=20)
    s = np.linalg.matrix_power(round_channel(params, cfg).superop, 20)
    rho = binomial_code(8).code_projector / 2
    out = (s @ rho.reshape(-1)).reshape(8, 8)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-9)


def test_no_recovery_decays_faster(params):
    on = run_protocol(CycleConfig(rounds=4), params)
    off = run_protocol(CycleConfig(rounds=4, recovery="none"), params)
    assert all(b.f_chi <= a.f_chi + 1e-12 for a, b in zip(on, off))


def test_no_recovery_no_pass_single_round(params):
    reps = run_protocol(CycleConfig(rounds=1, recovery="none", pass_enabled=False), params)
    assert reps[1].f_chi == pytest.approx(0.755, abs=0.04)


def test_budget_round_close_to_budget_estimate(params):
    reps = run_protocol(budget_config(params, rounds=1), params)
    assert reps[1].f_norm == pytest.approx(0.872, abs=0.01)


def test_report_fields(params):
    r = run_protocol(CycleConfig(rounds=1), params)[1]
    assert r.f_norm == pytest.approx((r.f_chi - 0.25) / 0.75)
    assert r.p_logical + r.p_error + r.p_other == pytest.approx(1.0, abs=1e-9)
    assert r.chi.shape == (4, 4)


def test_config_validation():
    with pytest.raises(ValueError):
        CycleConfig(t_fe=0)
    with pytest.raises(ValueError):
        CycleConfig(recovery="grape")


def test_grape_recovery_hook(params):
    from aqecsim.codes import ideal_recovery_unitary
    from aqecsim.protocol import frame_for
    cfg = CycleConfig(rounds=2)
    u = ideal_recovery_unitary(binomial_code(8), frame_for(params, cfg))
    a = run_protocol(cfg, params)
    b = run_protocol(CycleConfig(rounds=2, recovery="grape", recovery_unitary=u), params)
    assert [x.f_chi for x in a] == pytest.approx([x.f_chi for x in b], abs=1e-12)


def test_fit_exact():
    t = np.arange(8) * 226.0
    f0, tau = fit_process_decay(t, _synthetic(t, 900.0, 0.7))
    assert f0 == pytest.approx(0.7, abs=1e-9)
    assert tau == pytest.approx(900.0, rel=1e-9)


def test_fit_recovers_1627_from_20_rounds():
    t = np.arange(20) * 226.0
    assert fit_process_decay(t, _synthetic(t))[1] == pytest.approx(1627.0, rel=0.01)


def test_fit_noise_robust():
    rng = np.random.default_rng(7)
    t = np.arange(20) * 226.0
    f = _synthetic(t) + rng.normal(0, 0.005, t.size)
    assert fit_process_decay(t, f)[1] == pytest.approx(1627.0, rel=0.05)


def test_fit_flags_degenerate():
    with pytest.raises(FitError):
        fit_process_decay([0, 1, 2], [0.6, 0.6, 0.6])
    with pytest.raises(FitError):
        fit_process_decay([0, 1], [0.9, 0.8])


def test_trotter_identity_recovery_is_free_evolution(params):
    ch = trotterized_recovery(1 / 50.0, identity_channel(8), 3, params)
    free = free_evolution_channel(params, 150.0, 8, thermal=False)
    assert np.allclose(ch.superop, free.superop, atol=1e-10)


def test_trotter_small_tau_matches_rate_model(params, code):
    from aqecsim.codes import decode_kraus, encode_isometry
    from aqecsim.linalg import dag
    from aqecsim.quantum import QuantumChannel, process_tomography
    ch = trotterized_recovery(1.0, ideal_recovery_channel(params, 1.0), 10, params)
    v, dec = encode_isometry(code), QuantumChannel(decode_kraus(code))
    f = process_fidelity(identity_chi(), process_tomography(lambda r: dec(ch(v @ to_density(r) @ dag(v)))))
    g = 2 / 1380
    assert (1 - f) / 10 == pytest.approx(g * g / 2, rel=0.05)


def test_single_round_ideal_gates_intrinsic_error(params):
    r = run_protocol(CycleConfig(rounds=1, thermal=False, overhead=0.0), params)[1]
    assert 0.94 <= r.f_norm <= 0.96


def test_sweep_interior_maximum(params):
    rows, best = sweep_tfe(np.linspace(50, 500, 10), params, rounds=6)
    assert 50 < best < 500


def test_sweep_perfect_gates_monotone(params):
    rows, best = sweep_tfe(np.linspace(50, 500, 6), params, rounds=6, perfect=True)
    taus = [r[1] for r in rows]
    assert all(a > b for a, b in zip(taus, taus[1:]))
    assert best == 50


def test_direct_reset_logical_words_protected(params):
    res = direct_reset_study(params)
    assert res.state_fidelities[0] == pytest.approx(1.0, abs=1e-9)
    assert res.state_fidelities[1] == pytest.approx(1.0, abs=1e-9)
    assert res.process_fidelity < 0.6


def test_direct_reset_ground_ancilla_is_identity(params):
    res = direct_reset_study(params, ancilla_init=0)
    assert res.process_fidelity == pytest.approx(1.0, abs=1e-9)


def test_direct_reset_fast_ancilla_suppresses_dephasing(params):
    res = direct_reset_study(params, ancilla_t1=0.001)
    assert res.process_fidelity > 0.99


def test_total_dephasing_half():
    assert process_fidelity(identity_chi(), total_dephasing_chi()) == pytest.approx(0.5, abs=1e-12)


def test_swap_calibration_phase_free():
    g, e, _ = swap_phase_calibration()
    assert all(abs(v) < 1e-9 or abs(v - 2 * np.pi) < 1e-9 for v in list(g.values()) + list(e.values()))


def test_swap_calibration_recovers_injected_phase():
    g, e, fits = swap_phase_calibration(ideal_swap_model(phi_g=(0, 0, 0.7, 0, 0), phi_e=(0, 0.1, 0.2, 0.3, 0.4)))
    assert g[2] == pytest.approx(0.7, abs=1e-6)
    assert [e[n] for n in range(1, 5)] == pytest.approx([0.1, 0.2, 0.3, 0.4], abs=1e-6)
    assert fits[(0, 2)].amplitude == pytest.approx(1.0, abs=1e-9)
    assert fits[(0, 2)].offset == pytest.approx(0.5, abs=1e-9)


def test_cosine_fit_residual_flag():
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    fit = fit_cosine(th, 0.5 + 0.5 * np.cos(th - 1.0) + 0.1 * np.cos(3 * th))
    assert fit.residual > 1e-3


def test_ideal_limit_short_time():
    r = ideal_aqec_limit_study(1 / 1380, [1e-3 * 1380], "linear")
    assert r[0] == pytest.approx(0.75, rel=0.01)


def test_ideal_limit_linear_value():
    # nbar kappa t = 0.1 -> F = 0.95
    kappa = 1 / 1380
    t = 0.05 / kappa
    f = (1 - 0.1) + 0.1 / 2
    assert f == pytest.approx(0.95)
    r = ideal_aqec_limit_study(kappa, [t], "linear")[0]
    assert r == pytest.approx(-t / np.log((0.95 - 0.25) / 0.75) * kappa)


@pytest.mark.parametrize("method", ["linear", "channel"])
def test_ideal_limit_monotone(method):
    r = ideal_aqec_limit_study(1 / 1380, np.linspace(1, 400, 8), method)
    assert np.all(np.diff(r) < 0)
    assert r[0] == pytest.approx(0.75, rel=0.01)
