import numpy as np
import pytest

from aqecsim.codes import DeformedFrame, binomial_code
from aqecsim.grape import (ControlModel, PenaltyParams, PulseGrid, TargetSet, build_target_set, gradient,
                           objective, optimize, propagate_step, qubit_cavity_model, qubit_model,
                           qubit_x_targets, rabi_check_pulse, read_pulse_csv, shape_penalty, swap_model,
                           swap_phases_from_unitary, total_propagator, write_pulse_csv, PENALTY_H, PENALTY_HD)
from aqecsim.linalg import dag, ket
from aqecsim.protocol import swap_phase_calibration


@pytest.fixture(scope="module")
def small(params):
    model = qubit_cavity_model(params, cavity_dim=6)
    # three channels: drop the cavity quadrature
    model = ControlModel(model.layout, model.h_static,
                         {k: v for k, v in model.controls.items() if k != "S1_Q"})
    return model, build_target_set("encode", binomial_code(6))


def _fd(pulse, targets, model, k, j, h=1e-7, penalty=None):
    x = pulse.as_array()
    vals = []
    for s in (1, -1):
        y = x.copy()
        y[k, j] += s * h
        p = PulseGrid.from_array(pulse.dt, pulse.names, y)
        v = objective(p, targets, model)
        if penalty is not None:
            v += shape_penalty(p, penalty.alpha_for(len(pulse.names)), penalty.h, penalty.h_d)
        vals.append(v)
    return (vals[0] - vals[1]) / (2 * h)


def test_propagate_step_zero_is_identity():
    assert np.allclose(propagate_step(np.zeros((3, 3)), [0.0], [np.eye(3)], 0.1), np.eye(3))


def test_rabi_area():
    u = total_propagator(rabi_check_pulse(), qubit_model())
    assert abs(u[1, 0]) == pytest.approx(1.0, abs=1e-12)


def test_trotter_refinement(params):
    model = qubit_cavity_model(params, cavity_dim=6)
    t = np.arange(200) * 0.004
    smooth = {n: TWO * np.sin(np.pi * t / 0.8) * (i + 1) / 4 for i, n in enumerate(model.names)}
    coarse = PulseGrid(0.004, smooth)
    fine = PulseGrid(0.002, {n: np.repeat(v, 2) for n, v in smooth.items()})
    diff = total_propagator(coarse, model) - total_propagator(fine, model)
    assert np.linalg.norm(diff, 2) < 1e-6


TWO = 2 * np.pi * 0.5


def test_objective_trivial_cases():
    model = ControlModel(qubit_model().layout, np.zeros((2, 2)), qubit_model().controls)
    pulse = PulseGrid.zeros(0.01, model.names, 5)
    same = TargetSet([ket(2, 0), ket(2, 1)], [ket(2, 0), ket(2, 1)])
    flip = TargetSet([ket(2, 0), ket(2, 1)], [ket(2, 1), ket(2, 0)])
    assert objective(pulse, same, model) == pytest.approx(0.0, abs=1e-15)
    assert objective(pulse, flip, model) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(gradient(pulse, same, model), 0.0, atol=1e-15)


def test_penalty_values():
    assert shape_penalty(PulseGrid.zeros(0.002, ["a", "b"], 10)) == 0.0
    n, alpha = 50, 0.3
    p = PulseGrid(0.002, {"a": np.full(n, PENALTY_H)})
    # the boundary slew from zero overflows the slew exponential
    with np.errstate(over="ignore"):
        assert shape_penalty(p, alpha=alpha) == np.inf
    half = PENALTY_H / 2
    p = PulseGrid(0.002, {"a": np.full(n, half)})
    assert shape_penalty(p, alpha=alpha, h_d=half) == pytest.approx(
        alpha * (np.exp(0.25) - 1) + alpha / n * (np.e - 1), rel=1e-12)
    assert PenaltyParams().alpha_for(4) == pytest.approx(0.025)
    assert PENALTY_H == pytest.approx(2 * np.pi * 480)
    assert PENALTY_HD == pytest.approx(2 * np.pi * 15)


def test_penalty_gradient_constant_pulse():
    n, alpha, eps = 20, 0.1, 2 * np.pi * 100
    p = PulseGrid(0.002, {"a": np.full(n, eps)})
    model = ControlModel(qubit_model().layout, np.zeros((2, 2)), {"a": np.zeros((2, 2))})
    ts = TargetSet([ket(2, 0)], [ket(2, 0)])
    g = gradient(p, ts, model, PenaltyParams(alpha=alpha))
    amp = 2 * alpha * np.exp((eps / PENALTY_H) ** 2) * eps / (n * PENALTY_H**2)
    # interior samples see no slew, the first sample also carries the boundary slew term
    assert g[5:-1, 0] == pytest.approx(amp, rel=1e-12)


def test_gradient_finite_differences(small):
    model, ts = small
    rng = np.random.default_rng(11)
    pulse = PulseGrid.from_array(0.01, model.names, rng.normal(0, 2 * np.pi, (20, 3)))
    pen = PenaltyParams()
    g = gradient(pulse, ts, model, pen)
    for _ in range(15):
        k, j = rng.integers(20), rng.integers(3)
        fd = _fd(pulse, ts, model, k, j, h=1e-5, penalty=pen)
        assert abs(fd - g[k, j]) <= 1e-5 * max(abs(g[k, j]), 1e-8)


def test_optimize_qubit_x_gate():
    res = optimize(qubit_x_targets(), qubit_model(), 0.2, seed=0, target_phi0=1e-6)
    assert res.phi0 < 1e-4
    assert res.converged


def test_optimize_deterministic(small):
    model, ts = small
    a = optimize(ts, model, 0.1, dt=0.01, seed=3, max_iters=15)
    b = optimize(ts, model, 0.1, dt=0.01, seed=3, max_iters=15)
    assert len(a.history) == len(b.history)
    assert np.allclose(a.history, b.history, atol=1e-12, rtol=0)
    assert np.array_equal(a.pulse.as_array(), b.pulse.as_array())


def test_unitarity_long_grid(params):
    model = qubit_cavity_model(params, cavity_dim=6)
    rng = np.random.default_rng(0)
    pulse = PulseGrid.from_array(0.001, model.names, rng.normal(0, 2 * np.pi, (4000, 4)))
    u = total_propagator(pulse, model)
    assert np.linalg.norm(u @ dag(u) - np.eye(model.dim)) < 1e-8


def test_target_set_counts(params, code):
    lay = swap_model(params).layout
    assert build_target_set("encode", code).m == 6
    assert build_target_set("decode", code).m == 7
    assert build_target_set("swap", layout=lay).m == 10
    assert build_target_set("aqec", code, DeformedFrame(t_fe=220, kappa=1 / 1380)).m == 13
    with pytest.raises(ValueError):
        build_target_set("aqec", code)


def test_aqec_targets_undeformed_limit(code):
    ts = build_target_set("aqec", code, DeformedFrame())
    g, e = ket(2, 0), ket(2, 1)
    assert np.allclose(ts.initials[0], np.kron(g, code.zero_l))
    assert np.allclose(ts.targets[0], np.kron(g, code.zero_l))
    assert np.allclose(ts.initials[6], np.kron(g, code.zero_e))
    assert np.allclose(ts.targets[6], np.kron(e, code.zero_l))


def test_target_set_rejects_unnormalized():
    with pytest.raises(ValueError):
        TargetSet([np.array([1.0, 1.0])], [ket(2, 0)])


def test_pulse_csv_roundtrip(tmp_path):
    p = PulseGrid(0.002, {"a": np.linspace(0, 1, 7), "b": np.arange(7.0)})
    write_pulse_csv(tmp_path / "p.csv", p)
    q = read_pulse_csv(tmp_path / "p.csv")
    assert q.names == ["a", "b"]
    assert q.dt == pytest.approx(0.002)
    assert np.allclose(q.as_array(), p.as_array())


def test_swap_phases_feed_calibration(params):
    model = swap_model(params, 5, 2)
    d = model.layout.dim
    phases = np.array([0, 0.3, 1.2, 0.4, 2.0])
    # a diagonal unitary with Fock phases exp(-i phi_n) in both ancilla branches
    n_op = np.real(np.diag(model.layout.embed("S1", np.diag(np.arange(5.0)))))
    u = np.diag(np.exp(-1j * phases[n_op.astype(int)]))
    # route Y1 excitation to Y2 so that the swap rows apply
    perm = np.eye(d)
    for n in range(5):
        i = np.argmax(model.layout.basis(S1=n, Y1=1, S2=0, Y2=0))
        j = np.argmax(model.layout.basis(S1=n, Y1=0, S2=0, Y2=1))
        perm[[i, j]] = perm[[j, i]]
    g, e = swap_phases_from_unitary(perm @ u, model.layout)
    assert g == pytest.approx(phases, abs=1e-12)
    assert e == pytest.approx(phases, abs=1e-12)
