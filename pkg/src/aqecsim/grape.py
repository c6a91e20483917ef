"""Gradient ascent pulse engineering on piecewise-constant controls.

The objective is the mean state-transfer infidelity
``Phi0 = 1 - (1/m) sum_r |<f_r| U_N ... U_1 |i_r>|^2`` plus an exponential
amplitude/slew penalty. Gradients use the exact derivative of each step
propagator in the eigenbasis of the step Hamiltonian, so they agree with
finite differences at any ``dt``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize

from .codes import decode_rows, encode_rows, recovery_rows
from .device import TWO_PI, build_static_hamiltonian
from .linalg import dag, expm_frechet_weights, expm_hermitian_step, ket
from .quantum import HilbertLayout, mode_operator

DEFAULT_DT = 0.002
PENALTY_H = TWO_PI * 480.0
PENALTY_HD = TWO_PI * 15.0
GATE_DURATIONS = {"encode": 1.2, "decode": 1.8, "swap": 1.6, "aqec": 4.4}


@dataclass
class PulseGrid:
    """Piecewise-constant control amplitudes (rad/us) on a uniform grid of step ``dt`` (us)."""

    dt: float
    channels: dict

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError("all channels must have the same number of samples")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}

    @property
    def names(self):
        return list(self.channels)

    @property
    def samples(self):
        return len(next(iter(self.channels.values()))) if self.channels else 0

    @property
    def duration(self):
        return self.samples * self.dt

    def as_array(self):
        """``(N, K)`` array in channel order."""
        return np.column_stack([self.channels[k] for k in self.names])

    @classmethod
    def from_array(cls, dt, names, values):
        values = np.asarray(values, dtype=float).reshape(-1, len(names))
        return cls(dt, {n: values[:, j].copy() for j, n in enumerate(names)})

    @classmethod
    def zeros(cls, dt, names, samples):
        return cls(dt, {n: np.zeros(samples) for n in names})


@dataclass
class ControlModel:
    """Static Hamiltonian plus Hermitian control operators, one per real channel."""

    layout: HilbertLayout
    h_static: np.ndarray
    controls: dict

    def __post_init__(self):
        d = self.layout.dim
        self.h_static = np.asarray(self.h_static, dtype=complex)
        if self.h_static.shape != (d, d):
            raise ValueError("h_static does not match the layout")
        for name, op in self.controls.items():
            if np.asarray(op).shape != (d, d):
                raise ValueError(f"control {name!r} does not match the layout")

    @property
    def names(self):
        return list(self.controls)

    @property
    def dim(self):
        return self.layout.dim

    def stacked_controls(self):
        return np.array([self.controls[n] for n in self.names], dtype=complex)


@dataclass
class TargetSet:
    """State-transfer conditions ``initial -> target`` on a layout."""

    initials: list
    targets: list
    layout: HilbertLayout = None
    name: str = ""

    def __post_init__(self):
        if len(self.initials) != len(self.targets) or not self.initials:
            raise ValueError("need matching, non-empty initial and target lists")
        for v in list(self.initials) + list(self.targets):
            if abs(np.linalg.norm(v) - 1.0) > 1e-10:
                raise ValueError("target-set states must be normalized")

    @property
    def m(self):
        return len(self.initials)

    def matrices(self):
        return (np.array(self.initials, dtype=complex).T, np.array(self.targets, dtype=complex).T)

    @classmethod
    def from_pairs(cls, pairs, layout=None, name=""):
        return cls([p[0] for p in pairs], [p[1] for p in pairs], layout, name)


def _iq_cavity(layout, mode):
    a = mode_operator(layout, mode, "lower")
    return a + dag(a), 1j * (dag(a) - a)


def qubit_cavity_model(params, qubit="I1", cavity="S1", cavity_dim=8):
    """Drive on one transmon (2 levels) and one cavity with their dispersive and Kerr terms.

    The same builder serves encode/decode (``I1``) and the recovery gate (``Y1``).
    """
    layout = HilbertLayout([(qubit, 2), (cavity, cavity_dim)])
    ci, cq = _iq_cavity(layout, cavity)
    controls = {
        f"{cavity}_I": ci, f"{cavity}_Q": cq,
        f"{qubit}_I": mode_operator(layout, qubit, "sigma_x"),
        f"{qubit}_Q": mode_operator(layout, qubit, "sigma_y"),
    }
    return ControlModel(layout, build_static_hamiltonian(params, layout), controls)


def swap_model(params, s1_dim=5, s2_dim=4):
    """Excitation transfer Y1 -> Y2 via S2 with the storage cavity as a spectator."""
    layout = HilbertLayout([("S1", s1_dim), ("Y1", 2), ("S2", s2_dim), ("Y2", 2)])
    si, sq = _iq_cavity(layout, "S2")
    controls = {
        "Y1_I": mode_operator(layout, "Y1", "sigma_x"), "Y1_Q": mode_operator(layout, "Y1", "sigma_y"),
        "S2_I": si, "S2_Q": sq,
        "Y2_I": mode_operator(layout, "Y2", "sigma_x"), "Y2_Q": mode_operator(layout, "Y2", "sigma_y"),
    }
    return ControlModel(layout, build_static_hamiltonian(params, layout), controls)


def qubit_model():
    layout = HilbertLayout([("Q", 2)])
    return ControlModel(layout, np.zeros((2, 2)), {"Q_I": mode_operator(layout, "Q", "sigma_x"),
                                                  "Q_Q": mode_operator(layout, "Q", "sigma_y")})


def swap_rows(layout, levels=5):
    """``|n,g,0,g> -> |n,g,0,g>`` and ``|n,e,0,g> -> |n,g,0,e>`` for ``n < levels``."""
    rows = []
    for n in range(levels):
        rows.append((layout.basis(S1=n, Y1=0, S2=0, Y2=0), layout.basis(S1=n, Y1=0, S2=0, Y2=0)))
        rows.append((layout.basis(S1=n, Y1=1, S2=0, Y2=0), layout.basis(S1=n, Y1=0, S2=0, Y2=1)))
    return rows


def build_target_set(kind, code=None, frame=None, layout=None):
    """Target set for ``encode`` (6 rows), ``decode`` (7), ``swap`` (10) or ``aqec`` (13)."""
    if kind == "encode":
        return TargetSet.from_pairs(encode_rows(code), layout, kind)
    if kind == "decode":
        return TargetSet.from_pairs(decode_rows(code, dual=True), layout, kind)
    if kind == "aqec":
        if frame is None:
            raise ValueError("aqec target set needs a DeformedFrame (t_fe, kappa, omegas, swap phases)")
        return TargetSet.from_pairs(recovery_rows(frame, code.dim), layout, kind)
    if kind == "swap":
        if layout is None:
            raise ValueError("swap target set needs the S1, Y1, S2, Y2 layout")
        return TargetSet.from_pairs(swap_rows(layout), layout, kind)
    raise ValueError(f"unknown target kind {kind!r}")


def propagate_step(h_static, drives, control_ops, dt):
    """``exp(-i (H + sum_x eps_x C_x) dt)``."""
    h = np.asarray(h_static, dtype=complex).copy()
    for eps, op in zip(drives, control_ops):
        h = h + eps * np.asarray(op)
    return expm_hermitian_step(h, dt)[0]


def total_propagator(pulse, model):
    x = pulse.as_array()
    ctrl = model.stacked_controls()
    u = np.eye(model.dim, dtype=complex)
    for k in range(pulse.samples):
        u = propagate_step(model.h_static, x[k], ctrl, pulse.dt) @ u
    return u


def objective(pulse, targets, model):
    """``Phi0 = 1 - (1/m) sum |<f|U|i>|^2``."""
    ini, tgt = targets.matrices()
    u = total_propagator(pulse, model)
    o = np.sum(tgt.conj() * (u @ ini), axis=0)
    return float(1.0 - np.mean(np.abs(o) ** 2))


@dataclass(frozen=True)
class PenaltyParams:
    alpha: float = None
    h: float = PENALTY_H
    h_d: float = PENALTY_HD

    def __post_init__(self):
        if self.h <= 0 or self.h_d <= 0:
            raise ValueError("h and h_d must be positive")

    def alpha_for(self, channels):
        return 0.1 / channels if self.alpha is None else self.alpha


def _penalty_terms(x, alpha, h, h_d):
    n = x.shape[0]
    # slew measured from eps(t0) = 0
    prev = np.vstack([np.zeros((1, x.shape[1])), x[:-1]])
    slew = x - prev
    ea = np.exp((x / h) ** 2)
    es = np.exp((slew / h_d) ** 2)
    value = alpha / n * (np.sum(ea - 1) + np.sum(es - 1))
    gs = 2 * slew / h_d**2 * es
    grad = alpha / n * (2 * x / h**2 * ea + gs)
    grad[:-1] -= alpha / n * gs[1:]
    return float(value), grad


def shape_penalty(pulse, alpha=None, h=PENALTY_H, h_d=PENALTY_HD):
    """Exponential amplitude and slew penalty averaged over samples, summed over channels."""
    pp = PenaltyParams(alpha, h, h_d)
    x = pulse.as_array()
    return _penalty_terms(x, pp.alpha_for(x.shape[1]), pp.h, pp.h_d)[0]


def _phi0_and_grad(x, dt, model, targets):
    """``Phi0`` and its exact gradient ``(N, K)`` for amplitudes ``x``."""
    ini, tgt = targets.matrices()
    m = targets.m
    ctrl = model.stacked_controls()
    n = x.shape[0]
    vs, ws, psis = [], [], []
    psi = ini
    for k in range(n):
        h = model.h_static + np.tensordot(x[k], ctrl, axes=1)
        w, v = np.linalg.eigh(h)
        psis.append(psi)
        psi = v @ (np.exp(-1j * w * dt)[:, None] * (dag(v) @ psi))
        vs.append(v)
        ws.append(w)
    o = np.sum(tgt.conj() * psi, axis=0)
    phi0 = float(1.0 - np.mean(np.abs(o) ** 2))
    grad = np.zeros_like(x)
    lam = tgt
    for k in range(n - 1, -1, -1):
        v, w = vs[k], ws[k]
        lt = dag(v) @ lam
        pt = dag(v) @ psis[k]
        g = ((lt.conj() * o.conj()[None, :]) @ pt.T) * expm_frechet_weights(w, dt)
        y = v @ g.T @ dag(v)
        s = np.einsum("kab,ba->k", ctrl, y)
        grad[k] = -(2.0 / m) * np.real(-1j * dt * s)
        # step the co-state back: lam <- U_k^dag lam
        lam = v @ (np.exp(1j * w * dt)[:, None] * lt)
    return phi0, grad


def gradient(pulse, targets, model, penalty=None):
    """Gradient of ``Phi0`` (plus ``Phi_shape`` when ``penalty`` is given) per sample and channel."""
    x = pulse.as_array()
    _, g = _phi0_and_grad(x, pulse.dt, model, targets)
    if penalty is not None:
        g = g + _penalty_terms(x, penalty.alpha_for(x.shape[1]), penalty.h, penalty.h_d)[1]
    return g


def initial_pulse(model, duration, dt=DEFAULT_DT, seed=0, amplitude=TWO_PI * 0.5, smooth=10.0):
    """Seeded low-amplitude noise, Gaussian-filtered over ``smooth`` samples."""
    n = int(round(duration / dt))
    if n < 1:
        raise ValueError("duration shorter than one step")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, len(model.names)))
    x = gaussian_filter1d(raw, smooth, axis=0, mode="constant") if smooth > 0 else raw
    scale = np.max(np.abs(x))
    x = amplitude * x / scale if scale > 0 else x
    return PulseGrid.from_array(dt, model.names, x)


@dataclass
class OptimizeResult:
    pulse: PulseGrid
    phi0: float
    phi_shape: float
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    message: str = ""

    @property
    def phi_total(self):
        return self.phi0 + self.phi_shape


def optimize(targets, model, duration, dt=DEFAULT_DT, seed=0, max_iters=1000, tol=1e-10,
             target_phi0=None, penalty=PenaltyParams(), init=None, init_amplitude=TWO_PI * 0.5):
    """Minimize ``Phi0 + Phi_shape`` with L-BFGS-B from a seeded smooth initial pulse.

    ``converged`` is true when the optimizer reports success or ``Phi0`` falls
    below ``target_phi0``. The history holds ``Phi_total`` after each iteration.
    """
    pulse0 = init or initial_pulse(model, duration, dt, seed, init_amplitude)
    if pulse0.names != model.names:
        raise ValueError("initial pulse channels do not match the model")
    shape = (pulse0.samples, len(model.names))
    alpha = penalty.alpha_for(shape[1]) if penalty is not None else 0.0
    cache = {}

    def fun(flat):
        x = flat.reshape(shape)
        phi0, g = _phi0_and_grad(x, dt, model, targets)
        ps, gp = _penalty_terms(x, alpha, penalty.h, penalty.h_d) if penalty is not None else (0.0, 0.0)
        cache["phi0"], cache["ps"] = phi0, ps
        return phi0 + ps, (g + gp).ravel()

    history = []

    def callback(intermediate_result):
        history.append(float(intermediate_result.fun))
        if target_phi0 is not None and cache.get("phi0", 1.0) < target_phi0:
            raise StopIteration

    res = minimize(fun, pulse0.as_array().ravel(), jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": max_iters, "ftol": tol, "gtol": 1e-12, "maxcor": 20})
    pulse = PulseGrid.from_array(dt, model.names, res.x.reshape(shape))
    phi0 = objective(pulse, targets, model)
    phi_s = shape_penalty(pulse, alpha, penalty.h, penalty.h_d) if penalty is not None else 0.0
    ok = phi0 < target_phi0 if target_phi0 is not None else bool(res.success)
    return OptimizeResult(pulse, phi0, phi_s, history, int(res.nit), ok, str(res.message))


def swap_phases_from_unitary(u, layout, levels=5):
    """Fock phases ``phi_gn``, ``phi_en`` imprinted by a swap unitary (relative to ``n = 0``).

    Uses the convention of the swap targets: ``<target|U|initial> ~ exp(-i phi)``.
    """
    rows = swap_rows(layout, levels)
    amps = [np.vdot(t, u @ i) for i, t in rows]
    g = np.array(amps[0::2])
    e = np.array(amps[1::2])
    phi_g = -np.angle(g / g[0])
    phi_e = -np.angle(e / e[0])
    return np.mod(phi_g, 2 * np.pi), np.mod(phi_e, 2 * np.pi)


def write_pulse_csv(path, pulse):
    """Columns ``t_us`` (sample start) and one column per channel in rad/us."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# dt_us={pulse.dt} samples={pulse.samples} amplitude_unit=rad/us\n")
        w = csv.writer(fh)
        w.writerow(["t_us"] + pulse.names)
        x = pulse.as_array()
        for k in range(pulse.samples):
            w.writerow([f"{k * pulse.dt:.6f}"] + [f"{v:.12g}" for v in x[k]])


def read_pulse_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    names = rows[0][1:]
    data = np.array(rows[1:], dtype=float)
    dt = data[1, 0] - data[0, 0] if len(data) > 1 else None
    return PulseGrid.from_array(dt, names, data[:, 1:])


def rabi_check_pulse(area=np.pi / 2, samples=50, dt=DEFAULT_DT):
    """Constant ``Q_I`` pulse with ``sum eps dt = area`` on the bare qubit model."""
    eps = area / (samples * dt)
    return PulseGrid(dt, {"Q_I": np.full(samples, eps), "Q_Q": np.zeros(samples)})


def qubit_x_targets():
    g, e = ket(2, 0), ket(2, 1)
    return TargetSet([g, e, (g + e) / np.sqrt(2)], [e, g, (g + e) / np.sqrt(2)], name="x")
