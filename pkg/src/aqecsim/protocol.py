"""Repetitive AQEC protocol: per-round channels, tomography, decay fits and the
protocol-level studies (t_FE sweep, direct reset, swap-phase calibration, ideal limit).

Every round channel acts on the storage cavity alone. The ancilla enters in
``|g>``, is entangled by the recovery gate, and is reset at the end of the round;
its branch (``g``: no loss detected, ``e``: loss corrected) selects the
per-branch error deductions.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from .codes import (DEFAULT_CAVITY_DIM, DeformedFrame, binomial_code, decode_kraus,
                    encode_isometry, ideal_recovery_unitary, unitary_from_pairs)
from .device import TWO_PI, CollapseSet, build_collapse_set, load_profile
from .linalg import dag, ket
from .lindblad import cavity_free_hamiltonian, lindblad_channel
from .pass_drive import kerr_spectrum, optimize_pass, transparent_spectrum
from .quantum import (CARDINAL_INPUTS, PAULIS, HilbertLayout, QuantumChannel, channel_from_superop,
                      identity_chi, process_fidelity, process_tomography, state_fidelity, to_density)
from .rates import profile_dephasing, residual_population

MAX_MIXED_FCHI = 0.25


@dataclass(frozen=True)
class BranchErrors:
    """Per-branch deductions applied after the recovery gate.

    ``f_ec``: recovery fidelity (the rest is logical depolarization);
    ``n_res``: residual excitation at the end of the cycle (depolarizing);
    ``p_swap``: residual population after the swap (full cavity dephasing).
    """

    f_ec: float = 1.0
    n_res: float = 0.0
    p_swap: float = 0.0

    @property
    def depolarizing(self):
        return 1.0 - self.f_ec * (1.0 - self.n_res)


@dataclass(frozen=True)
class CycleConfig:
    t_fe: float = 220.0
    rounds: int = 1
    recovery: str = "ideal"
    recovery_unitary: object = field(default=None, repr=False, compare=False)
    pass_enabled: bool = True
    phi_g: tuple = (0.0,) * 5
    phi_e: tuple = (0.0,) * 5
    overhead: float = 6.0
    p_deph: float = 0.0
    branch_g: BranchErrors = BranchErrors()
    branch_e: BranchErrors = BranchErrors()
    cavity_dim: int = DEFAULT_CAVITY_DIM
    thermal: bool = True
    cavity_dephasing: bool = False
    decode_in_frame: bool = True

    def __post_init__(self):
        if self.t_fe <= 0:
            raise ValueError("t_fe must be positive")
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if self.recovery not in ("ideal", "grape", "none"):
            raise ValueError(f"unknown recovery {self.recovery!r}")
        if self.recovery == "grape" and self.recovery_unitary is None:
            raise ValueError("recovery 'grape' needs recovery_unitary (ancilla (x) cavity)")

    @property
    def t_cycle(self):
        return self.t_fe + self.overhead


def budget_config(params=None, t_fe=None, rounds=1, **kw):
    """Cycle configuration whose per-round deductions follow the error budget at ``t_fe``.

    Thermal terms are recomputed for the given ``t_fe``; recovery fidelities and
    swap residuals are the profile values.
    """
    params = params or load_profile()
    t_fe = params.protocol.get("t_fe_us", 220.0) if t_fe is None else t_fe
    b = params.budget
    sw = params.protocol["swap_residual"]
    return CycleConfig(
        t_fe=t_fe, rounds=rounds, overhead=params.protocol.get("cycle_overhead_us", 6.0),
        p_deph=profile_dephasing(params, t_fe),
        branch_g=BranchErrors(b["F_EC_L"], residual_population(params, 0, t_fe), float(sw["case0"])),
        branch_e=BranchErrors(b["F_EC_E"], residual_population(params, 1, t_fe), float(sw["case1"])),
        **kw,
    )


def _pass_magnitudes(params):
    chi = -params.kerr("I1", "S1")
    kerr = -params.kerr("S1", "S1")
    return chi, kerr


def free_energies(params, pass_enabled, dim):
    chi, kerr = _pass_magnitudes(params)
    if pass_enabled:
        return transparent_spectrum(chi, kerr, levels=dim, point=_cached_pass(chi, kerr))
    return kerr_spectrum(kerr, levels=dim)


_PASS_CACHE = {}


def _cached_pass(chi, kerr):
    key = (round(chi, 12), round(kerr, 12))
    if key not in _PASS_CACHE:
        _PASS_CACHE[key] = optimize_pass(chi, kerr)
    return _PASS_CACHE[key]


def free_evolution_channel(params, t, dim=DEFAULT_CAVITY_DIM, pass_enabled=True, thermal=True,
                           cavity_dephasing=False):
    """Storage-cavity channel for an idle period ``t``: decay (+ heating) under the chosen spectrum."""
    layout = HilbertLayout([("S1", dim)])
    h = cavity_free_hamiltonian(free_energies(params, pass_enabled, dim), dim)
    cs = build_collapse_set(params, layout, dephasing=cavity_dephasing, thermal=thermal)
    return lindblad_channel(h, cs, t, layout)


def fock_dephasing_superop(p, dim):
    """``(1-p) rho + p diag(rho)``: full dephasing in the Fock basis with probability ``p``."""
    mask = np.eye(dim).reshape(-1)
    keep = (1 - p) + p * mask
    return np.diag(keep.astype(complex))


def code_depolarizing_superop(q, code):
    """``(1-q) rho + q tr(rho) I_code/2``."""
    d = code.dim
    p_code = code.code_projector / 2.0
    replace_op = np.outer(p_code.reshape(-1), np.eye(d).reshape(-1))
    return (1 - q) * np.eye(d * d, dtype=complex) + q * replace_op


def _unitary_superop(u):
    return np.kron(u, u.conj())


def frame_for(params, config):
    """Deformed frame the recovery gate is designed for (no-jump damping, level phases, swap phases)."""
    dim = config.cavity_dim
    energies = free_energies(params, config.pass_enabled, dim)
    kappa = 1.0 / params.mode("S1").t1_us
    return DeformedFrame(t_fe=config.t_fe, kappa=kappa, omegas=tuple(energies[:5]),
                         phi_g=config.phi_g, phi_e=config.phi_e)


def round_channel(params, config, code=None, free=None):
    """One AQEC round on the cavity: idle, recovery, branch deductions, swap, ancilla reset."""
    code = code or binomial_code(config.cavity_dim)
    d = code.dim
    free = free or free_evolution_channel(params, config.t_fe, d, config.pass_enabled, config.thermal,
                                          config.cavity_dephasing)
    pre = fock_dephasing_superop(config.p_deph, d) @ free.superop
    if config.recovery == "none":
        return channel_from_superop(pre, d, d)
    if config.recovery == "grape":
        u = np.asarray(config.recovery_unitary, dtype=complex)
        if u.shape != (2 * d, 2 * d):
            raise ValueError(f"recovery_unitary must be {2 * d}x{2 * d}")
    else:
        u = ideal_recovery_unitary(code, frame_for(params, config))
    w = u.reshape(2, d, 2, d)[:, :, 0, :]  # ancilla_out, cav_out, cav_in; ancilla enters in |g>
    total = np.zeros((d * d, d * d), dtype=complex)
    for c, br, phis in ((0, config.branch_g, config.phi_g), (1, config.branch_e, config.phi_e)):
        m = w[c]
        phases = np.zeros(d)
        phases[:5] = phis
        swap = _unitary_superop(np.diag(np.exp(1j * phases)))
        post = (code_depolarizing_superop(br.depolarizing, code)
                @ fock_dephasing_superop(br.p_swap, d) @ swap)
        total += post @ _unitary_superop(m) @ pre
    return channel_from_superop(total, d, d)


@dataclass
class CycleReport:
    round: int
    t: float
    chi: np.ndarray
    f_chi: float
    f_norm: float
    p_logical: float
    p_error: float
    p_other: float


def _decode_channel(code, dual=True):
    return QuantumChannel(decode_kraus(code, dual))


def logical_process(round_map, code, rounds, decode_dual=True):
    """Qubit channel ``decode o round^n o encode`` as a callable on density matrices."""
    v = encode_isometry(code)
    dec = _decode_channel(code, decode_dual)
    s = np.linalg.matrix_power(round_map.superop, rounds) if rounds else np.eye(code.dim**2)

    def apply(rho):
        cav = v @ to_density(rho) @ dag(v)
        out = (s @ cav.reshape(-1)).reshape(code.dim, code.dim)
        return dec(out)
    return apply, s


def subspace_populations(rho, dim):
    d = np.real(np.diag(rho))
    pl = d[0] + d[2] + d[4]
    pe = d[1] + d[3]
    return float(pl), float(pe), float(max(1.0 - pl - pe, 0.0))


def run_protocol(config, params=None, decode_dual=True):
    """Process fidelity after 0..rounds AQEC rounds (round 0 = encode then decode)."""
    params = params or load_profile()
    code = binomial_code(config.cavity_dim)
    rmap = round_channel(params, config, code)
    v = encode_isometry(code)
    dec = _decode_channel(code, decode_dual)
    reports = []
    s = np.eye(code.dim**2, dtype=complex)
    cav_inputs = [v @ to_density(psi) @ dag(v) for psi in CARDINAL_INPUTS]
    # without recovery the idle phases accumulate; decode in the frame that tracks them
    track = config.recovery == "none" and config.decode_in_frame
    energies = free_energies(params, config.pass_enabled, code.dim) if track else None
    for n in range(config.rounds + 1):
        if n:
            s = rmap.superop @ s
        view = s
        if track:
            view = _unitary_superop(np.diag(np.exp(1j * energies * config.t_fe * n))) @ s

        def apply(rho, s=view):
            cav = v @ to_density(rho) @ dag(v)
            return dec((s @ cav.reshape(-1)).reshape(code.dim, code.dim))
        chi = process_tomography(apply)
        f = process_fidelity(identity_chi(), chi)
        pops = np.mean([subspace_populations((s @ r.reshape(-1)).reshape(code.dim, code.dim), code.dim)
                        for r in cav_inputs], axis=0)
        reports.append(CycleReport(n, n * config.t_cycle, chi.chi, f, (f - MAX_MIXED_FCHI) / 0.75, *pops))
    return reports


def ideal_recovery_channel(params, t_fe, dim=DEFAULT_CAVITY_DIM, pass_enabled=True):
    """Cavity channel of the ideal recovery gate (ancilla in ``|g>``, then discarded)."""
    cfg = CycleConfig(t_fe=t_fe, pass_enabled=pass_enabled, cavity_dim=dim)
    code = binomial_code(dim)
    u = ideal_recovery_unitary(code, frame_for(params, cfg))
    w = u.reshape(2, dim, 2, dim)[:, :, 0, :]
    return QuantumChannel([w[0], w[1]])


def trotterized_recovery(rate, recovery, rounds, params=None, pass_enabled=True, thermal=False):
    """``(R o free(tau))^n`` with ``tau = 1/rate`` as a single cavity channel."""
    params = params or load_profile()
    if not recovery.is_cptp():
        raise ValueError("recovery channel is not CPTP")
    tau = 1.0 / rate
    free = free_evolution_channel(params, tau, recovery.dim_in, pass_enabled, thermal)
    step = recovery.superop @ free.superop
    s = np.linalg.matrix_power(step, rounds)
    return channel_from_superop(s, recovery.dim_in, recovery.dim_in)


class FitError(ValueError):
    pass


def _decay_model(t, f0, tau):
    return f0 * np.exp(-t / tau) + MAX_MIXED_FCHI


def fit_process_decay(t, f_chi):
    """Least-squares ``F_chi = F0 exp(-t/tau) + 0.25``; returns ``(F0, tau)``."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f_chi, dtype=float)
    if t.size < 3 or t.size != f.size:
        raise FitError("need at least 3 (t, F_chi) points")
    if np.ptp(f) < 1e-12 or np.ptp(t) <= 0:
        raise FitError("degenerate data: no decay to fit")
    y = f - MAX_MIXED_FCHI
    ok = y > 0
    if ok.sum() >= 2:
        slope, icpt = np.polyfit(t[ok], np.log(y[ok]), 1)
        guess = (float(np.exp(icpt)), float(-1.0 / slope) if slope < 0 else float(np.ptp(t)))
    else:
        guess = (float(y[0]), float(np.ptp(t)))
    if guess[1] <= 0:
        guess = (guess[0], float(np.ptp(t)))
    try:
        popt, _ = curve_fit(_decay_model, t, f, p0=guess, xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(str(exc)) from None
    if popt[1] <= 0:
        raise FitError("fitted decay time is not positive")
    return float(popt[0]), float(popt[1])


def process_t1(config, params=None, rounds=None):
    """Fitted process decay time of a configuration."""
    cfg = replace(config, rounds=rounds) if rounds is not None else config
    reps = run_protocol(cfg, params)
    return fit_process_decay([r.t for r in reps], [r.f_chi for r in reps])[1]


def sweep_tfe(t_values, params=None, rounds=8, perfect=False, **kw):
    """Fitted process T1 versus the idle time per round.

    With ``perfect`` every deduction is zero (ideal gates, no thermal terms);
    otherwise the budget deductions are re-evaluated at each ``t_FE``.
    Returns ``(rows, best_t)`` with rows of ``(t_fe, tau)``.
    """
    params = params or load_profile()
    rows = []
    for t in t_values:
        if perfect:
            cfg = CycleConfig(t_fe=float(t), rounds=rounds, overhead=kw.get("overhead", 0.0),
                              thermal=False, **{k: v for k, v in kw.items() if k != "overhead"})
        else:
            cfg = budget_config(params, float(t), rounds, **kw)
        rows.append((float(t), process_t1(cfg, params)))
    best = max(rows, key=lambda r: r[1])[0]
    return rows, best


@dataclass
class DirectResetResult:
    state_fidelities: list
    process_fidelity: float
    chi: np.ndarray = field(repr=False)


DIRECT_RESET_STATES = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / np.sqrt(2),
    np.array([1, -1j], dtype=complex) / np.sqrt(2),
)


def direct_reset_channel(params=None, ancilla_t1=None, chi=None, ancilla_init=1, duration=None,
                         dim=DEFAULT_CAVITY_DIM):
    """Cavity channel of resetting an ancilla that is dispersively coupled to the cavity.

    The ancilla (initially ``ancilla_init``) decays at ``1/ancilla_t1`` while
    shifting the cavity by ``chi * n`` whenever excited. ``chi`` is in rad/us
    (default: the profile's signed S1-Y1 entry).
    """
    params = params or load_profile()
    ancilla_t1 = params.protocol.get("direct_reset_ancilla_t1_us", 2.4) if ancilla_t1 is None else ancilla_t1
    chi = params.kerr("S1", "Y1") if chi is None else chi
    duration = 30.0 * ancilla_t1 if duration is None else duration
    layout = HilbertLayout([("S1", dim), ("Y1", 2)])
    n = np.diag(np.arange(dim)).astype(complex)
    pe = np.diag([0.0, 1.0]).astype(complex)
    h = chi * np.kron(n, pe)
    cs = CollapseSet().add("Y1:reset", np.kron(np.eye(dim), np.array([[0, 1], [0, 0]])), 1.0 / ancilla_t1)
    full = lindblad_channel(h, cs, duration, layout)
    # superop indices (i a, j b | k c, l e): prepare the ancilla in ``ancilla_init``, trace it out
    c = ancilla_init
    t = full.superop.reshape(dim, 2, dim, 2, dim, 2, dim, 2)[:, :, :, :, :, c, :, c]
    s = np.einsum("iajakl->ijkl", t)
    return channel_from_superop(s.reshape(dim * dim, dim * dim), dim, dim)


def direct_reset_study(params=None, ancilla_t1=None, chi=None, ancilla_init=1, dim=DEFAULT_CAVITY_DIM):
    """Fidelities of the four test states and the process fidelity for encode, direct reset, decode."""
    code = binomial_code(dim)
    reset = direct_reset_channel(params, ancilla_t1, chi, ancilla_init, dim=dim)
    v = encode_isometry(code)
    dec = _decode_channel(code, dual=True)

    def process(rho):
        return dec(reset(v @ to_density(rho) @ dag(v)))
    fids = [state_fidelity(psi, process(psi)) for psi in DIRECT_RESET_STATES]
    chi_m = process_tomography(process)
    return DirectResetResult(fids, process_fidelity(identity_chi(), chi_m), chi_m.chi)


def total_dephasing_chi():
    ch = QuantumChannel([np.sqrt(0.5) * PAULIS[0], np.sqrt(0.5) * PAULIS[3]])
    return process_tomography(ch)


def ideal_swap_model(phi_g=(0.0,) * 5, phi_e=(0.0,) * 5):
    """Swap acting on the cavity as Fock phases ``exp(i phi_cn)`` depending on the ancilla branch."""
    def swap(rho_cav, ancilla):
        phis = phi_g if ancilla == 0 else phi_e
        d = rho_cav.shape[0]
        ph = np.zeros(d)
        ph[:len(phis)] = phis
        u = np.diag(np.exp(1j * ph))
        return u @ rho_cav @ dag(u)
    return swap


def phase_to_qubit_unitary(n, dim=DEFAULT_CAVITY_DIM):
    """Unitary on qubit (x) cavity with ``|g,0> -> |g,0>``, ``|g,n> -> |e,0>``."""
    g, e = ket(2, 0), ket(2, 1)
    src = [np.kron(g, ket(dim, 0)), np.kron(g, ket(dim, n))]
    tgt = [np.kron(g, ket(dim, 0)), np.kron(e, ket(dim, 0))]
    return unitary_from_pairs(src, tgt, 2 * dim)


def analysis_rotation(theta):
    """pi/2 rotation about ``(sin t, -cos t, 0)``; maps ``(|g> + e^{i phi}|e>)/sqrt2`` to ``P_g = (1 + cos(t - phi))/2``."""
    axis = np.sin(theta) * PAULIS[1] - np.cos(theta) * PAULIS[2]
    return np.cos(np.pi / 4) * np.eye(2) - 1j * np.sin(np.pi / 4) * axis


@dataclass
class CosineFit:
    phase: float
    amplitude: float
    offset: float
    residual: float


def fit_cosine(theta, p):
    """Linear least squares ``p = a + b cos(theta) + c sin(theta)``."""
    theta = np.asarray(theta, dtype=float)
    a = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    coef, *_ = np.linalg.lstsq(a, p, rcond=None)
    resid = float(np.sqrt(np.mean((a @ coef - p) ** 2)))
    amp = float(np.hypot(coef[1], coef[2]))
    return CosineFit(float(np.arctan2(coef[2], coef[1]) % (2 * np.pi)), 2 * amp, float(coef[0]), resid)


def swap_phase_calibration(swap=None, levels=(1, 2, 3, 4), thetas=None, dim=DEFAULT_CAVITY_DIM,
                           max_residual=1e-6):
    """Recover the swap-imprinted phases from simulated Ramsey-type sweeps.

    For each ancilla branch and Fock level: prepare ``(|0>+|n>)/sqrt2``, apply
    the swap, map the ``{0, n}`` coherence onto a qubit, rotate by
    ``R_theta(pi/2)`` and record ``P_g``; a cosine fit gives the phase.
    Returns ``({n: phi_gn}, {n: phi_en}, fits)``.
    """
    swap = swap or ideal_swap_model()
    thetas = np.linspace(0, 2 * np.pi, 25, endpoint=False) if thetas is None else np.asarray(thetas)
    out = ({}, {})
    fits = {}
    for anc in (0, 1):
        for n in levels:
            psi = (ket(dim, 0) + ket(dim, n)) / np.sqrt(2)
            rho = swap(to_density(psi), anc)
            u = phase_to_qubit_unitary(n, dim)
            big = u @ np.kron(to_density(ket(2, 0)), rho) @ dag(u)
            q = HilbertLayout([("I1", 2), ("S1", dim)]).ptrace(big, "I1")
            ps = []
            for th in thetas:
                r = analysis_rotation(th)
                ps.append(float(np.real((r @ q @ dag(r))[0, 0])))
            fit = fit_cosine(thetas, np.array(ps))
            if fit.residual > max_residual:
                raise FitError(f"cosine fit residual {fit.residual:.2e} for n={n}, ancilla={anc}")
            out[anc][n] = fit.phase
            fits[(anc, n)] = fit
    return out[0], out[1], fits


def ideal_aqec_limit_study(kappa, t_values, method="linear", nbar=2.0, dim=DEFAULT_CAVITY_DIM):
    """Process-fidelity decay time (in units of ``1/kappa``) of ideal AQEC with direct reset.

    ``linear``: single-round estimate ``F = (1 - nbar k t) + nbar k t / 2``.
    ``channel``: pure cavity decay, ideal recovery, full Fock dephasing whenever
    the ancilla was excited, dual-aware decode. Both read ``tau`` off
    ``F = 0.75 exp(-t/tau) + 0.25`` after one round.
    """
    out = []
    for t in np.asarray(t_values, dtype=float):
        if method == "linear":
            f = (1 - nbar * kappa * t) + 0.5 * nbar * kappa * t
        elif method == "channel":
            f = _ideal_direct_reset_round(kappa, t, dim)
        else:
            raise ValueError(f"unknown method {method!r}")
        ratio = (f - MAX_MIXED_FCHI) / 0.75
        if ratio <= 0:
            out.append(0.0)
            continue
        out.append(float(-t / np.log(ratio) * kappa) if ratio < 1 else np.inf)
    return np.array(out)


def _ideal_direct_reset_round(kappa, t, dim):
    code = binomial_code(dim)
    layout = HilbertLayout([("S1", dim)])
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    free = lindblad_channel(np.zeros((dim, dim)), CollapseSet().add("S1:decay", a, kappa), t, layout)
    u = ideal_recovery_unitary(code, DeformedFrame(t_fe=t, kappa=kappa))
    w = u.reshape(2, dim, 2, dim)[:, :, 0, :]
    total = (_unitary_superop(w[0]) + fock_dephasing_superop(1.0, dim) @ _unitary_superop(w[1])) @ free.superop
    rmap = channel_from_superop(total, dim, dim)
    v = encode_isometry(code)
    dec = _decode_channel(code, dual=True)
    chi = process_tomography(lambda r: dec(rmap(v @ to_density(r) @ dag(v))))
    return process_fidelity(identity_chi(), chi)


def chi_mhz_to_rad(chi_mhz):
    return TWO_PI * chi_mhz
