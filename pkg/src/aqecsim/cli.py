"""Command-line front end: ``aqecsim run <kind>`` and ``aqecsim validate``.

Exit status: 0 success, 1 configuration error (the message names the key),
2 numerical non-convergence.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .device import TWO_PI, ConfigError, load_profile, params_from_dict
from .io import table_text, write_outputs

SCHEMA_VERSION = 1
KINDS = ("simulate", "grape", "pass", "rate", "budget", "sweep", "wigner", "direct-reset")

# kind -> default parameters; anything else under ``params`` is rejected
DEFAULTS = {
    "simulate": {"t_fe": None, "rounds": 10, "mode": "budget", "pass_enabled": True},
    "grape": {"gate": "encode", "duration": None, "dt": 0.002, "max_iters": 1500, "target_phi0": None,
              "cavity_dim": 8, "s1_dim": 5, "s2_dim": 4, "t_fe": None},
    "pass": {"levels": 8},
    "rate": {"epsilon": 0.076, "gamma": "2x1380", "tau_min": 10.0, "tau_max": 800.0, "points": 80},
    "budget": {},
    "sweep": {"t_min": 50.0, "t_max": 500.0, "points": 10, "rounds": 8, "perfect": False},
    "wigner": {"state": "-iy", "t_fe": 0.0, "extent": 3.0, "points": 41, "pass_enabled": True},
    "direct-reset": {"ancilla_t1": None, "chi_mhz": None, "ancilla": "e"},
}
DEFAULT_TARGET_PHI0 = {"encode": 0.01, "decode": 0.01, "swap": 0.02, "aqec": 0.02}


class NonConvergence(RuntimeError):
    pass


def parse_gamma(text):
    """``"2x1380"`` means ``2 / 1380`` per us; a bare number is taken as the rate itself."""
    s = str(text).strip()
    if "x" in s:
        a, b = s.split("x", 1)
        try:
            return float(a) / float(b)
        except (ValueError, ZeroDivisionError):
            raise ConfigError("gamma", f"cannot parse {text!r} (expected e.g. 2x1380)") from None
    try:
        return float(s)
    except ValueError:
        raise ConfigError("gamma", f"cannot parse {text!r}") from None


def _load_config_file(path):
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    allowed = {"schema_version", "kind", "profile", "device", "out", "seed", "params", "format"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(unknown[0], "unknown top-level key")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    return data


def resolve_config(args):
    """Merge config file, defaults and command-line overrides into one validated mapping."""
    data = _load_config_file(args.config) if args.config else {"schema_version": SCHEMA_VERSION}
    kind = args.kind or data.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"expected one of {list(KINDS)}, got {kind!r}")
    if data.get("kind") not in (None, kind):
        raise ConfigError("kind", f"config says {data['kind']!r} but command asks for {kind!r}")
    raw = data.get("params") or {}
    if not isinstance(raw, dict):
        raise ConfigError("params", "must be a mapping")
    params = dict(DEFAULTS[kind])
    for k, v in raw.items():
        if k not in params:
            raise ConfigError(f"params.{k}", f"not a parameter of {kind!r}")
        params[k] = v
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        if k not in params:
            raise ConfigError(f"params.{k}", f"not a parameter of {kind!r}")
        params[k] = yaml.safe_load(v)
    for flag, key in (("epsilon", "epsilon"), ("gamma", "gamma"), ("t_fe", "t_fe"), ("rounds", "rounds"),
                      ("gate", "gate")):
        val = getattr(args, flag, None)
        if val is not None:
            if key not in params:
                raise ConfigError(f"--{flag.replace('_', '-')}", f"not a parameter of {kind!r}")
            params[key] = val
    profile = args.profile or data.get("profile") or "paper-default"
    device = data.get("device")
    seed = args.seed if args.seed is not None else data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed", f"expected an integer, got {seed!r}")
    fmt = args.format or data.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format", f"expected csv or json, got {fmt!r}")
    out = args.out or data.get("out") or f"aqecsim-{kind}"
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "profile": profile if device is None else None,
            "device": device, "seed": seed, "format": fmt, "out": str(out), "params": params,
            "version": __version__}


def _device(cfg):
    if cfg["device"] is not None:
        return params_from_dict(cfg["device"])
    return load_profile(cfg["profile"])


def _num(params, key, positive=False, integer=False):
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"params.{key}", f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"params.{key}", f"expected an integer, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"params.{key}", f"must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _choice(params, key, options):
    v = params[key]
    if v not in options:
        raise ConfigError(f"params.{key}", f"expected one of {list(options)}, got {v!r}")
    return v


def _t_fe(dev, params):
    if params.get("t_fe") is None:
        return float(dev.protocol.get("t_fe_us", 220.0))
    return _num(params, "t_fe", positive=True)


def run_simulate(cfg, dev):
    from .protocol import CycleConfig, FitError, budget_config, fit_process_decay, run_protocol
    p = cfg["params"]
    t_fe = _t_fe(dev, p)
    rounds = _num(p, "rounds", positive=True, integer=True)
    mode = _choice(p, "mode", ("budget", "ideal", "none"))
    pe = bool(p["pass_enabled"])
    if mode == "budget":
        c = budget_config(dev, t_fe, rounds, pass_enabled=pe)
    else:
        c = CycleConfig(t_fe=t_fe, rounds=rounds, pass_enabled=pe, recovery="ideal" if mode == "ideal" else "none")
    reps = run_protocol(c, dev)
    rows = [(r.round, r.t, r.f_chi, r.f_norm, r.p_logical, r.p_error, r.p_other) for r in reps]
    cols = ["round", "t", "F_chi", "F_norm", "p_logical", "p_error", "p_other"]
    units = ["count", "us", "1", "1", "1", "1", "1"]
    summary = {"rounds": rounds, "t_cycle_us": c.t_cycle}
    lines = [f"F_chi after round 1: {reps[1].f_chi:.4f}"]
    if rounds >= 2:
        try:
            f0, tau = fit_process_decay([r.t for r in reps], [r.f_chi for r in reps])
        except FitError as exc:
            raise NonConvergence(f"process decay fit failed: {exc}") from None
        summary.update(F0=f0, tau_us=tau)
        lines.append(f"process decay time: {tau:.1f} us (F0 = {f0:.4f})")
    return {"rounds.csv": (cols, rows, units)}, summary, lines


def run_grape(cfg, dev):
    from .codes import binomial_code
    from .grape import GATE_DURATIONS, build_target_set, optimize, qubit_cavity_model, swap_model
    from .protocol import CycleConfig, frame_for
    p = cfg["params"]
    gate = _choice(p, "gate", tuple(GATE_DURATIONS))
    duration = GATE_DURATIONS[gate] if p["duration"] is None else _num(p, "duration", positive=True)
    dt = _num(p, "dt", positive=True)
    target = DEFAULT_TARGET_PHI0[gate] if p["target_phi0"] is None else _num(p, "target_phi0", positive=True)
    if gate == "swap":
        model = swap_model(dev, _num(p, "s1_dim", True, True), _num(p, "s2_dim", True, True))
        ts = build_target_set("swap", layout=model.layout)
    else:
        dim = _num(p, "cavity_dim", True, True)
        code = binomial_code(dim)
        qubit = "Y1" if gate == "aqec" else "I1"
        model = qubit_cavity_model(dev, qubit=qubit, cavity_dim=dim)
        frame = frame_for(dev, CycleConfig(t_fe=_t_fe(dev, p), cavity_dim=dim)) if gate == "aqec" else None
        ts = build_target_set(gate, code, frame, model.layout)
    res = optimize(ts, model, duration, dt=dt, seed=cfg["seed"], max_iters=_num(p, "max_iters", True, True),
                   target_phi0=target)
    x = res.pulse.as_array()
    cols = ["t"] + res.pulse.names
    rows = [(k * dt, *x[k]) for k in range(res.pulse.samples)]
    hist = [(i + 1, v) for i, v in enumerate(res.history)]
    summary = {"gate": gate, "phi0": res.phi0, "phi_shape": res.phi_shape, "iterations": res.iterations,
               "converged": res.converged, "target_phi0": target}
    files = {"pulse.csv": (cols, rows, ["us"] + ["rad/us"] * len(res.pulse.names)),
             "history.csv": (["iteration", "phi_total"], hist, ["count", "1"])}
    lines = [f"{gate}: Phi0 = {res.phi0:.3e} after {res.iterations} iterations"]
    if not res.converged:
        raise NonConvergence(f"{gate} pulse did not reach Phi0 < {target} (Phi0 = {res.phi0:.3e})")
    return files, summary, lines


def run_pass(cfg, dev):
    from .pass_drive import pass_excitation, transparent_spectrum
    from .protocol import _cached_pass, _pass_magnitudes
    chi, kerr = _pass_magnitudes(dev)
    try:
        pt = _cached_pass(chi, kerr)
    except RuntimeError as exc:
        raise NonConvergence(str(exc)) from None
    levels = _num(cfg["params"], "levels", True, True)
    energies = transparent_spectrum(chi, kerr, levels, pt)
    exc = pass_excitation(np.arange(levels), pt.delta, pt.omega, -chi)
    r_delta, r_omega = pt.ratios(chi, kerr)
    rows = [(n, energies[n] / TWO_PI, exc[n]) for n in range(levels)]
    summary = {"delta_mhz": pt.delta / TWO_PI, "omega_mhz": pt.omega / TWO_PI, "delta_over_chi": r_delta,
               "omega2_over_chi_k": r_omega, "mean_n_pass": pt.mean_excitation, "mismatch": pt.mismatch}
    lines = [f"Delta/2pi = {pt.delta / TWO_PI:.4f} MHz, Omega/2pi = {1e3 * pt.omega / TWO_PI:.2f} kHz",
             f"Delta/chi = {r_delta:.4f}, Omega^2/(chi K) = {r_omega:.4f}"]
    return {"spectrum.csv": (["n", "omega_n", "n_pass"], rows, ["count", "MHz", "1"])}, summary, lines


def run_rate(cfg, dev):
    from .rates import RateParams, effective_decay_rate, optimal_interval
    p = cfg["params"]
    eps = _num(p, "epsilon")
    if not 0 <= eps < 1:
        raise ConfigError("params.epsilon", f"must lie in [0, 1), got {eps}")
    g = parse_gamma(p["gamma"])
    tau_opt = optimal_interval(eps, g, g)
    taus = np.linspace(_num(p, "tau_min", True), _num(p, "tau_max", True), _num(p, "points", True, True))
    rows = [(t, effective_decay_rate(RateParams(g, g, 1 - eps, t))) for t in taus]
    g_opt = effective_decay_rate(RateParams(g, g, 1 - eps, tau_opt))
    summary = {"tau_opt_us": tau_opt, "gamma_eff_opt": g_opt, "gamma": g, "epsilon": eps}
    lines = [f"tau_opt = {tau_opt:.1f} us", f"gamma_eff(tau_opt) = {g_opt:.4e} /us"]
    return {"gamma_eff.csv": (["tau", "gamma_eff"], rows, ["us", "1/us"])}, summary, lines


def run_budget(cfg, dev):
    from .rates import BudgetInputs, budget_report, budget_total, derived_budget_terms
    try:
        b = BudgetInputs.from_dict(dev.budget)
    except KeyError as exc:
        raise ConfigError(f"budget.{exc.args[0].split(': ')[-1]}", "missing") from None
    derived = derived_budget_terms(dev)
    rows = [(k, v) for k, v in b.as_dict().items()] + [(k, v) for k, v in derived.items()]
    report = budget_report(b, derived)
    return ({"budget.csv": (["term", "value"], rows, ["-", "1"])},
            {"total": budget_total(b), **derived}, report.splitlines())


def run_sweep(cfg, dev):
    from .protocol import FitError, budget_config, process_t1, CycleConfig
    p = cfg["params"]
    ts = np.linspace(_num(p, "t_min", True), _num(p, "t_max", True), _num(p, "points", True, True))
    rounds = _num(p, "rounds", True, True)
    perfect = bool(p["perfect"])

    def one(t):
        if perfect:
            c = CycleConfig(t_fe=float(t), rounds=rounds, overhead=0.0, thermal=False)
        else:
            c = budget_config(dev, float(t), rounds)
        return process_t1(c, dev)
    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.get("jobs", 1))) as pool:
            taus = list(pool.map(one, ts))
    except FitError as exc:
        raise NonConvergence(f"process decay fit failed: {exc}") from None
    rows = list(zip(ts, taus))
    best = float(ts[int(np.argmax(taus))])
    interior = 0 < int(np.argmax(taus)) < len(ts) - 1
    return ({"sweep.csv": (["t_fe", "process_t1"], rows, ["us", "us"])},
            {"best_t_fe_us": best, "interior_maximum": interior},
            [f"best t_FE = {best:.0f} us (interior maximum: {interior})"])


LOGICAL_STATES = {
    "0": (1, 0), "1": (0, 1), "+x": (1, 1), "-x": (1, -1), "+iy": (1, 1j), "-iy": (1, -1j),
}


def run_wigner(cfg, dev):
    from .codes import binomial_code, encode_isometry
    from .protocol import free_evolution_channel
    from .quantum import wigner_grid
    p = cfg["params"]
    state = _choice(p, "state", tuple(LOGICAL_STATES))
    code = binomial_code(8)
    c = np.array(LOGICAL_STATES[state], dtype=complex)
    psi = encode_isometry(code) @ (c / np.linalg.norm(c))
    rho = np.outer(psi, psi.conj())
    t = _num(p, "t_fe")
    if t > 0:
        rho = free_evolution_channel(dev, t, 8, bool(p["pass_enabled"]))(rho)
    xs, grid, w = wigner_grid(rho, _num(p, "extent", True), _num(p, "points", True, True))
    rows = [(a.real, a.imag, v) for a, v in zip(grid.reshape(-1), w.reshape(-1))]
    return ({"wigner.csv": (["re_alpha", "im_alpha", "W"], rows, ["sqrt(photon)", "sqrt(photon)", "1"])},
            {"state": state, "t_fe_us": t}, [f"Wigner grid {len(xs)}x{len(xs)} for state {state}"])


def run_direct_reset(cfg, dev):
    from .protocol import direct_reset_study
    p = cfg["params"]
    t1 = None if p["ancilla_t1"] is None else _num(p, "ancilla_t1", True)
    chi = None if p["chi_mhz"] is None else TWO_PI * _num(p, "chi_mhz")
    anc = _choice(p, "ancilla", ("g", "e"))
    res = direct_reset_study(dev, t1, chi, ancilla_init=0 if anc == "g" else 1)
    names = ["0_L", "1_L", "(0_L+1_L)/sqrt2", "(0_L-i1_L)/sqrt2"]
    rows = [(n, f) for n, f in zip(names, res.state_fidelities)]
    return ({"direct_reset.csv": (["state", "fidelity"], rows, ["-", "1"])},
            {"process_fidelity": res.process_fidelity, "state_fidelities": res.state_fidelities},
            [f"process fidelity: {100 * res.process_fidelity:.1f}%"]
            + [f"  {n}: {100 * f:.1f}%" for n, f in zip(names, res.state_fidelities)])


RUNNERS = {"simulate": run_simulate, "grape": run_grape, "pass": run_pass, "rate": run_rate,
           "budget": run_budget, "sweep": run_sweep, "wigner": run_wigner, "direct-reset": run_direct_reset}


def cmd_run(args):
    cfg = resolve_config(args)
    cfg["jobs"] = max(1, int(args.jobs or 1))
    dev = _device(cfg)
    problems = dev.validate()
    if problems:
        raise ConfigError("profile", "; ".join(problems))
    tables, summary, lines = RUNNERS[cfg["kind"]](cfg, dev)
    fmt = cfg["format"]
    files = {}
    for name, (cols, rows, units) in tables.items():
        fname = name if fmt == "csv" else name.rsplit(".", 1)[0] + ".json"
        files[fname] = table_text(cols, rows, units, fmt)
    echo = {k: v for k, v in cfg.items() if k != "jobs"}
    write_outputs(cfg["out"], files, echo, summary)
    for ln in lines:
        print(ln)
    print(f"outputs written to {cfg['out']}")
    return 0


def validation_checks(dev):
    """``(name, passed, detail)`` for the invariant suite against one device profile."""
    from .codes import binomial_code, knill_laflamme_check
    from .grape import PulseGrid, build_target_set, gradient, objective, qubit_cavity_model
    from .lindblad import lindblad_propagate
    from .protocol import budget_config, free_evolution_channel, round_channel
    from .quantum import destroy, mode_operator
    out = []
    problems = dev.validate()
    out.append(("profile consistency", not problems, "; ".join(problems) or "ok"))
    if problems:
        return out
    try:
        for name, ch in (("free evolution", free_evolution_channel(dev, 220.0)),
                         ("AQEC round", round_channel(dev, budget_config(dev)))):
            ok = ch.completeness_error() < 1e-9 and ch.choi_min_eig() > -1e-8
            out.append((f"CPTP {name}", ok, f"completeness {ch.completeness_error():.1e}, "
                                            f"Choi min eig {ch.choi_min_eig():.1e}"))
        code = binomial_code(8)
        kl = knill_laflamme_check(code, [np.eye(8), destroy(8)])
        out.append(("Knill-Laflamme {I, a}", kl.passed, f"max violation {kl.max_violation:.1e}"))
        t1 = dev.mode("S1").t1_us
        rho1 = np.zeros((8, 8), dtype=complex)
        rho1[1, 1] = 1
        from .quantum import HilbertLayout
        from .device import build_collapse_set
        cs = build_collapse_set(dev, HilbertLayout([("S1", 8)]), dephasing=False, thermal=False)
        r = lindblad_propagate(rho1, np.zeros((8, 8)), cs, 220.0, 1.0)
        err = abs(r[1, 1].real - np.exp(-220.0 / t1))
        out.append(("analytic Fock-1 decay", err < 1e-4, f"abs error {err:.1e}"))
        model = qubit_cavity_model(dev, cavity_dim=6)
        ts = build_target_set("encode", binomial_code(6))
        rng = np.random.default_rng(0)
        pulse = PulseGrid.from_array(0.01, model.names, rng.normal(0, TWO_PI, (12, 4)))
        g = gradient(pulse, ts, model)
        worst = 0.0
        x = pulse.as_array()
        for _ in range(10):
            k, j = rng.integers(12), rng.integers(4)
            h = 1e-5
            xp, xm = x.copy(), x.copy()
            xp[k, j] += h
            xm[k, j] -= h
            fd = (objective(PulseGrid.from_array(0.01, model.names, xp), ts, model)
                  - objective(PulseGrid.from_array(0.01, model.names, xm), ts, model)) / (2 * h)
            worst = max(worst, abs(fd - g[k, j]) / max(abs(g[k, j]), 1e-10))
        out.append(("GRAPE gradient vs finite differences", worst < 1e-5, f"max rel error {worst:.1e}"))
    except (ValueError, KeyError) as exc:
        out.append(("model construction", False, str(exc)))
    return out


def cmd_validate(args):
    dev = load_profile(args.profile or "paper-default")
    checks = validation_checks(dev)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in checks) else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="aqecsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"aqecsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write CSV/JSON plus a manifest")
    run.add_argument("kind", nargs="?", choices=KINDS)
    run.add_argument("--profile", help="device profile name or YAML path")
    run.add_argument("--config", help="experiment config (YAML)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a kind parameter")
    run.add_argument("--epsilon", type=float)
    run.add_argument("--gamma")
    run.add_argument("--t-fe", dest="t_fe", type=float)
    run.add_argument("--rounds", type=int)
    run.add_argument("--gate", choices=tuple(DEFAULT_TARGET_PHI0))
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", help="run the invariant suite against a device profile")
    val.add_argument("--profile", help="device profile name or YAML path")
    val.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NonConvergence as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
