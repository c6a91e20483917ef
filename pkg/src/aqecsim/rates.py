"""Three-subspace rate model, per-cycle correction, optimal interval and error budget."""

from dataclasses import dataclass, fields

import numpy as np

DEFAULT_CAVITY_T1 = 1380.0


@dataclass(frozen=True)
class RateState:
    """Populations of the code (c), correctable-error (e) and uncorrectable (u) subspaces."""

    p_c: float = 1.0
    p_e: float = 0.0
    p_u: float = 0.0

    def __post_init__(self):
        for name in ("p_c", "p_e", "p_u"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if abs(self.p_c + self.p_e + self.p_u - 1.0) > 1e-12:
            raise ValueError("populations do not sum to 1")


@dataclass(frozen=True)
class RateParams:
    gamma_c: float
    gamma_e: float
    f_success: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if self.gamma_c < 0 or self.gamma_e < 0:
            raise ValueError("rates must be non-negative")
        if not 0.0 <= self.f_success <= 1.0:
            raise ValueError("f_success must lie in [0, 1]")

    @classmethod
    def from_cavity_t1(cls, t1=DEFAULT_CAVITY_T1, **kw):
        """``gamma_c = gamma_e = 2 / T1`` (mean photon number 2 in both subspaces)."""
        return cls(gamma_c=2.0 / t1, gamma_e=2.0 / t1, **kw)


def evolve_rates(state, params, order="exact"):
    """Advance the populations by ``params.tau``.

    ``exact`` solves ``dPc = -gc Pc``, ``dPe = gc Pc - ge Pe``, ``dPu = ge Pe``
    in closed form; ``second`` keeps terms up to ``tau^2``.
    """
    gc, ge, t = params.gamma_c, params.gamma_e, params.tau
    pc, pe, pu = state.p_c, state.p_e, state.p_u
    if order == "exact":
        ec, ee = np.exp(-gc * t), np.exp(-ge * t)
        if abs(gc - ge) > 1e-12 * max(gc, ge, 1e-300):
            transfer = gc * (ec - ee) / (ge - gc)
        else:
            transfer = gc * t * ec
        new_c = pc * ec
        new_e = pc * transfer + pe * ee
    elif order == "second":
        new_c = pc * (1 - gc * t + 0.5 * (gc * t) ** 2)
        new_e = pc * (gc * t - 0.5 * gc * (gc + ge) * t**2) + pe * (1 - ge * t + 0.5 * (ge * t) ** 2)
    else:
        raise ValueError(f"unknown order {order!r}")
    new_u = 1.0 - new_c - new_e
    return RateState(float(new_c), float(new_e), float(max(new_u, 0.0) if new_u > -1e-15 else new_u))


def apply_correction(state, f_success):
    """Map the error subspace back: ``Pc <- F (Pc + Pe)``, the rest becomes uncorrectable."""
    s = state.p_c + state.p_e
    p_c = f_success * s
    return RateState(float(p_c), 0.0, float(1.0 - p_c))


def epsilon_from_fidelity(f_success, log=False):
    """Per-cycle error ``1 - F``; with ``log`` the exact per-cycle log-loss ``-ln F``."""
    if log:
        return float(-np.log(f_success))
    return 1.0 - f_success


def effective_decay_rate(params, log=False):
    """``gamma_eff = eps/tau + gamma_c gamma_e tau / 2`` with ``eps = 1 - F`` (``-ln F`` if ``log``)."""
    if params.tau <= 0:
        raise ValueError("tau must be positive")
    eps = epsilon_from_fidelity(params.f_success, log)
    return eps / params.tau + 0.5 * params.gamma_c * params.gamma_e * params.tau


def optimal_interval(epsilon, gamma_c, gamma_e):
    """``tau_opt = sqrt(2 eps / (gamma_c gamma_e))``, the minimizer of ``gamma_eff``."""
    if gamma_c <= 0 or gamma_e <= 0:
        raise ValueError("rates must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return float(np.sqrt(2.0 * epsilon / (gamma_c * gamma_e)))


def empirical_decay_rate(params, cycles=200, order="second"):
    """Decay rate of the code population from iterating evolve + correct.

    Fits ``-ln(Pc(n)/Pc(0)) / (n tau)`` over ``cycles`` rounds.
    """
    state = RateState()
    for _ in range(cycles):
        state = apply_correction(evolve_rates(state, params, order), params.f_success)
    return float(-np.log(state.p_c) / (cycles * params.tau))


def dephasing_infidelity(n_th, t1, t_fe):
    """Probability that a transient thermal excitation of either listed qubit dephases the cavity.

    ``n_th`` and ``t1`` are pairs for the two qubits; each contributes
    ``(1 - exp(-n t/T1)) - n (1 - exp(-t/T1))``.
    """
    n_th = np.atleast_1d(np.asarray(n_th, dtype=float))
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    if n_th.shape != t1.shape:
        raise ValueError("n_th and t1 must pair up")
    if np.any(t1 <= 0) or t_fe < 0 or np.any(n_th < 0):
        raise ValueError("inputs must be positive")
    terms = (1 - np.exp(-n_th * t_fe / t1)) - n_th * (1 - np.exp(-t_fe / t1))
    return float(np.sum(terms))


def relaxed_population(n_th, t1, t):
    """Thermal population re-equilibrated from zero after ``t``: ``n_th (1 - exp(-t/T1))``."""
    return float(n_th * (1 - np.exp(-t / t1)))


@dataclass(frozen=True)
class BudgetInputs:
    p_L: float
    p_E: float
    F_FE_L: float
    F_FE_E: float
    F_EC_L: float
    F_EC_E: float
    N_th_L: float
    N_th_E: float
    F_swap_L: float
    F_swap_E: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name} = {v} outside [0, 1]")

    @classmethod
    def from_dict(cls, data):
        missing = [f.name for f in fields(cls) if f.name not in data]
        if missing:
            raise KeyError(f"budget entry missing: {missing[0]}")
        return cls(**{f.name: float(data[f.name]) for f in fields(cls)})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def branch_fidelity(f_fe, n_th, f_ec, f_swap):
    return (f_fe - n_th) * f_ec * f_swap


def budget_total(inputs):
    """Single-round normalized fidelity summed over the no-loss and single-loss branches."""
    b = inputs
    return (b.p_L * branch_fidelity(b.F_FE_L, b.N_th_L, b.F_EC_L, b.F_swap_L)
            + b.p_E * branch_fidelity(b.F_FE_E, b.N_th_E, b.F_EC_E, b.F_swap_E))


def swap_fidelity(residual):
    """Residual population dephases the cavity; ``|0_L>`` is immune, so ``F = 1 - 2/3 p``."""
    return 1.0 - residual * 2.0 / 3.0


def thermal_infidelity(n_res, p_deph):
    return n_res + 2.0 / 3.0 * p_deph


def residual_population(params, case, t_fe=None):
    """Total residual excitation at the end of a cycle for branch ``case`` (0 or 1).

    Unreset modes (I1, S3) re-thermalize from zero over ``t_fe``; the reset
    modes use the per-branch values stored in the profile.
    """
    t_fe = params.protocol.get("t_fe_us", 220.0) if t_fe is None else t_fe
    total = 0.0
    for name in ("I1", "S3"):
        m = params.mode(name)
        total += relaxed_population(m.n_th, m.t1_us, t_fe)
    for v in params.protocol["residual_after_cycle"][f"case{case}"].values():
        total += float(v)
    return total


def profile_dephasing(params, t_fe=None):
    t_fe = params.protocol.get("t_fe_us", 220.0) if t_fe is None else t_fe
    i1, y1 = params.mode("I1"), params.mode("Y1")
    return dephasing_infidelity([i1.n_th, y1.n_th], [i1.t1_us, y1.t1_us], t_fe)


def derived_budget_terms(params, t_fe=None):
    """Thermal and swap factors recomputed from the profile's raw populations."""
    p_deph = profile_dephasing(params, t_fe)
    out = {"p_deph": p_deph}
    for case, tag in ((0, "L"), (1, "E")):
        n_res = residual_population(params, case, t_fe)
        out[f"n_res_{tag}"] = n_res
        out[f"N_th_{tag}"] = thermal_infidelity(n_res, p_deph)
        out[f"F_swap_{tag}"] = swap_fidelity(float(params.protocol["swap_residual"][f"case{case}"]))
    return out


def budget_report(inputs, derived=None):
    """Plain-text table of the single-round budget."""
    b = inputs
    rows = [
        ("Intrinsic (free evolution)", b.F_FE_L, b.F_FE_E),
        ("Thermal & reset (N_th)", b.N_th_L, b.N_th_E),
        ("Recovery", b.F_EC_L, b.F_EC_E),
        ("Excitation transfer", b.F_swap_L, b.F_swap_E),
    ]
    lines = [f"{'term':<30}{'case 0 (no loss)':>18}{'case 1 (loss)':>16}",
             f"{'branch weight':<30}{b.p_L:>18.3f}{b.p_E:>16.3f}"]
    lines += [f"{name:<30}{a:>18.3f}{e:>16.3f}" for name, a, e in rows]
    lines.append(f"{'branch fidelity':<30}{branch_fidelity(b.F_FE_L, b.N_th_L, b.F_EC_L, b.F_swap_L):>18.4f}"
                 f"{branch_fidelity(b.F_FE_E, b.N_th_E, b.F_EC_E, b.F_swap_E):>16.4f}")
    if derived:
        lines.append(f"{'p_deph (per round)':<30}{derived['p_deph']:>18.5f}")
    lines.append(f"total single-round fidelity: {100 * budget_total(b):.1f}%")
    return "\n".join(lines)
