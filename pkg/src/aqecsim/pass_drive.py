"""Photon-number-resolved a.c. Stark shift (PASS) working point.

``pass_level_shift`` and ``pass_excitation`` evaluate the textbook formulas
literally in whatever sign convention the caller passes. ``optimize_pass``
takes the positive magnitudes ``chi = -chi_qs`` and ``kerr = -chi_ss`` and
evaluates the level shifts with the signed registry values ``-chi`` and
``-kerr``; this is the combination under which the Fock-ladder constraint
has a physical (``Omega^2 > 0``) solution at ``Delta ~ -3.5 chi``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

RESONANCE_TOL = 1e-6
LEVELS = np.arange(5)


class PassResonanceError(ValueError):
    pass


def _denominator(n, delta, chi):
    d = delta - n * chi
    if np.any(np.abs(d) < RESONANCE_TOL):
        raise PassResonanceError(f"drive resonant with Fock level {n}: |Delta - n chi| < {RESONANCE_TOL}")
    return d


def pass_level_shift(n, delta, omega, chi, kerr):
    """``omega_n = -Omega^2/(Delta - n chi) - (K/2) n (n-1)`` in rad/us."""
    n = np.asarray(n, dtype=float)
    return -omega**2 / _denominator(n, delta, chi) - 0.5 * kerr * n * (n - 1)


def pass_excitation(n, delta, omega, chi):
    """Drive-induced qubit excitation ``Omega^2/(Delta - n chi)^2``."""
    n = np.asarray(n, dtype=float)
    return omega**2 / _denominator(n, delta, chi) ** 2


def transparency_mismatch(delta, omega, chi, kerr, convention="ladder"):
    """Error-transparency residual of the shifted spectrum.

    ``ladder``: ``(w4 - w3) - (w2 - w1)``, the quantity plotted in the PASS
    calibration. ``symmetric``: ``(w4 - w3) - (w3 - w1)``, the form quoted in
    the surrounding text, which pure Kerr already satisfies.
    """
    w = pass_level_shift(LEVELS, delta, omega, chi, kerr)
    if convention == "ladder":
        return (w[4] - w[3]) - (w[2] - w[1])
    if convention == "symmetric":
        return (w[4] - w[3]) - (w[3] - w[1])
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class PassPoint:
    delta: float
    omega: float
    mean_excitation: float
    mismatch: float
    iterations: int

    def ratios(self, chi, kerr):
        """``(Delta/chi, Omega^2/(chi K))``."""
        return self.delta / chi, self.omega**2 / (chi * kerr)


def _omega_sq_for(delta, chi_s, kerr_s, convention):
    # the mismatch is affine in Omega^2: m(W) = m(0) + W * slope
    m0 = transparency_mismatch(delta, 0.0, chi_s, kerr_s, convention)
    slope = transparency_mismatch(delta, 1.0, chi_s, kerr_s, convention) - m0
    if abs(slope) < 1e-300:
        return np.inf
    return -m0 / slope


def optimize_pass(chi, kerr, convention="ladder", span=12.0, grid=4801, max_iter=500):
    """Minimize the mean of ``n_PASS`` over Fock levels 0..4 subject to zero mismatch.

    For fixed ``Delta`` the constraint fixes ``Omega^2`` uniquely, so the
    search is one-dimensional: a dense scan of ``Delta/chi`` in
    ``[-span, span]`` followed by bounded Brent refinement around the best
    admissible grid point (``Omega^2 > 0``, away from resonances).
    """
    if chi <= 0 or kerr <= 0:
        raise ValueError("chi and kerr are positive magnitudes here")
    chi_s, kerr_s = -chi, -kerr

    def cost(x):
        delta = x * chi
        try:
            w2 = _omega_sq_for(delta, chi_s, kerr_s, convention)
            if not np.isfinite(w2) or w2 <= 0:
                return np.inf
            return float(np.mean(pass_excitation(LEVELS, delta, np.sqrt(w2), chi_s)))
        except PassResonanceError:
            return np.inf

    xs = np.linspace(-span, span, grid)
    costs = np.array([cost(x) for x in xs])
    if not np.any(np.isfinite(costs)):
        raise RuntimeError(f"no admissible PASS working point for convention {convention!r}")
    i = int(np.nanargmin(np.where(np.isfinite(costs), costs, np.nan)))
    step = xs[1] - xs[0]
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    # keep the bracket inside the finite region
    lo = lo if np.isfinite(cost(lo)) else xs[i] - 0.49 * step
    hi = hi if np.isfinite(cost(hi)) else xs[i] + 0.49 * step
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": max_iter})
    if not res.success:
        raise RuntimeError(f"PASS optimizer did not converge after {max_iter} iterations")
    delta = float(res.x * chi)
    omega = float(np.sqrt(_omega_sq_for(delta, chi_s, kerr_s, convention)))
    return PassPoint(delta=delta, omega=omega, mean_excitation=float(res.fun),
                     mismatch=float(transparency_mismatch(delta, omega, chi_s, kerr_s, convention)),
                     iterations=int(res.nfev))


def transparent_spectrum(chi, kerr, levels=8, point=None):
    """Fock energies (rad/us, relative to the vacuum) with PASS at its optimum.

    The shift formula with signed inputs carries the opposite overall sign to
    the Hamiltonian's Kerr term; the result is negated so that its Kerr part
    matches ``(chi_ss/2) n (n-1)``. An overall sign does not affect
    transparency. Levels above 4 follow the same formula and are not
    transparent in general.
    """
    point = point or optimize_pass(chi, kerr)
    w = pass_level_shift(np.arange(levels), point.delta, point.omega, -chi, -kerr)
    return -(w - w[0])


def kerr_spectrum(kerr, levels=8):
    """Bare self-Kerr ladder ``-(K/2) n (n-1)`` (no PASS), ``kerr > 0`` magnitude."""
    n = np.arange(levels)
    return -0.5 * kerr * n * (n - 1)
