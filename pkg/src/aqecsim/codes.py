"""Lowest-order binomial code, Knill-Laflamme check, deformed pre-recovery states
and the ideal recovery, encode and decode maps."""

from dataclasses import dataclass, field

import numpy as np

from .linalg import complete_basis, dag, ket, normalize
from .quantum import HilbertLayout

DEFAULT_CAVITY_DIM = 8


@dataclass(frozen=True)
class CodeSpec:
    """Logical, error and dual words of a single-loss-correcting cavity code."""

    zero_l: np.ndarray
    one_l: np.ndarray
    zero_e: np.ndarray
    one_e: np.ndarray
    dual: np.ndarray
    name: str = "binomial"

    def __post_init__(self):
        words = [self.zero_l, self.one_l, self.zero_e, self.one_e]
        for w in words + [self.dual]:
            if abs(np.linalg.norm(w) - 1) > 1e-10:
                raise ValueError("code words must be normalized")
        g = np.array([[np.vdot(a, b) for b in words] for a in words])
        if np.max(np.abs(g - np.eye(4))) > 1e-10:
            raise ValueError("logical and error words must be mutually orthogonal")

    @property
    def dim(self):
        return len(self.zero_l)

    @property
    def code_projector(self):
        return np.outer(self.zero_l, self.zero_l.conj()) + np.outer(self.one_l, self.one_l.conj())

    @property
    def error_projector(self):
        return np.outer(self.zero_e, self.zero_e.conj()) + np.outer(self.one_e, self.one_e.conj())

    @property
    def logical_words(self):
        return [self.zero_l, self.one_l]


def binomial_code(dim=DEFAULT_CAVITY_DIM):
    """``|0_L> = (|0>+|4>)/sqrt2``, ``|1_L> = |2>``, errors ``|3>``, ``|1>``, dual ``(|0>-|4>)/sqrt2``."""
    if dim < 5:
        raise ValueError("binomial code needs at least 5 Fock levels")
    return CodeSpec(
        zero_l=normalize(ket(dim, 0) + ket(dim, 4)),
        one_l=ket(dim, 2),
        zero_e=ket(dim, 3),
        one_e=ket(dim, 1),
        dual=normalize(ket(dim, 0) - ket(dim, 4)),
    )


@dataclass(frozen=True)
class KLResult:
    passed: bool
    alpha: np.ndarray
    max_violation: float


def knill_laflamme_check(words, errors, tol=1e-9):
    """Check ``<w_a| E_j^dag E_k |w_b> = delta_ab alpha_jk`` for all code words.

    ``words`` is a :class:`CodeSpec` or a list of basis vectors of the code
    space. Diagonal blocks must be proportional to the identity and
    blocks with ``j != k`` must vanish (the form with ``delta_jk``).
    """
    if isinstance(words, CodeSpec):
        words = words.logical_words
    w = np.array(words, dtype=complex).T
    n_e = len(errors)
    alpha = np.zeros((n_e, n_e), dtype=complex)
    worst = 0.0
    for j, ej in enumerate(errors):
        for k, ek in enumerate(errors):
            block = dag(w) @ dag(ej) @ ek @ w
            a = np.trace(block) / block.shape[0]
            alpha[j, k] = a
            dev = np.max(np.abs(block - a * np.eye(block.shape[0])))
            if j != k:
                dev = max(dev, abs(a))
            worst = max(worst, dev)
    return KLResult(passed=bool(worst < tol), alpha=alpha, max_violation=float(worst))


@dataclass(frozen=True)
class DeformedFrame:
    """Free-evolution bookkeeping before the recovery pulse.

    ``omegas[n]`` are Fock energies (rad/us, vacuum at zero) for n = 0..4 and
    ``phi_g[n]``/``phi_e[n]`` the swap-imprinted phases for ancilla g/e.
    """

    t_fe: float = 0.0
    kappa: float = 0.0
    omegas: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    phi_g: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    phi_e: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("omegas", "phi_g", "phi_e"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape[0] < 5 or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} needs five finite entries")
            object.__setattr__(self, name, tuple(float(x) for x in v[:5]))
        if self.t_fe < 0 or self.kappa < 0:
            raise ValueError("t_fe and kappa must be non-negative")

    def level_phase(self, n):
        return self.omegas[n] * self.t_fe


@dataclass
class DeformedStates:
    zero_l1: np.ndarray
    one_l1: np.ndarray
    zero_e1: np.ndarray
    one_e1: np.ndarray
    dual1: np.ndarray
    dual2: np.ndarray
    zero_l2: np.ndarray
    one_l2: np.ndarray
    zero_l2s: np.ndarray
    one_l2s: np.ndarray
    extra: dict = field(default_factory=dict)


def deformed_states(frame, dim=DEFAULT_CAVITY_DIM):
    """States right before (superscript 1) and the targets right after (2, 2*) the recovery."""
    k, t = frame.kappa, frame.t_fe
    ph = [np.exp(-1j * frame.level_phase(n)) for n in range(5)]
    damp = np.exp(-2 * k * t)
    norm = 1.0 / np.sqrt(1 + np.exp(-4 * k * t))
    e = [ket(dim, n) for n in range(5)]
    g4, e4 = np.exp(-1j * frame.phi_g[4]), np.exp(-1j * frame.phi_e[4])
    return DeformedStates(
        zero_l1=norm * (e[0] + damp * ph[4] * e[4]),
        one_l1=ph[2] * e[2],
        zero_e1=ph[3] * e[3],
        one_e1=ph[1] * e[1],
        dual1=norm * (damp * e[0] - ph[4] * e[4]),
        dual2=(e[0] - g4 * e[4]) / np.sqrt(2),
        zero_l2=(e[0] + g4 * e[4]) / np.sqrt(2),
        one_l2=np.exp(-1j * frame.phi_g[2]) * e[2],
        zero_l2s=(e[0] + e4 * e[4]) / np.sqrt(2),
        one_l2s=np.exp(-1j * frame.phi_e[2]) * e[2],
    )


BLOCH_COEFFS = (
    (1, 0), (0, 1),
    (1 / np.sqrt(2), 1 / np.sqrt(2)), (1 / np.sqrt(2), -1 / np.sqrt(2)),
    (1 / np.sqrt(2), 1j / np.sqrt(2)), (1 / np.sqrt(2), -1j / np.sqrt(2)),
)


def six_poles(a, b):
    """The six Bloch-pole superpositions of two orthonormal vectors."""
    return [c0 * a + c1 * b for c0, c1 in BLOCH_COEFFS]


def recovery_rows(frame, dim=DEFAULT_CAVITY_DIM):
    """The 13 (input, output) pairs of the recovery gate on ancilla (x) cavity."""
    s = deformed_states(frame, dim)
    g, e = ket(2, 0), ket(2, 1)
    rows = list(zip([np.kron(g, v) for v in six_poles(s.zero_l1, s.one_l1)],
                    [np.kron(g, v) for v in six_poles(s.zero_l2, s.one_l2)]))
    rows += list(zip([np.kron(g, v) for v in six_poles(s.zero_e1, s.one_e1)],
                     [np.kron(e, v) for v in six_poles(s.zero_l2s, s.one_l2s)]))
    rows.append((np.kron(g, s.dual1), np.kron(g, s.dual2)))
    return rows


def unitary_from_pairs(sources, targets, dim, tol=1e-9):
    """Unitary mapping orthonormal ``sources[k] -> targets[k]``, completed deterministically."""
    s = np.array(sources, dtype=complex)
    t = np.array(targets, dtype=complex)
    for name, m in (("source", s), ("target", t)):
        if np.max(np.abs(m.conj() @ m.T - np.eye(len(m)))) > tol:
            raise ValueError(f"{name} states are not orthonormal")
    s_rest = complete_basis(list(s), dim)
    t_rest = complete_basis(list(t), dim)
    src = np.array(list(s) + s_rest).T
    tgt = np.array(list(t) + t_rest).T
    return tgt @ dag(src)


def ideal_recovery_unitary(code, frame, layout=None):
    """Recovery gate on ancilla (x) cavity that honors all 13 specified rows.

    Only the five basis rows are independent; the superposition rows follow
    by linearity. Rays outside their span are completed by Gram-Schmidt.
    """
    dim = code.dim
    if layout is not None and (layout.dims[0] != 2 or layout.dims[1] != dim):
        raise ValueError("layout must be (ancilla: 2, cavity: code dim)")
    s = deformed_states(frame, dim)
    g, e = ket(2, 0), ket(2, 1)
    src = [np.kron(g, v) for v in (s.zero_l1, s.one_l1, s.zero_e1, s.one_e1, s.dual1)]
    tgt = [np.kron(g, s.zero_l2), np.kron(g, s.one_l2), np.kron(e, s.zero_l2s),
           np.kron(e, s.one_l2s), np.kron(g, s.dual2)]
    return unitary_from_pairs(src, tgt, 2 * dim)


def encode_isometry(code):
    """Qubit -> cavity isometry ``|g> -> |0_L>``, ``|e> -> |1_L>``."""
    return np.array([code.zero_l, code.one_l]).T


def encode_rows(code):
    g, e = ket(2, 0), ket(2, 1)
    vac = ket(code.dim, 0)
    return list(zip(six_poles(np.kron(g, vac), np.kron(e, vac)),
                    six_poles(np.kron(g, code.zero_l), np.kron(g, code.one_l))))


def decode_rows(code, dual=True):
    g, e = ket(2, 0), ket(2, 1)
    vac = ket(code.dim, 0)
    rows = list(zip(six_poles(np.kron(g, code.zero_l), np.kron(g, code.one_l)),
                    six_poles(np.kron(g, vac), np.kron(e, vac))))
    if dual:
        rows.append((np.kron(g, code.dual), np.kron(g, ket(code.dim, 1))))
    return rows


def decode_unitary(code, dual=True):
    """Unitary on qubit (x) cavity realizing the decode rows (optionally with the dual row)."""
    g, e = ket(2, 0), ket(2, 1)
    vac = ket(code.dim, 0)
    src = [np.kron(g, code.zero_l), np.kron(g, code.one_l)]
    tgt = [np.kron(g, vac), np.kron(e, vac)]
    if dual:
        src.append(np.kron(g, code.dual))
        tgt.append(np.kron(g, ket(code.dim, 1)))
    return unitary_from_pairs(src, tgt, 2 * code.dim)


def decode_kraus(code, dual=True):
    """Kraus operators (qubit <- cavity) of decode followed by discarding the cavity."""
    u = decode_unitary(code, dual)
    d = code.dim
    t = u.reshape(2, d, 2, d)[:, :, 0, :]  # qubit_out, cav_out, cav_in (qubit in |g>)
    return [t[:, k, :] for k in range(d)]


def decode_layout(code):
    return HilbertLayout([("I1", 2), ("S1", code.dim)])


def dual_subspace_property(code, decode_map=None, phases=16, tol=1e-9):
    """True if every ``(|0> + e^{i phi}|4>)/sqrt2`` decodes to qubit ``|g>`` within ``tol``."""
    u = decode_unitary(code, dual=True) if decode_map is None else decode_map
    d = code.dim
    g = ket(2, 0)
    p_e = np.kron(np.diag([0.0, 1.0]), np.eye(d))
    for phi in np.arange(phases) * 2 * np.pi / phases:
        psi = np.kron(g, normalize(ket(d, 0) + np.exp(1j * phi) * ket(d, 4)))
        out = u @ psi
        if np.vdot(out, p_e @ out).real > tol:
            return False
    return True
