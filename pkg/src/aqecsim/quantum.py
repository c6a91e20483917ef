"""States, operators on multi-mode layouts, channels, fidelities and Wigner functions."""

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import as_matrix, dag, expm, kron, partial_trace, proj

QUBIT_KINDS = ("sigma_x", "sigma_y", "sigma_z", "sigma_minus", "sigma_plus")


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered tensor-product layout of named modes.

    The first mode is the most significant factor in ``np.kron`` order.
    """

    modes: tuple

    def __init__(self, modes):
        modes = tuple((str(n), int(d)) for n, d in (modes.items() if isinstance(modes, dict) else modes))
        names = [n for n, _ in modes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate mode names in {names}")
        for n, d in modes:
            if d < 2:
                raise ValueError(f"mode {n!r} needs dimension >= 2, got {d}")
        object.__setattr__(self, "modes", modes)

    @property
    def names(self):
        return [n for n, _ in self.modes]

    @property
    def dims(self):
        return [d for _, d in self.modes]

    @property
    def dim(self):
        return int(np.prod(self.dims))

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown mode {name!r}; layout has {self.names}") from None

    def dim_of(self, name):
        return self.dims[self.index(name)]

    def embed(self, name, op):
        """Place a single-mode operator on ``name`` with identities elsewhere."""
        i = self.index(name)
        factors = [np.eye(d, dtype=complex) for d in self.dims]
        op = as_matrix(op)
        if op.shape != (self.dims[i], self.dims[i]):
            raise ValueError(f"operator shape {op.shape} does not fit mode {name!r} (dim {self.dims[i]})")
        factors[i] = op
        return kron(*factors) if len(factors) > 1 else factors[0]

    def basis(self, **levels):
        """Product basis ket; modes not mentioned sit in level 0."""
        vecs = []
        for n, d in self.modes:
            k = levels.get(n, 0)
            if not 0 <= k < d:
                raise ValueError(f"level {k} out of range for mode {n!r} (dim {d})")
            v = np.zeros(d, dtype=complex)
            v[k] = 1.0
            vecs.append(v)
        out = vecs[0]
        for v in vecs[1:]:
            out = np.kron(out, v)
        return out

    def product(self, **states):
        """Product state from per-mode vectors (or integer levels)."""
        out = np.ones(1, dtype=complex)
        for n, d in self.modes:
            s = states.get(n, 0)
            if np.isscalar(s):
                v = np.zeros(d, dtype=complex)
                v[int(s)] = 1.0
            else:
                v = np.asarray(s, dtype=complex)
                if v.shape != (d,):
                    raise ValueError(f"state for {n!r} has shape {v.shape}, expected ({d},)")
            out = np.kron(out, v)
        return out

    def ptrace(self, rho, keep):
        if isinstance(keep, str):
            keep = [keep]
        return partial_trace(rho, self.dims, [self.index(k) for k in keep])

    def sub(self, names):
        return HilbertLayout([(n, self.dim_of(n)) for n in names])


def destroy(d):
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)


def single_mode_operator(d, kind):
    a = destroy(d)
    if kind == "lower":
        return a
    if kind == "raise":
        return dag(a)
    if kind == "number":
        return np.diag(np.arange(d)).astype(complex)
    if isinstance(kind, tuple) and kind[0] == "projector":
        k = int(kind[1])
        if not 0 <= k < d:
            raise ValueError(f"projector level {k} out of range for dim {d}")
        p = np.zeros((d, d), dtype=complex)
        p[k, k] = 1.0
        return p
    if kind in QUBIT_KINDS:
        if d != 2:
            raise ValueError(f"{kind} needs a two-level mode, got dim {d}")
        return {
            "sigma_x": np.array([[0, 1], [1, 0]], dtype=complex),
            "sigma_y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            # |g> = level 0 is the +1 eigenstate
            "sigma_z": np.array([[1, 0], [0, -1]], dtype=complex),
            "sigma_minus": np.array([[0, 1], [0, 0]], dtype=complex),
            "sigma_plus": np.array([[0, 0], [1, 0]], dtype=complex),
        }[kind]
    raise ValueError(f"unknown operator kind {kind!r}")


def mode_operator(layout, mode, kind):
    """Operator of ``kind`` acting on ``mode`` and identity on all other modes.

    ``kind`` is one of ``lower``, ``raise``, ``number``, ``sigma_x``,
    ``sigma_y``, ``sigma_z`` or ``("projector", k)``.
    """
    return layout.embed(mode, single_mode_operator(layout.dim_of(mode), kind))


def to_density(state):
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return proj(state)
    return as_matrix(state)


@dataclass
class QuantumChannel:
    """CPTP map in Kraus form, ``rho -> sum_k K rho K^dag``.

    Input and output dimensions may differ (e.g. after tracing out an ancilla).
    """

    kraus: list
    layout_in: HilbertLayout = None
    layout_out: HilbertLayout = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        ks = [as_matrix(k) for k in self.kraus]
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if any(k.shape != shape for k in ks):
            raise ValueError("Kraus operators must share one shape")
        self.kraus = ks

    @property
    def dim_in(self):
        return self.kraus[0].shape[1]

    @property
    def dim_out(self):
        return self.kraus[0].shape[0]

    def __call__(self, rho):
        rho = to_density(rho)
        return sum(k @ rho @ dag(k) for k in self.kraus)

    def completeness_error(self):
        s = sum(dag(k) @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim_in))))

    @cached_property
    def choi(self):
        """Unnormalized Choi matrix ``sum_ij |i><j| (x) E(|i><j|)``, trace = dim_in."""
        d_in, d_out = self.dim_in, self.dim_out
        c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
        for k in self.kraus:
            # vec of K in column-stacked (input, output) order
            v = k.T.reshape(-1)
            c += np.outer(v, v.conj())
        return c

    @cached_property
    def superop(self):
        """Row-major superoperator: ``vec(E(rho)) = S @ vec(rho)`` with ``vec`` = ``reshape(-1)``."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def choi_min_eig(self):
        return float(np.min(np.linalg.eigvalsh(self.choi)))

    def is_cptp(self, tol=1e-9, choi_tol=1e-9):
        return self.completeness_error() < tol and self.choi_min_eig() > -choi_tol

    def then(self, other):
        """Channel applying ``self`` first and ``other`` second."""
        if other.dim_in != self.dim_out:
            raise ValueError("dimension mismatch in channel composition")
        return channel_from_superop(other.superop @ self.superop, self.dim_in, other.dim_out,
                                    self.layout_in, other.layout_out)

    def power(self, n):
        if n < 0:
            raise ValueError("negative channel power")
        if self.dim_in != self.dim_out:
            raise ValueError("power needs equal input and output dimensions")
        s = np.linalg.matrix_power(self.superop, n)
        return channel_from_superop(s, self.dim_in, self.dim_out, self.layout_in, self.layout_out)


def identity_channel(dim, layout=None):
    return QuantumChannel([np.eye(dim, dtype=complex)], layout, layout)


def unitary_channel(u, layout=None):
    return QuantumChannel([as_matrix(u)], layout, layout)


def channel_from_superop(s, dim_in, dim_out, layout_in=None, layout_out=None, tol=1e-12):
    """Kraus form of a row-major superoperator via its Choi eigendecomposition."""
    # S[(a,b),(c,d)] = sum_k K[a,c] conj(K[b,d]); regroup to J[(a,c),(b,d)]
    j = s.reshape(dim_out, dim_out, dim_in, dim_in).transpose(0, 2, 1, 3).reshape(dim_out * dim_in, dim_out * dim_in)
    j = 0.5 * (j + dag(j))
    w, v = np.linalg.eigh(j)
    kraus = [np.sqrt(wk) * v[:, i].reshape(dim_out, dim_in) for i, wk in enumerate(w) if wk > tol * max(1.0, w[-1])]
    if not kraus:
        kraus = [np.zeros((dim_out, dim_in), dtype=complex)]
    ch = QuantumChannel(kraus, layout_in, layout_out)
    ch.__dict__["superop"] = s
    return ch


def channel_from_dilation(u, layout, ancilla, ancilla_init=0, unitary_tol=1e-9):
    """Kraus operators ``K_k = <k|_A U |init>_A`` of a Stinespring dilation.

    ``ancilla`` is a mode name or a sequence of names; ``ancilla_init`` the
    matching basis index (or indices). The output layout is the layout with
    the ancilla modes removed.
    """
    u = as_matrix(u)
    if u.shape != (layout.dim, layout.dim):
        raise ValueError(f"u has shape {u.shape}, layout needs {layout.dim}")
    if np.max(np.abs(dag(u) @ u - np.eye(layout.dim))) > unitary_tol:
        raise ValueError("dilation operator is not unitary")
    anc = [ancilla] if isinstance(ancilla, str) else list(ancilla)
    init = [ancilla_init] * len(anc) if np.isscalar(ancilla_init) else list(ancilla_init)
    if len(init) != len(anc):
        raise ValueError("ancilla_init must match the ancilla list")
    for a in anc:
        layout.index(a)
    sys_names = [n for n in layout.names if n not in anc]
    if not sys_names:
        raise ValueError("no system modes left after removing the ancilla")
    sys_layout = layout.sub(sys_names)
    anc_dims = [layout.dim_of(a) for a in anc]

    # reorder tensor factors to (ancilla..., system...)
    order = [layout.index(a) for a in anc] + [layout.index(n) for n in sys_names]
    dims = layout.dims
    n = len(dims)
    t = u.reshape(dims + dims).transpose(order + [n + i for i in order])
    da = int(np.prod(anc_dims))
    ds = sys_layout.dim
    t = t.reshape(da, ds, da, ds)
    init_idx = int(np.ravel_multi_index(init, anc_dims))
    kraus = [t[k, :, init_idx, :] for k in range(da)]
    kraus = [k for k in kraus if np.max(np.abs(k)) > 0] or [kraus[0]]
    return QuantumChannel(kraus, sys_layout, sys_layout)


def _psd_sqrt(m):
    w, v = np.linalg.eigh(0.5 * (m + dag(m)))
    w = np.where(w < -1e-12, 0.0, np.clip(w, 0.0, None))
    return (v * np.sqrt(w)) @ dag(v)


def state_fidelity(rho, sigma, trace_tol=1e-6):
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Either argument may be a state vector; the pure case reduces to
    ``<psi|sigma|psi>``.
    """
    rho_v = np.asarray(rho, dtype=complex)
    sig_v = np.asarray(sigma, dtype=complex)
    for s in (rho_v, sig_v):
        tr = np.vdot(s, s).real if s.ndim == 1 else np.trace(s).real
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"state trace {tr:.3g} deviates from 1")
    if rho_v.ndim == 1 and sig_v.ndim == 1:
        return float(abs(np.vdot(rho_v, sig_v)) ** 2)
    if rho_v.ndim == 1:
        return float(np.clip(np.vdot(rho_v, sig_v @ rho_v).real, 0.0, 1.0))
    if sig_v.ndim == 1:
        return float(np.clip(np.vdot(sig_v, rho_v @ sig_v).real, 0.0, 1.0))
    sr = _psd_sqrt(rho_v)
    w = np.linalg.eigvalsh(0.5 * (sr @ sig_v @ sr + dag(sr @ sig_v @ sr)))
    w = np.where(w < -1e-12, 0.0, np.clip(w, 0.0, None))
    return float(np.clip(np.sum(np.sqrt(w)) ** 2, 0.0, 1.0))


PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# the tomography input set used throughout: |g>, |e>, |+x>, |-y>
CARDINAL_INPUTS = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / np.sqrt(2),
    np.array([1, -1j], dtype=complex) / np.sqrt(2),
)


def operator_basis(d):
    """Unitary operator basis with ``tr(P_m^dag P_n) = d delta_mn``.

    Paulis ``I, X, Y, Z`` for a qubit, clock-and-shift products otherwise.
    """
    if d == 2:
        return list(PAULIS)
    w = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    z = np.diag(w ** np.arange(d))
    return [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a in range(d) for b in range(d)]


@dataclass
class ProcessMatrix:
    """Chi matrix: ``E(rho) = sum_mn chi[m, n] P_m rho P_n^dag`` in :func:`operator_basis`.

    With this normalization ``trace(chi) = 1`` for trace-preserving maps.
    """

    chi: np.ndarray

    @property
    def dim(self):
        return int(round(np.sqrt(self.chi.shape[0])))


def chi_from_action(outputs_on_units, d):
    """Chi matrix from ``E(|i><j|)`` given as ``outputs_on_units[i][j]``."""
    basis = operator_basis(d)
    # E(rho) = sum_mn chi_mn P_m rho P_n^dag; apply to |i><j| and vectorize:
    # vec(E(|i><j|)) = sum_mn chi_mn vec(P_m |i><j| P_n^dag)
    # The Choi matrix J = sum_ij |i><j| (x) E(|i><j|) equals sum_mn chi_mn |P_m>><<P_n|
    # with |P>> = sum_i |i> (x) P|i>.
    j = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, k] = 1.0
            j += np.kron(e, outputs_on_units[i][k])
    vecs = np.array([np.kron(np.eye(d), p) @ np.eye(d, dtype=complex).reshape(-1) for p in basis]).T
    # J = V chi V^dag with V^dag V = d * I
    chi = dag(vecs) @ j @ vecs / d**2
    return ProcessMatrix(0.5 * (chi + dag(chi)))


def process_tomography(channel, basis_inputs=CARDINAL_INPUTS):
    """Exact chi matrix of ``channel`` reconstructed from its outputs on ``basis_inputs``.

    ``channel`` is a :class:`QuantumChannel` or any callable taking and returning
    density matrices. The inputs must span the operator space.
    """
    rhos = [to_density(s) for s in basis_inputs]
    d = rhos[0].shape[0]
    a = np.array([r.reshape(-1) for r in rhos]).T  # d^2 x n_inputs
    if np.linalg.matrix_rank(a, tol=1e-9) < d * d:
        raise ValueError("tomography inputs do not span the operator space")
    outs = [np.asarray(channel(r), dtype=complex) for r in rhos]
    units = [[None] * d for _ in range(d)]
    for i in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, k] = 1.0
            coeff = np.linalg.lstsq(a, e.reshape(-1), rcond=None)[0]
            units[i][k] = sum(c * o for c, o in zip(coeff, outs))
    return chi_from_action(units, d)


def process_fidelity(chi_a, chi_b):
    """``tr(chi_a chi_b)`` for normalized chi matrices."""
    a = chi_a.chi if isinstance(chi_a, ProcessMatrix) else np.asarray(chi_a)
    b = chi_b.chi if isinstance(chi_b, ProcessMatrix) else np.asarray(chi_b)
    if a.shape != b.shape:
        raise ValueError("chi matrices differ in shape")
    return float(np.clip(np.trace(a @ b).real, 0.0, 1.0))


def identity_chi(d=2):
    chi = np.zeros((d * d, d * d), dtype=complex)
    chi[0, 0] = 1.0
    return ProcessMatrix(chi)


def displacement(alpha, dim):
    a = destroy(dim)
    return expm(alpha * dag(a) - np.conj(alpha) * a)


class TruncationError(ValueError):
    pass


def wigner(rho, alphas, cutoff=None, leak_tol=1e-3, chunk=256):
    """Wigner function ``W(alpha) = (2/pi) tr[D(alpha)^dag rho D(alpha) Pi]``.

    Displacements are exact in a padded Fock space of size ``cutoff``: with
    ``P = -i(a^dag - a) = V p V^dag`` diagonalized once,
    ``D(r e^{i t}) = R(t) V e^{i r p} V^dag R(t)^dag`` where ``R(t) = e^{i t n}``.
    A :class:`TruncationError` is raised if a displaced state leaks more than
    ``leak_tol`` into the top quarter of the padded space.
    """
    rho = to_density(rho)
    d = rho.shape[0]
    alphas = np.asarray(alphas, dtype=complex)
    amax = float(np.max(np.abs(alphas))) if alphas.size else 0.0
    if cutoff is None:
        cutoff = int(max(2 * d, d + 4 * amax**2 + 8 * amax + 12))
    if cutoff < d:
        raise TruncationError(f"cutoff {cutoff} below state dimension {d}")
    a = destroy(cutoff)
    p, v = np.linalg.eigh(-1j * (dag(a) - a))
    vd = dag(v)
    n = np.arange(cutoff)
    parity = (-1.0) ** n
    top = slice(cutoff - max(1, cutoff // 4), cutoff)
    flat = alphas.reshape(-1)
    out = np.empty(flat.shape, dtype=float)
    for start in range(0, flat.size, chunk):
        al = flat[start:start + chunk]
        r, th = np.abs(al), np.angle(al)
        # rows < d of D(alpha): only those touch rho
        core = (v[None, :d, :] * np.exp(1j * r[:, None, None] * p[None, None, :])) @ vd
        rot = np.exp(1j * th[:, None] * n[None, :])
        rows = rot[:, :d, None] * core * rot.conj()[:, None, :]
        pops = np.real(np.einsum("bik,ij,bjk->bk", rows.conj(), rho, rows))
        leak = pops[:, top].sum(axis=1)
        if np.any(leak > leak_tol):
            k = int(np.argmax(leak))
            raise TruncationError(f"displaced state at alpha={al[k]:.3g} leaks {leak[k]:.2e}")
        out[start:start + al.size] = 2.0 / np.pi * (pops @ parity)
    return out.reshape(alphas.shape)


def wigner_grid(rho, extent=3.0, points=41, cutoff=None):
    xs = np.linspace(-extent, extent, points)
    grid = xs[None, :] + 1j * xs[:, None]
    return xs, grid, wigner(rho, grid, cutoff=cutoff)


def write_wigner_csv(path, alphas, values):
    alphas = np.asarray(alphas).reshape(-1)
    values = np.asarray(values).reshape(-1)
    with open(path, "w", newline="") as fh:
        fh.write("# re_alpha [sqrt(photon)], im_alpha [sqrt(photon)], W [dimensionless]\n")
        w = csv.writer(fh)
        w.writerow(["re_alpha", "im_alpha", "W"])
        for al, val in zip(alphas, values):
            w.writerow([f"{al.real:.10g}", f"{al.imag:.10g}", f"{val:.12g}"])


def reduced_state(rho, layout, keep):
    """Partial trace keeping the named modes (layout order is preserved)."""
    return layout.ptrace(to_density(rho), keep)
