"""Dense complex linear algebra shared by the rest of the package.

Everything here works on plain ``numpy`` arrays of dtype ``complex128``.
"""

from functools import reduce

import numpy as np
import scipy.linalg as sla

HERMITIAN_TOL = 1e-12


def as_matrix(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def dag(m):
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = np.asarray(m)
    scale = max(np.max(np.abs(m)), 1.0) if m.size else 1.0
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - dag(m)), initial=0.0) < tol * scale


def kron(a, b, *more):
    """Kronecker product of two or more matrices (left factor is most significant)."""
    return reduce(np.kron, (as_matrix(x) for x in (a, b) + more))


def _generator_kind(m):
    scale = max(np.max(np.abs(m)), 1.0)
    if np.max(np.abs(m - dag(m))) < HERMITIAN_TOL * scale:
        return "hermitian"
    if np.max(np.abs(m + dag(m))) < HERMITIAN_TOL * scale:
        return "antihermitian"
    return "general"


def expm(m):
    """Matrix exponential.

    Hermitian and anti-Hermitian inputs go through ``eigh`` so that
    ``expm(-1j * H * t)`` stays unitary to machine precision. Anything else
    falls back to scaling-and-squaring Pade (``scipy.linalg.expm``).
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    kind = _generator_kind(m)
    if kind == "hermitian":
        w, v = np.linalg.eigh(m)
        return (v * np.exp(w)) @ dag(v)
    if kind == "antihermitian":
        # m = -i H with H Hermitian
        w, v = np.linalg.eigh(1j * m)
        return (v * np.exp(-1j * w)) @ dag(v)
    return sla.expm(m)


def expm_hermitian_step(h, dt):
    """Return ``(U, eigvals, eigvecs)`` for ``U = exp(-i h dt)`` with ``h`` Hermitian."""
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * w * dt)) @ dag(v)
    return u, w, v


def expm_frechet_weights(eigvals, dt):
    """Divided differences of ``exp(-i x dt)`` on the eigenvalues of ``h``.

    ``L[a, b] = (e_a - e_b) / (lambda_a - lambda_b)`` with ``lambda = -i x dt``
    and the limit ``e_a`` on (near-)degenerate pairs. In the eigenbasis the
    derivative of ``exp(-i h dt)`` along ``B`` is ``(V^dag B V) * L``.
    """
    lam = -1j * eigvals * dt
    e = np.exp(lam)
    diff = lam[:, None] - lam[None, :]
    num = e[:, None] - e[None, :]
    close = np.abs(diff) < 1e-10
    out = np.empty_like(num)
    out[~close] = num[~close] / diff[~close]
    # exp(mean) * sinh(d/2)/(d/2), expanded to second order
    mid = np.exp(0.5 * (lam[:, None] + lam[None, :]))
    out[close] = (mid * (1 + diff**2 / 24))[close]
    return out


def partial_trace(rho, dims, keep):
    """Reduced density matrix over the factors listed in ``keep``.

    ``dims`` are the tensor-factor dimensions in order; ``keep`` holds factor
    indices. The kept factors stay in their original order.
    """
    rho = as_matrix(rho)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"rho has shape {rho.shape}, layout implies {total}x{total}")
    keep = sorted(set(keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"factor index out of range in {keep}")
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract each traced factor's row index against its column index
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n].upper())
    for i in traced:
        cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return red.reshape(d, d)


def ket(dim, index):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(vec):
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def normalize(vec):
    vec = np.asarray(vec, dtype=complex)
    n = np.linalg.norm(vec)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return vec / n


def complete_basis(vectors, dim):
    """Orthonormal basis of the complement of span(vectors), deterministic order.

    Gram-Schmidt over the standard basis vectors ``e_0, e_1, ...`` in turn.
    """
    basis = [np.asarray(v, dtype=complex) for v in vectors]
    out = []
    for k in range(dim):
        v = ket(dim, k)
        for b in basis + out:
            v = v - np.vdot(b, v) * b
        # second pass for numerical orthogonality
        for b in basis + out:
            v = v - np.vdot(b, v) * b
        n = np.linalg.norm(v)
        if n > 1e-8:
            out.append(v / n)
        if len(basis) + len(out) == dim:
            break
    return out
