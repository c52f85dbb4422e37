"""Eigenvalues of small dense matrices.

Householder reduction to Hessenberg form followed by QR iteration with
Givens rotations: a few unshifted sweeps, then Wilkinson shifts with
deflation at the bottom of the active block. Complex arithmetic throughout
so that conjugate pairs need no special handling.
"""

from __future__ import annotations

import cmath

import numpy as np

from .errors import InvalidInputError, NonConvergenceError

MAX_N = 8


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix similar to A (Householder reflections)."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H


def _roots2(a, b, c, d):
    tr = a + d
    det = a * d - b * c
    disc = cmath.sqrt(tr * tr / 4.0 - det)
    return tr / 2.0 + disc, tr / 2.0 - disc


def _wilkinson(H, m):
    a, b = H[m - 2, m - 2], H[m - 2, m - 1]
    c, d = H[m - 1, m - 2], H[m - 1, m - 1]
    l1, l2 = _roots2(a, b, c, d)
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def _qr_sweep(H, m, mu):
    """One shifted QR step on the leading m x m Hessenberg block."""
    rots = []
    for k in range(m):
        H[k, k] -= mu
    for k in range(m - 1):
        x, y = H[k, k], H[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            c, s = 1.0, 0.0
        else:
            c, s = x / r, y / r
        G = np.array([[c.conjugate(), s.conjugate()], [-s, c]])
        H[k:k + 2, k:m] = G @ H[k:k + 2, k:m]
        rots.append(G)
    for k, G in enumerate(rots):
        H[:min(k + 3, m), k:k + 2] = H[:min(k + 3, m), k:k + 2] @ G.conj().T
    for k in range(m):
        H[k, k] += mu


def eigenvalues(A, max_iter: int = 10000, unshifted: int = 5) -> list:
    """All eigenvalues of a square matrix with n <= 8.

    Closed-form roots for n <= 2. Eigenvalues with negligible imaginary part
    are returned as real-valued complex numbers. Ordered by decreasing
    modulus.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidInputError("eigenvalues needs a nonempty square matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    n = A.shape[0]
    if n > MAX_N:
        raise InvalidInputError(f"matrix size {n} exceeds {MAX_N}")
    scale = max(float(np.max(np.abs(A))), 1e-300)
    if n == 1:
        eigs = [complex(A[0, 0])]
    elif n == 2:
        eigs = list(_roots2(*map(complex, A.ravel())))
    else:
        eigs = _qr_eigs(A, max_iter, unshifted)
    out = []
    for z in eigs:
        z = complex(z)
        if abs(z.imag) <= 1e-12 * scale:
            z = complex(z.real, 0.0)
        out.append(z)
    return sorted(out, key=lambda z: (-abs(z), -z.real, -z.imag))


def _qr_eigs(A, max_iter, unshifted):
    H = hessenberg(A)
    norm = max(float(np.max(np.abs(H))), 1e-300)
    m = H.shape[0]
    eigs = []
    it_total = 0
    it_here = 0
    while m > 0:
        if m == 1:
            eigs.append(H[0, 0])
            break
        sub = abs(H[m - 1, m - 2])
        if sub <= 1e-15 * (abs(H[m - 1, m - 1]) + abs(H[m - 2, m - 2])) or sub <= 1e-15 * norm:
            eigs.append(H[m - 1, m - 1])
            m -= 1
            it_here = 0
            continue
        if m == 2:
            eigs.extend(_roots2(H[0, 0], H[0, 1], H[1, 0], H[1, 1]))
            break
        if it_total < unshifted:
            mu = 0.0
        elif it_here > 0 and it_here % 15 == 0:
            # exceptional shift breaks rare cycling
            mu = H[m - 1, m - 1] + 0.75 * sub * (1 + 1j)
        else:
            mu = _wilkinson(H, m)
        _qr_sweep(H, m, mu)
        it_total += 1
        it_here += 1
        if it_total > max_iter:
            raise NonConvergenceError("QR iteration did not converge")
    return eigs


def spectral_radius(eigs) -> float:
    return max(abs(complex(z)) for z in eigs)
