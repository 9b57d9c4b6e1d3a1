"""Independent reference computations used by the self-test and test suite.

Nothing here shares code paths with the kernels it checks: geometry is
recomputed in explicit orthonormal frames with plain index loops, and the
heat-limit reference uses direct quadrature against the heat kernel.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg


def frame_geometry(J, H2):
    """Brute-force geometry at one point from orthonormal frames.

    Returns a dict with g, ginv, lam, A (ambient, coordinate indices),
    H, normA2, normH2, normAdotA2, normRperp2 and the normal-frame
    coefficient matrices B[alpha] of A.
    """
    J = np.asarray(J, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    m, n = J.shape
    g = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            g[i, j] = (1.0 if i == j else 0.0) + sum(J[i, a] * J[j, a] for a in range(n))
    ginv = scipy.linalg.inv(g)

    lam = np.sqrt(np.clip(np.sort(scipy.linalg.eigvalsh(J.T @ J))[::-1], 0.0, None))
    lam = np.concatenate([lam, np.zeros(max(0, m - n))])[:m]

    T = np.vstack([np.eye(m), J.T])            # (m+n) x m tangent columns
    N = scipy.linalg.null_space(T.T)           # (m+n) x n orthonormal normals
    w, U = scipy.linalg.eigh(g)
    E = T @ (U @ np.diag(w ** -0.5) @ U.T)     # orthonormal tangent frame
    Cinv = U @ np.diag(w ** -0.5) @ U.T        # coordinate -> frame change

    # coordinate second fundamental form via the normal basis
    A = np.zeros((m, m, m + n))
    for i in range(m):
        for j in range(m):
            v = np.concatenate([np.zeros(m), H2[i, j]])
            for a in range(n):
                A[i, j] += (N[:, a] @ v) * N[:, a]
    # frame components B[alpha][k, l] = <A(E_k, E_l), nu_alpha>
    B = np.zeros((n, m, m))
    for a in range(n):
        for k in range(m):
            for l in range(m):
                s = 0.0
                for i in range(m):
                    for j in range(m):
                        s += Cinv[i, k] * Cinv[j, l] * (N[:, a] @ A[i, j])
                B[a, k, l] = s

    H = np.zeros(m + n)
    for a in range(n):
        H += sum(B[a, k, k] for k in range(m)) * N[:, a]

    normA2 = sum(B[a, k, l] ** 2 for a in range(n) for k in range(m) for l in range(m))
    normH2 = float(H @ H)
    normAdotA2 = 0.0
    for i, j, k, l in itertools.product(range(m), repeat=4):
        normAdotA2 += sum(B[a, i, j] * B[a, k, l] for a in range(n)) ** 2
    normR2 = 0.0
    for i, j in itertools.product(range(m), repeat=2):
        for a, b in itertools.product(range(n), repeat=2):
            r = sum(B[a, i, k] * B[b, j, k] - B[b, i, k] * B[a, j, k] for k in range(m))
            normR2 += r * r
    return dict(g=g, ginv=ginv, lam=lam, A=A, H=H, B=B, normA2=normA2, normH2=normH2,
                normAdotA2=normAdotA2, normRperp2=normR2, E=E, N=N)


def heat_solution_1d(profile, x_eval, t, support, n_quad=8001):
    """(G_t * profile)(x) for the 1-D heat kernel, by trapezoidal quadrature.

    ``profile`` must be smooth and supported in ``[-support, support]``;
    the trapezoidal rule is then spectrally accurate.
    """
    y = np.linspace(-support, support, n_quad)
    dy = y[1] - y[0]
    w = np.full(n_quad, dy)
    w[0] = w[-1] = 0.5 * dy
    fy = profile(y) * w
    x = np.asarray(x_eval, dtype=float)
    if t == 0:
        return profile(x)
    kern = np.exp(-((x[:, None] - y[None, :]) ** 2) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
    return kern @ fy


def logistic(t, u0):
    return u0 * np.exp(t) / (1.0 - u0 + u0 * np.exp(t))
