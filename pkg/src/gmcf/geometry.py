"""Pointwise geometry of a graph x -> (x, f(x)) in R^{m+n}.

Every function here is vectorised over leading "node" axes.  A jet is
the pair ``J`` with ``J[..., i, a] = d_i f^a`` (shape ``(..., m, n)``)
and ``H2`` with ``H2[..., i, j, a] = d_i d_j f^a`` (shape
``(..., m, m, n)``).  Ambient vectors live in R^{m+n} with the domain
coordinates first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Jet:
    J: np.ndarray
    H2: np.ndarray

    @property
    def m(self) -> int:
        return self.J.shape[-2]

    @property
    def n(self) -> int:
        return self.J.shape[-1]


@dataclass
class GeometrySample:
    g: np.ndarray
    ginv: np.ndarray
    detg: np.ndarray
    Pperp: np.ndarray
    A: np.ndarray
    Hvec: np.ndarray
    normA2: np.ndarray
    normH2: np.ndarray
    normRperp2: np.ndarray
    normAdotA2: np.ndarray
    normAH2: np.ndarray
    lili_gap: np.ndarray
    lam: np.ndarray
    sigma: np.ndarray
    p: np.ndarray
    q: np.ndarray
    grad_f2: np.ndarray


def metric(J):
    """Induced metric g = I + J J^T, its inverse and determinant."""
    J = np.asarray(J, dtype=float)
    m = J.shape[-2]
    g = np.eye(m) + np.einsum("...ia,...ja->...ij", J, J)
    ginv = np.linalg.inv(g)
    detg = np.linalg.det(g)
    return g, ginv, detg


def singular_values(J):
    """Singular values of Df in descending order, padded with zeros to length m."""
    J = np.asarray(J, dtype=float)
    m, n = J.shape[-2:]
    s = np.linalg.svd(J, compute_uv=False)
    if n < m:
        pad = np.zeros(J.shape[:-2] + (m - n,))
        s = np.concatenate([s, pad], axis=-1)
    return s


def area_p(J):
    """Return ``(p, q, sigma)``.

    ``p = (tr_g S + 2 - m) / 2`` with ``S = I - J J^T`` the pull-back of
    the split metric dx^2 - dy^2.  ``q = sqrt(p)`` where ``p > 0`` and NaN
    elsewhere.  ``sigma`` are the eigenvalues of S with respect to g,
    ordered like the singular values.
    """
    J = np.asarray(J, dtype=float)
    m = J.shape[-2]
    _, ginv, _ = metric(J)
    S = np.eye(m) - np.einsum("...ia,...ja->...ij", J, J)
    trS = np.einsum("...ij,...ij->...", ginv, S)
    p = 0.5 * (trS + 2.0 - m)
    lam = singular_values(J)
    sigma = (1.0 - lam**2) / (1.0 + lam**2)
    with np.errstate(invalid="ignore"):
        q = np.where(p > 0, np.sqrt(np.where(p > 0, p, 0.0)), np.nan)
    return p, q, sigma


def p_from_singular_values(lam, mu):
    """Codimension-two closed form (1 - l^2 m^2) / ((1 + l^2)(1 + m^2))."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return (1.0 - lam**2 * mu**2) / ((1.0 + lam**2) * (1.0 + mu**2))


def tangent_matrix(J):
    """Columns t_i = (e_i, d_i f), shape ``(..., m+n, m)``."""
    J = np.asarray(J, dtype=float)
    m, n = J.shape[-2:]
    T = np.zeros(J.shape[:-2] + (m + n, m))
    T[..., :m, :] = np.eye(m)
    T[..., m:, :] = np.swapaxes(J, -1, -2)
    return T


def normal_projector(J, ginv=None):
    J = np.asarray(J, dtype=float)
    m, n = J.shape[-2:]
    if ginv is None:
        ginv = metric(J)[1]
    T = tangent_matrix(J)
    return np.eye(m + n) - np.einsum("...pi,...ij,...qj->...pq", T, ginv, T)


def second_fundamental(J, H2, ginv=None):
    """Return ``(Pperp, A, Hvec)``; A[..., i, j, :] = Pperp (0, d_i d_j f)."""
    J = np.asarray(J, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    m, n = J.shape[-2:]
    if ginv is None:
        ginv = metric(J)[1]
    P = normal_projector(J, ginv)
    # only the last n columns of P act on (0, H2_ij)
    A = np.einsum("...pa,...ija->...ijp", P[..., :, m:], H2)
    H = np.einsum("...ij,...ijp->...p", ginv, A)
    return P, A, H


def graph_rate(J, H2, ginv=None):
    """tr_g D^2 f, the vertical velocity of the non-parametric flow."""
    if ginv is None:
        ginv = metric(J)[1]
    return np.einsum("...ij,...ija->...a", ginv, H2)


def curvature_norms(ginv, A):
    """|A|^2, |H|^2, |A^H|^2, |A o A|^2, |R_perp|^2 and the Li-Li gap.

    All contractions use the inverse metric; no orthonormal frames.
    The normal curvature is evaluated through the Ricci equation as the
    ambient endomorphism sum_kl g^kl (A_ik A_jl^T - A_jl A_ik^T).
    """
    H = np.einsum("...ij,...ijp->...p", ginv, A)
    normA2 = np.einsum("...ik,...jl,...ijp,...klp->...", ginv, ginv, A, A, optimize=True)
    normH2 = np.einsum("...p,...p->...", H, H)
    AH = np.einsum("...ijp,...p->...ij", A, H)
    normAH2 = np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv, AH, AH, optimize=True)

    Q = np.einsum("...ijp,...klp->...ijkl", A, A)
    Qup = np.einsum("...ia,...jb,...kc,...ld,...abcd->...ijkl", ginv, ginv, ginv, ginv, Q, optimize=True)
    normAdotA2 = np.einsum("...ijkl,...ijkl->...", Q, Qup)

    M = np.einsum("...kl,...ikp,...jlq->...ijpq", ginv, A, A, optimize=True)
    # g^kl A_jl A_ik^T is M with i and j exchanged
    M = M - np.swapaxes(M, -3, -4)
    Mup = np.einsum("...ia,...jb,...abpq->...ijpq", ginv, ginv, M, optimize=True)
    normR2 = np.einsum("...ijpq,...ijpq->...", M, Mup)

    gap = 3.0 * normA2**2 - 2.0 * normAdotA2 - 2.0 * normR2
    return normA2, normH2, normAH2, normAdotA2, normR2, gap


def sample(J, H2) -> GeometrySample:
    """Every pointwise quantity used by the monitors."""
    J = np.asarray(J, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    g, ginv, detg = metric(J)
    P, A, H = second_fundamental(J, H2, ginv)
    normA2, normH2, normAH2, normAdotA2, normR2, gap = curvature_norms(ginv, A)
    lam = singular_values(J)
    p, q, sigma = area_p(J)
    grad_f2 = np.einsum("...ij,...ia,...ja->...", ginv, J, J)
    return GeometrySample(
        g=g, ginv=ginv, detg=detg, Pperp=P, A=A, Hvec=H,
        normA2=normA2, normH2=normH2, normRperp2=normR2, normAdotA2=normAdotA2,
        normAH2=normAH2, lili_gap=gap, lam=lam, sigma=sigma, p=p, q=q, grad_f2=grad_f2,
    )


@dataclass
class SVDFrames:
    S11: float
    S22: float
    T11: float
    T22: float
    xi: np.ndarray
    eta: np.ndarray
    e: np.ndarray
    lam: float
    mu: float


def svd_frames(J, degenerate_tol=1e-12) -> SVDFrames:
    """Adapted tangent frame e_k and normal frame (xi, eta) at one point (n = 2).

    The target basis beta_k and domain basis alpha_k are the singular
    vectors of Df (so Df alpha_k = s_k beta_k); when the two singular
    values coincide the standard basis of R^2 is used for beta.  Signs
    are fixed so the first nonzero component of each beta_k is positive.
    The S and T components are evaluated from the frames with the split
    inner product, not from the closed-form expressions.
    """
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    if n != 2:
        raise ValueError("svd_frames requires n = 2")
    Df = J.T
    U, s, Vt = np.linalg.svd(Df, full_matrices=True)
    lam = float(s[0])
    mu = float(s[1]) if s.size > 1 else 0.0
    alpha = Vt.T.copy()
    beta = U.copy()
    if m >= 2 and abs(lam - mu) <= degenerate_tol * max(1.0, lam) and lam > 0:
        # Df^T Df = lam^2 I on span(alpha_1, alpha_2): any orthonormal beta works
        beta = np.eye(2)
        a = Df.T @ beta / lam
        q, _ = np.linalg.qr(a)
        alpha[:, :2] = q * np.sign(np.sum(q * a, axis=0))
    else:
        for k in range(2):
            nz = np.flatnonzero(np.abs(beta[:, k]) > 1e-12)
            if nz.size and beta[nz[0], k] < 0:
                beta[:, k] *= -1
                if k < m:
                    alpha[:, k] *= -1
    if m == 1:
        mu = 0.0

    e = np.zeros((m, m + 2))
    svals = [lam, mu] + [0.0] * (m - 2)
    for k in range(m):
        a = alpha[:, k]
        e[k] = np.concatenate([a, Df @ a]) / np.sqrt(1.0 + svals[k] ** 2)
    xi = np.concatenate([-lam * alpha[:, 0], beta[:, 0]]) / np.sqrt(1.0 + lam**2)
    if m >= 2:
        eta = np.concatenate([-mu * alpha[:, 1], beta[:, 1]]) / np.sqrt(1.0 + mu**2)
    else:
        eta = np.concatenate([np.zeros(m), beta[:, 1]])

    split = np.diag(np.concatenate([np.ones(m), -np.ones(2)]))
    S11 = e[0] @ split @ e[0]
    T11 = e[0] @ split @ xi
    if m >= 2:
        S22 = e[1] @ split @ e[1]
        T22 = e[1] @ split @ eta
    else:
        S22, T22 = 1.0, 0.0
    return SVDFrames(S11=S11, S22=S22, T11=T11, T22=T22, xi=xi, eta=eta, e=e, lam=lam, mu=mu)
