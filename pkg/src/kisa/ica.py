"""Symmetric FastICA with the tanh nonlinearity, for real whitened data."""

from dataclasses import dataclass

import numpy as np

from .model import EIG_FLOOR, SeedLike, check_samples, covariance, random_orthogonal

__all__ = ["IcaResult", "fastica", "sym_decorrelation", "sign_normalize"]

WHITE_TOL = 0.05


@dataclass(frozen=True)
class IcaResult:
    W: np.ndarray
    s_hat: np.ndarray
    iterations: int
    converged: bool


def sym_decorrelation(W: np.ndarray) -> np.ndarray:
    """``(W W^T)^{-1/2} W`` via an eigendecomposition with floored eigenvalues."""
    lam, U = np.linalg.eigh(W @ W.T)
    lam = np.maximum(lam, EIG_FLOOR)
    return (U / np.sqrt(lam)) @ U.T @ W


def sign_normalize(W: np.ndarray) -> np.ndarray:
    """Flip rows so that the largest-magnitude entry of each row is positive."""
    idx = np.argmax(np.abs(W), axis=1)
    signs = np.sign(W[np.arange(W.shape[0]), idx])
    signs[signs == 0] = 1.0
    return W * signs[:, np.newaxis]


def fastica(z_white, seed: SeedLike = None, max_iter: int = 500, tol: float = 1e-6) -> IcaResult:
    """Estimate an orthogonal separation matrix for whitened data.

    Parameters
    ----------
    z_white : ndarray, shape (D, T)
        Real, empirically white observations.
    seed :
        Seed for the random orthogonal starting point.
    max_iter : int
        Iteration cap; when reached the last iterate is returned with
        ``converged=False``.
    tol : float
        Converged once every row satisfies ``|<w_new, w_old>| >= 1 - tol``.

    Returns
    -------
    IcaResult
        ``W`` is orthogonal with sign-normalised rows and ``s_hat = W z_white``.
    """
    X = check_samples(z_white)
    if np.iscomplexobj(X):
        raise ValueError("fastica handles real data only")
    D, T = X.shape
    dev = np.linalg.norm(covariance(X) - np.eye(D))
    if dev > WHITE_TOL * D:
        raise ValueError(f"input is not white: ||cov - I||_F = {dev:.3g}")

    W = random_orthogonal(D, seed)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        G = np.tanh(W @ X)
        g_prime = (1.0 - G**2).mean(axis=1)
        W_new = sym_decorrelation(G @ X.T / T - g_prime[:, np.newaxis] * W)
        lim = np.min(np.abs(np.einsum("ij,ij->i", W_new, W)))
        W = W_new
        if lim >= 1.0 - tol:
            converged = True
            break

    W = sign_normalize(W)
    return IcaResult(W=W, s_hat=W @ X, iterations=it, converged=converged)
