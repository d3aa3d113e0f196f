"""SPD factorization, source solves and a shift-invert Lanczos eigensolver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from cvxopt import cholmod
import cvxopt

log = logging.getLogger(__name__)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


class ConvergenceError(RuntimeError):
    pass


class SPDFactor:
    """Sparse Cholesky factorization P A P^T = L L^T (CHOLMOD via cvxopt).

    Construction fails with :class:`NotPositiveDefiniteError` exactly when
    the matrix is not positive definite.
    """

    def __init__(self, A):
        A = sp.coo_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        self.shape = A.shape
        low = A.row >= A.col
        n = A.shape[0]
        Al = cvxopt.spmatrix(cvxopt.matrix(A.data[low].astype(float)),
                             cvxopt.matrix(A.row[low].astype(int)),
                             cvxopt.matrix(A.col[low].astype(int)), (n, n))
        self._F = cholmod.symbolic(Al, uplo="L")
        try:
            cholmod.numeric(Al, self._F)
        except ArithmeticError as exc:
            pivot = exc.args[0] if exc.args else None
            raise NotPositiveDefiniteError(f"matrix is not positive definite (pivot {pivot})", pivot) from exc

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        x = cvxopt.matrix(b.reshape(b.shape[0], -1).copy())
        cholmod.solve(self._F, x)
        return np.array(x).reshape(b.shape)


def spd_factorize(A) -> SPDFactor:
    return SPDFactor(A)


def source_solve(A, b, factor: SPDFactor | None = None) -> np.ndarray:
    """Solve A u = b, the discrete solution operator applied to a load vector."""
    factor = spd_factorize(A) if factor is None else factor
    return factor.solve(b)


@dataclass
class EigenPairSet:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # (n, m), M-orthonormal
    residuals: np.ndarray  # ||Ax - w Mx|| / ||Ax||
    iterations: int = 0
    shift: float = 0.0

    def __len__(self):
        return len(self.eigenvalues)


def _m_orthogonalize(w, V, M, passes=2):
    for _ in range(passes):
        if V.shape[1] == 0:
            break
        h = V.T @ (M @ w)
        w = w - V @ h
    return w


def smallest_eigenpairs(A, M, m: int, shift: float = 0.0, tol: float = 1e-9,
                        ncv: int | None = None, max_restarts: int = 300, seed: int = 0,
                        guard: int = 2) -> EigenPairSet:
    """The m smallest eigenpairs of A x = w M x.

    Thick-restart Lanczos on (A - shift M)^{-1} M in the M inner product with
    full reorthogonalization.  ``m + guard`` Ritz values must converge before
    returning so that near-multiple eigenvalues at the end of the wanted
    range are separated.
    """
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    n = A.shape[0]
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > n:
        raise ValueError(f"requested {m} eigenpairs of a {n}x{n} pencil")
    nev = min(m + guard, n)
    if ncv is None:
        ncv = max(2 * nev + 1, nev + 20)
    ncv = min(ncv, n)
    rng = np.random.default_rng(seed)
    factor = spd_factorize(A - shift * M) if shift else spd_factorize(A)

    def op(x):
        return factor.solve(M @ x)

    def m_norm(x):
        return float(np.sqrt(max(x @ (M @ x), 0.0)))

    V = np.zeros((n, ncv + 1))
    H = np.zeros((ncv + 1, ncv))
    v = rng.standard_normal(n)
    V[:, 0] = v / m_norm(v)
    k = 0
    inner_tol = tol
    theta = Y = None
    for restart in range(max_restarts):
        for j in range(k, ncv):
            w = op(V[:, j])
            h = V[:, :j + 1].T @ (M @ w)
            w = w - V[:, :j + 1] @ h
            h2 = V[:, :j + 1].T @ (M @ w)
            w = w - V[:, :j + 1] @ h2
            H[:j + 1, j] = h + h2
            beta = m_norm(w)
            if beta <= 1e-12 * max(abs(H[j, j]), 1e-300):
                # invariant subspace found: continue with a fresh direction
                H[j + 1, j] = 0.0
                w = _m_orthogonalize(rng.standard_normal(n), V[:, :j + 1], M, passes=3)
                V[:, j + 1] = w / m_norm(w)
            else:
                H[j + 1, j] = beta
                V[:, j + 1] = w / beta
        T = H[:ncv, :ncv]
        T = 0.5 * (T + T.T)
        theta, Y = np.linalg.eigh(T)
        order = np.argsort(-theta, kind="stable")
        theta, Y = theta[order], Y[:, order]
        beta = H[ncv, ncv - 1]
        est = np.abs(beta * Y[ncv - 1, :])
        conv = est[:nev] <= inner_tol * np.abs(theta[:nev])
        if conv.all() or ncv == n:
            X = V[:, :ncv] @ Y[:, :m]
            lam = shift + 1.0 / theta[:m]
            res = _residuals(A, M, X, lam)
            if np.all(res <= tol) or ncv == n or inner_tol < 1e-15:
                break
            inner_tol *= 0.1
        # thick restart keeping the leading Ritz vectors
        keep = min(max(nev + (ncv - nev) // 2, nev), ncv - 1)
        Vk = V[:, :ncv] @ Y[:, :keep]
        V[:, :keep] = Vk
        V[:, keep] = V[:, ncv]
        V[:, keep + 1:] = 0.0
        H[:] = 0.0
        H[:keep, :keep] = np.diag(theta[:keep])
        H[keep, :keep] = beta * Y[ncv - 1, :keep]
        H[:keep, keep] = 0.0
        k = keep
        # re-orthonormalize the retained block against drift
        V[:, keep] = _m_orthogonalize(V[:, keep], V[:, :keep], M)
        V[:, keep] /= m_norm(V[:, keep])
    else:
        raise ConvergenceError(f"Lanczos did not converge in {max_restarts} restarts")

    for i in range(X.shape[1]):
        p = np.argmax(np.abs(X[:, i]))
        if X[p, i] < 0:
            X[:, i] = -X[:, i]
    idx = np.argsort(lam, kind="stable")
    lam, X, res = lam[idx], X[:, idx], res[idx]
    if np.any(res > tol):
        log.warning("eigen residuals %s exceed tol %.1e (rounding floor)", res, tol)
    return EigenPairSet(lam, X, res, restart + 1, shift)


def _residuals(A, M, X, lam):
    AX = A @ X
    R = AX - (M @ X) * lam
    return np.linalg.norm(R, axis=0) / np.linalg.norm(AX, axis=0)
