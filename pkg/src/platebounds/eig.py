"""Sparse symmetric linear algebra and the generalized eigensolver.

Solves A x = lambda B x for the k smallest eigenpairs with A, B SPD, via
shift-invert (shift 0) block subspace iteration.  A dense oracle based on a
cyclic Jacobi sweep provides an independent cross-check for small systems.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "EigenPair",
    "NotSPDError",
    "EigenSolveError",
    "factorize",
    "smallest_eigs",
    "dense_eig_oracle",
    "dump_matrix",
]


class NotSPDError(ValueError):
    def __init__(self, pivot):
        super().__init__(f"matrix is not positive definite (pivot {pivot} <= 0)")
        self.pivot = pivot


class EigenSolveError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class EigenPair:
    """One eigenpair with B-normalized eigenvector and residual metadata."""

    value: float
    vector: np.ndarray
    residual: float
    iterations: int


class _CholeskySolver:
    """Direct solve via SuperLU in symmetric mode with one refinement step."""

    def __init__(self, A, lu):
        self._A = A
        self._lu = lu

    def solve(self, rhs):
        y = self._lu.solve(rhs)
        # one step of iterative refinement keeps the residual near roundoff
        r = rhs - self._A @ y
        return y + self._lu.solve(r)


class _CgSolver:
    """Diagonally preconditioned CG fallback for tight memory budgets."""

    def __init__(self, A):
        self._A = A
        d = A.diagonal()
        self._M = sp.diags(1.0 / d)

    def _solve_one(self, rhs):
        y, info = spla.cg(self._A, rhs, rtol=1e-13, atol=0.0, M=self._M, maxiter=100 * self._A.shape[0])
        if info != 0:
            raise EigenSolveError(f"CG did not converge (info={info})")
        return y

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if rhs.ndim == 1:
            return self._solve_one(rhs)
        return np.column_stack([self._solve_one(rhs[:, j]) for j in range(rhs.shape[1])])


def factorize(A, max_factor_nnz=None):
    """Linear-solve handle for SPD A: sparse factorization with fill-reducing
    ordering, or preconditioned CG when the factor exceeds the nonzero budget.
    """
    A = sp.csc_matrix(A)
    d = A.diagonal()
    if (d <= 0).any():
        raise NotSPDError(int(np.argmax(d <= 0)))
    lu = spla.splu(
        A,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )
    pivots = lu.U.diagonal()
    if (pivots <= 0).any():
        raise NotSPDError(int(np.argmax(pivots <= 0)))
    if max_factor_nnz is not None and lu.L.nnz + lu.U.nnz > max_factor_nnz:
        return _CgSolver(A)
    return _CholeskySolver(A, lu)


def _b_orthonormalize(X, B):
    G = X.T @ (B @ X)
    G = 0.5 * (G + G.T)
    L = np.linalg.cholesky(G)
    return scipy.linalg.solve_triangular(L, X.T, lower=True).T


def smallest_eigs(
    A,
    B,
    k,
    tol=1e-9,
    seed=42,
    max_iter=500,
    block_extra=3,
    max_factor_nnz=None,
):
    """k smallest eigenpairs of A x = lambda B x, ascending.

    Block shift-invert subspace iteration: B-orthonormalize, apply A^{-1} B,
    Rayleigh-Ritz in the subspace.  Converged when every target eigenvalue's
    relative change is <= 1e-11 across iterations and its residual
    ||A x - lambda B x|| / (lambda ||B x||) is <= tol.  Eigenvectors are
    B-normalized; signs fixed so the largest-magnitude entry is positive.
    """
    n = A.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds system dimension {n}")
    m = min(k + block_extra, n)
    solver = factorize(A, max_factor_nnz=max_factor_nnz)

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    prev = None
    for it in range(1, max_iter + 1):
        X = _b_orthonormalize(X, B)
        BX = B @ X
        Y = solver.solve(BX)
        # in the subspace span(Y):  Y^T A Y = Y^T B X  since A Y = B X
        MA = Y.T @ BX
        MA = 0.5 * (MA + MA.T)
        MB = Y.T @ (B @ Y)
        MB = 0.5 * (MB + MB.T)
        theta, C = scipy.linalg.eigh(MA, MB)
        X = Y @ C
        vals = theta[:k]
        if prev is not None:
            rel = np.abs(vals - prev) / np.abs(vals)
            if (rel <= 1e-11).all():
                res = _residuals(A, B, X[:, :k], vals)
                if (res <= np.maximum(tol, _residual_floor(A, B, X[:, :k], vals))).all():
                    break
        prev = vals
    else:
        res = _residuals(A, B, X[:, :k], theta[:k])
        raise EigenSolveError(
            f"subspace iteration did not converge in {max_iter} iterations",
            residuals=res,
        )

    pairs = []
    for j in range(k):
        x = X[:, j]
        x = x / np.sqrt(x @ (B @ x))
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        pairs.append(
            EigenPair(value=float(vals[j]), vector=x, residual=float(res[j]), iterations=it)
        )
    return pairs


def _residuals(A, B, X, vals):
    R = A @ X - (B @ X) * vals[None, :]
    num = np.linalg.norm(R, axis=0)
    den = np.abs(vals) * np.linalg.norm(B @ X, axis=0)
    return num / den


def _residual_floor(A, B, X, vals):
    """Smallest residual double precision can certify for each column.

    Evaluating A x itself rounds to ~eps * |A| |x| componentwise, so on
    strongly graded meshes (||A|| huge relative to lambda ||B x||) the
    measured residual cannot fall below this, however accurate x is.
    """
    eps = np.finfo(float).eps
    num = np.linalg.norm(abs(A) @ np.abs(X), axis=0)
    den = np.abs(vals) * np.linalg.norm(B @ X, axis=0)
    return eps * num / den


def _jacobi_eigvals(C, tol=1e-14, max_sweeps=50):
    """Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(C, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.ravel().copy()
    norm = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(A.diagonal() ** 2), 0.0))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if diff == 0.0:
                    t = 1.0
                elif abs(diff) > 2.0 * abs(apq) / np.finfo(float).eps:
                    # theta^2 + 1 would overflow; use the asymptotic rotation
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
    return np.sort(A.diagonal())


def dense_eig_oracle(A, B, max_dim=2000):
    """All eigenvalues of A x = lambda B x, ascending, by dense reduction.

    B is Cholesky-factored densely (B = L L^T), the problem is reduced to the
    standard symmetric form L^{-1} A L^{-T}, and solved with a cyclic Jacobi
    sweep.  Intended as a verification oracle for small systems.
    """
    n = A.shape[0]
    if n > max_dim:
        raise ValueError(f"system dimension {n} exceeds oracle limit {max_dim}")
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, float)
    Bd = B.toarray() if sp.issparse(B) else np.asarray(B, float)
    try:
        L = np.linalg.cholesky(Bd)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(-1) from exc
    Z = scipy.linalg.solve_triangular(L, Ad, lower=True)
    C = scipy.linalg.solve_triangular(L, Z.T, lower=True)
    C = 0.5 * (C + C.T)
    return _jacobi_eigvals(C)


def dump_matrix(A, path):
    """Coordinate text dump `row col value` (0-based) for external checks."""
    coo = sp.coo_matrix(A)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            f.write(f"{i} {j} {float(v)!r}\n")
