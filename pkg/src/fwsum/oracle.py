"""Reference solvers used to cross-check the main solver in tests.

These deliberately share no code with the conditional-gradient solver:
objectives and gradients are recomputed densely here so that agreement
between the two is evidence rather than tautology. They are meant for
test-sized problems only.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np


@dataclass
class OracleResult:
    X: np.ndarray
    objective: float
    support: tuple[int, ...]


def _dense_objective(K: np.ndarray, X: np.ndarray) -> float:
    return float(np.trace(X.T @ K @ X) - 2.0 * np.trace(K @ X) + np.trace(K))


def project_group_l1(X: np.ndarray, beta: float) -> np.ndarray:
    """Euclidean projection onto { X : sum_i ||X_(i)||_2 <= beta }.

    Feasible inputs come back unchanged. Otherwise the row norms are
    group-soft-thresholded: bisection finds theta > 0 with
    sum_i max(||X_(i)|| - theta, 0) = beta and each row is rescaled to the
    thresholded norm.
    """
    if not beta > 0:
        raise ValueError("beta must be > 0")
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if norms.sum() <= beta:
        return X
    lo, hi = 0.0, float(norms.max())
    while hi - lo > 1e-12:
        theta = 0.5 * (lo + hi)
        if np.maximum(norms - theta, 0.0).sum() > beta:
            lo = theta
        else:
            hi = theta
    theta = 0.5 * (lo + hi)
    shrunk = np.maximum(norms - theta, 0.0)
    factors = np.divide(shrunk, norms, out=np.zeros_like(norms), where=norms > 0)
    return X * factors[:, None]


def _largest_eigenvalue(K: np.ndarray, iters: int = 500) -> float:
    rng = np.random.default_rng(1)
    v = rng.standard_normal(K.shape[0])
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = K @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 1.0
        lam_next = float(v @ w)
        v = w / norm_w
        if abs(lam_next - lam) <= 1e-12 * max(1.0, abs(lam_next)):
            lam = lam_next
            break
        lam = lam_next
    return max(lam, 1e-12)


def projected_gradient_solve(
    K: np.ndarray, beta: float, iters: int = 20000, tol: float = 1e-12
) -> OracleResult:
    """Projected gradient descent on the group-L1-constrained reconstruction.

    Steps X <- project(X - eta * 2 (K X - K), beta) with the conservative
    step eta = 1 / (2 lambda_max(K)), until the relative objective change
    drops below ``tol`` or the iteration budget runs out. Expects a
    symmetric PSD kernel.
    """
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    eta = 1.0 / (2.0 * _largest_eigenvalue(K))
    X = np.zeros((n, n))
    f_prev = _dense_objective(K, X)
    for _ in range(iters):
        grad = 2.0 * (K @ X - K)
        X = project_group_l1(X - eta * grad, beta)
        f = _dense_objective(K, X)
        if abs(f_prev - f) <= tol * max(1.0, abs(f)):
            f_prev = f
            break
        f_prev = f
    support = tuple(
        int(i) for i in np.flatnonzero(np.linalg.norm(X, axis=1) > 1e-9)
    )
    return OracleResult(X=X, objective=f_prev, support=support)


def _nnls_projected_gradient(
    Q: np.ndarray, B: np.ndarray, tol: float = 1e-10, max_iters: int = 200000
) -> np.ndarray:
    """Columnwise min_x x^T Q x - 2 b^T x with x >= 0, by projected gradient.

    All columns of B share the quadratic Q, so the whole block iterates at
    once.
    """
    eigs = np.linalg.eigvalsh(Q)
    lam = max(float(eigs[-1]), 1e-12)
    eta = 1.0 / (2.0 * lam)
    X = np.zeros_like(B)
    for _ in range(max_iters):
        X_next = np.maximum(X - eta * 2.0 * (Q @ X - B), 0.0)
        if np.abs(X_next - X).max() <= tol:
            return X_next
        X = X_next
    return X


def best_nonnegative_for_support(K: np.ndarray, support: tuple[int, ...]) -> np.ndarray:
    """Best X >= 0 supported on the given rows for the reconstruction error."""
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    X = np.zeros((n, n))
    if support:
        idx = np.asarray(sorted(support))
        Q = K[np.ix_(idx, idx)]
        X[idx] = _nnls_projected_gradient(Q, K[idx, :])
    return X


def cardinality_objective(K: np.ndarray, support: tuple[int, ...]) -> float:
    """Reconstruction error of the best non-negative X on a fixed support."""
    return _dense_objective(np.asarray(K, dtype=np.float64),
                            best_nonnegative_for_support(K, support))


def exhaustive_cardinality_solve(K: np.ndarray, k: int) -> OracleResult:
    """Exact minimizer over supports of size <= k with non-negative rows.

    Every candidate support is scored by solving one non-negative least
    squares problem per column (they decouple), and the best support wins;
    ties keep the first support in lexicographic enumeration order. Guarded
    to n <= 12 because the enumeration is combinatorial.
    """
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    if n > 12:
        raise ValueError("exhaustive search is limited to n <= 12")
    if k < 1:
        raise ValueError("k must be >= 1")
    best_objective = _dense_objective(K, np.zeros((n, n)))
    best_X = np.zeros((n, n))
    best_support: tuple[int, ...] = ()
    for size in range(1, min(k, n) + 1):
        for support in combinations(range(n), size):
            X = best_nonnegative_for_support(K, support)
            f = _dense_objective(K, X)
            if f < best_objective - 1e-12:
                best_objective = f
                best_X = X
                best_support = support
    return OracleResult(X=best_X, objective=best_objective, support=best_support)
