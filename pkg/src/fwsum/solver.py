"""Row-sparse kernel self-reconstruction solved by conditional-gradient steps.

Minimizes the kernelized reconstruction error

    f(X) = tr(X^T K X) - 2 tr(K X) + tr(K)

over the group-L1 ball { X : sum_i ||X_(i)||_2 <= beta }, optionally
intersected with the non-negative orthant. For K = A^T A this equals
||A X - A||_F^2, so the non-zero rows of X mark the sentences whose
combinations best reconstruct the whole document.

Every linear-minimization step activates at most one row, which keeps the
iterate row-sparse and lets the K*X product be maintained by rank-1
updates instead of fresh matrix products. The loop exits as soon as k rows
are active, when the duality gap certifies convergence, or at a safety cap.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

from .errors import SolverError
from .kernel import Kernel

logger = logging.getLogger(__name__)

# Rows whose norm falls below this are treated as exactly zero. Convex
# averaging never nulls a row in floating point, so without eviction the
# active-row count would only ever grow.
ROW_EVICTION_THRESHOLD = 1e-12

_STEP_RULES = ("line_search", "decaying")
_EXIT_K = "k_reached"
_EXIT_CONVERGED = "converged"
_EXIT_MAX_ITERS = "max_iters"

# Rescale the cache when its running scale factor degenerates.
_SCALE_FLOOR = 1e-120


class SparseRowMatrix:
    """Row-sparse matrix with n columns; absent rows are exactly zero.

    Stored rows are kept stacked in a dense block so norm scans and scaling
    stay vectorized even with hundreds of active rows.
    """

    def __init__(self, n: int, rows: dict[int, np.ndarray] | None = None):
        if n < 1:
            raise ValueError("column dimension must be >= 1")
        self.n = n
        self._ids: list[int] = []
        self._slot: dict[int, int] = {}
        self._data = np.zeros((4, n))
        if rows:
            for i, vec in rows.items():
                self.set_row(i, vec)

    @classmethod
    def single_row(cls, n: int, j: int, vec: np.ndarray) -> "SparseRowMatrix":
        out = cls(n)
        out.set_row(j, vec)
        return out

    @property
    def num_rows(self) -> int:
        return len(self._ids)

    def indices(self) -> list[int]:
        return sorted(self._ids)

    def get_row(self, i: int) -> np.ndarray | None:
        slot = self._slot.get(i)
        return None if slot is None else self._data[slot]

    def rows(self) -> dict[int, np.ndarray]:
        return {i: self._data[slot].copy() for i, slot in self._slot.items()}

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (row indices, row block) views aligned slot-for-slot."""
        r = len(self._ids)
        return np.asarray(self._ids, dtype=np.intp), self._data[:r]

    def set_row(self, i: int, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n,):
            raise ValueError(f"row must have length {self.n}")
        if not (0 <= i < self.n):
            raise ValueError(f"row index {i} out of range [0, {self.n})")
        slot = self._slot.get(i)
        if slot is None:
            slot = self._new_slot(i)
        self._data[slot] = vec

    def add_to_row(self, i: int, vec: np.ndarray, coeff: float = 1.0) -> None:
        slot = self._slot.get(i)
        if slot is None:
            slot = self._new_slot(i)
            self._data[slot] = 0.0
        self._data[slot] += coeff * vec

    def scale(self, c: float) -> None:
        if self._ids:
            self._data[: len(self._ids)] *= c

    def row_norms(self) -> dict[int, float]:
        ids, block = self.stacked()
        norms = np.sqrt(np.einsum("ij,ij->i", block, block))
        return {int(i): float(v) for i, v in zip(ids, norms)}

    def group_norm(self) -> float:
        _, block = self.stacked()
        return float(np.sqrt(np.einsum("ij,ij->i", block, block)).sum())

    def evict_small(self, threshold: float = ROW_EVICTION_THRESHOLD) -> None:
        ids, block = self.stacked()
        if len(ids) == 0:
            return
        norms = np.sqrt(np.einsum("ij,ij->i", block, block))
        keep = norms >= threshold
        if keep.all():
            return
        kept_ids = [int(i) for i, k in zip(ids, keep) if k]
        kept = block[keep].copy()
        self._ids = kept_ids
        self._slot = {i: s for s, i in enumerate(kept_ids)}
        cap = max(4, self._data.shape[0])
        self._data = np.zeros((cap, self.n))
        self._data[: len(kept_ids)] = kept

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        ids, block = self.stacked()
        out[ids] = block
        return out

    def copy(self) -> "SparseRowMatrix":
        out = SparseRowMatrix(self.n)
        out._ids = list(self._ids)
        out._slot = dict(self._slot)
        out._data = self._data.copy()
        return out

    def _new_slot(self, i: int) -> int:
        if not (0 <= i < self.n):
            raise ValueError(f"row index {i} out of range [0, {self.n})")
        slot = len(self._ids)
        if slot == self._data.shape[0]:
            grown = np.zeros((2 * self._data.shape[0], self.n))
            grown[:slot] = self._data[:slot]
            self._data = grown
        self._ids.append(i)
        self._slot[i] = slot
        return slot


@dataclass
class SolverConfig:
    """Settings for one solve run.

    ``beta`` defaults to ``k`` (unit-diagonal kernels need about unit row
    mass per selected sentence) and ``eps`` to ``1e-6 * tr(K)`` so the
    convergence threshold follows the problem scale. ``record_history``
    can be switched off for very long runs where per-iteration records
    would dominate memory.
    """

    k: int
    beta: float | None = None
    eps: float | None = None
    step_rule: str = "line_search"
    max_iters: int | None = None
    respect_nonnegativity: bool = False
    record_history: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.step_rule not in _STEP_RULES:
            raise ValueError(f"step_rule must be one of {_STEP_RULES}")
        if self.max_iters is not None and self.max_iters < self.k:
            raise ValueError("max_iters must be >= k")


@dataclass
class IterationRecord:
    t: int
    objective: float
    gap: float
    step: float
    row: int | None


class SolverState:
    """Mutable loop state: iterate X, the K*X cache, and progress records.

    The cache is stored as ``scale * block`` so the per-step shrink
    ``KX <- (1-r) KX`` is a scalar update; ``KX`` materializes the product
    on access.
    """

    def __init__(self, kernel: Kernel):
        self.kernel = kernel
        n = kernel.n
        self.X = SparseRowMatrix(n)
        self._kx_block = np.zeros((n, n))
        self._kx_scale = 1.0
        self.t = 0
        self.last_gap = math.inf
        self.history: list[IterationRecord] = []

    @property
    def KX(self) -> np.ndarray:
        return self._kx_block * self._kx_scale

    def _renormalize_cache(self) -> None:
        self._kx_block *= self._kx_scale
        self._kx_scale = 1.0


@dataclass
class SolverResult:
    selected: list[int]
    X_final: SparseRowMatrix
    objective: float
    gap: float
    iterations: int
    exit_reason: str
    history: list[IterationRecord] = field(default_factory=list)

    def to_records(self) -> list[dict]:
        head = {
            "record": "result",
            "selected": list(self.selected),
            "objective": self.objective,
            "gap": self.gap,
            "iterations": self.iterations,
            "exit_reason": self.exit_reason,
        }
        rows = [
            {
                "record": "iteration",
                "t": rec.t,
                "objective": rec.objective,
                "gap": rec.gap,
                "step": rec.step,
                "row": rec.row,
            }
            for rec in self.history
        ]
        return [head, *rows]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(rec) for rec in self.to_records()) + "\n"


def objective(kernel: Kernel, X: SparseRowMatrix) -> float:
    """Reconstruction error f(X) = tr(X^T K X) - 2 tr(K X) + tr(K)."""
    K = kernel.entries
    if X.n != kernel.n:
        raise ValueError(f"dimension mismatch: kernel n={kernel.n}, X n={X.n}")
    ids, block = X.stacked()
    tr_k = float(np.trace(K))
    if len(ids) == 0:
        return tr_k
    gram = block @ block.T
    ksub = K[np.ix_(ids, ids)]
    quad = float((ksub * gram).sum())
    lin = float(np.einsum("rn,rn->", K[ids], block))
    return quad - 2.0 * lin + tr_k


def gradient(kernel: Kernel, state: SolverState) -> np.ndarray:
    """Materialize grad f(X) = 2 (K X - K) from the cached product."""
    grad = state._kx_block * state._kx_scale
    grad -= kernel.entries
    grad *= 2.0
    return grad


def lmo(
    grad: np.ndarray, beta: float, respect_nonnegativity: bool = False
) -> SparseRowMatrix:
    """Best rank-1 feasible point for the linearized objective.

    The minimizer of <S, grad> over the group-L1 ball concentrates all the
    budget on the row with the largest gradient norm, pointing against the
    gradient. In non-negative mode only the negative part of the gradient
    can be exploited, so rows are scored by it and the returned row is
    entrywise non-negative. Ties pick the smallest row index; a zero score
    yields the all-zero matrix.
    """
    grad = np.asarray(grad, dtype=np.float64)
    n = grad.shape[0]
    if grad.shape != (n, n):
        raise ValueError("gradient must be square")
    if respect_nonnegativity:
        scored = np.minimum(grad, 0.0)
    else:
        scored = grad
    norms2 = np.einsum("ij,ij->i", scored, scored)
    j = int(np.argmax(norms2))
    norm_j = math.sqrt(float(norms2[j]))
    if norm_j == 0.0:
        return SparseRowMatrix(n)
    row = -beta / norm_j * scored[j]
    return SparseRowMatrix.single_row(n, j, row)


def duality_gap(grad: np.ndarray, S: SparseRowMatrix, X: SparseRowMatrix) -> float:
    """Frank-Wolfe gap -<grad, S - X>; certifies suboptimality when convex."""
    total = 0.0
    for mat, sign in ((S, 1.0), (X, -1.0)):
        ids, block = mat.stacked()
        if len(ids):
            total += sign * float(np.einsum("rn,rn->", grad[ids], block))
    return -total


def step_size(
    t: int,
    rule: str,
    grad: np.ndarray,
    kernel: Kernel,
    direction: SparseRowMatrix,
) -> float:
    """Step length in [0, 1] along ``direction`` (= S - X).

    ``decaying`` is the classic 2/(t+2) schedule. ``line_search`` solves the
    quadratic segment minimization in closed form, which only needs inner
    products over the direction's few stored rows. A non-positive curvature
    (possible for indefinite kernels) degenerates to a full or null step
    depending on the slope sign.
    """
    if rule == "decaying":
        return 2.0 / (t + 2.0)
    if rule != "line_search":
        raise ValueError(f"unknown step rule {rule!r}")
    ids, block = direction.stacked()
    if len(ids) == 0:
        return 0.0
    K = kernel.entries
    slope = float(np.einsum("rn,rn->", grad[ids], block))
    gram = block @ block.T
    curvature = 2.0 * float((K[np.ix_(ids, ids)] * gram).sum())
    if curvature <= 0.0:
        return 1.0 if slope < 0.0 else 0.0
    return float(min(1.0, max(0.0, -slope / curvature)))


def gradient_update(state: SolverState, S: SparseRowMatrix, r: float) -> SolverState:
    """Apply X <- (1-r) X + r S and refresh the K*X cache by a rank-1 update.

    ``S`` must hold at most one row; the cache update then only needs the
    kernel column matching that row. Rows whose norm drops below the
    eviction threshold are removed so the active-row count stays meaningful.
    """
    if S.num_rows > 1:
        raise ValueError("update direction must have at most one stored row")
    K = state.kernel.entries
    state.X.scale(1.0 - r)
    if r == 1.0:
        state._kx_block.fill(0.0)
        state._kx_scale = 1.0
    else:
        state._kx_scale *= 1.0 - r
        if abs(state._kx_scale) < _SCALE_FLOOR:
            state._renormalize_cache()
    if S.num_rows == 1:
        j = S.indices()[0]
        row = S.get_row(j)
        state.X.add_to_row(j, row, r)
        coeff = r / state._kx_scale
        # cache += coeff * K[:, j] (x) row, fused in one BLAS pass
        dger(
            coeff,
            row,
            K[j],
            a=state._kx_block.T,
            overwrite_x=0,
            overwrite_y=0,
            overwrite_a=1,
        )
    state.X.evict_small()
    state.t += 1
    return state


def get_summary(X: SparseRowMatrix, k: int) -> list[int]:
    """Sentence indices of the active rows, in document order.

    When more than k rows are active (only possible after a safety-cap
    exit) the k largest-norm rows win, ties preferring earlier sentences.
    """
    norms = X.row_norms()
    if not norms:
        logger.warning("get_summary: iterate is all-zero, returning empty summary")
        return []
    if len(norms) <= k:
        return sorted(norms)
    ranked = sorted(norms.items(), key=lambda item: (-item[1], item[0]))
    return sorted(i for i, _ in ranked[:k])


def _resolve(config: SolverConfig, kernel: Kernel) -> tuple[float, float, int]:
    beta = config.beta if config.beta is not None else float(config.k)
    eps = config.eps if config.eps is not None else 1e-6 * float(np.trace(kernel.entries))
    max_iters = (
        config.max_iters if config.max_iters is not None else max(1000, 10 * config.k)
    )
    return beta, eps, max_iters


def solve(kernel: Kernel, config: SolverConfig) -> SolverResult:
    """Run the conditional-gradient loop until k rows activate or the gap
    certifies convergence.

    Follows the recipe: gradient from the cached product, rank-1 linear
    minimization, step by decaying schedule or exact line search, rank-1
    cache refresh. History records the objective after each step together
    with the pre-step gap.
    """
    K = kernel.entries
    n = kernel.n
    if K.shape != (n, n):
        raise SolverError(f"kernel must be square, got {K.shape}")
    if not np.allclose(K, K.T, atol=1e-9):
        raise SolverError("kernel must be symmetric")
    beta, eps, max_iters = _resolve(config, kernel)
    state = SolverState(kernel)
    if config.respect_nonnegativity:
        _run_materialized(state, config, beta, eps, max_iters)
    else:
        _run_incremental(state, config, beta, eps, max_iters)
    if state.X.num_rows >= config.k:
        exit_reason = _EXIT_K
    elif state.last_gap < eps:
        exit_reason = _EXIT_CONVERGED
    else:
        exit_reason = _EXIT_MAX_ITERS
    selected = get_summary(state.X, config.k)
    return SolverResult(
        selected=selected,
        X_final=state.X,
        objective=objective(kernel, state.X),
        gap=state.last_gap,
        iterations=state.t,
        exit_reason=exit_reason,
        history=state.history,
    )


def _run_materialized(
    state: SolverState,
    config: SolverConfig,
    beta: float,
    eps: float,
    max_iters: int,
) -> None:
    """Reference loop built from the public operations.

    Used for the non-negative mode, whose row scores depend on the clipped
    gradient and so cannot reuse the incremental norm bookkeeping.
    """
    kernel = state.kernel
    while state.t < max_iters:
        grad = gradient(kernel, state)
        S = lmo(grad, beta, config.respect_nonnegativity)
        gap = duality_gap(grad, S, state.X)
        state.last_gap = gap
        direction = S.copy()
        ids, block = state.X.stacked()
        for i, row in zip(ids, block):
            direction.add_to_row(int(i), row, -1.0)
        r = step_size(state.t, config.step_rule, grad, kernel, direction)
        gradient_update(state, S, r)
        if config.record_history:
            state.history.append(
                IterationRecord(
                    t=state.t,
                    objective=objective(kernel, state.X),
                    gap=gap,
                    step=r,
                    row=S.indices()[0] if S.num_rows else None,
                )
            )
        if state.X.num_rows >= config.k or gap < eps:
            return
    return


def _run_incremental(
    state: SolverState,
    config: SolverConfig,
    beta: float,
    eps: float,
    max_iters: int,
) -> None:
    """Hot loop for the default mode.

    Row norms of the residual K X - K are maintained through the scalars
    m2_i = ||B_(i)||^2 and mk_i = <B_(i), K_(i)> of the unscaled cache block
    B, each updated in O(n) per step from two kernel matvecs. The iterate
    keeps its own scalar prefactor so the convex shrink costs O(1), and the
    X-side inner products tr(X^T K X) and tr(X^T K) advance by closed-form
    recurrences. The selected gradient row is always re-read exactly, so
    bookkeeping drift can only perturb tie-breaking among near-equal rows;
    everything is recomputed from scratch periodically to cap drift. The
    running objective uses the exact quadratic step identity
    f(X + rD) = f(X) - r*gap + r^2*curv.
    """
    kernel = state.kernel
    K = kernel.entries
    n = kernel.n
    X = state.X  # holds rows scaled by 1/xi; true iterate is xi * stored rows
    xi = 1.0
    block = state._kx_block
    k2 = np.einsum("ij,ij->i", K, K)
    m2 = np.zeros(n)
    mk = np.zeros(n)
    su = 0.0  # tr(X^T K X), true scale
    sw = 0.0  # tr(X^T K), true scale
    f_running = float(np.trace(K))
    decaying = config.step_rule == "decaying"
    refresh_every = 4096
    evict_every = 16

    def materialize_x() -> None:
        nonlocal xi
        X.scale(xi)
        xi = 1.0

    def refresh_x_terms() -> None:
        nonlocal su, sw
        ids, xblock = X.stacked()
        if len(ids):
            sigma = state._kx_scale
            su = sigma * xi * float(np.einsum("rn,rn->", xblock, block[ids]))
            sw = xi * float(np.einsum("rn,rn->", xblock, K[ids]))
        else:
            su = 0.0
            sw = 0.0

    while state.t < max_iters:
        sigma = state._kx_scale
        norms2 = sigma * sigma * m2 - 2.0 * sigma * mk + k2
        j = int(np.argmax(norms2))
        g_half = sigma * block[j] - K[j]
        nj = float(np.linalg.norm(g_half))

        x_dot_half = su - sw
        gap = 2.0 * (beta * nj + x_dot_half)
        state.last_gap = gap

        if nj == 0.0:
            s_row = None
            s_kx = 0.0
            s_quad = 0.0
            curvature = 2.0 * su
            slope_neg = 2.0 * x_dot_half  # -<grad, D> with D = -X
        else:
            s_row = (-beta / nj) * g_half
            s_kx = sigma * float(s_row @ block[j])
            s_quad = float(K[j, j]) * beta * beta
            curvature = 2.0 * (s_quad - 2.0 * s_kx + su)
            slope_neg = gap

        if decaying:
            r = 2.0 / (state.t + 2.0)
        elif curvature <= 0.0:
            r = 1.0 if slope_neg > 0.0 else 0.0
        else:
            r = min(1.0, max(0.0, slope_neg / curvature))

        xi_old = xi
        if r == 1.0:
            xi = 1.0
            xi_old = 1.0
            X.scale(0.0)
            block.fill(0.0)
            state._kx_scale = 1.0
            m2.fill(0.0)
            mk.fill(0.0)
            su = 0.0
            sw = 0.0
        elif r != 0.0:
            xi *= 1.0 - r
            if abs(xi) < _SCALE_FLOOR:
                # stored rows become the post-shrink iterate; q_x below must
                # still see the pre-shrink one
                materialize_x()
                xi_old = 1.0 / (1.0 - r)
            state._kx_scale *= 1.0 - r
            if abs(state._kx_scale) < _SCALE_FLOOR:
                state._renormalize_cache()
                m2 = np.einsum("ij,ij->i", block, block)
                mk = np.einsum("ij,ij->i", block, K)
        if s_row is not None and r != 0.0:
            col = K[j]
            ids, xblock = X.stacked()
            if len(ids):
                # sum_i K_ij <x_i, s> over the pre-step iterate, true scale
                q_x = xi_old * float(col[ids] @ (xblock @ s_row))
            else:
                q_x = 0.0
            p = block @ s_row
            q = K @ s_row
            X.add_to_row(j, s_row, r / xi)
            coeff = r / state._kx_scale
            dger(
                coeff,
                s_row,
                col,
                a=block.T,
                overwrite_x=0,
                overwrite_y=0,
                overwrite_a=1,
            )
            m2 += (2.0 * coeff) * col * p + (coeff * coeff * (beta * beta)) * (col * col)
            mk += coeff * col * q
            shrink = 1.0 - r
            su = (
                shrink * shrink * su
                + shrink * r * (q_x + s_kx)
                + r * r * s_quad
            )
            sw = shrink * sw + r * float(q[j])
        state.t += 1
        f_running = f_running - r * slope_neg + r * r * (curvature / 2.0)
        if config.record_history:
            state.history.append(
                IterationRecord(
                    t=state.t,
                    objective=f_running,
                    gap=gap,
                    step=r,
                    row=j if s_row is not None else None,
                )
            )
        due_evict = state.t % evict_every == 0
        if due_evict or X.num_rows >= config.k:
            X.evict_small(ROW_EVICTION_THRESHOLD / abs(xi))
        if X.num_rows >= config.k or gap < eps:
            materialize_x()
            X.evict_small()
            if X.num_rows >= config.k or gap < eps:
                return
            refresh_x_terms()
            continue
        if state.t % refresh_every == 0:
            m2 = np.einsum("ij,ij->i", block, block)
            mk = np.einsum("ij,ij->i", block, K)
            refresh_x_terms()
    materialize_x()
    X.evict_small()
    return
