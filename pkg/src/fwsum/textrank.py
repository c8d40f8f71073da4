"""Graph-based extractive baseline: overlap graph plus PageRank scoring."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import log

import numpy as np

from .corpus import Document


@dataclass
class SentenceGraph:
    """Symmetric non-negative edge weights between sentences, zero diagonal."""

    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def build_graph(doc: Document) -> SentenceGraph:
    """Weight sentence pairs by normalized content overlap.

    weight(i, j) = |types(i) & types(j)| / (ln |types(i)| + ln |types(j)|)
    over distinct tokens. Pairs where either side has fewer than two
    distinct tokens get weight 0 (the log normalizer degenerates), as do
    pairs with no overlap.
    """
    if doc.n < 2:
        raise ValueError("overlap graph needs at least two sentences")
    token_sets = [set(s.tokens) for s in doc.sentences]
    log_sizes = [log(len(ts)) if len(ts) > 1 else 0.0 for ts in token_sets]
    weights = np.zeros((doc.n, doc.n))
    for i, j in combinations(range(doc.n), 2):
        if log_sizes[i] == 0.0 or log_sizes[j] == 0.0:
            continue
        overlap = len(token_sets[i] & token_sets[j])
        if overlap:
            w = overlap / (log_sizes[i] + log_sizes[j])
            weights[i, j] = w
            weights[j, i] = w
    return SentenceGraph(weights=weights)


def pagerank(
    graph: SentenceGraph,
    damping: float = 0.85,
    tol: float = 1e-6,
    max_iters: int = 200,
) -> np.ndarray:
    """Weighted PageRank scores over the sentence graph.

    Iterates s_i <- (1 - d)/n + d * sum_j w_ji s_j / out_j until the L1
    change drops below ``tol``. Nodes without outgoing weight spread their
    mass uniformly, which keeps the scores a probability vector.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie strictly between 0 and 1")
    W = graph.weights
    n = graph.n
    out = W.sum(axis=1)
    has_out = out > 0
    transition = np.zeros_like(W)
    transition[has_out] = W[has_out] / out[has_out, None]
    scores = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        dangling = scores[~has_out].sum()
        updated = (1.0 - damping) / n + damping * (
            transition.T @ scores + dangling / n
        )
        delta = np.abs(updated - scores).sum()
        scores = updated
        if delta < tol:
            break
    return scores


def textrank_summarize(doc: Document, k: int) -> list[int]:
    """Indices of the k best-ranked sentences, in document order.

    Ties prefer earlier sentences; k larger than the document simply keeps
    everything.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = pagerank(build_graph(doc))
    order = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in order[: min(k, doc.n)])
