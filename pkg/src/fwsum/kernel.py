"""Sentence-similarity kernels: explicit Gram products, Okapi BM25, SIF.

All constructors return a dense symmetric matrix whose entry (i, j) scores
the similarity of sentences i and j. The solver only ever sees documents
through this matrix, so any scoring function that produces a reasonable
symmetric similarity can be dropped in.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .corpus import Document, FeatureMatrix, build_feature_matrix
from .errors import InputError


@dataclass
class Kernel:
    """Dense symmetric n x n sentence-similarity matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError(f"kernel must be square, got shape {self.entries.shape}")

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Bm25Params:
    """Okapi BM25 parameters: term-frequency saturation and length scaling."""

    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")


@dataclass
class EmbeddingTable:
    """Word vectors plus optional unigram probabilities."""

    dim: int
    vectors: dict[str, np.ndarray]
    frequencies: dict[str, float] | None = None


@dataclass
class SentenceVectors:
    """One embedding per sentence, stacked row-wise (n x dim)."""

    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


def _symmetrized(entries: np.ndarray) -> np.ndarray:
    return (entries + entries.T) / 2.0


def cosine_kernel(features: FeatureMatrix) -> Kernel:
    """Gram matrix of unit-normalized feature columns.

    All-zero columns (possible when every term of a sentence has zero
    weight) produce zero rows whose diagonal is repaired to 1 so the
    matrix keeps a positive diagonal.
    """
    if features.n < 1:
        raise ValueError("feature matrix needs at least one column")
    A = features.matrix
    norms = sparse.linalg.norm(A, axis=0)
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    normalized = sparse.csc_array(A @ sparse.diags_array(inv))
    gram = (normalized.T @ normalized).toarray()
    gram = _symmetrized(gram)
    np.fill_diagonal(gram, np.where(norms > 0, np.diag(gram), 1.0))
    return Kernel(gram)


def bm25_kernel(doc: Document, params: Bm25Params | None = None) -> Kernel:
    """BM25 similarity matrix with sentences acting as both query and target.

    The directed score of query sentence i against sentence j sums, over
    every token occurrence t of i,

        idf(t) * tf(t, j) * (k1 + 1) / (tf(t, j) + k1 * (1 - b + b * len_j / avglen))

    with idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)). The directed score
    matrix is symmetrized by averaging and normalized to a unit diagonal so
    its scale matches the cosine kernel.
    """
    params = params or Bm25Params()
    if doc.n < 1:
        raise ValueError("document has no sentences")
    tf = build_feature_matrix(doc, scheme="tf").matrix
    n = doc.n
    lengths = np.asarray(tf.sum(axis=0)).ravel()
    avglen = lengths.mean()
    sent_counts = np.asarray((tf > 0).sum(axis=1)).ravel()
    idf = np.log(1.0 + (n - sent_counts + 0.5) / (sent_counts + 0.5))
    denom_norm = params.k1 * (1.0 - params.b + params.b * lengths / avglen)

    col_of = np.repeat(np.arange(n), np.diff(tf.indptr))
    row_of = tf.indices
    counts = tf.data
    weights = idf[row_of] * counts * (params.k1 + 1.0) / (counts + denom_norm[col_of])
    weighted = sparse.csc_array((weights, row_of.copy(), tf.indptr.copy()), shape=tf.shape)
    entries = (tf.T @ weighted).toarray()

    entries += entries.T.copy()
    entries *= 0.5
    diag = np.diag(entries).copy()
    diag[diag <= 0] = 1.0
    scale = 1.0 / np.sqrt(diag)
    entries *= scale[:, None]
    entries *= scale[None, :]
    entries = _symmetrized(entries)
    np.fill_diagonal(entries, 1.0)
    return Kernel(entries)


def load_word_embeddings(
    path: str | Path, vocab_filter: set[str] | None = None
) -> EmbeddingTable:
    """Parse word2vec-style text embeddings.

    An optional leading "count dim" header is skipped; every other line is
    a token followed by a fixed number of reals. The dimension is set by
    the first data line and any later mismatch is a fatal error naming the
    offending line.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read embedding file {path}: {exc}") from exc
    first_content = True
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if first_content and len(parts) == 2:
            try:
                int(parts[0]), int(parts[1])
            except ValueError:
                pass
            else:
                first_content = False
                continue
        first_content = False
        token, raw_values = parts[0], parts[1:]
        if dim is None:
            dim = len(raw_values)
            if dim == 0:
                raise InputError(f"{path}:{lineno}: no vector components on data line")
        if len(raw_values) != dim:
            raise InputError(
                f"{path}:{lineno}: expected {dim} vector components, got {len(raw_values)}"
            )
        if vocab_filter is not None and token not in vocab_filter:
            continue
        try:
            vec = np.array([float(v) for v in raw_values], dtype=np.float64)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: non-numeric vector component") from exc
        vectors[token] = vec
    if dim is None:
        raise InputError(f"{path}: no embedding vectors found")
    return EmbeddingTable(dim=dim, vectors=vectors)


def load_word_frequencies(path: str | Path) -> dict[str, float]:
    """Read "token count" pairs and normalize counts to probabilities."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read frequency file {path}: {exc}") from exc
    counts: dict[str, float] = {}
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise InputError(f"{path}:{lineno}: expected 'token count'")
        try:
            counts[parts[0]] = counts.get(parts[0], 0.0) + float(parts[1])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: non-numeric count") from exc
    total = sum(counts.values())
    if total <= 0:
        raise InputError(f"{path}: no usable frequency entries")
    return {token: c / total for token, c in counts.items()}


def sif_embed(
    doc: Document, table: EmbeddingTable, a: float = 1e-3
) -> SentenceVectors:
    """Smooth-inverse-frequency sentence vectors.

    Each sentence averages its in-vocabulary word vectors weighted by
    a / (a + p(w)), dividing by the full token count of the sentence; the
    shared first principal component of the resulting vectors is then
    projected out. Unknown words are skipped. When the table carries no
    frequencies, unigram probabilities are estimated from the document
    itself.
    """
    if not a > 0:
        raise ValueError("smoothing constant must be > 0")
    freqs = table.frequencies
    if freqs is None:
        counts = Counter(t for s in doc.sentences for t in s.tokens)
        total = sum(counts.values())
        freqs = {t: c / total for t, c in counts.items()}
    out = np.zeros((doc.n, table.dim))
    any_in_vocab = False
    for i, sent in enumerate(doc.sentences):
        acc = np.zeros(table.dim)
        hits = 0
        for token in sent.tokens:
            vec = table.vectors.get(token)
            if vec is None:
                continue
            p = freqs.get(token, 0.0)
            acc += (a / (a + p)) * vec
            hits += 1
        if hits:
            out[i] = acc / len(sent.tokens)
            any_in_vocab = True
    if not any_in_vocab:
        raise InputError("every sentence is out of vocabulary for the embedding table")
    # remove the shared first principal component
    principal = np.linalg.svd(out, full_matrices=False)[2][0]
    out -= np.outer(out @ principal, principal)
    return SentenceVectors(vectors=out)


def embedding_kernel(vectors: SentenceVectors) -> Kernel:
    """Pairwise cosine similarities of sentence vectors.

    Zero vectors have similarity 0 to everything; their diagonal entry is
    repaired to 1.
    """
    V = vectors.vectors
    if V.shape[0] < 1:
        raise ValueError("need at least one sentence vector")
    norms = np.linalg.norm(V, axis=1)
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    unit = V * inv[:, None]
    entries = _symmetrized(unit @ unit.T)
    np.fill_diagonal(entries, 1.0)
    return Kernel(entries)


def smallest_eigenvalue_estimate(
    K: np.ndarray, max_iters: int = 20000, tol: float = 1e-13
) -> float:
    """Estimate the smallest eigenvalue by power iteration on c*I - K.

    c is the max absolute row sum, an upper bound on the spectral radius,
    so the dominant eigenvalue of the shifted matrix is c - lambda_min.
    """
    n = K.shape[0]
    c = float(np.abs(K).sum(axis=1).max())
    if c == 0.0:
        return 0.0
    rng = np.random.default_rng(0)
    v = np.ones(n) + 0.01 * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    mu_prev = math.inf
    mu = 0.0
    for _ in range(max_iters):
        w = c * v - K @ v
        mu = float(v @ w)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return float(c - mu)
        v = w / norm_w
        if abs(mu - mu_prev) <= tol * max(1.0, c):
            break
        mu_prev = mu
    return float(c - mu)


def psd_repair(kernel: Kernel, mode: str = "none") -> Kernel:
    """Optionally shift the diagonal so the kernel is (numerically) PSD.

    Mode "none" returns the kernel untouched. Mode "diagonal_shift" adds
    (|lambda_min| + 1e-9) * I when the estimated smallest eigenvalue is
    negative, and otherwise leaves the kernel as is.
    """
    if mode == "none":
        return kernel
    if mode != "diagonal_shift":
        raise ValueError(f"unknown psd repair mode {mode!r}")
    lam_min = smallest_eigenvalue_estimate(kernel.entries)
    if lam_min >= 0.0:
        return kernel
    shift = abs(lam_min) + 1e-9
    return Kernel(kernel.entries + shift * np.eye(kernel.n))
