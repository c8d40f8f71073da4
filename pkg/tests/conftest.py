"""Shared builders for tests: documents, kernels, embedding fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from fwsum.corpus import Document, Sentence
from fwsum.kernel import EmbeddingTable, Kernel


def make_document(token_lists, doc_id="doc"):
    sentences = tuple(
        Sentence(
            index=i,
            raw=" ".join(tokens),
            tokens=tuple(tokens),
            short=len(tokens) < 3,
        )
        for i, tokens in enumerate(token_lists)
    )
    return Document(id=doc_id, sentences=sentences)


def random_document(rng, n_sentences, vocab=50, min_len=3, max_len=10, prefix="w"):
    lists = []
    for _ in range(n_sentences):
        m = int(rng.integers(min_len, max_len + 1))
        lists.append([f"{prefix}{int(t)}" for t in rng.integers(0, vocab, size=m)])
    return make_document(lists)


def random_psd_kernel(rng, n, kind="ridge"):
    """Random symmetric PSD matrices of the kinds this package encounters."""
    A = rng.normal(size=(n, n))
    gram = A.T @ A / n
    if kind == "ridge":
        M = gram + 0.5 * np.eye(n)
    elif kind == "cosine":
        M = gram + 0.5 * np.eye(n)
        d = 1.0 / np.sqrt(np.diag(M))
        M = M * np.outer(d, d)
    elif kind == "sparse_gram":
        B = rng.random((3 * n, n)) * (rng.random((3 * n, n)) < 0.15)
        norms = np.maximum(np.linalg.norm(B, axis=0), 1e-12)
        B = B / norms
        M = B.T @ B
        np.fill_diagonal(M, 1.0)
        M = M + 0.05 * np.eye(n)
    else:
        raise ValueError(kind)
    return Kernel((M + M.T) / 2.0)


def one_hot_table(tokens):
    """Embedding table mapping each distinct token to a distinct one-hot axis."""
    distinct = list(dict.fromkeys(tokens))
    dim = len(distinct)
    vectors = {}
    for i, tok in enumerate(distinct):
        v = np.zeros(dim)
        v[i] = 1.0
        vectors[tok] = v
    return EmbeddingTable(dim=dim, vectors=vectors)


@pytest.fixture
def toy_dataset(tmp_path):
    """Two-document dataset in the <id>.doc.txt / <id>.gold.txt layout."""
    (tmp_path / "a.doc.txt").write_text(
        "The cat sat on the mat today. Dogs bark at the moon every night. "
        "Cats and dogs live together peacefully. The weather was cold and windy.",
        encoding="utf-8",
    )
    (tmp_path / "a.gold.txt").write_text(
        "The cat sat on the mat today. Cats and dogs live together peacefully.",
        encoding="utf-8",
    )
    (tmp_path / "b.doc.txt").write_text(
        "Markets rallied strongly this quarter. Bond yields fell sharply last week. "
        "Investors remain cautious about inflation. Central banks signalled patience.",
        encoding="utf-8",
    )
    (tmp_path / "b.gold.txt").write_text(
        "Markets rallied strongly this quarter. Investors remain cautious about inflation.",
        encoding="utf-8",
    )
    return tmp_path
