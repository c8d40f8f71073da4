"""Similarity kernels against hand-derived values and independent scorers."""

import math

import numpy as np
import pytest
from scipy import sparse

from fwsum.corpus import FeatureMatrix, build_feature_matrix
from fwsum.errors import InputError
from fwsum.kernel import (
    Bm25Params,
    EmbeddingTable,
    Kernel,
    SentenceVectors,
    bm25_kernel,
    cosine_kernel,
    embedding_kernel,
    load_word_embeddings,
    load_word_frequencies,
    psd_repair,
    sif_embed,
    smallest_eigenvalue_estimate,
)

from conftest import make_document, random_document


def feature_matrix_from_columns(columns):
    arr = np.asarray(columns, dtype=float).T
    vocab = tuple(f"f{i}" for i in range(arr.shape[0]))
    return FeatureMatrix(vocabulary=vocab, matrix=sparse.csc_array(arr))


def reference_directed_bm25(doc, k1=1.5, b=0.75):
    """Straightforward per-pair BM25 scorer used as an independent oracle."""
    from collections import Counter

    token_lists = [list(s.tokens) for s in doc.sentences]
    n = len(token_lists)
    tfs = [Counter(toks) for toks in token_lists]
    lengths = [len(toks) for toks in token_lists]
    avglen = sum(lengths) / n
    directed = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            score = 0.0
            for term in token_lists[i]:
                n_t = sum(1 for tf in tfs if term in tf)
                idf = math.log(1.0 + (n - n_t + 0.5) / (n_t + 0.5))
                f = tfs[j].get(term, 0)
                denom = f + k1 * (1.0 - b + b * lengths[j] / avglen)
                score += idf * f * (k1 + 1.0) / denom
            directed[i, j] = score
    return directed


def reference_bm25_matrix(doc, k1=1.5, b=0.75):
    directed = reference_directed_bm25(doc, k1, b)
    sym = (directed + directed.T) / 2.0
    diag = np.sqrt(np.diag(sym))
    out = sym / np.outer(diag, diag)
    np.fill_diagonal(out, 1.0)
    return out


class TestCosineKernel:
    def test_identical_unit_columns(self):
        fm = feature_matrix_from_columns([[1.0, 0.0], [1.0, 0.0]])
        K = cosine_kernel(fm)
        assert K.entries[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_columns(self):
        fm = feature_matrix_from_columns([[1.0, 0.0], [0.0, 1.0]])
        K = cosine_kernel(fm)
        assert K.entries[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_angled_columns(self):
        fm = feature_matrix_from_columns([[1.0, 0.0], [1.0, 1.0]])
        K = cosine_kernel(fm)
        assert K.entries[0, 1] == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)

    def test_zero_column_diagonal_repaired(self):
        fm = feature_matrix_from_columns([[1.0, 0.0], [0.0, 0.0]])
        K = cosine_kernel(fm)
        assert K.entries[1, 1] == 1.0
        assert K.entries[0, 1] == 0.0

    def test_matches_explicit_gram_product(self):
        rng = np.random.default_rng(11)
        for n in (3, 17, 100):
            dense = rng.random((40, n)) * (rng.random((40, n)) < 0.2)
            fm = FeatureMatrix(
                vocabulary=tuple(f"f{i}" for i in range(40)),
                matrix=sparse.csc_array(dense),
            )
            K = cosine_kernel(fm)
            norms = np.linalg.norm(dense, axis=0)
            unit = np.divide(dense, norms, out=np.zeros_like(dense), where=norms > 0)
            expected = unit.T @ unit
            np.fill_diagonal(expected, np.where(norms > 0, np.diag(expected), 1.0))
            assert np.abs(K.entries - expected).max() < 1e-12


class TestBm25Kernel:
    def test_directed_self_score_hand_value(self):
        # corpus {[a b], [a c]}: the term "c" contributes
        # ln 2 * (1 * 2.5) / (1 + 1.5 * 1) = ln 2 to the directed score of
        # query s2 against s2 (sentence length equals the average length)
        doc = make_document([["a", "b"], ["a", "c"]])
        term_score_c = math.log(2.0) * (1.0 * 2.5) / (1.0 + 1.5 * 1.0)
        assert term_score_c == pytest.approx(math.log(2.0), abs=1e-12)
        idf_a = math.log(1.0 + 0.5 / 2.5)  # "a" appears in both sentences
        expected_self = term_score_c + idf_a * (1.0 * 2.5) / (1.0 + 1.5)
        directed = reference_directed_bm25(doc)
        assert directed[1, 1] == pytest.approx(expected_self, abs=1e-12)

    def test_identical_sentences_full_similarity(self):
        doc = make_document([["x", "y", "z"], ["x", "y", "z"]])
        K = bm25_kernel(doc)
        assert K.entries[0, 1] == pytest.approx(1.0, abs=1e-9)

    def test_unit_diagonal(self):
        doc = make_document([["a", "b"], ["b", "c", "d"], ["e"]])
        K = bm25_kernel(doc)
        assert np.allclose(np.diag(K.entries), 1.0)

    def test_agrees_with_bruteforce_scorer(self):
        rng = np.random.default_rng(5)
        for n in (2, 7, 23, 50):
            doc = random_document(rng, n, vocab=max(8, n), min_len=1, max_len=9)
            K = bm25_kernel(doc)
            ref = reference_bm25_matrix(doc)
            assert np.abs(K.entries - ref).max() < 1e-10

    def test_custom_params_still_agree(self):
        rng = np.random.default_rng(6)
        doc = random_document(rng, 12, vocab=10, min_len=2, max_len=6)
        params = Bm25Params(k1=0.9, b=0.3)
        K = bm25_kernel(doc, params)
        ref = reference_bm25_matrix(doc, k1=0.9, b=0.3)
        assert np.abs(K.entries - ref).max() < 1e-10

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            Bm25Params(k1=0.0)
        with pytest.raises(ValueError):
            Bm25Params(b=1.5)


class TestEmbeddingLoader:
    def test_basic_file(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("cat 0.1 0.2\ndog 0.3 0.4\n")
        table = load_word_embeddings(path)
        assert table.dim == 2 and set(table.vectors) == {"cat", "dog"}
        assert np.allclose(table.vectors["cat"], [0.1, 0.2])

    def test_vocab_filter(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("cat 0.1 0.2\ndog 0.3 0.4\n")
        table = load_word_embeddings(path, vocab_filter={"cat"})
        assert set(table.vectors) == {"cat"}
        assert table.dim == 2

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 3\ncat 1 2 3\ndog 4 5 6\n")
        table = load_word_embeddings(path)
        assert table.dim == 3 and len(table.vectors) == 2

    def test_inconsistent_length_fatal_with_line(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("cat 0.1 0.2\nbad 0.1\n")
        with pytest.raises(InputError, match=":2"):
            load_word_embeddings(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_word_embeddings(tmp_path / "nope.txt")

    def test_frequency_file(self, tmp_path):
        path = tmp_path / "freq.txt"
        path.write_text("cat 3\ndog 1\n")
        freqs = load_word_frequencies(path)
        assert freqs["cat"] == pytest.approx(0.75)
        assert freqs["dog"] == pytest.approx(0.25)


class TestSifEmbed:
    def table(self, dim=3):
        vectors = {
            "cat": np.array([1.0, 0.0, 0.0]),
            "dog": np.array([0.0, 1.0, 0.0]),
            "owl": np.array([0.0, 0.0, 1.0]),
        }
        return EmbeddingTable(dim=dim, vectors=vectors, frequencies={})

    def test_matches_independent_recomputation(self):
        doc = make_document([["cat", "dog"], ["owl"], ["cat", "owl", "owl"]])
        table = self.table()
        table.frequencies = {"cat": 0.001, "dog": 0.0, "owl": 0.5}
        a = 1e-3
        got = sif_embed(doc, table, a=a).vectors

        # independent recomputation of the weighted average + projection
        pre = np.zeros((3, 3))
        for i, sent in enumerate(doc.sentences):
            acc = np.zeros(3)
            for tok in sent.tokens:
                acc += (a / (a + table.frequencies[tok])) * table.vectors[tok]
            pre[i] = acc / len(sent.tokens)
        u = np.linalg.svd(pre, full_matrices=False)[2][0]
        expected = pre - np.outer(pre @ u, u)
        assert np.abs(got - expected).max() < 1e-12
        # spot-check the weights themselves: p = 0 -> 1.0, p = a -> 0.5
        assert a / (a + 0.0) == 1.0
        assert a / (a + a) == 0.5

    def test_rank_one_inputs_vanish(self):
        doc = make_document([["cat"], ["cat"], ["cat"]])
        got = sif_embed(doc, self.table()).vectors
        assert np.abs(got).max() < 1e-12

    def test_oov_sentences_zero_all_oov_error(self):
        doc = make_document([["unknown", "tokens"], ["more", "unknowns"]])
        with pytest.raises(InputError):
            sif_embed(doc, self.table())

    def test_corpus_internal_frequency_fallback(self):
        doc = make_document([["cat", "cat", "dog"], ["dog"]])
        table = self.table()
        table.frequencies = None
        vecs = sif_embed(doc, table).vectors
        assert vecs.shape == (2, 3)

    def test_principal_direction_removed(self):
        rng = np.random.default_rng(9)
        doc = random_document(rng, 12, vocab=3, min_len=1, max_len=6, prefix="t")
        vectors = {f"t{i}": rng.normal(size=5) for i in range(3)}
        table = EmbeddingTable(dim=5, vectors=vectors, frequencies=None)
        # recompute the pre-removal matrix to get its top direction and scale
        a = 1e-3
        from collections import Counter

        counts = Counter(t for s in doc.sentences for t in s.tokens)
        total = sum(counts.values())
        pre = np.zeros((doc.n, 5))
        for i, sent in enumerate(doc.sentences):
            acc = np.zeros(5)
            for tok in sent.tokens:
                acc += (a / (a + counts[tok] / total)) * vectors[tok]
            pre[i] = acc / len(sent.tokens)
        svals = np.linalg.svd(pre, compute_uv=False)
        u = np.linalg.svd(pre, full_matrices=False)[2][0]
        after = sif_embed(doc, table, a=a).vectors
        assert np.linalg.norm(after @ u) < 1e-8 * svals[0]


class TestEmbeddingKernel:
    def test_equal_vectors(self):
        vecs = SentenceVectors(np.array([[1.0, 2.0], [1.0, 2.0]]))
        K = embedding_kernel(vecs)
        assert K.entries[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_vectors(self):
        vecs = SentenceVectors(np.array([[1.0, 0.0], [0.0, 1.0]]))
        K = embedding_kernel(vecs)
        assert K.entries[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_hand_cosine(self):
        vecs = SentenceVectors(np.array([[1.0, 0.0], [3.0, 4.0]]))
        K = embedding_kernel(vecs)
        assert K.entries[0, 1] == pytest.approx(0.6, abs=1e-12)

    def test_zero_vector_repair(self):
        vecs = SentenceVectors(np.array([[0.0, 0.0], [1.0, 1.0]]))
        K = embedding_kernel(vecs)
        assert K.entries[0, 0] == 1.0
        assert K.entries[0, 1] == 0.0


class TestPsdRepair:
    def test_none_returns_same_object(self):
        K = Kernel(np.eye(3))
        assert psd_repair(K, "none") is K

    def test_psd_unchanged_under_diagonal_shift(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(8, 8))
        K = Kernel(A.T @ A + 0.1 * np.eye(8))
        out = psd_repair(K, "diagonal_shift")
        assert np.array_equal(out.entries, K.entries)

    def test_indefinite_two_by_two(self):
        K = Kernel(np.array([[1.0, 2.0], [2.0, 1.0]]))
        out = psd_repair(K, "diagonal_shift")
        assert out.entries[0, 0] == pytest.approx(2.0 + 1e-9, abs=1e-6)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            psd_repair(Kernel(np.eye(2)), "clip")

    def test_repaired_smallest_eigenvalue(self):
        rng = np.random.default_rng(4)
        for n in (20, 80, 200):
            A = rng.normal(size=(n, n))
            M = (A + A.T) / 2.0  # symmetric indefinite
            out = psd_repair(Kernel(M), "diagonal_shift")
            smallest = np.linalg.eigvalsh(out.entries)[0]
            assert smallest >= -1e-6

    def test_estimator_against_dense_eigensolver(self):
        rng = np.random.default_rng(8)
        for n in (5, 40, 120):
            A = rng.normal(size=(n, n))
            M = (A + A.T) / 2.0
            est = smallest_eigenvalue_estimate(M)
            exact = float(np.linalg.eigvalsh(M)[0])
            assert est == pytest.approx(exact, abs=1e-6 * max(1.0, abs(exact)))


class TestKernelSymmetry:
    def test_every_constructor_is_symmetric(self):
        rng = np.random.default_rng(7)
        doc = random_document(rng, 15, vocab=12)
        produced = [
            bm25_kernel(doc),
            cosine_kernel(build_feature_matrix(doc, "tfidf", normalize=True)),
        ]
        vectors = {f"w{i}": rng.normal(size=6) for i in range(12)}
        table = EmbeddingTable(dim=6, vectors=vectors, frequencies=None)
        produced.append(embedding_kernel(sif_embed(doc, table)))
        for K in produced:
            assert np.abs(K.entries - K.entries.T).max() < 1e-12
            assert np.all(np.diag(K.entries) > 0)
