"""Unsupervised extractive summarization via group-sparse self-reconstruction.

Pipeline: segment a document into sentences, build a sentence-similarity
kernel (BM25, cosine, or SIF embeddings), and pick exemplar sentences by
solving a group-L1-constrained reconstruction problem with a
conditional-gradient method. A TextRank baseline and a lexical/semantic
ROUGE evaluation harness round out the toolkit.
"""

from .corpus import (
    DatasetEntry,
    Document,
    FeatureMatrix,
    Sentence,
    TokenizeOptions,
    build_feature_matrix,
    document_from_text,
    load_dataset,
    segment_sentences,
    tokenize,
)
from .errors import ConfigError, FwsumError, InputError, SolverError
from .evaluation import (
    RougeScore,
    bootstrap_ci,
    evaluate_system,
    rouge_l,
    rouge_n,
    semantic_rouge_l,
    semantic_rouge_n,
)
from .kernel import (
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
)
from .solver import (
    SolverConfig,
    SolverResult,
    SolverState,
    SparseRowMatrix,
    duality_gap,
    get_summary,
    gradient,
    gradient_update,
    lmo,
    objective,
    solve,
    step_size,
)
from .textrank import SentenceGraph, build_graph, pagerank, textrank_summarize

__version__ = "0.1.0"

__all__ = [
    "Bm25Params",
    "ConfigError",
    "DatasetEntry",
    "Document",
    "EmbeddingTable",
    "FeatureMatrix",
    "FwsumError",
    "InputError",
    "Kernel",
    "RougeScore",
    "SentenceGraph",
    "SentenceVectors",
    "Sentence",
    "SolverConfig",
    "SolverError",
    "SolverResult",
    "SolverState",
    "SparseRowMatrix",
    "TokenizeOptions",
    "bm25_kernel",
    "bootstrap_ci",
    "build_feature_matrix",
    "build_graph",
    "cosine_kernel",
    "document_from_text",
    "duality_gap",
    "embedding_kernel",
    "evaluate_system",
    "get_summary",
    "gradient",
    "gradient_update",
    "lmo",
    "load_dataset",
    "load_word_embeddings",
    "load_word_frequencies",
    "objective",
    "pagerank",
    "psd_repair",
    "rouge_l",
    "rouge_n",
    "segment_sentences",
    "semantic_rouge_l",
    "semantic_rouge_n",
    "sif_embed",
    "solve",
    "step_size",
    "textrank_summarize",
    "tokenize",
]
