"""Text ingestion: sentence segmentation, tokenization, datasets, feature vectors.

A document is an ordered list of sentences; each sentence carries its raw
text and a normalized token list. Sentences whose token list is empty after
normalization are dropped at ingestion; the remaining sentences are
re-indexed so that ``Sentence.index`` always equals the position in the
document. Sentences with fewer than 3 tokens are kept but flagged as
``short`` so downstream consumers can treat them specially without index
bookkeeping.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import InputError

logger = logging.getLogger(__name__)

# Sentence-final terminators and the abbreviations that suppress a split.
_TERMINATORS = ".!?"
_ABBREVIATIONS = frozenset(
    {"Mr.", "Mrs.", "Dr.", "St.", "No.", "Fig.", "e.g.", "i.e.", "etc.", "vs."}
)
_QUOTE_CHARS = "\"'“”‘’"
_OPENING_PUNCT = "\"'“‘([{"

_ALNUM_RUN = re.compile(r"[0-9A-Za-z]+")


@dataclass(frozen=True)
class TokenizeOptions:
    """Normalization options applied when turning text into tokens."""

    lowercase: bool = True
    strip_punct: bool = True
    stopwords: frozenset[str] | None = None


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document: position, raw text, normalized tokens."""

    index: int
    raw: str
    tokens: tuple[str, ...]
    short: bool = False


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]

    @property
    def n(self) -> int:
        return len(self.sentences)

    def token_lists(self) -> list[tuple[str, ...]]:
        return [s.tokens for s in self.sentences]


@dataclass
class DatasetEntry:
    """One document paired with its reference summary text."""

    document: Document
    gold: str
    meta: dict = field(default_factory=dict)


def tokenize(text: str, options: TokenizeOptions | None = None) -> list[str]:
    """Split ``text`` into normalized tokens, order preserved.

    With ``strip_punct`` (the default) tokens are the maximal alphanumeric
    runs, so punctuation never survives; without it the text is split on
    whitespace only. Stopword filtering happens after case folding.
    """
    options = options or TokenizeOptions()
    if options.strip_punct:
        tokens = _ALNUM_RUN.findall(text)
    else:
        tokens = text.split()
    if options.lowercase:
        tokens = [t.lower() for t in tokens]
    if options.stopwords:
        tokens = [t for t in tokens if t not in options.stopwords]
    return tokens


def _is_boundary(text: str, i: int, start: int) -> int | None:
    """Return the start of the next sentence if ``text[i]`` ends one.

    A terminator ends a sentence when it is followed by whitespace and then
    an uppercase letter or a quote, unless the word it closes is a known
    abbreviation.
    """
    n = len(text)
    k = i + 1
    while k < n and text[k].isspace():
        k += 1
    if k == i + 1 or k >= n:
        return None
    nxt = text[k]
    if not (nxt.isupper() or nxt in _QUOTE_CHARS):
        return None
    tail = text[start : i + 1].rsplit(None, 1)
    word = tail[-1] if tail else ""
    if word.lstrip(_OPENING_PUNCT) in _ABBREVIATIONS:
        return None
    return k


def segment_sentences(
    text: str, options: TokenizeOptions | None = None
) -> list[Sentence]:
    """Split raw text into sentences with rule-based boundaries.

    Boundaries are placed at ``. ! ?`` followed by whitespace and an
    uppercase letter or quote, except after a fixed abbreviation list.
    Trailing text without a terminator becomes a final sentence. Every
    non-whitespace character of the input ends up in exactly one sentence.
    """
    sentences: list[Sentence] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINATORS:
            nxt = _is_boundary(text, i, start)
            if nxt is not None:
                _append_sentence(sentences, text[start : i + 1], options)
                start = nxt
                i = nxt
                continue
        i += 1
    if start < n:
        _append_sentence(sentences, text[start:], options)
    return sentences


def _append_sentence(
    sentences: list[Sentence], raw: str, options: TokenizeOptions | None
) -> None:
    raw = raw.strip()
    if not raw:
        return
    tokens = tuple(tokenize(raw, options))
    sentences.append(
        Sentence(
            index=len(sentences),
            raw=raw,
            tokens=tokens,
            short=len(tokens) < 3,
        )
    )


def document_from_text(
    doc_id: str, text: str, options: TokenizeOptions | None = None
) -> Document:
    """Segment and tokenize ``text`` into a Document.

    Sentences with no tokens after normalization are dropped and the rest
    re-indexed. Raises :class:`InputError` when nothing survives.
    """
    admitted: list[Sentence] = []
    for sent in segment_sentences(text, options):
        if not sent.tokens:
            continue
        admitted.append(
            Sentence(
                index=len(admitted),
                raw=sent.raw,
                tokens=sent.tokens,
                short=sent.short,
            )
        )
    if not admitted:
        raise InputError(f"document {doc_id!r} has no sentences with tokens")
    return Document(id=doc_id, sentences=tuple(admitted))


_DOC_SUFFIX = ".doc.txt"
_GOLD_SUFFIX = ".gold.txt"


def load_dataset(
    root: str | Path, options: TokenizeOptions | None = None
) -> tuple[list[DatasetEntry], list[str]]:
    """Load ``<id>.doc.txt`` / ``<id>.gold.txt`` pairs from a directory.

    Returns entries sorted by id plus a list of diagnostics for skipped
    documents (missing or empty gold file, empty document). An unreadable
    root raises :class:`InputError`.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"dataset root {root} is not a readable directory")
    entries: list[DatasetEntry] = []
    diagnostics: list[str] = []
    doc_paths = sorted(p for p in root.iterdir() if p.name.endswith(_DOC_SUFFIX))
    for doc_path in doc_paths:
        doc_id = doc_path.name[: -len(_DOC_SUFFIX)]
        gold_path = root / f"{doc_id}{_GOLD_SUFFIX}"
        if not gold_path.is_file():
            diagnostics.append(f"{doc_id}: missing gold file {gold_path.name}")
            continue
        gold = gold_path.read_text(encoding="utf-8")
        if not gold.strip():
            diagnostics.append(f"{doc_id}: gold file {gold_path.name} is empty")
            continue
        try:
            document = document_from_text(doc_id, doc_path.read_text(encoding="utf-8"), options)
        except InputError as exc:
            diagnostics.append(f"{doc_id}: {exc}")
            continue
        entries.append(
            DatasetEntry(
                document=document,
                gold=gold,
                meta={"doc_path": str(doc_path), "gold_path": str(gold_path)},
            )
        )
    for diag in diagnostics:
        logger.warning("load_dataset: %s", diag)
    return entries, diagnostics


@dataclass
class FeatureMatrix:
    """Sparse d x n matrix of non-negative per-sentence term weights."""

    vocabulary: tuple[str, ...]
    matrix: sparse.csc_array  # shape (d, n)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def build_feature_matrix(
    doc: Document, scheme: str = "tf", normalize: bool = False
) -> FeatureMatrix:
    """Build term-weight columns for each sentence.

    ``tf`` uses raw term counts; ``tfidf`` multiplies by ln(n / df) where df
    is the number of sentences containing the term. With ``normalize`` every
    non-zero column is scaled to unit Euclidean norm.
    """
    if scheme not in ("tf", "tfidf"):
        raise ValueError(f"unknown weighting scheme {scheme!r}")
    if doc.n < 1:
        raise ValueError("document has no sentences")
    vocab = sorted({t for s in doc.sentences for t in s.tokens})
    term_index = {t: i for i, t in enumerate(vocab)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    df = Counter()
    for j, sent in enumerate(doc.sentences):
        counts = Counter(sent.tokens)
        for term, c in counts.items():
            rows.append(term_index[term])
            cols.append(j)
            vals.append(float(c))
        df.update(counts.keys())
    matrix = sparse.csc_array(
        (vals, (rows, cols)), shape=(len(vocab), doc.n), dtype=np.float64
    )
    if scheme == "tfidf":
        idf = np.array([math.log(doc.n / df[t]) for t in vocab])
        matrix = sparse.csc_array(sparse.diags_array(idf) @ matrix)
    if normalize:
        norms = sparse.linalg.norm(matrix, axis=0)
        inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        matrix = sparse.csc_array(matrix @ sparse.diags_array(inv))
    return FeatureMatrix(vocabulary=tuple(vocab), matrix=matrix)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword list, one token per line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read stopword file {path}: {exc}") from exc
    return frozenset(line.strip() for line in text.splitlines() if line.strip())
