"""Lexical and embedding-based ROUGE scoring with bootstrap intervals.

Scores live on a 0-100 scale. Candidate and reference summaries are each
treated as one flat token sequence; tokenization is lowercase and
punctuation-stripping but keeps stopwords and does no stemming.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import DatasetEntry, TokenizeOptions, segment_sentences, tokenize
from .errors import InputError
from .kernel import EmbeddingTable

ROUGE_TOKENIZE = TokenizeOptions(lowercase=True, strip_punct=True, stopwords=None)

LEXICAL_METRICS = ("rouge-1", "rouge-2", "rouge-l")
SEMANTIC_METRICS = ("sem-rouge-1", "sem-rouge-2", "sem-rouge-l")
STATISTICS = ("f1", "precision", "recall")


@dataclass
class RougeScore:
    precision: float
    recall: float
    f1: float
    ci: tuple[float, float] | None = None

    @classmethod
    def from_counts(cls, match: float, cand_total: int, ref_total: int) -> "RougeScore":
        precision = 100.0 * match / cand_total if cand_total else 0.0
        recall = 100.0 * match / ref_total if ref_total else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return cls(precision=precision, recall=recall, f1=f1)

    def stat(self, name: str) -> float:
        return {"f1": self.f1, "precision": self.precision, "recall": self.recall}[name]


def _ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap score."""
    if n < 1:
        raise ValueError("gram order must be >= 1")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    if not cand or not ref:
        return RougeScore.from_counts(0.0, len(cand), len(ref))
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    match = sum(min(c, ref_counts[g]) for g, c in cand_counts.items() if g in ref_counts)
    return RougeScore.from_counts(float(match), len(cand), len(ref))


def _lcs_length(cand_ids: np.ndarray, match_rows: np.ndarray) -> int:
    """Length of the longest common subsequence from a per-token match table.

    ``match_rows[c]`` is the boolean match vector of candidate token id c
    against every reference position. Rows of the DP table are monotone, so
    the in-row dependency collapses to a prefix maximum.
    """
    m = len(cand_ids)
    ref_len = match_rows.shape[1] if match_rows.size else 0
    if m == 0 or ref_len == 0:
        return 0
    prev = np.zeros(ref_len + 1, dtype=np.int64)
    curr = np.zeros(ref_len + 1, dtype=np.int64)
    for cid in cand_ids:
        matched = match_rows[cid]
        np.maximum(prev[1:], np.where(matched, prev[:-1] + 1, 0), out=curr[1:])
        curr[0] = 0
        np.maximum.accumulate(curr, out=curr)
        prev, curr = curr, prev
    return int(prev[-1])


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Longest-common-subsequence score over exact token matches."""
    if not candidate or not reference:
        return RougeScore.from_counts(0.0, len(candidate), len(reference))
    vocab = {t: i for i, t in enumerate(dict.fromkeys([*candidate, *reference]))}
    cand_ids = np.array([vocab[t] for t in candidate])
    ref_ids = np.array([vocab[t] for t in reference])
    match_rows = np.zeros((len(vocab), len(reference)), dtype=bool)
    match_rows[ref_ids, np.arange(len(reference))] = True
    lcs = _lcs_length(cand_ids, match_rows)
    return RougeScore.from_counts(float(lcs), len(candidate), len(reference))


def _token_units(tokens: Iterable[str], table: EmbeddingTable) -> dict[str, np.ndarray]:
    units: dict[str, np.ndarray] = {}
    for token in tokens:
        if token in units:
            continue
        vec = table.vectors.get(token)
        if vec is None:
            units[token] = np.zeros(table.dim)
        else:
            norm = float(np.linalg.norm(vec))
            units[token] = vec / norm if norm > 0 else np.zeros(table.dim)
    return units


def _gram_embedding(
    gram: tuple[str, ...], table: EmbeddingTable, composition: str
) -> np.ndarray:
    vecs = [table.vectors.get(t) for t in gram]
    if composition == "sum":
        acc = np.zeros(table.dim)
        for v in vecs:
            if v is not None:
                acc += v
    elif composition == "multiply":
        acc = np.ones(table.dim)
        for v in vecs:
            acc *= v if v is not None else 0.0
    else:
        raise ValueError(f"unknown gram composition {composition!r}")
    norm = float(np.linalg.norm(acc))
    return acc / norm if norm > 0 else np.zeros(table.dim)


def semantic_rouge_n(
    candidate: Sequence[str],
    reference: Sequence[str],
    n: int,
    table: EmbeddingTable | None,
    composition: str = "sum",
) -> RougeScore:
    """Soft n-gram overlap under embedding similarity.

    Each n-gram embeds as the normalized composition of its word vectors;
    gram pairs are matched greedily in descending cosine (floored at 0),
    respecting multiplicities, and the matched similarities add up to a
    soft overlap count. Grams with no in-vocabulary content match nothing.
    """
    if n < 1:
        raise ValueError("gram order must be >= 1")
    if table is None:
        raise InputError("semantic ROUGE needs an embedding table")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    if not cand or not ref:
        return RougeScore.from_counts(0.0, len(cand), len(ref))
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    cand_types = list(cand_counts)
    ref_types = list(ref_counts)
    cand_vecs = np.stack([_gram_embedding(g, table, composition) for g in cand_types])
    ref_vecs = np.stack([_gram_embedding(g, table, composition) for g in ref_types])
    sims = np.maximum(cand_vecs @ ref_vecs.T, 0.0)
    pairs = [
        (float(sims[a, b]), a, b)
        for a in range(len(cand_types))
        for b in range(len(ref_types))
        if sims[a, b] > 0.0
    ]
    pairs.sort(key=lambda item: (-item[0], item[1], item[2]))
    cand_left = [cand_counts[g] for g in cand_types]
    ref_left = [ref_counts[g] for g in ref_types]
    soft = 0.0
    for sim, a, b in pairs:
        take = min(cand_left[a], ref_left[b])
        if take:
            soft += take * sim
            cand_left[a] -= take
            ref_left[b] -= take
    return RougeScore.from_counts(soft, len(cand), len(ref))


def semantic_rouge_l(
    candidate: Sequence[str],
    reference: Sequence[str],
    table: EmbeddingTable | None,
    tau: float = 0.8,
) -> RougeScore:
    """LCS where tokens match when their embedding cosine reaches ``tau``."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if table is None:
        raise InputError("semantic ROUGE needs an embedding table")
    if not candidate or not reference:
        return RougeScore.from_counts(0.0, len(candidate), len(reference))
    units = _token_units([*candidate, *reference], table)
    cand_types = list(dict.fromkeys(candidate))
    type_id = {t: i for i, t in enumerate(cand_types)}
    cand_units = np.stack([units[t] for t in cand_types])
    ref_units = np.stack([units[t] for t in reference])
    match_rows = (cand_units @ ref_units.T) >= tau
    cand_ids = np.array([type_id[t] for t in candidate])
    lcs = _lcs_length(cand_ids, match_rows)
    return RougeScore.from_counts(float(lcs), len(candidate), len(reference))


def bootstrap_ci(
    scores: Sequence[float],
    level: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of per-document scores."""
    if len(scores) == 0:
        raise ValueError("need at least one score")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    arr = np.asarray(scores, dtype=np.float64)
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(arr), size=(resamples, len(arr)))
    means = arr[draws].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low = float(np.percentile(means, 100.0 * alpha))
    high = float(np.percentile(means, 100.0 * (1.0 - alpha)))
    return low, high


@dataclass
class MetricAggregate:
    metric: str
    statistic: str
    mean: float
    ci_low: float
    ci_high: float


@dataclass
class SystemScores:
    per_document: dict[str, dict[str, RougeScore]]
    aggregates: list[MetricAggregate] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


def gold_summary_length(gold: str) -> int:
    """Number of sentences in the reference summary (at least one)."""
    count = sum(1 for s in segment_sentences(gold) if s.tokens)
    return max(1, count)


def expand_metric_groups(groups: Iterable[str]) -> list[str]:
    names: list[str] = []
    for group in groups:
        if group == "lexical":
            names.extend(LEXICAL_METRICS)
        elif group == "semantic":
            names.extend(SEMANTIC_METRICS)
        else:
            raise ValueError(f"unknown metric group {group!r}")
    return names


def score_pair(
    candidate_text: str,
    reference_text: str,
    metrics: Sequence[str],
    table: EmbeddingTable | None = None,
    tau: float = 0.8,
) -> dict[str, RougeScore]:
    """Compute the requested metrics for one candidate/reference pair."""
    cand = tokenize(candidate_text, ROUGE_TOKENIZE)
    ref = tokenize(reference_text, ROUGE_TOKENIZE)
    out: dict[str, RougeScore] = {}
    for metric in metrics:
        if metric == "rouge-l":
            out[metric] = rouge_l(cand, ref)
        elif metric.startswith("rouge-"):
            out[metric] = rouge_n(cand, ref, int(metric.split("-")[1]))
        elif metric == "sem-rouge-l":
            out[metric] = semantic_rouge_l(cand, ref, table, tau)
        elif metric.startswith("sem-rouge-"):
            out[metric] = semantic_rouge_n(cand, ref, int(metric.split("-")[2]), table)
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return out


def evaluate_system(
    dataset: Sequence[DatasetEntry],
    summarizer: Callable[[DatasetEntry, int], str],
    metrics: Iterable[str] = ("lexical",),
    table: EmbeddingTable | None = None,
    ci_level: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> SystemScores:
    """Score one summarizer over a dataset.

    The summary budget k for each document is the sentence count of its
    gold summary. Per-document failures are recorded and excluded from the
    aggregates, which report the corpus mean and a percentile-bootstrap
    confidence interval per metric and statistic.
    """
    metric_names = expand_metric_groups(metrics)
    per_document: dict[str, dict[str, RougeScore]] = {}
    failures: list[str] = []
    for entry in dataset:
        doc_id = entry.document.id
        try:
            k = gold_summary_length(entry.gold)
            candidate = summarizer(entry, k)
            per_document[doc_id] = score_pair(candidate, entry.gold, metric_names, table)
        except Exception as exc:  # noqa: BLE001 - per-document isolation
            failures.append(f"{doc_id}: {exc}")
    aggregates: list[MetricAggregate] = []
    if per_document:
        doc_ids = sorted(per_document)
        for metric in metric_names:
            for statistic in STATISTICS:
                values = [per_document[d][metric].stat(statistic) for d in doc_ids]
                low, high = bootstrap_ci(values, level=ci_level, resamples=resamples, seed=seed)
                aggregates.append(
                    MetricAggregate(
                        metric=metric,
                        statistic=statistic,
                        mean=float(np.mean(values)),
                        ci_low=low,
                        ci_high=high,
                    )
                )
    return SystemScores(
        per_document=per_document, aggregates=aggregates, failures=failures
    )
