"""Command-line front end: summarize a document, evaluate systems, benchmark.

Configuration comes from flags, falling back to a flat ``key = value``
config file (``--config`` or the FWSUM_CONFIG environment variable), then
to built-in defaults. Exit codes distinguish bad input (2), configuration
errors (3), and solver failures (4).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    DatasetEntry,
    Document,
    TokenizeOptions,
    build_feature_matrix,
    document_from_text,
    load_dataset,
    load_stopwords,
)
from .errors import ConfigError, FwsumError, InputError, SolverError
from .evaluation import SystemScores, evaluate_system
from .kernel import (
    Bm25Params,
    EmbeddingTable,
    Kernel,
    bm25_kernel,
    cosine_kernel,
    embedding_kernel,
    load_word_embeddings,
    load_word_frequencies,
    sif_embed,
)
from .solver import SolverConfig, solve
from .textrank import textrank_summarize

KERNELS = ("bm25", "cosine", "sif")
METHODS = ("fwsum-bm25", "fwsum-cosine", "fwsum-sif", "textrank", "gold-echo")
METRIC_GROUPS = ("lexical", "semantic")
CONFIG_ENV_VAR = "FWSUM_CONFIG"


@dataclass
class RunConfig:
    """Resolved pipeline settings shared by the subcommands."""

    kernel: str = "bm25"
    k: int | None = None
    k_percent: float | None = None
    beta: float | None = None
    eps: float | None = None
    step_rule: str = "line_search"
    respect_nonnegativity: bool = False
    embeddings: str | None = None
    frequencies: str | None = None
    stopwords: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.k_percent is not None and not 0.0 < self.k_percent <= 100.0:
            raise ConfigError("k-percent must lie in (0, 100]")
        if self.k is not None and self.k_percent is not None:
            raise ConfigError("set only one of k and k-percent")

    def require_length(self) -> None:
        if self.k is None and self.k_percent is None:
            raise ConfigError("exactly one of k and k-percent is required")

    def resolve_k(self, n: int) -> int:
        if self.k is not None:
            return self.k
        assert self.k_percent is not None
        return max(1, math.ceil(self.k_percent / 100.0 * n))

    def tokenize_options(self) -> TokenizeOptions:
        stop = load_stopwords(self.stopwords) if self.stopwords else None
        return TokenizeOptions(lowercase=True, strip_punct=True, stopwords=stop)

    def solver_config(self, k: int) -> SolverConfig:
        try:
            return SolverConfig(
                k=k,
                beta=self.beta,
                eps=self.eps,
                step_rule=self.step_rule,
                respect_nonnegativity=self.respect_nonnegativity,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_embedding_table(config: RunConfig) -> EmbeddingTable:
    if not config.embeddings:
        raise ConfigError("this run needs --embeddings (word2vec text format)")
    table = load_word_embeddings(config.embeddings)
    if config.frequencies:
        table.frequencies = load_word_frequencies(config.frequencies)
    return table


def build_kernel(
    document: Document,
    kernel_name: str,
    config: RunConfig,
    table: EmbeddingTable | None = None,
) -> Kernel:
    if kernel_name == "bm25":
        return bm25_kernel(document, Bm25Params())
    if kernel_name == "cosine":
        return cosine_kernel(build_feature_matrix(document, "tfidf", normalize=True))
    if kernel_name == "sif":
        if table is None:
            table = load_embedding_table(config)
        return embedding_kernel(sif_embed(document, table))
    raise ConfigError(f"unknown kernel {kernel_name!r}")


def summarize_document(
    document: Document,
    config: RunConfig,
    kernel_name: str | None = None,
    table: EmbeddingTable | None = None,
):
    """Build the kernel, solve, and return the solver result."""
    name = kernel_name or config.kernel
    kernel = build_kernel(document, name, config, table)
    solver_config = config.solver_config(config.resolve_k(document.n))
    try:
        return solve(kernel, solver_config)
    except SolverError:
        raise
    except Exception as exc:  # pragma: no cover - defensive mapping
        raise SolverError(str(exc)) from exc


def _read_document(path: str, options: TokenizeOptions) -> Document:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read input file {path}: {exc}") from exc
    return document_from_text(Path(path).stem, text, options)


def cmd_summarize(args: argparse.Namespace, config: RunConfig) -> int:
    config.require_length()
    if config.kernel == "sif" and not config.embeddings:
        raise ConfigError("kernel 'sif' requires --embeddings")
    document = _read_document(args.input, config.tokenize_options())
    result = summarize_document(document, config)
    k = config.resolve_k(document.n)
    if len(result.selected) < k:
        print(
            f"note: solver converged with {len(result.selected)} of {k} "
            f"requested sentences (exit: {result.exit_reason})",
            file=sys.stderr,
        )
    for index in result.selected:
        print(document.sentences[index].raw)
    if args.out:
        Path(args.out).write_text(result.to_jsonl(), encoding="utf-8")
    return 0


def make_summarizer(method: str, config: RunConfig, table: EmbeddingTable | None):
    """Callable (entry, k) -> summary text for one method name."""
    if method == "gold-echo":
        return lambda entry, k: entry.gold
    if method == "textrank":
        def run_textrank(entry: DatasetEntry, k: int) -> str:
            picked = textrank_summarize(entry.document, k)
            return " ".join(entry.document.sentences[i].raw for i in picked)

        return run_textrank
    if method.startswith("fwsum-"):
        kernel_name = method.removeprefix("fwsum-")
        if kernel_name not in KERNELS:
            raise ConfigError(f"unknown method {method!r}")

        def run_fwsum(entry: DatasetEntry, k: int) -> str:
            kernel = build_kernel(entry.document, kernel_name, config, table)
            result = solve(kernel, config.solver_config(k))
            return " ".join(entry.document.sentences[i].raw for i in result.selected)

        return run_fwsum
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def _parse_list(raw: str | None, valid: tuple[str, ...], default: list[str]) -> list[str]:
    if raw is None:
        return default
    items = [item.strip() for item in raw.split(",") if item.strip()]
    for item in items:
        if item not in valid:
            raise ConfigError(f"unknown value {item!r}; expected one of {valid}")
    if not items:
        raise ConfigError("empty list")
    return items


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    methods = _parse_list(args.methods, METHODS, ["fwsum-bm25", "textrank"])
    metric_groups = _parse_list(args.metrics, METRIC_GROUPS, ["lexical"])
    entries, diagnostics = load_dataset(args.root, config.tokenize_options())
    for diag in diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    table: EmbeddingTable | None = None
    if "semantic" in metric_groups or any(m == "fwsum-sif" for m in methods):
        table = load_embedding_table(config)
    dataset_name = Path(args.root).name
    rows: list[list[str]] = []
    for method in methods:
        summarizer = make_summarizer(method, config, table)
        scores = evaluate_system(
            entries,
            summarizer,
            metrics=metric_groups,
            table=table,
            seed=config.seed,
        )
        for failure in scores.failures:
            print(f"warning: {method}: {failure}", file=sys.stderr)
        rows.extend(_score_rows(method, dataset_name, scores))
    _write_csv(
        args.out,
        ["method", "dataset", "metric", "statistic", "value", "ci_low", "ci_high"],
        rows,
    )
    _print_table(rows)
    return 0


def _score_rows(method: str, dataset: str, scores: SystemScores) -> list[list[str]]:
    rows = []
    for agg in scores.aggregates:
        rows.append(
            [
                method,
                dataset,
                agg.metric,
                agg.statistic,
                f"{agg.mean:.6f}",
                f"{agg.ci_low:.6f}",
                f"{agg.ci_high:.6f}",
            ]
        )
    return rows


def _print_table(rows: list[list[str]]) -> None:
    if not rows:
        print("no scores")
        return
    header = ["method", "dataset", "metric", "stat", "mean", "ci_low", "ci_high"]
    table = [header] + [[r[0], r[1], r[2], r[3], r[4], r[5], r[6]] for r in rows]
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


def _write_csv(out: str | None, header: list[str], rows: list[list[str]]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)


def _parse_percent_list(raw: str | None) -> list[float]:
    if raw is None:
        raise ConfigError("bench requires --k-percent (comma-separated list allowed)")
    try:
        values = [float(p) for p in raw.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --k-percent list {raw!r}") from exc
    if not values:
        raise ConfigError("empty --k-percent list")
    for v in values:
        if not 0.0 <= v <= 100.0:
            raise ConfigError("bench k-percent values must lie in [0, 100]")
    return values


def cmd_bench(args: argparse.Namespace, config: RunConfig) -> int:
    methods = _parse_list(args.methods, METHODS, ["fwsum-bm25", "textrank"])
    percents = _parse_percent_list(args.k_percent)
    repeats = args.repeats if args.repeats is not None else 3
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    document = _read_document(args.input, config.tokenize_options())
    table: EmbeddingTable | None = None
    if any(m == "fwsum-sif" for m in methods):
        table = load_embedding_table(config)
    rows: list[list[str]] = []
    for method in methods:
        for percent in percents:
            k = math.ceil(percent / 100.0 * document.n)
            timings = []
            for _ in range(repeats):
                started = time.perf_counter()
                if k >= 1:
                    _run_timed(method, document, k, config, table)
                timings.append(time.perf_counter() - started)
            rows.append([method, f"{percent:g}", f"{statistics.median(timings):.6f}"])
    _write_csv(args.out, ["method", "k_percent", "seconds"], rows)
    return 0


def _run_timed(
    method: str,
    document: Document,
    k: int,
    config: RunConfig,
    table: EmbeddingTable | None,
) -> None:
    """One timed summarization run, kernel construction included."""
    if method == "textrank":
        textrank_summarize(document, k)
        return
    if method == "gold-echo":
        return
    kernel_name = method.removeprefix("fwsum-")
    kernel = build_kernel(document, kernel_name, config, table)
    solve(kernel, config.solver_config(k))


def _load_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _pick(args: argparse.Namespace, cfg: dict[str, str], key: str):
    """Flag value if given, else config-file value, else None."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return cfg.get(key)


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    cfg = _load_config_file(config_path) if config_path else {}

    def num(key: str, conv):
        raw = _pick(args, cfg, key)
        if raw is None:
            return None
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc

    nonneg = _pick(args, cfg, "nonneg")
    if isinstance(nonneg, str):
        nonneg = _parse_bool(nonneg)
    # bench interprets k-percent itself as a list; keep it out of RunConfig there
    k_percent = None
    if args.command != "bench":
        k_percent = num("k_percent", float)
    return RunConfig(
        kernel=_pick(args, cfg, "kernel") or "bm25",
        k=num("k", int),
        k_percent=k_percent,
        beta=num("beta", float),
        eps=num("eps", float),
        step_rule=_pick(args, cfg, "step_rule") or "line_search",
        respect_nonnegativity=bool(nonneg) if nonneg is not None else False,
        embeddings=_pick(args, cfg, "embeddings"),
        frequencies=_pick(args, cfg, "frequencies"),
        stopwords=_pick(args, cfg, "stopwords"),
        seed=num("seed", int) or 0,
    )


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernel", choices=KERNELS, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--k-percent", dest="k_percent", default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--step-rule", dest="step_rule",
                        choices=("line_search", "decaying"), default=None)
    parser.add_argument("--nonneg", dest="nonneg", action="store_const", const=True,
                        default=None, help="restrict the iterate to non-negative entries")
    parser.add_argument("--embeddings", default=None)
    parser.add_argument("--frequencies", default=None)
    parser.add_argument("--stopwords", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", default=None,
                        help=f"flat key=value config file (or ${CONFIG_ENV_VAR})")
    parser.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fwsum",
        description="Unsupervised extractive summarization via sparse self-reconstruction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sum = sub.add_parser("summarize", help="summarize one document")
    p_sum.add_argument("input")
    _add_common_flags(p_sum)

    p_eval = sub.add_parser("eval", help="score methods against gold summaries")
    p_eval.add_argument("root", help="dataset directory of <id>.doc.txt / <id>.gold.txt")
    p_eval.add_argument("--methods", default=None,
                        help=f"comma-separated subset of {METHODS}")
    p_eval.add_argument("--metrics", default=None,
                        help=f"comma-separated subset of {METRIC_GROUPS}")
    _add_common_flags(p_eval)

    p_bench = sub.add_parser("bench", help="time methods across summary lengths")
    p_bench.add_argument("input")
    p_bench.add_argument("--methods", default=None)
    p_bench.add_argument("--repeats", type=int, default=None)
    _add_common_flags(p_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_run_config(args)
        if args.command == "summarize":
            return cmd_summarize(args, config)
        if args.command == "eval":
            return cmd_eval(args, config)
        if args.command == "bench":
            return cmd_bench(args, config)
        raise ConfigError(f"unknown command {args.command!r}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FwsumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
