"""Python bindings for the lexsum toolkit."""

from ._lexsum import (
    LexsumError,
    __version__,
    chunk_document,
    chunk_spans,
    coverage_density,
    extractive_fragments,
    mann_whitney,
    next_token_samples,
    nfkc,
    oracle_labels,
    reassemble,
    reconstruct,
    rouge2,
    rougeL,
    run_cli,
    span_corrupt,
    split_sentences,
    stub_bertscore,
    stub_neprec,
    stub_summac,
    summary_budget,
    tokenize,
    wilcoxon,
)

__all__ = [
    "LexsumError",
    "__version__",
    "chunk_document",
    "chunk_spans",
    "coverage_density",
    "extractive_fragments",
    "mann_whitney",
    "next_token_samples",
    "nfkc",
    "oracle_labels",
    "reassemble",
    "reconstruct",
    "rouge2",
    "rougeL",
    "run_cli",
    "span_corrupt",
    "split_sentences",
    "stub_bertscore",
    "stub_neprec",
    "stub_summac",
    "summary_budget",
    "tokenize",
    "wilcoxon",
]
