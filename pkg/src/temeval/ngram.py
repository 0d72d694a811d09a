"""Deterministic n-gram baselines: ROUGE-L and single-reference CIDEr.

Both metrics share one tokenizer so casing/punctuation of the raw input can
never move a score. CIDEr here is the plain TF-IDF cosine form averaged over
n-gram orders 1..4 with a single reference per item; no length penalty.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

NGRAM_ORDERS = (1, 2, 3, 4)


class EmptyCorpus(Exception):
    """Raised when an IDF table is requested for an empty reference corpus."""


def tokenize(text: str) -> list[str]:
    """Lowercase, map every non-alphanumeric character to a space, split."""
    lowered = text.lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return cleaned.split()


def ngram_counts(tokens: list[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


@dataclass
class IdfTable:
    """IDF weights per n-gram order; built once from the reference corpus.

    N-grams never seen in the corpus are scored as if their document
    frequency were 1, i.e. they get the maximum weight log(corpus_size).
    """

    corpus_size: int
    weights: dict[int, dict[tuple, float]] = field(default_factory=dict)

    def idf(self, order: int, gram: tuple) -> float:
        table = self.weights.get(order, {})
        if gram in table:
            return table[gram]
        return math.log(self.corpus_size)


def build_idf(reference_corpus: list[list[str]]) -> IdfTable:
    """Document-frequency IDF over tokenized reference documents.

    idf(g) = log(corpus_size / df(g)) where df counts documents containing
    the n-gram at least once.
    """
    if not reference_corpus:
        raise EmptyCorpus("reference corpus must contain at least one document")
    corpus_size = len(reference_corpus)
    weights: dict[int, dict[tuple, float]] = {order: {} for order in NGRAM_ORDERS}
    doc_freq: dict[int, Counter] = {order: Counter() for order in NGRAM_ORDERS}
    for tokens in reference_corpus:
        for order in NGRAM_ORDERS:
            for gram in set(ngram_counts(tokens, order)):
                doc_freq[order][gram] += 1
    for order in NGRAM_ORDERS:
        for gram, df in doc_freq[order].items():
            weights[order][gram] = math.log(corpus_size / df)
    return IdfTable(corpus_size=corpus_size, weights=weights)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[len(b)]


def rouge_l(gen: list[str], ref: list[str], beta: float = 1.2) -> float:
    """LCS-based F-score: F = (1 + beta^2) P R / (R + beta^2 P).

    P and R are the token LCS length over the generated / reference lengths;
    every zero denominator yields 0.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    length = _lcs_length(gen, ref)
    precision = length / len(gen) if gen else 0.0
    recall = length / len(ref) if ref else 0.0
    denominator = recall + beta * beta * precision
    if denominator == 0.0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denominator


def _tfidf_vector(tokens: list[str], order: int, idf: IdfTable) -> dict[tuple, float]:
    return {
        gram: count * idf.idf(order, gram)
        for gram, count in ngram_counts(tokens, order).items()
    }


def _cosine(u: dict[tuple, float], v: dict[tuple, float]) -> float:
    norm_u = math.sqrt(sum(w * w for w in u.values()))
    norm_v = math.sqrt(sum(w * w for w in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    dot = sum(w * v[gram] for gram, w in u.items() if gram in v)
    return dot / (norm_u * norm_v)


def cider(gen: list[str], ref: list[str], idf: IdfTable, scale: float = 1.0) -> float:
    """Mean over n = 1..4 of the cosine between IDF-weighted n-gram count
    vectors of the two token sequences, times ``scale``.

    Orders where either vector is all-zero (too-short text, or every gram
    weighted 0) contribute 0 to the mean. Single-reference form.
    """
    total = 0.0
    for order in NGRAM_ORDERS:
        total += _cosine(
            _tfidf_vector(gen, order, idf), _tfidf_vector(ref, order, idf)
        )
    return scale * total / len(NGRAM_ORDERS)
