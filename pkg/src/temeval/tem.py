"""Temporal event matching scores over a classified relation grid.

Two complementary views of the same m x n grid:

* an order-aware score: the longest chain of SAME_MEANING cells that is
  strictly increasing in both the generated and the reference index,
  normalized by the number of generated events;
* an order-blind event F-measure: precision counts generated events with at
  least one SAME_MEANING partner, recall counts reference events likewise.

The combined score is the arithmetic mean of the two. OPPOSITE_MEANING is
recorded by the relation layer but scores identically to NO_RELATION here;
no penalty is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

from .events import MatchMatrix


@dataclass(frozen=True)
class TemScore:
    lcs_length: int
    lcs_score: float
    precision: float
    recall: float
    f_measure: float
    combined: float


def lcs_match_length(match: MatchMatrix) -> int:
    """Length of the longest strictly-increasing chain of SAME_MEANING cells.

    Classic LCS dynamic program where the equality test is "the cell is
    labeled SAME_MEANING". The recurrence stays exact for an arbitrary
    relation grid: at most one chain pair can use the last row/column, so
    taking the diagonal on a match never loses against skipping it.
    """
    m, n = match.m, match.n
    if m == 0 or n == 0:
        return 0
    prev = [0] * (n + 1)
    for i in range(1, m + 1):
        curr = [0] * (n + 1)
        for j in range(1, n + 1):
            if match.same(i - 1, j - 1):
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[n]


def lcs_score(match: MatchMatrix) -> float:
    """Chain length normalized by the generated-event count; 0 when m == 0."""
    if match.m == 0:
        return 0.0
    return lcs_match_length(match) / match.m


def event_f_measure(match: MatchMatrix) -> tuple[float, float, float]:
    """(precision, recall, f) of SAME_MEANING coverage, order-insensitive.

    Zero-denominator ratios are defined as 0, so an empty generated or
    reference side scores 0 rather than raising.
    """
    matched_rows = sum(
        1 for i in range(match.m) if any(match.same(i, j) for j in range(match.n))
    )
    matched_cols = sum(
        1 for j in range(match.n) if any(match.same(i, j) for i in range(match.m))
    )
    precision = matched_rows / match.m if match.m else 0.0
    recall = matched_cols / match.n if match.n else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    f_measure = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f_measure


def tem_score(match: MatchMatrix) -> TemScore:
    """Full score bundle; combined = (lcs_score + f_measure) / 2."""
    length = lcs_match_length(match)
    lcs = lcs_score(match)
    precision, recall, f_measure = event_f_measure(match)
    return TemScore(
        lcs_length=length,
        lcs_score=lcs,
        precision=precision,
        recall=recall,
        f_measure=f_measure,
        combined=(lcs + f_measure) / 2.0,
    )
