"""Deterministic offline backend with small, documented rules.

Meant for tests, golden files, and air-gapped runs: every operation is a
total function of its inputs, identical across platforms and runs.

Rules:

* events: split on sentence terminators (. ! ? ;) and on the connectives
  "then" / "and then"; each clause is normalized through the shared
  tokenizer and dropped if empty.
* relations: tokens are lightly stemmed (strip "ing"/"ed"/trailing "s");
  SAME_MEANING when the Jaccard overlap of the stemmed token sets is
  >= 0.6; otherwise OPPOSITE_MEANING when swapping one antonym-table pair
  lifts the overlap to >= 0.3; otherwise NO_RELATION.
* align: identity (the mock never restyles).
* judge: 1 + 4 * token-set Jaccard on all four dimensions, so identical
  texts score 5 and disjoint texts score 1. A coarse heuristic, not an
  authoritative quality judgment.
"""

from __future__ import annotations

import re

from ..events import EventSequence, MatchMatrix, RelationLabel, SourceRole
from ..ngram import tokenize
from .base import JudgeScores, SemanticBackend

_SENTENCE_SPLIT = re.compile(r"[.!?;]+")
_CONNECTIVE_SPLIT = re.compile(r"\b(?:and\s+then|then)\b", re.IGNORECASE)

ANTONYM_PAIRS = (
    ("smile", "frown"),
    ("open", "close"),
    ("raise", "lower"),
    ("widen", "narrow"),
    ("up", "down"),
)

SAME_THRESHOLD = 0.6
OPPOSITE_THRESHOLD = 0.3


def _stem(token: str) -> str:
    for suffix in ("ing", "ed"):
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


def _stemmed_set(text: str) -> frozenset[str]:
    return frozenset(_stem(token) for token in tokenize(text))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


class MockBackend(SemanticBackend):
    name = "mock"

    RULES_VERSION = "1"

    def extract_events(
        self, text: str, role: SourceRole = SourceRole.GENERATED
    ) -> EventSequence:
        clauses: list[str] = []
        for sentence in _SENTENCE_SPLIT.split(text):
            for clause in _CONNECTIVE_SPLIT.split(sentence):
                tokens = tokenize(clause)
                if tokens:
                    clauses.append(" ".join(tokens))
        return EventSequence.from_texts(clauses, role)

    def classify_relations(
        self, gen: EventSequence, ref: EventSequence
    ) -> MatchMatrix:
        ref_sets = [_stemmed_set(event.text) for event in ref.events]
        rows = []
        for gen_event in gen.events:
            gen_set = _stemmed_set(gen_event.text)
            rows.append([_classify(gen_set, ref_set) for ref_set in ref_sets])
        return MatchMatrix.from_rows(rows)

    def align_format(self, generated: str, reference: str) -> str:
        return generated

    def judge_scores(self, generated: str, reference: str) -> JudgeScores:
        overlap = _jaccard(
            frozenset(tokenize(generated)), frozenset(tokenize(reference))
        )
        score = 1.0 + 4.0 * overlap
        return JudgeScores(
            correctness=score, detail=score, context=score, temporal=score
        )

    def template_versions(self) -> dict[str, str]:
        return {"mock-rules": self.RULES_VERSION}


def _classify(gen_set: frozenset[str], ref_set: frozenset[str]) -> RelationLabel:
    if _jaccard(gen_set, ref_set) >= SAME_THRESHOLD:
        return RelationLabel.SAME_MEANING
    for first, second in ANTONYM_PAIRS:
        for a, b in ((first, second), (second, first)):
            if a in gen_set and b in ref_set:
                swapped = (gen_set - {a}) | {b}
                if _jaccard(swapped, ref_set) >= OPPOSITE_THRESHOLD:
                    return RelationLabel.OPPOSITE_MEANING
    return RelationLabel.NO_RELATION
