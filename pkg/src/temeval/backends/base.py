"""Contract for the language-understanding steps of the evaluation pipeline.

Everything that needs semantic judgment — pulling facial-behavior events out
of a caption, labeling event pairs, restyling text, judge scoring — goes
through a SemanticBackend. Two implementations ship: a fully deterministic
offline mock and an HTTP gateway adapter.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

from ..events import EventSequence, MatchMatrix, SourceRole


class BackendError(Exception):
    """Base class for semantic-backend failures."""


class BackendUnavailable(BackendError):
    """The backing service could not be reached or kept failing."""


class MalformedBackendReply(BackendError):
    """Structured reply stayed unparseable after one repair attempt."""


class OutOfRangeScore(BackendError):
    """Judge reply violated the 1..5 range after one re-ask."""


@dataclass(frozen=True)
class JudgeScores:
    """Four 1-to-5 quality ratings of a generated caption."""

    correctness: float
    detail: float
    context: float
    temporal: float

    def __post_init__(self) -> None:
        for name, value in self.as_dict().items():
            if not 1.0 <= value <= 5.0:
                raise ValueError(f"{name} must be in [1, 5], got {value}")

    def as_dict(self) -> dict[str, float]:
        return {
            "correctness": self.correctness,
            "detail": self.detail,
            "context": self.context,
            "temporal": self.temporal,
        }


class SemanticBackend(abc.ABC):
    """Interface over the judgment-dependent pipeline steps.

    Implementations must be safe for concurrent callers and deterministic
    given identical inputs and identical cached state.
    """

    name: str = "abstract"

    @abc.abstractmethod
    def extract_events(
        self, text: str, role: SourceRole = SourceRole.GENERATED
    ) -> EventSequence:
        """Facial-behavior events of ``text`` in appearance order."""

    @abc.abstractmethod
    def classify_relations(
        self, gen: EventSequence, ref: EventSequence
    ) -> MatchMatrix:
        """Pairwise relation labels, shape (len(gen), len(ref))."""

    @abc.abstractmethod
    def align_format(self, generated: str, reference: str) -> str:
        """Generated text restyled to match the reference's format."""

    @abc.abstractmethod
    def judge_scores(self, generated: str, reference: str) -> JudgeScores:
        """Four 1..5 ratings of the generated text against the reference."""

    def template_versions(self) -> dict[str, str]:
        """Prompt-template versions in play, for run metadata."""
        return {}
