"""Domain types for event-level caption comparison.

An event is one atomic facial-movement/expression clause pulled out of a
caption. Event sequences keep appearance order; the pairwise relation grid
between a generated and a reference sequence is what the scoring layer
consumes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class SourceRole(enum.Enum):
    GENERATED = "generated"
    REFERENCE = "reference"


class RelationLabel(enum.Enum):
    """Pairwise relation between one generated and one reference event."""

    SAME_MEANING = "same_meaning"
    OPPOSITE_MEANING = "opposite_meaning"
    NO_RELATION = "no_relation"


@dataclass(frozen=True)
class Event:
    """One normalized event clause and its appearance position (0-based)."""

    ordinal: int
    text: str

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise ValueError(f"ordinal must be >= 0, got {self.ordinal}")
        if not self.text:
            raise ValueError("event text must be non-empty")


@dataclass(frozen=True)
class EventSequence:
    """Events of one caption, ordered exactly as the caption mentions them."""

    events: tuple[Event, ...]
    source_role: SourceRole

    def __post_init__(self) -> None:
        for position, event in enumerate(self.events):
            if event.ordinal != position:
                raise ValueError(
                    f"ordinals must be contiguous from 0 in appearance order; "
                    f"position {position} holds ordinal {event.ordinal}"
                )

    @classmethod
    def from_texts(cls, texts: list[str], source_role: SourceRole) -> EventSequence:
        events = tuple(Event(i, text) for i, text in enumerate(texts))
        return cls(events=events, source_role=source_role)

    @property
    def texts(self) -> list[str]:
        return [event.text for event in self.events]

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class MatchMatrix:
    """m x n grid of relation labels; rows = generated events, cols = reference."""

    labels: tuple[tuple[RelationLabel, ...], ...]
    m: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self) -> None:
        m = len(self.labels)
        n = len(self.labels[0]) if m else 0
        for row in self.labels:
            if len(row) != n:
                raise ValueError("all rows of a MatchMatrix must have equal length")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_rows(cls, rows: list[list[RelationLabel]]) -> MatchMatrix:
        return cls(labels=tuple(tuple(row) for row in rows))

    @classmethod
    def empty(cls) -> MatchMatrix:
        return cls(labels=())

    def same(self, i: int, j: int) -> bool:
        return self.labels[i][j] is RelationLabel.SAME_MEANING
