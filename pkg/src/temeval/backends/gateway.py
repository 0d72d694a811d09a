"""Semantic backend speaking to a chat-completion server via the gateway.

Replies are requested as small delimited blocks so they can be parsed
mechanically. Any reply that fails to parse triggers exactly one repair
re-ask (quoting the bad reply back); a second failure raises a typed error
for the affected item only. Relation classification is batched one request
per generated event with pairwise cell semantics.

The prompt texts live in ``temeval/templates``; they are this toolkit's own
wording, versioned in the filename, and their (name, version) is part of
the gateway cache key, so editing a template invalidates only its own
cached replies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from ..events import EventSequence, MatchMatrix, RelationLabel, SourceRole
from ..gateway import GatewayClient, GatewayConfig, GatewayError
from .base import (
    BackendUnavailable,
    JudgeScores,
    MalformedBackendReply,
    OutOfRangeScore,
    SemanticBackend,
)

_TEMPLATE_FILE = re.compile(r"^(?P<name>[a-z_]+)\.v(?P<version>\d+)\.txt$")

_LABELS = {
    "SAME_MEANING": RelationLabel.SAME_MEANING,
    "OPPOSITE_MEANING": RelationLabel.OPPOSITE_MEANING,
    "NO_RELATION": RelationLabel.NO_RELATION,
}

_REPAIR_PREAMBLE = (
    "Your previous reply could not be parsed. Answer again, following the "
    "required reply format exactly, with no extra commentary.\n"
    "Previous reply:\n{previous}\n\n---\n\n{original}"
)


@dataclass(frozen=True)
class PromptTemplate:
    """Versioned prompt text with named placeholders."""

    name: str
    version: str
    text: str

    def fill(self, **fields: str) -> str:
        return self.text.format(**fields)


def load_templates() -> dict[str, PromptTemplate]:
    """Read the packaged template files; highest version per name wins."""
    templates: dict[str, PromptTemplate] = {}
    root = resources.files("temeval") / "templates"
    for entry in sorted(root.iterdir(), key=lambda item: item.name):
        match = _TEMPLATE_FILE.match(entry.name)
        if not match:
            continue
        name, version = match.group("name"), match.group("version")
        current = templates.get(name)
        if current is None or int(version) > int(current.version):
            templates[name] = PromptTemplate(
                name=name, version=version, text=entry.read_text(encoding="utf-8")
            )
    return templates


class GatewayBackend(SemanticBackend):
    """All four capabilities routed through one chat-completion endpoint."""

    def __init__(
        self,
        config: GatewayConfig,
        client: GatewayClient | None = None,
    ):
        self.config = config
        self._client = client or GatewayClient(config)
        self._templates = load_templates()
        self.name = f"gateway:{config.model_name}"

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> GatewayBackend:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def template_versions(self) -> dict[str, str]:
        return {t.name: t.version for t in self._templates.values()}

    # -- capabilities -----------------------------------------------------

    def extract_events(
        self, text: str, role: SourceRole = SourceRole.GENERATED
    ) -> EventSequence:
        if not text.strip():
            return EventSequence.from_texts([], role)
        reply = self._ask_with_repair(
            "extract_events", {"text": text}, _parse_event_block
        )
        return EventSequence.from_texts(reply, role)

    def classify_relations(
        self, gen: EventSequence, ref: EventSequence
    ) -> MatchMatrix:
        if len(gen) == 0 or len(ref) == 0:
            return MatchMatrix.from_rows([[] for _ in gen.events])
        numbered = "\n".join(
            f"{j + 1}. {event.text}" for j, event in enumerate(ref.events)
        )
        rows = []
        for gen_event in gen.events:
            fields = {"generated_event": gen_event.text, "reference_events": numbered}
            labels = self._ask_with_repair(
                "classify_relations",
                fields,
                lambda reply: _parse_label_block(reply, len(ref)),
            )
            rows.append(labels)
        return MatchMatrix.from_rows(rows)

    def align_format(self, generated: str, reference: str) -> str:
        if not generated:
            return generated
        template = self._templates["align_format"]
        prompt = template.fill(generated=generated, reference=reference)
        return self._complete(template, prompt)

    def judge_scores(self, generated: str, reference: str) -> JudgeScores:
        values = self._ask_with_repair(
            "judge_scores",
            {"generated": generated, "reference": reference},
            _parse_judge_line,
        )
        return JudgeScores(*values)

    # -- plumbing ----------------------------------------------------------

    def _complete(self, template: PromptTemplate, prompt: str) -> str:
        try:
            return self._client.complete(
                prompt, template_name=template.name, template_version=template.version
            )
        except GatewayError as exc:
            raise BackendUnavailable(str(exc)) from exc

    def _ask_with_repair(self, template_name: str, fields: dict[str, str], parse):
        """Send the filled template; on a bad reply re-ask once, then raise."""
        template = self._templates[template_name]
        prompt = template.fill(**fields)
        reply = self._complete(template, prompt)
        try:
            return parse(reply)
        except _ParseFailure as first:
            repair_prompt = _REPAIR_PREAMBLE.format(previous=reply, original=prompt)
            second_reply = self._complete(template, repair_prompt)
            try:
                return parse(second_reply)
            except _RangeFailure as second:
                raise OutOfRangeScore(
                    f"{template_name} reply out of range after re-ask: {second}"
                ) from first
            except _ParseFailure as second:
                raise MalformedBackendReply(
                    f"{template_name} reply unparseable after repair: {second}"
                ) from first


class _ParseFailure(Exception):
    pass


class _RangeFailure(_ParseFailure):
    pass


def _block_lines(reply: str, begin: str, end: str) -> list[str]:
    lines = reply.splitlines()
    try:
        start = next(i for i, line in enumerate(lines) if line.strip() == begin)
        stop = next(
            i for i, line in enumerate(lines) if line.strip() == end and i > start
        )
    except StopIteration:
        raise _ParseFailure(f"missing {begin}/{end} markers") from None
    return [line.strip() for line in lines[start + 1 : stop] if line.strip()]


def _parse_event_block(reply: str) -> list[str]:
    events = []
    for line in _block_lines(reply, "BEGIN_EVENTS", "END_EVENTS"):
        text = re.sub(r"^(?:[-*•]|\d+[.)])\s*", "", line).strip()
        if text:
            events.append(text)
    return events


def _parse_label_block(reply: str, expected: int) -> list[RelationLabel]:
    found: dict[int, RelationLabel] = {}
    for line in _block_lines(reply, "BEGIN_LABELS", "END_LABELS"):
        match = re.match(
            r"^(\d+)\s*[:.)\-]\s*(SAME_MEANING|OPPOSITE_MEANING|NO_RELATION)\s*$",
            line,
        )
        if not match:
            raise _ParseFailure(f"bad label line: {line!r}")
        index = int(match.group(1))
        if index in found:
            raise _ParseFailure(f"duplicate label for reference event {index}")
        found[index] = _LABELS[match.group(2)]
    if sorted(found) != list(range(1, expected + 1)):
        raise _ParseFailure(
            f"expected labels for events 1..{expected}, got {sorted(found)}"
        )
    return [found[index] for index in range(1, expected + 1)]


def _parse_judge_line(reply: str) -> tuple[float, float, float, float]:
    values: tuple[float, float, float, float] | None = None
    for line in reply.splitlines():
        parts = [part.strip() for part in line.split(",")]
        if len(parts) != 4:
            continue
        try:
            a, b, c, d = (float(part) for part in parts)
        except ValueError:
            continue
        values = (a, b, c, d)
        break
    if values is None:
        raise _ParseFailure("no line with four comma-separated numbers")
    out_of_range = [v for v in values if not 1.0 <= v <= 5.0]
    if out_of_range:
        raise _RangeFailure(f"value(s) outside [1, 5]: {out_of_range}")
    return values
