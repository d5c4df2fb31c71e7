"""Loading, validation, and resplitting of line-delimited event-annotation corpora.

The corpus format is one UTF-8 JSON record per line with fields ``text``,
``id`` and ``event_list``; each event carries ``event_type``, ``trigger``,
``trigger_start_index`` and ``arguments`` (``role``, ``argument``,
``argument_start_index``). All offsets are Unicode code points into ``text``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, SchemaError, SpanValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArgumentRecord:
    """One argument mention: its role, surface form, and character offset."""

    role: str
    text: str
    start: int


@dataclass(frozen=True)
class EventRecord:
    """One event mention: type, trigger span, and argument mentions."""

    event_type: str
    trigger_text: str
    trigger_start: int
    arguments: tuple[ArgumentRecord, ...] = ()


@dataclass(frozen=True)
class RawSentence:
    """A sentence with its gold event annotations (possibly none)."""

    id: str
    text: str
    events: tuple[EventRecord, ...] = ()


class EventSchema:
    """Maps each event type to its ordered list of permitted role names."""

    def __init__(self, roles_by_type: Mapping[str, Sequence[str]]):
        for event_type, roles in roles_by_type.items():
            if not roles:
                raise SchemaError(f"event type {event_type!r} has an empty role list")
        self._roles = {t: tuple(roles) for t, roles in roles_by_type.items()}

    def __contains__(self, event_type: str) -> bool:
        return event_type in self._roles

    def __len__(self) -> int:
        return len(self._roles)

    @property
    def event_types(self) -> tuple[str, ...]:
        return tuple(self._roles)

    @property
    def role_names(self) -> tuple[str, ...]:
        """All distinct role names across event types, sorted."""
        return tuple(sorted({r for roles in self._roles.values() for r in roles}))

    def roles_for(self, event_type: str) -> tuple[str, ...]:
        try:
            return self._roles[event_type]
        except KeyError:
            raise SchemaError(f"unknown event type {event_type!r}") from None

    def permits(self, event_type: str, role: str) -> bool:
        return role in self._roles.get(event_type, ())


@dataclass
class DatasetSplit:
    train: list[RawSentence] = field(default_factory=list)
    validation: list[RawSentence] = field(default_factory=list)
    test: list[RawSentence] = field(default_factory=list)


def _check_span(sentence_id: str, text: str, span_text: str, start: int, what: str) -> None:
    if not isinstance(start, int) or start < 0 or start + len(span_text) > len(text):
        raise SpanValidationError(
            f"sentence {sentence_id!r}: {what} {span_text!r} has offset {start} "
            f"outside the sentence (length {len(text)})"
        )
    sliced = text[start : start + len(span_text)]
    if sliced != span_text:
        raise SpanValidationError(
            f"sentence {sentence_id!r}: {what} {span_text!r} at offset {start} "
            f"does not match the sentence slice {sliced!r}"
        )


def parse_duee_record(
    line: str,
    line_number: int | None = None,
    schema: EventSchema | None = None,
) -> RawSentence:
    """Parse one corpus line into a validated :class:`RawSentence`.

    Every trigger and argument offset is checked against the sentence text;
    a mismatch raises :class:`SpanValidationError` naming the bad span. When
    ``schema`` is given, event types and role names are checked against it.
    Duplicate events (same type and trigger span) are dropped with a warning.
    """
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line_number) from exc
    if not isinstance(raw, dict):
        raise ParseError("record is not a JSON object", line_number)

    text = raw.get("text")
    sentence_id = raw.get("id")
    if not isinstance(text, str) or not text:
        raise ParseError("missing or empty 'text' field", line_number)
    if not isinstance(sentence_id, str) or not sentence_id:
        raise ParseError("missing or empty 'id' field", line_number)

    events: list[EventRecord] = []
    seen: set[tuple[str, str, int]] = set()
    for ev in raw.get("event_list") or []:
        try:
            event_type = ev["event_type"]
            trigger = ev["trigger"]
            trigger_start = ev["trigger_start_index"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"event record missing field: {exc}", line_number) from exc
        _check_span(sentence_id, text, trigger, trigger_start, "trigger")
        if schema is not None and event_type not in schema:
            raise SchemaError(
                f"sentence {sentence_id!r}: event type {event_type!r} not in schema"
            )

        key = (event_type, trigger, trigger_start)
        if key in seen:
            logger.warning(
                "sentence %r: duplicate event %s/%r dropped", sentence_id, event_type, trigger
            )
            continue
        seen.add(key)

        arguments = []
        for arg in ev.get("arguments") or []:
            try:
                role = arg["role"]
                arg_text = arg["argument"]
                arg_start = arg["argument_start_index"]
            except (KeyError, TypeError) as exc:
                raise ParseError(f"argument record missing field: {exc}", line_number) from exc
            _check_span(sentence_id, text, arg_text, arg_start, f"argument ({role})")
            if schema is not None and not schema.permits(event_type, role):
                raise SchemaError(
                    f"sentence {sentence_id!r}: role {role!r} not permitted "
                    f"for event type {event_type!r}"
                )
            arguments.append(ArgumentRecord(role=role, text=arg_text, start=arg_start))

        events.append(
            EventRecord(
                event_type=event_type,
                trigger_text=trigger,
                trigger_start=trigger_start,
                arguments=tuple(arguments),
            )
        )
    return RawSentence(id=sentence_id, text=text, events=tuple(events))


def load_sentences(path: str | Path, schema: EventSchema | None = None) -> list[RawSentence]:
    """Load a corpus file, one record per non-blank line, ids unique."""
    sentences: list[RawSentence] = []
    ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            sentence = parse_duee_record(line, line_number=line_number, schema=schema)
            if sentence.id in ids:
                raise ParseError(f"duplicate sentence id {sentence.id!r}", line_number)
            ids.add(sentence.id)
            sentences.append(sentence)
    return sentences


def load_schema(path: str | Path) -> EventSchema:
    """Load the event schema file (one JSON object per line, ``event_type`` + ``role_list``)."""
    roles_by_type: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                event_type = raw["event_type"]
                role_list = [entry["role"] for entry in raw["role_list"]]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"invalid schema line: {exc}", line_number) from exc
            if event_type in roles_by_type:
                raise SchemaError(f"duplicate event type {event_type!r} (line {line_number})")
            roles_by_type[event_type] = role_list
    schema = EventSchema(roles_by_type)
    logger.info("loaded schema with %d event types", len(schema))
    if len(schema) != 65:
        logger.warning("schema has %d event types, the reference release has 65", len(schema))
    return schema


def resplit_dev(dev: Sequence[RawSentence]) -> tuple[list[RawSentence], list[RawSentence]]:
    """Split the development set into validation and test parts, in file order.

    A 1500-sentence input yields (500, 1000). Other lengths are accepted with
    a warning and split 1/3 (rounded down) vs the remainder. Deterministic:
    the first part is always the leading records in input order.
    """
    if len(dev) != 1500:
        logger.warning("development set has %d sentences, expected 1500", len(dev))
    n_validation = len(dev) // 3
    return list(dev[:n_validation]), list(dev[n_validation:])


def iter_gold_spans(sentence: RawSentence, subtask: str) -> Iterable[tuple[str, str, int]]:
    """Yield (class, span text, start) gold spans for one subtask.

    Trigger spans are classed by event type, argument spans by role name.
    """
    if subtask == "trigger":
        for event in sentence.events:
            yield event.event_type, event.trigger_text, event.trigger_start
    elif subtask == "role":
        for event in sentence.events:
            for arg in event.arguments:
                yield arg.role, arg.text, arg.start
    else:
        raise ValueError(f"unknown subtask {subtask!r}, expected 'trigger' or 'role'")
