"""Pipelined event assembly from the two taggers, plus the ablation harness.

The trigger tagger yields typed trigger spans (type classification is folded
into the labels); the role tagger yields typed role spans; every role span
whose role the schema permits for a trigger's event type is attached to that
event, so one span may serve several events.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .align import EncodedRecord, decode_label_ids
from .corpus import ArgumentRecord, EventRecord, EventSchema, RawSentence
from .metrics import MetricsReport, SubtaskResult, score_dataset
from .model import VARIANT_ORDER, EventTagger, ModelVariant

logger = logging.getLogger(__name__)


def assemble_events(
    trigger_spans: Sequence[tuple[str, int, int]],
    role_spans: Sequence[tuple[str, int, int]],
    text: str,
    schema: EventSchema,
) -> list[EventRecord]:
    """Combine decoded trigger and role spans into structured events.

    With no trigger there is no event, whatever the role spans say.
    """
    events = []
    for event_type, start, end in trigger_spans:
        arguments = tuple(
            ArgumentRecord(role=role, text=text[s:e], start=s)
            for role, s, e in role_spans
            if schema.permits(event_type, role)
        )
        events.append(
            EventRecord(
                event_type=event_type,
                trigger_text=text[start:end],
                trigger_start=start,
                arguments=arguments,
            )
        )
    return events


def predict_events(
    trigger_tagger: EventTagger,
    role_tagger: EventTagger,
    records: Sequence[EncodedRecord],
    schema: EventSchema,
) -> dict[str, list[EventRecord]]:
    """Run both taggers over preprocessed records and assemble events per id."""
    trigger_spans = trigger_tagger.predict_spans(records)
    role_spans = role_tagger.predict_spans(records)
    return {
        record.id: assemble_events(triggers, roles, record.text, schema)
        for record, triggers, roles in zip(records, trigger_spans, role_spans)
    }


def events_from_gold_labels(
    record: EncodedRecord,
    trigger_scheme,
    role_scheme,
    schema: EventSchema,
) -> list[EventRecord]:
    """Assemble events from the record's own gold label sequences.

    This bypasses both models and exercises only decoding plus attachment,
    which is the upper bound of what the pipeline can reconstruct.
    """
    tokens = record.token_sequence
    triggers = decode_label_ids(record.trigger_labels, tokens, trigger_scheme)
    roles = decode_label_ids(record.role_labels, tokens, role_scheme)
    return assemble_events(triggers, roles, record.text, schema)


def events_as_sentences(
    events_by_id: Mapping[str, list[EventRecord]],
    records: Sequence[EncodedRecord],
) -> list[RawSentence]:
    """Wrap predicted events in corpus-format sentences (for files and scoring)."""
    return [
        RawSentence(id=record.id, text=record.text, events=tuple(events_by_id.get(record.id, [])))
        for record in records
    ]


def write_predictions(path: str | Path, sentences: Sequence[RawSentence]) -> None:
    """Write predictions in the corpus line format, symmetric with gold files."""
    with open(path, "w", encoding="utf-8") as handle:
        for sentence in sentences:
            record = {
                "id": sentence.id,
                "text": sentence.text,
                "event_list": [
                    {
                        "event_type": event.event_type,
                        "trigger": event.trigger_text,
                        "trigger_start_index": event.trigger_start,
                        "arguments": [
                            {
                                "role": arg.role,
                                "argument": arg.text,
                                "argument_start_index": arg.start,
                            }
                            for arg in event.arguments
                        ],
                    }
                    for event in sentence.events
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


# -- ablation harness -------------------------------------------------------

REPORT_SECTIONS = ("overall", "trigger", "role")
REPORT_COLUMNS = ("Encoder", "Models", "Precision", "Recall", "F1", "Loss/epoch")


@dataclass
class AblationRow:
    encoder: str
    variant: str
    present: bool
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    loss_per_epoch: float | None = None

    def cells(self) -> list[str]:
        if not self.present:
            return [self.encoder, self.variant, "absent", "absent", "absent", "absent"]
        fmt = lambda v: "-" if v is None else f"{v:.4f}"
        return [
            self.encoder,
            self.variant,
            fmt(self.precision),
            fmt(self.recall),
            fmt(self.f1),
            fmt(self.loss_per_epoch),
        ]


@dataclass
class AblationReport:
    sections: dict[str, list[AblationRow]]

    def to_tsv(self, section: str) -> str:
        lines = ["\t".join(REPORT_COLUMNS)]
        lines += ["\t".join(row.cells()) for row in self.sections[section]]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for section in REPORT_SECTIONS:
            (out_dir / f"{section}.tsv").write_text(self.to_tsv(section), encoding="utf-8")
        with open(out_dir / "report.jsonl", "w", encoding="utf-8") as handle:
            for section in REPORT_SECTIONS:
                for row in self.sections[section]:
                    payload = {"section": section, **row.__dict__}
                    handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def checkpoint_path(root: str | Path, encoder: str, variant: str, subtask: str) -> Path:
    return Path(root) / encoder / variant / subtask


def _subtask_row(encoder: str, variant: str, result: SubtaskResult, loss) -> AblationRow:
    return AblationRow(
        encoder=encoder,
        variant=variant,
        present=True,
        precision=result.precision,
        recall=result.recall,
        f1=result.f1,
        loss_per_epoch=loss,
    )


def run_ablation(
    checkpoint_root: str | Path,
    encoders: Sequence[str],
    variants: Sequence[ModelVariant | str],
    records: Sequence[EncodedRecord],
    golds: Sequence[RawSentence],
    schema: EventSchema,
) -> AblationReport:
    """Score every trained (encoder, variant) cell on the given split.

    Rows follow the fixed variant order within each encoder, so reports are
    stable across runs; missing checkpoints yield rows marked absent.
    """
    ordered = [ModelVariant(v) for v in variants] or list(VARIANT_ORDER)
    sections: dict[str, list[AblationRow]] = {s: [] for s in REPORT_SECTIONS}
    for encoder in encoders:
        for variant in [v for v in VARIANT_ORDER if v in ordered]:
            trigger_dir = checkpoint_path(checkpoint_root, encoder, variant.value, "trigger")
            role_dir = checkpoint_path(checkpoint_root, encoder, variant.value, "role")
            if not (trigger_dir / "config.json").exists() or not (role_dir / "config.json").exists():
                logger.warning("missing checkpoint for %s/%s, row marked absent", encoder, variant.value)
                for section in REPORT_SECTIONS:
                    sections[section].append(AblationRow(encoder, variant.value, present=False))
                continue
            trigger_tagger = EventTagger.load(trigger_dir)
            role_tagger = EventTagger.load(role_dir)
            predicted = events_as_sentences(
                predict_events(trigger_tagger, role_tagger, records, schema), records
            )
            report = MetricsReport(
                trigger=score_dataset(predicted, golds, "trigger"),
                role=score_dataset(predicted, golds, "role"),
            )
            losses = [trigger_tagger.best_train_loss, role_tagger.best_train_loss]
            known = [loss for loss in losses if loss is not None]
            overall_loss = sum(known) / len(known) if known else None
            sections["overall"].append(
                _subtask_row(encoder, variant.value, report.overall, overall_loss)
            )
            sections["trigger"].append(
                _subtask_row(encoder, variant.value, report.trigger, losses[0])
            )
            sections["role"].append(
                _subtask_row(encoder, variant.value, report.role, losses[1])
            )
    return AblationReport(sections)
