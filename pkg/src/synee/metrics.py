"""Token-level precision/recall/F1 with competition-style mention matching.

Tokens are the characters of a mention after case folding (whitespace
ignored); each predicted mention is scored against the gold mention of the
same key with the highest pairwise F1, gold mentions never selected by any
prediction count as misses of their full length, and counts are
micro-aggregated before the final precision/recall/F1.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import RawSentence
from .errors import SyneeError

TriggerKey = str
RoleKey = tuple[str, str]


@dataclass(frozen=True)
class MatchCounts:
    """Token-level true-positive / false-positive / false-negative tallies."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def prf(counts: MatchCounts) -> tuple[float, float, float]:
    """Precision, recall, and their harmonic mean, with 0/0 -> 0 throughout."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return precision, recall, f1


def fold_case(text: str) -> str:
    """Simple Unicode lowercase mapping; CJK characters are unaffected."""
    return text.lower()


def mention_tokens(text: str) -> list[str]:
    """Character tokens of a mention, case-folded, whitespace dropped."""
    return [ch for ch in fold_case(text) if not ch.isspace()]


def token_overlap(predicted: str, gold: str) -> MatchCounts:
    """Bag-of-character-token overlap counts between two mention strings."""
    predicted_tokens = Counter(mention_tokens(predicted))
    gold_tokens = Counter(mention_tokens(gold))
    tp = sum((predicted_tokens & gold_tokens).values())
    return MatchCounts(
        tp=tp,
        fp=sum(predicted_tokens.values()) - tp,
        fn=sum(gold_tokens.values()) - tp,
    )


def pair_f1(predicted: str, gold: str) -> float:
    counts = token_overlap(predicted, gold)
    return prf(counts)[2]


def match_argument(
    predicted: str, gold_mentions: Sequence[str]
) -> tuple[int, MatchCounts]:
    """Match one prediction against the gold mention with the highest pair F1.

    Returns the index of the chosen mention (first wins on ties) and the
    token counts of that pairing. Candidates are ranked by the exact
    fraction 2*tp / (2*tp + fp + fn), compared in integer arithmetic so tie
    handling never depends on floating-point rounding.
    """
    if not gold_mentions:
        raise ValueError("match_argument requires at least one gold mention")
    best_index = 0
    best = (0, 1)  # F1 as an exact (numerator, denominator) pair
    for index, mention in enumerate(gold_mentions):
        counts = token_overlap(predicted, mention)
        denominator = 2 * counts.tp + counts.fp + counts.fn
        candidate = (2 * counts.tp, denominator) if denominator else (0, 1)
        if candidate[0] * best[1] > best[0] * candidate[1]:
            best_index, best = index, candidate
    return best_index, token_overlap(predicted, gold_mentions[best_index])


def mentions_by_key(
    sentences: Iterable[RawSentence], subtask: str
) -> dict[str, dict[TriggerKey | RoleKey, list[str]]]:
    """Group mention texts per sentence id and matching key.

    Trigger mentions are keyed by event type; argument mentions by
    (event type, role).
    """
    grouped: dict[str, dict] = {}
    for sentence in sentences:
        keys = grouped.setdefault(sentence.id, {})
        for event in sentence.events:
            if subtask == "trigger":
                keys.setdefault(event.event_type, []).append(event.trigger_text)
            elif subtask == "role":
                for arg in event.arguments:
                    keys.setdefault((event.event_type, arg.role), []).append(arg.text)
            else:
                raise ValueError(f"unknown subtask {subtask!r}")
    return grouped


@dataclass
class SubtaskResult:
    counts: MatchCounts
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, counts: MatchCounts) -> "SubtaskResult":
        precision, recall, f1 = prf(counts)
        return cls(counts, precision, recall, f1)

    def to_dict(self) -> dict:
        return {
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def score_dataset(
    predictions: Iterable[RawSentence],
    golds: Iterable[RawSentence],
    subtask: str,
) -> SubtaskResult:
    """Micro-averaged token-level score of predictions against gold sentences.

    Every prediction id must exist among the golds (unknown ids raise); gold
    sentences without a prediction record count as empty predictions. Each
    prediction matches independently against the gold mentions under its key;
    leftover gold mentions contribute misses of their full token length and
    predictions under keys with no gold mention contribute false positives
    likewise.
    """
    gold_list = list(golds)
    predicted_grouped = mentions_by_key(predictions, subtask)
    gold_grouped = mentions_by_key(gold_list, subtask)
    gold_ids = {sentence.id for sentence in gold_list}
    unknown = sorted(set(predicted_grouped) - gold_ids)
    if unknown:
        raise SyneeError(f"prediction ids not present in gold data: {unknown}")

    total = MatchCounts()
    for sentence_id in gold_ids:
        predicted_keys = predicted_grouped.get(sentence_id, {})
        gold_keys = gold_grouped.get(sentence_id, {})
        for key in set(predicted_keys) | set(gold_keys):
            gold_mentions = gold_keys.get(key, [])
            matched = [False] * len(gold_mentions)
            for predicted in predicted_keys.get(key, []):
                if not gold_mentions:
                    total += MatchCounts(fp=len(mention_tokens(predicted)))
                    continue
                index, counts = match_argument(predicted, gold_mentions)
                matched[index] = True
                total += counts
            for mention, used in zip(gold_mentions, matched):
                if not used:
                    total += MatchCounts(fn=len(mention_tokens(mention)))
    return SubtaskResult.from_counts(total)


def overall_score(trigger: SubtaskResult, role: SubtaskResult) -> SubtaskResult:
    """Micro-aggregation over both subtasks: counts are summed, then scored."""
    return SubtaskResult.from_counts(trigger.counts + role.counts)


@dataclass
class MetricsReport:
    """Per-subtask and overall scores, plus training losses when available."""

    trigger: SubtaskResult
    role: SubtaskResult
    overall: SubtaskResult = field(init=False)
    trigger_loss: float | None = None
    role_loss: float | None = None

    def __post_init__(self) -> None:
        self.overall = overall_score(self.trigger, self.role)

    def to_dict(self) -> dict:
        payload = {
            "aggregation": "micro (summed token counts over both subtasks)",
            "trigger": self.trigger.to_dict(),
            "role": self.role.to_dict(),
            "overall": self.overall.to_dict(),
        }
        if self.trigger_loss is not None:
            payload["trigger"]["loss_per_epoch"] = self.trigger_loss
        if self.role_loss is not None:
            payload["role"]["loss_per_epoch"] = self.role_loss
        return payload
