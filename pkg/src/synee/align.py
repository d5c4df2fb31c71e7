"""Tokenization, word-to-token tag alignment, and BIOE label encoding.

Bridges word-level syntactic annotations and encoder tokens: every token
inherits the POS id, dependency-relation id, and head pointer of the word
containing its span midpoint, and gold character spans are projected onto
tokens as BIOE label sequences (B for single-token spans, B E for two tokens,
B I...I E beyond that).
"""

from __future__ import annotations

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .annotate import SyntaxAnnotation, VocabTable
from .corpus import EventSchema, RawSentence, iter_gold_spans
from .errors import ConfigError

logger = logging.getLogger(__name__)

SUBTASKS = ("trigger", "role")


@dataclass(frozen=True)
class TokenSequence:
    """Encoder tokens with character spans; delimiter tokens carry no span."""

    tokens: tuple[str, ...]
    char_spans: tuple[tuple[int, int], ...]
    special_mask: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def content_indices(self) -> tuple[int, ...]:
        return tuple(i for i, special in enumerate(self.special_mask) if not special)

    def covered_end(self) -> int:
        """Largest character offset covered by any non-special token."""
        ends = [end for (_, end), special in zip(self.char_spans, self.special_mask) if not special]
        return max(ends) if ends else 0


class Tokenizer(ABC):
    """Encoder-native tokenizer contract."""

    name: str = "base"

    @abstractmethod
    def encode(self, text: str, max_tokens: int) -> tuple[TokenSequence, list[int] | None]:
        """Tokenize one sentence.

        Returns the token sequence and, for tokenizers with a fixed
        vocabulary, the matching token ids (None when ids are assigned later
        from a corpus-built vocabulary).
        """


class CharSubwordTokenizer(Tokenizer):
    """Tokenizer of the stand-in encoder: one token per CJK character, ASCII
    alphanumeric runs split into fixed-size subword chunks (continuations
    prefixed with ``##``), any other non-space character kept as one token.
    """

    name = "char-subword"
    BOS = "<s>"
    EOS = "</s>"

    def __init__(self, latin_chunk: int = 4):
        if latin_chunk < 1:
            raise ValueError("latin_chunk must be >= 1")
        self.latin_chunk = latin_chunk

    def encode(self, text: str, max_tokens: int) -> tuple[TokenSequence, None]:
        if not text or text.isspace():
            raise ValueError("cannot tokenize empty text")
        tokens: list[str] = []
        spans: list[tuple[int, int]] = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isascii() and ch.isalnum():
                j = i
                while j < len(text) and text[j].isascii() and text[j].isalnum():
                    j += 1
                for k in range(i, j, self.latin_chunk):
                    end = min(k + self.latin_chunk, j)
                    piece = text[k:end]
                    tokens.append(piece if k == i else "##" + piece)
                    spans.append((k, end))
                i = j
            else:
                tokens.append(ch)
                spans.append((i, i + 1))
                i += 1

        budget = max_tokens - 2
        if len(tokens) > budget:
            logger.warning(
                "sentence of %d tokens truncated to %d", len(tokens), budget
            )
            tokens = tokens[:budget]
            spans = spans[:budget]

        all_tokens = (self.BOS, *tokens, self.EOS)
        all_spans = ((-1, -1), *spans, (-1, -1))
        special = (True, *(False,) * len(tokens), True)
        return TokenSequence(all_tokens, all_spans, special), None


class HuggingFaceTokenizer(Tokenizer):
    """Adapter over a fast tokenizer from the ``transformers`` hub.

    Only needed when running with a real pretrained encoder; the import is
    deferred so offline installs never touch it.
    """

    def __init__(self, model_name: str):
        try:
            from transformers import AutoTokenizer
        except ImportError as exc:
            raise ConfigError(
                "encoder {0!r} needs the 'transformers' extra (pip install synee[hf])".format(
                    model_name
                )
            ) from exc
        self.name = model_name
        self._tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)

    def encode(self, text: str, max_tokens: int) -> tuple[TokenSequence, list[int]]:
        if not text or text.isspace():
            raise ValueError("cannot tokenize empty text")
        enc = self._tokenizer(
            text,
            truncation=True,
            max_length=max_tokens,
            return_offsets_mapping=True,
            return_special_tokens_mask=True,
        )
        tokens = self._tokenizer.convert_ids_to_tokens(enc["input_ids"])
        spans = []
        special = []
        for (start, end), is_special in zip(enc["offset_mapping"], enc["special_tokens_mask"]):
            special.append(bool(is_special))
            spans.append((-1, -1) if is_special else (start, end))
        seq = TokenSequence(tuple(tokens), tuple(spans), tuple(special))
        return seq, list(enc["input_ids"])


def get_tokenizer(encoder_name: str, latin_chunk: int = 4) -> Tokenizer:
    if encoder_name == "tiny":
        return CharSubwordTokenizer(latin_chunk=latin_chunk)
    return HuggingFaceTokenizer(encoder_name)


@dataclass(frozen=True)
class AlignedFeatures:
    """Per-token syntactic feature ids, parallel to the token sequence.

    ``head_token`` points at the first token of the head word (-1 for tokens
    of the root word and for special tokens); ``word_index`` maps each token
    back into the annotation's word list (-1 for special tokens).
    """

    pos_ids: tuple[int, ...]
    dep_rel_ids: tuple[int, ...]
    head_token: tuple[int, ...]
    word_index: tuple[int, ...]


def _word_for_midpoint(word_spans: Sequence[tuple[int, int]], midpoint: float) -> int:
    best = 0
    best_distance = None
    for w, (start, end) in enumerate(word_spans):
        if start <= midpoint < end:
            return w
        distance = start - midpoint if midpoint < start else midpoint - end + 1
        if best_distance is None or distance < best_distance:
            best, best_distance = w, distance
    return best


def align_tags(
    tokens: TokenSequence,
    ann: SyntaxAnnotation,
    pos_vocab: VocabTable,
    dep_vocab: VocabTable,
) -> AlignedFeatures:
    """Expand word-level tags onto tokens by the span-midpoint rule.

    Every token of a word receives the word's POS id and the id of its
    incoming dependency relation; its head pointer is the first token of the
    head word. Tokens straddling a word boundary (tokenizer and annotator
    disagree) are assigned by midpoint with a warning.
    """
    n = len(tokens)
    word_index = [-1] * n
    for t in range(n):
        if tokens.special_mask[t]:
            continue
        start, end = tokens.char_spans[t]
        midpoint = (start + end) / 2.0
        w = _word_for_midpoint(ann.word_spans, midpoint)
        word_index[t] = w
        w_start, w_end = ann.word_spans[w]
        if start < w_start or end > w_end:
            logger.warning(
                "token %r (%d, %d) straddles word boundaries; assigned to word %r by midpoint",
                tokens.tokens[t], start, end, ann.words[w],
            )

    first_token_of_word: dict[int, int] = {}
    for t in range(n):
        w = word_index[t]
        if w >= 0 and w not in first_token_of_word:
            first_token_of_word[w] = t

    incoming = {d: (h, rel) for h, d, rel in ann.dep_edges}
    pos_ids = [0] * n
    dep_rel_ids = [0] * n
    head_token = [-1] * n
    for t in range(n):
        w = word_index[t]
        if w < 0:
            continue
        pos_ids[t] = pos_vocab.id_of(ann.pos_tags[w])
        head_word, relation = incoming[w]
        dep_rel_ids[t] = dep_vocab.id_of(relation)
        if head_word >= 0:
            head_token[t] = first_token_of_word.get(head_word, -1)
    return AlignedFeatures(
        pos_ids=tuple(pos_ids),
        dep_rel_ids=tuple(dep_rel_ids),
        head_token=tuple(head_token),
        word_index=tuple(word_index),
    )


class LabelScheme:
    """BIOE label inventory for one subtask: O plus B-/I-/E- per class.

    Label ids are deterministic: O is 0, then classes in sorted order, each
    contributing B, I, E in that order.
    """

    def __init__(self, subtask: str, classes: Iterable[str]):
        if subtask not in SUBTASKS:
            raise ValueError(f"unknown subtask {subtask!r}")
        self.subtask = subtask
        self.classes = tuple(sorted(set(classes)))
        self.labels = ("O",) + tuple(
            f"{prefix}-{cls}" for cls in self.classes for prefix in ("B", "I", "E")
        )
        self._id_of = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def from_schema(cls, subtask: str, schema: EventSchema) -> "LabelScheme":
        classes = schema.event_types if subtask == "trigger" else schema.role_names
        return cls(subtask, classes)

    def __len__(self) -> int:
        return len(self.labels)

    def id_of(self, label: str) -> int:
        return self._id_of[label]

    def label_of(self, index: int) -> str:
        return self.labels[index]

    def to_dict(self) -> dict:
        return {"subtask": self.subtask, "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "LabelScheme":
        return cls(raw["subtask"], raw["classes"])


@dataclass(frozen=True)
class LabelSequence:
    """Per-token label ids under one scheme."""

    label_ids: tuple[int, ...]
    scheme: LabelScheme


@dataclass(frozen=True)
class SpanPlacement:
    """Where one gold span landed on the token sequence."""

    cls: str
    start: int
    end: int
    first_token: int
    last_token: int
    exact: bool


def select_spans(
    spans: Sequence[tuple[str, int, int]],
    tokens: TokenSequence,
) -> tuple[list[SpanPlacement], list[tuple[str, int, int, str]]]:
    """Place gold character spans onto tokens, resolving conflicts.

    Spans are processed earliest-start-first (longer wins on ties); a span
    overlapping an already-claimed token is dropped, as is any span reaching
    beyond the truncation cut. Spans whose boundaries fall inside a token are
    snapped outward to whole tokens (``exact`` False). Returns the kept
    placements and the dropped spans with a reason tag.
    """
    unique = sorted(set(spans), key=lambda s: (s[1], -(s[2] - s[1]), s[0]))
    covered_end = tokens.covered_end()
    claimed = [False] * len(tokens)
    kept: list[SpanPlacement] = []
    dropped: list[tuple[str, int, int, str]] = []
    for cls, start, end in unique:
        if end > covered_end:
            dropped.append((cls, start, end, "truncated"))
            logger.warning("gold span %r (%d, %d) beyond truncation cut, dropped", cls, start, end)
            continue
        token_range = [
            t
            for t in tokens.content_indices
            if tokens.char_spans[t][0] < end and tokens.char_spans[t][1] > start
        ]
        if not token_range:
            dropped.append((cls, start, end, "unaligned"))
            logger.warning("gold span %r (%d, %d) covers no token, dropped", cls, start, end)
            continue
        if any(claimed[t] for t in token_range):
            dropped.append((cls, start, end, "overlap"))
            logger.warning("gold span %r (%d, %d) overlaps an earlier span, dropped", cls, start, end)
            continue
        first, last = token_range[0], token_range[-1]
        exact = tokens.char_spans[first][0] == start and tokens.char_spans[last][1] == end
        if not exact:
            logger.warning(
                "gold span %r (%d, %d) snapped to token boundaries (%d, %d)",
                cls, start, end, tokens.char_spans[first][0], tokens.char_spans[last][1],
            )
        for t in token_range:
            claimed[t] = True
        kept.append(SpanPlacement(cls, start, end, first, last, exact))
    return kept, dropped


def encode_labels(
    sentence: RawSentence,
    tokens: TokenSequence,
    scheme: LabelScheme,
) -> LabelSequence:
    """Project the sentence's gold spans for the scheme's subtask onto tokens."""
    spans = list(iter_gold_spans(sentence, scheme.subtask))
    placements, _ = select_spans([(cls, s, s + len(t)) for cls, t, s in spans], tokens)
    label_ids = [0] * len(tokens)
    for placement in placements:
        first, last = placement.first_token, placement.last_token
        label_ids[first] = scheme.id_of(f"B-{placement.cls}")
        if last > first:
            for t in range(first + 1, last):
                label_ids[t] = scheme.id_of(f"I-{placement.cls}")
            label_ids[last] = scheme.id_of(f"E-{placement.cls}")
    return LabelSequence(tuple(label_ids), scheme)


def decode_labels(labels: LabelSequence, tokens: TokenSequence) -> list[tuple[str, int, int]]:
    """Recover (class, start_char, end_char) spans from a label sequence.

    Total over arbitrary (including ill-formed) input: a run must start with
    B; orphan I/E tokens are ignored; a B...I run broken by any other label
    or by the end of the sequence is closed at its last token.
    """
    return decode_label_ids(labels.label_ids, tokens, labels.scheme)


def decode_label_ids(
    label_ids: Sequence[int],
    tokens: TokenSequence,
    scheme: LabelScheme,
) -> list[tuple[str, int, int]]:
    spans: list[tuple[str, int, int]] = []
    run: tuple[str, int, int] | None = None  # (class, first token, last token)

    def flush() -> None:
        nonlocal run
        if run is not None:
            cls, first, last = run
            spans.append((cls, tokens.char_spans[first][0], tokens.char_spans[last][1]))
            run = None

    for t, label_id in enumerate(label_ids):
        if tokens.special_mask[t]:
            flush()
            continue
        label = scheme.label_of(label_id)
        if label == "O":
            flush()
            continue
        prefix, cls = label.split("-", 1)
        if prefix == "B":
            flush()
            run = (cls, t, t)
        elif run is not None and run[0] == cls:
            run = (cls, run[1], t)
            if prefix == "E":
                flush()
        else:
            flush()  # orphan I/E: close any foreign run, ignore the token
    flush()
    return spans


@dataclass
class EncodedRecord:
    """One preprocessed sentence: tokens, channel ids, and both label layers.

    This is the single record format consumed by training; serialized one
    JSON object per line.
    """

    id: str
    text: str
    tokens: tuple[str, ...]
    char_spans: tuple[tuple[int, int], ...]
    special_mask: tuple[bool, ...]
    token_ids: tuple[int, ...]
    pos_ids: tuple[int, ...]
    dep_rel_ids: tuple[int, ...]
    head_token: tuple[int, ...]
    word_index: tuple[int, ...]
    trigger_labels: tuple[int, ...]
    role_labels: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def token_sequence(self) -> TokenSequence:
        return TokenSequence(self.tokens, self.char_spans, self.special_mask)

    @property
    def aligned_features(self) -> AlignedFeatures:
        return AlignedFeatures(self.pos_ids, self.dep_rel_ids, self.head_token, self.word_index)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "tokens": list(self.tokens),
            "char_spans": [list(span) for span in self.char_spans],
            "special_mask": [int(flag) for flag in self.special_mask],
            "token_ids": list(self.token_ids),
            "pos_ids": list(self.pos_ids),
            "dep_rel_ids": list(self.dep_rel_ids),
            "head_token": list(self.head_token),
            "word_index": list(self.word_index),
            "trigger_labels": list(self.trigger_labels),
            "role_labels": list(self.role_labels),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EncodedRecord":
        return cls(
            id=raw["id"],
            text=raw["text"],
            tokens=tuple(raw["tokens"]),
            char_spans=tuple((int(s), int(e)) for s, e in raw["char_spans"]),
            special_mask=tuple(bool(flag) for flag in raw["special_mask"]),
            token_ids=tuple(raw["token_ids"]),
            pos_ids=tuple(raw["pos_ids"]),
            dep_rel_ids=tuple(raw["dep_rel_ids"]),
            head_token=tuple(raw["head_token"]),
            word_index=tuple(raw["word_index"]),
            trigger_labels=tuple(raw["trigger_labels"]),
            role_labels=tuple(raw["role_labels"]),
        )


def write_records(path: str | Path, records: Iterable[EncodedRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_records(path: str | Path) -> list[EncodedRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(EncodedRecord.from_dict(json.loads(line)))
    return records


@dataclass
class FeatureSpace:
    """Everything learned at preprocessing time that models must share."""

    pos_vocab: VocabTable
    dep_vocab: VocabTable
    trigger_scheme: LabelScheme
    role_scheme: LabelScheme
    encoder_name: str = "tiny"
    max_tokens: int = 256
    token_vocab: VocabTable | None = None

    def scheme_for(self, subtask: str) -> LabelScheme:
        if subtask == "trigger":
            return self.trigger_scheme
        if subtask == "role":
            return self.role_scheme
        raise ValueError(f"unknown subtask {subtask!r}")

    def to_dict(self) -> dict:
        return {
            "encoder_name": self.encoder_name,
            "max_tokens": self.max_tokens,
            "pos_vocab": self.pos_vocab.to_dict(),
            "dep_vocab": self.dep_vocab.to_dict(),
            "token_vocab": None if self.token_vocab is None else self.token_vocab.to_dict(),
            "trigger_scheme": self.trigger_scheme.to_dict(),
            "role_scheme": self.role_scheme.to_dict(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8"
        )

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FeatureSpace":
        return cls(
            pos_vocab=VocabTable.from_dict(raw["pos_vocab"]),
            dep_vocab=VocabTable.from_dict(raw["dep_vocab"]),
            trigger_scheme=LabelScheme.from_dict(raw["trigger_scheme"]),
            role_scheme=LabelScheme.from_dict(raw["role_scheme"]),
            encoder_name=raw["encoder_name"],
            max_tokens=int(raw["max_tokens"]),
            token_vocab=(
                None if raw.get("token_vocab") is None else VocabTable.from_dict(raw["token_vocab"])
            ),
        )

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSpace":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


try:
    from sklearn.base import BaseEstimator, TransformerMixin
except ImportError:  # pragma: no cover - scikit-learn is a hard dependency
    BaseEstimator = object  # type: ignore[assignment, misc]
    TransformerMixin = object  # type: ignore[assignment, misc]


class FeatureEncoder(BaseEstimator, TransformerMixin):
    """Turns (sentence, annotation) pairs into training-ready encoded records.

    ``fit`` freezes the POS/dependency vocabularies (and, for the stand-in
    encoder, the token vocabulary) from the training split and derives both
    label schemes from the event schema; ``transform`` then tokenizes,
    aligns, and label-encodes any split with those frozen tables.
    """

    def __init__(self, encoder_name: str = "tiny", max_tokens: int = 256, latin_chunk: int = 4):
        self.encoder_name = encoder_name
        self.max_tokens = max_tokens
        self.latin_chunk = latin_chunk

    def fit(
        self,
        X: Sequence[tuple[RawSentence, SyntaxAnnotation]],
        y: None = None,
        *,
        schema: EventSchema,
    ) -> "FeatureEncoder":
        tokenizer = get_tokenizer(self.encoder_name, self.latin_chunk)
        pos_vocab, dep_vocab = build_vocabs_from_pairs(X)
        token_vocab = None
        if self.encoder_name == "tiny":
            seen: set[str] = set()
            for sentence, _ann in X:
                seq, _ = tokenizer.encode(sentence.text, self.max_tokens)
                seen.update(seq.tokens)
            token_vocab = VocabTable.build(seen)
        self.tokenizer_ = tokenizer
        self.feature_space_ = FeatureSpace(
            pos_vocab=pos_vocab,
            dep_vocab=dep_vocab,
            trigger_scheme=LabelScheme.from_schema("trigger", schema),
            role_scheme=LabelScheme.from_schema("role", schema),
            encoder_name=self.encoder_name,
            max_tokens=self.max_tokens,
            token_vocab=token_vocab,
        )
        return self

    def transform(
        self, X: Sequence[tuple[RawSentence, SyntaxAnnotation]]
    ) -> list[EncodedRecord]:
        if not hasattr(self, "feature_space_"):
            raise ConfigError("FeatureEncoder.transform called before fit")
        space = self.feature_space_
        records = []
        for sentence, ann in X:
            seq, token_ids = self.tokenizer_.encode(sentence.text, self.max_tokens)
            if token_ids is None:
                token_ids = [space.token_vocab.id_of(token) for token in seq.tokens]
            feats = align_tags(seq, ann, space.pos_vocab, space.dep_vocab)
            trigger = encode_labels(sentence, seq, space.trigger_scheme)
            role = encode_labels(sentence, seq, space.role_scheme)
            records.append(
                EncodedRecord(
                    id=sentence.id,
                    text=sentence.text,
                    tokens=seq.tokens,
                    char_spans=seq.char_spans,
                    special_mask=seq.special_mask,
                    token_ids=tuple(token_ids),
                    pos_ids=feats.pos_ids,
                    dep_rel_ids=feats.dep_rel_ids,
                    head_token=feats.head_token,
                    word_index=feats.word_index,
                    trigger_labels=trigger.label_ids,
                    role_labels=role.label_ids,
                )
            )
        return records


def build_vocabs_from_pairs(
    pairs: Sequence[tuple[RawSentence, SyntaxAnnotation]]
) -> tuple[VocabTable, VocabTable]:
    from .annotate import build_vocabs

    return build_vocabs([ann for _sentence, ann in pairs])
