"""Word segmentation, POS/NER tags, and dependency parses from pluggable backends.

No tagger or parser is implemented here: annotation is delegated to an
external process or service behind the :class:`Annotator` interface, with a
persistent line-delimited cache keyed by sentence id and annotator version.
"""

from __future__ import annotations

import json
import logging
import subprocess
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import RawSentence
from .errors import AnnotationError, TransportError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntaxAnnotation:
    """Word-level syntactic analysis of one sentence.

    ``dep_edges`` holds (head_index, dependent_index, relation) triples with
    indices into ``words`` and head_index == -1 for the root edge, so a valid
    annotation has exactly as many edges as words.
    """

    words: tuple[str, ...]
    word_spans: tuple[tuple[int, int], ...]
    pos_tags: tuple[str, ...]
    ner_tags: tuple[str, ...]
    dep_edges: tuple[tuple[int, int, str], ...]
    root_index: int

    def to_dict(self) -> dict:
        return {
            "words": list(self.words),
            "word_spans": [list(span) for span in self.word_spans],
            "pos_tags": list(self.pos_tags),
            "ner_tags": list(self.ner_tags),
            "dep_edges": [[h, d, rel] for h, d, rel in self.dep_edges],
            "root_index": self.root_index,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SyntaxAnnotation":
        return cls(
            words=tuple(raw["words"]),
            word_spans=tuple((int(s), int(e)) for s, e in raw["word_spans"]),
            pos_tags=tuple(raw["pos_tags"]),
            ner_tags=tuple(raw["ner_tags"]),
            dep_edges=tuple((int(h), int(d), str(rel)) for h, d, rel in raw["dep_edges"]),
            root_index=int(raw["root_index"]),
        )

    def head_of(self, word_index: int) -> int:
        """Word index of the syntactic head, -1 for the root word."""
        return self._incoming()[word_index][0]

    def relation_of(self, word_index: int) -> str:
        """Label of the incoming dependency edge of one word."""
        return self._incoming()[word_index][1]

    def _incoming(self) -> dict[int, tuple[int, str]]:
        return {d: (h, rel) for h, d, rel in self.dep_edges}


def validate_annotation(ann: SyntaxAnnotation, text: str | None = None) -> None:
    """Raise :class:`AnnotationError` unless all structural invariants hold.

    Checks parallel lengths, sorted non-overlapping word spans that cover the
    non-whitespace text, and the tree property of the dependency edges
    (exactly one root, one head per word, all words reachable from the root).
    """
    n = len(ann.words)
    if n == 0:
        raise AnnotationError("annotation has no words")
    if not (len(ann.word_spans) == len(ann.pos_tags) == len(ann.ner_tags) == n):
        raise AnnotationError("words, spans, POS and NER tag lists differ in length")

    previous_end = -1
    for word, (start, end) in zip(ann.words, ann.word_spans):
        if start < previous_end or start >= end:
            raise AnnotationError(f"word spans not sorted/non-overlapping at {word!r}")
        previous_end = end
        if text is not None and text[start:end] != word:
            raise AnnotationError(
                f"word {word!r} does not match text slice {text[start:end]!r}"
            )
    if text is not None:
        joined = "".join(ann.words)
        stripped = "".join(ch for ch in text if not ch.isspace())
        if joined != stripped:
            raise AnnotationError("word spans do not concatenate to the sentence text")

    if len(ann.dep_edges) != n:
        raise AnnotationError(f"expected {n} dependency edges (incl. root), got {len(ann.dep_edges)}")
    heads: dict[int, int] = {}
    roots = []
    for head, dependent, _rel in ann.dep_edges:
        if not (0 <= dependent < n) or not (-1 <= head < n):
            raise AnnotationError(f"edge ({head}, {dependent}) index out of range")
        if dependent in heads:
            raise AnnotationError(f"word {dependent} has more than one head")
        heads[dependent] = head
        if head == -1:
            roots.append(dependent)
    if len(roots) != 1:
        raise AnnotationError(f"expected exactly one root edge, got {len(roots)}")
    if roots[0] != ann.root_index:
        raise AnnotationError("root_index does not match the root edge")

    children: dict[int, list[int]] = {}
    for dependent, head in heads.items():
        if head >= 0:
            children.setdefault(head, []).append(dependent)
    reached = set()
    stack = [roots[0]]
    while stack:
        node = stack.pop()
        if node in reached:
            raise AnnotationError("dependency edges contain a cycle")
        reached.add(node)
        stack.extend(children.get(node, ()))
    if len(reached) != n:
        raise AnnotationError("dependency edges do not connect all words to the root")


class Annotator(ABC):
    """Backend contract: text in, a single-root dependency analysis out."""

    @property
    @abstractmethod
    def version(self) -> str:
        """Identifies the backend and its model version, used as cache key."""

    @abstractmethod
    def annotate(self, text: str) -> SyntaxAnnotation:
        """Annotate one sentence. Raises TransportError if the backend fails."""


class ToyAnnotator(Annotator):
    """Deterministic schematic annotator for tests and offline desk runs.

    Produces structurally valid segmentations, cyclic placeholder tags, and a
    heap-shaped dependency tree. This is not a linguistic analysis; use an
    external backend for real corpora.
    """

    POS_CYCLE = ("NN", "VV", "AD", "JJ")
    REL_CYCLE = ("dep", "nmod", "dobj", "advmod")

    def __init__(self, cjk_word_length: int = 2):
        self.cjk_word_length = cjk_word_length

    @property
    def version(self) -> str:
        return f"toy-{self.cjk_word_length}"

    def annotate(self, text: str) -> SyntaxAnnotation:
        if not text:
            raise AnnotationError("cannot annotate empty text")
        spans = self._segment(text)
        words = tuple(text[s:e] for s, e in spans)
        pos_tags = []
        for i, word in enumerate(words):
            if word.isascii() and word.isdigit():
                pos_tags.append("CD")
            elif word.isascii() and word.isalnum():
                pos_tags.append("FW")
            elif not word[0].isalnum():
                pos_tags.append("PU")
            else:
                pos_tags.append(self.POS_CYCLE[i % len(self.POS_CYCLE)])
        ner_tags = tuple("O" for _ in words)
        edges = [(-1, 0, "root")]
        for i in range(1, len(words)):
            edges.append(((i - 1) // 2, i, self.REL_CYCLE[i % len(self.REL_CYCLE)]))
        return SyntaxAnnotation(
            words=words,
            word_spans=tuple(spans),
            pos_tags=tuple(pos_tags),
            ner_tags=ner_tags,
            dep_edges=tuple(edges),
            root_index=0,
        )

    def _segment(self, text: str) -> list[tuple[int, int]]:
        spans: list[tuple[int, int]] = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
            elif ch.isascii() and ch.isalnum():
                j = i
                while j < len(text) and text[j].isascii() and text[j].isalnum():
                    j += 1
                spans.append((i, j))
                i = j
            elif _is_cjk(ch):
                j = i
                while (
                    j < len(text)
                    and j - i < self.cjk_word_length
                    and _is_cjk(text[j])
                ):
                    j += 1
                spans.append((i, j))
                i = j
            else:
                spans.append((i, i + 1))
                i += 1
        return spans


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return (
        0x4E00 <= code <= 0x9FFF
        or 0x3400 <= code <= 0x4DBF
        or 0xF900 <= code <= 0xFAFF
    )


class FixtureAnnotator(Annotator):
    """Replays stored annotations from a line-delimited file, keyed by text."""

    def __init__(self, path: str | Path, version: str = "fixture-1"):
        self._version = version
        self._by_text: dict[str, SyntaxAnnotation] = {}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                raw = json.loads(line)
                self._by_text[raw["text"]] = SyntaxAnnotation.from_dict(raw["annotation"])

    @property
    def version(self) -> str:
        return self._version

    def annotate(self, text: str) -> SyntaxAnnotation:
        try:
            return self._by_text[text]
        except KeyError:
            raise AnnotationError(f"no stored annotation for text {text[:40]!r}") from None


def dump_annotations(path: str | Path, items: Iterable[tuple[str, SyntaxAnnotation]]) -> None:
    """Write (text, annotation) pairs in the fixture/replay file format."""
    with open(path, "w", encoding="utf-8") as handle:
        for text, ann in items:
            record = {"text": text, "annotation": ann.to_dict()}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class HttpAnnotator(Annotator):
    """Client for an annotation service: POST {"text": ...}, JSON annotation back."""

    def __init__(self, endpoint: str, version: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self._version = version
        self.timeout = timeout

    @property
    def version(self) -> str:
        return self._version

    def annotate(self, text: str) -> SyntaxAnnotation:
        import requests

        try:
            response = requests.post(self.endpoint, json={"text": text}, timeout=self.timeout)
            response.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(f"annotator at {self.endpoint} failed: {exc}") from exc
        try:
            return SyntaxAnnotation.from_dict(response.json())
        except (ValueError, KeyError, TypeError) as exc:
            raise AnnotationError(f"annotator returned malformed payload: {exc}") from exc


class CommandAnnotator(Annotator):
    """Runs an external command per sentence: text on stdin, JSON annotation on stdout."""

    def __init__(self, command: Sequence[str], version: str, timeout: float = 60.0):
        self.command = list(command)
        self._version = version
        self.timeout = timeout

    @property
    def version(self) -> str:
        return self._version

    def annotate(self, text: str) -> SyntaxAnnotation:
        try:
            proc = subprocess.run(
                self.command,
                input=text.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
                check=True,
            )
        except (OSError, subprocess.SubprocessError) as exc:
            raise TransportError(f"annotator command {self.command} failed: {exc}") from exc
        try:
            return SyntaxAnnotation.from_dict(json.loads(proc.stdout.decode("utf-8")))
        except (ValueError, KeyError, TypeError) as exc:
            raise AnnotationError(f"annotator command returned malformed payload: {exc}") from exc


class AnnotationCache:
    """Persistent cache, one JSON record per line keyed by (sentence id, version).

    Writes are serialized with a lock and appended immediately; corrupt lines
    are skipped on load and the entry re-annotated and overwritten later
    (last write for a key wins on reload).
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], SyntaxAnnotation] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        corrupt = 0
        with open(self.path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    key = (raw["id"], raw["version"])
                    self._entries[key] = SyntaxAnnotation.from_dict(raw["annotation"])
                except (ValueError, KeyError, TypeError):
                    corrupt += 1
        if corrupt:
            logger.warning("skipped %d corrupt cache entries in %s", corrupt, self.path)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, sentence_id: str, version: str) -> SyntaxAnnotation | None:
        return self._entries.get((sentence_id, version))

    def put(self, sentence_id: str, version: str, ann: SyntaxAnnotation) -> None:
        record = {"id": sentence_id, "version": version, "annotation": ann.to_dict()}
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with self._lock:
            self._entries[(sentence_id, version)] = ann
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line)


@dataclass
class AnnotationStats:
    cache_hits: int = 0
    annotator_calls: int = 0
    skipped: int = 0


def annotate_sentences(
    sentences: Sequence[RawSentence],
    annotator: Annotator,
    cache: AnnotationCache | None = None,
    max_workers: int = 1,
) -> tuple[dict[str, SyntaxAnnotation], AnnotationStats]:
    """Annotate a batch of sentences, via the cache where possible.

    Sentences whose annotation fails the tree invariant are skipped with a
    warning and omitted from the result. Backend calls may fan out over a
    thread pool; cache writes are serialized internally.
    """
    stats = AnnotationStats()
    results: dict[str, SyntaxAnnotation] = {}
    pending: list[RawSentence] = []
    for sentence in sentences:
        cached = cache.get(sentence.id, annotator.version) if cache is not None else None
        if cached is not None:
            results[sentence.id] = cached
            stats.cache_hits += 1
        else:
            pending.append(sentence)

    def run(sentence: RawSentence) -> tuple[str, SyntaxAnnotation | None]:
        try:
            ann = annotator.annotate(sentence.text)
            validate_annotation(ann, sentence.text)
        except AnnotationError as exc:
            logger.warning("sentence %r skipped: %s", sentence.id, exc)
            return sentence.id, None
        if cache is not None:
            cache.put(sentence.id, annotator.version, ann)
        return sentence.id, ann

    if max_workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run, pending))
    else:
        outcomes = [run(sentence) for sentence in pending]
    stats.annotator_calls = len(pending)
    for sentence_id, ann in outcomes:
        if ann is None:
            stats.skipped += 1
        else:
            results[sentence_id] = ann
    return results, stats


class VocabTable:
    """Dense, frozen tag-to-id table with id 0 reserved for unknown/padding."""

    UNKNOWN = "<unk>"

    def __init__(self, tags: Sequence[str]):
        self._id_of = {self.UNKNOWN: 0}
        for tag in tags:
            if tag not in self._id_of:
                self._id_of[tag] = len(self._id_of)
        self._tag_of = {i: t for t, i in self._id_of.items()}

    @classmethod
    def build(cls, tags: Iterable[str]) -> "VocabTable":
        """Build with ids assigned in sorted tag order, for run-to-run stability."""
        return cls(sorted(set(tags)))

    def __len__(self) -> int:
        return len(self._id_of)

    def __contains__(self, tag: str) -> bool:
        return tag in self._id_of

    def id_of(self, tag: str) -> int:
        return self._id_of.get(tag, 0)

    def tag_of(self, index: int) -> str:
        return self._tag_of.get(index, self.UNKNOWN)

    def to_dict(self) -> dict:
        ordered = sorted(self._id_of.items(), key=lambda kv: kv[1])
        return {"tags": [tag for tag, _ in ordered if tag != self.UNKNOWN]}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "VocabTable":
        return cls(list(raw["tags"]))


def build_vocabs(annotations: Iterable[SyntaxAnnotation]) -> tuple[VocabTable, VocabTable]:
    """Build POS and dependency-relation vocabularies from training annotations."""
    pos_tags: set[str] = set()
    relations: set[str] = set()
    for ann in annotations:
        pos_tags.update(ann.pos_tags)
        relations.update(rel for _, _, rel in ann.dep_edges)
    return VocabTable.build(pos_tags), VocabTable.build(relations)
