"""Record types shared by the data pipeline, the trainer and the evaluator.

Every record is a frozen dataclass. Text fields are NFC-normalized on the
way in (``parse_*`` / ``*_from_dict``) so that equality checks are exact
byte comparisons on normalized UTF-8.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable

SOURCE_LANG = "eng_Latn"
NLI_LABELS = ("entailment", "neutral", "contradiction")
NLI_SOURCES = ("mnli", "snli")

_LANG_RE = re.compile(r"^[a-z]{3}_[A-Z][a-z]{3}$")


class ValidationError(ValueError):
    """Raised when a record violates one of its invariants."""


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def content_hash(*parts: str) -> str:
    """Stable hex digest of one or more texts (used as a lookup key by file-backed ports)."""
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        b = nfc(p).encode("utf-8")
        h.update(len(b).to_bytes(8, "little"))
        h.update(b)
    return h.hexdigest()


def check_lang_code(code: str) -> str:
    if not isinstance(code, str) or not _LANG_RE.match(code):
        raise ValidationError(f"invalid language code {code!r} (expected e.g. 'amh_Ethi')")
    return code


def canonical_json(obj) -> str:
    """Canonical single-line JSON: sorted keys, no spaces, raw UTF-8."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"), allow_nan=False)


class Direction(str, enum.Enum):
    """Which side of a premise/hypothesis pair is rendered in the target language."""

    TGT_SRC = "tgt_src"  # premise translated, hypothesis in source
    SRC_TGT = "src_tgt"  # premise in source, hypothesis translated
    TGT_TGT = "tgt_tgt"
    SRC_SRC = "src_src"

    @property
    def translated_sides(self) -> tuple[str, ...]:
        return {
            Direction.TGT_SRC: ("premise",),
            Direction.SRC_TGT: ("hypothesis",),
            Direction.TGT_TGT: ("premise", "hypothesis"),
            Direction.SRC_SRC: (),
        }[self]

    @classmethod
    def parse(cls, value: str) -> "Direction":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown direction {value!r}") from None


@dataclass(frozen=True)
class NliExample:
    id: str
    premise: str
    hypothesis: str
    label: str
    source: str

    def __post_init__(self):
        if self.label not in NLI_LABELS:
            raise ValidationError(f"unknown label {self.label!r}")
        if self.source not in NLI_SOURCES:
            raise ValidationError(f"unknown source {self.source!r}")
        if not self.premise or not self.hypothesis:
            raise ValidationError("premise and hypothesis must be non-empty")

    def to_dict(self) -> dict:
        return {"id": self.id, "premise": self.premise, "hypothesis": self.hypothesis,
                "label": self.label, "source": self.source}


@dataclass(frozen=True)
class TranslationRecord:
    example_id: str
    side: str
    lang: str
    text: str
    qe_score: float | None = None

    def __post_init__(self):
        if self.side not in ("premise", "hypothesis"):
            raise ValidationError(f"unknown side {self.side!r}")
        check_lang_code(self.lang)
        if self.qe_score is not None and not (0.0 <= self.qe_score <= 1.0):
            raise ValidationError(f"qe_score {self.qe_score} outside [0, 1]")

    def to_dict(self) -> dict:
        d = {"example_id": self.example_id, "side": self.side, "lang": self.lang, "text": self.text}
        if self.qe_score is not None:
            d["qe_score"] = self.qe_score
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TranslationRecord":
        qe = d.get("qe_score")
        return cls(str(d["example_id"]), d["side"], d["lang"], nfc(d["text"]),
                   None if qe is None else float(qe))


@dataclass(frozen=True)
class TrainInstance:
    query: str
    pos: tuple[str, ...]
    neg: tuple[str, ...] = ()
    teacher_scores: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict, compare=True, hash=False)

    @property
    def dataset(self) -> str:
        """Batching key for same-dataset batches."""
        return self.meta.get("dataset") or self.meta.get("source", "default")

    def replace(self, **changes) -> "TrainInstance":
        d = {"query": self.query, "pos": self.pos, "neg": self.neg,
             "teacher_scores": self.teacher_scores, "meta": dict(self.meta)}
        d.update(changes)
        return TrainInstance(**d)

    def to_dict(self) -> dict:
        d = {"query": self.query, "pos": list(self.pos), "neg": list(self.neg), "meta": dict(self.meta)}
        if self.teacher_scores is not None:
            d["teacher_scores"] = list(self.teacher_scores)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainInstance":
        scores = d.get("teacher_scores")
        return cls(
            query=nfc(d["query"]),
            pos=tuple(nfc(t) for t in d["pos"]),
            neg=tuple(nfc(t) for t in d.get("neg", [])),
            teacher_scores=None if scores is None else tuple(float(s) for s in scores),
            meta=dict(d.get("meta", {})),
        )


def validate_train_instance(inst: TrainInstance, max_negatives: int | None = None) -> None:
    """Raise :class:`ValidationError` naming the first violated invariant."""
    if not inst.pos:
        raise ValidationError("empty pos")
    if max_negatives is not None and len(inst.neg) > max_negatives:
        raise ValidationError("too many negatives")
    if set(map(nfc, inst.pos)) & set(map(nfc, inst.neg)):
        raise ValidationError("pos/neg overlap")
    if inst.teacher_scores is not None:
        if len(inst.teacher_scores) != 1 + len(inst.neg):
            raise ValidationError("score length")
        if not all(math.isfinite(s) for s in inst.teacher_scores):
            raise ValidationError("non-finite score")
    lang = inst.meta.get("lang")
    if lang is not None:
        try:
            check_lang_code(lang)
        except ValidationError:
            raise ValidationError("meta.lang") from None
    direction = inst.meta.get("direction")
    if direction is not None and direction not in {d.value for d in Direction}:
        raise ValidationError("meta.direction")


# -- newline-delimited IO -----------------------------------------------------


def _stream_lines(stream: IO[bytes] | IO[str] | Iterable) -> Iterable[str]:
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw


def parse_nli_lines(stream) -> list[NliExample]:
    """Parse newline-delimited NLI records; blank lines are skipped."""
    out = []
    for lineno, line in enumerate(_stream_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed JSON at line {lineno}: {e.msg}") from None
        if not isinstance(d, dict):
            raise ValidationError(f"malformed record at line {lineno}: expected an object")
        for key in ("id", "premise", "hypothesis", "label", "source"):
            if key not in d:
                raise ValidationError(f"missing field '{key}' at line {lineno}")
            if not isinstance(d[key], str):
                raise ValidationError(f"field '{key}' must be a string at line {lineno}")
        if d["label"] not in NLI_LABELS:
            raise ValidationError(f"unknown label at line {lineno}: {d['label']!r}")
        if d["source"] not in NLI_SOURCES:
            raise ValidationError(f"unknown source at line {lineno}: {d['source']!r}")
        try:
            out.append(NliExample(d["id"], nfc(d["premise"]), nfc(d["hypothesis"]), d["label"], d["source"]))
        except ValidationError as e:
            raise ValidationError(f"{e} at line {lineno}") from None
    return out


def serialize_nli(examples: Iterable[NliExample]) -> str:
    return "".join(canonical_json(ex.to_dict()) + "\n" for ex in examples)


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(canonical_json(r) + "\n")


def read_translations(path) -> list[TranslationRecord]:
    return [TranslationRecord.from_dict(d) for d in read_jsonl(path)]


def read_instances(path) -> list[TrainInstance]:
    return [TrainInstance.from_dict(d) for d in read_jsonl(path)]


def write_instances(path, instances: Iterable[TrainInstance]) -> None:
    write_jsonl(path, (i.to_dict() for i in instances))
