"""Cross-lingual expansion of NLI data into contrastive training instances.

Each source example is rendered in four directions per target language
(premise/hypothesis each in source or target language), translations are
gated by a quality-estimation score, and the surviving pairs are regrouped
by premise into query / positives / negatives instances.
"""

from __future__ import annotations

from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .datamodel import (
    SOURCE_LANG,
    Direction,
    NliExample,
    TrainInstance,
    TranslationRecord,
    ValidationError,
    check_lang_code,
    content_hash,
    nfc,
)

_TRANSLATED_DIRECTIONS = (Direction.TGT_SRC, Direction.SRC_TGT, Direction.TGT_TGT)


@dataclass(frozen=True)
class ExpansionSettings:
    target_langs: tuple[str, ...]
    configs: frozenset = field(default_factory=lambda: frozenset(Direction))
    qe_threshold: float = 0.75

    def __post_init__(self):
        object.__setattr__(self, "target_langs", tuple(self.target_langs))
        object.__setattr__(self, "configs", frozenset(Direction(c) for c in self.configs))
        for lang in self.target_langs:
            check_lang_code(lang)
        if not self.configs:
            raise ValidationError("configs must be non-empty")
        if not 0.0 <= self.qe_threshold <= 1.0:
            raise ValidationError(f"qe_threshold must lie in [0, 1], got {self.qe_threshold}")


@dataclass(frozen=True)
class BilingualPair:
    example_id: str
    direction: Direction
    lang: str
    premise_text: str
    hypothesis_text: str
    label: str
    min_translated_qe: float | None
    source: str = "mnli"
    group_id: str = ""

    def __post_init__(self):
        if (self.direction is Direction.SRC_SRC) != (self.min_translated_qe is None):
            raise ValidationError("min_translated_qe must be absent exactly for src_src pairs")


class TranslatorPort(Protocol):
    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str: ...


class QEPort(Protocol):
    def score(self, source_text: str, translated_text: str, lang: str) -> float: ...


class FileTranslator:
    """Looks translations up in a cache keyed by (source text, target language)."""

    def __init__(self, table: Mapping[tuple[str, str], str]):
        self._table = {(nfc(k[0]), k[1]): v for k, v in table.items()}

    def translate(self, text, src_lang, tgt_lang):
        try:
            return self._table[(nfc(text), tgt_lang)]
        except KeyError:
            raise LookupError(f"no cached translation of {text[:40]!r} into {tgt_lang}") from None


class FileQE:
    """QE stub backed by a table keyed by ``content_hash(source, translation, lang)``."""

    def __init__(self, table: Mapping[str, float]):
        self._table = dict(table)

    def score(self, source_text, translated_text, lang):
        key = content_hash(source_text, translated_text, lang)
        if key not in self._table:
            raise LookupError(f"no QE score for translation into {lang}")
        return float(self._table[key])


def translate_examples(examples: Iterable[NliExample], langs: Sequence[str],
                       translator: TranslatorPort, qe: QEPort | None = None) -> list[TranslationRecord]:
    """Render both sides of every example in every language, scoring each sentence when a QE port is given."""
    out = []
    for ex in examples:
        for lang in langs:
            for side in ("premise", "hypothesis"):
                src = getattr(ex, side)
                text = translator.translate(src, SOURCE_LANG, lang)
                score = None if qe is None else qe.score(src, text, lang)
                out.append(TranslationRecord(ex.id, side, lang, nfc(text), score))
    return out


def index_translations(records: Iterable[TranslationRecord]) -> dict[str, dict[str, dict[str, TranslationRecord]]]:
    """example_id -> lang -> side -> record."""
    idx: dict = defaultdict(lambda: defaultdict(dict))
    for r in records:
        idx[r.example_id][r.lang][r.side] = r
    return {k: dict(v) for k, v in idx.items()}


def _premise_group(ex: NliExample) -> str:
    return content_hash(ex.source, ex.premise)


def expand_example(ex: NliExample, translations: Mapping[str, Mapping[str, TranslationRecord]],
                   settings: ExpansionSettings) -> list[BilingualPair]:
    """Emit one pair per (target language, translated direction) plus a single source-source pair."""
    group = _premise_group(ex)
    pairs = []
    for lang in settings.target_langs:
        for direction in _TRANSLATED_DIRECTIONS:
            if direction not in settings.configs:
                continue
            sides = {"premise": ex.premise, "hypothesis": ex.hypothesis}
            scores = []
            for side in direction.translated_sides:
                rec = translations.get(lang, {}).get(side)
                if rec is None:
                    raise ValidationError(f"missing translation for example {ex.id!r}: ({lang}, {side})")
                if rec.qe_score is None:
                    raise ValidationError(f"missing qe_score for example {ex.id!r}: ({lang}, {side})")
                sides[side] = rec.text
                scores.append(rec.qe_score)
            pairs.append(BilingualPair(ex.id, direction, lang, sides["premise"], sides["hypothesis"],
                                       ex.label, min(scores), ex.source, group))
    if Direction.SRC_SRC in settings.configs:
        pairs.append(BilingualPair(ex.id, Direction.SRC_SRC, SOURCE_LANG, ex.premise, ex.hypothesis,
                                   ex.label, None, ex.source, group))
    return pairs


def filter_by_qe(pairs: Iterable[BilingualPair], threshold: float) -> list[BilingualPair]:
    """Keep source-source pairs and pairs whose weakest translated side scores at least ``threshold``."""
    return [p for p in pairs
            if p.direction is Direction.SRC_SRC or p.min_translated_qe >= threshold]


def build_contrastive(pairs: Iterable[BilingualPair]) -> list[TrainInstance]:
    """Group pairs by (premise, language, direction) and turn each group into one instance.

    Entailments become positives and contradictions negatives; neutral
    hypotheses become extra negatives for SNLI-sourced groups and are
    ignored otherwise. Groups without a positive are dropped.
    """
    groups: OrderedDict = OrderedDict()
    for p in pairs:
        groups.setdefault((p.group_id or p.example_id, p.lang, p.direction), []).append(p)

    out = []
    for (_, lang, direction), members in groups.items():
        query = members[0].premise_text
        pos, neg = [], []
        for p in members:
            h = nfc(p.hypothesis_text)
            if p.label == "entailment":
                bucket = pos
            elif p.label == "contradiction" or p.source == "snli":
                bucket = neg
            else:
                continue
            if h not in bucket:
                bucket.append(h)
        neg = [h for h in neg if h not in pos]
        if not pos:
            continue
        out.append(TrainInstance(
            query=nfc(query), pos=tuple(pos), neg=tuple(neg),
            meta={"lang": lang, "direction": direction.value, "source": members[0].source},
        ))
    return out


def build_dataset(examples: Sequence[NliExample], translations: Iterable[TranslationRecord],
                  settings: ExpansionSettings) -> tuple[list[TrainInstance], dict]:
    """Expand, filter and regroup a corpus. Returns the instances and pair counts."""
    idx = index_translations(translations)
    expanded = []
    for ex in examples:
        expanded.extend(expand_example(ex, idx.get(ex.id, {}), settings))
    kept = filter_by_qe(expanded, settings.qe_threshold)
    instances = build_contrastive(kept)
    stats = {"examples": len(examples), "pairs": len(expanded), "kept_pairs": len(kept),
             "instances": len(instances)}
    return instances, stats
