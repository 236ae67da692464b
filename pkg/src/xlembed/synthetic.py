"""A small synthetic multilingual world for desk-scale runs.

A fixed inventory of concepts is rendered in every language through a
per-language pseudo-word lexicon, so a sentence is a sequence of concepts
and its translation is the same sequence rendered in another lexicon.
Because the semantics are known exactly, the module also provides:

* deterministic translator and QE stubs,
* a teacher that scores (query, passage) pairs by concept overlap,
* an oracle encoder (bag of one-hot concepts), and
* fixture generators for every task family.
"""

from __future__ import annotations

import hashlib
from functools import cached_property
from pathlib import Path

import numpy as np

from .datamodel import SOURCE_LANG, NliExample, TranslationRecord, serialize_nli, write_jsonl
from .datasets import LabeledDataset

LITE_LANGS = ("amh_Ethi", "gaz_Latn", "hau_Latn", "ibo_Latn", "kin_Latn",
              "swa_Latn", "xho_Latn", "yor_Latn", "zul_Latn")

# three clean target languages plus one whose translations mostly fail QE
DESK_LANGS = ("hau_Latn", "swa_Latn", "yor_Latn", "fuv_Latn")

_LATIN_CONSONANTS = "bcdfghjklmnprstvwyz"
_LATIN_VOWELS = "aeiou"


def _seed_for(*parts) -> int:
    h = hashlib.blake2b("|".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class ToyWorld:
    """Concept inventory plus one lexicon per language."""

    def __init__(self, seed: int = 0, n_concepts: int = 100,
                 langs: tuple[str, ...] = (SOURCE_LANG, *LITE_LANGS, "fuv_Latn"), cognate_rate: float = 0.5):
        if not 0.0 <= cognate_rate <= 1.0:
            raise ValueError("cognate_rate must lie in [0, 1]")
        self.seed = seed
        self.n_concepts = n_concepts
        self.cognate_rate = cognate_rate
        # the source lexicon comes first so cognates can borrow from it
        self.langs = (SOURCE_LANG, *(l for l in langs if l != SOURCE_LANG))
        self.lexicon: dict[str, list[str]] = {}
        self._reverse: dict[str, int] = {}
        for lang in self.langs:
            words = self._make_lexicon(lang)
            self.lexicon[lang] = words
            for i, w in enumerate(words):
                self._reverse[w] = i

    def _make_lexicon(self, lang: str) -> list[str]:
        rng = np.random.default_rng(_seed_for(self.seed, "lexicon", lang))
        if lang.endswith("_Ethi"):
            # Ethiopic syllabary block
            syllables = [chr(c) for c in range(0x1200, 0x1358)]
        else:
            cons = list(rng.permutation(list(_LATIN_CONSONANTS))[:8])
            vowels = list(rng.permutation(list(_LATIN_VOWELS))[:3])
            syllables = [c + v for c in cons for v in vowels]
        source = self.lexicon.get(SOURCE_LANG)
        borrow = rng.random(self.n_concepts) < self.cognate_rate
        words: list[str] = []
        while len(words) < self.n_concepts:
            if source is not None and borrow[len(words)] and not lang.endswith("_Ethi"):
                # loanword: the source form with a language-specific final syllable
                w = source[len(words)] + syllables[int(rng.integers(len(syllables)))]
            else:
                n_syl = int(rng.integers(2, 4))
                w = "".join(syllables[int(i)] for i in rng.integers(0, len(syllables), n_syl))
            if w not in self._reverse and w not in words:
                words.append(w)
        return words

    # -- rendering --------------------------------------------------------------

    def render(self, concepts, lang: str) -> str:
        lex = self.lexicon[lang]
        return " ".join(lex[c] for c in concepts)

    def concepts(self, text: str) -> list[int]:
        return [self._reverse[w] for w in text.split() if w in self._reverse]

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        return self.render(self.concepts(text), tgt_lang)

    def concept_cosine(self, a: str, b: str) -> float:
        ca, cb = set(self.concepts(a)), set(self.concepts(b))
        if not ca or not cb:
            return 0.0
        return len(ca & cb) / np.sqrt(len(ca) * len(cb))

    def teacher_score(self, query: str, passage: str) -> float:
        """Cross-encoder stand-in: scaled concept overlap."""
        return 10.0 * self.concept_cosine(query, passage)

    def qe_score(self, example_id: str, side: str, lang: str, noisy_langs=("fuv_Latn",)) -> float:
        rng = np.random.default_rng(_seed_for(self.seed, "qe", example_id, side, lang))
        if lang in noisy_langs:
            return float(rng.uniform(0.30, 0.74))
        return float(rng.uniform(0.76, 0.99))

    # -- oracle encoder -----------------------------------------------------------

    @cached_property
    def oracle_encoder(self):
        return ConceptOracleEncoder(self)

    # -- NLI corpus -----------------------------------------------------------------

    def nli_corpus(self, n_groups: int, seed: int = 0, premise_len: int = 6) -> list[NliExample]:
        """``n_groups`` premises, each with an entailed, a neutral and a contradicting hypothesis.

        Even groups are tagged ``mnli``, odd groups ``snli``.
        """
        rng = np.random.default_rng(_seed_for(self.seed, "nli", seed))
        out, seen = [], set()
        while len(out) < 3 * n_groups:
            g = len(out) // 3
            prem = [int(c) for c in rng.choice(self.n_concepts, premise_len, replace=False)]
            if frozenset(prem) in seen:
                continue
            seen.add(frozenset(prem))
            others = [int(c) for c in rng.permutation(self.n_concepts) if c not in prem]
            keep = sorted(rng.choice(premise_len, 3, replace=False))
            ent = [prem[i] for i in keep]
            neu = [prem[keep[0]], prem[keep[1]], others[0], others[1]]
            con = others[2:5]
            source = "mnli" if g % 2 == 0 else "snli"
            p = self.render(prem, SOURCE_LANG)
            for label, hyp in (("entailment", ent), ("neutral", neu), ("contradiction", con)):
                out.append(NliExample(f"g{g:05d}-{label[0]}", p, self.render(hyp, SOURCE_LANG), label, source))
        return out

    def translation_records(self, examples, langs) -> list[TranslationRecord]:
        out = []
        for ex in examples:
            for lang in langs:
                for side in ("premise", "hypothesis"):
                    text = self.translate(getattr(ex, side), SOURCE_LANG, lang)
                    out.append(TranslationRecord(ex.id, side, lang, text, self.qe_score(ex.id, side, lang)))
        return out

    # -- evaluation fixtures ------------------------------------------------------

    def fixture(self, family: str, lang: str, seed: int = 0, size: int = 60, n_classes: int = 6,
                tag: str = "") -> LabeledDataset:
        """A ``family``-shaped dataset in ``lang``; ``tag`` separates tasks sharing a family."""
        rng = np.random.default_rng(_seed_for(self.seed, "fixture", family, lang, seed, size, n_classes, tag))
        return _FIXTURES[family](self, rng, lang, size, n_classes)


class ConceptOracleEncoder:
    """Embeds a text as the normalized bag of its one-hot concepts (language independent)."""

    def __init__(self, world: ToyWorld):
        self.world = world
        self.dim = world.n_concepts + 1

    def embed(self, texts, instruction=""):
        out = np.zeros((len(texts), self.dim))
        for i, t in enumerate(texts):
            for c in self.world.concepts(t):
                out[i, c] += 1.0
            if not out[i].any():
                out[i, -1] = 1.0
        return out / np.linalg.norm(out, axis=1, keepdims=True)


# -- fixture generators ---------------------------------------------------------


def _distinct_sets(rng, world, n, size):
    sets, seen = [], set()
    while len(sets) < n:
        s = [int(c) for c in rng.choice(world.n_concepts, size, replace=False)]
        if frozenset(s) not in seen:
            seen.add(frozenset(s))
            sets.append(s)
    return sets


def _topic_words(world, n_topics, per_topic=6):
    # disjoint concept blocks, one per class, shrunk to fit the inventory
    per_topic = min(per_topic, world.n_concepts // n_topics)
    if per_topic < 2:
        raise ValueError(f"{n_topics} classes need at least {2 * n_topics} concepts")
    return [list(range(k * per_topic, (k + 1) * per_topic)) for k in range(n_topics)]


def _bitext(world, rng, lang, size, _):
    sents = _distinct_sets(rng, world, size, 5)
    return LabeledDataset("Btxt", {"src": [world.render(s, SOURCE_LANG) for s in sents],
                                   "tgt": [world.render(s, lang) for s in sents]})


def _pairclf(world, rng, lang, size, _):
    sents = _distinct_sets(rng, world, size, 5)
    t1, t2, labels = [], [], []
    for i, s in enumerate(sents):
        t1.append(world.render(s, lang))
        if i % 2 == 0:
            t2.append(world.render(list(rng.permutation(s)), SOURCE_LANG))
            labels.append(1)
        else:
            t2.append(world.render(sents[(i + 1) % size], SOURCE_LANG))
            labels.append(0)
    return LabeledDataset("PrClf", {"text1": t1, "text2": t2, "labels": labels})


def _labeled_texts(world, rng, lang, n, n_classes):
    topics = _topic_words(world, n_classes)
    labels = [i % n_classes for i in range(n)]
    rng.shuffle(labels)
    k = min(4, len(topics[0]))
    texts = [world.render(list(rng.choice(topics[y], k, replace=False)), lang) for y in labels]
    return texts, [int(y) for y in labels]


def _clf(world, rng, lang, size, n_classes):
    tr_x, tr_y = _labeled_texts(world, rng, lang, 2 * size, n_classes)
    te_x, te_y = _labeled_texts(world, rng, lang, size, n_classes)
    return LabeledDataset("Clf", {"train_texts": tr_x, "train_labels": tr_y,
                                  "test_texts": te_x, "test_labels": te_y})


def _multilabel_split(world, rng, lang, n, n_labels):
    topics = _topic_words(world, n_labels)
    texts, sets = [], []
    for _ in range(n):
        k = int(rng.integers(1, 4))
        labs = sorted(int(l) for l in rng.choice(n_labels, k, replace=False))
        words = [int(w) for l in labs for w in rng.choice(topics[l], 2, replace=False)]
        texts.append(world.render(list(rng.permutation(words)), lang))
        sets.append(frozenset(f"label{l}" for l in labs))
    return texts, sets


def _multiclf(world, rng, lang, size, n_classes):
    tr_x, tr_y = _multilabel_split(world, rng, lang, 2 * size, n_classes)
    te_x, te_y = _multilabel_split(world, rng, lang, size, n_classes)
    return LabeledDataset("MultiClf", {"train_texts": tr_x, "train_labelsets": tr_y,
                                       "test_texts": te_x, "test_labelsets": te_y})


def _clust(world, rng, lang, size, n_classes):
    texts, labels = _labeled_texts(world, rng, lang, size, n_classes)
    return LabeledDataset("Clust", {"texts": texts, "labels": labels})


def _sts(world, rng, lang, size, _):
    t1, t2, scores = [], [], []
    for _ in range(size):
        la, lb = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        a = [int(c) for c in rng.choice(world.n_concepts, la, replace=False)]
        shared = int(rng.integers(0, min(la, lb) + 1))
        rest = [int(c) for c in rng.permutation(world.n_concepts) if c not in a][: lb - shared]
        b = list(rng.permutation(a[:shared] + rest))
        t1.append(world.render(a, lang))
        t2.append(world.render(b, lang))
        scores.append(5.0 * shared / np.sqrt(la * lb))
    return LabeledDataset("STS", {"text1": t1, "text2": t2, "scores": scores})


def _retrieval(world, rng, lang, size, _):
    docs = _distinct_sets(rng, world, 2 * size, 7)
    queries, qrels = {}, {}
    for i in range(size):
        q = [int(c) for c in rng.choice(docs[i], 3, replace=False)]
        queries[f"q{i}"] = world.render(q, lang)
        qrels[f"q{i}"] = [f"d{i}"]
    corpus = {f"d{j}": world.render(d, lang) for j, d in enumerate(docs)}
    return LabeledDataset("Rtrvl", {"queries": queries, "corpus": corpus, "qrels": qrels})


def _rerank(world, rng, lang, size, _):
    queries, cands, labels = [], [], []
    for _ in range(size):
        q = [int(c) for c in rng.choice(world.n_concepts, 4, replace=False)]
        rest = [int(c) for c in rng.permutation(world.n_concepts) if c not in q]
        items = [(world.render(q[:3] + rest[i:i + 2], lang), 1) for i in (0, 2)]
        items += [(world.render([q[0]] + rest[4 + 4 * i:8 + 4 * i], lang), 0) for i in range(6)]
        order = rng.permutation(len(items))
        queries.append(world.render(q, lang))
        cands.append([items[k][0] for k in order])
        labels.append([items[k][1] for k in order])
    return LabeledDataset("Rrnk", {"queries": queries, "candidates": cands, "labels": labels})


_FIXTURES = {"Btxt": _bitext, "PrClf": _pairclf, "Clf": _clf, "MultiClf": _multiclf,
             "Clust": _clust, "STS": _sts, "Rtrvl": _retrieval, "Rrnk": _rerank}


def uniform_qe_pairs(n: int, seed: int = 0):
    """Single-side translated pairs with QE scores drawn uniformly from [0, 1]."""
    from .datamodel import Direction
    from .pipeline import BilingualPair

    rng = np.random.default_rng(seed)
    return [BilingualPair(f"ex{i}", Direction.TGT_SRC, "hau_Latn", f"p{i}", f"h{i}", "entailment",
                          float(q), "mnli", f"ex{i}")
            for i, q in enumerate(rng.uniform(0.0, 1.0, n))]


def write_desk_inputs(out_dir, n_groups: int = 20, langs=DESK_LANGS, seed: int = 0,
                      world: ToyWorld | None = None) -> dict[str, Path]:
    """Write ``nli.jsonl``, ``translations.jsonl`` and ``corpus.jsonl`` for a desk run.

    With the defaults the expanded, QE-filtered data holds 200 instances.
    The corpus holds every hypothesis in every language, one ``{"text"}``
    record per line.
    """
    world = world or ToyWorld(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    examples = world.nli_corpus(n_groups, seed=seed)
    records = world.translation_records(examples, langs)
    texts = {ex.hypothesis for ex in examples} | {r.text for r in records if r.side == "hypothesis"}
    paths = {"nli": out / "nli.jsonl", "translations": out / "translations.jsonl", "corpus": out / "corpus.jsonl"}
    paths["nli"].write_text(serialize_nli(examples), encoding="utf-8")
    write_jsonl(paths["translations"], (r.to_dict() for r in records))
    write_jsonl(paths["corpus"], ({"text": t} for t in sorted(texts)))
    return paths
