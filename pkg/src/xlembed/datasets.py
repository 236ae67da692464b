"""Per-family evaluation datasets, their newline-delimited file schemas, and dispatch.

File schemas (one JSON object per line):

=========  ==============================================================
Btxt       {"src": str, "tgt": str}                      (line i aligned)
PrClf      {"text1": str, "text2": str, "label": 0|1}
Clf        {"text": str, "label": str|int, "split": "train"|"test"}
MultiClf   {"text": str, "labels": [str], "split": "train"|"test"}
Clust      {"text": str, "label": str|int}
STS        {"text1": str, "text2": str, "score": float}
Rtrvl      {"type": "query", "id", "text"} | {"type": "doc", "id", "text"}
           | {"type": "qrel", "query_id", "doc_id"}
Rrnk       {"query": str, "candidates": [str], "labels": [0|1]}
=========  ==============================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from . import evaluator as ev
from .datamodel import read_jsonl, write_jsonl

RETRIEVAL_INSTRUCTION = "Given a question, retrieve passages that answer the question"
RERANK_INSTRUCTION = "Given a query, rank the candidate passages by relevance"


@dataclass
class LabeledDataset:
    family: str
    data: dict[str, Any]

    def __post_init__(self):
        if self.family not in ev.FAMILIES:
            raise ValueError(f"unknown task family {self.family!r}")
        _check_shape(self.family, self.data)

    def texts(self) -> list[str]:
        """Every text the encoder will be asked to embed."""
        d, f = self.data, self.family
        if f == "Btxt":
            return d["src"] + d["tgt"]
        if f in ("PrClf", "STS"):
            return d["text1"] + d["text2"]
        if f in ("Clf", "MultiClf"):
            return d["train_texts"] + d["test_texts"]
        if f == "Clust":
            return list(d["texts"])
        if f == "Rtrvl":
            return list(d["queries"].values()) + list(d["corpus"].values())
        return list(d["queries"]) + [c for cands in d["candidates"] for c in cands]


_REQUIRED = {
    "Btxt": ("src", "tgt"),
    "PrClf": ("text1", "text2", "labels"),
    "Clf": ("train_texts", "train_labels", "test_texts", "test_labels"),
    "MultiClf": ("train_texts", "train_labelsets", "test_texts", "test_labelsets"),
    "Clust": ("texts", "labels"),
    "STS": ("text1", "text2", "scores"),
    "Rtrvl": ("queries", "corpus", "qrels"),
    "Rrnk": ("queries", "candidates", "labels"),
}


def _check_shape(family, data):
    missing = [k for k in _REQUIRED[family] if k not in data]
    if missing:
        raise ValueError(f"{family} dataset missing {missing}")
    a, b = _REQUIRED[family][0], _REQUIRED[family][1]
    if family in ("Btxt", "PrClf", "STS", "Clust") and len(data[a]) != len(data[b]):
        raise ValueError(f"{family} dataset: {a} and {b} lengths differ")


def evaluate_dataset(ds: LabeledDataset, encoder, seed: int = 0) -> ev.MetricResult:
    d, f = ds.data, ds.family
    emb = encoder.embed
    if f == "Btxt":
        return ev.bitext_f1(emb(d["src"]), emb(d["tgt"]))
    if f == "PrClf":
        return ev.pair_classification(emb(d["text1"]), emb(d["text2"]), d["labels"])
    if f == "STS":
        return ev.sts_spearman(emb(d["text1"]), emb(d["text2"]), d["scores"])
    if f == "Clf":
        return ev.linear_probe(emb(d["train_texts"]), d["train_labels"], emb(d["test_texts"]),
                               d["test_labels"], seed=seed)
    if f == "MultiClf":
        return ev.multilabel_eval(emb(d["train_texts"]), d["train_labelsets"], emb(d["test_texts"]),
                                  d["test_labelsets"])
    if f == "Clust":
        return ev.cluster_vmeasure(emb(d["texts"]), d["labels"], seed=seed)
    if f == "Rtrvl":
        qids, dids = list(d["queries"]), list(d["corpus"])
        pos = {did: j for j, did in enumerate(dids)}
        qrels = [{pos[x] for x in d["qrels"].get(q, ())} for q in qids]
        return ev.retrieval_ndcg(emb([d["queries"][q] for q in qids], RETRIEVAL_INSTRUCTION),
                                 emb([d["corpus"][x] for x in dids]), qrels)
    cand = [emb(c) for c in d["candidates"]]
    return ev.rerank_map(emb(d["queries"], RERANK_INSTRUCTION), cand, d["labels"])


# -- file IO --------------------------------------------------------------------


def load_dataset(path, family: str) -> LabeledDataset:
    rows = read_jsonl(path)
    if family == "Btxt":
        data = {"src": [r["src"] for r in rows], "tgt": [r["tgt"] for r in rows]}
    elif family == "PrClf":
        data = {"text1": [r["text1"] for r in rows], "text2": [r["text2"] for r in rows],
                "labels": [int(r["label"]) for r in rows]}
    elif family == "STS":
        data = {"text1": [r["text1"] for r in rows], "text2": [r["text2"] for r in rows],
                "scores": [float(r["score"]) for r in rows]}
    elif family in ("Clf", "MultiClf"):
        key = "label" if family == "Clf" else "labels"
        tr = [r for r in rows if r["split"] == "train"]
        te = [r for r in rows if r["split"] == "test"]
        lab = (lambda r: r[key]) if family == "Clf" else (lambda r: frozenset(r[key]))
        suffix = "labels" if family == "Clf" else "labelsets"
        data = {"train_texts": [r["text"] for r in tr], f"train_{suffix}": [lab(r) for r in tr],
                "test_texts": [r["text"] for r in te], f"test_{suffix}": [lab(r) for r in te]}
    elif family == "Clust":
        data = {"texts": [r["text"] for r in rows], "labels": [r["label"] for r in rows]}
    elif family == "Rtrvl":
        qrels: dict[str, list] = {}
        for r in rows:
            if r["type"] == "qrel":
                qrels.setdefault(r["query_id"], []).append(r["doc_id"])
        data = {"queries": {r["id"]: r["text"] for r in rows if r["type"] == "query"},
                "corpus": {r["id"]: r["text"] for r in rows if r["type"] == "doc"},
                "qrels": qrels}
    elif family == "Rrnk":
        data = {"queries": [r["query"] for r in rows],
                "candidates": [list(r["candidates"]) for r in rows],
                "labels": [[int(x) for x in r["labels"]] for r in rows]}
    else:
        raise ValueError(f"unknown task family {family!r}")
    return LabeledDataset(family, data)


def dataset_records(ds: LabeledDataset) -> list[dict]:
    """Inverse of :func:`load_dataset`."""
    d, f = ds.data, ds.family
    if f == "Btxt":
        return [{"src": s, "tgt": t} for s, t in zip(d["src"], d["tgt"])]
    if f == "PrClf":
        return [{"text1": a, "text2": b, "label": int(l)} for a, b, l in zip(d["text1"], d["text2"], d["labels"])]
    if f == "STS":
        return [{"text1": a, "text2": b, "score": float(s)} for a, b, s in zip(d["text1"], d["text2"], d["scores"])]
    if f == "Clf":
        return ([{"text": t, "label": l, "split": "train"} for t, l in zip(d["train_texts"], d["train_labels"])]
                + [{"text": t, "label": l, "split": "test"} for t, l in zip(d["test_texts"], d["test_labels"])])
    if f == "MultiClf":
        return ([{"text": t, "labels": sorted(l), "split": "train"}
                 for t, l in zip(d["train_texts"], d["train_labelsets"])]
                + [{"text": t, "labels": sorted(l), "split": "test"}
                   for t, l in zip(d["test_texts"], d["test_labelsets"])])
    if f == "Clust":
        return [{"text": t, "label": l} for t, l in zip(d["texts"], d["labels"])]
    if f == "Rtrvl":
        return ([{"type": "query", "id": q, "text": t} for q, t in d["queries"].items()]
                + [{"type": "doc", "id": x, "text": t} for x, t in d["corpus"].items()]
                + [{"type": "qrel", "query_id": q, "doc_id": x} for q, xs in d["qrels"].items() for x in xs])
    return [{"query": q, "candidates": list(cs), "labels": [int(x) for x in ls]}
            for q, cs, ls in zip(d["queries"], d["candidates"], d["labels"])]


def save_dataset(path, ds: LabeledDataset) -> None:
    write_jsonl(path, dataset_records(ds))
