"""Exact item index, Hit@K / Coverage@K, and per-task evaluation reports."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from itemforge.catalog import Catalog
from itemforge.conditions import Condition, evaluate as eval_condition
from itemforge.encoder import EncoderModel, embed, embed_item, item_text, tokenize
from itemforge.templates import TASKS

TASK_METRICS = {
    "UH2I": "hit@k", "I2I": "hit@k", "US2I": "hit@k", "AS2I": "hit@k", "NM2I": "hit@k", "UQ2I": "hit@k",
    "FA2I": "coverage@k", "SA2I": "coverage@k", "VC2I": "coverage@k", "NA2I": "coverage@k",
}


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class ItemIndex:
    item_ids: tuple[str, ...]
    matrix: np.ndarray
    model_fingerprint: str
    empty_items: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.item_ids)


def build_index(catalog: Catalog, model: EncoderModel) -> ItemIndex:
    rows = np.zeros((len(catalog), model.dim))
    empty = []
    for r, item in enumerate(catalog):
        if not tokenize(item_text(item), model.tokenizer, model.tokenizer.max_item_tokens):
            empty.append(item.id)
            continue
        rows[r] = embed_item(item, model)
    matrix = rows
    matrix.setflags(write=False)
    return ItemIndex(catalog.ids, matrix, model.fingerprint(), tuple(empty))


def topk(index: ItemIndex, query_vec: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exact top-k by dot product; ties go to the smaller item id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = index.matrix @ np.asarray(query_vec, dtype=np.float64)
    order = _rank(scores, index.item_ids)[:k]
    return [(index.item_ids[i], float(scores[i])) for i in order]


def _rank(scores: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    id_rank = _id_order(tuple(ids))
    return np.lexsort((id_rank, -scores))


_ID_ORDER_CACHE: dict[int, tuple[tuple[str, ...], np.ndarray]] = {}


def _id_order(ids: tuple[str, ...]) -> np.ndarray:
    cached = _ID_ORDER_CACHE.get(id(ids))
    if cached is not None and cached[0] is ids:
        return cached[1]
    ranks = np.empty(len(ids), dtype=np.int64)
    ranks[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
    _ID_ORDER_CACHE[id(ids)] = (ids, ranks)
    return ranks


def hit_at_k(ranked: Sequence[str], positives: Iterable[str], k: int) -> float:
    positives = set(positives)
    if not positives:
        raise EvalError("hit@k needs at least one positive")
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 if positives.intersection(ranked[:k]) else 0.0


def coverage_at_k(ranked: Sequence[str], condition: Condition, catalog: Catalog, k: int) -> float:
    """Share of the k slots held by items that fully satisfy ``condition``."""
    if condition is None:
        raise EvalError("coverage@k needs a condition")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = 0
    for iid in ranked[:k]:
        if iid not in catalog:
            raise EvalError(f"unresolvable item id {iid!r}")
        hits += eval_condition(catalog[iid], condition)
    return hits / k


@dataclass
class TaskScore:
    metric: str
    value: float
    count: int


@dataclass
class EvalReport:
    tasks: dict[str, TaskScore]
    meta: dict = field(default_factory=dict)
    wall_clock: Optional[float] = None

    def to_json(self, include_timing: bool = False) -> dict:
        out = {
            "meta": dict(self.meta),
            "tasks": {t: {"metric": s.metric, "value": s.value, "count": s.count} for t, s in self.tasks.items()},
        }
        if include_timing and self.wall_clock is not None:
            out["meta"]["wall_clock_seconds"] = round(self.wall_clock, 3)
        return out

    @classmethod
    def from_json(cls, raw: Mapping) -> "EvalReport":
        meta = dict(raw.get("meta", {}))
        wall = meta.pop("wall_clock_seconds", None)
        tasks = {t: TaskScore(v["metric"], float(v["value"]), int(v["count"])) for t, v in raw["tasks"].items()}
        return cls(tasks, meta, wall)

    def values(self) -> dict[str, float]:
        return {t: s.value for t, s in self.tasks.items()}

    def save(self, path: Union[str, Path], include_timing: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_json(include_timing), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EvalReport":
        return cls.from_json(json.loads(Path(path).read_text()))


def dataset_hash(samples) -> str:
    h = hashlib.sha256()
    for s in samples:
        h.update(json.dumps(s.to_json(), sort_keys=True).encode())
    return h.hexdigest()[:16]


def rank_queries(index: ItemIndex, queries: Sequence[str], model: EncoderModel, k: int) -> list[list[str]]:
    if not queries:
        return []
    q = np.vstack([embed(text, model) for text in queries])
    scores = q @ index.matrix.T
    id_rank = _id_order(index.item_ids)
    out = []
    for row in scores:
        order = np.lexsort((id_rank, -row))[:k]
        out.append([index.item_ids[i] for i in order])
    return out


def per_sample_scores(samples, catalog: Catalog, model: EncoderModel, k: int = 5,
                      index: ItemIndex | None = None) -> list[float]:
    index = index or build_index(catalog, model)
    ranked = rank_queries(index, [s.query for s in samples], model, k)
    out = []
    for s, r in zip(samples, ranked):
        metric = TASK_METRICS[s.task]
        if metric == "coverage@k":
            if s.condition is None:
                raise EvalError(f"{s.sample_id}: {s.task} is scored by coverage but has no condition")
            out.append(coverage_at_k(r, s.condition, catalog, k))
        else:
            out.append(hit_at_k(r, s.positives, k))
    return out


def evaluate(
    dataset,
    catalog: Catalog,
    model: EncoderModel,
    k: int = 5,
    seed: Optional[int] = None,
    ood_label: Optional[str] = None,
) -> EvalReport:
    """Mean Hit@k or Coverage@k per task over the given (test) samples."""
    started = time.perf_counter()
    samples = list(dataset)
    if not samples:
        raise EvalError("empty evaluation set")
    scores = per_sample_scores(samples, catalog, model, k)
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for s, v in zip(samples, scores):
        sums[s.task] = sums.get(s.task, 0.0) + v
        counts[s.task] = counts.get(s.task, 0) + 1
    metric_name = {"hit@k": f"hit@{k}", "coverage@k": f"coverage@{k}"}
    tasks = {
        t: TaskScore(metric_name[TASK_METRICS[t]], sums[t] / counts[t], counts[t])
        for t in TASKS if t in counts
    }
    meta = {
        "dataset_hash": dataset_hash(samples),
        "model_fingerprint": model.fingerprint(),
        "catalog": catalog.name,
        "k": k,
        "seed": seed,
    }
    domain = model.meta.get("train_domain")
    if domain:
        meta["model_domain"] = domain
    # A model trained on another catalog is out of domain here.
    meta["ood"] = bool(ood_label) or (domain is not None and domain != catalog.name)
    if ood_label:
        meta["ood_label"] = ood_label
    return EvalReport(tasks, meta, time.perf_counter() - started)
