"""Hashed bag-of-tokens text encoder and its InfoNCE trainer.

Texts are lowercased, split into words, and each word contributes its own
token plus its boundary-padded character trigrams. Tokens hash into a fixed
bucket table; a text's embedding is the L2-normalized mean of its bucket rows.
Queries and items share the table.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from itemforge.catalog import Catalog, Item

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
# Paired with the default learning rate of 1e-3 (see TrainConfig).
INIT_SCALE = 0.002
_WORD = re.compile(r"[^\W_]+")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TokenizerConfig:
    bucket_count: int = 65536
    use_word_tokens: bool = True
    use_char_trigrams: bool = True
    max_query_tokens: int = 512
    max_item_tokens: int = 256

    def __post_init__(self) -> None:
        if self.bucket_count < 256 or self.bucket_count & (self.bucket_count - 1):
            raise ValueError("bucket_count must be a power of two >= 256")
        if self.max_query_tokens < 1 or self.max_item_tokens < 1:
            raise ValueError("max token lengths must be >= 1")


@lru_cache(maxsize=1 << 18)
def _word_tokens(word: str, bucket_count: int, words: bool, trigrams: bool) -> tuple[int, ...]:
    out = []
    if words:
        out.append(_bucket("w\x1f" + word, bucket_count))
    if trigrams:
        padded = f"<{word}>"
        out.extend(_bucket("t\x1f" + padded[i:i + 3], bucket_count) for i in range(len(padded) - 2))
    return tuple(out)


def _bucket(token: str, bucket_count: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & (bucket_count - 1)


def tokenize(text: str, cfg: TokenizerConfig, limit: Optional[int] = None) -> list[int]:
    """Bucket ids for ``text``, truncated to the first ``limit`` tokens."""
    out: list[int] = []
    for word in _WORD.findall(text.lower()):
        out.extend(_word_tokens(word, cfg.bucket_count, cfg.use_word_tokens, cfg.use_char_trigrams))
        if limit is not None and len(out) >= limit:
            break
    return out if limit is None else out[:limit]


def trigrams(word: str) -> list[str]:
    padded = f"<{word.lower()}>"
    return [padded[i:i + 3] for i in range(len(padded) - 2)]


@dataclass
class EncoderModel:
    tokenizer: TokenizerConfig
    table: np.ndarray
    temperature: float = 0.05
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.table = np.ascontiguousarray(self.table, dtype=np.float32)
        if self.table.shape[0] != self.tokenizer.bucket_count:
            raise ValueError("table rows must equal bucket_count")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if not np.isfinite(self.table).all():
            raise ValueError("embedding table has non-finite weights")

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    @classmethod
    def init(
        cls,
        seed: int,
        tokenizer: TokenizerConfig | None = None,
        dim: int = 64,
        temperature: float = 0.05,
        scale: float = INIT_SCALE,
    ) -> "EncoderModel":
        """Seed-initialized (untrained) model with i.i.d. normal rows.

        Cosine scores ignore the overall scale, so ``scale`` only sets how far
        one SGD step moves the weights relative to their starting size.
        """
        tokenizer = tokenizer or TokenizerConfig()
        rng = np.random.default_rng(seed)
        table = rng.normal(0.0, scale, size=(tokenizer.bucket_count, dim)).astype(np.float32)
        return cls(tokenizer, table, temperature, {"init_seed": seed})

    def copy(self) -> "EncoderModel":
        return EncoderModel(self.tokenizer, self.table.copy(), self.temperature, dict(self.meta))

    def scaled(self, factor: float) -> "EncoderModel":
        """Same model with every table row multiplied by ``factor``."""
        return EncoderModel(self.tokenizer, self.table * np.float32(factor), self.temperature, dict(self.meta))

    def header(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "dim": self.dim,
            "bucket_count": self.tokenizer.bucket_count,
            "temperature": self.temperature,
            "tokenizer": asdict(self.tokenizer),
            "meta": self.meta,
        }

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True).encode("utf-8") + b"\n"
        return head + self.table.astype("<f4").tobytes(order="C")

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "EncoderModel":
        head, _, body = blob.partition(b"\n")
        header = json.loads(head)
        if header.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version {header.get('version')!r}")
        tok = TokenizerConfig(**header["tokenizer"])
        table = np.frombuffer(body, dtype="<f4").reshape(header["bucket_count"], header["dim"])
        return cls(tok, table.astype(np.float32), float(header["temperature"]), header.get("meta", {}))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EncoderModel":
        return cls.from_bytes(Path(path).read_bytes())

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        header = self.header()
        header.pop("meta")
        h.update(json.dumps(header, sort_keys=True).encode())
        h.update(self.table.astype("<f4").tobytes())
        return h.hexdigest()[:16]


# --- embedding --------------------------------------------------------------


def _pooling_weights(tokens: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    ids, counts = np.unique(np.asarray(tokens, dtype=np.int64), return_counts=True)
    return ids, counts / float(len(tokens))


def mean_vector(tokens: Sequence[int], table: np.ndarray) -> np.ndarray:
    if not len(tokens):
        return np.zeros(table.shape[1])
    ids, weights = _pooling_weights(tokens)
    return weights @ table[ids].astype(np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def embed(text: str, model: EncoderModel, limit: Optional[int] = None) -> np.ndarray:
    """L2-normalized mean of token rows; the zero vector for token-less text."""
    if limit is None:
        limit = model.tokenizer.max_query_tokens
    return normalize(mean_vector(tokenize(text, model.tokenizer, limit), model.table))


def item_text(item: Item) -> str:
    return item.text()


def embed_item(item: Item, model: EncoderModel) -> np.ndarray:
    return embed(item_text(item), model, model.tokenizer.max_item_tokens)


# --- loss -------------------------------------------------------------------


def info_nce_loss(
    query: np.ndarray,
    positive: np.ndarray,
    negatives: Sequence[np.ndarray],
    temperature: float,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Softmax cross-entropy over cosine scores divided by ``temperature``.

    Returns ``(loss, d_query, d_positive, d_negatives)`` with gradients taken
    with respect to the raw (unnormalized) input vectors.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    q = np.asarray(query, dtype=np.float64)
    cands = np.vstack([np.asarray(positive, dtype=np.float64)] + [np.asarray(n, dtype=np.float64) for n in negatives])
    if cands.shape[1] != q.shape[0]:
        raise ValueError("all vectors must share one dimension")
    q_norm = np.linalg.norm(q)
    c_norm = np.linalg.norm(cands, axis=1)
    if q_norm == 0 or np.any(c_norm == 0):
        raise ValueError("zero-norm vector in contrastive loss (empty text reached training?)")
    q_hat = q / q_norm
    c_hat = cands / c_norm[:, None]
    scores = c_hat @ q_hat
    logits = scores / temperature
    top = logits.max()
    shifted = np.exp(logits - top)
    total = shifted.sum()
    loss = float((top - logits[0]) + math.log(total))
    probs = shifted / total
    d_scores = probs.copy()
    d_scores[0] -= 1.0
    d_scores /= temperature
    d_q = (d_scores @ (c_hat - scores[:, None] * q_hat)) / q_norm
    d_c = d_scores[:, None] * (q_hat[None, :] - scores[:, None] * c_hat) / c_norm[:, None]
    return loss, d_q, d_c[0], d_c[1:]


# --- training ---------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch_size: int = 64
    learning_rate: float = 1e-3
    warmup_fraction: float = 0.1
    seed: int = 0
    deterministic: bool = True
    max_steps: Optional[int] = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must be in [0, 1)")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


def lr_schedule(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup over the first ``warmup_fraction`` of steps, then linear decay to zero."""
    warmup = math.ceil(cfg.warmup_fraction * total_steps)
    if step < warmup:
        return cfg.learning_rate * (step + 1) / warmup
    return cfg.learning_rate * (total_steps - step) / max(1, total_steps - warmup)


class _TokenCache:
    def __init__(self, model: EncoderModel, catalog: Catalog):
        self.tok = model.tokenizer
        self.items = {}
        for item in catalog:
            tokens = tokenize(item_text(item), self.tok, self.tok.max_item_tokens)
            if tokens:
                self.items[item.id] = _pooling_weights(tokens)

    def query(self, text: str):
        tokens = tokenize(text, self.tok, self.tok.max_query_tokens)
        return _pooling_weights(tokens) if tokens else None


def train(dataset, catalog: Catalog, model_init: EncoderModel, cfg: TrainConfig) -> EncoderModel:
    """SGD on InfoNCE with each sample's stored negatives; returns a new model.

    One optimizer step per batch; the step applies the batch-mean gradient.
    Multi-positive samples contribute one uniformly drawn positive per epoch.
    Per-epoch mean losses are recorded in ``model.meta["epoch_losses"]``.
    """
    samples = list(dataset)
    if not samples:
        raise TrainingError("empty training set")
    for s in samples:
        for iid in (*s.positives, *s.negatives):
            if iid not in catalog:
                raise TrainingError(f"{s.sample_id}: unknown item id {iid!r}")

    model = model_init.copy()
    steps_per_epoch = math.ceil(len(samples) / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    if cfg.max_steps is not None:
        total_steps = min(total_steps, cfg.max_steps)
    if total_steps == 0:
        return model

    cache = _TokenCache(model, catalog)
    queries = []
    for s in samples:
        q = cache.query(s.query)
        if q is None:
            raise TrainingError(f"{s.sample_id}: query has no tokens")
        queries.append(q)
    for iid in {i for s in samples for i in (*s.positives, *s.negatives)}:
        if iid not in cache.items:
            raise TrainingError(f"item {iid!r} has no tokens")

    table = model.table
    tau = model.temperature
    step = 0
    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, epoch])
        order = rng.permutation(len(samples))
        pos_pick = [s.positives[int(rng.integers(len(s.positives)))] for s in samples]
        losses = []
        for start in range(0, len(samples), cfg.batch_size):
            if step >= total_steps:
                break
            batch = order[start:start + cfg.batch_size]
            rows: list[np.ndarray] = []
            grads: list[np.ndarray] = []
            for idx in batch:
                s = samples[idx]
                texts = [queries[idx], cache.items[pos_pick[idx]], *(cache.items[n] for n in s.negatives)]
                vecs = [w @ table[ids].astype(np.float64) for ids, w in texts]
                loss, d_q, d_p, d_n = info_nce_loss(vecs[0], vecs[1], vecs[2:], tau)
                if not math.isfinite(loss):
                    raise TrainingError(f"non-finite loss at sample {s.sample_id}")
                losses.append(loss)
                for (ids, w), g in zip(texts, [d_q, d_p, *d_n]):
                    rows.append(ids)
                    grads.append(np.outer(w, g))
            lr = lr_schedule(step, total_steps, cfg)
            update = np.concatenate(grads) * (-lr / len(batch))
            np.add.at(table, np.concatenate(rows), update.astype(np.float32))
            step += 1
        if losses:
            epoch_losses.append(float(np.mean(losses)))
            log.info("epoch %d: mean loss %.4f over %d samples (lr now %.2e)", epoch, epoch_losses[-1], len(losses),
                     lr_schedule(max(step - 1, 0), total_steps, cfg))
        if step >= total_steps:
            break
    if not np.isfinite(table).all():
        raise TrainingError("training produced non-finite weights")
    model.meta = dict(model.meta) | {
        "train_seed": cfg.seed,
        "train_domain": catalog.name,
        "train_steps": step,
        "epoch_losses": [round(x, 10) for x in epoch_losses],
    }
    return model
