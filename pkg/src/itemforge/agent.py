"""Retrieval from raw conversational context.

A conversation is a short scripted dialogue between a simulated user and a
recommender assistant. The whole transcript is embedded once and scored with
Hit@k against the conversation's target item.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from itemforge.catalog import Catalog, CategoriesValue, DateValue, InteractionLog, NumberValue, TextValue
from itemforge.conditions import All, Condition, DateCmp, HasCategory, NumCmp, TextEquals, evaluate
from itemforge.conditions import DEFAULT_SURFACES, from_dict, recent_cutoff, render, to_dict
from itemforge.llm_bridge import DeterministicFallback, GenBackend, GenRequest, generate
from itemforge.llm_bridge import structured_prompt
from itemforge.retrieval import EvalError, EvalReport, TaskScore, build_index, hit_at_k, rank_queries
from itemforge.taskgen import PRICE_LADDER

ROLES = ("user", "assistant")

# Attribute phrases read inside "something with ..." requests.
_CHAT_SURFACES = dict(DEFAULT_SURFACES) | {
    "has_category.genre": ["{value} gameplay", "a {value} feel"],
    "has_category": ["{value}"],
    "text_equals.publisher": ["published by {value}", "from {value}"],
}


@dataclass(frozen=True)
class Conversation:
    conv_id: str
    turns: tuple[tuple[str, str], ...]
    target: str
    condition: Optional[Condition] = None

    def __post_init__(self) -> None:
        turns = tuple((str(r), str(t)) for r, t in self.turns)
        object.__setattr__(self, "turns", turns)
        if any(role not in ROLES for role, _ in turns):
            raise ValueError(f"{self.conv_id}: turn roles must be one of {ROLES}")
        if not any(role == "user" for role, _ in turns):
            raise ValueError(f"{self.conv_id}: needs at least one user turn")

    def to_json(self) -> dict:
        return {
            "conv_id": self.conv_id,
            "turns": [{"role": r, "text": t} for r, t in self.turns],
            "target": self.target,
            "condition": None if self.condition is None else to_dict(self.condition),
        }

    @classmethod
    def from_json(cls, raw: Mapping) -> "Conversation":
        cond = raw.get("condition")
        return cls(
            str(raw["conv_id"]),
            tuple((t["role"], t["text"]) for t in raw["turns"]),
            str(raw["target"]),
            None if cond is None else from_dict(cond),
        )


def context_to_query(conv: Conversation, user_only: bool = False) -> str:
    """Every turn in order as ``role: text``, one per line.

    ``user_only`` drops assistant turns (an ablation; the default keeps the raw
    transcript).
    """
    return "\n".join(f"{role}: {text}" for role, text in conv.turns if not user_only or role == "user")


def eval_conversations(
    convs: Sequence[Conversation],
    catalog: Catalog,
    model,
    k: int = 5,
    user_only: bool = False,
) -> EvalReport:
    """Mean Hit@k with one retrieval per conversation over its full context."""
    if not convs:
        raise EvalError("no conversations to evaluate")
    for c in convs:
        if c.target not in catalog:
            raise EvalError(f"{c.conv_id}: target {c.target!r} is not in the catalog")
    index = build_index(catalog, model)
    ranked = rank_queries(index, [context_to_query(c, user_only) for c in convs], model, k)
    hits = [hit_at_k(r, [c.target], k) for c, r in zip(convs, ranked)]
    meta = {
        "model_fingerprint": model.fingerprint(),
        "catalog": catalog.name,
        "k": k,
        "conversations": len(convs),
        "user_only": user_only,
    }
    return EvalReport({"AGENT": TaskScore(f"hit@{k}", float(np.mean(hits)), len(hits))}, meta)


# --- simulation ---------------------------------------------------------------


def _vague_price(value: float, rng: np.random.Generator) -> Optional[NumCmp]:
    above = [x for x in PRICE_LADDER if x > value]
    below = [x for x in PRICE_LADDER if x < value]
    if above and (not below or rng.random() < 0.7):
        return NumCmp("price", "<", above[int(rng.integers(min(2, len(above))))])
    if below:
        return NumCmp("price", ">", below[-1])
    return None


def _conversation_condition(item, rng: np.random.Generator, recent: Optional[int]) -> tuple[list, list]:
    """(feature predicates, constraint predicates), all satisfied by ``item``."""
    features: list[Condition] = []
    genre, tags = item.fields.get("genre"), item.fields.get("tags")
    if isinstance(genre, CategoriesValue):
        features.append(HasCategory("genre", genre.values[int(rng.integers(len(genre.values)))]))
    if isinstance(tags, CategoriesValue):
        n = min(len(tags.values), int(rng.integers(2, 4)))
        features += [HasCategory("tags", tags.values[i]) for i in sorted(rng.choice(len(tags.values), n, replace=False))]
    constraints: list[Condition] = []
    price = item.fields.get("price")
    if isinstance(price, NumberValue):
        pred = _vague_price(price.value, rng)
        if pred is not None:
            constraints.append(pred)
    released = item.fields.get("release date")
    if isinstance(released, DateValue) and rng.random() < 0.6:
        if recent is not None and released.days >= recent:
            constraints.append(DateCmp("release date", ">=", recent))
        else:
            year = released.as_date.year - int(rng.integers(0, 3))
            constraints.append(DateCmp("release date", ">=", DateValue.parse(f"{year}-01-01").days))
    publisher = item.fields.get("publisher")
    if isinstance(publisher, TextValue) and rng.random() < 0.5:
        constraints.append(TextEquals("publisher", publisher.value))
    return features, constraints


def synth_conversations(
    catalog: Catalog,
    interactions: InteractionLog,
    n: int,
    seed: int,
    backend: GenBackend | None = None,
) -> list[Conversation]:
    """Scripted dialogues whose user turns describe a held-out target item.

    Each target is a user's last event. The first user turn names a few earlier
    games from that user's history; later user turns ask for the target's genre
    and tags, then price, release date or publisher constraints. Assistant turns
    carry no item information.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    backend = backend or DeterministicFallback()
    recent = recent_cutoff(catalog)
    users = sorted(u for u, events in interactions.users.items() if len(events) >= 3)
    if not users:
        raise ValueError("no user has at least 3 events")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(users), size=n, replace=n > len(users))
    out = []
    for i, u in enumerate(picks):
        user = users[int(u)]
        history = interactions.history(user)
        target = catalog[history[-1]]
        h = int(rng.integers(2, min(3, len(history) - 1) + 1))
        shown = [catalog[iid].title for iid in history[-1 - h:-1]]
        features, constraints = _conversation_condition(target, rng, recent)
        turn_seed = int(rng.integers(2**31))

        def say(command: str, step: int, **fields) -> str:
            return generate(backend, GenRequest(structured_prompt(command, _INSTRUCTIONS[command], **fields),
                                                max_tokens=80, temperature=0.7, seed=turn_seed + step))

        def phrase(preds: list) -> str:
            return ";".join(render(p, _CHAT_SURFACES, seed=turn_seed, recent_cutoff=recent) for p in preds)

        turns = [
            ("user", say("SIMULATE_USER", 0, intent="history", titles=shown)),
            ("assistant", say("ASSISTANT_REPLY", 1, stage="ask_features")),
            ("user", say("SIMULATE_USER", 2, intent="features", attrs=phrase(features))),
        ]
        if constraints:
            turns += [
                ("assistant", say("ASSISTANT_REPLY", 3, stage="ask_more")),
                ("user", say("SIMULATE_USER", 4, intent="constraints", attrs=phrase(constraints))),
            ]
        turns.append(("assistant", say("ASSISTANT_REPLY", 5, stage="confirm")))
        cond = All(tuple(features + constraints))
        assert evaluate(target, cond), "target must satisfy its own conversation condition"
        out.append(Conversation(f"conv-{seed}-{i:04d}", tuple(turns), target.id, cond))
    return out


_INSTRUCTIONS = {
    "SIMULATE_USER": (
        "You are a player asking a game recommender for help. Write your next message in one or two "
        "sentences. For intent=history mention the listed titles; otherwise ask for the listed attributes."
    ),
    "ASSISTANT_REPLY": (
        "You are a game recommender assistant. Write one short reply for the given stage. "
        "Do not name any game."
    ),
}


# --- files ----------------------------------------------------------------------


def write_conversations(convs: Sequence[Conversation], path: Union[str, Path], meta: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"meta": dict(meta)}, ensure_ascii=False, sort_keys=True) + "\n")
        for c in convs:
            fh.write(json.dumps(c.to_json(), ensure_ascii=False) + "\n")


def load_conversations(path: Union[str, Path]) -> list[Conversation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            raw = json.loads(line)
            if set(raw) == {"meta"}:
                continue
            try:
                out.append(Conversation.from_json(raw))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad conversation ({exc})") from None
    return out
