"""Synthesis of the ten query-task families from a catalog and an interaction log.

Every sample is reproducible on its own: its RNG seed is a stable hash of
(global seed, task, sample index). Behavior tasks hold out each user's last
event for the test split; train samples only ever look at the earlier events.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from itemforge.catalog import (
    Catalog,
    CategoriesValue,
    DateValue,
    InteractionLog,
    Item,
    NumberValue,
    TextValue,
    render_value,
    year_start,
)
from itemforge.conditions import (
    DEFAULT_SURFACES,
    All,
    Condition,
    ConditionError,
    DateCmp,
    FuzzyTitle,
    HasCategory,
    InsufficientNegatives,
    Not,
    NumCmp,
    TextEquals,
    evaluate,
    from_dict,
    mine_negatives,
    recent_cutoff,
    render,
    satisfiers,
    title_distance,
    to_dict,
)
from itemforge.llm_bridge import DeterministicFallback, GenBackend, Remote, join_and, summarize_item, summarize_user
from itemforge.llm_bridge import suggest_misspellings
from itemforge.templates import TASKS, Template, validate_pool

log = logging.getLogger(__name__)

N_NEGATIVES = 7
# Share of the negatives of conjunctive conditions drawn as single-clause near misses.
HARD_NEGATIVE_FRACTION = 0.5
MAX_POSITIVES = 50
MAX_DRAWS = 32
MAX_MISSPELL_ATTEMPTS = 16
CONDITION_TASKS = frozenset({"FA2I", "SA2I", "VC2I", "NA2I", "UQ2I"})
BEHAVIOR_TASKS = frozenset({"UH2I", "US2I", "UQ2I"})
SKIP_FIELDS = frozenset({"title", "description"})

# UH2I 1/3, I2I 1/6, the other eight tasks 1/16 each.
DEFAULT_PROPORTIONS = {t: 1 / 16 for t in TASKS} | {"UH2I": 1 / 3, "I2I": 1 / 6}

PRICE_LADDER = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0)


class TaskGenError(RuntimeError):
    pass


class _Redraw(Exception):
    """A single draw was degenerate; the caller resamples."""


# --- records ----------------------------------------------------------------


@dataclass(frozen=True)
class QuerySample:
    sample_id: str
    task: str
    split: str
    query: str
    positives: tuple[str, ...]
    negatives: tuple[str, ...]
    condition: Optional[Condition]
    template_id: str
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "positives", tuple(self.positives))
        object.__setattr__(self, "negatives", tuple(self.negatives))
        if self.task not in TASKS:
            raise ValueError(f"{self.sample_id}: unknown task {self.task!r}")
        if not self.query:
            raise ValueError(f"{self.sample_id}: empty query")
        if not self.positives:
            raise ValueError(f"{self.sample_id}: no positives")
        if len(self.negatives) != N_NEGATIVES or set(self.negatives) & set(self.positives):
            raise ValueError(f"{self.sample_id}: need {N_NEGATIVES} negatives disjoint from positives")
        if (self.condition is not None) != (self.task in CONDITION_TASKS):
            raise ValueError(f"{self.sample_id}: condition presence does not match task {self.task}")

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task": self.task,
            "split": self.split,
            "query": self.query,
            "positives": list(self.positives),
            "negatives": list(self.negatives),
            "condition": None if self.condition is None else to_dict(self.condition),
            "template_id": self.template_id,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, raw: Mapping) -> "QuerySample":
        cond = raw.get("condition")
        return cls(
            raw["sample_id"], raw["task"], raw["split"], raw["query"],
            tuple(raw["positives"]), tuple(raw["negatives"]),
            None if cond is None else from_dict(cond),
            raw["template_id"], int(raw["seed"]),
        )


@dataclass(frozen=True)
class MixConfig:
    """Train-split size and task proportions; the test split defaults to equal shares."""

    total: int = 1200
    proportions: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_PROPORTIONS))
    test_total: int = 400
    test_proportions: Optional[Mapping[str, float]] = None

    def __post_init__(self) -> None:
        for props in (self.proportions, self.test_proportions):
            if props is None:
                continue
            if set(props) - set(TASKS):
                raise ValueError(f"unknown tasks in mix: {sorted(set(props) - set(TASKS))}")
            if any(v < 0 for v in props.values()) or abs(sum(props.values()) - 1.0) > 1e-9:
                raise ValueError("mix fractions must be non-negative and sum to 1")
        if self.total < 0 or self.test_total < 0:
            raise ValueError("totals must be non-negative")

    def counts(self, split: str = "train") -> dict[str, int]:
        if split == "train":
            return allocate(self.total, self.proportions)
        props = self.test_proportions or {t: 1 / len(TASKS) for t in TASKS}
        return allocate(self.test_total, props)


def allocate(total: int, proportions: Mapping[str, float]) -> dict[str, int]:
    """Largest-remainder rounding; every count is within 1 of its exact share."""
    exact = {t: total * proportions.get(t, 0.0) for t in TASKS}
    counts = {t: math.floor(v) for t, v in exact.items()}
    leftover = total - sum(counts.values())
    order = sorted(TASKS, key=lambda t: (-(exact[t] - counts[t]), TASKS.index(t)))
    for t in order[:leftover]:
        counts[t] += 1
    return counts


def sample_seed(global_seed: int, task: str, sample_index: int) -> int:
    digest = hashlib.blake2b(f"{global_seed}|{task}|{sample_index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


# --- primitive generators ---------------------------------------------------


def misspell(name: str, seed: int, catalog: Optional[Catalog] = None) -> str:
    """Add, remove or replace one or two characters, avoiding every catalog title.

    Two edits are only used when the name has at least five characters. The
    result is compared case-insensitively, both for the edit distance and for
    title collisions.
    """
    if len(name) < 2:
        raise ValueError("name must have at least 2 characters")
    rng = np.random.default_rng(seed)
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    for _ in range(MAX_MISSPELL_ATTEMPTS):
        n_edits = 1 if len(name) < 5 else int(rng.integers(1, 3))
        chars = list(name)
        for _ in range(n_edits):
            op = ("add", "remove", "replace")[int(rng.integers(3))]
            if op == "remove" and len(chars) > 1:
                del chars[int(rng.integers(len(chars)))]
            elif op == "add":
                chars.insert(int(rng.integers(len(chars) + 1)), alphabet[int(rng.integers(26))])
            else:
                i = int(rng.integers(len(chars)))
                chars[i] = alphabet[int(rng.integers(26))]
        candidate = "".join(chars)
        if valid_misspelling(candidate, name, catalog):
            return candidate
    raise TaskGenError(f"could not misspell {name!r} in {MAX_MISSPELL_ATTEMPTS} attempts")


def valid_misspelling(candidate: str, name: str, catalog: Optional[Catalog]) -> bool:
    allowed = (1,) if len(name) < 5 else (1, 2)
    if title_distance(candidate, name) not in allowed:
        return False
    return catalog is None or not catalog.has_title(candidate)


def _eligible_fields(item: Item) -> list[str]:
    return [name for name in item.fields if name not in SKIP_FIELDS]


def _draw_attributes(item: Item, mode: str, rng: np.random.Generator) -> list[tuple[str, object]]:
    """(field, drawn value) pairs; category fields yield a list with possible repeats."""
    if mode not in ("full", "sparse"):
        raise ValueError(f"unknown mode {mode!r}")
    names = _eligible_fields(item)
    if not names:
        raise ValueError(f"item {item.id!r} has no attributes besides title/description")
    if mode == "sparse":
        k = int(rng.integers(1, min(3, len(names)) + 1))
        names = [names[i] for i in sorted(rng.choice(len(names), size=k, replace=False))]
    draws: list[tuple[str, object]] = []
    for name in names:
        value = item.fields[name]
        if isinstance(value, CategoriesValue):
            n = int(rng.integers(1, len(value.values) + 1))
            picks = rng.integers(len(value.values), size=n)
            draws.append((name, [value.values[i] for i in picks]))
        else:
            draws.append((name, value))
    order = rng.permutation(len(draws))
    return [draws[i] for i in order]


def _render_draw(value: object) -> str:
    return ", ".join(value) if isinstance(value, list) else render_value(value)


def sample_attributes(item: Item, mode: str, seed: int) -> list[tuple[str, str]]:
    """Shuffled (field, rendered value) pairs, never including title or description.

    ``full`` keeps every field and samples category values with replacement;
    ``sparse`` keeps between one and three fields.
    """
    rng = np.random.default_rng(seed)
    return [(name, _render_draw(v)) for name, v in _draw_attributes(item, mode, rng)]


def attributes_condition(draws: Sequence[tuple[str, object]]) -> All:
    """Exact-match condition for drawn attributes; repeated categories collapse."""
    children: list[Condition] = []
    for name, value in draws:
        if isinstance(value, list):
            for v in dict.fromkeys(value):
                children.append(HasCategory(name, v))
        elif isinstance(value, NumberValue):
            children.append(NumCmp(name, "=", value.value))
        elif isinstance(value, DateValue):
            children.append(DateCmp(name, "=", value.days))
        elif isinstance(value, TextValue):
            children.append(TextEquals(name, value.value))
    return All(tuple(children))


def format_attributes(pairs: Sequence[tuple[str, str]]) -> str:
    return ", ".join(f"{name} : {value}" for name, value in pairs)


# --- sample generation ------------------------------------------------------

_UQ2I_SURFACES = dict(DEFAULT_SURFACES) | {
    "has_category.genre": ["{value}", "{value} style"],
    "has_category": ["{value}", "{value} focused"],
    "all": ["{head} {last}", "{head} and {last}"],
}


class TaskGenerator:
    """Precomputed catalog statistics shared by every sample draw."""

    def __init__(
        self,
        catalog: Catalog,
        interactions: InteractionLog,
        templates: Sequence[Template],
        backend: GenBackend | None = None,
        hard_fraction: float = HARD_NEGATIVE_FRACTION,
    ):
        if not 0.0 <= hard_fraction <= 1.0:
            raise ValueError("hard_fraction must be in [0, 1]")
        self.catalog = catalog
        self.hard_fraction = hard_fraction
        self.interactions = interactions
        self.backend = backend or DeterministicFallback()
        self.templates: dict[tuple[str, str], list[Template]] = defaultdict(list)
        for t in templates:
            self.templates[(t.task, t.split)].append(t)
        self.recent = recent_cutoff(catalog)
        self.max_year = catalog.max_release_year()
        self.users = sorted(interactions.users)
        self.histories = {u: interactions.history(u) for u in self.users}
        self._cooc = self._cooccurrence()
        self._i2i_sources = sorted(i for i in catalog.ids if self._cooc.get(i))
        self._category_items = self._category_index()

    def _cooccurrence(self) -> dict[str, dict[str, int]]:
        # Uses train prefixes only, so test targets never leak into I2I labels.
        counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        for user in self.users:
            prefix = sorted(set(self.histories[user][:-1]))
            for i, a in enumerate(prefix):
                for b in prefix[i + 1:]:
                    counts[a][b] += 1
                    counts[b][a] += 1
        return {k: dict(v) for k, v in counts.items()}

    def _category_index(self) -> dict[tuple[str, str], int]:
        counts: dict[tuple[str, str], int] = defaultdict(int)
        for item in self.catalog:
            for name, v in item.fields.items():
                if isinstance(v, CategoriesValue):
                    for x in v.values:
                        counts[(name, x)] += 1
        return dict(counts)

    # -- helpers --

    def _template(self, task: str, split: str, rng: np.random.Generator) -> Template:
        pool = self.templates.get((task, split))
        if not pool:
            raise TaskGenError(f"no {split} templates for task {task}")
        return pool[int(rng.integers(len(pool)))]

    def _titles(self, ids: Sequence[str]) -> str:
        return join_and([self.catalog[i].title for i in ids])

    def _positives(self, cond: Condition, source: str, rng: np.random.Generator) -> list[str]:
        sat = satisfiers(self.catalog, cond)
        if source not in sat:
            raise _Redraw(f"source {source} fails its own condition")
        others = [i for i in sat if i != source]
        if len(others) > MAX_POSITIVES - 1:
            keep = sorted(rng.choice(len(others), size=MAX_POSITIVES - 1, replace=False))
            others = [others[i] for i in keep]
        return [source] + others

    def _history_window(self, split: str, rng: np.random.Generator) -> tuple[str, list[str], str]:
        """(user, history window, next item). Train windows never reach the last event."""
        min_len = 5 if split == "train" else 4
        users = [u for u in self.users if len(self.histories[u]) >= min_len]
        if not users:
            raise TaskGenError("no user has enough events for a behavior task")
        user = users[int(rng.integers(len(users)))]
        events = self.histories[user]
        if split == "train":
            prefix = events[:-1]
            h = int(rng.integers(3, min(10, len(prefix) - 1) + 1))
            return user, prefix[:h], prefix[h]
        h = int(rng.integers(3, min(10, len(events) - 1) + 1))
        return user, events[-1 - h:-1], events[-1]

    def _random_item(self, rng: np.random.Generator) -> Item:
        return self.catalog.items[int(rng.integers(len(self.catalog)))]

    # -- tasks --

    def draw(self, task: str, split: str, seed: int, sample_id: str) -> QuerySample:
        for attempt in range(MAX_DRAWS):
            rng = np.random.default_rng([seed, attempt])
            try:
                query, positives, negatives, cond, template = getattr(self, f"_{task.lower()}")(split, rng)
            except (_Redraw, InsufficientNegatives, ConditionError) as exc:
                log.debug("%s attempt %d redrawn: %s", sample_id, attempt, exc)
                continue
            return QuerySample(sample_id, task, split, query, tuple(positives), tuple(negatives),
                               cond, template.id, seed)
        raise TaskGenError(f"{sample_id}: no valid {task} draw after {MAX_DRAWS} attempts")

    def _neg_seed(self, rng: np.random.Generator) -> int:
        return int(rng.integers(2**63))

    def _uh2i(self, split, rng):
        user, window, target = self._history_window(split, rng)
        template = self._template("UH2I", split, rng)
        query = template.fill(HISTORY=self._titles(window))
        negatives = mine_negatives(self.catalog, [target], None, N_NEGATIVES, self._neg_seed(rng),
                                   exclude=self.histories[user])
        return query, [target], negatives, None, template

    def _us2i(self, split, rng):
        user, window, target = self._history_window(split, rng)
        template = self._template("US2I", split, rng)
        summary = summarize_user([self.catalog[i] for i in window], self.backend, seed=self._neg_seed(rng))
        query = template.fill(SUMMARY=summary)
        negatives = mine_negatives(self.catalog, [target], None, N_NEGATIVES, self._neg_seed(rng),
                                   exclude=self.histories[user])
        return query, [target], negatives, None, template

    def i2i_positives(self, source: str, limit: int = 10) -> list[str]:
        """Items co-occurring with ``source`` in at least two histories, else attribute neighbors."""
        cooc = self._cooc.get(source, {})
        ranked = sorted((i for i, c in cooc.items() if c >= 2), key=lambda i: (-cooc[i], i))
        if ranked:
            return ranked[:limit]
        return self.jaccard_neighbors(source, 5)

    def jaccard_neighbors(self, source: str, limit: int) -> list[str]:
        def cats(item: Item) -> set[str]:
            return {f"{n}={x}" for n, v in item.fields.items() if isinstance(v, CategoriesValue) for x in v.values}

        base = cats(self.catalog[source])
        scored = []
        for item in self.catalog:
            if item.id == source:
                continue
            other = cats(item)
            union = base | other
            scored.append((-(len(base & other) / len(union) if union else 0.0), item.id))
        return [i for _, i in sorted(scored)[:limit]]

    def _i2i(self, split, rng):
        sources = self._i2i_sources or list(self.catalog.ids)
        source = sources[int(rng.integers(len(sources)))]
        positives = self.i2i_positives(source)
        template = self._template("I2I", split, rng)
        query = template.fill(ITEM=self.catalog[source].title)
        exclude = {source, *self._cooc.get(source, {})}
        negatives = mine_negatives(self.catalog, positives, None, N_NEGATIVES, self._neg_seed(rng), exclude=exclude)
        return query, positives, negatives, None, template

    def _attrs_task(self, task, mode, split, rng):
        item = self._random_item(rng)
        draws = _draw_attributes(item, mode, rng)
        cond = attributes_condition(draws)
        template = self._template(task, split, rng)
        query = template.fill(ATTRS=format_attributes([(n, _render_draw(v)) for n, v in draws]))
        positives = self._positives(cond, item.id, rng)
        negatives = mine_negatives(self.catalog, positives, cond, N_NEGATIVES, self._neg_seed(rng),
                                   hard_fraction=self.hard_fraction)
        return query, positives, negatives, cond, template

    def _fa2i(self, split, rng):
        return self._attrs_task("FA2I", "full", split, rng)

    def _sa2i(self, split, rng):
        return self._attrs_task("SA2I", "sparse", split, rng)

    def _as2i(self, split, rng):
        item = self._random_item(rng)
        chosen = [name for name, _ in _draw_attributes(item, "sparse", rng)]
        summary = summarize_item(item, chosen, self.backend, seed=self._neg_seed(rng))
        template = self._template("AS2I", split, rng)
        query = template.fill(SUMMARY=summary)
        # Negatives must fail the attributes the summary mentions.
        full = [(n, list(v.values) if isinstance(v, CategoriesValue) else v) for n, v in
                ((n, item.fields[n]) for n in chosen)]
        negatives = mine_negatives(self.catalog, [item.id], attributes_condition(full), N_NEGATIVES,
                                   self._neg_seed(rng))
        return query, [item.id], negatives, None, template

    def _nm2i(self, split, rng):
        item = self._random_item(rng)
        if len(item.title) < 2:
            raise _Redraw("title too short to misspell")
        name = None
        if isinstance(self.backend, Remote):
            for cand in suggest_misspellings(item.title, self.backend, seed=self._neg_seed(rng)):
                if valid_misspelling(cand, item.title, self.catalog):
                    name = cand
                    break
        if name is None:
            try:
                name = misspell(item.title, self._neg_seed(rng), self.catalog)
            except TaskGenError as exc:
                raise _Redraw(str(exc)) from None
        template = self._template("NM2I", split, rng)
        # Items whose titles are as close to the typo as the target are not safe negatives.
        near = FuzzyTitle(name, max(1, title_distance(name, item.title)))
        negatives = mine_negatives(self.catalog, [item.id], near, N_NEGATIVES, self._neg_seed(rng))
        return template.fill(NAME=name), [item.id], negatives, None, template

    def vague_predicates(self, item: Item, rng: np.random.Generator) -> list[Condition]:
        """One or two vague price/date predicates the item satisfies, in random order."""
        options: list[Condition] = []
        price = item.fields.get("price")
        if isinstance(price, NumberValue):
            above = [x for x in PRICE_LADDER if x > price.value]
            below = [x for x in PRICE_LADDER if x < price.value]
            if above and (not below or rng.random() < 0.6):
                options.append(NumCmp("price", "<", above[int(rng.integers(min(3, len(above))))]))
            elif below:
                options.append(NumCmp("price", ">", below[-1 - int(rng.integers(min(3, len(below))))]))
        released = item.fields.get("release date")
        if isinstance(released, DateValue):
            year = released.as_date.year
            roll = rng.random()
            if self.recent is not None and released.days >= self.recent and roll < 0.25:
                options.append(DateCmp("release date", ">=", self.recent))
            elif roll < 0.65:
                # "after Y" means on or after Jan 1 of Y+1.
                y = year - 1 - int(rng.integers(4))
                options.append(DateCmp("release date", ">=", year_start(y + 1)))
            else:
                y = year + 1 + int(rng.integers(4))
                options.append(DateCmp("release date", "<", year_start(y)))
        if not options:
            raise _Redraw("no numeric or date fields")
        k = int(rng.integers(1, len(options) + 1))
        return [options[i] for i in rng.choice(len(options), size=k, replace=False)]

    def _vc2i(self, split, rng):
        item = self._random_item(rng)
        genre = item.fields.get("genre")
        if not isinstance(genre, CategoriesValue):
            raise _Redraw("source item has no genre")
        g = genre.values[int(rng.integers(len(genre.values)))]
        cond = All((HasCategory("genre", g), *self.vague_predicates(item, rng)))
        template = self._template("VC2I", split, rng)
        query = template.fill(CONDITION=render(cond, seed=self._neg_seed(rng), recent_cutoff=self.recent))
        positives = self._positives(cond, item.id, rng)
        negatives = mine_negatives(self.catalog, positives, cond, N_NEGATIVES, self._neg_seed(rng),
                                   hard_fraction=self.hard_fraction)
        return query, positives, negatives, cond, template

    def _na2i(self, split, rng):
        item = self._random_item(rng)
        genre, tags = item.fields.get("genre"), item.fields.get("tags")
        if not isinstance(genre, CategoriesValue) or not isinstance(tags, CategoriesValue):
            raise _Redraw("source item lacks genre or tags")
        # The kept predicate comes from a different field than the negated ones, so
        # the scope of each "not" is recoverable from the words alone.
        positive: list[Condition] = [HasCategory("genre", genre.values[int(rng.integers(len(genre.values)))])]
        # Negate tags that co-occur with the positive part so the negation actually bites.
        base = All(tuple(positive))
        counts: dict[str, int] = defaultdict(int)
        for other in self.catalog:
            v = other.fields.get("tags")
            if isinstance(v, CategoriesValue) and evaluate(other, base):
                for t in v.values:
                    if t not in tags:
                        counts[t] += 1
        if not counts:
            raise _Redraw("no absent tag to negate")
        names = sorted(counts)
        weights = np.array([counts[t] for t in names], dtype=float)
        k = min(len(names), int(rng.integers(1, 3)))
        negated = [names[i] for i in rng.choice(len(names), size=k, replace=False, p=weights / weights.sum())]
        cond = All((*positive, *(Not(HasCategory("tags", t)) for t in negated)))
        template = self._template("NA2I", split, rng)
        query = template.fill(CONDITION=render(cond, seed=self._neg_seed(rng)))
        positives = self._positives(cond, item.id, rng)
        negatives = mine_negatives(self.catalog, positives, cond, N_NEGATIVES, self._neg_seed(rng),
                                   hard_fraction=self.hard_fraction)
        return query, positives, negatives, cond, template

    def _uq2i(self, split, rng):
        user, window, target = self._history_window(split, rng)
        item = self.catalog[target]
        cats = [(n, x) for n, v in item.fields.items() if isinstance(v, CategoriesValue) for x in v.values]
        if not cats:
            raise _Redraw("target has no categories")
        k = min(len(cats), int(rng.integers(1, 3)))
        picks = [cats[i] for i in sorted(rng.choice(len(cats), size=k, replace=False))]
        cond = All(tuple(HasCategory(n, x) for n, x in picks))
        template = self._template("UQ2I", split, rng)
        phrase = render(cond, _UQ2I_SURFACES, seed=self._neg_seed(rng))
        query = template.fill(HISTORY=self._titles(window), CONDITION=phrase)
        negatives = mine_negatives(self.catalog, [target], cond, N_NEGATIVES, self._neg_seed(rng),
                                   exclude=self.histories[user])
        return query, [target], negatives, cond, template


_GENERATORS: dict[tuple[int, int, int, int], TaskGenerator] = {}


def _generator_for(catalog, interactions, templates, backend) -> TaskGenerator:
    key = (id(catalog), id(interactions), id(templates), id(backend))
    gen = _GENERATORS.get(key)
    if gen is None or gen.catalog is not catalog:
        gen = TaskGenerator(catalog, interactions, templates, backend)
        _GENERATORS.clear()
        _GENERATORS[key] = gen
    return gen


def generate_sample(
    task: str,
    catalog: Catalog,
    interactions: InteractionLog,
    templates: Sequence[Template],
    backend: GenBackend | None,
    sample_index: int,
    global_seed: int,
    split: str = "train",
) -> QuerySample:
    gen = _generator_for(catalog, interactions, templates, backend)
    seed = sample_seed(global_seed, task, sample_index)
    return gen.draw(task, split, seed, f"{split}-{task}-{sample_index:06d}")


def generate_dataset(
    catalog: Catalog,
    interactions: InteractionLog,
    templates: Sequence[Template],
    mix: MixConfig,
    backend: GenBackend | None,
    global_seed: int,
    jobs: int = 1,
    hard_fraction: float = HARD_NEGATIVE_FRACTION,
) -> tuple[list[QuerySample], list[QuerySample]]:
    """Train and test splits; sample indices run over train first, then test."""
    validate_pool(templates)
    gen = TaskGenerator(catalog, interactions, templates, backend, hard_fraction)
    plan: list[tuple[str, str]] = []
    for split in ("train", "test"):
        tasks = [t for t, n in mix.counts(split).items() for _ in range(n)]
        order = np.random.default_rng([global_seed, 0 if split == "train" else 1]).permutation(len(tasks))
        plan += [(split, tasks[i]) for i in order]

    def one(index: int) -> QuerySample:
        split, task = plan[index]
        seed = sample_seed(global_seed, task, index)
        return gen.draw(task, split, seed, f"{split}-{task}-{index:06d}")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(one, range(len(plan))))
    else:
        samples = [one(i) for i in range(len(plan))]
    return [s for s in samples if s.split == "train"], [s for s in samples if s.split == "test"]


# --- dataset files ----------------------------------------------------------


def write_dataset(samples: Sequence[QuerySample], path: Union[str, Path], meta: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"meta": dict(meta)}, ensure_ascii=False, sort_keys=True) + "\n")
        for s in samples:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def load_dataset(path: Union[str, Path]) -> list[QuerySample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            raw = json.loads(line)
            if set(raw) == {"meta"}:
                continue
            try:
                out.append(QuerySample.from_json(raw))
            except (KeyError, ValueError, ConditionError) as exc:
                raise ValueError(f"{path}:{lineno}: bad sample ({exc})") from None
    return out
