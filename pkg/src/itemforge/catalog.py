"""Item catalogs, interaction logs, their line formats, and a seeded synthetic generator."""

from __future__ import annotations

import calendar
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

EPOCH = date(1970, 1, 1)
FIELD_TYPES = ("text", "number", "date", "categories")


class CatalogError(ValueError):
    """Raised for malformed catalog or interaction input."""


# --- field values -----------------------------------------------------------


@dataclass(frozen=True)
class TextValue:
    value: str


@dataclass(frozen=True)
class NumberValue:
    value: float
    unit: str = "USD"

    def __post_init__(self) -> None:
        if isinstance(self.value, bool) or not math.isfinite(self.value):
            raise CatalogError(f"number must be finite, got {self.value!r}")
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class DateValue:
    days: int  # days since 1970-01-01

    @classmethod
    def parse(cls, text: str) -> "DateValue":
        return cls(parse_date(text))

    def isoformat(self) -> str:
        return format_date(self.days)

    @property
    def as_date(self) -> date:
        return EPOCH + timedelta(days=self.days)


@dataclass(frozen=True)
class CategoriesValue:
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        seen: dict[str, None] = {}
        for v in self.values:
            seen.setdefault(str(v).strip().lower(), None)
        if not seen or "" in seen:
            raise CatalogError("categories must be a non-empty list of non-empty strings")
        object.__setattr__(self, "values", tuple(seen))

    def __contains__(self, value: str) -> bool:
        return value in self.values


FieldValue = Union[TextValue, NumberValue, DateValue, CategoriesValue]


def parse_date(text: str) -> int:
    """ISO-8601 calendar date ``YYYY-MM-DD`` to days since epoch."""
    if not isinstance(text, str) or len(text) != 10:
        raise CatalogError(f"bad date {text!r}, expected YYYY-MM-DD")
    try:
        return (date.fromisoformat(text) - EPOCH).days
    except ValueError as exc:
        raise CatalogError(f"bad date {text!r}: {exc}") from None


def format_date(days: int) -> str:
    return (EPOCH + timedelta(days=int(days))).isoformat()


def year_start(year: int) -> int:
    return (date(year, 1, 1) - EPOCH).days


def format_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(float(x))


def render_date(days: int) -> str:
    d = EPOCH + timedelta(days=int(days))
    return f"{calendar.month_name[d.month].lower()} {d.day}, {d.year}"


def render_value(value: FieldValue) -> str:
    """Human-readable form used in item texts and attribute queries."""
    if isinstance(value, TextValue):
        return value.value
    if isinstance(value, NumberValue):
        return format_number(value.value)
    if isinstance(value, DateValue):
        return render_date(value.days)
    return ", ".join(value.values)


def value_to_json(value: FieldValue) -> dict:
    if isinstance(value, TextValue):
        return {"type": "text", "value": value.value}
    if isinstance(value, NumberValue):
        return {"type": "number", "value": value.value, "unit": value.unit}
    if isinstance(value, DateValue):
        return {"type": "date", "value": value.isoformat()}
    return {"type": "categories", "value": list(value.values)}


def value_from_json(raw: Mapping) -> FieldValue:
    if not isinstance(raw, Mapping) or "type" not in raw or "value" not in raw:
        raise CatalogError("field entry needs 'type' and 'value'")
    kind, v = raw["type"], raw["value"]
    if kind == "text":
        if not isinstance(v, str):
            raise CatalogError("text value must be a string")
        return TextValue(v)
    if kind == "number":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise CatalogError(f"number value must be numeric, got {v!r}")
        return NumberValue(float(v), str(raw.get("unit", "USD")))
    if kind == "date":
        return DateValue.parse(v)
    if kind == "categories":
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            raise CatalogError("categories value must be a list of strings")
        return CategoriesValue(tuple(v))
    raise CatalogError(f"unknown field type tag {kind!r}")


# --- items and catalogs -----------------------------------------------------


@dataclass(frozen=True)
class Item:
    id: str
    title: str
    description: str
    fields: Mapping[str, FieldValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise CatalogError("item id must be non-empty")
        if not self.title:
            raise CatalogError(f"item {self.id!r} has an empty title")
        normalized: dict[str, FieldValue] = {}
        for name, value in dict(self.fields).items():
            key = name.strip().lower()
            if not key:
                raise CatalogError(f"item {self.id!r} has an empty field name")
            if key in normalized:
                raise CatalogError(f"item {self.id!r} has duplicate field {key!r}")
            normalized[key] = value
        object.__setattr__(self, "fields", normalized)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "fields": {k: value_to_json(v) for k, v in self.fields.items()},
        }

    @classmethod
    def from_json(cls, raw: Mapping) -> "Item":
        for key in ("id", "title", "description", "fields"):
            if key not in raw:
                raise CatalogError(f"missing key {key!r}")
        if not isinstance(raw["fields"], Mapping):
            raise CatalogError("'fields' must be an object")
        fields = {}
        for name, entry in raw["fields"].items():
            try:
                value = value_from_json(entry)
            except CatalogError as exc:
                raise CatalogError(f"field {name!r}: {exc}") from None
            key = name.strip().lower()
            if key in fields:
                raise CatalogError(f"duplicate field {key!r}")
            fields[key] = value
        return cls(str(raw["id"]), str(raw["title"]), str(raw["description"]), fields)

    def text(self) -> str:
        """Item-side text for the encoder: title, rendered fields, description."""
        rendered = ", ".join(f"{name} : {render_value(v)}" for name, v in self.fields.items())
        return ". ".join(p for p in (self.title, rendered, self.description) if p)


class Catalog:
    """Ordered, immutable collection of items with unique ids."""

    def __init__(self, items: Iterable[Item], name: str = "catalog"):
        self.items: tuple[Item, ...] = tuple(items)
        self.name = name
        if not self.items:
            raise CatalogError("empty catalog")
        self._by_id: dict[str, Item] = {}
        for item in self.items:
            if item.id in self._by_id:
                raise CatalogError(f"duplicate item id {item.id!r}")
            self._by_id[item.id] = item
        self.ids: tuple[str, ...] = tuple(i.id for i in self.items)
        self._titles = frozenset(i.title.lower() for i in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Item]:
        return iter(self.items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._by_id

    def __getitem__(self, item_id: str) -> Item:
        try:
            return self._by_id[item_id]
        except KeyError:
            raise KeyError(f"unknown item id {item_id!r}") from None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Catalog) and self.name == other.name and self.items == other.items

    def __repr__(self) -> str:
        return f"Catalog(name={self.name!r}, n={len(self)})"

    def has_title(self, title: str) -> bool:
        return title.lower() in self._titles

    def max_release_year(self, field_name: str = "release date") -> int | None:
        days = [i.fields[field_name].days for i in self.items if isinstance(i.fields.get(field_name), DateValue)]
        return (EPOCH + timedelta(days=max(days))).year if days else None


@dataclass(frozen=True)
class Event:
    item_id: str
    ts: int


class InteractionLog:
    """Per-user chronologically ordered events, validated against a catalog."""

    def __init__(self, users: Mapping[str, Iterable[Event]], catalog: Catalog | None = None):
        self.users: dict[str, tuple[Event, ...]] = {}
        for uid, events in users.items():
            events = tuple(events)
            for prev, cur in zip(events, events[1:]):
                if cur.ts < prev.ts:
                    raise CatalogError(f"user {uid!r}: timestamps decrease ({prev.ts} then {cur.ts})")
            if catalog is not None:
                for ev in events:
                    if ev.item_id not in catalog:
                        raise CatalogError(f"user {uid!r}: unknown item id {ev.item_id!r}")
            self.users[uid] = events

    def __len__(self) -> int:
        return len(self.users)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InteractionLog) and self.users == other.users

    @property
    def short_users(self) -> list[str]:
        """Users kept in the log but flagged for having fewer than two events."""
        return [u for u, ev in self.users.items() if len(ev) < 2]

    def history(self, user_id: str) -> list[str]:
        return [e.item_id for e in self.users[user_id]]


# --- line formats -----------------------------------------------------------


def _dump(record: Mapping) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def _records(path: Union[str, Path]) -> Iterator[tuple[int, dict]]:
    """Yield (line number, record), skipping blank lines and a leading meta header."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{path}:{lineno}: malformed line ({exc.msg})") from None
            if not isinstance(record, dict):
                raise CatalogError(f"{path}:{lineno}: malformed line (expected an object)")
            if lineno == 1 and set(record) == {"meta"}:
                continue
            yield lineno, record


def read_meta(path: Union[str, Path]) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        record = json.loads(first)
    except json.JSONDecodeError:
        return {}
    return record["meta"] if isinstance(record, dict) and set(record) == {"meta"} else {}


def load_catalog(path: Union[str, Path], name: str | None = None) -> Catalog:
    items: list[Item] = []
    seen: set[str] = set()
    for lineno, record in _records(path):
        try:
            item = Item.from_json(record)
        except CatalogError as exc:
            raise CatalogError(f"{path}:{lineno}: {exc}") from None
        if item.id in seen:
            raise CatalogError(f"{path}:{lineno}: duplicate item id {item.id!r}")
        seen.add(item.id)
        items.append(item)
    if not items:
        raise CatalogError("empty catalog")
    if name is None:
        name = read_meta(path).get("name") or Path(path).stem
    return Catalog(items, name=name)


def write_catalog(catalog: Catalog, path: Union[str, Path], meta: Mapping | None = None) -> None:
    header = {"name": catalog.name, **(meta or {})}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump({"meta": header}) + "\n")
        for item in catalog:
            fh.write(_dump(item.to_json()) + "\n")


def load_interactions(path: Union[str, Path], catalog: Catalog) -> InteractionLog:
    users: dict[str, list[Event]] = {}
    for lineno, record in _records(path):
        try:
            uid = str(record["user_id"])
            events = [Event(str(iid), int(ts)) for iid, ts in record["events"]]
        except (KeyError, TypeError, ValueError):
            raise CatalogError(f"{path}:{lineno}: malformed line (expected user_id and events)") from None
        if uid in users:
            raise CatalogError(f"{path}:{lineno}: duplicate user {uid!r}")
        try:
            InteractionLog({uid: events}, catalog)
        except CatalogError as exc:
            raise CatalogError(f"{path}:{lineno}: {exc}") from None
        users[uid] = events
    return InteractionLog(users, catalog)


def write_interactions(log: InteractionLog, path: Union[str, Path], meta: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(_dump({"meta": dict(meta)}) + "\n")
        for uid, events in log.users.items():
            fh.write(_dump({"user_id": uid, "events": [[e.item_id, e.ts] for e in events]}) + "\n")


# --- synthetic catalogs -----------------------------------------------------

GENRES = (
    "shooter", "strategy", "racing", "sports", "puzzle",
    "platformer", "rpg", "simulation", "adventure", "fighting",
)

# Tags with elevated probability for each genre; the rest are drawn from TAGS uniformly.
GENRE_TAGS = {
    "shooter": ("first-person", "multiplayer", "online competitive", "sci-fi", "battle royale", "3d"),
    "strategy": ("turn-based", "real-time", "building", "historical", "single player", "difficult"),
    "racing": ("3d", "realistic", "local co-op", "online competitive", "arcade", "high quality soundtrack"),
    "sports": ("soccer", "realistic", "local co-op", "online competitive", "multiplayer", "family friendly"),
    "puzzle": ("2d", "casual", "relaxing", "family friendly", "pixel art", "single player"),
    "platformer": ("2d", "pixel art", "retro", "difficult", "cartoon", "made for kids"),
    "rpg": ("fantasy", "story rich", "open world", "turn-based", "anime", "third-person"),
    "simulation": ("building", "sandbox", "relaxing", "realistic", "crafting", "physics"),
    "adventure": ("story rich", "open world", "exploration", "third-person", "horror", "survival"),
    "fighting": ("arcade", "local co-op", "anime", "online competitive", "2d", "retro"),
}

TAGS = tuple(sorted({t for ts in GENRE_TAGS.values() for t in ts} | {
    "co-op", "roguelike", "stealth", "cyberpunk", "crafting", "not made for kids",
    "cartoon", "controller support", "vr", "atmospheric", "colorful", "funny",
}))

PUBLISHERS = (
    "prison games", "northwind studios", "red harbor", "blue comet", "ironleaf interactive",
    "pale moon", "granite works", "silver arrow", "tidal forge", "ember lane",
    "quiet giant", "copper fox", "lumen house", "orbit nine", "saltmarsh",
    "highland bytes", "velvet engine", "foxglove", "kestrel media", "marble hall",
)

PRICES = (0.0, 4.99, 9.99, 10.0, 14.99, 19.99, 24.99, 29.99, 39.99, 49.99, 59.99, 69.99)

TITLE_WORDS = (
    "ash", "atlas", "aurora", "abyss", "anvil", "arrow", "banner", "beacon", "blade", "blaze",
    "bloom", "bolt", "bramble", "breaker", "bridge", "cascade", "castle", "cinder", "circuit", "citadel",
    "clockwork", "cobalt", "comet", "compass", "coral", "crater", "crown", "crystal", "cyclone", "dawn",
    "delta", "desert", "drift", "dune", "dusk", "echo", "eclipse", "ember", "empire", "engine",
    "falcon", "fable", "fathom", "feather", "fjord", "flare", "forge", "fortress", "frontier", "frost",
    "galaxy", "garden", "garrison", "ghost", "glacier", "glyph", "granite", "gravity", "grove", "harbor",
    "harvest", "haven", "helix", "horizon", "hollow", "hunter", "inferno", "iron", "island", "ivory",
    "jade", "journey", "jungle", "kernel", "kingdom", "knight", "labyrinth", "lagoon", "lantern", "legacy",
    "legend", "lumen", "lunar", "magma", "maple", "marauder", "meadow", "meteor", "midnight", "mirage",
    "monolith", "moss", "nebula", "nexus", "nomad", "oasis", "obsidian", "ocean", "omen", "onyx",
    "oracle", "orbit", "outpost", "paladin", "paragon", "phantom", "pilgrim", "pinnacle", "pioneer", "pixel",
    "plasma", "prism", "pulse", "quantum", "quarry", "quasar", "quest", "radiant", "raider", "rampart",
    "raven", "realm", "reef", "relic", "rift", "river", "rocket", "rogue", "ruin", "rune",
    "saber", "saga", "sapphire", "scarlet", "sentinel", "shadow", "shard", "shore", "siege", "signal",
    "summit", "solstice", "spark", "specter", "sphinx", "spire", "storm", "strider", "sunder", "tempest",
    "temple", "thunder", "tide", "titan", "torrent", "tower", "trail", "tundra", "twilight", "umbra",
    "valley", "vanguard", "vapor", "vector", "velocity", "venture", "verdant", "vertex", "viper", "vista",
    "voyage", "warden", "wasteland", "wave", "whisper", "wild", "willow", "winter", "wisp", "wraith",
    "zenith", "zephyr", "apex", "basalt", "brass", "canyon", "cipher", "cradle", "dagger", "dynamo",
)

TITLE_PATTERNS = ("{a} {b}", "{a} of {b}", "the {a}", "{a} {b} {c}", "{a}: {b} {c}", "{a} {b}")
SUFFIXES = ("", "", "", "", " 2", " ii", " 3", " zero", " remastered", " deluxe")

DESCRIPTION_LINES = (
    "Explore a world full of secrets.",
    "Challenge your friends and climb the ladder.",
    "Every choice shapes the outcome.",
    "Master precise controls and tight mechanics.",
    "Hours of content await.",
    "A fresh take on a classic formula.",
    "Team up or go it alone.",
    "Built for short sessions and long nights alike.",
    "Discover hidden paths and rare rewards.",
    "Beautifully crafted from start to finish.",
)


def _make_title(rng: np.random.Generator, words: list[str], shared: list[str]) -> str:
    picked: list[str] = []
    while len(picked) < 3:
        pool = words if rng.random() < 0.8 else shared
        word = pool[int(rng.integers(len(pool)))]
        if word not in picked:
            picked.append(word)
    pattern = TITLE_PATTERNS[int(rng.integers(len(TITLE_PATTERNS)))]
    title = pattern.format(a=picked[0], b=picked[1], c=picked[2]) + SUFFIXES[int(rng.integers(len(SUFFIXES)))]
    return title.title()


def synth_catalog(seed: int, n_items: int, n_users: int) -> tuple[Catalog, InteractionLog]:
    """Seeded game-like catalog plus genre-biased user histories.

    Title vocabulary is partitioned across genres per seed, so two seeds give two
    domains whose title/genre associations and co-occurrence patterns differ
    while sharing the genre, tag, price and date vocabulary.
    """
    if n_items < 10:
        raise ValueError("n_items must be >= 10")
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    rng = np.random.default_rng(seed)

    words = list(TITLE_WORDS)
    rng.shuffle(words)
    share = len(words) // (len(GENRES) + 1)
    genre_words = {g: words[i * share:(i + 1) * share] for i, g in enumerate(GENRES)}
    shared_words = words[len(GENRES) * share:]

    items: list[Item] = []
    titles: set[str] = set()
    genre_of: list[str] = []
    publisher_order = list(PUBLISHERS)
    rng.shuffle(publisher_order)
    for idx in range(n_items):
        primary = GENRES[int(rng.integers(len(GENRES)))]
        genres = [primary]
        if rng.random() < 0.25:
            other = GENRES[int(rng.integers(len(GENRES)))]
            if other != primary:
                genres.append(other)

        for _ in range(64):
            title = _make_title(rng, genre_words[primary], shared_words)
            if title.lower() not in titles:
                break
        else:
            title = f"{title} {idx}"
        titles.add(title.lower())

        n_tags = int(rng.integers(2, 6))
        tags: list[str] = []
        affinity = GENRE_TAGS[primary]
        while len(tags) < n_tags:
            pool = affinity if rng.random() < 0.6 else TAGS
            tag = pool[int(rng.integers(len(pool)))]
            if tag in tags:
                continue
            if {tag, *tags} >= {"made for kids", "not made for kids"}:
                continue
            tags.append(tag)

        price = PRICES[int(rng.integers(len(PRICES)))]
        released = int(rng.integers(year_start(2005), year_start(2025)))
        # Publishers lean toward a genre so the text field carries weak signal.
        pub_idx = (GENRES.index(primary) * 2 + int(rng.integers(3))) % len(publisher_order)
        if rng.random() < 0.3:
            pub_idx = int(rng.integers(len(publisher_order)))
        publisher = publisher_order[pub_idx]

        line = DESCRIPTION_LINES[int(rng.integers(len(DESCRIPTION_LINES)))]
        description = f"A {' and '.join(genres)} game with {tags[0]} and {tags[-1]} elements. {line}"
        fields = {
            "genre": CategoriesValue(tuple(genres)),
            "tags": CategoriesValue(tuple(tags)),
            "price": NumberValue(price, "USD"),
            "release date": DateValue(released),
            "publisher": TextValue(publisher),
        }
        items.append(Item(f"g{idx:05d}", title, description, fields))
        genre_of.append(primary)
    catalog = Catalog(items, name=f"synth-{seed}")

    # Zipf-like popularity over a random item ranking.
    ranks = rng.permutation(n_items)
    popularity = 1.0 / (ranks + 5.0) ** 0.9
    by_genre = {g: np.array([i for i, pg in enumerate(genre_of) if pg == g], dtype=int) for g in GENRES}

    users: dict[str, list[Event]] = {}
    for u in range(n_users):
        favorites = [GENRES[int(rng.integers(len(GENRES)))]]
        if rng.random() < 0.4:
            favorites.append(GENRES[int(rng.integers(len(GENRES)))])
        length = min(n_items, 4 + int(rng.geometric(0.15)))
        length = min(length, 24)
        chosen: list[int] = []
        taken = np.zeros(n_items, dtype=bool)
        while len(chosen) < length:
            fav = favorites[int(rng.integers(len(favorites)))]
            pool = by_genre[fav] if rng.random() < 0.85 and len(by_genre[fav]) else np.arange(n_items)
            pool = pool[~taken[pool]]
            if not len(pool):
                pool = np.flatnonzero(~taken)
            weights = popularity[pool] / popularity[pool].sum()
            pick = int(rng.choice(pool, p=weights))
            taken[pick] = True
            chosen.append(pick)
        ts = int(rng.integers(1_600_000_000, 1_700_000_000))
        events = []
        for i in chosen:
            ts += int(rng.integers(3600, 30 * 86400))
            events.append(Event(items[i].id, ts))
        users[f"u{u:05d}"] = events
    return catalog, InteractionLog(users, catalog)
