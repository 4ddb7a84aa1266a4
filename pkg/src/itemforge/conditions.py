"""Conjunctive attribute predicates with negation: evaluation, rendering, negative mining.

A :class:`Condition` is the exact semantics recorded next to a generated query.
Query strings are presentation only; every metric and every negative is
checked against the tree.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from datetime import timedelta
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from rapidfuzz.distance import Levenshtein

from itemforge.catalog import (
    Catalog,
    CategoriesValue,
    DateValue,
    EPOCH,
    Item,
    NumberValue,
    TextValue,
    format_date,
    format_number,
    parse_date,
    render_date,
    year_start,
)

OPS = ("<", "<=", ">", ">=", "=")
DEFAULT_FUZZY_DISTANCE = 2


class ConditionError(ValueError):
    pass


class InsufficientNegatives(ConditionError):
    pass


@dataclass(frozen=True)
class HasCategory:
    field: str
    value: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "field", self.field.lower())
        object.__setattr__(self, "value", self.value.lower())


@dataclass(frozen=True)
class TextEquals:
    field: str
    value: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "field", self.field.lower())


@dataclass(frozen=True)
class NumCmp:
    field: str
    op: str
    threshold: float

    def __post_init__(self) -> None:
        _check_op(self.op)
        if not math.isfinite(self.threshold):
            raise ConditionError("threshold must be finite")
        object.__setattr__(self, "field", self.field.lower())
        object.__setattr__(self, "threshold", float(self.threshold))


@dataclass(frozen=True)
class DateCmp:
    field: str
    op: str
    threshold: int  # days since epoch

    def __post_init__(self) -> None:
        _check_op(self.op)
        object.__setattr__(self, "field", self.field.lower())
        object.__setattr__(self, "threshold", int(self.threshold))


@dataclass(frozen=True)
class Not:
    child: "Condition"


@dataclass(frozen=True)
class All:
    children: tuple["Condition", ...]

    def __post_init__(self) -> None:
        children = tuple(self.children)
        if not children:
            raise ConditionError("All needs at least one child")
        object.__setattr__(self, "children", children)


@dataclass(frozen=True)
class FuzzyTitle:
    target: str
    max_distance: int = DEFAULT_FUZZY_DISTANCE

    def __post_init__(self) -> None:
        if self.max_distance < 0:
            raise ConditionError("max_distance must be >= 0")


Condition = Union[HasCategory, TextEquals, NumCmp, DateCmp, Not, All, FuzzyTitle]


def _check_op(op: str) -> None:
    if op not in OPS:
        raise ConditionError(f"unknown comparison {op!r}")


def _compare(x: float, op: str, y: float) -> bool:
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    if op == ">=":
        return x >= y
    return x == y


def title_distance(a: str, b: str) -> int:
    """Case-insensitive Levenshtein distance."""
    return Levenshtein.distance(a.lower(), b.lower())


def evaluate(item: Item, cond: Condition) -> bool:
    """True iff ``item`` satisfies ``cond``. Missing or mistyped fields never match."""
    match cond:
        case HasCategory(field, value):
            v = item.fields.get(field)
            return isinstance(v, CategoriesValue) and value in v
        case TextEquals(field, value):
            v = item.fields.get(field)
            return isinstance(v, TextValue) and v.value.casefold() == value.casefold()
        case NumCmp(field, op, threshold):
            v = item.fields.get(field)
            return isinstance(v, NumberValue) and _compare(v.value, op, threshold)
        case DateCmp(field, op, threshold):
            v = item.fields.get(field)
            return isinstance(v, DateValue) and _compare(v.days, op, threshold)
        case Not(child):
            return not evaluate(item, child)
        case All(children):
            return all(evaluate(item, c) for c in children)
        case FuzzyTitle(target, bound):
            return title_distance(item.title, target) <= bound
    raise ConditionError(f"not a condition: {cond!r}")


def satisfiers(catalog: Catalog, cond: Condition) -> list[str]:
    return [item.id for item in catalog if evaluate(item, cond)]


def recent_cutoff(catalog: Catalog, field: str = "release date") -> Optional[int]:
    """First day of the earliest year counted as "recent": the catalog's last three calendar years."""
    year = catalog.max_release_year(field)
    return None if year is None else year_start(year - 2)


def walk(cond: Condition) -> Iterable[Condition]:
    yield cond
    if isinstance(cond, Not):
        yield from walk(cond.child)
    elif isinstance(cond, All):
        for c in cond.children:
            yield from walk(c)


# --- serialization ----------------------------------------------------------


def to_dict(cond: Condition) -> dict:
    match cond:
        case HasCategory(field, value):
            return {"node": "has_category", "field": field, "value": value}
        case TextEquals(field, value):
            return {"node": "text_equals", "field": field, "value": value}
        case NumCmp(field, op, threshold):
            return {"node": "num_cmp", "field": field, "op": op, "threshold": threshold}
        case DateCmp(field, op, threshold):
            return {"node": "date_cmp", "field": field, "op": op, "threshold": format_date(threshold)}
        case Not(child):
            return {"node": "not", "child": to_dict(child)}
        case All(children):
            return {"node": "all", "children": [to_dict(c) for c in children]}
        case FuzzyTitle(target, bound):
            return {"node": "fuzzy_title", "target": target, "max_distance": bound}
    raise ConditionError(f"not a condition: {cond!r}")


def from_dict(raw: Mapping) -> Condition:
    try:
        node = raw["node"]
        if node == "has_category":
            return HasCategory(raw["field"], raw["value"])
        if node == "text_equals":
            return TextEquals(raw["field"], raw["value"])
        if node == "num_cmp":
            return NumCmp(raw["field"], raw["op"], float(raw["threshold"]))
        if node == "date_cmp":
            return DateCmp(raw["field"], raw["op"], parse_date(raw["threshold"]))
        if node == "not":
            return Not(from_dict(raw["child"]))
        if node == "all":
            return All(tuple(from_dict(c) for c in raw["children"]))
        if node == "fuzzy_title":
            return FuzzyTitle(raw["target"], int(raw["max_distance"]))
    except (KeyError, TypeError) as exc:
        raise ConditionError(f"malformed condition node: {exc}") from None
    raise ConditionError(f"unknown condition node {raw.get('node')!r}")


# --- rendering --------------------------------------------------------------

# Keys are "<node>" or "<node>.<variant>"; the first entry of each list is the canonical phrase.
DEFAULT_SURFACES: dict[str, list[str]] = {
    "has_category.genre": ["{value} game", "{value} title", "game in the {value} genre"],
    "has_category": ["{value}", "with {value}", "featuring {value}"],
    "text_equals.publisher": ["published by {value}", "from {value}", "made by {value}"],
    "text_equals": ["{field} {value}", "with {field} {value}"],
    "num_cmp.<": ["{field} under {value} {unit}", "{field} below {value} {unit}", "{field} less than {value} {unit}"],
    "num_cmp.<=": ["{field} of at most {value} {unit}", "{field} no more than {value} {unit}"],
    "num_cmp.>": ["{field} over {value} {unit}", "{field} above {value} {unit}", "{field} more than {value} {unit}"],
    "num_cmp.>=": ["{field} of at least {value} {unit}", "{field} from {value} {unit} up"],
    "num_cmp.=": ["{field} : {value}", "{field} of exactly {value} {unit}"],
    "date_cmp.after_year": ["released after {prev_year}", "released in {year} or later", "from after {prev_year}"],
    "date_cmp.before_year": ["released before {year}", "released earlier than {year}", "from before {year}"],
    "date_cmp.recent": ["released recently", "a recent release"],
    "date_cmp.<": ["released before {date}"],
    "date_cmp.<=": ["released on or before {date}"],
    "date_cmp.>": ["released after {date}"],
    "date_cmp.>=": ["released on or after {date}"],
    "date_cmp.=": ["release date : {date}", "released on {date}"],
    "not": ["not {child}", "but not {child}", "that is not {child}"],
    "all": ["{head}, {last}", "{head} and {last}", "{head}, {last}"],
    "fuzzy_title": ["{value}", "something called {value}"],
}

UNIT_WORDS = {"usd": "dollars", "eur": "euros"}


def _stable_seed(*parts: object) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _pick(pool: Mapping[str, Sequence[str]], keys: Sequence[str], rng: random.Random) -> str:
    for key in keys:
        if pool.get(key):
            options = pool[key]
            return options[rng.randrange(len(options))]
    raise ConditionError(f"no surface template for node kind {keys[-1]!r}")


def render(
    cond: Condition,
    template_pool: Optional[Mapping[str, Sequence[str]]] = None,
    seed: int = 0,
    recent_cutoff: Optional[int] = None,
    units: Optional[Mapping[str, str]] = None,
) -> str:
    """Natural-language phrase for ``cond``; deterministic per (cond, seed).

    ``recent_cutoff`` (days since epoch) lets a ``DateCmp(>=, cutoff)`` render as
    "recent"; without it the year form is used. ``units`` maps field names to unit
    strings for number rendering (defaults to dollars).
    """
    pool = DEFAULT_SURFACES if template_pool is None else template_pool
    rng = random.Random(_stable_seed(seed, to_dict(cond)))
    units = units or {}

    def go(node: Condition) -> str:
        match node:
            case HasCategory(field, value):
                return _pick(pool, [f"has_category.{field}", "has_category"], rng).format(field=field, value=value)
            case TextEquals(field, value):
                return _pick(pool, [f"text_equals.{field}", "text_equals"], rng).format(field=field, value=value)
            case NumCmp(field, op, threshold):
                unit = units.get(field, "USD")
                return _pick(pool, [f"num_cmp.{op}"], rng).format(
                    field=field, value=format_number(threshold), unit=UNIT_WORDS.get(unit.lower(), unit)
                )
            case DateCmp(field, op, threshold):
                d = EPOCH + timedelta(days=threshold)
                keys = [f"date_cmp.{op}"]
                if recent_cutoff is not None and op == ">=" and threshold == recent_cutoff:
                    keys.insert(0, "date_cmp.recent")
                elif (d.month, d.day) == (1, 1) and op == ">=":
                    keys.insert(0, "date_cmp.after_year")
                elif (d.month, d.day) == (1, 1) and op == "<":
                    keys.insert(0, "date_cmp.before_year")
                return _pick(pool, keys, rng).format(
                    field=field, date=render_date(threshold), year=d.year, prev_year=d.year - 1
                )
            case Not(HasCategory(_, value)):
                return _pick(pool, ["not"], rng).format(child=value)
            case Not(child):
                return _pick(pool, ["not"], rng).format(child=go(child))
            case All(children):
                parts = [go(c) for c in children]
                if len(parts) == 1:
                    return parts[0]
                template = _pick(pool, ["all"], rng)
                if parts[-1].startswith("but "):
                    template = template.replace(" and {last}", ", {last}")
                return template.format(head=", ".join(parts[:-1]), last=parts[-1])
            case FuzzyTitle(target, _):
                return _pick(pool, ["fuzzy_title"], rng).format(value=target)
        raise ConditionError(f"not a condition: {node!r}")

    return go(cond)


# --- negatives --------------------------------------------------------------


def mine_negatives(
    catalog: Catalog,
    positives: Iterable[str],
    cond: Optional[Condition] = None,
    k: int = 7,
    seed: int = 0,
    exclude: Iterable[str] = (),
    hard_fraction: float = 0.0,
) -> list[str]:
    """Sample ``k`` true negatives from the eligible pool.

    Eligible items are outside ``positives`` and ``exclude`` (e.g. the user's
    full history) and, when ``cond`` is given, fail it. With ``hard_fraction``
    > 0 and a conjunctive ``cond``, that share of the ``k`` slots goes to near
    misses: items violating exactly one clause, picked by first choosing a
    clause uniformly and then an item that violates only that clause. The
    rest, and any shortfall, come uniformly from the remaining pool.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0.0 <= hard_fraction <= 1.0:
        raise ValueError("hard_fraction must be in [0, 1]")
    if k == 0:
        return []
    banned = set(positives) | set(exclude)
    pool = [
        item for item in catalog
        if item.id not in banned and (cond is None or not evaluate(item, cond))
    ]
    if len(pool) < k:
        raise InsufficientNegatives(f"insufficient negatives: need {k}, eligible pool has {len(pool)}")
    rng = np.random.default_rng(seed)
    n_hard = round(k * hard_fraction) if isinstance(cond, All) and len(cond.children) > 1 else 0
    picked: list[int] = []
    if n_hard:
        # Near misses, grouped by the single clause they violate.
        groups: dict[int, list[int]] = {}
        for i, item in enumerate(pool):
            failed = [j for j, c in enumerate(cond.children) if not evaluate(item, c)]
            if len(failed) == 1:
                groups.setdefault(failed[0], []).append(i)
        for _ in range(n_hard):
            live = sorted(j for j, g in groups.items() if g)
            if not live:
                break
            group = groups[live[int(rng.integers(len(live)))]]
            picked.append(group.pop(int(rng.integers(len(group)))))
    taken = set(picked)
    rest = [i for i in range(len(pool)) if i not in taken]
    picked.extend(rest[i] for i in rng.choice(len(rest), size=k - len(picked), replace=False))
    return [pool[i].id for i in picked]
