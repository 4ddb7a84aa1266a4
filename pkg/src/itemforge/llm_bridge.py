"""Text generation for summaries, misspellings and simulated dialogue.

Two backends: :class:`Remote` speaks the OpenAI-compatible chat-completion
protocol; :class:`DeterministicFallback` is a template engine keyed by a
structured first prompt line (``COMMAND key=value ...``) and never touches the
network. Every prompt built here starts with such a header, followed by plain
instructions for a remote model.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union
from urllib.parse import urlparse

import httpx

from itemforge.catalog import CategoriesValue, Item, render_value


class LLMError(RuntimeError):
    def __init__(self, message: str, endpoint: str | None = None):
        super().__init__(f"{message} (endpoint: {endpoint})" if endpoint else message)
        self.endpoint = endpoint


class RemoteConfigError(LLMError):
    pass


class RemoteNetworkError(LLMError):
    pass


class RemoteStatusError(LLMError):
    def __init__(self, message: str, endpoint: str | None = None, status: int | None = None):
        super().__init__(message, endpoint)
        self.status = status


class RemoteResponseError(LLMError):
    pass


@dataclass(frozen=True)
class GenRequest:
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class DeterministicFallback:
    pass


RETRY_BACKOFF = (1.0, 2.0, 4.0)


@dataclass(eq=False)
class Remote:
    endpoint: str
    model: str
    auth_env: str = "OPENAI_API_KEY"
    max_in_flight: int = 4
    timeout: float = 60.0
    replay_log: Optional[Path] = None
    transport: Optional[httpx.BaseTransport] = None
    sleep: Callable[[float], None] = time.sleep
    _slots: threading.Semaphore = field(init=False, repr=False)
    _log_lock: threading.Lock = field(init=False, repr=False)

    def __post_init__(self) -> None:
        parsed = urlparse(self.endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise RemoteConfigError("endpoint must be an absolute http(s) URL", self.endpoint)
        if self.max_in_flight < 1:
            raise RemoteConfigError("max_in_flight must be >= 1", self.endpoint)
        self._slots = threading.Semaphore(self.max_in_flight)
        self._log_lock = threading.Lock()

    @property
    def url(self) -> str:
        return self.endpoint.rstrip("/") + "/chat/completions"


GenBackend = Union[Remote, DeterministicFallback]


def generate(backend: GenBackend, req: GenRequest) -> str:
    if isinstance(backend, DeterministicFallback):
        return _fallback(req)
    if isinstance(backend, Remote):
        return _remote(backend, req)
    raise TypeError(f"unknown backend {backend!r}")


# --- remote -----------------------------------------------------------------


def _request_key(backend: Remote, req: GenRequest) -> str:
    blob = json.dumps([backend.model, req.prompt, req.max_tokens, req.temperature, req.seed])
    return hashlib.sha256(blob.encode()).hexdigest()


def _replay_lookup(backend: Remote, key: str) -> str | None:
    if backend.replay_log is None or not Path(backend.replay_log).exists():
        return None
    with open(backend.replay_log, encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            if record.get("key") == key:
                return record["text"]
    return None


def _remote(backend: Remote, req: GenRequest) -> str:
    token = os.environ.get(backend.auth_env)
    if not token:
        raise RemoteConfigError(f"auth env var {backend.auth_env} is not set", backend.endpoint)
    key = _request_key(backend, req)
    cached = _replay_lookup(backend, key)
    if cached is not None:
        return cached

    payload = {
        "model": backend.model,
        "messages": [{"role": "user", "content": req.prompt}],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
        "seed": req.seed,
    }
    headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
    last_error: LLMError | None = None
    with backend._slots:
        for attempt in range(len(RETRY_BACKOFF) + 1):
            if attempt:
                backend.sleep(RETRY_BACKOFF[attempt - 1])
            try:
                with httpx.Client(transport=backend.transport, timeout=backend.timeout) as client:
                    resp = client.post(backend.url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = RemoteNetworkError(f"request failed: {exc}", backend.endpoint)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = RemoteStatusError(f"HTTP {resp.status_code}", backend.endpoint, resp.status_code)
                continue
            if not 200 <= resp.status_code < 300:
                raise RemoteStatusError(f"HTTP {resp.status_code}", backend.endpoint, resp.status_code)
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise RemoteResponseError("response lacks choices[0].message.content", backend.endpoint) from None
            text = (text or "").strip()
            if not text:
                raise RemoteResponseError("empty completion", backend.endpoint)
            break
        else:
            assert last_error is not None
            raise last_error

    if backend.replay_log is not None:
        with backend._log_lock, open(backend.replay_log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"key": key, "text": text}, ensure_ascii=False) + "\n")
    return text


# --- structured prompts -----------------------------------------------------

_KEY = re.compile(r"(?:^|\s)([a-z_]+)=")


def structured_prompt(command: str, instructions: str = "", **fields: Union[str, Sequence[str]]) -> str:
    parts = [command]
    for key, value in fields.items():
        if not isinstance(value, str):
            value = ",".join(value)
        parts.append(f"{key}={value.replace(chr(10), ' ')}")
    header = " ".join(parts)
    return f"{header}\n{instructions}" if instructions else header


def parse_structured(prompt: str) -> tuple[str, dict[str, str]]:
    header = prompt.split("\n", 1)[0].strip()
    command, _, rest = header.partition(" ")
    fields: dict[str, str] = {}
    matches = list(_KEY.finditer(rest))
    for m, nxt in zip(matches, matches[1:] + [None]):
        end = nxt.start() if nxt else len(rest)
        fields[m.group(1)] = rest[m.end():end].strip()
    return command, fields


def _split(value: str | None) -> list[str]:
    return [v.strip() for v in (value or "").split(",") if v.strip()]


def join_and(words: Sequence[str]) -> str:
    words = list(words)
    if len(words) <= 1:
        return "".join(words)
    if len(words) == 2:
        return f"{words[0]} and {words[1]}"
    return ", ".join(words[:-1]) + f", and {words[-1]}"


# --- fallback engine --------------------------------------------------------


def _summarize_user_text(f: dict[str, str]) -> str:
    genres, tags, titles = _split(f.get("genres")), _split(f.get("tags")), _split(f.get("top_titles"))
    if len(genres) >= 3:
        text = f"The user enjoys a diverse range of games including {join_and(genres)} games"
    elif genres:
        text = f"The user enjoys {join_and(genres)} games"
    elif tags:
        text = f"The user enjoys games featuring {join_and(tags)}"
    else:
        text = "The user enjoys a variety of games"
    if titles:
        text += f" such as {join_and(titles)}"
    text += "."
    if genres and tags:
        text += f" They are drawn to {join_and(tags)} experiences."
    return text


_ITEM_CLAUSES = {
    "tags": "with {v}",
    "price": "priced at {v} dollars",
    "release date": "released on {v}",
    "publisher": "published by {v}",
}


def _summarize_item_text(f: dict[str, str]) -> str:
    attrs = [a.split(":", 1) for a in (f.get("attrs") or "").split(";") if ":" in a]
    head = "A game"
    clauses = []
    for name, value in attrs:
        name, value = name.strip(), value.strip()
        if name == "genre":
            head = f"A {value.replace(', ', ' and ')} game"
        else:
            clauses.append(_ITEM_CLAUSES.get(name, "with {n} {v}").format(n=name, v=value))
    return head + (" " + ", ".join(clauses) if clauses else "") + "."


def _misspell_text(f: dict[str, str], rng: random.Random) -> str:
    name = f.get("name", "")
    n = int(f.get("n", "3") or 3)
    out = []
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    for _ in range(n):
        chars = list(name)
        if len(chars) < 2:
            break
        i = rng.randrange(len(chars))
        op = rng.choice(("drop", "swap", "sub"))
        if op == "drop":
            del chars[i]
        elif op == "swap" and i < len(chars) - 1:
            chars[i], chars[i + 1] = chars[i + 1], chars[i]
        else:
            chars[i] = rng.choice(alphabet)
        out.append("".join(chars))
    return "\n".join(out) or name


_USER_OPENERS = (
    "Hey, I am looking for a recommendation for a new game. I've played {titles} in the past.",
    "Hi! Can you suggest a game? Lately I've been playing {titles}.",
    "Hello, I need something new to play. I really liked {titles}.",
    "I want a new game to try. Previously I played {titles}.",
)
_USER_FEATURES = (
    "I'm looking for something with {attrs}.",
    "Ideally it would have {attrs}.",
    "Something with {attrs} would be great.",
    "I'd like a game with {attrs}.",
)
_USER_CONSTRAINTS = (
    "Also it should be {attrs}.",
    "One more thing: {attrs}, please.",
    "And I'd prefer it {attrs}.",
)
_ASSISTANT = {
    "ask_features": (
        "Sure! What type of game or features are you looking for in your next game?",
        "Happy to help. What kind of experience do you have in mind?",
        "Of course. Any genres or features you care about?",
    ),
    "ask_more": (
        "Great, anything else that matters to you, like price or release date?",
        "Got it. Do you have any other preferences?",
        "Nice choice. Is there anything else I should keep in mind?",
    ),
    "confirm": (
        "Thanks, let me look for games that match.",
        "Understood, searching for a good match now.",
    ),
}


def _fallback(req: GenRequest) -> str:
    command, f = parse_structured(req.prompt)
    rng = random.Random(int.from_bytes(hashlib.sha256(f"{req.seed}|{req.prompt}".encode()).digest()[:8], "little"))
    if command == "SUMMARIZE_USER":
        text = _summarize_user_text(f)
    elif command == "SUMMARIZE_ITEM":
        text = _summarize_item_text(f)
    elif command == "MISSPELL":
        text = _misspell_text(f, rng)
    elif command == "SIMULATE_USER":
        intent = f.get("intent", "features")
        if intent == "history":
            text = rng.choice(_USER_OPENERS).format(titles=join_and(_split(f.get("titles"))))
        else:
            pool = _USER_CONSTRAINTS if intent == "constraints" else _USER_FEATURES
            text = rng.choice(pool).format(attrs=join_and([a.strip() for a in f.get("attrs", "").split(";") if a.strip()]))
    elif command == "ASSISTANT_REPLY":
        text = rng.choice(_ASSISTANT.get(f.get("stage", ""), _ASSISTANT["ask_more"]))
    else:
        # Unknown commands echo the header back; the fallback never errors.
        text = req.prompt.split("\n", 1)[0]
    words = text.split(" ")
    return " ".join(words[: req.max_tokens])


# --- task-facing helpers ----------------------------------------------------


def _top_values(history: Sequence[Item], field_name: str, limit: int, skip: set[str] = frozenset()) -> list[str]:
    counts: Counter[str] = Counter()
    for item in history:
        v = item.fields.get(field_name)
        if isinstance(v, CategoriesValue):
            counts.update(x for x in v.values if x not in skip)
    return [v for v, _ in counts.most_common(limit)]


def summarize_user(history: Sequence[Item], backend: GenBackend, seed: int = 0) -> str:
    """Short profile of a user's taste from their most frequent genres and tags."""
    if not history:
        raise ValueError("history must be non-empty")
    genres = _top_values(history, "genre", 4)
    tags = _top_values(history, "tags", 3, skip=set(genres))
    prompt = structured_prompt(
        "SUMMARIZE_USER",
        "Write one to three sentences summarizing this player's taste in games from the genres "
        "and tags above. Do not list game titles or identifiers.",
        genres=genres,
        tags=tags,
    )
    text = generate(backend, GenRequest(prompt, max_tokens=120, temperature=0.7, seed=seed))
    for item in history:
        text = text.replace(item.id, "")
    return text


def summarize_item(item: Item, chosen_fields: Sequence[str], backend: GenBackend, seed: int = 0) -> str:
    """One-sentence description built from ``chosen_fields``; never names the title."""
    if not chosen_fields:
        raise ValueError("chosen_fields must be non-empty")
    missing = [f for f in chosen_fields if f not in item.fields]
    if missing:
        raise ValueError(f"item {item.id!r} lacks fields {missing}")
    attrs = ";".join(f"{name}:{render_value(item.fields[name])}" for name in chosen_fields)
    prompt = structured_prompt(
        "SUMMARIZE_ITEM",
        "Describe a game with the attributes above in one casual sentence, the way a player "
        "would when searching for it. Mention every attribute value. Do not name the game.",
        attrs=attrs,
    )
    text = generate(backend, GenRequest(prompt, max_tokens=80, temperature=0.7, seed=seed))
    if item.title.lower() in text.lower():
        text = re.sub(re.escape(item.title), "this game", text, flags=re.IGNORECASE)
    return text


def suggest_misspellings(name: str, backend: GenBackend, seed: int = 0, n: int = 3) -> list[str]:
    prompt = structured_prompt(
        "MISSPELL",
        f"List {n} plausible misspellings of the game name above, one per line, nothing else.",
        name=name,
        n=str(n),
    )
    text = generate(backend, GenRequest(prompt, max_tokens=60, temperature=1.0, seed=seed))
    return [line.strip() for line in text.splitlines() if line.strip()]
