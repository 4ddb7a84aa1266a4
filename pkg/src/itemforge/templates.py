"""Query templates: 20 train + 20 test patterns per task, plus the templates file format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Union

TASKS = ("UH2I", "I2I", "US2I", "FA2I", "SA2I", "AS2I", "NM2I", "VC2I", "NA2I", "UQ2I")
SPLITS = ("train", "test")
PLACEHOLDERS = ("HISTORY", "ITEM", "SUMMARY", "ATTRS", "CONDITION", "NAME")

REQUIRED = {
    "UH2I": {"HISTORY"},
    "I2I": {"ITEM"},
    "US2I": {"SUMMARY"},
    "FA2I": {"ATTRS"},
    "SA2I": {"ATTRS"},
    "AS2I": {"SUMMARY"},
    "NM2I": {"NAME"},
    "VC2I": {"CONDITION"},
    "NA2I": {"CONDITION"},
    "UQ2I": {"HISTORY", "CONDITION"},
}

_SLOT = re.compile(r"\{([A-Z]+)\}")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    id: str
    task: str
    split: str
    pattern: str

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise TemplateError(f"{self.id}: unknown task {self.task!r}")
        if self.split not in SPLITS:
            raise TemplateError(f"{self.id}: unknown split {self.split!r}")
        slots = set(_SLOT.findall(self.pattern))
        if slots != REQUIRED[self.task]:
            raise TemplateError(
                f"{self.id}: placeholders {sorted(slots)} != required {sorted(REQUIRED[self.task])}"
            )

    def fill(self, **values: str) -> str:
        return _SLOT.sub(lambda m: values[m.group(1)], self.pattern)


_PATTERNS: dict[str, list[str]] = {
    "UH2I": [
        # train
        "A user has played {HISTORY}. Recommend an item for them to play next",
        "Given that someone played {HISTORY}, what should they play next?",
        "Play history: {HISTORY}. Suggest the next game.",
        "I recently finished {HISTORY}. What game should I pick up now?",
        "Recommend a game for a player whose history is {HISTORY}",
        "After {HISTORY}, which game would this player enjoy?",
        "The player's library includes {HISTORY}. Predict their next game.",
        "What comes next for someone who played {HISTORY}?",
        "My recent games: {HISTORY}. Any suggestions?",
        "Based on {HISTORY}, recommend one more game",
        "Someone has been playing {HISTORY}. Find their next favorite.",
        "History of games played: {HISTORY}",
        "Games I've played so far are {HISTORY}. What now?",
        "Suggest a follow-up game after {HISTORY}",
        "A gamer played {HISTORY} in order. Recommend the next one.",
        "Here is what I played: {HISTORY}. Recommend something similar to play next.",
        "User sessions: {HISTORY}. Next game?",
        "Considering this player enjoyed {HISTORY}, recommend a game",
        "Pick a game for a user who previously played {HISTORY}",
        "The last games this person played were {HISTORY}. What would they play next?",
        # test
        "This user's play record: {HISTORY}. Recommend their next game.",
        "I have played {HISTORY}. What should I try next?",
        "Next game recommendation for a player with history {HISTORY}",
        "Someone who played {HISTORY} is looking for a new game",
        "Played recently: {HISTORY}. Suggest a game to play after these.",
        "What game fits a player who went through {HISTORY}?",
        "Recommend the next title for this history: {HISTORY}",
        "Given the sequence {HISTORY}, guess the next game",
        "A player enjoyed {HISTORY}. What will they like next?",
        "Following {HISTORY}, which game should come next?",
        "My gaming history is {HISTORY}. Help me find my next game.",
        "Find a game to continue after {HISTORY}",
        "User has played the following games: {HISTORY}. Recommend one.",
        "Previously played: {HISTORY}. Next up?",
        "Games in my history: {HISTORY}. Recommend a next game for me.",
        "Predict the next game for someone after {HISTORY}",
        "If a gamer played {HISTORY}, what should they play next?",
        "Suggest a game for a user whose recent plays are {HISTORY}",
        "List of played games: {HISTORY}. What is a good next game?",
        "Based on having played {HISTORY}, recommend the next game to play",
    ],
    "I2I": [
        "Games like {ITEM}",
        "Find games similar to {ITEM}",
        "What should I play if I liked {ITEM}?",
        "Recommend something like {ITEM}",
        "Games for fans of {ITEM}",
        "Similar titles to {ITEM}",
        "If you enjoyed {ITEM}, try these",
        "Alternatives to {ITEM}",
        "I loved {ITEM}. What else is like it?",
        "More games in the spirit of {ITEM}",
        "People who played {ITEM} also played",
        "Suggest games comparable to {ITEM}",
        "Anything similar to {ITEM}?",
        "Games that remind me of {ITEM}",
        "What to play after {ITEM}",
        "Recommendations based on {ITEM}",
        "Looking for a game like {ITEM}",
        "Other games fans of {ITEM} enjoy",
        "Related games: {ITEM}",
        "Show me games close to {ITEM}",
        # test
        "Games similar to {ITEM}",
        "Like {ITEM} but different",
        "If I liked {ITEM}, what would I also like?",
        "Find me something along the lines of {ITEM}",
        "Players of {ITEM} also enjoy",
        "Recommend titles like {ITEM}",
        "Games in the same vein as {ITEM}",
        "What are some games like {ITEM}?",
        "Suggestions for someone who enjoyed {ITEM}",
        "Games comparable to {ITEM}",
        "Titles that fans of {ITEM} will like",
        "Next game after enjoying {ITEM}",
        "Anything else like {ITEM}",
        "Similar experiences to {ITEM}",
        "Give me games that resemble {ITEM}",
        "Because you played {ITEM}",
        "More like {ITEM}",
        "Games with a similar audience to {ITEM}",
        "Closest matches to {ITEM}",
        "Which games would a fan of {ITEM} play?",
    ],
    "US2I": [
        "{SUMMARY} Recommend a game for this user.",
        "User profile: {SUMMARY} What should they play next?",
        "{SUMMARY} Suggest their next game.",
        "Here is a summary of a player: {SUMMARY} Find a game they would like.",
        "Player description: {SUMMARY}",
        "{SUMMARY} Which game fits them?",
        "Recommend a game. {SUMMARY}",
        "Based on this profile, pick a game: {SUMMARY}",
        "About the user: {SUMMARY} Recommend something.",
        "{SUMMARY} What game would they enjoy?",
        "Taste summary: {SUMMARY}",
        "Find a game for this gamer. {SUMMARY}",
        "{SUMMARY} Suggest one game.",
        "Given that {SUMMARY} recommend a title.",
        "Profile: {SUMMARY} Next game?",
        "{SUMMARY} Help them find a new game.",
        "A player is described as follows. {SUMMARY}",
        "{SUMMARY} What should we recommend?",
        "User taste: {SUMMARY} Recommend accordingly.",
        "Match a game to this user. {SUMMARY}",
        # test
        "{SUMMARY} Recommend their next game.",
        "Here is what we know about the player: {SUMMARY}",
        "{SUMMARY} Find them something to play.",
        "Summary of preferences: {SUMMARY} Suggest a game.",
        "Who they are: {SUMMARY} What game suits them?",
        "{SUMMARY} Which title should they try?",
        "Recommend based on this summary. {SUMMARY}",
        "{SUMMARY} Pick a game they would like.",
        "Gamer summary: {SUMMARY}",
        "{SUMMARY} A good next game would be?",
        "This player: {SUMMARY} Recommend a game.",
        "{SUMMARY} Suggest something new for them.",
        "Player overview: {SUMMARY} What to play?",
        "Find a matching game. {SUMMARY}",
        "{SUMMARY} Choose a game for this user.",
        "User interests: {SUMMARY}",
        "{SUMMARY} What would you recommend?",
        "Describe-and-recommend: {SUMMARY}",
        "Profile of the user: {SUMMARY} Recommend one game.",
        "{SUMMARY} Find a game to match this taste.",
    ],
    "FA2I": [
        "What games offer these features? {ATTRS}",
        "Find a game with {ATTRS}",
        "Game with the following attributes: {ATTRS}",
        "{ATTRS}",
        "Looking for a game matching {ATTRS}",
        "Which game has {ATTRS}?",
        "Search: {ATTRS}",
        "Find the game: {ATTRS}",
        "A game described by {ATTRS}",
        "Show games where {ATTRS}",
        "Attributes: {ATTRS}. Which game is it?",
        "I want a game with these details: {ATTRS}",
        "Identify the game with {ATTRS}",
        "Games matching all of {ATTRS}",
        "Query by attributes: {ATTRS}",
        "Find games having {ATTRS}",
        "Game details: {ATTRS}",
        "Which titles fit {ATTRS}?",
        "Filter games by {ATTRS}",
        "Recommend a game that has {ATTRS}",
        # test
        "What game has these properties? {ATTRS}",
        "Game search with {ATTRS}",
        "Find games with attributes {ATTRS}",
        "Features wanted: {ATTRS}",
        "Locate a game described as {ATTRS}",
        "A title matching {ATTRS}",
        "Games that satisfy {ATTRS}",
        "Look up the game with {ATTRS}",
        "Which game matches {ATTRS}?",
        "Detailed request: {ATTRS}",
        "Games fitting this description: {ATTRS}",
        "Match all attributes: {ATTRS}",
        "Find me a game: {ATTRS}",
        "I need a game where {ATTRS}",
        "Retrieve games with {ATTRS}",
        "Game profile: {ATTRS}. Find it.",
        "Games characterized by {ATTRS}",
        "What titles have {ATTRS}?",
        "Searching for {ATTRS}",
        "Exact attributes: {ATTRS}",
    ],
    "SA2I": [
        "Find a game with {ATTRS}",
        "Games with {ATTRS}",
        "Any game featuring {ATTRS}?",
        "{ATTRS}",
        "Looking for {ATTRS}",
        "Show me games with {ATTRS}",
        "I want something with {ATTRS}",
        "Recommend games that have {ATTRS}",
        "Which games have {ATTRS}?",
        "Search games: {ATTRS}",
        "Games where {ATTRS}",
        "Find titles with {ATTRS}",
        "Need a game with {ATTRS}",
        "Suggest games having {ATTRS}",
        "Filter: {ATTRS}",
        "Games tagged with {ATTRS}",
        "Give me a game with {ATTRS}",
        "Play something with {ATTRS}",
        "What games match {ATTRS}?",
        "Find me games with {ATTRS}",
        # test
        "Games that have {ATTRS}",
        "Any titles with {ATTRS}?",
        "I'm searching for games with {ATTRS}",
        "Recommend something having {ATTRS}",
        "List games with {ATTRS}",
        "Find games featuring {ATTRS}",
        "Some games with {ATTRS}",
        "Which titles feature {ATTRS}?",
        "Games matching {ATTRS}",
        "Looking for games where {ATTRS}",
        "Suggest a title with {ATTRS}",
        "Search for {ATTRS}",
        "Show games featuring {ATTRS}",
        "Game with {ATTRS} please",
        "Can you find games with {ATTRS}?",
        "What should I play with {ATTRS}?",
        "Games offering {ATTRS}",
        "Retrieve games that have {ATTRS}",
        "Point me to games with {ATTRS}",
        "A few games with {ATTRS}",
    ],
    "AS2I": [
        "{SUMMARY}",
        "I'm thinking of a game. {SUMMARY}",
        "Find this game: {SUMMARY}",
        "{SUMMARY} Which game is it?",
        "Looking for a game I heard about. {SUMMARY}",
        "Can you find it? {SUMMARY}",
        "{SUMMARY} What is this game?",
        "Description: {SUMMARY}",
        "Help me find the game. {SUMMARY}",
        "A friend described a game: {SUMMARY}",
        "{SUMMARY} Find it for me.",
        "I remember a game. {SUMMARY}",
        "Search by description: {SUMMARY}",
        "{SUMMARY} Name the game.",
        "Trying to find a game. {SUMMARY}",
        "Which game matches this? {SUMMARY}",
        "{SUMMARY} Do you know it?",
        "Identify the game: {SUMMARY}",
        "Game I'm after: {SUMMARY}",
        "{SUMMARY} Looking for this one.",
        # test
        "Find the game described here: {SUMMARY}",
        "{SUMMARY} What game is this?",
        "Someone told me about a game. {SUMMARY}",
        "I want this game: {SUMMARY}",
        "{SUMMARY} Which title is that?",
        "Help me identify a game. {SUMMARY}",
        "Here's what I know: {SUMMARY}",
        "{SUMMARY} Can you find it?",
        "Looking for the game where {SUMMARY}",
        "Game description: {SUMMARY}",
        "{SUMMARY} Find the title.",
        "What game fits this? {SUMMARY}",
        "My description: {SUMMARY}",
        "{SUMMARY} I need its name.",
        "Please find this game. {SUMMARY}",
        "Vague memory of a game: {SUMMARY}",
        "{SUMMARY} Search for it.",
        "Which game is described? {SUMMARY}",
        "Guess the game: {SUMMARY}",
        "{SUMMARY} Help me find it.",
    ],
    "NM2I": [
        "{NAME}",
        "Find {NAME}",
        "I'm looking for {NAME}",
        "Search {NAME}",
        "Where can I find {NAME}?",
        "Game called {NAME}",
        "Looking for the game {NAME}",
        "Show me {NAME}",
        "Play {NAME}",
        "Get {NAME}",
        "Is {NAME} available?",
        "I want to play {NAME}",
        "{NAME} game",
        "Open {NAME}",
        "Game named {NAME}",
        "Find the title {NAME}",
        "Do you have {NAME}?",
        "Search for {NAME} please",
        "Download {NAME}",
        "Lookup {NAME}",
        # test
        "{NAME} please",
        "Find me {NAME}",
        "Searching for {NAME}",
        "Can you find {NAME}?",
        "The game {NAME}",
        "I'd like {NAME}",
        "Where is {NAME}",
        "Looking up {NAME}",
        "Show {NAME}",
        "Title: {NAME}",
        "Need {NAME}",
        "Buy {NAME}",
        "{NAME} on this store",
        "Game search {NAME}",
        "Locate {NAME}",
        "Want {NAME}",
        "Get me {NAME}",
        "Is there {NAME}?",
        "Install {NAME}",
        "Check {NAME}",
    ],
    "VC2I": [
        "A {CONDITION}",
        "I want a {CONDITION}",
        "Looking for a {CONDITION}",
        "Find me a {CONDITION}",
        "Recommend a {CONDITION}",
        "Any {CONDITION}?",
        "Show a {CONDITION}",
        "Suggest a {CONDITION}",
        "Something like a {CONDITION}",
        "I need a {CONDITION}",
        "Search for a {CONDITION}",
        "Is there a {CONDITION}?",
        "Give me a {CONDITION}",
        "What is a good {CONDITION}?",
        "Help me find a {CONDITION}",
        "Find a {CONDITION} to play",
        "Recommend me a {CONDITION}",
        "I'm after a {CONDITION}",
        "Point me to a {CONDITION}",
        "Games: {CONDITION}",
        # test
        "I'm looking for a {CONDITION}",
        "Find a {CONDITION}",
        "Can you suggest a {CONDITION}?",
        "Need a {CONDITION}",
        "Show me a {CONDITION}",
        "Any good {CONDITION}",
        "Search: {CONDITION}",
        "I'd like a {CONDITION}",
        "Pick a {CONDITION} for me",
        "Recommend any {CONDITION}",
        "Which {CONDITION} should I get?",
        "Find some {CONDITION}",
        "Looking to play a {CONDITION}",
        "What about a {CONDITION}?",
        "I am searching for a {CONDITION}",
        "Please find a {CONDITION}",
        "Suggest me a {CONDITION}",
        "Give me options for a {CONDITION}",
        "Locate a {CONDITION}",
        "Want a {CONDITION}",
    ],
    "NA2I": [
        "I'd like to find a {CONDITION}",
        "A {CONDITION}",
        "Find a {CONDITION}",
        "Looking for a {CONDITION}",
        "Recommend a {CONDITION}",
        "I want a {CONDITION}",
        "Show me a {CONDITION}",
        "Suggest a {CONDITION}",
        "Need a {CONDITION}",
        "Search for a {CONDITION}",
        "Any {CONDITION}?",
        "Give me a {CONDITION}",
        "Help me find a {CONDITION}",
        "Find some {CONDITION}",
        "Is there a {CONDITION}?",
        "Pick a {CONDITION}",
        "Recommend me a {CONDITION}",
        "I'm after a {CONDITION}",
        "Point me to a {CONDITION}",
        "Games: {CONDITION}",
        # test
        "I'm looking for a {CONDITION}",
        "Can you find a {CONDITION}?",
        "Please suggest a {CONDITION}",
        "I'd like a {CONDITION}",
        "What is a good {CONDITION}?",
        "Find me a {CONDITION}",
        "Locate a {CONDITION}",
        "Any good {CONDITION}",
        "Search: {CONDITION}",
        "Want a {CONDITION}",
        "Get me a {CONDITION}",
        "Which {CONDITION} do you have?",
        "Looking to play a {CONDITION}",
        "Show a {CONDITION}",
        "Recommend any {CONDITION}",
        "Need some {CONDITION}",
        "Options for a {CONDITION}",
        "Give me options for a {CONDITION}",
        "Suggest me a {CONDITION}",
        "Help me pick a {CONDITION}",
    ],
    "UQ2I": [
        "Suggest some {CONDITION} games for a user who likes {HISTORY}",
        "A user played {HISTORY} and now wants {CONDITION}",
        "Recommend {CONDITION} for someone who played {HISTORY}",
        "I played {HISTORY}. Now I want something {CONDITION}",
        "Given a history of {HISTORY}, find {CONDITION}",
        "For a fan of {HISTORY}, suggest {CONDITION}",
        "After playing {HISTORY}, I'm looking for {CONDITION}",
        "Player history {HISTORY}; request: {CONDITION}",
        "Someone who enjoyed {HISTORY} wants {CONDITION}",
        "History: {HISTORY}. Wanted: {CONDITION}",
        "I liked {HISTORY}. Recommend {CONDITION}",
        "Find {CONDITION} for a user who played {HISTORY}",
        "Based on {HISTORY}, suggest {CONDITION}",
        "Recommend a game, {CONDITION}, to a player of {HISTORY}",
        "My games: {HISTORY}. I want {CONDITION}",
        "Someone played {HISTORY} and asks for {CONDITION}",
        "A gamer who likes {HISTORY} is looking for {CONDITION}",
        "Considering {HISTORY}, find {CONDITION}",
        "User with history {HISTORY} wants {CONDITION}",
        "Pick {CONDITION} for someone who has played {HISTORY}",
        # test
        "Suggest {CONDITION} for a user who likes {HISTORY}",
        "I have played {HISTORY}; now show me {CONDITION}",
        "A player of {HISTORY} is searching for {CONDITION}",
        "Recommend {CONDITION}. I previously played {HISTORY}",
        "For someone who played {HISTORY}, find {CONDITION}",
        "Looking for {CONDITION} after {HISTORY}",
        "History {HISTORY}. Need {CONDITION}",
        "I enjoyed {HISTORY} and want {CONDITION}",
        "Games played: {HISTORY}. Request: {CONDITION}",
        "Find {CONDITION} for a fan of {HISTORY}",
        "Given that I played {HISTORY}, suggest {CONDITION}",
        "Player likes {HISTORY} and is after {CONDITION}",
        "Recommend {CONDITION} based on {HISTORY}",
        "User played {HISTORY}. Looking for {CONDITION}",
        "{HISTORY} were fun. Now {CONDITION}",
        "Someone into {HISTORY} wants {CONDITION}",
        "Suggest a game that is {CONDITION} for a player of {HISTORY}",
        "After {HISTORY}, find me {CONDITION}",
        "My history is {HISTORY}; I want {CONDITION}",
        "Choose {CONDITION} for a user who played {HISTORY}",
    ],
}


def default_templates() -> list[Template]:
    out = []
    for task in TASKS:
        patterns = _PATTERNS[task]
        for i, pattern in enumerate(patterns):
            split = "train" if i < 20 else "test"
            out.append(Template(f"{task.lower()}-{split}-{i % 20:02d}", task, split, pattern))
    return out


def validate_pool(templates: Iterable[Template], per_split: int = 20) -> None:
    """Check the shipped-pool shape: ``per_split`` unique templates per (task, split)."""
    counts: dict[tuple[str, str], set[str]] = {}
    ids: set[str] = set()
    for t in templates:
        if t.id in ids:
            raise TemplateError(f"duplicate template id {t.id!r}")
        ids.add(t.id)
        counts.setdefault((t.task, t.split), set()).add(t.pattern)
    for task in TASKS:
        for split in SPLITS:
            n = len(counts.get((task, split), ()))
            if n != per_split:
                raise TemplateError(f"{task}/{split}: {n} unique templates, expected {per_split}")


def load_templates(path: Union[str, Path]) -> list[Template]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                if set(raw) == {"meta"}:
                    continue
                out.append(Template(raw["id"], raw["task"], raw["split"], raw["pattern"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise TemplateError(f"{path}:{lineno}: malformed template ({exc})") from None
            except TemplateError as exc:
                raise TemplateError(f"{path}:{lineno}: {exc}") from None
    return out


def write_templates(templates: Iterable[Template], path: Union[str, Path], meta: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"meta": dict(meta)}) + "\n")
        for t in templates:
            record = {"id": t.id, "task": t.task, "split": t.split, "pattern": t.pattern}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
