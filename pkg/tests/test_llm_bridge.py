import json

import httpx
import pytest

from itemforge.catalog import CategoriesValue, Item, NumberValue
from itemforge.llm_bridge import (
    RETRY_BACKOFF,
    DeterministicFallback,
    GenRequest,
    Remote,
    RemoteConfigError,
    RemoteNetworkError,
    RemoteResponseError,
    RemoteStatusError,
    generate,
    join_and,
    parse_structured,
    structured_prompt,
    suggest_misspellings,
    summarize_item,
    summarize_user,
)

FALLBACK = DeterministicFallback()


def game(iid, genres=None, tags=None, **extra):
    fields = {}
    if genres:
        fields["genre"] = CategoriesValue(tuple(genres))
    if tags:
        fields["tags"] = CategoriesValue(tuple(tags))
    fields.update(extra)
    return Item(iid, f"Title {iid}", "", fields)


class TestFallback:
    def test_summarize_user_prompt(self):
        req = GenRequest("SUMMARIZE_USER genres=strategy,shooter top_titles=Age of Empires")
        assert generate(FALLBACK, req) == "The user enjoys strategy and shooter games such as Age of Empires."

    def test_same_request_same_text(self):
        req = GenRequest("SIMULATE_USER intent=history titles=Halo,Splitgate", temperature=0.9, seed=3)
        assert generate(FALLBACK, req) == generate(FALLBACK, req)

    def test_unknown_command_echoes_header(self):
        assert generate(FALLBACK, GenRequest("FROB x=1\nignored")) == "FROB x=1"

    def test_max_tokens_truncates_words(self):
        req = GenRequest("SUMMARIZE_USER genres=strategy,shooter top_titles=Age of Empires", max_tokens=3)
        assert generate(FALLBACK, req) == "The user enjoys"

    @pytest.mark.parametrize("kwargs", [{"prompt": ""}, {"prompt": "x", "max_tokens": 0}, {"prompt": "x", "temperature": -1}])
    def test_request_validation(self, kwargs):
        with pytest.raises(ValueError):
            GenRequest(**kwargs)


class TestStructuredPrompt:
    def test_roundtrip(self):
        prompt = structured_prompt("SUMMARIZE_USER", "do it", genres=["strategy", "co-op"], top_titles="It Takes Two")
        command, fields = parse_structured(prompt)
        assert command == "SUMMARIZE_USER"
        assert fields == {"genres": "strategy,co-op", "top_titles": "It Takes Two"}

    @pytest.mark.parametrize("words,text", [
        ([], ""), (["a"], "a"), (["a", "b"], "a and b"), (["a", "b", "c"], "a, b, and c"),
    ])
    def test_join_and(self, words, text):
        assert join_and(words) == text


class TestSummaries:
    def test_diverse_history(self):
        history = [
            game("1", ["strategy"]), game("2", ["co-op"]), game("3", ["rpg"]), game("4", ["battle royale"]),
        ]
        text = summarize_user(history, FALLBACK)
        assert "diverse range" in text
        assert sum(g in text for g in ("strategy", "co-op", "rpg", "battle royale")) >= 3

    def test_single_item_names_primary_genre(self):
        assert "racing" in summarize_user([game("1", ["racing", "sports"])], FALLBACK)

    def test_tags_when_no_genre(self):
        text = summarize_user([game("1", tags=["pixel art"]), game("2", tags=["pixel art", "roguelike"])], FALLBACK)
        assert text == "The user enjoys games featuring pixel art and roguelike."

    def test_summary_never_names_titles(self):
        history = [game("1", ["strategy"]), game("2", ["strategy"])]
        text = summarize_user(history, FALLBACK)
        assert "Title" not in text

    def test_empty_history(self):
        with pytest.raises(ValueError):
            summarize_user([], FALLBACK)

    def test_item_summary(self):
        item = game("9", tags=["pixel art"], price=NumberValue(10))
        text = summarize_item(item, ["tags", "price"], FALLBACK)
        assert text == "A game with pixel art, priced at 10 dollars."
        assert "Title 9" not in text

    def test_item_summary_all_fields(self):
        item = game("9", ["puzzle"], ["pixel art", "relaxing"], price=NumberValue(4.99))
        text = summarize_item(item, list(item.fields), FALLBACK)
        for value in ("puzzle", "pixel art", "relaxing", "4.99"):
            assert value in text

    def test_item_summary_absent_field(self):
        with pytest.raises(ValueError, match="publisher"):
            summarize_item(game("9", ["puzzle"]), ["publisher"], FALLBACK)

    def test_misspellings_are_distinct_from_name(self):
        out = suggest_misspellings("Fortnite", FALLBACK, seed=1)
        assert out and all(s != "Fortnite" for s in out)


def completion(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


class TestRemote:
    @pytest.fixture(autouse=True)
    def token(self, monkeypatch):
        monkeypatch.setenv("FORGE_TEST_TOKEN", "secret")

    def remote(self, handler, **kw):
        sleeps = []
        backend = Remote("https://llm.example/v1", "m", auth_env="FORGE_TEST_TOKEN",
                         transport=httpx.MockTransport(handler), sleep=sleeps.append, **kw)
        return backend, sleeps

    def test_missing_auth_before_network(self, monkeypatch):
        calls = []
        backend, _ = self.remote(lambda r: calls.append(r) or completion("x"))
        monkeypatch.delenv("FORGE_TEST_TOKEN")
        with pytest.raises(RemoteConfigError, match="FORGE_TEST_TOKEN"):
            generate(backend, GenRequest("hi"))
        assert calls == []

    def test_bad_endpoint(self):
        with pytest.raises(RemoteConfigError):
            Remote("not a url", "m")

    def test_request_shape(self):
        seen = []

        def handler(request):
            seen.append(request)
            return completion(" hello ")

        backend, _ = self.remote(handler)
        assert generate(backend, GenRequest("hi", max_tokens=5, seed=9)) == "hello"
        req = seen[0]
        assert req.url == "https://llm.example/v1/chat/completions"
        assert req.headers["authorization"] == "Bearer secret"
        body = json.loads(req.content)
        assert body["messages"] == [{"role": "user", "content": "hi"}]
        assert (body["max_tokens"], body["seed"], body["model"]) == (5, 9, "m")

    def test_retries_then_succeeds(self):
        statuses = iter([503, 429, 200])

        def handler(request):
            status = next(statuses)
            return completion("ok") if status == 200 else httpx.Response(status)

        backend, sleeps = self.remote(handler)
        assert generate(backend, GenRequest("hi")) == "ok"
        assert sleeps == [1.0, 2.0]

    def test_gives_up_after_retries(self):
        calls = []
        backend, sleeps = self.remote(lambda r: calls.append(r) or httpx.Response(500))
        with pytest.raises(RemoteStatusError) as info:
            generate(backend, GenRequest("hi"))
        assert info.value.status == 500
        assert len(calls) == len(RETRY_BACKOFF) + 1
        assert sleeps == list(RETRY_BACKOFF)

    def test_network_error(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        backend, _ = self.remote(handler)
        with pytest.raises(RemoteNetworkError):
            generate(backend, GenRequest("hi"))

    def test_client_error_is_not_retried(self):
        calls = []
        backend, sleeps = self.remote(lambda r: calls.append(r) or httpx.Response(400))
        with pytest.raises(RemoteStatusError):
            generate(backend, GenRequest("hi"))
        assert len(calls) == 1 and sleeps == []

    @pytest.mark.parametrize("response", [
        httpx.Response(200, json={"choices": []}),
        httpx.Response(200, text="not json"),
        httpx.Response(200, json={"choices": [{"message": {"content": "  "}}]}),
    ])
    def test_bad_response(self, response):
        backend, _ = self.remote(lambda r: response)
        with pytest.raises(RemoteResponseError):
            generate(backend, GenRequest("hi"))

    def test_replay_log(self, tmp_path):
        log = tmp_path / "replay.jsonl"
        calls = []
        backend, _ = self.remote(lambda r: calls.append(r) or completion("first"), replay_log=log)
        assert generate(backend, GenRequest("hi", seed=1)) == "first"
        again, _ = self.remote(lambda r: pytest.fail("replayed request hit the network"), replay_log=log)
        assert generate(again, GenRequest("hi", seed=1)) == "first"
        assert len(calls) == 1
        assert generate(backend, GenRequest("hi", seed=2)) == "first"
        assert len(calls) == 2
