import json
from datetime import date

import pytest
from hypothesis import given, strategies as st

from itemforge.catalog import (
    Catalog,
    CatalogError,
    CategoriesValue,
    DateValue,
    Event,
    InteractionLog,
    Item,
    NumberValue,
    TextValue,
    format_date,
    load_catalog,
    load_interactions,
    parse_date,
    read_meta,
    synth_catalog,
    write_catalog,
    write_interactions,
)

SPLITGATE = (
    '{"id":"g1","title":"Splitgate","description":"...","fields":{"genre":{"type":"categories",'
    '"value":["shooter"]},"tags":{"type":"categories","value":["3d","not made for kids"]}}}'
)


def write_lines(path, *lines):
    path.write_text("".join(line + "\n" for line in lines))
    return path


class TestLoadCatalog:
    def test_single_line(self, tmp_path):
        cat = load_catalog(write_lines(tmp_path / "c.jsonl", SPLITGATE))
        assert len(cat) == 1
        item = cat["g1"]
        assert item.title == "Splitgate"
        assert item.fields["genre"] == CategoriesValue(("shooter",))
        assert "not made for kids" in item.fields["tags"]

    def test_empty_file(self, tmp_path):
        with pytest.raises(CatalogError, match="empty catalog"):
            load_catalog(write_lines(tmp_path / "c.jsonl"))

    def test_duplicate_id_is_named(self, tmp_path):
        with pytest.raises(CatalogError, match="g1"):
            load_catalog(write_lines(tmp_path / "c.jsonl", SPLITGATE, SPLITGATE))

    @pytest.mark.parametrize("line", [
        "not json",
        "[1, 2]",
        '{"id":"g1","title":"x","description":""}',
        '{"id":"g1","title":"x","description":"","fields":{"p":{"type":"number","value":"ten"}}}',
        '{"id":"g1","title":"x","description":"","fields":{"d":{"type":"date","value":"2021-13-01"}}}',
        '{"id":"g1","title":"x","description":"","fields":{"c":{"type":"categories","value":[]}}}',
        '{"id":"g1","title":"x","description":"","fields":{"c":{"type":"colour","value":"red"}}}',
    ])
    def test_malformed_lines_raise(self, tmp_path, line):
        with pytest.raises(CatalogError):
            load_catalog(write_lines(tmp_path / "c.jsonl", line))

    def test_categories_lowercased_and_deduplicated(self):
        assert CategoriesValue(("Action", "action", " RPG ")).values == ("action", "rpg")

    def test_name_defaults_to_meta_then_stem(self, tmp_path):
        cat = load_catalog(write_lines(tmp_path / "steam.jsonl", SPLITGATE))
        assert cat.name == "steam"
        write_catalog(cat.__class__(cat.items, name="xbox-like"), tmp_path / "x.jsonl")
        assert load_catalog(tmp_path / "x.jsonl").name == "xbox-like"
        assert read_meta(tmp_path / "x.jsonl")["name"] == "xbox-like"


class TestDates:
    @pytest.mark.parametrize("text,days", [("1970-01-01", 0), ("1970-01-02", 1), ("2021-01-01", 18628)])
    def test_parse(self, text, days):
        assert parse_date(text) == days

    @given(st.dates(min_value=date(1000, 1, 1)))
    def test_roundtrip(self, d):
        assert format_date(parse_date(d.isoformat())) == d.isoformat()

    @pytest.mark.parametrize("bad", ["2021-1-1", "2021/01/01", "2021-02-30", ""])
    def test_rejects(self, bad):
        with pytest.raises(CatalogError):
            parse_date(bad)


class TestInteractions:
    @pytest.fixture
    def cat(self, tmp_path):
        g2 = SPLITGATE.replace('"g1"', '"g2"').replace("Splitgate", "Halo")
        return load_catalog(write_lines(tmp_path / "c.jsonl", SPLITGATE, g2))

    def test_one_user_two_events(self, cat):
        log = InteractionLog({"u1": [Event("g1", 10), Event("g2", 20)]}, cat)
        assert len(log) == 1
        assert log.history("u1") == ["g1", "g2"]

    def test_unknown_item(self, cat):
        with pytest.raises(CatalogError, match="g9"):
            InteractionLog({"u1": [Event("g9", 5)]}, cat)

    def test_decreasing_timestamps(self, cat):
        with pytest.raises(CatalogError, match="u1"):
            InteractionLog({"u1": [Event("g1", 20), Event("g2", 10)]}, cat)

    def test_equal_timestamps_allowed(self, cat):
        InteractionLog({"u1": [Event("g1", 10), Event("g2", 10)]}, cat)

    def test_short_users_are_flagged_not_dropped(self, cat):
        log = InteractionLog({"u1": [Event("g1", 1)], "u2": [Event("g1", 1), Event("g2", 2)]}, cat)
        assert len(log) == 2
        assert log.short_users == ["u1"]

    def test_file_roundtrip(self, cat, tmp_path):
        log = InteractionLog({"u1": [Event("g1", 10), Event("g2", 20)]}, cat)
        write_interactions(log, tmp_path / "i.jsonl", {"seed": 1})
        assert load_interactions(tmp_path / "i.jsonl", cat) == log

    def test_file_unknown_item_reports_line(self, cat, tmp_path):
        path = write_lines(tmp_path / "i.jsonl", json.dumps({"user_id": "u1", "events": [["g9", 5]]}))
        with pytest.raises(CatalogError, match=r"i.jsonl:1"):
            load_interactions(path, cat)


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        for name in ("a", "b"):
            cat, log = synth_catalog(42, 500, 300)
            write_catalog(cat, tmp_path / f"{name}.jsonl")
            write_interactions(log, tmp_path / f"{name}-i.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (tmp_path / "a-i.jsonl").read_bytes() == (tmp_path / "b-i.jsonl").read_bytes()

    def test_exact_size(self, bench):
        catalog, interactions = bench
        assert len(catalog) == 500
        assert len(interactions) == 300

    def test_minimum_scale(self):
        cat, log = synth_catalog(42, 10, 1)
        assert len(cat) == 10
        assert len(log) == 1
        assert len(next(iter(log.users.values()))) >= 2

    def test_seeds_differ(self):
        a, _ = synth_catalog(42, 50, 5)
        b, _ = synth_catalog(7, 50, 5)
        assert a.name != b.name
        assert [i.title for i in a] != [i.title for i in b]

    def test_item_shape(self, bench):
        catalog, _ = bench
        for item in catalog:
            assert 2 <= len(item.fields["tags"].values) <= 5
            assert 1 <= len(item.fields["genre"].values) <= 2
            assert not {"made for kids", "not made for kids"} <= set(item.fields["tags"].values)

    @pytest.mark.parametrize("args", [(1, 9, 1), (1, 10, 0)])
    def test_rejects_tiny(self, args):
        with pytest.raises(ValueError):
            synth_catalog(*args)

    def test_catalog_roundtrip(self, bench, tmp_path):
        catalog, _ = bench
        write_catalog(catalog, tmp_path / "c.jsonl", {"seed": 42})
        assert load_catalog(tmp_path / "c.jsonl") == catalog


class TestItem:
    def test_text_order(self):
        item = Item("g1", "Pixel Farm", "Grow crops.", {
            "tags": CategoriesValue(("pixel art",)),
            "price": NumberValue(10),
            "release date": DateValue.parse("2021-03-19"),
            "publisher": TextValue("acme"),
        })
        assert item.text() == (
            "Pixel Farm. tags : pixel art, price : 10, release date : march 19, 2021, publisher : acme. Grow crops."
        )

    @pytest.mark.parametrize("value", [float("nan"), float("inf"), True])
    def test_number_must_be_finite(self, value):
        with pytest.raises(CatalogError):
            NumberValue(value)

    def test_empty_catalog_object(self):
        with pytest.raises(CatalogError, match="empty catalog"):
            Catalog([])
