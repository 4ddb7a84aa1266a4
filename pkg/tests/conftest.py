"""Shared fixtures: a hand-built catalog and the default synthetic benchmark."""

from __future__ import annotations

import pytest

from itemforge.catalog import (
    Catalog,
    CategoriesValue,
    DateValue,
    Event,
    InteractionLog,
    Item,
    NumberValue,
    TextValue,
    synth_catalog,
)
from itemforge.taskgen import MixConfig, generate_dataset
from itemforge.templates import default_templates

BENCH_SEED = 42
BENCH_ITEMS = 500
BENCH_USERS = 300


def make_item(iid, title, genre, tags, price, released, publisher="acme"):
    return Item(iid, title, f"A {genre} game.", {
        "genre": CategoriesValue((genre,)),
        "tags": CategoriesValue(tuple(tags)),
        "price": NumberValue(price),
        "release date": DateValue.parse(released),
        "publisher": TextValue(publisher),
    })


@pytest.fixture(scope="session")
def small_catalog() -> Catalog:
    items = [
        make_item("g01", "Splitgate", "shooter", ["3d", "not made for kids"], 0.0, "2019-05-22"),
        make_item("g02", "Halo", "shooter", ["3d", "story rich"], 39.99, "2001-11-15", "bungie"),
        make_item("g03", "Half Light", "puzzle", ["2d", "relaxing"], 9.99, "2015-03-01"),
        make_item("g04", "Pixel Farm", "simulation", ["pixel art", "made for kids"], 10.0, "2021-03-19"),
        make_item("g05", "Kart Frenzy", "racing", ["made for kids", "local co-op"], 19.99, "2020-07-01"),
        make_item("g06", "Dust Runner", "racing", ["3d", "realistic"], 59.99, "2022-01-01"),
        make_item("g07", "Empire Age", "strategy", ["historical", "2d"], 14.99, "2008-09-09"),
        make_item("g08", "Soccer Stars", "sports", ["soccer", "local co-op"], 4.99, "2023-08-30"),
        make_item("g09", "Grim Hollow", "horror", ["3d", "atmospheric"], 24.99, "2017-10-31"),
        make_item("g10", "Orbit Tactics", "strategy", ["turn-based", "sci-fi"], 29.99, "2012-02-14"),
        make_item("g11", "Tiny Tennis", "sports", ["2d", "made for kids"], 0.0, "2024-04-04"),
        make_item("g12", "Deep Shaft", "horror", ["2d", "atmospheric"], 9.99, "2016-06-06"),
        make_item("g13", "Star Haul", "simulation", ["3d", "sci-fi"], 19.99, "2019-12-12"),
    ]
    return Catalog(items, name="small")


@pytest.fixture(scope="session")
def small_log(small_catalog) -> InteractionLog:
    return InteractionLog({
        "u1": [Event("g01", 10), Event("g02", 20), Event("g09", 30), Event("g06", 40), Event("g05", 50)],
        "u2": [Event("g07", 5), Event("g10", 6), Event("g03", 7), Event("g08", 9)],
        "u3": [Event("g04", 1), Event("g05", 2), Event("g08", 3), Event("g03", 4), Event("g07", 8)],
    }, small_catalog)


@pytest.fixture(scope="session")
def bench():
    """(catalog, interactions) of the default benchmark."""
    return synth_catalog(BENCH_SEED, BENCH_ITEMS, BENCH_USERS)


@pytest.fixture(scope="session")
def bench_data(bench):
    """(train, test) samples of the default benchmark."""
    catalog, interactions = bench
    return generate_dataset(catalog, interactions, default_templates(), MixConfig(), None, BENCH_SEED)


@pytest.fixture(scope="session")
def untrained():
    from itemforge.encoder import EncoderModel

    return EncoderModel.init(0)


@pytest.fixture(scope="session")
def trained(bench, bench_data, untrained):
    """Encoder trained with the default config on the benchmark's train split."""
    from itemforge.encoder import TrainConfig, train

    catalog, _ = bench
    return train(bench_data[0], catalog, untrained, TrainConfig(seed=0))


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    class Recorder:
        def __init__(self):
            self.notes: list[str] = []

        def note(self, text: str) -> None:
            self.notes.append(text)

    rec = Recorder()
    yield rec
    # The test body's outcome is attached by pytest_runtest_makereport below.
    number = request.node.get_closest_marker("criterion").args[0]
    outcome = getattr(request.node, "_acceptance_outcome", "FAIL")
    lines[number] = f"criterion {number}: {outcome} ({'; '.join(rec.notes)})"
    print(f"\nACCEPTANCE {lines[number]}")


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    if report.when == "call" and item.get_closest_marker("criterion"):
        item._acceptance_outcome = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
