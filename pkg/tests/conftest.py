import numpy as np
import pytest

from kgsqa.kg import Fact, KnowledgeGraph, Relation
from kgsqa.text import EmbeddingTable, Vocabulary, tokenize, tokenize_relation_label


def godfather_kg():
    """Two entities named "the godfather", a film that is far more popular than the book."""
    entities = {
        "m.film": "The Godfather", "m.book": "The Godfather", "m.coppola": "Francis Ford Coppola",
        "m.puzo": "Mario Puzo", "m.jaws": "Jaws", "m.spielberg": "Steven Spielberg",
        "m.benchley": "Peter Benchley", "m.ep": "Pilot", "m.crime": "Crime",
        "m.drama": "Drama", "m.us": "United States",
    }
    relations = [
        Relation("r.dir", "film.film.directed_by"),
        Relation("r.genre", "film.film.genre"),
        Relation("r.country", "film.film.country"),
        Relation("r.author", "book.written_work.author"),
        Relation("r.subject", "book.written_work.subjects"),
        Relation("r.epdir", "tv.tv_series_episode.director"),
    ]
    facts = [
        Fact("m.film", "r.dir", "m.coppola"),
        Fact("m.film", "r.genre", "m.crime"),
        Fact("m.film", "r.genre", "m.drama"),
        Fact("m.film", "r.country", "m.us"),
        Fact("m.book", "r.author", "m.puzo"),
        Fact("m.jaws", "r.dir", "m.spielberg"),
        Fact("m.jaws", "r.genre", "m.drama"),
        Fact("m.ep", "r.epdir", "m.spielberg"),
    ]
    return KnowledgeGraph.build(entities, relations, facts)


def table_for(kg, extra=(), dim=16, seed=0):
    streams = [tokenize(n) for n in kg.entities.values()]
    streams += [tokenize_relation_label(r.label) for r in kg.relations.values()]
    streams += [list(extra)]
    return EmbeddingTable(Vocabulary.build(streams), seed=seed, dim=dim)


@pytest.fixture
def gkg():
    return godfather_kg()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    from kgsqa.toy import write_toy
    out = tmp_path_factory.mktemp("toy")
    write_toy(str(out), seed=0)
    return out


@pytest.fixture(scope="session")
def toy_cfg(toy_dir):
    from kgsqa.experiment import parse_config
    return parse_config(str(toy_dir / "experiment.cfg"), env={})


@pytest.fixture(scope="session")
def toy_res(toy_cfg):
    from kgsqa.experiment import load_resources
    return load_resources(toy_cfg)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
