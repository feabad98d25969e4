import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgsqa.candidates import InvertedIndex, build_index, candidates, ngrams
from kgsqa.errors import ValidationError
from kgsqa.kg import KnowledgeGraph, Relation
from kgsqa.mention import MentionSpan
from kgsqa.text import tokenize


def kg_of(names):
    return KnowledgeGraph.build({f"e{i:02d}": n for i, n in enumerate(names)},
                                [Relation("r", "a.b.c")], [])


def brute_force(names, mention, limit=50, early_stop=True):
    """Score every name directly from the definition, no index."""
    toks = {e: tuple(tokenize(n)) for e, n in names.items()}
    toks = {e: t for e, t in toks.items() if t}
    N = len(toks)

    def grams(t):
        return [g for n in range(1, len(t) + 1) for g in ngrams(t, n)]

    def df(g):
        return sum(1 for t in toks.values() if g in grams(t))

    best = {}
    mention = tuple(mention)
    for n in range(len(mention), 0, -1):
        hit_exact = False
        for g in set(ngrams(mention, n)):
            d = df(g)
            if d == 0:
                continue
            for e, t in toks.items():
                tf = grams(t).count(g)
                if tf:
                    best[e] = max(best.get(e, -math.inf), tf * math.log(N / d))
                    hit_exact |= t == g
        if hit_exact and early_stop:
            break
    ranked = sorted(best.items(), key=lambda p: (-p[1], toks[p[0]] != mention, p[0]))
    return ranked[:limit]


def test_godfather_maps_to_both(gkg):
    idx = build_index(gkg)
    assert {e for e, _ in idx.lookup(("the", "godfather"))} == {"m.film", "m.book"}
    got = candidates(idx, ["the", "godfather"]).ids()
    assert set(got[:2]) == {"m.film", "m.book"}


def test_exact_unique_name_first(gkg):
    idx = build_index(gkg)
    assert candidates(idx, ["francis", "ford", "coppola"]).ids()[0] == "m.coppola"
    assert candidates(idx, MentionSpan(0, 0, ("jaws",))).ids() == ["m.jaws"]


def test_backoff_example():
    kg = kg_of(["the godfather", "the godfather part ii", "jaws", "the birds"])
    got = candidates(build_index(kg), ["godfather", "part"])
    assert got.ids()[:2] == ["e01", "e00"]
    assert [(e, pytest.approx(s)) for e, s in got.entities] == brute_force(dict(kg.entities),
                                                                          ["godfather", "part"])


def test_idf_definitions():
    kg = kg_of(["red star", "blue star", "star gate"])
    idx = build_index(kg)
    assert idx.lookup(("red",)) == (("e00", pytest.approx(math.log(3))),)
    assert all(s == 0.0 for _, s in idx.lookup(("star",)))


WORDS = ["the", "red", "star", "city", "of", "north", "lake", "john", "smith", "river", "old", "new"]


@st.composite
def names_and_mention(draw):
    names = draw(st.lists(st.lists(st.sampled_from(WORDS), min_size=1, max_size=4).map(" ".join),
                          min_size=2, max_size=15))
    mention = draw(st.lists(st.sampled_from(WORDS), min_size=1, max_size=4))
    return {f"e{i:02d}": n for i, n in enumerate(names)}, mention


@given(names_and_mention(), st.booleans(), st.integers(1, 20))
@settings(max_examples=150, deadline=None)
def test_matches_brute_force(nm, early_stop, limit):
    names, mention = nm
    idx = build_index(kg_of(list(names.values())))
    got = candidates(idx, mention, limit=limit, early_stop=early_stop).entities
    want = brute_force(names, mention, limit, early_stop)
    assert [e for e, _ in got] == [e for e, _ in want]
    assert [s for _, s in got] == pytest.approx([s for _, s in want], abs=1e-12)


@given(names_and_mention())
@settings(max_examples=100, deadline=None)
def test_recall_and_token_overlap(nm):
    names, mention = nm
    idx = build_index(kg_of(list(names.values())))
    target = next(iter(names))
    exact = tokenize(names[target])
    got = candidates(idx, exact, limit=len(names))
    assert target in got.ids()
    for e in candidates(idx, mention).ids():
        assert set(idx.names[e]) & set(mention)


def test_deterministic_and_roundtrip(tmp_path):
    kg = kg_of(["a b", "a c", "b a", "c"])
    idx = build_index(kg)
    idx.save(tmp_path / "i.json")
    again = InvertedIndex.load(tmp_path / "i.json")
    assert again == idx
    assert candidates(idx, ["a"]) == candidates(again, ["a"]) == candidates(idx, ["a"])
    assert candidates(idx, ["a"]).ids() == ["e00", "e01", "e02"]  # equal scores, id order


def test_errors():
    idx = build_index(kg_of(["x"]))
    with pytest.raises(ValidationError):
        candidates(idx, [])
    with pytest.raises(ValidationError):
        candidates(idx, ["x"], limit=0)
    assert len(candidates(idx, ["nothing"])) == 0
