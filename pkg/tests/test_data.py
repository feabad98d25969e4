import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgsqa.data import (GOLD, SYNTHETIC, annotate, augment, load_dataset, md_examples, rp_examples,
                        save_dataset, split_leave_one_out, split_standard)
from kgsqa.errors import ParseError, ReferentialError, ValidationError
from kgsqa.kg import Fact

QUESTIONS = [
    ("who directed the godfather ?", ("m.film", "r.dir", "m.coppola")),
    ("what genre is jaws ?", ("m.jaws", "r.genre", "m.drama")),
    ("who directed jaws ?", ("m.jaws", "r.dir", "m.spielberg")),
    ("who wrote the godfather ?", ("m.book", "r.author", "m.puzo")),
    ("who directed the episode pilot ?", ("m.ep", "r.epdir", "m.spielberg")),
    ("which country made it ?", ("m.film", "r.country", "m.us")),
]


@pytest.fixture
def data(gkg):
    return [annotate(t, f, gkg) for t, f in QUESTIONS]


def test_annotate_span_and_domain(gkg):
    q = annotate("Who directed The Godfather?", ("m.film", "r.dir", "m.coppola"), gkg)
    assert q.tokens == ("who", "directed", "the", "godfather", "?")
    assert q.span == (2, 3) and q.domain == "film" and q.provenance == GOLD
    assert annotate("which country made it ?", QUESTIONS[5][1], gkg).span is None
    with pytest.raises(ReferentialError):
        annotate("x", ("m.nope", "r.dir", "m.coppola"), gkg)


def test_leave_one_out_partitions_without_leakage(data):
    split = split_leave_one_out(data, "film", seed=3)
    assert {q.domain for q in split.test} == {"film"}
    assert all(q.domain != "film" for q in split.train + split.validation)
    assert sorted(map(id, split.train + split.validation + split.test)) == sorted(map(id, data))
    with pytest.raises(ValidationError, match="music"):
        split_leave_one_out(data, "music")


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_standard_split_is_a_seeded_partition(seed):
    from conftest import godfather_kg
    kg = godfather_kg()
    items = [annotate(t, f, kg) for t, f in QUESTIONS] * 4
    a = split_standard(items, seed)
    assert len(a) == len(items)
    assert sorted(map(id, a.train + a.validation + a.test)) == sorted(map(id, items))
    assert split_standard(items, seed).train == a.train


def test_augment(gkg, data):
    split = split_leave_one_out(data, "film")
    syn = [(["who", "directed", "jaws", "?"], Fact("m.jaws", "r.dir", "m.spielberg"))] * 50
    aug = augment(split, syn, gkg)
    assert len(aug.train) == len(split.train) + 50 and aug.synthetic_added == 50
    assert all(q.provenance == SYNTHETIC for q in aug.train[len(split.train):])
    assert aug.test == split.test and len(split.train) == len(aug.train) - 50
    assert augment(split, [], gkg).train == split.train
    with pytest.raises(ValidationError, match="book.written_work.author"):
        augment(split, [("who wrote it ?", ("m.book", "r.author", "m.puzo"))], gkg)


def test_tsv_roundtrip(tmp_path, gkg, data):
    split = augment(split_leave_one_out(data, "film"),
                    [("who directed jaws ?", ("m.jaws", "r.dir", "m.spielberg"))], gkg)
    save_dataset(tmp_path / "q.tsv", split.train)
    assert load_dataset(tmp_path / "q.tsv", gkg) == split.train


def test_parse_errors(tmp_path, gkg):
    p = tmp_path / "q.tsv"
    p.write_text("who ?\tm.film\tr.dir\n")
    with pytest.raises(ParseError, match=":1"):
        load_dataset(p, gkg)
    p.write_text("# c\n\nwho ?\tm.film\tr.zzz\tm.coppola\n")
    with pytest.raises(ReferentialError, match=":3"):
        load_dataset(p, gkg)
    p.write_text(" \tm.film\tr.dir\tm.coppola\n")
    with pytest.raises(ParseError):
        load_dataset(p, gkg)


def test_training_examples_skip_unlocated_names(data):
    assert len(md_examples(data)) == len(rp_examples(data)) == 5
    toks, tags = md_examples(data)[0]
    assert tags == ["C", "C", "E", "E", "C"] and len(toks) == 5
    assert rp_examples(data)[0][1] == "r.dir"
