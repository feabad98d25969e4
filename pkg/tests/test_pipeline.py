import pytest

from conftest import table_for
from kgsqa.candidates import CandidateSet, build_index
from kgsqa.errors import NoAnswerError
from kgsqa.kg import Fact, KnowledgeGraph, Relation
from kgsqa.mention import MdConfig, tags_for_span, train_md
from kgsqa.pipeline import Trace, answer, answer_batch, answer_json, select_subject
from kgsqa.relation import RpConfig, prepare_question, train_rp
from kgsqa.text import tokenize

TRAIN = [
    ("who directed jaws ?", (2, 2), "r.dir"),
    ("who was the director of pilot ?", (5, 5), "r.epdir"),
    ("what genre is jaws ?", (3, 3), "r.genre"),
    ("who wrote the godfather ?", (2, 3), "r.author"),
    ("what is the godfather about ?", (2, 3), "r.subject"),
    ("which country made the godfather ?", (3, 4), "r.country"),
    ("who directed pilot ?", (2, 2), "r.epdir"),
]


@pytest.fixture(scope="module")
def trained():
    from conftest import godfather_kg
    kg = godfather_kg()
    toks = [tokenize(q) for q, _, _ in TRAIN]
    table = table_for(kg, [t for q in toks for t in q], dim=16)
    md = train_md([(t, tags_for_span(len(t), s)) for t, (_, s, _) in zip(toks, TRAIN)],
                  MdConfig(hidden=8, dropout=0.0, lr=1e-2, epochs=120, batch_size=8, seed=0), table)
    rp = train_rp([(prepare_question(t, s), r) for t, (_, s, r) in zip(toks, TRAIN)], kg,
                  RpConfig(hidden=16, lr=1e-2, epochs=120, n_negatives=5, batch_size=8, seed=0),
                  table)
    return kg, md, rp, build_index(kg)


def test_select_subject_prefers_popular_holder(gkg):
    c_s = CandidateSet((("m.book", 1.0), ("m.film", 1.0)), ("the", "godfather"))
    assert gkg.popularity("m.film") > gkg.popularity("m.book")
    assert select_subject(c_s, gkg.relations["r.dir"], gkg) == "m.film"
    assert select_subject(c_s, gkg.relations["r.author"], gkg) == "m.book"
    with pytest.raises(NoAnswerError) as err:
        select_subject(c_s, gkg.relations["r.epdir"], gkg)
    assert err.value.stage == "AS"


def test_select_subject_tie_takes_smaller_id():
    kg = KnowledgeGraph.build({"b": "x", "a": "x", "o": "o"}, [Relation("r", "d.t.r")],
                              [("b", "r", "o"), ("a", "r", "o")])
    assert select_subject(["b", "a"], kg.relations["r"], kg) == "a"


def test_godfather_question(trained):
    kg, md, rp, index = trained
    trace = Trace()
    interp, fact = answer("who directed the godfather?", md, rp, index, kg, trace=trace)
    assert interp.subject == "m.film"
    assert interp.relation.label == "film.film.directed_by"
    assert fact.objects == ("m.coppola",)
    assert fact.fact in kg.facts  # verbatim, never fabricated
    assert trace.mention.text == "the godfather"
    assert set(trace.timing) == {"MD", "CG", "RP", "AS"}


def test_answer_is_deterministic(trained):
    kg, md, rp, index = trained
    runs = [answer("what genre is jaws ?", md, rp, index, kg) for _ in range(2)]
    assert runs[0] == runs[1]
    assert runs[0][1].objects == ("m.drama",)


def test_unknown_mention_is_a_candidate_stage_failure(trained):
    kg, md, rp, index = trained
    with pytest.raises(NoAnswerError) as err:
        answer("who directed zzyzx ?", md, rp, index, kg)
    assert err.value.stage == "CG"


def test_batch_matches_single(trained):
    kg, md, rp, index = trained
    qs = ["who directed the godfather ?", "who wrote the godfather ?", "who directed zzyzx ?"]
    batch = answer_batch([tokenize(q) for q in qs], md, rp, index, kg)
    for q, b in zip(qs[:2], batch):
        interp, _ = answer(q, md, rp, index, kg)
        assert b.interpretation == interp
    assert batch[2].interpretation is None and batch[2].error_stage == "CG"


def test_answer_json_fields(trained):
    kg, md, rp, index = trained
    out = answer_json("who wrote the godfather ?", md, rp, index, kg, timing=False)
    assert set(out) == {"question", "mention", "candidates", "relation", "subject", "objects"}
    assert out["subject"]["id"] == "m.book" and out["objects"][0]["name"] == "Mario Puzo"
    assert len(out["candidates"]) <= 5
    assert "timing_ms" in answer_json("who wrote the godfather ?", md, rp, index, kg)


def test_every_answer_fact_comes_from_the_graph(trained):
    kg, md, rp, index = trained
    for name in ["the godfather", "jaws", "pilot"]:
        for verb in ["who directed", "who wrote", "what genre is"]:
            try:
                interp, fact = answer(f"{verb} {name} ?", md, rp, index, kg)
            except NoAnswerError:
                continue
            assert fact.fact in kg.facts
            assert all(Fact(interp.subject, interp.relation.id, o) in kg.facts for o in fact.objects)
