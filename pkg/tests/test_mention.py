import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgsqa.data import md_examples
from kgsqa.errors import EmptyInputError, ValidationError
from kgsqa.mention import (C, E, MdConfig, MdModel, TagSequence, decode_mention, detect_mention,
                           find_name_span, tag, tag_batch, tags_for_span, train_md)
from kgsqa.text import EmbeddingTable, Vocabulary

Q = ["who", "directed", "the", "godfather"]


def _table(tokens=(), dim=12):
    return EmbeddingTable(Vocabulary(sorted(set(tokens) | set(Q))), seed=0, dim=dim)


def test_decode_examples():
    span = decode_mention(TagSequence((C, C, E, E), (0.1, 0.2, 0.9, 0.8)), Q)
    assert (span.start, span.end, span.text) == (2, 3, "the godfather")
    span = decode_mention(TagSequence((E, C, E, E), (0.9, 0.1, 0.7, 0.7)), Q)
    assert (span.start, span.end) == (2, 3)
    span = decode_mention(TagSequence((C, C, C), (0.1, 0.4, 0.2)), ["a", "b", "c"])
    assert (span.start, span.end) == (1, 1)


def test_decode_tie_prefers_higher_mean_then_leftmost():
    span = decode_mention(TagSequence((E, C, E), (0.6, 0.1, 0.9)), ["a", "b", "c"])
    assert span.start == 2
    span = decode_mention(TagSequence((E, C, E), (0.7, 0.1, 0.7)), ["a", "b", "c"])
    assert span.start == 0


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_decode_always_in_bounds(probs):
    labels = tuple(E if p >= 0.5 else C for p in probs)
    toks = [f"t{i}" for i in range(len(probs))]
    span = decode_mention(TagSequence(labels, tuple(probs)), toks)
    assert 0 <= span.start <= span.end < len(toks)
    assert span.tokens == tuple(toks[span.start:span.end + 1])


def test_decode_empty_input():
    with pytest.raises(EmptyInputError):
        decode_mention(TagSequence((), ()), [])


def test_find_name_span():
    assert find_name_span(Q, ["the", "godfather"]) == (2, 3)
    assert find_name_span(["who", "wrote", "godfather", "?"], ["the", "godfather"]) == (2, 2)
    assert find_name_span(Q, ["jaws"]) is None
    assert tags_for_span(4, (2, 3)) == [C, C, E, E]


def test_zero_weight_model_tags_everything_as_entity():
    model = MdModel.create(_table(), MdConfig(hidden=4, seed=0))
    for _, t in model.params.items():
        t.data[...] = 0.0
    out = tag(model, Q)
    assert out.probs == (0.5,) * 4 and out.labels == (E,) * 4
    assert len(tag(model, ["godfather"]).labels) == 1


@given(st.lists(st.lists(st.sampled_from(Q + ["unseen"]), min_size=1, max_size=9),
                min_size=1, max_size=4))
def test_tag_length_matches_input(batch):
    model = MdModel.create(_table(), MdConfig(hidden=3, layers=2, seed=1))
    for toks, ts in zip(batch, tag_batch(model, batch)):
        assert len(ts.labels) == len(toks) == len(ts.probs)


FIVE = [
    (["who", "directed", "the", "godfather", "?"], [C, C, E, E, C]),
    (["who", "wrote", "jaws", "?"], [C, C, E, C]),
    (["what", "genre", "is", "the", "pilot", "?"], [C, C, C, E, E, C]),
    (["the", "godfather", "was", "written", "by", "whom", "?"], [E, E, C, C, C, C, C]),
    (["where", "is", "lake", "tahoe", "?"], [C, C, E, E, C]),
]


def test_training_is_bit_reproducible():
    table = _table([t for toks, _ in FIVE for t in toks])
    cfg = MdConfig(hidden=4, layers=2, dropout=0.2, lr=1e-2, epochs=3, batch_size=2, seed=7)
    a, b = train_md(FIVE, cfg, table), train_md(FIVE, cfg, table)
    for k, v in a.params.state_dict().items():
        assert v.tobytes() == b.params.state_dict()[k].tobytes()


def test_training_preconditions():
    table = _table()
    with pytest.raises(ValidationError):
        train_md([(["a", "b"], [C, C])], MdConfig(hidden=2), table)
    with pytest.raises(ValidationError):
        train_md([(["a", "b"], [E])], MdConfig(hidden=2), table)
    with pytest.raises(EmptyInputError):
        train_md([], MdConfig(hidden=2), table)


def test_godfather_tagging_after_training():
    table = _table([t for toks, _ in FIVE for t in toks])
    model = train_md(FIVE, MdConfig(hidden=8, layers=2, dropout=0.0, lr=1e-2, epochs=150,
                                    batch_size=5, seed=0), table)
    assert tag(model, Q + ["?"]).labels[:4] == (C, C, E, E)
    assert detect_mention(model, Q + ["?"]).text == "the godfather"


def test_checkpoint_roundtrip(tmp_path):
    table = _table()
    model = MdModel.create(table, MdConfig(hidden=3, seed=2))
    model.save(tmp_path / "md.ckpt")
    again = MdModel.load(tmp_path / "md.ckpt", table)
    assert tag(again, Q) == tag(model, Q)
    other = EmbeddingTable(Vocabulary(["x"]), dim=12)
    with pytest.raises(ValidationError):
        MdModel.load(tmp_path / "md.ckpt", other)


def test_toy_training_loss_halves(toy_res):
    data = md_examples(toy_res.dataset)
    model = train_md(data, MdConfig(hidden=12, layers=2, dropout=0.1, lr=1e-2, epochs=6,
                                    batch_size=32, seed=0), toy_res.table)
    assert model.history[-1] < 0.5 * model.history[0]
    assert all(np.isfinite(model.history))
