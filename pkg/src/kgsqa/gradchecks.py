"""Tiny model instances for finite-difference gradient checks.

Each builder returns ``(loss_fn, params)`` ready for ``nn.grad_check``.
Embeddings are scaled up from the usual tiny init so that every gradient
is comfortably above the relative-error floor.
"""

import numpy as np

from .kg import Fact, KnowledgeGraph, Relation
from .mention import MdConfig, MdModel, _bce
from .nn import autograd as ag
from .nn.gradcheck import grad_check
from .nn.layers import Attention
from .nn.params import ParamStore
from .qg import QgConfig, QgModel, _examples, assemble_contexts, build_output_vocab
from .relation import RpConfig, RpModel
from .text import SBJ, EmbeddingTable, Vocabulary

_WORDS = ["who", "directed", "wrote", "the", "godfather", "jaws", "film", "book", "directed",
          "by", "written", "work", "author", "what", "?", "person", "director", "of"]


def _table(dim=6, seed=0):
    table = EmbeddingTable(Vocabulary.build([_WORDS]), seed=seed, dim=dim)
    # the production init (+-0.5/d) is fine for training but leaves gradients
    # near the comparison floor; a wider copy keeps the check meaningful
    rng = np.random.default_rng(seed)
    wide = rng.uniform(-0.5, 0.5, table.matrix.shape)
    table.matrix = wide
    table.matrix.setflags(write=False)
    return table


def md_step():
    """Residual two-layer BiLSTM tagger with the input projection and BCE loss."""
    table = _table()
    model = MdModel.create(table, MdConfig(hidden=3, layers=2, dropout=0.0, seed=0))
    batch = [["who", "directed", "the", "godfather", "?"], ["who", "wrote", "jaws", "?"]]
    y = np.zeros((2, 5))
    y[0, 2:4] = 1.0
    y[1, 2] = 1.0

    def loss(params):
        logits, mask = model.logits(batch)
        return _bce(logits, y, mask)

    return loss, model.params


def rp_step():
    """Twin encoders, cosine scores and the summed hinge loss for one batch."""
    table = _table()
    model = RpModel.create(table, RpConfig(hidden=4, seed=0))
    questions = [["who", "directed", SBJ, "?"], ["who", "wrote", SBJ, "?"]]
    labels = ["film.film.directed_by", "book.written_work.author", "film.film.director_of"]
    gold = np.array([0, 1])
    negs = np.array([[1, 2], [0, 2]])

    def loss(params):
        q = model.encode_questions(questions)
        r = model.encode_relations(labels)
        S = ag.matmul(q, ag.transpose(r))
        rows = np.arange(2)
        pos = ag.reshape(ag.getitem(S, (rows, gold)), (2, 1))
        neg = ag.getitem(S, (rows[:, None], negs))
        # a wide margin keeps every hinge active, so no kink sits near the test point
        return ag.sum(ag.relu(ag.add(ag.sub(neg, pos), 2.5)))

    return loss, model.params


def attention_step():
    """Additive attention with masking, for single and sequence queries."""
    rng = np.random.default_rng(0)
    att = Attention("att", 3, 4, 5)
    params = ParamStore()
    att.init(params, rng)
    params.add("q", rng.normal(size=(2, 3)))
    params.add("qs", rng.normal(size=(2, 3, 3)))
    params.add("k", rng.normal(size=(2, 4, 4)))
    mask = np.array([[1, 1, 1, 0], [1, 1, 1, 1]], dtype=bool)
    w_out = rng.normal(size=(4,))

    def loss(p):
        ctx, w = att.forward(p, p["q"], p["k"], p["k"], mask=mask)
        ctx2, w2 = att.forward(p, p["qs"], p["k"], p["k"], mask=mask)
        total = ag.add(ag.sum(ag.mul(ctx, w_out)), ag.sum(ag.mul(ctx2, ctx2)))
        return ag.add(total, ag.sum(ag.mul(w, w)))

    return loss, params


def _tiny_kg():
    entities = {"m.1": "the godfather", "m.2": "francis ford coppola", "m.3": "mario puzo",
                "m.4": "jaws"}
    relations = [Relation("film.film.directed_by", "film.film.directed_by"),
                 Relation("book.written_work.author", "book.written_work.author")]
    facts = [Fact("m.1", "film.film.directed_by", "m.2"),
             Fact("m.1", "book.written_work.author", "m.3"),
             Fact("m.4", "film.film.directed_by", "m.2")]
    return KnowledgeGraph.build(entities, relations, facts)


def qg_step():
    """Full teacher-forced QG loss: fact tables, four encoders, both attentions, copy gate."""
    kg = _tiny_kg()
    table = _table()
    golds = [["who", "directed", "the", "godfather", "?"],
             ["who", "wrote", "the", "godfather", "?"],
             ["what", "person", "directed", "jaws", "?"]]
    pairs = [(f, assemble_contexts(f, kg), g) for f, g in zip(kg.facts, golds)]
    examples = _examples(pairs, kg)
    config = QgConfig(fact_dim=3, hidden=4, attn_dim=4, out_dim=4, seed=0)
    model = QgModel.create(table, config, build_output_vocab(examples), sorted(kg.entities),
                           sorted(kg.relations))

    def loss(params):
        return model.loss(examples)

    return loss, model.params


CHECKS = {"md": md_step, "rp": rp_step, "attention": attention_step, "qg": qg_step}


def run_checks(names=None, eps=1e-5, coords_per_tensor=64, seed=0):
    """Worst relative error per component and per tensor."""
    out = {}
    for name in names or CHECKS:
        loss, params = CHECKS[name]()
        report = {}
        worst = grad_check(loss, params, eps=eps, coords_per_tensor=coords_per_tensor, seed=seed,
                           report=report)
        out[name] = (worst, report)
    return out
