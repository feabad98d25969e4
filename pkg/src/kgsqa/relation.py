"""Relation ranking: twin LSTM encoders scored by cosine, trained with a pairwise hinge loss."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, ValidationError
from .kg import Relation, relations_for_entities
from .nn import autograd as ag
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import LstmEncoder
from .nn.optim import AdamState, adam_update
from .nn.params import ParamStore
from .text import SBJ, EmbeddingTable, Vocabulary, tokenize_relation_label

log = logging.getLogger(__name__)

_NORM_EPS = 1e-12


def prepare_question(tokens: Sequence[str], span) -> list:
    """Replace the mention ``span`` (start, end inclusive) with the SBJ placeholder."""
    start, end = span[0], span[1]
    if not (0 <= start <= end < len(tokens)):
        raise ValidationError(f"span {(start, end)} out of range for {len(tokens)} tokens")
    return list(tokens[:start]) + [SBJ] + list(tokens[end + 1:])


def hinge_loss(pos_score, neg_scores, margin):
    """sum_r' max(0, margin - f(q, r) + f(q, r')) for one question."""
    return float(np.sum(np.maximum(0.0, margin - pos_score + np.asarray(neg_scores, dtype=float))))


@dataclass
class NegativeSamplerConfig:
    p_global: float = 0.5  # probability of drawing from all relations rather than the domain
    n_negatives: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_global <= 1.0:
            raise ValidationError("negative-sampling probability must be in [0, 1]")
        if self.n_negatives < 1:
            raise ValidationError("need at least one negative")


def sample_negatives(config: NegativeSamplerConfig, positive: Relation, all_relations,
                     rng, return_sources=False):
    """Draw ``n_negatives`` distinct relations other than ``positive``.

    Each draw independently picks the global pool (all relations except the
    positive) with probability ``p_global``, otherwise the pool of the
    positive's domain. Relations already drawn are excluded; an exhausted
    domain pool falls back to the global pool. With ``return_sources`` the
    pool used by each draw ("global" or "domain") is returned too.
    """
    pool = [r for r in all_relations if r.id != positive.id]
    if len(pool) < config.n_negatives:
        raise ValidationError(f"only {len(pool)} negatives available, "
                              f"{config.n_negatives} requested")
    domain = positive.domain
    chosen, sources, taken = [], [], set()
    for _ in range(config.n_negatives):
        use_global = rng.random() < config.p_global
        if not use_global:
            cands = [r for r in pool if r.domain == domain and r.id not in taken]
            if not cands:
                use_global = True
        if use_global:
            cands = [r for r in pool if r.id not in taken]
        pick = cands[int(rng.integers(len(cands)))]
        taken.add(pick.id)
        chosen.append(pick)
        sources.append("global" if use_global else "domain")
    return (chosen, sources) if return_sources else chosen


@dataclass
class RpConfig:
    hidden: int = 400
    lr: float = 1e-3
    epochs: int = 10
    n_negatives: int = 10
    batch_size: int = 200
    margin: float = 0.1
    p_global: float = 0.5
    seed: int = 0
    clip_norm: float = 5.0


@dataclass
class RpModel:
    table: EmbeddingTable
    config: RpConfig
    params: ParamStore
    history: list = field(default_factory=list)
    _rel_cache: dict = field(default_factory=dict, repr=False)

    @property
    def question_encoder(self):
        return LstmEncoder("rp.q", self.table.dim, self.config.hidden)

    @property
    def relation_encoder(self):
        return LstmEncoder("rp.r", self.table.dim, self.config.hidden)

    @classmethod
    def create(cls, table, config):
        rng = np.random.default_rng(config.seed)
        model = cls(table, config, ParamStore())
        model.question_encoder.init(model.params, rng)
        model.relation_encoder.init(model.params, rng)
        return model

    def _encode(self, encoder, seqs):
        if any(len(s) == 0 for s in seqs):
            raise EmptyInputError("cannot encode an empty token sequence")
        T = max(len(s) for s in seqs)
        ids = np.zeros((len(seqs), T), dtype=np.int64)
        mask = np.zeros((len(seqs), T), dtype=bool)
        for b, s in enumerate(seqs):
            ids[b, :len(s)] = self.table.vocab.ids(s)
            mask[b, :len(s)] = True
        _, final = encoder.forward(self.params, ag.Tensor(self.table.matrix[ids]), mask)
        norm = ag.sqrt(ag.add(ag.sum(ag.mul(final, final), axis=1, keepdims=True), _NORM_EPS))
        return ag.div(final, norm)

    def encode_questions(self, questions):
        return self._encode(self.question_encoder, questions)

    def encode_relations(self, labels):
        return self._encode(self.relation_encoder, [tokenize_relation_label(lb) for lb in labels])

    def relation_vectors(self, labels):
        missing = [lb for lb in dict.fromkeys(labels) if lb not in self._rel_cache]
        if missing:
            enc = self.encode_relations(missing).data
            for lb, v in zip(missing, enc):
                self._rel_cache[lb] = v
        return np.stack([self._rel_cache[lb] for lb in labels])

    def score_matrix(self, questions, labels):
        q = self.encode_questions(questions).data
        return q @ self.relation_vectors(labels).T

    def save(self, path):
        meta = {
            "kind": "rp",
            "config": asdict(self.config),
            "embedding": {"seed": self.table.seed, "dim": self.table.dim},
            "vocab_digest": self.table.vocab.digest(),
            "vocab": self.table.vocab.tokens,
        }
        save_checkpoint(path, self.params.state_dict(), meta)

    @classmethod
    def load(cls, path, table=None):
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "rp":
            raise ValidationError(f"{path} is not a relation-prediction checkpoint")
        if table is None:
            table = EmbeddingTable(Vocabulary.from_list(meta["vocab"]), **meta["embedding"])
        elif table.vocab.digest() != meta["vocab_digest"]:
            raise ValidationError("vocabulary does not match the checkpoint")
        model = cls.create(table, RpConfig(**meta["config"]))
        model.params.load_state_dict(arrays)
        return model


def score(model: RpModel, q_tokens: Sequence[str], relation: Relation) -> float:
    """f(q, r): cosine of the two encoders' final states."""
    if len(q_tokens) == 0:
        raise EmptyInputError("empty question")
    return float(model.score_matrix([list(q_tokens)], [relation.label])[0, 0])


def train_rp(data, kg, config: RpConfig, table: EmbeddingTable) -> RpModel:
    """``data`` is a list of (placeholder question tokens, gold relation id)."""
    if not data:
        raise EmptyInputError("no relation-prediction training data")
    relations = [kg.relations[r] for r in sorted(kg.relations)]
    for _, rid in data:
        if rid not in kg.relations:
            raise ValidationError(f"unknown relation {rid!r} in training data")
    model = RpModel.create(table, config)
    sampler = NegativeSamplerConfig(config.p_global, config.n_negatives, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    state = AdamState(lr=config.lr)
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [data[i] for i in order[start:start + config.batch_size]]
            negs = [[r.id for r in sample_negatives(sampler, kg.relations[rid], relations, rng)]
                    for _, rid in batch]
            used = sorted({rid for _, rid in batch} | {r for ns in negs for r in ns})
            col = {r: i for i, r in enumerate(used)}
            q = model.encode_questions([toks for toks, _ in batch])
            rv = model.encode_relations([kg.relations[r].label for r in used])
            S = ag.matmul(q, ag.transpose(rv))  # (B, |used|)
            rows = np.arange(len(batch))
            pos = ag.getitem(S, (rows, np.array([col[rid] for _, rid in batch])))
            neg_idx = np.array([[col[r] for r in ns] for ns in negs])
            neg = ag.getitem(S, (rows[:, None], neg_idx))
            B = len(batch)
            margins = ag.relu(ag.add(ag.sub(neg, ag.reshape(pos, (B, 1))), config.margin))
            per_q = ag.sum(margins, axis=1)
            loss = ag.mul(ag.sum(per_q), 1.0 / B)
            model.params.zero_grad()
            loss.backward()
            adam_update(model.params, model.params.grads(), state, clip_norm=config.clip_norm)
            total += float(per_q.data.sum())
        model.history.append(total / len(data))
        log.debug("rp epoch %d loss %.4f", epoch, model.history[-1])
    model._rel_cache.clear()
    return model


def constrained_relations(candidate_ids, kg):
    rc = relations_for_entities(kg, candidate_ids)
    return rc if rc else set(kg.relations)


def predict_relation(model: RpModel, q_tokens, c_s, kg, return_scores=False):
    """Highest-scoring relation among those headed by the candidates (all relations if none)."""
    if not kg.relations:
        raise ValidationError("knowledge graph has no relations")
    ids = c_s.ids() if hasattr(c_s, "ids") else list(c_s)
    rc = sorted(constrained_relations(ids, kg), key=lambda r: kg.relations[r].label)
    labels = [kg.relations[r].label for r in rc]
    scores = model.score_matrix([list(q_tokens)], labels)[0]
    best = min(range(len(rc)), key=lambda i: (-scores[i], labels[i]))
    rel = kg.relations[rc[best]]
    if return_scores:
        return rel, dict(zip(rc, scores.tolist()))
    return rel
