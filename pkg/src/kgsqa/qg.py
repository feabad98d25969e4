"""Question generation from a fact and its textual contexts, with a copy mechanism.

The encoder embeds (subject, relation, object) with trainable tables and
runs one LSTM per textual context (subject type, relation keywords, object
type) plus one over the subject's name. The decoder LSTM attends over the
three fact embeddings and over all encoded source tokens. The final word
distribution mixes the vocabulary softmax with the source attention weights
through a scalar gate:

    P(w) = (1 - g) * P_vocab(w) + g * sum_{j : src_j = w} alpha_j
"""

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ContaminationError, EmptyInputError, ValidationError
from .nn import autograd as ag
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import Attention, LstmEncoder, add_linear, dropout, linear
from .nn.optim import AdamState, adam_update
from .nn.params import ParamStore, uniform_init
from .text import BOS, EOS, PAD, SBJ, UNK, EmbeddingTable, Vocabulary, tokenize, tokenize_relation_label

log = logging.getLogger(__name__)

GENERATED = "generated"
COPIED_CONTEXT = "copied-from-context"
COPIED_NAME = "copied-from-fact-name"

_SEGMENTS = ("cs", "cr", "co", "name")
_MAX_POSITIONS = 32
_UNKNOWN_ROW = "<unknown>"
_LOG_FLOOR = 1e-12


class TextualContexts(NamedTuple):
    c_s: tuple
    c_r: tuple
    c_o: tuple


class GeneratedQuestion(NamedTuple):
    tokens: tuple
    provenance: tuple

    @property
    def text(self):
        return " ".join(self.tokens)


def assemble_contexts(fact, kg, types=None, keywords=None, k=10) -> TextualContexts:
    """Type names for subject/object and the top-k keywords for the relation.

    Fallbacks: subject type -> the label's second segment; object type -> the
    last word of the label's third segment; then "entity". Missing keywords
    fall back to the tokenized relation label.
    """
    label = kg.relations[fact.relation].label
    segs = label.split(".")

    def typed(entity):
        if types and entity in types:
            return tuple(tokenize(types[entity]))
        return ()

    s_fb = tuple(w for w in segs[1].split("_") if w) if len(segs) > 1 else ()
    o_fb = tuple(segs[2].split("_")[-1:]) if len(segs) > 2 and segs[2].split("_")[-1] else ()
    c_s = typed(fact.subject) or s_fb or ("entity",)
    c_o = typed(fact.object) or o_fb or ("entity",)
    kws = keywords.keywords(label)[:k] if keywords is not None else []
    c_r = tuple(kws) or tuple(tokenize_relation_label(label))
    return TextualContexts(c_s, c_r, c_o)


def copy_sources(contexts: TextualContexts, name_tokens):
    """(surface, segment) for every copyable source position, in encoder order."""
    out = []
    for seg, toks in zip(_SEGMENTS, (contexts.c_s, contexts.c_r, contexts.c_o, name_tokens)):
        out.extend((t, seg) for t in toks)
    return out


def build_output_vocab(examples) -> Vocabulary:
    """Words of the gold questions that are not copyable in their own example."""
    counts = Counter()
    for _, ctx, name, gold in examples:
        src = {t for t, _ in copy_sources(ctx, name)}
        counts.update(t for t in gold if t not in src)
    return Vocabulary(sorted(counts))


@dataclass
class QgConfig:
    fact_dim: int = 32
    hidden: int = 64
    attn_dim: int = 64
    out_dim: int = 64
    max_len: int = 20
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    clip_norm: float = 5.0
    k: int = 10
    dropout: float = 0.0


@dataclass
class QgModel:
    table: EmbeddingTable
    config: QgConfig
    params: ParamStore
    out_vocab: Vocabulary
    entities: tuple
    relations: tuple
    history: list = field(default_factory=list)
    val_history: list = field(default_factory=list)

    def __post_init__(self):
        self._ent_row = {e: i for i, e in enumerate(self.entities)}
        self._rel_row = {r: i for i, r in enumerate(self.relations)}
        c, d = self.config, self.table.dim
        self.encoders = {seg: LstmEncoder(f"qg.enc_{seg}", d, c.hidden) for seg in _SEGMENTS}
        self.decoder = LstmEncoder("qg.dec", d, c.hidden)
        self.fact_attention = Attention("qg.att_fact", c.hidden, c.fact_dim, c.attn_dim)
        self.context_attention = Attention("qg.att_ctx", c.hidden, c.hidden, c.attn_dim)
        banned = np.zeros(len(self.out_vocab), dtype=bool)
        for t in (PAD, BOS, UNK, SBJ):
            banned[self.out_vocab.id(t)] = True
        self._banned = banned

    @classmethod
    def create(cls, table, config, out_vocab, entities, relations):
        entities = (_UNKNOWN_ROW,) + tuple(e for e in entities if e != _UNKNOWN_ROW)
        relations = (_UNKNOWN_ROW,) + tuple(r for r in relations if r != _UNKNOWN_ROW)
        model = cls(table, config, ParamStore(), out_vocab, entities, relations)
        rng = np.random.default_rng(config.seed)
        p, c, fd = model.params, config, config.fact_dim
        p.add("qg.fact_subject", rng.uniform(-0.1, 0.1, (len(entities), fd)))
        p.add("qg.fact_relation", rng.uniform(-0.1, 0.1, (len(relations), fd)))
        p.add("qg.fact_object", rng.uniform(-0.1, 0.1, (len(entities), fd)))
        # where a source token sits (segment, offset) matters for copying words never seen
        p.add("qg.src_position", rng.uniform(-0.1, 0.1, (len(_SEGMENTS), _MAX_POSITIONS, c.hidden)))
        for seg in _SEGMENTS:
            model.encoders[seg].init(p, rng)
        model.decoder.init(p, rng)
        model.fact_attention.init(p, rng)
        model.context_attention.init(p, rng)
        add_linear(p, "qg.init", 3 * fd, c.hidden, rng)
        feat = 2 * c.hidden + fd
        add_linear(p, "qg.out", feat, c.out_dim, rng)
        add_linear(p, "qg.vocab", c.out_dim, len(out_vocab), rng)
        p.add("qg.gate.W", uniform_init(rng, (feat + table.dim, 1), feat + table.dim))
        p.add("qg.gate.b", np.zeros(1))
        return model

    # -- encoding ------------------------------------------------------------

    def _pad(self, seqs):
        T = max(max(len(s) for s in seqs), 1)
        ids = np.zeros((len(seqs), T), dtype=np.int64)
        mask = np.zeros((len(seqs), T), dtype=bool)
        for b, s in enumerate(seqs):
            ids[b, :len(s)] = self.table.vocab.ids(s)
            mask[b, :len(s)] = True
        return ids, mask

    def encode(self, batch, train=False, rng=None):
        """``batch`` is a list of (fact, contexts, name_tokens).

        Returns a dict with fact keys (B, 3, fd), source states (B, L, h),
        source mask, per-example source surfaces, and the decoder's initial state.
        """
        segs = {
            "cs": [ctx.c_s for _, ctx, _ in batch],
            "cr": [ctx.c_r for _, ctx, _ in batch],
            "co": [ctx.c_o for _, ctx, _ in batch],
            "name": [tuple(name) or (UNK,) for _, _, name in batch],
        }
        states, masks, surfaces = [], [], [[] for _ in batch]
        for si, seg in enumerate(_SEGMENTS):
            ids, mask = self._pad(segs[seg])
            st, _ = self.encoders[seg].forward(self.params, ag.Tensor(self.table.matrix[ids]), mask)
            T = min(ids.shape[1], _MAX_POSITIONS)
            pos = ag.getitem(self.params["qg.src_position"], (si, slice(0, T)))
            if ids.shape[1] > T:
                pos = ag.concat([pos, ag.Tensor(np.zeros((ids.shape[1] - T, self.config.hidden)))],
                                axis=0)
            st = ag.add(st, pos)
            states.append(dropout(st, self.config.dropout, train, rng))
            masks.append(mask)
            for b, toks in enumerate(segs[seg]):
                row = [(t, seg) for t in toks] + [None] * (ids.shape[1] - len(toks))
                surfaces[b].extend(row)
        S = ag.concat(states, axis=1)
        M = np.concatenate(masks, axis=1)
        s_rows = np.array([self._ent_row.get(f.subject, 0) for f, _, _ in batch])
        r_rows = np.array([self._rel_row.get(f.relation, 0) for f, _, _ in batch])
        o_rows = np.array([self._ent_row.get(f.object, 0) for f, _, _ in batch])
        rate = self.config.dropout
        fs = dropout(ag.take_rows(self.params["qg.fact_subject"], s_rows), rate, train, rng)
        fr = dropout(ag.take_rows(self.params["qg.fact_relation"], r_rows), rate, train, rng)
        fo = dropout(ag.take_rows(self.params["qg.fact_object"], o_rows), rate, train, rng)
        F = ag.stack([fs, fr, fo], axis=1)
        h0 = ag.tanh(linear(self.params, "qg.init", ag.concat([fs, fr, fo], axis=-1)))
        return {"F": F, "S": S, "M": M, "surfaces": surfaces, "h0": h0}

    def _mixture_parts(self, enc, dec_states, x):
        """Vocabulary distribution, gate and copy weights for decoder states."""
        fctx, _ = self.fact_attention.forward(self.params, dec_states, enc["F"], enc["F"])
        cctx, cw = self.context_attention.forward(self.params, dec_states, enc["S"], enc["S"],
                                                  mask=enc["M"], projected_keys=enc.get("pS"))
        feat = ag.concat([dec_states, fctx, cctx], axis=-1)
        o = ag.tanh(linear(self.params, "qg.out", feat))
        pv = ag.softmax(linear(self.params, "qg.vocab", o), axis=-1)
        g = ag.sigmoid(linear(self.params, "qg.gate", ag.concat([feat, x], axis=-1)))
        return pv, ag.reshape(g, g.shape[:-1]), cw

    # -- training objective ----------------------------------------------------

    def loss(self, examples, train=False, rng=None):
        """Mean over examples of the summed token NLL under the mixture.

        ``examples`` are (fact, contexts, name_tokens, gold_tokens).
        """
        enc = self.encode([(f, c, n) for f, c, n, _ in examples], train, rng)
        B = len(examples)
        dec_in = [[BOS] + list(g) for *_, g in examples]
        targets = [list(g) + [EOS] for *_, g in examples]
        T = max(len(t) for t in targets)
        ids, tmask = self._pad(dec_in)
        x = ag.Tensor(self.table.matrix[ids])
        states = self.decoder.run_from(self.params, x, enc["h0"], mask=tmask)
        states = dropout(states, self.config.dropout, train, rng)
        pv, g, cw = self._mixture_parts(enc, states, x)

        L = enc["S"].shape[1]
        vid = np.zeros((B, T), dtype=np.int64)
        vmask = np.zeros((B, T))
        cmatch = np.zeros((B, T, L))
        for b, tgt in enumerate(targets):
            src = enc["surfaces"][b]
            for t, w in enumerate(tgt):
                hits = [j for j, s in enumerate(src) if s is not None and s[0] == w]
                cmatch[b, t, hits] = 1.0
                if w in self.out_vocab:
                    vid[b, t], vmask[b, t] = self.out_vocab.id(w), 1.0
                elif not hits:
                    vid[b, t], vmask[b, t] = self.out_vocab.id(UNK), 1.0
        bi = np.arange(B)[:, None].repeat(T, axis=1)
        ti = np.arange(T)[None, :].repeat(B, axis=0)
        p_vocab = ag.mul(ag.getitem(pv, (bi, ti, vid)), vmask)
        p_copy = ag.sum(ag.mul(cw, cmatch), axis=-1)
        p = ag.add(ag.mul(ag.sub(1.0, g), p_vocab), ag.mul(g, p_copy))
        nll = ag.mul(ag.log(ag.add(p, _LOG_FLOOR)), -tmask.astype(float))
        return ag.mul(ag.sum(nll), 1.0 / B)

    # -- decoding ----------------------------------------------------------------

    def generate_batch(self, batch, max_len=None, trace=None):
        """Greedy decoding for a list of (fact, contexts, name_tokens)."""
        max_len = max_len or self.config.max_len
        enc = self.encode(batch)
        enc["pS"] = self.context_attention.project_keys(self.params, enc["S"])
        B = len(batch)
        h, c = enc["h0"], ag.Tensor(np.zeros((B, self.config.hidden)))
        prev = [BOS] * B
        out = [[] for _ in range(B)]
        prov = [[] for _ in range(B)]
        done = np.zeros(B, dtype=bool)
        V = len(self.out_vocab)
        for _ in range(max_len):
            x = ag.Tensor(self.table.matrix[self.table.vocab.ids(prev)])
            h, c = self.decoder.step(self.params, x, h, c)
            pv, g, cw = self._mixture_parts(enc, h, x)
            pv, g, cw = pv.data, g.data, cw.data
            for b in range(B):
                if done[b]:
                    continue
                vocab_part = (1.0 - g[b]) * pv[b]
                copy_in = {"ctx": np.zeros(V), "name": np.zeros(V)}
                extra = {}
                for j, src in enumerate(enc["surfaces"][b]):
                    if src is None or cw[b, j] == 0.0:
                        continue
                    w, seg = src
                    kind = "name" if seg == "name" else "ctx"
                    mass = g[b] * cw[b, j]
                    if w in self.out_vocab:
                        copy_in[kind][self.out_vocab.id(w)] += mass
                    else:
                        e = extra.setdefault(w, {"ctx": 0.0, "name": 0.0})
                        e[kind] += mass
                if trace is not None:
                    trace.append(float(vocab_part.sum() + copy_in["ctx"].sum()
                                       + copy_in["name"].sum()
                                       + sum(e["ctx"] + e["name"] for e in extra.values())))
                total = vocab_part + copy_in["ctx"] + copy_in["name"]
                total[self._banned] = -1.0
                best_v = int(np.argmax(total))
                best_w, best_p = self.out_vocab.token(best_v), total[best_v]
                parts = (vocab_part[best_v], copy_in["ctx"][best_v], copy_in["name"][best_v])
                for w, e in extra.items():
                    if e["ctx"] + e["name"] > best_p:
                        best_w, best_p = w, e["ctx"] + e["name"]
                        parts = (0.0, e["ctx"], e["name"])
                if best_w == EOS:
                    done[b] = True
                    continue
                out[b].append(best_w)
                if parts[0] >= parts[1] + parts[2]:
                    prov[b].append(GENERATED)
                else:
                    prov[b].append(COPIED_NAME if parts[2] > parts[1] else COPIED_CONTEXT)
                prev[b] = best_w
            if done.all():
                break
        return [GeneratedQuestion(tuple(o), tuple(p)) for o, p in zip(out, prov)]

    # -- persistence ---------------------------------------------------------------

    def save(self, path):
        meta = {
            "kind": "qg",
            "config": asdict(self.config),
            "embedding": {"seed": self.table.seed, "dim": self.table.dim},
            "vocab_digest": self.table.vocab.digest(),
            "vocab": self.table.vocab.tokens,
            "out_vocab": self.out_vocab.tokens,
            "entities": list(self.entities),
            "relations": list(self.relations),
        }
        save_checkpoint(path, self.params.state_dict(), meta)

    @classmethod
    def load(cls, path, table=None):
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "qg":
            raise ValidationError(f"{path} is not a question-generation checkpoint")
        if table is None:
            table = EmbeddingTable(Vocabulary.from_list(meta["vocab"]), **meta["embedding"])
        elif table.vocab.digest() != meta["vocab_digest"]:
            raise ValidationError("vocabulary does not match the checkpoint")
        model = cls.create(table, QgConfig(**meta["config"]), Vocabulary.from_list(meta["out_vocab"]),
                           meta["entities"], meta["relations"])
        model.params.load_state_dict(arrays)
        return model


def _examples(pairs, kg):
    return [(f, ctx, tuple(tokenize(kg.name(f.subject))), tuple(gold)) for f, ctx, gold in pairs]


def train_qg(pairs, config: QgConfig, kg, table: EmbeddingTable, target_domain=None,
             validation=None) -> QgModel:
    """Teacher-forced training on (fact, contexts, gold question tokens) triples.

    With ``validation`` pairs the parameters of the epoch with the lowest
    validation loss are kept.
    """
    if not pairs:
        raise EmptyInputError("no question-generation training pairs")
    if target_domain is not None:
        for f, _, _ in list(pairs) + list(validation or ()):
            if kg.domain_of(f.relation) == target_domain:
                raise ContaminationError(
                    f"training pair for {kg.relations[f.relation].label} is in the held-out "
                    f"domain {target_domain!r}")
    examples = _examples(pairs, kg)
    for ex in examples:
        if not ex[3]:
            raise ValidationError("empty gold question")
    val = _examples(validation, kg) if validation else []
    out_vocab = build_output_vocab(examples)
    model = QgModel.create(table, config, out_vocab, sorted(kg.entities), sorted(kg.relations))
    rng = np.random.default_rng(config.seed + 1)
    state = AdamState(lr=config.lr)
    best, best_loss = None, np.inf
    for epoch in range(config.epochs):
        order = rng.permutation(len(examples))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start:start + config.batch_size]]
            loss = model.loss(batch, train=True, rng=rng)
            model.params.zero_grad()
            loss.backward()
            adam_update(model.params, model.params.grads(), state, clip_norm=config.clip_norm)
            total += loss.item() * len(batch)
        model.history.append(total / len(examples))
        if val:
            v = model.loss(val).item()
            model.val_history.append(v)
            if v < best_loss:
                best, best_loss = model.params.state_dict(), v
        log.debug("qg epoch %d loss %.4f", epoch, model.history[-1])
    if best is not None:
        model.params.load_state_dict(best)
    return model


def generate(model: QgModel, fact, contexts, kg) -> GeneratedQuestion:
    name = tuple(tokenize(kg.name(fact.subject)))
    return model.generate_batch([(fact, contexts, name)])[0]


def synthesize_dataset(model: QgModel, target_facts, kg, types=None, keywords=None,
                       target_domain=None, batch_size=64):
    """One greedy question per fact, paired with the fact, in input order."""
    facts = list(target_facts)
    if target_domain is not None:
        for f in facts:
            if kg.domain_of(f.relation) != target_domain:
                raise ValidationError(f"fact {tuple(f)} is outside target domain {target_domain!r}")
    out = []
    for start in range(0, len(facts), batch_size):
        chunk = facts[start:start + batch_size]
        batch = [(f, assemble_contexts(f, kg, types, keywords, model.config.k),
                  tuple(tokenize(kg.name(f.subject)))) for f in chunk]
        out.extend(zip(model.generate_batch(batch), chunk))
    return out
