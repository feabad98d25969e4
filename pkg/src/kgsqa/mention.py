"""Entity mention detection: E/C token tagging with a residual BiLSTM."""

import logging
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyInputError, ValidationError
from .nn import autograd as ag
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import LstmEncoder, add_linear, linear
from .nn.optim import AdamState, adam_update
from .nn.params import ParamStore
from .text import EmbeddingTable, Vocabulary

log = logging.getLogger(__name__)

E, C = "E", "C"


class MentionSpan(NamedTuple):
    start: int
    end: int  # inclusive
    tokens: tuple

    @property
    def text(self):
        return " ".join(self.tokens)


class TagSequence(NamedTuple):
    labels: tuple
    probs: tuple


def find_name_span(question: Sequence[str], name: Sequence[str]):
    """Longest contiguous token run shared by ``question`` and ``name``.

    Returns ``(start, end)`` into ``question`` (leftmost on ties) or None.
    """
    best = None
    best_len = 0
    for i in range(len(question)):
        for j in range(len(name)):
            k = 0
            while i + k < len(question) and j + k < len(name) and question[i + k] == name[j + k]:
                k += 1
            if k > best_len:
                best_len = k
                best = (i, i + k - 1)
    return best


def tags_for_span(length, span):
    return [E if span[0] <= i <= span[1] else C for i in range(length)]


def decode_mention(tags: TagSequence, tokens: Sequence[str]) -> MentionSpan:
    """Longest run of E labels; ties by mean P(E) then leftmost; argmax fallback."""
    labels, probs = tags.labels, tags.probs
    if len(tokens) == 0:
        raise EmptyInputError("cannot decode a mention from an empty question")
    runs = []
    i = 0
    while i < len(labels):
        if labels[i] == E:
            j = i
            while j + 1 < len(labels) and labels[j + 1] == E:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    if runs:
        start, end = max(runs, key=lambda r: (r[1] - r[0], float(np.mean(probs[r[0]:r[1] + 1])), -r[0]))
    else:
        start = end = int(np.argmax(probs))
    return MentionSpan(start, end, tuple(tokens[start:end + 1]))


@dataclass
class MdConfig:
    hidden: int = 600
    layers: int = 2
    dropout: float = 0.4
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 300
    threshold: float = 0.5
    seed: int = 0
    clip_norm: float = 5.0


@dataclass
class MdModel:
    table: EmbeddingTable
    config: MdConfig
    params: ParamStore
    history: list = field(default_factory=list)

    @property
    def encoder(self):
        c = self.config
        return LstmEncoder("md.enc", 2 * c.hidden, c.hidden, layers=c.layers,
                           bidirectional=True, residual=True, dropout=c.dropout)

    @classmethod
    def create(cls, table, config):
        rng = np.random.default_rng(config.seed)
        params = ParamStore()
        model = cls(table, config, params)
        add_linear(params, "md.proj", table.dim, 2 * config.hidden, rng)
        model.encoder.init(params, rng)
        add_linear(params, "md.out", 2 * config.hidden, 1, rng)
        return model

    def logits(self, batch_tokens, train=False, rng=None):
        T = max(len(t) for t in batch_tokens)
        ids = np.zeros((len(batch_tokens), T), dtype=np.int64)
        mask = np.zeros((len(batch_tokens), T), dtype=bool)
        for b, toks in enumerate(batch_tokens):
            ids[b, :len(toks)] = self.table.vocab.ids(toks)
            mask[b, :len(toks)] = True
        x = ag.Tensor(self.table.matrix[ids])
        x = ag.tanh(linear(self.params, "md.proj", x))
        states, _ = self.encoder.forward(self.params, x, mask, train=train, rng=rng)
        out = linear(self.params, "md.out", states)
        return ag.reshape(out, out.shape[:2]), mask

    def save(self, path):
        meta = {
            "kind": "md",
            "config": asdict(self.config),
            "embedding": {"seed": self.table.seed, "dim": self.table.dim},
            "vocab_digest": self.table.vocab.digest(),
            "vocab": self.table.vocab.tokens,
        }
        save_checkpoint(path, self.params.state_dict(), meta)

    @classmethod
    def load(cls, path, table=None):
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "md":
            raise ValidationError(f"{path} is not a mention-detection checkpoint")
        if table is None:
            table = EmbeddingTable(Vocabulary.from_list(meta["vocab"]), **meta["embedding"])
        elif table.vocab.digest() != meta["vocab_digest"]:
            raise ValidationError("vocabulary does not match the checkpoint")
        model = cls.create(table, MdConfig(**meta["config"]))
        model.params.load_state_dict(arrays)
        return model


def _bce(logits, targets, mask):
    m = mask.astype(float)
    per = ag.bce_with_logits(logits, targets)
    return ag.mul(ag.sum(ag.mul(per, m)), 1.0 / m.sum())


def train_md(data, config: MdConfig, table: EmbeddingTable) -> MdModel:
    """``data`` is a list of (tokens, tags) with tags over {"E", "C"}."""
    if not data:
        raise EmptyInputError("no mention-detection training data")
    for toks, tags in data:
        if len(toks) != len(tags):
            raise ValidationError(f"tag length {len(tags)} != token length {len(toks)}")
        if len(toks) == 0:
            raise ValidationError("empty training question")
        if E not in tags:
            raise ValidationError(f"gold tags without an entity token: {' '.join(toks)}")
    model = MdModel.create(table, config)
    rng = np.random.default_rng(config.seed + 1)
    state = AdamState(lr=config.lr)
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [data[i] for i in order[start:start + config.batch_size]]
            toks = [b[0] for b in batch]
            logits, mask = model.logits(toks, train=True, rng=rng)
            y = np.zeros(mask.shape)
            for b, (_, tags) in enumerate(batch):
                y[b, :len(tags)] = [1.0 if t == E else 0.0 for t in tags]
            loss = _bce(logits, y, mask)
            model.params.zero_grad()
            loss.backward()
            adam_update(model.params, model.params.grads(), state, clip_norm=config.clip_norm)
            n = int(mask.sum())
            total += loss.item() * n
            count += n
        model.history.append(total / count)
        log.debug("md epoch %d loss %.4f", epoch, model.history[-1])
    return model


def tag(model: MdModel, tokens: Sequence[str]) -> TagSequence:
    if len(tokens) == 0:
        raise EmptyInputError("cannot tag an empty question")
    return tag_batch(model, [tokens])[0]


def tag_batch(model: MdModel, batch_tokens):
    out = []
    for start in range(0, len(batch_tokens), 256):
        chunk = batch_tokens[start:start + 256]
        logits, _ = model.logits(chunk)
        probs = 0.5 * (1.0 + np.tanh(0.5 * logits.data))
        for b, toks in enumerate(chunk):
            p = tuple(float(v) for v in probs[b, :len(toks)])
            labels = tuple(E if v >= model.config.threshold else C for v in p)
            out.append(TagSequence(labels, p))
    return out


def detect_mention(model: MdModel, tokens: Sequence[str]) -> MentionSpan:
    return decode_mention(tag(model, tokens), tokens)
