"""Tokenization, vocabularies and the frozen word-embedding table."""

import hashlib
import re
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError, NumericalError, ShapeError, ValidationError

PAD = "<pad>"
UNK = "<unk>"
SBJ = "<sbj>"
BOS = "<bos>"
EOS = "<eos>"
RESERVED = (PAD, UNK, SBJ, BOS, EOS)

_PUNCT = re.compile(r"([.,!?'\"])")


def tokenize(text: str) -> list:
    """Lowercase, split on whitespace, and split off ``.,!?'"`` as tokens."""
    return _PUNCT.sub(r" \1 ", text.lower()).split()


def tokenize_relation_label(label: str) -> list:
    return [t for t in re.split(r"[._]", label.lower()) if t]


class Vocabulary:
    """Dense token <-> id bijection with the reserved tokens at ids 0..4."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._itos = list(RESERVED)
        self._stoi = {t: i for i, t in enumerate(self._itos)}
        for t in tokens:
            self.add(t)

    @classmethod
    def build(cls, token_streams: Iterable[Iterable[str]]) -> "Vocabulary":
        """Vocabulary over all tokens seen, in sorted order (order-independent)."""
        seen = set()
        for stream in token_streams:
            seen.update(stream)
        seen.difference_update(RESERVED)
        return cls(sorted(seen))

    def add(self, token: str) -> int:
        if not token or any(c.isspace() for c in token):
            raise ValidationError(f"invalid token {token!r}")
        if token not in self._stoi:
            self._stoi[token] = len(self._itos)
            self._itos.append(token)
        return self._stoi[token]

    def __len__(self):
        return len(self._itos)

    def __contains__(self, token):
        return token in self._stoi

    def __iter__(self):
        return iter(self._itos)

    def id(self, token: str) -> int:
        return self._stoi.get(token, self._stoi[UNK])

    def ids(self, tokens: Sequence[str]) -> list:
        unk = self._stoi[UNK]
        return [self._stoi.get(t, unk) for t in tokens]

    def token(self, idx: int) -> str:
        return self._itos[idx]

    @property
    def tokens(self) -> list:
        return list(self._itos)

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self._itos).encode("utf-8")).hexdigest()[:16]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._itos:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh]
        return cls.from_list(lines)

    @classmethod
    def from_list(cls, tokens: Sequence[str]) -> "Vocabulary":
        if tuple(tokens[:len(RESERVED)]) != RESERVED:
            raise ValidationError("vocabulary must start with " + ", ".join(RESERVED))
        return cls(tokens[len(RESERVED):])


def token_vector(token: str, seed: int, dim: int) -> np.ndarray:
    h = hashlib.blake2b(f"{seed}\x00{token}".encode("utf-8"), digest_size=16).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(h, "little")))
    bound = 0.5 / dim
    return rng.uniform(-bound, bound, size=dim)


class EmbeddingTable:
    """Frozen |V| x d table; row i depends only on (token i, seed, d)."""

    def __init__(self, vocab: Vocabulary, seed: int = 0, dim: int = 50):
        if dim <= 0:
            raise ValidationError("embedding dimension must be positive")
        self.vocab = vocab
        self.seed = seed
        self.dim = dim
        self.matrix = np.stack([token_vector(t, seed, dim) for t in vocab])
        self.matrix.setflags(write=False)
        self.frozen = True

    def lookup(self, tokens: Sequence[str]) -> np.ndarray:
        return self.matrix[self.vocab.ids(tokens)]

    def vector(self, token: str) -> np.ndarray:
        return self.matrix[self.vocab.id(token)]


def embed_mean(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    if len(tokens) == 0:
        raise EmptyInputError("cannot embed an empty token sequence")
    return table.lookup(tokens).mean(axis=0)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ShapeError(f"dimension mismatch {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise NumericalError("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))
