"""Candidate generation from an n-gram inverted index over entity names.

score(g, e) = tf(g in name(e)) * ln(N / df(g)), with N the number of
entity names and df(g) the number of names containing n-gram g.
"""

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import ParseError, ValidationError
from .text import tokenize


def ngrams(tokens: Sequence[str], n: int):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


class CandidateSet(NamedTuple):
    entities: tuple  # ((entity_id, score), ...) in descending score order
    mention: tuple

    def ids(self):
        return [e for e, _ in self.entities]

    def __len__(self):
        return len(self.entities)


@dataclass(frozen=True)
class InvertedIndex:
    postings: dict  # n-gram tuple -> ((entity_id, score), ...)
    names: dict  # entity_id -> tokenized name tuple
    n_docs: int

    def lookup(self, gram):
        return self.postings.get(tuple(gram), ())

    def save(self, path):
        payload = {
            "n_docs": self.n_docs,
            "names": {e: list(t) for e, t in self.names.items()},
            "postings": [[list(g), [[e, s] for e, s in p]] for g, p in self.postings.items()],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
            postings = {tuple(g): tuple((e, float(s)) for e, s in p) for g, p in payload["postings"]}
            names = {e: tuple(t) for e, t in payload["names"].items()}
            return cls(postings, names, int(payload["n_docs"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad index file: {exc}", path=path) from None


def build_index(kg) -> InvertedIndex:
    names = {e: tuple(tokenize(n)) for e, n in kg.entities.items()}
    names = {e: t for e, t in names.items() if t}
    tf = defaultdict(dict)
    for e, toks in names.items():
        counts = Counter(g for n in range(1, len(toks) + 1) for g in ngrams(toks, n))
        for g, c in counts.items():
            tf[g][e] = c
    N = len(names)
    postings = {}
    for g, per_entity in tf.items():
        idf = math.log(N / len(per_entity))
        posts = [(e, c * idf) for e, c in per_entity.items()]
        posts.sort(key=lambda p: (-p[1], p[0]))
        postings[g] = tuple(posts)
    return InvertedIndex(postings, names, N)


def candidates(index: InvertedIndex, mention, limit: int = 50, early_stop: bool = True) -> CandidateSet:
    """Look up the mention's n-grams from the longest order down to unigrams.

    Each entity keeps its best score over all matching n-grams. With
    ``early_stop``, lower orders are skipped once an order produced an n-gram
    equal to some complete entity name. Ties rank an exact full-name match
    first, then by entity id.
    """
    tokens = tuple(getattr(mention, "tokens", mention))
    if not tokens:
        raise ValidationError("empty mention")
    if limit < 1:
        raise ValidationError("candidate limit must be >= 1")
    best = {}
    for n in range(len(tokens), 0, -1):
        exact = False
        for g in ngrams(tokens, n):
            for e, s in index.lookup(g):
                if s > best.get(e, -math.inf):
                    best[e] = s
                if index.names[e] == g:
                    exact = True
        if exact and early_stop:
            break
    ranked = sorted(best.items(), key=lambda p: (-p[1], index.names[p[0]] != tokens, p[0]))[:limit]
    return CandidateSet(tuple(ranked), tokens)
