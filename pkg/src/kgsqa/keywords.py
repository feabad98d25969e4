"""Relation keywords by distant supervision over an entity-linked corpus.

For every fact (s, r, o) the candidate sentences are those in s's document
that link o plus those in o's document that link s. The sentence whose mean
word embedding is closest (cosine) to the relation label's is kept. The
kept sentences of a relation form one document, and the top-k tf-idf words
of that document over the collection of relation documents become the
relation's keywords.
"""

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import EmptyInputError, ParseError, ReferentialError
from .text import cosine, embed_mean, tokenize_relation_label

log = logging.getLogger(__name__)


class Sentence(NamedTuple):
    tokens: tuple
    links: frozenset


class LinkedDocument(NamedTuple):
    entity: str
    sentences: tuple


@dataclass(frozen=True)
class RelationDocument:
    relation: object  # kg.Relation
    sentences: tuple  # one selected sentence (token tuple) per covered fact
    facts: tuple = ()  # the covered facts, parallel to ``sentences``

    @property
    def empty(self):
        return not self.sentences


def load_corpus(path, kg=None) -> dict:
    """Read the JSON-lines corpus into ``{entity_id: LinkedDocument}``."""
    docs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entity = obj["entity"]
                sents = tuple(
                    Sentence(tuple(t.lower() for t in s["tokens"]), frozenset(s.get("links", ())))
                    for s in obj["sentences"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad corpus record: {exc}", line=lineno, path=path) from None
            if kg is not None:
                for e in {entity}.union(*(s.links for s in sents)):
                    if e not in kg.entities:
                        raise ReferentialError(f"{path}:{lineno}: unknown entity {e!r}")
            if entity in docs:
                docs[entity] = LinkedDocument(entity, docs[entity].sentences + sents)
            else:
                docs[entity] = LinkedDocument(entity, sents)
    return docs


def extract_sentences(fact, corpus) -> list:
    """Distant-supervision candidates for ``fact`` (deduplicated, document order)."""
    out = []
    seen = set()
    for doc_entity, other in ((fact.subject, fact.object), (fact.object, fact.subject)):
        doc = corpus.get(doc_entity)
        if doc is None:
            continue
        for s in doc.sentences:
            if other in s.links and s.tokens not in seen:
                seen.add(s.tokens)
                out.append(s.tokens)
    return out


def best_sentence(S: Sequence, relation, table):
    """The sentence with the highest cos(e(s), e(label)); first one wins ties."""
    if not S:
        raise EmptyInputError("no candidate sentences")
    target = embed_mean(tokenize_relation_label(relation.label), table)
    best, best_score = None, -math.inf
    for s in S:
        sc = cosine(embed_mean(s, table), target)
        if sc > best_score:
            best, best_score = s, sc
    return best


def build_relation_docs(kg, corpus, relations, table) -> list:
    """One RelationDocument per requested relation id, in sorted id order."""
    wanted = sorted(set(relations))
    by_rel = {r: [] for r in wanted}
    for f in kg.facts:
        if f.relation in by_rel:
            by_rel[f.relation].append(f)
    docs = []
    for rid in wanted:
        rel = kg.relations[rid]
        sents, covered = [], []
        for f in by_rel[rid]:
            S = extract_sentences(f, corpus)
            if S:
                sents.append(best_sentence(S, rel, table))
                covered.append(f)
        if not sents:
            log.warning("relation %s has no corpus coverage", rel.label)
        docs.append(RelationDocument(rel, tuple(sents), tuple(covered)))
    return docs


def is_keyword_token(t, stoplist=()):
    return len(t) >= 2 and t.isalpha() and t == t.lower() and t not in stoplist


class RelationKeywordTable(dict):
    """relation label -> [(keyword, score), ...] in rank order."""

    def keywords(self, label):
        return [w for w, _ in self.get(label, ())]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for label in sorted(self):
                for word, sc in self[label]:
                    fh.write(f"{label}\t{word}\t{sc!r}\n")

    @classmethod
    def load(cls, path):
        table = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                cols = line.split("\t")
                if len(cols) != 3:
                    raise ParseError("expected relation, keyword, score", line=lineno, path=path)
                try:
                    table.setdefault(cols[0], []).append((cols[1], float(cols[2])))
                except ValueError:
                    raise ParseError(f"bad score {cols[2]!r}", line=lineno, path=path) from None
        return table


def extract_keywords(docs, k=10, stoplist=()) -> RelationKeywordTable:
    """Top-k words per relation by tf(t, S_r) * ln(N / df(t)) over non-empty relation documents."""
    live = [d for d in docs if not d.empty]
    if not live:
        raise EmptyInputError("every relation document is empty")
    tfs = {}
    df = Counter()
    for d in live:
        tf = Counter(t for s in d.sentences for t in s if is_keyword_token(t, stoplist))
        tfs[d.relation.label] = tf
        df.update(tf.keys())
    n_docs = len(live)
    table = RelationKeywordTable()
    for d in docs:
        label = d.relation.label
        if d.empty:
            table[label] = []
            continue
        scored = [(t, c * math.log(n_docs / df[t])) for t, c in tfs[label].items()]
        scored = [p for p in scored if p[1] > 0.0]
        scored.sort(key=lambda p: (-p[1], p[0]))
        table[label] = scored[:k]
    return table
