"""Knowledge graph loading and structural queries."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

from .errors import FormatError, ParseError, ReferentialError

log = logging.getLogger(__name__)


def relation_domain(label: str) -> str:
    """Return the domain of a dotted relation label (its first segment)."""
    if not label or "." not in label:
        raise FormatError(f"relation label {label!r} has no '.'")
    domain = label.split(".", 1)[0]
    if not domain:
        raise FormatError(f"relation label {label!r} has an empty domain")
    return domain


@dataclass(frozen=True)
class Relation:
    id: str
    label: str

    @property
    def domain(self) -> str:
        return relation_domain(self.label)


class Fact(NamedTuple):
    subject: str
    relation: str  # relation id
    object: str


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    entities: Mapping[str, str]
    relations: Mapping[str, Relation]
    facts: tuple
    index_by_subject: Mapping[str, tuple] = field(repr=False)
    popularity_counts: Mapping[str, int] = field(repr=False)
    relation_domains: Mapping[str, frozenset] = field(repr=False)
    duplicates_dropped: int = 0

    @classmethod
    def build(cls, entities: Mapping[str, str], relations: Iterable[Relation],
              facts: Iterable) -> "KnowledgeGraph":
        rel_table = {}
        seen_labels = set()
        for rel in relations:
            relation_domain(rel.label)
            if rel.id in rel_table:
                raise ReferentialError(f"duplicate relation id {rel.id!r}")
            if rel.label in seen_labels:
                raise ReferentialError(f"duplicate relation label {rel.label!r}")
            seen_labels.add(rel.label)
            rel_table[rel.id] = rel

        ent_table = dict(entities)
        for eid in ent_table:
            if not eid:
                raise ReferentialError("empty entity id")

        unique = []
        seen = set()
        dropped = 0
        for f in facts:
            f = Fact(*f)
            for e in (f.subject, f.object):
                if e not in ent_table:
                    raise ReferentialError(f"fact {tuple(f)} references unknown entity {e!r}")
            if f.relation not in rel_table:
                raise ReferentialError(f"fact {tuple(f)} references unknown relation {f.relation!r}")
            if f in seen:
                dropped += 1
                continue
            seen.add(f)
            unique.append(f)
        return cls._index(ent_table, rel_table, unique, dropped)

    @classmethod
    def _index(cls, ent_table, rel_table, facts, dropped):
        by_subject = defaultdict(list)
        pop = defaultdict(int)
        for i, f in enumerate(facts):
            by_subject[f.subject].append(i)
            pop[f.subject] += 1
            pop[f.object] += 1
        domains = defaultdict(set)
        for rel in rel_table.values():
            domains[rel.domain].add(rel.id)
        return cls(
            entities=MappingProxyType(ent_table),
            relations=MappingProxyType(rel_table),
            facts=tuple(facts),
            index_by_subject=MappingProxyType({k: tuple(v) for k, v in by_subject.items()}),
            popularity_counts=MappingProxyType(dict(pop)),
            relation_domains=MappingProxyType({k: frozenset(v) for k, v in sorted(domains.items())}),
            duplicates_dropped=dropped,
        )

    # -- queries -------------------------------------------------------------

    def name(self, entity: str) -> str:
        return self.entities[entity]

    def relation(self, rel_id: str) -> Relation:
        return self.relations[rel_id]

    def relation_by_label(self, label: str) -> Relation:
        for rel in self.relations.values():
            if rel.label == label:
                return rel
        raise KeyError(label)

    def facts_of(self, subject: str) -> list:
        return [self.facts[i] for i in self.index_by_subject.get(subject, ())]

    def facts_with(self, subject: str, rel_id: str) -> list:
        return [f for f in self.facts_of(subject) if f.relation == rel_id]

    def popularity(self, entity: str) -> int:
        return self.popularity_counts.get(entity, 0)

    def domain_of(self, rel_id: str) -> str:
        return self.relations[rel_id].domain

    def relations_in_domain(self, domain: str) -> frozenset:
        return self.relation_domains.get(domain, frozenset())

    @property
    def domains(self) -> list:
        return list(self.relation_domains)


def relations_for_entities(kg: KnowledgeGraph, entities: Iterable[str]) -> set:
    """Relations of all facts headed by any of ``entities`` (as relation ids)."""
    out = set()
    for e in entities:
        for i in kg.index_by_subject.get(e, ()):
            out.add(kg.facts[i].relation)
    return out


def popularity(kg: KnowledgeGraph, entity: str) -> int:
    return kg.popularity(entity)


def _read_tsv(path, ncols):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != ncols:
                raise ParseError(f"expected {ncols} tab-separated columns, got {len(cols)}",
                                 line=lineno, path=path)
            rows.append((lineno, cols))
    return rows


def load_kg(facts_path, names_path, labels_path) -> KnowledgeGraph:
    entities = {}
    for lineno, (eid, name) in _read_tsv(names_path, 2):
        if not eid:
            raise ParseError("empty entity id", line=lineno, path=names_path)
        entities[eid] = name

    relations = []
    for lineno, (rid, label) in _read_tsv(labels_path, 2):
        try:
            relation_domain(label)
        except FormatError as exc:
            raise ParseError(str(exc), line=lineno, path=labels_path) from None
        relations.append(Relation(rid, label))

    facts = []
    for lineno, (s, r, o) in _read_tsv(facts_path, 3):
        facts.append(Fact(s, r, o))

    kg = KnowledgeGraph.build(entities, relations, facts)
    if kg.duplicates_dropped:
        log.warning("dropped %d duplicate fact lines from %s", kg.duplicates_dropped, facts_path)
    return kg
