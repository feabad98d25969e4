"""Question datasets: TSV IO, leave-one-domain-out splits and synthetic augmentation."""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParseError, ReferentialError, ValidationError
from .kg import Fact
from .mention import find_name_span, tags_for_span
from .relation import prepare_question
from .text import tokenize

log = logging.getLogger(__name__)

GOLD = "gold"
SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class AnnotatedQuestion:
    text: str
    tokens: tuple
    fact: Fact
    domain: str
    span: tuple = None  # (start, end) inclusive, or None when the name is not in the text
    provenance: str = GOLD


def annotate(text, fact, kg, provenance=GOLD) -> AnnotatedQuestion:
    fact = Fact(*fact)
    for e in (fact.subject, fact.object):
        if e not in kg.entities:
            raise ReferentialError(f"unknown entity {e!r}")
    if fact.relation not in kg.relations:
        raise ReferentialError(f"unknown relation {fact.relation!r}")
    tokens = tuple(tokenize(text))
    span = find_name_span(tokens, tokenize(kg.name(fact.subject)))
    return AnnotatedQuestion(text, tokens, fact, kg.domain_of(fact.relation), span, provenance)


def load_dataset(path, kg) -> list:
    """question \\t subject \\t relation \\t object [\\t provenance]."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) not in (4, 5):
                raise ParseError(f"expected 4 or 5 columns, got {len(cols)}", line=lineno, path=path)
            prov = cols[4] if len(cols) == 5 else GOLD
            try:
                q = annotate(cols[0], cols[1:4], kg, prov)
            except ReferentialError as exc:
                raise ReferentialError(f"{path}:{lineno}: {exc}") from None
            if not q.tokens:
                raise ParseError("empty question", line=lineno, path=path)
            out.append(q)
    return out


def save_dataset(path, questions, provenance=True):
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            cols = [q.text, q.fact.subject, q.fact.relation, q.fact.object]
            if provenance:
                cols.append(q.provenance)
            fh.write("\t".join(cols) + "\n")


def load_types(path) -> dict:
    """entity_id \\t type name."""
    types = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ParseError("expected entity id and type name", line=lineno, path=path)
            types[cols[0]] = cols[1]
    return types


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    target_domain: str = None
    seed: int = 0
    synthetic_added: int = field(default=0)

    def __len__(self):
        return len(self.train) + len(self.validation) + len(self.test)


def _shuffled(items, seed):
    order = np.random.default_rng(seed).permutation(len(items))
    return [items[i] for i in order]


def split_leave_one_out(data, target_domain, seed=0, val_fraction=0.1) -> DatasetSplit:
    """Target-domain questions become the test set; the rest is split train/validation."""
    domains = {q.domain for q in data}
    if target_domain not in domains:
        raise ValidationError(f"unknown target domain {target_domain!r}; have {sorted(domains)}")
    test = [q for q in data if q.domain == target_domain]
    rest = _shuffled([q for q in data if q.domain != target_domain], seed)
    n_val = int(round(val_fraction * len(rest)))
    return DatasetSplit(rest[n_val:], rest[:n_val], test, target_domain, seed)


def split_standard(data, seed=0, val_fraction=0.1, test_fraction=0.1) -> DatasetSplit:
    """Seeded random split over every domain (the seen-domain setting)."""
    if not data:
        raise ValidationError("empty dataset")
    items = _shuffled(list(data), seed)
    n_test = int(round(test_fraction * len(items)))
    n_val = int(round(val_fraction * len(items)))
    return DatasetSplit(items[n_test + n_val:], items[n_test:n_test + n_val], items[:n_test],
                        None, seed)


def augment(split: DatasetSplit, synthetic, kg) -> DatasetSplit:
    """Append synthetic target-domain (question, fact) pairs to the training set.

    A question may be a token sequence, a string, or anything with ``tokens``.
    """
    added = []
    for question, fact in synthetic:
        fact = Fact(*fact)
        if kg.domain_of(fact.relation) != split.target_domain:
            raise ValidationError(
                f"synthetic pair for {kg.relations[fact.relation].label} is outside the target "
                f"domain {split.target_domain!r}")
        toks = getattr(question, "tokens", question)
        text = toks if isinstance(toks, str) else " ".join(toks)
        added.append(annotate(text, fact, kg, SYNTHETIC))
    return replace(split, train=list(split.train) + added,
                   synthetic_added=split.synthetic_added + len(added))


def md_examples(questions):
    """(tokens, E/C tags) for questions whose subject name was found."""
    return [(list(q.tokens), tags_for_span(len(q.tokens), q.span))
            for q in questions if q.span is not None]


def rp_examples(questions):
    """(placeholder question, relation id) for questions whose subject name was found."""
    out = [(prepare_question(q.tokens, q.span), q.fact.relation)
           for q in questions if q.span is not None]
    skipped = len(questions) - len(out)
    if skipped:
        log.info("skipped %d questions without a locatable subject name", skipped)
    return out
