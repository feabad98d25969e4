"""End-to-end question answering: MD -> CG -> RP -> answer selection."""

import time
from dataclasses import dataclass, field
from typing import NamedTuple

from .candidates import CandidateSet, candidates
from .errors import EmptyInputError, KgsqaError, NoAnswerError
from .kg import Fact, Relation
from .mention import MentionSpan, decode_mention, tag, tag_batch
from .relation import predict_relation, prepare_question
from .text import tokenize


class Interpretation(NamedTuple):
    subject: str
    relation: Relation


@dataclass(frozen=True)
class AnswerFact:
    fact: Fact
    objects: tuple = ()  # every object sharing (subject, relation), load order


@dataclass
class Trace:
    """Intermediate outputs of one ``answer`` call, kept for reporting."""

    tokens: list = field(default_factory=list)
    mention: MentionSpan = None
    candidates: CandidateSet = None
    relation: Relation = None
    timing: dict = field(default_factory=dict)


def select_subject(c_s, relation: Relation, kg) -> str:
    """Most popular candidate heading a fact with ``relation``; ties by smallest id."""
    ids = c_s.ids() if hasattr(c_s, "ids") else list(c_s)
    eligible = [e for e in ids if kg.facts_with(e, relation.id)]
    if not eligible:
        raise NoAnswerError(f"no candidate heads a {relation.label} fact", stage="AS")
    return min(eligible, key=lambda e: (-kg.popularity(e), e))


def _staged(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except KgsqaError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise


def answer(question: str, md_model, rp_model, index, kg, candidate_limit=50, early_stop=True,
           trace: Trace = None):
    """Answer a simple question; returns ``(Interpretation, AnswerFact)``.

    Errors carry ``stage`` in {"MD", "CG", "RP", "AS"}.
    """
    trace = trace if trace is not None else Trace()
    tokens = tokenize(question)
    if not tokens:
        raise EmptyInputError("empty question", stage="MD")
    trace.tokens = tokens

    t0 = time.perf_counter()
    span = _staged("MD", lambda: decode_mention(tag(md_model, tokens), tokens))
    t1 = time.perf_counter()
    c_s = _staged("CG", candidates, index, span, limit=candidate_limit, early_stop=early_stop)
    t2 = time.perf_counter()
    trace.mention, trace.candidates = span, c_s
    if len(c_s) == 0:
        raise NoAnswerError(f"no entity matches mention {span.text!r}", stage="CG")
    q = prepare_question(tokens, (span.start, span.end))
    rel = _staged("RP", predict_relation, rp_model, q, c_s, kg)
    t3 = time.perf_counter()
    trace.relation = rel
    subject = _staged("AS", select_subject, c_s, rel, kg)
    facts = kg.facts_with(subject, rel.id)
    t4 = time.perf_counter()
    trace.timing = {"MD": t1 - t0, "CG": t2 - t1, "RP": t3 - t2, "AS": t4 - t3}
    return Interpretation(subject, rel), AnswerFact(facts[0], tuple(f.object for f in facts))


class BatchAnswer(NamedTuple):
    interpretation: Interpretation  # None when some stage failed
    mention: MentionSpan
    relation: Relation = None  # RP output, kept even when answer selection fails
    error_stage: str = None


def answer_batch(token_lists, md_model, rp_model, index, kg, candidate_limit=50,
                 early_stop=True) -> list:
    """Answer pre-tokenized questions, tagging them as one batch.

    Stage failures are recorded per question instead of raised.
    """
    out = []
    for tokens, tags in zip(token_lists, tag_batch(md_model, [list(t) for t in token_lists])):
        span = decode_mention(tags, tokens)
        rel = None
        try:
            c_s = _staged("CG", candidates, index, span, limit=candidate_limit,
                          early_stop=early_stop)
            if len(c_s) == 0:
                raise NoAnswerError(f"no entity matches mention {span.text!r}", stage="CG")
            q = prepare_question(tokens, (span.start, span.end))
            rel = _staged("RP", predict_relation, rp_model, q, c_s, kg)
            subject = _staged("AS", select_subject, c_s, rel, kg)
        except NoAnswerError as exc:
            out.append(BatchAnswer(None, span, rel, exc.stage))
            continue
        out.append(BatchAnswer(Interpretation(subject, rel), span, rel))
    return out


def answer_json(question, md_model, rp_model, index, kg, timing=True, **kwargs):
    """JSON-ready dict for the ``answer`` CLI command."""
    trace = Trace()
    interp, fact = answer(question, md_model, rp_model, index, kg, trace=trace, **kwargs)
    out = {
        "question": question,
        "mention": trace.mention.text,
        "candidates": [{"id": e, "name": kg.name(e), "score": round(s, 6)}
                       for e, s in trace.candidates.entities[:5]],
        "relation": interp.relation.label,
        "subject": {"id": interp.subject, "name": kg.name(interp.subject)},
        "objects": [{"id": o, "name": kg.name(o)} for o in fact.objects],
    }
    if timing:
        out["timing_ms"] = {k: round(v * 1000, 3) for k, v in trace.timing.items()}
    return out
