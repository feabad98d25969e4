"""Accuracy reports, BLEU and the paired t-test."""

import math
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyInputError, NumericalError, ValidationError


@dataclass
class EvalReport:
    micro: float
    macro: float
    per_domain: dict  # domain -> (correct, total, accuracy %)
    correct: int
    total: int
    bleu: tuple = None
    p_value: float = None
    item_correct: list = field(default_factory=list, repr=False)

    def rows(self):
        yield ("micro", self.correct, self.total, self.micro)
        yield ("macro", "", "", self.macro)
        for d, (c, n, acc) in self.per_domain.items():
            yield (d, c, n, acc)


def report_from_correct(correct: Sequence[bool], domains: Sequence[str]) -> EvalReport:
    """Micro = correct/total; macro = unweighted mean of per-domain accuracies."""
    if len(correct) != len(domains):
        raise ValidationError(f"{len(correct)} outcomes but {len(domains)} domains")
    if not correct:
        raise EmptyInputError("nothing to evaluate")
    per = OrderedDict()
    for d in sorted(set(domains)):
        per[d] = [0, 0]
    for ok, d in zip(correct, domains):
        per[d][0] += int(bool(ok))
        per[d][1] += 1
    per_domain = OrderedDict((d, (c, n, 100.0 * c / n)) for d, (c, n) in per.items())
    n_ok = sum(int(bool(c)) for c in correct)
    macro = float(np.mean([acc for _, _, acc in per_domain.values()]))
    return EvalReport(100.0 * n_ok / len(correct), macro, per_domain, n_ok, len(correct),
                      item_correct=[bool(c) for c in correct])


def evaluate(predictions, gold) -> EvalReport:
    """Top-1 accuracy of (subject, relation) interpretations.

    ``predictions`` holds objects with ``subject`` and ``relation`` (a
    Relation or an id) or None for unanswered questions; ``gold`` holds
    (subject, relation_id, domain) triples.
    """
    if len(predictions) != len(gold):
        raise ValidationError(f"{len(predictions)} predictions for {len(gold)} gold items")
    correct = []
    for p, (s, r, _) in zip(predictions, gold):
        if p is None:
            correct.append(False)
            continue
        rel = getattr(p.relation, "id", p.relation)
        correct.append(p.subject == s and rel == r)
    return report_from_correct(correct, [g[2] for g in gold])


# -- BLEU ---------------------------------------------------------------------

def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(cand_len, references):
    return min((abs(len(r) - cand_len), len(r)) for r in references)[1]


def _bleu_from_stats(matches, totals, cand_len, ref_len, max_n):
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    scores = []
    log_sum = 0.0
    for n in range(max_n):
        if matches[n] == 0 or totals[n] == 0:
            # without smoothing a zero precision zeroes this and every higher order
            scores.extend([0.0] * (max_n - n))
            break
        log_sum += math.log(matches[n] / totals[n])
        scores.append(bp * math.exp(log_sum / (n + 1)))
    return tuple(scores)


def _stats(candidate, references, max_n):
    matches, totals = [0] * max_n, [0] * max_n
    for n in range(1, max_n + 1):
        cand = _ngram_counts(candidate, n)
        max_ref = Counter()
        for ref in references:
            for g, c in _ngram_counts(ref, n).items():
                max_ref[g] = max(max_ref[g], c)
        matches[n - 1] = sum(min(c, max_ref[g]) for g, c in cand.items())
        totals[n - 1] = max(len(candidate) - n + 1, 0)
    return matches, totals


def bleu(candidate, references, max_n=4) -> tuple:
    """Sentence BLEU-1..max_n (no smoothing) with the closest-length brevity penalty."""
    candidate = list(candidate)
    if not candidate:
        raise EmptyInputError("empty candidate")
    if not references:
        raise ValidationError("at least one reference is required")
    matches, totals = _stats(candidate, references, max_n)
    ref_len = _closest_ref_len(len(candidate), references)
    return _bleu_from_stats(matches, totals, len(candidate), ref_len, max_n)


def corpus_bleu(candidates, references_list, max_n=4) -> tuple:
    """Corpus BLEU: clipped counts and lengths summed over all segments first."""
    if len(candidates) != len(references_list):
        raise ValidationError("one reference list per candidate is required")
    if not candidates:
        raise EmptyInputError("no candidates")
    matches, totals = [0] * max_n, [0] * max_n
    c_len = r_len = 0
    for cand, refs in zip(candidates, references_list):
        cand = list(cand)
        if not cand:
            raise EmptyInputError("empty candidate")
        m, t = _stats(cand, refs, max_n)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        c_len += len(cand)
        r_len += _closest_ref_len(len(cand), refs)
    return _bleu_from_stats(matches, totals, c_len, r_len, max_n)


# -- significance ---------------------------------------------------------------

def _betacf(a, b, x, max_iter=300, tol=1e-15):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise NumericalError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a, b, x, y=None):
    """Regularized incomplete beta I_x(a, b).

    ``y`` may pass 1 - x when the caller can form it without cancellation.
    """
    if a <= 0 or b <= 0:
        raise ValidationError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValidationError("betainc needs 0 <= x <= 1")
    y = 1.0 - x if y is None else y
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, y) / b


def student_t_sf2(t, df):
    """Two-sided tail probability P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))


class TTestResult(NamedTuple):
    t: float
    p: float
    degenerate: bool = False


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on per-item scores.

    Zero variance in the differences is flagged as degenerate: identical
    inputs give (0, 1); a constant non-zero shift gives (+-inf, 0).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("paired samples must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise ValidationError("paired t-test needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = float(mean / (sd / math.sqrt(n)))
    return TTestResult(t, float(student_t_sf2(t, n - 1)), False)
