"""Leave-one-domain-out experiments.

One protocol run for a (target domain, seed) pair:

  1. split: target-domain questions -> test, the rest -> train/validation
  2. mention tagger trained on the source-domain training questions
  3. synthetic target-domain questions, depending on the mode:
       none           nothing
       raw-sentences  each target fact paired with its best corpus sentence
       qg             keyword extraction + question generator trained on source pairs
  4. relation ranker trained on source questions + synthetic ones
  5. the full pipeline answers the target-domain test questions

All modes of one seed share the split, the tagger and the ranker's seed, so
per-question outcomes are paired across modes.
"""

import csv
import dataclasses
import logging
import os
import statistics
from dataclasses import dataclass, field

import numpy as np

from .candidates import build_index
from .data import (DatasetSplit, augment, load_dataset, load_types, md_examples, rp_examples,
                   save_dataset, split_leave_one_out)
from .errors import KgsqaError, ValidationError
from .keywords import build_relation_docs, extract_keywords, load_corpus
from .kg import load_kg
from .mention import MdConfig, train_md
from .metrics import corpus_bleu, paired_t_test, report_from_correct
from .pipeline import answer_batch
from .qg import QgConfig, assemble_contexts, synthesize_dataset, train_qg
from .relation import RpConfig, train_rp
from .text import EmbeddingTable, Vocabulary, tokenize, tokenize_relation_label

log = logging.getLogger(__name__)

MODES = ("none", "raw-sentences", "qg")
SEED_ENV = "KGSQA_SEED"


@dataclass
class ExperimentConfig:
    kg_facts: str = None
    kg_names: str = None
    kg_labels: str = None
    dataset: str = None
    corpus: str = None
    types: str = None
    target_domain: str = None
    mode: str = "qg"
    seed: int = 0
    repeats: int = 1
    k: int = 10
    margin: float = 0.1
    p_neg: float = 0.5
    n_negatives: int = 10
    limits: int = 50
    early_stop: bool = True  # candidate generation stops at an exact-name order
    embedding_dim: int = 50
    embedding_seed: int = 0
    md_epochs: int = 30
    md_hidden: int = 24
    md_layers: int = 2
    md_dropout: float = 0.1
    md_lr: float = 1e-2
    md_batch: int = 32
    rp_epochs: int = 30
    rp_hidden: int = 64
    rp_lr: float = 1e-2
    rp_batch: int = 32
    qg_epochs: int = 80
    qg_hidden: int = 48
    qg_fact_dim: int = 32
    qg_attn_dim: int = 48
    qg_lr: float = 1e-2
    qg_batch: int = 32
    qg_max_len: int = 20
    qg_dropout: float = 0.3
    sweep_sizes: tuple = (50, 100, 200, 400, 800)
    out_dir: str = "runs"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.repeats < 1:
            raise ValidationError("repeats must be >= 1")

    def seeds(self):
        return [self.seed + i for i in range(self.repeats)]

    def md_config(self, seed):
        return MdConfig(hidden=self.md_hidden, layers=self.md_layers, dropout=self.md_dropout,
                        lr=self.md_lr, epochs=self.md_epochs, batch_size=self.md_batch, seed=seed)

    def rp_config(self, seed):
        return RpConfig(hidden=self.rp_hidden, lr=self.rp_lr, epochs=self.rp_epochs,
                        n_negatives=self.n_negatives, batch_size=self.rp_batch,
                        margin=self.margin, p_global=self.p_neg, seed=seed)

    def qg_config(self, seed):
        return QgConfig(fact_dim=self.qg_fact_dim, hidden=self.qg_hidden,
                        attn_dim=self.qg_attn_dim, out_dim=self.qg_hidden,
                        max_len=self.qg_max_len, lr=self.qg_lr, epochs=self.qg_epochs,
                        batch_size=self.qg_batch, seed=seed, k=self.k,
                        dropout=self.qg_dropout)


_PATH_KEYS = ("kg_facts", "kg_names", "kg_labels", "dataset", "corpus", "types", "out_dir")


def _field_name(key):
    """Config keys use dots: kg.facts, epochs.md (or md.epochs), embedding.dim, sweep.sizes."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    parts = key.strip().lower().replace("-", "_").split(".")
    for cand in ("_".join(parts), "_".join(reversed(parts))):
        if cand in names:
            return cand
    raise ValidationError(f"unknown config key {key!r}")


def _coerce(name, raw):
    default = next(f.default for f in dataclasses.fields(ExperimentConfig) if f.name == name)
    try:
        if name == "sweep_sizes":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValidationError(f"bad value {raw!r} for {name}") from None
    return raw


def config_from_mapping(mapping, base_dir=".", env=None) -> ExperimentConfig:
    values = {}
    for key, raw in mapping.items():
        name = _field_name(key)
        values[name] = _coerce(name, str(raw).strip())
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        values["seed"] = _coerce("seed", env[SEED_ENV])
    for name in _PATH_KEYS:
        if values.get(name) and not os.path.isabs(values[name]):
            values[name] = os.path.normpath(os.path.join(base_dir, values[name]))
    return ExperimentConfig(**values)


def parse_config(path, env=None, overrides=None) -> ExperimentConfig:
    """Read a ``key = value`` file ('#' comments); relative paths are relative to the file.

    ``overrides`` win over the file; their relative paths are taken from the cwd.
    """
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    for key, value in (overrides or {}).items():
        # command-line paths are relative to the working directory, not the file
        if _field_name(key) in _PATH_KEYS and value and not os.path.isabs(value):
            value = os.path.abspath(value)
        mapping[key] = value
    return config_from_mapping(mapping, os.path.dirname(os.path.abspath(path)), env)


# -- shared resources ------------------------------------------------------------

@dataclass
class Resources:
    kg: object
    dataset: list
    corpus: dict
    types: dict
    table: EmbeddingTable
    index: object
    _keywords: dict = field(default_factory=dict, repr=False)
    _relation_docs: list = field(default=None, repr=False)

    def relation_docs(self):
        if self._relation_docs is None:
            self._relation_docs = build_relation_docs(self.kg, self.corpus, self.kg.relations,
                                                      self.table)
        return self._relation_docs

    def keywords(self, k):
        if k not in self._keywords:
            self._keywords[k] = extract_keywords(self.relation_docs(), k=k)
        return self._keywords[k]


def build_vocabulary(kg, dataset=(), corpus=None, types=None) -> Vocabulary:
    """Every token the system can see, standing in for a pretrained vocabulary."""
    streams = [tokenize(n) for n in kg.entities.values()]
    streams += [tokenize_relation_label(r.label) for r in kg.relations.values()]
    streams += [q.tokens for q in dataset]
    if corpus:
        streams += [s.tokens for doc in corpus.values() for s in doc.sentences]
    if types:
        streams += [tokenize(t) for t in types.values()]
    return Vocabulary.build(streams)


def load_resources(cfg: ExperimentConfig) -> Resources:
    for key in ("kg_facts", "kg_names", "kg_labels", "dataset"):
        if not getattr(cfg, key):
            raise ValidationError(f"config is missing {key.replace('_', '.', 1)}")
    kg = load_kg(cfg.kg_facts, cfg.kg_names, cfg.kg_labels)
    dataset = load_dataset(cfg.dataset, kg)
    corpus = load_corpus(cfg.corpus, kg) if cfg.corpus else {}
    types = load_types(cfg.types) if cfg.types else {}
    table = EmbeddingTable(build_vocabulary(kg, dataset, corpus, types), cfg.embedding_seed,
                           cfg.embedding_dim)
    return Resources(kg, dataset, corpus, types, table, build_index(kg))


# -- one protocol run ----------------------------------------------------------------

@dataclass
class ModeResult:
    mode: str
    seed: int
    rp: object  # EvalReport over relation correctness
    e2e: object  # EvalReport over (subject, relation) correctness
    rows: list
    train: list
    synthetic: list = field(default_factory=list)
    bleu: tuple = None


def target_facts(split: DatasetSplit):
    """Distinct facts of the held-out questions, in test order."""
    return list(dict.fromkeys(q.fact for q in split.test))


def raw_sentence_pairs(res: Resources, facts):
    """Each fact with corpus coverage paired with its best sentence."""
    best = {}
    for doc in res.relation_docs():
        for f, s in zip(doc.facts, doc.sentences):
            best[f] = s
    return [(best[f], f) for f in facts if f in best]


def qg_pairs(questions, res: Resources, k):
    kw = res.keywords(k) if res.corpus else None
    return [(q.fact, assemble_contexts(q.fact, res.kg, res.types, kw, k), q.tokens)
            for q in questions]


def _evaluate(split, answers, mode, seed):
    rows, rp_ok, e2e_ok = [], [], []
    for i, (q, a) in enumerate(zip(split.test, answers)):
        rel = a.relation.id if a.relation is not None else ""
        subj = a.interpretation.subject if a.interpretation is not None else ""
        rp_ok.append(rel == q.fact.relation)
        e2e_ok.append(rp_ok[-1] and subj == q.fact.subject)
        rows.append({
            "mode": mode, "seed": seed, "index": i, "question": q.text,
            "gold_subject": q.fact.subject, "gold_relation": q.fact.relation, "domain": q.domain,
            "mention": " ".join(a.mention.tokens) if a.mention is not None else "",
            "pred_subject": subj, "pred_relation": rel,
            "rp_correct": int(rp_ok[-1]), "correct": int(e2e_ok[-1]),
            "error_stage": a.error_stage or "",
        })
    domains = [q.domain for q in split.test]
    return report_from_correct(rp_ok, domains), report_from_correct(e2e_ok, domains), rows


def _train_and_eval_rp(res, cfg, split, md, seed, mode, synthetic):
    aug = augment(split, synthetic, res.kg)
    rp = train_rp(rp_examples(aug.train), res.kg, cfg.rp_config(seed), res.table)
    answers = answer_batch([q.tokens for q in split.test], md, rp, res.index, res.kg,
                           candidate_limit=cfg.limits, early_stop=cfg.early_stop)
    rp_rep, e2e_rep, rows = _evaluate(split, answers, mode, seed)
    return ModeResult(mode, seed, rp_rep, e2e_rep, rows, aug.train, list(synthetic)), rp


def run_seed(res: Resources, cfg: ExperimentConfig, target, seed, modes=MODES,
             sweep_sizes=None, save_dir=None):
    """All requested modes (and optionally the size sweep) for one seed.

    Returns ``(results by mode, sweep rows)``.
    """
    for m in modes:
        if m not in MODES:
            raise ValidationError(f"unknown mode {m!r}")
    split = split_leave_one_out(res.dataset, target, seed)
    try:
        md = train_md(md_examples(split.train), cfg.md_config(seed), res.table)
    except KgsqaError as exc:
        exc.stage = exc.stage or "MD"
        raise
    facts = target_facts(split)

    synthetic = {"none": []}
    qg_model = None
    if "raw-sentences" in modes:
        synthetic["raw-sentences"] = raw_sentence_pairs(res, facts)
    if "qg" in modes or sweep_sizes:
        try:
            qg_model = train_qg(qg_pairs(split.train, res, cfg.k), cfg.qg_config(seed), res.kg,
                                res.table, target_domain=target,
                                validation=qg_pairs(split.validation, res, cfg.k))
            kw = res.keywords(cfg.k) if res.corpus else None
            generated = synthesize_dataset(qg_model, facts, res.kg, res.types, kw,
                                           target_domain=target)
        except KgsqaError as exc:
            exc.stage = exc.stage or "QG"
            raise
        synthetic["qg"] = [(g.tokens, f) for g, f in generated if g.tokens]

    results = {}
    models = {"md": md, "qg": qg_model}
    for mode in modes:
        results[mode], models[f"rp_{mode}"] = _train_and_eval_rp(
            res, cfg, split, md, seed, mode, synthetic[mode])
    if "qg" in results:
        refs = {}
        for q in split.test:
            refs.setdefault(q.fact, []).append(list(q.tokens))
        gen = [(list(t), refs[f]) for t, f in synthetic["qg"]]
        if gen:
            results["qg"].bleu = corpus_bleu([g for g, _ in gen], [r for _, r in gen])

    sweep = []
    if sweep_sizes:
        pool = synthetic["qg"]
        order = np.random.default_rng(seed).permutation(len(pool))
        pool = [pool[i] for i in order]
        for size in sorted({min(s, len(pool)) for s in sweep_sizes}):
            res_s, _ = _train_and_eval_rp(res, cfg, split, md, seed, "qg", pool[:size])
            sweep.append({"target": target, "seed": seed, "size": size,
                          "rp_accuracy": res_s.rp.micro, "accuracy": res_s.e2e.micro})

    if save_dir:
        _save_seed(save_dir, results, models, sweep)
    return results, sweep


def _save_seed(path, results, models, sweep):
    os.makedirs(path, exist_ok=True)
    for name, model in models.items():
        if model is not None:
            model.save(os.path.join(path, f"{name}.ckpt"))
    for mode, r in results.items():
        save_dataset(os.path.join(path, f"train_{mode}.tsv"), r.train)
        write_csv(os.path.join(path, f"predictions_{mode}.csv"), r.rows)


def write_csv(path, rows, fields=None):
    rows = list(rows)
    fields = fields or (list(rows[0]) if rows else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


# -- multi-seed runs and reports ------------------------------------------------------------

@dataclass
class ExperimentResult:
    target: str
    seeds: list
    by_mode: dict  # mode -> [ModeResult per seed]
    sweep: list = field(default_factory=list)

    def median_rp(self, mode):
        return statistics.median(r.rp.micro for r in self.by_mode[mode])

    def median_e2e(self, mode):
        return statistics.median(r.e2e.micro for r in self.by_mode[mode])

    def p_value(self, mode, baseline="none"):
        """Paired t-test on per-question RP correctness pooled over seeds."""
        if baseline not in self.by_mode or mode == baseline:
            return None
        a = [c for r in self.by_mode[mode] for c in r.rp.item_correct]
        b = [c for r in self.by_mode[baseline] for c in r.rp.item_correct]
        if len(a) < 2:
            return None
        return paired_t_test(np.array(a, float), np.array(b, float)).p

    def summary_rows(self):
        for mode, runs in self.by_mode.items():
            for r in runs:
                yield {"target": self.target, "mode": mode, "seed": r.seed, "n": r.rp.total,
                       "rp_accuracy": f"{r.rp.micro:.4f}", "accuracy": f"{r.e2e.micro:.4f}",
                       "synthetic": len(r.synthetic),
                       "bleu4": f"{r.bleu[3]:.4f}" if r.bleu else ""}
            p = self.p_value(mode)
            yield {"target": self.target, "mode": mode, "seed": "median", "n": runs[0].rp.total,
                   "rp_accuracy": f"{self.median_rp(mode):.4f}",
                   "accuracy": f"{self.median_e2e(mode):.4f}", "synthetic": "",
                   "bleu4": "" if p is None else f"p={p:.4g}"}

    def text_report(self):
        lines = [f"target domain: {self.target}", f"seeds: {' '.join(map(str, self.seeds))}", ""]
        lines.append(f"{'mode':<15}{'RP acc':>9}{'QA acc':>9}{'p vs none':>12}")
        for mode in self.by_mode:
            p = self.p_value(mode)
            lines.append(f"{mode:<15}{self.median_rp(mode):>9.2f}{self.median_e2e(mode):>9.2f}"
                         f"{'-' if p is None else format(p, '.4g'):>12}")
        qg_runs = self.by_mode.get("qg", [])
        bleus = [r.bleu for r in qg_runs if r.bleu]
        if bleus:
            med = [statistics.median(b[i] for b in bleus) for i in range(4)]
            lines += ["", "question generation BLEU-1..4 (median over seeds): "
                      + " ".join(f"{100 * v:.2f}" for v in med)]
        if self.sweep:
            lines += ["", "augmentation size sweep (median RP accuracy):"]
            for size, acc in sweep_medians(self.sweep):
                lines.append(f"  {size:>5}  {acc:6.2f}")
        return "\n".join(lines) + "\n"


def sweep_medians(sweep_rows):
    by_size = {}
    for r in sweep_rows:
        by_size.setdefault(r["size"], []).append(r["rp_accuracy"])
    return [(s, statistics.median(v)) for s, v in sorted(by_size.items())]


def run_experiment(cfg: ExperimentConfig, modes=None, sweep=False, out_dir=None,
                   res: Resources = None) -> ExperimentResult:
    """Run the configured target domain over ``cfg.repeats`` seeds and write reports.

    ``modes`` defaults to ``none`` plus the configured mode, so significance
    against the no-augmentation baseline is always available.
    """
    if not cfg.target_domain:
        raise ValidationError("config is missing target_domain")
    res = res or load_resources(cfg)
    if modes is None:
        modes = tuple(dict.fromkeys(("none", cfg.mode)))
    out_dir = out_dir or os.path.join(cfg.out_dir, cfg.target_domain)
    by_mode = {m: [] for m in modes}
    sweep_rows = []
    for seed in cfg.seeds():
        results, sw = run_seed(res, cfg, cfg.target_domain, seed, modes,
                               cfg.sweep_sizes if sweep else None,
                               save_dir=os.path.join(out_dir, f"seed{seed}"))
        for m in modes:
            by_mode[m].append(results[m])
        sweep_rows += sw
    result = ExperimentResult(cfg.target_domain, cfg.seeds(), by_mode, sweep_rows)
    write_reports(result, out_dir)
    return result


def write_reports(result: ExperimentResult, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(result.text_report())
    write_csv(os.path.join(out_dir, "report.csv"), result.summary_rows(),
              ["target", "mode", "seed", "n", "rp_accuracy", "accuracy", "synthetic", "bleu4"])
    write_csv(os.path.join(out_dir, "predictions.csv"),
              [row for runs in result.by_mode.values() for r in runs for row in r.rows])
    if result.sweep:
        write_csv(os.path.join(out_dir, "sweep.csv"),
                  [{k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()}
                   for r in result.sweep])
