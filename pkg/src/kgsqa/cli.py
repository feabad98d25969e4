"""Command-line entry point: ``kgsqa <command> --config experiment.cfg``.

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

import argparse
import json
import logging
import os
import sys

from .data import augment, md_examples, rp_examples, save_dataset, split_leave_one_out, split_standard
from .errors import KgsqaError, ValidationError
from .experiment import (MODES, load_resources, parse_config, qg_pairs, raw_sentence_pairs,
                         run_experiment, sweep_medians, target_facts, write_csv)
from .mention import MdModel, train_md
from .metrics import report_from_correct
from .pipeline import answer_batch, answer_json
from .qg import QgModel, synthesize_dataset, train_qg
from .relation import RpModel, train_rp

log = logging.getLogger("kgsqa")


def _overrides(pairs):
    out = {}
    for p in pairs or ():
        if "=" not in p:
            raise ValidationError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args):
    if not args.config:
        raise ValidationError("--config is required")
    return parse_config(args.config, overrides=_overrides(args.set))


def _split(res, cfg):
    if cfg.target_domain:
        return split_leave_one_out(res.dataset, cfg.target_domain, cfg.seed)
    return split_standard(res.dataset, cfg.seed)


def _out(args, cfg, default):
    path = args.out or os.path.join(cfg.out_dir, default)
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path


def cmd_make_toy(args):
    from .toy import write_toy
    paths = write_toy(args.out or "toy", seed=args.seed)
    print(paths["config"])


def cmd_build_index(args):
    cfg = _config(args)
    res = load_resources(cfg)
    path = _out(args, cfg, "index.tsv")
    res.index.save(path)
    print(path)


def cmd_extract_keywords(args):
    cfg = _config(args)
    res = load_resources(cfg)
    if not res.corpus:
        raise ValidationError("config has no corpus to extract keywords from")
    path = _out(args, cfg, "keywords.tsv")
    res.keywords(cfg.k).save(path)
    print(path)


def cmd_train_md(args):
    cfg = _config(args)
    res = load_resources(cfg)
    split = _split(res, cfg)
    model = train_md(md_examples(split.train), cfg.md_config(cfg.seed), res.table)
    path = _out(args, cfg, "md.ckpt")
    model.save(path)
    print(path)


def cmd_train_rp(args):
    from .data import load_dataset
    cfg = _config(args)
    res = load_resources(cfg)
    train = load_dataset(args.train, res.kg) if args.train else _split(res, cfg).train
    model = train_rp(rp_examples(train), res.kg, cfg.rp_config(cfg.seed), res.table)
    path = _out(args, cfg, "rp.ckpt")
    model.save(path)
    print(path)


def cmd_train_qg(args):
    cfg = _config(args)
    res = load_resources(cfg)
    split = _split(res, cfg)
    model = train_qg(qg_pairs(split.train, res, cfg.k), cfg.qg_config(cfg.seed), res.kg, res.table,
                     target_domain=cfg.target_domain,
                     validation=qg_pairs(split.validation, res, cfg.k))
    path = _out(args, cfg, "qg.ckpt")
    model.save(path)
    print(path)


def cmd_synthesize(args):
    """Write the training file for the configured mode: source gold rows + synthetic target rows."""
    cfg = _config(args)
    if not cfg.target_domain:
        raise ValidationError("synthesize needs a target_domain")
    res = load_resources(cfg)
    split = _split(res, cfg)
    facts = target_facts(split)
    if cfg.mode == "qg":
        if not args.qg:
            raise ValidationError("mode qg needs --qg CHECKPOINT")
        model = QgModel.load(args.qg, res.table)
        kw = res.keywords(cfg.k) if res.corpus else None
        pairs = [(g.tokens, f) for g, f in
                 synthesize_dataset(model, facts, res.kg, res.types, kw, cfg.target_domain)
                 if g.tokens]
    elif cfg.mode == "raw-sentences":
        pairs = raw_sentence_pairs(res, facts)
    else:
        pairs = []
    aug = augment(split, pairs, res.kg)
    path = _out(args, cfg, f"train_{cfg.mode}.tsv")
    save_dataset(path, aug.train)
    print(path)


def _evaluate_checkpoints(args, cfg):
    res = load_resources(cfg)
    split = _split(res, cfg)
    md = MdModel.load(args.md, res.table)
    rp = RpModel.load(args.rp, res.table)
    answers = answer_batch([q.tokens for q in split.test], md, rp, res.index, res.kg,
                           candidate_limit=cfg.limits, early_stop=cfg.early_stop)
    rp_ok = [a.relation is not None and a.relation.id == q.fact.relation
             for q, a in zip(split.test, answers)]
    ok = [r and a.interpretation is not None and a.interpretation.subject == q.fact.subject
          for q, a, r in zip(split.test, answers, rp_ok)]
    domains = [q.domain for q in split.test]
    rp_rep, rep = report_from_correct(rp_ok, domains), report_from_correct(ok, domains)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    rows = [{"question": q.text, "gold_subject": q.fact.subject, "gold_relation": q.fact.relation,
             "domain": q.domain,
             "pred_subject": a.interpretation.subject if a.interpretation else "",
             "pred_relation": a.relation.id if a.relation else "",
             "rp_correct": int(r), "correct": int(c), "error_stage": a.error_stage or ""}
            for q, a, r, c in zip(split.test, answers, rp_ok, ok)]
    write_csv(os.path.join(out_dir, "predictions.csv"), rows)
    lines = [f"{'':<12}{'RP acc':>9}{'QA acc':>9}"]
    lines.append(f"{'micro':<12}{rp_rep.micro:>9.2f}{rep.micro:>9.2f}")
    lines.append(f"{'macro':<12}{rp_rep.macro:>9.2f}{rep.macro:>9.2f}")
    for d in rep.per_domain:
        lines.append(f"{d:<12}{rp_rep.per_domain[d][2]:>9.2f}{rep.per_domain[d][2]:>9.2f}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)


def cmd_evaluate(args):
    cfg = _config(args)
    if args.md or args.rp:
        if not (args.md and args.rp):
            raise ValidationError("--md and --rp must be given together")
        return _evaluate_checkpoints(args, cfg)
    modes = tuple(args.modes.split(",")) if args.modes else None
    result = run_experiment(cfg, modes=modes, out_dir=args.out)
    sys.stdout.write(result.text_report())


def cmd_sweep(args):
    cfg = _config(args)
    if args.sizes:
        cfg.sweep_sizes = tuple(int(s) for s in args.sizes.split(","))
    result = run_experiment(cfg, modes=("none", "qg"), sweep=True, out_dir=args.out)
    for size, acc in sweep_medians(result.sweep):
        print(f"{size}\t{acc:.2f}")


def cmd_answer(args):
    cfg = _config(args)
    res = load_resources(cfg)
    md = MdModel.load(args.md, res.table)
    rp = RpModel.load(args.rp, res.table)
    out = answer_json(args.question, md, rp, res.index, res.kg, timing=not args.no_timing,
                      candidate_limit=cfg.limits, early_stop=cfg.early_stop)
    print(json.dumps(out, indent=2, sort_keys=True))


def cmd_gradcheck(args):
    from .gradchecks import CHECKS, run_checks
    names = args.only.split(",") if args.only else list(CHECKS)
    for n in names:
        if n not in CHECKS:
            raise ValidationError(f"unknown check {n!r}; choose from {sorted(CHECKS)}")
    failed = False
    for name, (worst, _) in run_checks(names, eps=args.eps).items():
        ok = worst < args.tol
        failed |= not ok
        print(f"{name:<10} max rel err {worst:.3e}  {'ok' if ok else 'FAIL'}")
    if failed:
        return 2


def build_parser():
    p = argparse.ArgumentParser(prog="kgsqa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help, out_help="output path"):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="key = value experiment file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", help=out_help)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("make-toy", cmd_make_toy, "write the bundled toy benchmark", "output directory")
    sp.add_argument("--seed", type=int, default=0)
    add("build-index", cmd_build_index, "build the n-gram entity index")
    add("extract-keywords", cmd_extract_keywords, "mine relation keywords from the corpus")
    add("train-md", cmd_train_md, "train the mention tagger")
    sp = add("train-rp", cmd_train_rp, "train the relation ranker")
    sp.add_argument("--train", help="training TSV (default: the configured split)")
    add("train-qg", cmd_train_qg, "train the question generator")
    sp = add("synthesize", cmd_synthesize, "write an augmented training file")
    sp.add_argument("--qg", help="question-generation checkpoint (mode qg)")
    sp = add("evaluate", cmd_evaluate, "run the experiment protocol or score checkpoints",
             "output directory")
    sp.add_argument("--md")
    sp.add_argument("--rp")
    sp.add_argument("--modes", help=f"comma-separated subset of {','.join(MODES)}")
    sp = add("sweep", cmd_sweep, "RP accuracy against the number of synthetic questions",
             "output directory")
    sp.add_argument("--sizes", help="comma-separated sizes")
    sp = add("answer", cmd_answer, "answer one question as JSON")
    sp.add_argument("question")
    sp.add_argument("--md", required=True)
    sp.add_argument("--rp", required=True)
    sp.add_argument("--no-timing", action="store_true", help="omit per-stage timing")
    sp = add("gradcheck", cmd_gradcheck, "finite-difference gradient checks")
    sp.add_argument("--eps", type=float, default=1e-5)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--only", help="comma-separated subset of md,rp,attention,qg")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args) or 0
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KgsqaError as exc:
        stage = f" [{exc.stage}]" if exc.stage else ""
        print(f"error{stage}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime failure
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
