import dataclasses
import os

import pytest

from kgsqa.errors import ValidationError
from kgsqa.experiment import (ExperimentResult, config_from_mapping, parse_config, run_experiment,
                              run_seed, sweep_medians)
from kgsqa.toy import RELATIONS

SMALL = dict(embedding_dim=16, md_epochs=3, md_hidden=8, md_layers=1, rp_epochs=3, rp_hidden=12,
             qg_epochs=3, qg_hidden=12, qg_fact_dim=8, qg_attn_dim=8, qg_max_len=12)


def test_config_keys_and_coercion(tmp_path):
    (tmp_path / "e.cfg").write_text("kg.facts = f.tsv  # comment\nepochs.md = 7\nsweep.sizes = 5, 9\n"
                                    "embedding.dim=8\nmargin = 0.25\n")
    cfg = parse_config(tmp_path / "e.cfg", env={})
    assert cfg.kg_facts == str(tmp_path / "f.tsv")
    assert (cfg.md_epochs, cfg.sweep_sizes, cfg.embedding_dim, cfg.margin) == (7, (5, 9), 8, 0.25)
    assert cfg.k == 10 and cfg.n_negatives == 10 and cfg.p_neg == 0.5 and cfg.margin == 0.25


def test_seed_environment_override(tmp_path):
    (tmp_path / "e.cfg").write_text("seed = 3\nrepeats = 2\n")
    assert parse_config(tmp_path / "e.cfg", env={}).seeds() == [3, 4]
    assert parse_config(tmp_path / "e.cfg", env={"KGSQA_SEED": "11"}).seeds() == [11, 12]


def test_config_errors(tmp_path):
    with pytest.raises(ValidationError, match="bogus"):
        config_from_mapping({"bogus": 1})
    with pytest.raises(ValidationError):
        config_from_mapping({"mode": "sideways"})
    with pytest.raises(ValidationError):
        config_from_mapping({"seed": "x"})
    (tmp_path / "e.cfg").write_text("no equals sign\n")
    with pytest.raises(ValidationError, match=":1"):
        parse_config(tmp_path / "e.cfg", env={})


def test_override_paths_are_cwd_relative(tmp_path, monkeypatch):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "e.cfg").write_text("out_dir = runs\n")
    monkeypatch.chdir(tmp_path)
    assert parse_config("sub/e.cfg", env={}).out_dir == str(tmp_path / "sub" / "runs")
    cfg = parse_config("sub/e.cfg", env={}, overrides={"out_dir": "o"})
    assert cfg.out_dir == str(tmp_path / "o")


@pytest.fixture(scope="module")
def small_run(toy_cfg, toy_res):
    cfg = dataclasses.replace(toy_cfg, **SMALL)
    return cfg, run_seed(toy_res, cfg, "film", 0, sweep_sizes=(5, 20, 10**6))


def test_run_seed_pairs_modes_and_keeps_target_out(small_run):
    cfg, (results, sweep) = small_run
    assert set(results) == {"none", "raw-sentences", "qg"}
    tests = [[r["question"] for r in res.rows] for res in results.values()]
    assert tests[0] == tests[1] == tests[2]
    for res in results.values():
        gold_target = [q for q in res.train if q.domain == "film" and q.provenance == "gold"]
        assert gold_target == []
        assert all(q.domain == "film" for q in res.train if q.provenance == "synthetic")
        assert res.rp.total == len(res.rows)
    assert len(results["none"].synthetic) == 0 and len(results["qg"].synthetic) > 0
    assert results["qg"].bleu is not None and len(results["qg"].bleu) == 4
    sizes = [r["size"] for r in sweep]
    assert sizes[:2] == [5, 20] and sizes[-1] == len(results["qg"].synthetic)


def test_relation_accuracy_bounds_end_to_end(small_run):
    _, (results, _) = small_run
    for res in results.values():
        assert res.e2e.micro <= res.rp.micro


def test_unknown_mode(toy_cfg, toy_res):
    with pytest.raises(ValidationError):
        run_seed(toy_res, toy_cfg, "film", 0, modes=("sideways",))


def test_run_experiment_reports_are_deterministic(tmp_path, toy_cfg, toy_res):
    cfg = dataclasses.replace(toy_cfg, target_domain="astronomy", repeats=2, **SMALL)
    a = run_experiment(cfg, modes=("none",), out_dir=str(tmp_path / "a"), res=toy_res)
    run_experiment(cfg, modes=("none",), out_dir=str(tmp_path / "b"), res=toy_res)
    for name in ("report.txt", "report.csv", "predictions.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert os.path.exists(tmp_path / "a" / "seed1" / "rp_none.ckpt")
    assert isinstance(a, ExperimentResult) and a.seeds == [0, 1] and a.p_value("none") is None
    assert "astronomy" in RELATIONS


def test_sweep_medians():
    rows = [{"size": 50, "rp_accuracy": v} for v in (10.0, 30.0, 20.0)]
    rows += [{"size": 5, "rp_accuracy": 1.0}]
    assert sweep_medians(rows) == [(5, 1.0), (50, 20.0)]


def test_early_stop_flag():
    assert config_from_mapping({}).early_stop is True
    assert config_from_mapping({"early_stop": "false"}).early_stop is False
