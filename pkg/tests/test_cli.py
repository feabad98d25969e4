import json
import subprocess
import sys

import pytest

from kgsqa.cli import main

SMALL = ["embedding.dim=16", "md.epochs=3", "md.hidden=8", "md.layers=1", "rp.epochs=3",
         "rp.hidden=12", "qg.epochs=2", "qg.hidden=8", "qg.fact_dim=4", "qg.attn_dim=4"]


def sets(*extra):
    out = []
    for kv in SMALL + list(extra):
        out += ["--set", kv]
    return out


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["make-toy", "--out", str(d / "toy")]) == 0
    return d, str(d / "toy" / "experiment.cfg")


def test_exit_codes(toy, capsys):
    d, cfg = toy
    assert main(["build-index", "--config", str(d / "missing.cfg")]) == 1
    assert main(["train-md", "--config", cfg, "--set", "mode=sideways"]) == 1
    assert main(["train-md", "--config", cfg, "--set", "noequals"]) == 1
    assert main(["gradcheck", "--only", "nope"]) == 1
    assert main(["gradcheck", "--only", "rp", "--tol", "0"]) == 2  # nothing passes a zero tolerance
    assert main(["gradcheck", "--only", "rp,attention"]) == 0
    assert "ok" in capsys.readouterr().out


def test_train_and_answer(toy, capsys):
    d, cfg = toy
    out = str(d / "run")
    assert main(["train-md", "--config", cfg, "--out", f"{out}/md.ckpt"] + sets()) == 0
    assert main(["train-rp", "--config", cfg, "--out", f"{out}/rp.ckpt"] + sets()) == 0
    capsys.readouterr()
    args = ["answer", "who directed the godfather ?", "--config", cfg, "--md", f"{out}/md.ckpt",
            "--rp", f"{out}/rp.ckpt", "--no-timing"] + sets()
    assert main(args) == 0
    first = capsys.readouterr().out
    ans = json.loads(first)
    assert "timing_ms" not in ans
    assert {"question", "mention", "candidates", "relation", "subject", "objects"} <= set(ans)
    assert main(args) == 0
    assert capsys.readouterr().out == first
    assert main(["answer", "", "--config", cfg, "--md", f"{out}/md.ckpt", "--rp",
                 f"{out}/rp.ckpt"] + sets()) == 1


def test_synthesize_keeps_gold_target_rows_out(toy):
    d, cfg = toy
    out = d / "syn"
    assert main(["train-qg", "--config", cfg, "--out", str(out / "qg.ckpt")] + sets()) == 0
    assert main(["synthesize", "--config", cfg, "--qg", str(out / "qg.ckpt"),
                 "--out", str(out / "train_qg.tsv")] + sets()) == 0
    rows = [l.split("\t") for l in (out / "train_qg.tsv").read_text().splitlines()]
    film = [r for r in rows if r[2].startswith("film.")]
    assert film and all(r[4] == "synthetic" for r in film)
    assert main(["synthesize", "--config", cfg] + sets()) == 1  # qg mode needs --qg


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "kgsqa.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "answer" in r.stdout
