import json
import struct

import numpy as np
import pytest

from sfplab import cli
from sfplab.config import ARTIFACT_VERSION, RunConfig
from sfplab.errors import ConfigError
from sfplab.model import load_checkpoint, save_checkpoint

SMALL = {"d": 16, "heads": 2, "layers": 1, "max_seq_len": 32, "n_sentences": 64, "n_pairs": 16,
         "batch_size": 16, "epochs": 1, "pretrain_epochs": 1, "bench_sentences": 32}


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "cfg.json").write_text(json.dumps(SMALL), encoding="utf-8")
    assert cli.main(["gen-data", "--config", "cfg.json"]) == 0
    return tmp_path


def run(*args):
    return cli.main([args[0], "--config", "cfg.json", *args[1:]])


def stamp_ok(d, cfg=None):
    cfg = cfg or RunConfig.from_dict(SMALL)
    assert d["artifact_version"] == ARTIFACT_VERSION
    assert d["seed"] == cfg.seed
    assert len(d["config_hash"]) == 16


def test_pipeline(workdir):
    assert (workdir / "corpus.txt").read_text().count("\n") == 64
    assert run("pretrain", "--set", "out=pre.ckpt") == 0
    assert run("train", "--mode", "sfp", "--set", "checkpoint=pre.ckpt", "--set", "out=sfp.ckpt",
               "--set", "log=steps.jsonl") == 0
    assert run("eval", "--set", "checkpoint=sfp.ckpt", "--set", "out=eval.json") == 0
    ev = json.loads((workdir / "eval.json").read_text())
    assert np.isfinite(ev["spearman"]) and ev["n_pairs"] == 16
    stamp_ok(ev)
    assert run("diagnose", "--set", "checkpoint=sfp.ckpt", "--set", "out=diag.json") == 0
    diag = json.loads((workdir / "diag.json").read_text())
    for key in ("spearman", "alignment", "uniformity", "ratio1", "ratio2", "tok_sim", "kappa", "sv_entropy",
                "n_positive_pairs", "n_negative_pairs"):
        assert key in diag
    stamp_ok(diag)

    lines = (workdir / "steps.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    assert header["config"]["mode"] == "sfp" and "config_hash" in header
    steps = [json.loads(x) for x in lines[1:]]
    assert len(steps) == 4
    assert steps[-1]["forward_passes_cum"] == 64


def test_bench_report(workdir):
    assert run("bench", "--set", "out=bench.json") == 0
    rep = json.loads((workdir / "bench.json").read_text())
    assert rep["a"]["mode"] == "sfp" and rep["b"]["mode"] == "two-pass-dropout"
    assert rep["ratios"]["forward_sequences"] == 0.5
    for key in ("forward_sequences", "forwarded_tokens", "estimated_macs", "activation_floats", "wall_clock_ms"):
        assert key in rep["a"]
    stamp_ok(rep)


def test_embed_header(workdir):
    assert run("pretrain", "--set", "out=pre.ckpt") == 0
    (workdir / "in.txt").write_text("the dog chases the sheep\nthe cook stirs the soup\na boat\n")
    assert run("embed", "--set", "checkpoint=pre.ckpt", "--set", "input=in.txt", "--set", "out=emb.bin") == 0
    data = (workdir / "emb.bin").read_bytes()
    assert struct.unpack_from("<II", data) == (3, 16)
    assert len(data) == 8 + 3 * 16 * 4
    assert cli.read_embeddings(workdir / "emb.bin").shape == (3, 16)


def test_byte_identical_checkpoints(workdir):
    for name in ("a", "b"):
        assert run("pretrain", "--set", f"out={name}.ckpt") == 0
        assert run("train", "--mode", "two-pass-dropout", "--set", f"checkpoint={name}.ckpt",
                   "--set", f"out={name}2.ckpt") == 0
    assert (workdir / "a2.ckpt").read_bytes() == (workdir / "b2.ckpt").read_bytes()


def test_exit_codes(workdir, capsys):
    assert run("eval", "--set", "checkpoint=missing.ckpt") == 2
    assert "missing.ckpt" in capsys.readouterr().err
    assert run("train", "--set", "no_such_key=1") == 2
    assert "no_such_key" in capsys.readouterr().err
    assert run("train", "--set", "tau=0", "--set", "out=x.ckpt") == 2
    assert cli.main(["bogus"]) == 2
    assert run("pretrain", "--set", "out=pre.ckpt") == 0
    params, mcfg, vocab, _ = load_checkpoint(workdir / "pre.ckpt")
    params["final_norm"] = np.zeros_like(params["final_norm"])
    save_checkpoint(workdir / "zero.ckpt", params, mcfg, vocab)
    capsys.readouterr()
    # every embedding is the zero vector, so cosine is undefined
    assert run("eval", "--set", "checkpoint=zero.ckpt") == 3
    assert "zero" in capsys.readouterr().err

def test_run_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"d": "wide"})
    p = tmp_path / "c.json"
    p.write_text('{"seed": 4}')
    cfg = RunConfig.load(str(p), ["lr=0.01", "prefix_kind=eol"])
    assert (cfg.seed, cfg.lr, cfg.prefix_kind) == (4, 0.01, "eol")
    assert cfg.config_hash() == RunConfig.load(str(p), ["lr=0.01", "prefix_kind=eol"]).config_hash()
    assert cfg.config_hash() != RunConfig().config_hash()
