"""Command-line entry point: ``sfplab <subcommand> [--config path] [--set key=value ...]``.

Exit codes: 0 success, 2 usage or input problems, 3 numeric degeneracies.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import struct
import sys
from pathlib import Path

import numpy as np

from . import bench, datagen
from .config import RunConfig
from .errors import DegenerateError, SfpError
from .metrics import PromptConfig, diagnose, embed_sentences, evaluate_sts, read_eval_file
from .model import init_params, load_checkpoint, save_checkpoint
from .tokenizer import build_vocab
from .trainer import Trainer, config_dict

log = logging.getLogger("sfplab")

SUBCOMMANDS = ("gen-data", "pretrain", "train", "eval", "diagnose", "bench", "embed")


def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [line for line in text.split("\n") if line.strip()]


def _write_json(obj, out: str):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require(cfg: RunConfig, *keys):
    for k in keys:
        if not getattr(cfg, k):
            raise SfpError(f"config key {k!r} must be set for this subcommand")


def _prompt(cfg: RunConfig) -> PromptConfig:
    return PromptConfig(cfg.prompt_style, cfg.prefix_kind, cfg.suffix_text)


def _model_state(cfg: RunConfig):
    """Parameters, model config and vocab from ``checkpoint`` or a fresh init over ``corpus``."""
    if cfg.checkpoint:
        params, mcfg, vocab, _ = load_checkpoint(cfg.checkpoint)
        if vocab is None:
            raise SfpError(f"{cfg.checkpoint}: manifest carries no vocabulary")
        return params, mcfg, vocab
    vocab = build_vocab(_read_lines(cfg.corpus), cfg.min_freq, [cfg.suffix_text])
    mcfg = cfg.model_config(len(vocab))
    return init_params(mcfg, cfg.seed), mcfg, vocab


@contextlib.contextmanager
def _step_log(cfg: RunConfig):
    if not cfg.log:
        yield None
        return
    with open(cfg.log, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config": cfg.to_dict(), **cfg.stamp()}, sort_keys=True) + "\n")
        yield fh


def cmd_gen_data(cfg: RunConfig):
    spec = datagen.SynthSpec(count=cfg.n_sentences, n_pairs=cfg.n_pairs, seed=cfg.seed)
    datagen.write_data(spec, cfg.corpus, cfg.eval_file)
    _write_json({"corpus": cfg.corpus, "eval_file": cfg.eval_file, "sentences": cfg.n_sentences,
                 "pairs": cfg.n_pairs, **cfg.stamp()}, cfg.out if cfg.out.endswith(".json") else "")


def cmd_pretrain(cfg: RunConfig):
    _require(cfg, "out")
    sentences = _read_lines(cfg.corpus)
    params, mcfg, vocab = _model_state(cfg)
    with _step_log(cfg) as fh:
        trainer = Trainer(params, mcfg, vocab, cfg.train_config(), fh)
        losses = [trainer.pretrain_epoch(sentences, e) for e in range(cfg.pretrain_epochs)]
    save_checkpoint(cfg.out, trainer.params, mcfg, vocab, {"run_config": cfg.to_dict(), **cfg.stamp()})
    log.info("pretrain epoch losses %s", losses)


def cmd_train(cfg: RunConfig):
    _require(cfg, "out")
    sentences = _read_lines(cfg.corpus)
    params, mcfg, vocab = _model_state(cfg)
    tcfg = cfg.train_config()
    with _step_log(cfg) as fh:
        trainer = Trainer(params, mcfg, vocab, tcfg, fh)
        losses = [trainer.contrastive_epoch(sentences, e) for e in range(tcfg.epochs)]
    save_checkpoint(cfg.out, trainer.params, mcfg, vocab,
                    {"run_config": cfg.to_dict(), "train_config": config_dict(tcfg), **cfg.stamp()})
    log.info("%s epoch losses %s", tcfg.mode, losses)


def cmd_eval(cfg: RunConfig):
    _require(cfg, "checkpoint")
    params, mcfg, vocab = _model_state(cfg)
    res = evaluate_sts(params, mcfg, vocab, read_eval_file(cfg.eval_file), _prompt(cfg))
    _write_json({"spearman": res.spearman, "n_pairs": len(res.cosines), "cosines": res.cosines,
                 **cfg.stamp()}, cfg.out)


def cmd_diagnose(cfg: RunConfig):
    _require(cfg, "checkpoint")
    params, mcfg, vocab = _model_state(cfg)
    report = diagnose(params, mcfg, vocab, read_eval_file(cfg.eval_file), _prompt(cfg), cfg.positive_threshold)
    _write_json({**report.to_json_dict(), **cfg.stamp()}, cfg.out)


def cmd_bench(cfg: RunConfig):
    sentences = _read_lines(cfg.corpus)[: cfg.bench_sentences]
    params, mcfg, vocab = _model_state(cfg)
    result = bench.compare(params, vocab, mcfg, cfg.train_config(), mcfg, cfg.train_config(cfg.bench_against),
                           sentences)
    _write_json({**result, **cfg.stamp()}, cfg.out)


def write_embeddings(path, emb: np.ndarray):
    emb = np.ascontiguousarray(emb, dtype="<f4")
    Path(path).write_bytes(struct.pack("<II", emb.shape[0], emb.shape[1]) + emb.tobytes())


def read_embeddings(path) -> np.ndarray:
    data = Path(path).read_bytes()
    count, dim = struct.unpack_from("<II", data, 0)
    return np.frombuffer(data, dtype="<f4", count=count * dim, offset=8).reshape(count, dim)


def cmd_embed(cfg: RunConfig):
    _require(cfg, "checkpoint", "input", "out")
    params, mcfg, vocab = _model_state(cfg)
    lines = Path(cfg.input).read_text(encoding="utf-8").splitlines()
    emb = embed_sentences(params, mcfg, vocab, lines, _prompt(cfg)) if lines else np.zeros((0, mcfg.d))
    write_embeddings(cfg.out, emb)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "diagnose": cmd_diagnose,
    "bench": cmd_bench,
    "embed": cmd_embed,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfplab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--mode", help="shorthand for --set mode=...")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = list(args.set)
    if args.mode:
        overrides.append(f"mode={args.mode}")
    try:
        cfg = RunConfig.load(args.config, overrides)
        COMMANDS[args.command](cfg)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SfpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
