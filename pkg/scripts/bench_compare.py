"""Cost ledgers for sfp vs both two-pass baselines over one epoch.

Counts are closed-form; wall clock comes from an actual training epoch
unless --counts-only is given.
"""

import argparse
import json
from statistics import median

from sfplab import bench, datagen
from sfplab.model import ModelConfig, init_params
from sfplab.tokenizer import build_vocab, tokenize
from sfplab.trainer import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sentences", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--counts-only", action="store_true")
    args = ap.parse_args()

    corpus = datagen.gen_corpus(datagen.SynthSpec(count=args.sentences, seed=args.seed)).splitlines()
    vocab = build_vocab(corpus)
    cfg = ModelConfig(vocab_size=len(vocab))
    params = init_params(cfg, args.seed)
    print(f"{len(corpus)} sentences, median length {median(len(tokenize(s)) for s in corpus)}")
    report = {}
    for other in ("two-pass-dual", "two-pass-dropout"):
        res = bench.compare(params, vocab, cfg, TrainConfig(seed=args.seed), cfg,
                            TrainConfig(mode=other, seed=args.seed), corpus, run=not args.counts_only)
        report[other] = res
        print(f"sfp / {other}:")
        for key, value in res["ratios"].items():
            print(f"  {key:<18} {value:.4f}")
    print(json.dumps({k: {"sfp": v["a"], k: v["b"]} for k, v in report.items()}, indent=1))


if __name__ == "__main__":
    main()
