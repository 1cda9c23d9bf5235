"""Pretrain, tune in every mode, and compare diagnostics before/after sfp tuning.

    python3 scripts/run_study.py --seeds 0 1 2 --out study.json
    python3 scripts/run_study.py --seeds 0 --set lr=3e-4 --set batch_size=128
"""

import argparse
import json
import time

from sfplab.study import run_seed


def parse_overrides(items):
    out = {}
    for item in items:
        key, _, raw = item.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--pretrain-epochs", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=2)
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--modes", nargs="+", default=["sfp", "two-pass-dual", "two-pass-dropout"])
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="TrainConfig override")
    ap.add_argument("--out", help="write all reports as JSON here")
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        t0 = time.perf_counter()
        r = run_seed(seed, args.pretrain_epochs, args.epochs, tuple(args.modes), count=args.count,
                     **parse_overrides(args.set))
        b, a = r.before, r.after
        print(f"seed {seed} ({time.perf_counter() - t0:.0f}s)")
        print(f"  pretrain losses  {[round(x, 4) for x in r.pretrain_losses]}")
        for mode, ls in r.mode_losses.items():
            print(f"  {mode:<17} {[round(x, 4) for x in ls]}")
        if a.spearman is not None:
            for key in ("spearman", "alignment", "uniformity", "ratio1", "ratio2", "tok_sim", "kappa", "sv_entropy"):
                print(f"  {key:<11} {getattr(b, key):9.4f} -> {getattr(a, key):9.4f}")
        rows.append({"seed": seed, "pretrain_losses": r.pretrain_losses, "mode_losses": r.mode_losses,
                     "before": b.to_json_dict(), "after": a.to_json_dict()})
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
