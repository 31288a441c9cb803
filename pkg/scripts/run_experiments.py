"""Run the desk-scale experiments and write one CSV per experiment.

    python scripts/run_experiments.py --out results/ [--seed 2024] [--workers 4] [--only mc_cherry]
"""

import argparse
from dataclasses import replace
from pathlib import Path

from gwsubtree.cli import ExperimentConfig, run

EXPERIMENTS = {
    "oracle_cherry_n8": ExperimentConfig("oracle", dist="geom", pattern="(()())", n=8),
    "mc_cherry_n8": ExperimentConfig("mc", dist="geom", pattern="(()())", n=8, reps=100_000),
    "mc_cherry_scan": ExperimentConfig("mc", dist="geom", pattern="(()())", ns=(500, 1000, 2000), reps=10_000),
    "mc_path_scan": ExperimentConfig("mc", dist="geom", pattern="((()))", ns=(500, 2000), reps=10_000),
    "clt_cherry": ExperimentConfig("clt-test", dist="geom", pattern="(()())", n=2000, reps=10_000,
                                   standardization="self"),
    "truncation_cherry": ExperimentConfig("truncation", dist="geom", pattern="(()())", n=1000, reps=10_000,
                                          plist=(1, 5, 20, 100)),
    "heavy_tail_1": ExperimentConfig("heavy-tail", example=1, ns=(1000, 10_000, 100_000), reps=2000),
    "heavy_tail_2": ExperimentConfig("heavy-tail", example=2, ns=(1000, 3000, 10_000, 30_000), reps=2000),
    "degeneracy_cherry": ExperimentConfig("degeneracy", dist="geom", pattern="(()())", bound=8),
    "degeneracy_path": ExperimentConfig("degeneracy", dist="geom", pattern="((()))", bound=8),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", action="append", choices=sorted(EXPERIMENTS))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.only or EXPERIMENTS:
        config = replace(EXPERIMENTS[name], seed=args.seed, workers=args.workers, format="csv")
        status, text = run(config)
        if status:
            raise SystemExit(f"{name}: exit {status}: {text}")
        (args.out / f"{name}.csv").write_text(text)
        print(f"{name}: wrote {args.out / (name + '.csv')}")


if __name__ == "__main__":
    main()
