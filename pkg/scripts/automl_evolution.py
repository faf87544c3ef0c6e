"""Forward-selection traces and prefix retraining on the combine-then-drop data.

    python scripts/automl_evolution.py --sizes 10000 --irrelevant 200 --budget 10 --seeds 0 1 2 3 4
"""

import argparse
import time

from catsynth.automl import run_automl_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000])
    ap.add_argument("--irrelevant", type=int, default=200)
    ap.add_argument("--budget", type=int, default=10)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--retrain", action="store_true", help="also refit linear and FM models on every prefix")
    args = ap.parse_args()

    for seed in args.seeds:
        t0 = time.perf_counter()
        traces, report = run_automl_experiment(args.sizes, seed, n_irrelevant=args.irrelevant,
                                               budget=args.budget, retrain=args.retrain)
        for size, trace in traces.items():
            irr = sum(n.startswith("IRR") for n in trace.names)
            print(f"seed={seed} n={size} irr={irr}/{len(trace)} final={trace.steps[-1].mean_score:.4f}")
            print("   " + " ".join(trace.names))
        for r in report.rows:
            print(f"   {r.config_id:<16} {r.model:<6} auc={r.auc:.4f} acc={r.accuracy:.4f}")
        print(f"   {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
