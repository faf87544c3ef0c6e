"""Wall time and error of exact, HLL and cached-HLL counting over a column grid.

    python scripts/sketch_grid.py --cardinalities 10 1000 100000 1000000 --seeds 10 --rows 1000000
"""

import argparse

from catsynth.dataset import ColumnMeta, Dataset
from catsynth.generator import sample_feature
from catsynth.config import Distribution, FeatureSpec
from catsynth.hashing import derive_column_seed
from catsynth.sketch import BenchReport, bench_columns


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cardinalities", type=int, nargs="+", default=[10, 100, 1000, 10_000, 100_000, 1_000_000])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--rows", type=int, default=1_000_000)
    ap.add_argument("--p", type=int, default=16)
    ap.add_argument("--cache-limit", type=int, default=1 << 16)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--distribution", default="uniform", choices=["uniform", "normal", "longtail", "bimodal"])
    args = ap.parse_args()

    report = BenchReport()
    for c in args.cardinalities:
        for s in range(args.seeds):
            col = sample_feature(FeatureSpec("x", c, Distribution(args.distribution)), args.rows, derive_column_seed(s, 0, 0))
            d = Dataset((col,), (ColumnMeta(f"card{c}_seed{s}", c),), args.rows)
            report.extend(bench_columns(d, p=args.p, cache_limit=args.cache_limit, repeats=args.repeats, hash_seed=s))
    print(f"{'card':>8} {'algorithm':<11} {'median ms':>10} {'max err':>9} {'exact rows':>10}")
    for c in args.cardinalities:
        rows = [r for r in report.rows if r.column.startswith(f"card{c}_")]
        for alg in ("exact_set", "hll", "cached_hll"):
            sub = [r for r in rows if r.algorithm == alg]
            times = sorted(r.time_ns for r in sub)
            print(f"{c:>8} {alg:<11} {times[len(times) // 2] / 1e6:10.2f} {max(r.rel_error for r in sub):9.5f} "
                  f"{sum(r.mode == 'exact' for r in sub):>10}")


if __name__ == "__main__":
    main()
