"""Command-line entry point: ``catsynth <command> --config file.json``.

Exit codes: 0 success, 2 invalid configuration or usage, 3 I/O failure,
4 internal error. All outputs of a command are written atomically at the end.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import __version__
from .automl import run_automl_experiment
from .benchmark import INTERACTION_CONFIGS, NOISE_LEVEL, base_config, run_interaction_benchmark
from .config import DatasetConfig, Distribution, FeatureSpec, _get, _int, _int_list, dataset_config_schema
from .dataset import (
    SIDECAR_FORMAT,
    ColumnMeta,
    Dataset,
    dumps_json,
    read_dataset,
    sha256_hex,
    sidecar_dict,
    to_csv_bytes,
    write_files_atomically,
)
from .errors import CatSynthError, ConfigError, UsageError
from .generator import AugmentSpec, augment_dataset, augment_seed, generate_dataset, regenerate, sample_feature
from .hashing import derive_column_seed
from .models import TrainConfig
from .sketch import ALGORITHMS, DEFAULT_CACHE_LIMIT, DEFAULT_PRECISION, BenchReport, bench_columns

COMMANDS = ("generate", "augment", "sketch-bench", "model-bench", "automl")
FORMATS = ("csv", "json", "both")
OUT_ENV = "CATSYNTH_OUT"
DEFAULT_OUT = "out"
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: str
    seed: Optional[int]
    out_dir: str
    fmt: str = "both"
    threads: int = 1
    name: Optional[str] = None


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found", path) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}", path) from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object", path)
    return obj


def _report_files(out: str, stem: str, fmt: str, csv_text: str, json_text: str) -> dict[str, bytes]:
    files = {}
    if fmt in ("csv", "both"):
        files[os.path.join(out, stem + ".csv")] = csv_text.encode("utf-8")
    if fmt in ("json", "both"):
        files[os.path.join(out, stem + ".json")] = json_text.encode("utf-8")
    return files


def _train_config(obj: dict, path: str) -> Optional[TrainConfig]:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigError("must be an object", path)
    try:
        return TrainConfig(**obj)
    except TypeError as e:
        raise ConfigError(str(e), path) from None


# --- commands ----------------------------------------------------------------


def cmd_generate(run: RunConfig) -> dict[str, bytes]:
    """Dataset CSV plus sidecar. A sidecar given as config is replayed, lineage included."""
    obj = load_json(run.config_path)
    t0 = time.perf_counter()
    if obj.get("format") == SIDECAR_FORMAT:
        if run.seed is not None:
            raise UsageError("--seed cannot override a sidecar; edit its config instead")
        d = regenerate(obj)
        config_dict, lineage = obj["config"], obj.get("lineage", [])
    else:
        config = DatasetConfig.from_dict(obj)
        if run.seed is not None:
            config = replace(config, seed=run.seed).validate()
        d = generate_dataset(config, threads=run.threads)
        config_dict, lineage = config.to_dict(), []
    csv_bytes = to_csv_bytes(d)
    name = run.name or "dataset"
    csv_path = os.path.join(run.out_dir, name + ".csv")
    files = {
        csv_path: csv_bytes,
        os.path.join(run.out_dir, name + ".json"): dumps_json(sidecar_dict(d, config_dict, csv_bytes, lineage)),
    }
    n_labels = len(d.aux_labels) + (d.labels is not None)
    print(f"rows={d.n_rows} columns={d.n_columns} labels={n_labels} elapsed={time.perf_counter() - t0:.2f}s")
    return files


def cmd_augment(run: RunConfig) -> dict[str, bytes]:
    """Apply an AugmentSpec to an existing dataset and extend its lineage."""
    obj = load_json(run.config_path)
    input_path = _get(obj, "input", "")
    if not isinstance(input_path, str):
        raise ConfigError("must be a path string", "input")
    spec = AugmentSpec.from_dict(_get(obj, "augment", "", {}))
    try:
        with open(input_path, "rb") as fh:
            input_bytes = fh.read()
        d, sidecar = read_dataset(input_path)
    except FileNotFoundError as e:
        raise ConfigError(f"input not found: {e.filename}", "input") from None
    t0 = time.perf_counter()
    lineage = list(sidecar.get("lineage", []))
    master = run.seed if run.seed is not None else int(sidecar["seed"])
    step_seed = augment_seed(master, len(lineage))
    out = augment_dataset(d, spec, step_seed)
    lineage.append({"spec": spec.to_dict(), "seed": step_seed, "input_sha256": sha256_hex(input_bytes)})
    csv_bytes = to_csv_bytes(out)
    name = run.name or os.path.splitext(os.path.basename(input_path))[0] + "_aug"
    print(f"rows={out.n_rows} columns={d.n_columns}->{out.n_columns} elapsed={time.perf_counter() - t0:.2f}s")
    return {
        os.path.join(run.out_dir, name + ".csv"): csv_bytes,
        os.path.join(run.out_dir, name + ".json"): dumps_json(sidecar_dict(out, sidecar.get("config"), csv_bytes, lineage)),
    }


def grid_datasets(grid: dict, master_seed: int):
    """One single-column dataset per (cardinality, seed) grid point.

    ``mode`` "sampled" draws ``n_rows`` codes from the named distribution;
    "distinct" streams every code ``0..c-1`` once in shuffled order.
    """
    cards = _int_list(_get(grid, "cardinalities", "grid"), "grid.cardinalities")
    seeds = _int_list(_get(grid, "seeds", "grid", [0]), "grid.seeds")
    mode = _get(grid, "mode", "grid", "sampled")
    if mode not in ("sampled", "distinct"):
        raise ConfigError(f"unknown mode {mode!r}", "grid.mode")
    n_rows = _int(_get(grid, "n_rows", "grid", 10_000), "grid.n_rows", 1)
    dist = Distribution.from_dict(_get(grid, "distribution", "grid", {"kind": "uniform"}), "grid.distribution")
    for c in cards:
        if c < 1:
            raise ConfigError("cardinalities must be >= 1", "grid.cardinalities")
        for s in seeds:
            name = f"card{c}_seed{s}"
            col_seed = derive_column_seed(master_seed, s, 0)
            if mode == "distinct":
                col = np.random.default_rng(col_seed).permutation(c).astype(np.int64)
            else:
                spec = FeatureSpec(name, c, dist)
                spec.validate("grid")
                col = sample_feature(spec, n_rows, col_seed)
            yield s, Dataset((col,), (ColumnMeta(name, c, "feature", {"mode": mode}),), col.size, master_seed)


def cmd_sketch_bench(run: RunConfig) -> dict[str, bytes]:
    obj = load_json(run.config_path)
    algorithms = tuple(_get(obj, "algorithms", "", list(ALGORITHMS)))
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}", "algorithms")
    p = _int(_get(obj, "p", "", DEFAULT_PRECISION), "p", 4)
    cache_limit = _int(_get(obj, "cache_limit", "", DEFAULT_CACHE_LIMIT), "cache_limit", 0)
    repeats = _int(_get(obj, "repeats", "", 3), "repeats", 1)
    hash_seed = _int(_get(obj, "hash_seed", "", 0), "hash_seed", 0)
    seed = run.seed if run.seed is not None else _int(_get(obj, "seed", "", 0), "seed", 0)
    grid, paths = obj.get("grid"), obj.get("files")
    if (grid is None) == (paths is None):
        raise ConfigError("give exactly one of 'grid' or 'files'", "grid")
    t0 = time.perf_counter()
    report = BenchReport()
    if grid is not None:
        if not isinstance(grid, dict):
            raise ConfigError("must be an object", "grid")
        for s, d in grid_datasets(grid, seed):
            # each grid seed also gets its own hash function
            report.extend(bench_columns(d, algorithms, p, cache_limit, repeats, hash_seed + s))
    else:
        for i, path in enumerate(paths):
            try:
                d, _ = read_dataset(path)
            except FileNotFoundError:
                raise ConfigError("file not found", f"files[{i}]") from None
            stem = os.path.splitext(os.path.basename(path))[0]
            report.extend(bench_columns(d, algorithms, p, cache_limit, repeats, hash_seed, prefix=stem + "/"))
    summary = report.summary()
    print(f"rows={len(report.rows)} elapsed={time.perf_counter() - t0:.2f}s")
    for alg, s in summary.items():
        print(f"{alg}: median_time_ns={s['time_ns_quantiles']['0.5']:.0f} max_rel_error={s['rel_error_quantiles']['1.0']:.5f}")
    files = _report_files(run.out_dir, "sketch_report", run.fmt, report.to_csv(), report.to_json())
    files[os.path.join(run.out_dir, "sketch_summary.json")] = dumps_json(summary)
    return files


def cmd_model_bench(run: RunConfig) -> dict[str, bytes]:
    obj = load_json(run.config_path)
    seed = run.seed if run.seed is not None else _int(_get(obj, "seed", "", 0), "seed", 0)
    if "base" in obj:
        base = replace(DatasetConfig.from_dict(obj["base"]), seed=seed).validate()
    else:
        params = dict(_get(obj, "base_params", "", {}))
        if "irrelevant_cardinality" in params:
            params["irrelevant_cardinality"] = tuple(params["irrelevant_cardinality"])
        try:
            base = base_config(seed=seed, **params)
        except TypeError as e:
            raise ConfigError(str(e), "base_params") from None
    ids = _int_list(_get(obj, "configs", "", list(INTERACTION_CONFIGS)), "configs")
    for i in ids:
        if i not in INTERACTION_CONFIGS:
            raise ConfigError(f"unknown config id {i}", "configs")
    noise = float(_get(obj, "noise", "", NOISE_LEVEL))
    train_cfg = _train_config(obj.get("train"), "train")
    dump = bool(_get(obj, "predictions", "", False))
    t0 = time.perf_counter()
    report = run_interaction_benchmark(base, seed, {i: INTERACTION_CONFIGS[i] for i in ids}, noise, train_cfg,
                                       keep_predictions=dump, threads=run.threads)
    print(f"rows={len(report.rows)} elapsed={time.perf_counter() - t0:.2f}s")
    for cid in ids:
        lin, fm = report.get(str(cid), "linear"), report.get(str(cid), "fm")
        print(f"config {cid}: auc linear={lin.auc:.4f} fm={fm.auc:.4f}")
    files = _report_files(run.out_dir, "model_metrics", run.fmt, report.to_csv(), report.to_json())
    if dump:
        files[os.path.join(run.out_dir, "model_predictions.csv")] = report.predictions_csv().encode("utf-8")
    return files


def cmd_automl(run: RunConfig) -> dict[str, bytes]:
    obj = load_json(run.config_path)
    seed = run.seed if run.seed is not None else _int(_get(obj, "seed", "", 0), "seed", 0)
    sizes = _int_list(_get(obj, "sizes", ""), "sizes")
    if not sizes or min(sizes) < 8:
        raise ConfigError("need at least one size >= 8", "sizes")
    budget = _int(_get(obj, "budget", ""), "budget", 1)
    kwargs = dict(
        n_irrelevant=_int(_get(obj, "n_irrelevant", "", 900), "n_irrelevant", 0),
        noise=float(_get(obj, "noise", "", 0.2)),
        relevant_cardinality=_int(_get(obj, "relevant_cardinality", "", 3), "relevant_cardinality", 2),
        retrain=bool(_get(obj, "retrain", "", True)),
        train_cfg=_train_config(obj.get("train"), "train"),
    )
    t0 = time.perf_counter()
    traces, report = run_automl_experiment(sizes, seed, budget=budget, threads=run.threads, **kwargs)
    files = {}
    for size, trace in traces.items():
        print(f"n={size}: {' '.join(trace.names)}")
        files.update(_report_files(run.out_dir, f"trace_n{size}", run.fmt, trace.to_csv(), trace.to_json()))
    if kwargs["retrain"]:
        files.update(_report_files(run.out_dir, "prefix_metrics", run.fmt, report.to_csv(), report.to_json()))
    print(f"elapsed={time.perf_counter() - t0:.2f}s")
    return files


HANDLERS = {
    "generate": cmd_generate,
    "augment": cmd_augment,
    "sketch-bench": cmd_sketch_bench,
    "model-bench": cmd_model_bench,
    "automl": cmd_automl,
}


def schemas() -> dict:
    ints = {"type": "array", "items": {"type": "integer", "minimum": 0}}
    dataset = dataset_config_schema()
    return {
        "generate": {"oneOf": [dataset, {"type": "object", "required": ["format", "config"],
                                         "properties": {"format": {"const": SIDECAR_FORMAT}}}]},
        "augment": {"type": "object", "required": ["input"], "properties": {
            "input": {"type": "string"},
            "augment": {"type": "object", "properties": {
                "correlations": {"type": "array"}, "combinations": {"type": "array"},
                "drop": ints, "noise": {"type": "array"}}}}},
        "sketch-bench": {"type": "object", "properties": {
            "grid": {"type": "object", "required": ["cardinalities"], "properties": {
                "cardinalities": ints, "seeds": ints, "n_rows": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["sampled", "distinct"]}, "distribution": {"type": "object"}}},
            "files": {"type": "array", "items": {"type": "string"}},
            "algorithms": {"type": "array", "items": {"enum": list(ALGORITHMS)}},
            "p": {"type": "integer", "minimum": 4, "maximum": 18},
            "cache_limit": {"type": "integer", "minimum": 0},
            "repeats": {"type": "integer", "minimum": 1},
            "hash_seed": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer", "minimum": 0}}},
        "model-bench": {"type": "object", "properties": {
            "base": dataset, "base_params": {"type": "object"}, "configs": ints,
            "noise": {"type": "number"}, "train": {"type": "object"}, "predictions": {"type": "boolean"},
            "seed": {"type": "integer", "minimum": 0}}},
        "automl": {"type": "object", "required": ["sizes", "budget"], "properties": {
            "sizes": ints, "budget": {"type": "integer", "minimum": 1},
            "n_irrelevant": {"type": "integer", "minimum": 0}, "noise": {"type": "number"},
            "relevant_cardinality": {"type": "integer", "minimum": 2}, "retrain": {"type": "boolean"},
            "train": {"type": "object"}, "seed": {"type": "integer", "minimum": 0}}},
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catsynth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="store_true", help="print version info as JSON and exit")
    ap.add_argument("--schema", action="store_true", help="print the config JSON schemas and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (generate also accepts a sidecar)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--format", choices=FORMATS, default="both", help="report format")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--name", default=None, help="output file stem for datasets")
    return ap


def run_command(run: RunConfig) -> dict[str, bytes]:
    if run.seed is not None and not 0 <= run.seed < 1 << 64:
        raise ConfigError("must be an unsigned 64-bit integer", "--seed")
    if run.threads < 1:
        raise ConfigError("must be >= 1", "--threads")
    files = HANDLERS[run.command](run)
    write_files_atomically(files)
    for path in files:
        print(f"wrote {path}")
    return files


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.version:
        print(json.dumps({"name": "catsynth", "version": __version__}))
        return EXIT_OK
    if args.schema:
        print(json.dumps(schemas(), indent=1))
        return EXIT_OK
    if args.command is None:
        build_parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    out = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    run = RunConfig(args.command, args.config, args.seed, out, args.format, args.threads, args.name)
    try:
        run_command(run)
    except CatSynthError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
