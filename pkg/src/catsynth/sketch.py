"""Distinct counting: exact set, HyperLogLog, and a cached HyperLogLog.

The cached counter keeps exact 64-bit item hashes until a user-given entry
budget would be exceeded, then replays them into a HyperLogLog sketch and
stays probabilistic from then on. Low-cardinality streams are therefore
counted exactly, while memory stays bounded by
``max(cache_limit entries, 2**p registers)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import MISSING, Dataset
from .errors import UsageError
from .hashing import item_hash, item_hash_array

DEFAULT_PRECISION = 16
DEFAULT_CACHE_LIMIT = 1 << 16
CHUNK = 1 << 16

ALGORITHMS = ("exact_set", "hll", "cached_hll")

_U64 = np.uint64


def _alpha(m: int) -> float:
    if m == 16:
        return 0.673
    if m == 32:
        return 0.697
    if m == 64:
        return 0.709
    return 0.7213 / (1.0 + 1.079 / m)


def _bit_length_u64(x: np.ndarray) -> np.ndarray:
    """Vectorized ``int.bit_length`` for uint64 arrays."""
    x = x.copy()
    n = np.zeros(x.shape, dtype=np.int64)
    for shift in (32, 16, 8, 4, 2, 1):
        big = x >= (_U64(1) << _U64(shift))
        n[big] += shift
        x[big] >>= _U64(shift)
    return n + (x > 0)


class HllSketch:
    """Plain HyperLogLog with ``2**p`` one-byte registers and 64-bit hashes.

    The register index is the top ``p`` bits of the hash; the register value
    is one plus the number of leading zeros in the remaining ``64 - p`` bits.
    """

    def __init__(self, p: int = DEFAULT_PRECISION, hash_seed: int = 0):
        if not 4 <= p <= 18:
            raise UsageError(f"precision must lie in [4, 18], got {p}")
        self.p = p
        self.hash_seed = hash_seed
        self.m = 1 << p
        self.registers = np.zeros(self.m, dtype=np.uint8)
        self._tail_bits = 64 - p
        self._tail_mask = (1 << self._tail_bits) - 1

    @property
    def max_register(self) -> int:
        return self._tail_bits + 1

    def insert_hash(self, h: int) -> None:
        tail = h & self._tail_mask
        rank = self._tail_bits - tail.bit_length() + 1
        j = h >> self._tail_bits
        if rank > self.registers[j]:
            self.registers[j] = rank

    def insert_hashes(self, hashes: np.ndarray) -> None:
        h = np.asarray(hashes, dtype=np.uint64)
        if h.size == 0:
            return
        idx = (h >> _U64(self._tail_bits)).astype(np.intp)
        tail = h & _U64(self._tail_mask)
        rank = (self._tail_bits + 1 - _bit_length_u64(tail)).astype(np.uint8)
        np.maximum.at(self.registers, idx, rank)

    def add(self, value: int) -> None:
        self.insert_hash(item_hash(value, self.hash_seed))

    def add_many(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.int64)
        for start in range(0, values.size, CHUNK):
            self.insert_hashes(item_hash_array(values[start:start + CHUNK], self.hash_seed))

    def estimate(self) -> float:
        m = self.m
        raw = _alpha(m) * m * m / np.ldexp(1.0, -self.registers.astype(np.int64)).sum()
        zeros = int(np.count_nonzero(self.registers == 0))
        if raw <= 2.5 * m and zeros > 0:
            return m * math.log(m / zeros)
        return float(raw)

    def merge(self, other: "HllSketch") -> "HllSketch":
        if self.p != other.p or self.hash_seed != other.hash_seed:
            raise UsageError("can only merge sketches with equal precision and hash seed")
        out = HllSketch(self.p, self.hash_seed)
        np.maximum(self.registers, other.registers, out=out.registers)
        return out

    def copy(self) -> "HllSketch":
        out = HllSketch(self.p, self.hash_seed)
        out.registers[:] = self.registers
        return out

    @property
    def memory_units(self) -> int:
        return self.m

    mode = "probabilistic"


def hll_insert(s: HllSketch, h: int) -> None:
    s.insert_hash(h)


def hll_estimate(s: HllSketch) -> float:
    return s.estimate()


def hll_merge(a: HllSketch, b: HllSketch) -> HllSketch:
    return a.merge(b)


class CachedCounter:
    """Exact below ``cache_limit`` distinct items, HyperLogLog above.

    The exact cache stores item hashes rather than raw values (the hash is a
    bijection for a fixed seed), so promotion replays the cache losslessly and
    the promoted sketch equals one fed the whole stream.
    """

    def __init__(self, cache_limit: int = DEFAULT_CACHE_LIMIT, p: int = DEFAULT_PRECISION, hash_seed: int = 0):
        if cache_limit < 0:
            raise UsageError("cache_limit must be >= 0")
        self.cache_limit = cache_limit
        self.p = p
        self.hash_seed = hash_seed
        self._exact: set[int] | None = set()
        self._sketch: HllSketch | None = None
        self.peak_entries = 0
        HllSketch(p)  # validate precision early

    @property
    def mode(self) -> str:
        return "exact" if self._exact is not None else "probabilistic"

    @property
    def sketch(self) -> HllSketch | None:
        return self._sketch

    def _promote(self, extra: Iterable[int] = ()) -> None:
        sketch = HllSketch(self.p, self.hash_seed)
        cached = np.fromiter(self._exact, dtype=np.uint64, count=len(self._exact))
        sketch.insert_hashes(cached)
        sketch.insert_hashes(np.fromiter(extra, dtype=np.uint64))
        self._exact = None
        self._sketch = sketch
        self.peak_entries = max(self.peak_entries, sketch.memory_units)

    def insert_hash(self, h: int) -> None:
        if self._exact is None:
            self._sketch.insert_hash(h)
            return
        if h in self._exact:
            return
        if len(self._exact) + 1 > self.cache_limit:
            self._promote((h,))
            return
        self._exact.add(h)
        self.peak_entries = max(self.peak_entries, len(self._exact))

    def add(self, value: int) -> None:
        self.insert_hash(item_hash(value, self.hash_seed))

    def add_many(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.int64)
        for start in range(0, values.size, CHUNK):
            chunk = values[start:start + CHUNK]
            if self._exact is None:
                self._sketch.insert_hashes(item_hash_array(chunk, self.hash_seed))
                continue
            # hashing is pure, so dedupe raw values first and hash only the survivors
            hashes = item_hash_array(np.unique(chunk), self.hash_seed).tolist()
            if len(self._exact) + len(hashes) > self.cache_limit:
                hashes = [h for h in hashes if h not in self._exact]
                if len(self._exact) + len(hashes) > self.cache_limit:
                    self._promote(hashes)
                    continue
            self._exact.update(hashes)
            self.peak_entries = max(self.peak_entries, len(self._exact))

    def estimate(self) -> float:
        if self._exact is not None:
            return float(len(self._exact))
        return self._sketch.estimate()


def cached_insert(c: CachedCounter, value: int) -> None:
    c.add(value)


def cached_estimate(c: CachedCounter) -> float:
    return c.estimate()


class ExactCounter:
    """Baseline: a plain set of every distinct value seen."""

    def __init__(self):
        self._seen: set[int] = set()

    def add(self, value: int) -> None:
        self._seen.add(value)

    def add_many(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.int64)
        for start in range(0, values.size, CHUNK):
            self._seen.update(values[start:start + CHUNK].tolist())

    def estimate(self) -> float:
        return float(len(self._seen))

    @property
    def peak_entries(self) -> int:
        return len(self._seen)

    mode = "exact"


def make_counter(algorithm: str, p: int = DEFAULT_PRECISION, cache_limit: int = DEFAULT_CACHE_LIMIT, hash_seed: int = 0):
    if algorithm == "exact_set":
        return ExactCounter()
    if algorithm == "hll":
        return HllSketch(p, hash_seed)
    if algorithm == "cached_hll":
        return CachedCounter(cache_limit, p, hash_seed)
    raise UsageError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def relative_error(estimate: float, truth: int) -> float:
    return abs(estimate - truth) / max(truth, 1)


@dataclass
class BenchRow:
    column: str
    algorithm: str
    truth: int
    estimate: float
    rel_error: float
    time_ns: int
    mode: str
    peak_entries: int


REPORT_FIELDS = ("column", "algorithm", "truth", "estimate", "rel_error", "time_ns", "mode", "peak_entries")


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def extend(self, other: "BenchReport") -> None:
        self.rows.extend(other.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in self.rows:
            w.writerow([r.column, r.algorithm, r.truth, repr(r.estimate), repr(r.rel_error), r.time_ns, r.mode, r.peak_entries])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([asdict(r) for r in self.rows], indent=1)

    def summary(self) -> dict:
        """Per-algorithm quantiles of relative error and wall time."""
        out = {}
        qs = (0.0, 0.25, 0.5, 0.75, 0.95, 1.0)
        for alg in dict.fromkeys(r.algorithm for r in self.rows):
            err = np.array([r.rel_error for r in self.rows if r.algorithm == alg])
            t = np.array([r.time_ns for r in self.rows if r.algorithm == alg], dtype=np.float64)
            out[alg] = {
                "n": int(err.size),
                "rel_error_quantiles": {str(q): float(np.quantile(err, q)) for q in qs},
                "time_ns_quantiles": {str(q): float(np.quantile(t, q)) for q in qs},
                "exact_mode_rows": sum(1 for r in self.rows if r.algorithm == alg and r.mode == "exact"),
            }
        return out


def bench_columns(
    d: Dataset,
    algorithms: Sequence[str] = ALGORITHMS,
    p: int = DEFAULT_PRECISION,
    cache_limit: int = DEFAULT_CACHE_LIMIT,
    repeats: int = 3,
    hash_seed: int = 0,
    columns: Sequence[int] | None = None,
    prefix: str = "",
) -> BenchReport:
    """Stream every column's non-missing cells through each algorithm.

    Wall time is the median over ``repeats`` fresh runs of a single-threaded
    column scan. ``peak_entries`` counts stored hashes/values or registers.
    """
    if not algorithms:
        raise UsageError("algorithm set is empty")
    if repeats < 1:
        raise UsageError("repeats must be >= 1")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
    report = BenchReport()
    for j in range(d.n_columns) if columns is None else columns:
        col = d.columns[j]
        values = col[col != MISSING]
        truth = int(np.unique(values).size)
        for alg in algorithms:
            times = []
            for _ in range(repeats):
                counter = make_counter(alg, p, cache_limit, hash_seed)
                t0 = time.perf_counter_ns()
                counter.add_many(values)
                est = counter.estimate()
                times.append(time.perf_counter_ns() - t0)
            mode = counter.mode
            peak = counter.peak_entries if alg != "hll" else counter.memory_units
            report.rows.append(BenchRow(prefix + d.meta[j].name, alg, truth, est, relative_error(est, truth),
                                        int(np.median(times)), mode, int(peak)))
    return report
