"""Dataset recipes as plain dataclasses, plus JSON round-tripping.

Every ``from_dict`` validates its input and raises :class:`ConfigError` with a
dotted field path (``features[2].distribution.pmf``) so the CLI can report
exactly what is wrong before any work starts.

User-defined combination and decision functions are referenced by name through
:data:`FUNCTIONS`; that keeps configs JSON-serializable and sidecars sufficient
to regenerate a dataset.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

from .errors import ConfigError

DISTRIBUTIONS = ("uniform", "normal", "longtail", "bimodal", "custom")
COMBINATIONS = ("and", "or", "xor", "sum_of_squares", "square_of_sums", "custom")
TARGETS = ("clustering", "linear", "nonlinear", "custom")
NOISE_MODES = ("categorical", "missing")

NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")

# name -> callable. Combination functions take a (n_rows, n_parents) int64
# array and return n_rows ints; decision functions take the full
# (n_rows, n_cols) matrix and return n_rows labels. Both must be pure.
FUNCTIONS: dict[str, Callable] = {}


def register_function(name: str):
    def deco(fn):
        FUNCTIONS[name] = fn
        return fn

    return deco


def get_function(name: str, path: str) -> Callable:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise ConfigError(f"unknown function {name!r}; registered: {sorted(FUNCTIONS)}", path) from None


def _require(cond: bool, msg: str, path: str):
    if not cond:
        raise ConfigError(msg, path)


def _get(d: dict, key: str, path: str, default=...):
    if not isinstance(d, dict):
        raise ConfigError("expected an object", path)
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError("missing required field", f"{path}.{key}" if path else key)
    return default


def _int(v, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}, got {v}", path)
    return v


def _float(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {v!r}", path)
    return float(v)


def _name(v, path: str) -> str:
    if not isinstance(v, str) or not NAME_RE.match(v):
        raise ConfigError(f"names must match [A-Za-z0-9_]+, got {v!r}", path)
    return v


def _choice(v, options, path: str) -> str:
    if not isinstance(v, str) or v.lower() not in options:
        raise ConfigError(f"expected one of {list(options)}, got {v!r}", path)
    return v.lower()


def _int_list(v, path: str) -> list[int]:
    if not isinstance(v, list):
        raise ConfigError("expected a list of integers", path)
    return [_int(x, f"{path}[{i}]", 0) for i, x in enumerate(v)]


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


@dataclass(frozen=True)
class Distribution:
    kind: str = "normal"
    exponent: float = 1.5
    pmf: Optional[tuple[float, ...]] = None

    @classmethod
    def from_dict(cls, d, path="distribution") -> "Distribution":
        if isinstance(d, str):
            d = {"kind": d}
        kind = _choice(_get(d, "kind", path), DISTRIBUTIONS, _join(path, "kind"))
        exponent = _float(_get(d, "exponent", path, 1.5), _join(path, "exponent"))
        _require(exponent > 0, "long-tail exponent must be > 0", _join(path, "exponent"))
        pmf = _get(d, "pmf", path, None)
        if kind == "custom":
            _require(isinstance(pmf, list), "custom distribution needs a pmf list", _join(path, "pmf"))
            pmf = tuple(_float(x, f"{path}.pmf[{i}]") for i, x in enumerate(pmf))
        else:
            pmf = None
        return cls(kind, exponent, pmf)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "longtail":
            out["exponent"] = self.exponent
        if self.kind == "custom":
            out["pmf"] = list(self.pmf)
        return out


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    cardinality: int
    distribution: Distribution = field(default_factory=Distribution)

    def validate(self, path="feature"):
        _name(self.name, _join(path, "name"))
        _int(self.cardinality, _join(path, "cardinality"), 1)
        dist = self.distribution
        if dist.kind == "custom":
            pmf = dist.pmf or ()
            _require(len(pmf) == self.cardinality,
                     f"pmf has {len(pmf)} weights, cardinality is {self.cardinality}",
                     f"{path}.distribution.pmf")
            _require(all(w >= 0 for w in pmf) and sum(pmf) > 0,
                     "pmf weights must be non-negative with a positive sum", f"{path}.distribution.pmf")
        return self

    @classmethod
    def from_dict(cls, d, path="feature") -> "FeatureSpec":
        spec = cls(
            name=_get(d, "name", path),
            cardinality=_get(d, "cardinality", path),
            distribution=Distribution.from_dict(_get(d, "distribution", path, "normal"), _join(path, "distribution")),
        )
        return spec.validate(path)

    def to_dict(self) -> dict:
        return {"name": self.name, "cardinality": self.cardinality, "distribution": self.distribution.to_dict()}


@dataclass(frozen=True)
class CombinationSpec:
    kind: str
    parents: tuple[int, ...]
    new_name: str
    function: Optional[str] = None  # registered name, custom kind only

    @classmethod
    def from_dict(cls, d, path="combination") -> "CombinationSpec":
        kind = _choice(_get(d, "kind", path), COMBINATIONS, _join(path, "kind"))
        parents = tuple(_int_list(_get(d, "parents", path), _join(path, "parents")))
        _require(len(parents) >= 2, "needs at least 2 parents", _join(path, "parents"))
        _require(len(set(parents)) == len(parents), "parents must be distinct", _join(path, "parents"))
        fn = _get(d, "function", path, None)
        if kind == "custom":
            _require(isinstance(fn, str), "custom combination needs a registered function name", _join(path, "function"))
            get_function(fn, _join(path, "function"))
        return cls(kind, parents, _name(_get(d, "new_name", path), _join(path, "new_name")), fn)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "parents": list(self.parents), "new_name": self.new_name}
        if self.function is not None:
            out["function"] = self.function
        return out


@dataclass(frozen=True)
class CorrelationSpec:
    source: int
    rho: float
    out_cardinality: int
    new_name: str

    @classmethod
    def from_dict(cls, d, path="correlation") -> "CorrelationSpec":
        rho = _float(_get(d, "rho", path), _join(path, "rho"))
        _require(-1.0 <= rho <= 1.0, "rho must lie in [-1, 1]", _join(path, "rho"))
        return cls(
            source=_int(_get(d, "source", path), _join(path, "source"), 0),
            rho=rho,
            out_cardinality=_int(_get(d, "out_cardinality", path), _join(path, "out_cardinality"), 2),
            new_name=_name(_get(d, "new_name", path), _join(path, "new_name")),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    relevant: tuple[int, ...] = ()
    k: int = 2
    function: Optional[str] = None
    name: str = "label"

    @classmethod
    def from_dict(cls, d, path="target") -> "TargetSpec":
        kind = _choice(_get(d, "kind", path), TARGETS, _join(path, "kind"))
        k = _int(_get(d, "k", path, 2), _join(path, "k"))
        if kind == "clustering":
            _require(k >= 2, "clustering needs k >= 2", _join(path, "k"))
        fn = _get(d, "function", path, None)
        if kind == "custom":
            _require(isinstance(fn, str), "custom target needs a registered function name", _join(path, "function"))
            get_function(fn, _join(path, "function"))
        return cls(
            kind=kind,
            relevant=tuple(_int_list(_get(d, "relevant", path, []), _join(path, "relevant"))),
            k=k,
            function=fn,
            name=_name(_get(d, "name", path, "label"), _join(path, "name")),
        )

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "relevant": list(self.relevant), "name": self.name}
        if self.kind == "clustering":
            out["k"] = self.k
        if self.function is not None:
            out["function"] = self.function
        return out


@dataclass(frozen=True)
class NoiseSpec:
    p: float
    mode: str = "categorical"
    columns: Optional[tuple[int, ...]] = None

    @classmethod
    def from_dict(cls, d, path="noise") -> "NoiseSpec":
        p = _float(_get(d, "p", path), _join(path, "p"))
        _require(0.0 <= p <= 1.0, "p must lie in [0, 1]", _join(path, "p"))
        cols = _get(d, "columns", path, None)
        if cols is not None:
            cols = tuple(_int_list(cols, _join(path, "columns")))
        return cls(p, _choice(_get(d, "mode", path, "categorical"), NOISE_MODES, _join(path, "mode")), cols)

    def to_dict(self) -> dict:
        out = {"p": self.p, "mode": self.mode}
        if self.columns is not None:
            out["columns"] = list(self.columns)
        return out


def _spec_list(d, key, cls, path):
    items = _get(d, key, path, [])
    if not isinstance(items, list):
        raise ConfigError("expected a list", _join(path, key))
    return [cls.from_dict(x, f"{_join(path, key)}[{i}]") for i, x in enumerate(items)]


@dataclass(frozen=True)
class DatasetConfig:
    """Full recipe for one dataset.

    Column indices in ``correlations`` and ``combinations`` refer to the table
    as it grows: features first, then correlated children, then combination
    children. ``drop_after_combine`` uses the same pre-drop indexing; ``noise``
    column subsets index the table after the drop.
    """

    n_rows: int
    features: tuple[FeatureSpec, ...]
    combinations: tuple[CombinationSpec, ...] = ()
    correlations: tuple[CorrelationSpec, ...] = ()
    target: Optional[TargetSpec] = None
    aux_targets: tuple[TargetSpec, ...] = ()
    noise: tuple[NoiseSpec, ...] = ()
    drop_after_combine: tuple[int, ...] = ()
    seed: int = 0

    @property
    def n_columns_before_drop(self) -> int:
        return len(self.features) + len(self.correlations) + len(self.combinations)

    def validate(self) -> "DatasetConfig":
        _int(self.n_rows, "n_rows", 1)
        _require(len(self.features) > 0, "at least one feature is required", "features")
        _require(0 <= self.seed <= (1 << 64) - 1, "seed must be an unsigned 64-bit integer", "seed")
        for i, f in enumerate(self.features):
            f.validate(f"features[{i}]")
        n = len(self.features)
        for i, c in enumerate(self.correlations):
            _require(c.source < n, f"source {c.source} out of range (have {n} columns)", f"correlations[{i}].source")
            n += 1
        for i, c in enumerate(self.combinations):
            for j, p in enumerate(c.parents):
                _require(p < n, f"parent {p} out of range (have {n} columns)", f"combinations[{i}].parents[{j}]")
            n += 1
        for t_i, t in enumerate((self.target, *self.aux_targets)):
            if t is None:
                continue
            path = "target" if t_i == 0 else f"aux_targets[{t_i - 1}]"
            for j, r in enumerate(t.relevant):
                _require(r < n, f"relevant column {r} out of range (have {n} columns)", f"{path}.relevant[{j}]")
        names = [t.name for t in (self.target, *self.aux_targets) if t is not None]
        _require(len(set(names)) == len(names), "target names must be unique", "aux_targets")
        _require(len(set(self.drop_after_combine)) == len(self.drop_after_combine),
                 "drop indices must be distinct", "drop_after_combine")
        for j, idx in enumerate(self.drop_after_combine):
            _require(idx < n, f"column {idx} out of range (have {n} columns)", f"drop_after_combine[{j}]")
        n -= len(self.drop_after_combine)
        for i, ns in enumerate(self.noise):
            for j, c in enumerate(ns.columns or ()):
                _require(c < n, f"column {c} out of range (have {n} columns after drop)", f"noise[{i}].columns[{j}]")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        target = _get(d, "target", "", None)
        cfg = cls(
            n_rows=_int(_get(d, "n_rows", ""), "n_rows", 1),
            features=tuple(_spec_list(d, "features", FeatureSpec, "")),
            combinations=tuple(_spec_list(d, "combinations", CombinationSpec, "")),
            correlations=tuple(_spec_list(d, "correlations", CorrelationSpec, "")),
            target=TargetSpec.from_dict(target, "target") if target is not None else None,
            aux_targets=tuple(_spec_list(d, "aux_targets", TargetSpec, "")),
            noise=tuple(_spec_list(d, "noise", NoiseSpec, "")),
            drop_after_combine=tuple(_int_list(_get(d, "drop_after_combine", "", []), "drop_after_combine")),
            seed=_int(_get(d, "seed", "", 0), "seed", 0),
        )
        return cfg.validate()

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "seed": self.seed,
            "features": [f.to_dict() for f in self.features],
            "correlations": [c.to_dict() for c in self.correlations],
            "combinations": [c.to_dict() for c in self.combinations],
            "target": self.target.to_dict() if self.target else None,
            "aux_targets": [t.to_dict() for t in self.aux_targets],
            "drop_after_combine": list(self.drop_after_combine),
            "noise": [n.to_dict() for n in self.noise],
        }


def dataset_config_schema() -> dict:
    """JSON schema (draft 2020-12) for :class:`DatasetConfig` files."""
    index_list = {"type": "array", "items": {"type": "integer", "minimum": 0}}
    name = {"type": "string", "pattern": NAME_RE.pattern}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "DatasetConfig",
        "type": "object",
        "required": ["n_rows", "features"],
        "properties": {
            "n_rows": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0, "maximum": (1 << 64) - 1},
            "features": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["name", "cardinality"],
                    "properties": {
                        "name": name,
                        "cardinality": {"type": "integer", "minimum": 1},
                        "distribution": {
                            "type": "object",
                            "properties": {
                                "kind": {"enum": list(DISTRIBUTIONS)},
                                "exponent": {"type": "number", "exclusiveMinimum": 0},
                                "pmf": {"type": "array", "items": {"type": "number", "minimum": 0}},
                            },
                        },
                    },
                },
            },
            "correlations": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["source", "rho", "out_cardinality", "new_name"],
                    "properties": {
                        "source": {"type": "integer", "minimum": 0},
                        "rho": {"type": "number", "minimum": -1, "maximum": 1},
                        "out_cardinality": {"type": "integer", "minimum": 2},
                        "new_name": name,
                    },
                },
            },
            "combinations": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["kind", "parents", "new_name"],
                    "properties": {
                        "kind": {"enum": list(COMBINATIONS)},
                        "parents": {**index_list, "minItems": 2},
                        "new_name": name,
                        "function": {"type": "string"},
                    },
                },
            },
            "target": {"$ref": "#/$defs/target"},
            "aux_targets": {"type": "array", "items": {"$ref": "#/$defs/target"}},
            "drop_after_combine": index_list,
            "noise": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["p"],
                    "properties": {
                        "p": {"type": "number", "minimum": 0, "maximum": 1},
                        "mode": {"enum": list(NOISE_MODES)},
                        "columns": index_list,
                    },
                },
            },
        },
        "$defs": {
            "target": {
                "type": ["object", "null"],
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": list(TARGETS)},
                    "relevant": index_list,
                    "k": {"type": "integer", "minimum": 2},
                    "function": {"type": "string"},
                    "name": name,
                },
            }
        },
    }
