"""The columnar integer table and its on-disk form (CSV + JSON sidecar)."""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
import pandas as pd

from .errors import ConfigError

MISSING = -1
SIDECAR_FORMAT = "catsynth-sidecar"
SIDECAR_VERSION = 1


@dataclass(frozen=True)
class ColumnMeta:
    """Per-column metadata.

    ``cardinality`` is the size of the code domain ``{0..c-1}``; categorical
    noise resamples inside it. ``origin`` is one of ``feature``,
    ``correlated``, ``combination``; ``detail`` holds the recipe that made the
    column and ``noise`` lists the noise modes that touched it.
    """

    name: str
    cardinality: int
    origin: str = "feature"
    detail: dict = field(default_factory=dict, compare=False, hash=False)
    noise: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"name": self.name, "cardinality": self.cardinality, "origin": self.origin,
                "detail": self.detail, "noise": list(self.noise)}

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMeta":
        return cls(d["name"], int(d["cardinality"]), d.get("origin", "feature"),
                   dict(d.get("detail", {})), tuple(d.get("noise", ())))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    columns: tuple[np.ndarray, ...]
    meta: tuple[ColumnMeta, ...]
    n_rows: int
    seed: int = 0
    labels: Optional[np.ndarray] = None
    aux_labels: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.columns) != len(self.meta):
            raise ConfigError(f"{len(self.columns)} columns but {len(self.meta)} metadata entries")
        cols = tuple(_frozen(c) for c in self.columns)
        for j, c in enumerate(cols):
            if c.shape != (self.n_rows,):
                raise ConfigError(f"column {j} has shape {c.shape}, expected ({self.n_rows},)")
        object.__setattr__(self, "columns", cols)
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(self.labels))
        object.__setattr__(self, "aux_labels", {k: _frozen(v) for k, v in self.aux_labels.items()})

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.meta]

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([m.cardinality for m in self.meta], dtype=np.int64)

    def matrix(self, columns=None) -> np.ndarray:
        """``(n_rows, n_cols)`` int64 copy of the selected columns."""
        idx = range(self.n_columns) if columns is None else columns
        if len(idx) == 0:
            return np.empty((self.n_rows, 0), dtype=np.int64)
        return np.column_stack([self.columns[j] for j in idx])

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"no column named {name!r}") from None

    def with_columns(self, columns, meta) -> "Dataset":
        return replace(self, columns=tuple(columns), meta=tuple(meta))

    def with_labels(self, labels, aux_labels=None) -> "Dataset":
        return replace(self, labels=labels, aux_labels=dict(aux_labels or self.aux_labels))


def _csv_frame(d: Dataset) -> pd.DataFrame:
    data = {m.name: c for m, c in zip(d.meta, d.columns)}
    for name, lab in d.aux_labels.items():
        data[name] = lab
    if d.labels is not None:
        data["label"] = d.labels
    if len(data) != d.n_columns + len(d.aux_labels) + (d.labels is not None):
        raise ConfigError("column and label names must be unique")
    return pd.DataFrame(data, copy=False)


def to_csv_bytes(d: Dataset) -> bytes:
    buf = io.StringIO()
    _csv_frame(d).to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue().encode("ascii")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sidecar_dict(d: Dataset, config: Optional[dict], csv_bytes: bytes, lineage=()) -> dict[str, Any]:
    from . import __version__

    return {
        "format": SIDECAR_FORMAT,
        "version": SIDECAR_VERSION,
        "package_version": __version__,
        "seed": d.seed,
        "n_rows": d.n_rows,
        "config": config,
        "columns": [m.to_dict() for m in d.meta],
        "label": d.labels is not None,
        "aux_labels": list(d.aux_labels),
        "lineage": list(lineage),
        "csv_sha256": sha256_hex(csv_bytes),
    }


def dumps_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=False) + "\n").encode("utf-8")


def sidecar_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def write_files_atomically(files: dict[str, bytes]) -> None:
    """Write several files so that either all appear or none do.

    Each payload goes to a temp file in the destination directory first; the
    renames happen only after every temp file is fully written.
    """
    temps = []
    try:
        for path, payload in files.items():
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
            temps.append((tmp, path))
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
        for tmp, path in temps:
            os.replace(tmp, path)
        temps = []
    finally:
        for tmp, _ in temps:
            if os.path.exists(tmp):
                os.unlink(tmp)


def read_dataset(csv_path: str, sidecar: Optional[dict] = None) -> tuple[Dataset, dict]:
    """Load a CSV written by :func:`to_csv_bytes` together with its sidecar.

    Raises ConfigError when the two disagree on row count or column names.
    """
    if sidecar is None:
        with open(sidecar_path(csv_path), "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    if sidecar.get("format") != SIDECAR_FORMAT:
        raise ConfigError("not a catsynth sidecar", "format")
    frame = pd.read_csv(csv_path, dtype=np.int64)
    meta = [ColumnMeta.from_dict(c) for c in sidecar["columns"]]
    expected = [m.name for m in meta] + list(sidecar.get("aux_labels", [])) + (["label"] if sidecar.get("label") else [])
    if list(frame.columns) != expected:
        raise ConfigError(f"CSV header {list(frame.columns)[:5]}... does not match sidecar columns", "columns")
    if len(frame) != sidecar["n_rows"]:
        raise ConfigError(f"CSV has {len(frame)} rows, sidecar says {sidecar['n_rows']}", "n_rows")
    columns = [frame[m.name].to_numpy() for m in meta]
    labels = frame["label"].to_numpy() if sidecar.get("label") else None
    aux = {name: frame[name].to_numpy() for name in sidecar.get("aux_labels", [])}
    d = Dataset(tuple(columns), tuple(meta), int(sidecar["n_rows"]), int(sidecar["seed"]), labels, aux)
    return d, sidecar
