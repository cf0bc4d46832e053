"""CSV-backed descriptor table."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..mlcore import Dataset
from . import schema

log = logging.getLogger(__name__)


class SchemaMismatch(ValueError):
    pass


class EmptySelection(ValueError):
    pass


def format_value(v) -> str:
    if isinstance(v, bool) or isinstance(v, (np.bool_,)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


@dataclass
class DescriptorTable:
    rows: list = field(default_factory=list)     # list of dicts keyed by header
    header: tuple = field(default_factory=schema.header)

    def __len__(self):
        return len(self.rows)

    def sorted(self) -> "DescriptorTable":
        return DescriptorTable(sorted(self.rows, key=lambda r: str(r["id"])), self.header)

    @property
    def ids(self) -> list:
        return [str(r["id"]) for r in self.rows]

    def column(self, name) -> np.ndarray:
        if name not in self.header:
            raise KeyError(name)
        return np.array([_to_float(r.get(name)) for r in self.rows], dtype=float)

    def eligible(self) -> np.ndarray:
        return self.column("eligible") > 0.5

    def subset(self, mask) -> "DescriptorTable":
        return DescriptorTable([r for r, m in zip(self.rows, mask) if m], self.header)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.sorted().rows:
            w.writerow([format_value(r.get(c)) for c in self.header])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read(cls, path, strict: bool = True) -> "DescriptorTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            head = tuple(next(reader))
            if strict and head != schema.header():
                raise SchemaMismatch(f"{path}: header does not match schema v{schema.SCHEMA_VERSION}")
            # values stay as text so a read/write round trip is byte-identical
            rows = [dict(zip(head, line)) for line in reader]
        return cls(rows, head)

    def dataset(self, feature_set: str, target: str, eligible_only: bool = True) -> Dataset:
        """ML dataset; rows with missing/non-finite values are dropped and logged."""
        cols = schema.feature_columns(feature_set)
        t = self.subset(self.eligible()) if eligible_only else self
        if len(t) == 0:
            raise EmptySelection("no eligible rows")
        X = np.column_stack([t.column(c) for c in cols])
        y = t.column(target)
        ok = np.isfinite(X).all(axis=1) & np.isfinite(y)
        for i in np.flatnonzero(~ok):
            log.warning("dropping %s from the ML table: missing or non-finite values", t.ids[i])
        ids = [i for i, k in zip(t.ids, ok) if k]
        return Dataset(X[ok], y[ok], cols, tuple(ids))


def _to_float(v) -> float:
    if v is None or v == "":
        return math.nan
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan
