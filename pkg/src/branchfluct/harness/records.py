"""Delimited record files and their aggregation.

A record file is tab-separated text::

    # branchfluct-records v1
    # config_hash: 3f2a...
    # kind: fluctuation-limit
    # T: 64.0
    # units: X values are occupation deviations divided by F_T (dimensionless)
    replica	status	X@0.2	X@1
    0	ok	0.1234	-0.5
    ...

Comment lines carry metadata (``key: value``); the first non-comment line
names the columns.  Floats are written with ``repr`` so that a file is a
deterministic function of the config.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = "# branchfluct-records v1"


class RecordError(ValueError):
    pass


@dataclass
class RecordTable:
    meta: dict
    columns: list
    rows: list = field(default_factory=list)

    def column(self, name) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def ok_rows(self):
        if "status" not in self.columns:
            return self.rows
        i = self.columns.index("status")
        return [r for r in self.rows if r[i] == "ok"]

    def values(self, name, only_ok=True) -> np.ndarray:
        i = self.columns.index(name)
        rows = self.ok_rows() if only_ok else self.rows
        return np.array([float(r[i]) for r in rows], dtype=float)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_records(path, meta: dict, columns, rows):
    """Write atomically (temp file then rename) so partial files never look complete."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(MAGIC + "\n")
        for k in sorted(meta):
            fh.write(f"# {k}: {_fmt(meta[k])}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def _parse(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_records(path) -> RecordTable:
    meta = {}
    columns = None
    rows = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != MAGIC:
            raise RecordError(f"{path}: not a record file")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition(":")
                meta[k.strip()] = v.strip()
            elif columns is None:
                columns = line.split("\t")
            elif line:
                rows.append([_parse(v) for v in line.split("\t")])
    if columns is None:
        raise RecordError(f"{path}: missing column header")
    return RecordTable(meta, columns, rows)


def aggregate(paths, *, key: str = "replica") -> RecordTable:
    """Merge record files of one configuration.

    Refuses files whose ``config_hash`` (or any other shared metadata such as
    ``T``) differs, or whose column layouts differ, and rejects duplicate
    replica ids.  The merge is the union of rows sorted by replica id.
    """
    tables = [read_records(p) for p in paths]
    if not tables:
        raise RecordError("no record files")
    ref = tables[0]
    for p, t in zip(paths, tables):
        if t.meta.get("config_hash") != ref.meta.get("config_hash"):
            raise RecordError(f"{p}: config hash {t.meta.get('config_hash')} != {ref.meta.get('config_hash')}")
        if t.columns != ref.columns:
            raise RecordError(f"{p}: column layout differs")
        for k in ("kind", "T"):
            if t.meta.get(k) != ref.meta.get(k):
                raise RecordError(f"{p}: {k} differs")
    i = ref.columns.index(key)
    seen = set()
    rows = []
    for t in tables:
        for r in t.rows:
            if r[i] in seen:
                raise RecordError(f"duplicate {key} {r[i]}")
            seen.add(r[i])
            rows.append(r)
    rows.sort(key=lambda r: r[i])
    meta = {k: v for k, v in ref.meta.items() if k not in ("block", "replicas_in_file")}
    return RecordTable(meta, list(ref.columns), rows)
