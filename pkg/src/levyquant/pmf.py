"""Sparse integer-bin histograms."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class EmpiricalPmf:
    """Counts keyed by cell index, stored as sorted parallel arrays.

    Two histograms merge by bin-wise count addition, which is associative
    and commutative, so shards can be reduced in any order.
    """

    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        cnt = np.asarray(self.counts, dtype=np.int64)
        if idx.shape != cnt.shape or idx.ndim != 1:
            raise ValueError("indices and counts must be equal-length 1-d arrays")
        if np.any(cnt < 0):
            raise ValueError("counts must be nonnegative")
        keep = cnt > 0
        idx, cnt = idx[keep], cnt[keep]
        if idx.size and np.any(np.diff(idx) <= 0):
            order = np.argsort(idx, kind="stable")
            idx, cnt = idx[order], cnt[order]
            if np.any(np.diff(idx) == 0):
                raise ValueError("duplicate indices")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "counts", cnt)

    @classmethod
    def from_indices(cls, idx) -> "EmpiricalPmf":
        u, c = np.unique(np.asarray(idx, dtype=np.int64), return_counts=True)
        return cls(u, c)

    @classmethod
    def from_mapping(cls, mapping) -> "EmpiricalPmf":
        items = sorted((int(k), int(v)) for k, v in dict(mapping).items())
        return cls(np.array([k for k, _ in items], dtype=np.int64),
                   np.array([v for _, v in items], dtype=np.int64))

    @classmethod
    def empty(cls) -> "EmpiricalPmf":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> int:
        return int(self.indices.size)

    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def __len__(self):
        return self.support

    def __getitem__(self, index: int) -> int:
        pos = np.searchsorted(self.indices, index)
        if pos < self.indices.size and self.indices[pos] == index:
            return int(self.counts[pos])
        return 0

    def items(self):
        return zip(self.indices.tolist(), self.counts.tolist())

    def as_dict(self) -> dict:
        return dict(self.items())

    def merge(self, other: "EmpiricalPmf") -> "EmpiricalPmf":
        idx = np.concatenate([self.indices, other.indices])
        cnt = np.concatenate([self.counts, other.counts])
        u, inv = np.unique(idx, return_inverse=True)
        return EmpiricalPmf(u, np.bincount(inv, weights=cnt, minlength=u.size).astype(np.int64))

    def __eq__(self, other):
        if not isinstance(other, EmpiricalPmf):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(self.counts, other.counts)

    def to_csv(self, path, **meta) -> None:
        """RFC-4180 CSV of (index, count); metadata goes in leading ``#`` lines."""
        with open(path, "w", newline="") as fh:
            for key in sorted(meta):
                fh.write(f"# {key}={meta[key]}\n")
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(["index", "count"])
            writer.writerows(self.items())

    def to_json(self, **meta) -> str:
        doc = dict(meta)
        doc.update({"indices": self.indices.tolist(), "counts": self.counts.tolist(),
                    "total": self.total})
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalPmf":
        doc = json.loads(text)
        pmf = cls(np.array(doc["indices"], dtype=np.int64), np.array(doc["counts"], dtype=np.int64))
        if pmf.total != doc["total"]:
            raise ValueError("total does not match counts")
        return pmf

    @classmethod
    def from_csv(cls, path) -> "EmpiricalPmf":
        rows = [line for line in Path(path).read_text().splitlines() if line and not line.startswith("#")]
        reader = csv.reader(rows[1:])
        pairs = [(int(i), int(c)) for i, c in reader]
        return cls(np.array([p[0] for p in pairs], dtype=np.int64),
                   np.array([p[1] for p in pairs], dtype=np.int64))
