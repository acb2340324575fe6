"""Families of non-negative vertex weight functions.

Each function is stored sparsely as parallel ``(vertices, values)`` arrays.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class VertexWeight:
    name: str
    vertices: np.ndarray
    values: np.ndarray

    def total(self) -> float:
        return float(self.values.sum())

    def total_on(self, mask) -> float:
        """Weight of the vertices where ``mask`` is true."""
        if len(self.vertices) == 0:
            return 0.0
        return float(self.values[mask[self.vertices]].sum())

    def max(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.values))


class WeightFamily:
    def __init__(self, n, weights=()):
        self.n = int(n)
        self.weights = []
        for w in weights:
            self.add(w.name, w.vertices, w.values)

    def add(self, name, vertices, values=None):
        verts = np.asarray(vertices, dtype=np.int64).reshape(-1)
        vals = np.ones(len(verts)) if values is None else np.asarray(values, dtype=float).reshape(-1)
        if len(vals) != len(verts):
            raise ValueError(f"weight {name!r}: {len(verts)} vertices but {len(vals)} values")
        if len(verts) and (verts.min() < 0 or verts.max() >= self.n):
            raise ValueError(f"weight {name!r} references a vertex outside 0..{self.n - 1}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError(f"weight {name!r} has negative or non-finite values")
        if len(np.unique(verts)) != len(verts):
            raise ValueError(f"weight {name!r} lists a vertex twice")
        order = np.argsort(verts)
        self.weights.append(VertexWeight(str(name), verts[order], vals[order]))
        return self

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def names(self):
        return [w.name for w in self.weights]

    def totals(self):
        return [w.total() for w in self.weights]

    def max_value(self) -> float:
        return max((w.max() for w in self.weights), default=0.0)

    def max_support(self) -> int:
        return max((w.support_size for w in self.weights), default=0)

    def involvement(self) -> int:
        """Largest number of weight functions positive at a single vertex."""
        if not self.weights or self.n == 0:
            return 0
        hits = np.zeros(self.n, dtype=np.int64)
        for w in self.weights:
            hits[w.vertices[w.values > 0]] += 1
        return int(hits.max())

    def restrict(self, vertex_map) -> "WeightFamily":
        """Carry the family onto an induced hypergraph whose vertex ``i`` was
        ``vertex_map[i]`` in the parent. Weight on dropped vertices is lost."""
        vertex_map = np.asarray(vertex_map, dtype=np.int64)
        old_to_new = np.full(self.n, -1, dtype=np.int64)
        old_to_new[vertex_map] = np.arange(len(vertex_map))
        out = WeightFamily(len(vertex_map))
        for w in self.weights:
            new = old_to_new[w.vertices]
            keep = new >= 0
            out.weights.append(VertexWeight(w.name, new[keep], w.values[keep]))
        return out

    def to_json(self):
        return [
            {"name": w.name, "entries": [[int(v), float(x)] for v, x in zip(w.vertices, w.values)]}
            for w in self.weights
        ]

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def from_json(cls, n, data):
        fam = cls(n)
        for i, item in enumerate(data):
            entries = item.get("entries", [])
            verts = [int(v) for v, _ in entries]
            vals = [float(x) for _, x in entries]
            fam.add(item.get("name", f"tau{i}"), verts, vals)
        return fam

    @classmethod
    def load(cls, n, path):
        return cls.from_json(n, json.loads(Path(path).read_text()))


def indicator_family(n, sets, names=None) -> WeightFamily:
    """0/1 weight functions, one per vertex set."""
    fam = WeightFamily(n)
    for i, s in enumerate(sets):
        verts = np.unique(np.asarray(list(s), dtype=np.int64))
        fam.add(names[i] if names else f"set{i}", verts, np.ones(len(verts)))
    return fam
