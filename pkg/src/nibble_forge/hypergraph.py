"""Immutable multihypergraph on vertices ``0..n-1``.

Edges are stored in CSR form (``ptr`` into a flat ``int32`` vertex array), so
multi-million edge instances stay cheap.  Copies of the same vertex set are
distinct edges with distinct ids.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import (
    CodegreeCapError,
    EmptyHypergraphError,
    MalformedEdgeError,
    ParseError,
    UnknownEdgeError,
    VertexRangeError,
    ZeroDegreeError,
)

DEFAULT_CODEGREE_CAP = 10**8
# largest dense key space we are willing to bincount into
_DENSE_LIMIT = 1 << 24
_INT64_LIMIT = 1 << 62


class Hypergraph:
    """A multihypergraph with at most ``uniformity_bound`` vertices per edge.

    ``vertex_map[i]`` is the id in the parent hypergraph of vertex ``i`` and
    ``edge_map[e]`` the parent id of edge ``e``; both are the identity unless
    the hypergraph came from :meth:`induce`.
    """

    def __init__(self, n, edges=(), uniformity_bound=None):
        n = int(n)
        if n < 0:
            raise VertexRangeError("n must be non-negative")
        if isinstance(edges, np.ndarray) and edges.ndim == 2:
            arr = edges.astype(np.int64, copy=False)
            m, u = arr.shape
            ptr = np.arange(m + 1, dtype=np.int64) * u
            flat = arr.reshape(-1)
        else:
            edge_list = [tuple(int(v) for v in e) for e in edges]
            sizes = np.fromiter((len(e) for e in edge_list), dtype=np.int64, count=len(edge_list))
            ptr = np.zeros(len(edge_list) + 1, dtype=np.int64)
            np.cumsum(sizes, out=ptr[1:])
            flat = np.fromiter((v for e in edge_list for v in e), dtype=np.int64, count=int(ptr[-1]))
        self._setup(n, ptr, flat, uniformity_bound, validate=True)

    @classmethod
    def _from_csr(cls, n, ptr, flat, uniformity_bound, vertex_map=None, edge_map=None, multiplicity=None):
        obj = cls.__new__(cls)
        obj._setup(n, ptr, flat, uniformity_bound, validate=False)
        obj._vertex_map = vertex_map
        obj._edge_map = edge_map
        obj._mult = multiplicity
        return obj

    def _setup(self, n, ptr, flat, uniformity_bound, validate):
        self._n = n
        self._ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        sizes = np.diff(self._ptr)
        if validate:
            if len(sizes) and sizes.min() < 1:
                raise MalformedEdgeError("edges must be non-empty")
            if len(flat) and (flat.min() < 0 or flat.max() >= n):
                bad = int(flat[(flat < 0) | (flat >= n)][0])
                raise VertexRangeError(f"vertex {bad} outside 0..{n - 1}")
            if len(flat) > 1:
                step = np.diff(flat)
                # positions where a new edge starts are exempt from the ordering test
                inner = np.ones(len(flat) - 1, dtype=bool)
                starts = self._ptr[1:-1]
                inner[starts[starts > 0] - 1] = False
                if np.any(step[inner] <= 0):
                    raise MalformedEdgeError("vertices within an edge must be strictly increasing")
        self._flat = np.ascontiguousarray(flat, dtype=np.int32)
        self._sizes = sizes
        max_size = int(sizes.max()) if len(sizes) else 0
        if uniformity_bound is None:
            uniformity_bound = max_size
        uniformity_bound = int(uniformity_bound)
        if max_size > uniformity_bound:
            raise MalformedEdgeError(f"edge of size {max_size} exceeds uniformity bound {uniformity_bound}")
        self._u = uniformity_bound
        self._uniform = bool(len(sizes) == 0 or (sizes.min() == uniformity_bound == max_size))
        self._vertex_map = None
        self._edge_map = None
        self._mult = None
        self._deg = None
        self._inc = None
        self._groups = None
        self._cols = None
        self._occ = {}
        self._maxcodeg = {}

    # basic accessors

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._sizes)

    num_edges = m

    @property
    def uniformity_bound(self) -> int:
        return self._u

    @property
    def k(self) -> int:
        """Uniformity bound minus one."""
        return self._u - 1

    @property
    def is_uniform(self) -> bool:
        return self._uniform

    @property
    def ptr(self):
        return self._ptr

    @property
    def flat(self):
        return self._flat

    @property
    def sizes(self):
        return self._sizes

    @property
    def rows(self):
        """``(m, u)`` view of the edges; only for uniform hypergraphs."""
        if not self._uniform:
            raise MalformedEdgeError("rows() needs a uniform hypergraph")
        return self._flat.reshape(self.m, self._u)

    def columns(self):
        """Contiguous per-position vertex arrays of a uniform hypergraph."""
        if self._cols is None:
            rows = self.rows
            self._cols = [np.ascontiguousarray(rows[:, a]) for a in range(self._u)]
        return self._cols

    @property
    def vertex_map(self):
        if self._vertex_map is None:
            return np.arange(self._n, dtype=np.int64)
        return self._vertex_map

    @property
    def edge_map(self):
        if self._edge_map is None:
            return np.arange(self.m, dtype=np.int64)
        return self._edge_map

    def edge(self, e) -> tuple:
        e = int(e)
        if not 0 <= e < self.m:
            raise UnknownEdgeError(f"edge id {e} not in 0..{self.m - 1}")
        return tuple(int(v) for v in self._flat[self._ptr[e]:self._ptr[e + 1]])

    def edges(self) -> list:
        return [self.edge(e) for e in range(self.m)]

    def edge_of_entry(self):
        """Edge id of every position in the flat vertex array."""
        return np.repeat(np.arange(self.m, dtype=np.int64), self._sizes)

    def __repr__(self):
        return f"Hypergraph(n={self.n}, m={self.m}, u={self._u})"

    def __eq__(self, other):
        return (
            isinstance(other, Hypergraph)
            and self._n == other._n
            and self._u == other._u
            and np.array_equal(self._ptr, other._ptr)
            and np.array_equal(self._flat, other._flat)
        )

    __hash__ = None

    # degrees and incidence

    def degrees(self):
        if self._deg is None:
            if self._cols is not None:
                deg = np.zeros(self._n, dtype=np.int64)
                for c in self._cols:
                    deg += np.bincount(c, minlength=self._n)
                self._deg = deg
            else:
                self._deg = np.bincount(self._flat, minlength=self._n).astype(np.int64)
        return self._deg

    def degree(self, v) -> int:
        v = int(v)
        if not 0 <= v < self._n:
            raise VertexRangeError(f"vertex {v} outside 0..{self._n - 1}")
        return int(self.degrees()[v])

    def min_degree(self) -> int:
        return int(self.degrees().min()) if self._n else 0

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self._n else 0

    def incidence(self):
        """CSR incidence lists: edges of ``v`` are ``inc[ptr[v]:ptr[v+1]]``."""
        if self._inc is None:
            order = np.argsort(self._flat, kind="stable")
            inc = self.edge_of_entry()[order]
            ptr = np.zeros(self._n + 1, dtype=np.int64)
            np.cumsum(self.degrees(), out=ptr[1:])
            self._inc = (ptr, inc)
        return self._inc

    def incident_edges(self, v):
        ptr, inc = self.incidence()
        return inc[ptr[v]:ptr[v + 1]]

    def codegree(self, vertices) -> int:
        """Number of edges containing every vertex of ``vertices``."""
        U = sorted(set(int(v) for v in vertices))
        for v in U:
            if not 0 <= v < self._n:
                raise VertexRangeError(f"vertex {v} outside 0..{self._n - 1}")
        if not U:
            return self.m
        deg = self.degrees()
        pivot = min(U, key=lambda v: deg[v])
        cand = self.incident_edges(pivot)
        if len(U) == 1:
            return len(cand)
        others = np.array([v for v in U if v != pivot], dtype=np.int32)
        if self._uniform:
            hits = np.isin(self.rows[cand], others).sum(axis=1)
            return int(np.count_nonzero(hits == len(others)))
        need = set(others.tolist())
        return sum(1 for e in cand if need.issubset(self.edge(e)))

    def edge_multiplicity(self):
        """Number of copies of each edge's vertex set (including itself)."""
        if self._mult is None:
            mult = np.ones(self.m, dtype=np.int64)
            for ids, rows in self._size_groups():
                if len(ids) == 0:
                    continue
                s = rows.shape[1]
                if max(self._n, 1) ** s < _INT64_LIMIT:
                    keys = rows.astype(np.int64) @ (max(self._n, 1) ** np.arange(s - 1, -1, -1, dtype=np.int64))
                    _, inv, cnt = np.unique(keys, return_inverse=True, return_counts=True)
                else:
                    _, inv, cnt = np.unique(rows, axis=0, return_inverse=True, return_counts=True)
                mult[ids] = cnt[inv.reshape(-1)]
            self._mult = mult
        return self._mult

    def _size_groups(self):
        if self._groups is None:
            if self._uniform:
                self._groups = [(np.arange(self.m), self.rows)] if self.m else []
            else:
                groups = []
                for s in np.unique(self._sizes):
                    ids = np.flatnonzero(self._sizes == s)
                    idx = self._ptr[ids][:, None] + np.arange(s)
                    groups.append((ids, self._flat[idx]))
                self._groups = groups
        return self._groups

    # codegrees of all j-subsets that occur in some edge

    def subset_occurrence_codegrees(self, j, cap=DEFAULT_CODEGREE_CAP):
        """For every edge ``e`` with ``|e| >= j`` and every j-subset ``S`` of
        ``e``, the codegree of ``S``.

        Returns a list of ``(edge_ids, counts)`` pairs, one per edge size, with
        ``counts`` shaped ``(len(edge_ids), C(size, j))``.
        """
        j = int(j)
        if j in self._occ:
            return self._occ[j]
        out = self._occurrences(j, cap)
        # the lookups are reused by max_codegree and conflict_counts
        self._occ[j] = out
        return out

    def _occurrences(self, j, cap):
        groups = [(ids, rows) for ids, rows in self._size_groups() if rows.shape[1] >= j]
        if j < 1 or not groups:
            return []
        total = sum(len(ids) * math.comb(rows.shape[1], j) for ids, rows in groups)
        if total > cap:
            raise CodegreeCapError(j, total, cap)
        if j == 1:
            deg = self.degrees()
            return [(ids, deg[rows]) for ids, rows in groups]
        if self._uniform and j == self._u:
            return [(groups[0][0], self.edge_multiplicity()[:, None])]

        combos = [np.array(list(combinations(range(rows.shape[1]), j))) for _, rows in groups]
        n = max(self._n, 1)
        if n**j < _INT64_LIMIT:
            weights = n ** np.arange(j - 1, -1, -1, dtype=np.int64)

            def keys_of(rows, cols):
                return rows[:, cols].astype(np.int64) @ weights

            if n**j <= _DENSE_LIMIT:
                table = np.zeros(n**j, dtype=np.int64)
                for (ids, rows), cmb in zip(groups, combos):
                    for cols in cmb:
                        table += np.bincount(keys_of(rows, cols), minlength=n**j)
                out = []
                for (ids, rows), cmb in zip(groups, combos):
                    counts = np.empty((len(ids), len(cmb)), dtype=np.int64)
                    for c, cols in enumerate(cmb):
                        counts[:, c] = table[keys_of(rows, cols)]
                    out.append((ids, counts))
                return out
            keys = np.concatenate(
                [np.stack([keys_of(rows, cols) for cols in cmb], axis=1).reshape(-1)
                 for (ids, rows), cmb in zip(groups, combos)]
            )
            _, inv, cnt = np.unique(keys, return_inverse=True, return_counts=True)
        else:
            subsets = np.concatenate(
                [rows[:, cmb].reshape(-1, j) for (ids, rows), cmb in zip(groups, combos)]
            )
            _, inv, cnt = np.unique(subsets, axis=0, return_inverse=True, return_counts=True)
        looked = cnt[inv.reshape(-1)]
        out, start = [], 0
        for (ids, rows), cmb in zip(groups, combos):
            size = len(ids) * len(cmb)
            out.append((ids, looked[start:start + size].reshape(len(ids), len(cmb))))
            start += size
        return out

    def max_codegree(self, j, cap=DEFAULT_CODEGREE_CAP) -> int:
        """Largest codegree over all j-sets; 0 when no edge has j vertices."""
        j = int(j)
        if j in self._maxcodeg:
            return self._maxcodeg[j]
        if j == 0:
            value = self.m
        elif j == 1:
            value = self.max_degree()
        else:
            occ = self.subset_occurrence_codegrees(j, cap)
            value = max((int(c.max()) for _, c in occ if c.size), default=0)
        self._maxcodeg[j] = value
        return value

    def conflict_counts(self, cap=DEFAULT_CODEGREE_CAP):
        """Number of edges other than ``e`` that share a vertex with ``e``.

        Inclusion-exclusion over the subsets of ``e``: the edges meeting ``e``
        are counted by alternating sums of subset codegrees.
        """
        if self._uniform and self.m and self._n ** 2 <= _DENSE_LIMIT and self._u <= 3:
            return self._conflicts_small_uniform()
        f = np.zeros(self.m, dtype=np.int64)
        for j in range(1, self._u + 1):
            sign = 1 if j % 2 else -1
            for ids, counts in self.subset_occurrence_codegrees(j, cap):
                f[ids] += sign * counts.sum(axis=1)
        return f - 1

    def _conflicts_small_uniform(self):
        # column-wise version of the alternating sum for edges of size <= 3
        cols, n, u = self.columns(), self._n, self._u
        small = self.m < 2**31 // 3
        dt = np.int32 if small else np.int64
        deg = self.degrees().astype(dt)
        f = np.take(deg, cols[0])
        for a in range(1, u):
            f += np.take(deg, cols[a])
        if u >= 2:
            kdt = np.int32 if n * n < 2**31 else np.int64
            keys = [cols[a].astype(kdt) * n + cols[b] for a, b in combinations(range(u), 2)]
            table = np.zeros(n * n, dtype=np.int64)
            for key in keys:
                table += np.bincount(key, minlength=n * n)
            table = table.astype(dt)
            for key in keys:
                f -= np.take(table, key)
        if u >= 3:
            f += self.edge_multiplicity().astype(dt)
        f -= 1
        return f.astype(np.int64)

    # derived hypergraphs

    def with_maps(self, vertex_map, edge_map) -> "Hypergraph":
        """Same hypergraph (sharing cached tables) with different parent maps."""
        clone = copy.copy(self)
        clone._vertex_map = np.asarray(vertex_map, dtype=np.int64)
        clone._edge_map = np.asarray(edge_map, dtype=np.int64)
        return clone

    def induce(self, keep) -> "Hypergraph":
        """Hypergraph induced on a vertex set, relabelled to ``0..|S|-1`` in
        increasing order of the old ids."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            if keep.shape != (self._n,):
                raise VertexRangeError("mask length must equal n")
            mask = keep
        else:
            keep = keep.astype(np.int64).reshape(-1)
            if len(keep) and (keep.min() < 0 or keep.max() >= self._n):
                raise VertexRangeError("induce() got a vertex outside the hypergraph")
            mask = np.zeros(self._n, dtype=bool)
            mask[keep] = True
        relabel = (np.cumsum(mask) - 1).astype(np.int32)
        if self.m:
            if self._uniform:
                cols = self.columns()
                edge_keep = mask[cols[0]]
                for c in cols[1:]:
                    edge_keep &= mask[c]
            else:
                edge_keep = np.minimum.reduceat(mask[self._flat].astype(np.int8), self._ptr[:-1]) > 0
        else:
            edge_keep = np.zeros(0, dtype=bool)
        kept = np.flatnonzero(edge_keep)
        sizes = self._sizes[kept]
        ptr = np.zeros(len(kept) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        if self._uniform:
            new_cols = [np.take(relabel, np.take(c, kept)) for c in self.columns()]
            out = np.empty((len(kept), self._u), dtype=np.int32)
            for a, c in enumerate(new_cols):
                out[:, a] = c
            flat = out.reshape(-1)
        else:
            entry_keep = np.repeat(edge_keep, self._sizes)
            flat = relabel[self._flat[entry_keep]]
        mult = self._mult[kept] if self._mult is not None else None
        child = Hypergraph._from_csr(
            int(mask.sum()), ptr, flat, self._u,
            vertex_map=np.flatnonzero(mask), edge_map=kept, multiplicity=mult,
        )
        if self._uniform and self._cols is not None:
            child._cols = new_cols
        return child


@dataclass(frozen=True)
class RegularityProfile:
    n: int
    D: float
    eps: float
    min_degree: int
    max_degree: int

    def to_dict(self):
        return {"n": self.n, "D": self.D, "eps": self.eps,
                "min_degree": self.min_degree, "max_degree": self.max_degree}


def fit_regularity(H: Hypergraph, eps_floor=None) -> RegularityProfile:
    """Centre ``D`` and tolerance ``eps`` such that every degree is in
    ``[(1-eps)D, (1+eps)D]``; ``eps`` is never below ``eps_floor`` (default 1/n)."""
    if H.m == 0:
        raise EmptyHypergraphError("cannot fit regularity to a hypergraph with no edges")
    lo, hi = H.min_degree(), H.max_degree()
    if lo == 0:
        raise ZeroDegreeError("minimum degree is 0")
    if eps_floor is None:
        eps_floor = 1.0 / H.n
    D = (lo + hi) / 2
    eps = max((hi - lo) / (hi + lo), float(eps_floor))
    return RegularityProfile(H.n, D, eps, lo, hi)


def is_regular(H: Hypergraph, D, eps) -> bool:
    deg = H.degrees()
    return bool(np.all(deg >= (1 - eps) * D) and np.all(deg <= (1 + eps) * D))


@dataclass
class MatchingCheck:
    valid: bool
    uncovered: int
    covered: int
    clashes: list  # vertices hit by more than one edge

    def __iter__(self):
        return iter((self.valid, self.uncovered))


def verify_matching(H: Hypergraph, M) -> MatchingCheck:
    """Check that the edge ids in ``M`` are pairwise disjoint."""
    ids = np.asarray(sorted(set(int(e) for e in M)), dtype=np.int64)
    if len(ids) and (ids[0] < 0 or ids[-1] >= H.m):
        bad = ids[0] if ids[0] < 0 else ids[-1]
        raise UnknownEdgeError(f"edge id {bad} not in 0..{H.m - 1}")
    verts = np.concatenate([H.flat[H.ptr[e]:H.ptr[e + 1]] for e in ids]) if len(ids) else np.zeros(0, np.int32)
    hits = np.bincount(verts, minlength=H.n)
    clashes = np.flatnonzero(hits > 1).tolist()
    covered = int(np.count_nonzero(hits))
    return MatchingCheck(not clashes, H.n - covered, covered, clashes)


def covered_vertices(H: Hypergraph, M):
    ids = np.asarray(M, dtype=np.int64)
    if len(ids) == 0:
        return np.zeros(0, dtype=np.int64)
    if H.is_uniform:
        return np.unique(H.rows[ids])
    return np.unique(np.concatenate([H.flat[H.ptr[e]:H.ptr[e + 1]] for e in ids]))


# text format: header "n m u", then one strictly increasing vertex list per edge

def save_hypergraph(H: Hypergraph, path, comment=None):
    path = Path(path)
    with path.open("w") as fh:
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"{H.n} {H.m} {H.uniformity_bound}\n")
        if H.m == 0:
            return
        if H.is_uniform:
            np.savetxt(fh, H.rows, fmt="%d", delimiter=" ")
        else:
            for e in range(H.m):
                fh.write(" ".join(map(str, H.edge(e))) + "\n")


def load_hypergraph(path) -> Hypergraph:
    lines = []
    with Path(path).open() as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                lines.append(line)
    if not lines:
        raise ParseError("empty hypergraph file")
    head = lines[0].split()
    if len(head) != 3:
        raise ParseError(f"header must be 'n m u', got {lines[0]!r}")
    try:
        n, m, u = (int(x) for x in head)
    except ValueError as exc:
        raise ParseError(f"bad header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != m:
        raise ParseError(f"header announces {m} edges, file has {len(body)}")
    try:
        tokens = [line.split() for line in body]
        if m and all(len(t) == u for t in tokens):
            arr = np.array(tokens, dtype=np.int64).reshape(m, u)
            return Hypergraph(n, arr, u)
        return Hypergraph(n, [[int(x) for x in t] for t in tokens], u)
    except ValueError as exc:
        if isinstance(exc, (VertexRangeError, MalformedEdgeError)):
            raise
        raise ParseError(str(exc)) from exc
