"""Instance generators and decoders.

Besides complete uniform hypergraphs this builds the two auxiliary
hypergraphs whose matchings encode combinatorial objects: rainbow directed
triangles in a properly coloured complete digraph, and partial Steiner
systems via the hypergraph of t-subsets.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ExtractionError, InstanceError
from .hypergraph import Hypergraph, save_hypergraph

DEFAULT_SIZE_CAP = 5 * 10**7


def combinations_array(n, r) -> np.ndarray:
    """All r-subsets of ``range(n)`` as rows, in lexicographic order."""
    if r < 0 or r > n:
        return np.zeros((0, max(r, 0)), dtype=np.int64)
    if r == 0:
        return np.zeros((1, 0), dtype=np.int64)
    # only first entries that leave room for the rest
    rows = np.arange(n - r + 1, dtype=np.int64)[:, None]
    for col in range(1, r):
        last = rows[:, -1]
        # next entry ranges over last+1 .. n-r+col
        counts = (n - r + col) - last
        rep = np.repeat(rows, counts, axis=0)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        nxt = np.repeat(last, counts) + 1 + (np.arange(len(rep)) - starts)
        rows = np.hstack([rep, nxt[:, None]])
    return rows


def _check_size(count, cap, what):
    if count > cap:
        raise InstanceError(f"{what} would have {count} entries, above the cap {cap}")


@dataclass
class Instance:
    """A hypergraph plus the meaning of each of its vertices."""

    kind: str
    hypergraph: Hypergraph
    roles: list                       # roles[v] = (kind, value)
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def role_map(self):
        return {str(v): {"kind": kind, "value": value} for v, (kind, value) in enumerate(self.roles)}

    def save(self, path):
        path = Path(path)
        save_hypergraph(self.hypergraph, path, comment=f"{self.kind} {json.dumps(self.params)}")
        side = {"kind": self.kind, "params": self.params, "roles": self.role_map()}
        side.update({k: v for k, v in self.extra.items() if _jsonable(v)})
        roles_path(path).write_text(json.dumps(side))


def roles_path(path):
    path = Path(path)
    return path.with_name(path.name + ".roles.json")


def _jsonable(v):
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def load_roles(path):
    p = roles_path(path)
    if not p.exists():
        return None
    return json.loads(p.read_text())


# complete uniform hypergraphs

def gen_complete_uniform(n, u, cap=DEFAULT_SIZE_CAP) -> Instance:
    _check_size(math.comb(n, u) * u, cap, f"K_{n}^({u})")
    H = Hypergraph(n, combinations_array(n, u), u)
    return Instance("complete", H, [("vertex", v) for v in range(n)], {"n": n, "u": u})


# t-subset hypergraphs and Steiner triple systems

def _colex_rank(rows, n):
    """Rank of each sorted row among all subsets of the same size, colex order."""
    rows = np.asarray(rows, dtype=np.int64)
    width = rows.shape[1]
    table = np.array([[math.comb(a, b) for b in range(width + 1)] for a in range(n + 1)], dtype=np.int64)
    rank = np.zeros(len(rows), dtype=np.int64)
    for i in range(width):
        rank += table[rows[:, i], i + 1]
    return rank


def gen_design_hypergraph(n, t, r, cap=DEFAULT_SIZE_CAP) -> Instance:
    """Vertices are the t-subsets of ``range(n)``; one edge per r-subset L,
    made of the t-subsets inside L. Matchings are partial Steiner systems."""
    if not 1 <= t < r <= n:
        raise InstanceError("need 1 <= t < r <= n")
    n_vertices = math.comb(n, t)
    per_edge = math.comb(r, t)
    _check_size(math.comb(n, r) * per_edge, cap, f"design({n},{t},{r})")
    tsets = combinations_array(n, t)
    # vertex ids follow colex order of the t-subsets
    order = np.argsort(_colex_rank(tsets, n), kind="stable")
    tsets = tsets[order]
    L = combinations_array(n, r)
    inner = combinations_array(r, t)
    ranks = np.stack([_colex_rank(L[:, cols], n) for cols in inner], axis=1)
    ranks.sort(axis=1)
    H = Hypergraph(n_vertices, ranks, per_edge)
    roles = [("tset", [int(x) for x in row]) for row in tsets]
    return Instance("design", H, roles, {"n": n, "t": t, "r": r})


def gen_steiner_triple_system(n) -> list:
    """Blocks of an STS(n) for ``n % 6 in (1, 3)`` (Skolem and Bose constructions)."""
    if n % 6 == 3:
        q = n // 3
        half = (q + 1) // 2

        def pt(x, i):
            return x + q * (i % 3)

        blocks = [(pt(x, 0), pt(x, 1), pt(x, 2)) for x in range(q)]
        for x, y in combinations(range(q), 2):
            z = ((x + y) * half) % q
            for i in range(3):
                blocks.append((pt(x, i), pt(y, i), pt(z, i + 1)))
    elif n % 6 == 1 and n > 1:
        m = (n - 1) // 6
        q = 2 * m
        inf = n - 1

        def pt(x, i):
            return x + q * (i % 3)

        def op(x, y):
            s = (x + y) % q
            return s // 2 if s % 2 == 0 else m + s // 2

        blocks = [(pt(x, 0), pt(x, 1), pt(x, 2)) for x in range(m)]
        for x in range(m):
            for i in range(3):
                blocks.append((inf, pt(x + m, i), pt(x, i + 1)))
        for x, y in combinations(range(q), 2):
            z = op(x, y)
            for i in range(3):
                blocks.append((pt(x, i), pt(y, i), pt(z, i + 1)))
    else:
        raise InstanceError(f"no Steiner triple system of order {n}")
    blocks = sorted(tuple(sorted(b)) for b in blocks)
    _verify_sts(n, blocks)
    return blocks


def _verify_sts(n, blocks):
    seen = np.zeros((n, n), dtype=np.int64)
    for a, b, c in blocks:
        for x, y in ((a, b), (a, c), (b, c)):
            seen[x, y] += 1
    iu = np.triu_indices(n, 1)
    if not np.all(seen[iu] == 1):
        raise InstanceError(f"construction for n={n} is not a Steiner triple system")


def gen_sts(n) -> Instance:
    blocks = gen_steiner_triple_system(n)
    H = Hypergraph(n, np.array(blocks, dtype=np.int64), 3)
    return Instance("sts", H, [("vertex", v) for v in range(n)], {"n": n})


# coloured digraphs and the triangle hypergraph

@dataclass
class ColoredDigraph:
    """Complete digraph with loops; ``color[i, j]`` is the colour of arc i->j."""

    color: np.ndarray

    @property
    def n(self):
        return self.color.shape[0]

    def is_proper(self) -> bool:
        n = self.n
        want = np.arange(n)
        rows_ok = np.all(np.sort(self.color, axis=1) == want)
        cols_ok = np.all(np.sort(self.color, axis=0) == want[:, None])
        return bool(rows_ok and cols_ok)

    def to_json(self):
        return {"n": self.n, "color": self.color.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["color"], dtype=np.int64))


def gen_cyclic_coloring(n) -> ColoredDigraph:
    """Colour of i->j is (i+j) mod n: proper, one colour class per anti-diagonal."""
    i = np.arange(n)
    return ColoredDigraph((i[:, None] + i[None, :]) % n)


def _directed_triangles(n):
    """Both cyclic orientations a->b->c->a and a->c->b->a of every triple."""
    T = combinations_array(n, 3)
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    fwd = np.stack([a, b, c], axis=1)   # a->b, b->c, c->a
    bwd = np.stack([a, c, b], axis=1)   # a->c, c->b, b->a
    return T, fwd, bwd


def _arc_colors(color, tri):
    x, y, z = tri[:, 0], tri[:, 1], tri[:, 2]
    return np.stack([color[x, y], color[y, z], color[z, x]], axis=1)


def bad_colors(G: ColoredDigraph):
    """Colours that are too popular in non-rainbow triangles or as loops."""
    n = G.n
    _, fwd, bwd = _directed_triangles(n)
    counts = np.zeros(n, dtype=np.int64)
    for tri in (fwd, bwd):
        cols = _arc_colors(G.color, tri)
        s = np.sort(cols, axis=1)
        two_equal = ((s[:, 0] == s[:, 1]) | (s[:, 1] == s[:, 2])) & ~((s[:, 0] == s[:, 1]) & (s[:, 1] == s[:, 2]))
        # the colour appearing exactly once
        odd = np.where(s[:, 0] == s[:, 1], s[:, 2], s[:, 0])
        counts += np.bincount(odd[two_equal], minlength=n)
    tri_bad = np.flatnonzero(counts >= n**1.5)
    loops = np.bincount(np.diag(G.color), minlength=n)
    loop_bad = np.flatnonzero(loops >= math.sqrt(n))
    return set(tri_bad.tolist()), set(loop_bad.tolist()), counts


def gen_triangle_aux(G: ColoredDigraph) -> Instance:
    """6-uniform hypergraph on digraph vertices plus good colours; one edge per
    rainbow directed triangle with only good colours."""
    if not G.is_proper():
        raise InstanceError("colouring must be proper")
    n = G.n
    tri_bad, loop_bad, _ = bad_colors(G)
    good = np.array(sorted(set(range(n)) - tri_bad - loop_bad), dtype=np.int64)
    color_vertex = np.full(n, -1, dtype=np.int64)
    color_vertex[good] = n + np.arange(len(good))
    _, fwd, bwd = _directed_triangles(n)
    rows, orient = [], []
    for tag, tri in ((0, fwd), (1, bwd)):
        cols = _arc_colors(G.color, tri)
        rainbow = (cols[:, 0] != cols[:, 1]) & (cols[:, 1] != cols[:, 2]) & (cols[:, 0] != cols[:, 2])
        ok = rainbow & np.all(color_vertex[cols] >= 0, axis=1)
        rows.append(np.hstack([np.sort(tri[ok], axis=1), np.sort(color_vertex[cols[ok]], axis=1)]))
        orient.append(np.full(int(ok.sum()), tag))
    edges = np.concatenate(rows)
    tags = np.concatenate(orient)
    order = np.lexsort(np.column_stack([edges, tags]).T[::-1])
    edges, tags = edges[order], tags[order]
    H = Hypergraph(n + len(good), edges, 6)
    roles = [("vertex", v) for v in range(n)] + [("color", int(c)) for c in good]
    return Instance(
        "triangle-aux", H, roles, {"n": n},
        extra={"good_colors": good.tolist(), "triangle_bad": sorted(tri_bad),
               "loop_bad": sorted(loop_bad), "color": G.color.tolist()},
    )


# decoding matchings

@dataclass
class TriangleFactor:
    triangles: list          # (v1, v2, v3) in arc order v1->v2->v3->v1
    colors: list             # arc colours in the same order
    valid: bool
    problems: list

    @property
    def covered_vertices(self):
        return 3 * len(self.triangles)


def extract_triangle_factor(inst: Instance, matching) -> TriangleFactor:
    color = np.asarray(inst.extra["color"])
    n = color.shape[0]
    H = inst.hypergraph
    tris, cols, problems = [], [], []
    owner_v, owner_c = {}, {}
    for e in matching:
        verts = H.edge(int(e))
        vs = [v for v in verts if v < n]
        cs = [inst.roles[v][1] for v in verts if v >= n]
        if len(vs) != 3 or len(cs) != 3:
            raise ExtractionError(f"edge {e} is not three vertices plus three colours")
        a, b, c = vs
        found = None
        for tri in ((a, b, c), (a, c, b)):
            arc = [int(color[tri[0], tri[1]]), int(color[tri[1], tri[2]]), int(color[tri[2], tri[0]])]
            if sorted(arc) == sorted(cs):
                found = (tri, arc)
                break
        if found is None:
            raise ExtractionError(f"edge {e} does not match a directed triangle of the colouring")
        tri, arc = found
        if len(set(arc)) != 3:
            problems.append(("not rainbow", int(e)))
        for v in tri:
            if v in owner_v:
                problems.append(("shared vertex", owner_v[v], int(e)))
            owner_v[v] = int(e)
        for c in arc:
            if c in owner_c:
                problems.append(("shared colour", owner_c[c], int(e)))
            owner_c[c] = int(e)
        tris.append(tuple(int(v) for v in tri))
        cols.append(tuple(arc))
    return TriangleFactor(tris, cols, not problems, problems)


@dataclass
class PartialSteiner:
    blocks: list
    valid: bool
    overcovered: list        # t-sets lying in more than one block

    @property
    def size(self):
        return len(self.blocks)


def extract_partial_steiner(inst: Instance, matching) -> PartialSteiner:
    H = inst.hypergraph
    t = inst.params["t"]
    blocks, seen, over = [], {}, []
    for e in matching:
        ground = sorted({x for v in H.edge(int(e)) for x in inst.roles[v][1]})
        blocks.append(tuple(ground))
        for ts in combinations(ground, t):
            if ts in seen:
                over.append(ts)
            seen[ts] = True
    return PartialSteiner(blocks, not over, over)


def design_edge_ids(inst: Instance, blocks) -> list:
    """Edge ids of the design hypergraph that correspond to the given r-sets."""
    r, n = inst.params["r"], inst.params["n"]
    rank = {}
    L = combinations_array(n, r)
    for e, row in enumerate(L):
        rank[tuple(int(x) for x in row)] = e
    return [rank[tuple(sorted(b))] for b in blocks]
