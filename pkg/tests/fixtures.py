"""Small hypergraphs shared by the unit and acceptance tests."""
from nibble_forge.hypergraph import Hypergraph

FANO = [(0, 1, 2), (0, 3, 4), (0, 5, 6), (1, 3, 5), (1, 4, 6), (2, 3, 6), (2, 4, 5)]


def small_fixtures():
    """name -> Hypergraph, every one with at most 10 edges."""
    k5 = [(a, b, c) for a in range(5) for b in range(a + 1, 5) for c in range(b + 1, 5)]
    return {
        "fano": Hypergraph(7, FANO),
        "k5_3": Hypergraph(5, k5),
        "c6_graph": Hypergraph(6, [(i, (i + 1) % 6) if i < 5 else (0, 5) for i in range(6)]),
        "multi_mixed": Hypergraph(6, [(0, 1, 2), (0, 1, 2), (2, 3), (3, 4, 5), (1, 5), (4,), (0, 3, 5)],
                                  uniformity_bound=3),
        "two_disjoint_pairs": Hypergraph(4, [(0, 1), (2, 3)]),
        "star": Hypergraph(6, [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]),
        "k4_3_doubled": Hypergraph(4, [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] * 2),
    }
