"""Independent reference computations shared by the tests."""

import networkx as nx


def min_cut_crossings(graph) -> int:
    """Edge-disjoint open crossings by Menger: the min cut between the two
    boundary columns of the undirected open bond graph, via networkx."""
    g = nx.Graph()
    g.add_nodes_from(["S", "T"])
    for e in range(graph.num_edges):
        if graph.is_open(e):
            a, b = graph.edge_endpoints(e)
            g.add_edge(a, b, capacity=1)
    for v in graph.left_boundary:
        g.add_edge("S", v, capacity=float("inf"))
    for v in graph.right_boundary:
        g.add_edge(v, "T", capacity=float("inf"))
    value, _ = nx.minimum_cut(g, "S", "T")
    return int(value)


# lattice shapes (rows, cols) with at most 40 bond edges
SMALL_SHAPES = [(1, 7), (2, 5), (2, 13), (3, 4), (3, 8), (4, 6), (5, 4), (6, 4), (8, 3)]


def edge_count(rows: int, cols: int) -> int:
    return rows * cols + (rows - 1) * (cols - 1)
