"""Disjoint lengthwise crossings of a corridor bond graph and the closed-form
percolation constants that predict how many exist."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from percroute.lattice import BondGraph

LN6 = math.log(6.0)


@dataclass(frozen=True)
class PercolationConstants:
    c: float
    kappa: float
    p: float
    beta: float
    a: float

    @property
    def beta_positive(self) -> bool:
        return self.beta > 0

    @property
    def a_below_minus_one(self) -> bool:
        return self.a < -1


def percolation_constants(c: float, kappa: float) -> PercolationConstants:
    if not c > 0 or not kappa > 0:
        raise ValueError(f"c and kappa must be positive (c={c!r}, kappa={kappa!r})")
    p = -math.expm1(-c * c)
    beta = 1.0 - (kappa * LN6 + 4.0) / (kappa * c * c)
    a = 0.5 * ((beta - 1.0) * kappa * c * c + kappa * LN6 + 1.0)
    return PercolationConstants(c=c, kappa=kappa, p=p, beta=beta, a=a)


def lemma2_bound(n: float, c: float, kappa: float) -> tuple[int, float]:
    """Guaranteed crossing count ``m`` and the lower bound on its probability.

    ``m`` is floored and the probability clamped to [0, 1].
    """
    k = percolation_constants(c, kappa)
    if not k.beta_positive:
        raise ValueError(f"beta={k.beta:.4g} <= 0 for c={c}, kappa={kappa}: no crossings guaranteed")
    if not n > 0:
        raise ValueError("n must be positive")
    log_factor = math.log(math.sqrt(n) / (math.sqrt(2.0) * c))
    m = max(0, math.floor(k.beta * kappa * log_factor + 1e-9))
    prob = 1.0 - (4.0 / 3.0) * (n / (2.0 * c * c)) ** k.a
    return m, min(1.0, max(0.0, prob))


@dataclass(frozen=True)
class CrossingSet:
    """Edge-disjoint open crossings, each a list of edge ids from the left
    boundary to the right boundary."""

    paths: list[list[int]] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.paths)

    def to_json(self) -> dict:
        return {"count": self.count, "paths": [list(map(int, p)) for p in self.paths]}

    @classmethod
    def from_json(cls, doc: dict) -> CrossingSet:
        return cls(paths=[list(p) for p in doc["paths"]])


# --- max flow on the lattice ---------------------------------------------------
#
# Flow on a horizontal edge is +1 left->right, on a vertical edge +1 upwards
# (row i -> row i+1).  Vertices are (i, j) with 0 <= j <= cols; the source
# feeds every column-0 vertex and every column-cols vertex drains to the sink.


@njit(cache=True)
def _neighbours(i, j, rows, cols):
    # (ni, nj, kind, ei, ej, sign): kind 0 = horizontal edge (ei, ej), 1 = vertical
    # edge (ei, ej-1 in v arrays); sign +1 when moving along the positive direction.
    out = np.empty((4, 6), dtype=np.int64)
    k = 0
    if j < cols:
        out[k] = (i, j + 1, 0, i, j, 1)
        k += 1
    if i < rows - 1 and 1 <= j <= cols - 1:
        out[k] = (i + 1, j, 1, i, j, 1)
        k += 1
    if i >= 1 and 1 <= j <= cols - 1:
        out[k] = (i - 1, j, 1, i - 1, j, -1)
        k += 1
    if j >= 1:
        out[k] = (i, j - 1, 0, i, j - 1, -1)
        k += 1
    return out[:k]


@njit(cache=True)
def _max_flow(h_open, v_open):
    rows, cols = h_open.shape
    fh = np.zeros((rows, cols), dtype=np.int64)
    fv = np.zeros((max(rows - 1, 0), max(cols - 1, 0)), dtype=np.int64)
    value = 0
    # straight tracks first
    for i in range(rows):
        full = True
        for j in range(cols):
            if not h_open[i, j]:
                full = False
                break
        if full:
            for j in range(cols):
                fh[i, j] = 1
            value += 1
    nv = rows * (cols + 1)
    parent = np.empty(nv, dtype=np.int64)
    pkind = np.empty(nv, dtype=np.int64)
    pei = np.empty(nv, dtype=np.int64)
    pej = np.empty(nv, dtype=np.int64)
    psign = np.empty(nv, dtype=np.int64)
    queue = np.empty(nv, dtype=np.int64)
    while value < rows:
        parent[:] = -2
        head = 0
        tail = 0
        for i in range(rows):
            v = i * (cols + 1)
            parent[v] = -1
            queue[tail] = v
            tail += 1
        goal = -1
        while head < tail and goal < 0:
            v = queue[head]
            head += 1
            i = v // (cols + 1)
            j = v % (cols + 1)
            nb = _neighbours(i, j, rows, cols)
            for t in range(nb.shape[0]):
                ni, nj, kind, ei, ej, sign = nb[t]
                w = ni * (cols + 1) + nj
                if parent[w] != -2:
                    continue
                if kind == 0:
                    if not h_open[ei, ej]:
                        continue
                    f = fh[ei, ej]
                else:
                    if not v_open[ei, ej - 1]:
                        continue
                    f = fv[ei, ej - 1]
                if sign * f >= 1:
                    continue
                parent[w] = v
                pkind[w] = kind
                pei[w] = ei
                pej[w] = ej
                psign[w] = sign
                if nj == cols:
                    goal = w
                    break
                queue[tail] = w
                tail += 1
        if goal < 0:
            break
        w = goal
        while parent[w] >= 0:
            if pkind[w] == 0:
                fh[pei[w], pej[w]] += psign[w]
            else:
                fv[pei[w], pej[w] - 1] += psign[w]
            w = parent[w]
        value += 1
    return value, fh, fv


@njit(cache=True)
def _decompose(fh, fv, rows, cols):
    """Trace unit flow into simple left-right paths (edge id sequences)."""
    nh = rows * cols
    used_h = np.zeros((rows, cols), dtype=np.bool_)
    used_v = np.zeros(fv.shape, dtype=np.bool_)
    nv = rows * (cols + 1)
    pos_on_path = np.full(nv, -1, dtype=np.int64)
    flat = np.empty(rows * cols + fv.size + 1, dtype=np.int64)
    ptr = np.zeros(rows + 1, dtype=np.int64)
    npaths = 0
    nflat = 0
    verts = np.empty(nv + 1, dtype=np.int64)
    edges = np.empty(nv + 1, dtype=np.int64)
    for start in range(rows):
        if fh[start, 0] != 1 or used_h[start, 0]:
            continue
        length = 0
        v = start * (cols + 1)
        verts[0] = v
        pos_on_path[v] = 0
        while True:
            i = v // (cols + 1)
            j = v % (cols + 1)
            if j == cols:
                break
            nb = _neighbours(i, j, rows, cols)
            moved = False
            for t in range(nb.shape[0]):
                ni, nj, kind, ei, ej, sign = nb[t]
                if kind == 0:
                    if used_h[ei, ej] or fh[ei, ej] != sign:
                        continue
                    used_h[ei, ej] = True
                    eid = ei * cols + ej
                else:
                    if used_v[ei, ej - 1] or fv[ei, ej - 1] != sign:
                        continue
                    used_v[ei, ej - 1] = True
                    eid = nh + ei * (cols - 1) + (ej - 1)
                w = ni * (cols + 1) + nj
                if pos_on_path[w] >= 0:
                    # closed a loop: drop it
                    back = pos_on_path[w]
                    for q in range(back + 1, length + 1):
                        pos_on_path[verts[q]] = -1
                    length = back
                else:
                    edges[length] = eid
                    length += 1
                    verts[length] = w
                    pos_on_path[w] = length
                v = verts[length]
                moved = True
                break
            if not moved:
                break
        for q in range(length + 1):
            pos_on_path[verts[q]] = -1
        for q in range(length):
            flat[nflat] = edges[q]
            nflat += 1
        npaths += 1
        ptr[npaths] = nflat
    return flat[:nflat], ptr[: npaths + 1]


def crossing_arrays(h_open: np.ndarray, v_open: np.ndarray):
    """Max-flow value plus the flattened disjoint path edge ids and offsets."""
    h = np.ascontiguousarray(h_open, dtype=np.bool_)
    rows, cols = h.shape
    v = np.ascontiguousarray(v_open, dtype=np.bool_).reshape(max(rows - 1, 0), max(cols - 1, 0))
    value, fh, fv = _max_flow(h, v)
    flat, ptr = _decompose(fh, fv, rows, cols)
    return int(value), flat, ptr


def max_disjoint_crossings(graph: BondGraph) -> CrossingSet:
    """Maximum family of edge-disjoint open left-right crossings.

    Unit-capacity augmenting paths (BFS), seeded with every fully open
    straight track; the flow is then decomposed deterministically.
    """
    if graph.rows == 0 or graph.cols == 0:
        return CrossingSet()
    value, flat, ptr = crossing_arrays(graph.h_open, graph.v_open)
    paths = [flat[ptr[k] : ptr[k + 1]].tolist() for k in range(len(ptr) - 1)]
    if len(paths) != value:
        raise AssertionError(f"flow decomposition produced {len(paths)} paths for flow {value}")
    return CrossingSet(paths=paths)


def path_is_crossing(graph: BondGraph, path: list[int]) -> bool:
    """Whether ``path`` is a connected open edge walk from left to right."""
    if not path:
        return False
    left = set(graph.left_boundary)
    right = set(graph.right_boundary)
    a, b = graph.edge_endpoints(path[0])
    if a in left:
        cur = b
    elif b in left:
        cur = a
    else:
        return False
    if not graph.is_open(path[0]):
        return False
    for e in path[1:]:
        if not graph.is_open(e):
            return False
        a, b = graph.edge_endpoints(e)
        if a == cur:
            cur = b
        elif b == cur:
            cur = a
        else:
            return False
    return cur in right


# --- exhaustive oracle ------------------------------------------------------

BRUTE_FORCE_LIMIT = 40


def _minimal_crossings(graph: BondGraph) -> list[list[int]]:
    """Every simple open path from a column-0 vertex to a column-``cols``
    vertex that touches the boundary columns only at its ends, as a bitmask
    list grouped by start row."""
    rows, cols = graph.rows, graph.cols
    adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(graph.num_vertices)}
    for e in range(graph.num_edges):
        if graph.is_open(e):
            a, b = graph.edge_endpoints(e)
            adj[a].append((b, e))
            adj[b].append((a, e))
    by_row: list[list[int]] = []
    for i in range(rows):
        found: list[int] = []
        start = graph.vertex(i, 0)
        stack = [(start, 0, 1 << start)]
        while stack:
            v, mask, seen = stack.pop()
            for w, e in adj[v]:
                if seen >> w & 1:
                    continue
                col = w % (cols + 1)
                if col == 0:
                    continue
                if col == cols:
                    found.append(mask | (1 << e))
                    continue
                stack.append((w, mask | (1 << e), seen | (1 << w)))
        by_row.append(found)
    return by_row


def brute_force_crossings(graph: BondGraph) -> int:
    """Maximum number of edge-disjoint open crossings by exhaustive search.

    Each crossing can be trimmed to a simple path meeting the boundary
    columns only at its ends, so it owns a distinct column-0 edge; the search
    therefore picks at most one crossing per start row.
    """
    if graph.rows * graph.cols > BRUTE_FORCE_LIMIT:
        raise ValueError(f"lattice {graph.rows}x{graph.cols} too large for exhaustive search")
    if graph.rows == 0 or graph.cols == 0:
        return 0
    by_row = _minimal_crossings(graph)
    rows = graph.rows
    best = 0

    def search(row: int, used: int, count: int) -> None:
        nonlocal best
        if count > best:
            best = count
        if row == rows or count + (rows - row) <= best:
            return
        for mask in by_row[row]:
            if not mask & used:
                search(row + 1, used | mask, count + 1)
                if best == rows:
                    return
        search(row + 1, used, count)

    search(0, 0, 0)
    return best


@njit(cache=True)
def _batch_crossings(occupants, rows, cols):
    m = occupants.shape[0]
    nh = rows * cols
    counts = np.zeros(m, dtype=np.int64)
    chunks = []
    ptr_chunks = []
    total = 0
    for q in range(m):
        h = np.empty((rows, cols), dtype=np.bool_)
        v = np.empty((max(rows - 1, 0), max(cols - 1, 0)), dtype=np.bool_)
        for i in range(rows):
            for j in range(cols):
                h[i, j] = occupants[q, i * cols + j] >= 0
        for i in range(rows - 1):
            for j in range(cols - 1):
                v[i, j] = occupants[q, nh + i * (cols - 1) + j] >= 0
        value, fh, fv = _max_flow(h, v)
        flat, ptr = _decompose(fh, fv, rows, cols)
        counts[q] = value
        nodes = np.empty(flat.shape[0], dtype=np.int64)
        for t in range(flat.shape[0]):
            nodes[t] = occupants[q, flat[t]]
        chunks.append(nodes)
        ptr_chunks.append(ptr[1:] + total)
        total += flat.shape[0]
    flat_all = np.empty(total, dtype=np.int64)
    npaths = 0
    for q in range(m):
        npaths += counts[q]
    ptr_all = np.zeros(npaths + 1, dtype=np.int64)
    pos = 0
    k = 1
    for q in range(m):
        a = chunks[q]
        flat_all[pos : pos + a.shape[0]] = a
        pos += a.shape[0]
        p = ptr_chunks[q]
        for t in range(p.shape[0]):
            ptr_all[k] = p[t]
            k += 1
    return counts, flat_all, ptr_all


def batch_crossings(occupants: np.ndarray, rows: int, cols: int):
    """Maximum disjoint crossings of many corridors at once.

    ``occupants`` has one row per corridor in edge-id order (-1 marks a closed
    diamond).  Returns per-corridor crossing counts and the crossings as one
    flat array of occupant node ids with path offsets, corridor by corridor.
    """
    occ = np.ascontiguousarray(occupants, dtype=np.int64)
    if rows == 0 or cols == 0 or occ.shape[0] == 0:
        return np.zeros(occ.shape[0], dtype=np.int64), np.empty(0, np.int64), np.zeros(1, np.int64)
    return _batch_crossings(occ, rows, cols)
