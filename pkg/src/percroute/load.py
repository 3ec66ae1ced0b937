"""Loading factors: how many source-destination paths each relay serves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from percroute.lattice import SquareGrid

DELTA = 27.0 * math.pi  # constant of the loading bound
MAX_PER_PAIR = 9  # diamonds of one corridor a cell can meet


def load_bound(n: float) -> float:
    if not n > 1:
        raise ValueError("n must exceed 1")
    return DELTA * math.sqrt(n) * math.log(n)


def corridor_intersect_prob_bound(n: float, c: float, kappa: float) -> float:
    """Upper bound ``mu ln n / sqrt(n)`` on the chance that a random corridor meets a given cell."""
    if not c > 1.0 / math.sqrt(2.0):
        raise ValueError(f"c must exceed 1/sqrt(2) (got {c})")
    mu = c * (2.0 + 2.0 * math.sqrt(2.0) * kappa / math.pi)
    return mu * math.log(n) / math.sqrt(n)


@dataclass(frozen=True)
class LoadMap:
    side_c: float
    cell_keys: np.ndarray = field(repr=False)
    load: np.ndarray = field(repr=False)  # aligned with cell_keys
    pair_cell_max: int = 0  # most paths of a single pair through one cell
    intersections: np.ndarray | None = field(default=None, repr=False)

    @property
    def L_max(self) -> int:
        return int(self.load.max(initial=0))

    def radial_means(self, radius: float, inner: float = 0.25, outer: float = 0.75) -> tuple[float, float]:
        """Mean load of cells centred within ``inner*radius`` and beyond ``outer*radius``."""
        centre = (self.cell_keys + 0.5) * self.side_c
        r = np.hypot(centre[:, 0], centre[:, 1])
        near = self.load[r <= inner * radius]
        far = self.load[r >= outer * radius]
        return (float(near.mean()) if len(near) else math.nan, float(far.mean()) if len(far) else math.nan)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell_x", "cell_y", "L"])
            for (x, y), value in zip(self.cell_keys.tolist(), self.load.tolist()):
                w.writerow([x, y, value])


class LoadAccumulator:
    """Streams path incidences into per-cell loads, chunk by chunk of pairs."""

    def __init__(self, grid: SquareGrid):
        self.grid = grid
        self.load = np.zeros(len(grid.cell_keys), dtype=np.int64)
        self.pair_cell_max = 0

    def add(self, path_pair: np.ndarray, ptr: np.ndarray, nodes: np.ndarray) -> None:
        if len(nodes) == 0:
            return
        k = len(self.grid.cell_keys)
        cells = self.grid.node_cell_id[nodes]
        path_of = np.repeat(np.arange(len(ptr) - 1, dtype=np.int64), np.diff(ptr))
        distinct = np.unique(path_of * k + cells)
        p, cell = np.divmod(distinct, k)
        self.load += np.bincount(cell, minlength=k)
        pair = np.asarray(path_pair, dtype=np.int64)[p]
        _, per_pair = np.unique(pair * k + cell, return_counts=True)
        self.pair_cell_max = max(self.pair_cell_max, int(per_pair.max()))

    def result(self, intersections: np.ndarray | None = None) -> LoadMap:
        return LoadMap(
            side_c=self.grid.side_c,
            cell_keys=self.grid.cell_keys,
            load=self.load.copy(),
            pair_cell_max=self.pair_cell_max,
            intersections=intersections,
        )


def path_max_load(load: np.ndarray, grid: SquareGrid, ptr: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Largest cell load met by each path."""
    if len(ptr) < 2:
        return np.zeros(0, dtype=np.int64)
    per_node = load[grid.node_cell_id[nodes]]
    return np.maximum.reduceat(per_node, ptr[:-1]) if len(nodes) else np.zeros(len(ptr) - 1, np.int64)


def corridor_cell_hits(corridor, cell_keys: np.ndarray, c: float) -> np.ndarray:
    """Cells (given by integer keys) whose square overlaps the corridor rectangle.

    Separating-axis test on the two rectangles, boundaries counting as overlap.
    """
    keys = np.asarray(cell_keys, dtype=float).reshape(-1, 2)
    lo = keys * c
    corners = np.stack(
        [lo, lo + [c, 0.0], lo + [0.0, c], lo + [c, c]], axis=1
    )  # (K, 4, 2)
    o = np.asarray(corridor.origin, dtype=float)
    a = np.asarray(corridor.axis, dtype=float)
    p = np.asarray(corridor.perp, dtype=float)
    rect = np.array([o, o + corridor.length * a, o + corridor.width * p, o + corridor.length * a + corridor.width * p])
    hit = np.ones(len(keys), dtype=bool)
    # square axes
    for dim in (0, 1):
        hit &= (rect[:, dim].min() <= lo[:, dim] + c) & (rect[:, dim].max() >= lo[:, dim])
    # rectangle axes
    rel = corners - o
    for vec, extent in ((a, corridor.length), (p, corridor.width)):
        proj = rel @ vec
        hit &= (proj.min(axis=1) <= extent) & (proj.max(axis=1) >= 0.0)
    return hit


def compute_load(route_sets, grid: SquareGrid, corridors=None) -> LoadMap:
    """Per-cell loads from remapped route sets.

    With ``corridors`` (one per route set) the per-cell count of corridors
    meeting the cell is computed too and the cap of nine incidences per
    corridor is asserted.
    """
    nodes, lengths, pair_of = [], [], []
    for q, rs in enumerate(route_sets):
        for path in rs.paths:
            seq = np.asarray(path.node_seq, dtype=np.int64)
            if len(seq) and (grid.relay_of[seq] != seq).any():
                raise AssertionError(f"route of pair {rs.pair} holds a node that is not a relay")
            nodes.append(seq)
            lengths.append(len(seq))
            pair_of.append(q)
    acc = LoadAccumulator(grid)
    if nodes:
        ptr = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
        acc.add(np.asarray(pair_of, dtype=np.int64), ptr, np.concatenate(nodes))
    hits = None
    if corridors is not None:
        hits = np.zeros(len(grid.cell_keys), dtype=np.int64)
        for cor in corridors:
            hits += corridor_cell_hits(cor, grid.cell_keys, grid.side_c)
        if (acc.load > MAX_PER_PAIR * hits).any():
            bad = int(np.argmax(acc.load - MAX_PER_PAIR * hits))
            raise AssertionError(
                f"cell {grid.cell_keys[bad].tolist()} has load {acc.load[bad]} > 9 x {hits[bad]} corridors"
            )
    return acc.result(hits)
