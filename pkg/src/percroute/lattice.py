"""Diamond tessellation of routing corridors, the bond graph it induces, and the
global square tessellation with relay nodes.

Corridor-local frame: ``u`` runs along the corridor, ``v`` across it, with the
origin at the corridor's lower-left corner.  The bond lattice inside has
``rows`` horizontal tracks spaced ``s = sqrt(2)*c`` apart and ``cols``
horizontal bonds per track.  Every bond owns the diamond (square of side ``c``
turned by 45 degrees) whose diagonal it is:

* horizontal bond ``(i, j)`` joins vertices ``(i, j)`` and ``(i, j+1)``;
* vertical bond ``(i, j)`` joins ``(i, j)`` and ``(i+1, j)`` for interior
  vertex columns ``1 <= j <= cols-1``.

Horizontal and vertical diamonds alternate column by column and tile the
block without overlap.  A diamond is open when it holds at least one point;
its occupant is the point closest to the diamond centre (lowest index on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from numba import njit

if TYPE_CHECKING:  # pragma: no cover
    from percroute.routing import Corridor

SQRT2 = math.sqrt(2.0)


class CorridorTooNarrow(ValueError):
    """The corridor cannot hold a single row (or column) of diamonds."""


def corridor_log_factor(n: float, c: float) -> float:
    return math.log(math.sqrt(n) / (SQRT2 * c))


def corridor_width(n: float, c: float, kappa: float) -> float:
    return SQRT2 * c * kappa * corridor_log_factor(n, c)


def corridor_rows(n: float, c: float, kappa: float) -> int:
    # tiny epsilon so that exact integers are not lost to rounding
    return max(0, math.floor(kappa * corridor_log_factor(n, c) + 1e-9))


def corridor_cols(n: float, c: float) -> int:
    return max(0, math.floor(2.0 * math.sqrt(n) / (SQRT2 * c) + 1e-9))


@dataclass(frozen=True)
class LatticeFrame:
    origin: np.ndarray
    axis: np.ndarray
    perp: np.ndarray
    u_off: float
    v_off: float

    def to_world(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.origin + u[..., None] * self.axis + v[..., None] * self.perp

    def to_local(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel = np.asarray(pts, dtype=float) - self.origin
        return rel @ self.axis, rel @ self.perp


@dataclass(frozen=True)
class DiamondLattice:
    frame: LatticeFrame
    side_c: float
    rows: int
    cols: int
    h_occupant: np.ndarray = field(repr=False)  # (rows, cols), -1 when closed
    v_occupant: np.ndarray = field(repr=False)  # (rows-1, cols-1), -1 when closed

    @property
    def spacing(self) -> float:
        return SQRT2 * self.side_c

    @property
    def h_open(self) -> np.ndarray:
        return self.h_occupant >= 0

    @property
    def v_open(self) -> np.ndarray:
        return self.v_occupant >= 0

    @property
    def num_diamonds(self) -> int:
        return self.h_occupant.size + self.v_occupant.size

    def open_fraction(self) -> float:
        total = self.num_diamonds
        return float(self.h_open.sum() + self.v_open.sum()) / total if total else 0.0

    def h_centers(self) -> np.ndarray:
        s = self.spacing
        j, i = np.meshgrid(np.arange(self.cols), np.arange(self.rows))
        return self.frame.to_world(self.frame.u_off + (j + 0.5) * s, self.frame.v_off + (i + 0.5) * s)

    def v_centers(self) -> np.ndarray:
        s = self.spacing
        j, i = np.meshgrid(np.arange(1, self.cols), np.arange(self.rows - 1))
        return self.frame.to_world(self.frame.u_off + j * s, self.frame.v_off + (i + 1) * s)

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "side_c": self.side_c,
            "h_open": self.h_open.astype(int).ravel().tolist(),
            "v_open": self.v_open.astype(int).ravel().tolist(),
            "h_occupant": self.h_occupant.ravel().tolist(),
            "v_occupant": self.v_occupant.ravel().tolist(),
        }


def lattice_frame(corridor: Corridor, rows: int, cols: int) -> LatticeFrame:
    s = SQRT2 * corridor.c
    return LatticeFrame(
        origin=np.asarray(corridor.origin, dtype=float),
        axis=np.asarray(corridor.axis, dtype=float),
        perp=np.asarray(corridor.perp, dtype=float),
        u_off=0.5 * (corridor.length - cols * s),
        v_off=0.5 * (corridor.width - rows * s),
    )


def locate_diamonds(u: np.ndarray, v: np.ndarray, c: float, rows: int, cols: int):
    """Map block-local coordinates to diamonds.

    Returns ``(kind, i, j)`` arrays where kind is 0 for horizontal, 1 for
    vertical and -1 for points outside every diamond of the block.  For
    vertical diamonds ``j`` is the vertex column (1..cols-1).
    """
    h = c / SQRT2
    x = np.asarray(u, dtype=float) / h
    y = (np.asarray(v, dtype=float) - h) / h
    big_a = 2 * np.floor((x + y) / 2).astype(np.int64) + 1
    big_d = 2 * np.floor((x - y) / 2).astype(np.int64) + 1
    a = (big_a + big_d) // 2
    b = (big_a - big_d) // 2
    horiz = (a % 2) != 0
    i = np.where(horiz, b // 2, (b - 1) // 2)
    j = np.where(horiz, (a - 1) // 2, a // 2)
    ok_h = horiz & (i >= 0) & (i < rows) & (j >= 0) & (j < cols)
    ok_v = ~horiz & (i >= 0) & (i < rows - 1) & (j >= 1) & (j <= cols - 1)
    kind = np.full(x.shape, -1, dtype=np.int64)
    kind[ok_h] = 0
    kind[ok_v] = 1
    return kind, i, j


def tessellate_corridor(corridor: Corridor, nodes: np.ndarray) -> DiamondLattice:
    """Tessellate ``corridor`` with diamonds and mark them open/closed from ``nodes``."""
    c = corridor.c
    if not c > 0 or not corridor.length > 0 or not corridor.width > 0:
        raise CorridorTooNarrow("corridor dimensions and c must be positive")
    rows = math.floor(corridor.width / (SQRT2 * c) + 1e-9)
    cols = math.floor(corridor.length / (SQRT2 * c) + 1e-9)
    if rows < 1 or cols < 1:
        raise CorridorTooNarrow(
            f"corridor {corridor.length:.3g} x {corridor.width:.3g} holds no diamond of side {c:g}"
        )
    frame = lattice_frame(corridor, rows, cols)
    h_occ = np.full((rows, cols), -1, dtype=np.int64)
    v_occ = np.full((rows - 1, cols - 1), -1, dtype=np.int64)
    pts = np.asarray(nodes, dtype=float).reshape(-1, 2)
    if len(pts):
        u, v = frame.to_local(pts)
        u = u - frame.u_off
        v = v - frame.v_off
        kind, i, j = locate_diamonds(u, v, c, rows, cols)
        idx = np.flatnonzero(kind >= 0)
        kind, i, j = kind[idx], i[idx], j[idx]
        s = SQRT2 * c
        cu = np.where(kind == 0, (j + 0.5) * s, j * s)
        cv = np.where(kind == 0, (i + 0.5) * s, (i + 1) * s)
        d2 = (u[idx] - cu) ** 2 + (v[idx] - cv) ** 2
        flat = np.where(kind == 0, i * cols + j, rows * cols + i * (cols - 1) + (j - 1))
        order = np.lexsort((idx, d2, flat))
        flat_sorted = flat[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = flat_sorted[1:] != flat_sorted[:-1]
        winners = order[first]
        for f, node in zip(flat[winners], idx[winners]):
            if f < rows * cols:
                h_occ[f // cols, f % cols] = node
            else:
                g = f - rows * cols
                v_occ[g // (cols - 1), g % (cols - 1)] = node
    return DiamondLattice(frame=frame, side_c=c, rows=rows, cols=cols, h_occupant=h_occ, v_occupant=v_occ)


# --- bond graph -------------------------------------------------------------

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass(frozen=True)
class BondEdge:
    u: int
    v: int
    orientation: str
    diamond: tuple[int, int]
    open: bool


@dataclass(frozen=True)
class BondGraph:
    """Bond lattice of a corridor.

    Vertex ``(i, j)`` has id ``i*(cols+1) + j``.  Horizontal edge ``(i, j)`` has
    id ``i*cols + j``; vertical edge ``(i, j)`` (vertex column ``j``) has id
    ``rows*cols + i*(cols-1) + j - 1``.
    """

    rows: int
    cols: int
    h_open: np.ndarray = field(repr=False)
    v_open: np.ndarray = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return self.rows * (self.cols + 1)

    @property
    def num_edges(self) -> int:
        return self.h_open.size + self.v_open.size

    def vertex(self, i: int, j: int) -> int:
        return i * (self.cols + 1) + j

    @property
    def left_boundary(self) -> list[int]:
        return [self.vertex(i, 0) for i in range(self.rows)]

    @property
    def right_boundary(self) -> list[int]:
        return [self.vertex(i, self.cols) for i in range(self.rows)]

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        r, c = self.rows, self.cols
        if e < r * c:
            i, j = divmod(e, c)
            return self.vertex(i, j), self.vertex(i, j + 1)
        i, jj = divmod(e - r * c, c - 1)
        return self.vertex(i, jj + 1), self.vertex(i + 1, jj + 1)

    def edge_diamond(self, e: int) -> tuple[str, int, int]:
        r, c = self.rows, self.cols
        if e < r * c:
            i, j = divmod(e, c)
            return HORIZONTAL, i, j
        i, jj = divmod(e - r * c, c - 1)
        return VERTICAL, i, jj + 1

    def is_open(self, e: int) -> bool:
        kind, i, j = self.edge_diamond(e)
        return bool(self.h_open[i, j]) if kind == HORIZONTAL else bool(self.v_open[i, j - 1])

    @property
    def edges(self) -> list[BondEdge]:
        out = []
        for e in range(self.num_edges):
            a, b = self.edge_endpoints(e)
            kind, i, j = self.edge_diamond(e)
            out.append(BondEdge(a, b, kind, (i, j), self.is_open(e)))
        return out

    def open_edge_count(self) -> int:
        return int(self.h_open.sum() + self.v_open.sum())

    @classmethod
    def from_arrays(cls, h_open, v_open=None) -> BondGraph:
        h = np.asarray(h_open, dtype=bool)
        rows, cols = h.shape
        if v_open is None:
            v = np.ones((max(rows - 1, 0), max(cols - 1, 0)), dtype=bool)
        else:
            v = np.asarray(v_open, dtype=bool).reshape(max(rows - 1, 0), max(cols - 1, 0))
        return cls(rows=rows, cols=cols, h_open=h, v_open=v)


def build_bond_graph(lattice: DiamondLattice) -> BondGraph:
    return BondGraph(rows=lattice.rows, cols=lattice.cols, h_open=lattice.h_open, v_open=lattice.v_open)


# --- square tessellation -----------------------------------------------------


@dataclass(frozen=True)
class SquareGrid:
    """Axis-aligned cells of side ``c``; cell ``(ix, iy)`` covers
    ``[ix*c, (ix+1)*c) x [iy*c, (iy+1)*c)``."""

    side_c: float
    region_radius: float
    node_cell: np.ndarray = field(repr=False)  # (N, 2) integer cell coordinates
    relay_of: np.ndarray = field(repr=False)  # node -> relay node of its cell
    cell_keys: np.ndarray = field(repr=False)  # (K, 2) nonempty cells, sorted
    cell_relay: np.ndarray = field(repr=False)  # relay of each nonempty cell
    cell_occupancy: np.ndarray = field(repr=False)
    node_cell_id: np.ndarray = field(repr=False)  # node -> row in cell_keys

    @property
    def num_cells(self) -> int:
        """Cells meeting the disk (including boundary cells clipped by it)."""
        return count_cells_meeting_disk(self.region_radius, self.side_c)

    def cell_of_point(self, p) -> tuple[int, int]:
        return int(math.floor(p[0] / self.side_c)), int(math.floor(p[1] / self.side_c))

    def cell_id(self, key) -> int:
        """Row of ``key`` in ``cell_keys`` or -1 when that cell is empty."""
        k = np.asarray(key, dtype=np.int64)
        lo, hi = 0, len(self.cell_keys)
        while lo < hi:
            mid = (lo + hi) // 2
            mk = self.cell_keys[mid]
            if (mk[0], mk[1]) < (k[0], k[1]):
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self.cell_keys) and tuple(self.cell_keys[lo]) == (k[0], k[1]):
            return lo
        return -1

    def nodes_of_cell(self, key) -> np.ndarray:
        cid = self.cell_id(key)
        if cid < 0:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.node_cell_id == cid)

    def interior_mask(self) -> np.ndarray:
        """Nonempty cells lying completely inside the disk."""
        c = self.side_c
        far_x = np.maximum(np.abs(self.cell_keys[:, 0] * c), np.abs((self.cell_keys[:, 0] + 1) * c))
        far_y = np.maximum(np.abs(self.cell_keys[:, 1] * c), np.abs((self.cell_keys[:, 1] + 1) * c))
        return far_x**2 + far_y**2 <= self.region_radius**2


def count_cells_meeting_disk(radius: float, c: float) -> int:
    lo = math.floor(-radius / c)
    hi = math.floor(radius / c)
    ix = np.arange(lo, hi + 1)
    x0 = ix * c
    nx = np.clip(0.0, x0, x0 + c)  # nearest coordinate to 0 within each column
    near = nx[:, None] ** 2 + nx[None, :] ** 2
    return int((near <= radius * radius).sum())


def tessellate_squares(region_radius: float, c: float, nodes: np.ndarray) -> SquareGrid:
    """Square cells of side ``c``; the relay of a cell is its node closest to
    the cell centre (lowest index on ties)."""
    if not c > 0:
        raise ValueError("c must be positive")
    pts = np.asarray(nodes, dtype=float).reshape(-1, 2)
    count = len(pts)
    cell = np.floor(pts / c).astype(np.int64)
    if count == 0:
        empty = np.empty(0, dtype=np.int64)
        return SquareGrid(c, region_radius, cell, empty, np.empty((0, 2), np.int64), empty, empty, empty)
    keys, cell_id, occupancy = np.unique(cell, axis=0, return_inverse=True, return_counts=True)
    cell_id = cell_id.reshape(-1)
    centre = (cell + 0.5) * c
    d2 = ((pts - centre) ** 2).sum(axis=1)
    idx = np.arange(count)
    order = np.lexsort((idx, d2, cell_id))
    first = np.ones(count, dtype=bool)
    first[1:] = cell_id[order][1:] != cell_id[order][:-1]
    cell_relay = np.empty(len(keys), dtype=np.int64)
    cell_relay[cell_id[order][first]] = order[first]
    return SquareGrid(
        side_c=c,
        region_radius=region_radius,
        node_cell=cell,
        relay_of=cell_relay[cell_id],
        cell_keys=keys,
        cell_relay=cell_relay,
        cell_occupancy=occupancy,
        node_cell_id=cell_id,
    )


# --- batched occupant search --------------------------------------------------


@dataclass(frozen=True)
class PointIndex:
    """Uniform bucket grid over a point set, for nearest-in-diamond queries."""

    points: np.ndarray
    bucket: float
    x0: float
    y0: float
    nx: int
    ny: int
    start: np.ndarray
    order: np.ndarray
    sorted_points: np.ndarray  # points in bucket order

    @classmethod
    def build(cls, points: np.ndarray, bucket: float) -> PointIndex:
        pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            return cls(pts, bucket, 0.0, 0.0, 1, 1, np.zeros(2, np.int64), np.empty(0, np.int64), pts)
        x0, y0 = pts.min(axis=0) - 1e-9
        x1, y1 = pts.max(axis=0)
        nx = int((x1 - x0) // bucket) + 1
        ny = int((y1 - y0) // bucket) + 1
        bx = ((pts[:, 0] - x0) // bucket).astype(np.int64)
        by = ((pts[:, 1] - y0) // bucket).astype(np.int64)
        flat = by * nx + bx
        order = np.argsort(flat, kind="stable").astype(np.int64)
        start = np.zeros(nx * ny + 1, dtype=np.int64)
        np.cumsum(np.bincount(flat, minlength=nx * ny), out=start[1:])
        return cls(pts, bucket, float(x0), float(y0), nx, ny, start, order, np.ascontiguousarray(pts[order]))

    def occupants(self, centers: np.ndarray, axes: np.ndarray, half_diag: float) -> np.ndarray:
        """For each diamond (centre, corridor axis) the point inside it closest
        to the centre, or -1.  ``axes`` broadcasts against ``centers``."""
        cen = np.ascontiguousarray(centers, dtype=float).reshape(-1, 2)
        ax = np.ascontiguousarray(np.broadcast_to(axes, np.asarray(centers).shape), dtype=float).reshape(-1, 2)
        out = _nearest_in_diamonds(
            self.sorted_points, self.order, self.start, self.x0, self.y0, self.bucket, self.nx, self.ny,
            cen, ax, float(half_diag),
        )
        return out.reshape(np.asarray(centers).shape[:-1])


@njit(cache=True)
def _nearest_in_diamonds(pts, order, start, x0, y0, b, nx, ny, cen, ax, h):
    m = cen.shape[0]
    out = np.full(m, -1, dtype=np.int64)
    for q in range(m):
        qx = cen[q, 0]
        qy = cen[q, 1]
        cx = ax[q, 0]
        cy = ax[q, 1]
        bi = int(np.floor((qx - x0) / b))
        bj = int(np.floor((qy - y0) / b))
        best = -1
        best_d2 = np.inf
        r = 0
        while True:
            for dj in range(-r, r + 1):
                y = bj + dj
                if y < 0 or y >= ny:
                    continue
                edge_row = dj == -r or dj == r
                dis = 1 if edge_row else 2 * r
                di = -r
                while di <= r:
                    x = bi + di
                    if 0 <= x < nx:
                        cell = y * nx + x
                        for t in range(start[cell], start[cell + 1]):
                            ex = pts[t, 0] - qx
                            ey = pts[t, 1] - qy
                            d2 = ex * ex + ey * ey
                            if d2 > best_d2:
                                continue
                            du = ex * cx + ey * cy
                            dv = -ex * cy + ey * cx
                            if abs(du) + abs(dv) <= h:
                                p = order[t]
                                if d2 < best_d2 or p < best:
                                    best_d2 = d2
                                    best = p
                    if r == 0:
                        break
                    di += dis
            reach = r * b
            if best >= 0 and best_d2 < reach * reach:
                break
            if reach >= h:
                break
            r += 1
        out[q] = best
    return out


def corridor_diamond_count(rows: int, cols: int) -> int:
    return rows * cols + max(rows - 1, 0) * max(cols - 1, 0)


@njit(cache=True)
def _corridor_occupants(pts, order, start, x0, y0, b, nx, ny, origins, axes, u_off, v_off, rows, cols, c):
    s = np.sqrt(2.0) * c
    h = 0.5 * s
    nh = rows * cols
    nd = nh + max(rows - 1, 0) * max(cols - 1, 0)
    m = origins.shape[0]
    cen = np.empty((nd, 2))
    ax = np.empty((nd, 2))
    out = np.empty((m, nd), dtype=np.int64)
    for q in range(m):
        ox = origins[q, 0]
        oy = origins[q, 1]
        cx = axes[q, 0]
        cy = axes[q, 1]
        k = 0
        for i in range(rows):
            for j in range(cols):
                u = u_off + (j + 0.5) * s
                v = v_off + (i + 0.5) * s
                cen[k, 0] = ox + u * cx - v * cy
                cen[k, 1] = oy + u * cy + v * cx
                k += 1
        for i in range(rows - 1):
            for j in range(1, cols):
                u = u_off + j * s
                v = v_off + (i + 1) * s
                cen[k, 0] = ox + u * cx - v * cy
                cen[k, 1] = oy + u * cy + v * cx
                k += 1
        for t in range(nd):
            ax[t, 0] = cx
            ax[t, 1] = cy
        out[q] = _nearest_in_diamonds(pts, order, start, x0, y0, b, nx, ny, cen, ax, h)
    return out


def corridor_occupants(index: PointIndex, origins, axes, u_off: float, v_off: float, rows: int, cols: int, c: float):
    """Occupants of every diamond of many equally sized corridors.

    Row ``q`` lists the horizontal diamonds row-major, then the vertical ones,
    i.e. in bond-graph edge order, for the corridor with corner
    ``origins[q]`` and unit axis ``axes[q]``.
    """
    return _corridor_occupants(
        index.sorted_points, index.order, index.start, index.x0, index.y0, index.bucket, index.nx, index.ny,
        np.ascontiguousarray(origins, dtype=float).reshape(-1, 2),
        np.ascontiguousarray(axes, dtype=float).reshape(-1, 2),
        float(u_off), float(v_off), int(rows), int(cols), float(c),
    )
