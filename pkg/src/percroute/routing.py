"""Per-pair routing corridors and the node-level routes read off their crossings.

A route starts life as a crossing of the corridor's bond graph, becomes the
sequence of its diamonds' occupants, is clipped to the network disk, remapped
onto the relay nodes of the global square grid and finally gets a draining and
a delivery node (the path nodes closest to the source and the destination).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from percroute.lattice import SQRT2, DiamondLattice, SquareGrid, corridor_width
from percroute.percolation import CrossingSet

SQRT5 = math.sqrt(5.0)


class HopCertificateError(AssertionError):
    """A constructed route broke one of its hop-length guarantees."""


def intermediate_hop_limit(c: float) -> float:
    """Hop bound after remapping onto relays."""
    return (SQRT5 + SQRT2) * c


def endpoint_hop_limit(width: float, c: float) -> float:
    """Bound on the draining and delivery hops."""
    return width + SQRT2 * c


@dataclass(frozen=True)
class Corridor:
    """Rectangle of length ``2*sqrt(n)`` and width ``sqrt(2)*c*kappa*ln(sqrt(n)/(sqrt(2)c))``
    whose long axis is parallel to the source-destination segment.

    ``origin`` is the corner at ``u = -sqrt(n)``, ``v = 0`` of the local frame
    (``u`` along ``axis``, ``v`` along ``perp``).
    """

    source_idx: int
    dest_idx: int
    origin: np.ndarray
    axis: np.ndarray
    perp: np.ndarray
    length: float
    width: float
    c: float
    kappa: float
    n: float

    @property
    def center_line(self) -> tuple[np.ndarray, np.ndarray]:
        mid = self.origin + 0.5 * self.length * self.axis + 0.5 * self.width * self.perp
        return mid, self.axis

    @property
    def phi(self) -> float:
        """Coefficient of ``ln n`` in the geometric draining/delivery hop bound."""
        return endpoint_hop_limit(self.width, self.c) / math.log(self.n)

    def to_local(self, pts) -> tuple[np.ndarray, np.ndarray]:
        rel = np.asarray(pts, dtype=float) - self.origin
        return rel @ self.axis, rel @ self.perp

    def contains(self, pts) -> np.ndarray:
        u, v = self.to_local(pts)
        return (u >= 0) & (u <= self.length) & (v >= 0) & (v <= self.width)


def corridor_offset(v0: np.ndarray | float, width: float) -> np.ndarray | float:
    """Perpendicular coordinate of the centre line.

    The centre line is pulled as close to the disk centre as the constraint
    of keeping both endpoints (at perpendicular coordinate ``v0``) inside allows.
    """
    slack = 0.5 * width * (1.0 - 1e-6)
    return np.clip(0.0, v0 - slack, v0 + slack)


def build_corridor(
    s, d, n: float, c: float, kappa: float, source_idx: int = -1, dest_idx: int = -1
) -> Corridor:
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    seg = d - s
    dist = math.hypot(seg[0], seg[1])
    if dist == 0.0:
        raise ValueError("source and destination coincide")
    width = corridor_width(n, c, kappa)
    if not width > 0:
        raise ValueError(f"corridor width {width:.4g} is not positive for n={n}, c={c}, kappa={kappa}")
    axis = seg / dist
    perp = np.array([-axis[1], axis[0]])
    v_c = float(corridor_offset(float(s @ perp), width))
    half = math.sqrt(n)
    origin = -half * axis + (v_c - 0.5 * width) * perp
    return Corridor(
        source_idx=int(source_idx), dest_idx=int(dest_idx), origin=origin, axis=axis, perp=perp,
        length=2.0 * half, width=width, c=float(c), kappa=float(kappa), n=float(n),
    )


@dataclass(frozen=True)
class RoutePath:
    node_seq: tuple[int, ...]
    hop_lengths: tuple[float, ...] = ()
    draining_node: int = -1
    delivery_node: int = -1
    drain_hop: float = math.nan
    delivery_hop: float = math.nan
    drain_cells: int = -1  # Manhattan distance in grid cells
    delivery_cells: int = -1

    @property
    def max_hop(self) -> float:
        return max(self.hop_lengths, default=0.0)

    def to_json(self) -> dict:
        return {
            "nodes": list(self.node_seq),
            "hop_lengths": list(self.hop_lengths),
            "draining_node": self.draining_node,
            "delivery_node": self.delivery_node,
            "drain_hop": self.drain_hop,
            "delivery_hop": self.delivery_hop,
            "drain_cells": self.drain_cells,
            "delivery_cells": self.delivery_cells,
        }


@dataclass(frozen=True)
class RouteSet:
    pair: tuple[int, int]
    paths: tuple[RoutePath, ...]
    points: np.ndarray = field(repr=False)
    disjoint_before_remap: bool = True
    disjoint_after_remap: bool | None = None
    dropped: int = 0
    remapped: bool = False

    @property
    def count(self) -> int:
        return len(self.paths)

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "disjoint_before_remap": self.disjoint_before_remap,
            "disjoint_after_remap": self.disjoint_after_remap,
            "dropped": self.dropped,
            "remapped": self.remapped,
            "paths": [p.to_json() for p in self.paths],
        }


def _hops(points: np.ndarray, seq) -> tuple[float, ...]:
    if len(seq) < 2:
        return ()
    xy = points[np.asarray(seq)]
    return tuple(np.hypot(*(xy[1:] - xy[:-1]).T).tolist())


def paths_from_crossings(
    crossings: CrossingSet, lattice: DiamondLattice, points: np.ndarray, pair: tuple[int, int] = (-1, -1)
) -> RouteSet:
    """Turn each edge path into the sequence of its diamonds' occupants."""
    occ = np.concatenate((lattice.h_occupant.ravel(), lattice.v_occupant.ravel()))
    points = np.asarray(points, dtype=float)
    out = []
    seen: set[int] = set()
    for edges in crossings.paths:
        seq = occ[np.asarray(edges, dtype=np.int64)]
        if (seq < 0).any():
            bad = int(np.asarray(edges)[seq < 0][0])
            raise AssertionError(f"edge {bad} lies on a crossing but its diamond has no occupant")
        seen.update(edges)
        out.append(RoutePath(node_seq=tuple(seq.tolist()), hop_lengths=_hops(points, seq)))
    disjoint = sum(len(p) for p in crossings.paths) == len(seen)
    return RouteSet(pair=pair, paths=tuple(out), points=points, disjoint_before_remap=disjoint)


def longest_run(mask: np.ndarray) -> tuple[int, int]:
    """Bounds ``[lo, hi)`` of the longest run of True values (first one on ties)."""
    best = (0, 0)
    start = None
    for k, flag in enumerate(np.append(np.asarray(mask, dtype=bool), False)):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if k - start > best[1] - best[0]:
                best = (start, k)
            start = None
    return best


def truncate_to_region(rs: RouteSet, region_radius: float) -> RouteSet:
    """Clip every path to its longest stretch of nodes inside the disk."""
    kept = []
    dropped = 0
    r2 = region_radius * region_radius
    for path in rs.paths:
        seq = np.asarray(path.node_seq, dtype=np.int64)
        xy = rs.points[seq]
        lo, hi = longest_run((xy**2).sum(axis=1) <= r2)
        if hi == lo:
            dropped += 1
            continue
        sub = seq[lo:hi]
        kept.append(RoutePath(node_seq=tuple(sub.tolist()), hop_lengths=_hops(rs.points, sub)))
    return replace(rs, paths=tuple(kept), dropped=rs.dropped + dropped)


def collapse_repeats(seq) -> list[int]:
    out: list[int] = []
    for node in seq:
        if not out or out[-1] != node:
            out.append(int(node))
    return out


def remap_to_relays(rs: RouteSet, grid: SquareGrid, strict: bool = False) -> RouteSet:
    """Replace every path node by its cell's relay.

    Disjointness may be lost; ``disjoint_after_remap`` reports whether any
    relay is shared by two paths.  With ``strict`` a hop longer than
    ``(sqrt5 + sqrt2) c`` raises :class:`HopCertificateError`.
    """
    limit = intermediate_hop_limit(grid.side_c) * (1 + 1e-12)
    kept = []
    owners: dict[int, int] = {}
    shared = False
    for k, path in enumerate(rs.paths):
        seq = np.asarray(path.node_seq, dtype=np.int64)
        if len(seq) and (seq.max() >= len(grid.relay_of) or seq.min() < 0):
            raise AssertionError("path node outside the square grid")
        relays = collapse_repeats(grid.relay_of[seq])
        hops = _hops(rs.points, relays)
        if strict and hops and max(hops) > limit:
            raise HopCertificateError(f"hop {max(hops):.4f} exceeds {limit:.4f} on path {k} of {rs.pair}")
        for node in set(relays):
            if owners.setdefault(node, k) != k:
                shared = True
        kept.append(RoutePath(node_seq=tuple(relays), hop_lengths=hops))
    return replace(rs, paths=tuple(kept), disjoint_after_remap=not shared, remapped=True)


def manhattan_cells(grid: SquareGrid, a, b) -> int:
    ca = np.floor(np.asarray(a, dtype=float) / grid.side_c)
    cb = np.floor(np.asarray(b, dtype=float) / grid.side_c)
    return int(np.abs(ca - cb).sum())


def designate_endpoints(rs: RouteSet, s, d, grid: SquareGrid | None = None) -> RouteSet:
    """Pick, on every path, the node closest to ``s`` (draining) and to ``d`` (delivery)."""
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    out = []
    for path in rs.paths:
        if not path.node_seq:
            raise ValueError("cannot designate endpoints on an empty path")
        seq = np.asarray(path.node_seq, dtype=np.int64)
        xy = rs.points[seq]
        ds = np.hypot(*(xy - s).T)
        dd = np.hypot(*(xy - d).T)
        # lowest node index among the closest ones
        i_s = np.lexsort((seq, ds))[0]
        i_d = np.lexsort((seq, dd))[0]
        out.append(
            replace(
                path,
                draining_node=int(seq[i_s]),
                delivery_node=int(seq[i_d]),
                drain_hop=float(ds[i_s]),
                delivery_hop=float(dd[i_d]),
                drain_cells=-1 if grid is None else manhattan_cells(grid, s, xy[i_s]),
                delivery_cells=-1 if grid is None else manhattan_cells(grid, xy[i_d], d),
            )
        )
    return replace(rs, paths=tuple(out))


# --- batched pipeline ---------------------------------------------------------
#
# The functions above handle one pair at a time.  A trial routes every node,
# so the same steps are also run over flat arrays: paths are concatenated
# occupant ids with offsets ``ptr`` and ``path_pair`` names the pair of each.


def corridor_frames(src: np.ndarray, dst: np.ndarray, n: float, width: float):
    """Vectorised :func:`build_corridor`: corner, axis and perp of each corridor."""
    seg = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    dist = np.hypot(seg[:, 0], seg[:, 1])
    if (dist == 0).any():
        raise ValueError("source and destination coincide")
    axis = seg / dist[:, None]
    perp = np.column_stack((-axis[:, 1], axis[:, 0]))
    v_c = corridor_offset((np.asarray(src, dtype=float) * perp).sum(axis=1), width)
    half = math.sqrt(n)
    origin = -half * axis + (v_c - 0.5 * width)[:, None] * perp
    return origin, axis, perp


@njit(cache=True)
def _finish_paths(flat, ptr, path_pair, num_nodes, relay_of, node_cell, pts, src, dst):
    npaths = ptr.shape[0] - 1
    out = np.empty(flat.shape[0], dtype=np.int64)
    out_ptr = np.zeros(npaths + 1, dtype=np.int64)
    keep = np.zeros(npaths, dtype=np.bool_)
    drain = np.full(npaths, -1, dtype=np.int64)
    deliver = np.full(npaths, -1, dtype=np.int64)
    drain_hop = np.full(npaths, np.nan)
    deliver_hop = np.full(npaths, np.nan)
    drain_cells = np.full(npaths, -1, dtype=np.int64)
    deliver_cells = np.full(npaths, -1, dtype=np.int64)
    hop_pre = np.zeros(npaths)
    hop_post = np.zeros(npaths)
    hop_cells = np.zeros(npaths, dtype=np.int64)
    pos = 0
    for p in range(npaths):
        a = ptr[p]
        b = ptr[p + 1]
        # longest run of network nodes (exterior points have ids >= num_nodes)
        best_lo = a
        best_len = 0
        run = a
        for t in range(a, b + 1):
            if t == b or flat[t] >= num_nodes:
                if t - run > best_len:
                    best_len = t - run
                    best_lo = run
                run = t + 1
        out_ptr[p + 1] = pos
        if best_len == 0:
            continue
        keep[p] = True
        for t in range(best_lo + 1, best_lo + best_len):
            u = flat[t - 1]
            w = flat[t]
            dd = np.hypot(pts[u, 0] - pts[w, 0], pts[u, 1] - pts[w, 1])
            if dd > hop_pre[p]:
                hop_pre[p] = dd
        start = pos
        for t in range(best_lo, best_lo + best_len):
            r = relay_of[flat[t]]
            if pos == start or out[pos - 1] != r:
                out[pos] = r
                pos += 1
        out_ptr[p + 1] = pos
        q = path_pair[p]
        bs = np.inf
        bd = np.inf
        for t in range(start, pos):
            r = out[t]
            if t > start:
                u = out[t - 1]
                dd = np.hypot(pts[u, 0] - pts[r, 0], pts[u, 1] - pts[r, 1])
                if dd > hop_post[p]:
                    hop_post[p] = dd
                mc = abs(node_cell[u, 0] - node_cell[r, 0]) + abs(node_cell[u, 1] - node_cell[r, 1])
                if mc > hop_cells[p]:
                    hop_cells[p] = mc
            ds = np.hypot(pts[r, 0] - src[q, 0], pts[r, 1] - src[q, 1])
            if ds < bs or (ds == bs and r < drain[p]):
                bs = ds
                drain[p] = r
            dv = np.hypot(pts[r, 0] - dst[q, 0], pts[r, 1] - dst[q, 1])
            if dv < bd or (dv == bd and r < deliver[p]):
                bd = dv
                deliver[p] = r
        drain_hop[p] = bs
        deliver_hop[p] = bd
    return out[:pos], out_ptr, keep, drain, deliver, drain_hop, deliver_hop, hop_pre, hop_post, hop_cells


@dataclass
class RouteBatch:
    """Routes of many pairs, after truncation, remap and endpoint designation.

    Only surviving paths are stored; ``path_pair`` maps each to its pair.
    """

    src: np.ndarray
    dst: np.ndarray
    crossings: np.ndarray  # per pair, before truncation
    survivors: np.ndarray  # per pair
    path_pair: np.ndarray
    ptr: np.ndarray
    relays: np.ndarray
    drain_node: np.ndarray
    deliver_node: np.ndarray
    drain_hop: np.ndarray
    deliver_hop: np.ndarray
    drain_cells: np.ndarray
    deliver_cells: np.ndarray
    hop_pre: np.ndarray
    hop_post: np.ndarray
    hop_cells: np.ndarray  # largest Manhattan cell offset of an intermediate hop

    @property
    def num_paths(self) -> int:
        return len(self.path_pair)

    def path_nodes(self, p: int) -> np.ndarray:
        return self.relays[self.ptr[p] : self.ptr[p + 1]]

    @classmethod
    def concatenate(cls, parts: list[RouteBatch]) -> RouteBatch:
        offset_pair = np.cumsum([0] + [len(b.src) for b in parts[:-1]])
        offset_node = np.cumsum([0] + [len(b.relays) for b in parts[:-1]])
        ptr = [np.zeros(1, np.int64)] + [b.ptr[1:] + o for b, o in zip(parts, offset_node)]
        cat = np.concatenate
        return cls(
            src=cat([b.src for b in parts]),
            dst=cat([b.dst for b in parts]),
            crossings=cat([b.crossings for b in parts]),
            survivors=cat([b.survivors for b in parts]),
            path_pair=cat([b.path_pair + o for b, o in zip(parts, offset_pair)]),
            ptr=cat(ptr),
            relays=cat([b.relays for b in parts]),
            **{
                name: cat([getattr(b, name) for b in parts])
                for name in (
                    "drain_node", "deliver_node", "drain_hop", "deliver_hop",
                    "drain_cells", "deliver_cells", "hop_pre", "hop_post", "hop_cells",
                )
            },
        )


def finish_paths(
    src: np.ndarray,
    dst: np.ndarray,
    counts: np.ndarray,
    flat: np.ndarray,
    ptr: np.ndarray,
    points: np.ndarray,
    num_nodes: int,
    grid: SquareGrid,
) -> RouteBatch:
    """Truncate, remap and designate endpoints for batched crossings.

    ``points`` holds the network nodes first (ids below ``num_nodes``) and then
    the exterior points.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    path_pair = np.repeat(np.arange(len(src), dtype=np.int64), counts)
    out, out_ptr, keep, drain, deliver, dh, vh, hop_pre, hop_post, hop_cells = _finish_paths(
        flat, ptr, path_pair, num_nodes, grid.relay_of, grid.node_cell, points, points[src], points[dst]
    )
    sel = np.flatnonzero(keep)
    lengths = np.diff(out_ptr)[sel]
    new_ptr = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    cells = grid.node_cell
    drain, deliver = drain[sel], deliver[sel]
    pp = path_pair[sel]
    return RouteBatch(
        src=src,
        dst=dst,
        crossings=np.asarray(counts, dtype=np.int64),
        survivors=np.bincount(pp, minlength=len(src)).astype(np.int64),
        path_pair=pp,
        ptr=new_ptr,
        relays=out,
        drain_node=drain,
        deliver_node=deliver,
        drain_hop=dh[sel],
        deliver_hop=vh[sel],
        drain_cells=np.abs(cells[src[pp]] - cells[drain]).sum(axis=1),
        deliver_cells=np.abs(cells[dst[pp]] - cells[deliver]).sum(axis=1),
        hop_pre=hop_pre[sel],
        hop_post=hop_post[sel],
        hop_cells=hop_cells[sel],
    )
