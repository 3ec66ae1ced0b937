"""Random extended network: Poisson nodes on the disk of radius sqrt(n) and
uniform random destinations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Sub-stream identifiers: each purpose draws from its own child sequence so
# that e.g. destinations can be redrawn without touching node positions.
STREAM_POSITIONS = 0
STREAM_DESTINATIONS = 1
STREAM_EXTERIOR = 2


class DegenerateTraffic(ValueError):
    """Raised when a traffic pattern cannot be formed (fewer than two nodes)."""


def derive_rng(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Independent generator for (seed, stream, *extra)."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(stream, *extra))
    return np.random.default_rng(ss)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def uniform_disk(rng: np.random.Generator, count: int, radius: float, inner: float = 0.0) -> np.ndarray:
    """``count`` i.i.d. uniform points on the annulus inner < r <= radius."""
    u = rng.random(count)
    r = np.sqrt(inner * inner + u * (radius * radius - inner * inner))
    theta = rng.random(count) * (2.0 * math.pi)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


@dataclass(frozen=True)
class NetworkInstance:
    scale_n: float
    seed: int
    nodes: np.ndarray = field(repr=False)

    @property
    def region_radius(self) -> float:
        return math.sqrt(self.scale_n)

    @property
    def count(self) -> int:
        return int(self.nodes.shape[0])

    def __len__(self) -> int:
        return self.count


@dataclass(frozen=True)
class TrafficPattern:
    dest_of: np.ndarray = field(repr=False)

    def in_degree(self, num_nodes: int | None = None) -> np.ndarray:
        size = len(self.dest_of) if num_nodes is None else num_nodes
        return np.bincount(self.dest_of, minlength=size)


def sample_network(n: float, seed: int) -> NetworkInstance:
    """Homogeneous unit-intensity Poisson process restricted to the disk of radius sqrt(n).

    The count is drawn Poisson(pi*n) and the points are then i.i.d. uniform on
    the disk, which is the exact law of the restricted process.
    """
    if not n > 0:
        raise ValueError(f"n must be positive, got {n!r}")
    rng = derive_rng(seed, STREAM_POSITIONS)
    count = int(rng.poisson(math.pi * n))
    nodes = uniform_disk(rng, count, math.sqrt(n))
    return NetworkInstance(scale_n=float(n), seed=int(seed), nodes=_frozen(nodes))


def sample_exterior(n: float, outer_radius: float, seed: int) -> np.ndarray:
    """Unit-intensity Poisson points on the annulus sqrt(n) < r <= outer_radius.

    These points extend the process beyond the network region so that
    corridors sticking out of the disk can still be tessellated; they are never
    network nodes.
    """
    inner = math.sqrt(n)
    if outer_radius <= inner:
        return np.empty((0, 2))
    rng = derive_rng(seed, STREAM_EXTERIOR)
    count = int(rng.poisson(math.pi * (outer_radius**2 - inner**2)))
    return _frozen(uniform_disk(rng, count, outer_radius, inner=inner))


def assign_destinations(instance: NetworkInstance, seed: int) -> TrafficPattern:
    """Each source picks a destination uniformly among the other nodes."""
    count = instance.count
    if count < 2:
        raise DegenerateTraffic(f"need at least 2 nodes for a traffic pattern, have {count}")
    rng = derive_rng(seed, STREAM_DESTINATIONS)
    draw = rng.integers(0, count - 1, size=count)
    dest = draw + (draw >= np.arange(count))
    return TrafficPattern(dest_of=_frozen(dest.astype(np.int64)))


def node_count_check(instance: NetworkInstance) -> tuple[bool, int]:
    """Whether the node count stays within 2*pi*n."""
    count = instance.count
    return count <= 2.0 * math.pi * instance.scale_n, count


def to_json(instance: NetworkInstance, traffic: TrafficPattern | None = None) -> dict:
    return {
        "n": instance.scale_n,
        "seed": instance.seed,
        "nodes": instance.nodes.tolist(),
        "dest_of": [] if traffic is None else traffic.dest_of.tolist(),
    }


def from_json(doc: dict) -> tuple[NetworkInstance, TrafficPattern | None]:
    nodes = np.asarray(doc["nodes"], dtype=float).reshape(-1, 2)
    inst = NetworkInstance(scale_n=float(doc["n"]), seed=int(doc["seed"]), nodes=_frozen(nodes))
    dest = doc.get("dest_of") or []
    traffic = TrafficPattern(dest_of=_frozen(np.asarray(dest, dtype=np.int64))) if len(dest) else None
    return inst, traffic


def save_instance(path: str | Path, instance: NetworkInstance, traffic: TrafficPattern | None = None) -> None:
    Path(path).write_text(json.dumps(to_json(instance, traffic)))


def load_instance(path: str | Path) -> tuple[NetworkInstance, TrafficPattern | None]:
    return from_json(json.loads(Path(path).read_text()))
