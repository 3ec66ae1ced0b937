"""Propagation, SINR, the two rate models and the super-square TDMA schedule.

Gains follow ``eta(d) = (1 + d)^-alpha``.  Model A turns SINR into a rate
``W*T/2 * ln(1 + SINR)``; Model B pays a fixed rate ``B`` once the SINR
reaches the threshold ``tau``.  The schedule lets the cells congruent modulo
``k`` in both grid coordinates share a slot, which caps the interference any
receiver within Manhattan distance ``d`` cells of its transmitter can see.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from percroute.lattice import SquareGrid

MODEL_A = "A"
MODEL_B = "B"


@dataclass(frozen=True)
class RadioConfig:
    P: float = 1.0
    alpha: float = 3.0
    N0: float = 1.0
    tau: float = 1.0
    W: float = 1.0
    T: float = 1.0
    B: float = 1.0
    model: str = MODEL_A

    def __post_init__(self):
        problems = []
        if not self.alpha > 2:
            problems.append(f"alpha must exceed 2 (got {self.alpha})")
        if not self.P > 0:
            problems.append(f"P must be positive (got {self.P})")
        if not self.N0 >= 0:
            problems.append(f"N0 must be nonnegative (got {self.N0})")
        for name in ("tau", "W", "T", "B"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive (got {getattr(self, name)})")
        if self.model not in (MODEL_A, MODEL_B):
            problems.append(f"model must be 'A' or 'B' (got {self.model!r})")
        if problems:
            raise ValueError("; ".join(problems))

    def with_power(self, P: float) -> RadioConfig:
        return RadioConfig(**{**asdict(self), "P": float(P)})

    def with_model(self, model: str) -> RadioConfig:
        return RadioConfig(**{**asdict(self), "model": model})


def path_loss(dist, alpha: float):
    d = np.asarray(dist, dtype=float)
    if (d < 0).any():
        raise ValueError("distance must be nonnegative")
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")
    out = (1.0 + d) ** -alpha
    return float(out) if out.ndim == 0 else out


def sinr_at(rx, tx, interferers, cfg: RadioConfig) -> float:
    rx = np.asarray(rx, dtype=float)
    signal = cfg.P * path_loss(float(np.hypot(*(np.asarray(tx, dtype=float) - rx))), cfg.alpha)
    pts = np.asarray(interferers, dtype=float).reshape(-1, 2)
    interference = float(np.sum(cfg.P * path_loss(np.hypot(*(pts - rx).T), cfg.alpha))) if len(pts) else 0.0
    denom = cfg.N0 + interference
    if denom == 0.0:
        return math.inf
    return signal / denom


def rate(model: str, sinr: float, cfg: RadioConfig) -> float:
    if sinr < 0:
        raise ValueError("sinr must be nonnegative")
    if model == MODEL_A:
        return 0.5 * cfg.W * cfg.T * math.log1p(sinr)
    if model == MODEL_B:
        return cfg.B if sinr >= cfg.tau else 0.0
    raise ValueError(f"unknown model {model!r}")


def gamma_series(alpha: float, tol: float = 1e-10) -> float:
    """``sum_{i>=1} (i - 1/2)^(1 - alpha)``.

    The partial sum up to ``M`` is completed with the integral tail estimate;
    since the terms decrease, the error is at most half of the last term's
    integral, which is below ``tol`` by the choice of ``M``.
    """
    if not alpha > 2:
        raise ValueError(f"series diverges for alpha={alpha} <= 2")
    e = alpha - 1.0
    # half the integral of the term from M to M+1 is at most f(M)/2
    M = max(16, math.ceil((2.0 * tol) ** (-1.0 / e) + 0.5))
    total = 0.0
    chunk = 1 << 20
    for lo in range(1, M + 1, chunk):
        i = np.arange(lo, min(M, lo + chunk - 1) + 1, dtype=float)
        total += float(np.sum((i - 0.5) ** -e))
    # tail sum_{i>M} lies between the integrals from M+1 and from M; take the mean
    upper = (M - 0.5) ** (1.0 - e) / (e - 1.0)
    lower = (M + 0.5) ** (1.0 - e) / (e - 1.0)
    return total + 0.5 * (upper + lower)


def tdma_spacing(d: int, c: float, alpha: float, tau: float, gamma: float) -> tuple[int, int]:
    if d < 0:
        raise ValueError("d must be nonnegative")
    x = max(2, math.ceil((16.0 * tau * gamma) ** (1.0 / alpha) * (1.0 + 1.0 / (2.0 * c)) - 1e-12))
    return x, x * (d + 1)


def interference_bound(d: int, c: float, alpha: float, x: int, P: float, gamma: float) -> float:
    return 16.0 * P * gamma / (c**alpha * (d + 1) ** alpha * x**alpha)


def signal_bound(d: int, c: float, P: float, alpha: float) -> float:
    return P / (1.0 + c * (d + 1)) ** alpha


def _interference_factor(d: int, c: float, alpha: float, tau: float, gamma: float, x: int) -> float:
    return tau * (1.0 + 1.0 / (c * (d + 1))) ** alpha * 16.0 * gamma / x**alpha


def min_power_model_b(
    d: int, c: float, alpha: float, tau: float, N0: float, gamma: float, x: int | None = None
) -> float:
    """Smallest ``P`` with ``signal_bound / (N0 + interference_bound) >= tau``."""
    if x is None:
        x, _ = tdma_spacing(d, c, alpha, tau, gamma)
    q = _interference_factor(d, c, alpha, tau, gamma, x)
    if q >= 1.0:
        raise ValueError(f"no power meets the threshold: interference factor {q:.4g} >= 1 (x={x} too small)")
    return tau * N0 * (1.0 + c * (d + 1)) ** alpha / (1.0 - q)


def guaranteed_sinr(d: int, c: float, cfg: RadioConfig, gamma: float | None = None) -> float:
    g = gamma_series(cfg.alpha) if gamma is None else gamma
    x, _ = tdma_spacing(d, c, cfg.alpha, cfg.tau, g)
    s = signal_bound(d, c, cfg.P, cfg.alpha)
    i = interference_bound(d, c, cfg.alpha, x, cfg.P, g)
    return s / (cfg.N0 + i) if cfg.N0 + i > 0 else math.inf


def link_rate_bound(d: int, c: float, cfg: RadioConfig, gamma: float | None = None) -> float:
    """Rate a scheduled link is guaranteed while it transmits."""
    sinr = guaranteed_sinr(d, c, cfg, gamma)
    if cfg.model == MODEL_A:
        return 0.5 * cfg.W * cfg.T * math.log1p(sinr)
    return cfg.B if sinr >= cfg.tau * (1 - 1e-12) else 0.0


def guaranteed_rate(d: int, c: float, cfg: RadioConfig, gamma: float | None = None) -> float:
    """Long-run rate of a cell at Manhattan range ``d``: the link rate times its slot share ``1/k^2``."""
    g = gamma_series(cfg.alpha) if gamma is None else gamma
    _, k = tdma_spacing(d, c, cfg.alpha, cfg.tau, g)
    return link_rate_bound(d, c, cfg, g) / (k * k)


# --- schedules ---------------------------------------------------------------


@dataclass(frozen=True)
class TdmaSchedule:
    k: int
    x: int
    d: int
    cell_keys: np.ndarray = field(repr=False)
    slots: np.ndarray = field(repr=False)

    @property
    def num_slots(self) -> int:
        return self.k * self.k

    def slot_of(self, key) -> int:
        return slot_of_cell(key, self.k)

    def slot_of_cell(self) -> dict[tuple[int, int], int]:
        return {tuple(map(int, key)): int(s) for key, s in zip(self.cell_keys, self.slots)}


def slot_of_cell(key, k: int):
    key = np.asarray(key, dtype=np.int64)
    out = np.mod(key[..., 0], k) + k * np.mod(key[..., 1], k)
    return int(out) if out.ndim == 0 else out


def build_schedule(grid: SquareGrid, d: int, cfg: RadioConfig, gamma: float | None = None) -> TdmaSchedule:
    g = gamma_series(cfg.alpha) if gamma is None else gamma
    x, k = tdma_spacing(d, grid.side_c, cfg.alpha, cfg.tau, g)
    keys = np.asarray(grid.cell_keys, dtype=np.int64).reshape(-1, 2)
    return TdmaSchedule(k=k, x=x, d=int(d), cell_keys=keys, slots=slot_of_cell(keys, k).reshape(-1))


def cell_slot_sinr(
    grid: SquareGrid, nodes: np.ndarray, tx: np.ndarray, rx: np.ndarray, k: int, cfg: RadioConfig,
    budget: int = 1 << 22,
) -> np.ndarray:
    """Exact SINR of node links under the cell schedule with spacing ``k``.

    While ``tx[i]`` sends to ``rx[i]``, the relay of every other nonempty cell
    in the same slot transmits too; those relays are the interferers.
    """
    tx = np.asarray(tx, dtype=np.int64)
    rx = np.asarray(rx, dtype=np.int64)
    out = np.empty(len(tx))
    if len(tx) == 0:
        return out
    relay_pos = nodes[grid.cell_relay]
    cell_slot = slot_of_cell(grid.cell_keys, k).reshape(-1)
    own = grid.node_cell_id[tx]
    slot = cell_slot[own]
    rxp = nodes[rx]
    signal = cfg.P * (1.0 + np.hypot(*(nodes[tx] - rxp).T)) ** -cfg.alpha
    interference = np.zeros(len(tx))
    order = np.argsort(slot, kind="stable")
    bounds = np.flatnonzero(np.diff(slot[order])) + 1
    by_slot = np.argsort(cell_slot, kind="stable")
    slot_start = np.searchsorted(cell_slot[by_slot], np.arange(k * k + 1))
    for members in np.split(order, bounds):
        sl = slot[members[0]]
        cells = by_slot[slot_start[sl] : slot_start[sl + 1]]
        src = relay_pos[cells]
        step = max(1, budget // max(1, len(src)))
        for lo in range(0, len(members), step):
            m = members[lo : lo + step]
            gap = np.hypot(rxp[m, None, 0] - src[None, :, 0], rxp[m, None, 1] - src[None, :, 1])
            gain = (1.0 + gap) ** -cfg.alpha
            gain[cells[None, :] == own[m, None]] = 0.0
            interference[m] = cfg.P * gain.sum(axis=1)
    denom = cfg.N0 + interference
    with np.errstate(divide="ignore"):
        out[:] = np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
    return out


def link_rates(sinr: np.ndarray, cfg: RadioConfig) -> np.ndarray:
    """Vectorised :func:`rate` for the configured model."""
    sinr = np.asarray(sinr, dtype=float)
    if cfg.model == MODEL_A:
        return 0.5 * cfg.W * cfg.T * np.log1p(sinr)
    return np.where(sinr >= cfg.tau, cfg.B, 0.0)


@dataclass(frozen=True)
class Link:
    tx: tuple[float, float]
    rx: tuple[float, float]


@dataclass(frozen=True)
class LinkCheck:
    link: int
    slot: int
    sub_slot: int
    distance: float
    cells: int
    signal: float
    signal_bound: float
    interference: float
    interference_bound: float
    sinr: float
    sinr_bound: float
    ok: bool


def evaluate_schedule(
    schedule: TdmaSchedule,
    grid: SquareGrid,
    links,
    cfg: RadioConfig,
    gamma: float | None = None,
) -> list[LinkCheck]:
    """Exact SINR of every link with all same-slot transmitters active.

    Links whose transmitters share a cell take turns in sub-slots, in input
    order; the interferers of a link are the transmitters of the other links
    in its slot and sub-slot.
    """
    g = gamma_series(cfg.alpha) if gamma is None else gamma
    c = grid.side_c
    tx = np.array([lk.tx for lk in links], dtype=float).reshape(-1, 2)
    rx = np.array([lk.rx for lk in links], dtype=float).reshape(-1, 2)
    if len(tx) == 0:
        return []
    tcell = np.floor(tx / c).astype(np.int64)
    rcell = np.floor(rx / c).astype(np.int64)
    cells = np.abs(tcell - rcell).sum(axis=1)
    too_far = np.flatnonzero(cells > schedule.d)
    if len(too_far):
        raise ValueError(f"link {int(too_far[0])} spans {int(cells[too_far[0]])} cells, schedule supports {schedule.d}")
    slot = slot_of_cell(tcell, schedule.k)
    _, cell_idx = np.unique(tcell, axis=0, return_inverse=True)
    cell_idx = cell_idx.reshape(-1)
    sub = np.zeros(len(tx), dtype=np.int64)
    seen: dict[int, int] = {}
    for t, ci in enumerate(cell_idx):
        sub[t] = seen.get(ci, 0)
        seen[ci] = sub[t] + 1
    s_bound = signal_bound(schedule.d, c, cfg.P, cfg.alpha)
    i_bound = interference_bound(schedule.d, c, cfg.alpha, schedule.x, cfg.P, g)
    sinr_bound = s_bound / (cfg.N0 + i_bound) if cfg.N0 + i_bound > 0 else math.inf
    rate_floor = rate(MODEL_A, sinr_bound, cfg)
    dist = np.hypot(*(tx - rx).T)
    signal = cfg.P * (1.0 + dist) ** -cfg.alpha
    interference = np.zeros(len(tx))
    group = slot * (int(sub.max()) + 1) + sub
    order = np.argsort(group, kind="stable")
    bounds = np.flatnonzero(np.diff(group[order])) + 1
    for members in np.split(order, bounds):
        if len(members) < 2:
            continue
        gap = np.hypot(
            rx[members, None, 0] - tx[None, members, 0], rx[members, None, 1] - tx[None, members, 1]
        )
        gain = cfg.P * (1.0 + gap) ** -cfg.alpha
        np.fill_diagonal(gain, 0.0)
        interference[members] = gain.sum(axis=1)
    denom = cfg.N0 + interference
    with np.errstate(divide="ignore"):
        sinr = np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
    out = []
    for t in range(len(tx)):
        if cfg.model == MODEL_B:
            ok = bool(sinr[t] >= cfg.tau)
        else:
            ok = bool(rate(MODEL_A, float(sinr[t]), cfg) >= rate_floor * (1 - 1e-12))
        out.append(
            LinkCheck(
                link=t, slot=int(slot[t]), sub_slot=int(sub[t]), distance=float(dist[t]), cells=int(cells[t]),
                signal=float(signal[t]), signal_bound=s_bound, interference=float(interference[t]),
                interference_bound=i_bound, sinr=float(sinr[t]), sinr_bound=sinr_bound, ok=ok,
            )
        )
    return out


def verify_schedule(
    schedule: TdmaSchedule, grid: SquareGrid, links, cfg: RadioConfig, gamma: float | None = None
) -> list[LinkCheck]:
    """Links that miss their guarantee: SINR below ``tau`` under Model B, or a
    Model A rate below the one the bounds promise."""
    return [chk for chk in evaluate_schedule(schedule, grid, links, cfg, gamma) if not chk.ok]


def worst_case_links(d: int, c: float, k: int, rings: int = 6) -> list[Link]:
    """A receiver at the far end of a range-``d`` link from the transmitter in
    cell (0, 0), plus a transmitter in every same-slot cell out to ``rings``
    super-squares, each pushed to the point of its cell nearest the receiver.

    The victim link comes first; interferer links point at their own cells.
    """
    tx0 = (1e-9 * c, 1e-9 * c)
    # farthest point of the cell d steps to the right (corner opposite tx0)
    rx0 = ((d + 1) * c * (1 - 1e-9), c * (1 - 1e-9))
    links = [Link(tx0, rx0)]
    for a in range(-rings, rings + 1):
        for b in range(-rings, rings + 1):
            if a == 0 and b == 0:
                continue
            lo = np.array([a * k * c, b * k * c])
            p = np.clip(rx0, lo + 1e-9 * c, lo + c * (1 - 1e-9))
            links.append(Link((float(p[0]), float(p[1])), (float(p[0]), float(p[1]))))
    return links


def random_links(grid: SquareGrid, nodes: np.ndarray, d: int, rng: np.random.Generator) -> list[Link]:
    """One link per nonempty cell: its relay sends to a node drawn uniformly
    from the other nodes of the cells within Manhattan range ``d``.

    Cells with no such node send nothing.
    """
    pts = np.asarray(nodes, dtype=float).reshape(-1, 2)
    keys = grid.cell_keys
    if len(keys) == 0:
        return []
    span = int(np.abs(keys).max()) + d + 2
    code = (keys[:, 0] + span) * (2 * span + 1) + (keys[:, 1] + span)  # sorted like keys
    offsets = np.array([(a, b) for a in range(-d, d + 1) for b in range(-d, d + 1) if abs(a) + abs(b) <= d])
    target = keys[:, None, :] + offsets[None, :, :]
    tcode = (target[..., 0] + span) * (2 * span + 1) + (target[..., 1] + span)
    pos = np.clip(np.searchsorted(code, tcode), 0, len(code) - 1)
    tid = np.where(code[pos] == tcode, pos, -1)  # (K, offsets) cell rows or -1
    members = np.argsort(grid.node_cell_id, kind="stable")
    start = np.concatenate(([0], np.cumsum(grid.cell_occupancy)))
    weight = np.where(tid >= 0, grid.cell_occupancy[np.maximum(tid, 0)], 0)
    centre = np.flatnonzero((offsets == 0).all(axis=1))[0]
    weight[:, centre] -= 1  # the relay itself is no candidate
    out = []
    for ci in range(len(keys)):
        total = int(weight[ci].sum())
        if total <= 0:
            continue
        pick = int(rng.integers(total))
        o = int(np.searchsorted(np.cumsum(weight[ci]), pick, side="right"))
        pick -= int(weight[ci, :o].sum())
        cell = int(tid[ci, o])
        tx = int(grid.cell_relay[ci])
        cands = members[start[cell]:start[cell + 1]]
        if cell == ci:
            cands = cands[cands != tx]
        rx = int(cands[pick])
        out.append(Link((float(pts[tx, 0]), float(pts[tx, 1])), (float(pts[rx, 0]), float(pts[rx, 1]))))
    return out
