"""Full trials and multi-n sweeps: route every pair, load the relays and turn
the schedule guarantees into per-pair rates."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from percroute import netgen
from percroute.lattice import (
    SQRT2,
    PointIndex,
    SquareGrid,
    corridor_occupants,
    corridor_width,
    tessellate_squares,
)
from percroute.load import LoadAccumulator, LoadMap, path_max_load
from percroute.percolation import batch_crossings, lemma2_bound, percolation_constants
from percroute.radio import (
    MODEL_A,
    MODEL_B,
    RadioConfig,
    cell_slot_sinr,
    gamma_series,
    guaranteed_rate,
    link_rates,
    min_power_model_b,
    tdma_spacing,
)
from percroute.routing import (
    HopCertificateError,
    RouteBatch,
    corridor_frames,
    endpoint_hop_limit,
    finish_paths,
    intermediate_hop_limit,
)

CSV_COLUMNS = [
    "n", "trial", "N_n", "pairs", "mean_paths", "min_paths", "L_max",
    "T_modelA", "T_modelB", "P_modelB", "anomalies",
]


def relay_hop_cells(c: float) -> int:
    """Largest Manhattan cell offset two points at distance ``(sqrt5 + sqrt2) c`` can have."""
    reach = intermediate_hop_limit(c) / c
    best = 0
    for a in range(0, math.ceil(reach) + 2):
        for b in range(0, math.ceil(reach) + 2):
            if max(a - 1, 0) ** 2 + max(b - 1, 0) ** 2 <= reach * reach:
                best = max(best, a + b)
    return best


@dataclass(frozen=True)
class ExperimentConfig:
    c: float = 6.0
    kappa: float = 1.0
    alpha: float = 3.0
    tau: float = 1.0
    N0: float = 1.0
    W: float = 1.0
    T: float = 1.0
    B: float = 1.0
    P: float = 1.0  # Model A power
    P_modelB: float | None = None  # None picks the minimum feasible power per trial
    model: str = MODEL_A
    n_values: tuple[float, ...] = (500, 1000, 2000, 4000, 8000)
    trials: int = 20
    master_seed: int = 20240601
    workers: int = 1
    chunk_pairs: int = 20000
    phase_split: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    relay_d: int | None = None  # None derives it from the remapped hop bound
    strict_hops: bool = False
    exact_sinr: bool = False  # exact per-link SINR rates instead of the schedule guarantees
    csv_path: str | None = None
    json_path: str | None = None

    def __post_init__(self):
        problems = []
        if not self.c > 0 or not self.kappa > 0:
            problems.append("c and kappa must be positive")
        elif not percolation_constants(self.c, self.kappa).beta_positive:
            problems.append(f"beta <= 0 for c={self.c}, kappa={self.kappa}")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if any(not n > 0 for n in self.n_values):
            problems.append("n values must be positive")
        if len(self.phase_split) != 3 or any(not f > 0 for f in self.phase_split) or sum(self.phase_split) > 1 + 1e-9:
            problems.append("phase_split needs three positive fractions summing to at most 1")
        if problems:
            raise ValueError("; ".join(problems))
        self.radio(MODEL_A)  # validates the radio fields

    def radio(self, model: str, P: float | None = None) -> RadioConfig:
        return RadioConfig(
            P=self.P if P is None else P, alpha=self.alpha, N0=self.N0, tau=self.tau,
            W=self.W, T=self.T, B=self.B, model=model,
        )

    @property
    def hop_d(self) -> int:
        return relay_hop_cells(self.c) if self.relay_d is None else self.relay_d

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["phase_split"] = list(self.phase_split)
        return d


def trial_seed(master_seed: int, n: float, trial: int) -> int:
    """Stable 63-bit seed for one (n, trial) cell of a sweep."""
    digest = hashlib.blake2b(f"{int(master_seed)}|{float(n)!r}|{int(trial)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


# --- routing ---------------------------------------------------------------------


@dataclass
class TrialRoutes:
    n: float
    seed: int
    instance: netgen.NetworkInstance
    traffic: netgen.TrafficPattern | None
    grid: SquareGrid
    rows: int
    cols: int
    width: float
    points: np.ndarray = field(repr=False)


def prepare_trial(n: float, c: float, kappa: float, seed: int) -> TrialRoutes:
    inst = netgen.sample_network(n, seed)
    traffic = netgen.assign_destinations(inst, seed) if inst.count >= 2 else None
    width = corridor_width(n, c, kappa)
    s = SQRT2 * c
    rows = max(0, math.floor(width / s + 1e-9)) if width > 0 else 0
    cols = max(0, math.floor(2.0 * math.sqrt(n) / s + 1e-9))
    reach = math.sqrt(n + (math.sqrt(n) + max(width, 0.0)) ** 2)
    ext = netgen.sample_exterior(n, reach, seed)
    points = np.concatenate((inst.nodes, ext)) if len(ext) else np.asarray(inst.nodes, dtype=float).reshape(-1, 2)
    grid = tessellate_squares(inst.region_radius, c, inst.nodes)
    return TrialRoutes(n, seed, inst, traffic, grid, rows, cols, width, points)


def route_chunks(tr: TrialRoutes, c: float, chunk_pairs: int) -> Iterator[RouteBatch]:
    """Route every pair of the trial, ``chunk_pairs`` pairs at a time."""
    if tr.traffic is None or tr.rows < 1 or tr.cols < 1:
        return
    s = SQRT2 * c
    index = PointIndex.build(tr.points, bucket=0.25 * s)
    u_off = 0.5 * (2.0 * math.sqrt(tr.n) - tr.cols * s)
    v_off = 0.5 * (tr.width - tr.rows * s)
    N = tr.instance.count
    nodes = tr.points
    dest = tr.traffic.dest_of
    for lo in range(0, N, chunk_pairs):
        src = np.arange(lo, min(N, lo + chunk_pairs), dtype=np.int64)
        dst = dest[src]
        origin, axis, _ = corridor_frames(nodes[src], nodes[dst], tr.n, tr.width)
        occ = corridor_occupants(index, origin, axis, u_off, v_off, tr.rows, tr.cols, c)
        counts, flat, ptr = batch_crossings(occ, tr.rows, tr.cols)
        yield finish_paths(src, dst, counts, flat, ptr, nodes, N, tr.grid)


@dataclass
class CrossingSurvey:
    n: float
    c: float
    kappa: float
    m: int
    prob_lower: float
    counts: np.ndarray = field(repr=False)  # disjoint crossings per corridor, before truncation

    @property
    def fraction_at_least_m(self) -> float:
        return float((self.counts >= self.m).mean()) if len(self.counts) else math.nan

    def summary(self) -> dict:
        k = self.counts
        return {
            "n": self.n, "c": self.c, "kappa": self.kappa, "m": self.m, "prob_lower": self.prob_lower,
            "corridors": int(len(k)),
            "mean_crossings": float(k.mean()) if len(k) else math.nan,
            "min_crossings": int(k.min()) if len(k) else 0,
            "max_crossings": int(k.max()) if len(k) else 0,
            "fraction_at_least_m": self.fraction_at_least_m,
        }


def crossing_survey(n: float, c: float, kappa: float, corridors: int, seed: int) -> CrossingSurvey:
    """Disjoint crossing counts of the corridors of the first ``corridors`` pairs.

    Networks are drawn from successive trial seeds until enough pairs exist.
    """
    m, prob = lemma2_bound(n, c, kappa)
    counts = []
    have = 0
    trial = 0
    s = SQRT2 * c
    while have < corridors:
        tr = prepare_trial(n, c, kappa, trial_seed(seed, n, trial))
        trial += 1
        if tr.traffic is None or tr.rows < 1 or tr.cols < 1:
            if tr.rows < 1 or tr.cols < 1:
                raise ValueError(f"corridor lattice is empty at n={n}, c={c}, kappa={kappa}")
            continue
        take = min(corridors - have, tr.instance.count)
        src = np.arange(take, dtype=np.int64)
        dst = tr.traffic.dest_of[src].astype(np.int64)
        index = PointIndex.build(tr.points, bucket=0.25 * s)
        origin, axis, _ = corridor_frames(tr.points[src], tr.points[dst], n, tr.width)
        u_off = 0.5 * (2.0 * math.sqrt(n) - tr.cols * s)
        v_off = 0.5 * (tr.width - tr.rows * s)
        occ = corridor_occupants(index, origin, axis, u_off, v_off, tr.rows, tr.cols, c)
        k, _, _ = batch_crossings(occ, tr.rows, tr.cols)
        counts.append(k)
        have += take
    return CrossingSurvey(float(n), c, kappa, m, prob, np.concatenate(counts).astype(np.int64))


# --- reports -----------------------------------------------------------------------


@dataclass
class ModelRates:
    model: str
    P: float
    feasible: bool
    diagnostic: str
    link_rates: dict  # phase -> guaranteed cell rate
    drain: np.ndarray = field(repr=False)
    relay: np.ndarray = field(repr=False)
    delivery: np.ndarray = field(repr=False)
    path_rate: np.ndarray = field(repr=False)
    pair_rate: np.ndarray = field(repr=False)  # nan for anomalous pairs
    T: float = math.nan


@dataclass
class HopStats:
    max_intermediate: float = 0.0
    intermediate_limit: float = math.nan
    intermediate_failures: int = 0
    max_endpoint: float = 0.0
    endpoint_limit: float = math.nan
    endpoint_failures: int = 0
    max_pre_remap: float = 0.0


@dataclass
class ThroughputReport:
    n: float
    seed: int
    N_n: int
    pairs: int
    rows: int
    cols: int
    d_relay: int
    d_drain: int
    d_delivery: int
    path_counts: np.ndarray = field(repr=False)  # surviving paths per pair
    crossing_counts: np.ndarray = field(repr=False)  # before truncation
    anomalies: np.ndarray = field(repr=False)  # pairs with no surviving path
    load: LoadMap | None = field(default=None, repr=False)
    hops: HopStats = field(default_factory=HopStats)
    models: dict = field(default_factory=dict)
    path_pair: np.ndarray = field(default=None, repr=False)
    config: dict = field(default_factory=dict)

    @property
    def L_max(self) -> int:
        return 0 if self.load is None else self.load.L_max

    def T(self, model: str) -> float:
        return self.models[model].T if model in self.models else math.nan

    def csv_row(self, trial: int) -> dict:
        b = self.models.get(MODEL_B)
        return {
            "n": self.n,
            "trial": trial,
            "N_n": self.N_n,
            "pairs": self.pairs,
            "mean_paths": float(self.path_counts.mean()) if len(self.path_counts) else 0.0,
            "min_paths": int(self.path_counts.min()) if len(self.path_counts) else 0,
            "L_max": self.L_max,
            "T_modelA": self.T(MODEL_A),
            "T_modelB": self.T(MODEL_B),
            "P_modelB": b.P if b is not None else math.nan,
            "anomalies": int(len(self.anomalies)),
        }


def _exact_phase_rates(grid, points, tx, rx, d, cfg, radio, gamma) -> np.ndarray:
    """Exact-SINR rate of each (tx, rx) link under the schedule for range ``d``,
    times its slot share."""
    _, k = tdma_spacing(d, cfg.c, cfg.alpha, cfg.tau, gamma)
    if len(tx) == 0:
        return np.zeros(0)
    code, inverse = np.unique(np.asarray(tx, np.int64) * len(points) + rx, return_inverse=True)
    utx, urx = np.divmod(code, len(points))
    sinr = cell_slot_sinr(grid, points, utx, urx, k, radio)
    return link_rates(sinr, radio)[inverse.reshape(-1)] / (k * k)


def account(
    batch: RouteBatch, grid: SquareGrid, load: LoadMap, cfg: ExperimentConfig, model: str,
    d_relay: int, d_drain: int, d_delivery: int, num_nodes: int, points: np.ndarray | None = None,
) -> ModelRates:
    """Per-path rates of the three phases and the resulting pair rates.

    With ``cfg.exact_sinr`` every drain link, relay hop and delivery link gets
    the rate of its exact SINR (``points`` are then required); a path of a
    single relay has no relay hop and no relay-phase limit.
    """
    gamma = gamma_series(cfg.alpha)
    diagnostic = ""
    feasible = True
    if model == MODEL_B:
        need = min_power_model_b(max(d_relay, d_drain, d_delivery), cfg.c, cfg.alpha, cfg.tau, cfg.N0, gamma)
        P = need if cfg.P_modelB is None else cfg.P_modelB
        if P < need * (1 - 1e-12):
            feasible = False
            diagnostic = f"P={P:.6g} below the minimum {need:.6g} for d={max(d_relay, d_drain, d_delivery)}"
        if P <= 0:
            P = need
    else:
        P = cfg.P
    radio = cfg.radio(model, P)
    rates = {
        "relay": guaranteed_rate(d_relay, cfg.c, radio, gamma),
        "drain": guaranteed_rate(d_drain, cfg.c, radio, gamma),
        "delivery": guaranteed_rate(d_delivery, cfg.c, radio, gamma),
    }
    f_drain, f_relay, f_deliver = cfg.phase_split
    pp = batch.path_pair
    src = batch.src[pp]
    dst = batch.dst[pp]
    occ = grid.cell_occupancy[grid.node_cell_id]
    m = batch.survivors[pp]
    inflow = np.bincount(batch.dst, weights=batch.survivors, minlength=num_nodes).astype(float)
    if cfg.exact_sinr and batch.num_paths:
        if points is None:
            raise ValueError("exact SINR accounting needs the node positions")
        link_drain = _exact_phase_rates(grid, points, src, batch.drain_node, d_drain, cfg, radio, gamma)
        link_deliver = _exact_phase_rates(grid, points, batch.deliver_node, dst, d_delivery, cfg, radio, gamma)
        relays = batch.relays
        hop = np.ones(len(relays), dtype=bool)
        hop[batch.ptr[1:] - 1] = False  # last relay of a path sends no relay hop
        at = np.flatnonzero(hop)
        per_hop = np.full(len(relays), math.inf)
        with np.errstate(divide="ignore"):
            per_hop[at] = _exact_phase_rates(grid, points, relays[at], relays[at + 1], d_relay, cfg, radio, gamma) / (
                load.load[grid.node_cell_id[relays[at]]]
            )
        link_relay = np.minimum.reduceat(per_hop, batch.ptr[:-1])
        with np.errstate(divide="ignore"):
            drain = f_drain * link_drain / (occ[src] * m)
            relay = f_relay * link_relay
            delivery = f_deliver * link_deliver / (occ[dst] * inflow[dst])
    else:
        with np.errstate(divide="ignore"):
            drain = f_drain * rates["drain"] / (occ[src] * m)
            relay = f_relay * rates["relay"] / path_max_load(load.load, grid, batch.ptr, batch.relays)
            delivery = f_deliver * rates["delivery"] / (occ[dst] * inflow[dst])
    path_rate = np.minimum(np.minimum(drain, relay), delivery)
    pair_rate = np.bincount(pp, weights=path_rate, minlength=len(batch.src)).astype(float)
    pair_rate[batch.survivors == 0] = math.nan
    live = pair_rate[batch.survivors > 0]
    T = float(live.min()) if len(live) else math.nan
    return ModelRates(
        model=model, P=float(P), feasible=feasible, diagnostic=diagnostic, link_rates=rates,
        drain=drain, relay=relay, delivery=delivery, path_rate=path_rate, pair_rate=pair_rate, T=T,
    )


def _hop_stats(batch: RouteBatch, c: float, width: float, strict: bool) -> HopStats:
    lim_i = intermediate_hop_limit(c)
    lim_e = endpoint_hop_limit(width, c)
    endpoint = np.maximum(batch.drain_hop, batch.deliver_hop) if batch.num_paths else np.zeros(0)
    stats = HopStats(
        max_intermediate=float(batch.hop_post.max(initial=0.0)),
        intermediate_limit=lim_i,
        intermediate_failures=int((batch.hop_post > lim_i * (1 + 1e-12)).sum()),
        max_endpoint=float(endpoint.max(initial=0.0)),
        endpoint_limit=lim_e,
        endpoint_failures=int((endpoint > lim_e * (1 + 1e-12)).sum()),
        max_pre_remap=float(batch.hop_pre.max(initial=0.0)),
    )
    if strict and (stats.intermediate_failures or stats.endpoint_failures):
        raise HopCertificateError(
            f"{stats.intermediate_failures} intermediate hops above {lim_i:.4f} "
            f"(max {stats.max_intermediate:.4f}), {stats.endpoint_failures} endpoint hops above "
            f"{lim_e:.4f} (max {stats.max_endpoint:.4f})"
        )
    return stats


def _empty_batch() -> RouteBatch:
    z = np.zeros(0, dtype=np.int64)
    f = np.zeros(0)
    return RouteBatch(z, z, z, z, z, np.zeros(1, np.int64), z, z, z, f, f, z, z, f, f, z)


def run_trial(cfg: ExperimentConfig, n: float, seed: int, models=(MODEL_A, MODEL_B), keep_routes: bool = False):
    """One trial: route every pair, load the relays and account both rate models.

    With ``keep_routes`` the routed :class:`RouteBatch` and trial context are
    returned alongside the report.
    """
    tr = prepare_trial(n, cfg.c, cfg.kappa, seed)
    parts = list(route_chunks(tr, cfg.c, cfg.chunk_pairs))
    batch = RouteBatch.concatenate(parts) if parts else _empty_batch()
    N = tr.instance.count
    pairs = N if tr.traffic is not None else 0
    if not parts and pairs:
        # corridor holds no diamond: every pair is anomalous
        batch.src = np.arange(N, dtype=np.int64)
        batch.dst = tr.traffic.dest_of.astype(np.int64)
        batch.crossings = np.zeros(N, dtype=np.int64)
        batch.survivors = np.zeros(N, dtype=np.int64)
    acc = LoadAccumulator(tr.grid)
    acc.add(batch.path_pair, batch.ptr, batch.relays)
    load = acc.result()
    hops = _hop_stats(batch, cfg.c, tr.width, cfg.strict_hops)
    d_relay = cfg.hop_d
    d_drain = max(1, int(batch.drain_cells.max(initial=0)))
    d_delivery = max(1, int(batch.deliver_cells.max(initial=0)))
    report = ThroughputReport(
        n=float(n), seed=int(seed), N_n=N, pairs=pairs, rows=tr.rows, cols=tr.cols,
        d_relay=d_relay, d_drain=d_drain, d_delivery=d_delivery,
        path_counts=batch.survivors, crossing_counts=batch.crossings,
        anomalies=np.flatnonzero(batch.survivors == 0) if pairs else np.zeros(0, np.int64),
        load=load, hops=hops, path_pair=batch.path_pair, config=cfg.to_dict(),
    )
    for model in models:
        report.models[model] = account(batch, tr.grid, load, cfg, model, d_relay, d_drain, d_delivery, N, tr.points)
    if keep_routes:
        return report, batch, tr
    return report


def trial_load(cfg: ExperimentConfig, n: float, seed: int) -> tuple[LoadMap, HopStats, TrialRoutes, np.ndarray]:
    """Loads and hop certificates of one trial without keeping the routes in memory.

    Also returns the surviving path count of every pair.
    """
    tr = prepare_trial(n, cfg.c, cfg.kappa, seed)
    acc = LoadAccumulator(tr.grid)
    stats = HopStats(intermediate_limit=intermediate_hop_limit(cfg.c), endpoint_limit=endpoint_hop_limit(tr.width, cfg.c))
    survivors = []
    for part in route_chunks(tr, cfg.c, cfg.chunk_pairs):
        acc.add(part.path_pair, part.ptr, part.relays)
        h = _hop_stats(part, cfg.c, tr.width, cfg.strict_hops)
        stats.max_intermediate = max(stats.max_intermediate, h.max_intermediate)
        stats.max_endpoint = max(stats.max_endpoint, h.max_endpoint)
        stats.max_pre_remap = max(stats.max_pre_remap, h.max_pre_remap)
        stats.intermediate_failures += h.intermediate_failures
        stats.endpoint_failures += h.endpoint_failures
        survivors.append(part.survivors)
    counts = np.concatenate(survivors) if survivors else np.zeros(0, np.int64)
    return acc.result(), stats, tr, counts


# --- sweeps --------------------------------------------------------------------------


@dataclass
class ScalingReport:
    config: dict
    rows: list[dict]
    hop_failures: int = 0
    fits: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: _fmt(row[k]) for k in CSV_COLUMNS})
        return buf.getvalue()

    def summary(self) -> dict:
        return {"config": self.config, "results": self.rows, "fits": self.fits, "hop_failures": self.hop_failures}

    def means(self, column: str) -> tuple[np.ndarray, np.ndarray]:
        """Distinct n and the mean of ``column`` over non-anomalous trials."""
        ns, vals = [], []
        for n in sorted({r["n"] for r in self.rows}):
            good = [r[column] for r in self.rows if r["n"] == n and math.isfinite(r[column]) and r[column] > 0]
            if good:
                ns.append(n)
                vals.append(float(np.mean(good)))
        return np.asarray(ns, dtype=float), np.asarray(vals)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _sweep_job(args):
    cfg, n, trial = args
    seed = trial_seed(cfg.master_seed, n, trial)
    rep = run_trial(cfg, n, seed)
    row = rep.csv_row(trial)
    extra = {
        "hop_failures": rep.hops.intermediate_failures + rep.hops.endpoint_failures,
        "mean_path_rate_A": float(np.mean(rep.models[MODEL_A].path_rate)) if rep.path_pair is not None and len(rep.path_pair) else math.nan,
        "min_path_rate_A": float(np.min(rep.models[MODEL_A].path_rate)) if rep.path_pair is not None and len(rep.path_pair) else math.nan,
        "max_hop": rep.hops.max_intermediate,
        "max_endpoint_hop": rep.hops.max_endpoint,
        "d_drain": rep.d_drain,
        "d_delivery": rep.d_delivery,
        "seed": seed,
    }
    return row, extra


def sweep(cfg: ExperimentConfig, n_values=None, trials: int | None = None, workers: int | None = None) -> ScalingReport:
    """Run ``trials`` trials for every ``n`` and fit the throughput exponents.

    Rows come back ordered by (n, trial) whatever the worker count.
    """
    ns = list(cfg.n_values if n_values is None else n_values)
    if ns != sorted(ns):
        raise ValueError("n values must be sorted ascending")
    trials = cfg.trials if trials is None else trials
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, n, t) for n in ns for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = []
    failures = 0
    for row, extra in results:
        rows.append(row | {k: v for k, v in extra.items()})
        failures += extra["hop_failures"]
    config = cfg.to_dict() | {"n_values": ns, "trials": trials}
    report = ScalingReport(config=config, rows=rows, hop_failures=failures)
    report.fits = {}
    for model, col in ((MODEL_A, "T_modelA"), (MODEL_B, "T_modelB")):
        try:
            slope, err = fit_scaling(report, col)
            report.fits[f"model{model}"] = {"exponent": slope, "stderr": err, "ci95": [slope - 1.96 * err, slope + 1.96 * err]}
        except ValueError as exc:
            report.fits[f"model{model}"] = {"exponent": None, "stderr": None, "error": str(exc)}
    return report


def fit_loglog(x, y) -> tuple[float, float]:
    """OLS slope of ln y on ln x and its standard error."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if len(np.unique(lx)) < 3:
        raise ValueError("need at least 3 distinct abscissae for a fit")
    A = np.column_stack((lx, np.ones_like(lx)))
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = len(lx) - 2
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


def fit_scaling(report: ScalingReport, column: str = "T_modelA") -> tuple[float, float]:
    ns, means = report.means(column)
    return fit_loglog(ns, means)


def write_outputs(report: ScalingReport, csv_path: str | None, json_path: str | None) -> None:
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            fh.write(report.to_csv())
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(json_safe(report.summary()), fh, indent=2, allow_nan=False)


def json_safe(obj):
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


# --- schedule and corridor surveys --------------------------------------------------


@dataclass
class SinrSurvey:
    d: int
    c: float
    P: float
    P_min: float
    k: int
    x: int
    checks: list = field(repr=False)  # LinkCheck per scheduled link, all trials
    trial_of: np.ndarray = field(repr=False)

    @property
    def violations(self) -> list:
        return [chk for chk in self.checks if not chk.ok]

    @property
    def interference_exceedances(self) -> int:
        return sum(chk.interference > chk.interference_bound * (1 + 1e-12) for chk in self.checks)


def sinr_survey(
    n: float, d: int, c: float, radio: RadioConfig, trials: int, seed: int, worst_case: bool = False
) -> SinrSurvey:
    """Exact SINR of the scheduled links of ``trials`` random networks.

    Each nonempty cell's relay sends to a random node within range ``d``
    (see :func:`percroute.radio.random_links`). With ``worst_case`` the
    adversarial placement of :func:`percroute.radio.worst_case_links` is
    evaluated instead and ``n``/``trials`` are ignored.
    """
    from percroute.radio import build_schedule, evaluate_schedule, random_links, tdma_spacing, worst_case_links

    gamma = gamma_series(radio.alpha)
    x, k = tdma_spacing(d, c, radio.alpha, radio.tau, gamma)
    P_min = min_power_model_b(d, c, radio.alpha, radio.tau, radio.N0, gamma, x)
    checks, trial_of = [], []
    if worst_case:
        links = worst_case_links(d, c, k)
        pts = np.array([lk.tx for lk in links])
        grid = tessellate_squares(float(np.abs(pts).max()) * SQRT2 + c, c, pts)
        checks = evaluate_schedule(build_schedule(grid, d, radio, gamma), grid, links, radio, gamma)
        trial_of = [0] * len(checks)
    else:
        for t in range(trials):
            s = trial_seed(seed, n, t)
            inst = netgen.sample_network(n, s)
            grid = tessellate_squares(inst.region_radius, c, inst.nodes)
            links = random_links(grid, inst.nodes, d, netgen.derive_rng(s, 3))
            got = evaluate_schedule(build_schedule(grid, d, radio, gamma), grid, links, radio, gamma)
            checks.extend(got)
            trial_of.extend([t] * len(got))
    return SinrSurvey(d, c, radio.P, P_min, k, x, checks, np.asarray(trial_of, dtype=np.int64))


def central_hit_fraction(n: float, c: float, kappa: float, corridors: int, seed: int) -> float:
    """Fraction of corridors between uniform random point pairs that meet the
    cell containing the disk centre."""
    from percroute.load import corridor_cell_hits
    from percroute.routing import build_corridor

    rng = netgen.derive_rng(seed, 4)
    radius = math.sqrt(n)
    ends = netgen.uniform_disk(rng, 2 * corridors, radius).reshape(corridors, 2, 2)
    key = np.zeros((1, 2), dtype=np.int64)
    hits = 0
    for s, d in ends:
        hits += bool(corridor_cell_hits(build_corridor(s, d, n, c, kappa), key, c)[0])
    return hits / corridors
