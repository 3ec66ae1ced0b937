"""Command-line front end: ``percroute <subcommand> [flags]``.

Every report echoes the resolved configuration. Errors print one diagnostic
line on stderr and exit nonzero: 2 for bad input, 3 for a failed internal
check.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from percroute import sim
from percroute.load import corridor_intersect_prob_bound, load_bound
from percroute.radio import MODEL_A, MODEL_B, RadioConfig
from percroute.routing import HopCertificateError

EXIT_INPUT = 2
EXIT_CHECK = 3

# flag name -> ExperimentConfig field
_OVERRIDES = {
    "c": "c", "kappa": "kappa", "alpha": "alpha", "tau": "tau", "N0": "N0", "W": "W", "T": "T", "B": "B",
    "P": "P", "P_modelB": "P_modelB", "model": "model", "n_values": "n_values", "trials": "trials",
    "master_seed": "master_seed", "workers": "workers", "relay_d": "relay_d", "strict_hops": "strict_hops",
    "exact_sinr": "exact_sinr", "csv": "csv_path", "json": "json_path",
}


class CliError(Exception):
    def __init__(self, message: str, status: int = EXIT_INPUT):
        super().__init__(message)
        self.status = status


def resolve_values(source: str | None, overrides: dict) -> dict:
    """Field values from the YAML file (``default`` or absent means none), then flags."""
    fields = {f.name for f in dataclasses.fields(sim.ExperimentConfig)}
    values: dict = {}
    if source and source != "default":
        try:
            doc = yaml.safe_load(Path(source).read_text())
        except OSError as exc:
            raise CliError(f"cannot read config {source}: {exc.strerror}") from exc
        except yaml.YAMLError as exc:
            raise CliError(f"config {source} is not valid YAML: {exc}") from exc
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise CliError(f"config {source} must be a mapping of field names to values")
        unknown = sorted(set(doc) - fields)
        if unknown:
            raise CliError(f"unknown config fields: {', '.join(unknown)}")
        values.update(doc)
    values.update({_OVERRIDES[k]: v for k, v in overrides.items() if v is not None})
    for key in ("n_values", "phase_split"):
        if key in values:
            values[key] = tuple(float(v) for v in values[key])
    return values


def load_config(source: str | None, overrides: dict) -> sim.ExperimentConfig:
    """Defaults, then the YAML file, then flags."""
    try:
        return sim.ExperimentConfig(**resolve_values(source, overrides))
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc


def load_radio(source: str | None, overrides: dict) -> tuple[RadioConfig, dict]:
    """Radio parameters only; corridor constraints do not apply to schedule checks."""
    values = resolve_values(source, overrides)
    defaults = {f.name: f.default for f in dataclasses.fields(sim.ExperimentConfig)}
    merged = defaults | values
    try:
        radio = RadioConfig(
            P=merged["P"], alpha=merged["alpha"], N0=merged["N0"], tau=merged["tau"],
            W=merged["W"], T=merged["T"], B=merged["B"], model=merged["model"],
        )
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    if not merged["c"] > 0:
        raise CliError("invalid config: c must be positive")
    return radio, merged


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file, or 'default'")
    for name in ("c", "kappa", "alpha", "tau", "N0", "W", "T", "B", "P"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--P-modelB", dest="P_modelB", type=float, default=None, help="fixed Model B power")
    p.add_argument("--model", choices=(MODEL_A, MODEL_B), default=None)
    p.add_argument("--n-values", dest="n_values", type=float, nargs="+", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--relay-d", dest="relay_d", type=int, default=None)
    p.add_argument("--strict-hops", dest="strict_hops", action="store_true", default=None)
    p.add_argument("--exact-sinr", dest="exact_sinr", action="store_true", default=None,
                   help="account exact per-link SINR rates instead of the schedule guarantees")
    p.add_argument("--csv", default=None, help="CSV output path")
    p.add_argument("--json", default=None, help="JSON summary path")


def _config_from(args) -> sim.ExperimentConfig:
    over = {k: getattr(args, k, None) for k in _OVERRIDES}
    return load_config(args.config, over)


def _emit_json(doc: dict, path: str | None, out) -> None:
    text = json.dumps(sim.json_safe(doc), indent=2, allow_nan=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text, file=out)


# --- subcommands --------------------------------------------------------------


def cmd_sweep(args, out) -> int:
    cfg = _config_from(args)
    ns = list(cfg.n_values)
    if ns != sorted(ns):
        raise CliError("n values must be sorted ascending")
    report = sim.sweep(cfg)
    sim.write_outputs(report, cfg.csv_path, cfg.json_path)
    if not cfg.csv_path:
        out.write(report.to_csv())
    if not cfg.json_path:
        doc = {"config": report.config, "fits": report.fits, "hop_failures": report.hop_failures}
        print(json.dumps(sim.json_safe(doc), allow_nan=False), file=out)
    if report.hop_failures and cfg.strict_hops:
        raise CliError(f"{report.hop_failures} hops broke their length certificate", EXIT_CHECK)
    return 0


def cmd_simulate(args, out) -> int:
    cfg = _config_from(args)
    n = args.n if args.n is not None else cfg.n_values[0]
    seed = args.seed if args.seed is not None else sim.trial_seed(cfg.master_seed, n, args.trial)
    report, batch, _ = sim.run_trial(cfg, n, seed, keep_routes=True)
    models = {}
    for name, mr in report.models.items():
        live = mr.pair_rate[np.isfinite(mr.pair_rate)]
        models[name] = {
            "P": mr.P, "feasible": mr.feasible, "diagnostic": mr.diagnostic, "link_rates": mr.link_rates,
            "T": mr.T, "mean_pair_rate": float(live.mean()) if len(live) else math.nan,
            "relay_dominates": bool(np.all(mr.relay <= np.minimum(mr.drain, mr.delivery))) if len(mr.relay) else None,
        }
    doc = {
        "config": cfg.to_dict(), "n": report.n, "seed": report.seed, "N_n": report.N_n, "pairs": report.pairs,
        "rows": report.rows, "cols": report.cols,
        "d_relay": report.d_relay, "d_drain": report.d_drain, "d_delivery": report.d_delivery,
        "mean_paths": float(report.path_counts.mean()) if len(report.path_counts) else 0.0,
        "min_paths": int(report.path_counts.min()) if len(report.path_counts) else 0,
        "anomalies": int(len(report.anomalies)), "L_max": report.L_max,
        "hops": dataclasses.asdict(report.hops), "models": models,
    }
    if cfg.csv_path:
        with open(cfg.csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            names = sorted(report.models)
            w.writerow(["pair", "source", "destination", "path"]
                       + [f"{col}_model{m}" for m in names for col in ("drain", "relay", "delivery", "rate")])
            rank = np.zeros(batch.num_paths, dtype=np.int64)
            if batch.num_paths:
                first = np.searchsorted(batch.path_pair, batch.path_pair)
                rank = np.arange(batch.num_paths) - first
            for p in range(batch.num_paths):
                q = int(batch.path_pair[p])
                row = [q, int(batch.src[q]), int(batch.dst[q]), int(rank[p])]
                for m in names:
                    mr = report.models[m]
                    row += [repr(float(mr.drain[p])), repr(float(mr.relay[p])), repr(float(mr.delivery[p])),
                            repr(float(mr.path_rate[p]))]
                w.writerow(row)
    _emit_json(doc, cfg.json_path, out)
    if cfg.model == MODEL_B and not report.models[MODEL_B].feasible:
        raise CliError(report.models[MODEL_B].diagnostic, EXIT_INPUT)
    return 0


def cmd_percolation_stats(args, out) -> int:
    cfg = load_config(args.config, {"c": args.c, "kappa": args.kappa, "master_seed": args.master_seed})
    try:
        survey = sim.crossing_survey(args.n, cfg.c, cfg.kappa, args.corridors, cfg.master_seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    s = survey.summary()
    print(f"n={args.n:g} c={cfg.c:g} kappa={cfg.kappa:g} master_seed={cfg.master_seed}", file=out)
    print(f"m={s['m']} prob_lower={s['prob_lower']:.7f}", file=out)
    print(
        f"corridors={s['corridors']} mean={s['mean_crossings']:.4f} min={s['min_crossings']} "
        f"max={s['max_crossings']} fraction>=m={s['fraction_at_least_m']:.4f}",
        file=out,
    )
    if args.json:
        _emit_json(s | {"config": cfg.to_dict()}, args.json, out)
    return 0


def cmd_verify_sinr(args, out) -> int:
    base, merged = load_radio(
        args.config,
        {"c": args.c, "alpha": args.alpha, "tau": args.tau, "N0": args.N0, "model": args.model,
         "master_seed": args.master_seed},
    )
    c, seed = float(merged["c"]), int(merged["master_seed"])
    echo = {k: merged[k] for k in ("c", "alpha", "tau", "N0", "W", "T", "B", "model", "master_seed")}
    probe = sim.sinr_survey(args.n, args.d, c, base, 0, seed)
    P = args.P if args.P is not None else (probe.P_min if base.model == MODEL_B else base.P)
    if not P > 0:
        raise CliError("P must be positive")
    radio = base.with_power(P)
    survey = sim.sinr_survey(args.n, args.d, c, radio, args.trials, seed, worst_case=args.worst_case)
    geometry = "worst-case" if args.worst_case else f"random n={args.n:g} trials={args.trials}"
    print(" ".join(f"{k}={v}" for k, v in echo.items()) + f" d={args.d} geometry={geometry}", file=out)
    print(f"x={survey.x} k={survey.k} slots={survey.k ** 2} P_min={survey.P_min:.6g} P={P:.6g}", file=out)
    print(f"{'slot':>6} {'link':>7} {'exact_sinr':>12} {'bound_sinr':>12} result", file=out)
    shown = 0
    for t, chk in zip(survey.trial_of, survey.checks):
        if shown < args.rows or not chk.ok:
            label = f"{chk.link}" if args.worst_case else f"{t}:{chk.link}"
            print(f"{chk.slot:>6} {label:>7} {chk.sinr:>12.6g} {chk.sinr_bound:>12.6g} {'pass' if chk.ok else 'FAIL'}", file=out)
            shown += 1
    bad = survey.violations
    print(
        f"links={len(survey.checks)} violations={len(bad)} interference_over_bound={survey.interference_exceedances}",
        file=out,
    )
    promised = base.model == MODEL_A or P >= survey.P_min * (1 - 1e-12)
    if survey.interference_exceedances:
        raise CliError(f"{survey.interference_exceedances} receivers exceed the interference bound", EXIT_CHECK)
    if bad and promised:
        raise CliError(f"{len(bad)} scheduled links miss their guarantee at P={P:.6g}", EXIT_CHECK)
    return 0


def cmd_load_stats(args, out) -> int:
    cfg = load_config(args.config, {"c": args.c, "kappa": args.kappa, "master_seed": args.master_seed,
                                    "strict_hops": args.strict_hops})
    rows = []
    for t in range(args.trials):
        seed = sim.trial_seed(cfg.master_seed, args.n, t)
        lm, hops, tr, _ = sim.trial_load(cfg, args.n, seed)
        near, far = lm.radial_means(tr.instance.region_radius)
        rows.append({
            "trial": t, "seed": seed, "L_max": lm.L_max, "bound": load_bound(args.n),
            "ratio": lm.L_max / (math.sqrt(args.n) * math.log(args.n)), "pair_cell_max": lm.pair_cell_max,
            "central_mean": near, "outer_mean": far, "hop_failures": hops.intermediate_failures + hops.endpoint_failures,
        })
        if args.heatmap and t == 0:
            lm.to_csv(args.heatmap)
    print(f"n={args.n:g} c={cfg.c:g} kappa={cfg.kappa:g} master_seed={cfg.master_seed}", file=out)
    for r in rows:
        print(
            f"trial={r['trial']} L_max={r['L_max']} bound={r['bound']:.1f} L_max/(sqrt(n) ln n)={r['ratio']:.4f} "
            f"pair_cell_max={r['pair_cell_max']} central={r['central_mean']:.2f} outer={r['outer_mean']:.2f} "
            f"hop_failures={r['hop_failures']}",
            file=out,
        )
    doc = {"config": cfg.to_dict(), "n": args.n, "trials": rows}
    if args.corridors:
        frac = sim.central_hit_fraction(args.n, cfg.c, cfg.kappa, args.corridors, cfg.master_seed)
        bound = corridor_intersect_prob_bound(args.n, cfg.c, cfg.kappa)
        print(f"central cell hit fraction={frac:.4f} over {args.corridors} corridors, bound={bound:.4f}", file=out)
        doc |= {"central_hit_fraction": frac, "intersect_bound": bound}
    if args.json:
        _emit_json(doc, args.json, out)
    over = [r for r in rows if r["L_max"] > r["bound"] or r["pair_cell_max"] > 9]
    if over:
        raise CliError(f"{len(over)} trials break the load bound or the per-pair cap", EXIT_CHECK)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percroute", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="multi-n throughput sweep; CSV with one row per (n, trial)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="one trial with per-path rates")
    _add_config_flags(p)
    p.add_argument("--n", type=float, default=None, help="scale (default: first of n_values)")
    p.add_argument("--trial", type=int, default=0, help="trial index for the seed derivation")
    p.add_argument("--seed", type=int, default=None, help="explicit trial seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("percolation-stats", help="guaranteed and empirical corridor crossing counts")
    p.add_argument("--config")
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--corridors", type=int, default=200)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_percolation_stats)

    p = sub.add_parser("verify-sinr", help="exact SINR of scheduled links against the bounds")
    p.add_argument("--config")
    p.add_argument("--model", choices=(MODEL_A, MODEL_B), default=None)
    p.add_argument("--d", type=int, default=1)
    for name in ("c", "alpha", "tau", "N0"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--P", type=float, default=None, help="power (default: P_min for Model B)")
    p.add_argument("--n", type=float, default=1e4)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--worst-case", dest="worst_case", action="store_true", help="adversarial placement instead")
    p.add_argument("--rows", type=int, default=20, help="passing rows to print")
    p.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p.set_defaults(func=cmd_verify_sinr)

    p = sub.add_parser("load-stats", help="per-cell loading factors of full trials")
    p.add_argument("--config")
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--corridors", type=int, default=0, help="also sample central-cell corridor hits")
    p.add_argument("--heatmap", default=None, help="CSV (cell_x, cell_y, L) of the first trial")
    p.add_argument("--strict-hops", dest="strict_hops", action="store_true", default=None)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_load_stats)
    return parser


def dispatch(argv: list[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed its diagnostic
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except CliError as exc:
        print(f"percroute {args.command}: error: {exc}", file=sys.stderr)
        return exc.status
    except HopCertificateError as exc:
        print(f"percroute {args.command}: error: hop certificate failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, OSError) as exc:
        print(f"percroute {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main(argv: list[str] | None = None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
