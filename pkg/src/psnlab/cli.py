"""Command-line front end: config parsing, seed management, experiment
dispatch and report emission.

Exit codes: 0 success, 1 acceptance-threshold failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import aggstate, experiments, psn, sampling
from .config import ConfigError, load_model
from .graph import UndirectedNetwork, write_attr_csv, write_edge_csv, read_attr_csv, read_edge_csv
from .model import DomainError
from .moments import Instrument, MomentSpec, SubnetworkEvent, compute_moment
from .seeding import kernel_seed, stream

USAGE_ERROR = 2
THRESHOLD_ERROR = 1


def _event_from_args(args) -> SubnetworkEvent:
    kind = args.event
    if kind == "single-link":
        return SubnetworkEvent.single_link()
    if kind == "triangle":
        return SubnetworkEvent.triangle()
    if kind == "two-link":
        return SubnetworkEvent.exact_links(3, 2)
    if kind == "full-support":
        return SubnetworkEvent.full_support(args.d)
    raise ConfigError(f"unknown event {kind!r}")


def _add_common(p):
    p.add_argument("--config", required=True, help="model config file")
    p.add_argument("--seed", type=int, default=20240801, help="base seed (64-bit)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker pool size (informational)")


def _ensure_out(args):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_report(report, out_dir, stem):
    text = report.to_json() + "\n"
    if out_dir:
        path = os.path.join(out_dir, f"{stem}.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        rows = report.replication_rows()
        if rows:
            width = max(len(r) for r in rows) - 2
            with open(os.path.join(out_dir, f"{stem}_replications.csv"), "w", newline="\n") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "replication"] + [f"m{k}" for k in range(width)])
                for r in rows:
                    w.writerow([r[0], r[1]] + [repr(v) for v in r[2:]])
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    model = load_model(args.config)
    if args.n < 2:
        raise ConfigError("--n must be at least 2")
    out = _ensure_out(args)
    values = np.asarray(model.type_space.values)
    for r in range(args.reps):
        rng = stream(args.seed, "sim", args.n, r)
        kseed = kernel_seed(args.seed, "sim-order", args.n, r)
        adj, x_idx, converged, sweeps = experiments.simulate_network(
            model, args.n, rng, kseed, args.max_sweeps
        )
        net = UndirectedNetwork.from_matrix(adj.astype(bool))
        if out:
            with open(os.path.join(out, f"edges_{r}.csv"), "w", newline="\n") as fh:
                write_edge_csv(net, fh)
            with open(os.path.join(out, f"attrs_{r}.csv"), "w", newline="\n") as fh:
                write_attr_csv(x_idx, fh)
            with open(os.path.join(out, f"meta_{r}.json"), "w", newline="\n") as fh:
                json.dump(
                    {"n": args.n, "replication": r, "converged": bool(converged),
                     "sweeps": int(sweeps), "seed": args.seed},
                    fh, sort_keys=True)
                fh.write("\n")
        else:
            sys.stdout.write(f"replication {r}: edges={net.edge_count()} converged={converged}\n")
    return 0


def cmd_oracle(args):
    model = load_model(args.config)
    if args.n > args.n_max:
        raise ConfigError(f"--n must be <= {args.n_max} for enumeration")
    values = np.asarray(model.type_space.values)
    contained = 0
    convergent = 0
    psn_counts = []
    instances = []
    for r in range(args.draws):
        rng = stream(args.seed, "oracle", args.n, r)
        x_idx = model.type_space.draw_indices(args.n, rng)
        X = values[x_idx]
        shocks = psn.draw_shocks(model, args.n, rng, seed=args.seed)
        exact = psn.enumerate_psn(model, shocks, X, n_max=args.n_max)
        psn_counts.append(len(exact))
        res = psn.tatonnement(model, shocks, X, rng)
        entry = {"draw": r, "psn_count": len(exact),
                 "psn_edges": sorted(sorted(g.edge_list()) for g in exact)}
        if isinstance(res, UndirectedNetwork):
            convergent += 1
            inside = any(res == g for g in exact)
            contained += int(inside)
            entry["tatonnement"] = sorted(res.edge_list())
            entry["contained"] = inside
        else:
            entry["tatonnement"] = None
        instances.append(entry)
    report = {
        "n": args.n,
        "draws": args.draws,
        "seed": args.seed,
        "mean_psn_count": float(np.mean(psn_counts)),
        "zero_psn_draws": int(sum(1 for c in psn_counts if c == 0)),
        "convergent": convergent,
        "containment": f"{contained}/{convergent}",
        "instances": instances if args.verbose else None,
    }
    out = _ensure_out(args)
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if out:
        with open(os.path.join(out, "oracle.json"), "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if contained == convergent else THRESHOLD_ERROR


def cmd_solve(args):
    model = load_model(args.config)
    state, diag = aggstate.solve_joint(
        model, tol=args.tol, rng=stream(args.seed, "solve"), starts=args.starts
    )
    payload = {
        "types": list(model.type_space.values),
        "statistic_support": list(model.node_stat.support),
        "lambda": state.lam,
        "eta": state.eta.table.tolist(),
        "m": {str(r): t.tolist() for r, t in state.m.tables.items()},
        "arrival": state.arrival.tolist(),
        "diagnostics": {
            "iterations": diag.iterations,
            "final_residual": diag.final_residual,
            "converged": diag.converged,
            "multiple_fixed_points": bool(diag.extra.get("multiple_fixed_points", False)),
        },
    }
    out = _ensure_out(args)
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if out:
        with open(os.path.join(out, "state.json"), "w", newline="\n") as fh:
            fh.write(text)
        with open(os.path.join(out, "state_diagnostics.csv"), "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "ratio"])
            for i, ratio in enumerate(diag.contraction_ratios):
                w.writerow([i + 1, repr(ratio)])
    else:
        sys.stdout.write(text)
    return 0 if diag.converged else THRESHOLD_ERROR


def cmd_moment(args):
    model = load_model(args.config)
    with open(args.attrs, newline="") as fh:
        x_idx = read_attr_csv(fh)
    with open(args.edges, newline="") as fh:
        net = read_edge_csv(fh, len(x_idx))
    event = _event_from_args(args)
    spec = MomentSpec(event=event, instrument=Instrument.constant(), p_n=args.p_n)
    values = np.asarray(model.type_space.values)
    val = compute_moment(net, values[x_idx], spec, None)
    sys.stdout.write(json.dumps({"moment": val.tolist()}, sort_keys=True) + "\n")
    return 0


_EXPERIMENTS = {
    "lln": experiments.run_lln,
    "bias": experiments.run_bias,
    "clt": experiments.run_clt,
    "logit-rate": experiments.run_logit_rate,
    "sampling-gap": experiments.run_sampling_gap,
}


def cmd_experiment(args):
    model = load_model(args.config)
    event = _event_from_args(args)
    plan = experiments.ExperimentPlan(
        model=model,
        n_grid=tuple(args.n_grid),
        replications=args.reps,
        base_seed=args.seed,
        event=event,
        instrument=Instrument.constant(),
        mc_budget=args.mc_budget,
        max_sweeps=args.max_sweeps,
        n_instances=args.instances,
    )
    report = _EXPERIMENTS[args.command](plan)
    out = _ensure_out(args)
    _write_report(report, out, report.name)
    return 0 if report.passed else THRESHOLD_ERROR


def build_parser():
    p = argparse.ArgumentParser(prog="psnlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate pairwise stable networks to CSV")
    _add_common(sim)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--reps", type=int, default=1)
    sim.add_argument("--max-sweeps", type=int, default=200)
    sim.set_defaults(func=cmd_simulate)

    orc = sub.add_parser("oracle", help="enumeration oracle cross-checks")
    _add_common(orc)
    orc.add_argument("--n", type=int, default=4)
    orc.add_argument("--draws", type=int, default=200)
    orc.add_argument("--n-max", type=int, default=6)
    orc.add_argument("--verbose", action="store_true")
    orc.set_defaults(func=cmd_oracle)

    sol = sub.add_parser("solve", help="solve the joint aggregate fixed point")
    _add_common(sol)
    sol.add_argument("--tol", type=float, default=1e-8)
    sol.add_argument("--starts", type=int, default=5)
    sol.set_defaults(func=cmd_solve)

    mom = sub.add_parser("moment", help="compute a moment from edge/attribute CSVs")
    _add_common(mom)
    mom.add_argument("--edges", required=True)
    mom.add_argument("--attrs", required=True)
    mom.add_argument("--event", default="single-link")
    mom.add_argument("--d", type=int, default=2)
    mom.add_argument("--p-n", type=float, default=1.0)
    mom.set_defaults(func=cmd_moment)

    for name in _EXPERIMENTS:
        e = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(e)
        e.add_argument("--n-grid", type=int, nargs="+", required=True)
        e.add_argument("--reps", type=int, default=200)
        e.add_argument("--event", default="single-link")
        e.add_argument("--d", type=int, default=2)
        e.add_argument("--mc-budget", type=int, default=400_000)
        e.add_argument("--max-sweeps", type=int, default=200)
        e.add_argument("--instances", type=int, default=6)
        e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, DomainError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
