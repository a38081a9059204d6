"""Command-line interface.

Subcommands: milestone-run, long-run, oracle, dump, error-report.
Exit codes: 0 ok, 1 runtime error, 2 config error, 3 nonconverged with
results, 4 no completed events.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts, baseline, driver, markov
from .config import load_config
from .errors import ConfigError, InvalidComparisonError, MilestoningError
from .potentials import eval_potential

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_NO_EVENTS = 4


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidComparisonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MilestoningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _build_parser():
    p = argparse.ArgumentParser(prog="milestoning")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("milestone-run", help="iterated flux/MFPT estimation")
    _common_run_flags(run_p)
    run_p.set_defaults(func=cmd_milestone_run)

    long_p = sub.add_parser("long-run", help="long-trajectory reference experiment")
    _common_run_flags(long_p)
    long_p.set_defaults(func=cmd_long_run)

    or_p = sub.add_parser("oracle", help="discrete-chain certificates as JSON")
    or_p.add_argument("--matrix", required=True, help="kernel matrix CSV")
    or_p.add_argument("--meta", required=True, help="metadata JSON")
    or_p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    or_p.set_defaults(func=cmd_oracle)

    dump_p = sub.add_parser("dump", help="dump CSV artifacts for plotting")
    dump_p.add_argument("--config", required=True)
    dump_p.add_argument("--what", required=True, choices=["potential-grid", "partition"])
    dump_p.add_argument("--out", required=True)
    dump_p.add_argument("--grid-n", type=int, default=100)
    dump_p.set_defaults(func=cmd_dump)

    err_p = sub.add_parser("error-report", help="dt-halving error budget")
    err_p.add_argument("--run-a", required=True, help="output dir of the coarser-dt run")
    err_p.add_argument("--run-b", required=True, help="output dir of the dt/2 run")
    err_p.add_argument("--reference", default=None, help="output dir of a reference flux run")
    err_p.add_argument("--out", default=None)
    err_p.set_defaults(func=cmd_error_report)
    return p


def _common_run_flags(p):
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", default=None, help="override [run].output_dir")


def _executor(threads):
    return ThreadPoolExecutor(max_workers=threads) if threads > 1 else None


def _out_dir(cfg, args):
    out = Path(args.output if args.output else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_milestone_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    pool = _executor(args.threads)
    try:
        with artifacts.FragmentSink(out / "fragments.csv", cfg.run_id) as sink:
            result = driver.run(
                cfg.partition, cfg.potential, cfg.integrator, cfg.milestoning,
                cfg.seed, executor=pool, fragment_sink=sink,
            )
    finally:
        if pool is not None:
            pool.shutdown()
    artifacts.write_history_csv(out / "history.csv", result.history, cfg.partition.m)
    artifacts.write_flux_csv(
        out / "flux.csv",
        result.flux.coarse_weights,
        result.mean_fpts,
        [len(r) for r in result.flux.reservoirs],
    )
    artifacts.write_json(out / "summary.json", {
        "run_id": cfg.run_id,
        "kind": "milestone-run",
        "seed": cfg.seed,
        "T": result.T,
        "epsilon": cfg.milestoning.epsilon,
        "iterations": len(result.history),
        "force_evals": result.force_evals,
        "converged": result.converged,
        "status": result.status,
        "product_index": cfg.partition.product_index,
        "reactant_index": cfg.partition.reactant_index,
        "config": cfg.config_echo(),
    })
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_long_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    pool = _executor(args.threads)
    try:
        result = baseline.run_long(
            cfg.partition, cfg.potential, cfg.integrator,
            cfg.baseline_budget, cfg.seed, replicas=cfg.baseline_replicas,
            executor=pool,
        )
    finally:
        if pool is not None:
            pool.shutdown()
    artifacts.write_events_csv(out / "events.csv", result.events)
    artifacts.write_flux_csv(
        out / "flux.csv",
        result.coarse_weights,
        result.mean_fpts,
        [len(r) for r in result.reservoirs],
    )
    artifacts.write_json(out / "summary.json", {
        "run_id": cfg.run_id,
        "kind": "long-run",
        "seed": cfg.seed,
        "mfpt": result.mfpt,
        "mfpt_se": result.mfpt_se,
        "events": result.n_events,
        "force_evals": result.force_evals,
        "budget": cfg.baseline_budget,
        "replicas": cfg.baseline_replicas,
        "product_index": cfg.partition.product_index,
        "reactant_index": cfg.partition.reactant_index,
        "config": cfg.config_echo(),
    })
    if result.n_events == 0:
        print("no completed passage events within budget", file=sys.stderr)
        return EXIT_NO_EVENTS
    return EXIT_OK


def cmd_oracle(args) -> int:
    chain = artifacts.load_chain(args.matrix, args.meta)
    with open(args.meta, encoding="utf-8") as fh:
        meta = json.load(fh)
    horizon = int(meta.get("horizon", 4 * chain.m))
    mu = markov.invariant_mu_visits(chain)
    direct, milest = markov.mfpt_check(chain)
    nu_m = markov.expected_visits(chain).sum()
    cert = {
        "m": chain.m,
        "mu": list(mu),
        "expected_sigma": nu_m - 1.0,
        "gcd": markov.aperiodicity_gcd(chain, horizon),
        "mfpt_direct": direct,
        "mfpt_milestoning": milest,
        "mfpt_relative_residual": abs(direct - milest) / abs(direct) if direct else 0.0,
    }
    if np.any(chain.jump_time_means > 0):
        cert["semi_markov_occupancy"] = list(markov.semi_markov_occupancy(chain))
    bound_n = meta.get("bound_N")
    candidates = [int(bound_n)] if bound_n is not None else range(1, 4 * chain.m + 1)
    geo = None
    for N in candidates:
        geo = markov.geometric_bound_certificate(chain, N)
        if geo.satisfied:
            break
    cert["geometric_bound"] = {
        "N": geo.N if geo.satisfied else None,
        "lambda": geo.lam if geo.satisfied else 0.0,
        "satisfied": bool(geo.satisfied),
    }
    if geo.satisfied:
        ns = list(range(0, min(horizon, 12) * geo.N, geo.N))
        cert["geometric_bound"]["decay"] = {
            "n": ns,
            "bound": [geo.bound(n) for n in ns],
            "empirical": [geo.empirical(n) for n in ns],
        }
    ns = list(range(1, min(horizon, 20) + 1))
    nm = [markov.neumann_partial(chain, n) for n in ns]
    cert["neumann"] = {
        "n": ns,
        "tv_error": [t for _, t, _ in nm],
        "bound": [b for _, _, b in nm],
    }
    text = json.dumps(artifacts._denan(cert), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dump(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    if args.what == "partition":
        rows = []
        for mil in cfg.partition.milestones:
            for s_idx, (ax, ay, bx, by) in enumerate(mil.segments):
                rows.append((mil.index, s_idx, ax, ay, bx, by))
        artifacts.write_csv(out, ["milestone_index", "seg_index", "x1a", "x2a", "x1b", "x2b"], rows)
        return EXIT_OK
    # potential-grid
    if cfg.integrator.domain == "torus":
        (xmin, ymin), (xmax, ymax) = (0.0, 0.0), (1.0, 1.0)
    elif cfg.partition.bbox is not None:
        (xmin, ymin), (xmax, ymax) = cfg.partition.bbox
    else:
        (xmin, ymin), (xmax, ymax) = (-2.0, -2.0), (2.0, 2.0)
    n = args.grid_n
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    u = eval_potential(cfg.potential, pts)
    rows = ((pts[k, 0], pts[k, 1], u[k]) for k in range(len(pts)))
    artifacts.write_csv(out, ["x1", "x2", "u"], rows)
    return EXIT_OK


def _load_run_artifacts(run_dir):
    run_dir = Path(run_dir)
    summary = artifacts.load_summary(run_dir / "summary.json")
    weights, fpts = artifacts.load_flux_csv(run_dir / "flux.csv")
    config = json.loads(json.dumps(summary.get("config", {})))
    config.get("integrator", {}).pop("dt", None)
    config.get("run", {}).pop("output_dir", None)
    config.get("run", {}).pop("run_id", None)
    T = summary.get("T", summary.get("mfpt"))
    return driver.RunArtifacts(
        dt=float(summary["config"]["integrator"]["dt"]),
        T=float(T) if T is not None else math.nan,
        weights=weights,
        mean_fpts=fpts,
        product_index=int(summary["product_index"]),
        config_key=config,
    )


def cmd_error_report(args) -> int:
    run_a = _load_run_artifacts(args.run_a)
    run_b = _load_run_artifacts(args.run_b)
    ref = _load_run_artifacts(args.reference) if args.reference else None
    report = driver.error_report(run_a, run_b, reference=ref)
    text = json.dumps(artifacts._denan(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
