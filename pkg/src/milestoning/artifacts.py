"""CSV/JSON artifact writers and readers.

All files are UTF-8 with LF line endings; floats print as %.17g so
reruns are byte-identical and values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .markov import DiscreteChain


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_denan(obj), indent=2, sort_keys=True) + "\n")


def _denan(obj):
    if isinstance(obj, dict):
        return {k: _denan(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_denan(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.ndarray):
        return _denan(obj.tolist())
    return obj


def write_history_csv(path, history, m):
    header = ["iteration", "T", "T_mu_prev", "T_mu_new", "delta_T", "weight_tv",
              "force_evals_cumulative", "eigen_residual"]
    header += [f"mean_fpt_{i}" for i in range(m)]
    rows = []
    for rec in history:
        row = [rec.n, rec.T, rec.T_mu_prev, rec.T_mu_new, rec.delta_T,
               rec.weight_tv, rec.force_evals_cumulative, rec.eigen_residual]
        row += list(rec.mean_fpts)
        rows.append(row)
    write_csv(path, header, rows)


def write_flux_csv(path, weights, mean_fpts, reservoir_sizes):
    header = ["milestone_index", "weight", "mean_local_fpt", "reservoir_size"]
    rows = [
        (i, weights[i], mean_fpts[i], reservoir_sizes[i])
        for i in range(len(weights))
    ]
    write_csv(path, header, rows)


def write_events_csv(path, events):
    header = ["event_index", "passage_time", "crossings", "force_evals", "replica"]
    rows = [(e.event_index, e.passage_time, e.crossings, e.force_evals, e.replica)
            for e in events]
    write_csv(path, header, rows)


FRAGMENTS_HEADER = [
    "run_id", "iteration", "start_milestone", "end_milestone", "fpt", "steps",
    "stream_id", "start_x1", "start_x2", "end_x1", "end_x2",
]


class FragmentSink:
    """Streams fragments.csv one iteration at a time."""

    def __init__(self, path, run_id):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(FRAGMENTS_HEADER) + "\n")

    def __call__(self, iteration, fragments):
        w = self._fh.write
        rid = self.run_id
        for f in fragments:
            w(f"{rid},{iteration},{f.start_milestone},{f.end_milestone},"
              f"{fmt(f.fpt)},{f.steps},{f.stream_id},"
              f"{fmt(f.start_point[0])},{fmt(f.start_point[1])},"
              f"{fmt(f.end_point[0])},{fmt(f.end_point[1])}\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def load_flux_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    weights = np.array([float(r["weight"]) for r in rows])
    fpts = np.array([float(r["mean_local_fpt"]) if r["mean_local_fpt"] != "nan" else math.nan
                     for r in rows])
    return weights, fpts


def load_summary(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_chain(matrix_csv, meta_json) -> DiscreteChain:
    """Oracle chain from a kernel-matrix CSV and a metadata JSON."""
    try:
        K = np.loadtxt(matrix_csv, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError("oracle.matrix", f"cannot read kernel matrix: {exc}") from exc
    try:
        with open(meta_json, encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError("oracle.meta", f"cannot read metadata: {exc}") from exc
    for key in ("jump_time_means", "reactant", "product"):
        if key not in meta:
            raise ConfigError(f"oracle.meta.{key}", "missing required field")
    m = K.shape[0]
    rho = meta.get("rho")
    if rho is None:
        rho = np.zeros(m)
        rho[int(meta["reactant"])] = 1.0
    try:
        return DiscreteChain(
            K=K,
            jump_time_means=np.asarray(meta["jump_time_means"], dtype=float),
            reactant=int(meta["reactant"]),
            product=int(meta["product"]),
            rho=np.asarray(rho, dtype=float),
        )
    except ValueError as exc:
        raise ConfigError("oracle", str(exc)) from exc
