"""TOML run configuration: loading, validation, and object construction."""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .driver import MilestoningParams
from .errors import ConfigError
from .geometry import (
    Partition,
    RhoSpec,
    build_grid_partition,
    build_level_partition,
    build_voronoi_partition,
)
from .potentials import PotentialSpec, make_rough_landscape
from .sde import IntegratorConfig


@dataclass
class RunConfig:
    potential: PotentialSpec
    integrator: IntegratorConfig
    partition: Partition
    milestoning: MilestoningParams
    baseline_budget: int
    baseline_replicas: int
    seed: int
    output_dir: str
    run_id: str
    raw: dict = field(repr=False, default_factory=dict)

    def config_echo(self) -> dict:
        """The resolved raw config, echoed into summary.json."""
        return self.raw


def _find_line(text: str, key: str):
    needle = key.split(".")[-1]
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0]
        if stripped.strip().startswith(needle) and "=" in stripped:
            return ln
    return None


class _Section:
    """Typed accessor over one TOML table with field-path error messages."""

    def __init__(self, data, path, text):
        self.data = data
        self.path = path
        self.text = text

    def _err(self, key, msg):
        field_path = f"{self.path}.{key}" if self.path else key
        raise ConfigError(field_path, msg, _find_line(self.text, key))

    def get(self, key, kind, default=None, required=False, check=None, check_msg=""):
        if key not in self.data:
            if required:
                self._err(key, "missing required field")
            return default
        val = self.data[key]
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
            self._err(key, f"expected {kind.__name__}, got {type(val).__name__}")
        if check is not None and not check(val):
            self._err(key, check_msg or "constraint violated")
        return val

    def sub(self, key, required=True):
        tab = self.data.get(key)
        if tab is None:
            if required:
                self._err(key, "missing required section")
            return None
        if not isinstance(tab, dict):
            self._err(key, "expected a table")
        return _Section(tab, f"{self.path}.{key}" if self.path else key, self.text)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"TOML parse error: {exc}") from exc
    root = _Section(raw, "", text)

    run = root.sub("run")
    seed = run.get("seed", int, required=True, check=lambda v: v >= 0,
                   check_msg="must be >= 0")
    output_dir = run.get("output_dir", str, default="out")
    run_id = run.get("run_id", str, default="run")

    pot = _load_potential(root.sub("potential"))
    integ = _load_integrator(root.sub("integrator"))
    part = _load_partition(root.sub("partition"), pot, integ, path.parent)
    mile = _load_milestoning(root.sub("milestoning", required=False))
    base = root.sub("baseline", required=False)
    if base is not None:
        budget = base.get("budget_force_evals", int, default=0,
                          check=lambda v: v >= 0, check_msg="must be >= 0")
        replicas = base.get("replicas", int, default=1,
                            check=lambda v: v >= 1, check_msg="must be >= 1")
    else:
        budget, replicas = 0, 1
    return RunConfig(pot, integ, part, mile, budget, replicas, seed,
                     output_dir, run_id, raw=raw)


def _load_potential(sec) -> PotentialSpec:
    kind = sec.get("kind", str, required=True)
    if kind == "flat":
        return PotentialSpec(kind="flat")
    if kind in ("linear", "quadratic"):
        coeffs = sec.get("coeffs", list, required=True,
                         check=lambda v: len(v) == 2, check_msg="need 2 entries")
        return PotentialSpec(kind=kind, coeffs=tuple(float(c) for c in coeffs))
    if kind == "mueller_brown":
        return PotentialSpec(kind="mueller_brown")
    if kind == "rough":
        order = sec.get("order", int, required=True, check=lambda v: v >= 0,
                        check_msg="must be >= 0")
        cseed = sec.get("coeff_seed", int, required=True)
        return make_rough_landscape(order, cseed)
    sec._err("kind", f"unknown potential kind {kind!r}")


def _load_integrator(sec) -> IntegratorConfig:
    dt = sec.get("dt", float, required=True, check=lambda v: v > 0,
                 check_msg="must be > 0")
    beta_inv = sec.get("beta_inv", float, required=True, check=lambda v: v > 0,
                       check_msg="must be > 0")
    domain = sec.get("domain", str, default="plane",
                     check=lambda v: v in ("plane", "torus"),
                     check_msg="must be 'plane' or 'torus'")
    cap = sec.get("max_steps_per_fragment", int, default=10_000_000,
                  check=lambda v: v >= 1, check_msg="must be >= 1")
    return IntegratorConfig(dt=dt, beta_inv=beta_inv, domain=domain,
                            max_steps_per_fragment=cap)


def _load_rho(sec) -> RhoSpec | None:
    rsec = sec.sub("rho", required=False)
    if rsec is None:
        return None
    kind = rsec.get("kind", str, required=True,
                    check=lambda v: v in ("uniform", "point"),
                    check_msg="must be 'uniform' or 'point'")
    if kind == "point":
        pt = rsec.get("point", list, required=True,
                      check=lambda v: len(v) == 2, check_msg="need 2 coordinates")
        return RhoSpec(kind="point", point=(float(pt[0]), float(pt[1])))
    return RhoSpec(kind="uniform")


def _load_partition(sec, pot, integ, base_dir) -> Partition:
    ptype = sec.get("type", str, required=True)
    rho = _load_rho(sec)
    if ptype == "levels":
        levels = sec.get("levels", list, required=True,
                         check=lambda v: len(v) >= 2, check_msg="need >= 2 levels")
        bbox = _get_bbox(sec)
        return build_level_partition([float(v) for v in levels], bbox, rho=rho)
    if ptype == "grid":
        n = sec.get("n", int, required=True, check=lambda v: v >= 2,
                    check_msg="must be >= 2")
        torus = integ.domain == "torus"
        rc = sec.get("reactant_cell", list, default=[0, 0])
        pc = sec.get("product_cell", list, default=None)
        rs = sec.get("reactant_side", str, default="left")
        ps = sec.get("product_side", str, default="left")
        return build_grid_partition(
            n, torus=torus, reactant_cell=tuple(rc), reactant_side=rs,
            product_cell=tuple(pc) if pc is not None else None,
            product_side=ps, rho=rho,
        )
    if ptype == "voronoi":
        centers = sec.get("centers", list, default=None)
        cfile = sec.get("centers_file", str, default=None)
        if centers is None and cfile is None:
            sec._err("centers", "need either centers or centers_file")
        if cfile is not None:
            fpath = Path(cfile)
            if not fpath.is_absolute():
                fpath = base_dir / fpath
            if not fpath.exists():
                sec._err("centers_file", f"file not found: {fpath}")
            with open(fpath, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
            if rows and not _is_number(rows[0][0]):
                rows = rows[1:]
            centers = [[float(r[0]), float(r[1])] for r in rows]
        bbox = _get_bbox(sec)
        rp = sec.get("reactant_pair", list, required=True,
                     check=lambda v: len(v) == 2, check_msg="need 2 center indices")
        pp = sec.get("product_pair", list, required=True,
                     check=lambda v: len(v) == 2, check_msg="need 2 center indices")
        return build_voronoi_partition(
            np.asarray(centers, dtype=float), bbox,
            reactant_pair=tuple(int(i) for i in rp),
            product_pair=tuple(int(i) for i in pp), rho=rho,
        )
    sec._err("type", f"unknown partition type {ptype!r}")


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _get_bbox(sec):
    bb = sec.get("bbox", list, required=True,
                 check=lambda v: len(v) == 4, check_msg="need [xmin, ymin, xmax, ymax]")
    xmin, ymin, xmax, ymax = (float(v) for v in bb)
    return ((xmin, ymin), (xmax, ymax))


def _load_milestoning(sec) -> MilestoningParams:
    if sec is None:
        return MilestoningParams()
    cap = sec.get("reservoir_cap", int, default=None,
                  check=lambda v: v >= 1, check_msg="must be >= 1")
    budget = sec.get("force_eval_budget", int, default=None,
                     check=lambda v: v >= 1, check_msg="must be >= 1")
    return MilestoningParams(
        L=sec.get("L", int, default=100, check=lambda v: v >= 1, check_msg="must be >= 1"),
        epsilon=sec.get("epsilon", float, default=1e-3, check=lambda v: v > 0,
                        check_msg="must be > 0"),
        max_iterations=sec.get("max_iterations", int, default=100,
                               check=lambda v: v >= 1, check_msg="must be >= 1"),
        init_mode=sec.get("init", str, default="one_point",
                          check=lambda v: v in ("one_point", "uniform", "gibbs"),
                          check_msg="must be 'one_point', 'uniform' or 'gibbs'"),
        points_per_milestone=sec.get("points_per_milestone", int, default=4,
                                     check=lambda v: v >= 1, check_msg="must be >= 1"),
        eigen_mode=sec.get("eigen", str, default="coarse",
                           check=lambda v: v in ("coarse", "simple-power"),
                           check_msg="must be 'coarse' or 'simple-power'"),
        stop_checks=sec.get("stop_checks", int, default=2,
                            check=lambda v: v >= 1, check_msg="must be >= 1"),
        censor_policy=sec.get("censor_policy", str, default="error",
                              check=lambda v: v in ("error", "drop"),
                              check_msg="must be 'error' or 'drop'"),
        reservoir_cap=cap,
        force_eval_budget=budget,
    )
