"""First-passage trajectory fragments between milestones.

A fragment integrates from a milestone point until the displacement
segment first crosses a different milestone.  Fragments are pure
functions of (seed, stream_id, start point), so rows can run in any
parallel order and reduce deterministically by sample index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import CensoredFragmentError, NumericalBlowupError
from .geometry import Partition, point_on_milestone, sample_rho
from .sde import (
    IntegratorConfig,
    PooledStream,
    RngStream,
    fragment_stream,
    resample_stream,
)

_BLOCK_START = 128
_BLOCK_MAX = 4096


@dataclass(frozen=True)
class Fragment:
    start_milestone: int
    start_point: tuple
    end_milestone: int
    end_point: tuple
    fpt: float  # steps * dt
    steps: int
    force_evals: int  # one per Euler-Maruyama step
    stream_id: int


@dataclass
class Reservoir:
    """Weighted phase-space points on one milestone (empirical flux restriction)."""

    milestone_index: int
    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,), >= 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights length mismatch")
        if np.any(self.weights < 0):
            raise ValueError("negative reservoir weight")

    def __len__(self):
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def active(self) -> bool:
        return len(self.weights) > 0 and self.total_weight > 0.0

    @staticmethod
    def empty(milestone_index: int) -> "Reservoir":
        return Reservoir(milestone_index, np.zeros((0, 2)), np.zeros(0))

    def capped(self, cap: int, rng: RngStream) -> "Reservoir":
        """Uniform random eviction down to `cap` points, preserving total weight."""
        if cap is None or len(self) <= cap:
            return self
        u = rng.random(len(self))
        keep = np.sort(np.argsort(u, kind="stable")[:cap])
        kept_w = self.weights[keep]
        scale = self.total_weight / kept_w.sum()
        return Reservoir(self.milestone_index, self.points[keep], kept_w * scale)


def run_fragment(x0, start_milestone: int, partition: Partition, spec,
                 cfg: IntegratorConfig, rng: RngStream, backend=None) -> Fragment:
    """Integrate one fragment from x0 on its milestone to the next crossing.

    Starting on the product milestone performs the instantaneous source-sink
    restart instead: the fragment ends on the reactant milestone at a fresh
    rho draw with zero passage time and zero force evaluations.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if start_milestone == partition.product_index:
        end = sample_rho(partition, rng)
        return Fragment(
            start_milestone=start_milestone,
            start_point=(float(x0[0]), float(x0[1])),
            end_milestone=partition.reactant_index,
            end_point=(float(end[0]), float(end[1])),
            fpt=0.0,
            steps=0,
            force_evals=0,
            stream_id=rng.stream_id,
        )
    if not point_on_milestone(x0, partition.milestones[start_milestone], tol=1e-9):
        raise ValueError(
            f"start point {tuple(x0)} not on milestone {start_milestone}"
        )
    kern = backend if backend is not None else _kernel.active
    pot_id, pf, pi = spec.kernel_payload()
    idx = partition.segment_index()
    torus = partition.domain == "torus"
    noise_coef = cfg.noise_coef
    x1, x2 = float(x0[0]), float(x0[1])
    steps = 0
    block = _BLOCK_START
    draw = rng.normal_block if hasattr(rng, "normal_block") else lambda n: rng.standard_normal((n, 2))
    while True:
        remaining = cfg.max_steps_per_fragment - steps
        if remaining <= 0:
            raise CensoredFragmentError(steps, rng.stream_id)
        gauss = draw(block)
        status, used, x1, x2, hit_ms = kern.integrate_block(
            x1, x2, start_milestone, gauss, min(block, remaining),
            pot_id, pf, pi, idx, cfg.dt, noise_coef, torus,
        )
        steps += used
        if status == _kernel.STATUS_CROSSED:
            return Fragment(
                start_milestone=start_milestone,
                start_point=(float(x0[0]), float(x0[1])),
                end_milestone=hit_ms,
                end_point=(x1, x2),
                fpt=steps * cfg.dt,
                steps=steps,
                force_evals=steps,
                stream_id=rng.stream_id,
            )
        if status == _kernel.STATUS_BLOWUP:
            raise NumericalBlowupError((x1, x2), rng.stream_id)
        if status == _kernel.STATUS_STEP_TOO_LARGE:
            raise NumericalBlowupError(
                (x1, x2), rng.stream_id
            )
        block = min(2 * block, _BLOCK_MAX)


@dataclass
class RowResult:
    milestone_index: int
    fragments: list
    counts: np.ndarray  # per-destination fragment counts, sums to L
    mean_fpt: float
    n_censored: int = 0


def draw_starts(reservoir: Reservoir, L: int, rng: RngStream) -> np.ndarray:
    """L i.i.d. (with replacement) weight-proportional draws from the reservoir."""
    cum = np.cumsum(reservoir.weights)
    u = rng.random(L) * cum[-1]
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
    return reservoir.points[idx]


def sample_row(i: int, reservoir: Reservoir, L: int, partition: Partition, spec,
               cfg: IntegratorConfig, seed: int, iteration: int,
               executor=None, censor_policy: str = "error", backend=None):
    """Run L fragments from milestone i's reservoir; None if it is inactive.

    Fragments run on streams fragment_stream(iteration, i, 0..L-1) and are
    reduced in sample order, so results do not depend on scheduling.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if not reservoir.active:
        return None
    starts = draw_starts(reservoir, L, RngStream(seed, resample_stream(iteration, i)))

    def task(ell):
        rng = PooledStream(seed, fragment_stream(iteration, i, ell))
        try:
            return run_fragment(starts[ell], i, partition, spec, cfg, rng, backend=backend)
        except CensoredFragmentError:
            if censor_policy == "drop":
                return None
            raise

    results = _run_ordered(task, L, executor)
    fragments = [f for f in results if f is not None]
    n_censored = L - len(fragments)
    if n_censored:
        warnings.warn(
            f"milestone {i}: dropped {n_censored}/{L} censored fragments",
            RuntimeWarning, stacklevel=2,
        )
    counts = np.zeros(partition.m, dtype=np.int64)
    total_fpt = 0.0
    for f in fragments:
        counts[f.end_milestone] += 1
        total_fpt += f.fpt
    mean_fpt = total_fpt / len(fragments) if fragments else float("nan")
    return RowResult(i, fragments, counts, mean_fpt, n_censored)


def _run_ordered(task, n, executor, chunk_size=None):
    if executor is None:
        return [task(ell) for ell in range(n)]
    workers = getattr(executor, "_max_workers", 4)
    if chunk_size is None:
        chunk_size = max(1, min(256, n // (4 * workers) or 1))
    chunks = [range(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]
    futures = [executor.submit(lambda c=c: [task(ell) for ell in c]) for c in chunks]
    out = []
    for fut in futures:
        out.extend(fut.result())
    return out
