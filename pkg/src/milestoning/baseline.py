"""Long-trajectory reference experiment.

Brownian dynamics started at the reactant distribution runs until the
product milestone, restarts at rho, and repeats until a force-evaluation
budget is spent.  Every milestone crossing (including the rho landing
that opens each cycle) is a visit, so the visit-count flux estimates the
same stationary measure as the iterated reservoirs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import NumericalBlowupError
from .fragments import Reservoir
from .geometry import Partition, sample_rho
from .sde import IntegratorConfig, PooledStream, baseline_stream

_BLOCK = 4096


@dataclass(frozen=True)
class PassageEvent:
    event_index: int
    passage_time: float
    crossings: int  # sigma_P for the cycle
    force_evals: int
    replica: int


@dataclass
class LongRunResult:
    events: list
    mfpt: float  # nan when no events completed
    mfpt_se: float
    visits: np.ndarray
    coarse_weights: np.ndarray
    reservoirs: list
    mean_fpts: np.ndarray  # per-milestone mean flight time, nan if unvisited
    force_evals: int

    @property
    def n_events(self) -> int:
        return len(self.events)


def run_long(partition: Partition, spec, cfg: IntegratorConfig,
             budget_force_evals: int, seed: int, replicas: int = 1,
             executor=None, backend=None) -> LongRunResult:
    """Source-sink long trajectories under a total force-evaluation budget.

    The budget is split evenly over `replicas` independent streams (the
    replica count, not the thread count, fixes the outputs).  Each replica
    stops at budget exhaustion and discards its partial cycle, so only
    completed passage events contribute.
    """
    if budget_force_evals < 0:
        raise ValueError("budget must be >= 0")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    per_replica = budget_force_evals // replicas
    tasks = [
        (r, lambda r=r: _run_replica(r, partition, spec, cfg, per_replica, seed, backend))
        for r in range(replicas)
    ]
    if executor is None:
        outs = [t() for _, t in tasks]
    else:
        futures = [executor.submit(t) for _, t in tasks]
        outs = [f.result() for f in futures]

    events = []
    visits = np.zeros(partition.m, dtype=np.int64)
    pts = [[] for _ in range(partition.m)]
    fpt_sum = np.zeros(partition.m)
    fpt_cnt = np.zeros(partition.m, dtype=np.int64)
    force_total = 0
    for r, (ev, vis, rp, fs, fc, used) in enumerate(outs):
        events.extend(ev)
        visits += vis
        for j in range(partition.m):
            pts[j].extend(rp[j])
        fpt_sum += fs
        fpt_cnt += fc
        force_total += used

    times = np.array([e.passage_time for e in events])
    if len(times):
        mfpt = float(times.mean())
        se = float(times.std(ddof=1) / math.sqrt(len(times))) if len(times) > 1 else math.nan
    else:
        mfpt = math.nan
        se = math.nan
    total_visits = visits.sum()
    coarse = visits / total_visits if total_visits else np.zeros(partition.m)
    reservoirs = [
        Reservoir(j, np.asarray(pts[j]).reshape(-1, 2), np.ones(len(pts[j])))
        for j in range(partition.m)
    ]
    with np.errstate(invalid="ignore"):
        mean_fpts = np.where(fpt_cnt > 0, fpt_sum / np.maximum(fpt_cnt, 1), math.nan)
    return LongRunResult(events, mfpt, se, visits, coarse, reservoirs, mean_fpts,
                         force_total)


def _run_replica(replica, partition, spec, cfg, budget, seed, backend):
    kern = backend if backend is not None else _kernel.active
    rng = PooledStream(seed, baseline_stream(replica))
    pot_id, pf, pi = spec.kernel_payload()
    idx = partition.segment_index()
    torus = partition.domain == "torus"
    product = partition.product_index

    events = []
    visits = np.zeros(partition.m, dtype=np.int64)
    points = [[] for _ in range(partition.m)]
    fpt_sum = np.zeros(partition.m)
    fpt_cnt = np.zeros(partition.m, dtype=np.int64)
    used_total = 0

    while used_total < budget:
        # one source-sink cycle: J_0 ~ rho on R, run until the product
        start = sample_rho(partition, rng)
        x1, x2 = float(start[0]), float(start[1])
        cur = partition.reactant_index
        cyc_visits = [(cur, (x1, x2))]
        cyc_flights = []  # (from_milestone, steps) per completed flight
        cyc_steps = 0
        flight_steps = 0
        crossings = 0
        completed = False
        while used_total < budget:
            cap = min(_BLOCK, budget - used_total)
            gauss = rng.normal_block(cap)
            status, used, x1, x2, hit_ms = kern.integrate_block(
                x1, x2, cur, gauss, cap, pot_id, pf, pi, idx,
                cfg.dt, cfg.noise_coef, torus,
            )
            used_total += used
            cyc_steps += used
            flight_steps += used
            if status == _kernel.STATUS_BLOWUP or status == _kernel.STATUS_STEP_TOO_LARGE:
                raise NumericalBlowupError((x1, x2), rng.stream_id)
            if status == _kernel.STATUS_CROSSED:
                crossings += 1
                cyc_visits.append((hit_ms, (x1, x2)))
                cyc_flights.append((cur, flight_steps))
                flight_steps = 0
                if hit_ms == product:
                    completed = True
                    break
                cur = hit_ms
        if not completed:
            break  # budget ran out mid-cycle; discard the partial event
        events.append(PassageEvent(
            event_index=len(events),
            passage_time=cyc_steps * cfg.dt,
            crossings=crossings,
            force_evals=cyc_steps,
            replica=replica,
        ))
        for ms, pt in cyc_visits:
            visits[ms] += 1
            points[ms].append(pt)
        for ms, steps in cyc_flights:
            fpt_sum[ms] += steps * cfg.dt
            fpt_cnt[ms] += 1
        fpt_cnt[product] += 1  # instantaneous restart: zero local time
    return events, visits, points, fpt_sum, fpt_cnt, used_total
