#!/usr/bin/env python3
"""Benchmark: compiled kernel vs pure-Python fallback.

Measures raw integrate_block throughput (steps/s) on each potential
family and end-to-end fragment throughput, and verifies along the way
that both backends produce identical trajectories.

Usage: python benchmarks/bench_kernels.py [--steps N] [--fragments N]
"""

import argparse
import time

import numpy as np

from milestoning._kernel import get_backend
from milestoning.fragments import run_fragment
from milestoning.geometry import build_grid_partition, build_level_partition
from milestoning.potentials import PotentialSpec, make_rough_landscape
from milestoning.sde import IntegratorConfig, RngStream


def bench_block(kern, spec, part, cfg, x0, n_steps):
    pot_id, pf, pi = spec.kernel_payload()
    idx = part.segment_index()
    gauss = RngStream(0, 1).standard_normal((n_steps, 2))
    t0 = time.perf_counter()
    status, used, x1, x2, hit = kern.integrate_block(
        float(x0[0]), float(x0[1]), part.reactant_index, gauss, n_steps,
        pot_id, pf, pi, idx, cfg.dt, cfg.noise_coef, cfg.domain == "torus")
    el = time.perf_counter() - t0
    return used / el, (x1, x2, used)


def bench_fragments(kern, spec, part, cfg, x0, start, n_frag):
    t0 = time.perf_counter()
    steps = 0
    for k in range(n_frag):
        f = run_fragment(x0, start, part, spec, cfg, RngStream(7, k), backend=kern)
        steps += f.steps
    el = time.perf_counter() - t0
    return steps / el, n_frag / el


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200_000,
                    help="steps per raw-block benchmark (pure backend runs 1/50th)")
    ap.add_argument("--fragments", type=int, default=300)
    args = ap.parse_args()

    plane = build_level_partition([-50.0, 50.0], ((-60.0, -1e4), (60.0, 1e4)))
    torus = build_grid_partition(10, torus=True, reactant_cell=(0, 0),
                                 product_cell=(5, 5))
    tiny = IntegratorConfig(dt=1e-9, beta_inv=1.0)
    tiny_t = IntegratorConfig(dt=1e-9, beta_inv=1.0, domain="torus")
    r_seg = torus.milestones[torus.reactant_index].segments[0]
    torus_x0 = [0.5 * (r_seg[0] + r_seg[2]) + 0.01, 0.5 * (r_seg[1] + r_seg[3])]
    cases = [
        ("flat / 2 milestones", PotentialSpec(kind="flat"), plane, tiny, [-50.0, 0.0]),
        ("four-gaussian / 2 milestones", PotentialSpec(kind="mueller_brown"),
         plane, tiny, [0.0, 0.4]),
        ("rough N=4 / torus n=10", make_rough_landscape(4, seed=2020),
         torus, tiny_t, torus_x0),
    ]

    backends = {"cython": None, "pure": None}
    for name in list(backends):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            del backends[name]

    print(f"{'case':32s} " + "".join(f"{n:>14s}" for n in backends) + f"{'speedup':>10s}")
    for label, spec, part, cfg, x0 in cases:
        rates = {}
        for name, kern in backends.items():
            n = args.steps if name == "cython" else max(1000, args.steps // 50)
            rates[name], _ = bench_block(kern, spec, part, cfg, x0, n)
        row = f"{label:32s} " + "".join(f"{rates[n]/1e6:11.2f} M/s" for n in rates)
        if len(rates) == 2:
            row += f"{rates['cython']/rates['pure']:9.0f}x"
        print(row)

    # end-to-end fragment throughput on a workload-like case
    frag_cfg = IntegratorConfig(dt=1e-5, beta_inv=10.0)
    frag_part = build_level_partition([-0.2, 0.0, 0.2], ((-1.0, -40.0), (2.0, 40.0)))
    print()
    for name, kern in backends.items():
        n = args.fragments if name == "cython" else max(10, args.fragments // 20)
        sps, fps = bench_fragments(kern, PotentialSpec(kind="mueller_brown"),
                                   frag_part, frag_cfg, np.array([0.0, 0.4]), 1, n)
        print(f"fragments ({name}): {fps:8.0f} frag/s  ({sps/1e6:.2f} Msteps/s)")

    # cross-check: identical trajectories
    if len(backends) == 2:
        outs = []
        for kern in backends.values():
            f = run_fragment(np.array([0.0, 0.4]), 1, frag_part,
                             PotentialSpec(kind="mueller_brown"), frag_cfg,
                             RngStream(1, 2), backend=kern)
            outs.append((f.steps, f.end_point))
        assert outs[0] == outs[1], "backends diverged!"
        print("\nbackends bit-identical on the cross-check fragment")


if __name__ == "__main__":
    main()
