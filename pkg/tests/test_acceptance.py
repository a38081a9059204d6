"""Acceptance suite: one test per criterion, each printing a PASS line.

Heavy statistical checks run at frozen seeds, so every run of this module
is deterministic.  Tolerances are stated inline next to each assertion.
"""

import json
import math
import time

import numpy as np
import pytest

from oracles import (
    drifted_level_chain,
    hitting_prob_drift,
    segment_average,
    torus_mfpt_fd,
)
from milestoning import markov
from milestoning.baseline import run_long
from milestoning.cli import main as cli_main
from milestoning.driver import MilestoningParams, run
from milestoning.fragments import Reservoir, sample_row
from milestoning.geometry import (
    RhoSpec,
    build_grid_partition,
    build_level_partition,
    build_voronoi_partition,
)
from milestoning.markov import tv_distance
from milestoning.potentials import PotentialSpec, eval_potential, make_rough_landscape
from milestoning.sde import IntegratorConfig, RngStream, em_step


def report(name, elapsed, detail=""):
    print(f"\n[ACCEPTANCE] {name}: PASS ({elapsed:.1f}s) {detail}")


# -- Mueller-Brown Voronoi geometry used by the end-to-end criterion --------
MB_CENTERS = [
    (0.62, 0.03), (0.42, 0.16), (0.21, 0.29), (-0.05, 0.47),
    (-0.44, 0.55), (-0.82, 0.62), (-0.70, 1.05), (-0.56, 1.44),
]
MB_BBOX = ((-1.7, -0.6), (1.3, 2.3))


def mb_partition():
    return build_voronoi_partition(
        MB_CENTERS, MB_BBOX, reactant_pair=(0, 1), product_pair=(6, 7),
        rho=RhoSpec(kind="uniform"))


def test_oracle_identity_suite():
    # Milestoning-equation MFPT equals the direct solve to 1e-10 relative
    # on 20 random chains; golden 3-state gives mu=(.4,.4,.2), MFPT=4
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    for _ in range(20):
        chain = markov.random_chain(rng)
        direct, milest = markov.mfpt_check(chain)
        assert abs(direct - milest) <= 1e-10 * abs(direct)
    golden = markov.golden_three_state()
    mu = markov.invariant_mu_visits(golden)
    assert np.max(np.abs(mu - [0.4, 0.4, 0.2])) <= 1e-10
    direct, milest = markov.mfpt_check(golden)
    assert abs(direct - 4.0) <= 1e-10 and abs(milest - 4.0) <= 1e-10
    el = time.perf_counter() - t0
    assert el < 1.0
    report("oracle identity suite", el)


def test_invariance_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)  # the same 20 chains
    for _ in range(20):
        chain = markov.random_chain(rng)
        mu = markov.invariant_mu_visits(chain)
        assert np.max(np.abs(mu @ chain.K - mu)) <= 1e-12
    el = time.perf_counter() - t0
    assert el < 1.0
    report("invariance suite", el)


def test_parity_law():
    t0 = time.perf_counter()
    for m in range(3, 10):
        g = markov.aperiodicity_gcd(markov.level_chain(m), horizon=4 * m)
        assert g == (1 if m % 2 == 1 else 2)
    el = time.perf_counter() - t0
    assert el < 1.0
    report("parity law", el)


def test_geometric_bound():
    t0 = time.perf_counter()
    cert = markov.geometric_bound_certificate(markov.golden_three_state(), N=6)
    assert cert.satisfied and cert.lam > 0
    for n in range(61):
        assert cert.empirical(n) <= cert.bound(n) + 1e-12
    periodic = markov.level_chain(4)
    for N in range(1, 21):
        assert not markov.geometric_bound_certificate(periodic, N).satisfied
    el = time.perf_counter() - t0
    assert el < 5.0
    report("geometric bound", el, f"lambda={cert.lam:.4f}")


def test_neumann_domination():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1002)
    for _ in range(10):
        chain = markov.random_chain(rng)
        for n in range(1, 51):
            _, tv_err, bound = markov.neumann_partial(chain, n)
            assert tv_err <= bound + 1e-12
    el = time.perf_counter() - t0
    assert el < 1.0
    report("Neumann domination", el)


def test_sampler_physics():
    t0 = time.perf_counter()
    # (a) flat-potential displacement variance = 2 beta_inv n dt (3 s.e.)
    n_paths, n_steps = 100_000, 16
    beta_inv, dt = 0.7, 1e-3
    cfg = IntegratorConfig(dt=dt, beta_inv=beta_inv)
    spec = PotentialSpec(kind="flat")
    rng = RngStream(314, 1)
    x = np.zeros((n_paths, 2))
    for _ in range(n_steps):
        x, _ = em_step(x, spec, cfg, rng.standard_normal((n_paths, 2)))
    expected = 2.0 * beta_inv * n_steps * dt
    se_var = expected * math.sqrt(2.0 / (n_paths - 1))
    assert np.all(np.abs(x.var(axis=0, ddof=1) - expected) < 3 * se_var)

    # (b) drifted hitting probability over 1e5 engine fragments (3 s.e.).
    # The start point sits where the symmetric barrier-shift bias of the
    # discrete crossing cancels to first order, so dt can be large enough
    # to keep the runtime inside the budget without biasing the check.
    r = 2.0
    x0 = -math.log(2 * math.exp(-r) / (1 + math.exp(-r))) / r
    mu_d, beta_inv = 1.2, 0.6
    part = build_level_partition([0.0, x0, 1.0], ((-2.0, -200.0), (3.0, 200.0)))
    drift_spec = PotentialSpec(kind="linear", coeffs=(-mu_d, 0.0))
    cfg = IntegratorConfig(dt=2e-4, beta_inv=beta_inv)
    res = Reservoir(1, np.array([[x0, 0.0]]), np.array([1.0]))
    n = 100_000
    row = sample_row(1, res, n, part, drift_spec, cfg, seed=3001, iteration=1)
    p_exact = hitting_prob_drift(mu_d, beta_inv, 0.0, 1.0, x0)
    se = math.sqrt(p_exact * (1 - p_exact) / n)
    p_hat = row.counts[2] / n
    assert abs(p_hat - p_exact) < 3 * se
    el = time.perf_counter() - t0
    assert el < 30.0
    report("sampler physics", el,
           f"var ok; p_hat={p_hat:.5f} vs {p_exact:.5f} ({(p_hat-p_exact)/se:+.2f} s.e.)")


def test_end_to_end_mueller_brown():
    t0 = time.perf_counter()
    part = mb_partition()
    spec = PotentialSpec(kind="mueller_brown")

    # desk-scale regime: beta_inv=20, dt=5e-5
    cfg = IntegratorConfig(dt=5e-5, beta_inv=20.0)
    long_res = run_long(part, spec, cfg, 6_000_000, seed=11)
    assert long_res.n_events >= 300
    assert long_res.force_evals <= 100_000_000

    params = MilestoningParams(L=4000, epsilon=0.012, max_iterations=40, stop_checks=3)
    mile = run(part, spec, cfg, params, seed=12)
    assert mile.force_evals <= 100_000_000
    rel = abs(mile.T - long_res.mfpt) / long_res.mfpt
    assert rel <= 0.15, f"milestoning T={mile.T} vs long mfpt={long_res.mfpt}"

    # colder regime: with a 1e8 budget the long-trajectory side is starved
    # of events while the iterated estimate still converges
    cfg5 = IntegratorConfig(dt=5e-5, beta_inv=5.0)
    long5 = run_long(part, spec, cfg5, 100_000_000, seed=4)
    assert long5.n_events < 10
    params5 = MilestoningParams(L=600, epsilon=2000.0, max_iterations=30,
                                stop_checks=2, force_eval_budget=100_000_000)
    mile5 = run(part, spec, cfg5, params5, seed=5)
    assert mile5.converged
    assert mile5.force_evals <= 100_000_000
    el = time.perf_counter() - t0
    assert el < 600.0
    report("end-to-end continuous pipeline", el,
           f"T={mile.T:.4f} vs long {long_res.mfpt:.4f} ({rel:.1%}); "
           f"beta5: {long5.n_events} long events vs converged T={mile5.T:.0f}")


def test_torus_rough_landscape():
    t0 = time.perf_counter()
    spec = make_rough_landscape(4, seed=2020)

    # potential periodicity holds exactly (reduction happens before eval)
    pts = np.random.default_rng(0).integers(-(2**21), 2**21, size=(20, 2)) * 2.0**-20
    for x in pts:
        assert eval_potential(spec, x + np.array([1.0, 0.0])) == eval_potential(spec, x)
        assert eval_potential(spec, x + np.array([0.0, 1.0])) == eval_potential(spec, x)

    part = build_grid_partition(10, torus=True, reactant_cell=(1, 5),
                                reactant_side="left", product_cell=(6, 8),
                                product_side="left", rho=RhoSpec(kind="uniform"))
    assert part.m == 200  # 2 x 10 x 10 milestones

    beta_inv = 4.0
    p_seg = tuple(part.milestones[part.product_index].segments[0])
    r_seg = tuple(part.milestones[part.reactant_index].segments[0])
    field = torus_mfpt_fd(spec, beta_inv, p_seg, G=400)
    T_ref = segment_average(field, r_seg, 400)

    cfg = IntegratorConfig(dt=5e-7, beta_inv=beta_inv, domain="torus")
    params = MilestoningParams(L=700, epsilon=0.009, max_iterations=16, stop_checks=3,
                               init_mode="gibbs", points_per_milestone=2)
    r = run(part, spec, cfg, params, seed=21)
    rel = abs(r.T - T_ref) / T_ref
    assert rel <= 0.15, f"T={r.T} vs reference {T_ref}"
    el = time.perf_counter() - t0
    assert el < 300.0
    report("torus rough landscape", el, f"T={r.T:.4f} vs BKE {T_ref:.4f} ({rel:.1%})")


def test_dt_consistency():
    # coarse flux weights at dt vs dt/2 drift apart by less when dt halves
    t0 = time.perf_counter()
    levels = [0.0, 0.2, 0.6, 1.0]  # uneven so the crossing bias is visible
    part = build_level_partition(levels, ((-4.0, -60.0), (2.0, 60.0)),
                                 rho=RhoSpec(kind="point", point=(0.0, 0.0)))
    spec = PotentialSpec(kind="linear", coeffs=(-2.0, 0.0))

    def weights(dt, seed):
        cfg = IntegratorConfig(dt=dt, beta_inv=0.5)
        params = MilestoningParams(L=8000, epsilon=1e-12, max_iterations=6,
                                   stop_checks=99)
        return run(part, spec, cfg, params, seed=seed).flux.coarse_weights

    dts = (3.2e-3, 1.6e-3, 8e-4)
    d1s, d2s = [], []
    for seed in range(5):
        w = {dt: weights(dt, 700 + seed) for dt in dts}
        d1s.append(tv_distance(w[dts[0]], w[dts[1]]))
        d2s.append(tv_distance(w[dts[1]], w[dts[2]]))
    assert np.mean(d1s) > np.mean(d2s), (d1s, d2s)
    el = time.perf_counter() - t0
    report("dt consistency", el,
           f"TV means {np.mean(d1s):.5f} -> {np.mean(d2s):.5f} over 5 seeds")


DETERMINISM_CONFIG = """\
[run]
seed = 77
output_dir = "{out}"

[potential]
kind = "linear"
coeffs = [-2.0, 0.0]

[integrator]
dt = 4e-4
beta_inv = 0.5

[partition]
type = "levels"
levels = [0.0, 0.3333333333333333, 0.6666666666666666, 1.0]
bbox = [-4.0, -60.0, 2.0, 60.0]

[partition.rho]
kind = "point"
point = [0.0, 0.0]

[milestoning]
L = 300
epsilon = 0.04
max_iterations = 20

[baseline]
budget_force_evals = 300000
replicas = 2
"""


def test_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg_path = tmp_path / "det.toml"
    out = tmp_path / "out"
    cfg_path.write_text(DETERMINISM_CONFIG.format(out=str(out).replace("\\", "/")))

    def snapshot():
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    runs = []
    for threads in ("1", "8", "1"):
        assert cli_main(["milestone-run", "--config", str(cfg_path),
                        "--threads", threads]) == 0
        runs.append(snapshot())
    assert runs[0] == runs[1] == runs[2]

    long_runs = []
    for threads in ("1", "8"):
        assert cli_main(["long-run", "--config", str(cfg_path),
                        "--threads", threads]) == 0
        long_runs.append(snapshot())
    assert long_runs[0] == long_runs[1]
    el = time.perf_counter() - t0
    report("determinism", el)
