import math

import numpy as np
import pytest

from oracles import hitting_prob_drift
from milestoning.errors import CensoredFragmentError
from milestoning.fragments import Reservoir, draw_starts, run_fragment, sample_row
from milestoning.geometry import RhoSpec, build_level_partition, point_on_milestone
from milestoning.potentials import PotentialSpec
from milestoning.sde import IntegratorConfig, RngStream, fragment_stream

TALL = ((-2.0, -60.0), (3.0, 60.0))


def symmetric_setup():
    part = build_level_partition([0.0, 0.5, 1.0], TALL)
    spec = PotentialSpec(kind="flat")
    cfg = IntegratorConfig(dt=2e-4, beta_inv=2.0)
    return part, spec, cfg


class TestRunFragment:
    def test_symmetric_hitting(self):
        # from the middle level, flat potential: both ends equally likely
        part, spec, cfg = symmetric_setup()
        n = 100_000
        res = Reservoir(1, np.array([[0.5, 0.0]]), np.array([1.0]))
        row = sample_row(1, res, n, part, spec, cfg, seed=21, iteration=1)
        p_right = row.counts[2] / n
        se = 0.5 / math.sqrt(n)
        assert abs(p_right - 0.5) < 3 * se
        assert row.counts[0] + row.counts[2] == n

    def test_drifted_hitting_probability(self):
        # gambler's ruin with drift against the closed form (1e4 fragments;
        # the acceptance suite runs the full 1e5 version)
        mu_d, beta_inv, dt = 1.0, 1.0, 8e-6
        part = build_level_partition([0.0, 0.3, 1.0], TALL)
        spec = PotentialSpec(kind="linear", coeffs=(-mu_d, 0.0))
        cfg = IntegratorConfig(dt=dt, beta_inv=beta_inv)
        n = 10_000
        res = Reservoir(1, np.array([[0.3, 0.0]]), np.array([1.0]))
        row = sample_row(1, res, n, part, spec, cfg, seed=22, iteration=1)
        p = hitting_prob_drift(mu_d, beta_inv, 0.0, 1.0, 0.3)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(row.counts[2] / n - p) < 3 * se

    def test_product_row_is_instant_restart(self):
        part, spec, cfg = symmetric_setup()
        rng = RngStream(5, 0)
        f = run_fragment(np.array([1.0, 0.2]), 2, part, spec, cfg, rng)
        assert f.end_milestone == part.reactant_index
        assert f.fpt == 0.0 and f.steps == 0 and f.force_evals == 0
        assert point_on_milestone(f.end_point, part.milestones[0], tol=1e-12)

    def test_start_point_must_lie_on_milestone(self):
        part, spec, cfg = symmetric_setup()
        with pytest.raises(ValueError, match="not on milestone"):
            run_fragment(np.array([0.3, 0.0]), 1, part, spec, cfg, RngStream(5, 1))

    def test_cap_raises_censored(self):
        part, spec, cfg = symmetric_setup()
        cfg = IntegratorConfig(dt=1e-12, beta_inv=1e-12, max_steps_per_fragment=1)
        with pytest.raises(CensoredFragmentError):
            run_fragment(np.array([0.5, 0.0]), 1, part, spec, cfg, RngStream(5, 2))

    def test_replay_bit_for_bit(self):
        part, spec, cfg = symmetric_setup()
        sid = fragment_stream(3, 1, 7)
        a = run_fragment(np.array([0.5, 0.0]), 1, part, spec, cfg, RngStream(11, sid))
        b = run_fragment(np.array([0.5, 0.0]), 1, part, spec, cfg, RngStream(11, sid))
        assert a == b


class TestSampleRow:
    def test_degenerate_single_point(self):
        part, spec, cfg = symmetric_setup()
        res = Reservoir(1, np.array([[0.5, 0.17]]), np.array([1.0]))
        row = sample_row(1, res, 1, part, spec, cfg, seed=1, iteration=1)
        assert row.fragments[0].start_point == (0.5, 0.17)

    def test_inactive_reservoir_signals_none(self):
        part, spec, cfg = symmetric_setup()
        assert sample_row(1, Reservoir.empty(1), 10, part, spec, cfg, 1, 1) is None

    def test_counts_sum_to_L(self):
        part, spec, cfg = symmetric_setup()
        res = Reservoir(1, np.array([[0.5, 0.0], [0.5, 1.0]]), np.array([0.25, 0.75]))
        row = sample_row(1, res, 500, part, spec, cfg, seed=2, iteration=1)
        assert row.counts.sum() == 500
        assert row.mean_fpt >= 0.0

    def test_product_row_all_zero_fpt(self):
        part, spec, cfg = symmetric_setup()
        res = Reservoir(2, np.array([[1.0, 0.0]]), np.array([1.0]))
        row = sample_row(2, res, 50, part, spec, cfg, seed=3, iteration=1)
        assert row.mean_fpt == 0.0
        assert row.counts[part.reactant_index] == 50

    def test_chebyshev_bound_row_fractions(self):
        # flat symmetric row at L = 1e4: |p_hat - 1/2| <= 0.05 fails with
        # probability at most 0.25/(L eps^2) = 1%
        part, spec, cfg = symmetric_setup()
        res = Reservoir(1, np.array([[0.5, 0.0]]), np.array([1.0]))
        L = 10_000
        row = sample_row(1, res, L, part, spec, cfg, seed=23, iteration=1)
        assert abs(row.counts[2] / L - 0.5) <= 0.05

    def test_weighted_resampling(self):
        part, spec, cfg = symmetric_setup()
        res = Reservoir(1, np.array([[0.5, -1.0], [0.5, 1.0]]), np.array([0.9, 0.1]))
        starts = draw_starts(res, 5000, RngStream(4, 17))
        frac_hi = np.mean(starts[:, 1] > 0)
        assert abs(frac_hi - 0.1) < 3 * math.sqrt(0.09 / 5000)

    def test_parallel_equals_sequential(self):
        from concurrent.futures import ThreadPoolExecutor

        part, spec, cfg = symmetric_setup()
        res = Reservoir(1, np.array([[0.5, 0.0]]), np.array([1.0]))
        seq = sample_row(1, res, 300, part, spec, cfg, seed=6, iteration=2)
        with ThreadPoolExecutor(max_workers=8) as ex:
            par = sample_row(1, res, 300, part, spec, cfg, seed=6, iteration=2,
                             executor=ex)
        assert seq.fragments == par.fragments
        assert np.array_equal(seq.counts, par.counts)
        assert seq.mean_fpt == par.mean_fpt

    def test_censor_drop_policy(self):
        part, spec, _ = symmetric_setup()
        cfg = IntegratorConfig(dt=1e-12, beta_inv=1e-12, max_steps_per_fragment=2)
        res = Reservoir(1, np.array([[0.5, 0.0]]), np.array([1.0]))
        row = sample_row(1, res, 20, part, spec, cfg, seed=7, iteration=1,
                         censor_policy="drop")
        assert row.n_censored == 20
        assert math.isnan(row.mean_fpt)

    def test_neighbor_adjacency_diagnostic(self):
        # at acceptance-scale step sizes, zero non-neighbor first crossings
        # across 1e5 sampled fragments
        part = build_level_partition([0.0, 0.25, 0.5, 0.75, 1.0], TALL)
        spec = PotentialSpec(kind="flat")
        cfg = IntegratorConfig(dt=5e-5, beta_inv=0.5)
        res = Reservoir(2, np.array([[0.5, 0.0]]), np.array([1.0]))
        n = 100_000
        row = sample_row(2, res, n, part, spec, cfg, seed=8, iteration=1)
        assert row.counts[1] + row.counts[3] == n


class TestReservoir:
    def test_total_weight_and_active(self):
        r = Reservoir(0, np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([0.5, 1.5]))
        assert r.total_weight == pytest.approx(2.0)
        assert r.active and len(r) == 2
        assert not Reservoir.empty(3).active

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            Reservoir(0, np.array([[0.0, 0.0]]), np.array([-1.0]))

    def test_cap_preserves_total_weight(self):
        rng = np.random.default_rng(12)
        pts = rng.normal(size=(100, 2))
        w = rng.random(100)
        r = Reservoir(0, pts, w)
        capped = r.capped(30, RngStream(1, 5))
        assert len(capped) == 30
        assert capped.total_weight == pytest.approx(r.total_weight)
        r2 = Reservoir(0, pts, w).capped(200, RngStream(1, 5))
        assert len(r2) == 100  # no-op below the cap
