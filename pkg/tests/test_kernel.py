"""Backend equivalence: the compiled kernel and the pure-Python fallback
must produce bit-identical trajectories."""

import numpy as np
import pytest

from milestoning._kernel import get_backend, pure
from milestoning.errors import CensoredFragmentError, NumericalBlowupError
from milestoning.fragments import run_fragment
from milestoning.geometry import build_grid_partition, build_level_partition
from milestoning.potentials import PotentialSpec, make_rough_landscape
from milestoning.sde import IntegratorConfig, RngStream, em_step


def has_cython():
    try:
        get_backend("cython")
        return True
    except ImportError:
        return False


pytestmark = pytest.mark.skipif(not has_cython(), reason="compiled kernel unavailable")

PLANE = build_level_partition([-0.3, 0.0, 0.3], ((-2.0, -50.0), (2.0, 50.0)))
TORUS = build_grid_partition(5, torus=True, reactant_cell=(0, 0), product_cell=(2, 2))


def _mid(partition, index):
    seg = partition.milestones[index].segments[0]
    return np.array([0.5 * (seg[0] + seg[2]), 0.5 * (seg[1] + seg[3])])


CASES = [
    (PotentialSpec(kind="flat"), PLANE, IntegratorConfig(dt=1e-4, beta_inv=1.0)),
    (PotentialSpec(kind="linear", coeffs=(-2.0, 0.5)), PLANE,
     IntegratorConfig(dt=1e-4, beta_inv=0.5)),
    (PotentialSpec(kind="quadratic", coeffs=(3.0, 1.0)), PLANE,
     IntegratorConfig(dt=1e-4, beta_inv=2.0)),
    (PotentialSpec(kind="mueller_brown"), PLANE,
     IntegratorConfig(dt=1e-5, beta_inv=10.0)),
    (make_rough_landscape(4, seed=2024), TORUS,
     IntegratorConfig(dt=2e-5, beta_inv=1.0, domain="torus")),
    (make_rough_landscape(2, seed=7), TORUS,
     IntegratorConfig(dt=2e-5, beta_inv=0.7, domain="torus")),
]


@pytest.mark.parametrize("spec,part,cfg", CASES, ids=[c[0].kind + c[2].domain for c in CASES])
def test_fragments_bit_identical_across_backends(spec, part, cfg):
    cy = get_backend("cython")
    start = part.reactant_index if part is TORUS else 1
    x0 = _mid(part, start)
    for stream in range(25):
        f_cy = run_fragment(x0, start, part, spec, cfg, RngStream(9, stream), backend=cy)
        f_py = run_fragment(x0, start, part, spec, cfg, RngStream(9, stream), backend=pure)
        assert f_cy.steps == f_py.steps
        assert f_cy.end_milestone == f_py.end_milestone
        assert float(f_cy.end_point[0]) == float(f_py.end_point[0])
        assert float(f_cy.end_point[1]) == float(f_py.end_point[1])
        assert f_cy.fpt == f_py.fpt


@pytest.mark.parametrize("name", ["cython", "pure"])
def test_kernel_step_matches_em_step(name):
    # single-step agreement with the readable reference integrator
    kern = get_backend(name)
    part = PLANE
    idx = part.segment_index()
    rng = np.random.default_rng(4)
    for spec in (PotentialSpec(kind="flat"),
                 PotentialSpec(kind="linear", coeffs=(1.5, -0.5)),
                 PotentialSpec(kind="quadratic", coeffs=(2.0, 0.5)),
                 PotentialSpec(kind="mueller_brown")):
        pot_id, pf, pi = spec.kernel_payload()
        cfg = IntegratorConfig(dt=1e-5, beta_inv=3.0)
        for _ in range(30):
            x = rng.uniform([-0.8, -0.5], [1.0, 1.5])
            g = rng.standard_normal(2)
            status, used, x1, x2, hit = kern.integrate_block(
                float(x[0]), float(x[1]), -1, np.array([g]), 1,
                pot_id, pf, pi, idx, cfg.dt, cfg.noise_coef, False)
            ref, _ = em_step(x, spec, cfg, g)
            assert used == 1
            if status == 0:
                assert (x1, x2) == pytest.approx(tuple(ref), rel=1e-12, abs=1e-15)


def test_force_evals_equal_steps(backend):
    spec = PotentialSpec(kind="flat")
    cfg = IntegratorConfig(dt=1e-4, beta_inv=1.0)
    f = run_fragment(_mid(PLANE, 1), 1, PLANE, spec, cfg, RngStream(3, 0), backend=backend)
    assert f.force_evals == f.steps > 0
    assert f.fpt == f.steps * cfg.dt


def test_censoring(backend):
    spec = PotentialSpec(kind="flat")
    cfg = IntegratorConfig(dt=1e-12, beta_inv=1e-12, max_steps_per_fragment=1)
    with pytest.raises(CensoredFragmentError) as ei:
        run_fragment(_mid(PLANE, 1), 1, PLANE, spec, cfg, RngStream(3, 1), backend=backend)
    assert ei.value.steps == 1


def test_blowup_names_stream(backend):
    spec = PotentialSpec(kind="quadratic", coeffs=(1e300, 1e300))
    cfg = IntegratorConfig(dt=1e300, beta_inv=1e300)
    with pytest.raises(NumericalBlowupError) as ei:
        run_fragment(_mid(PLANE, 1), 1, PLANE, spec, cfg, RngStream(3, 2), backend=backend)
    assert ei.value.stream_id == 2


def test_torus_step_too_large_rejected(backend):
    spec = PotentialSpec(kind="flat")
    cfg = IntegratorConfig(dt=1.0, beta_inv=10.0, domain="torus")
    x0 = _mid(TORUS, TORUS.reactant_index)
    with pytest.raises(NumericalBlowupError):
        run_fragment(x0, TORUS.reactant_index, TORUS, spec, cfg,
                     RngStream(3, 3), backend=backend)


def test_end_points_lie_on_end_milestones(backend):
    spec = make_rough_landscape(3, seed=11)
    cfg = IntegratorConfig(dt=2e-5, beta_inv=1.0, domain="torus")
    from milestoning.geometry import point_on_milestone
    x0 = _mid(TORUS, TORUS.reactant_index)
    for stream in range(40):
        f = run_fragment(x0, TORUS.reactant_index, TORUS, spec, cfg,
                         RngStream(5, stream), backend=backend)
        assert point_on_milestone(f.end_point, TORUS.milestones[f.end_milestone],
                                  tol=1e-12)
