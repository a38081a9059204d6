"""Milestone-based first-passage sampling for 2-D overdamped Langevin
dynamics, with exactly solvable jump-chain oracles."""

from ._kernel import BACKEND as kernel_backend
from .driver import MilestoningParams, init_guess, iterate, run, solve_stationary_weights
from .fragments import Fragment, Reservoir, run_fragment, sample_row
from .geometry import (
    Crossing,
    Milestone,
    Partition,
    RhoSpec,
    build_grid_partition,
    build_level_partition,
    build_voronoi_partition,
    detect_crossing,
)
from .markov import DiscreteChain, invariant_mu_visits, mfpt_check
from .potentials import PotentialSpec, eval_gradient, eval_potential, make_rough_landscape
from .sde import IntegratorConfig, RngStream, em_step, wrap_torus

__version__ = "0.1.0"
