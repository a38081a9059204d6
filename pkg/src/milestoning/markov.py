"""Exactly solvable source-sink jump chains.

These finite chains are the linear-algebra oracles for everything the
sampled pipeline estimates: stationary flux by expected visit counts,
the passage-time identity, Neumann tails, aperiodicity and geometric
ergodicity certificates, Cesaro averages and semi-Markov occupancies.

Total variation distance is the standard (1/2) * l1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .errors import UnreachableProductError

_SUPPORT_TOL = 1e-14  # below this a probability is a floating-point zero


def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(eq=False)
class DiscreteChain:
    """Row-stochastic jump kernel with instantaneous product restart.

    The product row equals rho and the product jump time is zero, which is
    the coarse form of the source-sink convention.
    """

    K: np.ndarray
    jump_time_means: np.ndarray
    reactant: int
    product: int
    rho: np.ndarray

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64)
        self.jump_time_means = np.asarray(self.jump_time_means, dtype=np.float64)
        self.rho = np.asarray(self.rho, dtype=np.float64)
        m = self.K.shape[0]
        if self.K.shape != (m, m):
            raise ValueError("K must be square")
        if self.jump_time_means.shape != (m,) or self.rho.shape != (m,):
            raise ValueError("jump_time_means and rho must have length m")
        if not (0 <= self.reactant < m and 0 <= self.product < m):
            raise ValueError("reactant/product out of range")
        if self.reactant == self.product:
            raise ValueError("reactant and product must differ")
        if np.any(self.K < 0):
            raise ValueError("K has negative entries")
        if np.any(np.abs(self.K.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("K rows must sum to 1 within 1e-12")
        if np.any(self.rho < 0) or abs(self.rho.sum() - 1.0) > 1e-12:
            raise ValueError("rho must be a probability vector")
        if self.rho[self.product] > 0:
            raise ValueError("rho must not charge the product")
        if np.any(np.abs(self.K[self.product] - self.rho) > 1e-12):
            raise ValueError("product row of K must equal rho (restart)")
        if np.any(self.jump_time_means < 0):
            raise ValueError("jump time means must be >= 0")
        if self.jump_time_means[self.product] != 0.0:
            raise ValueError("product jump time must be 0")
        self._check_product_reachable()

    @property
    def m(self) -> int:
        return self.K.shape[0]

    def _check_product_reachable(self):
        # backward BFS from the product over the support graph
        support = self.K > _SUPPORT_TOL
        reached = {self.product}
        frontier = [self.product]
        while frontier:
            j = frontier.pop()
            for i in np.nonzero(support[:, j])[0]:
                if i not in reached:
                    reached.add(int(i))
                    frontier.append(int(i))
        if len(reached) != self.m:
            missing = sorted(set(range(self.m)) - reached)
            raise UnreachableProductError(
                f"product unreachable from states {missing}"
            )

    def transient_kernel(self) -> np.ndarray:
        """K with the product row zeroed (chain killed on the product)."""
        kbar = self.K.copy()
        kbar[self.product, :] = 0.0
        return kbar


def expected_visits(chain: DiscreteChain) -> np.ndarray:
    """nu = rho (I - Kbar)^-1: expected visits of J_0..J_sigma per cycle."""
    kbar = chain.transient_kernel()
    eye = np.eye(chain.m)
    try:
        nu = np.linalg.solve((eye - kbar).T, chain.rho)
    except np.linalg.LinAlgError as exc:
        raise UnreachableProductError(f"singular I - Kbar: {exc}") from exc
    return nu


def invariant_mu_visits(chain: DiscreteChain) -> np.ndarray:
    """Invariant probability vector mu = nu / nu(M); nu(M) = E[sigma_P] + 1."""
    nu = expected_visits(chain)
    return nu / nu.sum()


def neumann_partial(chain: DiscreteChain, n: int):
    """Truncated Neumann series for mu plus its exact error and tail bound.

    Returns (partial, tv_error, bound): partial = nu(M)^-1 sum_{i<n} rho Kbar^i,
    tv_error = TV(partial, mu), and bound = nu(M)^-1 sum_{i>=n} P(sigma_P >= i),
    evaluated in closed form via matrix powers and a remainder solve.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    kbar = chain.transient_kernel()
    nu = expected_visits(chain)
    nu_m = nu.sum()
    mu = nu / nu_m
    v = chain.rho.copy()
    partial = np.zeros(chain.m)
    for _ in range(n):
        partial += v
        v = v @ kbar
    partial /= nu_m
    tv_error = tv_distance(partial, mu)
    # sum_{i>=n} rho Kbar^i = (rho Kbar^n) (I - Kbar)^-1, summed
    tail = np.linalg.solve((np.eye(chain.m) - kbar).T, v)
    bound = float(tail.sum()) / nu_m
    return partial, tv_error, bound


def mfpt_check(chain: DiscreteChain):
    """(direct, milestoning): first-step linear solve vs the flux identity.

    direct = E^rho[tau_P]; milestoning = (sum_i mu_i t_i) / mu(P).  The two
    agree to ~1e-10 relative on any valid chain.
    """
    mask = np.arange(chain.m) != chain.product
    knp = chain.K[np.ix_(mask, mask)]
    t_vec = chain.jump_time_means[mask]
    T = np.linalg.solve(np.eye(mask.sum()) - knp, t_vec)
    direct = float(chain.rho[mask] @ T)
    mu = invariant_mu_visits(chain)
    milestoning = float(mu @ chain.jump_time_means) / float(mu[chain.product])
    return direct, milestoning


def sigma_distribution(chain: DiscreteChain, horizon: int) -> np.ndarray:
    """P(sigma_P = i) for i = 0..horizon-1 via transient matrix powers."""
    kbar = chain.transient_kernel()
    v = chain.rho.copy()
    surv = [v.sum()]
    for _ in range(horizon):
        v = v @ kbar
        surv.append(v.sum())
    surv = np.asarray(surv)
    return surv[:-1] - surv[1:]


def aperiodicity_gcd(chain: DiscreteChain, horizon: int) -> int:
    """gcd of {n >= 1 : P(sigma_P = n-1) > 0} truncated at `horizon`.

    The horizon must be large enough that the support determines the gcd
    (4 m suffices for nearest-neighbor level chains).
    """
    probs = sigma_distribution(chain, horizon)
    g = 0
    for n in range(1, horizon + 1):
        if probs[n - 1] > _SUPPORT_TOL:
            g = gcd(g, n)
    if g == 0:
        raise UnreachableProductError(
            f"sigma_P has no support within horizon {horizon}"
        )
    return g


@dataclass
class GeometricBoundCertificate:
    """Uniform N-step product-hitting bound and the decay curves it implies."""

    N: int
    lam: float
    satisfied: bool
    _chain: DiscreteChain = field(repr=False)
    _mu: np.ndarray = field(repr=False)
    _powers: dict = field(default_factory=dict, repr=False)

    def bound(self, n: int) -> float:
        if not self.satisfied:
            raise ValueError("hypothesis not satisfied (lambda = 0)")
        return (1.0 / self.lam) * (1.0 - self.lam) ** (n // self.N)

    def empirical(self, n: int) -> float:
        """sup_x TV(delta_x K^n, mu), exact by matrix powers."""
        kn = self._power(n)
        return float(np.max(0.5 * np.abs(kn - self._mu[None, :]).sum(axis=1)))

    def _power(self, n: int) -> np.ndarray:
        if n == 0:
            return np.eye(self._chain.m)
        if n not in self._powers:
            self._powers[n] = self._power(n - 1) @ self._chain.K
        return self._powers[n]


def geometric_bound_certificate(chain: DiscreteChain, N: int) -> GeometricBoundCertificate:
    """lambda = min_x P^x(J_{N-1} in product) and the implied decay bound.

    lambda = 0 signals the hypothesis fails for this N (satisfied=False);
    when lambda > 0 the exact TV decay is dominated by the bound curve.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    kp = np.linalg.matrix_power(chain.K, N - 1)
    lam = float(kp[:, chain.product].min())
    mu = invariant_mu_visits(chain)
    satisfied = lam > _SUPPORT_TOL
    return GeometricBoundCertificate(N=N, lam=lam if satisfied else 0.0,
                                     satisfied=satisfied, _chain=chain, _mu=mu)


def cesaro_average(chain: DiscreteChain, f, n_steps: int, rng) -> float:
    """Time average (1/n) sum f(J_i) along one simulated path from rho."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    f = np.asarray(f, dtype=np.float64)
    cum = np.cumsum(chain.K, axis=1)
    cum_rho = np.cumsum(chain.rho)
    state = int(np.searchsorted(cum_rho, rng.random(), side="right"))
    total = 0.0
    for _ in range(n_steps):
        total += f[state]
        state = int(np.searchsorted(cum[state], rng.random(), side="right"))
        if state >= chain.m:  # guard against cumulative rounding
            state = chain.m - 1
    return total / n_steps


def semi_markov_occupancy(chain: DiscreteChain) -> np.ndarray:
    """Long-run occupancy of the last-crossed milestone: mu_i t_i normalized."""
    mu = invariant_mu_visits(chain)
    w = mu * chain.jump_time_means
    total = w.sum()
    if total <= 0:
        raise ValueError("all jump time means are zero")
    return w / total


# ---------------------------------------------------------------------------
# Chain constructors


def level_chain(m: int, q: float = 0.5, jump_times=None) -> DiscreteChain:
    """Nearest-neighbor chain of m level-set milestones; interior states step
    down with probability q.  State 0 is the reactant, m-1 the product."""
    if m < 3:
        raise ValueError("need m >= 3")
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    K = np.zeros((m, m))
    K[0, 1] = 1.0
    for i in range(1, m - 1):
        K[i, i - 1] = q
        K[i, i + 1] = 1.0 - q
    rho = np.zeros(m)
    rho[0] = 1.0
    K[m - 1] = rho
    if jump_times is None:
        jump_times = np.ones(m)
        jump_times[m - 1] = 0.0
    return DiscreteChain(K, jump_times, reactant=0, product=m - 1, rho=rho)


def golden_three_state() -> DiscreteChain:
    """R -> mid; mid -> R or P with probability 1/2; unit jump times.

    mu = (2/5, 2/5, 1/5) and the passage time from rho is exactly 4.
    """
    K = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
    return DiscreteChain(K, np.array([1.0, 1.0, 0.0]), reactant=0, product=2,
                         rho=np.array([1.0, 0.0, 0.0]))


def random_chain(rng, m: int | None = None, max_m: int = 8,
                 max_jump_time: float = 5.0) -> DiscreteChain:
    """Random valid chain for property tests.

    Product reachability holds by construction: a forward path skeleton
    0 -> 1 -> ... -> m-1 is blended into the random rows.  Diagonals are
    zero (a jump chain never stays on its milestone).
    """
    if m is None:
        m = int(rng.integers(3, max_m + 1))
    if m < 3:
        raise ValueError("need m >= 3")
    K = np.zeros((m, m))
    for i in range(m - 1):
        row = rng.random(m)
        row[i] = 0.0
        row /= row.sum()
        skeleton = np.zeros(m)
        skeleton[i + 1] = 1.0
        K[i] = 0.9 * row + 0.1 * skeleton
    rho = np.zeros(m)
    rho[0] = 1.0
    K[m - 1] = rho
    times = rng.random(m) * max_jump_time
    times[m - 1] = 0.0
    return DiscreteChain(K, times, reactant=0, product=m - 1, rho=rho)
