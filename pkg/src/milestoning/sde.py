"""Euler-Maruyama time stepping and reproducible random streams.

Every trajectory fragment owns a counter-based Philox stream keyed by
(seed, stream_id), so replaying a stream reproduces the trajectory
bit-for-bit and distinct stream ids never overlap.  Stream ids are
allocated from disjoint phase ranges below.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import NumericalBlowupError

# Phase tags occupy the top bits of the 64-bit stream id.
PHASE_FRAGMENT = 1 << 62
PHASE_RESAMPLE = 2 << 62
PHASE_BASELINE = 3 << 62
ROUGH_COEFF_STREAM = 4 << 62
PHASE_EVICT = 5 << 62

_MASK64 = (1 << 64) - 1


def fragment_stream(iteration: int, milestone: int, sample: int) -> int:
    """Stream id for fragment `sample` of row `milestone` at `iteration`."""
    if not (0 <= iteration < 1 << 22 and 0 <= milestone < 1 << 20 and 0 <= sample < 1 << 20):
        raise ValueError("stream coordinates out of range")
    return PHASE_FRAGMENT | (iteration << 40) | (milestone << 20) | sample


def resample_stream(iteration: int, milestone: int) -> int:
    if not (0 <= iteration < 1 << 22 and 0 <= milestone < 1 << 20):
        raise ValueError("stream coordinates out of range")
    return PHASE_RESAMPLE | (iteration << 40) | (milestone << 20)


def baseline_stream(replica: int) -> int:
    if not 0 <= replica < 1 << 32:
        raise ValueError("replica out of range")
    return PHASE_BASELINE | replica


def evict_stream(iteration: int, milestone: int) -> int:
    return PHASE_EVICT | (iteration << 40) | (milestone << 20)


class RngStream:
    """Counter-based stream: draws are a pure function of (seed, stream_id, counter)."""

    def __init__(self, seed: int, stream_id: int):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.counter = 0  # values drawn so far
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, shape):
        out = self._gen.standard_normal(shape)
        self.counter += out.size
        return out

    def random(self, shape=None):
        out = self._gen.random(shape)
        self.counter += 1 if shape is None else out.size
        return out

    def replay(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id)


class _ThreadRng(threading.local):
    """Per-thread reusable Philox generator plus draw buffers."""

    def __init__(self):
        self.key = np.zeros(2, dtype=np.uint64)
        self.bitgen = np.random.Philox(key=self.key)
        self.gen = np.random.Generator(self.bitgen)
        self.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.zeros(4, dtype=np.uint64), "key": self.key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        self.buffers = {}


_thread_rng = _ThreadRng()


class PooledStream:
    """Cheap stream over a per-thread reusable generator.

    Identical draw sequence to RngStream(seed, stream_id).  At most one
    pooled stream per thread may be live at a time; the driver's
    per-fragment and per-replica usage is strictly sequential.
    """

    __slots__ = ("seed", "stream_id", "counter", "_pool")

    def __init__(self, seed: int, stream_id: int):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.counter = 0
        pool = _thread_rng
        pool.key[0] = self.seed
        pool.key[1] = self.stream_id
        pool.bitgen.state = pool.state
        self._pool = pool

    def standard_normal(self, shape):
        out = self._pool.gen.standard_normal(shape)
        self.counter += out.size
        return out

    def normal_block(self, n: int) -> np.ndarray:
        """(n, 2) standard normals in a reused per-thread buffer."""
        buf = self._pool.buffers.get(n)
        if buf is None:
            buf = np.empty((n, 2))
            self._pool.buffers[n] = buf
        self._pool.gen.standard_normal(out=buf)
        self.counter += buf.size
        return buf

    def random(self, shape=None):
        out = self._pool.gen.random(shape)
        self.counter += 1 if shape is None else out.size
        return out

    def replay(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id)


@dataclass(frozen=True)
class IntegratorConfig:
    """Time step, temperature and domain for the overdamped dynamics."""

    dt: float
    beta_inv: float
    domain: str = "plane"  # plane | torus (R^2 / Z^2)
    max_steps_per_fragment: int = 10_000_000

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.beta_inv > 0:
            raise ValueError("beta_inv must be > 0")
        if self.domain not in ("plane", "torus"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.max_steps_per_fragment < 1:
            raise ValueError("max_steps_per_fragment must be >= 1")

    @property
    def torus(self) -> bool:
        return self.domain == "torus"

    @property
    def noise_coef(self) -> float:
        return math.sqrt(2.0 * self.beta_inv * self.dt)


def wrap_torus(x) -> np.ndarray:
    """Componentwise x mod 1 into [0, 1)^2; idempotent."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite position")
    return x - np.floor(x)


def em_step(x, spec, cfg: IntegratorConfig, gauss):
    """One Euler-Maruyama step x - grad U(x) dt + sqrt(2 beta_inv dt) gauss.

    Returns (x_new, x_pre): on the torus x_new is wrapped while x_pre is the
    unwrapped endpoint, so crossing detection sees the true displacement
    segment.  On the plane the two coincide.

    The Gaussian pair is an explicit argument (drawn by the caller's
    stream), which keeps the step a pure function.
    """
    from .potentials import eval_gradient  # local import breaks the module cycle

    x = np.asarray(x, dtype=np.float64)
    gauss = np.asarray(gauss, dtype=np.float64)
    g = eval_gradient(spec, x)
    with np.errstate(over="ignore", invalid="ignore"):
        x_pre = x - g * cfg.dt + cfg.noise_coef * gauss
    if not np.all(np.isfinite(x_pre)):
        raise NumericalBlowupError(x_pre)
    if cfg.torus:
        return x_pre - np.floor(x_pre), x_pre
    return x_pre, x_pre
