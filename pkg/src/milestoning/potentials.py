"""Closed-form 2-D potential energy surfaces and their gradients.

Every surface provides both U and the analytic grad U.  The vectorized
evaluators here are the readable reference implementations; the
integration kernels carry scalar twins of the same formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sde import ROUGH_COEFF_STREAM, RngStream

TWO_PI = 2.0 * math.pi

# Four-Gaussian benchmark surface: amplitude, quadratic form (a, b, c) and
# center (x, y) per term.  Transcribed once; tests pin golden values computed
# by an independent high-precision evaluation.
MB_A = (-200.0, -100.0, -170.0, 15.0)
MB_a = (-1.0, -1.0, -6.5, 0.7)
MB_b = (0.0, 0.0, 11.0, 0.6)
MB_c = (-10.0, -10.0, -6.5, 0.7)
MB_X = (1.0, 0.0, -0.5, -1.0)
MB_Y = (0.0, 0.5, 1.5, 1.0)

# Kernel dispatch ids, shared with milestoning._kernel.
KIND_FLAT = 0
KIND_LINEAR = 1
KIND_QUADRATIC = 2
KIND_MUELLER_BROWN = 3
KIND_ROUGH = 4

_KIND_IDS = {
    "flat": KIND_FLAT,
    "linear": KIND_LINEAR,
    "quadratic": KIND_QUADRATIC,
    "mueller_brown": KIND_MUELLER_BROWN,
    "rough": KIND_ROUGH,
}


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Immutable description of one energy surface.

    kind is one of flat | linear | quadratic | mueller_brown | rough.
    ``coeffs`` holds the linear gradient vector or the quadratic diagonal;
    ``fourier_a``/``fourier_b`` hold the (2N+1)x(2N+1) rough-surface
    coefficient tables indexed k1, k2 in [-N, N].
    """

    kind: str
    coeffs: tuple = ()
    order: int = 0
    fourier_a: np.ndarray | None = field(default=None, repr=False)
    fourier_b: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _KIND_IDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("linear", "quadratic") and len(self.coeffs) != 2:
            raise ValueError(f"{self.kind} potential needs a 2-vector of coefficients")
        if self.kind == "rough":
            n = 2 * self.order + 1
            for name in ("fourier_a", "fourier_b"):
                tab = getattr(self, name)
                if tab is None or tab.shape != (n, n):
                    raise ValueError(f"{name} must have shape ({n}, {n})")
                tab.flags.writeable = False
        if self.kind in ("linear", "quadratic"):
            pf = np.asarray(self.coeffs, dtype=np.float64)
        elif self.kind == "rough":
            pf = np.concatenate([self.fourier_a.ravel(), self.fourier_b.ravel()])
        else:
            pf = np.zeros(0)
        pi = (np.array([self.order], dtype=np.int64) if self.kind == "rough"
              else np.zeros(0, dtype=np.int64))
        payload = (_KIND_IDS[self.kind], np.ascontiguousarray(pf), np.ascontiguousarray(pi))
        object.__setattr__(self, "_payload", payload)

    @property
    def periodic(self) -> bool:
        return self.kind == "rough"

    def kernel_payload(self):
        """(pot_id, float64 params, int64 params) consumed by the kernels."""
        return self._payload


def _check_input(x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2:
        raise ValueError("positions must have trailing dimension 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite position")
    return x


def eval_potential(spec: PotentialSpec, x) -> np.ndarray | float:
    """Energy U(x); vectorized over leading dimensions of x."""
    x = _check_input(x)
    x1, x2 = x[..., 0], x[..., 1]
    if spec.kind == "flat":
        u = np.zeros_like(x1)
    elif spec.kind == "linear":
        g1, g2 = spec.coeffs
        u = g1 * x1 + g2 * x2
    elif spec.kind == "quadratic":
        c1, c2 = spec.coeffs
        u = 0.5 * (c1 * x1 * x1 + c2 * x2 * x2)
    elif spec.kind == "mueller_brown":
        u = np.zeros_like(x1)
        with np.errstate(over="ignore"):  # the confining term diverges far out
            for k in range(4):
                dx = x1 - MB_X[k]
                dy = x2 - MB_Y[k]
                u = u + MB_A[k] * np.exp(MB_a[k] * dx * dx + MB_b[k] * dx * dy + MB_c[k] * dy * dy)
    else:
        u = _rough_eval(spec, x1, x2, want_grad=False)[0]
    return u if u.ndim else float(u)


def eval_gradient(spec: PotentialSpec, x) -> np.ndarray:
    """Analytic grad U(x); vectorized over leading dimensions of x."""
    x = _check_input(x)
    x1, x2 = x[..., 0], x[..., 1]
    if spec.kind == "flat":
        g = np.zeros_like(x)
    elif spec.kind == "linear":
        g = np.empty_like(x)
        g[..., 0] = spec.coeffs[0]
        g[..., 1] = spec.coeffs[1]
    elif spec.kind == "quadratic":
        g = np.empty_like(x)
        g[..., 0] = spec.coeffs[0] * x1
        g[..., 1] = spec.coeffs[1] * x2
    elif spec.kind == "mueller_brown":
        g = np.zeros_like(x)
        with np.errstate(over="ignore"):
            for k in range(4):
                dx = x1 - MB_X[k]
                dy = x2 - MB_Y[k]
                e = MB_A[k] * np.exp(MB_a[k] * dx * dx + MB_b[k] * dx * dy + MB_c[k] * dy * dy)
                g[..., 0] += e * (2.0 * MB_a[k] * dx + MB_b[k] * dy)
                g[..., 1] += e * (MB_b[k] * dx + 2.0 * MB_c[k] * dy)
    else:
        _, g1, g2 = _rough_eval(spec, x1, x2, want_grad=True)
        g = np.stack([g1, g2], axis=-1)
    return g


def _rough_eval(spec, x1, x2, want_grad):
    """Real Fourier sum over k in [-N, N]^2, reduced mod 1 per coordinate.

    Reduction first makes 1-periodicity hold bit-for-bit.
    """
    n = spec.order
    x1 = x1 - np.floor(x1)
    x2 = x2 - np.floor(x2)
    ks = np.arange(-n, n + 1)
    ph1 = TWO_PI * np.multiply.outer(x1, ks)  # (..., 2N+1)
    ph2 = TWO_PI * np.multiply.outer(x2, ks)
    c1, s1 = np.cos(ph1), np.sin(ph1)
    c2, s2 = np.cos(ph2), np.sin(ph2)
    a, b = spec.fourier_a, spec.fourier_b
    # cos(p1 + p2), sin(p1 + p2) by angle addition across the two axes
    cphi = np.einsum("...i,...j->...ij", c1, c2) - np.einsum("...i,...j->...ij", s1, s2)
    sphi = np.einsum("...i,...j->...ij", s1, c2) + np.einsum("...i,...j->...ij", c1, s2)
    u = np.einsum("ij,...ij->...", a, cphi) - np.einsum("ij,...ij->...", b, sphi)
    if not want_grad:
        return (u,)
    m = np.einsum("ij,...ij->...ij", a, sphi) + np.einsum("ij,...ij->...ij", b, cphi)
    g1 = -TWO_PI * np.einsum("i,...ij->...", ks.astype(float), m)
    g2 = -TWO_PI * np.einsum("j,...ij->...", ks.astype(float), m)
    return u, g1, g2


def make_rough_landscape(order: int, seed: int) -> PotentialSpec:
    """Draw a random rugged periodic surface.

    Each of a and b is independently zero with probability 1/2, otherwise a
    fresh Uniform(-1, 1) draw.  Four uniforms are consumed per (k1, k2) entry
    in row-major order, so the table is a pure function of (order, seed).
    The draws come from a dedicated counter-based stream, separate from the
    dynamics streams.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    n = 2 * order + 1
    rng = RngStream(seed, ROUGH_COEFF_STREAM)
    u = rng.random((n * n, 4))
    a = np.where(u[:, 0] < 0.5, 0.0, 2.0 * u[:, 1] - 1.0).reshape(n, n)
    b = np.where(u[:, 2] < 0.5, 0.0, 2.0 * u[:, 3] - 1.0).reshape(n, n)
    return PotentialSpec(kind="rough", order=order, fourier_a=a, fourier_b=b)
