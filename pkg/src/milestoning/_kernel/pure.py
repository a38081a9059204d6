"""Pure-Python integration kernel: the fallback backend.

Scalar math only (``math`` module, never numpy ufuncs) so that every
floating-point operation matches the compiled kernel bit-for-bit: both
backends execute the same IEEE-754 double operations in the same order,
against the same libm.
"""

from __future__ import annotations

from math import cos, fabs, floor, inf, isfinite, pi, sin
from math import exp as _math_exp

BACKEND = "pure"

STATUS_RUNNING = 0
STATUS_CROSSED = 1
STATUS_BLOWUP = 2
STATUS_STEP_TOO_LARGE = 3

TWO_PI = 2.0 * pi
T_TIE = 1e-12

POT_FLAT = 0
POT_LINEAR = 1
POT_QUADRATIC = 2
POT_MUELLER_BROWN = 3
POT_ROUGH = 4

def exp(z):
    # C exp overflows to inf; math.exp raises instead
    try:
        return _math_exp(z)
    except OverflowError:
        return inf


MB_A = (-200.0, -100.0, -170.0, 15.0)
MB_a = (-1.0, -1.0, -6.5, 0.7)
MB_b = (0.0, 0.0, 11.0, 0.6)
MB_c = (-10.0, -10.0, -6.5, 0.7)
MB_X = (1.0, 0.0, -0.5, -1.0)
MB_Y = (0.0, 0.5, 1.5, 1.0)


def gradient(pot_id, pf, pi_params, x1, x2):
    """Scalar grad U; pf/pi_params per PotentialSpec.kernel_payload."""
    if pot_id == POT_FLAT:
        return 0.0, 0.0
    if pot_id == POT_LINEAR:
        return pf[0], pf[1]
    if pot_id == POT_QUADRATIC:
        return pf[0] * x1, pf[1] * x2
    if pot_id == POT_MUELLER_BROWN:
        g1 = 0.0
        g2 = 0.0
        for k in range(4):
            dx = x1 - MB_X[k]
            dy = x2 - MB_Y[k]
            e = MB_A[k] * exp(MB_a[k] * dx * dx + MB_b[k] * dx * dy + MB_c[k] * dy * dy)
            g1 += e * (2.0 * MB_a[k] * dx + MB_b[k] * dy)
            g2 += e * (MB_b[k] * dx + 2.0 * MB_c[k] * dy)
        return g1, g2
    if pot_id == POT_ROUGH:
        return _rough_gradient(pf, pi_params, x1, x2)
    raise ValueError(f"unknown potential id {pot_id}")


def _rough_gradient(pf, pi_params, x1, x2):
    # signed cos/sin tables for k in [-N, N], then a branchless double sum
    n = pi_params[0]
    x1w = x1 - floor(x1)
    x2w = x2 - floor(x2)
    c1 = cos(TWO_PI * x1w)
    s1 = sin(TWO_PI * x1w)
    c2 = cos(TWO_PI * x2w)
    s2 = sin(TWO_PI * x2w)
    C1 = [1.0] * (n + 1)
    S1 = [0.0] * (n + 1)
    C2 = [1.0] * (n + 1)
    S2 = [0.0] * (n + 1)
    for k in range(1, n + 1):
        C1[k] = C1[k - 1] * c1 - S1[k - 1] * s1
        S1[k] = S1[k - 1] * c1 + C1[k - 1] * s1
        C2[k] = C2[k - 1] * c2 - S2[k - 1] * s2
        S2[k] = S2[k - 1] * c2 + C2[k - 1] * s2
    nn = 2 * n + 1
    nn2 = nn * nn
    C1F = [0.0] * nn
    S1F = [0.0] * nn
    C2F = [0.0] * nn
    S2F = [0.0] * nn
    for j in range(nn):
        k = j - n
        a = -k if k < 0 else k
        C1F[j] = C1[a]
        S1F[j] = -S1[a] if k < 0 else S1[a]
        C2F[j] = C2[a]
        S2F[j] = -S2[a] if k < 0 else S2[a]
    g1 = 0.0
    g2 = 0.0
    idx = 0
    for j1 in range(nn):
        c1k = C1F[j1]
        s1k = S1F[j1]
        k1 = float(j1 - n)
        for j2 in range(nn):
            c2k = C2F[j2]
            s2k = S2F[j2]
            sphi = s1k * c2k + c1k * s2k
            cphi = c1k * c2k - s1k * s2k
            m = pf[idx] * sphi + pf[nn2 + idx] * cphi
            g1 += k1 * m
            g2 += (j2 - n) * m
            idx += 1
    return -TWO_PI * g1, -TWO_PI * g2


def seg_hit(px, py, qx, qy, ax, ay, bx, by):
    """Parameter t in [0, 1] where segment p->q meets segment a->b, else -1.

    Endpoint touches count.  Collinear overlaps return the first overlap
    parameter; a degenerate (point) step hits only if it lies on a-b.
    """
    rx = qx - px
    ry = qy - py
    sx = bx - ax
    sy = by - ay
    wx = ax - px
    wy = ay - py
    denom = rx * sy - ry * sx
    if denom != 0.0:
        t = (wx * sy - wy * sx) / denom
        u = (wx * ry - wy * rx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return t
        return -1.0
    if wx * ry - wy * rx != 0.0:
        return -1.0  # parallel, not collinear
    rr = rx * rx + ry * ry
    if rr == 0.0:
        ss = sx * sx + sy * sy
        if ss == 0.0:
            return 0.0 if (px == ax and py == ay) else -1.0
        v = ((px - ax) * sx + (py - ay) * sy) / ss
        return 0.0 if 0.0 <= v <= 1.0 else -1.0
    t0 = (wx * rx + wy * ry) / rr
    t1 = t0 + (sx * rx + sy * ry) / rr
    lo = t0 if t0 < t1 else t1
    hi = t1 if t0 < t1 else t0
    lo = 0.0 if lo < 0.0 else lo
    hi = 1.0 if hi > 1.0 else hi
    return lo if lo <= hi else -1.0


def _seg_lists(idx):
    cached = getattr(idx, "_pure_lists", None)
    if cached is None:
        cached = (
            idx.ax.tolist(),
            idx.ay.tolist(),
            idx.bx.tolist(),
            idx.by.tolist(),
            idx.ms.tolist(),
            idx.bin_start.tolist(),
            idx.bin_items.tolist(),
            idx.shift_x.tolist(),
            idx.shift_y.tolist(),
        )
        idx._pure_lists = cached
    return cached


def _query_crossing(px, py, qx, qy, cur_ms, idx, ax, ay, bx, by, ms, bin_start, bin_items):
    lox = px if px < qx else qx
    hix = qx if px < qx else px
    loy = py if py < qy else qy
    hiy = qy if py < qy else py
    fi0 = floor((lox - idx.x0) * idx.inv_bw)
    fi1 = floor((hix - idx.x0) * idx.inv_bw)
    fj0 = floor((loy - idx.y0) * idx.inv_bh)
    fj1 = floor((hiy - idx.y0) * idx.inv_bh)
    if fi1 < 0 or fj1 < 0 or fi0 >= idx.nx or fj0 >= idx.ny:
        return -1, -1.0, -1
    i0 = 0 if fi0 < 0 else int(fi0)
    j0 = 0 if fj0 < 0 else int(fj0)
    i1 = idx.nx - 1 if fi1 >= idx.nx else int(fi1)
    j1 = idx.ny - 1 if fj1 >= idx.ny else int(fj1)

    tmin = -1.0
    for i in range(i0, i1 + 1):
        base = i * idx.ny
        for j in range(j0, j1 + 1):
            for p in range(bin_start[base + j], bin_start[base + j + 1]):
                k = bin_items[p]
                if ms[k] == cur_ms:
                    continue
                t = seg_hit(px, py, qx, qy, ax[k], ay[k], bx[k], by[k])
                if t >= 0.0 and (tmin < 0.0 or t < tmin):
                    tmin = t
    if tmin < 0.0:
        return -1, -1.0, -1
    best_ms = -1
    best_t = -1.0
    best_k = -1
    for i in range(i0, i1 + 1):
        base = i * idx.ny
        for j in range(j0, j1 + 1):
            for p in range(bin_start[base + j], bin_start[base + j + 1]):
                k = bin_items[p]
                if ms[k] == cur_ms:
                    continue
                t = seg_hit(px, py, qx, qy, ax[k], ay[k], bx[k], by[k])
                if t >= 0.0 and t <= tmin + T_TIE:
                    if (best_ms < 0 or ms[k] < best_ms
                            or (ms[k] == best_ms and t < best_t)
                            or (ms[k] == best_ms and t == best_t and k < best_k)):
                        best_ms = ms[k]
                        best_t = t
                        best_k = k
    return best_ms, best_t, best_k


def integrate_block(x1, x2, cur_ms, gauss, max_use, pot_id, pf, pi_params, idx,
                    dt, noise_coef, torus):
    """Advance up to max_use Euler-Maruyama steps consuming `gauss` rows.

    Returns (status, steps_used, x1, x2, hit_milestone).  On STATUS_CROSSED
    the returned position is the crossing point (wrapped on the torus).
    One gradient evaluation per step.
    """
    pf = list(pf)
    pi_params = list(pi_params)
    gz = gauss.tolist()
    ax, ay, bx, by, ms, bin_start, bin_items, shift_x, shift_y = _seg_lists(idx)
    n = min(int(max_use), len(gz))
    used = 0
    for k in range(n):
        g1, g2 = gradient(pot_id, pf, pi_params, x1, x2)
        qx = x1 - g1 * dt + noise_coef * gz[k][0]
        qy = x2 - g2 * dt + noise_coef * gz[k][1]
        used += 1
        if not (isfinite(qx) and isfinite(qy)):
            return STATUS_BLOWUP, used, qx, qy, -1
        if torus and (fabs(qx - x1) >= 0.5 or fabs(qy - x2) >= 0.5):
            return STATUS_STEP_TOO_LARGE, used, qx, qy, -1
        hit_ms, hit_t, hit_k = _query_crossing(
            x1, x2, qx, qy, cur_ms, idx, ax, ay, bx, by, ms, bin_start, bin_items
        )
        if hit_ms >= 0:
            # subtract the hit copy's integer shift: base-tile coordinates
            # without a wrap (which could round x=1-eps onto the wrong edge)
            hx = x1 + hit_t * (qx - x1) - shift_x[hit_k]
            hy = x2 + hit_t * (qy - x2) - shift_y[hit_k]
            return STATUS_CROSSED, used, hx, hy, hit_ms
        if torus:
            x1 = qx - floor(qx)
            x2 = qy - floor(qy)
        else:
            x1 = qx
            x2 = qy
    return STATUS_RUNNING, used, x1, x2, -1
