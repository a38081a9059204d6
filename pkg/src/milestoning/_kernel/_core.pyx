# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernel.

Must stay operation-for-operation identical to milestoning._kernel.pure:
the build disables FP contraction so both backends produce bit-identical
trajectories.
"""

from libc.math cimport cos, exp, fabs, floor, isfinite, sin, M_PI

import numpy as np

BACKEND = "cython"

STATUS_RUNNING = 0
STATUS_CROSSED = 1
STATUS_BLOWUP = 2
STATUS_STEP_TOO_LARGE = 3

cdef int C_RUNNING = 0
cdef int C_CROSSED = 1
cdef int C_BLOWUP = 2
cdef int C_STEP_TOO_LARGE = 3

DEF MAXN = 16           # rough-landscape order cap
DEF T_TIE = 1e-12

cdef double TWO_PI = 2.0 * M_PI

cdef int POT_FLAT = 0
cdef int POT_LINEAR = 1
cdef int POT_QUADRATIC = 2
cdef int POT_MUELLER_BROWN = 3
cdef int POT_ROUGH = 4

cdef double[4] MB_A = [-200.0, -100.0, -170.0, 15.0]
cdef double[4] MB_a = [-1.0, -1.0, -6.5, 0.7]
cdef double[4] MB_b = [0.0, 0.0, 11.0, 0.6]
cdef double[4] MB_c = [-10.0, -10.0, -6.5, 0.7]
cdef double[4] MB_X = [1.0, 0.0, -0.5, -1.0]
cdef double[4] MB_Y = [0.0, 0.5, 1.5, 1.0]


cdef inline void c_gradient(int pot_id, const double* pf, const long long* pi_params,
                            double x1, double x2, double* g1, double* g2) noexcept nogil:
    cdef int k, k1, k2, a1, a2, n, nn, nn2, idx, j, j1, j2
    cdef double dx, dy, e, kd
    cdef double x1w, x2w, c1, s1, c2, s2, c1k, s1k, c2k, s2k, sphi, cphi, m
    cdef double C1[MAXN + 1]
    cdef double S1[MAXN + 1]
    cdef double C2[MAXN + 1]
    cdef double S2[MAXN + 1]
    cdef double C1F[2 * MAXN + 1]
    cdef double S1F[2 * MAXN + 1]
    cdef double C2F[2 * MAXN + 1]
    cdef double S2F[2 * MAXN + 1]
    cdef double acc1, acc2

    if pot_id == POT_FLAT:
        g1[0] = 0.0
        g2[0] = 0.0
    elif pot_id == POT_LINEAR:
        g1[0] = pf[0]
        g2[0] = pf[1]
    elif pot_id == POT_QUADRATIC:
        g1[0] = pf[0] * x1
        g2[0] = pf[1] * x2
    elif pot_id == POT_MUELLER_BROWN:
        acc1 = 0.0
        acc2 = 0.0
        for k in range(4):
            dx = x1 - MB_X[k]
            dy = x2 - MB_Y[k]
            e = MB_A[k] * exp(MB_a[k] * dx * dx + MB_b[k] * dx * dy + MB_c[k] * dy * dy)
            acc1 += e * (2.0 * MB_a[k] * dx + MB_b[k] * dy)
            acc2 += e * (MB_b[k] * dx + 2.0 * MB_c[k] * dy)
        g1[0] = acc1
        g2[0] = acc2
    else:
        # signed cos/sin tables for k in [-N, N], then a branchless double sum
        n = <int> pi_params[0]
        x1w = x1 - floor(x1)
        x2w = x2 - floor(x2)
        c1 = cos(TWO_PI * x1w)
        s1 = sin(TWO_PI * x1w)
        c2 = cos(TWO_PI * x2w)
        s2 = sin(TWO_PI * x2w)
        C1[0] = 1.0
        S1[0] = 0.0
        C2[0] = 1.0
        S2[0] = 0.0
        for k in range(1, n + 1):
            C1[k] = C1[k - 1] * c1 - S1[k - 1] * s1
            S1[k] = S1[k - 1] * c1 + C1[k - 1] * s1
            C2[k] = C2[k - 1] * c2 - S2[k - 1] * s2
            S2[k] = S2[k - 1] * c2 + C2[k - 1] * s2
        nn = 2 * n + 1
        nn2 = nn * nn
        for j in range(nn):
            k = j - n
            a1 = -k if k < 0 else k
            C1F[j] = C1[a1]
            S1F[j] = -S1[a1] if k < 0 else S1[a1]
            C2F[j] = C2[a1]
            S2F[j] = -S2[a1] if k < 0 else S2[a1]
        acc1 = 0.0
        acc2 = 0.0
        idx = 0
        for j1 in range(nn):
            c1k = C1F[j1]
            s1k = S1F[j1]
            kd = <double> (j1 - n)
            for j2 in range(nn):
                c2k = C2F[j2]
                s2k = S2F[j2]
                sphi = s1k * c2k + c1k * s2k
                cphi = c1k * c2k - s1k * s2k
                m = pf[idx] * sphi + pf[nn2 + idx] * cphi
                acc1 += kd * m
                acc2 += (j2 - n) * m
                idx += 1
        g1[0] = -TWO_PI * acc1
        g2[0] = -TWO_PI * acc2


cdef inline double c_seg_hit(double px, double py, double qx, double qy,
                             double ax, double ay, double bx, double by) noexcept nogil:
    cdef double rx = qx - px
    cdef double ry = qy - py
    cdef double sx = bx - ax
    cdef double sy = by - ay
    cdef double wx = ax - px
    cdef double wy = ay - py
    cdef double denom = rx * sy - ry * sx
    cdef double t, u, rr, ss, v, t0, t1, lo, hi
    if denom != 0.0:
        t = (wx * sy - wy * sx) / denom
        u = (wx * ry - wy * rx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return t
        return -1.0
    if wx * ry - wy * rx != 0.0:
        return -1.0
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


cdef struct HashGeom:
    double x0
    double y0
    double inv_bw
    double inv_bh
    int nx
    int ny


cdef inline int c_query_crossing(double px, double py, double qx, double qy, int cur_ms,
                                 const double* ax, const double* ay,
                                 const double* bx, const double* by,
                                 const int* ms, const int* bin_start, const int* bin_items,
                                 HashGeom hg, double* t_out, int* k_out) noexcept nogil:
    cdef double lox = px if px < qx else qx
    cdef double hix = qx if px < qx else px
    cdef double loy = py if py < qy else qy
    cdef double hiy = qy if py < qy else py
    cdef double fi0 = floor((lox - hg.x0) * hg.inv_bw)
    cdef double fi1 = floor((hix - hg.x0) * hg.inv_bw)
    cdef double fj0 = floor((loy - hg.y0) * hg.inv_bh)
    cdef double fj1 = floor((hiy - hg.y0) * hg.inv_bh)
    cdef int i0, i1, j0, j1, i, j, base, p, k, best_ms, best_k
    cdef double t, tmin, best_t
    if fi1 < 0 or fj1 < 0 or fi0 >= hg.nx or fj0 >= hg.ny:
        return -1
    i0 = 0 if fi0 < 0 else <int> fi0
    j0 = 0 if fj0 < 0 else <int> fj0
    i1 = hg.nx - 1 if fi1 >= hg.nx else <int> fi1
    j1 = hg.ny - 1 if fj1 >= hg.ny else <int> fj1

    tmin = -1.0
    for i in range(i0, i1 + 1):
        base = i * hg.ny
        for j in range(j0, j1 + 1):
            for p in range(bin_start[base + j], bin_start[base + j + 1]):
                k = bin_items[p]
                if ms[k] == cur_ms:
                    continue
                t = c_seg_hit(px, py, qx, qy, ax[k], ay[k], bx[k], by[k])
                if t >= 0.0 and (tmin < 0.0 or t < tmin):
                    tmin = t
    if tmin < 0.0:
        return -1
    best_ms = -1
    best_t = -1.0
    best_k = -1
    for i in range(i0, i1 + 1):
        base = i * hg.ny
        for j in range(j0, j1 + 1):
            for p in range(bin_start[base + j], bin_start[base + j + 1]):
                k = bin_items[p]
                if ms[k] == cur_ms:
                    continue
                t = c_seg_hit(px, py, qx, qy, ax[k], ay[k], bx[k], by[k])
                if t >= 0.0 and t <= tmin + T_TIE:
                    if (best_ms < 0 or ms[k] < best_ms
                            or (ms[k] == best_ms and t < best_t)
                            or (ms[k] == best_ms and t == best_t and k < best_k)):
                        best_ms = ms[k]
                        best_t = t
                        best_k = k
    t_out[0] = best_t
    k_out[0] = best_k
    return best_ms


def integrate_block(double x1, double x2, int cur_ms, gauss, max_use,
                    int pot_id, pf, pi_params, idx, double dt, double noise_coef,
                    bint torus):
    """Same contract as milestoning._kernel.pure.integrate_block."""
    cdef double[:, ::1] gz = gauss
    cdef const double[::1] pf_v = pf
    cdef const long long[::1] pi_v = pi_params
    cdef const double[::1] ax = idx.ax
    cdef const double[::1] ay = idx.ay
    cdef const double[::1] bx = idx.bx
    cdef const double[::1] by = idx.by
    cdef const int[::1] ms = idx.ms
    cdef const int[::1] bin_start = idx.bin_start
    cdef const int[::1] bin_items = idx.bin_items
    cdef const double[::1] shift_x = idx.shift_x
    cdef const double[::1] shift_y = idx.shift_y
    cdef HashGeom hg
    hg.x0 = idx.x0
    hg.y0 = idx.y0
    hg.inv_bw = idx.inv_bw
    hg.inv_bh = idx.inv_bh
    hg.nx = idx.nx
    hg.ny = idx.ny

    cdef int n = min(int(max_use), gz.shape[0])
    cdef int used = 0
    cdef int k, hit_ms, status
    cdef int hit_k = -1
    cdef double g1 = 0.0
    cdef double g2 = 0.0
    cdef double qx, qy, hit_t, hx, hy
    cdef const double* pf_p = NULL
    cdef const long long* pi_p = NULL
    if pf_v.shape[0] > 0:
        pf_p = &pf_v[0]
    if pi_v.shape[0] > 0:
        pi_p = &pi_v[0]

    status = C_RUNNING
    hit_ms = -1
    with nogil:
        for k in range(n):
            c_gradient(pot_id, pf_p, pi_p, x1, x2, &g1, &g2)
            qx = x1 - g1 * dt + noise_coef * gz[k, 0]
            qy = x2 - g2 * dt + noise_coef * gz[k, 1]
            used += 1
            if not (isfinite(qx) and isfinite(qy)):
                status = C_BLOWUP
                x1 = qx
                x2 = qy
                break
            if torus and (fabs(qx - x1) >= 0.5 or fabs(qy - x2) >= 0.5):
                status = C_STEP_TOO_LARGE
                x1 = qx
                x2 = qy
                break
            hit_ms = c_query_crossing(x1, x2, qx, qy, cur_ms,
                                      &ax[0], &ay[0], &bx[0], &by[0],
                                      &ms[0], &bin_start[0], &bin_items[0], hg,
                                      &hit_t, &hit_k)
            if hit_ms >= 0:
                # subtract the hit copy's integer shift: base-tile coordinates
                # without a wrap (which could round x=1-eps onto the wrong edge)
                hx = x1 + hit_t * (qx - x1) - shift_x[hit_k]
                hy = x2 + hit_t * (qy - x2) - shift_y[hit_k]
                status = C_CROSSED
                x1 = hx
                x2 = hy
                break
            if torus:
                x1 = qx - floor(qx)
                x2 = qy - floor(qy)
            else:
                x1 = qx
                x2 = qy
    if status != C_CROSSED:
        hit_ms = -1
    return status, used, x1, x2, hit_ms
