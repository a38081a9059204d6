"""Milestone partitions and first-crossing detection.

Milestones are polyline (segment-list) objects so the crossing code is
uniform across Voronoi-edge, torus-grid and level-set partitions.  A
spatial hash over the segments (replicated across the 3x3 tile
neighborhood on the torus) feeds both the reference crossing routine
here and the compiled kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

ROLE_REACTANT = "reactant"
ROLE_PRODUCT = "product"
ROLE_INTERIOR = "interior"

ON_MILESTONE_TOL = 1e-12
# Crossings whose segment parameters differ by less than this are ties,
# resolved by lowest milestone index.
T_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Milestone:
    index: int
    segments: np.ndarray  # (k, 4) rows (ax, ay, bx, by)
    role: str = ROLE_INTERIOR

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=np.float64).reshape(-1, 4)
        object.__setattr__(self, "segments", seg)
        if seg.shape[0] == 0:
            raise ValueError(f"milestone {self.index} has no segments")
        lengths = np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])
        if np.any(lengths <= 0):
            raise ValueError(f"milestone {self.index} has a degenerate segment")
        seg.flags.writeable = False

    @property
    def total_length(self) -> float:
        s = self.segments
        return float(np.sum(np.hypot(s[:, 2] - s[:, 0], s[:, 3] - s[:, 1])))


@dataclass(frozen=True)
class Crossing:
    milestone_index: int
    point: tuple
    segment_parameter: float


@dataclass(frozen=True)
class RhoSpec:
    """Reactant distribution: a point mass or uniform over the reactant segments."""

    kind: str = "uniform"  # uniform | point
    point: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "point"):
            raise ValueError(f"unknown rho kind {self.kind!r}")
        if self.kind == "point" and (self.point is None or len(self.point) != 2):
            raise ValueError("point-mass rho needs a 2-vector")


class SegmentIndex:
    """Flat segment arrays plus a uniform spatial hash, kernel-ready.

    On the torus every segment is stored 9 times (integer shifts in
    {-1,0,1}^2) so a pre-wrap displacement from a wrapped position is
    tested against the right periodic copies.  shift_x/shift_y record each
    copy's offset; subtracting it maps a hit point back to the base tile.
    """

    def __init__(self, ax, ay, bx, by, ms, shift_x, shift_y):
        self.ax, self.ay, self.bx, self.by = ax, ay, bx, by
        self.ms = ms
        self.shift_x = shift_x
        self.shift_y = shift_y
        n = len(ax)
        lo_x = min(ax.min(), bx.min()) - 1e-9
        hi_x = max(ax.max(), bx.max()) + 1e-9
        lo_y = min(ay.min(), by.min()) - 1e-9
        hi_y = max(ay.max(), by.max()) + 1e-9
        nb = max(8, min(128, 2 * int(math.ceil(math.sqrt(n)))))
        self.nx = self.ny = nb
        self.x0, self.y0 = lo_x, lo_y
        self.inv_bw = nb / (hi_x - lo_x)
        self.inv_bh = nb / (hi_y - lo_y)
        bins = [[] for _ in range(nb * nb)]
        for k in range(n):
            i0, i1 = sorted((self._bin_x(ax[k]), self._bin_x(bx[k])))
            j0, j1 = sorted((self._bin_y(ay[k]), self._bin_y(by[k])))
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    bins[i * nb + j].append(k)
        counts = np.array([len(b) for b in bins], dtype=np.int32)
        self.bin_start = np.zeros(nb * nb + 1, dtype=np.int32)
        np.cumsum(counts, out=self.bin_start[1:])
        self.bin_items = np.fromiter(
            (k for b in bins for k in b), dtype=np.int32, count=int(counts.sum())
        )

    def _bin_x(self, x):
        return min(self.nx - 1, max(0, int((x - self.x0) * self.inv_bw)))

    def _bin_y(self, y):
        return min(self.ny - 1, max(0, int((y - self.y0) * self.inv_bh)))


@dataclass(eq=False)
class Partition:
    milestones: list
    adjacency: list  # list of frozenset, symmetric
    reactant_index: int
    product_index: int
    rho: RhoSpec
    domain: str = "plane"
    bbox: tuple | None = None
    _index: SegmentIndex | None = field(default=None, repr=False)

    def __post_init__(self):
        m = len(self.milestones)
        if m < 2:
            raise ValueError("need at least two milestones")
        if not (0 <= self.reactant_index < m and 0 <= self.product_index < m):
            raise ValueError("reactant/product index out of range")
        if self.reactant_index == self.product_index:
            raise ValueError("reactant and product must differ")
        for i, mil in enumerate(self.milestones):
            if mil.index != i:
                raise ValueError("milestone indices must be 0..m-1 in order")
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i not in self.adjacency[j]:
                    raise ValueError("adjacency is not symmetric")
        _check_pairwise_overlaps(self.milestones)

    @property
    def m(self) -> int:
        return len(self.milestones)

    def segment_index(self) -> SegmentIndex:
        if self._index is None:
            rows, ms, shx, shy = [], [], [], []
            shifts = (
                [(sx, sy) for sx in (-1.0, 0.0, 1.0) for sy in (-1.0, 0.0, 1.0)]
                if self.domain == "torus"
                else [(0.0, 0.0)]
            )
            for mil in self.milestones:
                for sx, sy in shifts:
                    s = mil.segments + np.array([sx, sy, sx, sy])
                    rows.append(s)
                    ms.extend([mil.index] * len(s))
                    shx.extend([sx] * len(s))
                    shy.extend([sy] * len(s))
            seg = np.ascontiguousarray(np.concatenate(rows))
            self._index = SegmentIndex(
                np.ascontiguousarray(seg[:, 0]),
                np.ascontiguousarray(seg[:, 1]),
                np.ascontiguousarray(seg[:, 2]),
                np.ascontiguousarray(seg[:, 3]),
                np.asarray(ms, dtype=np.int32),
                np.asarray(shx, dtype=np.float64),
                np.asarray(shy, dtype=np.float64),
            )
        return self._index


def _check_pairwise_overlaps(milestones):
    """Segments of distinct milestones may share at most isolated points."""
    segs, owner = [], []
    for mil in milestones:
        for s in mil.segments:
            segs.append(s)
            owner.append(mil.index)
    segs = np.asarray(segs)
    order = np.argsort(segs[:, [0, 2]].min(axis=1), kind="stable")
    for a_pos in range(len(order)):
        i = order[a_pos]
        xi_hi = max(segs[i, 0], segs[i, 2]) + 1e-9
        for b_pos in range(a_pos + 1, len(order)):
            j = order[b_pos]
            if min(segs[j, 0], segs[j, 2]) > xi_hi:
                break
            if owner[i] == owner[j]:
                continue
            if _collinear_overlap(segs[i], segs[j]) > 1e-9:
                raise ValueError(
                    f"milestones {owner[i]} and {owner[j]} overlap along a segment"
                )


def _collinear_overlap(s, t):
    rx, ry = s[2] - s[0], s[3] - s[1]
    len_r = math.hypot(rx, ry)
    ux, uy = rx / len_r, ry / len_r
    d1 = abs((t[0] - s[0]) * uy - (t[1] - s[1]) * ux)
    d2 = abs((t[2] - s[0]) * uy - (t[3] - s[1]) * ux)
    if d1 > 1e-9 or d2 > 1e-9:
        return 0.0
    p0 = (t[0] - s[0]) * ux + (t[1] - s[1]) * uy
    p1 = (t[2] - s[0]) * ux + (t[3] - s[1]) * uy
    lo, hi = min(p0, p1), max(p0, p1)
    return max(0.0, min(hi, len_r) - max(lo, 0.0))


def point_on_milestone(point, milestone: Milestone, tol=1e-9) -> bool:
    px, py = float(point[0]), float(point[1])
    for ax, ay, bx, by in milestone.segments:
        sx, sy = bx - ax, by - ay
        ss = sx * sx + sy * sy
        u = ((px - ax) * sx + (py - ay) * sy) / ss
        u = min(1.0, max(0.0, u))
        if math.hypot(px - (ax + u * sx), py - (ay + u * sy)) <= tol:
            return True
    return False


def detect_crossing(x_prev, x_next, current_milestone: int, partition: Partition):
    """First crossing of the displacement segment with any other milestone.

    Returns the minimal-parameter intersection (ties within 1e-12 resolve to
    the lowest milestone index), or None.  On the torus the caller supplies
    the unwrapped segment; x_prev is expected wrapped to the base tile.

    Brute force over every milestone segment: this is the reference the
    compiled kernels are tested against.
    """
    from ._kernel import pure

    px, py = float(x_prev[0]), float(x_prev[1])
    qx, qy = float(x_next[0]), float(x_next[1])
    idx = partition.segment_index()
    best = None  # (ms, t, k)
    tmin = math.inf
    hits = []
    for k in range(len(idx.ax)):
        if idx.ms[k] == current_milestone:
            continue
        t = pure.seg_hit(px, py, qx, qy, idx.ax[k], idx.ay[k], idx.bx[k], idx.by[k])
        if t >= 0.0:
            hits.append((t, int(idx.ms[k]), k))
            tmin = min(tmin, t)
    for t, ms, k in hits:
        if t <= tmin + T_TIE_TOL and (best is None or (ms, t, k) < best):
            best = (ms, t, k)
    if best is None:
        return None
    ms, t, k = best
    # hit points on periodic copies map back to the base tile via the
    # copy's integer shift (never re-wrapped, so no 1.0-vs-0.0 edge cases)
    point = (px + t * (qx - px) - idx.shift_x[k], py + t * (qy - py) - idx.shift_y[k])
    return Crossing(milestone_index=ms, point=point, segment_parameter=t)


def sample_rho(partition: Partition, rng) -> np.ndarray:
    """Draw one start point from the reactant distribution (one uniform)."""
    if partition.rho.kind == "point":
        return np.asarray(partition.rho.point, dtype=np.float64)
    mil = partition.milestones[partition.reactant_index]
    lengths = np.hypot(
        mil.segments[:, 2] - mil.segments[:, 0], mil.segments[:, 3] - mil.segments[:, 1]
    )
    u = float(rng.random()) * float(lengths.sum())
    for k, ((ax, ay, bx, by), ln) in enumerate(zip(mil.segments, lengths)):
        if u <= ln or k == len(lengths) - 1:
            lam = min(1.0, u / ln)
            return np.array([ax + lam * (bx - ax), ay + lam * (by - ay)])
        u -= ln
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Builders


def build_level_partition(levels, bbox, rho: RhoSpec | None = None) -> Partition:
    """Vertical segment milestones at ascending x1 levels; first is the
    reactant, last the product."""
    levels = [float(v) for v in levels]
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly ascending")
    (xmin, ymin), (xmax, ymax) = _norm_bbox(bbox)
    milestones = []
    for i, lv in enumerate(levels):
        role = ROLE_REACTANT if i == 0 else ROLE_PRODUCT if i == len(levels) - 1 else ROLE_INTERIOR
        milestones.append(Milestone(i, np.array([[lv, ymin, lv, ymax]]), role))
    adjacency = [
        frozenset(j for j in (i - 1, i + 1) if 0 <= j < len(levels))
        for i in range(len(levels))
    ]
    if rho is None:
        rho = RhoSpec(kind="point", point=(levels[0], 0.5 * (ymin + ymax)))
    return Partition(milestones, adjacency, 0, len(levels) - 1, rho,
                     domain="plane", bbox=((xmin, ymin), (xmax, ymax)))


def build_grid_partition(n: int, torus: bool = True,
                         reactant_cell=(0, 0), reactant_side="left",
                         product_cell=None, product_side="left",
                         rho: RhoSpec | None = None) -> Partition:
    """Uniform square mesh on the unit cell: every cell edge is a milestone.

    On the torus that is 2 n^2 milestones (n^2 vertical + n^2 horizontal).
    Reactant and product are the designated sides of two chosen cells.
    """
    if n < 2:
        raise ValueError("grid n must be >= 2")
    h = 1.0 / n
    segs = {}
    if torus:
        for i in range(n):
            for j in range(n):
                segs[("v", i, j)] = (i * h, j * h, i * h, (j + 1) * h)
        for j in range(n):
            for i in range(n):
                segs[("h", i, j)] = (i * h, j * h, (i + 1) * h, j * h)
    else:
        for i in range(n + 1):
            for j in range(n):
                segs[("v", i, j)] = (i * h, j * h, i * h, (j + 1) * h)
        for j in range(n + 1):
            for i in range(n):
                segs[("h", i, j)] = (i * h, j * h, (i + 1) * h, j * h)

    keys = sorted(segs.keys())
    key_index = {k: i for i, k in enumerate(keys)}

    def cell_edges(ci, cj):
        right = ((ci + 1) % n) if torus else ci + 1
        top = ((cj + 1) % n) if torus else cj + 1
        return [("v", ci, cj), ("v", right, cj), ("h", ci, cj), ("h", ci, top)]

    if product_cell is None:
        product_cell = (n // 2, n // 2)
    side_pick = {"left": 0, "right": 1, "bottom": 2, "top": 3}
    for side in (reactant_side, product_side):
        if side not in side_pick:
            raise ConfigError("partition", f"unknown cell side {side!r}")
    r_key = cell_edges(*reactant_cell)[side_pick[reactant_side]]
    p_key = cell_edges(*product_cell)[side_pick[product_side]]
    if r_key == p_key:
        raise ConfigError("partition", "reactant and product designate the same edge")

    milestones = []
    for k in keys:
        i = key_index[k]
        role = ROLE_REACTANT if k == r_key else ROLE_PRODUCT if k == p_key else ROLE_INTERIOR
        milestones.append(Milestone(i, np.array([segs[k]]), role))

    adjacency = [set() for _ in keys]
    cells = [(ci, cj) for ci in range(n) for cj in range(n)]
    for ci, cj in cells:
        edges = [key_index[k] for k in cell_edges(ci, cj)]
        for a in edges:
            for b in edges:
                if a != b:
                    adjacency[a].add(b)
    adjacency = [frozenset(s) for s in adjacency]

    if rho is None:
        rho = RhoSpec(kind="uniform")
    return Partition(milestones, adjacency, key_index[r_key], key_index[p_key], rho,
                     domain="torus" if torus else "plane",
                     bbox=((0.0, 0.0), (1.0, 1.0)))


def build_voronoi_partition(centers, bbox, reactant_pair, product_pair,
                            rho: RhoSpec | None = None) -> Partition:
    """Milestones are the shared Voronoi edges between cells, clipped to bbox.

    Each edge is built directly by clipping the (i, j) bisector line against
    the bbox and against every other center's half-plane, so milestone points
    are equidistant from their two generators by construction.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != 2 or len(centers) < 2:
        raise ValueError("need at least two 2-D centers")
    (xmin, ymin), (xmax, ymax) = _norm_bbox(bbox)
    for cx, cy in centers:
        if not (xmin <= cx <= xmax and ymin <= cy <= ymax):
            raise ValueError(f"center ({cx}, {cy}) outside bbox")
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if np.hypot(*(centers[i] - centers[j])) < 1e-12:
                raise ValueError(f"duplicate centers {i} and {j}")

    diag = math.hypot(xmax - xmin, ymax - ymin)
    edges = {}
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            seg = _voronoi_edge(centers, i, j, (xmin, ymin, xmax, ymax), diag)
            if seg is not None:
                edges[(i, j)] = seg

    pair_keys = sorted(edges.keys())
    pair_index = {p: k for k, p in enumerate(pair_keys)}
    r_pair = tuple(sorted(reactant_pair))
    p_pair = tuple(sorted(product_pair))
    for name, pair in (("reactant_pair", r_pair), ("product_pair", p_pair)):
        if pair not in pair_index:
            raise ConfigError("partition", f"{name} {pair} has no shared Voronoi edge")

    milestones = []
    for pair in pair_keys:
        k = pair_index[pair]
        role = ROLE_REACTANT if pair == r_pair else ROLE_PRODUCT if pair == p_pair else ROLE_INTERIOR
        milestones.append(Milestone(k, np.array([edges[pair]]), role))
    adjacency = [set() for _ in pair_keys]
    for a_pos, pa in enumerate(pair_keys):
        for b_pos in range(a_pos + 1, len(pair_keys)):
            pb = pair_keys[b_pos]
            if set(pa) & set(pb):
                adjacency[a_pos].add(b_pos)
                adjacency[b_pos].add(a_pos)
    adjacency = [frozenset(s) for s in adjacency]

    if rho is None:
        rho = RhoSpec(kind="uniform")
    return Partition(milestones, adjacency, pair_index[r_pair], pair_index[p_pair], rho,
                     domain="plane", bbox=((xmin, ymin), (xmax, ymax)))


def _voronoi_edge(centers, i, j, box, diag):
    xmin, ymin, xmax, ymax = box
    ci, cj = centers[i], centers[j]
    mid = 0.5 * (ci + cj)
    d = cj - ci
    u = np.array([-d[1], d[0]]) / np.hypot(*d)
    lo, hi = -4.0 * diag, 4.0 * diag

    def clip_halfplane(a, c):
        # keep {x : a.x <= c} for points x = mid + t u
        nonlocal lo, hi
        s = a @ u
        r = c - a @ mid
        if abs(s) < 1e-15:
            if r < 0:
                lo, hi = 1.0, 0.0
        elif s > 0:
            hi = min(hi, r / s)
        else:
            lo = max(lo, r / s)

    clip_halfplane(np.array([1.0, 0.0]), xmax)
    clip_halfplane(np.array([-1.0, 0.0]), -xmin)
    clip_halfplane(np.array([0.0, 1.0]), ymax)
    clip_halfplane(np.array([0.0, -1.0]), -ymin)
    for k in range(len(centers)):
        if k in (i, j):
            continue
        ck = centers[k]
        clip_halfplane(2.0 * (ck - ci), ck @ ck - ci @ ci)
    if hi - lo <= 1e-12 * diag:
        return None
    p = mid + lo * u
    q = mid + hi * u
    return (p[0], p[1], q[0], q[1])


def _norm_bbox(bbox):
    (xmin, ymin), (xmax, ymax) = bbox
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("degenerate bbox")
    return (float(xmin), float(ymin)), (float(xmax), float(ymax))
