"""Radial projections, direction sets, and measure-carrying refinements.

The angle half of this module turns planar grid sets into subsets of the
angle circle: conservative covers of radial projections, direction sets of
ordered cell pairs, and least-squares exponent fits over covering counts.
The measure half carries weighted cell measures with a declared ball-growth
bound, evaluates their tube masses, and runs a per-scale refinement that
removes support-cell pairs whose connecting line picks up too much mass.
The refinement returns a pair mask together with a certificate that was
checked exhaustively, pair by pair and scale by scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dyadic import as_fraction, check_scale
from .errors import (
    DeltaGridError,
    DomainError,
    HypothesisViolationError,
    InvalidScaleError,
    ResolutionMismatchError,
)
from .grid import GridSet1D, GridSet2D, covering_number, gridset_from_text, gridset_to_text
from .tubes import Tube, _exact_member, _strip_params

__all__ = [
    "DiscreteMeasure2D",
    "ExponentReport",
    "GoodPairMask",
    "TubeConditionCertificate",
    "TubeConditionParams",
    "TubeScaleReport",
    "TubeViolation",
    "ball_condition_check",
    "direction_set",
    "exponent_fit",
    "load_measure",
    "measure_from_text",
    "measure_to_text",
    "pinned_exponent",
    "radial_project",
    "save_measure",
    "tube_condition_refine",
    "tube_mass",
]


# ----------------------------------------------------------------------
# angle covers


def _mark_arc(cells: np.ndarray, angles: Sequence[float], n: int) -> None:
    """Mark the cells of the n-cell angle circle met by the closed arc
    spanned by the given angles (radians, any branch)."""
    base = math.atan2(sum(math.sin(t) for t in angles), sum(math.cos(t) for t in angles))
    rel = [(t - base + math.pi) % (2 * math.pi) - math.pi for t in angles]
    t0 = (base + min(rel)) / (2 * math.pi) % 1.0
    t1 = (base + max(rel)) / (2 * math.pi) % 1.0
    k0 = int(t0 * n)
    k1 = int(t1 * n)
    if k1 < k0:
        k1 += n
    for k in range(k0, k1 + 1):
        cells[k % n] = True


def _min_dist2(px: Fraction, py: Fraction, s: GridSet2D) -> Optional[Fraction]:
    """Exact squared distance from a point to the nearest member cell square."""
    d = s.delta
    best: Optional[Fraction] = None
    zero = Fraction(0)
    for i, j in s.indices.tolist():
        x0 = s.lo[0] + i * d
        y0 = s.lo[1] + j * d
        dx = max(x0 - px, px - (x0 + d), zero)
        dy = max(y0 - py, py - (y0 + d), zero)
        v = dx * dx + dy * dy
        if best is None or v < best:
            best = v
    return best


def radial_project(y: Tuple, s: GridSet2D, m_angle: Optional[int] = None) -> GridSet1D:
    """Angle cells subtended by the cells of ``s`` as seen from ``y``.

    The result lives on the full angle circle [0, 1) in turn units, at
    resolution ``m_angle`` (default: the resolution of ``s``). Every
    direction from ``y`` into a member cell lands in a marked angle cell;
    each cell contributes the closed arc spanned by its four corners.

    Raises DomainError when ``y`` comes within one cell width of ``s``.
    """
    yx, yy = as_fraction(y[0]), as_fraction(y[1])
    ma = s.m if m_angle is None else check_scale(m_angle)
    n = 2**ma
    d = s.delta
    if not s.is_empty:
        gap2 = _min_dist2(yx, yy, s)
        if gap2 < d * d:
            raise DomainError(f"viewpoint ({yx}, {yy}) is closer than delta to the set")
    cells = np.zeros(n, dtype=bool)
    for i, j in s.indices.tolist():
        x0 = s.lo[0] + i * d
        y0 = s.lo[1] + j * d
        corners = [(x0, y0), (x0 + d, y0), (x0, y0 + d), (x0 + d, y0 + d)]
        angles = [math.atan2(float(cy - yy), float(cx - yx)) for cx, cy in corners]
        _mark_arc(cells, angles, n)
    return GridSet1D(ma, Fraction(0), Fraction(1), cells)


def direction_set(e: GridSet2D) -> GridSet1D:
    """Angle cells met by directions between distinct cells of ``e``.

    Each ordered pair of member cells contributes the arc spanned by the
    corner directions of the difference rectangle, so the output is
    antipodally symmetric. Corners that land exactly on the origin (the
    touching corner of diagonal neighbors) subtend no direction and are
    skipped.
    """
    if e.count < 2:
        raise DomainError(f"direction_set needs at least 2 cells, got {e.count}")
    n = 2**e.m
    d = 1.0 / n
    cells = np.zeros(n, dtype=bool)
    idx = [tuple(p) for p in e.indices.tolist()]
    for i1, j1 in idx:
        for i2, j2 in idx:
            if (i1, j1) == (i2, j2):
                continue
            dx, dy = (i1 - i2) * d, (j1 - j2) * d
            corners = [
                (dx - d, dy - d),
                (dx + d, dy - d),
                (dx - d, dy + d),
                (dx + d, dy + d),
            ]
            angles = [math.atan2(cy, cx) for cx, cy in corners if (cx, cy) != (0.0, 0.0)]
            _mark_arc(cells, angles, n)
    return GridSet1D(e.m, Fraction(0), Fraction(1), cells)


# ----------------------------------------------------------------------
# exponent fits


@dataclass(frozen=True)
class ExponentReport:
    """Least-squares fit of log(count) against log(1/scale).

    residual is the largest absolute deviation of log(count) from the
    fitted line, in log units.
    """

    slope: float
    intercept: float
    residual: float
    points: Tuple[Tuple[float, float], ...]


def exponent_fit(counts: Iterable[Tuple]) -> ExponentReport:
    """Fit a growth exponent through covering counts.

    ``counts`` holds (scale, count) pairs with at least three distinct
    positive scales and positive counts. Deterministic.
    """
    pts = [(float(r), float(c)) for r, c in counts]
    if any(r <= 0 for r, _ in pts):
        raise DomainError("scales must be positive")
    if any(c <= 0 for _, c in pts):
        raise DomainError("counts must be positive")
    if len({r for r, _ in pts}) < 3:
        raise DomainError(f"need at least 3 distinct scales, got {len(pts)} points")
    x = np.log([1.0 / r for r, _ in pts])
    ylog = np.log([c for _, c in pts])
    slope, intercept = np.polyfit(x, ylog, 1)
    residual = float(np.max(np.abs(ylog - (slope * x + intercept))))
    return ExponentReport(float(slope), float(intercept), residual, tuple(pts))


def pinned_exponent(y: Tuple, e: GridSet2D, scales: Sequence) -> ExponentReport:
    """Exponent fit of the covering counts of radial_project(y, e).

    The viewpoint must stay at distance at least 1/4 from the set so the
    projection geometry stays nondegenerate across all requested scales.
    """
    yx, yy = as_fraction(y[0]), as_fraction(y[1])
    if e.is_empty:
        raise DomainError("pinned_exponent of an empty set")
    if _min_dist2(yx, yy, e) < Fraction(1, 16):
        raise DomainError(f"viewpoint ({yx}, {yy}) closer than 1/4 to the set")
    proj = radial_project((yx, yy), e)
    return exponent_fit([(r, covering_number(proj, r)) for r in scales])


# ----------------------------------------------------------------------
# discrete measures

_WEIGHT_TOL = 2.0**-40


@dataclass(frozen=True, eq=False)
class DiscreteMeasure2D:
    """Probability weights on the member cells of a planar grid set.

    ``weights`` runs parallel to ``support.indices`` (row-major cell
    order). ``s`` and ``c`` declare the ball-growth bound
    mass(B(x, r)) <= c * r**s; ball_condition_check measures the constant
    actually attained.
    """

    support: GridSet2D
    weights: np.ndarray
    s: float
    c: float

    def __post_init__(self):
        if self.support.is_empty:
            raise DomainError("measure needs a nonempty support")
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or len(w) != self.support.count:
            raise DomainError(
                f"need one weight per support cell: {w.shape} vs {self.support.count} cells"
            )
        if not np.all(w > 0):
            raise DomainError("weights must be strictly positive on the support")
        total = float(w.sum())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise DomainError(f"weights sum to {total!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "c", float(self.c))
        if not 0 < self.s <= 2:
            raise DomainError(f"ball exponent s={self.s} outside (0, 2]")
        if not self.c > 0:
            raise DomainError(f"ball constant c={self.c} must be positive")

    @classmethod
    def uniform(cls, support: GridSet2D, s: float, c: Optional[float] = None) -> "DiscreteMeasure2D":
        """Equal weight on every cell; with ``c`` omitted, the observed
        ball constant at exponent ``s`` is declared."""
        if support.is_empty:
            raise DomainError("measure needs a nonempty support")
        w = np.full(support.count, 1.0 / support.count)
        mu = cls(support, w, s, 1.0 if c is None else c)
        if c is None:
            mu = cls(support, w, s, ball_condition_check(mu, s))
        return mu

    def weight_grid(self) -> np.ndarray:
        """Weights as a dense (nx, ny) array aligned with support.cells."""
        g = np.zeros(self.support.cells.shape, dtype=np.float64)
        idx = self.support.indices
        g[idx[:, 0], idx[:, 1]] = self.weights
        return g


def measure_to_text(mu: DiscreteMeasure2D) -> str:
    """Render a measure: the support grid set, a ``measure s=.. c=..``
    line, then one ``i j weight`` line per support cell."""
    out = [gridset_to_text(mu.support).rstrip("\n")]
    out.append(f"measure s={mu.s!r} c={mu.c!r}")
    for (i, j), w in zip(mu.support.indices.tolist(), mu.weights.tolist()):
        out.append(f"{i} {j} {w!r}")
    return "\n".join(out) + "\n"


def measure_from_text(text: str) -> DiscreteMeasure2D:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    split = next((k for k, ln in enumerate(lines) if ln.startswith("measure ")), None)
    if split is None:
        raise DomainError("not a measure: missing 'measure' line")
    support = gridset_from_text("\n".join(lines[:split]))
    if not isinstance(support, GridSet2D):
        raise DomainError("measure support must be a planar grid set")
    try:
        fields = dict(p.split("=", 1) for p in lines[split].split()[1:])
        s, c = float(fields["s"]), float(fields["c"])
    except (KeyError, ValueError) as exc:
        raise DomainError(f"malformed measure line: {lines[split]!r}") from exc
    by_cell = {}
    for ln in lines[split + 1 :]:
        parts = ln.split()
        if len(parts) != 3:
            raise DomainError(f"malformed weight line: {ln!r}")
        by_cell[(int(parts[0]), int(parts[1]))] = float(parts[2])
    idx = [tuple(p) for p in support.indices.tolist()]
    if set(by_cell) != set(idx):
        raise DomainError("weight lines do not match the support cells")
    return DiscreteMeasure2D(support, np.array([by_cell[t] for t in idx]), s, c)


def save_measure(path, mu: DiscreteMeasure2D) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(measure_to_text(mu))


def load_measure(path) -> DiscreteMeasure2D:
    with open(path, "r", encoding="ascii") as fh:
        return measure_from_text(fh.read())


def ball_condition_check(mu: DiscreteMeasure2D, s) -> float:
    """Observed ball-growth constant of ``mu`` at exponent ``s``.

    Scans every anchored square window [a, a+r) x [b, b+r) with side
    r = w * delta, w running over powers of two up to the support extent
    and (a, b) over all cells, and returns the largest mass / r**s found.
    """
    sf = float(s)
    if not 0 < sf <= 2:
        raise DomainError(f"ball exponent s={sf} outside (0, 2]")
    g = mu.weight_grid()
    nx, ny = g.shape
    pref = np.zeros((nx + 1, ny + 1))
    pref[1:, 1:] = np.cumsum(np.cumsum(g, axis=0), axis=1)
    d = float(mu.support.delta)
    ax = np.arange(nx)
    ay = np.arange(ny)
    best = 0.0
    w = 1
    while True:
        xhi = np.minimum(ax + w, nx)
        yhi = np.minimum(ay + w, ny)
        sums = (
            pref[xhi[:, None], yhi[None, :]]
            - pref[xhi[:, None], ay[None, :]]
            - pref[ax[:, None], yhi[None, :]]
            + pref[ax[:, None], ay[None, :]]
        )
        best = max(best, float(sums.max()) / (w * d) ** sf)
        if w >= max(nx, ny):
            return best
        w *= 2


def tube_mass(mu: DiscreteMeasure2D, t: Tube) -> float:
    """Total weight of the support cells met by the tube.

    Same membership rule as rasterize_tube: a closed cell square counts
    when it meets the open strip of half-width ``radius``. Cells whose
    float margin sits within 1e-9 of the cutoff are re-decided exactly.
    """
    xs, ys = mu.support.member_centers()
    half = float(mu.support.delta) / 2.0
    nx, ny, cn, rprime = _strip_params(float(t.a), float(t.b), float(t.c), float(t.radius), half)
    tv = np.abs(nx * xs + (ny * ys + cn))
    inside = tv < rprime
    near = np.abs(tv - rprime) <= 1e-9
    if near.any():
        r2ab = t.radius * t.radius * (t.a * t.a + t.b * t.b)
        idx = mu.support.indices
        for k in np.flatnonzero(near):
            cx, cy = mu.support.cell_center(int(idx[k, 0]), int(idx[k, 1]))
            inside[k] = _exact_member(t.a, t.b, t.c, r2ab, cx, cy, mu.support.delta / 2)
    return float(mu.weights[inside].sum())


# ----------------------------------------------------------------------
# tube-condition refinement


@dataclass(frozen=True)
class TubeConditionParams:
    """Knobs for tube_condition_refine.

    eta: mass exponent; a tube of width delta_k is heavy past delta_k**eta.
    rho: separation exponent driving association and angular removal.
    eps, k0, kmax: the hyperdyadic scale ladder 2**-round((1+eps)**k).
    m0: optional upfront cap on the mass of any single tube at the coarse
        lag scale; None skips the check.
    """

    eta: float
    rho: float
    eps: float
    k0: int
    kmax: int
    m0: Optional[float] = None

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if not 0 < self.rho < 1:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not 1 <= self.k0 <= self.kmax:
            raise DomainError(f"need 1 <= k0 <= kmax, got k0={self.k0} kmax={self.kmax}")
        if self.m0 is not None and not self.m0 > 0:
            raise DomainError(f"m0 must be positive, got {self.m0}")
        if self.gamma < 1:
            raise DomainError(f"rho={self.rho}, eps={self.eps} give ladder lag {self.gamma} < 1")

    @property
    def gamma(self) -> int:
        """Ladder lag: delta_k**(rho/2) is comparable to the scale gamma
        rungs coarser."""
        return round(math.log(2.0 / self.rho) / math.log(1.0 + self.eps))

    def ladder(self) -> List[Tuple[int, Fraction]]:
        """(k, delta_k) rungs for k0..kmax, deduplicated and decreasing."""
        out: List[Tuple[int, Fraction]] = []
        for k in range(self.k0, self.kmax + 1):
            scale = Fraction(1, 2 ** round((1.0 + self.eps) ** k))
            if not out or scale < out[-1][1]:
                out.append((k, scale))
        return out

    def lag_scale(self) -> Fraction:
        """The coarse scale delta_{k0 - gamma} used by the m0 check."""
        e = round((1.0 + self.eps) ** (self.k0 - self.gamma))
        return Fraction(1, 2 ** max(1, e))


@dataclass(frozen=True, eq=False)
class GoodPairMask:
    """Retained (x-cell, y-cell) pairs of two measure supports.

    Rows follow the first support's ``indices`` order, columns the
    second's. ``retained_mass`` is the product mass of the retained pairs.
    """

    m: int
    mask: np.ndarray
    retained_mass: float

    def __post_init__(self):
        mk = np.array(self.mask, dtype=bool)
        if mk.ndim != 2:
            raise DomainError("pair mask must be two-dimensional")
        mk.setflags(write=False)
        object.__setattr__(self, "mask", mk)

    def recomputed_mass(self, mu: DiscreteMeasure2D, nu: DiscreteMeasure2D) -> float:
        if self.mask.shape != (len(mu.weights), len(nu.weights)):
            raise DomainError(
                f"mask shape {self.mask.shape} does not index "
                f"{len(mu.weights)} x {len(nu.weights)} support cells"
            )
        return float(mu.weights @ self.mask.astype(np.float64) @ nu.weights)


@dataclass(frozen=True)
class TubeScaleReport:
    """Per-scale, per-side bookkeeping of one refinement pass.

    side names the measure whose tube mass was bounded; the flagged
    points live on the other support.
    """

    k: int
    delta: Fraction
    side: str
    n_tubes: int
    n_heavy: int
    n_candidates: int
    n_reps: int
    rep_bound: float
    n_flagged: int
    n_ambiguous: int
    pairs_removed: int


@dataclass(frozen=True)
class TubeViolation:
    """A retained pair whose connecting tube still exceeds the mass bound."""

    k: int
    delta: Fraction
    side: str
    x_cell: Tuple[int, int]
    y_cell: Tuple[int, int]
    mass: float
    threshold: float


@dataclass(frozen=True)
class TubeConditionCertificate:
    """Exhaustive re-verification of the retained pairs.

    Every retained pair was re-checked at every ladder scale against both
    measures; ``violations`` lists the failures, so ``ok`` means the mask
    delivers the tube-mass bound it promises.
    """

    params: TubeConditionParams
    scale_reports: Tuple[TubeScaleReport, ...]
    violations: Tuple[TubeViolation, ...]
    retained_mass: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _circ_dist(a, b):
    """Distance on the half-turn circle [0, 1) of line angles."""
    f = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(f, 1.0 - f)


def _support_gap2(a: GridSet2D, b: GridSet2D) -> float:
    """Squared distance between the nearest member cell squares.

    Exact for dyadic windows at desk scales: the axis gaps are dyadic
    floats, so the arithmetic below rounds nothing.
    """
    axs, ays = a.member_centers()
    bxs, bys = b.member_centers()
    dx = np.abs(axs[:, None] - bxs[None, :])
    dy = np.abs(ays[:, None] - bys[None, :])
    d = float(a.delta)
    dx = np.maximum(dx - d, 0.0)
    dy = np.maximum(dy - d, 0.0)
    return float((dx * dx + dy * dy).min())


def _pair_line(pa: Tuple[Fraction, Fraction], pb: Tuple[Fraction, Fraction], radius: Fraction) -> Tube:
    a = pa[1] - pb[1]
    b = pb[0] - pa[0]
    return Tube(a, b, -(a * pa[0] + b * pa[1]), radius)


class _SidePass:
    """One scale, one direction: bound att-mass tubes, flag wit points.

    The tube family is the angle grid (pitch delta in turn units) crossed
    with the offset grid (pitch delta, centered on the joint bounding box
    midpoint), at twice the nominal radius so that every width-delta tube
    lands inside a family tube up to the grid rounding.
    """

    def __init__(self, att: DiscreteMeasure2D, wit: DiscreteMeasure2D, dk: Fraction, p: TubeConditionParams):
        self.att, self.wit, self.dk, self.p = att, wit, dk, p
        self.d = float(dk)
        self.radius = 2.0 * self.d
        self.thr = self.d**p.eta
        self.rho_r = self.d**p.rho
        self.rho_half = self.d ** (p.rho / 2.0)
        self.n_ang = int(Fraction(1) / dk)

        lo0 = min(att.support.lo[0], wit.support.lo[0])
        lo1 = min(att.support.lo[1], wit.support.lo[1])
        hi0 = max(att.support.hi[0], wit.support.hi[0])
        hi1 = max(att.support.hi[1], wit.support.hi[1])
        self.p0 = (float((lo0 + hi0) / 2), float((lo1 + hi1) / 2))

        self.ax, self.ay = att.support.member_centers()
        self.bx, self.by = wit.support.member_centers()
        t = np.arange(self.n_ang) / self.n_ang
        self.t = t
        self.nx = -np.sin(np.pi * t)
        self.ny = np.cos(np.pi * t)
        half_grid = float(att.support.delta) / 2.0
        self.lever = (np.abs(self.nx) + np.abs(self.ny)) * half_grid
        off0 = self.nx * self.p0[0] + self.ny * self.p0[1]
        self.sa = self.nx[:, None] * self.ax[None, :] + self.ny[:, None] * self.ay[None, :] - off0[:, None]
        self.sw = self.nx[:, None] * self.bx[None, :] + self.ny[:, None] * self.by[None, :] - off0[:, None]

        lo = min(self.sa.min(), self.sw.min())
        hi = max(self.sa.max(), self.sw.max())
        self.jmin = math.floor(lo / self.d) - 5
        self.n_off = math.ceil(hi / self.d) + 5 - self.jmin + 1

    def masses(self) -> Tuple[np.ndarray, np.ndarray]:
        """Family tube masses and heaviness, (n_ang, n_off) arrays."""
        w = self.att.weights
        out = np.zeros((self.n_ang, self.n_off))
        for i in range(self.n_ang):
            q = (self.radius + self.lever[i]) / self.d
            sj = self.sa[i] / self.d
            jlo = np.floor(sj - q).astype(np.int64) + 1 - self.jmin
            jhi = np.ceil(sj + q).astype(np.int64) - 1 - self.jmin
            diff = np.zeros(self.n_off + 1)
            np.add.at(diff, jlo, w)
            np.subtract.at(diff, jhi + 1, w)
            out[i] = np.cumsum(diff)[:-1]
        return out, out > self.thr

    def member_mask(self, i: int, j: int) -> np.ndarray:
        """Att support cells met by family tube (i, j)."""
        o = (j + self.jmin) * self.d
        return np.abs(self.sa[i] - o) < self.radius + self.lever[i]

    def run(self) -> Tuple[np.ndarray, TubeScaleReport]:
        mass, heavy = self.masses()
        n_wit = len(self.bx)
        n_att = len(self.ax)

        # a tube passes through a point when its offset is within the
        # family radius, exactly two offset cells: indices [cl-2, fl+2]
        fl = np.floor(self.sw / self.d).astype(np.int64) - self.jmin
        cl = np.ceil(self.sw / self.d).astype(np.int64) - self.jmin
        through = np.zeros((self.n_ang, n_wit), dtype=bool)
        near_pts = np.zeros_like(heavy)
        for i in range(self.n_ang):
            hpref = np.concatenate(([0], np.cumsum(heavy[i])))
            lo = np.maximum(cl[i] - 2, 0)
            hi = np.minimum(fl[i] + 2, self.n_off - 1)
            through[i] = hpref[hi + 1] > hpref[lo]
            diff = np.zeros(self.n_off + 1, dtype=np.int64)
            np.add.at(diff, lo, 1)
            np.subtract.at(diff, hi + 1, 1)
            near_pts[i] = np.cumsum(diff)[:-1] > 0
        flagged = through.any(axis=0)

        pool = heavy & near_pts
        cand = [
            (-mass[i, j], i, j)
            for i, j in np.argwhere(pool).tolist()
        ]
        cand.sort()

        reps: List[Tuple[int, int]] = []
        rep_masks: List[np.ndarray] = []
        w = self.att.weights
        thr2 = self.d ** (2 * self.p.eta) / 2.0
        for _, i, j in cand:
            mk = self.member_mask(i, j)
            if all(float(w[mk & om].sum()) < thr2 for om in rep_masks):
                reps.append((i, j))
                rep_masks.append(mk)
        rep_bound = 2.0 * self.d**-self.p.eta
        if len(reps) > rep_bound + 1e-9:
            raise DeltaGridError(
                f"low-overlap representatives exceed their bound: {len(reps)} > {rep_bound}"
            )

        # association: the point sits inside the widened representative and
        # some heavy tube through the point is angle-close to it
        removal = np.zeros((n_att, n_wit), dtype=bool)
        n_ambiguous = 0
        if reps:
            assoc = np.zeros((len(reps), n_wit), dtype=bool)
            for r, (i, j) in enumerate(reps):
                o = (j + self.jmin) * self.d
                ok_pos = np.abs(self.sw[i] - o) <= self.rho_r
                near_ang = _circ_dist(self.t, self.t[i]) < self.rho_r
                ok_ang = through[near_ang].any(axis=0)
                assoc[r] = ok_pos & ok_ang & flagged
            ambiguous = np.zeros(n_wit, dtype=bool)
            for r1 in range(len(reps)):
                for r2 in range(r1 + 1, len(reps)):
                    sep = _circ_dist(self.t[reps[r1][0]], self.t[reps[r2][0]])
                    if sep > self.rho_half:
                        ambiguous |= assoc[r1] & assoc[r2]
            n_ambiguous = int(ambiguous.sum())
            removal[:, ambiguous] = True

            txy = (np.arctan2(self.by[None, :] - self.ay[:, None], self.bx[None, :] - self.ax[:, None]) / np.pi) % 1.0
            for r, (i, j) in enumerate(reps):
                cols = assoc[r] & ~ambiguous
                if cols.any():
                    removal[:, cols] |= _circ_dist(txy[:, cols], self.t[i]) <= self.rho_half

        report = TubeScaleReport(
            k=0,  # k, side, and pairs_removed are filled in by the caller
            delta=self.dk,
            side="",
            n_tubes=self.n_ang * self.n_off,
            n_heavy=int(heavy.sum()),
            n_candidates=len(cand),
            n_reps=len(reps),
            rep_bound=rep_bound,
            n_flagged=int(flagged.sum()),
            n_ambiguous=n_ambiguous,
            pairs_removed=0,
        )
        return removal, report


def _max_family_mass(att: DiscreteMeasure2D, other: DiscreteMeasure2D, r0: Fraction, p: TubeConditionParams) -> float:
    mass, _ = _SidePass(att, other, r0, p).masses()
    return float(mass.max())


def tube_condition_refine(
    mu: DiscreteMeasure2D, nu: DiscreteMeasure2D, p: TubeConditionParams
) -> Tuple[GoodPairMask, TubeConditionCertificate]:
    """Remove support-cell pairs whose connecting line is heavy at some scale.

    Walks the hyperdyadic ladder. At each scale, in both directions: scan
    the discrete tube family for heavy tubes, greedily pick a low-overlap
    set of representatives, drop the points tied to two well-separated
    representatives outright, and drop the pairs whose direction falls in
    the angular neighborhood of a representative tied to the point. The
    returned certificate re-verifies every retained pair at every scale
    with tube_mass, on both measures.
    """
    if mu.support.m != nu.support.m:
        raise ResolutionMismatchError(f"m={mu.support.m} vs m={nu.support.m}")
    if not mu.s * (1 - p.rho) > 2 * p.eta:
        raise HypothesisViolationError(
            f"need s_mu*(1-rho) > 2*eta: {mu.s}*(1-{p.rho}) = {mu.s * (1 - p.rho)} <= {2 * p.eta}"
        )
    if not nu.s * p.rho / 2 > 2 * p.eta:
        raise HypothesisViolationError(
            f"need s_nu*rho/2 > 2*eta: {nu.s}*{p.rho}/2 = {nu.s * p.rho / 2} <= {2 * p.eta}"
        )
    quarter = 1.0 / 16.0
    if _support_gap2(mu.support, nu.support) < quarter - 1e-12:
        raise HypothesisViolationError("supports come closer than 1/4")
    ladder = p.ladder()
    grid_delta = mu.support.delta
    for k, dk in ladder:
        if dk < grid_delta:
            raise InvalidScaleError(f"ladder scale {dk} (k={k}) is below the grid scale {grid_delta}")
    if p.m0 is not None:
        r0 = p.lag_scale()
        worst = _max_family_mass(mu, nu, r0, p)
        if worst > p.m0:
            raise HypothesisViolationError(
                f"a radius-{r0} tube carries mu-mass {worst:.6g} > m0={p.m0}"
            )

    n_e, n_f = len(mu.weights), len(nu.weights)
    keep = np.ones((n_e, n_f), dtype=bool)
    reports: List[TubeScaleReport] = []
    for k, dk in ladder:
        for side, att, wit in (("mu", mu, nu), ("nu", nu, mu)):
            removal, rep = _SidePass(att, wit, dk, p).run()
            if side == "nu":
                removal = removal.T
            newly = int((removal & keep).sum())
            keep &= ~removal
            reports.append(replace(rep, k=k, side=side, pairs_removed=newly))

    retained = float(mu.weights @ keep.astype(np.float64) @ nu.weights)
    mask = GoodPairMask(mu.support.m, keep, retained)

    e_cells = [tuple(t) for t in mu.support.indices.tolist()]
    f_cells = [tuple(t) for t in nu.support.indices.tolist()]
    e_centers = [mu.support.cell_center(i, j) for i, j in e_cells]
    f_centers = [nu.support.cell_center(i, j) for i, j in f_cells]
    violations: List[TubeViolation] = []
    for k, dk in ladder:
        thr = float(dk) ** p.eta
        for a in range(n_e):
            row = keep[a]
            if not row.any():
                continue
            for b in np.flatnonzero(row):
                t = _pair_line(e_centers[a], f_centers[int(b)], dk)
                for side, meas in (("mu", mu), ("nu", nu)):
                    mass = tube_mass(meas, t)
                    if mass > thr:
                        violations.append(
                            TubeViolation(k, dk, side, e_cells[a], f_cells[int(b)], mass, thr)
                        )
    cert = TubeConditionCertificate(p, tuple(reports), tuple(violations), retained)
    return mask, cert
