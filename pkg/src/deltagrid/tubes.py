"""Tubes, pencils, projective tips, homographies, transversality.

Geometry conventions, used everywhere:

* A tube is a euclidean radius-r neighborhood of the line a x + b y + c
  = 0 with exact rational coefficients.  A cell belongs to the raster
  iff the CLOSED cell rectangle is at distance STRICTLY below r from
  the axis line.  Numerically the predicate is evaluated in doubles as
  |nx*cx + (ny*cy + cn)| < r + (|nx| + |ny|) * delta/2 with the unit
  normal (nx, ny); the normalization happens here in the Python layer
  so that both compute backends see bit-identical inputs.

* Pencil directions are angle cells on [0, 1) in half-turn units: cell
  center t means axis angle pi*t.  A pencil with an infinite tip is a
  family of parallel lines instead; its "directions" grid then holds
  offsets t of the lines n . p = t with n = (-dy, dx), the left normal
  of the canonical direction (dx, dy).

* Projective points are exact homogeneous triples.  Finite points
  canonicalize to w = 1; directions (w = 0) canonicalize to dx = 1, or
  (0, 1, 0) when vertical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dyadic import as_fraction, cell_count, delta_of
from .errors import (
    DegenerateConfigurationError,
    DomainError,
    ResolutionMismatchError,
    UnsupportedConfigurationError,
)
from .grid import GridSet1D, GridSet2D
from .kernels import strip_raster

__all__ = [
    "ProjPoint",
    "Tube",
    "Pencil",
    "Homography",
    "rasterize_tube",
    "rasterize_pencil",
    "pencil_lines",
    "intersection_measure",
    "AdmissibilityReport",
    "tips_admissible",
    "normalize_tips",
    "homography_from_points",
    "apply_homography",
    "homography_distortion",
    "min_direction_gap",
    "transversal_bound",
]


@dataclass(frozen=True)
class ProjPoint:
    """Exact homogeneous point (x : y : w); w == 0 is a direction."""

    x: Fraction
    y: Fraction
    w: Fraction = Fraction(1)

    def __post_init__(self):
        x, y, w = as_fraction(self.x), as_fraction(self.y), as_fraction(self.w)
        if x == 0 and y == 0 and w == 0:
            raise DomainError("(0 : 0 : 0) is not a projective point")
        if w != 0:
            x, y, w = x / w, y / w, Fraction(1)
        elif x != 0:
            y, x = y / x, Fraction(1)
        else:
            y = Fraction(1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)

    @property
    def is_infinite(self) -> bool:
        return self.w == 0

    def as_xy(self) -> Tuple[Fraction, Fraction]:
        if self.is_infinite:
            raise DomainError("infinite point has no affine coordinates")
        return self.x, self.y

    def direction(self) -> Tuple[Fraction, Fraction]:
        if not self.is_infinite:
            raise DomainError("finite point is not a direction")
        return self.x, self.y


def _line_through(p: ProjPoint, q: ProjPoint) -> Tuple[Fraction, Fraction, Fraction]:
    """Coefficients (a, b, c) of the projective line through p and q."""
    a = p.y * q.w - p.w * q.y
    b = p.w * q.x - p.x * q.w
    c = p.x * q.y - p.y * q.x
    if a == 0 and b == 0 and c == 0:
        raise DegenerateConfigurationError("coincident projective points")
    return a, b, c


@dataclass(frozen=True)
class Tube:
    """Closed euclidean r-neighborhood of the line a x + b y + c = 0."""

    a: Fraction
    b: Fraction
    c: Fraction
    radius: Fraction

    def __post_init__(self):
        a, b, c = as_fraction(self.a), as_fraction(self.b), as_fraction(self.c)
        r = as_fraction(self.radius)
        if a == 0 and b == 0:
            raise DomainError("tube axis needs (a, b) != (0, 0)")
        if r <= 0:
            raise DomainError(f"tube radius must be positive, got {r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "radius", r)

    @classmethod
    def from_angle_point(cls, t, point: Tuple, radius) -> "Tube":
        """Axis through ``point`` at angle pi*t (t in half-turn units)."""
        tf = float(t)
        a = -math.sin(math.pi * tf)
        b = math.cos(math.pi * tf)
        px, py = float(point[0]), float(point[1])
        return cls(
            Fraction(a).limit_denominator(1 << 40),
            Fraction(b).limit_denominator(1 << 40),
            Fraction(-(a * px + b * py)).limit_denominator(1 << 40),
            as_fraction(radius),
        )


def _strip_params(a: float, b: float, c: float, radius: float, half: float):
    s = math.hypot(a, b)
    nx, ny, cn = a / s, b / s, c / s
    rprime = radius + (abs(nx) + abs(ny)) * half
    return nx, ny, cn, rprime


def _window2d(m: int, lo, hi) -> Tuple[Tuple[Fraction, Fraction], Tuple[Fraction, Fraction], int, int]:
    lo = (as_fraction(lo[0]), as_fraction(lo[1]))
    hi = (as_fraction(hi[0]), as_fraction(hi[1]))
    nx = cell_count(lo[0], hi[0], m)
    ny = cell_count(lo[1], hi[1], m)
    return lo, hi, nx, ny


def _exact_member(a, b, c, r2ab, cx, cy, half) -> bool:
    # closed cell square meets the open strip of half-width radius
    u = abs(a * cx + b * cy + c) - (abs(a) + abs(b)) * half
    return u <= 0 or u * u < r2ab


def _exact_boundary_fix(cells: np.ndarray, tube: Tube, m: int, lo) -> None:
    """Re-decide cells near the float run boundaries with Fractions.

    Membership along a row is one contiguous run, so float rounding can
    only be wrong within a couple of cells of each run endpoint (or miss
    a run of at most a few cells outright, near the axis crossing).
    """
    d = delta_of(m)
    half = d / 2
    a, b, c = tube.a, tube.b, tube.c
    r2ab = tube.radius * tube.radius * (a * a + b * b)
    nx, ny = cells.shape
    for j in range(ny):
        cy = lo[1] + d * j + half
        if a == 0:
            cells[:, j] = _exact_member(a, b, c, r2ab, lo[0] + half, cy, half)
            continue
        idx = np.flatnonzero(cells[:, j])
        cand = set()
        if idx.size:
            i0, i1 = int(idx[0]), int(idx[-1])
            cand.update(range(max(0, i0 - 2), min(nx, i0 + 2)))
            cand.update(range(max(0, i1 - 1), min(nx, i1 + 3)))
        else:
            crossing = (-b * cy - c) / a
            k = int((crossing - lo[0]) / d) if crossing >= lo[0] else 0
            cand.update(range(max(0, k - 2), min(nx, k + 3)))
        for i in cand:
            cx = lo[0] + d * i + half
            cells[i, j] = _exact_member(a, b, c, r2ab, cx, cy, half)


def rasterize_tube(tube: Tube, m: int, lo=(0, 0), hi=(1, 1)) -> GridSet2D:
    """Cells of the window whose closed squares meet the open strip of
    half-width ``radius`` around the tube axis. Needs radius >= delta/2.

    The float kernel marks the bulk; cells near run boundaries are then
    re-decided in exact arithmetic, so the result is the exact predicate
    for rational coefficients.
    """
    d = delta_of(m)
    if tube.radius < d / 2:
        raise DomainError(f"radius {tube.radius} below delta/2 = {d / 2}")
    lo, hi, nx, ny = _window2d(m, lo, hi)
    step = float(d)
    nxf, nyf, cn, rprime = _strip_params(
        float(tube.a), float(tube.b), float(tube.c), float(tube.radius), step / 2
    )
    cells = strip_raster(nxf, nyf, cn, rprime, float(lo[0]), float(lo[1]), step, nx, ny)
    _exact_boundary_fix(cells, tube, m, lo)
    return GridSet2D(m, lo, hi, cells)


@dataclass(frozen=True)
class Pencil:
    """Family of tubes through one tip (or parallel, for infinite tips).

    ``directions`` holds angle cells on [0, 1) for a finite tip, or
    line offsets for an infinite tip (see the module docstring for the
    offset convention).  All tubes share one radius.
    """

    tip: ProjPoint
    directions: GridSet1D
    radius: Fraction

    def __post_init__(self):
        object.__setattr__(self, "radius", as_fraction(self.radius))
        if self.radius <= 0:
            raise DomainError("pencil radius must be positive")
        if not self.tip.is_infinite:
            if self.directions.lo < 0 or self.directions.hi > 1:
                raise DomainError("angle cells of a finite-tip pencil live on [0, 1)")

    @property
    def ntubes(self) -> int:
        return self.directions.count


def pencil_lines(p: Pencil) -> List[Tuple[float, float, float]]:
    """Float (a, b, c) for each tube axis, in direction-cell order.

    All trig happens here; the raster kernels receive plain coefficients
    so both backends evaluate the same float predicate.
    """
    out = []
    if p.tip.is_infinite:
        dx, dy = p.tip.direction()
        a, b = -float(dy), float(dx)
        for i in map(int, p.directions.indices):
            t = p.directions.cell_center(i)
            out.append((a, b, -float(t)))
    else:
        px, py = (float(v) for v in p.tip.as_xy())
        for i in map(int, p.directions.indices):
            t = float(p.directions.cell_center(i))
            a = -math.sin(math.pi * t)
            b = math.cos(math.pi * t)
            out.append((a, b, -(a * px + b * py)))
    return out


def rasterize_pencil(p: Pencil, m: int, lo=(0, 0), hi=(1, 1)) -> GridSet2D:
    """Union of the tube rasters of a pencil over the window.

    A finite tip must not lie in the open window (its every direction
    would meet the window, which the transversality bounds exclude).
    """
    d = delta_of(m)
    if p.radius < d / 2:
        raise DomainError(f"radius {p.radius} below delta/2 = {d / 2}")
    lo, hi, nx, ny = _window2d(m, lo, hi)
    if not p.tip.is_infinite:
        px, py = p.tip.as_xy()
        if lo[0] < px < hi[0] and lo[1] < py < hi[1]:
            raise UnsupportedConfigurationError(
                f"pencil tip ({px}, {py}) lies inside the open window"
            )
    step = float(d)
    acc = np.zeros((nx, ny), dtype=bool)
    half = step / 2
    x0, y0 = float(lo[0]), float(lo[1])
    for a, b, c in pencil_lines(p):
        nxf, nyf, cn, rprime = _strip_params(a, b, c, float(p.radius), half)
        acc |= strip_raster(nxf, nyf, cn, rprime, x0, y0, step, nx, ny)
    return GridSet2D(m, lo, hi, acc)


def intersection_measure(sets: Sequence[GridSet2D]) -> Fraction:
    """Exact area of the cellwise intersection, delta^2 per cell.

    All sets must share resolution and window.
    """
    if not sets:
        raise DomainError("intersection of an empty collection")
    first = sets[0]
    for s in sets[1:]:
        if s.m != first.m:
            raise ResolutionMismatchError(f"m mismatch: {first.m} vs {s.m}")
        if s.lo != first.lo or s.hi != first.hi:
            raise DomainError("intersection_measure needs a shared window")
    cells = first.cells.copy()
    for s in sets[1:]:
        cells &= s.cells
    return int(cells.sum()) * first.delta * first.delta


# ----------------------------------------------------------------------
# admissibility of four projective tips


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    failed: Optional[str] = None
    detail: Optional[str] = None


def _sq_dist(p: ProjPoint, q: ProjPoint) -> Fraction:
    px, py = p.as_xy()
    qx, qy = q.as_xy()
    return (px - qx) ** 2 + (py - qy) ** 2


def _sq_dist_to_square(p: ProjPoint) -> Fraction:
    """Squared distance from a finite point to the closed unit square."""
    px, py = p.as_xy()
    dx = max(Fraction(0) - px, px - 1, Fraction(0))
    dy = max(Fraction(0) - py, py - 1, Fraction(0))
    return dx * dx + dy * dy


_CORNERS = [
    (Fraction(0), Fraction(0)),
    (Fraction(1), Fraction(0)),
    (Fraction(0), Fraction(1)),
    (Fraction(1), Fraction(1)),
]


def _line_misses_square(a: Fraction, b: Fraction, c: Fraction) -> bool:
    signs = [a * x + b * y + c for x, y in _CORNERS]
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)


def tips_admissible(tips: Sequence[ProjPoint], c) -> AdmissibilityReport:
    """Check the four-tip separation predicates at parameter c in (0, 1).

    Exact rational arithmetic throughout; the predicates run in a fixed
    order and the report names the first one that fails:

    1. every pairwise distance is in [c, 1/c] (pairs in lex order);
    2. every tip is at distance >= c from the closed unit square;
    3. the line through each tip pair misses the square;
    4. no direction strip of width 2c contains all four tips.

    Infinite tips are rejected here: the distance predicates have no
    meaning for them (normalize first, then re-check).
    """
    c = as_fraction(c)
    if not 0 < c < 1:
        raise DomainError(f"need 0 < c < 1, got {c}")
    if len(tips) != 4:
        raise DomainError(f"need exactly 4 tips, got {len(tips)}")
    for idx, p in enumerate(tips):
        if p.is_infinite:
            return AdmissibilityReport(
                False, "finite", f"tip {idx + 1} is an infinite point"
            )
    c2, inv_c2 = c * c, 1 / (c * c)
    for i in range(4):
        for j in range(i + 1, 4):
            d2 = _sq_dist(tips[i], tips[j])
            if not c2 <= d2 <= inv_c2:
                return AdmissibilityReport(
                    False,
                    "pair_distance",
                    f"pair ({i + 1},{j + 1}): dist^2 = {d2} outside [{c2}, {inv_c2}]",
                )
    for i in range(4):
        d2 = _sq_dist_to_square(tips[i])
        if d2 < c2:
            return AdmissibilityReport(
                False, "tip_to_square", f"tip {i + 1}: dist^2 = {d2} < {c2}"
            )
    for i in range(4):
        for j in range(i + 1, 4):
            a, b, cc = _line_through(tips[i], tips[j])
            if not _line_misses_square(a, b, cc):
                return AdmissibilityReport(
                    False,
                    "line_crosses_square",
                    f"line through tips {i + 1} and {j + 1} meets the unit square",
                )
    pts = [t.as_xy() for t in tips]
    for i in range(4):
        for j in range(i + 1, 4):
            nx = pts[j][1] - pts[i][1]
            ny = pts[i][0] - pts[j][0]
            norm2 = nx * nx + ny * ny
            proj = [nx * x + ny * y for x, y in pts]
            width2 = (max(proj) - min(proj)) ** 2
            if width2 <= 4 * c2 * norm2:
                return AdmissibilityReport(
                    False,
                    "thin_strip",
                    f"all tips fit a width-2c strip normal to pair ({i + 1},{j + 1})",
                )
    return AdmissibilityReport(True)


# ----------------------------------------------------------------------
# homographies (exact 3x3 rational matrices acting on row vectors? no:
# column convention, h @ (x, y, w))


def _mat_inv3(h) -> List[List[Fraction]]:
    a, b, c = h[0]
    d, e, f = h[1]
    g, i, j = h[2]
    det = a * (e * j - f * i) - b * (d * j - f * g) + c * (d * i - e * g)
    if det == 0:
        raise DegenerateConfigurationError("singular matrix")
    return [
        [(e * j - f * i) / det, (c * i - b * j) / det, (b * f - c * e) / det],
        [(f * g - d * j) / det, (a * j - c * g) / det, (c * d - a * f) / det],
        [(d * i - e * g) / det, (b * g - a * i) / det, (a * e - b * d) / det],
    ]


def _mat_apply(h, p: ProjPoint) -> ProjPoint:
    v = (p.x, p.y, p.w)
    out = [sum(h[r][k] * v[k] for k in range(3)) for r in range(3)]
    return ProjPoint(out[0], out[1], out[2])


def normalize_tips(tips: Sequence[ProjPoint]):
    """Homography sending tips 1..3 to the standard frame and tip 4 to
    (t0, 1): returns (H, t0) with H a Homography.

    H maps tip1 -> (1:0:0) (horizontal direction), tip2 -> (0:1:0)
    (vertical direction), tip3 -> (0:0:1) (the origin), and tip4 to the
    finite point (t0, 1).  Degenerate inputs (any three tips collinear)
    are rejected.
    """
    if len(tips) != 4:
        raise DomainError(f"need exactly 4 tips, got {len(tips)}")
    cols = [(p.x, p.y, p.w) for p in tips[:3]]
    basis = [[cols[0][r], cols[1][r], cols[2][r]] for r in range(3)]
    h0 = _mat_inv3(basis)
    q = _mat_apply_raw(h0, tips[3])
    u, v, w = q
    if u == 0 or v == 0 or w == 0:
        raise DegenerateConfigurationError(
            "three of the four tips are collinear (zero coordinate after framing)"
        )
    scale = [Fraction(1) / w, Fraction(1) / v, Fraction(1) / w]
    h = [[scale[r] * h0[r][k] for k in range(3)] for r in range(3)]
    return Homography(tuple(tuple(r) for r in h)), u / w


def _mat_apply_raw(h, p: ProjPoint):
    v = (p.x, p.y, p.w)
    return [sum(h[r][k] * v[k] for k in range(3)) for r in range(3)]


def _mat_mul(a, b):
    return [
        [sum(a[r][k] * b[k][c] for k in range(3)) for c in range(3)] for r in range(3)
    ]


@dataclass(frozen=True)
class Homography:
    """Invertible projective map of the plane, a 3x3 rational matrix
    acting on column vectors (x, y, w)."""

    mat: Tuple[Tuple[Fraction, Fraction, Fraction], ...]

    def __post_init__(self):
        rows = tuple(tuple(as_fraction(v) for v in row) for row in self.mat)
        if len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise DomainError("homography needs a 3x3 matrix")
        object.__setattr__(self, "mat", rows)
        a, b, c = rows[0]
        d, e, f = rows[1]
        g, i, j = rows[2]
        det = a * (e * j - f * i) - b * (d * j - f * g) + c * (d * i - e * g)
        if det == 0:
            raise DegenerateConfigurationError("homography matrix is singular")

    def apply(self, p: ProjPoint) -> ProjPoint:
        return _mat_apply(self.mat, p)

    def inverse(self) -> "Homography":
        return Homography(tuple(tuple(r) for r in _mat_inv3(self.mat)))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(tuple(tuple(r) for r in _mat_mul(self.mat, other.mat)))


def _as_mat(h):
    if isinstance(h, Homography):
        return [list(row) for row in h.mat]
    return [list(row) for row in h]


def _canonical_frame(pts: Sequence[ProjPoint]):
    """Matrix sending the projective basis e1, e2, e3, (1,1,1) to pts."""
    cols = [(p.x, p.y, p.w) for p in pts[:3]]
    a = [[cols[0][r], cols[1][r], cols[2][r]] for r in range(3)]
    lam = _mat_apply_raw(_mat_inv3(a), pts[3])
    if any(v == 0 for v in lam):
        raise DegenerateConfigurationError("three of the points are collinear")
    return [[a[r][k] * lam[k] for k in range(3)] for r in range(3)]


def homography_from_points(
    src: Sequence[ProjPoint], dst: Sequence[ProjPoint]
) -> Homography:
    """The unique homography sending src[i] to dst[i], exactly.

    Four points on each side, no three collinear in either quadruple.
    The result is verified by applying it to all four source points.
    """
    if len(src) != 4 or len(dst) != 4:
        raise DomainError("need exactly 4 source and 4 destination points")
    ms = _canonical_frame(src)
    md = _canonical_frame(dst)
    h = Homography(tuple(tuple(r) for r in _mat_mul(md, _mat_inv3(ms))))
    for p, q in zip(src, dst):
        if h.apply(p) != q:
            raise DegenerateConfigurationError("constructed map fails verification")
    return h


def _similarity_parts(h):
    """(a, b, tx, ty) when h is an exact affine similarity with a last
    row (0, 0, s), None otherwise."""
    if h[2][0] != 0 or h[2][1] != 0 or h[2][2] == 0:
        return None
    s = h[2][2]
    a, nb, tx = (v / s for v in h[0])
    b, a2, ty = (v / s for v in h[1])
    if a != a2 or nb != -b:
        # allow an axis reflection: [[a, b], [b, -a]]
        if a == -a2 and nb == b:
            return ("reflect", a, b, tx, ty)
        return None
    return ("rotate", a, b, tx, ty)


def apply_homography(h, obj, pad: int = 1):
    """Transport a pencil or a 2d grid set through a homography.

    Returns (transformed, distortion) where distortion is the max/min
    ratio of image diameters (1.0 for exact similarity transport).

    Pencils: the tip maps exactly.  If h is an exact quarter-turn
    similarity (or axis reflection), direction cells permute exactly;
    otherwise each direction cell's angle interval is mapped in floats
    and covered with ``pad`` extra cells on each side (conservative).

    Grid sets: every member cell is mapped as a closed quad and covered
    exactly in rational arithmetic (a superset of the true image). The
    window must stay clear of the line at infinity.
    """
    mat = _as_mat(h)
    if isinstance(obj, Pencil):
        return _apply_homography_pencil(mat, obj, pad)
    if isinstance(obj, GridSet2D):
        out = _apply_homography_grid(mat, obj)
        return out, homography_distortion(mat, obj)
    raise DomainError(f"cannot apply a homography to {type(obj).__name__}")


def _angle_of(dx: float, dy: float) -> float:
    """Line angle in half-turn units, in [0, 1)."""
    t = math.atan2(dy, dx) / math.pi
    return t % 1.0


def _apply_homography_pencil(h, p: Pencil, pad: int) -> Tuple[Pencil, float]:
    tip = _mat_apply(h, p.tip)
    sim = _similarity_parts(h)
    dirs = p.directions
    n = dirs.ncells
    if sim is not None and not p.tip.is_infinite and not tip.is_infinite:
        kind, a, b, tx, ty = sim
        quarter = None
        if b == 0:
            quarter = 0 if a > 0 else 2
        elif a == 0:
            quarter = 1 if b > 0 else 3
        if quarter is not None and dirs.lo == 0 and dirs.hi == 1 and n % 2 == 0:
            shift = quarter * n // 2 % n
            cells = np.zeros(n, dtype=bool)
            idx = dirs.indices
            if kind == "rotate":
                cells[(idx + shift) % n] = True
            else:
                # reflection sends the open cell (k*d, (k+1)*d) onto the
                # open cell with left endpoint -(k+1)*d, then rotates
                cells[(shift - idx - 1) % n] = True
            rad = p.radius * _exact_sqrt(a * a + b * b)
            return Pencil(tip, GridSet1D(dirs.m, dirs.lo, dirs.hi, cells), rad), 1.0
    # conservative float arc transport
    if tip.is_infinite or p.tip.is_infinite:
        raise UnsupportedConfigurationError(
            "general homography transport needs finite tips on both sides"
        )
    px, py = (float(v) for v in p.tip.as_xy())
    qx, qy = (float(v) for v in tip.as_xy())
    hf = [[float(v) for v in row] for row in h]
    n_out = 2**dirs.m  # image angles can leave a sub-window: use the full circle
    cells = np.zeros(n_out, dtype=bool)
    d = float(dirs.delta)

    def image_angle(t_half_turns: float) -> Optional[float]:
        t = t_half_turns * math.pi
        fx, fy = px + math.cos(t), py + math.sin(t)
        wim = hf[2][0] * fx + hf[2][1] * fy + hf[2][2]
        if wim == 0:
            return None
        xim = (hf[0][0] * fx + hf[0][1] * fy + hf[0][2]) / wim
        yim = (hf[1][0] * fx + hf[1][1] * fy + hf[1][2]) / wim
        return _angle_of(xim - qx, yim - qy)

    lo_f = float(dirs.lo)
    arcs = []
    for i in map(int, dirs.indices):
        ta = image_angle(lo_f + i * d)
        tb = image_angle(lo_f + (i + 1) * d)
        tm = image_angle(lo_f + (i + 0.5) * d)
        pts = [t for t in (ta, tb, tm) if t is not None]
        if not pts:
            continue
        if ta is None or tb is None:
            lo_arc, hi_arc = min(pts), max(pts)
        else:
            # pick the circular arc from ta to tb that contains tm
            fwd = (tb - ta) % 1.0
            mid = (tm - ta) % 1.0 if tm is not None else fwd / 2
            if mid <= fwd:
                lo_arc, hi_arc = ta, ta + fwd
            else:
                lo_arc, hi_arc = tb, tb + (1.0 - fwd)
        arcs.append(hi_arc - lo_arc)
        k0 = math.floor(lo_arc / d) - pad
        k1 = math.floor(hi_arc / d) + pad
        for k in range(k0, k1 + 1):
            cells[k % n_out] = True
    out_dirs = GridSet1D(dirs.m, Fraction(0), Fraction(1), cells)
    positive = [a for a in arcs if a > 0]
    distortion = max(positive) / min(positive) if positive else 1.0
    return Pencil(tip, out_dirs, p.radius), distortion


def _exact_sqrt(f: Fraction) -> Fraction:
    num = math.isqrt(f.numerator)
    den = math.isqrt(f.denominator)
    if num * num != f.numerator or den * den != f.denominator:
        raise DomainError(f"{f} has no exact rational square root")
    return Fraction(num, den)


def _apply_homography_grid(h, s: GridSet2D) -> GridSet2D:
    d = s.delta
    corners_w = []
    for x, y in (
        (s.lo[0], s.lo[1]),
        (s.hi[0], s.lo[1]),
        (s.lo[0], s.hi[1]),
        (s.hi[0], s.hi[1]),
    ):
        w = h[2][0] * x + h[2][1] * y + h[2][2]
        if w == 0:
            raise DomainError("window corner maps to the line at infinity")
        corners_w.append(w)
    if not (all(w > 0 for w in corners_w) or all(w < 0 for w in corners_w)):
        raise DomainError("window straddles the line at infinity")

    quads = []
    gxmin = gymin = None
    gxmax = gymax = None
    for i, j in s.indices.tolist():
        quad = []
        for cx, cy in (
            (s.lo[0] + i * d, s.lo[1] + j * d),
            (s.lo[0] + (i + 1) * d, s.lo[1] + j * d),
            (s.lo[0] + (i + 1) * d, s.lo[1] + (j + 1) * d),
            (s.lo[0] + i * d, s.lo[1] + (j + 1) * d),
        ):
            w = h[2][0] * cx + h[2][1] * cy + h[2][2]
            x = (h[0][0] * cx + h[0][1] * cy + h[0][2]) / w
            y = (h[1][0] * cx + h[1][1] * cy + h[1][2]) / w
            quad.append((x, y))
        quads.append(quad)
        qx = [p[0] for p in quad]
        qy = [p[1] for p in quad]
        gxmin = min(qx) if gxmin is None else min(gxmin, *qx)
        gxmax = max(qx) if gxmax is None else max(gxmax, *qx)
        gymin = min(qy) if gymin is None else min(gymin, *qy)
        gymax = max(qy) if gymax is None else max(gymax, *qy)
    if not quads:
        raise DomainError("cannot transport an empty grid set")

    lo = ((gxmin / d).__floor__() * d, (gymin / d).__floor__() * d)
    hi = ((gxmax / d).__ceil__() * d, (gymax / d).__ceil__() * d)
    if hi[0] == lo[0]:
        hi = (hi[0] + d, hi[1])
    if hi[1] == lo[1]:
        hi = (hi[0], hi[1] + d)
    nx = cell_count(lo[0], hi[0], s.m)
    ny = cell_count(lo[1], hi[1], s.m)
    if nx * ny > 1 << 26:
        raise DomainError(f"transported window spans {nx}x{ny} cells; refusing")
    cells = np.zeros((nx, ny), dtype=bool)
    for quad in quads:
        _mark_quad(cells, quad, lo, d, nx, ny)
    return GridSet2D(s.m, lo, hi, cells)


def _mark_quad(cells, quad, lo, d, nx, ny):
    ymin = min(p[1] for p in quad)
    ymax = max(p[1] for p in quad)
    j0 = max(int(((ymin - lo[1]) / d).__floor__()), 0)
    j1 = min(int(((ymax - lo[1]) / d).__ceil__()), ny)
    edges = [(quad[k], quad[(k + 1) % 4]) for k in range(4)]
    for j in range(j0, j1):
        band_lo = lo[1] + j * d
        band_hi = band_lo + d
        xs = [p[0] for p in quad if band_lo <= p[1] <= band_hi]
        for (x1, y1), (x2, y2) in edges:
            if y1 == y2:
                continue
            for yb in (band_lo, band_hi):
                t_num = yb - y1
                t_den = y2 - y1
                t = t_num / t_den
                if 0 <= t <= 1:
                    xs.append(x1 + t * (x2 - x1))
        if not xs:
            continue
        xmin, xmax = min(xs), max(xs)
        i0 = max(int(((xmin - lo[0]) / d).__floor__()), 0)
        i1 = min(int(((xmax - lo[0]) / d).__ceil__()), nx)
        if i1 > i0:
            cells[i0:i1, j] = True


def homography_distortion(h, s: GridSet2D) -> float:
    """Max/min ratio of member-cell image diameters (float report)."""
    hf = [[float(v) for v in row] for row in _as_mat(h)]
    d = float(s.delta)
    lox, loy = float(s.lo[0]), float(s.lo[1])
    worst_max, worst_min = 0.0, math.inf
    for i, j in s.indices.tolist():
        pts = []
        for cx, cy in (
            (lox + i * d, loy + j * d),
            (lox + (i + 1) * d, loy + j * d),
            (lox + (i + 1) * d, loy + (j + 1) * d),
            (lox + i * d, loy + (j + 1) * d),
        ):
            w = hf[2][0] * cx + hf[2][1] * cy + hf[2][2]
            pts.append(((hf[0][0] * cx + hf[0][1] * cy + hf[0][2]) / w,
                        (hf[1][0] * cx + hf[1][1] * cy + hf[1][2]) / w))
        diam = max(
            math.hypot(p[0] - q[0], p[1] - q[1])
            for a_i, p in enumerate(pts)
            for q in pts[a_i + 1 :]
        )
        worst_max = max(worst_max, diam)
        worst_min = min(worst_min, diam)
    if not math.isfinite(worst_min) or worst_min == 0.0:
        raise DomainError("distortion undefined: empty set or collapsed cell")
    return worst_max / worst_min


# ----------------------------------------------------------------------
# transversality


def _pencil_angles(p: Pencil) -> List[float]:
    if p.tip.is_infinite:
        dx, dy = p.tip.direction()
        return [_angle_of(float(dx), float(dy))]
    return [float(p.directions.cell_center(int(i))) for i in p.directions.indices]


def min_direction_gap(p1: Pencil, p2: Pencil) -> float:
    """Smallest circular distance (half-turn units) between the tube
    directions of two pencils."""
    t1 = _pencil_angles(p1)
    t2 = _pencil_angles(p2)
    if not t1 or not t2:
        raise DomainError("empty pencil has no directions")
    best = math.inf
    for a in t1:
        for b in t2:
            gap = abs(a - b) % 1.0
            best = min(best, min(gap, 1.0 - gap))
    return best


def transversal_bound(p1: Pencil, p2: Pencil, m: int, theta0: Optional[float] = None) -> float:
    """Area bound 16 n1 n2 delta^2 / theta0 for the intersection of two
    pencil rasters with direction separation theta0 (half-turn units)."""
    if theta0 is None:
        theta0 = min_direction_gap(p1, p2)
    if theta0 <= 0:
        raise DomainError("transversal bound needs a positive direction gap")
    d = float(delta_of(m))
    return 16.0 * p1.ntubes * p2.ntubes * d * d / theta0
