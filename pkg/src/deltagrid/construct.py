"""Generators for structured grid sets and pencil configurations.

Two kinds of fixtures live here. The digit and progression generators
(cantor_set, ap_set, gp_set) produce one-dimensional sets with known
non-concentration behavior. The pencil generators build tube families
whose rasterizations are forced to overlap on a guaranteed fraction of
a point lattice, or to trap a product square.

Conventions shared by the pencil generators:

* Parallel families get radius delta; their offset grids live at the
  raster resolution, so a member line runs through an offset-cell
  center at most delta/2 away from the requested line. Every designated
  lattice point therefore stays strictly inside its tube.

* Cone families (finite tip) get radius 2*delta. The angle grid
  quantizes a direction to half a cell (pi*delta/2 radians), and the
  lever arm from the tip to the farthest relevant point stretches that
  angular error to just above delta, so one extra delta of slack
  absorbs it.

* Angle grids of cone pencils use the window [0, 1/2) in half-turn
  units; every cone built here has strictly positive finite slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple

import numpy as np

from .dyadic import as_fraction, delta_of
from .errors import DegenerateConfigurationError, DomainError
from .grid import GridSet1D
from .tubes import Pencil, ProjPoint

__all__ = [
    "CantorSpec",
    "cantor_set",
    "ap_set",
    "gp_set",
    "collinear_tip_config",
    "noncollinear_three_config",
    "product_pencils",
]


# ----------------------------------------------------------------------
# digit and progression sets


@dataclass(frozen=True)
class CantorSpec:
    """Digit-restriction recipe: keep ``digits`` out of ``subdivision``
    base digits, at each of ``depth`` levels.

    ``branching`` is the number of kept digits, so the refined set has
    branching**depth cells and similarity dimension
    sigma = log(branching) / log(subdivision). Keeping every digit is
    allowed and yields the full interval.
    """

    branching: int
    subdivision: int
    depth: int
    digits: Tuple[int, ...]

    def __post_init__(self):
        for name, v, least in (
            ("branching", self.branching, 1),
            ("subdivision", self.subdivision, 2),
            ("depth", self.depth, 1),
        ):
            if not isinstance(v, int) or isinstance(v, bool) or v < least:
                raise DomainError(f"{name} must be an integer >= {least}, got {v!r}")
        if self.branching > self.subdivision:
            raise DomainError(
                f"branching {self.branching} exceeds subdivision {self.subdivision}"
            )
        digits = tuple(sorted(self.digits))
        if len(digits) != self.branching:
            raise DomainError(
                f"need exactly {self.branching} digits, got {len(digits)}"
            )
        if any(not isinstance(g, int) or isinstance(g, bool) for g in digits):
            raise DomainError(f"digits must be integers, got {digits!r}")
        if len(set(digits)) != len(digits) or not all(
            0 <= g < self.subdivision for g in digits
        ):
            raise DomainError(
                f"digits must be distinct and in [0, {self.subdivision}), got {digits}"
            )
        object.__setattr__(self, "digits", digits)

    @property
    def sigma(self) -> float:
        return math.log(self.branching) / math.log(self.subdivision)

    @property
    def m(self) -> int:
        """Scale exponent of the refined set; subdivision must be 2**k."""
        k = self.subdivision.bit_length() - 1
        if 1 << k != self.subdivision:
            raise DomainError(f"subdivision {self.subdivision} is not a power of 2")
        return self.depth * k


def cantor_set(spec: CantorSpec) -> GridSet1D:
    """Fully refined digit-restriction set on [0, 1) at scale spec.m.

    A window of w cells meets at most subdivision * w**sigma members:
    cutting the expansion at the level where blocks are w wide leaves at
    most one partial block of kept digits per side.
    """
    m = spec.m
    idx = np.zeros(1, dtype=np.int64)
    base = np.array(spec.digits, dtype=np.int64)
    for _ in range(spec.depth):
        idx = (idx[:, None] * spec.subdivision + base).ravel()
    return GridSet1D.from_indices(m, idx)


def ap_set(n: int, gap: int, m: int, start: int = 0) -> GridSet1D:
    """Arithmetic progression of n cells start, start+gap, ... on [0, 1)."""
    for name, v, least in (("n", n, 1), ("gap", gap, 1), ("start", start, 0)):
        if not isinstance(v, int) or isinstance(v, bool) or v < least:
            raise DomainError(f"{name} must be an integer >= {least}, got {v!r}")
    last = start + (n - 1) * gap
    if last >= 1 << m:
        raise DomainError(
            f"progression reaches cell {last}, past the {1 << m} cells of [0, 1)"
        )
    return GridSet1D.from_indices(m, range(start, last + 1, gap))


def gp_set(ratio, count: int, m: int, first=Fraction(1, 4)) -> GridSet1D:
    """Cells of [0, 1) containing the points first * ratio**k, k < count.

    Terms are exact rationals floored to their delta-cell, so distinct
    terms may share a cell once the progression outruns the resolution.
    """
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise DomainError(f"count must be an integer >= 1, got {count!r}")
    ratio = as_fraction(ratio)
    first = as_fraction(first)
    if ratio <= 0 or ratio == 1:
        raise DomainError(f"ratio must be positive and != 1, got {ratio}")
    if not 0 < first < 1:
        raise DomainError(f"first term {first} outside (0, 1)")
    terms = [first * ratio**k for k in range(count)]
    for t in terms:
        if t >= 1:
            raise DomainError(f"term {t} leaves [0, 1)")
    return GridSet1D.from_points(m, terms)


# ----------------------------------------------------------------------
# pencil configurations


def _offsets_pencil(tip: ProjPoint, values: Sequence, m: int, lo, hi, radius) -> Pencil:
    return Pencil(tip, GridSet1D.from_points(m, values, lo=lo, hi=hi), radius)


def _central_range(n: int) -> range:
    # n consecutive integers covering 0, biased upward for even n
    k0 = -((n - 1) // 2)
    return range(k0, k0 + n)


def collinear_tip_config(n: int, m: int) -> Tuple[Pencil, Pencil, Pencil, Pencil]:
    """Four parallel tube families, slopes (infinity, 0, 1, -1), over
    the n x n lattice with spacing 1/(2n) centered in the unit square.

    Each family holds n tubes of radius delta. Vertical and horizontal
    tubes run through every lattice column and row; the two diagonal
    families take the n most central offsets of their slope. A lattice
    point whose diagonal and antidiagonal are both selected lies within
    delta of all four tube axes, and at least n**2/4 such points sit in
    pairwise distinct cells, so the rasterized intersection on [0,1)**2
    has measure at least n**2 * delta**2 / 4.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise DomainError(f"n must be an integer >= 1, got {n!r}")
    if 4 * n > 1 << m:
        raise DomainError(f"n={n} too large for resolution m={m}: need 4n <= 2**m")
    d = delta_of(m)
    s = Fraction(1, 2 * n)
    x0 = Fraction(1, 2) - (n - 1) * s / 2
    coords = [x0 + i * s for i in range(n)]
    diag = [k * s for k in _central_range(n)]
    anti = [1 + k * s for k in _central_range(n)]
    f = Fraction
    return (
        _offsets_pencil(ProjPoint(0, 1, 0), [-c for c in coords], m, f(-3, 4), f(-1, 4), d),
        _offsets_pencil(ProjPoint(1, 0, 0), coords, m, f(1, 4), f(3, 4), d),
        _offsets_pencil(ProjPoint(1, 1, 0), diag, m, f(-1, 2), f(1, 2), d),
        _offsets_pencil(ProjPoint(1, -1, 0), anti, m, f(1, 2), f(3, 2), d),
    )


def noncollinear_three_config(n: int, m: int) -> Tuple[Pencil, Pencil, Pencil]:
    """A cone of tubes from the origin plus vertical and horizontal
    families, over the lattice {(2**(i-n), 2**(j-n)) : 0 <= i, j < n}.

    The axis families run one radius-delta tube through every lattice
    column and row. The cone takes the n most central dyadic slopes
    2**k; the lattice points with j - i = k for a selected k number at
    least n**2/4, each within 2*delta of the cone axis through its
    angle cell, so the triple intersection on [0,1)**2 has measure at
    least n**2 * delta**2 / 4. Nearby slopes may share an angle cell at
    coarse resolutions; the shared tube still covers both diagonals.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise DomainError(f"n must be an integer >= 1, got {n!r}")
    if n > m:
        raise DegenerateConfigurationError(
            f"rescaled lattice spacing 2**-{n} falls below delta at m={m}"
        )
    d = delta_of(m)
    coords = [Fraction(1, 1 << (n - i)) for i in range(n)]
    cells = {int(math.atan(2.0**k) / math.pi * (1 << m)) for k in _central_range(n)}
    cone = Pencil(
        ProjPoint(0, 0),
        GridSet1D.from_indices(m, sorted(cells), lo=0, hi=Fraction(1, 2)),
        2 * d,
    )
    f = Fraction
    vert = _offsets_pencil(ProjPoint(0, 1, 0), [-c for c in coords], m, f(-1, 2), 0, d)
    horiz = _offsets_pencil(ProjPoint(1, 0, 0), coords, m, 0, 1, d)
    return cone, vert, horiz


def product_pencils(a: GridSet1D) -> Tuple[Pencil, Pencil, Pencil, Pencil]:
    """Vertical, horizontal, and two cone families that jointly trap the
    product square of a set on a window inside [1/4, 1/2).

    The vertical and horizontal families run one radius-delta tube
    through each member cell. The cones sit at (0,0) and (1,1) with
    radius 2*delta; for every ordered pair of member cells they mark
    the angle cell of the line from their tip through the pair's
    center. All slopes involved stay in (1/2, 2), so every cell of the
    product square lies inside all four rasterizations on the square of
    the window.
    """
    if a.is_empty:
        raise DomainError("product_pencils needs a nonempty set")
    quarter, half = Fraction(1, 4), Fraction(1, 2)
    if a.lo < quarter or a.hi > half:
        raise DomainError(f"window [{a.lo}, {a.hi}) must sit inside [1/4, 1/2)")
    m = a.m
    d = a.delta
    centers = [a.cell_center(int(i)) for i in a.indices]
    vert = _offsets_pencil(ProjPoint(0, 1, 0), [-c for c in centers], m, -half, -quarter, d)
    horiz = _offsets_pencil(ProjPoint(1, 0, 0), centers, m, quarter, half, d)
    cf = np.array([float(c) for c in centers])
    scale = float(1 << m)
    near = np.floor(np.arctan2(cf[None, :], cf[:, None]) / math.pi * scale)
    far = np.floor(np.arctan2(1.0 - cf[None, :], 1.0 - cf[:, None]) / math.pi * scale)
    radius = 2 * d
    origin = Pencil(
        ProjPoint(0, 0),
        GridSet1D.from_indices(m, np.unique(near).astype(np.int64), lo=0, hi=half),
        radius,
    )
    corner = Pencil(
        ProjPoint(1, 1),
        GridSet1D.from_indices(m, np.unique(far).astype(np.int64), lo=0, hi=half),
        radius,
    )
    return vert, horiz, origin, corner
