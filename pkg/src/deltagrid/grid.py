"""Finite grid sets at dyadic scales.

A grid set at scale delta = 2**-m is a union of half-open cells
[lo + i*delta, lo + (i+1)*delta) inside a fixed dyadic window [lo, hi).
Membership is a dense boolean array; endpoints are exact
:class:`fractions.Fraction` values so that no geometric predicate ever
depends on binary rounding of the domain.

Two-dimensional sets use the same convention on both axes with cells
indexed ``cells[i, j]``: i runs along x, j along y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .dyadic import as_fraction, cell_count, check_scale, delta_of, is_dyadic
from .errors import DomainError, ResolutionMismatchError

__all__ = [
    "GridSet1D",
    "GridSet2D",
    "Witness",
    "NonConcentrationSpec",
    "NonConcentrationCertificate",
    "union",
    "intersect",
    "difference",
    "complement",
    "inflate",
    "set_algebra",
    "covering_number",
    "nonconcentration_check",
    "product_grid",
    "gridset_to_text",
    "gridset_from_text",
    "save_gridset",
    "load_gridset",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=bool, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GridSet1D:
    """Union of delta-cells in a dyadic window [lo, hi).

    ``cells[i]`` is True iff the cell [lo + i*delta, lo + (i+1)*delta)
    belongs to the set. ``lo`` may be any dyadic rational (half-cell
    offsets are legal); operations that need a globally aligned index
    validate alignment themselves.
    """

    m: int
    lo: Fraction
    hi: Fraction
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_scale(self.m)
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        n = cell_count(self.lo, self.hi, self.m)
        arr = np.asarray(self.cells)
        if arr.ndim != 1 or len(arr) != n:
            raise DomainError(f"expected {n} cells for [{self.lo}, {self.hi}) at m={self.m}, got shape {arr.shape}")
        object.__setattr__(self, "cells", _freeze(arr))

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def empty(cls, m: int, lo=_ZERO, hi=_ONE) -> "GridSet1D":
        lo, hi = as_fraction(lo), as_fraction(hi)
        return cls(m, lo, hi, np.zeros(cell_count(lo, hi, m), dtype=bool))

    @classmethod
    def full(cls, m: int, lo=_ZERO, hi=_ONE) -> "GridSet1D":
        lo, hi = as_fraction(lo), as_fraction(hi)
        return cls(m, lo, hi, np.ones(cell_count(lo, hi, m), dtype=bool))

    @classmethod
    def from_indices(cls, m: int, indices: Iterable[int], lo=_ZERO, hi=_ONE) -> "GridSet1D":
        """Set with the given cell indices (relative to lo) marked."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        n = cell_count(lo, hi, m)
        arr = np.zeros(n, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= n):
            raise DomainError(f"cell index out of range [0, {n}) for [{lo}, {hi}) at m={m}")
        arr[idx] = True
        return cls(m, lo, hi, arr)

    @classmethod
    def from_points(cls, m: int, points: Iterable, lo=_ZERO, hi=_ONE) -> "GridSet1D":
        """Set of cells containing the given exact rational points."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        delta = delta_of(m)
        idx = []
        for p in points:
            p = as_fraction(p)
            if not (lo <= p < hi):
                raise DomainError(f"point {p} outside [{lo}, {hi})")
            idx.append(int((p - lo) / delta))
        return cls.from_indices(m, idx, lo, hi)

    # ------------------------------------------------------------------
    # basic queries

    @property
    def delta(self) -> Fraction:
        return delta_of(self.m)

    @property
    def ncells(self) -> int:
        return len(self.cells)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def is_empty(self) -> bool:
        return not self.cells.any()

    @property
    def measure(self) -> Fraction:
        """Lebesgue measure of the union of member cells (exact)."""
        return self.count * self.delta

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.cells)

    def cell_left(self, i: int) -> Fraction:
        return self.lo + i * self.delta

    def cell_center(self, i: int) -> Fraction:
        return self.lo + (2 * i + 1) * self.delta / 2

    def member_centers(self) -> np.ndarray:
        """Float centers of member cells, for the numeric kernels."""
        return (self.indices + 0.5) * float(self.delta) + float(self.lo)

    def contains_point(self, x) -> bool:
        x = as_fraction(x)
        if not (self.lo <= x < self.hi):
            return False
        return bool(self.cells[int((x - self.lo) / self.delta)])

    def aligned_offset(self) -> int:
        """Global index of lo, i.e. lo / delta, when lo is delta-aligned."""
        g = self.lo * 2**self.m
        if g.denominator != 1:
            raise DomainError(f"lo={self.lo} is not aligned to scale 2**-{self.m}")
        return int(g)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet1D):
            return NotImplemented
        return (
            self.m == other.m
            and self.lo == other.lo
            and self.hi == other.hi
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self):
        return hash((self.m, self.lo, self.hi, self.cells.tobytes()))

    # ------------------------------------------------------------------
    # domain surgery

    def restrict(self, lo, hi) -> "GridSet1D":
        """Intersection with a smaller window [lo, hi) of the same scale."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        if lo < self.lo or hi > self.hi:
            raise DomainError(f"[{lo}, {hi}) is not inside [{self.lo}, {self.hi})")
        off = (lo - self.lo) / self.delta
        if off.denominator != 1:
            raise DomainError(f"restriction lo={lo} misaligned with lo={self.lo} at m={self.m}")
        n = cell_count(lo, hi, self.m)
        return GridSet1D(self.m, lo, hi, self.cells[int(off) : int(off) + n])

    def embed(self, lo, hi) -> "GridSet1D":
        """Same set re-hosted on a larger window [lo, hi)."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        if lo > self.lo or hi < self.hi:
            raise DomainError(f"[{lo}, {hi}) does not contain [{self.lo}, {self.hi})")
        off = (self.lo - lo) / self.delta
        if off.denominator != 1:
            raise DomainError(f"embedding lo={lo} misaligned with lo={self.lo} at m={self.m}")
        n = cell_count(lo, hi, self.m)
        arr = np.zeros(n, dtype=bool)
        arr[int(off) : int(off) + self.ncells] = self.cells
        return GridSet1D(self.m, lo, hi, arr)

    def subset_of(self, other: "GridSet1D") -> bool:
        """Membership containment; reconciles different windows via global indices."""
        if self.m != other.m:
            raise ResolutionMismatchError(f"m={self.m} vs m={other.m}")
        if self.lo == other.lo and self.hi == other.hi:
            return bool(np.all(other.cells[self.cells]))
        ga = self.aligned_offset() + self.indices
        gb = other.aligned_offset() + other.indices
        return bool(np.isin(ga, gb).all())


@dataclass(frozen=True, eq=False)
class GridSet2D:
    """Union of delta-squares in a dyadic box [lo_x, hi_x) x [lo_y, hi_y)."""

    m: int
    lo: tuple
    hi: tuple
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_scale(self.m)
        lo = tuple(as_fraction(v) for v in self.lo)
        hi = tuple(as_fraction(v) for v in self.hi)
        if len(lo) != 2 or len(hi) != 2:
            raise DomainError("2d grid set needs two endpoints per corner")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        nx = cell_count(lo[0], hi[0], self.m)
        ny = cell_count(lo[1], hi[1], self.m)
        arr = np.asarray(self.cells)
        if arr.shape != (nx, ny):
            raise DomainError(f"expected cells of shape {(nx, ny)}, got {arr.shape}")
        object.__setattr__(self, "cells", _freeze(arr))

    @classmethod
    def empty(cls, m: int, lo=(_ZERO, _ZERO), hi=(_ONE, _ONE)) -> "GridSet2D":
        lo = tuple(as_fraction(v) for v in lo)
        hi = tuple(as_fraction(v) for v in hi)
        nx = cell_count(lo[0], hi[0], m)
        ny = cell_count(lo[1], hi[1], m)
        return cls(m, lo, hi, np.zeros((nx, ny), dtype=bool))

    @classmethod
    def full(cls, m: int, lo=(_ZERO, _ZERO), hi=(_ONE, _ONE)) -> "GridSet2D":
        s = cls.empty(m, lo, hi)
        arr = np.ones_like(s.cells)
        return cls(m, s.lo, s.hi, arr)

    @classmethod
    def from_indices(cls, m: int, indices: Iterable, lo=(_ZERO, _ZERO), hi=(_ONE, _ONE)) -> "GridSet2D":
        s = cls.empty(m, lo, hi)
        arr = np.zeros_like(s.cells)
        for i, j in indices:
            if not (0 <= i < arr.shape[0] and 0 <= j < arr.shape[1]):
                raise DomainError(f"cell ({i}, {j}) out of range {arr.shape}")
            arr[i, j] = True
        return cls(m, s.lo, s.hi, arr)

    @property
    def delta(self) -> Fraction:
        return delta_of(self.m)

    @property
    def shape(self) -> tuple:
        return self.cells.shape

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def is_empty(self) -> bool:
        return not self.cells.any()

    @property
    def measure(self) -> Fraction:
        return self.count * self.delta * self.delta

    @property
    def indices(self) -> np.ndarray:
        """Member cells as an (n, 2) array of (i, j) pairs."""
        return np.argwhere(self.cells)

    def cell_center(self, i: int, j: int) -> tuple:
        d = self.delta
        return (self.lo[0] + (2 * i + 1) * d / 2, self.lo[1] + (2 * j + 1) * d / 2)

    def member_centers(self) -> tuple:
        """Float center coordinates (xs, ys) of member cells."""
        idx = self.indices
        d = float(self.delta)
        xs = (idx[:, 0] + 0.5) * d + float(self.lo[0])
        ys = (idx[:, 1] + 0.5) * d + float(self.lo[1])
        return xs, ys

    def contains_point(self, x, y) -> bool:
        x, y = as_fraction(x), as_fraction(y)
        if not (self.lo[0] <= x < self.hi[0] and self.lo[1] <= y < self.hi[1]):
            return False
        d = self.delta
        return bool(self.cells[int((x - self.lo[0]) / d), int((y - self.lo[1]) / d)])

    def aligned_offset(self) -> tuple:
        gx = self.lo[0] * 2**self.m
        gy = self.lo[1] * 2**self.m
        if gx.denominator != 1 or gy.denominator != 1:
            raise DomainError(f"lo={self.lo} is not aligned to scale 2**-{self.m}")
        return int(gx), int(gy)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet2D):
            return NotImplemented
        return (
            self.m == other.m
            and self.lo == other.lo
            and self.hi == other.hi
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self):
        return hash((self.m, self.lo, self.hi, self.cells.tobytes()))

    def subset_of(self, other: "GridSet2D") -> bool:
        if self.m != other.m:
            raise ResolutionMismatchError(f"m={self.m} vs m={other.m}")
        if self.lo == other.lo and self.hi == other.hi:
            return bool(np.all(other.cells[self.cells]))
        oa, ob = self.aligned_offset(), other.aligned_offset()
        mine = self.indices + np.array([oa])
        theirs = other.indices + np.array([ob])
        a = {tuple(p) for p in mine.tolist()}
        b = {tuple(p) for p in theirs.tolist()}
        return a <= b


GridSet = Union[GridSet1D, GridSet2D]


# ----------------------------------------------------------------------
# set algebra


def _check_same_frame(a: GridSet, b: GridSet):
    if type(a) is not type(b):
        raise ResolutionMismatchError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    if a.m != b.m:
        raise ResolutionMismatchError(f"m={a.m} vs m={b.m}")
    if a.lo != b.lo or a.hi != b.hi:
        raise DomainError(f"windows differ: [{a.lo}, {a.hi}) vs [{b.lo}, {b.hi})")


def _rebuild(proto: GridSet, cells: np.ndarray) -> GridSet:
    return type(proto)(proto.m, proto.lo, proto.hi, cells)


def union(a: GridSet, b: GridSet) -> GridSet:
    _check_same_frame(a, b)
    return _rebuild(a, a.cells | b.cells)


def intersect(a: GridSet, b: GridSet) -> GridSet:
    _check_same_frame(a, b)
    return _rebuild(a, a.cells & b.cells)


def difference(a: GridSet, b: GridSet) -> GridSet:
    _check_same_frame(a, b)
    return _rebuild(a, a.cells & ~b.cells)


def complement(a: GridSet) -> GridSet:
    """Complement within the set's own window."""
    return _rebuild(a, ~a.cells)


def inflate(a: GridSet, k: int) -> GridSet:
    """Dilate by k cells in every axis direction, clipped to the window."""
    if k < 0:
        raise DomainError(f"inflation radius must be >= 0, got {k}")
    out = np.array(a.cells, copy=True)
    if isinstance(a, GridSet1D):
        for s in range(1, k + 1):
            out[s:] |= a.cells[:-s]
            out[:-s] |= a.cells[s:]
        return _rebuild(a, out)
    for sx in range(-k, k + 1):
        for sy in range(-k, k + 1):
            if sx == 0 and sy == 0:
                continue
            src = a.cells[
                max(0, -sx) : a.cells.shape[0] - max(0, sx),
                max(0, -sy) : a.cells.shape[1] - max(0, sy),
            ]
            out[
                max(0, sx) : out.shape[0] - max(0, -sx),
                max(0, sy) : out.shape[1] - max(0, -sy),
            ] |= src
    return _rebuild(a, out)


_OPS = {
    "union": union,
    "intersect": intersect,
    "difference": difference,
    "complement": complement,
    "inflate": inflate,
}


def set_algebra(op: str, a: GridSet, b=None):
    """Dispatch by operation name; ``b`` is the second set or the inflate radius."""
    if op not in _OPS:
        raise DomainError(f"unknown set operation {op!r}; choose from {sorted(_OPS)}")
    if op == "complement":
        return complement(a)
    if op == "inflate":
        return inflate(a, int(b))
    return _OPS[op](a, b)


# ----------------------------------------------------------------------
# covering numbers and non-concentration


def covering_number(s: GridSet, r) -> int:
    """Number of r-blocks (aligned to the set's own lo) meeting the set.

    r must be a positive integer multiple of delta. Blocks start at lo and
    the last block may overhang hi; with r = hi - lo the answer is 0 or 1.
    """
    r = as_fraction(r)
    w = r / s.delta
    if w.denominator != 1 or w <= 0:
        raise DomainError(f"block width {r} is not a positive multiple of 2**-{s.m}")
    w = int(w)
    if isinstance(s, GridSet1D):
        n = s.ncells
        nblocks = -(-n // w)
        padded = np.zeros(nblocks * w, dtype=bool)
        padded[:n] = s.cells
        return int(padded.reshape(nblocks, w).any(axis=1).sum())
    nx, ny = s.shape
    bx, by = -(-nx // w), -(-ny // w)
    padded = np.zeros((bx * w, by * w), dtype=bool)
    padded[:nx, :ny] = s.cells
    blocks = padded.reshape(bx, w, by, w).any(axis=(1, 3))
    return int(blocks.sum())


@dataclass(frozen=True)
class Witness:
    """A window violating a non-concentration bound.

    ``center`` is the window's midpoint (a Fraction in 1d, a pair in 2d),
    ``radius`` its side length, ``count`` the number of member cells inside.
    """

    center: object
    radius: Fraction
    count: int


@dataclass(frozen=True)
class NonConcentrationSpec:
    """Target parameters (sigma, const) for a non-concentration bound.

    sigma must lie in (0, 2] (1d sets use at most 1, planar sets up to 2)
    and const must be positive.
    """

    sigma: float
    const: float = 1.0

    def __post_init__(self):
        if not 0 < self.sigma <= 2:
            raise DomainError(f"sigma must be in (0, 2], got {self.sigma}")
        if not self.const > 0:
            raise DomainError(f"const must be > 0, got {self.const}")


@dataclass(frozen=True)
class NonConcentrationCertificate:
    """Outcome of checking count(window) <= const * (r/delta)**sigma.

    Windows are half-open, anchored on the set's own cells: [a, a + r) in 1d
    and [a_x, a_x + r) x [a_y, a_y + r) in 2d, for every anchor cell a and
    every radius r = 2**j * delta up to ``rmax``. ``ok`` is True when no
    window violates the bound; otherwise ``witness`` holds the violating
    window with the smallest radius (ties broken by smallest anchor).
    """

    ok: bool
    sigma: float
    const: float
    rmax: Fraction
    witness: Optional[Witness] = None


def _window_counts_1d(cells: np.ndarray, w: int) -> np.ndarray:
    n = len(cells)
    pref = np.concatenate(([0], np.cumsum(cells, dtype=np.int64)))
    hi = np.minimum(np.arange(n) + w, n)
    return pref[hi] - pref[:n]


def _window_counts_2d(cells: np.ndarray, w: int) -> np.ndarray:
    nx, ny = cells.shape
    pref = np.zeros((nx + 1, ny + 1), dtype=np.int64)
    np.cumsum(cells, axis=0, dtype=np.int64, out=pref[1:, 1:])
    np.cumsum(pref[1:, 1:], axis=1, out=pref[1:, 1:])
    hx = np.minimum(np.arange(nx) + w, nx)
    hy = np.minimum(np.arange(ny) + w, ny)
    ax = np.arange(nx)
    ay = np.arange(ny)
    return (
        pref[np.ix_(hx, hy)]
        - pref[np.ix_(hx, ay)]
        - pref[np.ix_(ax, hy)]
        + pref[np.ix_(ax, ay)]
    )


def nonconcentration_check(s: GridSet, sigma, const: float = 1.0, rmax=None) -> NonConcentrationCertificate:
    """Certify that s is a (delta, sigma)-set with constant ``const``.

    ``sigma`` may also be a :class:`NonConcentrationSpec`, in which case
    ``const`` is taken from the spec. Checks every anchored window of
    every power-of-two radius; see :class:`NonConcentrationCertificate`
    for the exact window convention.
    """
    if isinstance(sigma, NonConcentrationSpec):
        sigma, const = sigma.sigma, sigma.const
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if const <= 0:
        raise DomainError(f"const must be > 0, got {const}")
    one_d = isinstance(s, GridSet1D)
    if rmax is None:
        if one_d:
            rmax = s.hi - s.lo
        else:
            rmax = max(s.hi[0] - s.lo[0], s.hi[1] - s.lo[1])
    rmax = as_fraction(rmax)
    r = s.delta
    while r <= rmax:
        w = int(r / s.delta)
        counts = _window_counts_1d(s.cells, w) if one_d else _window_counts_2d(s.cells, w)
        bound = const * float(w) ** sigma
        bad = np.argwhere(counts > bound)
        if len(bad):
            if one_d:
                a = int(bad[0][0])
                center = s.cell_left(a) + r / 2
                count = int(counts[a])
            else:
                ax, ay = int(bad[0][0]), int(bad[0][1])
                d = s.delta
                center = (s.lo[0] + ax * d + r / 2, s.lo[1] + ay * d + r / 2)
                count = int(counts[ax, ay])
            return NonConcentrationCertificate(False, sigma, const, rmax, Witness(center, r, count))
        r = 2 * r
    return NonConcentrationCertificate(True, sigma, const, rmax, None)


def product_grid(a: GridSet1D, b: GridSet1D) -> GridSet2D:
    """Cartesian product A x B as a 2d grid set."""
    if a.m != b.m:
        raise ResolutionMismatchError(f"m={a.m} vs m={b.m}")
    cells = np.logical_and.outer(a.cells, b.cells)
    return GridSet2D(a.m, (a.lo, b.lo), (a.hi, b.hi), cells)


# ----------------------------------------------------------------------
# serialization


def gridset_to_text(s: GridSet) -> str:
    """Render a grid set in the portable text format.

    Header line ``gridset <dim> m=<m> lo=<lo> hi=<hi>`` (2d endpoints are
    comma-separated per axis), then the membership bitmap as one hex line,
    most significant bit first, x-major in 2d. The loader also accepts a
    payload wrapped over several lines.
    """
    if isinstance(s, GridSet1D):
        head = f"gridset 1 m={s.m} lo={s.lo} hi={s.hi}"
        flat = s.cells
    else:
        lo = f"{s.lo[0]},{s.lo[1]}"
        hi = f"{s.hi[0]},{s.hi[1]}"
        head = f"gridset 2 m={s.m} lo={lo} hi={hi}"
        flat = s.cells.ravel(order="C")
    payload = np.packbits(flat).tobytes().hex()
    return head + "\n" + payload + "\n"


def gridset_from_text(text: str) -> GridSet:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("gridset "):
        raise DomainError("not a gridset: missing 'gridset' header")
    parts = lines[0].split()
    try:
        dim = int(parts[1])
        fields = dict(p.split("=", 1) for p in parts[2:])
        m = int(fields["m"])
        los = fields["lo"].split(",")
        his = fields["hi"].split(",")
    except (IndexError, KeyError, ValueError) as exc:
        raise DomainError(f"malformed gridset header: {lines[0]!r}") from exc
    if dim not in (1, 2) or len(los) != dim or len(his) != dim:
        raise DomainError(f"malformed gridset header: {lines[0]!r}")
    payload = "".join(lines[1:])
    try:
        raw = bytes.fromhex(payload)
    except ValueError as exc:
        raise DomainError("gridset payload is not valid hex") from exc
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8)).astype(bool)
    if dim == 1:
        lo, hi = Fraction(los[0]), Fraction(his[0])
        n = cell_count(lo, hi, m)
        if len(bits) < n:
            raise DomainError(f"gridset payload too short: {len(bits)} bits < {n} cells")
        return GridSet1D(m, lo, hi, bits[:n])
    lo = (Fraction(los[0]), Fraction(los[1]))
    hi = (Fraction(his[0]), Fraction(his[1]))
    nx = cell_count(lo[0], hi[0], m)
    ny = cell_count(lo[1], hi[1], m)
    if len(bits) < nx * ny:
        raise DomainError(f"gridset payload too short: {len(bits)} bits < {nx * ny} cells")
    return GridSet2D(m, lo, hi, bits[: nx * ny].reshape(nx, ny))


def save_gridset(path, s: GridSet) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(gridset_to_text(s))


def load_gridset(path) -> GridSet:
    with open(path, "r", encoding="ascii") as fh:
        return gridset_from_text(fh.read())
