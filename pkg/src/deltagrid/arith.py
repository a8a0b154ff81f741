"""Arithmetic on grid sets.

Interval rule, used by every operation here: a pair of member cells
contributes the exact interval image of the two half-open cells, and an
output cell is marked iff it meets the OPEN INTERIOR of that interval.
This makes the identity and reflection maps exact, and gives each pair
sum exactly two output cells: {i+j, i+j+1} at index level.

Sum and difference work on any dyadic windows. Product and quotient need
delta-aligned windows (their kernels run on global cell indices) and
nonnegative operands; the quotient divisor must stay away from 0.

Index-level objects (PairGraph, restricted_sumset, additive_energy,
convolution_peak) treat cells as elements of Z and never spill: the sum
of two cells is one cell, not an interval cover.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Optional, Tuple

import numpy as np

from .dyadic import as_fraction, cell_count, delta_of
from .errors import (
    DomainError,
    HypothesisViolationError,
    ResolutionMismatchError,
)
from .grid import GridSet1D
from .kernels import interval_cover

__all__ = [
    "sumset",
    "difference_set",
    "productset",
    "quotientset",
    "affine_image",
    "az_construct",
    "PairGraph",
    "full_pair_graph",
    "restricted_sumset",
    "additive_energy",
    "convolution_peak",
    "pairgraph_to_text",
    "pairgraph_from_text",
    "save_pairgraph",
    "load_pairgraph",
    "BsgConfig",
    "BsgResult",
    "bsg_extract",
]


def _same_scale(a: GridSet1D, b: GridSet1D) -> None:
    if a.m != b.m:
        raise ResolutionMismatchError(f"m={a.m} vs m={b.m}")


def _spill_mark(conv: np.ndarray, ncells: int) -> np.ndarray:
    """Each positive convolution slot r marks output cells r and r+1."""
    out = np.zeros(ncells, dtype=bool)
    hit = conv > 0
    out[: len(conv)] |= hit
    out[1 : len(conv) + 1] |= hit
    return out


def sumset(a: GridSet1D, b: GridSet1D) -> GridSet1D:
    """A + B on the window [a.lo + b.lo, a.hi + b.hi)."""
    _same_scale(a, b)
    lo, hi = a.lo + b.lo, a.hi + b.hi
    n = a.ncells + b.ncells
    conv = np.convolve(a.cells.astype(np.int64), b.cells.astype(np.int64))
    return GridSet1D(a.m, lo, hi, _spill_mark(conv, n))


def difference_set(a: GridSet1D, b: GridSet1D) -> GridSet1D:
    """A - B on the window [a.lo - b.hi, a.hi - b.lo)."""
    _same_scale(a, b)
    lo, hi = a.lo - b.hi, a.hi - b.lo
    n = a.ncells + b.ncells
    conv = np.convolve(a.cells.astype(np.int64), b.cells[::-1].astype(np.int64))
    return GridSet1D(a.m, lo, hi, _spill_mark(conv, n))


_QUOTIENT_CELL_CAP = 1 << 26


def _member_globals(s: GridSet1D) -> np.ndarray:
    return s.indices.astype(np.int64) + s.aligned_offset()


def _enclosure(m: int, num_lo: int, num_hi: int) -> Tuple[Fraction, Fraction, int]:
    """Aligned window [num_lo*delta, num_hi*delta) from global cell numbers."""
    d = delta_of(m)
    return num_lo * d, num_hi * d, num_hi - num_lo


def productset(a: GridSet1D, b: GridSet1D) -> GridSet1D:
    """A * B; both operands must be nonnegative on aligned windows."""
    _same_scale(a, b)
    if a.is_empty or b.is_empty:
        return GridSet1D.empty(a.m)
    ga, gb = _member_globals(a), _member_globals(b)
    if ga[0] < 0 or gb[0] < 0:
        raise DomainError("productset needs nonnegative operands")
    m, scale = a.m, 1 << a.m
    klo = int(ga[0]) * int(gb[0]) >> m
    khi = -((-(int(ga[-1]) + 1) * (int(gb[-1]) + 1)) >> m)
    lo, hi, n = _enclosure(m, klo, khi)
    p1 = np.multiply.outer(ga, gb)
    p2 = np.multiply.outer(ga + 1, gb + 1)
    kmin = (p1 >> m) - klo
    kmax = ((p2 + scale - 1) >> m) - 1 - klo
    cells = interval_cover(kmin.ravel(), kmax.ravel(), n)
    return GridSet1D(m, lo, hi, cells)


def quotientset(a: GridSet1D, b: GridSet1D) -> GridSet1D:
    """A / B; A nonnegative, B at least one cell above 0."""
    _same_scale(a, b)
    if a.is_empty or b.is_empty:
        return GridSet1D.empty(a.m)
    ga, gb = _member_globals(a), _member_globals(b)
    if ga[0] < 0:
        raise DomainError("quotientset needs a nonnegative numerator")
    if gb[0] < 1:
        raise DomainError("quotientset divisor must be bounded away from 0")
    m, scale = a.m, 1 << a.m
    klo = (int(ga[0]) << m) // (int(gb[-1]) + 1)
    khi = -(((-(int(ga[-1]) + 1)) << m) // int(gb[0]))
    if khi - klo > _QUOTIENT_CELL_CAP:
        raise DomainError(f"quotient range spans {khi - klo} cells; refusing")
    lo, hi, n = _enclosure(m, klo, khi)
    q1 = (ga[:, None] << m) // (gb[None, :] + 1)
    q2 = -((-(ga[:, None] + 1) << m) // gb[None, :]) - 1
    cells = interval_cover((q1 - klo).ravel(), (q2 - klo).ravel(), n)
    return GridSet1D(m, lo, hi, cells)


def affine_image(a: GridSet1D, p, q, out_lo=None, out_hi=None) -> GridSet1D:
    """Image of A under x -> p*x + q, p != 0, exact endpoint arithmetic.

    The default window is the aligned enclosure of the window image; an
    explicit [out_lo, out_hi) clips the marking to that window.
    """
    p, q = as_fraction(p), as_fraction(q)
    if p == 0:
        raise DomainError("affine_image needs p != 0")
    m = a.m
    d = delta_of(m)
    ends = sorted((p * a.lo + q, p * a.hi + q))
    if out_lo is None:
        lo = (ends[0] / d).__floor__() * d
        hi = (ends[1] / d).__ceil__() * d
        if hi == lo:
            hi = lo + d
    else:
        lo, hi = as_fraction(out_lo), as_fraction(out_hi)
    n = cell_count(lo, hi, m)
    out = np.zeros(n, dtype=bool)
    for i in map(int, a.indices):
        l = p * (a.lo + i * d) + q
        r = l + p * d
        if p < 0:
            l, r = r, l
        kmin = ((l - lo) / d).__floor__()
        kmax = ((r - lo) / d).__ceil__() - 1
        if kmax < 0 or kmin >= n:
            continue
        out[max(kmin, 0) : min(kmax, n - 1) + 1] = True
    return GridSet1D(m, lo, hi, out)


def az_construct(a: GridSet1D, z) -> GridSet1D:
    """The set A/z intersected with 1 - A/z, on the window [1/8, 1).

    ``a`` must live inside [1/4, 1/2) and ``z`` inside [1/2, 1), which pins
    both covers into the output window: members of the intersection sit in
    (1/4 - delta, 3/4 + delta), as does their reflection about 1/2. The
    result and its reflection are both cellwise subsets of the 1/z-scaled
    cover of ``a``, so their product sets land inside the product of that
    cover with itself with no slack at all.
    """
    if a.is_empty:
        raise DomainError("az_construct needs a nonempty set")
    if a.lo < Fraction(1, 4) or a.hi > Fraction(1, 2):
        raise DomainError(f"az_construct window [{a.lo}, {a.hi}) must sit in [1/4, 1/2)")
    z = as_fraction(z)
    if not Fraction(1, 2) <= z < 1:
        raise DomainError(f"z={z} outside [1/2, 1)")
    lo, hi = Fraction(1, 8), Fraction(1)
    over = affine_image(a, 1 / z, 0, out_lo=lo, out_hi=hi)
    comp = affine_image(a, -1 / z, 1, out_lo=lo, out_hi=hi)
    return GridSet1D(a.m, lo, hi, over.cells & comp.cells)


# ----------------------------------------------------------------------
# index-level pair graphs


@dataclass(frozen=True)
class PairGraph:
    """Subset of A x B recorded as pairs of member-cell indices.

    Edges are (i, j) with i indexing a member cell of ``a_set`` and j of
    ``b_set`` (window-relative indices, like ``GridSet1D.indices``).
    """

    a_set: GridSet1D
    b_set: GridSet1D
    edges: FrozenSet[Tuple[int, int]]

    def __post_init__(self):
        _same_scale(self.a_set, self.b_set)
        object.__setattr__(self, "edges", frozenset(self.edges))
        for i, j in self.edges:
            if not (0 <= i < self.a_set.ncells and self.a_set.cells[i]):
                raise DomainError(f"edge ({i},{j}): {i} is not a member cell of A")
            if not (0 <= j < self.b_set.ncells and self.b_set.cells[j]):
                raise DomainError(f"edge ({i},{j}): {j} is not a member cell of B")

    @property
    def m(self) -> int:
        return self.a_set.m

    @property
    def nedges(self) -> int:
        return len(self.edges)


def full_pair_graph(a: GridSet1D, b: GridSet1D) -> PairGraph:
    edges = frozenset((int(i), int(j)) for i in a.indices for j in b.indices)
    return PairGraph(a, b, edges)


def restricted_sumset(g: PairGraph) -> GridSet1D:
    """{a + b : (a, b) edge of G} at index level, no interval spill."""
    a, b = g.a_set, g.b_set
    lo, hi = a.lo + b.lo, a.hi + b.hi
    n = a.ncells + b.ncells
    cells = np.zeros(n, dtype=bool)
    for i, j in g.edges:
        cells[i + j] = True
    return GridSet1D(g.m, lo, hi, cells)


def additive_energy(a: GridSet1D, b: Optional[GridSet1D] = None) -> int:
    """Number of quadruples with a1 + b1 == a2 + b2 (index level)."""
    if b is None:
        b = a
    _same_scale(a, b)
    conv = np.convolve(a.cells.astype(np.int64), b.cells.astype(np.int64))
    return int(np.dot(conv, conv))


def convolution_peak(a: GridSet1D) -> Tuple[int, int]:
    """Most popular pair sum of A with itself, at the index level.

    Returns (z, count): z is the global index sum with the most
    representations (smallest on ties), count their number. The window
    must be cell-aligned. count times the index-sumset size is at
    least (#A)^2.
    """
    if a.is_empty:
        raise DomainError("convolution_peak of an empty set")
    conv = np.convolve(a.cells.astype(np.int64), a.cells.astype(np.int64))
    r = int(np.argmax(conv))
    return r + 2 * a.aligned_offset(), int(conv[r])


# ----------------------------------------------------------------------
# pair-graph text format: header then one "i j" line per edge, i and j
# global cell indices on [0, 1). Ground sets are read back as the edge
# projections, so isolated member cells do not survive a round trip.


def pairgraph_to_text(g: PairGraph) -> str:
    offa = g.a_set.aligned_offset()
    offb = g.b_set.aligned_offset()
    lines = [f"pairgraph m={g.m}"]
    for i, j in sorted(g.edges):
        lines.append(f"{i + offa} {j + offb}")
    return "\n".join(lines) + "\n"


def pairgraph_from_text(text: str) -> PairGraph:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("pairgraph "):
        raise DomainError("not a pairgraph: missing header")
    try:
        fields = dict(p.split("=", 1) for p in lines[0].split()[1:])
        m = int(fields["m"])
    except (KeyError, ValueError) as exc:
        raise DomainError(f"malformed pairgraph header: {lines[0]!r}") from exc
    edges = []
    n = 1 << m
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise DomainError(f"malformed pairgraph edge line: {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < n and 0 <= j < n):
            raise DomainError(f"edge ({i},{j}) outside [0,1) at m={m}")
        edges.append((i, j))
    a = GridSet1D.from_indices(m, [i for i, _ in edges])
    b = GridSet1D.from_indices(m, [j for _, j in edges])
    return PairGraph(a, b, frozenset(edges))


def save_pairgraph(path, g: PairGraph) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(pairgraph_to_text(g))


def load_pairgraph(path) -> PairGraph:
    with open(path, "r", encoding="ascii") as fh:
        return pairgraph_from_text(fh.read())


# ----------------------------------------------------------------------
# additive-structure extraction from a dense pair graph


@dataclass(frozen=True)
class BsgConfig:
    """Contract constants: sizes shrink by at most big_const*K and the
    full sumset of the output is at most big_const*K**exponent times
    sqrt(#A #B). fallback_limit caps the instance size for the
    deterministic candidate search."""

    big_const: int = 1 << 12
    exponent: int = 5
    fallback_limit: int = 1 << 16


@dataclass(frozen=True)
class BsgResult:
    a_prime: GridSet1D
    b_prime: GridSet1D
    k: Fraction
    size_ratio_a: Fraction
    size_ratio_b: Fraction
    sum_ratio: float
    used_fallback: bool


def _index_sumset_size(ga: np.ndarray, gb: np.ndarray) -> int:
    return len(np.unique(np.add.outer(ga, gb)))


def _contract_ok(ga, gb, fa, fb, k: Fraction, cfg: BsgConfig) -> bool:
    """fa, fb = candidate member index arrays (subsets of ga, gb)."""
    if len(fa) * cfg.big_const * k < len(ga):
        return False
    if len(fb) * cfg.big_const * k < len(gb):
        return False
    s = _index_sumset_size(fa, fb)
    bound = cfg.big_const * k**cfg.exponent
    # s <= bound * sqrt(#A #B), squared to stay in exact arithmetic
    return Fraction(s) ** 2 <= bound**2 * len(ga) * len(gb)


def _popularity_candidate(adj: np.ndarray, e: int):
    """Path-of-length-two extraction: seed on a popular row, keep rows
    sharing many neighbors with the seed, then keep popular columns."""
    na, nb = adj.shape
    deg_a = adj.sum(axis=1)
    rows = np.flatnonzero(2 * na * deg_a >= e)
    if len(rows) == 0:
        return None
    common = (adj[rows].astype(np.int64) @ adj[rows].astype(np.int64).T)
    tau = Fraction(e * e, 2 * na * na * nb)
    linked = common >= float(tau)
    seed = int(np.argmax(linked.sum(axis=1)))
    arows = rows[linked[seed]]
    if len(arows) == 0:
        return None
    sub = adj[arows]
    deg_b = sub.sum(axis=0)
    esub = int(sub.sum())
    if esub == 0:
        return None
    bcols = np.flatnonzero(2 * nb * deg_b >= esub)
    if len(bcols) == 0:
        return None
    return arows, bcols


def bsg_extract(g: PairGraph, k, config: BsgConfig = BsgConfig()) -> BsgResult:
    """Extract large A', B' with a small full sumset from a dense graph.

    Hypotheses (checked, strict): #G > #A #B / K and the restricted
    sumset satisfies #(A +_G B) <= K sqrt(#A #B). The primary route is
    popularity path counting; when the instance is small enough, a
    deterministic candidate search backs it up, so the result always
    satisfies the contract recorded in the config.
    """
    k = as_fraction(k)
    if k <= 0:
        raise DomainError(f"K must be positive, got {k}")
    a, b = g.a_set, g.b_set
    na, nb = a.count, b.count
    e = g.nedges
    if e * k <= na * nb:
        raise HypothesisViolationError(
            f"#G > #A #B / K fails: {e} * {k} <= {na} * {nb}"
        )
    s_g = restricted_sumset(g).count
    if Fraction(s_g) ** 2 > k**2 * na * nb:
        raise HypothesisViolationError(
            f"#(A +_G B) <= K sqrt(#A #B) fails: {s_g}^2 > {k}^2 * {na * nb}"
        )

    ga, gb = _member_globals(a), _member_globals(b)
    pos_a = {int(v): i for i, v in enumerate(ga)}
    pos_b = {int(v): i for i, v in enumerate(gb)}
    offa, offb = a.aligned_offset(), b.aligned_offset()
    adj = np.zeros((na, nb), dtype=bool)
    for i, j in g.edges:
        adj[pos_a[i + offa], pos_b[j + offb]] = True

    used_fallback = False
    pick = _popularity_candidate(adj, e)
    if pick is not None:
        fa, fb = ga[pick[0]], gb[pick[1]]
        if not _contract_ok(ga, gb, fa, fb, k, config):
            pick = None
    if pick is None:
        if na * nb > config.fallback_limit:
            raise DomainError(
                "popularity extraction missed the contract and the instance "
                f"exceeds the fallback limit ({na * nb} > {config.fallback_limit})"
            )
        used_fallback = True
        fa = fb = None
        for cand_a, cand_b in _fallback_candidates(adj, ga, gb):
            if _contract_ok(ga, gb, cand_a, cand_b, k, config):
                fa, fb = cand_a, cand_b
                break
        if fa is None:
            raise DomainError("no candidate pair satisfies the contract")

    a_prime = GridSet1D.from_indices(a.m, (np.asarray(fa) - offa).tolist(), a.lo, a.hi)
    b_prime = GridSet1D.from_indices(b.m, (np.asarray(fb) - offb).tolist(), b.lo, b.hi)
    s_out = _index_sumset_size(np.asarray(fa), np.asarray(fb))
    return BsgResult(
        a_prime=a_prime,
        b_prime=b_prime,
        k=k,
        size_ratio_a=Fraction(na, len(fa)),
        size_ratio_b=Fraction(nb, len(fb)),
        sum_ratio=s_out / float(na * nb) ** 0.5,
        used_fallback=used_fallback,
    )


def _fallback_candidates(adj: np.ndarray, ga: np.ndarray, gb: np.ndarray):
    """Deterministic candidate family, most structured first: popular-sum
    fibers, degree-threshold truncations, then the full pair."""
    sums = {}
    ia, jb = np.nonzero(adj)
    for i, j in zip(ia.tolist(), jb.tolist()):
        sums.setdefault(int(ga[i]) + int(gb[j]), []).append((i, j))
    by_pop = sorted(sums.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    for _, pairs in by_pop[:8]:
        rows = np.unique([i for i, _ in pairs])
        cols = np.unique([j for _, j in pairs])
        yield ga[rows], gb[cols]
    deg_a = adj.sum(axis=1)
    deg_b = adj.sum(axis=0)
    for q in (2, 4, 8):
        rows = np.flatnonzero(deg_a * q >= deg_a.max())
        cols = np.flatnonzero(deg_b * q >= deg_b.max())
        if len(rows) and len(cols):
            yield ga[rows], gb[cols]
    yield ga, gb
