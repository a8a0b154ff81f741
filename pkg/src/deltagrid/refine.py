"""Refinement lemmas: heavy-part removal, hyperdyadic scale ladders,
measure pigeonholing, and the two-measure tube-condition refinement.

The heavy-part removal splits a set A into a regular remainder and a
family of concentrated pieces, one per coarse scale.  Scale delta' =
2**j * delta uses anchored half-open windows [a, a + delta') on every
cell anchor a; the anchor is HEAVY when its window holds at least
delta**(-K*eps) * (delta'/delta)**sigma member cells.  Removing all
heavy anchors leaves a set whose window counts stay strictly below that
threshold at every scale (take the lowest remaining cell of a crowded
window: its own window would be crowded, so it would have been removed).
The exported a_star additionally inflates the remainder by one cell on
each side.

The tube-condition refinement lives at the bottom of the module and
needs the tube types; everything above is purely one-dimensional.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dyadic import as_fraction, delta_of
from .errors import DomainError, HypothesisViolationError
from .grid import (
    GridSet1D,
    _window_counts_1d,
    gridset_from_text,
    gridset_to_text,
    inflate,
    intersect,
    union,
)

__all__ = [
    "RefineParams",
    "KtDecomposition",
    "kt_refine",
    "save_decomposition",
    "load_decomposition",
    "hyperdyadic_ladder",
    "pigeonhole_pair",
]


@dataclass(frozen=True)
class RefineParams:
    """Heavy-part removal parameters: target exponent sigma, growth
    constant k (the K in the threshold delta**(-k*eps)), and eps."""

    sigma: float
    k: float
    eps: float

    def __post_init__(self):
        if not 0 < self.sigma <= 1:
            raise DomainError(f"sigma must be in (0, 1], got {self.sigma}")
        if self.k <= 0 or self.eps <= 0:
            raise DomainError("k and eps must be positive")


@dataclass(frozen=True)
class KtDecomposition:
    """Output of kt_refine: the inflated regular part and the heavy
    anchor sets keyed by scale delta' (a Fraction)."""

    source: GridSet1D
    a_star: GridSet1D
    heavy_parts: Dict[Fraction, GridSet1D]
    params: RefineParams

    def remainder(self) -> GridSet1D:
        """Source minus every heavy anchor (before inflation)."""
        out = self.source
        for part in self.heavy_parts.values():
            out = GridSet1D(out.m, out.lo, out.hi, out.cells & ~part.cells)
        return out

    def covers_source(self) -> bool:
        """Exact check: source is inside a_star union all heavy parts."""
        cov = np.array(self.a_star.cells, dtype=bool, copy=True)
        for part in self.heavy_parts.values():
            cov |= part.cells
        return bool(np.all(cov[self.source.cells]))


def kt_refine(a: GridSet1D, params: RefineParams, upper=None) -> KtDecomposition:
    """Split A into heavy parts per scale and an inflated remainder.

    Requires measure(A) <= 4 * delta**(1 - sigma).  Scales run over
    delta' = 2**j * delta, j >= 1, up to ``upper`` (default: the window
    length).  Heavy parts may overlap between scales; the remainder
    drops their union.
    """
    d = a.delta
    limit = 4 * float(d) ** (1.0 - params.sigma)
    if float(a.measure) > limit:
        raise HypothesisViolationError(
            f"measure {float(a.measure):.6g} exceeds 4*delta^(1-sigma) = {limit:.6g}"
        )
    upper = a.hi - a.lo if upper is None else as_fraction(upper)
    thresh_base = 2.0 ** (a.m * params.k * params.eps)
    heavy: Dict[Fraction, GridSet1D] = {}
    removed = np.zeros(a.ncells, dtype=bool)
    scale = 2 * d
    while scale <= upper:
        w = int(scale / d)
        counts = _window_counts_1d(a.cells, w)
        t = thresh_base * float(w) ** params.sigma
        anchors = a.cells & (counts >= t)
        if anchors.any():
            heavy[scale] = GridSet1D(a.m, a.lo, a.hi, anchors)
            removed |= anchors
        scale = 2 * scale
    b = GridSet1D(a.m, a.lo, a.hi, a.cells & ~removed)
    return KtDecomposition(a, inflate(b, 1), heavy, params)


def save_decomposition(path, dec: KtDecomposition) -> None:
    """Write a decomposition as a directory keyed by scale.

    Layout: params.txt, source.gridset, a_star.gridset, and one
    heavy_j<j>.gridset per scale delta' = 2**j * delta.
    """
    os.makedirs(path, exist_ok=True)
    p = dec.params
    with open(os.path.join(path, "params.txt"), "w", encoding="ascii") as fh:
        fh.write(f"sigma = {p.sigma!r}\nk = {p.k!r}\neps = {p.eps!r}\n")
    with open(os.path.join(path, "source.gridset"), "w", encoding="ascii") as fh:
        fh.write(gridset_to_text(dec.source))
    with open(os.path.join(path, "a_star.gridset"), "w", encoding="ascii") as fh:
        fh.write(gridset_to_text(dec.a_star))
    d = dec.source.delta
    for scale, part in dec.heavy_parts.items():
        j = int(scale / d).bit_length() - 1
        with open(os.path.join(path, f"heavy_j{j}.gridset"), "w", encoding="ascii") as fh:
            fh.write(gridset_to_text(part))


def load_decomposition(path) -> KtDecomposition:
    fields = {}
    with open(os.path.join(path, "params.txt"), "r", encoding="ascii") as fh:
        for ln in fh:
            if "=" in ln:
                key, val = ln.split("=", 1)
                fields[key.strip()] = float(val.strip())
    params = RefineParams(fields["sigma"], fields["k"], fields["eps"])
    with open(os.path.join(path, "source.gridset"), "r", encoding="ascii") as fh:
        source = gridset_from_text(fh.read())
    with open(os.path.join(path, "a_star.gridset"), "r", encoding="ascii") as fh:
        a_star = gridset_from_text(fh.read())
    heavy = {}
    d = source.delta
    for name in sorted(os.listdir(path)):
        if name.startswith("heavy_j") and name.endswith(".gridset"):
            j = int(name[len("heavy_j") : -len(".gridset")])
            with open(os.path.join(path, name), "r", encoding="ascii") as fh:
                heavy[(2**j) * d] = gridset_from_text(fh.read())
    return KtDecomposition(source, a_star, heavy, params)


def hyperdyadic_ladder(eps: float, k0: int, kmax: int) -> List[Fraction]:
    """Scales 2**-round((1+eps)**k) for k = k0..kmax, deduplicated.

    The result is strictly decreasing; consecutive k that round to the
    same exponent collapse to one rung.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if k0 < 0 or kmax < k0:
        raise DomainError(f"need 0 <= k0 <= kmax, got k0={k0} kmax={kmax}")
    out: List[Fraction] = []
    for k in range(k0, kmax + 1):
        e = round((1.0 + eps) ** k)
        scale = Fraction(1, 2**e)
        if not out or scale < out[-1]:
            out.append(scale)
    return out


def pigeonhole_pair(parts: Sequence, lam: float, ambient=None) -> Tuple[int, int]:
    """First (1-based, lexicographic) pair of parts whose intersection
    has measure at least lam**2 / 2 times the ambient measure.

    Hypotheses: every part has measure >= lam * ambient measure, and
    len(parts) * lam > 2.  Existence of the pair follows by pigeonhole;
    the search is exhaustive, so a returned pair is certified exactly.
    """
    if not parts:
        raise DomainError("no parts given")
    if ambient is None:
        ambient = parts[0]
        for p in parts[1:]:
            ambient = union(ambient, p)
    lam = Fraction(lam)  # exact binary value of a float lam; deterministic
    mu = ambient.measure
    if len(parts) * lam <= 2:
        raise HypothesisViolationError(
            f"M * lam > 2 fails: {len(parts)} * {float(lam):.6g} <= 2"
        )
    for idx, p in enumerate(parts):
        if p.measure < lam * mu:
            raise HypothesisViolationError(
                f"part {idx + 1} has measure {p.measure} < lam * mu = {lam * mu}"
            )
    want = lam * lam / 2 * mu
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if intersect(parts[i], parts[j]).measure >= want:
                return (i + 1, j + 1)
    raise DomainError("no pair reaches the pigeonhole bound; hypotheses too weak")
