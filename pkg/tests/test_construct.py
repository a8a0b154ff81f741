"""Digit sets, progressions, and the lattice pencil configurations."""

from fractions import Fraction as F

import numpy as np
import pytest

from deltagrid.construct import (
    CantorSpec,
    ap_set,
    cantor_set,
    collinear_tip_config,
    gp_set,
    noncollinear_three_config,
    product_pencils,
)
from deltagrid.errors import DegenerateConfigurationError, DomainError
from deltagrid.grid import GridSet1D, GridSet2D, inflate, nonconcentration_check
from deltagrid.tubes import (
    Tube,
    intersection_measure,
    pencil_lines,
    rasterize_pencil,
    rasterize_tube,
)

import oracles


def central_range(n):
    # the n most central integers around 0, matching the generators
    k0 = -((n - 1) // 2)
    return range(k0, k0 + n)


def exact_family_raster(pencil, m, lo=(0, 0), hi=(1, 1)):
    """Union of per-tube exact rasters; independent of the pencil kernel.

    Only sound for axis-parallel and diagonal families, whose line
    coefficients are exact in floats.
    """
    acc = None
    for a, b, c in pencil_lines(pencil):
        t = rasterize_tube(Tube(F(a), F(b), F(c), pencil.radius), m, lo=lo, hi=hi)
        acc = t if acc is None else GridSet2D(t.m, t.lo, t.hi, acc.cells | t.cells)
    return acc


class TestCantorSpec:
    def test_sigma(self):
        assert CantorSpec(2, 4, 4, (0, 3)).sigma == 0.5
        assert CantorSpec(4, 4, 2, (0, 1, 2, 3)).sigma == 1.0
        assert CantorSpec(1, 4, 3, (2,)).sigma == 0.0

    def test_m_needs_power_of_two(self):
        assert CantorSpec(2, 4, 4, (0, 3)).m == 8
        assert CantorSpec(3, 8, 3, (1, 4, 6)).m == 9
        with pytest.raises(DomainError, match="power of 2"):
            CantorSpec(2, 6, 2, (0, 3)).m

    def test_digits_sorted_canonically(self):
        assert CantorSpec(2, 4, 1, (3, 0)).digits == (0, 3)

    @pytest.mark.parametrize(
        "args",
        [
            (0, 4, 1, ()),
            (2, 1, 1, (0, 0)),
            (2, 4, 0, (0, 3)),
            (5, 4, 1, (0, 1, 2, 3)),
            (2, 4, 1, (0,)),
            (2, 4, 1, (0, 0)),
            (2, 4, 1, (0, 4)),
            (2, 4, 1, (0, -1)),
            (True, 4, 1, (0,)),
        ],
    )
    def test_validation(self, args):
        with pytest.raises(DomainError):
            CantorSpec(*args)


class TestCantorSet:
    def test_middle_half_matches_oracle(self):
        c = cantor_set(CantorSpec(2, 4, 4, (0, 3)))
        assert c.m == 8
        assert c.count == 16
        assert list(map(int, c.indices)) == oracles.cantor_indices(2, 4, 4, (0, 3))
        assert nonconcentration_check(c, 0.5, 4.0).ok

    def test_keep_all_is_full(self):
        assert cantor_set(CantorSpec(4, 4, 2, (0, 1, 2, 3))) == GridSet1D.full(4)

    def test_single_digit_single_cell(self):
        c = cantor_set(CantorSpec(1, 4, 3, (2,)))
        assert list(map(int, c.indices)) == [2 * 16 + 2 * 4 + 2]

    @pytest.mark.parametrize(
        "b, ell, d, digits",
        [
            (2, 4, 4, (0, 3)),
            (2, 4, 3, (1, 2)),
            (4, 8, 2, (0, 2, 5, 7)),
            (1, 4, 3, (2,)),
            (3, 8, 3, (1, 4, 6)),
        ],
    )
    def test_nonconcentration_at_subdivision_constant(self, b, ell, d, digits):
        spec = CantorSpec(b, ell, d, digits)
        c = cantor_set(spec)
        assert c.count == b**d
        assert nonconcentration_check(c, spec.sigma, float(ell)).ok

    def test_non_power_subdivision_rejected(self):
        with pytest.raises(DomainError, match="power of 2"):
            cantor_set(CantorSpec(2, 6, 2, (0, 3)))


class TestApSet:
    def test_frozen_example(self):
        a = ap_set(16, 8, 8)
        assert list(map(int, a.indices)) == list(range(0, 121, 8))

    def test_start_shifts(self):
        a = ap_set(16, 32, 12, start=1024)
        assert list(map(int, a.indices)) == list(range(1024, 1505, 32))

    def test_overflow_rejected(self):
        with pytest.raises(DomainError, match="past"):
            ap_set(16, 18, 8)
        ap_set(16, 17, 8)

    @pytest.mark.parametrize("bad", [(0, 8, 8), (16, 0, 8), (16, 8, 8, -1)])
    def test_validation(self, bad):
        with pytest.raises(DomainError):
            ap_set(*bad)

    @pytest.mark.parametrize("args", [(16, 8, 8), (5, 3, 6), (16, 32, 12, 1024)])
    def test_sigma_one_nonconcentration(self, args):
        assert nonconcentration_check(ap_set(*args), 1.0, 1.0).ok


class TestGpSet:
    def test_frozen_example(self):
        g = gp_set(F(1, 2), 6, 12)
        assert list(map(int, g.indices)) == [32, 64, 128, 256, 512, 1024]
        for k in range(2, 8):
            assert g.contains_point(F(1, 2**k))

    def test_terms_may_share_cells(self):
        g = gp_set(F(1, 2), 8, 4)
        assert list(map(int, g.indices)) == [0, 1, 2, 4]

    def test_growing_ratio(self):
        g = gp_set(F(3, 2), 3, 6)
        assert g.contains_point(F(9, 16))
        with pytest.raises(DomainError, match="leaves"):
            gp_set(2, 3, 6)

    @pytest.mark.parametrize("ratio", [1, 0, F(-1, 2)])
    def test_ratio_validation(self, ratio):
        with pytest.raises(DomainError, match="ratio"):
            gp_set(ratio, 3, 6)

    def test_documented_nonconcentration(self):
        g = gp_set(F(1, 2), 6, 12)
        assert nonconcentration_check(g, 0.1, 6.0).ok
        assert not nonconcentration_check(g, 0.1, 2.0).ok


class TestCollinearTips:
    def rich_points(self, n):
        s = F(1, 2 * n)
        x0 = F(1, 2) - (n - 1) * s / 2
        ks = set(central_range(n))
        return [
            (x0 + i * s, x0 + j * s)
            for i in range(n)
            for j in range(n)
            if (j - i) in ks and (i + j) - (n - 1) in ks
        ]

    def test_family_form(self):
        pens = collinear_tip_config(4, 6)
        dirs = [p.tip.direction() for p in pens]
        assert dirs == [(0, 1), (1, 0), (1, 1), (1, -1)]
        assert all(p.ntubes == 4 for p in pens)
        assert all(p.radius == F(1, 64) for p in pens)

    def test_rich_points_in_all_rasters(self):
        pens = collinear_tip_config(4, 6)
        rasters = [rasterize_pencil(p, 6) for p in pens]
        pts = self.rich_points(4)
        assert len(pts) == 8
        for x, y in pts:
            assert all(r.contains_point(x, y) for r in rasters)
        assert intersection_measure(rasters) == F(7, 512)

    def test_matches_exact_tube_rasters(self):
        for n, m in ((4, 6), (3, 5)):
            for p in collinear_tip_config(n, m):
                assert exact_family_raster(p, m) == rasterize_pencil(p, m)

    def test_lower_bound_sweep(self):
        for m in (5, 6):
            for n in range(1, 2 ** (m - 3) + 1):
                pens = collinear_tip_config(n, m)
                rasters = [rasterize_pencil(p, m) for p in pens]
                d = F(1, 2**m)
                assert intersection_measure(rasters) >= F(n * n, 4) * d * d
                pts = self.rich_points(n)
                assert 4 * len(pts) >= n * n
                for x, y in pts:
                    assert all(r.contains_point(x, y) for r in rasters)

    def test_large_lattice(self):
        pens = collinear_tip_config(16, 7)
        rasters = [rasterize_pencil(p, 7) for p in pens]
        assert intersection_measure(rasters) == F(1151, 16384)

    def test_single_crossing(self):
        rasters = [rasterize_pencil(p, 5) for p in collinear_tip_config(1, 5)]
        assert intersection_measure(rasters) >= F(1, 32) ** 2

    def test_n_too_large(self):
        with pytest.raises(DomainError, match="too large"):
            collinear_tip_config(64, 6)
        with pytest.raises(DomainError, match="too large"):
            collinear_tip_config(17, 6)
        collinear_tip_config(16, 6)

    def test_n_validation(self):
        with pytest.raises(DomainError, match="n must be"):
            collinear_tip_config(0, 6)


class TestNoncollinearThree:
    def lattice_point(self, n, i, j):
        return F(1, 2 ** (n - i)), F(1, 2 ** (n - j))

    def covered_points(self, n):
        ks = set(central_range(n))
        return [
            self.lattice_point(n, i, j)
            for i in range(n)
            for j in range(n)
            if (j - i) in ks
        ]

    def test_tips_and_counts(self):
        cone, vert, horiz = noncollinear_three_config(4, 6)
        assert cone.tip.as_xy() == (0, 0)
        assert cone.radius == F(1, 32)
        assert vert.tip.direction() == (0, 1)
        assert horiz.tip.direction() == (1, 0)
        assert [p.ntubes for p in (cone, vert, horiz)] == [4, 4, 4]

    def test_covered_points_in_all_rasters(self):
        pens = noncollinear_three_config(4, 6)
        rasters = [rasterize_pencil(p, 6) for p in pens]
        pts = self.covered_points(4)
        assert len(pts) == 12
        for x, y in pts:
            assert all(r.contains_point(x, y) for r in rasters)
        meas = intersection_measure(rasters)
        assert meas == F(113, 4096)
        assert meas >= 16 * F(1, 64) ** 2

    def test_axis_families_match_exact_tubes(self):
        _, vert, horiz = noncollinear_three_config(4, 6)
        for p in (vert, horiz):
            assert exact_family_raster(p, 6) == rasterize_pencil(p, 6)

    def test_lower_bound_sweep(self):
        for n, m in [(1, 6), (2, 6), (3, 6), (4, 6), (5, 6), (6, 6), (8, 8)]:
            pens = noncollinear_three_config(n, m)
            rasters = [rasterize_pencil(p, m) for p in pens]
            d = F(1, 2**m)
            assert intersection_measure(rasters) >= F(n * n, 4) * d * d
            for x, y in self.covered_points(n):
                assert all(r.contains_point(x, y) for r in rasters)

    def test_merged_angle_cells_still_cover(self):
        # at m=3 the slopes 1 and 2 share an angle cell; the fat radius
        # keeps every designated point covered anyway
        cone, vert, horiz = noncollinear_three_config(3, 3)
        assert cone.ntubes == 2
        rasters = [rasterize_pencil(p, 3) for p in (cone, vert, horiz)]
        for x, y in self.covered_points(3):
            assert all(r.contains_point(x, y) for r in rasters)
        assert intersection_measure(rasters) == F(15, 32)

    def test_single_point(self):
        rasters = [rasterize_pencil(p, 4) for p in noncollinear_three_config(1, 4)]
        assert intersection_measure(rasters) >= F(1, 16) ** 2

    def test_degenerate_rescale(self):
        with pytest.raises(DegenerateConfigurationError, match="below delta"):
            noncollinear_three_config(7, 6)
        with pytest.raises(DomainError, match="n must be"):
            noncollinear_three_config(0, 6)


WINDOW = ((F(1, 4), F(1, 4)), (F(1, 2), F(1, 2)))


def embed(indices, m):
    """Member cells placed by window-relative index into [1/4, 1/2)."""
    return GridSet1D.from_indices(m, indices, lo=F(1, 4), hi=F(1, 2))


def square_of(a):
    return GridSet2D(a.m, (a.lo, a.lo), (a.hi, a.hi), a.cells[:, None] & a.cells[None, :])


def product_rasters(a):
    lo, hi = WINDOW
    return [rasterize_pencil(p, a.m, lo=lo, hi=hi) for p in product_pencils(a)]


def assert_trapped(a, slack=0):
    sq = square_of(a)
    for r in product_rasters(a):
        fat = inflate(r, slack) if slack else r
        assert bool(np.all(~sq.cells | fat.cells))


class TestProductPencils:
    def test_single_cell(self):
        a = embed([5], 6)
        pens = product_pencils(a)
        assert [p.ntubes for p in pens] == [1, 1, 1, 1]
        assert pens[2].tip.as_xy() == (0, 0)
        assert pens[3].tip.as_xy() == (1, 1)
        assert_trapped(a)

    def test_full_window(self):
        a = GridSet1D.full(6, F(1, 4), F(1, 2))
        pens = product_pencils(a)
        assert [p.ntubes for p in pens] == [16, 16, 14, 8]
        assert_trapped(a)

    def test_axis_directions_mirror_the_set(self):
        a = embed([0, 3, 12, 15], 6)
        vert, horiz, _, _ = product_pencils(a)
        assert horiz.directions == a
        assert vert.directions.lo == F(-1, 2)
        assert vert.directions.hi == F(-1, 4)
        assert np.array_equal(vert.directions.cells, a.cells[::-1])

    def test_axis_families_match_exact_tubes(self):
        a = embed([1, 6, 11], 6)
        vert, horiz, _, _ = product_pencils(a)
        lo, hi = WINDOW
        for p in (vert, horiz):
            assert exact_family_raster(p, 6, lo=lo, hi=hi) == rasterize_pencil(
                p, 6, lo=lo, hi=hi
            )

    def test_cantor_fixture_cellwise(self):
        pattern = cantor_set(CantorSpec(2, 4, 4, (0, 3)))
        a = embed([int(i) for i in pattern.indices], 10)
        pens = product_pencils(a)
        assert [p.ntubes for p in pens] == [16, 16, 152, 92]
        assert_trapped(a)
        assert_trapped(a, slack=1)

    def test_500_random_fixtures(self):
        rng = np.random.default_rng(0)
        for trial in range(500):
            m = int(rng.integers(6, 8))
            ncell = 1 << (m - 2)
            if trial % 2 == 0:
                mask = rng.random(ncell) < rng.uniform(0.05, 0.95)
                if not mask.any():
                    mask[int(rng.integers(ncell))] = True
                a = GridSet1D(m, F(1, 4), F(1, 2), mask)
            else:
                ell = int(rng.choice([2, 4]))
                kbits = ell.bit_length() - 1
                d = int(rng.integers(1, (m - 2) // kbits + 1))
                b = int(rng.integers(1, ell + 1))
                digits = tuple(sorted(rng.choice(ell, size=b, replace=False).tolist()))
                pattern = cantor_set(CantorSpec(b, ell, d, digits))
                stride = 1 << (m - 2 - pattern.m)
                a = embed((np.asarray(pattern.indices) * stride).tolist(), m)
            assert_trapped(a, slack=1)

    def test_empty_rejected(self):
        with pytest.raises(DomainError, match="nonempty"):
            product_pencils(GridSet1D.empty(6, F(1, 4), F(1, 2)))

    def test_window_must_sit_inside(self):
        with pytest.raises(DomainError, match="must sit inside"):
            product_pencils(GridSet1D.full(6))
