"""Tube rasters, pencils, tips, homographies, transversality."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from deltagrid.errors import (
    DegenerateConfigurationError,
    DeltaGridError,
    DomainError,
    UnsupportedConfigurationError,
)
from deltagrid.grid import GridSet1D, GridSet2D, intersect
from deltagrid.tubes import (
    AdmissibilityReport,
    Homography,
    Pencil,
    ProjPoint,
    Tube,
    apply_homography,
    homography_distortion,
    homography_from_points,
    intersection_measure,
    min_direction_gap,
    normalize_tips,
    pencil_lines,
    rasterize_pencil,
    rasterize_tube,
    tips_admissible,
    transversal_bound,
)

import oracles


def cells_of(s):
    return {(int(i), int(j)) for i, j in s.indices.tolist()}


class TestProjPoint:
    def test_finite_normalization(self):
        p = ProjPoint(F(2), F(4), F(2))
        assert p.as_xy() == (F(1), F(2))
        assert not p.is_infinite

    def test_direction_canonical(self):
        assert ProjPoint(F(-2), F(-2), F(0)).direction() == (F(1), F(1))
        assert ProjPoint(F(0), F(-3), F(0)).direction() == (F(0), F(1))

    def test_equality_across_scalings(self):
        assert ProjPoint(F(1), F(1)) == ProjPoint(F(3), F(3), F(3))

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            ProjPoint(F(0), F(0), F(0))


class TestRasterizeTube:
    def test_horizontal_frozen(self):
        t = Tube(F(0), F(1), F(-1, 2), F(1, 16))
        r = rasterize_tube(t, 4)
        assert r.count == 32
        assert {j for _, j in cells_of(r)} == {7, 8}

    def test_vertical_frozen(self):
        t = Tube(F(1), F(0), F(0), F(1, 16))
        r = rasterize_tube(t, 4)
        assert r.count == 16
        assert {i for i, _ in cells_of(r)} == {0}

    def test_diagonal_frozen(self):
        t = Tube(F(1), F(-1), F(0), F(1, 64))
        assert rasterize_tube(t, 6).count == 314

    def test_orthogonal_intersection_frozen(self):
        h = rasterize_tube(Tube(F(0), F(1), F(-1, 2), F(1, 64)), 6)
        v = rasterize_tube(Tube(F(1), F(0), F(-1, 2), F(1, 64)), 6)
        inter = intersect(h, v)
        assert cells_of(inter) == {(31, 31), (31, 32), (32, 31), (32, 32)}

    def test_matches_exact_oracle_random(self):
        rng = np.random.default_rng(21)
        m = 5
        for _ in range(25):
            a = F(int(rng.integers(-12, 13)), int(rng.integers(1, 8)))
            b = F(int(rng.integers(-12, 13)), int(rng.integers(1, 8)))
            if a == 0 and b == 0:
                a = F(1)
            c = F(int(rng.integers(-16, 17)), 32)
            r = F(int(rng.integers(1, 6)), 32)
            got = cells_of(rasterize_tube(Tube(a, b, c, r), m))
            want = oracles.oracle_rasterize(a, b, c, r, m)
            assert got == want

    def test_radius_floor(self):
        with pytest.raises(DomainError):
            rasterize_tube(Tube(F(0), F(1), F(0), F(1, 64)), 4)

    def test_custom_window(self):
        t = Tube(F(0), F(1), F(0), F(1, 16))
        r = rasterize_tube(t, 4, lo=(F(-1), F(-1)), hi=(F(1), F(1)))
        assert r.shape == (32, 32)
        want = oracles.oracle_rasterize(
            F(0), F(1), F(0), F(1, 16), 4, lo_x=F(-1), lo_y=F(-1), nx=32, ny=32
        )
        assert cells_of(r) == want


class TestPencil:
    def test_finite_tip_lines(self):
        dirs = GridSet1D.from_indices(4, [0, 4, 8, 12])
        p = Pencil(ProjPoint(F(2), F(2)), dirs, F(1, 16))
        lines = pencil_lines(p)
        assert len(lines) == 4
        for a, b, c in lines:
            assert abs(a * 2.0 + b * 2.0 + c) < 1e-12

    def test_infinite_tip_offsets(self):
        dirs = GridSet1D.from_indices(4, [3, 9])
        p = Pencil(ProjPoint(F(1), F(0), F(0)), dirs, F(1, 16))
        lines = pencil_lines(p)
        # horizontal direction: lines y = t at the offset cell centers
        for (a, b, c), i in zip(lines, [3, 9]):
            assert (a, b) == (0.0, 1.0)
            assert c == -float(F(2 * i + 1, 32))

    def test_raster_union(self):
        dirs = GridSet1D.from_indices(4, [3, 9])
        p = Pencil(ProjPoint(F(1), F(0), F(0)), dirs, F(1, 16))
        r = rasterize_pencil(p, 4)
        t1 = rasterize_tube(Tube(F(0), F(1), -F(7, 32), F(1, 16)), 4)
        t2 = rasterize_tube(Tube(F(0), F(1), -F(19, 32), F(1, 16)), 4)
        assert cells_of(r) == cells_of(t1) | cells_of(t2)

    def test_tip_inside_window_rejected(self):
        dirs = GridSet1D.from_indices(4, [0])
        p = Pencil(ProjPoint(F(1, 2), F(1, 2)), dirs, F(1, 16))
        with pytest.raises(UnsupportedConfigurationError):
            rasterize_pencil(p, 4)

    def test_tip_on_boundary_allowed(self):
        dirs = GridSet1D.from_indices(4, [4])
        p = Pencil(ProjPoint(F(0), F(0)), dirs, F(1, 16))
        rasterize_pencil(p, 4)

    def test_angle_window_validated(self):
        dirs = GridSet1D.from_indices(3, [0], lo=F(1), hi=F(2))
        with pytest.raises(DomainError):
            Pencil(ProjPoint(F(2), F(2)), dirs, F(1, 8))


class TestTipsAdmissible:
    def test_spec_quad_fails_pair_distance(self):
        tips = [
            ProjPoint(F(-1), F(-1)),
            ProjPoint(F(2), F(-1)),
            ProjPoint(F(-1), F(2)),
            ProjPoint(F(2), F(2)),
        ]
        rep = tips_admissible(tips, F(1, 4))
        assert not rep.ok
        assert rep.failed == "pair_distance"
        assert "(1,4)" in rep.detail
        assert "18" in rep.detail

    def test_admissible_config(self):
        # all six tip lines pass below, left of, or above the square
        tips = [
            ProjPoint(F(-2), F(-1)),
            ProjPoint(F(3), F(-1)),
            ProjPoint(F(-1), F(-2)),
            ProjPoint(F(-1), F(4)),
        ]
        rep = tips_admissible(tips, F(1, 7))
        assert rep.ok
        assert rep.failed is None

    def test_tip_too_close_to_square(self):
        tips = [
            ProjPoint(F(1, 2), F(-1, 10)),
            ProjPoint(F(2), F(-1)),
            ProjPoint(F(-1), F(-1)),
            ProjPoint(F(1, 2), F(-3)),
        ]
        rep = tips_admissible(tips, F(1, 5))
        assert not rep.ok
        assert rep.failed == "tip_to_square"

    def test_line_crossing_square(self):
        tips = [
            ProjPoint(F(-1), F(1, 2)),
            ProjPoint(F(2), F(1, 2)),
            ProjPoint(F(-1), F(3)),
            ProjPoint(F(2), F(3)),
        ]
        rep = tips_admissible(tips, F(1, 5))
        assert not rep.ok
        assert rep.failed == "line_crosses_square"

    def test_near_collinear_tips(self):
        tips = [
            ProjPoint(F(-1), F(-1)),
            ProjPoint(F(2), F(-1)),
            ProjPoint(F(5), F(-99, 100)),
            ProjPoint(F(8), F(-1)),
        ]
        rep = tips_admissible(tips, F(1, 5))
        assert not rep.ok

    def test_infinite_tip_reported(self):
        tips = [
            ProjPoint(F(1), F(0), F(0)),
            ProjPoint(F(2), F(-1)),
            ProjPoint(F(-1), F(2)),
            ProjPoint(F(2), F(2)),
        ]
        rep = tips_admissible(tips, F(1, 4))
        assert not rep.ok
        assert rep.failed == "finite"


class TestNormalizeTips:
    def frame(self):
        return [
            ProjPoint(F(-1), F(-1)),
            ProjPoint(F(2), F(-1)),
            ProjPoint(F(-1), F(2)),
            ProjPoint(F(2), F(2)),
        ]

    def test_standard_frame_images(self):
        h, t0 = normalize_tips(self.frame())
        tips = self.frame()
        assert h.apply(tips[0]) == ProjPoint(F(1), F(0), F(0))
        assert h.apply(tips[1]) == ProjPoint(F(0), F(1), F(0))
        assert h.apply(tips[2]) == ProjPoint(F(0), F(0), F(1))
        assert h.apply(tips[3]) == ProjPoint(t0, F(1))

    def test_collinear_rejected(self):
        tips = [
            ProjPoint(F(0), F(0)),
            ProjPoint(F(1), F(1)),
            ProjPoint(F(2), F(2)),
            ProjPoint(F(3), F(5)),
        ]
        with pytest.raises(DegenerateConfigurationError):
            normalize_tips(tips)

    def test_fourth_collinear_rejected(self):
        tips = [
            ProjPoint(F(0), F(0)),
            ProjPoint(F(1), F(0)),
            ProjPoint(F(0), F(1)),
            ProjPoint(F(2), F(0)),
        ]
        with pytest.raises(DegenerateConfigurationError):
            normalize_tips(tips)


class TestHomographyFromPoints:
    def square(self):
        return [
            ProjPoint(F(0), F(0)),
            ProjPoint(F(1), F(0)),
            ProjPoint(F(1), F(1)),
            ProjPoint(F(0), F(1)),
        ]

    def test_identity(self):
        h = homography_from_points(self.square(), self.square())
        for p in self.square():
            assert h.apply(p) == p

    def test_cyclic_rotation(self):
        src = self.square()
        dst = src[1:] + src[:1]
        h = homography_from_points(src, dst)
        for p, q in zip(src, dst):
            assert h.apply(p) == q
        # quarter turn about the square center: check an off-frame point
        assert h.apply(ProjPoint(F(1, 2), F(0))) == ProjPoint(F(1), F(1, 2))

    def test_random_verified(self):
        rng = np.random.default_rng(31)
        done = 0
        while done < 10:
            pts = [
                ProjPoint(F(int(rng.integers(-8, 9)), 4), F(int(rng.integers(-8, 9)), 4))
                for _ in range(8)
            ]
            src, dst = pts[:4], pts[4:]
            try:
                h = homography_from_points(src, dst)
            except DegenerateConfigurationError:
                continue
            for p, q in zip(src, dst):
                assert h.apply(p) == q
            done += 1

    def test_collinear_src_rejected(self):
        src = [
            ProjPoint(F(0), F(0)),
            ProjPoint(F(1), F(0)),
            ProjPoint(F(2), F(0)),
            ProjPoint(F(0), F(1)),
        ]
        with pytest.raises(DegenerateConfigurationError):
            homography_from_points(src, self.square())

    def test_singular_matrix_rejected(self):
        with pytest.raises(DegenerateConfigurationError):
            Homography(((F(1), F(0), F(0)), (F(0), F(1), F(0)), (F(1), F(1), F(0))))

    def test_compose_and_inverse(self):
        h = homography_from_points(self.square(), self.square()[1:] + self.square()[:1])
        ident = h.inverse() @ h
        p = ProjPoint(F(3), F(7))
        assert ident.apply(p) == p


class TestApplyHomography:
    def quarter_turn(self):
        return [
            [F(0), F(-1), F(0)],
            [F(1), F(0), F(0)],
            [F(0), F(0), F(1)],
        ]

    def test_pencil_quarter_turn_exact(self):
        dirs = GridSet1D.from_indices(4, [1, 5, 9])
        p = Pencil(ProjPoint(F(3), F(0)), dirs, F(1, 16))
        q, dist = apply_homography(self.quarter_turn(), p)
        assert q.tip == ProjPoint(F(0), F(3))
        assert set(q.directions.indices.tolist()) == {(i + 8) % 16 for i in (1, 5, 9)}
        assert q.radius == p.radius
        assert dist == 1.0

    def test_pencil_round_trip(self):
        h = self.quarter_turn()
        hinv = [
            [F(0), F(1), F(0)],
            [F(-1), F(0), F(0)],
            [F(0), F(0), F(1)],
        ]
        dirs = GridSet1D.from_indices(4, [2, 3, 11])
        p = Pencil(ProjPoint(F(3), F(1)), dirs, F(1, 16))
        fwd, _ = apply_homography(h, p)
        back, _ = apply_homography(hinv, fwd)
        assert back.tip == p.tip
        assert back.directions == p.directions
        assert back.radius == p.radius

    def test_reflection_exact(self):
        refl = [
            [F(1), F(0), F(0)],
            [F(0), F(-1), F(0)],
            [F(0), F(0), F(1)],
        ]
        dirs = GridSet1D.from_indices(4, [1])
        p = Pencil(ProjPoint(F(3), F(1)), dirs, F(1, 16))
        q, _ = apply_homography(refl, p)
        assert q.tip == ProjPoint(F(3), F(-1))
        # angle cell [t, t+d) reflects onto [-t-d, -t): cell 14 of 16
        assert set(q.directions.indices.tolist()) == {14}

    def test_general_transport_covers_true_images(self):
        h = [
            [F(2), F(1), F(0)],
            [F(0), F(1), F(1)],
            [F(0), F(0), F(3)],
        ]
        dirs = GridSet1D.from_indices(5, [3, 17, 29])
        p = Pencil(ProjPoint(F(4), F(4)), dirs, F(1, 32))
        q, _ = apply_homography(h, p)
        hf = [[float(v) for v in row] for row in h]
        qx, qy = (float(v) for v in q.tip.as_xy())
        px, py = 4.0, 4.0
        d = 1.0 / 32
        for i in (3, 17, 29):
            for frac in (0.1, 0.5, 0.9):
                t = (i + frac) * d * math.pi
                fx, fy = px + math.cos(t), py + math.sin(t)
                w = hf[2][0] * fx + hf[2][1] * fy + hf[2][2]
                x = (hf[0][0] * fx + hf[0][1] * fy + hf[0][2]) / w
                y = (hf[1][0] * fx + hf[1][1] * fy + hf[1][2]) / w
                ang = (math.atan2(y - qy, x - qx) / math.pi) % 1.0
                k = int(ang / d) % 32
                assert q.directions.cells[k]

    def test_grid_transport_translation_exact_cover(self):
        s = GridSet2D.from_indices(3, [(1, 1), (5, 2)])
        shift = [
            [F(1), F(0), F(1, 4)],
            [F(0), F(1), F(1, 8)],
            [F(0), F(0), F(1)],
        ]
        out, dist = apply_homography(shift, s)
        assert dist == pytest.approx(1.0)
        got = cells_of(out)
        offx = int((out.lo[0]) * 8)
        offy = int((out.lo[1]) * 8)
        want = {(1 + 2 - offx, 1 + 1 - offy), (5 + 2 - offx, 2 + 1 - offy)}
        assert want <= got

    def test_grid_transport_is_cover(self):
        h = [
            [F(1), F(1, 3), F(0)],
            [F(0), F(1), F(0)],
            [F(0), F(0), F(1)],
        ]
        s = GridSet2D.from_indices(3, [(2, 3), (6, 6)])
        out, _ = apply_homography(h, s)
        d = F(1, 8)
        for i, j in cells_of(s):
            for fx in (F(1, 10), F(1, 2), F(9, 10)):
                for fy in (F(1, 10), F(1, 2), F(9, 10)):
                    x = (i + fx) * d
                    y = (j + fy) * d
                    xi = x + y / 3
                    yi = y
                    assert out.contains_point(xi, yi)

    def test_infinity_straddle_rejected(self):
        h = [
            [F(1), F(0), F(0)],
            [F(0), F(1), F(0)],
            [F(1), F(0), F(-1, 2)],
        ]
        s = GridSet2D.from_indices(3, [(0, 0), (7, 7)])
        with pytest.raises(DomainError):
            apply_homography(h, s)

    def test_distortion_identity(self):
        s = GridSet2D.from_indices(3, [(0, 0), (3, 3)])
        ident = [
            [F(1), F(0), F(0)],
            [F(0), F(1), F(0)],
            [F(0), F(0), F(1)],
        ]
        assert homography_distortion(ident, s) == pytest.approx(1.0)

    def test_distortion_grows_near_infinity(self):
        h = [
            [F(1), F(0), F(0)],
            [F(0), F(1), F(0)],
            [F(1), F(0), F(2)],
        ]
        s = GridSet2D.full(3)
        assert homography_distortion(h, s) > 1.5


class TestTransversality:
    def test_min_gap_finite(self):
        d1 = GridSet1D.from_indices(4, [0, 1])
        d2 = GridSet1D.from_indices(4, [4])
        p1 = Pencil(ProjPoint(F(-1), F(0)), d1, F(1, 16))
        p2 = Pencil(ProjPoint(F(2), F(0)), d2, F(1, 16))
        gap = min_direction_gap(p1, p2)
        assert gap == pytest.approx(3.0 / 16)

    def test_min_gap_wraps(self):
        d1 = GridSet1D.from_indices(4, [0])
        d2 = GridSet1D.from_indices(4, [15])
        p1 = Pencil(ProjPoint(F(-1), F(0)), d1, F(1, 16))
        p2 = Pencil(ProjPoint(F(2), F(0)), d2, F(1, 16))
        assert min_direction_gap(p1, p2) == pytest.approx(1.0 / 16)

    def test_orthogonal_tubes_within_bound(self):
        p1 = Pencil(ProjPoint(F(0), F(1), F(0)), GridSet1D.from_indices(6, [32]), F(1, 64))
        p2 = Pencil(ProjPoint(F(1), F(0), F(0)), GridSet1D.from_indices(6, [32]), F(1, 64))
        r1 = rasterize_pencil(p1, 6)
        r2 = rasterize_pencil(p2, 6)
        area = float(intersection_measure([r1, r2]))
        bound = transversal_bound(p1, p2, 6)
        assert area <= bound

    def test_intersection_measure_basics(self):
        a = rasterize_tube(Tube(F(0), F(1), F(-1, 8), F(1, 16)), 4)
        b = rasterize_tube(Tube(F(0), F(1), F(-7, 8), F(1, 16)), 4)
        assert intersection_measure([a, b]) == 0
        assert intersection_measure([a, a]) == a.measure
        with pytest.raises(DomainError):
            intersection_measure([])
        c = rasterize_tube(Tube(F(0), F(1), F(-1, 8), F(1, 16)), 5)
        with pytest.raises(DeltaGridError):
            intersection_measure([a, c])

    def test_bound_formula(self):
        d1 = GridSet1D.from_indices(4, [0, 1, 2])
        d2 = GridSet1D.from_indices(4, [8])
        p1 = Pencil(ProjPoint(F(-2), F(0)), d1, F(1, 16))
        p2 = Pencil(ProjPoint(F(3), F(0)), d2, F(1, 16))
        want = 16.0 * 3 * 1 * (1.0 / 16) ** 2 / min_direction_gap(p1, p2)
        assert transversal_bound(p1, p2, 4) == pytest.approx(want)

    def test_zero_gap_rejected(self):
        d = GridSet1D.from_indices(4, [3])
        p1 = Pencil(ProjPoint(F(-1), F(0)), d, F(1, 16))
        p2 = Pencil(ProjPoint(F(2), F(0)), d, F(1, 16))
        with pytest.raises(DomainError):
            transversal_bound(p1, p2, 4)
