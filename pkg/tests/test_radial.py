"""Angle covers, exponent fits, measures, and the tube refinement."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from deltagrid.errors import (
    DeltaGridError,
    DomainError,
    HypothesisViolationError,
    InvalidScaleError,
    ResolutionMismatchError,
)
from deltagrid.grid import GridSet2D, covering_number
from deltagrid.radial import (
    DiscreteMeasure2D,
    GoodPairMask,
    TubeConditionParams,
    ball_condition_check,
    direction_set,
    exponent_fit,
    load_measure,
    measure_from_text,
    measure_to_text,
    pinned_exponent,
    radial_project,
    save_measure,
    tube_condition_refine,
    tube_mass,
)
from deltagrid.tubes import Tube, rasterize_tube

import oracles


def cantor_square(m: int, levels: int) -> GridSet2D:
    axis = oracles.cantor_indices(2, 4, levels, (0, 3))
    return GridSet2D.from_indices(m, [(i, j) for i in axis for j in axis])


class TestRadialProject:
    def test_axis_directions(self):
        s = GridSet2D.from_indices(4, [(15, 0), (0, 15)])
        p = radial_project((F(0), F(0)), s)
        assert set(np.flatnonzero(p.cells).tolist()) == {0, 3, 4}

    def test_empty_projects_empty(self):
        p = radial_project((F(5), F(5)), GridSet2D.empty(5))
        assert p.is_empty and p.m == 5

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(42)
        for trial in range(25):
            m = int(rng.integers(3, 7))
            n = 2**m
            pts = set(map(tuple, rng.integers(0, n, size=(int(rng.integers(1, 14)), 2)).tolist()))
            s = GridSet2D.from_indices(m, pts)
            y = (
                F(2) + F(int(rng.integers(0, 32)), 16),
                F(-1) - F(int(rng.integers(0, 32)), 16),
            )
            got = set(np.flatnonzero(radial_project(y, s).cells).tolist())
            assert got == oracles.oracle_radial_project(y, pts, m), (trial, m, y)

    def test_far_viewpoint_matches_oracle(self):
        pts = {(0, 0), (7, 7), (3, 5)}
        s = GridSet2D.from_indices(3, pts)
        y = (F(100), F(3))
        got = set(np.flatnonzero(radial_project(y, s).cells).tolist())
        assert got == oracles.oracle_radial_project(y, pts, 3)

    def test_viewpoint_too_close(self):
        s = GridSet2D.from_indices(4, [(8, 8)])
        with pytest.raises(DomainError):
            radial_project((F(9, 16), F(35, 64)), s)

    def test_member_center_directions_covered(self):
        s = GridSet2D.from_indices(5, [(1, 2), (20, 9), (13, 31), (7, 7)])
        y = (F(-1), F(3, 2))
        p = radial_project(y, s)
        for i, j in s.indices.tolist():
            cx, cy = s.cell_center(i, j)
            t = math.atan2(float(cy - y[1]), float(cx - y[0])) / (2 * math.pi) % 1.0
            assert p.cells[int(t * 2**5)], (i, j)

    def test_angle_resolution_override(self):
        s = GridSet2D.from_indices(3, [(0, 0), (7, 7)])
        p = radial_project((F(4), F(-2)), s, m_angle=8)
        assert p.m == 8 and p.ncells == 256 and not p.is_empty


class TestDirectionSet:
    def test_two_cells_antipodal(self):
        s = GridSet2D.from_indices(4, [(0, 0), (5, 9)])
        d = direction_set(s)
        marked = np.flatnonzero(d.cells)
        assert len(marked) >= 2
        for k in marked:
            assert d.cells[(k + 8) % 16], k

    def test_full_square_full_circle(self):
        d = direction_set(GridSet2D.full(3))
        assert d.count == d.ncells

    def test_cantor_covering_matches_oracle(self):
        e = cantor_square(8, 4)
        got = direction_set(e)
        cells = {(int(i), int(j)) for i, j in e.indices.tolist()}
        want = sorted(oracles.oracle_direction_set(cells, 8))
        n = 2**8
        for j in range(9):
            w = 2**j
            assert covering_number(got, F(w, n)) == oracles.oracle_covering(want, n, w), w

    def test_needs_two_cells(self):
        with pytest.raises(DomainError):
            direction_set(GridSet2D.from_indices(4, [(3, 3)]))

    def test_contains_every_pinned_projection(self):
        cells = [(2, 3), (25, 4), (9, 28), (17, 17), (3, 21)]
        e = GridSet2D.from_indices(5, cells)
        dirs = direction_set(e)
        for vi, vj in cells:
            y = e.cell_center(vi, vj)
            rest = [c for c in cells if max(abs(c[0] - vi), abs(c[1] - vj)) >= 2]
            proj = radial_project(y, GridSet2D.from_indices(5, rest))
            assert np.all(dirs.cells[proj.cells]), (vi, vj)


class TestExponentFit:
    def test_exact_reciprocal_law(self):
        r = exponent_fit([(F(1, 2**j), 2**j) for j in range(1, 6)])
        assert abs(r.slope - 1.0) < 1e-12
        assert r.residual < 1e-12

    def test_constant_counts(self):
        r = exponent_fit([(0.5, 7), (0.25, 7), (0.125, 7)])
        assert abs(r.slope) < 1e-12

    def test_cantor_slope_half(self):
        from deltagrid.grid import GridSet1D

        a = GridSet1D.from_indices(10, oracles.cantor_indices(2, 4, 5, (0, 3)))
        counts = [(F(1, 2**j), covering_number(a, F(1, 2**j))) for j in range(2, 9)]
        r = exponent_fit(counts)
        assert abs(r.slope - 0.5) <= 0.1

    def test_too_few_scales(self):
        with pytest.raises(DomainError):
            exponent_fit([(0.5, 2), (0.25, 4)])

    def test_duplicate_scales_rejected(self):
        with pytest.raises(DomainError):
            exponent_fit([(0.5, 2), (0.5, 3), (0.25, 4)])

    def test_nonpositive_inputs(self):
        with pytest.raises(DomainError):
            exponent_fit([(0.5, 2), (0.25, 0), (0.125, 8)])
        with pytest.raises(DomainError):
            exponent_fit([(-0.5, 2), (0.25, 4), (0.125, 8)])


class TestPinnedExponent:
    def test_full_square_slope_one(self):
        e = GridSet2D.full(7)
        r = pinned_exponent((F(2), F(2)), e, [F(1, 2**j) for j in range(4, 8)])
        assert abs(r.slope - 1.0) <= 0.15

    def test_single_cell_flat(self):
        e = GridSet2D.from_indices(6, [(10, 50)])
        r = pinned_exponent((F(2), F(2)), e, [F(1, 2**j) for j in range(1, 7)])
        assert abs(r.slope) <= 0.2

    def test_viewpoint_too_close(self):
        with pytest.raises(DomainError):
            pinned_exponent((F(11, 10), F(1, 2)), GridSet2D.full(4), [F(1, 2), F(1, 4), F(1, 8)])


class TestDiscreteMeasure:
    def test_uniform_declares_observed_constant(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(4), 2.0)
        assert mu.c == 1.0
        assert abs(float(mu.weights.sum()) - 1.0) < 2.0**-40

    def test_weight_validation(self):
        s = GridSet2D.from_indices(3, [(0, 0), (1, 1)])
        with pytest.raises(DomainError):
            DiscreteMeasure2D(s, [0.5, 0.4], 1.0, 1.0)
        with pytest.raises(DomainError):
            DiscreteMeasure2D(s, [1.0, 0.0], 1.0, 1.0)
        with pytest.raises(DomainError):
            DiscreteMeasure2D(s, [1.0], 1.0, 1.0)

    def test_parameter_validation(self):
        s = GridSet2D.from_indices(3, [(0, 0)])
        with pytest.raises(DomainError):
            DiscreteMeasure2D(s, [1.0], 2.5, 1.0)
        with pytest.raises(DomainError):
            DiscreteMeasure2D(s, [1.0], 1.0, 0.0)
        with pytest.raises(DomainError):
            DiscreteMeasure2D(GridSet2D.empty(3), [], 1.0, 1.0)

    def test_weight_grid_layout(self):
        s = GridSet2D.from_indices(2, [(0, 3), (2, 1)])
        mu = DiscreteMeasure2D(s, [0.25, 0.75], 1.0, 4.0)
        g = mu.weight_grid()
        assert g[0, 3] == 0.25 and g[2, 1] == 0.75 and g.sum() == 1.0


class TestBallCondition:
    def test_point_mass_frozen(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.from_indices(4, [(3, 5)]), 1.0)
        assert ball_condition_check(mu, 1.0) == 16.0

    def test_uniform_frozen(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(4), 2.0)
        assert ball_condition_check(mu, 2.0) == 1.0

    def test_row_frozen(self):
        row = GridSet2D.from_indices(4, [(i, 7) for i in range(16)])
        mu = DiscreteMeasure2D.uniform(row, 1.0)
        assert ball_condition_check(mu, 1.0) == 1.0

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(3)
        for s in (0.7, 1.3, 2.0):
            pts = sorted(set(map(tuple, rng.integers(0, 8, size=(10, 2)).tolist())))
            raw = rng.random(len(pts)) + 0.1
            w = raw / raw.sum()
            mu = DiscreteMeasure2D(GridSet2D.from_indices(3, pts), w, s, 100.0)
            want = oracles.oracle_ball_condition(dict(zip(pts, w.tolist())), s, 8)
            assert ball_condition_check(mu, s) == pytest.approx(want, rel=1e-9)

    def test_exponent_domain(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(3), 2.0)
        with pytest.raises(DomainError):
            ball_condition_check(mu, 2.5)


class TestMeasureSerialization:
    def test_text_round_trip(self):
        s = GridSet2D.from_indices(4, [(0, 1), (7, 9), (15, 15)], lo=(F(0), F(0)), hi=(F(1), F(1)))
        mu = DiscreteMeasure2D(s, [0.125, 0.5, 0.375], 1.5, 2.25)
        back = measure_from_text(measure_to_text(mu))
        assert back.support == mu.support
        assert np.array_equal(back.weights, mu.weights)
        assert back.s == mu.s and back.c == mu.c

    def test_file_round_trip(self, tmp_path):
        mu = DiscreteMeasure2D.uniform(cantor_square(4, 2), 1.0)
        path = tmp_path / "mu.measure"
        save_measure(path, mu)
        back = load_measure(path)
        assert back.support == mu.support and np.array_equal(back.weights, mu.weights)

    def test_malformed_rejected(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.from_indices(2, [(1, 1), (2, 3)]), 1.0)
        text = measure_to_text(mu)
        with pytest.raises(DomainError):
            measure_from_text(text.replace("measure ", "meas "))
        with pytest.raises(DomainError):
            measure_from_text(text.replace("1 1", "0 0"))
        with pytest.raises(DomainError):
            measure_from_text(text + "3 3 0.5\n")


class TestTubeMass:
    def test_covering_tube(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(4), 2.0)
        assert tube_mass(mu, Tube(0, 1, F(-1, 2), F(2))) == 1.0

    def test_disjoint_tube(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(4), 2.0)
        assert tube_mass(mu, Tube(0, 1, F(-5), F(1, 4))) == 0.0

    def test_thin_tube_uniform(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(4), 2.0)
        assert tube_mass(mu, Tube(0, 1, F(-1, 2), F(1, 16))) == 32.0 / 256.0

    def test_matches_raster_summation(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            m = int(rng.integers(3, 6))
            n = 2**m
            pts = sorted(set(map(tuple, rng.integers(0, n, size=(12, 2)).tolist())))
            raw = rng.random(len(pts)) + 0.05
            mu = DiscreteMeasure2D(GridSet2D.from_indices(m, pts), raw / raw.sum(), 1.0, 50.0)
            t = Tube(
                F(int(rng.integers(-4, 5)), 8) or F(1, 8),
                F(int(rng.integers(-4, 5)), 8),
                F(int(rng.integers(-8, 9)), 16),
                F(int(rng.integers(1, 6)), 16),
            )
            raster = rasterize_tube(t, m)
            want = sum(
                w for (i, j), w in zip(pts, mu.weights.tolist()) if raster.cells[i, j]
            )
            assert tube_mass(mu, t) == pytest.approx(want, abs=1e-12), trial


class TestTubeConditionParams:
    def test_validation(self):
        with pytest.raises(DomainError):
            TubeConditionParams(0.0, 0.5, 1.0, 1, 2)
        with pytest.raises(DomainError):
            TubeConditionParams(0.1, 1.0, 1.0, 1, 2)
        with pytest.raises(DomainError):
            TubeConditionParams(0.1, 0.5, 0.0, 1, 2)
        with pytest.raises(DomainError):
            TubeConditionParams(0.1, 0.5, 1.0, 2, 1)
        with pytest.raises(DomainError):
            TubeConditionParams(0.1, 0.5, 1.0, 0, 2)
        with pytest.raises(DomainError):
            TubeConditionParams(0.1, 0.5, 1.0, 1, 2, m0=-1.0)

    def test_gamma_lag(self):
        p = TubeConditionParams(0.1, 0.5, 1.0, 3, 3)
        assert p.gamma == 2
        assert p.lag_scale() == F(1, 4)
        with pytest.raises(DomainError):
            TubeConditionParams(0.1, 0.99, 7.0, 1, 2)

    def test_ladder_rungs(self):
        p = TubeConditionParams(0.1, 0.5, 1.0, 1, 3)
        assert p.ladder() == [(1, F(1, 4)), (2, F(1, 16)), (3, F(1, 256))]
        q = TubeConditionParams(0.1, 0.5, 0.05, 1, 5)
        assert q.ladder() == [(1, F(1, 2))]


def _single_cell_pair():
    e = GridSet2D.from_indices(4, [(2, 2)], lo=(F(0), F(0)), hi=(F(1), F(1)))
    f = GridSet2D.from_indices(4, [(5, 9)], lo=(F(3, 2), F(3, 2)), hi=(F(5, 2), F(5, 2)))
    return (
        DiscreteMeasure2D(e, [1.0], 1.0, 16.0),
        DiscreteMeasure2D(f, [1.0], 1.0, 16.0),
    )


def _row_and_block():
    row = GridSet2D.from_indices(8, [(i, 128) for i in range(256)])
    blk = GridSet2D.from_indices(
        8,
        [(i, j) for i in range(0, 256, 32) for j in range(0, 256, 32)],
        lo=(F(3, 2), F(0)),
        hi=(F(5, 2), F(1)),
    )
    return DiscreteMeasure2D.uniform(row, 1.0), DiscreteMeasure2D.uniform(blk, 1.0)


class TestTubeConditionRefine:
    def test_single_cells_exclude_their_line(self):
        mu, nu = _single_cell_pair()
        p = TubeConditionParams(eta=0.1, rho=0.5, eps=1.0, k0=1, kmax=2)
        mask, cert = tube_condition_refine(mu, nu, p)
        assert mask.retained_mass == 0.0
        assert cert.ok
        first = cert.scale_reports[0]
        assert first.side == "mu" and first.n_reps == 1 and first.pairs_removed == 1

    def test_constraint_violations_raise(self):
        mu, nu = _single_cell_pair()
        weak_mu = DiscreteMeasure2D(mu.support, [1.0], 0.3, 16.0)
        with pytest.raises(HypothesisViolationError, match="s_mu"):
            tube_condition_refine(weak_mu, nu, TubeConditionParams(0.1, 0.5, 1.0, 1, 1))
        weak_nu = DiscreteMeasure2D(nu.support, [1.0], 0.5, 16.0)
        with pytest.raises(HypothesisViolationError, match="s_nu"):
            tube_condition_refine(mu, weak_nu, TubeConditionParams(0.1, 0.5, 1.0, 1, 1))

    def test_supports_too_close(self):
        mu, _ = _single_cell_pair()
        other = DiscreteMeasure2D(
            GridSet2D.from_indices(4, [(5, 5)], lo=(F(0), F(0)), hi=(F(1), F(1))), [1.0], 1.0, 16.0
        )
        with pytest.raises(HypothesisViolationError, match="closer"):
            tube_condition_refine(mu, other, TubeConditionParams(0.1, 0.5, 1.0, 1, 1))

    def test_resolution_mismatch(self):
        mu, nu = _single_cell_pair()
        fine = DiscreteMeasure2D(
            GridSet2D.from_indices(5, [(10, 18)], lo=(F(3, 2), F(3, 2)), hi=(F(5, 2), F(5, 2))),
            [1.0],
            1.0,
            16.0,
        )
        with pytest.raises(ResolutionMismatchError):
            tube_condition_refine(mu, fine, TubeConditionParams(0.1, 0.5, 1.0, 1, 1))

    def test_ladder_below_grid_rejected(self):
        mu, nu = _single_cell_pair()
        with pytest.raises(InvalidScaleError):
            tube_condition_refine(mu, nu, TubeConditionParams(0.1, 0.5, 1.0, 1, 3))

    def test_coarse_mass_cap(self):
        mu, nu = _row_and_block()
        with pytest.raises(HypothesisViolationError, match="m0"):
            tube_condition_refine(mu, nu, TubeConditionParams(0.1, 0.5, 1.0, 3, 3, m0=0.5))
        _, cert = tube_condition_refine(mu, nu, TubeConditionParams(0.1, 0.5, 1.0, 3, 3, m0=1.1))
        assert cert.ok

    def test_row_fixture_frozen(self):
        mu, nu = _row_and_block()
        p = TubeConditionParams(eta=0.1, rho=0.5, eps=1.0, k0=3, kmax=3)
        mask, cert = tube_condition_refine(mu, nu, p)
        assert cert.ok
        assert mask.retained_mass == 0.875
        mu_side, nu_side = cert.scale_reports
        assert mu_side.n_reps == 1
        assert mu_side.n_flagged == 8
        assert mu_side.n_ambiguous == 0
        assert mu_side.pairs_removed == 2048
        assert nu_side.n_heavy == 0 and nu_side.pairs_removed == 0
        assert mask.recomputed_mass(mu, nu) == pytest.approx(mask.retained_mass, abs=1e-12)

    def test_two_segments_make_point_ambiguous(self):
        seg = set()
        px, py = F(257, 512), F(1025, 512)
        for j in range(256):
            y = F(2 * j + 1, 512)
            for slope in (F(35, 100), F(-35, 100)):
                x = px + slope * (y - py)
                if 0 <= x < 1:
                    seg.add((int(x * 256), j))
        e = GridSet2D.from_indices(8, sorted(seg))
        nu_cells = [(128, 128), (30, 40), (220, 60), (60, 200)]
        f = GridSet2D.from_indices(8, nu_cells, lo=(F(0), F(3, 2)), hi=(F(1), F(5, 2)))
        mu = DiscreteMeasure2D.uniform(e, 2.0)
        nu = DiscreteMeasure2D.uniform(f, 2.0)
        p = TubeConditionParams(eta=0.22, rho=2.0 / 3.0, eps=1.0, k0=3, kmax=3)
        mask, cert = tube_condition_refine(mu, nu, p)
        assert cert.ok
        assert mask.retained_mass == 0.75
        mu_side = cert.scale_reports[0]
        assert mu_side.n_reps == 2
        assert mu_side.n_ambiguous == 1
        cols = {tuple(t): k for k, t in enumerate(nu.support.indices.tolist())}
        aimed = cols[(128, 128)]
        assert not mask.mask[:, aimed].any()
        for cell, k in cols.items():
            if cell != (128, 128):
                assert mask.mask[:, k].all(), cell

    def test_shifted_full_squares_keep_everything(self):
        mu = DiscreteMeasure2D.uniform(GridSet2D.full(3), 2.0)
        nu = DiscreteMeasure2D.uniform(
            GridSet2D.full(3, lo=(F(3, 2), F(3, 2)), hi=(F(5, 2), F(5, 2))), 2.0
        )
        mask, cert = tube_condition_refine(mu, nu, TubeConditionParams(0.1, 0.5, 0.5, 3, 3))
        assert cert.ok
        assert mask.retained_mass == 1.0 and mask.mask.all()
        assert all(r.n_heavy == 0 for r in cert.scale_reports)

    def test_rep_counts_stay_below_bound(self):
        mu, nu = _row_and_block()
        _, cert = tube_condition_refine(mu, nu, TubeConditionParams(0.1, 0.5, 1.0, 3, 3))
        for r in cert.scale_reports:
            assert r.n_reps <= r.rep_bound

    def test_mask_shape_validation(self):
        mu, nu = _single_cell_pair()
        g = GoodPairMask(4, np.ones((2, 2), dtype=bool), 1.0)
        with pytest.raises(DomainError):
            g.recomputed_mass(mu, nu)
