import csv
import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from gaussfit.bounds import (BoundReport, ConvergenceFailure, GaussianReference,
                             InsufficientSamples, NotNormalized, bobkov_bound,
                             cheeger_1d_exact, cheeger_1d_potential, compute_bounds,
                             consistency_relations, exact_references, halfspace_cheeger_upper,
                             kls_bound, lambda1_1d_solver, optimize_base_point,
                             payne_weinberger_bound, transfer_cheeger, transfer_cheeger_tv,
                             write_bounds_csv)
from gaussfit.geometry import Ball, Box, DegenerateBody, Translated
from gaussfit.radial import RadialStats, ball_radial_stats, interval_radial_stats, radial_stats
from gaussfit.reports import FAIL, PASS, SKIP
from gaussfit.sampler import SamplerConfig, sample_uniform

# frozen from closed-form moments: 1/sqrt(E2 S) for centered unit balls
BOBKOV_E2_BALL = {2: 2.449489742783178, 5: 2.898275349237888, 50: 7.282856582413250}


def shooting_lambda1(w, a, b, x0, bracket):
    """First nonzero Neumann eigenvalue of ``-(p u')'/p`` with ``p = exp(-w (x-x0)^2/2)``
    by shooting on ``u'' - w (x - x0) u' + lam u = 0``."""
    def end_slope(lam):
        sol = solve_ivp(lambda x, y: [y[1], w * (x - x0) * y[1] - lam * y[0]], (a, b),
                        [1.0, 0.0], rtol=1e-11, atol=1e-13)
        return sol.y[1, -1]
    return brentq(end_slope, *bracket, xtol=1e-12)


class TestClosedForm:
    def test_interval_bobkov(self):
        st_ = interval_radial_stats(0.0, 1.0, 0.0)
        bob, bob2 = bobkov_bound(st_)
        assert bob2 == pytest.approx(math.sqrt(6), rel=1e-12)
        assert bob == pytest.approx(1 / math.sqrt(0.5 * math.sqrt(1 / 12)), rel=1e-12)

    @pytest.mark.parametrize("n", sorted(BOBKOV_E2_BALL))
    def test_ball_bobkov(self, n):
        assert bobkov_bound(ball_radial_stats(1.0, n))[1] == pytest.approx(BOBKOV_E2_BALL[n],
                                                                            rel=1e-12)

    @given(lam=st.floats(0.01, 100), c=st.floats(0.01, 10))
    def test_bobkov_scaling(self, lam, c):
        s = ball_radial_stats(1.0, 4)
        a = bobkov_bound(s.scaled(lam), c)
        b = bobkov_bound(s, c)
        assert a[0] == pytest.approx(b[0] / lam) and a[1] == pytest.approx(b[1] / lam)

    def test_degenerate(self):
        with pytest.raises(DegenerateBody):
            bobkov_bound(RadialStats.from_moments(np.zeros(1), 1.0, 0.0))
        with pytest.raises(DegenerateBody):
            kls_bound(RadialStats.from_moments(np.zeros(1), 0.0, 0.0))

    def test_kls(self):
        assert kls_bound(RadialStats.from_moments(np.zeros(2), 2.0, 0.1)) == pytest.approx(
            math.log(2) / 2)

    @pytest.mark.parametrize("body, expected", [
        (Box.cube(1), math.pi**2),
        (Box(np.array([0.0]), np.array([2.0])), math.pi**2 / 4),
        (Box.cube(2), math.pi**2 / 2),
    ])
    def test_payne_weinberger(self, body, expected):
        assert payne_weinberger_bound(body) == pytest.approx(expected, rel=1e-9)

    def test_transfer_at_zero_entropy(self):
        assert transfer_cheeger(4.0, 0.0) == pytest.approx(2 / math.sqrt(2))

    def test_transfer_half(self):
        w = 2.0
        expected = 1 / math.sqrt(2) / ((1 + math.sqrt(0.5)) / math.sqrt(w))
        assert transfer_cheeger(w, 0.5) == pytest.approx(expected)

    @given(H=st.floats(0, 10), w=st.floats(0.01, 100))
    def test_transfer_below_gaussian(self, H, w):
        assert transfer_cheeger(w, H) <= math.sqrt(w / 2) * (1 + 1e-12)

    def test_transfer_validation(self):
        with pytest.raises(ValueError):
            transfer_cheeger(0.0, 0.1)
        with pytest.raises(ValueError):
            transfer_cheeger(1.0, -0.1)
        with pytest.raises(ValueError):
            transfer_cheeger_tv(1.0, 1.0)

    def test_transfer_tv_cap(self):
        peak = math.exp(-1) / 0.5
        assert transfer_cheeger_tv(0.0, 1.0) == pytest.approx(peak)
        assert transfer_cheeger_tv(0.3, 1.0) == pytest.approx(peak)
        assert transfer_cheeger_tv(0.9, 1.0) == pytest.approx(0.01 / math.log(10))

    def test_gaussian_reference(self):
        g = GaussianReference(2.0)
        assert g.d_che == pytest.approx(2 / math.sqrt(math.pi))
        assert g.lambda1 == 2.0 and g.d_exp2 == pytest.approx(1.0)
        assert g.to_dict()["w"] == 2.0


class TestCheeger1D:
    def test_uniform(self):
        x = np.linspace(0, 1, 1001)
        assert cheeger_1d_exact(x, np.ones_like(x)) == pytest.approx(2.0, rel=1e-6)

    def test_gaussian(self):
        val = cheeger_1d_potential(lambda x: 0.5 * x * x, -8.0, 8.0)
        assert val == pytest.approx(math.sqrt(2 / math.pi), rel=1e-6)

    def test_exponential(self):
        assert cheeger_1d_potential(lambda x: x, 0.0, 40.0) == pytest.approx(1.0, rel=1e-4)

    @given(s=st.floats(0.1, 10))
    def test_scaling(self, s):
        val = cheeger_1d_potential(lambda x: 0.5 * (x / s) ** 2, -8 * s, 8 * s, N=20001)
        assert val == pytest.approx(math.sqrt(2 / math.pi) / s, rel=1e-4)

    def test_not_normalized(self):
        x = np.linspace(0, 1, 101)
        with pytest.raises(NotNormalized):
            cheeger_1d_exact(x, np.full_like(x, 2.0))

    def test_bad_input(self):
        with pytest.raises(ValueError):
            cheeger_1d_exact([0, 1], [1, 1])
        x = np.linspace(0, 1, 11)
        with pytest.raises(ValueError):
            cheeger_1d_exact(x, -np.ones_like(x))


class TestLambda1:
    def test_flat_interval(self):
        assert lambda1_1d_solver(lambda x: np.zeros_like(x), 0.0, 1.0) == pytest.approx(
            math.pi**2, rel=1e-8)

    @pytest.mark.parametrize("w", [0.5, 2.0])
    def test_ornstein_uhlenbeck(self, w):
        L = 8 / math.sqrt(w)
        assert lambda1_1d_solver(lambda x: 0.5 * w * x * x, -L, L) == pytest.approx(w, rel=1e-6)

    def test_half_line_ou(self):
        # reflected at 0 the first odd Hermite mode is excluded
        w = 1.0
        assert lambda1_1d_solver(lambda x: 0.5 * w * x * x, 0.0, 8.0) == pytest.approx(
            2 * w, rel=1e-6)

    @pytest.mark.parametrize("w", [0.5, 1.0, 5.0])
    def test_truncated_against_shooting(self, w):
        expected = shooting_lambda1(w, 0.0, 1.0, 0.0, (9.0, 20.0))
        got = lambda1_1d_solver(lambda x: 0.5 * w * x * x, 0.0, 1.0)
        assert got == pytest.approx(expected, rel=1e-6)
        assert got >= math.pi**2

    def test_unresolved_potential(self):
        with pytest.raises(ConvergenceFailure):
            lambda1_1d_solver(lambda x: 400 * np.abs(np.sin(40 * x)), -1.0, 1.0, N=64)

    def test_underflowing_density(self):
        with pytest.raises(ConvergenceFailure):
            lambda1_1d_solver(lambda x: 0.5 * 1e6 * x * x, -1.0, 1.0, N=64)

    def test_validation(self):
        with pytest.raises(ValueError):
            lambda1_1d_solver(lambda x: 0 * x, 0.0, 1.0, N=10)
        with pytest.raises(ValueError):
            lambda1_1d_solver(lambda x: 0 * x, 1.0, 0.0)


class TestHalfspace:
    def test_disk(self, disk_batch):
        cut = halfspace_cheeger_upper(Ball.unit(2), disk_batch)
        assert abs(cut.value - 4 / math.pi) < 4 * cut.se
        assert abs(cut.t) < 0.1

    def test_square(self, square_batch):
        cut = halfspace_cheeger_upper(Box.cube(2), square_batch)
        assert abs(cut.value - 2.0) < 4 * cut.se

    def test_insufficient(self):
        b = sample_uniform(Box.cube(2), SamplerConfig(seed=1), 1000)
        with pytest.raises(InsufficientSamples):
            halfspace_cheeger_upper(Box.cube(2), b)

    def test_fixed_direction(self, square_batch):
        cut = halfspace_cheeger_upper(Box.cube(2), square_batch, directions=[[1.0, 1.0]],
                                      offsets=[1 / math.sqrt(2)])
        # diagonal cut through the center: length sqrt 2 over mass 1/2
        assert abs(cut.value - 2 * math.sqrt(2)) < 4 * cut.se + 0.05
        assert np.allclose(cut.theta, [1 / math.sqrt(2)] * 2)


class TestOptimize:
    def test_ball_center(self):
        c = np.array([0.3, -0.2, 0.5])
        body = Translated(Ball.unit(3), c)
        b = sample_uniform(body, SamplerConfig(seed=7), 40_000)
        x = optimize_base_point(body, b)
        assert np.linalg.norm(x - c) < 0.05

    def test_box_center(self, square_batch):
        x = optimize_base_point(Box.cube(2), square_batch)
        assert np.linalg.norm(x - 0.5) < 0.05 * math.sqrt(2)

    def test_budget_one_is_centroid(self, square_batch):
        x = optimize_base_point(Box.cube(2), square_batch, max_evals=1)
        assert np.allclose(x, square_batch.points.mean(axis=0), atol=0.01)

    def test_translation_invariance(self, square_batch):
        v = np.array([3.0, -1.0])
        moved = dataclasses.replace(square_batch, points=square_batch.points + v)
        a = optimize_base_point(Box.cube(2), square_batch)
        b = optimize_base_point(Translated(Box.cube(2), v), moved)
        assert np.allclose(b - v, a, atol=1e-6)

    def test_does_not_worsen(self, disk_batch):
        x = optimize_base_point(Ball.unit(2), disk_batch)
        s_opt, s_0 = radial_stats(disk_batch, x), radial_stats(disk_batch, np.full(2, 0.2))
        assert s_opt.E * s_opt.S <= s_0.E * s_0.S


class TestReport:
    def test_exact_references(self):
        lam, che = exact_references(Box.cube(1))
        assert lam == pytest.approx(math.pi**2, rel=1e-8) and che == pytest.approx(2.0)
        lam, che = exact_references(Box(np.zeros(2), np.array([2.0, 1.0])))
        assert lam == pytest.approx(math.pi**2 / 4, rel=1e-8) and che is None
        assert exact_references(Ball.unit(3)) == (None, None)

    def test_interval(self, interval_batch):
        st_ = radial_stats(interval_batch, np.array([0.5]))
        w0 = 1.49
        rep = compute_bounds(Box.cube(1), st_, interval_batch, w0=w0, H=0.0015, dtv=0.02)
        statuses = {c.name: c.status for c in rep.checks}
        assert set(statuses) == {"bounds_nonnegative", "cheeger_sandwich", "halfspace_above_exact",
                                 "payne_weinberger", "gaussian_spectral_gap_1d", "cheeger_mazya"}
        assert all(s == PASS for s in statuses.values())
        assert rep.reference_che == (2.0, 0.0)
        assert rep.calibrated_bobkov == pytest.approx(2 * math.sqrt(st_.E2S))
        assert rep.ratios["che_over_sqrt_lambda1"] == pytest.approx(2 / math.pi)

    def test_ball_uses_halfspace(self, ball10_batch):
        st_ = radial_stats(ball10_batch, np.zeros(10))
        rep = compute_bounds(Ball.unit(10), st_, ball10_batch)
        assert rep.exact_che is None and rep.reference_che_upper is not None
        statuses = {c.name: c.status for c in rep.checks}
        assert statuses["cheeger_sandwich"] == PASS and statuses["cheeger_mazya"] == SKIP
        assert rep.kls_che < rep.reference_che[0]

    def test_sandwich_can_fail(self, disk_batch):
        st_ = radial_stats(disk_batch, np.zeros(2))
        rep = compute_bounds(Ball.unit(2), st_, disk_batch, c_calibrated=10.0)
        sand = next(c for c in rep.checks if c.name == "cheeger_sandwich")
        assert sand.status == FAIL and sand.violations

    def test_consistency_skip_and_fail(self):
        base = dict(x0_used=np.zeros(1), bobkov_che=1, bobkov_che_e2=1, kls_che=1, pw_lambda1=1)
        assert consistency_relations(BoundReport(**base))[0].status == SKIP
        bad = BoundReport(**base, exact_lambda1=1.0, exact_che=3.0)
        assert consistency_relations(bad)[0].status == FAIL

    def test_csv(self, interval_batch, tmp_path):
        st_ = radial_stats(interval_batch, np.array([0.5]))
        rep = compute_bounds(Box.cube(1), st_, interval_batch)
        path = write_bounds_csv([("interval", rep)], tmp_path / "b.csv")
        rows = list(csv.DictReader(path.open()))
        assert rows[0]["body"] == "interval" and float(rows[0]["exact_che"]) == pytest.approx(2.0)
        assert set(rep.to_dict()) >= {"bobkov_che", "checks", "ratios"}
