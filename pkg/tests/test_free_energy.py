import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import gammainc, gammaln

from gaussfit.free_energy import (LOWER_C, LOWER_CAP_C, REFINED_C, FreeEnergyCurve,
                                  FreeEnergyPoint, build_curve, check_curve_shape,
                                  check_free_energy_lower_bound, check_free_energy_refined_bound,
                                  check_free_energy_upper_bound, default_w_grid, free_energy_mc,
                                  free_energy_oracle, free_energy_oracle_ball,
                                  free_energy_oracle_box, free_energy_thermo,
                                  gaussian_identity_check, write_curve_csv)
from gaussfit.geometry import Ball, Box
from gaussfit.radial import RadialStats, ball_radial_stats, interval_radial_stats, radial_stats
from gaussfit.reports import FAIL, PASS, SKIP
from gaussfit.sampler import SamplerConfig, sample_uniform

# frozen from 30-digit quadrature
Z_INTERVAL_W1 = 0.155923793657398640       # [0, 1], x0 = 0, w = 1
Z_BALL50_W727 = 3.48535506869124656        # unit ball n = 50, w = 7.27
W_C_BALL50 = 7.28379947386956725           # log(3)/8 / (E2 S) for the unit ball n = 50
Z_BALL50_WC = 3.49195041407709466
RHS_BALL50 = 0.329045286037487566          # E2^2/2 - C E2 S for the unit ball n = 50


def z_interval_closed(a, b, w):
    """-log mean over [a, b] of exp(-w t^2 / 2) by quadrature, shifted by the
    smallest |t| so the integrand stays O(1)."""
    t0 = 0.0 if a <= 0 <= b else min(abs(a), abs(b))
    val, _ = quad(lambda t: math.exp(-0.5 * w * (t * t - t0 * t0)), a, b,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return 0.5 * w * t0 * t0 - math.log(val / (b - a))


def z_ball_closed(n, w):
    """-log of n (2/w)^(n/2) Gamma(n/2) P(n/2, w/2) / 2."""
    log_val = (math.log(n / 2) + n / 2 * math.log(2 / w) + gammaln(n / 2)
               + math.log(gammainc(n / 2, w / 2)))
    return -log_val


def curve_from(points, stats):
    return FreeEnergyCurve("test", stats.x0, points, stats)


class TestOracles:
    def test_constants(self):
        assert LOWER_C == pytest.approx(math.log(3) / 8)
        assert LOWER_CAP_C == pytest.approx(3 + 4 * math.log(4) / math.log(3))
        assert REFINED_C == pytest.approx(math.log(3) / 20)

    def test_interval(self):
        p = free_energy_oracle_box(Box.cube(1), np.zeros(1), 1.0)
        assert p.Z == pytest.approx(Z_INTERVAL_W1, rel=1e-12)

    def test_square_is_additive(self):
        p = free_energy_oracle_box(Box.cube(2), np.zeros(2), 1.0)
        assert p.Z == pytest.approx(2 * Z_INTERVAL_W1, rel=1e-12)

    @pytest.mark.parametrize("w, expected", [(7.27, Z_BALL50_W727), (W_C_BALL50, Z_BALL50_WC)])
    def test_ball50(self, w, expected):
        assert free_energy_oracle_ball(1.0, 50, w).Z == pytest.approx(expected, rel=1e-11)

    @pytest.mark.parametrize("oracle", [
        lambda: free_energy_oracle_box(Box.cube(3), np.zeros(3), 0.0),
        lambda: free_energy_oracle_ball(1.0, 4, 0.0),
    ])
    def test_zero_at_origin(self, oracle):
        assert oracle().Z == 0.0

    def test_ball_n1_is_interval(self):
        a = free_energy_oracle_ball(1.0, 1, 3.0).Z
        b = free_energy_oracle_box(Box(np.array([-1.0]), np.array([1.0])), np.zeros(1), 3.0).Z
        assert a == pytest.approx(b, rel=1e-12)

    @given(n=st.integers(1, 80), w=st.floats(1e-3, 1e4))
    def test_ball_against_incomplete_gamma(self, n, w):
        assert free_energy_oracle_ball(1.0, n, w).Z == pytest.approx(z_ball_closed(n, w),
                                                                     rel=1e-9, abs=1e-12)

    @given(a=st.floats(-5, 4), width=st.floats(0.01, 5), w=st.floats(1e-3, 50))
    def test_box_against_quadrature(self, a, width, w):
        box = Box(np.array([a]), np.array([a + width]))
        expected = z_interval_closed(a, a + width, w)
        assert free_energy_oracle_box(box, np.zeros(1), w).Z == pytest.approx(expected, rel=1e-8,
                                                                               abs=1e-12)

    @given(lam=st.floats(0.1, 10), w=st.floats(0.01, 100))
    def test_ball_scaling_covariance(self, lam, w):
        a = free_energy_oracle_ball(lam, 6, w).Z
        b = free_energy_oracle_ball(1.0, 6, lam**2 * w).Z
        assert a == pytest.approx(b, rel=1e-10, abs=1e-14)

    def test_generic_dispatch(self):
        assert free_energy_oracle(Ball.unit(3), np.zeros(3), 1.0) is not None
        assert free_energy_oracle(Ball.unit(3), np.full(3, 0.1), 1.0) is None


class TestMonteCarlo:
    def test_w_zero(self, square_batch):
        assert free_energy_mc(Box.cube(2), 0.0, square_batch).Z == 0.0

    def test_interval(self, interval_batch):
        p = free_energy_mc(Box.cube(1), 1.0, interval_batch, np.zeros(1))
        assert abs(p.Z - Z_INTERVAL_W1) < 4 * p.se

    def test_ball5(self):
        b = sample_uniform(Ball.unit(5), SamplerConfig(seed=21), 100_000)
        p = free_energy_mc(Ball.unit(5), 2.0, b)
        assert abs(p.Z - free_energy_oracle_ball(1.0, 5, 2.0).Z) < 4 * p.se

    def test_nonnegative(self, disk_batch):
        for w in (0.1, 1.0, 10.0, 100.0):
            assert free_energy_mc(Ball.unit(2), w, disk_batch, warn=False).Z >= 0


class TestThermo:
    def test_interval_agrees_with_mc(self, interval_batch):
        mc = free_energy_mc(Box.cube(1), 1.0, interval_batch, np.zeros(1))
        th = free_energy_thermo(Box.cube(1), 1.0, SamplerConfig(seed=5), x0=np.zeros(1))
        assert abs(mc.Z - th.Z) < 4 * math.hypot(mc.se, th.se)

    def test_ball10_large_w(self):
        th = free_energy_thermo(Ball.unit(10), 20.0, SamplerConfig(seed=9))
        assert abs(th.Z - free_energy_oracle_ball(1.0, 10, 20.0).Z) < 4 * th.se

    def test_slope_at_origin(self):
        st_ = ball_radial_stats(1.0, 3)
        w = 1e-3
        th = free_energy_thermo(Ball.unit(3), w, SamplerConfig(seed=2))
        assert th.Z / w == pytest.approx(0.5 * st_.E2**2, rel=0.01)


class TestGaussianIdentity:
    def test_interval_minus3_3(self):
        body = Box(np.array([-3.0]), np.array([3.0]))
        b = sample_uniform(body, SamplerConfig(seed=1), 50_000)
        rep = gaussian_identity_check(body, 1.0, b, np.zeros(1))
        assert rep.status == PASS
        assert rep.witness["gamma"] == pytest.approx(0.9973, abs=2e-3)

    def test_large_disk(self):
        body = Ball(np.zeros(2), 10.0)
        b = sample_uniform(body, SamplerConfig(seed=1), 50_000)
        assert gaussian_identity_check(body, 1.0, b).status == PASS

    def test_tiny_w(self, square_batch):
        rep = gaussian_identity_check(Box.cube(2), 1e-8, square_batch, np.zeros(2))
        assert rep.status in (PASS, SKIP)
        if rep.status == PASS:
            assert abs(rep.witness["Z_mc"]) < 1e-7

    def test_small_mass_skips(self, ball10_batch):
        rep = gaussian_identity_check(Ball.unit(10), 1.0, ball10_batch)
        assert rep.status == SKIP


class TestChecks:
    def _oracle_curve(self, n):
        st_ = ball_radial_stats(1.0, n)
        grid = default_w_grid(st_)
        pts = [free_energy_oracle_ball(1.0, n, w) for w in grid]
        return curve_from(pts, st_), st_

    def test_default_grid(self):
        st_ = ball_radial_stats(1.0, 50)
        g = default_w_grid(st_)
        assert len(g) == 24
        assert g[0] * st_.E2S == pytest.approx(1e-3) and g[-1] * st_.E2S == pytest.approx(1e3)

    @pytest.mark.parametrize("n", [2, 10, 50])
    def test_shape_on_oracle_curve(self, n):
        curve, _ = self._oracle_curve(n)
        assert all(r.status == PASS for r in check_curve_shape(curve))

    def test_shape_detects_convexity(self):
        st_ = ball_radial_stats(1.0, 2)
        w = np.array([1.0, 2.0, 3.0])
        pts = [FreeEnergyPoint(x, z, 0.0, "mc") for x, z in zip(w, [0.1, 0.2, 0.5])]
        reps = {r.name: r.status for r in check_curve_shape(curve_from(pts, st_))}
        assert reps["Z_concave"] == FAIL

    def test_lower_bound_vacuous_for_disk(self):
        curve, st_ = self._oracle_curve(2)
        rep = check_free_energy_lower_bound(curve, st_)
        assert rep.status == PASS and rep.witness["rhs"] < 0

    def test_lower_bound_ball50_at_threshold(self):
        st_ = ball_radial_stats(1.0, 50)
        assert LOWER_C / st_.E2S == pytest.approx(W_C_BALL50, rel=1e-12)
        p = free_energy_oracle_ball(1.0, 50, W_C_BALL50)
        rep = check_free_energy_lower_bound(curve_from([p], st_), st_)
        assert rep.witness["rhs"] == pytest.approx(RHS_BALL50, rel=1e-10)
        assert rep.status == PASS and p.Z / p.w > RHS_BALL50

    def test_refined_clamps_at_zero(self):
        st_ = interval_radial_stats(0.0, 1.0, 0.0)
        assert st_.E2 < 3 * st_.S
        curve = curve_from([free_energy_oracle_box(Box.cube(1), np.zeros(1), 0.01)], st_)
        rep = check_free_energy_refined_bound(curve, st_)
        assert rep.status == PASS and rep.witness["rhs"] == 0.0

    def test_refined_ball50(self):
        curve, st_ = self._oracle_curve(50)
        assert check_free_energy_refined_bound(curve, st_).status == PASS

    def test_upper_bound_interval(self):
        st_ = interval_radial_stats(0.0, 1.0, 0.0)
        w = 50 / st_.E2S
        assert w == pytest.approx(300)
        p = free_energy_oracle_box(Box.cube(1), np.zeros(1), w)
        rep = check_free_energy_upper_bound(curve_from([p], st_), st_)
        assert rep.status == PASS
        assert rep.witness["rhs"] == pytest.approx(1 / 6 - 0.01 / 6)
        assert rep.witness["empirical_c_u"] > 0.01

    def test_upper_bound_ball50(self):
        curve, st_ = self._oracle_curve(50)
        assert check_free_energy_upper_bound(curve, st_).status == PASS

    def test_upper_bound_can_fail(self):
        curve, st_ = self._oracle_curve(10)
        rep = check_free_energy_upper_bound(curve, st_, c_u=100.0, C_u=0.1)
        assert rep.status == FAIL and rep.violations

    def test_skip_when_no_points(self):
        st_ = ball_radial_stats(1.0, 3)
        curve = curve_from([free_energy_oracle_ball(1.0, 3, 1e6)], st_)
        assert check_free_energy_lower_bound(curve, st_).status == SKIP


class TestCurve:
    def test_point_at_interpolates(self):
        st_ = ball_radial_stats(1.0, 2)
        pts = [FreeEnergyPoint(1.0, 1.0, 0.1, "mc"), FreeEnergyPoint(3.0, 2.0, 0.1, "mc")]
        c = curve_from(pts, st_)
        p = c.point_at(2.0)
        assert p.Z == pytest.approx(1.5) and p.method.startswith("interp")
        assert c.point_at(0.5).Z == pytest.approx(0.5)
        with pytest.raises(ValueError):
            c.point_at(4.0)

    def test_build_curve_pipeline(self, tmp_path):
        body = Box.cube(1)
        cfg = SamplerConfig(seed=4)
        b = sample_uniform(body, cfg, 20_000)
        st_ = radial_stats(b, np.zeros(1))
        grid = default_w_grid(st_, size=8)
        curve = build_curve(body, b, st_, cfg, grid, m_node=5000)
        assert set(curve.by_method) == {"mc", "thermo", "oracle"}
        methods = [p.method for p in curve.points]
        assert methods[0] == "mc" and methods[-1] == "mc+thermo"
        for p, o in zip(curve.points, curve.by_method["oracle"]):
            assert abs(p.Z - o.Z) < 4 * p.se + 1e-12
        path = write_curve_csv(curve, tmp_path / "c.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["w", "Z", "se", "method", "Z_over_w", "lower_bound_rhs",
                           "upper_bound_rhs"]
        assert len(rows) == 9

    def test_point_validation(self):
        with pytest.raises(ValueError):
            FreeEnergyPoint(-1.0, 0.0, 0.0, "mc")


def test_stats_type():
    assert isinstance(ball_radial_stats(1.0, 2), RadialStats)
