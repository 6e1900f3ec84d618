import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaussfit.free_energy import (FreeEnergyCurve, FreeEnergyPoint, default_w_grid,
                                  free_energy_oracle_ball, free_energy_oracle_box)
from gaussfit.geometry import Ball, Box, DegenerateBody
from gaussfit.overlap import (C_PRIME, check_entropy_shape, check_pinsker, choose_w0,
                              corollary_check, entropy_curve, relative_entropy, tv_direct,
                              tv_pinsker)
from gaussfit.radial import RadialStats, ball_radial_stats, interval_radial_stats
from gaussfit.reports import FAIL, PASS
from gaussfit.sampler import SamplerConfig, sample_uniform

# frozen from 30-digit quadrature; interval [0, 1], x0 = 0
H_INTERVAL_W1 = 0.010742873009268027
PINSKER_INTERVAL_W1 = 0.07329008462700813
DTV_INTERVAL_W1 = 0.06183618681899565
W0_INTERVAL = 0.372789450424941
H_INTERVAL_W0 = 0.00152553364817159
# unit ball n = 50 about its center
W0_BALL50 = 3.295458741756479
H_BALL50_W0 = 0.001929354630283775


@pytest.fixture(scope="module")
def interval_stats():
    return interval_radial_stats(0.0, 1.0, 0.0)


def oracle_curve(stats, points):
    return FreeEnergyCurve("t", stats.x0, points, stats)


class TestEntropy:
    def test_interval(self, interval_stats):
        z = free_energy_oracle_box(Box.cube(1), np.zeros(1), 1.0)
        H, se = relative_entropy(interval_stats, z)
        assert H == pytest.approx(H_INTERVAL_W1, rel=1e-10)
        assert se == 0.0

    def test_clipped_at_zero(self, interval_stats):
        H, _ = relative_entropy(interval_stats, FreeEnergyPoint(1.0, 0.2, 0.01, "mc"))
        assert H == 0.0

    @given(n=st.integers(1, 60), w=st.floats(1e-3, 1e3))
    def test_nonnegative_for_balls(self, n, w):
        H, _ = relative_entropy(ball_radial_stats(1.0, n), free_energy_oracle_ball(1.0, n, w))
        assert H >= 0


class TestTV:
    @pytest.mark.parametrize("H, expected", [(0.0, 0.0), (0.5, 0.5), (0.01073, 0.07324616)])
    def test_pinsker_values(self, H, expected):
        assert tv_pinsker(H) == pytest.approx(expected, abs=1e-8)

    def test_pinsker_interval(self):
        assert tv_pinsker(H_INTERVAL_W1) == pytest.approx(PINSKER_INTERVAL_W1, rel=1e-12)

    def test_pinsker_rejects_negative(self):
        with pytest.raises(ValueError):
            tv_pinsker(-1e-3)

    def test_direct_interval(self, interval_batch):
        z = free_energy_oracle_box(Box.cube(1), np.zeros(1), 1.0)
        dtv, se, bias = tv_direct(Box.cube(1), 1.0, z, interval_batch, np.zeros(1))
        assert bias == 0.0
        assert abs(dtv - DTV_INTERVAL_W1) < 4 * se
        assert dtv < PINSKER_INTERVAL_W1

    def test_direct_mismatched_w(self, interval_batch):
        z = free_energy_oracle_box(Box.cube(1), np.zeros(1), 1.0)
        with pytest.raises(ValueError):
            tv_direct(Box.cube(1), 2.0, z, interval_batch)

    def test_direct_bounded_at_large_w(self, interval_batch):
        w = 1e4
        z = free_energy_oracle_box(Box.cube(1), np.zeros(1), w)
        dtv, _, _ = tv_direct(Box.cube(1), w, z, interval_batch, np.zeros(1))
        assert 0.9 < dtv <= 1.0


class TestW0:
    def test_unit_moments(self):
        s = RadialStats.from_moments(np.zeros(1), math.sqrt(1 - 0.01), 0.1)
        assert choose_w0(s) == pytest.approx(0.62132, abs=1e-5)

    def test_interval(self, interval_stats):
        assert choose_w0(interval_stats) == pytest.approx(W0_INTERVAL, rel=1e-12)

    def test_linear_in_c_prime(self, interval_stats):
        assert choose_w0(interval_stats, 2 * C_PRIME) == pytest.approx(2 * W0_INTERVAL)

    def test_degenerate(self):
        with pytest.raises(DegenerateBody):
            choose_w0(RadialStats.from_moments(np.zeros(1), 1.0, 0.0))

    @given(lam=st.floats(0.01, 100))
    def test_scaling(self, lam):
        s = ball_radial_stats(1.0, 5)
        assert choose_w0(s.scaled(lam)) == pytest.approx(choose_w0(s) / lam**2)


class TestCorollary:
    def test_interval(self, interval_stats, interval_batch):
        z = free_energy_oracle_box(Box.cube(1), np.zeros(1), W0_INTERVAL)
        rep = corollary_check(Box.cube(1), interval_stats, oracle_curve(interval_stats, [z]),
                              interval_batch)
        assert rep.H == pytest.approx(H_INTERVAL_W0, rel=1e-8)
        assert rep.H_pass and rep.dtv_pass and not rep.interpolated
        assert all(c.status == PASS for c in rep.checks)
        assert {c.name for c in rep.checks} == {"corollary_entropy", "corollary_tv",
                                                "pinsker_at_w0"}

    def test_ball50(self):
        st_ = ball_radial_stats(1.0, 50)
        assert choose_w0(st_) == pytest.approx(W0_BALL50, rel=1e-12)
        batch = sample_uniform(Ball.unit(50), SamplerConfig(seed=3), 20_000)
        z = free_energy_oracle_ball(1.0, 50, W0_BALL50)
        rep = corollary_check(Ball.unit(50), st_, oracle_curve(st_, [z]), batch)
        assert rep.H == pytest.approx(H_BALL50_W0, rel=1e-8)
        assert all(c.status == PASS for c in rep.checks)

    def test_interpolated_flag(self, interval_stats, interval_batch):
        pts = [free_energy_oracle_box(Box.cube(1), np.zeros(1), w) for w in (0.1, 1.0)]
        rep = corollary_check(Box.cube(1), interval_stats, oracle_curve(interval_stats, pts),
                              interval_batch)
        assert rep.interpolated
        assert rep.to_dict()["interpolated"] is True

    def test_fails_far_beyond_w0(self, interval_stats, interval_batch):
        w = 1e3 * W0_INTERVAL
        z = free_energy_oracle_box(Box.cube(1), np.zeros(1), w)
        rep = corollary_check(Box.cube(1), interval_stats, oracle_curve(interval_stats, [z]),
                              interval_batch, w=w)
        assert rep.H > 0.5 and not rep.H_pass and not rep.dtv_pass
        statuses = {c.name: c.status for c in rep.checks}
        assert statuses["corollary_entropy"] == FAIL
        assert statuses["pinsker_at_w0"] == PASS


class TestShape:
    @pytest.mark.parametrize("n", [1, 5, 50])
    def test_ball_oracle(self, n):
        st_ = ball_radial_stats(1.0, n)
        pts = [free_energy_oracle_ball(1.0, n, w) for w in default_w_grid(st_)]
        reps = check_entropy_shape(oracle_curve(st_, pts))
        assert [r.name for r in reps] == ["H_nondecreasing", "H_convex"]
        assert all(r.status == PASS for r in reps)

    def test_entropy_curve_unclipped(self, interval_stats):
        pts = [FreeEnergyPoint(1.0, 0.2, 0.0, "mc")]
        _, H, _ = entropy_curve(oracle_curve(interval_stats, pts))
        assert H[0] == pytest.approx(1 / 6 - 0.2)

    def test_detects_decrease(self, interval_stats):
        pts = [FreeEnergyPoint(w, z, 1e-4, "mc") for w, z in ((1.0, 0.1), (2.0, 0.3))]
        reps = check_entropy_shape(oracle_curve(interval_stats, pts))
        assert reps[0].status == FAIL and reps[0].violations[0]["w"] == 2.0


class TestPinskerCheck:
    def test_interval(self, interval_stats, interval_batch):
        pts = [free_energy_oracle_box(Box.cube(1), np.zeros(1), w) for w in (0.1, 1.0, 10.0, 100.0)]
        rep = check_pinsker(Box.cube(1), oracle_curve(interval_stats, pts), interval_batch)
        assert rep.status == PASS and len(rep.witness["rows"]) == 4
        for row in rep.witness["rows"]:
            assert row["dtv"] <= row["pinsker"] + 4 * row["se_dtv"]

    def test_detects_bad_curve(self, interval_stats, interval_batch):
        # Z far too small makes H tiny while the densities disagree
        pts = [FreeEnergyPoint(10.0, 1.6, 0.0, "mc")]
        rep = check_pinsker(Box.cube(1), oracle_curve(interval_stats, pts), interval_batch)
        assert rep.status == FAIL
