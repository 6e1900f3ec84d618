"""Radial moments and the distribution of ``|X - x0|`` under the uniform
measure: CDF estimates, log-concavity, small-ball tail, Khinchine ratio and
the reverse Chebyshev probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._stats import batch_se, batch_slices
from .geometry import Ball, Box, ConvexBody
from .reports import NSIGMA, PASS, SKIP, CheckReport, verdict
from .sampler import SampleBatch

__all__ = [
    "C1",
    "EmptyBatch",
    "RadialStats",
    "RadialCdf",
    "radial_stats",
    "ball_radial_stats",
    "interval_radial_stats",
    "radial_cdf",
    "default_radial_grid",
    "check_radial_logconcavity",
    "check_small_ball_tail",
    "check_khinchine",
    "check_reverse_chebyshev",
]

# small-ball tail exponent: log(3)/4
C1 = math.log(3.0) / 4.0


class EmptyBatch(ValueError):
    pass


@dataclass(frozen=True)
class RadialStats:
    """Mean ``E``, standard deviation ``S`` and root mean square ``E2`` of
    ``|X - x0|``.  ``E2`` is always formed as ``sqrt(E^2 + S^2)``.
    """

    x0: np.ndarray = field(compare=False)
    E: float
    S: float
    E2: float
    m: int
    se_E: float = 0.0
    se_S: float = 0.0
    se_E2: float = 0.0

    @classmethod
    def from_moments(cls, x0, E, S, m=0, se_E=0.0, se_S=0.0, se_E2=0.0):
        return cls(np.asarray(x0, dtype=float), float(E), float(S),
                   math.sqrt(E * E + S * S), m, se_E, se_S, se_E2)

    def scaled(self, lam: float) -> "RadialStats":
        """Moments of the body dilated by ``lam`` about ``x0``."""
        return RadialStats(self.x0, lam * self.E, lam * self.S, lam * self.E2, self.m,
                           lam * self.se_E, lam * self.se_S, lam * self.se_E2)

    @property
    def E2S(self) -> float:
        return self.E2 * self.S

    def to_dict(self):
        return {"x0": self.x0.tolist(), "E": self.E, "S": self.S, "E2": self.E2, "m": self.m,
                "se_E": self.se_E, "se_S": self.se_S, "se_E2": self.se_E2}


def _moments(r: np.ndarray):
    E = r.mean()
    S = math.sqrt(np.mean((r - E) ** 2))
    return E, S, math.sqrt(E * E + S * S)


def radial_stats(batch: SampleBatch, x0=None) -> RadialStats:
    """Plug-in ``E, S, E2`` with batch-means standard errors."""
    if batch.m == 0:
        raise EmptyBatch("no samples")
    x0 = np.zeros(batch.dimension) if x0 is None else np.asarray(x0, dtype=float)
    r = np.linalg.norm(batch.points - x0, axis=1)
    E, S, E2 = _moments(r)
    slices = batch_slices(batch)
    per = np.array([_moments(r[s]) for s in slices])
    sizes = np.array([s.stop - s.start for s in slices], dtype=float)
    return RadialStats(x0.copy(), E, S, E2, batch.m,
                       batch_se(per[:, 0], sizes), batch_se(per[:, 1], sizes),
                       batch_se(per[:, 2], sizes))


def ball_radial_stats(radius: float, n: int, center=None) -> RadialStats:
    """Exact moments for the uniform ball about its center.

    ``|X|/R`` has density ``n t^(n-1)`` on ``[0, 1]``.
    """
    E = radius * n / (n + 1)
    E2sq = radius**2 * n / (n + 2)
    S = math.sqrt(max(E2sq - E * E, 0.0))
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return RadialStats.from_moments(center, E, S)


def interval_radial_stats(a: float, b: float, x0: float) -> RadialStats:
    """Exact moments of ``|X - x0|`` for ``X`` uniform on ``[a, b]``."""
    L = b - a
    lo, hi = a - x0, b - x0

    def mom(k):
        # integral of |t|^k over [lo, hi]
        def part(s, e):
            return (np.sign(e) * abs(e) ** (k + 1) - np.sign(s) * abs(s) ** (k + 1)) / (k + 1)
        if lo >= 0 or hi <= 0:
            return abs(part(lo, hi))
        return part(0, hi) + abs(part(lo, 0))

    E = mom(1) / L
    E2sq = mom(2) / L
    S = math.sqrt(max(E2sq - E * E, 0.0))
    return RadialStats.from_moments(np.array([float(x0)]), E, S)


@dataclass(frozen=True)
class RadialCdf:
    """``F_i = mu_K{|x - x0| <= r_i}`` on an increasing grid."""

    x0: np.ndarray = field(compare=False)
    r: np.ndarray = field(compare=False)
    F: np.ndarray = field(compare=False)
    se: np.ndarray = field(compare=False)
    method: str = "mc"

    def at(self, radius: float) -> tuple[float, float]:
        """Value at ``radius``; otherwise the next grid point above, which
        over-estimates ``F`` and keeps upper-bound checks conservative."""
        idx = int(np.searchsorted(self.r, radius - 1e-12 * max(1.0, abs(radius))))
        if idx >= len(self.r):
            return 1.0, 0.0
        return float(self.F[idx]), float(self.se[idx])

    def to_dict(self):
        return {"x0": self.x0.tolist(), "r": self.r.tolist(), "F": self.F.tolist(),
                "se": self.se.tolist(), "method": self.method}


def default_radial_grid(batch: SampleBatch, x0, size: int = 64, extra=()) -> np.ndarray:
    """Radii at log-spaced quantile levels of the sample, plus ``extra``."""
    r = np.linalg.norm(batch.points - np.asarray(x0, dtype=float), axis=1)
    levels = np.geomspace(min(20.0 / batch.m, 0.5), 1.0, size)
    grid = np.quantile(r, levels)
    extra = [float(e) for e in extra if e > 0]
    return np.unique(np.concatenate([grid, extra]))


def radial_cdf(body: ConvexBody, x0, r_grid, source) -> RadialCdf:
    """Estimate ``F(r)`` from a uniform batch, or exactly with ``source="oracle"``.

    The oracle path covers balls about their center and boxes of dimension
    one or two (exact formula / one-dimensional quadrature).
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0):
        raise ValueError("radial grid must be strictly increasing")
    x0 = np.asarray(x0, dtype=float)
    if isinstance(source, SampleBatch):
        return _mc_cdf(source, x0, r_grid)
    if source != "oracle":
        raise ValueError("source must be a SampleBatch or 'oracle'")
    if isinstance(body, Ball) and np.allclose(x0, body.center):
        F = np.clip(r_grid / body.radius, 0.0, 1.0) ** body.dimension
        return RadialCdf(x0, r_grid, F, np.zeros_like(F), "ball-oracle")
    if isinstance(body, Box) and body.dimension <= 2:
        F = np.array([_box_cdf(body, x0, r) for r in r_grid])
        return RadialCdf(x0, r_grid, F, np.zeros_like(F), "box-quadrature")
    raise ValueError(f"no radial oracle for {body.kind} about this point")


def _mc_cdf(batch, x0, r_grid):
    r = np.linalg.norm(batch.points - x0, axis=1)
    F = np.searchsorted(np.sort(r), r_grid, side="right") / batch.m
    slices = batch_slices(batch)
    per = np.array([np.mean(r[s][:, None] <= r_grid[None, :], axis=0) for s in slices])
    sizes = np.array([s.stop - s.start for s in slices], dtype=float)
    se_bm = np.array([batch_se(per[:, j], sizes) for j in range(len(r_grid))])
    # never report less than the independent-sample (binomial) error; empty
    # or full counts still carry an error of order 1/m
    p = np.clip(F, 1.0 / batch.m, 1.0 - 1.0 / batch.m)
    se_bin = np.sqrt(p * (1 - p) / batch.m)
    return RadialCdf(x0, r_grid, F, np.maximum(se_bm, se_bin), "mc")


def _box_cdf(box: Box, x0, r):
    lo = box.lower - x0
    hi = box.upper - x0
    vol = float(np.prod(hi - lo))
    if box.dimension == 1:
        return max(0.0, min(hi[0], r) - max(lo[0], -r)) / vol

    def section(x):
        h = r * r - x * x
        if h <= 0:
            return 0.0
        y = math.sqrt(h)
        return max(0.0, min(hi[1], y) - max(lo[1], -y))

    a, b = max(lo[0], -r), min(hi[0], r)
    if b <= a:
        return 0.0
    # kinks where the circle crosses the horizontal edges
    cand = [0.0]
    for c in (lo[1], hi[1]):
        if r * r > c * c:
            k = math.sqrt(r * r - c * c)
            cand += [k, -k]
    brk = [p for p in cand if a < p < b]
    val, _ = integrate.quad(section, a, b, points=brk or None, epsabs=0.0, epsrel=1e-12, limit=200)
    return val / vol


# --- checks ------------------------------------------------------------------

def check_radial_logconcavity(cdf: RadialCdf, nsigma: float = NSIGMA) -> CheckReport:
    """Slopes of ``log F`` must not increase beyond propagated noise."""
    keep = cdf.F > 0
    r, F, se = cdf.r[keep], cdf.F[keep], cdf.se[keep]
    if len(r) < 3:
        return CheckReport("radial_logconcavity", SKIP, note="fewer than 3 positive grid points")
    L = np.log(F)
    sig = se / F
    h1 = np.diff(r)[:-1]
    h2 = np.diff(r)[1:]
    s01 = (L[1:-1] - L[:-2]) / h1
    s12 = (L[2:] - L[1:-1]) / h2
    jump = s12 - s01
    # independent-noise propagation; cumulative counts are positively
    # correlated so this over-states the noise of a slope difference
    tau = nsigma * np.sqrt((sig[2:] / h2) ** 2 + (sig[1:-1] * (1 / h1 + 1 / h2)) ** 2
                           + (sig[:-2] / h1) ** 2)
    tau = tau + 1e-9 * (np.abs(s01) + np.abs(s12))
    bad = np.nonzero(jump > tau)[0]
    violations = [{"r": float(r[i + 1]), "slope_jump": float(jump[i]), "tolerance": float(tau[i])}
                  for i in bad]
    return CheckReport("radial_logconcavity", verdict(len(bad) == 0),
                       witness={"grid_points": int(len(r)),
                                "max_jump_over_tol": float(np.max(jump - tau))},
                       violations=violations)


def check_small_ball_tail(stats: RadialStats, cdf: RadialCdf, c1: float = C1,
                          nsigma: float = NSIGMA) -> tuple[CheckReport, CheckReport]:
    """Small-ball bound ``F(r) <= exp(-c1 (E2 - r)/S)`` on ``[0, E2 - 3S]``,
    plus the Chebyshev anchor ``F(E - 2S) <= 1/4``.
    """
    E, S, E2 = stats.E, stats.S, stats.E2
    anchor_r = E - 2 * S
    if anchor_r <= 0:
        anchor = CheckReport("chebyshev_anchor", PASS,
                             witness={"r": anchor_r, "F": 0.0, "bound": 0.25},
                             note="E - 2S <= 0 so the ball is empty")
    else:
        Fa, sa = cdf.at(anchor_r)
        anchor = CheckReport("chebyshev_anchor", verdict(Fa <= 0.25 + nsigma * sa),
                             witness={"r": anchor_r, "F": Fa, "se": sa, "bound": 0.25})

    if E2 < 3 * S:
        tail = CheckReport("small_ball_tail", SKIP, witness={"E2": E2, "S": S},
                           note="E2 < 3S; the bound is only asserted when E2 >= 3S")
        return tail, anchor
    top = E2 - 3 * S
    sel = cdf.r <= top
    r, F, se = cdf.r[sel], cdf.F[sel], cdf.se[sel]
    bound = np.exp(-c1 * (E2 - r) / S)
    slack = bound + nsigma * se - F
    bad = np.nonzero(slack < 0)[0]
    tail = CheckReport(
        "small_ball_tail", verdict(len(bad) == 0),
        witness={"c1": c1, "E2": E2, "S": S, "r_max": top, "grid_points": int(len(r)),
                 "min_slack": float(slack.min()) if len(r) else None,
                 "max_ratio_F_over_bound": float(np.max(F / bound)) if len(r) else None},
        violations=[{"r": float(r[i]), "F": float(F[i]), "bound": float(bound[i])} for i in bad],
    )
    if len(r) == 0:
        tail.note = "no grid point in [0, E2 - 3S]"
    return tail, anchor


def check_khinchine(stats: RadialStats, c_khin: float = 10.0) -> CheckReport:
    """Ratio ``E2 / E``; flagged when above ``c_khin``."""
    if not stats.E > 0:
        return CheckReport("khinchine_ratio", SKIP, note="E = 0")
    ratio = stats.E2 / stats.E
    return CheckReport("khinchine_ratio", verdict(ratio <= c_khin),
                       witness={"ratio": ratio, "threshold": c_khin})


def check_reverse_chebyshev(batch: SampleBatch, stats: RadialStats, c0_grid=None,
                            floor: float = 0.1, nsigma: float = NSIGMA) -> CheckReport:
    """Curve ``p(c0) = P(|X - x0| <= E - c0 S)`` over ``c0_grid``.

    Passes when ``p(floor) >= floor`` is not rejected at ``nsigma``.  The
    witness carries the largest ``c0`` with ``p(c0) >= c0`` (empirical) and
    with ``p(c0) - nsigma se >= c0`` (certified).
    """
    c0_grid = np.linspace(0.02, 0.98, 49) if c0_grid is None else np.asarray(c0_grid, float)
    if floor not in c0_grid:
        c0_grid = np.unique(np.append(c0_grid, floor))
    r = np.linalg.norm(batch.points - stats.x0, axis=1)
    slices = batch_slices(batch)
    sizes = np.array([s.stop - s.start for s in slices], dtype=float)
    rows = []
    for c0 in c0_grid:
        ind = r <= stats.E - c0 * stats.S
        p = float(ind.mean())
        per = np.array([ind[s].mean() for s in slices])
        se = max(batch_se(per, sizes), math.sqrt(p * (1 - p) / batch.m))
        rows.append({"c0": float(c0), "p": p, "se": se, "holds": p >= c0})
    emp = [row["c0"] for row in rows if row["p"] >= row["c0"]]
    cert = [row["c0"] for row in rows if row["p"] - nsigma * row["se"] >= row["c0"]]
    at_floor = next(row for row in rows if row["c0"] == floor)
    ok = at_floor["p"] + nsigma * at_floor["se"] >= floor
    return CheckReport("reverse_chebyshev", verdict(ok),
                       witness={"floor": floor, "p_at_floor": at_floor["p"],
                                "se_at_floor": at_floor["se"],
                                "c0_empirical": max(emp) if emp else 0.0,
                                "c0_certified": max(cert) if cert else 0.0,
                                "curve": rows})
