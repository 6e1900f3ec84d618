"""Relative entropy and total variation between the uniform measure on a body
and the conditioned Gaussian at inverse temperature ``w``.

With ``Z`` the log-partition function and ``E2`` the root-mean-square radius,

    H(uniform | gaussian_w) = E2^2 w / 2 - Z(w),

and Pinsker gives ``d_TV <= sqrt(H / 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._stats import batch_se, batch_slices
from .free_energy import LOWER_C, LOWER_CAP_C, FreeEnergyCurve, FreeEnergyPoint
from .geometry import ConvexBody, DegenerateBody
from .radial import RadialStats
from .reports import NSIGMA, CheckReport, verdict
from .sampler import SampleBatch

__all__ = [
    "C_PRIME",
    "OverlapReport",
    "relative_entropy",
    "tv_pinsker",
    "tv_direct",
    "choose_w0",
    "corollary_check",
    "entropy_curve",
    "check_entropy_shape",
    "check_pinsker",
]

# w0 = c'/(E2 S) with c' = min(c, 1/(2C)) from the lower-bound constants
C_PRIME = min(LOWER_C, 1.0 / (2.0 * LOWER_CAP_C))


def relative_entropy(stats: RadialStats, z: FreeEnergyPoint) -> tuple[float, float]:
    """``H = E2^2 w / 2 - Z`` and its standard error.

    Negative values (possible under noise at tiny ``w``) are clipped to 0.
    """
    if z.w < 0:
        raise ValueError("w must be >= 0")
    H = 0.5 * stats.E2**2 * z.w - z.Z
    se = math.hypot(stats.E2 * z.w * stats.se_E2, z.se)
    return max(H, 0.0), se


def tv_pinsker(H: float) -> float:
    if H < 0:
        raise ValueError("relative entropy must be >= 0")
    return math.sqrt(H / 2)


def tv_direct(body: ConvexBody, w: float, z: FreeEnergyPoint, batch: SampleBatch,
              x0=None) -> tuple[float, float, float]:
    """Plug-in ``d_TV = E_uniform |1 - exp(Z - w|x - x0|^2/2)| / 2``.

    Returns ``(dtv, se, bias_bound)``; the last term bounds the effect of the
    error in ``Z`` (the estimator's derivative in ``Z`` is at most 1/2).
    """
    if not math.isclose(z.w, w, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError("free-energy point does not match w")
    if w == 0:
        return 0.0, 0.0, 0.0
    x0 = np.zeros(batch.dimension) if x0 is None else np.asarray(x0, dtype=float)
    expo = np.minimum(z.Z - 0.5 * w * np.sum((batch.points - x0) ** 2, axis=1), 700.0)
    v = 0.5 * np.abs(1.0 - np.exp(expo))
    slices = batch_slices(batch)
    per = np.array([v[s].mean() for s in slices])
    sizes = np.array([s.stop - s.start for s in slices], dtype=float)
    return float(min(v.mean(), 1.0)), batch_se(per, sizes), 0.5 * z.se


def choose_w0(stats: RadialStats, c_prime: float = C_PRIME) -> float:
    if not (stats.S > 0 and stats.E2 > 0):
        raise DegenerateBody("w0 needs E2 > 0 and S > 0")
    return c_prime / stats.E2S


@dataclass
class OverlapReport:
    w0: float
    H: float
    se_H: float
    dtv_pinsker: float
    dtv_direct: float
    se_dtv: float
    dtv_bias_bound: float
    H_pass: bool
    dtv_pass: bool
    interpolated: bool = False
    z: FreeEnergyPoint | None = None
    checks: list[CheckReport] = field(default_factory=list)

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("w0", "H", "se_H", "dtv_pinsker", "dtv_direct", "se_dtv",
                                           "dtv_bias_bound", "H_pass", "dtv_pass", "interpolated")}
        d["z"] = None if self.z is None else self.z.__dict__
        d["checks"] = [c.to_dict() for c in self.checks]
        return d


def corollary_check(body: ConvexBody, stats: RadialStats, curve: FreeEnergyCurve,
                    batch: SampleBatch, c_prime: float = C_PRIME, w: float | None = None,
                    nsigma: float = NSIGMA) -> OverlapReport:
    """``H <= 1/2`` and ``d_TV <= 1/2`` at ``w0 = c'/(E2 S)``.

    ``Z(w0)`` is read off the curve, linearly interpolated in ``w`` between
    grid points when needed (flagged in the report).  Pass ``w`` to evaluate
    somewhere else.
    """
    w0 = choose_w0(stats, c_prime) if w is None else float(w)
    z = curve.point_at(w0)
    interpolated = z.method.startswith("interp")
    H, se_H = relative_entropy(stats, z)
    pins = tv_pinsker(H)
    dtv, se_dtv, bias = tv_direct(body, w0, z, batch, stats.x0)
    H_ok = H - nsigma * se_H <= 0.5
    dtv_ok = dtv - nsigma * se_dtv - bias <= 0.5
    pins_ok = dtv - nsigma * se_dtv - bias <= math.sqrt(max(H + nsigma * se_H, 0.0) / 2)
    wit = {"w0": w0, "c_prime": c_prime, "H": H, "se_H": se_H, "dtv_direct": dtv,
           "se_dtv": se_dtv, "dtv_pinsker": pins, "interpolated": interpolated}
    checks = [
        CheckReport("corollary_entropy", verdict(H_ok), witness=wit | {"bound": 0.5}),
        CheckReport("corollary_tv", verdict(dtv_ok), witness=wit | {"bound": 0.5}),
        CheckReport("pinsker_at_w0", verdict(pins_ok), witness=wit),
    ]
    return OverlapReport(w0, H, se_H, pins, dtv, se_dtv, bias, H_ok, dtv_ok, interpolated, z, checks)


def entropy_curve(curve: FreeEnergyCurve) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(w, H, se_H)`` along a free-energy curve, without clipping."""
    st = curve.stats
    w = curve.w
    H = 0.5 * st.E2**2 * w - curve.Z
    se = np.hypot(st.E2 * w * st.se_E2, curve.se)
    return w, H, se


def check_entropy_shape(curve: FreeEnergyCurve, slack: float = 2.0) -> list[CheckReport]:
    """``H`` nondecreasing and convex along the curve.

    ``E2`` is common to every point, so only the free-energy errors enter the
    tolerances here.
    """
    w, H, _ = entropy_curve(curve)
    se = curve.se
    inc_tol = slack * np.hypot(se[1:], se[:-1]) + 1e-12 * np.abs(H[1:])
    bad_inc = np.nonzero(np.diff(H) < -inc_tol)[0]
    out = [CheckReport("H_nondecreasing", verdict(len(bad_inc) == 0),
                       violations=[{"w": float(w[i + 1])} for i in bad_inc],
                       tolerance=f"{slack:g} sigma")]
    if len(w) >= 3:
        h1, h2 = np.diff(w)[:-1], np.diff(w)[1:]
        s01 = (H[1:-1] - H[:-2]) / h1
        s12 = (H[2:] - H[1:-1]) / h2
        tol = slack * np.sqrt((se[2:] / h2) ** 2 + (se[1:-1] * (1 / h1 + 1 / h2)) ** 2
                              + (se[:-2] / h1) ** 2) + 1e-9 * (np.abs(s01) + np.abs(s12))
        bad = np.nonzero(s01 - s12 > tol)[0]
        out.append(CheckReport("H_convex", verdict(len(bad) == 0),
                               violations=[{"w": float(w[i + 1])} for i in bad],
                               tolerance=f"{slack:g} sigma"))
    return out


def check_pinsker(body: ConvexBody, curve: FreeEnergyCurve, batch: SampleBatch,
                  nsigma: float = NSIGMA) -> CheckReport:
    """``d_TV <= sqrt(H/2)`` at every curve point (both sides at ``nsigma``)."""
    rows, bad = [], []
    st = curve.stats
    for p in curve.points:
        H, se_H = relative_entropy(st, p)
        dtv, se, bias = tv_direct(body, p.w, p, batch, st.x0)
        rhs = math.sqrt(max(H + nsigma * se_H, 0.0) / 2)
        lhs = dtv - nsigma * se - bias
        row = {"w": p.w, "dtv": dtv, "se_dtv": se, "pinsker": math.sqrt(H / 2), "H": H}
        rows.append(row)
        if lhs > rhs:
            bad.append(row)
    return CheckReport("pinsker_domination", verdict(not bad), witness={"rows": rows},
                       violations=bad)
