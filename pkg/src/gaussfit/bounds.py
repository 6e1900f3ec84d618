"""Cheeger and spectral-gap bounds, the Gaussian references and independent
one-dimensional solvers that sandwich them.

Universal constants that are known only to exist (Bobkov's ``c``, the
transference constant) default to 1.  The suite reports the feasible
constants it observes instead of asserting unknown ones.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import minimize

from ._stats import batch_se, batch_slices
from .geometry import Box, ConvexBody, DegenerateBody
from .radial import RadialStats
from .reports import NSIGMA, SKIP, CheckReport, verdict
from .sampler import SampleBatch

__all__ = [
    "NotNormalized",
    "ConvergenceFailure",
    "InsufficientSamples",
    "GaussianReference",
    "HalfspaceCut",
    "BoundReport",
    "bobkov_bound",
    "optimize_base_point",
    "kls_bound",
    "payne_weinberger_bound",
    "transfer_cheeger",
    "transfer_cheeger_tv",
    "cheeger_1d_exact",
    "cheeger_1d_potential",
    "lambda1_1d_solver",
    "halfspace_cheeger_upper",
    "default_directions",
    "exact_references",
    "consistency_relations",
    "compute_bounds",
    "write_bounds_csv",
]

SLAB_MIN_COUNT = 500


class NotNormalized(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class GaussianReference:
    """Closed-form constants of the Gaussian with covariance ``Id / w``.

    The conditioned Gaussian on any convex body inherits ``d_che`` and
    ``lambda1`` as lower bounds.
    """

    w: float

    @property
    def d_che(self) -> float:
        return math.sqrt(2 / math.pi) * math.sqrt(self.w)

    @property
    def lambda1(self) -> float:
        return self.w

    @property
    def d_exp2(self) -> float:
        return math.sqrt(self.w / 2)

    def to_dict(self):
        return {"w": self.w, "d_che": self.d_che, "lambda1": self.lambda1, "d_exp2": self.d_exp2}


# --- closed-form lower bounds ---------------------------------------------------

def bobkov_bound(stats: RadialStats, c_bob: float = 1.0) -> tuple[float, float]:
    """``(c/sqrt(E S), c/sqrt(E2 S))``."""
    if not (stats.S > 0 and stats.E > 0):
        raise DegenerateBody("Bobkov bound needs E > 0 and S > 0")
    return c_bob / math.sqrt(stats.E * stats.S), c_bob / math.sqrt(stats.E2S)


def kls_bound(stats: RadialStats) -> float:
    if not stats.E > 0:
        raise DegenerateBody("KLS bound needs E > 0")
    return math.log(2.0) / stats.E


def payne_weinberger_bound(body: ConvexBody) -> float:
    """``pi^2 / diam^2`` with a certified diameter upper bound."""
    return math.pi**2 / body.diameter_upper_bound() ** 2


def transfer_cheeger(w: float, H: float, c_transfer: float = 1.0) -> float:
    """Cheeger lower bound transferred from the conditioned Gaussian.

    ``c (1/sqrt 2) / (1/sqrt(w) + sqrt(H/w))``.
    """
    if not w > 0:
        raise ValueError("w must be positive")
    if H < 0:
        raise ValueError("H must be >= 0")
    return c_transfer / math.sqrt(2) / (1 / math.sqrt(w) + math.sqrt(H / w))


def transfer_cheeger_tv(dtv: float, d_che_ref: float, c_tv: float = 1.0) -> float:
    """Total-variation route: ``c eps^2 / log(1/eps) * D_ref`` with ``eps = 1 - dtv``.

    The hypothesis ``d_TV <= 1 - eps`` also holds for every smaller ``eps``,
    so ``eps`` is capped at ``exp(-1/2)`` where ``eps^2/log(1/eps)`` peaks.
    """
    if not 0 <= dtv < 1:
        raise ValueError("need 0 <= dtv < 1")
    eps = min(1.0 - dtv, math.exp(-0.5))
    return c_tv * eps**2 / math.log(1 / eps) * d_che_ref


def _es_objective(P: np.ndarray):
    def f(x0):
        r = np.sqrt(np.sum((P - x0) ** 2, axis=1))
        return float(r.mean() * r.std())
    return f


def optimize_base_point(body: ConvexBody, batch: SampleBatch, max_evals: int = 100,
                        subsample: int = 20000) -> np.ndarray:
    """Local Nelder-Mead search for the ``x0`` minimizing ``E(x0) S(x0)``.

    Every evaluation reuses the same (sub)sample, so the objective is a fixed
    deterministic function.  Starts from the sample centroid; being a local
    search it can miss the global minimum on strongly asymmetric bodies.
    """
    P = batch.points[:: max(1, batch.m // subsample)]
    start = P.mean(axis=0)
    if max_evals <= 1:
        return start
    f = _es_objective(P)
    n = len(start)
    step = 0.1 * max(P.std(axis=0).max(), 1e-12)
    simplex = np.vstack([start, start + step * np.eye(n)])
    res = minimize(f, start, method="Nelder-Mead",
                   options={"maxfev": max_evals, "initial_simplex": simplex,
                            "xatol": 1e-6 * step, "fatol": 0.0})
    best = res.x if res.fun <= f(start) else start
    return np.asarray(best, dtype=float)


# --- one-dimensional references --------------------------------------------------

def cheeger_1d_exact(x, rho, tol: float = 1e-8) -> float:
    """Half-line Cheeger constant ``min_t rho(t) / min(F(t), 1 - F(t))``.

    ``rho`` must integrate to 1 by the trapezoidal rule on ``x``.  Half-line
    cuts are optimal for log-concave densities.
    """
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if x.ndim != 1 or x.shape != rho.shape or len(x) < 3:
        raise ValueError("x and rho must be matching 1D grids of length >= 3")
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    mass = trapezoid(rho, x)
    if abs(mass - 1.0) > tol:
        raise NotNormalized(f"density integrates to {mass!r}")
    F = cumulative_trapezoid(rho, x, initial=0.0)
    # upper tail integrated separately so that 1 - F does not cancel
    G = cumulative_trapezoid(rho[::-1], -x[::-1], initial=0.0)[::-1]
    inner = slice(1, -1)
    denom = np.minimum(F[inner], G[inner])
    with np.errstate(divide="ignore"):
        ratio = np.where(denom > 0, rho[inner] / denom, np.inf)
    return float(ratio.min())


def cheeger_1d_potential(V: Callable, a: float, b: float, N: int = 200001) -> float:
    """Cheeger constant of the normalized ``exp(-V)`` on ``[a, b]`` by grid scan."""
    x = np.linspace(a, b, N)
    v = np.asarray(V(x), dtype=float)
    rho = np.exp(-(v - v.min()))
    rho /= trapezoid(rho, x)
    return cheeger_1d_exact(x, rho)


def _lambda1_fd(V: Callable, a: float, b: float, N: int) -> float:
    h = (b - a) / N
    x = np.linspace(a, b, N + 1)
    xm = 0.5 * (x[:-1] + x[1:])
    v = np.asarray(V(x), dtype=float)
    vm = np.asarray(V(xm), dtype=float)
    shift = min(v.min(), vm.min())
    rho = np.exp(-(v - shift))
    rho_m = np.exp(-(vm - shift))
    # lumped mass, half cells at the Neumann ends
    mass = rho * h
    mass[[0, -1]] *= 0.5
    if not np.all(mass > 0):
        # density underflows somewhere on the grid; reported as non-convergence
        return math.nan
    stiff_diag = np.zeros(N + 1)
    stiff_diag[:-1] += rho_m / h
    stiff_diag[1:] += rho_m / h
    off = -rho_m / h
    d = stiff_diag / mass
    e = off / (np.sqrt(mass[:-1]) * np.sqrt(mass[1:]))
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 1))
    return float(vals[1])


def lambda1_1d_solver(V: Callable, a: float, b: float, N: int = 4096,
                      rtol: float = 0.01) -> float:
    """Smallest nonzero Neumann eigenvalue for the measure ``exp(-V) dx`` on ``[a, b]``.

    Second-order finite differences of ``-(rho f')' / rho``, symmetrized and
    solved as a tridiagonal eigenproblem at ``N`` and ``2N``, then
    Richardson-extrapolated.
    """
    if N < 64:
        raise ValueError("N must be >= 64")
    if not b > a:
        raise ValueError("need a < b")
    l1 = _lambda1_fd(V, a, b, N)
    l2 = _lambda1_fd(V, a, b, 2 * N)
    if not (np.isfinite(l1) and np.isfinite(l2)) or abs(l1 - l2) > rtol * abs(l2):
        raise ConvergenceFailure(f"lambda1 at N and 2N disagree: {l1!r} vs {l2!r}")
    return (4 * l2 - l1) / 3


# --- halfspace upper bound --------------------------------------------------------

@dataclass
class HalfspaceCut:
    value: float
    se: float
    theta: np.ndarray
    t: float
    delta: float
    count: int

    def to_dict(self):
        return {"value": self.value, "se": self.se, "theta": self.theta.tolist(),
                "t": self.t, "delta": self.delta, "count": self.count}


def default_directions(batch: SampleBatch, n_random: int = 8, seed: int = 0) -> np.ndarray:
    """Coordinate axes (at most 10), the top principal axes and a few random
    unit vectors."""
    n = batch.dimension
    dirs = [np.eye(n)[i] for i in range(min(n, 10))]
    if n > 1:
        cov = np.cov(batch.points[:: max(1, batch.m // 20000)].T)
        _, vecs = np.linalg.eigh(np.atleast_2d(cov))
        dirs += [vecs[:, -k] for k in range(1, min(n, 3) + 1)]
        g = np.random.default_rng(seed).standard_normal((n_random, n))
        dirs += list(g / np.linalg.norm(g, axis=1, keepdims=True))
    return np.array(dirs)


def _cut(y: np.ndarray, t: float, delta: float | None, slices) -> tuple[float, float, float, int]:
    if delta is None:
        k = max(SLAB_MIN_COUNT, len(y) // 50)
        half = np.partition(np.abs(y - t), k - 1)[k - 1]
        delta = 2 * half * (1 + 1e-12) + 1e-300
    in_slab = np.abs(y - t) <= delta / 2
    below = y < t
    b = in_slab.mean() / delta
    F = below.mean()
    mass = min(F, 1 - F)
    if mass <= 0:
        return math.inf, 0.0, delta, int(in_slab.sum())
    sign = 1.0 if F <= 0.5 else -1.0
    per_b = np.array([in_slab[s].mean() / delta for s in slices])
    per_F = np.array([below[s].mean() for s in slices])
    lin = per_b / mass - sign * b * per_F / mass**2
    sizes = np.array([s.stop - s.start for s in slices], dtype=float)
    return b / mass, batch_se(lin, sizes), delta, int(in_slab.sum())


def halfspace_cheeger_upper(body: ConvexBody, batch: SampleBatch, directions=None,
                            offsets: Sequence[float] | None = None, levels: int = 17,
                            delta: float | None = None) -> HalfspaceCut:
    """Smallest halfspace-cut Cheeger ratio over ``directions`` and offsets.

    The boundary term is the fraction of samples within ``delta/2`` of the cut
    divided by ``delta``; the default ``delta`` puts ``max(500, m/50)``
    samples in the slab.  Offsets default to quantiles of the projection between 0.1
    and 0.9.
    """
    if batch.m < 4 * SLAB_MIN_COUNT:
        raise InsufficientSamples(f"need at least {4 * SLAB_MIN_COUNT} samples, got {batch.m}")
    dirs = default_directions(batch) if directions is None else np.atleast_2d(directions)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    slices = batch_slices(batch)
    best = None
    for th in dirs:
        y = batch.points @ th
        ts = np.quantile(y, np.linspace(0.1, 0.9, levels)) if offsets is None else offsets
        for t in ts:
            val, se, d, cnt = _cut(y, float(t), delta, slices)
            if cnt < SLAB_MIN_COUNT and delta is None:
                raise InsufficientSamples("slab holds too few samples")
            if best is None or val < best.value:
                best = HalfspaceCut(float(val), float(se), th.copy(), float(t), float(d), cnt)
    return best


# --- report ----------------------------------------------------------------------

@dataclass
class BoundReport:
    x0_used: np.ndarray
    bobkov_che: float
    bobkov_che_e2: float
    kls_che: float
    pw_lambda1: float
    transfer_che: float | None = None
    transfer_w: float | None = None
    transfer_tv_che: float | None = None
    gaussian: GaussianReference | None = None
    reference_che_upper: HalfspaceCut | None = None
    exact_lambda1: float | None = None
    exact_che: float | None = None
    calibrated_bobkov: float | None = None
    constants: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    checks: list[CheckReport] = field(default_factory=list)

    @property
    def reference_che(self) -> tuple[float, float] | None:
        """``(value, se)`` of the best Cheeger reference: exact, else halfspace."""
        if self.exact_che is not None:
            return self.exact_che, 0.0
        if self.reference_che_upper is not None:
            return self.reference_che_upper.value, self.reference_che_upper.se
        return None

    def to_dict(self):
        return {
            "x0_used": np.asarray(self.x0_used).tolist(),
            "bobkov_che": self.bobkov_che,
            "bobkov_che_e2": self.bobkov_che_e2,
            "kls_che": self.kls_che,
            "pw_lambda1": self.pw_lambda1,
            "transfer_che": self.transfer_che,
            "transfer_w": self.transfer_w,
            "transfer_tv_che": self.transfer_tv_che,
            "gaussian": None if self.gaussian is None else self.gaussian.to_dict(),
            "reference_che_upper": (None if self.reference_che_upper is None
                                    else self.reference_che_upper.to_dict()),
            "exact_lambda1": self.exact_lambda1,
            "exact_che": self.exact_che,
            "calibrated_bobkov": self.calibrated_bobkov,
            "constants": self.constants,
            "ratios": self.ratios,
            "checks": [c.to_dict() for c in self.checks],
        }


def _interval(body: ConvexBody) -> tuple[float, float] | None:
    if body.dimension != 1:
        return None
    lo, hi = body.chord(body.interior_point, np.ones(1))
    p = float(body.interior_point[0])
    return p + lo, p + hi


def exact_references(body: ConvexBody) -> tuple[float | None, float | None]:
    """``(lambda1, D_che)`` of the uniform measure where known independently.

    Intervals go through the 1D solvers; a box in higher dimension has
    ``lambda1`` of its longest side (the spectrum of a product is the sum).
    """
    iv = _interval(body)
    if iv is not None:
        a, b = iv
        lam = lambda1_1d_solver(lambda x: np.zeros_like(x), a, b)
        x = np.linspace(a, b, 4097)
        che = cheeger_1d_exact(x, np.full_like(x, 1.0 / (b - a)))
        return lam, che
    if isinstance(body, Box):
        a = 0.0
        b = float(np.max(body.upper - body.lower))
        return lambda1_1d_solver(lambda x: np.zeros_like(x), a, b), None
    return None, None


def consistency_relations(report: BoundReport, nsigma: float = NSIGMA) -> list[CheckReport]:
    """Cheeger-Maz'ya ``sqrt(lambda1) >= D_che / 2`` on exact values and the
    recorded ratio ``D_che / sqrt(lambda1)``."""
    lam, ref = report.exact_lambda1, report.reference_che
    if lam is not None and ref is not None:
        report.ratios["che_over_sqrt_lambda1"] = ref[0] / math.sqrt(lam)
    if lam is None or report.exact_che is None:
        return [CheckReport("cheeger_mazya", SKIP, note="no exact 1D values")]
    ok = math.sqrt(lam) >= 0.5 * report.exact_che
    return [CheckReport("cheeger_mazya", verdict(ok), tolerance="exact",
                        witness={"sqrt_lambda1": math.sqrt(lam),
                                 "half_che": 0.5 * report.exact_che})]


def compute_bounds(body: ConvexBody, stats: RadialStats, batch: SampleBatch,
                   w0: float | None = None, H: float | None = None, dtv: float | None = None,
                   c_bob: float = 1.0, c_transfer: float = 1.0, c_tv: float = 1.0,
                   c_calibrated: float = 0.1, halfspace: bool = True,
                   nsigma: float = NSIGMA) -> BoundReport:
    """Every bound for one body, with its references and consistency checks.

    ``c_calibrated`` is the Bobkov/transfer constant used in the sandwich
    check; the empirical one for this body is reported as
    ``calibrated_bobkov``.
    """
    bob, bob2 = bobkov_bound(stats, c_bob)
    rep = BoundReport(x0_used=np.asarray(stats.x0), bobkov_che=bob, bobkov_che_e2=bob2,
                      kls_che=kls_bound(stats), pw_lambda1=payne_weinberger_bound(body),
                      constants={"c_bob": c_bob, "c_transfer": c_transfer, "c_tv": c_tv,
                                 "c_calibrated": c_calibrated})
    if w0 is not None:
        rep.gaussian = GaussianReference(w0)
        if H is not None:
            rep.transfer_che = transfer_cheeger(w0, H, c_transfer)
            rep.transfer_w = w0
        if dtv is not None and dtv < 1:
            rep.transfer_tv_che = transfer_cheeger_tv(dtv, rep.gaussian.d_che, c_tv)
    rep.exact_lambda1, rep.exact_che = exact_references(body)
    if halfspace and batch.m >= 4 * SLAB_MIN_COUNT:
        rep.reference_che_upper = halfspace_cheeger_upper(body, batch)

    checks = []
    vals = [rep.bobkov_che, rep.bobkov_che_e2, rep.kls_che, rep.pw_lambda1]
    vals += [v for v in (rep.transfer_che, rep.transfer_tv_che) if v is not None]
    checks.append(CheckReport("bounds_nonnegative",
                              verdict(all(v >= 0 and math.isfinite(v) for v in vals)),
                              tolerance="exact"))
    ref = rep.reference_che
    if ref is not None:
        val, se = ref
        rep.calibrated_bobkov = val * math.sqrt(stats.E2S)
        rep.ratios["kls_over_reference"] = rep.kls_che / val
        lowers = {"bobkov_e2": c_calibrated / math.sqrt(stats.E2S)}
        if rep.transfer_che is not None:
            lowers["transfer"] = c_calibrated * rep.transfer_che / c_transfer
        bad = [{"bound": k, "value": v, "reference": val} for k, v in lowers.items()
               if v > val + nsigma * se]
        checks.append(CheckReport("cheeger_sandwich", verdict(not bad),
                                  witness={"reference": val, "se": se, "lowers": lowers,
                                           "calibrated_bobkov": rep.calibrated_bobkov},
                                  violations=bad))
        if rep.exact_che is not None and rep.reference_che_upper is not None:
            up = rep.reference_che_upper
            ok = rep.exact_che <= up.value + nsigma * up.se
            checks.append(CheckReport("halfspace_above_exact", verdict(ok),
                                      witness={"exact": rep.exact_che, "upper": up.value,
                                               "se": up.se}))
    else:
        checks.append(CheckReport("cheeger_sandwich", SKIP, note="no Cheeger reference"))
    if rep.exact_lambda1 is not None:
        ok = rep.pw_lambda1 <= rep.exact_lambda1 * (1 + 1e-6)
        checks.append(CheckReport("payne_weinberger", verdict(ok), tolerance="1e-6 relative",
                                  witness={"pw": rep.pw_lambda1, "exact": rep.exact_lambda1}))
    iv = _interval(body)
    if iv is not None and w0 is not None:
        x0 = float(stats.x0[0])
        lam_w = lambda1_1d_solver(lambda x: 0.5 * w0 * (x - x0) ** 2, *iv)
        checks.append(CheckReport("gaussian_spectral_gap_1d",
                                  verdict(lam_w >= w0 * (1 - 1e-3)), tolerance="0.1%",
                                  witness={"w": w0, "lambda1": lam_w}))
    checks += consistency_relations(rep, nsigma)
    rep.checks = checks
    return rep


def write_bounds_csv(rows: Sequence[tuple[str, BoundReport]], path) -> Path:
    """Comparison table: body, bobkov, kls, pw, transfer, upper, exact."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["body", "bobkov", "bobkov_e2", "kls", "pw_lambda1", "transfer",
                     "halfspace_upper", "halfspace_se", "exact_che", "exact_lambda1",
                     "calibrated_bobkov"])
        for name, r in rows:
            up = r.reference_che_upper
            wr.writerow([name, r.bobkov_che, r.bobkov_che_e2, r.kls_che, r.pw_lambda1,
                         r.transfer_che, None if up is None else up.value,
                         None if up is None else up.se, r.exact_che, r.exact_lambda1,
                         r.calibrated_bobkov])
    return path
