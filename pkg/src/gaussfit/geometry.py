"""Convex bodies described through exact oracles.

Every body exposes membership, chord intersection along a line and a
bounding radius about an interior point.  Chords are computed in closed form
for the concrete variants; bodies that only know membership fall back to
bisection.

All chord routines are vectorized: ``p`` and ``u`` may be single vectors of
shape ``(n,)`` or stacks of shape ``(k, n)``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammaln

__all__ = [
    "GeometryError",
    "NotInterior",
    "UnboundedBody",
    "DegenerateBody",
    "ConvexBody",
    "Ball",
    "Box",
    "Simplex",
    "HPolytope",
    "Ellipsoid",
    "Translated",
    "MembershipBody",
    "membership",
    "chord_interval",
    "diameter_upper_bound",
    "body_from_dict",
    "body_to_dict",
    "load_body",
    "triangle",
]

MAX_BISECTION_ITERS = 200


class GeometryError(ValueError):
    pass


class NotInterior(GeometryError):
    """Raised when a chord is requested through a point outside the body."""


class UnboundedBody(GeometryError):
    pass


class DegenerateBody(GeometryError):
    pass


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a[None, :] if a.ndim == 1 else a


class ConvexBody:
    """Base class.  Subclasses set ``dimension``, ``interior_point`` and
    ``bounding_radius`` and implement ``_contains`` and (ideally) ``_chord``.
    """

    kind = "abstract"
    dimension: int
    interior_point: np.ndarray
    bounding_radius: float

    @property
    def tol_chord(self) -> float:
        return 1e-10 * self.bounding_radius

    # --- oracles -----------------------------------------------------------
    def contains(self, x, tol: float = 0.0):
        """Membership in the closure of the body.

        Accepts a single point or a ``(k, n)`` stack; returns a bool or a bool
        array accordingly.
        """
        x = np.asarray(x, dtype=float)
        res = self._contains(_as_2d(x), tol)
        return bool(res[0]) if x.ndim == 1 else res

    def chord(self, p, u):
        """Return ``(t_lo, t_hi)`` with ``{t : p + t u in K} = [t_lo, t_hi]``."""
        p = np.asarray(p, dtype=float)
        P, U = _as_2d(p), _as_2d(u)
        if not np.all(self._contains(P, self.tol_chord)):
            raise NotInterior("chord requested through a point outside the body")
        lo, hi = self._chord(P, U)
        if p.ndim == 1:
            return float(lo[0]), float(hi[0])
        return lo, hi

    def _contains(self, X: np.ndarray, tol: float) -> np.ndarray:
        raise NotImplementedError

    def _chord(self, P: np.ndarray, U: np.ndarray):
        return _bisect_chord(self, P, U)

    def diameter_upper_bound(self) -> float:
        return 2.0 * self.bounding_radius

    def volume(self) -> float | None:
        """Lebesgue volume when a closed form exists, else None."""
        return None

    def direction_scales(self) -> np.ndarray | None:
        """Rough shape of the body for drawing hit-and-run directions.

        A vector (axis widths) or matrix ``A`` such that ``A g`` with ``g``
        standard normal gives well-spread directions; None means isotropic.
        """
        return None

    def _check_nondegenerate(self):
        """Positive-volume witness: n + 1 affinely independent members."""
        n = self.dimension
        x = self.interior_point
        if not self.contains(x):
            raise DegenerateBody("interior point is not a member")
        # shrink the probe step until all n axis probes are members
        step = 0.5 * self.bounding_radius
        for _ in range(60):
            probes = x + step * np.eye(n)
            if np.all(self._contains(probes, 0.0)):
                return
            step *= 0.5
        raise DegenerateBody("no full-dimensional neighbourhood around the interior point")

    def _check_bounded(self):
        n = self.dimension
        E = np.vstack([np.eye(n), -np.eye(n)])
        P = np.repeat(self.interior_point[None, :], 2 * n, axis=0)
        lo, hi = self._chord(P, E)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UnboundedBody("infinite chord along a coordinate direction")


def _bisect_chord(body: ConvexBody, P, U):
    """Chord endpoints by bisection against membership."""
    R = body.bounding_radius
    offs = np.linalg.norm(P - body.interior_point, axis=1)
    # beyond R + |p - interior| the line is certainly outside
    reach = R + offs
    tol = body.tol_chord
    out = []
    for sign in (-1.0, 1.0):
        a = np.zeros(len(P))
        b = sign * reach * 1.000001
        for _ in range(MAX_BISECTION_ITERS):
            if np.all(np.abs(b - a) <= tol):
                break
            mid = 0.5 * (a + b)
            inside = body._contains(P + mid[:, None] * U, 0.0)
            a = np.where(inside, mid, a)
            b = np.where(inside, b, mid)
        out.append(a)
    return out[0], out[1]


def _check_point(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,) or not np.all(np.isfinite(x)):
        raise GeometryError(f"{name} must be a finite vector of length {n}")
    return x


@dataclass(frozen=True, eq=False)
class Ball(ConvexBody):
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).copy()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise DegenerateBody("ball radius must be positive and finite")
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def unit(cls, n: int, radius: float = 1.0) -> "Ball":
        return cls(np.zeros(n), radius)

    @property
    def dimension(self):
        return len(self.center)

    @property
    def interior_point(self):
        return self.center

    @property
    def bounding_radius(self):
        return self.radius

    def _contains(self, X, tol):
        return np.linalg.norm(X - self.center, axis=1) <= self.radius + tol

    def _chord(self, P, U):
        q = P - self.center
        uu = np.einsum("ij,ij->i", U, U)
        b = np.einsum("ij,ij->i", q, U) / uu
        c = (np.einsum("ij,ij->i", q, q) - self.radius**2) / uu
        disc = np.sqrt(np.maximum(b * b - c, 0.0))
        return -b - disc, -b + disc

    def diameter_upper_bound(self):
        return 2.0 * self.radius

    def volume(self):
        n = self.dimension
        return math.exp(n / 2 * math.log(math.pi) - gammaln(n / 2 + 1) + n * math.log(self.radius))


@dataclass(frozen=True, eq=False)
class Box(ConvexBody):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).copy()
        hi = np.asarray(self.upper, dtype=float).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise GeometryError("box corners must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UnboundedBody("box corners must be finite")
        if np.any(hi <= lo):
            raise DegenerateBody("box must have positive side lengths")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "Box":
        return cls(np.full(n, lo), np.full(n, hi))

    @property
    def dimension(self):
        return len(self.lower)

    @property
    def interior_point(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def bounding_radius(self):
        return 0.5 * float(np.linalg.norm(self.upper - self.lower))

    def _contains(self, X, tol):
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)

    def _chord(self, P, U):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t1 = (self.lower - P) / U
            t2 = (self.upper - P) / U
        zero = U == 0
        t1 = np.where(zero, -np.inf, t1)
        t2 = np.where(zero, np.inf, t2)
        return np.max(np.minimum(t1, t2), axis=1), np.min(np.maximum(t1, t2), axis=1)

    def diameter_upper_bound(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def direction_scales(self):
        w = self.upper - self.lower
        return None if np.all(w == w[0]) else w.copy()


@dataclass(frozen=True, eq=False)
class HPolytope(ConvexBody):
    """``{x : A x <= b}``.  ``vertices`` is optional and only sharpens the
    diameter bound."""

    A: np.ndarray
    b: np.ndarray
    interior: np.ndarray | None = None
    vertices: np.ndarray | None = None
    kind = "hpolytope"
    _radius: float = field(init=False, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)).copy()
        b = np.asarray(self.b, dtype=float).ravel().copy()
        if A.shape[0] != b.shape[0]:
            raise GeometryError("A and b row counts differ")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise GeometryError("constraints must be finite")
        A.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        n = A.shape[1]
        if self.interior is None:
            x = _chebyshev_center(A, b)
        else:
            x = _check_point(self.interior, n, "interior")
        if np.any(A @ x >= b):
            raise NotInterior("interior point is not strictly inside")
        x.flags.writeable = False
        object.__setattr__(self, "interior", x)
        if self.vertices is not None:
            V = np.atleast_2d(np.asarray(self.vertices, dtype=float)).copy()
            V.flags.writeable = False
            object.__setattr__(self, "vertices", V)
        # cheap coordinate-chord test first, then an exact bounding box by LP
        object.__setattr__(self, "_radius", np.inf)
        self._check_bounded()
        lo, hi = _lp_bounding_box(A, b)
        far = np.maximum(np.abs(hi - x), np.abs(x - lo))
        object.__setattr__(self, "_radius", float(np.linalg.norm(far)))
        self._check_nondegenerate()

    @property
    def dimension(self):
        return self.A.shape[1]

    @property
    def interior_point(self):
        return self.interior

    @property
    def bounding_radius(self):
        return self._radius

    def _contains(self, X, tol):
        scale = np.linalg.norm(self.A, axis=1)
        return np.all(X @ self.A.T <= self.b + tol * scale, axis=1)

    def _chord(self, P, U):
        slack = self.b - P @ self.A.T
        rate = U @ self.A.T
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = slack / rate
        hi = np.min(np.where(rate > 0, t, np.inf), axis=1)
        lo = np.max(np.where(rate < 0, t, -np.inf), axis=1)
        return lo, hi

    def diameter_upper_bound(self):
        if self.vertices is not None and len(self.vertices) > 1:
            return _max_pairwise(self.vertices)
        return 2.0 * self.bounding_radius


def _chebyshev_center(A, b):
    norms = np.linalg.norm(A, axis=1)
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(
        c,
        A_ub=np.hstack([A, norms[:, None]]),
        b_ub=b,
        bounds=[(None, None)] * n + [(0, None)],
        method="highs",
    )
    if res.status == 3:
        raise UnboundedBody("polytope is unbounded")
    if res.status != 0:
        raise DegenerateBody("could not find an interior point")
    if res.x[-1] <= 0:
        raise DegenerateBody("polytope has empty interior")
    return np.asarray(res.x[:n], dtype=float)


def _lp_bounding_box(A, b):
    n = A.shape[1]
    lo, hi = np.empty(n), np.empty(n)
    for i in range(n):
        for sign, out in ((1.0, lo), (-1.0, hi)):
            c = np.zeros(n)
            c[i] = sign
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
            if res.status == 3:
                raise UnboundedBody("polytope is unbounded")
            if res.status != 0:
                raise GeometryError(f"bounding-box LP failed: {res.message}")
            out[i] = res.x[i]
    return lo, hi


def _max_pairwise(V):
    best = 0.0
    for i, j in itertools.combinations(range(len(V)), 2):
        best = max(best, float(np.linalg.norm(V[i] - V[j])))
    return best


@dataclass(frozen=True, eq=False)
class Simplex(ConvexBody):
    vertices: np.ndarray
    kind = "simplex"
    _hpoly: HPolytope = field(init=False, repr=False)

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float)).copy()
        n = V.shape[1]
        if V.shape[0] != n + 1:
            raise GeometryError("a simplex in R^n needs n + 1 vertices")
        T = (V[1:] - V[0]).T
        if abs(np.linalg.det(T)) < 1e-300 or np.linalg.matrix_rank(T) < n:
            raise DegenerateBody("simplex vertices are affinely dependent")
        V.flags.writeable = False
        object.__setattr__(self, "vertices", V)
        # barycentric coordinates lam = Tinv (x - v0) >= 0, sum(lam) <= 1
        Tinv = np.linalg.inv(T)
        A = np.vstack([-Tinv, Tinv.sum(axis=0)[None, :]])
        b = np.concatenate([-Tinv @ V[0], [1.0 + Tinv.sum(axis=0) @ V[0]]])
        object.__setattr__(self, "_hpoly", HPolytope(A, b, interior=V.mean(axis=0), vertices=V))

    @classmethod
    def standard(cls, n: int) -> "Simplex":
        return cls(np.vstack([np.zeros(n), np.eye(n)]))

    @property
    def dimension(self):
        return self.vertices.shape[1]

    @property
    def interior_point(self):
        return self._hpoly.interior

    @property
    def bounding_radius(self):
        c = self.interior_point
        return float(np.max(np.linalg.norm(self.vertices - c, axis=1)))

    def _contains(self, X, tol):
        return self._hpoly._contains(X, tol)

    def _chord(self, P, U):
        return self._hpoly._chord(P, U)

    def diameter_upper_bound(self):
        return _max_pairwise(self.vertices)

    def volume(self):
        n = self.dimension
        T = self.vertices[1:] - self.vertices[0]
        return abs(float(np.linalg.det(T))) / math.factorial(n)


@dataclass(frozen=True, eq=False)
class Ellipsoid(ConvexBody):
    """``{x : (x - center)^T shape (x - center) <= 1}`` with ``shape`` SPD."""

    shape: np.ndarray
    center: np.ndarray
    kind = "ellipsoid"

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.shape, dtype=float)).copy()
        c = np.asarray(self.center, dtype=float).copy()
        if M.shape != (len(c), len(c)):
            raise GeometryError("shape matrix must be n x n")
        if not np.allclose(M, M.T):
            raise GeometryError("shape matrix must be symmetric")
        eig = np.linalg.eigvalsh(M)
        if eig[0] <= 0:
            raise UnboundedBody("shape matrix must be positive definite")
        M.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "shape", M)
        object.__setattr__(self, "center", c)

    @property
    def dimension(self):
        return len(self.center)

    @property
    def interior_point(self):
        return self.center

    @property
    def bounding_radius(self):
        return float(1.0 / math.sqrt(np.linalg.eigvalsh(self.shape)[0]))

    def _contains(self, X, tol):
        q = X - self.center
        # rescale tol from length to the quadratic form
        lam_max = np.linalg.eigvalsh(self.shape)[-1]
        val = np.einsum("ij,jk,ik->i", q, self.shape, q)
        return np.sqrt(np.maximum(val, 0.0)) <= 1.0 + tol * math.sqrt(lam_max)

    def _chord(self, P, U):
        q = P - self.center
        Mu = U @ self.shape
        a = np.einsum("ij,ij->i", U, Mu)
        b = np.einsum("ij,ij->i", q, Mu) / a
        c = (np.einsum("ij,jk,ik->i", q, self.shape, q) - 1.0) / a
        disc = np.sqrt(np.maximum(b * b - c, 0.0))
        return -b - disc, -b + disc

    def diameter_upper_bound(self):
        return 2.0 * self.bounding_radius

    def volume(self):
        n = self.dimension
        unit = math.exp(n / 2 * math.log(math.pi) - gammaln(n / 2 + 1))
        return unit / math.sqrt(float(np.linalg.det(self.shape)))

    def direction_scales(self):
        lam, V = np.linalg.eigh(self.shape)
        if np.allclose(lam, lam[0], rtol=1e-12, atol=0):
            return None
        return (V / np.sqrt(lam)) @ V.T


@dataclass(frozen=True, eq=False)
class Translated(ConvexBody):
    """``inner + shift``."""

    inner: ConvexBody
    shift: np.ndarray
    kind = "translated"

    def __post_init__(self):
        s = _check_point(self.shift, self.inner.dimension, "shift").copy()
        s.flags.writeable = False
        object.__setattr__(self, "shift", s)

    @property
    def dimension(self):
        return self.inner.dimension

    @property
    def interior_point(self):
        return self.inner.interior_point + self.shift

    @property
    def bounding_radius(self):
        return self.inner.bounding_radius

    def _contains(self, X, tol):
        return self.inner._contains(X - self.shift, tol)

    def _chord(self, P, U):
        return self.inner._chord(P - self.shift, U)

    def diameter_upper_bound(self):
        return self.inner.diameter_upper_bound()

    def volume(self):
        return self.inner.volume()

    def direction_scales(self):
        return self.inner.direction_scales()


class MembershipBody(ConvexBody):
    """A convex body known only through a membership callable.

    ``contains_fn`` maps a ``(k, n)`` array to a bool array.  Chords are
    found by bisection.
    """

    kind = "membership"

    def __init__(self, contains_fn: Callable[[np.ndarray], np.ndarray],
                 interior_point, bounding_radius: float):
        self._fn = contains_fn
        self.interior_point = np.asarray(interior_point, dtype=float)
        self.dimension = len(self.interior_point)
        self.bounding_radius = float(bounding_radius)
        self._check_nondegenerate()

    def _contains(self, X, tol):
        ok = np.asarray(self._fn(X), dtype=bool)
        if tol > 0:
            # closure up to tol: accept points within tol of a member along
            # the ray toward the interior point
            d = self.interior_point - X
            nrm = np.linalg.norm(d, axis=1, keepdims=True)
            nrm[nrm == 0] = 1.0
            ok |= np.asarray(self._fn(X + tol * d / nrm), dtype=bool)
        return ok


# --- free functions mirroring the operation names ----------------------------

def membership(body: ConvexBody, x) -> bool:
    return body.contains(x)


def chord_interval(body: ConvexBody, p, u):
    return body.chord(p, u)


def diameter_upper_bound(body: ConvexBody) -> float:
    return body.diameter_upper_bound()


def triangle() -> HPolytope:
    """The triangle ``{x >= 0, y >= 0, x + y <= 1}``."""
    A = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    b = np.array([0.0, 0.0, 1.0])
    return HPolytope(A, b)


# --- body description files --------------------------------------------------

def body_from_dict(d: dict) -> ConvexBody:
    """Build a body from its JSON description (see ``docs/body_schema.md``)."""
    d = dict(d)
    kind = d.pop("kind", None)
    n = d.pop("dimension", None)
    d.pop("name", None)
    d.pop("x0", None)
    if kind == "ball":
        body = Ball(np.asarray(d["center"], float), float(d["radius"]))
    elif kind == "box":
        body = Box(np.asarray(d["lower"], float), np.asarray(d["upper"], float))
    elif kind == "simplex":
        body = Simplex(np.asarray(d["vertices"], float))
    elif kind == "hpolytope":
        body = HPolytope(
            np.asarray(d["A"], float), np.asarray(d["b"], float),
            interior=None if d.get("interior") is None else np.asarray(d["interior"], float),
            vertices=None if d.get("vertices") is None else np.asarray(d["vertices"], float),
        )
    elif kind == "ellipsoid":
        body = Ellipsoid(np.asarray(d["shape"], float), np.asarray(d["center"], float))
    elif kind == "translated":
        body = Translated(body_from_dict(d["inner"]), np.asarray(d["shift"], float))
    else:
        raise GeometryError(f"unknown body kind {kind!r}")
    if n is not None and int(n) != body.dimension:
        raise GeometryError(f"declared dimension {n} does not match payload ({body.dimension})")
    return body


def body_to_dict(body: ConvexBody) -> dict:
    out: dict = {"kind": body.kind, "dimension": body.dimension}
    if isinstance(body, Ball):
        out.update(center=body.center.tolist(), radius=body.radius)
    elif isinstance(body, Box):
        out.update(lower=body.lower.tolist(), upper=body.upper.tolist())
    elif isinstance(body, Simplex):
        out.update(vertices=body.vertices.tolist())
    elif isinstance(body, HPolytope):
        out.update(A=body.A.tolist(), b=body.b.tolist(), interior=body.interior.tolist())
        if body.vertices is not None:
            out["vertices"] = body.vertices.tolist()
    elif isinstance(body, Ellipsoid):
        out.update(shape=body.shape.tolist(), center=body.center.tolist())
    elif isinstance(body, Translated):
        out.update(inner=body_to_dict(body.inner), shift=body.shift.tolist())
    else:
        raise GeometryError(f"cannot serialize {type(body).__name__}")
    return out


def load_body(path) -> ConvexBody:
    return body_from_dict(json.loads(Path(path).read_text()))
