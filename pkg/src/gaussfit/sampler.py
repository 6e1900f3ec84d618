"""Hit-and-run samplers for the uniform measure on a convex body and for the
Gaussian conditioned on it.

Each step picks a uniform random direction, intersects the line with the body
and draws the next point from the exact one-dimensional conditional on that
chord (uniform, or a truncated Gaussian).  No Metropolis correction is
needed.

Chains own independent ``PCG64`` streams spawned from one ``SeedSequence``.
Within a chain a bundle of walkers advances in lock-step so that numpy does
the inner loop; all chains are stepped together for the same reason.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .geometry import ConvexBody, NotInterior

__all__ = [
    "SamplerConfig",
    "SampleBatch",
    "NegativeWeight",
    "EmptyInterval",
    "sample_uniform",
    "sample_gibbs",
    "sample_truncated_gaussian_1d",
    "truncated_gaussian_ppf",
    "write_samples",
    "read_samples",
]

# random numbers are drawn in blocks of at most this many doubles
_BLOCK_DOUBLES = 2_000_000
# chord ends are pulled inwards by this relative amount so that rounding in
# p + t u never leaves the body
_CHORD_SHRINK = 1e-10


class NegativeWeight(ValueError):
    pass


class EmptyInterval(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings.

    ``burn_in`` and ``thinning`` default to ``100 n`` and ``max(1, n // 2)``
    once the dimension is known.  ``start`` is either a single point or one
    point per walker (``chains * walkers`` rows, chain-major).

    Directions are uniform on the sphere when ``isotropic`` is set or the
    body gives no shape hint; otherwise they are drawn as ``A g / |A g|`` with
    ``A = body.direction_scales()``.  Any fixed symmetric direction law
    leaves the target invariant, and matching it to the body's shape keeps
    elongated bodies from mixing at the speed of their thinnest width.
    """

    seed: int = 0
    chains: int = 16
    walkers: int = 16
    burn_in: int | None = None
    thinning: int | None = None
    start: np.ndarray | None = field(default=None, compare=False)
    isotropic: bool = False

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.walkers < 1:
            raise ValueError("walkers must be >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    def resolved(self, n: int) -> "SamplerConfig":
        return replace(
            self,
            burn_in=100 * n if self.burn_in is None else self.burn_in,
            thinning=max(1, n // 2) if self.thinning is None else self.thinning,
        )


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Samples in chain-major, walker-major order.

    ``chain_sizes[c]`` is the number of samples contributed by chain ``c``;
    ``final_states`` holds the last state of every walker and can seed a
    warm-started follow-up run.
    """

    points: np.ndarray
    config: SamplerConfig
    target: str
    w: float
    x0: np.ndarray
    chain_sizes: tuple[int, ...]
    final_states: np.ndarray | None = None

    def __post_init__(self):
        self.points.flags.writeable = False

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.m

    def chain_slices(self):
        edges = np.concatenate([[0], np.cumsum(self.chain_sizes)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def shifted(self, delta) -> "SampleBatch":
        """Batch with every point translated by ``delta``."""
        delta = np.asarray(delta, dtype=float)
        return replace(self, points=self.points + delta, x0=self.x0 + delta,
                       final_states=None if self.final_states is None else self.final_states + delta)


# --- truncated Gaussian ------------------------------------------------------

def truncated_gaussian_ppf(q, a, b):
    """Quantile ``q`` of the standard normal truncated to ``[a, b]``.

    Works in log-CDF space after reflecting intervals that sit in the right
    tail, so the result stays accurate far into either tail.
    """
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    # the reflected variable's quantile is taken at 1 - q
    q = np.where(flip, 1.0 - q, q)
    la = log_ndtr(lo)
    lb = log_ndtr(hi)
    with np.errstate(divide="ignore"):
        log_mass = lb + np.log(-np.expm1(la - lb))
        target = np.logaddexp(la, np.log(q) + log_mass)
    x = ndtri_exp(np.minimum(target, 0.0))
    x = np.clip(x, lo, hi)
    return np.where(flip, -x, x)


def _truncated_gaussian(lo, hi, mean, sd, u):
    """Vectorized draw given uniforms ``u``; ``sd = inf`` gives a uniform draw."""
    if np.isinf(sd):
        return lo + u * (hi - lo)
    z = truncated_gaussian_ppf(u, (lo - mean) / sd, (hi - mean) / sd)
    return np.clip(mean + sd * z, lo, hi)


def sample_truncated_gaussian_1d(lo: float, hi: float, mean: float, stddev: float,
                                 rng: np.random.Generator, size=None):
    """Exact draw(s) from N(mean, stddev^2) conditioned on ``[lo, hi]``."""
    if not lo < hi:
        raise EmptyInterval(f"empty interval [{lo}, {hi}]")
    if not stddev > 0:
        raise ValueError("stddev must be positive")
    u = rng.random(size)
    out = _truncated_gaussian(lo, hi, mean, stddev, u)
    return float(out) if size is None else out


# --- hit-and-run core ----------------------------------------------------------

def _initial_states(body: ConvexBody, cfg: SamplerConfig, total: int) -> np.ndarray:
    n = body.dimension
    if cfg.start is None:
        X = np.repeat(body.interior_point[None, :], total, axis=0)
    else:
        s = np.asarray(cfg.start, dtype=float)
        if s.ndim == 1:
            X = np.repeat(s[None, :], total, axis=0)
        elif s.shape == (total, n):
            X = s.copy()
        else:
            raise ValueError(f"start must be one point or {total} points")
    if not np.all(body._contains(X, body.tol_chord)):
        raise NotInterior("start point outside the body")
    return X


def _run(body: ConvexBody, cfg: SamplerConfig, m: int, w: float, x0: np.ndarray) -> SampleBatch:
    n = body.dimension
    cfg = cfg.resolved(n)
    if m < 1:
        raise ValueError("m must be >= 1")
    chains = min(cfg.chains, m)
    per_chain = [m // chains + (c < m % chains) for c in range(chains)]
    walkers = [min(cfg.walkers, k) for k in per_chain]
    kept_steps = max(math.ceil(k / wk) for k, wk in zip(per_chain, walkers))
    W = sum(walkers)
    offsets = np.concatenate([[0], np.cumsum(walkers)])

    if cfg.start is not None and np.ndim(cfg.start) == 2 and len(cfg.start) != W:
        cfg = replace(cfg, start=_resize_start(np.asarray(cfg.start), W))
    X = _initial_states(body, cfg, W)
    rngs = [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(cfg.seed).spawn(chains)]

    sd = math.inf if w == 0 else 1.0 / math.sqrt(w)
    A = None if cfg.isotropic else body.direction_scales()
    total_steps = cfg.burn_in + kept_steps * cfg.thinning
    block = max(1, min(total_steps, _BLOCK_DOUBLES // (W * (n + 1))))
    kept = np.empty((kept_steps, W, n))
    k_out = 0
    step = 0
    while step < total_steps:
        K = min(block, total_steps - step)
        dirs = np.empty((K, W, n))
        unif = np.empty((K, W))
        for c, rng in enumerate(rngs):
            sl = slice(offsets[c], offsets[c + 1])
            dirs[:, sl, :] = rng.standard_normal((K, walkers[c], n))
            unif[:, sl] = rng.random((K, walkers[c]))
        if A is not None:
            dirs = dirs * A if A.ndim == 1 else dirs @ A.T
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        for k in range(K):
            U = dirs[k]
            lo, hi = body._chord(X, U)
            lo = np.minimum(lo, 0.0)
            hi = np.maximum(hi, 0.0)
            shrink = _CHORD_SHRINK * (hi - lo)
            lo = lo + shrink
            hi = hi - shrink
            if sd == math.inf:
                t = lo + unif[k] * (hi - lo)
            else:
                mode = -np.einsum("ij,ij->i", X - x0, U)
                t = _truncated_gaussian(lo, hi, mode, sd, unif[k])
            X = X + t[:, None] * U
            step += 1
            done = step - cfg.burn_in
            if done > 0 and done % cfg.thinning == 0:
                kept[k_out] = X
                k_out += 1

    # chain-major, walker-major ordering, each chain truncated to its quota
    parts = []
    for c in range(chains):
        chunk = kept[:, offsets[c]:offsets[c + 1], :].transpose(1, 0, 2).reshape(-1, n)
        parts.append(chunk[: per_chain[c]])
    points = np.ascontiguousarray(np.concatenate(parts, axis=0))
    target = "uniform" if w == 0 else f"gibbs({w!r})"
    return SampleBatch(points=points, config=cfg, target=target, w=float(w),
                       x0=np.asarray(x0, dtype=float).copy(), chain_sizes=tuple(per_chain),
                       final_states=X)


def _resize_start(S: np.ndarray, W: int) -> np.ndarray:
    idx = np.arange(W) % len(S)
    return S[idx]


def sample_uniform(body: ConvexBody, config: SamplerConfig, m: int) -> SampleBatch:
    """Hit-and-run samples whose stationary law is uniform on ``body``."""
    return _run(body, config, m, 0.0, np.zeros(body.dimension))


def sample_gibbs(body: ConvexBody, w: float, config: SamplerConfig, m: int,
                 x0=None) -> SampleBatch:
    """Hit-and-run samples from ``exp(-w |x - x0|^2 / 2)`` restricted to ``body``.

    ``w = 0`` consumes random numbers exactly as :func:`sample_uniform`, so
    both return identical batches for the same config.
    """
    if w < 0:
        raise NegativeWeight(f"inverse temperature must be >= 0, got {w}")
    x0 = np.zeros(body.dimension) if x0 is None else np.asarray(x0, dtype=float)
    return _run(body, config, m, float(w), x0)


# --- sample dumps ---------------------------------------------------------------

def write_samples(batch: SampleBatch, path) -> tuple[Path, Path]:
    """Write little-endian float64 rows plus a ``.hdr`` text sidecar."""
    path = Path(path)
    data = path.with_suffix(".bin")
    header = path.with_suffix(".hdr")
    batch.points.astype("<f8").tofile(data)
    header.write_text(
        f"dimension {batch.dimension}\n"
        f"count {batch.m}\n"
        f"seed {batch.config.seed}\n"
        f"target {batch.target}\n"
    )
    return data, header


def read_samples(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = {}
    for line in path.with_suffix(".hdr").read_text().splitlines():
        key, _, val = line.partition(" ")
        meta[key] = val
    pts = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
    n = int(meta["dimension"])
    return pts.reshape(-1, n), meta
