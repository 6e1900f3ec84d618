"""End-to-end verification of one body or a suite of bodies.

Each body gets its own seed derived from the run seed and its position in the
suite, so results do not depend on how bodies are distributed over worker
processes.
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import BoundReport, bobkov_bound, compute_bounds, optimize_base_point, write_bounds_csv
from .free_energy import (LOWER_C, LOWER_CAP_C, REFINED_C, FreeEnergyCurve, build_curve,
                          check_curve_shape, check_free_energy_lower_bound,
                          check_free_energy_refined_bound, check_free_energy_upper_bound,
                          default_w_grid, empirical_upper_constant, free_energy_oracle,
                          gaussian_identity_check, write_curve_csv)
from .geometry import ConvexBody, GeometryError, body_from_dict
from .overlap import (C_PRIME, OverlapReport, check_entropy_shape, check_pinsker, choose_w0,
                      corollary_check, entropy_curve)
from .radial import (RadialStats, check_khinchine, check_radial_logconcavity,
                     check_reverse_chebyshev, check_small_ball_tail, default_radial_grid,
                     radial_cdf, radial_stats)
from .reports import FAIL, NSIGMA, PASS, SKIP, CheckReport, to_jsonable, verdict
from .sampler import SamplerConfig, sample_uniform

__all__ = [
    "SCHEMA_VERSION",
    "STAGES",
    "CHECK_GROUPS",
    "ConfigError",
    "Constants",
    "BodySpec",
    "RunConfig",
    "BodyResult",
    "RunReport",
    "load_suite",
    "default_suite_path",
    "run_body",
    "run_suite",
    "write_outputs",
]

SCHEMA_VERSION = "1.0"
STAGES = ("radial", "free_energy", "overlap", "bounds")
CHECK_GROUPS = {
    "radial": ("radial_logconcavity", "small_ball_tail", "chebyshev_anchor", "khinchine_ratio",
               "reverse_chebyshev"),
    "free_energy": ("Z_nondecreasing", "Z_concave", "Z_over_w_nonincreasing", "slope_at_origin",
                    "free_energy_lower_bound", "free_energy_refined_bound",
                    "free_energy_upper_bound", "gaussian_identity", "oracle_agreement"),
    "overlap": ("corollary_entropy", "corollary_tv", "pinsker_at_w0", "pinsker_domination",
                "H_nondecreasing", "H_convex"),
    "bounds": ("bounds_nonnegative", "cheeger_sandwich", "halfspace_above_exact",
               "payne_weinberger", "gaussian_spectral_gap_1d", "cheeger_mazya"),
}
ALL_CHECKS = tuple(c for g in CHECK_GROUPS.values() for c in g)


class ConfigError(ValueError):
    """Invalid run configuration (maps to exit status 2)."""


@dataclass(frozen=True)
class Constants:
    """Tunable constants.  The free-energy and overlap defaults are the
    theorem constants; the rest are calibration values."""

    c_bob: float = 1.0
    c_transfer: float = 1.0
    c_tv: float = 1.0
    c_prime: float = C_PRIME
    c_lower: float = LOWER_C
    C_lower: float = LOWER_CAP_C
    c_refined: float = REFINED_C
    c_u: float = 0.01
    C_u: float = 50.0
    C_khin: float = 10.0
    c0_floor: float = 0.1
    c_calibrated: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"constant {f.name} must be a positive number, got {v!r}")

    @classmethod
    def with_overrides(cls, base: "Constants | None" = None, **kw) -> "Constants":
        base = base or cls()
        names = {f.name for f in fields(cls)}
        unknown = set(kw) - names
        if unknown:
            raise ConfigError(f"unknown constants: {sorted(unknown)}")
        try:
            return replace(base, **{k: float(v) for k, v in kw.items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


@dataclass
class BodySpec:
    name: str
    body: ConvexBody
    x0: np.ndarray | None = None
    source: str = ""

    @classmethod
    def from_dict(cls, d: dict, name: str = "", source: str = "") -> "BodySpec":
        try:
            body = body_from_dict(d)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed body description {source or name}: {exc}") from exc
        except GeometryError as exc:
            raise ConfigError(f"invalid body {source or name}: {exc}") from exc
        x0 = d.get("x0")
        if x0 is not None:
            x0 = np.asarray(x0, dtype=float)
            if x0.shape != (body.dimension,):
                raise ConfigError(f"x0 of {name} has the wrong shape")
        return cls(d.get("name") or name or body.kind, body, x0, source)

    @classmethod
    def from_file(cls, path) -> "BodySpec":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read body file {path}: {exc}") from exc
        return cls.from_dict(d, name=path.stem, source=str(path))


_RUN_KEYS = {"bodies", "seed", "samples", "sampler", "w_grid", "constants", "checks", "out",
             "workers", "thermo", "m_node"}
_SAMPLER_KEYS = {"chains", "walkers", "burn_in", "thinning", "isotropic"}
_GRID_KEYS = {"size", "lo", "hi"}


@dataclass
class RunConfig:
    bodies: list[BodySpec]
    seed: int = 0
    samples: int = 100_000
    sampler: dict = field(default_factory=dict)
    w_grid: dict = field(default_factory=dict)
    constants: Constants = field(default_factory=Constants)
    checks: tuple[str, ...] = ALL_CHECKS
    out: Path | None = None
    workers: int = 1
    thermo: bool = True
    m_node: int | None = None

    def __post_init__(self):
        if not self.bodies:
            raise ConfigError("no bodies given")
        if self.samples < 2000:
            raise ConfigError("samples must be >= 2000")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        bad = set(self.sampler) - _SAMPLER_KEYS
        if bad:
            raise ConfigError(f"unknown sampler keys: {sorted(bad)}")
        bad = set(self.w_grid) - _GRID_KEYS
        if bad:
            raise ConfigError(f"unknown w_grid keys: {sorted(bad)}")
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ConfigError("body names must be unique")
        self.checks = resolve_checks(self.checks)

    def sampler_config(self, index: int) -> SamplerConfig:
        seed = int(np.random.SeedSequence([self.seed, index]).generate_state(1)[0])
        try:
            return SamplerConfig(seed=seed, **self.sampler)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad sampler settings: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        unknown = set(d) - _RUN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base_dir = Path(".") if base_dir is None else base_dir
        bodies = []
        for i, entry in enumerate(d.get("bodies", [])):
            if isinstance(entry, str):
                p = Path(entry)
                bodies.append(BodySpec.from_file(p if p.is_absolute() else base_dir / p))
            elif isinstance(entry, dict):
                bodies.append(BodySpec.from_dict(entry, name=f"body{i}"))
            else:
                raise ConfigError(f"body entry {i} must be a path or an object")
        kw = {k: d[k] for k in ("seed", "samples", "sampler", "w_grid", "workers", "thermo",
                                "m_node") if k in d}
        if "constants" in d:
            kw["constants"] = Constants.with_overrides(**d["constants"])
        if "checks" in d:
            kw["checks"] = tuple(d["checks"])
        if "out" in d:
            kw["out"] = Path(d["out"])
        return cls(bodies=bodies, **kw)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, base_dir=path.parent)

    def echo(self) -> dict:
        return {"bodies": [b.name for b in self.bodies], "seed": self.seed,
                "samples": self.samples, "sampler": self.sampler, "w_grid": self.w_grid,
                "constants": asdict(self.constants), "checks": list(self.checks),
                "thermo": self.thermo, "m_node": self.m_node}


def resolve_checks(names) -> tuple[str, ...]:
    """Expand group names and validate check names, keeping canonical order."""
    wanted = set()
    for name in names:
        name = name.strip()
        if not name:
            continue
        if name == "all":
            wanted.update(ALL_CHECKS)
        elif name in CHECK_GROUPS:
            wanted.update(CHECK_GROUPS[name])
        elif name in ALL_CHECKS:
            wanted.add(name)
        else:
            raise ConfigError(f"unknown check {name!r}")
    if not wanted:
        raise ConfigError("no checks selected")
    return tuple(c for c in ALL_CHECKS if c in wanted)


def default_suite_path() -> Path:
    return Path(str(resources.files("gaussfit") / "data" / "suite.json"))


def load_suite(path=None) -> RunConfig:
    return RunConfig.from_file(default_suite_path() if path is None else path)


# --- per-body pipeline ----------------------------------------------------------

@dataclass
class BodyResult:
    name: str
    kind: str
    dimension: int
    seed: int
    stats: RadialStats
    curve: FreeEnergyCurve | None = None
    overlap: OverlapReport | None = None
    bounds: BoundReport | None = None
    checks: list[CheckReport] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def failed(self) -> list[CheckReport]:
        return [c for c in self.checks if c.failed]

    def counts(self) -> dict:
        out = {PASS: 0, FAIL: 0, SKIP: 0}
        for c in self.checks:
            out[c.status] += 1
        return out

    def to_dict(self) -> dict:
        d = {
            "name": self.name, "kind": self.kind, "dimension": self.dimension,
            "seed": self.seed, "stats": self.stats.to_dict(),
            "checks": [c.to_dict() for c in self.checks], "counts": self.counts(),
            "extras": self.extras,
        }
        if self.curve is not None:
            d["free_energy"] = self.curve.to_dict()
        if self.overlap is not None:
            d["overlap"] = self.overlap.to_dict()
        if self.bounds is not None:
            d["bounds"] = self.bounds.to_dict()
        return to_jsonable(d)


def _oracle_agreement(body: ConvexBody, curve: FreeEnergyCurve, nsigma: float) -> CheckReport:
    rows, bad = [], []
    for p in curve.points:
        o = free_energy_oracle(body, curve.x0, p.w)
        if o is None:
            return CheckReport("oracle_agreement", SKIP, note="no quadrature oracle for this body")
        z = (p.Z - o.Z) / max(math.hypot(p.se, o.se), 1e-300)
        row = {"w": p.w, "Z": p.Z, "se": p.se, "oracle": o.Z, "z": z, "method": p.method}
        rows.append(row)
        if abs(z) > nsigma:
            bad.append(row)
    return CheckReport("oracle_agreement", verdict(not bad),
                       witness={"max_abs_z": max(abs(r["z"]) for r in rows), "rows": rows},
                       violations=bad)


def _run_stage_checks(name, enabled, fn):
    """Call ``fn`` only if at least one check it produces is enabled."""
    if not any(c in enabled for c in CHECK_GROUPS[name]):
        return []
    out = fn()
    return [c for c in out if c.name in enabled]


def run_body(spec: BodySpec, cfg: RunConfig, index: int = 0,
             stages=STAGES) -> BodyResult:
    t0 = time.perf_counter()
    k = cfg.constants
    body = spec.body
    x0 = body.interior_point if spec.x0 is None else spec.x0
    scfg = cfg.sampler_config(index)
    batch = sample_uniform(body, scfg, cfg.samples)
    stats = radial_stats(batch, x0)
    res = BodyResult(spec.name, body.kind, body.dimension, scfg.seed, stats)
    enabled = set(cfg.checks)
    checks: list[CheckReport] = []

    if "radial" in stages:
        def radial_checks():
            extra = [r for r in (stats.E - 2 * stats.S, stats.E2 - 3 * stats.S,
                                 stats.E - k.c0_floor * stats.S) if r > 0]
            cdf = radial_cdf(body, x0, default_radial_grid(batch, x0, extra=extra), batch)
            tail, anchor = check_small_ball_tail(stats, cdf, nsigma=NSIGMA)
            return [check_radial_logconcavity(cdf), tail, anchor,
                    check_khinchine(stats, k.C_khin),
                    check_reverse_chebyshev(batch, stats, floor=k.c0_floor)]
        checks += _run_stage_checks("radial", enabled, radial_checks)

    need_curve = any(s in stages for s in ("free_energy", "overlap", "bounds"))
    if need_curve:
        E2S = stats.E2S
        w0 = choose_w0(stats, k.c_prime)
        extra = [k.c_lower / E2S, k.c_refined / E2S, w0, k.C_u / E2S, 50.0 / E2S]
        grid = default_w_grid(stats, extra=extra, **cfg.w_grid)
        curve = build_curve(body, batch, stats, scfg, grid, body_id=spec.name,
                            thermo=cfg.thermo, m_node=cfg.m_node)
        res.curve = curve
        p50 = curve.point_at(50.0 / E2S)
        res.extras["empirical_c_u"] = {"w": p50.w, "c_u": empirical_upper_constant(p50, stats),
                                       "method": p50.method}
        if "oracle" in curve.by_method:
            po = next(p for p in curve.by_method["oracle"]
                      if math.isclose(p.w, p50.w, rel_tol=1e-12))
            res.extras["empirical_c_u"]["oracle_c_u"] = empirical_upper_constant(po, stats)

        res.extras["lower_frontier"] = lower_frontier(curve, stats)

        if "free_energy" in stages:
            def fe_checks():
                return [*check_curve_shape(curve),
                        check_free_energy_lower_bound(curve, stats, k.c_lower, k.C_lower),
                        check_free_energy_refined_bound(curve, stats, k.c_refined),
                        check_free_energy_upper_bound(curve, stats, k.c_u, k.C_u),
                        gaussian_identity_check(body, w0, batch, x0, seed=scfg.seed),
                        _oracle_agreement(body, curve, NSIGMA)]
            checks += _run_stage_checks("free_energy", enabled, fe_checks)

    if "overlap" in stages or "bounds" in stages:
        ov = corollary_check(body, stats, curve, batch, k.c_prime)
        res.overlap = ov
        if "overlap" in stages:
            checks += _run_stage_checks(
                "overlap", enabled,
                lambda: [*ov.checks, check_pinsker(body, curve, batch),
                         *check_entropy_shape(curve)])

    if "bounds" in stages:
        br = compute_bounds(body, stats, batch, w0=ov.w0, H=ov.H, dtv=ov.dtv_direct,
                            c_bob=k.c_bob, c_transfer=k.c_transfer, c_tv=k.c_tv,
                            c_calibrated=k.c_calibrated)
        x_opt = optimize_base_point(body, batch)
        st_opt = radial_stats(batch, x_opt)
        br.ratios["bobkov_e2_optimized_x0"] = bobkov_bound(st_opt, k.c_bob)[1]
        br.ratios["optimized_x0"] = x_opt.tolist()
        res.bounds = br
        checks += [c for c in br.checks if c.name in enabled]

    # every enabled check appears exactly once
    seen = {c.name for c in checks}
    for name in cfg.checks:
        if name not in seen and _stage_of(name) in stages:
            checks.append(CheckReport(name, SKIP, note="not applicable to this body"))
    order = {n: i for i, n in enumerate(ALL_CHECKS)}
    res.checks = sorted(checks, key=lambda c: order[c.name])
    res.seconds = time.perf_counter() - t0
    return res


def lower_frontier(curve: FreeEnergyCurve, stats: RadialStats,
                   c_values=(0.05, 0.1, LOWER_C, 0.25, 0.5, 1.0, 2.0)) -> list[dict]:
    """Smallest ``C`` with ``Z/w >= E2^2/2 - C E2 S`` on ``w <= c/(E2 S)``.

    Reported for several ``c``, including values outside the proven range,
    without asserting anything.
    """
    q = curve.Z / curve.w
    need = (0.5 * stats.E2**2 - q) / stats.E2S
    rows = []
    for c in c_values:
        sel = curve.w <= c / stats.E2S * (1 + 1e-12)
        rows.append({"c": float(c), "C_min": float(need[sel].max()) if np.any(sel) else None,
                     "grid_points": int(sel.sum())})
    return rows


def _stage_of(check: str) -> str:
    return next(g for g, names in CHECK_GROUPS.items() if check in names)


def _run_one(args):
    spec, cfg, index, stages = args
    return run_body(spec, cfg, index, stages)


# --- suite ----------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    bodies: list[BodyResult]
    stages: tuple[str, ...]
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return any(b.failed for b in self.bodies)

    @property
    def verdict(self) -> str:
        return FAIL if self.failed else PASS

    def empirical_c_u(self) -> list[dict]:
        return [{"body": b.name, **b.extras["empirical_c_u"]}
                for b in self.bodies if "empirical_c_u" in b.extras]

    def calibrated_bobkov(self) -> dict | None:
        vals = [(b.name, b.bounds.calibrated_bobkov) for b in self.bodies
                if b.bounds is not None and b.bounds.calibrated_bobkov is not None]
        if not vals:
            return None
        name, v = min(vals, key=lambda t: t[1])
        return {"suite_min": v, "argmin": name, "per_body": dict(vals)}

    def to_dict(self) -> dict:
        return to_jsonable({
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict,
            "seed": self.config["seed"],
            "stages": list(self.stages),
            "config": self.config,
            "versions": {"gaussfit": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "empirical_c_u": self.empirical_c_u(),
            "calibrated_bobkov": self.calibrated_bobkov(),
            "bodies": [b.to_dict() for b in self.bodies],
            "timing": {"total_seconds": self.seconds,
                       "per_body_seconds": {b.name: b.seconds for b in self.bodies}},
        })

    def table(self) -> str:
        lines = [f"{'body':<18}{'n':>4}{'pass':>6}{'fail':>6}{'skip':>6}  failed checks"]
        for b in self.bodies:
            c = b.counts()
            lines.append(f"{b.name:<18}{b.dimension:>4}{c[PASS]:>6}{c[FAIL]:>6}{c[SKIP]:>6}  "
                         + ",".join(x.name for x in b.failed))
        lines.append(f"suite verdict: {self.verdict}")
        return "\n".join(lines)


def run_suite(cfg: RunConfig, stages=STAGES) -> RunReport:
    t0 = time.perf_counter()
    jobs = [(spec, cfg, i, tuple(stages)) for i, spec in enumerate(cfg.bodies)]
    workers = min(cfg.workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return RunReport(cfg.echo(), results, tuple(stages), time.perf_counter() - t0)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("GAUSSFIT_WORKERS", "1")))
    except ValueError:
        raise ConfigError("GAUSSFIT_WORKERS must be an integer") from None


# --- output files ---------------------------------------------------------------

def _write_rows(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def write_outputs(report: RunReport, out: Path) -> list[Path]:
    """Report JSON, text table, CSV tables and plot data files."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "report.json"
    p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    written.append(p)
    p = out / "summary.txt"
    p.write_text(report.table() + "\n")
    written.append(p)
    for b in report.bodies:
        if b.curve is None:
            continue
        written.append(write_curve_csv(b.curve, out / f"{b.name}_free_energy.csv",
                                       lower_c=report_constant(report, "C_lower"),
                                       c_u=report_constant(report, "c_u")))
        w, H, se_H = entropy_curve(b.curve)
        p = out / f"{b.name}_plot_Z_over_w.dat"
        _write_rows(p, ["w", "Z_over_w", "se"],
                    [(repr(x), repr(z / x), repr(s / x)) for x, z, s in
                     zip(b.curve.w, b.curve.Z, b.curve.se)])
        written.append(p)
        p = out / f"{b.name}_plot_H.dat"
        _write_rows(p, ["w", "H", "se"], [(repr(x), repr(h), repr(s)) for x, h, s in
                                          zip(w, H, se_H)])
        written.append(p)
    cu = report.empirical_c_u()
    if cu:
        p = out / "empirical_c_u.csv"
        _write_rows(p, ["body", "w", "c_u", "method", "oracle_c_u"],
                    [(r["body"], r["w"], r["c_u"], r["method"], r.get("oracle_c_u", ""))
                     for r in cu])
        written.append(p)
    rows = [(b.name, b.bounds) for b in report.bodies if b.bounds is not None]
    if rows:
        written.append(write_bounds_csv(rows, out / "bounds.csv"))
        p = out / "plot_bounds.dat"
        _write_rows(p, ["body", "bobkov_e2", "kls", "transfer", "reference"],
                    [(n, r.bobkov_che_e2, r.kls_che, r.transfer_che,
                      None if r.reference_che is None else r.reference_che[0]) for n, r in rows])
        written.append(p)
    return written


def report_constant(report: RunReport, name: str) -> float:
    return float(report.config["constants"][name])
