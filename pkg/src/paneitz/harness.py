"""Seeded verification suites and their JSON/text reports.

Every case draws its randomness from ``SeedSequence([root, suite, dim,
family, seed])``, so adding a case never shifts the samples of another and a
failing record can be re-run from the metric name, seed and point it carries.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import __version__, catalog, fields
from .conformal import (
    kernel_proportionality_check,
    paneitz_covariance_family,
    paneitz_covariance_residual,
    rescale,
    yamabe_covariance_residual,
)
from .geometry import ChartMetric, curvature_at, einstein_divergence, metric_compatibility, riemann_at
from .jets import Jet, basis, jet_mul
from .operators import (
    PaneitzCoefficients,
    cylinder_closed_form,
    paneitz4_apply,
    paneitz_apply,
    yamabe_coefficient,
)

SUITES = ("jets", "geometry", "yamabe", "paneitz", "cylinder", "flatness", "mutation")

# default tolerances by kind of identity
TOL_ORDER4 = 1e-7
TOL_ORDER2 = 1e-8
TOL_ALGEBRAIC = 1e-10
MUTATION_FACTOR = 1.01
MUTATION_THRESHOLD = 1e-3
MUTATION_AMPLITUDE = 0.5
MUTATION_FREQUENCY = 4.0
BATCH = 50
# keeps |det g| of doubly rescaled metrics far above the degeneracy threshold
FACTOR_AMPLITUDE = 0.3


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    suite: str = "all"
    dims: list = field(default_factory=lambda: [3, 4, 5, 6])
    points: int = 100
    seeds: list = field(default_factory=lambda: list(range(5)))
    tol: float | None = None
    order: int = 4
    metrics: list | None = None
    custom_metrics: list = field(default_factory=list)
    root_seed: int = 0
    format: str = "json"
    timestamp: bool = True

    def validate(self) -> "SuiteConfig":
        if self.suite not in SUITES + ("all",):
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES + ('all',))}")
        if int(self.points) < 1:
            raise ConfigError(f"points per case must be >= 1, got {self.points}")
        if self.tol is not None and not float(self.tol) > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tol}")
        if not 0 <= int(self.order) <= 4:
            raise ConfigError(f"jet order must lie in [0, 4], got {self.order}")
        if self.format not in ("json", "text"):
            raise ConfigError(f"unknown format {self.format!r}")
        if not self.dims or any(int(d) < 1 for d in self.dims):
            raise ConfigError(f"dimensions must be positive integers, got {self.dims}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for name in self.metrics or []:
            try:
                catalog.get(name)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
        return self

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("timestamp")
        return out


def parse_seeds(text) -> list:
    if isinstance(text, int):
        return list(range(text))
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    parts = [p for p in str(text).split(",") if p.strip()]
    if len(parts) == 1:
        return list(range(int(parts[0])))
    return [int(p) for p in parts]


def config_from_mapping(data: dict) -> SuiteConfig:
    known = {f for f in SuiteConfig.__dataclass_fields__}
    kwargs = {}
    for key, value in data.items():
        key = key.replace("-", "_")
        if key == "metric":
            key = "metrics"
            value = [value] if isinstance(value, str) else value
        if key == "tol_rel":
            key = "tol"
        if key == "points_per_case":
            key = "points"
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
        kwargs[key] = value
    if "seeds" in kwargs:
        kwargs["seeds"] = parse_seeds(kwargs["seeds"])
    cfg = SuiteConfig(**kwargs)
    cfg.custom_metrics = list(cfg.custom_metrics or [])
    return cfg


# case bookkeeping ----------------------------------------------------------

def _code(text: str) -> int:
    return zlib.crc32(text.encode())


def case_rng(cfg: SuiteConfig, suite: str, dim: int, family: str, seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.root_seed, _code(suite), dim, _code(family), seed]))


def _subseed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def _float(v) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


def _record(check, metric, dim, seed, point, lhs, rhs, rel, tol, control=False, error=None) -> dict:
    rel_f = _float(rel) if rel is not None else None
    if error is not None or rel_f is None:
        passed = False
    elif control:
        passed = rel_f > tol
    else:
        passed = rel_f <= tol
    rec = {
        "check": check,
        "metric": metric,
        "dim": dim,
        "seed": seed,
        "point": None if point is None else [float(c) for c in point],
        "lhs": None if lhs is None else _float(lhs),
        "rhs": None if rhs is None else _float(rhs),
        "rel_residual": rel_f,
        "tol": tol,
        "pass": passed,
    }
    if control:
        rec["negative_control"] = True
    if error is not None:
        rec["error"] = error
    return rec


def _batched(points: np.ndarray, fn: Callable[[np.ndarray], object], size: int = BATCH) -> list:
    return [fn(points[i : i + size]) for i in range(0, len(points), size)]


def _residual_records(check, metric, dim, seed, points, fn, tol) -> list:
    """Evaluate a residual function over points; errors become failed records."""
    out = []
    for chunk in range(0, len(points), BATCH):
        pts = points[chunk : chunk + BATCH]
        try:
            res = fn(pts)
        except Exception:
            # isolate the offending points
            for p in pts:
                out.append(_single_record(check, metric, dim, seed, p, fn, tol))
            continue
        for k, p in enumerate(pts):
            out.append(_record(check, metric, dim, seed, p, res.lhs[k], res.rhs[k], res.rel_residual[k], tol))
    return out


def _single_record(check, metric, dim, seed, point, fn, tol) -> dict:
    try:
        res = fn(point[None, :])
    except Exception as exc:  # any evaluation failure is a failed check
        msg = f"{type(exc).__name__}: {exc}"
        return _record(check, metric, dim, seed, point, None, None, None, tol, error=msg)
    return _record(check, metric, dim, seed, point, res.lhs[0], res.rhs[0], res.rel_residual[0], tol)


@dataclass
class _Pair:
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def rel_residual(self):
        scale = np.maximum(np.maximum(np.abs(self.lhs), np.abs(self.rhs)), 1.0)
        return np.abs(self.lhs - self.rhs) / scale


def _metric_cases(cfg: SuiteConfig, dim: int, seed: int, default_families) -> Iterator[catalog.CatalogEntry]:
    if cfg.metrics:
        for name in cfg.metrics:
            entry = catalog.get(name, seed)
            if entry.dim == dim:
                yield entry
    elif not cfg.custom_metrics:
        for fam in default_families:
            yield catalog.get(f"{fam}-{dim}", seed)
    for k, block in enumerate(cfg.custom_metrics):
        entry = catalog.from_config(block, name=f"custom-{k}")
        if entry.dim == dim:
            yield entry


def _identity_tol(cfg, default):
    return float(cfg.tol) if cfg.tol is not None else default


# suites ---------------------------------------------------------------------

def _suite_jets(cfg: SuiteConfig) -> list:
    out = []
    for n in cfg.dims:
        for seed in cfg.seeds:
            rng = case_rng(cfg, "jets", n, "random", seed)
            order = max(1, min(cfg.order, 4))
            jb = basis(n, order)
            a = Jet(jb, rng.uniform(-1, 1, jb.size))
            b = Jet(jb, rng.uniform(-1, 1, jb.size))
            fast = jet_mul(a, b).coeffs
            slow = _brute_product(a, b)
            err = np.max(np.abs(fast - slow)) / max(1.0, np.max(np.abs(slow)))
            out.append(_record("jet-product", "random", n, seed, None, np.max(np.abs(fast)), np.max(np.abs(slow)), err, 1e-13))

            phi = fields.random_field(_subseed(rng), n, 3, 1.0)
            pts = rng.uniform(-0.5, 0.5, (cfg.points, n))
            grad = fields.eval_jet(phi, pts, order, n).gradient().value
            fd = _central_gradient(phi, pts, 1e-5)
            for k, p in enumerate(pts):
                scale = max(1.0, np.max(np.abs(fd[k])))
                rel = np.max(np.abs(grad[k] - fd[k])) / scale
                out.append(_record("jet-gradient-fd", "random-field", n, seed, p, np.max(np.abs(grad[k])), np.max(np.abs(fd[k])), rel, 1e-6))
    return out


def _brute_product(a: Jet, b: Jet) -> np.ndarray:
    prod: dict = {}
    da, db = a.as_dict(), b.as_dict()
    for ea, ca in da.items():
        for eb, cb in db.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            prod[e] = prod.get(e, 0.0) + float(ca) * float(cb)
    return np.array([prod.get(e, 0.0) for e in a.basis.exponents])


def _central_gradient(phi, pts, h):
    n = pts.shape[-1]
    out = np.empty(pts.shape)
    for i in range(n):
        step = np.zeros(n)
        step[i] = h
        out[:, i] = (fields.evaluate(phi, pts + step) - fields.evaluate(phi, pts - step)) / (2 * h)
    return out


def _suite_geometry(cfg: SuiteConfig) -> list:
    out = []
    for n in cfg.dims:
        if n < 2:
            continue
        for seed in cfg.seeds:
            for entry in _metric_cases(cfg, n, seed, ("perturbed-flat",)):
                rng = case_rng(cfg, "geometry", n, entry.name, seed)
                pts = entry.sample(rng, cfg.points)
                for chunk in range(0, len(pts), BATCH):
                    p = pts[chunk : chunk + BATCH]
                    try:
                        curv = curvature_at(entry.metric, p, 3)
                    except Exception as exc:
                        msg = f"{type(exc).__name__}: {exc}"
                        out += [_record("geometry", entry.name, n, seed, q, None, None, None, 0.0, error=msg) for q in p]
                        continue
                    bianchi, raw = einstein_divergence(curv)
                    compat = metric_compatibility(curv.metric, curv.christoffel)
                    ric = curv.ricci.value
                    gam = curv.christoffel.value
                    for k, q in enumerate(p):
                        b = np.max(np.abs(bianchi.value[k]))
                        scale = max(1.0, np.max(np.abs(raw.value[k])))
                        out.append(_record("bianchi", entry.name, n, seed, q, b, 0.0, b / scale, 1e-7))
                        c = np.max(np.abs(compat.value[k]))
                        out.append(_record("metric-compatibility", entry.name, n, seed, q, c, 0.0, c, 1e-11))
                        s = np.max(np.abs(ric[k] - np.swapaxes(ric[k], -1, -2)))
                        out.append(_record("ricci-symmetry", entry.name, n, seed, q, s, 0.0, s, TOL_ALGEBRAIC))
                        gs = np.max(np.abs(gam[k] - np.swapaxes(gam[k], -1, -2)))
                        out.append(_record("christoffel-symmetry", entry.name, n, seed, q, gs, 0.0, gs, 0.0))
    return out


def _box_coordinates(entry: catalog.CatalogEntry) -> dict:
    """Map each chart variable of the sampling box onto [-1/2, 1/2]."""
    mapping = {}
    for i, (lo, hi) in enumerate(entry.sampling_box):
        centre, scale = (lo + hi) / 2, 1.0 / (hi - lo)
        if centre == 0 and scale == 1:
            continue
        mapping[i] = fields.Mul(fields.Num(scale), fields.Sub(fields.Var(i), fields.Num(centre)))
    return mapping


def _random_inputs(cfg, suite, entry, seed, n):
    """Random factor and field, built in box-normalised coordinates so their
    size does not depend on where the chart puts its sampling box."""
    rng = case_rng(cfg, suite, n, entry.name, seed)
    local = _box_coordinates(entry)
    p = fields.substitute(fields.random_positive_factor(_subseed(rng), n, FACTOR_AMPLITUDE), local)
    phi = fields.substitute(fields.random_field(_subseed(rng), n, 3, 1.0), local)
    pts = entry.sample(rng, cfg.points)
    return p, phi, pts


def _suite_yamabe(cfg: SuiteConfig) -> list:
    out = []
    tol = _identity_tol(cfg, TOL_ORDER2)
    for n in cfg.dims:
        if n < 2:
            continue
        for seed in cfg.seeds:
            for entry in _metric_cases(cfg, n, seed, ("perturbed-flat", "conformally-flat")):
                p, phi, pts = _random_inputs(cfg, "yamabe", entry, seed, n)
                out += _residual_records(
                    "yamabe-covariance", entry.name, n, seed, pts,
                    lambda x: yamabe_covariance_residual(entry.metric, p, phi, x), tol,
                )
    return out


def _suite_paneitz(cfg: SuiteConfig) -> list:
    out = []
    tol = _identity_tol(cfg, TOL_ORDER4)
    for n in cfg.dims:
        if n < 3:
            continue
        for seed in cfg.seeds:
            for entry in _metric_cases(cfg, n, seed, ("perturbed-flat", "conformally-flat")):
                p, phi, pts = _random_inputs(cfg, "paneitz", entry, seed, n)
                out += _residual_records(
                    "paneitz-covariance", entry.name, n, seed, pts,
                    lambda x: paneitz_covariance_residual(entry.metric, p, phi, x), tol,
                )
                if n == 4:
                    out += _residual_records(
                        "paneitz4-reduction", entry.name, n, seed, pts,
                        lambda x: _Pair(paneitz4_apply(entry.metric, phi, x), paneitz_apply(entry.metric, phi, x).value),
                        TOL_ALGEBRAIC,
                    )
                    out += _residual_records(
                        "paneitz4-zeroth-order-vanishes", entry.name, n, seed, pts,
                        lambda x: _Pair(paneitz_apply(entry.metric, phi, x).zeroth_order_part, np.zeros(len(x))),
                        0.0,
                    )
                    out += _residual_records(
                        "kernel-proportionality", entry.name, n, seed, pts,
                        lambda x: kernel_proportionality_check(entry.metric, p, phi, x), tol,
                    )
    return out


CYLINDER_EIGEN = (
    ("cos(t)", lambda x: -3.0 * np.cos(x[:, 0])),
    ("cos(chi)", lambda x: 9.0 * np.cos(x[:, 1])),
    ("cos(t)*cos(chi)", lambda x: np.zeros(len(x))),
)


def _suite_cylinder(cfg: SuiteConfig) -> list:
    out = []
    entry = catalog.einstein_cylinder()
    g = entry.metric
    tol = _identity_tol(cfg, TOL_ORDER4)
    for seed in cfg.seeds:
        rng = case_rng(cfg, "cylinder", 4, entry.name, seed)
        phi = fields.random_field(_subseed(rng), 4, 3, 1.0)
        pts = entry.sample(rng, cfg.points)
        out += _residual_records(
            "cylinder-closed-form", entry.name, 4, seed, pts,
            lambda x: _Pair(paneitz_apply(g, phi, x).value, cylinder_closed_form(phi, x)), tol,
        )
    rng = case_rng(cfg, "cylinder", 4, "eigen", 0)
    pts = entry.sample(rng, cfg.points)
    for text, expected in CYLINDER_EIGEN:
        phi = fields.parse_expression(text, 4)
        out += _residual_records(
            f"cylinder-eigen[{text}]", entry.name, 4, 0, pts,
            lambda x: _Pair(paneitz_apply(g, phi, x).value, expected(x)), TOL_ORDER2,
        )
    return out


def cylinder_region_points(rng: np.random.Generator, count: int, threshold: float = 0.1) -> np.ndarray:
    """Sample the cylinder box restricted to ``p > threshold``."""
    entry = catalog.einstein_cylinder()
    p = catalog.paneitz_factor()
    pts = np.empty((0, 4))
    while len(pts) < count:
        cand = entry.sample(rng, 4 * count)
        pts = np.vstack([pts, cand[fields.evaluate(p, cand) > threshold]])
    return pts[:count]


def _suite_flatness(cfg: SuiteConfig) -> list:
    out = []
    entry = catalog.einstein_cylinder()
    inv_p = fields.Div(fields.Num(1.0), catalog.paneitz_factor())
    flat_metric = rescale(entry.metric, inv_p).rescaled
    tol = _identity_tol(cfg, TOL_ORDER4)
    for seed in cfg.seeds:
        rng = case_rng(cfg, "flatness", 4, entry.name, seed)
        pts = cylinder_region_points(rng, cfg.points)
        for chunk in range(0, len(pts), BATCH):
            p = pts[chunk : chunk + BATCH]
            try:
                riem = riemann_at(flat_metric, p, 2).value
            except Exception as exc:
                msg = f"{type(exc).__name__}: {exc}"
                out += [_record("flatness", "einstein-cylinder/p^2", 4, seed, q, None, None, None, tol, error=msg) for q in p]
                continue
            worst = np.abs(riem).reshape(len(p), -1).max(axis=1)
            for k, q in enumerate(p):
                out.append(_record("flatness", "einstein-cylinder/p^2", 4, seed, q, worst[k], 0.0, worst[k], tol))
    return out


def mutation_samples(cfg: SuiteConfig, n: int, seed: int, count: int):
    """Generic inputs for the negative control: a perturbed flat metric, an
    oscillating conformal factor and a random field offset from zero."""
    entry = catalog.perturbed_flat(seed, n)
    rng = case_rng(cfg, "mutation", n, entry.name, seed)
    p = fields.random_wave_factor(_subseed(rng), n, MUTATION_AMPLITUDE, MUTATION_FREQUENCY)
    phi = fields.Add(fields.Num(1.0), fields.random_field(_subseed(rng), n, 3, 1.0))
    return entry, p, phi, entry.sample(rng, count)


def _control_record(check, entry, n, seed, rel, error=None) -> dict:
    if error is not None:
        return _record(check, entry.name, n, seed, None, None, None, None, MUTATION_THRESHOLD, control=True, error=error)
    med = float(np.median(rel))
    return _record(check, entry.name, n, seed, None, med, 0.0, med, MUTATION_THRESHOLD, control=True)


def _suite_mutation(cfg: SuiteConfig) -> list:
    out = []
    for n in cfg.dims:
        if n < 3:
            continue
        for seed in cfg.seeds:
            entry, p, phi, pts = mutation_samples(cfg, n, seed, cfg.points)
            base = PaneitzCoefficients.for_dimension(n)
            # a 1% change of an exact zero is no change
            names = [name for name in base.NAMES if getattr(base, name) != 0]
            sets = [base.mutated(name, MUTATION_FACTOR) for name in names]
            checks = [f"mutation[{name}]" for name in names] + ["mutation[yamabe]"]
            c = yamabe_coefficient(n) * MUTATION_FACTOR

            def residuals(x):
                res = paneitz_covariance_family(entry.metric, p, phi, x, sets)
                res.append(yamabe_covariance_residual(entry.metric, p, phi, x, c))
                return np.stack([r.rel_residual for r in res])

            try:
                rel = np.concatenate(_batched(pts, residuals), axis=1)
            except Exception as exc:
                msg = f"{type(exc).__name__}: {exc}"
                out += [_control_record(check, entry, n, seed, None, msg) for check in checks]
                continue
            out += [_control_record(check, entry, n, seed, rel[k]) for k, check in enumerate(checks)]
    return out


SUITE_FUNCTIONS = {
    "jets": _suite_jets,
    "geometry": _suite_geometry,
    "yamabe": _suite_yamabe,
    "paneitz": _suite_paneitz,
    "cylinder": _suite_cylinder,
    "flatness": _suite_flatness,
    "mutation": _suite_mutation,
}


def summarize(records: list, wall_time: float | None = None) -> dict:
    plain = [r["rel_residual"] for r in records if not r.get("negative_control") and r["rel_residual"] is not None]
    passed = sum(1 for r in records if r["pass"])
    return {
        "max_residual": max(plain) if plain else None,
        "median_residual": float(np.median(plain)) if plain else None,
        "pass_count": passed,
        "fail_count": len(records) - passed,
        "wall_time": wall_time,
    }


def run_suite(cfg: SuiteConfig) -> dict:
    cfg.validate()
    start = time.perf_counter()
    names = SUITES if cfg.suite == "all" else (cfg.suite,)
    records = []
    for name in names:
        records += SUITE_FUNCTIONS[name](cfg)
    wall = time.perf_counter() - start if cfg.timestamp else None
    report = {
        "config": cfg.echo(),
        "records": records,
        "summary": summarize(records, wall),
        "version": __version__,
    }
    if cfg.timestamp:
        report["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return report


def report_ok(report: dict) -> bool:
    return report["summary"]["fail_count"] == 0


def to_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True)


def to_text(report: dict) -> str:
    lines = [f"paneitz {report['version']}  suite={report['config']['suite']}"]
    by_check: dict = {}
    for r in report["records"]:
        by_check.setdefault(r["check"], []).append(r)
    for check, recs in by_check.items():
        res = [r["rel_residual"] for r in recs if r["rel_residual"] is not None]
        worst = max(res) if res else float("nan")
        fails = sum(1 for r in recs if not r["pass"])
        status = "PASS" if fails == 0 else "FAIL"
        kind = "min" if recs[0].get("negative_control") else "max"
        if kind == "min":
            worst = min(res) if res else float("nan")
        lines.append(f"{status}  {check:<36} samples={len(recs):<5} {kind} residual {worst:.3e}  tol {recs[0]['tol']:.0e}  failures {fails}")
    for r in report["records"]:
        if not r["pass"]:
            where = "" if r["point"] is None else " at " + ",".join(f"{c:.6g}" for c in r["point"])
            why = r.get("error") or f"residual {r['rel_residual']}"
            lines.append(f"  failed {r['check']} metric={r['metric']} dim={r['dim']} seed={r['seed']}{where}: {why}")
    s = report["summary"]
    lines.append(f"passed {s['pass_count']}, failed {s['fail_count']}, max residual {s['max_residual']}")
    if s["wall_time"] is not None:
        lines.append(f"wall time {s['wall_time']:.1f} s")
    return "\n".join(lines)
