"""Builtin metrics, conformal factors and custom-metric loading."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import fields
from .conformal import rescale
from .fields import Add, Call, Div, FieldExpr, Mul, Num, Pow, Var
from .geometry import ChartMetric

FLAT_BOX = 0.5


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    dim: int
    metric: ChartMetric
    sampling_box: tuple  # ((lo, hi), ...) per axis
    notes: str = ""
    signature: tuple = field(default=())

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.sampling_box])
        hi = np.array([b[1] for b in self.sampling_box])
        return lo + (hi - lo) * rng.random((count, self.dim))


def _box(n: int, half: float = FLAT_BOX) -> tuple:
    return tuple((-half, half) for _ in range(n))


def _signature(n: int, signature) -> tuple:
    sig = (1,) * n if signature is None else tuple(int(s) for s in signature)
    if len(sig) != n or any(s not in (1, -1) for s in sig):
        raise ValueError(f"signature must be {n} entries of +1/-1, got {signature}")
    return sig


def _hint(sig: tuple) -> str:
    neg = sum(1 for s in sig if s < 0)
    if neg == 0:
        return "riemannian"
    if neg == 1 or neg == len(sig) - 1:
        return "lorentzian"
    return "pseudo-riemannian"


def flat(n: int, signature: Sequence[int] | None = None) -> CatalogEntry:
    sig = _signature(n, signature)
    metric = ChartMetric.diagonal([Num(float(s)) for s in sig], _hint(sig))
    name = f"flat-euclidean-{n}" if all(s > 0 for s in sig) else (
        "flat-minkowski-4" if sig == (1, -1, -1, -1) else f"flat-{n}-" + "".join("+" if s > 0 else "-" for s in sig)
    )
    return CatalogEntry(name, n, metric, _box(n, 1.0), "constant diagonal metric", sig)


def sphere(n: int, radius: float = 1.0) -> CatalogEntry:
    """Round sphere in hyperspherical coordinates (angles x0, x1, ...)."""
    if n not in (2, 3):
        raise ValueError(f"sphere dimension must be 2 or 3, got {n}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    r2 = Num(float(radius) ** 2)
    entries = []
    for i in range(n):
        term = r2
        for k in range(i):
            term = Mul(term, Pow(Call("sin", Var(k)), 2))
        entries.append(term)
    metric = ChartMetric.diagonal(entries, "riemannian")
    box = tuple((0.2, math.pi - 0.2) for _ in range(n - 1)) + ((0.0, 2 * math.pi),)
    name = f"sphere-{n}" if radius == 1.0 else f"sphere-{n}-r{radius:g}"
    return CatalogEntry(name, n, metric, box, f"round S^{n} of radius {radius:g}", (1,) * n)


def einstein_cylinder() -> CatalogEntry:
    """``dt^2 - ds^2`` on R x S^3, chart (t, chi, theta, phi)."""
    s2chi = Pow(Call("sin", Var(1)), 2)
    entries = [Num(1.0), Num(-1.0), Mul(Num(-1.0), s2chi), Mul(Mul(Num(-1.0), s2chi), Pow(Call("sin", Var(2)), 2))]
    metric = ChartMetric.diagonal(entries, "lorentzian")
    box = ((-1.0, 1.0), (0.3, math.pi - 0.3), (0.3, math.pi - 0.3), (0.0, 2 * math.pi))
    return CatalogEntry(
        "einstein-cylinder", 4, metric, box, "Lorentzian R x S^3 with the unit round S^3", (1, -1, -1, -1)
    )


def paneitz_factor() -> FieldExpr:
    """``cos(t)/2 + cos(chi)/2``: the SU(2) trace term tr(u)/4 is cos(chi)/2 in the
    hyperspherical chart, since an element at polar angle chi has trace 2 cos(chi)."""
    half = Div(Num(1.0), Num(2.0))
    return Add(Mul(half, Call("cos", Var(0))), Mul(half, Call("cos", Var(1))))


def _seed(*parts) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(p) for p in parts])


def perturbed_flat(seed: int, n: int, signature: Sequence[int] | None = None, eps: float = 0.1) -> CatalogEntry:
    """``eta_ij + eps * S_ij`` with ``S`` a symmetric matrix of degree-2 random fields."""
    if eps > 0.1:
        raise ValueError(f"perturbation size must be <= 0.1, got {eps}")
    sig = _signature(n, signature)
    base = flat(n, sig).metric
    upper = []
    k = 0
    for i in range(n):
        for j in range(i, n):
            pert = fields.random_field(_seed(seed, n, i, j), n, 2, 0.5)
            c = base.upper[k]
            upper.append(c if eps == 0 else Add(c, Mul(Num(float(eps)), pert)))
            k += 1
    metric = ChartMetric(n, tuple(upper), _hint(sig))
    return CatalogEntry(
        f"perturbed-flat-{n}", n, metric, _box(n), f"flat {sig} plus {eps:g} x random symmetric field, seed {seed}", sig
    )


def conformally_flat(seed: int, n: int, signature: Sequence[int] | None = None, amplitude: float = 0.25) -> CatalogEntry:
    sig = _signature(n, signature)
    p = fields.random_positive_factor(_seed(seed, n, 1000), n, amplitude)
    metric = rescale(flat(n, sig).metric, p).rescaled
    return CatalogEntry(
        f"conformally-flat-{n}", n, metric, _box(n), f"exp(random field)^2 times flat {sig}, seed {seed}", sig
    )


# name resolution ----------------------------------------------------------

BUILTIN_NAMES = (
    "flat-euclidean-N",
    "flat-minkowski-4",
    "sphere-2",
    "sphere-3",
    "einstein-cylinder",
    "perturbed-flat-N",
    "conformally-flat-N",
)


def get(name: str, seed: int = 0) -> CatalogEntry:
    if name == "flat-minkowski-4":
        return flat(4, (1, -1, -1, -1))
    if name in ("sphere-2", "sphere-3"):
        return sphere(int(name[-1]))
    if name == "einstein-cylinder":
        return einstein_cylinder()
    m = re.fullmatch(r"(flat-euclidean|perturbed-flat|conformally-flat)-(\d+)", name)
    if m:
        n = int(m.group(2))
        if n < 1:
            raise KeyError(f"dimension must be positive in {name!r}")
        kind = m.group(1)
        if kind == "flat-euclidean":
            return flat(n)
        if kind == "perturbed-flat":
            return perturbed_flat(seed, n)
        return conformally_flat(seed, n)
    raise KeyError(f"unknown catalog metric {name!r}")


def from_config(block: dict, name: str = "custom") -> CatalogEntry:
    """Custom metric from ``{dimension, components: [upper triangle...], box: [[lo, hi], ...]}``."""
    try:
        n = int(block["dimension"])
        comps = [str(c) for c in block["components"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"custom metric block needs 'dimension' and 'components': {exc}") from exc
    metric = ChartMetric.parse(n, comps, str(block.get("signature_hint", "")))
    box = block.get("box") or [[-FLAT_BOX, FLAT_BOX]] * n
    if len(box) != n:
        raise ValueError(f"sampling box needs {n} intervals, got {len(box)}")
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    return CatalogEntry(str(block.get("name", name)), n, metric, box, "custom metric from config")


def load_config(path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must be a mapping")
    return data


def listing() -> list[tuple[str, str]]:
    rows = []
    for name in BUILTIN_NAMES:
        sample = name.replace("-N", "-4")
        entry = get(sample)
        rows.append((name, entry.notes))
    return rows
