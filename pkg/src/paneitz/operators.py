"""Conformally covariant operators: Yamabe (second order) and Paneitz (fourth order).

The curvature-dependent coefficients are only covariant when curvature is
taken with the opposite sign to :mod:`paneitz.geometry` (i.e. with the round
sphere negatively curved).  ``CURVATURE_SIGN`` carries that convention; the
Einstein-cylinder closed form and the covariance residuals both confirm it,
and both fail with the other sign.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import fields
from .fields import FieldExpr
from .geometry import (
    ChartMetric,
    CurvatureData,
    MetricData,
    curvature_at,
    divergence_core,
    laplacian_core,
)
from .jets import Jet, jet_contract, jet_matrix_inverse, jet_sqrt_abs_det

CURVATURE_SIGN = -1


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class PaneitzCoefficients:
    """The six rational coefficients of the fourth-order operator in dimension n."""

    leading: Fraction  # L^2
    ricci: Fraction  # R^ij inside the divergence
    scalar: Fraction  # g^ij R inside the divergence
    laplacian_scalar: Fraction  # L R
    ricci_squared: Fraction  # R^ij R_ij
    scalar_squared: Fraction  # R^2

    NAMES = ("leading", "ricci", "scalar", "laplacian_scalar", "ricci_squared", "scalar_squared")

    @classmethod
    def for_dimension(cls, n: int) -> "PaneitzCoefficients":
        if n <= 2:
            raise DimensionError(f"the fourth-order operator needs dimension n > 2, got {n}")
        n = Fraction(n)
        return cls(
            leading=Fraction(1),
            ricci=-4 / (n - 2),
            scalar=(n**2 - 4 * n + 8) / (2 * (n - 1) * (n - 2)),
            laplacian_scalar=(n - 4) / (4 * (n - 1)),
            ricci_squared=-(n - 4) / (n - 2) ** 2,
            scalar_squared=(n - 4) * (n**3 - 4 * n**2 + 16 * n - 16) / (16 * (n - 1) ** 2 * (n - 2) ** 2),
        )

    def mutated(self, name: str, factor) -> "PaneitzCoefficients":
        if name not in self.NAMES:
            raise KeyError(name)
        return replace(self, **{name: getattr(self, name) * Fraction(factor)})


def yamabe_coefficient(n: int) -> Fraction:
    if n <= 1:
        raise DimensionError(f"the Yamabe operator needs dimension n > 1, got {n}")
    return Fraction(n - 2, 4 * (n - 1))


@dataclass
class OperatorResult:
    fourth_order_part: np.ndarray
    divergence_part: np.ndarray
    zeroth_order_part: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.fourth_order_part + self.divergence_part + self.zeroth_order_part

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "fourth_order_part": self.fourth_order_part,
            "divergence_part": self.divergence_part,
            "zeroth_order_part": self.zeroth_order_part,
        }


def _phi_jet(phi, x, order: int, dim: int) -> Jet:
    if isinstance(phi, Jet):
        return phi.truncate(order)
    return fields.eval_jet(phi, x, order, dim)


def _signed(curv: CurvatureData, sign: int):
    return curv.ricci * sign, curv.ricci_raised * sign, curv.scalar * sign


def yamabe_apply(g: ChartMetric, phi, x, coefficient=None, curvature_sign: int = CURVATURE_SIGN) -> np.ndarray:
    """``L phi + (n-2)/(4(n-1)) R phi`` at each point of ``x``."""
    n = g.dim
    c = yamabe_coefficient(n) if coefficient is None else coefficient
    curv = curvature_at(g, x, 2)
    u = _phi_jet(phi, x, 2, n)
    lap = laplacian_core(u, curv.data)
    return lap.value + float(c) * curvature_sign * curv.scalar.value * u.value


def paneitz_from_curvature(
    curv: CurvatureData,
    u: Jet,
    coefficients: PaneitzCoefficients,
    curvature_sign: int = CURVATURE_SIGN,
) -> OperatorResult:
    data = curv.data
    ric, ric_up, scal = _signed(curv, curvature_sign)
    c = coefficients

    lap_u = laplacian_core(u, data)  # order 2
    fourth = float(c.leading) * laplacian_core(lap_u, data).value

    ginv = curv.inverse_metric.truncate(1)
    a = ric_up.truncate(1) * float(c.ricci) + ginv * scal.truncate(1)[..., None, None] * float(c.scalar)
    du = u.truncate(2).gradient()  # order 1
    v = jet_contract("...ij,...i->...j", a, du)
    div = divergence_core(v, data.sqrt_abs_det).value

    lap_r = laplacian_core(scal, data).value
    ric0 = ric.value
    ric_up0 = ric_up.value
    zeroth_coeff = (
        float(c.laplacian_scalar) * lap_r
        + float(c.ricci_squared) * np.einsum("...ij,...ij->...", ric_up0, ric0)
        + float(c.scalar_squared) * scal.value**2
    )
    return OperatorResult(fourth, div, zeroth_coeff * u.value)


def paneitz_apply(
    g: ChartMetric,
    phi,
    x,
    coefficients: PaneitzCoefficients | None = None,
    curvature_sign: int = CURVATURE_SIGN,
) -> OperatorResult:
    """The fourth-order covariant operator applied to ``phi`` at each point of ``x``."""
    n = g.dim
    coefficients = coefficients or PaneitzCoefficients.for_dimension(n)
    curv = curvature_at(g, x, 4)
    return paneitz_from_curvature(curv, _phi_jet(phi, x, 4, n), coefficients, curvature_sign)


def paneitz4_apply(g: ChartMetric, phi, x, curvature_sign: int = CURVATURE_SIGN) -> np.ndarray:
    """Four-dimensional form ``L^2 phi - 2 div((R^ij - g^ij R / 3) d_i phi)``."""
    if g.dim != 4:
        raise DimensionError(f"the reduced form is four-dimensional only, got n = {g.dim}")
    curv = curvature_at(g, x, 4)
    data = curv.data
    _, ric_up, scal = _signed(curv, curvature_sign)
    u = _phi_jet(phi, x, 4, 4)
    bilap = laplacian_core(laplacian_core(u, data), data).value
    traceless = ric_up.truncate(1) - curv.inverse_metric.truncate(1) * scal.truncate(1)[..., None, None] * (1 / 3)
    v = jet_contract("...ij,...i->...j", traceless, u.truncate(2).gradient())
    return bilap - 2.0 * divergence_core(v, data.sqrt_abs_det).value


# Einstein cylinder R x S^3, chart (t, chi, theta, phi) -----------------------

_S3_BLOCK = ("1", "0", "0", "sin(chi)^2", "0", "sin(chi)^2*sin(theta)^2")


def _sphere_block_data(x) -> MetricData:
    """Round S^3 metric in the spatial coordinates of a 4-dimensional chart."""
    exprs = [fields.parse_expression(s, 4) for s in _S3_BLOCK]
    ev = fields.JetEvaluator(x, 4, 3)
    comps = [ev(e) for e in exprs]
    idx = {(0, 0): 0, (0, 1): 1, (0, 2): 2, (1, 1): 3, (1, 2): 4, (2, 2): 5}
    rows = [
        Jet.stack([comps[idx[(min(i, j), max(i, j))]] for j in range(3)], -1) for i in range(3)
    ]
    h = Jet.stack(rows, -2)
    return MetricData(h, jet_matrix_inverse(h), jet_sqrt_abs_det(h))


def cylinder_closed_form(phi, x) -> np.ndarray:
    """``((d_t)^2 - Delta)^2 phi + 4 (d_t)^2 phi`` with ``Delta`` the S^3 Laplacian."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(np.sin(x[..., 1])) < 1e-3) or np.any(np.abs(np.sin(x[..., 2])) < 1e-3):
        raise ValueError("point lies on a coordinate singularity of the (chi, theta, phi) chart")
    s3 = _sphere_block_data(x)
    spatial = (1, 2, 3)
    u = _phi_jet(phi, x, 4, 4)

    def wave(w: Jet) -> Jet:
        return w.partial(0).partial(0) - laplacian_core(w, s3, spatial)

    return wave(wave(u)).value + 4.0 * u.partial(0).partial(0).value


def biharmonic_flat(phi, x, signature: Sequence[int]) -> np.ndarray:
    """``(sum_i eps_i d_i^2)^2 phi`` for a constant diagonal signature."""
    signature = [int(s) for s in signature]
    u = _phi_jet(phi, x, 4, len(signature))

    def box(w: Jet) -> Jet:
        total = None
        for i, eps in enumerate(signature):
            term = w.partial(i).partial(i) * float(eps)
            total = term if total is None else total + term
        return total

    return box(box(u)).value


OPERATORS = ("yamabe", "paneitz", "paneitz4", "cylinder-closed-form", "biharmonic")
