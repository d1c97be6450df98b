"""Conformal rescaling ``g1 = p^2 g2`` and covariance residuals.

Each residual evaluates its two sides through independent paths: the left
side differentiates the rescaled metric's own expression trees, the right
side applies the operator of the base metric to the multiplied field.  No
curvature is shared between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import fields
from .fields import FieldExpr, Mul
from .geometry import ChartMetric, curvature_at
from .jets import DomainError
from .operators import (
    CURVATURE_SIGN,
    DimensionError,
    PaneitzCoefficients,
    paneitz_apply,
    paneitz_from_curvature,
    yamabe_apply,
    yamabe_coefficient,
)


@dataclass(frozen=True)
class ConformalPair:
    base: ChartMetric
    factor: FieldExpr
    rescaled: ChartMetric


def rescale(g: ChartMetric, p: FieldExpr) -> ConformalPair:
    """Build ``p * p * g_ij`` for every component, as expression trees."""
    if fields.max_variable(p) >= g.dim:
        raise ValueError(f"conformal factor uses variables beyond dimension {g.dim}")
    p2 = Mul(p, p)
    return ConformalPair(g, p, g.map(lambda c: Mul(p2, c)))


def conformal_multipliers(n: int, operator_order: int) -> tuple[Fraction, Fraction]:
    """Exponents of the initial and final multipliers ``p^a`` and ``p^b``."""
    if operator_order not in (2, 4):
        raise ValueError(f"operator order must be 2 or 4, got {operator_order}")
    half = Fraction(operator_order, 2)
    return Fraction(n, 2) - half, Fraction(n, 2) + half


@dataclass
class CovarianceResidual:
    """Both sides of a covariance identity at a batch of points."""

    lhs: np.ndarray
    rhs: np.ndarray
    points: np.ndarray

    @property
    def abs_residual(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs)

    @property
    def rel_residual(self) -> np.ndarray:
        scale = np.maximum(np.maximum(np.abs(self.lhs), np.abs(self.rhs)), 1.0)
        return self.abs_residual / scale


def _factor_values(p: FieldExpr, x) -> np.ndarray:
    values = fields.evaluate(p, x)
    if np.any(~(values > 0)):
        raise DomainError("conformal factor is not positive at every sample point")
    return values


def yamabe_covariance_residual(g2: ChartMetric, p: FieldExpr, phi: FieldExpr, x, coefficient=None) -> CovarianceResidual:
    """``p^((n+2)/2) Y(g1) phi`` against ``Y(g2)(p^((n-2)/2) phi)``."""
    n = g2.dim
    yamabe_coefficient(n)
    initial, final = conformal_multipliers(n, 2)
    pv = _factor_values(p, x)
    g1 = rescale(g2, p).rescaled
    lhs = pv ** float(final) * yamabe_apply(g1, phi, x, coefficient)
    rhs = yamabe_apply(g2, Mul(fields.power(p, initial), phi), x, coefficient)
    return CovarianceResidual(lhs, rhs, np.asarray(x, dtype=float))


def paneitz_covariance_residual(
    g2: ChartMetric,
    p: FieldExpr,
    phi: FieldExpr,
    x,
    coefficients: PaneitzCoefficients | None = None,
    curvature_sign: int = CURVATURE_SIGN,
) -> CovarianceResidual:
    """``p^((n+4)/2) Q(g1) phi`` against ``Q(g2)(p^((n-4)/2) phi)``."""
    n = g2.dim
    if n <= 2:
        raise DimensionError(f"the fourth-order operator needs dimension n > 2, got {n}")
    initial, final = conformal_multipliers(n, 4)
    pv = _factor_values(p, x)
    g1 = rescale(g2, p).rescaled
    lhs = pv ** float(final) * paneitz_apply(g1, phi, x, coefficients, curvature_sign).value
    rhs = paneitz_apply(g2, Mul(fields.power(p, initial), phi), x, coefficients, curvature_sign).value
    return CovarianceResidual(lhs, rhs, np.asarray(x, dtype=float))


def paneitz_covariance_family(
    g2: ChartMetric,
    p: FieldExpr,
    phi: FieldExpr,
    x,
    coefficient_sets,
    curvature_sign: int = CURVATURE_SIGN,
) -> list:
    """Residuals for several coefficient sets, sharing the curvature of both metrics."""
    n = g2.dim
    if n <= 2:
        raise DimensionError(f"the fourth-order operator needs dimension n > 2, got {n}")
    initial, final = conformal_multipliers(n, 4)
    pv = _factor_values(p, x)
    curv1 = curvature_at(rescale(g2, p).rescaled, x, 4)
    curv2 = curvature_at(g2, x, 4)
    u1 = fields.eval_jet(phi, x, 4, n)
    u2 = fields.eval_jet(Mul(fields.power(p, initial), phi), x, 4, n)
    out = []
    for coeffs in coefficient_sets:
        lhs = pv ** float(final) * paneitz_from_curvature(curv1, u1, coeffs, curvature_sign).value
        rhs = paneitz_from_curvature(curv2, u2, coeffs, curvature_sign).value
        out.append(CovarianceResidual(lhs, rhs, np.asarray(x, dtype=float)))
    return out


def kernel_proportionality_check(g2: ChartMetric, p: FieldExpr, phi: FieldExpr, x) -> CovarianceResidual:
    """In dimension 4: ``Q(g1) phi`` against ``p^-4 Q(g2) phi``."""
    if g2.dim != 4:
        raise DimensionError(f"kernel proportionality is a four-dimensional statement, got n = {g2.dim}")
    pv = _factor_values(p, x)
    g1 = rescale(g2, p).rescaled
    lhs = paneitz_apply(g1, phi, x).value
    rhs = pv**-4.0 * paneitz_apply(g2, phi, x).value
    return CovarianceResidual(lhs, rhs, np.asarray(x, dtype=float))
