"""Curvature and differential operators of a coordinate-chart metric.

Conventions:

* ``Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)``
* ``R^i_jkl = d_k Gamma^i_lj - d_l Gamma^i_kj + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj``
* ``R_ij = R^k_ikj``, so the unit round sphere has positive scalar curvature.
* ``L phi = |g|^{-1/2} d_i(|g|^{1/2} g^ij d_j phi)``.

Every quantity is a :class:`~paneitz.jets.Jet` array whose leading axes are
the batch of evaluation points followed by tensor indices.  Each derivative
taken lowers the jet order by one, so a metric evaluated at order 4 yields
Christoffel symbols at order 3 and Ricci curvature at order 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fields
from .fields import FieldExpr, JetEvaluator
from .jets import EPS_DET, Jet, JetError, jet_contract, jet_matrix_inverse, jet_sqrt_abs_det


@dataclass(frozen=True)
class ChartMetric:
    """Metric components ``g_ij`` in one chart; symmetric by construction."""

    dim: int
    upper: tuple  # row-major upper triangle, n(n+1)/2 expressions
    signature_hint: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"metric dimension must be positive, got {self.dim}")
        need = self.dim * (self.dim + 1) // 2
        if len(self.upper) != need:
            raise ValueError(f"expected {need} upper-triangle components, got {len(self.upper)}")
        object.__setattr__(self, "upper", tuple(self.upper))

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[FieldExpr]], signature_hint: str = "") -> "ChartMetric":
        n = len(rows)
        upper = []
        for i in range(n):
            for j in range(i, n):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"component ({i},{j}) differs from ({j},{i})")
                upper.append(rows[i][j])
        return cls(n, tuple(upper), signature_hint)

    @classmethod
    def parse(cls, dim: int, components: Sequence[str], signature_hint: str = "") -> "ChartMetric":
        return cls(dim, tuple(fields.parse_expression(c, dim) for c in components), signature_hint)

    @classmethod
    def diagonal(cls, entries: Sequence[FieldExpr], signature_hint: str = "") -> "ChartMetric":
        n = len(entries)
        zero = fields.Num(0.0)
        return cls.from_matrix(
            [[entries[i] if i == j else zero for j in range(n)] for i in range(n)], signature_hint
        )

    def _position(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        n = self.dim
        return i * n - i * (i - 1) // 2 + (j - i)

    def component(self, i: int, j: int) -> FieldExpr:
        return self.upper[self._position(i, j)]

    def matrix(self) -> list[list[FieldExpr]]:
        return [[self.component(i, j) for j in range(self.dim)] for i in range(self.dim)]

    def map(self, fn) -> "ChartMetric":
        return ChartMetric(self.dim, tuple(fn(c) for c in self.upper), self.signature_hint)

    def jets(self, x, order: int, evaluator: JetEvaluator | None = None) -> Jet:
        """Metric components as a ``(..., n, n)`` jet array."""
        ev = evaluator or JetEvaluator(x, self.dim, order)
        ups = [ev(c) for c in self.upper]
        n = self.dim
        rows = [Jet.stack([ups[self._position(i, j)] for j in range(n)], -1) for i in range(n)]
        return Jet.stack(rows, -2)


@dataclass
class MetricData:
    """Metric, inverse and volume density at a batch of points.

    ``metric`` is at the requested order; ``inverse`` and ``sqrt_abs_det`` at
    one order less, which is all any first-order contraction can use.
    """

    metric: Jet
    inverse: Jet
    sqrt_abs_det: Jet

    @property
    def dim(self) -> int:
        return self.metric.dim

    @classmethod
    def from_metric_jets(cls, gj: Jet, eps_det: float = EPS_DET) -> "MetricData":
        low = gj.truncate(max(gj.order - 1, 0))
        return cls(gj, jet_matrix_inverse(low, eps_det), jet_sqrt_abs_det(low, eps_det))


def metric_data(g: ChartMetric, x, order: int, eps_det: float = EPS_DET) -> MetricData:
    return MetricData.from_metric_jets(g.jets(x, order), eps_det)


@dataclass
class CurvatureData:
    inverse_metric: Jet  # order K-1
    christoffel: Jet  # Gamma[k, i, j] = Gamma^k_ij, order K-1
    ricci: Jet  # order K-2
    ricci_raised: Jet  # order K-2
    scalar: Jet  # order K-2
    sqrt_abs_det: Jet  # order K-1
    metric: Jet = field(repr=False)  # order K

    @property
    def data(self) -> MetricData:
        return MetricData(self.metric, self.inverse_metric, self.sqrt_abs_det)


def christoffel_symbols(gj: Jet, ginv: Jet) -> Jet:
    """Gamma^k_ij from metric jets (order K) and inverse metric (order K-1)."""
    dg = gj.gradient()  # dg[i, j, l] = d_l g_ij
    c = dg.coeffs
    # lowered[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    d_i_gjl = np.einsum("...jliz->...lijz", c)
    d_j_gil = np.einsum("...iljz->...lijz", c)
    d_l_gij = np.einsum("...ijlz->...lijz", c)
    lowered = Jet(dg.basis, 0.5 * (d_i_gjl + d_j_gil - d_l_gij))
    return jet_contract("...kl,...lij->...kij", ginv.truncate(lowered.order), lowered)


def _riemann_from_christoffel(gamma: Jet) -> Jet:
    dgam = gamma.gradient()  # dgam[i, l, j, k] = d_k Gamma^i_lj
    g2 = gamma.truncate(dgam.order)
    c = dgam.coeffs
    # R[i, j, k, l]
    t1 = np.einsum("...iljkz->...ijklz", c)
    t2 = np.einsum("...ikjlz->...ijklz", c)
    quad = jet_contract("...ikm,...mlj->...ijkl", g2, g2)
    return Jet(dgam.basis, t1 - t2) + quad - quad.transpose(*_swap_last_two(len(quad.shape)))


def _swap_last_two(nt: int):
    axes = list(range(nt))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return axes


def _ricci_from_christoffel(gamma: Jet) -> Jet:
    dgam = gamma.gradient()  # dgam[k, i, j, m] = d_m Gamma^k_ij
    g2 = gamma.truncate(dgam.order)
    c = dgam.coeffs
    div = np.einsum("...kijkz->...ijz", c)
    grad_trace = np.einsum("...kikjz->...ijz", c)
    trace = g2.trace(-3, -2)  # Gamma^k_kl
    t3 = jet_contract("...l,...lij->...ij", trace, g2)
    t4 = jet_contract("...kjl,...lik->...ij", g2, g2)
    return Jet(dgam.basis, div - grad_trace) + t3 - t4


def curvature_at(g: ChartMetric, x, order: int = 4, eps_det: float = EPS_DET) -> CurvatureData:
    """Christoffel symbols, Ricci tensor and scalar curvature at ``x``."""
    if order < 2:
        raise JetError(f"curvature needs metric jets of order >= 2, got {order}")
    gj = g.jets(x, order)
    return curvature_from_jets(gj, eps_det)


def curvature_from_jets(gj: Jet, eps_det: float = EPS_DET) -> CurvatureData:
    if gj.order < 2:
        raise JetError(f"curvature needs metric jets of order >= 2, got {gj.order}")
    data = MetricData.from_metric_jets(gj, eps_det)
    gamma = christoffel_symbols(gj, data.inverse)
    ric = _ricci_from_christoffel(gamma)
    ginv = data.inverse.truncate(ric.order)
    scalar = jet_contract("...ij,...ij->...", ginv, ric)
    raised = jet_contract("...ik,...kl->...il", ginv, ric)
    raised = jet_contract("...il,...jl->...ij", raised, ginv)
    return CurvatureData(
        inverse_metric=data.inverse,
        christoffel=gamma,
        ricci=ric,
        ricci_raised=raised,
        scalar=scalar,
        sqrt_abs_det=data.sqrt_abs_det,
        metric=gj,
    )


def riemann_at(g: ChartMetric, x, order: int = 2, eps_det: float = EPS_DET) -> Jet:
    """Full Riemann tensor ``R[i, j, k, l] = R^i_jkl`` at jet order ``order - 2``."""
    if order < 2:
        raise JetError(f"Riemann tensor needs metric jets of order >= 2, got {order}")
    gj = g.jets(x, order)
    data = MetricData.from_metric_jets(gj, eps_det)
    return _riemann_from_christoffel(christoffel_symbols(gj, data.inverse))


# first- and second-order operators -----------------------------------------

def divergence_core(v: Jet, sqrt_abs_det: Jet, axes: Sequence[int] | None = None) -> Jet:
    """``|g|^{-1/2} d_j(|g|^{1/2} V^j)``; ``V`` has its vector index last.

    ``axes`` restricts the sum to a coordinate block (the summation index runs
    over ``axes`` and ``V``'s last axis is indexed in the same order).
    """
    if v.order < 1:
        raise JetError("divergence needs vector jets of order >= 1")
    axes = range(v.dim) if axes is None else axes
    w = v * sqrt_abs_det.truncate(v.order)[..., None]
    total = None
    for slot, axis in enumerate(axes):
        term = w[..., slot].partial(axis)
        total = term if total is None else total + term
    return total / sqrt_abs_det.truncate(total.order)


def gradient_core(u: Jet, inverse: Jet, axes: Sequence[int] | None = None) -> Jet:
    """Raised gradient ``g^ij d_j u`` (one order below ``u``)."""
    axes = list(range(u.dim)) if axes is None else list(axes)
    du = Jet.stack([u.partial(a) for a in axes], -1)
    return jet_contract("...ij,...j->...i", inverse.truncate(du.order), du)


def laplacian_core(u: Jet, data: MetricData, axes: Sequence[int] | None = None) -> Jet:
    if u.order < 2:
        raise JetError(f"Laplace-Beltrami needs an integrand of order >= 2, got {u.order}")
    return divergence_core(gradient_core(u, data.inverse, axes), data.sqrt_abs_det, axes)


def _integrand(phi, x, order: int, dim: int) -> Jet:
    if isinstance(phi, Jet):
        if phi.order < order:
            raise JetError(f"integrand jet has order {phi.order}, need {order}")
        return phi.truncate(order)
    return fields.eval_jet(phi, x, order, dim)


def laplace_beltrami(g: ChartMetric, phi, x, out_order: int = 0, data: MetricData | None = None) -> Jet:
    """``L phi`` as an order-``out_order`` jet; ``phi`` is an expression or a jet."""
    if out_order > 2:
        raise JetError(f"out_order must be <= 2, got {out_order}")
    data = data or metric_data(g, x, out_order + 2)
    return laplacian_core(_integrand(phi, x, out_order + 2, g.dim), data)


def gradient_raised(g: ChartMetric, phi, x, out_order: int = 0, data: MetricData | None = None) -> Jet:
    data = data or metric_data(g, x, out_order + 1)
    return gradient_core(_integrand(phi, x, out_order + 1, g.dim), data.inverse)


def divergence(g: ChartMetric, v: Jet, x, data: MetricData | None = None) -> Jet:
    data = data or metric_data(g, x, v.order + 1)
    return divergence_core(v, data.sqrt_abs_det)


# diagnostics ----------------------------------------------------------------

def metric_compatibility(gj: Jet, gamma: Jet) -> Jet:
    """``nabla_k g_ij = d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il``, as [i, j, k]."""
    dg = gj.gradient()
    g0 = gj.truncate(dg.order)
    gam = gamma.truncate(dg.order)
    a = jet_contract("...lki,...lj->...ijk", gam, g0)
    b = jet_contract("...lkj,...il->...ijk", gam, g0)
    return dg - a - b


def einstein_divergence(curv: CurvatureData) -> tuple[Jet, Jet]:
    """``g^jk nabla_k G_ij`` with ``G = Ric - R g / 2``, plus the raw ``d_k G_ij`` for scale."""
    ric = curv.ricci
    gj = curv.metric.truncate(ric.order)
    ein = ric - (gj * curv.scalar[..., None, None]) * 0.5
    dein = ein.gradient()  # [i, j, k] = d_k G_ij
    e0 = ein.truncate(dein.order)
    gam = curv.christoffel.truncate(dein.order)
    cov = dein - jet_contract("...lki,...lj->...ijk", gam, e0) - jet_contract("...lkj,...il->...ijk", gam, e0)
    ginv = curv.inverse_metric.truncate(dein.order)
    return jet_contract("...ijk,...jk->...i", cov, ginv), dein
