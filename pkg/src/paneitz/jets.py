"""Truncated multivariate Taylor jets.

A :class:`Jet` stores the Taylor coefficients ``d^alpha f / alpha!`` of a smooth
function at a base point, for every multi-index ``alpha`` of total degree at
most ``order``.  Coefficients live in the last axis of a numpy array; every
leading axis is an independent "slot" (sample point, tensor component, ...),
so a whole metric tensor at a batch of points is a single jet array and all
arithmetic is vectorised over those slots.

Multi-indices are ordered by degree first, so the basis of a lower order is a
prefix of the basis of a higher one and truncation is a slice.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

MAX_ORDER = 4
EPS_DET = 1e-9


class JetError(ValueError):
    """Mismatched jets or an exhausted derivative budget."""


class DomainError(ValueError):
    """A univariate function was applied outside its domain."""


def _multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for degree in range(order + 1):
        for combo in combinations_with_replacement(range(dim), degree):
            alpha = [0] * dim
            for axis in combo:
                alpha[axis] += 1
            out.append(tuple(alpha))
    return out


class JetBasis:
    """Index tables for jets of a given dimension and order."""

    def __init__(self, dim: int, order: int):
        if dim < 1:
            raise JetError(f"jet dimension must be positive, got {dim}")
        if not 0 <= order <= MAX_ORDER:
            raise JetError(f"jet order must lie in [0, {MAX_ORDER}], got {order}")
        self.dim = dim
        self.order = order
        self.exponents = _multi_indices(dim, order)
        self.index = {alpha: k for k, alpha in enumerate(self.exponents)}
        self.size = len(self.exponents)
        self.degrees = np.array([sum(a) for a in self.exponents])

        # truncated Cauchy product: pairs (i, j) grouped by target index
        pairs = []
        for i, a in enumerate(self.exponents):
            for j, b in enumerate(self.exponents):
                if self.degrees[i] + self.degrees[j] <= order:
                    target = self.index[tuple(x + y for x, y in zip(a, b))]
                    pairs.append((target, i, j))
        pairs.sort()
        targets = np.array([p[0] for p in pairs])
        self.targets = targets
        self.left = np.array([p[1] for p in pairs])
        self.right = np.array([p[2] for p in pairs])
        self.starts = np.searchsorted(targets, np.arange(self.size))

    def size_at(self, order: int) -> int:
        return math.comb(self.dim + order, order)

    @property
    def lower(self) -> "JetBasis":
        return basis(self.dim, self.order - 1)

    def partial_tables(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Source indices and factors mapping this basis onto ``lower`` for d/dx_axis."""
        return _partial_tables(self.dim, self.order, axis)


@lru_cache(maxsize=None)
def basis(dim: int, order: int) -> JetBasis:
    return JetBasis(dim, order)


@lru_cache(maxsize=None)
def _partial_tables(dim: int, order: int, axis: int):
    hi = basis(dim, order)
    lo = basis(dim, order - 1)
    src = np.empty(lo.size, dtype=int)
    fac = np.empty(lo.size)
    for k, alpha in enumerate(lo.exponents):
        shifted = list(alpha)
        shifted[axis] += 1
        src[k] = hi.index[tuple(shifted)]
        fac[k] = shifted[axis]
    return src, fac


class Jet:
    """An array of truncated Taylor expansions sharing one basis.

    ``coeffs`` has shape ``shape + (basis.size,)``.  Jets are treated as
    immutable values: every operation returns a new jet.
    """

    __slots__ = ("basis", "coeffs")
    __array_priority__ = 1000

    def __init__(self, jbasis: JetBasis, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1:] != (jbasis.size,):
            raise JetError(
                f"coefficient array of shape {coeffs.shape} does not fit a basis of size {jbasis.size}"
            )
        self.basis = jbasis
        self.coeffs = coeffs

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int) -> "Jet":
        jb = basis(dim, order)
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (jb.size,))
        coeffs[..., 0] = value
        return cls(jb, coeffs)

    @classmethod
    def variable(cls, value, axis: int, dim: int, order: int) -> "Jet":
        """The coordinate function ``x_axis`` expanded about ``value``."""
        jet = cls.constant(value, dim, order)
        if order >= 1:
            unit = [0] * dim
            unit[axis] = 1
            jet.coeffs[..., jet.basis.index[tuple(unit)]] = 1.0
        return jet

    @classmethod
    def from_terms(cls, terms: dict, dim: int, order: int) -> "Jet":
        """Build a scalar jet from ``{multi-index: coefficient}``; higher degrees are dropped."""
        jb = basis(dim, order)
        coeffs = np.zeros(jb.size)
        for alpha, c in terms.items():
            alpha = tuple(alpha)
            if len(alpha) != dim:
                raise JetError(f"multi-index {alpha} does not have length {dim}")
            if sum(alpha) <= order:
                coeffs[jb.index[alpha]] += c
        return cls(jb, coeffs)

    @classmethod
    def stack(cls, jets: Sequence["Jet"], axis: int = -1) -> "Jet":
        """Stack jets along a new tensor axis; ``axis`` indexes the result's tensor axes."""
        first = jets[0]
        for j in jets[1:]:
            first._check(j)
        if axis < 0:
            axis -= 1
        return cls(first.basis, np.stack([j.coeffs for j in jets], axis=axis))

    # properties ---------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def coeff(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        if len(alpha) != self.dim:
            raise JetError(f"multi-index {alpha} does not have length {self.dim}")
        if sum(alpha) > self.order:
            raise JetError(f"degree {sum(alpha)} exceeds jet order {self.order}")
        return self.coeffs[..., self.basis.index[alpha]]

    def derivative(self, alpha) -> np.ndarray:
        """The raw partial derivative d^alpha f at the base point."""
        return self.coeff(alpha) * math.prod(math.factorial(a) for a in alpha)

    def as_dict(self) -> dict:
        return {a: self.coeffs[..., k] for k, a in enumerate(self.basis.exponents)}

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape})"

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if Ellipsis not in key:
            key = key + (Ellipsis,)
        return Jet(self.basis, self.coeffs[key + (slice(None),)])

    # structural ---------------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise jet order from {self.order} to {order}")
        if order == self.order:
            return self
        jb = basis(self.dim, order)
        return Jet(jb, self.coeffs[..., : jb.size])

    def partial(self, axis: int) -> "Jet":
        return jet_partial(self, axis)

    def gradient(self) -> "Jet":
        """All first partials, stacked on a new last tensor axis."""
        return Jet.stack([jet_partial(self, i) for i in range(self.dim)], axis=-1)

    def transpose(self, *axes: int) -> "Jet":
        nt = len(self.shape)
        return Jet(self.basis, np.transpose(self.coeffs, tuple(axes) + (nt,)))

    def tensor_sum(self, axis) -> "Jet":
        """Sum over tensor axes (a linear operation on coefficients)."""
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a - 1 if a < 0 else a for a in axes)
        return Jet(self.basis, self.coeffs.sum(axis=axes))

    def trace(self, axis1: int, axis2: int) -> "Jet":
        nd = self.coeffs.ndim
        a1 = axis1 - 1 if axis1 < 0 else axis1
        a2 = axis2 - 1 if axis2 < 0 else axis2
        a1, a2 = a1 % nd, a2 % nd
        return Jet(self.basis, np.trace(self.coeffs, axis1=a1, axis2=a2))

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "Jet") -> None:
        if self.dim != other.dim or self.order != other.order:
            raise JetError(
                f"jet mismatch: (dim={self.dim}, order={self.order}) vs "
                f"(dim={other.dim}, order={other.order})"
            )

    def _scalar(self, other) -> np.ndarray:
        return np.asarray(other, dtype=float)[..., None]

    def __add__(self, other):
        if isinstance(other, Jet):
            return jet_add(self, other)
        coeffs = self.coeffs.copy() if np.ndim(other) == 0 else np.broadcast_to(
            self.coeffs, np.broadcast_shapes(self.coeffs.shape, np.shape(other) + (1,))
        ).copy()
        coeffs[..., 0] += other
        return Jet(self.basis, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.basis, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return Jet(self.basis, self.coeffs * self._scalar(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, jet_apply_univariate("recip", other))
        return Jet(self.basis, self.coeffs / self._scalar(other))

    def __rtruediv__(self, other):
        return jet_apply_univariate("recip", self) * other

    def __pow__(self, k: int):
        return jet_apply_univariate("integer_pow", self, k)


def jet_add(a: Jet, b: Jet) -> Jet:
    a._check(b)
    return Jet(a.basis, a.coeffs + b.coeffs)


def _support(c: np.ndarray) -> np.ndarray:
    """Mask of basis slots that are nonzero anywhere in the array."""
    return c.reshape(-1, c.shape[-1]).any(axis=0)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Truncated Cauchy product, broadcasting over leading axes.

    Pairs of coefficients that vanish throughout either operand are skipped,
    which makes products with constants, coordinates and high powers of a
    nilpotent jet cheap.
    """
    a._check(b)
    jb = a.basis
    keep = _support(a.coeffs)[jb.left] & _support(b.coeffs)[jb.right]
    if keep.all():
        prod = a.coeffs[..., jb.left] * b.coeffs[..., jb.right]
        return Jet(jb, np.add.reduceat(prod, jb.starts, axis=-1))
    sel = np.flatnonzero(keep)
    shape = np.broadcast_shapes(a.coeffs.shape, b.coeffs.shape)
    out = np.zeros(shape)
    if sel.size:
        targets, starts = np.unique(jb.targets[sel], return_index=True)
        prod = a.coeffs[..., jb.left[sel]] * b.coeffs[..., jb.right[sel]]
        out[..., targets] = np.add.reduceat(prod, starts, axis=-1)
    return Jet(jb, out)


def jet_contract(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Einstein-summation product of two jet arrays.

    ``subscripts`` is an ``np.einsum`` spec over the tensor axes only, e.g.
    ``"...ik,...kj->...ij"``.  Jet multiplication happens coefficientwise.
    """
    a._check(b)
    jb = a.basis
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    spec = f"{sa}z,{sb}z->{out}z"
    keep = _support(a.coeffs)[jb.left] & _support(b.coeffs)[jb.right]
    if keep.all():
        prod = np.einsum(spec, a.coeffs[..., jb.left], b.coeffs[..., jb.right], optimize=True)
        return Jet(jb, np.add.reduceat(prod, jb.starts, axis=-1))
    sel = np.flatnonzero(keep)
    targets, starts = np.unique(jb.targets[sel], return_index=True)
    prod = np.einsum(spec, a.coeffs[..., jb.left[sel]], b.coeffs[..., jb.right[sel]], optimize=True)
    out = np.zeros(prod.shape[:-1] + (jb.size,))
    if sel.size:
        out[..., targets] = np.add.reduceat(prod, starts, axis=-1)
    return Jet(jb, out)


def jet_partial(a: Jet, axis: int) -> Jet:
    if a.order < 1:
        raise JetError("cannot differentiate an order-0 jet: derivative budget exhausted")
    if not 0 <= axis < a.dim:
        raise JetError(f"axis {axis} out of range for dimension {a.dim}")
    src, fac = a.basis.partial_tables(axis)
    return Jet(a.basis.lower, a.coeffs[..., src] * fac)


def _series_coefficients(name: str, x0: np.ndarray, order: int, power: int | None):
    """Coefficients f^(k)(x0)/k! for k = 0..order."""
    out = []
    if name == "exp":
        e = np.exp(x0)
        out = [e / math.factorial(k) for k in range(order + 1)]
    elif name == "sin":
        out = [np.sin(x0 + k * math.pi / 2) / math.factorial(k) for k in range(order + 1)]
    elif name == "cos":
        out = [np.cos(x0 + k * math.pi / 2) / math.factorial(k) for k in range(order + 1)]
    elif name == "sqrt":
        if np.any(x0 <= 0):
            raise DomainError("sqrt of a jet with nonpositive constant term")
        binom = 1.0
        for k in range(order + 1):
            out.append(binom * x0 ** (0.5 - k))
            binom *= (0.5 - k) / (k + 1)
    elif name == "recip":
        if np.any(np.abs(x0) <= EPS_DET):
            raise DomainError("reciprocal of a jet whose constant term is (numerically) zero")
        out = [(-1.0) ** k * x0 ** (-(k + 1)) for k in range(order + 1)]
    elif name == "log":
        if np.any(x0 <= 0):
            raise DomainError("log of a jet with nonpositive constant term")
        out = [np.log(x0)] + [(-1.0) ** (k + 1) / (k * x0**k) for k in range(1, order + 1)]
    elif name == "integer_pow":
        if power is None or power < 0 or int(power) != power:
            raise JetError(f"integer_pow needs a nonnegative integer exponent, got {power}")
        out = [
            math.comb(power, k) * x0 ** (power - k) if k <= power else np.zeros_like(x0)
            for k in range(order + 1)
        ]
    else:
        raise JetError(f"unknown univariate function {name!r}")
    return out


UNIVARIATE = ("sin", "cos", "exp", "sqrt", "recip", "log", "integer_pow")


def jet_apply_univariate(name: str, a: Jet, power: int | None = None) -> Jet:
    """Compose a univariate function with a jet.

    Uses ``f(a0 + h) = sum_k f^(k)(a0)/k! h^k`` with the nilpotent part ``h``
    of ``a``; the sum terminates at ``k = order``.
    """
    x0 = a.coeffs[..., 0]
    series = _series_coefficients(name, x0, a.order, power)
    h = Jet(a.basis, a.coeffs.copy())
    h.coeffs[..., 0] = 0.0
    coeffs = np.zeros(a.coeffs.shape)
    coeffs[..., 0] = series[0]
    hk = h
    for k in range(1, a.order + 1):
        # h**k vanishes below degree k, so these products stay sparse
        if k > 1:
            hk = jet_mul(hk, h)
        coeffs = coeffs + hk.coeffs * np.asarray(series[k])[..., None]
    return Jet(a.basis, coeffs)


def sin(a: Jet) -> Jet:
    return jet_apply_univariate("sin", a)


def cos(a: Jet) -> Jet:
    return jet_apply_univariate("cos", a)


def exp(a: Jet) -> Jet:
    return jet_apply_univariate("exp", a)


def sqrt(a: Jet) -> Jet:
    return jet_apply_univariate("sqrt", a)


def log(a: Jet) -> Jet:
    return jet_apply_univariate("log", a)


def recip(a: Jet) -> Jet:
    return jet_apply_univariate("recip", a)


def _constant_left(m: np.ndarray, b: Jet) -> Jet:
    """Multiply a jet matrix on the left by a plain (per-slot) matrix."""
    return Jet(b.basis, np.einsum("...ik,...kjz->...ijz", m, b.coeffs))


def _split_constant(m: Jet, eps_det: float):
    if len(m.shape) < 2 or m.shape[-1] != m.shape[-2]:
        raise JetError(f"expected a square jet matrix, got tensor shape {m.shape}")
    m0 = m.coeffs[..., 0]
    det0 = np.linalg.det(m0)
    if np.any(~np.isfinite(det0)) or np.any(np.abs(det0) <= eps_det):
        raise DomainError(f"constant term of jet matrix is singular (|det| <= {eps_det:g})")
    inv0 = np.linalg.inv(m0)
    nil = Jet(m.basis, m.coeffs.copy())
    nil.coeffs[..., 0] = 0.0
    # X = inv0 @ (M - M0), nilpotent
    return det0, inv0, _constant_left(inv0, nil)


def jet_matrix_inverse(m: Jet, eps_det: float = EPS_DET) -> Jet:
    """Inverse of a square jet matrix (tensor axes -2, -1).

    With ``M = M0 (I + X)`` and ``X`` nilpotent of index ``order + 1``,
    ``M^-1 = (sum_k (-X)^k) M0^-1`` terminates exactly.
    """
    _, inv0, x = _split_constant(m, eps_det)
    n = m.shape[-1]
    eye = Jet.constant(np.broadcast_to(np.eye(n), m.shape), m.dim, m.order)
    s = eye
    for _ in range(m.order):
        s = eye - jet_contract("...ik,...kj->...ij", x, s)
    # right-multiply by the constant inverse
    return Jet(m.basis, np.einsum("...ikz,...kj->...ijz", s.coeffs, inv0))


def _trace_log(x: Jet) -> Jet:
    """tr log(I + X) for nilpotent X."""
    total = x.trace(-2, -1)
    power = x
    for k in range(2, x.order + 1):
        power = jet_contract("...ik,...kj->...ij", power, x)
        total = total + power.trace(-2, -1) * ((-1.0) ** (k + 1) / k)
    return total


def jet_det(m: Jet, eps_det: float = EPS_DET) -> Jet:
    """Determinant of a square jet matrix.

    Uses ``det M0 * exp(tr log(I + X))``; falls back to cofactor expansion when
    the constant term is singular.
    """
    if np.any(np.abs(np.linalg.det(m.coeffs[..., 0])) <= eps_det):
        return _det_cofactor(m)
    det0, _, x = _split_constant(m, eps_det)
    return exp(_trace_log(x)) * det0


def jet_sqrt_abs_det(m: Jet, eps_det: float = EPS_DET) -> Jet:
    """sqrt(|det M|) for a jet matrix with nonsingular constant term."""
    det0, _, x = _split_constant(m, eps_det)
    return exp(_trace_log(x) * 0.5) * np.sqrt(np.abs(det0))


def _det_cofactor(m: Jet) -> Jet:
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    total = None
    for j in range(n):
        rest = [c for c in range(n) if c != j]
        minor = Jet(m.basis, m.coeffs[..., 1:, :, :][..., rest, :])
        term = m[..., 0, j] * _det_cofactor(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total
