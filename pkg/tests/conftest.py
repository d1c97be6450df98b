"""Independent oracles shared by the test modules.

Nothing here touches the jet machinery: polynomials are dictionaries of
monomials, derivatives are finite-difference stencils over plain numpy
evaluation of the metric components.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from paneitz import fields
from paneitz.jets import Jet, basis


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# polynomial oracles ----------------------------------------------------------

def poly_mul(a: dict, b: dict, order: int) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) <= order:
                out[e] = out.get(e, 0.0) + ca * cb
    return out


def jet_to_poly(j: Jet) -> dict:
    return {a: float(c) for a, c in j.as_dict().items()}


def poly_to_coeffs(p: dict, j: Jet) -> np.ndarray:
    return np.array([p.get(a, 0.0) for a in j.basis.exponents])


def random_jet(rng, dim: int, order: int, shape=()) -> Jet:
    jb = basis(dim, order)
    return Jet(jb, rng.uniform(-1, 1, shape + (jb.size,)))


def leibniz_det(rows: list[list[dict]], order: int) -> dict:
    """Determinant of a matrix of polynomials by the permutation expansion."""
    n = len(rows)
    total: dict = {}
    for perm in itertools.permutations(range(n)):
        sign = np.linalg.det(np.eye(n)[list(perm)])
        term = {(0,) * len(next(iter(rows[0][0]))): 1.0}
        for i, j in enumerate(perm):
            term = poly_mul(term, rows[i][j], order)
        for e, c in term.items():
            total[e] = total.get(e, 0.0) + round(sign) * c
    return total


# finite-difference geometry oracles ----------------------------------------

STENCIL = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))


def fd_partial(fn, x: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order central difference of an array-valued function."""
    total = 0.0
    for k, w in STENCIL:
        step = np.zeros_like(x)
        step[axis] = k * h
        total = total + w * fn(x + step)
    return total / h


def metric_values(g, x: np.ndarray) -> np.ndarray:
    n = g.dim
    m = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            m[i, j] = fields.evaluate(g.component(i, j), x[None, :])[0]
    return m


def fd_christoffel(g, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    n = g.dim
    ginv = np.linalg.inv(metric_values(g, x))
    dg = np.stack([fd_partial(lambda y: metric_values(g, y), x, l, h) for l in range(n)], axis=-1)
    lowered = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - dg.transpose(2, 0, 1))
    return np.einsum("kl,lij->kij", ginv, lowered)


def fd_riemann(g, x: np.ndarray, h: float = 1e-2) -> np.ndarray:
    """R[i, j, k, l] = d_k G^i_lj - d_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj."""
    n = g.dim
    gam = fd_christoffel(g, x)
    dgam = np.stack([fd_partial(lambda y: fd_christoffel(g, y), x, m, h) for m in range(n)], axis=-1)
    d = np.einsum("iljk->ijkl", dgam)
    quad = np.einsum("ikm,mlj->ijkl", gam, gam)
    return d - d.transpose(0, 1, 3, 2) + quad - quad.transpose(0, 1, 3, 2)


def fd_scalar_curvature(g, x: np.ndarray) -> float:
    riem = fd_riemann(g, x)
    ric = np.einsum("kikj->ij", riem)
    return float(np.einsum("ij,ij->", np.linalg.inv(metric_values(g, x)), ric))


def fd_laplacian(g, phi, x: np.ndarray, h: float = 1e-3) -> float:
    """|g|^-1/2 d_i(|g|^1/2 g^ij d_j phi) by nested differences."""
    n = g.dim

    def density(y):
        return np.sqrt(abs(np.linalg.det(metric_values(g, y))))

    def flux(y):
        grad = np.array([fd_partial(lambda z: fields.evaluate(phi, z[None, :])[0], y, j, h) for j in range(n)])
        return density(y) * np.linalg.inv(metric_values(g, y)) @ grad

    div = sum(fd_partial(flux, x, i, 10 * h)[i] for i in range(n))
    return float(div / density(x))


# acceptance summary ------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
