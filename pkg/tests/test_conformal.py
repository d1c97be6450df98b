from fractions import Fraction

import numpy as np
import pytest

from paneitz import catalog, fields
from paneitz.conformal import (
    conformal_multipliers,
    kernel_proportionality_check,
    paneitz_covariance_family,
    paneitz_covariance_residual,
    rescale,
    yamabe_covariance_residual,
)
from paneitz.fields import Div, Num, parse_expression
from paneitz.geometry import curvature_at, riemann_at
from paneitz.harness import SuiteConfig, cylinder_region_points, mutation_samples
from paneitz.jets import DomainError
from paneitz.operators import DimensionError, PaneitzCoefficients, yamabe_coefficient

ONE = Num(1.0)


def factor(seed, n, amplitude=0.3):
    return fields.random_positive_factor(seed, n, amplitude)


class TestRescale:
    def test_identity_factor(self, rng):
        g = catalog.perturbed_flat(0, 3).metric
        x = rng.uniform(-0.5, 0.5, (10, 3))
        np.testing.assert_allclose(rescale(g, ONE).rescaled.jets(x, 4).coeffs, g.jets(x, 4).coeffs, atol=1e-14)

    def test_components_are_products(self):
        g = catalog.flat(2).metric
        p = parse_expression("exp(x0)", 2)
        assert rescale(g, p).rescaled.component(0, 0) == fields.Mul(fields.Mul(p, p), Num(1.0))

    def test_constant_scaling(self, rng):
        g = catalog.perturbed_flat(2, 4).metric
        x = rng.uniform(-0.5, 0.5, (10, 4))
        a = curvature_at(g, x, 2).scalar.value
        b = curvature_at(rescale(g, Num(2.0)).rescaled, x, 2).scalar.value
        np.testing.assert_allclose(b, a / 4, atol=1e-12)

    def test_transitivity(self, rng):
        g = catalog.perturbed_flat(1, 3).metric
        p, q = factor(1, 3), factor(2, 3)
        x = rng.uniform(-0.5, 0.5, (20, 3))
        twice = rescale(rescale(g, p).rescaled, q).rescaled.jets(x, 4).coeffs
        once = rescale(g, fields.product(p, q)).rescaled.jets(x, 4).coeffs
        assert np.max(np.abs(twice - once)) < 1e-11 * max(1.0, np.max(np.abs(once)))

    def test_factor_variables_checked(self):
        with pytest.raises(ValueError):
            rescale(catalog.flat(2).metric, parse_expression("x3", 4))


class TestMultipliers:
    @pytest.mark.parametrize(
        "n,order,expected", [(4, 4, (0, 4)), (2, 2, (0, 2)), (6, 4, (1, 5)), (3, 4, (Fraction(-1, 2), Fraction(7, 2)))]
    )
    def test_values(self, n, order, expected):
        assert conformal_multipliers(n, order) == expected

    def test_order(self):
        with pytest.raises(ValueError):
            conformal_multipliers(4, 3)


class TestYamabeCovariance:
    def test_identity_factor(self, rng):
        e = catalog.perturbed_flat(0, 3)
        r = yamabe_covariance_residual(e.metric, ONE, fields.random_field(0, 3), e.sample(rng, 20))
        assert np.max(r.rel_residual) < 1e-12

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_random(self, n, rng):
        e = catalog.perturbed_flat(n, n)
        r = yamabe_covariance_residual(e.metric, factor(n, n), fields.random_field(n + 1, n), e.sample(rng, 100))
        assert np.max(r.rel_residual) < 1e-8

    def test_corrupted_coefficient(self):
        entry, p, phi, x = mutation_samples(SuiteConfig(), 3, 0, 100)
        c = yamabe_coefficient(3) * Fraction(101, 100)
        r = yamabe_covariance_residual(entry.metric, p, phi, x, c)
        assert np.median(r.rel_residual) > 1e-3

    def test_nonpositive_factor(self):
        with pytest.raises(DomainError):
            yamabe_covariance_residual(catalog.flat(2).metric, parse_expression("x0", 2), ONE, np.array([[-0.5, 0.0]]))


class TestPaneitzCovariance:
    def test_identity_factor(self, rng):
        e = catalog.perturbed_flat(0, 5)
        r = paneitz_covariance_residual(e.metric, ONE, fields.random_field(0, 5), e.sample(rng, 20))
        assert np.max(r.rel_residual) < 1e-12

    @pytest.mark.parametrize("n", [3, 5, 6])
    def test_random_perturbed(self, n, rng):
        e = catalog.perturbed_flat(n, n)
        r = paneitz_covariance_residual(e.metric, factor(n, n), fields.random_field(n + 1, n), e.sample(rng, 100))
        assert np.max(r.rel_residual) < 1e-7

    def test_four_dimensions_conformally_flat(self, rng):
        e = catalog.conformally_flat(3, 4)
        r = paneitz_covariance_residual(e.metric, factor(7, 4), fields.random_field(8, 4), e.sample(rng, 100))
        assert np.max(r.rel_residual) < 1e-7

    def test_dimension_guard(self):
        with pytest.raises(DimensionError):
            paneitz_covariance_residual(catalog.flat(2).metric, ONE, ONE, np.zeros((1, 2)))

    def test_family_matches_single(self, rng):
        e = catalog.perturbed_flat(1, 4)
        p, phi, x = factor(1, 4), fields.random_field(2, 4), e.sample(rng, 10)
        base = PaneitzCoefficients.for_dimension(4)
        sets = [base, base.mutated("ricci", 2)]
        fam = paneitz_covariance_family(e.metric, p, phi, x, sets)
        for coeffs, res in zip(sets, fam):
            single = paneitz_covariance_residual(e.metric, p, phi, x, coeffs)
            np.testing.assert_allclose(res.lhs, single.lhs, rtol=1e-13)
            np.testing.assert_allclose(res.rhs, single.rhs, rtol=1e-13)

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_each_mutation_is_detected(self, n):
        entry, p, phi, x = mutation_samples(SuiteConfig(), n, 0, 100)
        base = PaneitzCoefficients.for_dimension(n)
        names = [k for k in base.NAMES if getattr(base, k) != 0]
        fam = paneitz_covariance_family(entry.metric, p, phi, x, [base] + [base.mutated(k, Fraction(101, 100)) for k in names])
        assert np.max(fam[0].rel_residual) < 1e-7
        for res in fam[1:]:
            assert np.median(res.rel_residual) > 1e-3


class TestKernel:
    def test_cylinder_kernel_transported(self, rng):
        x = cylinder_region_points(rng, 20)
        p = factor(5, 4)
        r = kernel_proportionality_check(catalog.einstein_cylinder().metric, p, parse_expression("cos(t)*cos(chi)", 4), x)
        assert np.max(np.abs(r.lhs)) < 1e-7 and np.max(np.abs(r.rhs)) < 1e-7

    def test_ratio(self, rng):
        e = catalog.perturbed_flat(2, 4)
        p, phi, x = factor(3, 4), fields.random_field(4, 4), e.sample(rng, 30)
        r = kernel_proportionality_check(e.metric, p, phi, x)
        pv = fields.evaluate(p, x)
        base = r.rhs * pv**4  # Q(g2) phi
        assert np.all(np.abs(base) > 1e-6) and np.all(np.abs(r.lhs) > 1e-6)
        np.testing.assert_allclose(r.lhs / base, pv**-4, rtol=1e-6)

    def test_identity_factor(self, rng):
        e = catalog.perturbed_flat(2, 4)
        r = kernel_proportionality_check(e.metric, ONE, fields.random_field(4, 4), e.sample(rng, 5))
        assert np.max(r.rel_residual) < 1e-12

    def test_four_dimensional_only(self):
        with pytest.raises(DimensionError):
            kernel_proportionality_check(catalog.flat(3).metric, ONE, ONE, np.zeros((1, 3)))


def test_cylinder_is_conformally_flat(rng):
    x = cylinder_region_points(rng, 50)
    flat = rescale(catalog.einstein_cylinder().metric, Div(ONE, catalog.paneitz_factor())).rescaled
    assert np.max(np.abs(riemann_at(flat, x).value)) < 1e-7
