import math

import numpy as np
import pytest

from paneitz import catalog, fields
from paneitz.geometry import curvature_at
from paneitz.operators import biharmonic_flat, paneitz_apply


def test_builtin_names_resolve():
    for name in ("flat-euclidean-3", "flat-minkowski-4", "sphere-2", "sphere-3", "einstein-cylinder",
                 "perturbed-flat-5", "conformally-flat-6"):
        entry = catalog.get(name)
        assert entry.name == name
        assert entry.metric.dim == entry.dim == len(entry.sampling_box)


def test_unknown_names():
    for name in ("sphere-4", "torus", "flat-euclidean-0"):
        with pytest.raises(KeyError):
            catalog.get(name)


def test_listing_covers_families():
    names = [row[0] for row in catalog.listing()]
    assert names == list(catalog.BUILTIN_NAMES)


def test_seeded_families_are_deterministic():
    assert catalog.perturbed_flat(3, 4).metric == catalog.perturbed_flat(3, 4).metric
    assert catalog.perturbed_flat(3, 4).metric != catalog.perturbed_flat(4, 4).metric
    assert catalog.conformally_flat(3, 4).metric == catalog.get("conformally-flat-4", 3).metric


def test_perturbation_bound():
    with pytest.raises(ValueError):
        catalog.perturbed_flat(0, 3, eps=0.2)
    zero = catalog.perturbed_flat(0, 3, eps=0.0)
    assert zero.metric == catalog.flat(3).metric


def test_signature_validation():
    with pytest.raises(ValueError):
        catalog.flat(3, (1, 2, 1))
    assert catalog.flat(4, (1, -1, -1, -1)).metric.signature_hint == "lorentzian"


def test_sampling_box(rng):
    entry = catalog.einstein_cylinder()
    x = entry.sample(rng, 500)
    assert np.all(np.abs(np.sin(x[:, 1])) > 0.1) and np.all(np.abs(np.sin(x[:, 2])) > 0.1)
    assert np.all((x[:, 0] >= -1) & (x[:, 0] <= 1))


def test_sphere_box_avoids_poles(rng):
    x = catalog.sphere(3).sample(rng, 500)
    assert np.all(np.sin(x[:, :2]) > 0.1)


def test_conformally_flat_reduces_to_biharmonic(rng):
    # g = p^2 delta in four dimensions, so p^4 Q(g) phi is the flat bilaplacian of phi
    e = catalog.conformally_flat(2, 4)
    p = e.metric.component(0, 0).left.left
    phi = fields.random_field(5, 4)
    x = e.sample(rng, 10)
    lhs = fields.evaluate(p, x) ** 4 * paneitz_apply(e.metric, phi, x).value
    np.testing.assert_allclose(lhs, biharmonic_flat(phi, x, (1, 1, 1, 1)), rtol=1e-9, atol=1e-9)


def test_paneitz_factor_values(rng):
    x = rng.uniform(-3, 3, (20, 4))
    np.testing.assert_allclose(
        fields.evaluate(catalog.paneitz_factor(), x), 0.5 * np.cos(x[:, 0]) + 0.5 * np.cos(x[:, 1]), rtol=1e-15
    )


def test_custom_metric_block():
    block = {"dimension": 2, "components": ["1 + x0^2", "0", "exp(x1)"], "box": [[0, 1], [-1, 0]], "name": "warped"}
    entry = catalog.from_config(block)
    assert entry.name == "warped" and entry.sampling_box == ((0.0, 1.0), (-1.0, 0.0))
    assert entry.metric.component(1, 1) == fields.parse_expression("exp(x1)", 2)


@pytest.mark.parametrize(
    "block",
    [
        {"components": ["1"]},
        {"dimension": 2, "components": ["1", "0"]},
        {"dimension": 2, "components": ["1", "0", "1"], "box": [[0, 1]]},
        {"dimension": 2, "components": ["1", "0", "x7"]},
    ],
)
def test_custom_metric_errors(block):
    with pytest.raises(ValueError):
        catalog.from_config(block)


def test_load_config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("suite: yamabe\ndims: [2]\n")
    assert catalog.load_config(path) == {"suite": "yamabe", "dims": [2]}
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        catalog.load_config(path)


def test_sphere_radius_notes():
    e = catalog.sphere(2, 2.0)
    assert e.name == "sphere-2-r2"
    assert curvature_at(e.metric, np.array([1.0, 0.0])).scalar.value == pytest.approx(0.5)
    with pytest.raises(ValueError):
        catalog.sphere(2, -1.0)
    assert math.isclose(e.sampling_box[-1][1], 2 * math.pi)
