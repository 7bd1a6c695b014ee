import numpy as np
import pytest

from warpeff.geometry import build_grid, integrate
from warpeff.fields import (FieldStrengthSet, StringSource, flux_energy,
                            gaussian_source_field, transform_source,
                            source_integral_check)
from warpeff.families import random_phi


@pytest.fixture(scope="module")
def grid():
    return build_grid("torus", 2, 24)


def test_flux_energy_constant_oracle(grid):
    fset = FieldStrengthSet(grid, [(2, np.full(grid.npoints, 6.0))])
    val = flux_energy(fset, np.zeros(grid.npoints))
    assert np.allclose(val, 1.0)


def test_one_form_flux_energy_phi_independent(grid):
    fset = FieldStrengthSet(grid, [(1, np.full(grid.npoints, 3.0))])
    phi = random_phi(grid, 0.4, 2, 1)
    assert np.allclose(flux_energy(fset, phi),
                       flux_energy(fset, np.zeros(grid.npoints)))


def test_flux_energy_matches_termwise_sum(grid):
    rng = np.random.default_rng(2)
    f2 = rng.uniform(0, 2, grid.npoints)
    f1 = rng.uniform(0, 1, grid.npoints)
    fset = FieldStrengthSet(grid, [(1, f1), (2, f2)])
    phi = random_phi(grid, 0.3, 2, 2)
    manual = (np.exp(0 * phi) * f1 + np.exp(-2 * phi) * f2) / 6.0
    assert np.max(np.abs(flux_energy(fset, phi) - manual)) < 1e-12


def test_flux_energy_nonnegative(grid):
    rng = np.random.default_rng(4)
    fset = FieldStrengthSet(grid, [(2, rng.uniform(0, 5, grid.npoints))])
    for seed in range(10):
        assert np.min(flux_energy(fset, random_phi(grid, 0.5, 2, seed))) >= 0


def test_flux_validation(grid):
    with pytest.raises(ValueError):
        FieldStrengthSet(grid, [(0, np.ones(grid.npoints))])
    with pytest.raises(ValueError):
        FieldStrengthSet(grid, [(3, np.ones(grid.npoints))])
    with pytest.raises(ValueError):
        FieldStrengthSet(grid, [(1, np.ones(grid.npoints)),
                                (1, np.ones(grid.npoints))])
    with pytest.raises(ValueError):
        FieldStrengthSet(grid, [(1, -np.ones(grid.npoints))])


def test_transform_source_beta_zero(grid):
    t = np.full(grid.npoints, 5.0)
    src = StringSource(grid, t, 0.0)
    phi = random_phi(grid, 0.5, 2, 3)
    assert np.array_equal(transform_source(src, phi), t)


def test_transform_source_constant_phi(grid):
    t = np.full(grid.npoints, 5.0)
    src = StringSource(grid, t, grid.n / 2)
    c = 0.3
    out = transform_source(src, np.full(grid.npoints, c))
    assert np.allclose(out, np.exp(-grid.n * c) * 5.0)


def test_transform_source_group_action(grid):
    rng = np.random.default_rng(6)
    src = StringSource(grid, rng.uniform(0, 1, grid.npoints), 1.0)
    phi1 = random_phi(grid, 0.3, 2, 7)
    phi2 = random_phi(grid, 0.2, 2, 8)
    via_two = np.exp(-2 * src.beta * phi2) * transform_source(src, phi1)
    direct = transform_source(src, phi1 + phi2)
    assert np.max(np.abs(via_two - direct)) < 1e-12


def test_source_integral_invariance_beta_half_n(grid):
    t = np.full(grid.npoints, 2.0)
    src = StringSource(grid, t, grid.n / 2)
    for seed in range(20):
        phi = random_phi(grid, 0.5, 2, seed)
        assert source_integral_check(src, phi)["pass"]


def test_source_integral_check_fails_for_beta_zero(grid):
    t = np.full(grid.npoints, 2.0)
    src = StringSource(grid, t, 0.0)
    c = 0.25
    out = source_integral_check(src, np.full(grid.npoints, c))
    assert not out["pass"]
    assert abs(out["lhs"] / out["rhs"] - np.exp(grid.n * c)) < 1e-10


def test_gaussian_source_unit_mass():
    grid = build_grid("torus", 2, 48)
    src = gaussian_source_field(grid, [np.pi, np.pi], 0.4)
    assert abs(integrate(grid, src.values) - 1.0) < 1e-8
    assert src.beta == grid.n / 2
    assert src.integral_invariant


def test_gaussian_source_sphere():
    grid = build_grid("sphere2", 2, (32, 64))
    src = gaussian_source_field(grid, [np.pi / 2, np.pi], 0.3)
    assert abs(integrate(grid, src.values) - 1.0) < 1e-8


def test_gaussian_source_under_resolved_rejected():
    # analytically normalized values on a grid too coarse for sigma
    grid = build_grid("torus", 2, 8)
    sigma = 0.05
    d2 = np.sum((grid.coords - np.pi) ** 2, axis=1)
    vals = np.exp(-d2 / (2 * sigma ** 2)) / (2 * np.pi * sigma ** 2)
    with pytest.raises(ValueError):
        StringSource(grid, vals, 1.0, kind="gaussian", sigma=sigma)


def test_negative_beta_rejected(grid):
    with pytest.raises(ValueError):
        StringSource(grid, np.ones(grid.npoints), -1.0)


def test_large_beta_warns(grid):
    with pytest.warns(UserWarning):
        StringSource(grid, np.ones(grid.npoints), grid.n)
