import numpy as np
import pytest

from warpeff.geometry import (GridError, build_grid, integrate, laplacian_g0,
                              grad_inner, normalize_volume,
                              conformal_scalar_curvature,
                              total_scalar_curvature)
from warpeff.solver import assemble


def test_torus_grid_counts_and_weights():
    grid = build_grid("torus", 2, 32)
    assert grid.npoints == 1024
    assert np.allclose(grid.weights, (2 * np.pi / 32) ** 2)


def test_torus_4d_node_count():
    grid = build_grid("torus", 4, 8)
    assert grid.npoints == 4096


def test_sphere_weights_sum_to_area():
    grid = build_grid("sphere2", 2, (32, 64))
    assert abs(grid.weights.sum() - 4 * np.pi) < 1e-3 * 4 * np.pi


def test_grid_validation():
    with pytest.raises(GridError):
        build_grid("torus", 7, 8)
    with pytest.raises(GridError):
        build_grid("torus", 2, 3)
    with pytest.raises(GridError):
        build_grid("sphere2", 3, (16, 32))
    with pytest.raises(GridError):
        build_grid("sphere2", 2, (16, 32), mode="synthetic")
    with pytest.raises(GridError):
        build_grid("klein", 2, 16)


def test_laplacian_fourier_eigenfunction():
    grid = build_grid("torus", 2, 64)
    f = np.cos(grid.coords[:, 0])
    lap = laplacian_g0(grid, f)
    assert np.max(np.abs(lap + f)) < 5e-3  # O(h^2)


def test_laplacian_sphere_harmonic():
    grid = build_grid("sphere2", 2, (48, 96))
    f = np.cos(grid.coords[:, 0])
    lap = laplacian_g0(grid, f)
    assert np.max(np.abs(lap + 2 * f)) < 5e-3


def test_laplacian_annihilates_constants():
    for grid in (build_grid("torus", 3, 8), build_grid("sphere2", 2, (16, 32))):
        ones = np.ones(grid.npoints)
        assert np.max(np.abs(laplacian_g0(grid, ones))) < 1e-12


def test_laplacian_symmetric_negative_semidefinite():
    from warpeff.geometry import flux_divergence_matrix
    from scipy.linalg import eigh
    grid = build_grid("sphere2", 2, (12, 24))
    s = flux_divergence_matrix(grid, None)  # W^{-1} S = Laplacian
    asym = abs(s - s.T).max()
    assert asym < 1e-12
    # generalized spectrum of the Laplacian under the weighted inner product
    vals = eigh(s.toarray(), np.diag(grid.weights), eigvals_only=True)
    assert vals.max() < 1e-10          # negative semi-definite
    assert np.sum(vals > -1e-8) == 1   # kernel exactly the constants


def test_gradient_inner_products():
    grid = build_grid("torus", 2, 64)
    x1, x2 = grid.coords[:, 0], grid.coords[:, 1]
    f = np.cos(x1)
    assert np.max(np.abs(grad_inner(grid, f, f) - np.sin(x1) ** 2)) < 5e-3
    assert np.max(np.abs(grad_inner(grid, f, np.cos(x2)))) < 5e-3
    const = np.full(grid.npoints, 2.5)
    assert np.max(np.abs(grad_inner(grid, const, const))) == 0.0


def test_integrate_baselines():
    sph = build_grid("sphere2", 2, (32, 64))
    assert abs(integrate(sph, np.ones(sph.npoints)) - 4 * np.pi) < 1e-10
    tor = build_grid("torus", 2, 16)
    assert abs(integrate(tor, np.ones(tor.npoints)) - 4 * np.pi ** 2) < 1e-10


def test_normalize_volume_constants():
    grid = build_grid("torus", 2, 16)
    phi0 = np.zeros(grid.npoints)
    assert abs(normalize_volume(grid, phi0, 4 * np.pi ** 2).phi[0]) < 1e-14
    shifted = normalize_volume(grid, phi0, 8 * np.pi ** 2).phi
    assert np.allclose(shifted, np.log(2) / 2)


def test_normalize_volume_random():
    grid = build_grid("sphere2", 2, (16, 32))
    rng = np.random.default_rng(3)
    phi = 0.4 * np.sin(grid.coords[:, 0]) * np.cos(2 * grid.coords[:, 1]) \
        + 0.1 * rng.standard_normal(grid.npoints) * 0  # smooth field
    target = 7.5
    out = normalize_volume(grid, phi, target).phi
    vol = integrate(grid, np.ones(grid.npoints), out)
    assert abs(vol - target) < 1e-10 * target


def test_scalar_curvature_baselines():
    sph = build_grid("sphere2", 2, (16, 32))
    assert np.allclose(conformal_scalar_curvature(sph,
                                                  np.zeros(sph.npoints)), 2.0)
    tor = build_grid("torus", 2, 16)
    assert np.max(np.abs(conformal_scalar_curvature(
        tor, np.zeros(tor.npoints)))) == 0.0


def test_scalar_curvature_constant_shift_exact():
    grid = build_grid("sphere2", 2, (16, 32))
    c = 0.37
    r = conformal_scalar_curvature(grid, np.full(grid.npoints, c))
    assert np.allclose(r, np.exp(-2 * c) * 2.0, rtol=0, atol=1e-12)


def test_synthetic_mode_refuses_curvature():
    grid = build_grid("torus", 2, 16, mode="synthetic", synthetic_r0=2.0)
    with pytest.raises(GridError):
        conformal_scalar_curvature(grid, np.zeros(grid.npoints))
    with pytest.raises(GridError):
        total_scalar_curvature(grid, np.zeros(grid.npoints))
    # ...but the operator coefficient uses the prescribed value
    asm = assemble(grid, np.zeros(grid.npoints))
    assert np.allclose(asm.c, -2.0 / 3.0)


def test_gauss_bonnet_sphere_random():
    grid = build_grid("sphere2", 2, (32, 64))
    from warpeff.families import random_phi
    for seed in range(5):
        phi = random_phi(grid, 0.5, 2, seed)
        total = integrate(grid, conformal_scalar_curvature(grid, phi), phi)
        assert abs(total - 8 * np.pi) < 0.005 * 8 * np.pi
        ibp = total_scalar_curvature(grid, phi)
        assert abs(ibp - 8 * np.pi) < 0.005 * 8 * np.pi


def test_total_curvature_torus_zero():
    grid = build_grid("torus", 2, 32)
    from warpeff.families import random_phi
    phi = random_phi(grid, 0.4, 2, 5)
    total = integrate(grid, conformal_scalar_curvature(grid, phi), phi)
    assert abs(total) < 1e-3 * grid.volume


def test_curvature_second_order_convergence():
    # pointwise curvature of an analytic conformal factor on the torus
    errs = []
    for res in (32, 64):
        grid = build_grid("torus", 2, res)
        x1 = grid.coords[:, 0]
        phi = 0.3 * np.cos(x1)
        exact = np.exp(-2 * phi) * (0.6 * np.cos(x1))
        r = conformal_scalar_curvature(grid, phi)
        errs.append(np.max(np.abs(r - exact)))
    ratio = errs[0] / errs[1]
    assert 3.0 < ratio < 5.0
