import numpy as np
import pytest

from warpeff.geometry import build_grid, integrate, laplacian_g0, grad_inner
from warpeff.fields import FieldStrengthSet, StringSource
from warpeff.families import random_phi
from warpeff.solver import (ResonanceError, assemble, solve_critical_point,
                            spectrum, expansion_potential, family_scan)


@pytest.fixture(scope="module")
def sphere():
    return build_grid("sphere2", 2, (24, 48))


@pytest.fixture(scope="module")
def torus():
    return build_grid("torus", 2, 24)


def test_assemble_constant_coefficients(sphere, torus):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    assert np.allclose(asm.c, -2.0 / 3.0)
    asm_t = assemble(torus, np.zeros(torus.npoints))
    assert np.allclose(asm_t.c, 0.0)
    f = np.cos(torus.coords[:, 0])
    assert np.max(np.abs(asm_t.apply(f) - laplacian_g0(torus, f))) < 1e-12


def test_assembled_operator_symmetry(sphere):
    rng = np.random.default_rng(0)
    for seed in range(10):
        phi = random_phi(sphere, 0.4, 2, seed)
        flux = FieldStrengthSet(
            sphere, [(2, rng.uniform(0, 1, sphere.npoints))])
        asm = assemble(sphere, phi, flux=flux)
        f = rng.standard_normal(sphere.npoints)
        h = rng.standard_normal(sphere.npoints)
        lhs = asm.inner(asm.apply(f), h)
        rhs = asm.inner(f, asm.apply(h))
        scale = max(abs(lhs), abs(rhs), 1.0)
        assert abs(lhs - rhs) < 1e-12 * scale


def test_constant_solution_oracle(sphere):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    cp = solve_critical_point(asm, 1.0)
    assert np.max(np.abs(cp.u - 1.5)) < 1e-8
    assert abs(cp.alpha + 1 / np.pi) < 1e-8
    assert abs(cp.potential + 1 / (4 * np.pi)) < 1e-8
    assert cp.positivity == "strictly-positive"


def test_constant_flux_oracle(sphere):
    flux = FieldStrengthSet(sphere, [(1, np.full(sphere.npoints, 2.0))])
    asm = assemble(sphere, np.zeros(sphere.npoints), flux=flux)
    assert np.allclose(asm.c, -1.0 / 3.0)
    cp = solve_critical_point(asm, 1.0)
    assert np.max(np.abs(cp.u - 3.0)) < 1e-8
    assert abs(cp.potential + 1 / (8 * np.pi)) < 1e-8


def test_resonance_refused(torus):
    asm = assemble(torus, np.zeros(torus.npoints))
    with pytest.raises(ResonanceError) as exc:
        solve_critical_point(asm, 1.0)
    assert abs(exc.value.lambda0) < 1e-8
    assert abs(exc.value.obstruction) > 1.0


def test_background_frame_equivalence(sphere):
    # e^{2 phi} Delta_g u equals Delta_{g0} u + (n-2)<grad phi, grad u>
    # up to the discretization mismatch of the two stencils
    phi = random_phi(sphere, 0.3, 2, 11)
    asm = assemble(sphere, phi)
    u = np.sin(sphere.coords[:, 0]) * np.cos(sphere.coords[:, 1])
    lap_g = asm.apply(u) - asm.c * u
    g0_form = laplacian_g0(sphere, u) \
        + (sphere.n - 2) * grad_inner(sphere, phi, u)
    mismatch = np.max(np.abs(np.exp(2 * phi) * lap_g - g0_form))
    assert mismatch < 5e-2  # O(h^2) at this resolution


def test_rescaling_covariance(sphere):
    phi = random_phi(sphere, 0.3, 2, 13)
    asm = assemble(sphere, phi)
    cp1 = solve_critical_point(asm, 1.0)
    cp2 = solve_critical_point(asm, 2.0)
    assert abs(cp2.alpha - cp1.alpha / 2) < 1e-10 * abs(cp1.alpha)
    assert np.max(np.abs(cp2.v - cp1.v / 2)) < 1e-10 * np.max(np.abs(cp1.v))


def test_solution_uniqueness_under_restarts(sphere):
    phi = random_phi(sphere, 0.3, 2, 17)
    asm = assemble(sphere, phi)
    base = solve_critical_point(asm, 1.0)
    rng = np.random.default_rng(1)
    for _ in range(3):
        x0 = rng.standard_normal(sphere.npoints)
        cp = solve_critical_point(asm, 1.0, x0=x0)
        assert np.max(np.abs(cp.u - base.u)) < 1e-8


def test_potential_independent_of_kernel_directions(sphere):
    # shift the coefficient so the former lambda1 trio sits in the kernel
    # neighborhood; their zero g-mean leaves int u dV_g unchanged
    asm = assemble(sphere, np.zeros(sphere.npoints))
    rep = spectrum(asm, 4)
    lam1 = rep.eigenvalues[1]
    shifted = asm.shifted(-lam1)
    cp = solve_critical_point(shifted, 1.0)
    psi1 = rep.eigenfields[:, 1]
    iu = shifted.integral(cp.u)
    iu_plus = shifted.integral(cp.u + psi1)
    assert abs(iu_plus - iu) < 1e-9 * abs(iu)


def test_spectrum_sphere_oracle(sphere):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    rep = spectrum(asm, 5)
    assert abs(rep.eigenvalues[0] + 2 / 3) < 1e-4
    for i in (1, 2, 3):
        assert abs(rep.eigenvalues[i] + 8 / 3) < 1e-2  # tighter at 64x128
    assert rep.eigenvalues[4] < -4.0
    assert np.min(rep.eigenfields[:, 0]) > 0
    assert not rep.resonant
    assert rep.lambda0_sign == -1


def test_spectrum_torus_resonant(torus):
    asm = assemble(torus, np.zeros(torus.npoints))
    rep = spectrum(asm, 2)
    assert abs(rep.eigenvalues[0]) < 1e-8
    assert rep.resonant
    assert rep.lambda0_sign == 0


def test_spectrum_orthonormality(sphere):
    phi = random_phi(sphere, 0.3, 2, 19)
    asm = assemble(sphere, phi)
    rep = spectrum(asm, 4)
    gram = np.array([[asm.inner(rep.eigenfields[:, i], rep.eigenfields[:, j])
                      for j in range(4)] for i in range(4)])
    assert np.max(np.abs(gram - np.eye(4))) < 1e-8


def test_expansion_single_mode_exact(sphere):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    out = expansion_potential(asm, 1.0, 1)
    assert abs(out["potential"] + 1 / (4 * np.pi)) < 1e-8


def test_expansion_zero_mean_modes_contribute_nothing(sphere):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    out = expansion_potential(asm, 1.0, 4)
    partials = out["inv_potential_partial"]
    # modes 1..3 are l=1 harmonics with zero g-mean
    assert np.max(np.abs(np.diff(partials))) < 1e-10


def test_family_scan_crossings(sphere):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    out = family_scan(asm, np.linspace(0, 8, 17), 1.0, 1.0)
    cross = {c["quantity"]: c["t"] for c in out["crossings"]}
    assert abs(cross["lambda0"] - 4.0) < 1e-6
    assert abs(cross["alpha"] - 4.0) < 1e-4
    assert out["shift_law_error"] < 1e-6


def test_family_scan_flat_without_ramp(sphere):
    asm = assemble(sphere, np.zeros(sphere.npoints))
    out = family_scan(asm, np.linspace(0, 2, 5), 0.0, 1.0)
    lams = [row["lambda0"] for row in out["trace"]]
    assert np.max(np.abs(np.diff(lams))) == 0.0
    assert out["crossings"] == []


def test_mismatched_grid_rejected(sphere, torus):
    src = StringSource(torus, np.ones(torus.npoints), 0.0)
    with pytest.raises(ValueError):
        assemble(sphere, np.zeros(sphere.npoints), string=src)
