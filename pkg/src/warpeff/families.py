"""Worked radial families: conformally flat metrics, bubbles, Gaussian sources.

Radial quantities are evaluated with dedicated 1-D quadrature (adaptive
for improper integrals, uniform sampling for exported profiles); the n-D
grid is only used for cross-checks. The gluing of these planar families
into a compact background is modeled by restricting to a large ball with
a smooth cutoff; the cutoff contribution is reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geometry import ManifoldGrid, integrate, normalize_volume

R_MAX_DEFAULT = 50.0


def sphere_surface(n: int) -> float:
    """Surface measure of the unit (n-1)-sphere in R^n."""
    from scipy.special import gamma as gamma_fn
    return 2.0 * np.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def radial_integral(fun, n: int, r_max: float | None = None,
                    scale: float = 1.0) -> tuple:
    """Integral of a radial function over R^n; returns (value, tail).

    Integrates vol(S^{n-1}) * f(r) r^{n-1} dr adaptively after the
    substitution r = scale * s; ``scale`` should match the natural width
    of f so the quadrature sees an O(1) feature. The improper piece is
    mapped to [0, 1] by inversion, which keeps slowly decaying tails
    (power laws barely past integrability) accurate. When r_max is given
    the integral is truncated there and the tail beyond it is reported;
    otherwise the quadrature error estimate plays the tail role.
    """
    surf = sphere_surface(n) * scale ** n

    def g(s):
        return fun(scale * s) * s ** (n - 1)

    def g_inv(t):
        # s = 1/t maps [1, inf) to (0, 1]
        return g(1.0 / t) / t ** 2

    if r_max is None:
        v1, e1 = quad(g, 0.0, 1.0, limit=500, epsabs=0.0, epsrel=1e-11)
        v2, e2 = quad(g_inv, 0.0, 1.0, limit=500, epsabs=0.0, epsrel=1e-11)
        return surf * (v1 + v2), surf * (e1 + e2)
    s_max = r_max / scale
    if s_max <= 1.0:
        val, _ = quad(g, 0.0, s_max, limit=500, epsabs=0.0, epsrel=1e-11)
        t1, _ = quad(g, s_max, 1.0, limit=500, epsabs=0.0, epsrel=1e-11)
        t2, _ = quad(g_inv, 0.0, 1.0, limit=500, epsabs=0.0, epsrel=1e-11)
        tail = t1 + t2
    else:
        v1, _ = quad(g, 0.0, 1.0, limit=500, epsabs=0.0, epsrel=1e-11)
        v2, _ = quad(g_inv, 1.0 / s_max, 1.0, limit=500, epsabs=0.0, epsrel=1e-11)
        val = v1 + v2
        tail, _ = quad(g_inv, 0.0, 1.0 / s_max, limit=500, epsabs=0.0, epsrel=1e-11)
    return surf * val, surf * tail


@dataclass
class RadialProfile:
    n: int
    r: np.ndarray
    values: np.ndarray
    tail_fraction: float = 0.0


@dataclass
class GammaFamily:
    gamma: float
    n: int
    A: float
    a: float

    def conformal_factor(self, r):
        """phi(r) with e^{2 phi} = (a^2 + r^2)^{-gamma}."""
        return -0.5 * self.gamma * np.log(self.a ** 2 + np.asarray(r) ** 2)

    def scalar_curvature(self, r):
        """Closed-form R_g(r) of the conformally flat family."""
        r = np.asarray(r, dtype=float)
        a2r2 = self.a ** 2 + r ** 2
        n, ga = self.n, self.gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            bracket = 2.0 * (n - 1) * r ** (1 - n) * (
                ga * n * r ** (n - 1) / a2r2
                - 2.0 * ga * r ** (n + 1) / a2r2 ** 2) \
                - ga ** 2 * (n - 2) * (n - 1) * r ** 2 / a2r2 ** 2
        out = a2r2 ** ga * bracket
        return np.where(r == 0, self.curvature_origin(), out)

    def curvature_origin(self) -> float:
        return 2.0 * (self.n - 1) * self.n * self.gamma \
            * self.a ** (2.0 * (self.gamma - 1.0))


def gamma_family(n: int, gamma: float, A: float,
                 rho: float | None = None) -> dict:
    """Normalize the (a^2 + r^2)^{-gamma} conformal family to volume A.

    a is fixed by quadrature of the improper normalization integral;
    the closed-form curvature profile and its origin value are attached.
    """
    if gamma <= 1:
        raise ValueError("gamma must exceed 1 (normalization diverges)")
    if A <= 0:
        raise ValueError("volume A must be positive")
    shape_int, err = radial_integral(
        lambda s: (1.0 + s * s) ** (-n * gamma / 2.0), n)
    a = (shape_int / A) ** (1.0 / (n * (gamma - 1.0)))
    fam = GammaFamily(gamma=float(gamma), n=int(n), A=float(A), a=float(a))
    vol_check, tail = radial_integral(
        lambda r: (a * a + r * r) ** (-n * gamma / 2.0), n, scale=a)
    result = {
        "family": fam,
        "volume_quadrature": vol_check,
        "volume_error": abs(vol_check - A) / A,
        "curvature_origin": fam.curvature_origin(),
    }
    if rho is not None:
        rr = np.linspace(0.0, rho, 2001)
        result["curvature_sup"] = float(np.max(np.abs(
            fam.scalar_curvature(rr))))
    return result


def radial_scalar_curvature(n: int, phi_vals: np.ndarray, r: np.ndarray,
                            r0: float = 0.0) -> np.ndarray:
    """Conformal curvature of e^{2 phi(r)} * flat via radial differences.

    Central second-order differences on a uniform r-grid; returned on
    interior points r[1:-1]. Cross-check companion for closed forms.
    """
    h = r[1] - r[0]
    d1 = (phi_vals[2:] - phi_vals[:-2]) / (2.0 * h)
    d2 = (phi_vals[2:] - 2.0 * phi_vals[1:-1] + phi_vals[:-2]) / h ** 2
    ri = r[1:-1]
    lap = d2 + (n - 1) * d1 / ri
    return np.exp(-2.0 * phi_vals[1:-1]) * (
        -2.0 * (n - 1) * lap - (n - 1) * (n - 2) * d1 ** 2 + r0)


def bubble_family(n: int, epsilons, r_max: float = R_MAX_DEFAULT) -> dict:
    """Standard-bubble conformal factors on R^n (stereographic sphere).

    Checks that the curvature of 4 u_eps^{4/(n-2)} * flat is the round
    value n(n-1) and that the volume is independent of the dilation
    parameter.
    """
    if n < 3:
        raise ValueError("bubbles need n >= 3")
    epsilons = [float(e) for e in np.atleast_1d(epsilons)]
    if any(e <= 0 for e in epsilons):
        raise ValueError("epsilon must be positive")
    rr = np.linspace(0.0, 10.0, 501)
    out = {"n": n, "epsilons": epsilons, "volumes": [],
           "curvature_max_dev": 0.0, "profiles": {}}
    for eps in epsilons:
        # e^{2 phi} = 4 eps^2 / (eps^2 + r^2)^2; analytic radial derivatives
        def curvature(r, eps=eps):
            d1 = -2.0 * r / (eps ** 2 + r ** 2)
            d2 = -2.0 * (eps ** 2 - r ** 2) / (eps ** 2 + r ** 2) ** 2
            lap = d2 + np.where(r > 0, (n - 1) * d1 / np.maximum(r, 1e-300),
                                (n - 1) * d2)
            e2phi = 4.0 * eps ** 2 / (eps ** 2 + r ** 2) ** 2
            return (-2.0 * (n - 1) * lap - (n - 1) * (n - 2) * d1 ** 2) \
                / e2phi
        dev = float(np.max(np.abs(curvature(rr) - n * (n - 1))))
        out["curvature_max_dev"] = max(out["curvature_max_dev"], dev)
        vol, _ = radial_integral(
            lambda r, eps=eps: (4.0 * eps ** 2
                                / (eps ** 2 + r ** 2) ** 2) ** (n / 2.0), n)
        out["volumes"].append(vol)
        u = eps ** ((n - 2) / 2.0) * (eps ** 2 + rr ** 2) ** ((2 - n) / 2.0)
        out["profiles"][eps] = RadialProfile(n, rr, u)
    vols = np.array(out["volumes"])
    out["volume_spread"] = float((vols.max() - vols.min()) / vols.mean())
    return out


def gaussian_rescale_check(n: int, sigma: float, lam: float,
                           r_max: float = R_MAX_DEFAULT) -> dict:
    """Width law under g = lam^2 g0: sigma_g = lam * sigma_{g0}.

    Compares the source integral in both frames by radial quadrature;
    with the width law they agree up to quadrature tolerance.
    """
    if sigma <= 0 or lam <= 0:
        raise ValueError("sigma and lam must be positive")
    sigma_g = lam * sigma
    base, _ = radial_integral(
        lambda r: sigma ** (-n) * np.exp(-r * r / (2.0 * sigma ** 2)),
        n, r_max=r_max)
    scaled, _ = radial_integral(
        lambda r: sigma_g ** (-n)
        * np.exp(-(lam * r) ** 2 / (2.0 * sigma_g ** 2)) * lam ** n,
        n, r_max=r_max)
    return {"base_integral": base, "scaled_integral": scaled,
            "difference": abs(base - scaled)}


def gaussian_grid_adequacy(grid: ManifoldGrid, center, sigma: float) -> dict:
    """Compare a grid-sampled Gaussian integral to the radial value.

    Flags under-resolution when the grid quadrature strays more than 1%
    from the 1-D reference.
    """
    from .fields import gaussian_source_field
    n = grid.n
    # raw (un-normalized) Gaussian mass
    reference = (2.0 * np.pi) ** (n / 2.0)
    d2 = _coord_dist2(grid, center)
    vals = sigma ** (-n) * np.exp(-d2 / (2.0 * sigma ** 2))
    sampled = integrate(grid, vals)
    rel = abs(sampled - reference) / reference
    return {"grid_integral": sampled, "radial_integral": reference,
            "relative_error": rel, "under_resolved": bool(rel > 0.01)}


def _coord_dist2(grid: ManifoldGrid, center) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    if grid.kind == "torus":
        d = grid.coords - center
        for k, L in enumerate(grid.lengths):
            d[:, k] -= L * np.round(d[:, k] / L)
        return np.sum(d * d, axis=1)
    a = grid.radius
    t0, p0 = center
    t, p = grid.coords[:, 0], grid.coords[:, 1]
    cosang = np.sin(t0) * np.sin(t) * np.cos(p - p0) + np.cos(t0) * np.cos(t)
    return (a * np.arccos(np.clip(cosang, -1.0, 1.0))) ** 2


def random_phi(grid: ManifoldGrid, amplitude: float, smoothness: int,
               seed: int, A: float | None = None) -> np.ndarray:
    """Band-limited random conformal factor, volume-normalized.

    Deterministic under ``seed``; the mode coefficients are drawn
    independently of the grid resolution, so the same seed samples the
    same continuum field on refined grids.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    smoothness = max(int(smoothness), 1)
    rng = np.random.default_rng(seed)
    if amplitude == 0:
        phi = np.zeros(grid.npoints)
    elif grid.kind == "torus":
        phi = np.zeros(grid.npoints)
        ks = [k for k in np.ndindex(*(2 * smoothness + 1,) * grid.n)
              if any(np.array(k) != smoothness)]
        for k in ks:
            kvec = np.array(k) - smoothness
            amp = rng.normal() / (1.0 + np.dot(kvec, kvec))
            shift = rng.uniform(0.0, 2.0 * np.pi)
            arg = 2.0 * np.pi * (grid.coords
                                 @ (kvec / np.array(grid.lengths))) + shift
            phi += amp * np.cos(arg)
    else:
        from scipy.special import sph_harm_y
        theta, ph = grid.coords[:, 0], grid.coords[:, 1]
        phi = np.zeros(grid.npoints)
        for ell in range(1, smoothness + 1):
            for m in range(0, ell + 1):
                ylm = sph_harm_y(ell, m, theta, ph)
                c_re, c_im = rng.normal(size=2) / (1.0 + ell * ell)
                phi += c_re * ylm.real
                if m > 0:
                    phi += c_im * ylm.imag
    top = np.max(np.abs(phi))
    if top > 0:
        phi *= amplitude / top
    if A is None:
        A = grid.volume
    return normalize_volume(grid, phi, A).phi
