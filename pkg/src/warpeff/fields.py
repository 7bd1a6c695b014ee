"""Field strengths, flux energy, and string-source transformation laws."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import ManifoldGrid, integrate


@dataclass
class FieldStrengthSet:
    """Collection of squared p-form norms |F^(p)|^2 in the background metric.

    Entries are (p, values) with distinct form degrees 1 <= p <= n and
    pointwise nonnegative values.
    """

    grid: ManifoldGrid
    entries: list = field(default_factory=list)  # [(p, np.ndarray)]

    def __post_init__(self):
        degrees = set()
        checked = []
        for p, vals in self.entries:
            p = int(p)
            if p < 1 or p > self.grid.n:
                raise ValueError(
                    f"form degree p={p} outside [1, {self.grid.n}]")
            if p in degrees:
                raise ValueError(f"duplicate form degree p={p}")
            degrees.add(p)
            vals = self.grid.check_field(np.asarray(vals, dtype=float))
            if np.any(vals < 0):
                raise ValueError("|F^(p)|^2 must be nonnegative")
            checked.append((p, vals))
        self.entries = checked

    def norm_g(self, phi: np.ndarray) -> np.ndarray:
        """Total squared norm in g = e^{2 phi} g0: sum_p e^{-2 p phi}|F|^2."""
        out = np.zeros(self.grid.npoints)
        for p, vals in self.entries:
            out += np.exp(-2.0 * p * phi) * vals
        return out


@dataclass
class StringSource:
    """Non-classical source with homogeneous conformal scaling e^{-2 beta phi}.

    ``integral_invariant`` is true when the integral of the transformed
    source over dV_g is phi-independent (beta = n/2, or a source modeling
    a delta/orientifold-type term).
    """

    grid: ManifoldGrid
    values: np.ndarray
    beta: float
    kind: str = "smooth"
    sigma: float | None = None
    center: np.ndarray | None = None
    integral_invariant: bool = False

    def __post_init__(self):
        self.values = self.grid.check_field(np.asarray(self.values, float))
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.beta > self.grid.n / 2:
            warnings.warn(
                f"beta={self.beta} outside [0, n/2]; accepted but unusual")
        if self.kind not in ("smooth", "gaussian", "indicator-approx"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("gaussian source needs sigma > 0")
            total = integrate(self.grid, self.values)
            if abs(total - 1.0) > 0.01:
                raise ValueError(
                    f"gaussian source integrates to {total:.4g}, not 1 "
                    "within 1%; grid under-resolves sigma")
        if self.integral_invariant is None:
            self.integral_invariant = abs(self.beta - self.grid.n / 2) < 1e-12


def gaussian_source_field(grid: ManifoldGrid, center, sigma: float,
                          beta: float | None = None) -> StringSource:
    """Unit-mass Gaussian source centered at a grid coordinate point.

    Distance is the flat coordinate distance with periodic wrap (torus) or
    the great-circle distance (sphere2). beta defaults to n/2, the
    delta-like scaling.
    """
    center = np.asarray(center, dtype=float)
    if grid.kind == "torus":
        d = grid.coords - center
        for k, L in enumerate(grid.lengths):
            d[:, k] -= L * np.round(d[:, k] / L)
        r2 = np.sum(d * d, axis=1)
    else:
        a = grid.radius
        t0, p0 = center
        t, p = grid.coords[:, 0], grid.coords[:, 1]
        cosang = (np.sin(t0) * np.sin(t) * np.cos(p - p0)
                  + np.cos(t0) * np.cos(t))
        r2 = (a * np.arccos(np.clip(cosang, -1.0, 1.0))) ** 2
    vals = np.exp(-r2 / (2.0 * sigma ** 2))
    vals /= np.dot(vals, grid.weights)
    if beta is None:
        beta = grid.n / 2
    return StringSource(grid, vals, beta, kind="gaussian", sigma=sigma,
                        center=center,
                        integral_invariant=abs(beta - grid.n / 2) < 1e-12)


def flux_energy(fset: FieldStrengthSet, phi: np.ndarray) -> np.ndarray:
    """Flux-energy density (1/6) sum_p e^{2(1-p)phi} |F^(p)|^2, >= 0."""
    phi = fset.grid.check_field(phi)
    out = np.zeros(fset.grid.npoints)
    for p, vals in fset.entries:
        out += np.exp(2.0 * (1 - p) * phi) * vals
    return out / 6.0


def transform_source(src: StringSource, phi: np.ndarray) -> np.ndarray:
    """Source in the metric g = e^{2 phi} g0: e^{-2 beta phi} T."""
    phi = src.grid.check_field(phi)
    return np.exp(-2.0 * src.beta * phi) * src.values


def source_integral_check(src: StringSource, phi: np.ndarray,
                          rel_tol: float = 1e-8) -> dict:
    """Compare int T^g dV_g against int T^{g0} dV_{g0}.

    Passing (within rel_tol relative) means the source integral is
    invariant under this conformal change.
    """
    grid = src.grid
    lhs = integrate(grid, transform_source(src, phi), phi)
    rhs = integrate(grid, src.values)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "pass": abs(lhs - rhs) <= rel_tol * scale,
    }
