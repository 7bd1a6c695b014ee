"""Discretized compact backgrounds and conformal calculus.

Two background geometries are supported:

* flat torus T^n (n = 2..6) with uniform periodic grids, and
* the round two-sphere on a staggered latitude-longitude grid (first
  latitude ring at theta = dtheta/2, so no node sits on a pole).

All differential operators are second-order central/flux-form stencils.
The Laplacian is assembled in divergence form so that the weighted matrix
W @ L is exactly symmetric, which the Krylov solver and the spectrum
module rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

GEOMETRIC = "geometric"
SYNTHETIC = "synthetic"

MAX_PHI = 300.0  # reject conformal factors that would overflow exp


class GridError(ValueError):
    """Raised for unsupported or inconsistent grid parameters."""


@dataclass
class ManifoldGrid:
    """Discretized background (M, g0).

    Attributes
    ----------
    kind : "torus" or "sphere2"
    n : dimension of M
    shape : nodes per axis; (n_theta, n_phi) for the sphere
    coords : (npoints, n) node coordinates
    weights : quadrature weights approximating sqrt|g0| dx per node
    r_g0 : constant background scalar curvature
    mode : "geometric" or "synthetic"
    """

    kind: str
    n: int
    shape: tuple
    coords: np.ndarray
    weights: np.ndarray
    r_g0: float
    mode: str
    lengths: tuple | None = None
    radius: float | None = None
    _lap: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def spacings(self) -> tuple:
        if self.kind == "torus":
            return tuple(L / m for L, m in zip(self.lengths, self.shape))
        ntheta, nphi = self.shape
        return (np.pi / ntheta, 2.0 * np.pi / nphi)

    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse discrete Delta_{g0} (non-positive spectrum)."""
        if self._lap is None:
            s = flux_divergence_matrix(self, None)
            self._lap = sp.diags(1.0 / self.weights) @ s
        return self._lap

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.npoints,):
            raise ValueError(
                f"field has shape {f.shape}, expected ({self.npoints},)")
        if not np.all(np.isfinite(f)):
            raise ValueError("field contains non-finite values")
        return f


def build_grid(kind, n, resolution, lengths=None, radius=None,
               mode=GEOMETRIC, synthetic_r0=0.0) -> ManifoldGrid:
    """Build a discretized background.

    Parameters
    ----------
    kind : "torus" or "sphere2"
    n : dimension (torus: 2..6; sphere2: must be 2)
    resolution : int or per-axis sequence (torus); (n_theta, n_phi) (sphere)
    lengths : torus period lengths, default 2*pi per axis
    radius : sphere radius, default 1
    mode : "geometric", or "synthetic" for a torus grid carrying a
        user-prescribed constant scalar curvature (coefficient-level
        testing only)
    """
    if mode not in (GEOMETRIC, SYNTHETIC):
        raise GridError(f"unknown mode {mode!r}")
    if kind == "torus":
        if not 2 <= n <= 6:
            raise GridError(f"torus dimension must be in [2, 6], got {n}")
        if np.isscalar(resolution):
            res = (int(resolution),) * n
        else:
            res = tuple(int(r) for r in resolution)
            if len(res) != n:
                raise GridError("resolution does not match dimension")
        if any(r < 4 for r in res):
            raise GridError("need at least 4 nodes per axis")
        if lengths is None:
            lengths = (2.0 * np.pi,) * n
        lengths = tuple(float(L) for L in lengths)
        if len(lengths) != n or any(L <= 0 for L in lengths):
            raise GridError("period lengths must be positive, one per axis")
        axes = [np.arange(m) * (L / m) for L, m in zip(lengths, res)]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=-1)
        w = np.prod([L / m for L, m in zip(lengths, res)])
        weights = np.full(coords.shape[0], w)
        r0 = float(synthetic_r0) if mode == SYNTHETIC else 0.0
        return ManifoldGrid("torus", n, res, coords, weights, r0,
                            mode, lengths=lengths)
    if kind == "sphere2":
        if n != 2:
            raise GridError("sphere2 requires n = 2")
        if mode == SYNTHETIC:
            raise GridError("synthetic mode is restricted to torus grids")
        ntheta, nphi = (int(r) for r in resolution)
        if ntheta < 4 or nphi < 4:
            raise GridError("need at least 4 nodes per axis")
        if nphi % 2:
            raise GridError("n_phi must be even (pole-wrap stencil)")
        a = 1.0 if radius is None else float(radius)
        if a <= 0:
            raise GridError("radius must be positive")
        dtheta = np.pi / ntheta
        dphi = 2.0 * np.pi / nphi
        theta = (np.arange(ntheta) + 0.5) * dtheta
        phi = np.arange(nphi) * dphi
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        coords = np.stack([tt.ravel(), pp.ravel()], axis=-1)
        # exact cell areas: weights telescope to 4 pi a^2 in total
        weights = (a * a * 2.0 * np.sin(0.5 * dtheta) * np.sin(tt)
                   * dphi).ravel()
        return ManifoldGrid("sphere2", 2, (ntheta, nphi), coords, weights,
                            2.0 / a ** 2, GEOMETRIC, radius=a)
    raise GridError(f"unsupported manifold kind {kind!r}")


def flux_divergence_matrix(grid: ManifoldGrid, mu: np.ndarray | None):
    """Weighted divergence-form operator S with W^-1 S = the Laplacian.

    ``mu`` is an optional per-node conductivity (e.g. e^{(n-2)phi} for a
    conformal metric); edge values use the arithmetic midpoint average.
    S is symmetric negative semi-definite with exact zero row sums.
    """
    npts = grid.npoints
    if mu is None:
        mu = np.ones(npts)
    rows, cols, vals = [], [], []

    def add_edges(i_idx, j_idx, kappa):
        rows.append(i_idx)
        cols.append(j_idx)
        vals.append(kappa)
        rows.append(j_idx)
        cols.append(i_idx)
        vals.append(kappa)
        rows.append(i_idx)
        cols.append(i_idx)
        vals.append(-kappa)
        rows.append(j_idx)
        cols.append(j_idx)
        vals.append(-kappa)

    idx = np.arange(npts).reshape(grid.shape)
    mu_grid = mu.reshape(grid.shape)
    if grid.kind == "torus":
        h = grid.spacings
        w = float(grid.weights[0])
        for k in range(grid.n):
            nb = np.roll(idx, -1, axis=k)
            mu_edge = 0.5 * (mu_grid + np.roll(mu_grid, -1, axis=k))
            kappa = (w / h[k] ** 2) * mu_edge
            add_edges(idx.ravel(), nb.ravel(), kappa.ravel())
    else:
        ntheta, nphi = grid.shape
        dtheta, dphi = grid.spacings
        theta = (np.arange(ntheta) + 0.5) * dtheta
        # theta edges: coefficient sin(theta_{i+1/2}); vanishes at poles
        sin_half = np.sin(theta[:-1] + 0.5 * dtheta)
        mu_edge = 0.5 * (mu_grid[:-1, :] + mu_grid[1:, :])
        kappa = (dphi / dtheta) * sin_half[:, None] * mu_edge
        add_edges(idx[:-1, :].ravel(), idx[1:, :].ravel(), kappa.ravel())
        # phi edges (periodic)
        nb = np.roll(idx, -1, axis=1)
        mu_edge = 0.5 * (mu_grid + np.roll(mu_grid, -1, axis=1))
        kappa = (dtheta / dphi) / np.sin(theta)[:, None] * mu_edge
        add_edges(idx.ravel(), nb.ravel(), kappa.ravel())
    s = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(npts, npts))
    return s.tocsr()


def laplacian_g0(grid: ManifoldGrid, f: np.ndarray) -> np.ndarray:
    """Discrete Delta_{g0} f (self-adjoint w.r.t. quadrature weights)."""
    f = grid.check_field(f)
    return grid.laplacian_matrix() @ f


def _axis_gradients(grid: ManifoldGrid, f: np.ndarray):
    """Central-difference coordinate derivatives of f, one per axis."""
    fg = f.reshape(grid.shape)
    if grid.kind == "torus":
        h = grid.spacings
        return [(np.roll(fg, -1, axis=k) - np.roll(fg, 1, axis=k))
                / (2.0 * h[k]) for k in range(grid.n)]
    ntheta, nphi = grid.shape
    dtheta, dphi = grid.spacings
    # pole wrap: the ghost ring across a pole is the first/last ring
    # shifted by pi in longitude
    up = np.empty_like(fg)
    up[:-1, :] = fg[1:, :]
    up[-1, :] = np.roll(fg[-1, :], nphi // 2, axis=0)
    dn = np.empty_like(fg)
    dn[1:, :] = fg[:-1, :]
    dn[0, :] = np.roll(fg[0, :], nphi // 2, axis=0)
    df_dtheta = (up - dn) / (2.0 * dtheta)
    df_dphi = (np.roll(fg, -1, axis=1) - np.roll(fg, 1, axis=1)) / (2.0 * dphi)
    return [df_dtheta, df_dphi]


def grad_inner(grid: ManifoldGrid, f: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Pointwise <grad f, grad h>_{g0}, second-order accurate."""
    f = grid.check_field(f)
    h = grid.check_field(h)
    gf = _axis_gradients(grid, f)
    gh = _axis_gradients(grid, h) if h is not f else gf
    if grid.kind == "torus":
        out = sum(a * b for a, b in zip(gf, gh))
        return out.ravel()
    a = grid.radius
    theta = grid.coords[:, 0].reshape(grid.shape)
    out = (gf[0] * gh[0] + gf[1] * gh[1] / np.sin(theta) ** 2) / a ** 2
    return out.ravel()


def integrate(grid: ManifoldGrid, f: np.ndarray,
              phi: np.ndarray | None = None) -> float:
    """Quadrature of f dV_{g0}, or of f e^{n phi} dV_{g0} when phi is given."""
    f = grid.check_field(f)
    if phi is None:
        return float(np.dot(f, grid.weights))
    phi = grid.check_field(phi)
    return float(np.dot(f * np.exp(grid.n * phi), grid.weights))


@dataclass
class ConformalMetric:
    """Volume-normalized conformal factor: int e^{n phi} dV_{g0} = A."""

    grid: ManifoldGrid
    phi: np.ndarray
    A: float


def normalize_volume(grid: ManifoldGrid, phi: np.ndarray,
                     A: float) -> ConformalMetric:
    """Shift phi by the constant making the warped volume equal A."""
    phi = grid.check_field(phi)
    if A <= 0:
        raise ValueError("target warped volume must be positive")
    if np.max(np.abs(phi)) > MAX_PHI:
        raise ValueError("conformal factor too large; |phi| > 300 rejected")
    vol = integrate(grid, np.ones(grid.npoints), phi)
    c = np.log(A / vol) / grid.n
    return ConformalMetric(grid, phi + c, float(A))


def _scalar_curvature(grid: ManifoldGrid, phi: np.ndarray,
                      r0: float) -> np.ndarray:
    n = grid.n
    lap_phi = laplacian_g0(grid, phi)
    grad2 = grad_inner(grid, phi, phi)
    return np.exp(-2.0 * phi) * (
        -2.0 * (n - 1) * lap_phi - (n - 1) * (n - 2) * grad2 + r0)


def conformal_scalar_curvature(grid: ManifoldGrid,
                               phi: np.ndarray) -> np.ndarray:
    """Scalar curvature of g = e^{2 phi} g0, evaluated pointwise."""
    if grid.mode != GEOMETRIC:
        raise GridError(
            "scalar curvature of a synthetic grid is geometrically "
            "inconsistent; synthetic R_g0 only enters the operator "
            "coefficient")
    phi = grid.check_field(phi)
    return _scalar_curvature(grid, phi, grid.r_g0)


def total_scalar_curvature(grid: ManifoldGrid, phi: np.ndarray) -> float:
    """int R_g dV_g via the integrated-by-parts form.

    Equals (n-1)(n-2) int e^{(n-2)phi} |grad phi|^2 dV_{g0}
    + R_{g0} int e^{(n-2)phi} dV_{g0}; agrees with direct quadrature of
    the pointwise curvature to O(h^2).
    """
    if grid.mode != GEOMETRIC:
        raise GridError("total scalar curvature requires a geometric grid")
    phi = grid.check_field(phi)
    n = grid.n
    efac = np.exp((n - 2) * phi)
    grad2 = grad_inner(grid, phi, phi)
    return (n - 1) * (n - 2) * integrate(grid, efac * grad2) \
        + grid.r_g0 * integrate(grid, efac)
