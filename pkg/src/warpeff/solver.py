"""Self-adjoint warp-factor operator: assembly, solves, spectrum, scans.

The operator P u = Delta_g u + c u (with g = e^{2 phi} g0 and
c = -R_g/3 + F_g/6 - T^g/6) is assembled in flux form with the warped
volume weights, so the matrix W_g P is exactly symmetric and every inner
product, orthogonalization and Krylov iteration can use the dV_g measure
directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import scipy.linalg

from .geometry import ManifoldGrid, flux_divergence_matrix, _scalar_curvature
from .fields import FieldStrengthSet, StringSource, transform_source

RESONANCE_TOL = 1e-8
SOLVE_RTOL = 1e-10
MAX_ITER = 50_000
DENSE_CUTOFF = 2500  # below this, spectra are computed densely


class ResonanceError(RuntimeError):
    """Principal eigenvalue within tolerance of zero: solve refused.

    Carries the Fredholm diagnostic: the obstruction integral
    int (-1) psi0 dV_g, which must vanish for -1 to lie in the image.
    """

    def __init__(self, lambda0, obstruction):
        self.lambda0 = float(lambda0)
        self.obstruction = float(obstruction)
        super().__init__(
            f"resonant operator: lambda0 = {lambda0:.3e}, "
            f"kernel obstruction integral = {obstruction:.6g}")


class ConvergenceError(RuntimeError):
    pass


@dataclass
class OperatorAssembly:
    """Discretized P_g = Delta_g + c with dV_g weights."""

    grid: ManifoldGrid
    phi: np.ndarray
    c: np.ndarray
    s_flux: sp.csr_matrix          # symmetric; W_g^-1 s_flux = Delta_g
    w_g: np.ndarray                # quadrature weights of dV_g
    _lambda0: float | None = field(default=None, repr=False)

    @property
    def s_sym(self) -> sp.csr_matrix:
        """Symmetric form: s_sym u = W_g (P u)."""
        return self.s_flux + sp.diags(self.w_g * self.c)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return (self.s_flux @ u) / self.w_g + self.c * u

    def inner(self, f: np.ndarray, h: np.ndarray) -> float:
        return float(np.dot(f * h, self.w_g))

    def integral(self, f: np.ndarray) -> float:
        return float(np.dot(f, self.w_g))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def shifted(self, dc: float) -> "OperatorAssembly":
        """Assembly with a constant added to the coefficient field."""
        out = OperatorAssembly(self.grid, self.phi, self.c + dc,
                               self.s_flux, self.w_g)
        if self._lambda0 is not None:
            out._lambda0 = self._lambda0 + dc  # diagonal shift is exact
        return out

    def lambda0(self) -> float:
        if self._lambda0 is None:
            self._lambda0 = float(_top_eigenvalues(self, 1)[0][0])
        return self._lambda0


@dataclass
class CriticalPoint:
    """Solved warp data for P_g u = -1 rescaled to the volume constraint."""

    u: np.ndarray
    v: np.ndarray
    alpha: float
    potential: float
    positivity: str                 # "strictly-positive"/"nonpositive-somewhere"
    resonance_margin: float
    min_u: float
    residual: float
    iterations: int


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray         # descending: lambda0 >= lambda1 >= ...
    eigenfields: np.ndarray         # (npoints, k), g-orthonormal
    lambda0_sign: int
    resonant: bool


def assemble(grid: ManifoldGrid, phi: np.ndarray,
             flux: FieldStrengthSet | None = None,
             string: StringSource | None = None) -> OperatorAssembly:
    """Assemble the warped operator for given conformal factor and sources."""
    phi = grid.check_field(phi)
    for obj, name in ((flux, "flux set"), (string, "string source")):
        if obj is not None and obj.grid is not grid:
            raise ValueError(f"{name} was built on a different grid")
    n = grid.n
    r_g = _scalar_curvature(grid, phi, grid.r_g0)
    c = -r_g / 3.0
    if flux is not None:
        c = c + flux.norm_g(phi) / 6.0
    if string is not None:
        c = c - transform_source(string, phi) / 6.0
    mu = np.exp((n - 2) * phi) if n != 2 else None
    s = flux_divergence_matrix(grid, mu)
    w_g = grid.weights * np.exp(n * phi)
    return OperatorAssembly(grid, phi, c, s, w_g)


def _top_eigenvalues(asm: OperatorAssembly, k: int):
    """Largest-k eigenpairs of P_g, g-orthonormal, descending order."""
    npts = asm.grid.npoints
    w = asm.w_g
    if k >= npts - 2 or npts <= DENSE_CUTOFF:
        k = min(k, npts)
        sqw = np.sqrt(w)
        a = asm.s_sym.toarray() / np.outer(sqw, sqw)
        a = 0.5 * (a + a.T)
        vals, vecs = scipy.linalg.eigh(a)
        vals, vecs = vals[::-1][:k], vecs[:, ::-1][:, :k]
        psis = vecs / sqw[:, None]
    else:
        sigma = float(np.max(asm.c)) + 1.0
        vals, psis = spla.eigsh(asm.s_sym, k=k, M=sp.diags(w),
                                sigma=sigma, which="LM", maxiter=10_000)
        order = np.argsort(vals)[::-1]
        vals, psis = vals[order], psis[:, order]
    # sign convention: nonnegative mean, and psi0 everywhere positive
    for j in range(psis.shape[1]):
        s = np.dot(psis[:, j], w)
        if s < 0 or (s == 0 and psis[np.argmax(np.abs(psis[:, j])), j] < 0):
            psis[:, j] = -psis[:, j]
    return vals, psis


def spectrum(asm: OperatorAssembly, k: int) -> SpectrumReport:
    """Top-k eigenpairs of P_g under the dV_g inner product."""
    if k < 1:
        raise ValueError("need k >= 1")
    vals, psis = _top_eigenvalues(asm, k)
    asm._lambda0 = float(vals[0])
    lam0 = vals[0]
    return SpectrumReport(
        eigenvalues=vals,
        eigenfields=psis,
        lambda0_sign=int(np.sign(lam0)) if abs(lam0) >= RESONANCE_TOL else 0,
        resonant=abs(lam0) < RESONANCE_TOL)


def _linear_solve(asm: OperatorAssembly, rhs_field: np.ndarray,
                  dc: float = 0.0, x0: np.ndarray | None = None):
    """Solve (P + dc) x = rhs_field with a symmetric Krylov method.

    Uses conjugate gradients on the negated system when the shifted
    operator is negative definite, MINRES otherwise; diagonal
    preconditioning in both branches.
    """
    s = asm.s_sym if dc == 0.0 else asm.s_sym + sp.diags(asm.w_g * dc)
    b = asm.w_g * rhs_field
    diag = s.diagonal()
    m = sp.diags(1.0 / np.abs(diag))
    lam0 = asm.lambda0() + dc
    count = [0]

    def cb(_):
        count[0] += 1

    if lam0 < 0:
        x, info = spla.cg(-s, -b, M=m, rtol=SOLVE_RTOL, atol=0.0,
                          maxiter=MAX_ITER, callback=cb, x0=x0)
    else:
        x, info = spla.minres(s, b, M=m, rtol=SOLVE_RTOL,
                              maxiter=MAX_ITER, callback=cb, x0=x0)
    # polish: MINRES can stagnate slightly above the target residual
    res = b - s @ x
    rel = np.sqrt(float(np.dot(res * res, 1.0 / asm.w_g))) \
        / max(np.sqrt(float(np.dot(b * b, 1.0 / asm.w_g))), 1e-300)
    if info != 0 or rel > 1e-9:
        try:
            x = spla.spsolve(s.tocsc(), b)
        except Exception as exc:  # singular or breakdown
            raise ConvergenceError(
                f"linear solve failed (info={info}, rel residual={rel:.2e})"
            ) from exc
        res = b - s @ x
        rel = np.sqrt(float(np.dot(res * res, 1.0 / asm.w_g))) \
            / max(np.sqrt(float(np.dot(b * b, 1.0 / asm.w_g))), 1e-300)
        if rel > 1e-9:
            raise ConvergenceError(
                f"linear solve failed: relative residual {rel:.2e}")
    return x, count[0]


def solve_critical_point(asm: OperatorAssembly, g_newton: float = 1.0,
                         dc: float = 0.0,
                         x0: np.ndarray | None = None) -> CriticalPoint:
    """Solve P_g u = -1 and rescale to the fixed warped-volume constraint.

    Refuses resonant operators (|lambda0| < 1e-8) with the Fredholm
    obstruction diagnostic. ``dc`` shifts the coefficient by a constant
    (used by family scans); ``x0`` seeds the Krylov iteration (used by
    uniqueness probes).
    """
    lam0 = asm.lambda0() + dc
    if abs(lam0) < RESONANCE_TOL:
        _, psis = _top_eigenvalues(asm, 1)
        psi0 = psis[:, 0] / np.sqrt(asm.inner(psis[:, 0], psis[:, 0]))
        raise ResonanceError(lam0, asm.integral(-psi0))
    u, iters = _linear_solve(asm, -np.ones(asm.grid.npoints), dc=dc, x0=x0)
    res_field = asm.apply(u) + dc * u + 1.0
    residual = asm.norm(res_field) / asm.norm(np.ones_like(u))
    iu = asm.integral(u)
    alpha = -6.0 / (g_newton * iu)
    v = u / (g_newton * iu)
    potential = alpha / (4.0 * g_newton)
    min_u = float(np.min(u))
    positivity = "strictly-positive" if min_u > -1e-12 \
        else "nonpositive-somewhere"
    return CriticalPoint(u=u, v=v, alpha=alpha, potential=potential,
                         positivity=positivity, resonance_margin=abs(lam0),
                         min_u=min_u, residual=residual, iterations=iters)


def expansion_potential(asm: OperatorAssembly, g_newton: float,
                        k: int) -> dict:
    """Eigenfunction-expansion evaluation of the effective potential.

    1/V ~ (2/3) G_N^2 sum_i (1/lambda_i) (int psi_i dV_g)^2 over the
    retained g-orthonormal modes; also reconstructs the warp factor v.
    """
    rep = spectrum(asm, k)
    moments = np.array([asm.integral(rep.eigenfields[:, j])
                        for j in range(rep.eigenvalues.size)])
    for lam, mom in zip(rep.eigenvalues, moments):
        if abs(lam) < RESONANCE_TOL and abs(mom) > 1e-10:
            raise ResonanceError(lam, -mom)
    keep = np.abs(rep.eigenvalues) >= RESONANCE_TOL
    terms = np.where(keep, moments ** 2 / rep.eigenvalues, 0.0)
    inv_v_partial = (2.0 / 3.0) * g_newton ** 2 * np.cumsum(terms)
    inv_v = inv_v_partial[-1]
    potential = 1.0 / inv_v if inv_v != 0 else np.inf
    # u-expansion coefficients: a_i = -(1/lambda_i) int psi_i dV_g
    coeffs = np.where(keep, -moments / rep.eigenvalues, 0.0)
    u_rec = rep.eigenfields @ coeffs
    iu = asm.integral(u_rec)
    alpha = -6.0 / (g_newton * iu) if iu != 0 else np.inf
    v_rec = u_rec / (g_newton * iu) if iu != 0 else np.full_like(u_rec, np.nan)
    return {
        "eigenvalues": rep.eigenvalues,
        "moments": moments,
        "inv_potential_partial": inv_v_partial,
        "potential": potential,
        "alpha": alpha,
        "v": v_rec,
    }


def _bisect(fun, lo, hi, flo, tol):
    """Bracketed sign-change bisection; returns the midpoint at tolerance."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def family_scan(asm: OperatorAssembly, schedule, ramp: float,
                g_newton: float = 1.0) -> dict:
    """Trace lambda0, alpha, and the potential along c(t) = c + ramp*t/6.

    The ramp models a constant added to the flux energy; the principal
    eigenvalue shifts exactly linearly (verified numerically at the last
    schedule point). Zero crossings of lambda0 are bisected to 1e-6 in t,
    sign flips of alpha to 1e-4.
    """
    ts = np.asarray(schedule, dtype=float)
    if ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("schedule must be strictly increasing")
    if ramp < 0:
        raise ValueError("ramp constant must be nonnegative")
    lam0_base = asm.lambda0()

    def lam0_t(t):
        return lam0_base + ramp * t / 6.0

    # numeric verification of the constant-shift law at the endpoint
    end = asm.shifted(ramp * ts[-1] / 6.0)
    end._lambda0 = None
    shift_err = abs(end.lambda0() - lam0_t(ts[-1]))

    rows = []
    for t in ts:
        lam = lam0_t(t)
        if abs(lam) < RESONANCE_TOL:
            rows.append({"t": float(t), "lambda0": lam, "alpha": np.nan,
                         "potential": np.nan, "status": "resonant"})
            continue
        cp = solve_critical_point(asm, g_newton, dc=ramp * t / 6.0)
        rows.append({"t": float(t), "lambda0": lam, "alpha": cp.alpha,
                     "potential": cp.potential, "status": "ok"})

    crossings = []
    if ramp > 0:
        t_star = -6.0 * lam0_base / ramp
        if ts[0] < t_star < ts[-1]:
            t_loc = _bisect(lam0_t, ts[0], ts[-1], lam0_t(ts[0]), 1e-6)
            crossings.append({"quantity": "lambda0", "t": float(t_loc)})

        def alpha_at(t):
            # a resonant midpoint is itself the sign change (alpha flips
            # through the principal-eigenvalue crossing)
            try:
                return solve_critical_point(asm, g_newton,
                                            dc=ramp * t / 6.0).alpha
            except ResonanceError:
                return 0.0

        solved = [r for r in rows if r["status"] == "ok"]
        for r0, r1 in zip(solved[:-1], solved[1:]):
            if np.sign(r0["alpha"]) * np.sign(r1["alpha"]) < 0:
                t_loc = _bisect(alpha_at, r0["t"], r1["t"], r0["alpha"], 1e-4)
                crossings.append({"quantity": "alpha", "t": float(t_loc)})
    return {"trace": rows, "crossings": crossings,
            "shift_law_error": float(shift_err)}
