"""Semilinear warp equation for d > 4: monotone iteration and diagnostics.

The critical-point equation reduces to Delta_g v + f v = K v^q with
q = 1 - 4/d in (0, 1). Solutions are produced by monotone descent from a
constant super-solution; each sweep solves a shifted definite linear
problem. The sign of K must be opposite to the principal eigenvalue of
Delta_g + f, which is checked independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import ManifoldGrid, _scalar_curvature
from .fields import FieldStrengthSet, StringSource, transform_source
from .solver import (OperatorAssembly, ConvergenceError, _top_eigenvalues,
                     RESONANCE_TOL)

UPDATE_TOL = 1e-10
RESIDUAL_TOL = 1e-8
MAX_SWEEPS = 10_000


@dataclass
class NonlinearProblem:
    grid: ManifoldGrid
    d: int
    f_g: np.ndarray
    K: float
    phi: np.ndarray
    s_flux: sp.csr_matrix
    w_g: np.ndarray

    @property
    def q(self) -> float:
        return 1.0 - 4.0 / self.d

    def rescale_factor(self, v: np.ndarray, g_newton: float) -> float:
        """Constraint rescale a: v -> a v meets the warped-volume condition."""
        iv = float(np.dot(v ** (2.0 - 4.0 / self.d), self.w_g))
        return (1.0 / (g_newton * iv)) ** (self.d / (2.0 * self.d - 4.0))


@dataclass
class IterationTrace:
    norms: list
    direction: str
    final_residual: float
    iterations: int
    monotone: bool


def build_problem(grid: ManifoldGrid, phi: np.ndarray, d: int, K: float,
                  flux: FieldStrengthSet | None = None,
                  string: StringSource | None = None,
                  f_g: np.ndarray | None = None) -> NonlinearProblem:
    """Assemble the d > 4 problem data.

    f_g defaults to -(1/(2(d-1))) (d/2 R_g + T^(d)) with
    T^(d) = -(d/2) F_g + T^g; pass f_g explicitly to override (oracle
    cases).
    """
    if d <= 4:
        raise ValueError("only d > 4 is supported (d = 4 is the linear "
                         "problem; d < 4 changes the exponent sign)")
    if K == 0:
        raise ValueError("K must be nonzero (K = 0 is the linear problem)")
    phi = grid.check_field(phi)
    if f_g is None:
        r_g = _scalar_curvature(grid, phi, grid.r_g0)
        t_d = np.zeros(grid.npoints)
        if flux is not None:
            t_d -= (d / 2.0) * flux.norm_g(phi)
        if string is not None:
            t_d += transform_source(string, phi)
        f_g = -(d / 2.0 * r_g + t_d) / (2.0 * (d - 1))
    else:
        f_g = grid.check_field(f_g)
    n = grid.n
    from .geometry import flux_divergence_matrix
    mu = np.exp((n - 2) * phi) if n != 2 else None
    s = flux_divergence_matrix(grid, mu)
    w_g = grid.weights * np.exp(n * phi)
    return NonlinearProblem(grid, int(d), f_g, float(K), phi, s, w_g)


def monotone_solve(prob: NonlinearProblem):
    """Monotone descent from the constant super-solution.

    For K > 0 any smooth f_g is admissible (v may degenerate to 0 when
    f_g <= 0 everywhere); K < 0 requires f_g < 0 pointwise, in which case
    the solution is strictly positive and bounded below by the matching
    constant sub-solution.
    """
    f, K, q, d = prob.f_g, prob.K, prob.q, prob.d
    if K < 0:
        if np.max(f) >= 0:
            raise ValueError(
                "K < 0 requires f_g < 0 everywhere (the integral sign "
                "condition K * int v^{1-4/d} <= 0 cannot hold otherwise)")
        v_plus = (abs(K) / np.min(np.abs(f))) ** (d / 4.0)
        v_minus = (abs(K) / np.max(np.abs(f))) ** (d / 4.0)
    else:
        fmax = float(np.max(np.abs(f)))
        if fmax == 0:
            raise ValueError("f_g vanishes identically; only v = 0 solves")
        v_plus = (K / fmax) ** (d / 4.0)
        v_minus = 0.0
    # shift making each linear sub-solve definite and the map monotone
    m = max(0.0, float(np.max(f))) + 1.0
    if K < 0 and v_minus > 0:
        m += abs(K) * q * v_minus ** (q - 1.0)
    s_lin = prob.s_flux - sp.diags(prob.w_g * m)   # symmetric, negative def.
    precond = sp.diags(1.0 / np.abs(s_lin.diagonal()))

    v = np.full(prob.grid.npoints, v_plus)
    norms = [float(np.max(v))]
    monotone = True
    for it in range(1, MAX_SWEEPS + 1):
        rhs = prob.w_g * (K * np.maximum(v, 0.0) ** q - f * v - m * v)
        x, info = spla.cg(-s_lin, -rhs, x0=v, M=precond, rtol=1e-12,
                          atol=0.0, maxiter=50_000)
        if info != 0:
            raise ConvergenceError(f"inner linear solve failed at sweep {it}")
        if np.max(x - v) > 1e-12 * max(1.0, v_plus):
            monotone = False
        update = float(np.max(np.abs(x - v))) / max(1.0, float(np.max(x)))
        v = x
        norms.append(float(np.max(v)))
        if update < UPDATE_TOL:
            break
    else:
        raise ConvergenceError("monotone iteration did not converge")
    v = np.maximum(v, 0.0)
    res = (prob.s_flux @ v) / prob.w_g + f * v - K * v ** q
    wnorm = np.sqrt(float(np.dot(res * res, prob.w_g)))
    scale = max(np.sqrt(float(np.dot((K * v ** q) ** 2, prob.w_g))), 1e-300)
    final = wnorm / scale
    if final > RESIDUAL_TOL:
        raise ConvergenceError(
            f"converged iterate has residual {final:.2e}")
    trace = IterationTrace(norms=norms, direction="descending",
                           final_residual=final, iterations=it,
                           monotone=monotone)
    return v, trace


def k_sign_identity(prob: NonlinearProblem, v: np.ndarray) -> dict:
    """Principal-eigenvalue sign check for L_g = Delta_g + f_g.

    Convention L_g phi1 = -lambda1 phi1 with phi1 > 0; a nontrivial
    nonnegative solution forces sign(K) = -sign(lambda1). Also evaluates
    the integral identity int phi1 L_g v = K int phi1 v^q.
    """
    v = prob.grid.check_field(v)
    asm = OperatorAssembly(prob.grid, prob.phi, prob.f_g, prob.s_flux,
                           prob.w_g)
    vals, psis = _top_eigenvalues(asm, 1)
    lam1 = -float(vals[0])        # L phi1 = -lam1 phi1
    phi1 = psis[:, 0]
    if abs(lam1) < RESONANCE_TOL:
        return {"lambda1": lam1, "consistent": None,
                "identity_lhs": np.nan, "identity_rhs": np.nan,
                "status": "indeterminate"}
    lgv = (prob.s_flux @ v) / prob.w_g + prob.f_g * v
    lhs = float(np.dot(phi1 * lgv, prob.w_g))
    rhs = prob.K * float(np.dot(phi1 * np.maximum(v, 0.0) ** prob.q,
                                prob.w_g))
    return {
        "lambda1": lam1,
        "consistent": bool(np.sign(prob.K) == -np.sign(lam1)),
        "identity_lhs": lhs,
        "identity_rhs": rhs,
        "status": "ok",
    }


def effective_potential_d(prob: NonlinearProblem, u: np.ndarray,
                          g_newton: float = 1.0) -> dict:
    """General-d potential at a positive critical point, alpha < 0 branch.

    V = -C / (int w^{d/2-1} dV_g)^{2/(d-2)} with w = u^{4/d} and
    C = (d-2)/(2 d G_N) * G_N^{-2/(d-2)}; the Jensen-chain floor
    -C vol^{-(1+2/(d-2))} int (1/w) dV_g is reported alongside.
    """
    u = prob.grid.check_field(u)
    if np.min(u) <= 0:
        raise ValueError("potential evaluation needs u > 0")
    d = prob.d
    w = u ** (4.0 / d)
    iw = float(np.dot(w ** (d / 2.0 - 1.0), prob.w_g))
    if iw <= 0:
        raise ValueError("nonpositive volume integral")
    c_const = (d - 2.0) / (2.0 * d * g_newton) * g_newton ** (-2.0 / (d - 2))
    potential = -c_const / iw ** (2.0 / (d - 2.0))
    vol = float(np.sum(prob.w_g))
    inv_w = float(np.dot(1.0 / w, prob.w_g))
    floor = -c_const * inv_w / vol ** (1.0 + 2.0 / (d - 2.0))
    return {"potential": potential, "jensen_floor": floor,
            "volume_integral": iw}
