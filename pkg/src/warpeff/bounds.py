"""Inequality and existence-condition verifiers for the warp-factor problem.

Everything here is a quadrature evaluation over immutable inputs: the
integrated identity behind the lower-bound proof, the Jensen chain, the
admissible-set membership ledgers, the two existence checkers (positive
and non-positive background curvature), and the concentration diagnostic
for unbounded-potential sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (ManifoldGrid, GEOMETRIC, integrate, laplacian_g0,
                       grad_inner, conformal_scalar_curvature)
from .fields import FieldStrengthSet, StringSource, flux_energy, \
    transform_source
from .solver import OperatorAssembly, CriticalPoint, assemble, \
    solve_critical_point


@dataclass
class BoundEntry:
    name: str
    lhs: float
    rhs: float
    relation: str           # "<=", ">=", "=="
    margin: float
    passed: bool


@dataclass
class BoundReport:
    entries: list = field(default_factory=list)

    def add(self, name, lhs, rhs, relation, tol=0.0):
        lhs, rhs = float(lhs), float(rhs)
        if relation == "<=":
            margin = rhs - lhs
            passed = lhs <= rhs + tol
        elif relation == ">=":
            margin = lhs - rhs
            passed = lhs >= rhs - tol
        else:
            margin = -abs(lhs - rhs)
            passed = abs(lhs - rhs) <= tol
        self.entries.append(BoundEntry(name, lhs, rhs, relation,
                                       float(margin), bool(passed)))
        return self.entries[-1]

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


@dataclass
class MembershipReport:
    eta: float
    total_curvature: float
    in_s_eta: bool
    flux_minus_source: float
    in_s_tilde_eta: bool
    phi_l1_norm: float
    in_l1_ball: bool


def identity_residual(cp: CriticalPoint, asm: OperatorAssembly,
                      flux: FieldStrengthSet | None = None,
                      string: StringSource | None = None) -> BoundReport:
    """Term-by-term quadrature of the integrated division identity.

    For a positive solution u, dividing the background-frame equation by
    u and integrating by parts balances the gradient, flux and source
    integrals against (1/3) R_{g0} vol_{g0}(M). The discrete imbalance
    converges at second order for smooth data.
    """
    grid, phi, u = asm.grid, asm.phi, cp.u
    if np.min(u) <= 0:
        raise ValueError("identity requires a strictly positive solution")
    n = grid.n
    lhs = integrate(grid, grad_inner(grid, u, u) / u ** 2)
    lhs += (n - 1) * (n - 2) / 3.0 * integrate(grid,
                                               grad_inner(grid, phi, phi))
    lhs += (n - 2) * integrate(grid, grad_inner(grid, phi, u) / u)
    lhs += integrate(grid, np.exp(2.0 * phi) / u)
    if flux is not None:
        lhs += integrate(grid, flux_energy(flux, phi))
    if string is not None:
        lhs -= integrate(grid, np.exp(2.0 * (1 - string.beta) * phi)
                         * string.values) / 6.0
    rhs = grid.r_g0 * grid.volume / 3.0
    rep = BoundReport()
    scale = max(abs(lhs), abs(rhs), 1.0)
    rep.add("integrated_identity", lhs, rhs, "==", tol=0.05 * scale)
    return rep


def jensen_check(cp: CriticalPoint, asm: OperatorAssembly,
                 slack: float = 1e-12) -> BoundReport:
    """Convexity bound: int e^{n phi}/u >= A^2 / int e^{n phi} u."""
    grid, phi, u = asm.grid, asm.phi, cp.u
    if np.min(u) <= 0:
        raise ValueError("Jensen check requires a positive solution")
    area = integrate(grid, np.ones(grid.npoints), phi)
    lhs = integrate(grid, np.exp(grid.n * phi) / u)
    rhs = area ** 2 / integrate(grid, u, phi)
    rep = BoundReport()
    rep.add("jensen", lhs, rhs, ">=", tol=slack * max(abs(lhs), abs(rhs)))
    return rep


def membership(grid: ManifoldGrid, phi: np.ndarray, eta: float,
               flux: FieldStrengthSet | None = None,
               string: StringSource | None = None) -> MembershipReport:
    """Admissible-set ledgers: curvature budget, flux-source balance, L1 ball."""
    if grid.mode != GEOMETRIC:
        raise ValueError("membership curvature entry needs a geometric grid")
    phi = grid.check_field(phi)
    r_g = conformal_scalar_curvature(grid, phi)
    total_r = integrate(grid, r_g, phi)
    fs = np.zeros(grid.npoints)
    if flux is not None:
        fs += flux.norm_g(phi)
    if string is not None:
        fs -= transform_source(string, phi)
    fs_int = integrate(grid, fs, phi)
    l1 = integrate(grid, np.abs(phi))
    return MembershipReport(
        eta=float(eta),
        total_curvature=total_r,
        in_s_eta=bool(total_r <= eta),
        flux_minus_source=fs_int,
        in_s_tilde_eta=bool(total_r <= eta and fs_int >= -eta),
        phi_l1_norm=l1,
        in_l1_ball=bool(l1 <= eta))


def _c0(f: np.ndarray) -> float:
    return float(np.max(np.abs(f)))


def existence_checker_positive(grid: ManifoldGrid, phi: np.ndarray,
                               epsilon: float,
                               flux: FieldStrengthSet | None = None,
                               string: StringSource | None = None,
                               g_newton: float = 1.0,
                               solve: bool = True) -> BoundReport:
    """Sufficient conditions for positive background curvature.

    Checks the five smallness conditions against the threshold
    K(eps) = (R_{g0} - 3 eps) / (3 n^n); when they pass and a solve is
    requested, also asserts the a-priori sup bound on u and the lower
    bound on the potential.
    """
    phi = grid.check_field(phi)
    n, r0 = grid.n, grid.r_g0
    if r0 <= 0:
        raise ValueError("positive-curvature checker needs R_g0 > 0")
    if not 0 <= epsilon < r0 / 3.0:
        raise ValueError("epsilon must satisfy 0 <= eps < R_g0/3")
    if string is not None and abs(string.beta - round(string.beta)) > 1e-12:
        raise ValueError("existence checkers assume integer beta")
    k = (r0 - 3.0 * epsilon) / (3.0 * n ** n)
    rep = BoundReport()
    t_sup = _c0(string.values) if string is not None else 0.0
    rep.add("source_c0", t_sup, k, "<=")
    f_sup = max((_c0(v) for _, v in flux.entries), default=0.0) \
        if flux is not None else 0.0
    rep.add("flux_c0", f_sup, k, "<=")
    rep.add("lap_phi_c0", _c0(laplacian_g0(grid, phi)), k, "<=")
    rep.add("grad_phi_sq_c0", _c0(grad_inner(grid, phi, phi)), k, "<=")
    e2 = np.exp(2.0 * phi)
    rep.add("conformal_range_low", 1.0 / n, float(np.min(e2)), "<=")
    rep.add("conformal_range_high", float(np.max(e2)), float(n ** n), "<=")
    if solve and rep.all_pass:
        asm = assemble(grid, phi, flux=flux, string=string)
        cp = solve_critical_point(asm, g_newton)
        rep.add("solution_positive", 0.0, cp.min_u, "<=")
        if epsilon > 0:
            rep.add("u_sup_bound", _c0(cp.u), n ** n / epsilon, "<=")
        area = integrate(grid, np.ones(grid.npoints), phi)
        floor = -3.0 * n * (n + 3) * r0 / (2.0 * area * g_newton ** 2)
        rep.add("potential_floor", cp.potential, floor, ">=")
    return rep


def existence_checker_nonpositive(grid: ManifoldGrid, phi: np.ndarray,
                                  epsilon: float, gamma_cap: float,
                                  flux: FieldStrengthSet | None = None,
                                  string: StringSource | None = None,
                                  g_newton: float = 1.0,
                                  solve: bool = True) -> BoundReport:
    """Sufficient conditions for non-positive background curvature.

    Requires a dominating source: H = (1/(6 n^|1-beta|)) (T - n^n sum|F|^2)
    must exceed K = n^2 Gamma/3 + |R_{g0}|/3 + eps everywhere.
    """
    phi = grid.check_field(phi)
    n, r0 = grid.n, grid.r_g0
    if r0 > 0:
        raise ValueError("non-positive checker needs R_g0 <= 0")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if gamma_cap <= 1:
        raise ValueError("Gamma must exceed 1")
    beta = string.beta if string is not None else 0.0
    if abs(beta - round(beta)) > 1e-12:
        raise ValueError("existence checkers assume integer beta")
    k = n ** 2 * gamma_cap / 3.0 + abs(r0) / 3.0 + epsilon
    rep = BoundReport()
    rep.add("lap_phi_c0", _c0(laplacian_g0(grid, phi)), gamma_cap, "<=")
    rep.add("grad_phi_sq_c0", _c0(grad_inner(grid, phi, phi)), gamma_cap,
            "<=")
    e2 = np.exp(2.0 * phi)
    rep.add("conformal_range_low", 1.0 / n, float(np.min(e2)), "<=")
    rep.add("conformal_range_high", float(np.max(e2)), float(n), "<=")
    fsum = np.zeros(grid.npoints)
    if flux is not None:
        for _, v in flux.entries:
            fsum += v
    t0 = string.values if string is not None else np.zeros(grid.npoints)
    h = (t0 - n ** n * fsum) / (6.0 * n ** abs(1.0 - beta))
    rep.add("source_dominance", k, float(np.min(h)), "<=")
    if solve and rep.all_pass:
        asm = assemble(grid, phi, flux=flux, string=string)
        cp = solve_critical_point(asm, g_newton)
        rep.add("solution_positive", 0.0, cp.min_u, "<=")
        rep.add("u_sup_bound", _c0(cp.u), n / epsilon, "<=")
        area = integrate(grid, np.ones(grid.npoints), phi)
        floor = -(n ** (1.0 + abs(1.0 - beta))
                  * _c0(t0 - fsum / n ** n)
                  / (2.0 * g_newton ** 2 * area))
        rep.add("potential_floor", cp.potential, floor, ">=")
    return rep


def concentration_diagnostic(grid: ManifoldGrid, phi: np.ndarray,
                             s_list, low_ratio: float = 0.1,
                             high_ratio: float = 10.0) -> dict:
    """Delta-like concentration probe via int e^{s phi} across exponents.

    Flags concentration when sub-dimension exponents collapse while
    super-dimension exponents blow up relative to the phi = 0 baseline.
    """
    phi = grid.check_field(phi)
    s_arr = sorted(float(s) for s in s_list)
    if not (min(s_arr) < grid.n < max(s_arr)):
        raise ValueError("s-list must span values below and above n")
    baseline = grid.volume
    values = {s: integrate(grid, np.exp(s * phi)) for s in s_arr}
    low = [s for s in s_arr if s < grid.n]
    high = [s for s in s_arr if s > grid.n]
    collapsed = all(values[s] < low_ratio * baseline for s in low)
    blown = all(values[s] > high_ratio * baseline for s in high)
    return {
        "baseline": baseline,
        "integrals": values,
        "verdict": "delta-like" if (collapsed and blown) else "none",
    }


def negative_curvature_bound(asm: OperatorAssembly,
                             string: StringSource | None = None
                             ) -> BoundReport:
    """Curvature floor implied by existence of a positive solution.

    R_{g0} >= - int e^{2(1-beta) phi} T dV_{g0} / (2 vol_{g0}(M)).
    """
    grid, phi = asm.grid, asm.phi
    if string is not None:
        src = integrate(grid, np.exp(2.0 * (1 - string.beta) * phi)
                        * string.values)
    else:
        src = 0.0
    rep = BoundReport()
    rep.add("curvature_floor", grid.r_g0, -src / (2.0 * grid.volume), ">=")
    return rep
