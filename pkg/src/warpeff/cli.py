"""Config-driven command line front end.

Subcommands: solve, spectrum, sweep, scan, verify, example, nonlinear.
Each reads a scenario config, dispatches to the library, and emits
delimited records (CSV or JSON); trace-producing commands also write a
long-format trace table and a rendered figure next to the output.
Exit codes: 0 all checks pass, 2 a bound/verification failed, 1 an
operational error occurred.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds, families, nonlinear
from .config import ConfigError, ScenarioConfig, load_scenario, emit_config
from .fields import FieldStrengthSet, StringSource, gaussian_source_field
from .geometry import GridError, build_grid, integrate, \
    conformal_scalar_curvature, normalize_volume
from .report import ResultRecord, emit
from .solver import ResonanceError, ConvergenceError, assemble, \
    solve_critical_point, spectrum, family_scan

COMMANDS = ("solve", "spectrum", "sweep", "scan", "verify", "example",
            "nonlinear")


def _grid_from(config: ScenarioConfig):
    man = config["manifold"]
    kwargs = {}
    if man["kind"] == "torus" and man.get("lengths_coordinate_units"):
        kwargs["lengths"] = man["lengths_coordinate_units"]
    if man["kind"] == "sphere2":
        kwargs["radius"] = float(man.get("radius_coordinate_units", 1.0))
    if man.get("mode", "geometric") == "synthetic":
        kwargs["mode"] = "synthetic"
        kwargs["synthetic_r0"] = float(
            man.get("synthetic_r0_inverse_length_sq", 0.0))
    res = man["resolution"]
    if man["kind"] == "sphere2" and np.isscalar(res):
        res = (int(res), 2 * int(res))
    return build_grid(man["kind"], int(man["n"]), res, **kwargs)


def _phi_from(config: ScenarioConfig, grid, seed_override=None):
    conf = config["conformal"]
    source = conf["source"]
    if source == "zero":
        phi = np.zeros(grid.npoints)
    elif source == "constant":
        phi = np.full(grid.npoints, float(conf.get("constant_value", 0.0)))
    elif source == "random":
        rnd = conf["random"]
        seed = seed_override if seed_override is not None else rnd["seed"]
        phi = families.random_phi(grid, float(rnd.get("amplitude", 0.3)),
                                  int(rnd.get("smoothness", 2)), int(seed))
    else:
        phi = np.loadtxt(conf["file"]).ravel()
        phi = grid.check_field(phi)
    vt = conf.get("volume_target")
    if vt is not None:
        phi = normalize_volume(grid, phi, float(vt)).phi
    return phi


def _sources_from(config: ScenarioConfig, grid):
    src = config.get("sources") or {}
    flux = None
    entries = src.get("flux") or []
    if entries:
        flux = FieldStrengthSet(grid, [
            (int(e["degree"]), np.full(grid.npoints, float(e["value"])))
            for e in entries])
    string = None
    st = src.get("string")
    if st:
        beta = float(st.get("beta", 0.0))
        if st.get("kind", "constant") == "gaussian":
            center = st.get("center") or ([np.pi / 2, np.pi]
                                          if grid.kind == "sphere2"
                                          else [L / 2 for L in grid.lengths])
            string = gaussian_source_field(
                grid, center, float(st["sigma_coordinate_units"]), beta)
            if st.get("amplitude") is not None:
                string.values = string.values * float(st["amplitude"])
        else:
            string = StringSource(
                grid, np.full(grid.npoints, float(st.get("value", 0.0))),
                beta, kind="smooth")
    return flux, string


def _record(config: ScenarioConfig, command: str) -> ResultRecord:
    return ResultRecord(scenario_id=config.scenario_id, command=command,
                        scenario_hash=config.scenario_hash)


def _cmd_solve(config: ScenarioConfig) -> list:
    rec = _record(config, "solve")
    grid = _grid_from(config)
    phi = _phi_from(config, grid)
    flux, string = _sources_from(config, grid)
    asm = assemble(grid, phi, flux=flux, string=string)
    g_newton = float(config.get("physics", "g_newton", default=1.0))
    cp = solve_critical_point(asm, g_newton)
    positive = cp.min_u > 0
    rec.add("potential", cp.potential)
    rec.add("alpha", cp.alpha)
    rec.add("lambda0", asm.lambda0())
    rec.add("min_u", cp.min_u, status="pass" if positive else "fail")
    rec.add("residual", cp.residual)
    return [rec]


def _cmd_spectrum(config: ScenarioConfig) -> list:
    rec = _record(config, "spectrum")
    grid = _grid_from(config)
    phi = _phi_from(config, grid)
    flux, string = _sources_from(config, grid)
    asm = assemble(grid, phi, flux=flux, string=string)
    k = int(config.get("spectrum", "k", default=6))
    rep = spectrum(asm, k)
    for i, lam in enumerate(rep.eigenvalues):
        rec.add(f"lambda{i}", float(lam))
    rec.add("lambda0_sign", rep.lambda0_sign)
    rec.add("resonant", rep.resonant,
            status="fail" if rep.resonant else "pass")
    return [rec]


def _cmd_verify(config: ScenarioConfig) -> list:
    rec = _record(config, "verify")
    grid = _grid_from(config)
    phi = _phi_from(config, grid)
    flux, string = _sources_from(config, grid)
    ver = config.get("verify", default={}) or {}
    g_newton = float(config.get("physics", "g_newton", default=1.0))
    asm = assemble(grid, phi, flux=flux, string=string)
    expect_resonance = bool(ver.get("expect_resonance", False))
    try:
        cp = solve_critical_point(asm, g_newton)
    except ResonanceError as exc:
        status = "pass" if expect_resonance else "fail"
        rec.add("resonant_lambda0", exc.lambda0, status=status)
        rec.add("kernel_obstruction", exc.obstruction, status=status)
        return [rec]
    if expect_resonance:
        rec.add("resonance_expected_but_absent", asm.lambda0(),
                status="fail")
    rec.add("potential", cp.potential)
    if cp.min_u > 0:
        for rep in (bounds.identity_residual(cp, asm, flux, string),
                    bounds.jensen_check(cp, asm)):
            for e in rep.entries:
                rec.add(e.name, e.lhs, margin=e.margin,
                        status="pass" if e.passed else "fail")
    else:
        rec.add("min_u", cp.min_u, status="fail")
    if grid.mode == "geometric":
        r_g = conformal_scalar_curvature(grid, phi)
        total = integrate(grid, r_g, phi)
        rec.add("total_curvature", total)
        eta = ver.get("eta")
        if eta is not None:
            mem = bounds.membership(grid, phi, float(eta), flux, string)
            rec.add("in_s_eta", mem.in_s_eta, margin=float(eta) - total,
                    status="pass" if mem.in_s_eta else "fail")
            rec.add("flux_minus_source", mem.flux_minus_source)
    eps = ver.get("epsilon")
    if eps is not None and grid.r_g0 > 0:
        rep = bounds.existence_checker_positive(
            grid, phi, float(eps), flux, string, g_newton)
        for e in rep.entries:
            rec.add("pos_" + e.name, e.lhs, margin=e.margin,
                    status="pass" if e.passed else "fail")
    gamma_cap = ver.get("gamma_cap")
    if gamma_cap is not None and grid.r_g0 <= 0:
        rep = bounds.existence_checker_nonpositive(
            grid, phi, float(eps if eps is not None else 0.1),
            float(gamma_cap), flux, string, g_newton)
        for e in rep.entries:
            rec.add("nonpos_" + e.name, e.lhs, margin=e.margin,
                    status="pass" if e.passed else "fail")
    s_list = ver.get("s_list")
    if s_list:
        diag = bounds.concentration_diagnostic(grid, phi, s_list)
        rec.add("concentration", diag["verdict"])
    return [rec]


def _cmd_scan(config: ScenarioConfig) -> list:
    rec = _record(config, "scan")
    grid = _grid_from(config)
    phi = _phi_from(config, grid)
    flux, string = _sources_from(config, grid)
    sc = config.get("scan", default={}) or {}
    asm = assemble(grid, phi, flux=flux, string=string)
    g_newton = float(config.get("physics", "g_newton", default=1.0))
    ts = np.linspace(float(sc.get("t_start", 0.0)),
                     float(sc.get("t_stop", 8.0)),
                     int(sc.get("t_num", 41)))
    out = family_scan(asm, ts, float(sc.get("ramp_value", 1.0)), g_newton)
    for row in out["trace"]:
        rec.add_trace(row["t"], "lambda0", row["lambda0"])
        if row["status"] == "ok":
            rec.add_trace(row["t"], "alpha", row["alpha"])
            rec.add_trace(row["t"], "potential", row["potential"])
    for cross in out["crossings"]:
        rec.add(f"crossing_{cross['quantity']}_t", cross["t"])
    rec.add("shift_law_error", out["shift_law_error"])
    return [rec]


def _cmd_sweep(config: ScenarioConfig, workers: int = 1) -> list:
    sw = config.get("sweep", default={}) or {}
    count = int(sw.get("count", 10))
    base_seed = int(sw.get("base_seed", 0))
    grid = _grid_from(config)
    flux, string = _sources_from(config, grid)
    g_newton = float(config.get("physics", "g_newton", default=1.0))
    amplitude = float(sw.get("amplitude", 0.3))
    smoothness = int(sw.get("smoothness", 2))

    def one(seed):
        rec = ResultRecord(
            scenario_id=f"{config.scenario_id}-seed{seed:05d}",
            command="sweep", scenario_hash=config.scenario_hash)
        try:
            phi = families.random_phi(grid, amplitude, smoothness, seed)
            asm = assemble(grid, phi, flux=flux, string=string)
            cp = solve_critical_point(asm, g_newton)
            rec.add("potential", cp.potential)
            rec.add("alpha", cp.alpha)
            rec.add("min_u", cp.min_u,
                    status="pass" if cp.min_u > 0 else "fail")
            if cp.min_u > 0:
                jen = bounds.jensen_check(cp, asm)["jensen"]
                rec.add("jensen_margin", jen.margin,
                        status="pass" if jen.passed else "fail")
        except (ResonanceError, ConvergenceError) as exc:
            rec.status = "error"
            rec.add("error", type(exc).__name__, status="error")
        return rec

    seeds = [base_seed + i for i in range(count)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(one, seeds))
    else:
        recs = [one(s) for s in seeds]
    return recs


def _cmd_example(config: ScenarioConfig) -> list:
    rec = _record(config, "example")
    ex = config.get("example", default={}) or {}
    name = ex.get("name", "gamma")
    n = int(config.get("manifold", "n", default=2))
    if name == "gamma":
        gamma = float(ex.get("gamma", 2.0))
        A = float(ex.get("volume_target", np.pi))
        out = families.gamma_family(n, gamma, A,
                                    rho=ex.get("radius_probe"))
        fam = out["family"]
        rec.add("a", fam.a)
        rec.add("curvature_origin", out["curvature_origin"])
        rec.add("volume_error", out["volume_error"],
                status="pass" if out["volume_error"] < 1e-6 else "fail")
        if "curvature_sup" in out:
            rec.add("curvature_sup", out["curvature_sup"])
        rr = np.linspace(0.0, 5.0 * fam.a, 101)
        for r, val in zip(rr, fam.scalar_curvature(rr)):
            rec.add_trace(r, "scalar_curvature", val)
    elif name == "bubble":
        eps = ex.get("epsilons") or [1.0, 0.5, 0.25]
        out = families.bubble_family(max(n, 3), eps)
        rec.add("curvature_max_dev", out["curvature_max_dev"],
                status="pass" if out["curvature_max_dev"] < 1e-6
                else "fail")
        rec.add("volume_spread", out["volume_spread"],
                status="pass" if out["volume_spread"] < 1e-6 else "fail")
        for e, v in zip(out["epsilons"], out["volumes"]):
            rec.add(f"volume_eps_{e:g}", v)
        for e, prof in out["profiles"].items():
            for r, val in zip(prof.r[::10], prof.values[::10]):
                rec.add_trace(r, f"u_eps_{e:g}", val)
    elif name == "gaussian_rescale":
        sigma = float(ex.get("sigma_coordinate_units", 0.3))
        lam = float(ex.get("rescale_lambda", 2.0))
        out = families.gaussian_rescale_check(n, sigma, lam)
        rec.add("base_integral", out["base_integral"])
        rec.add("scaled_integral", out["scaled_integral"])
        rec.add("difference", out["difference"],
                status="pass" if out["difference"] < 1e-8 else "fail")
    else:
        raise ConfigError(f"example.name: unknown example {name!r}")
    return [rec]


def _cmd_nonlinear(config: ScenarioConfig) -> list:
    rec = _record(config, "nonlinear")
    grid = _grid_from(config)
    phi = _phi_from(config, grid)
    flux, string = _sources_from(config, grid)
    nlc = config.get("nonlinear", default={}) or {}
    d = int(nlc.get("d", config.get("physics", "d", default=6)))
    coupling = float(nlc.get("coupling", 1.0))
    f_const = nlc.get("f_constant")
    f_g = (np.full(grid.npoints, float(f_const))
           if f_const is not None else None)
    prob = nonlinear.build_problem(grid, phi, d, coupling,
                                   flux=flux, string=string, f_g=f_g)
    v, trace = nonlinear.monotone_solve(prob)
    rec.add("max_v", float(np.max(v)))
    rec.add("min_v", float(np.min(v)))
    rec.add("iterations", trace.iterations)
    rec.add("final_residual", trace.final_residual)
    rec.add("monotone", trace.monotone,
            status="pass" if trace.monotone else "fail")
    sign = nonlinear.k_sign_identity(prob, v)
    rec.add("lambda1", sign["lambda1"])
    if sign["consistent"] is not None:
        rec.add("k_sign_consistent", sign["consistent"],
                status="pass" if sign["consistent"] else "fail")
    if np.min(v) > 0:
        pot = nonlinear.effective_potential_d(
            prob, v, float(config.get("physics", "g_newton", default=1.0)))
        rec.add("potential", pot["potential"])
        rec.add("jensen_floor", pot["jensen_floor"],
                status="pass" if pot["potential"] >= pot["jensen_floor"]
                - 1e-12 * abs(pot["jensen_floor"]) else "fail")
    for i, norm in enumerate(trace.norms):
        rec.add_trace(i, "sup_v", norm)
    return [rec]


def run(config: ScenarioConfig, command: str, workers: int = 1,
        seed: int | None = None) -> list:
    """Dispatch one scenario; returns the result records."""
    if seed is not None and config.get("conformal", "source") == "random":
        config.tree["conformal"].setdefault("random", {})["seed"] = seed
    if seed is not None and config.get("sweep") is not None:
        config.tree["sweep"]["base_seed"] = seed
    start = time.monotonic()
    if command == "solve":
        recs = _cmd_solve(config)
    elif command == "spectrum":
        recs = _cmd_spectrum(config)
    elif command == "verify":
        recs = _cmd_verify(config)
    elif command == "scan":
        recs = _cmd_scan(config)
    elif command == "sweep":
        recs = _cmd_sweep(config, workers)
    elif command == "example":
        recs = _cmd_example(config)
    elif command == "nonlinear":
        recs = _cmd_nonlinear(config)
    else:
        raise ConfigError(f"unknown command {command!r}")
    elapsed = time.monotonic() - start
    for rec in recs:
        rec.wall_time = elapsed / len(recs)
    return recs


def exit_code(records) -> int:
    if any(rec.status == "error" for rec in records):
        return 1
    if any(rec.status == "fail" for rec in records):
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warpeff",
        description="Warp-factor effective potential toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="scenario config file (YAML)")
        p.add_argument("--out", default=None,
                       help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--workers", type=int, default=1,
                       help="concurrent sweep workers")
    ec = sub.add_parser("emit-config",
                        help="normalize a config and print it back")
    ec.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.command == "emit-config":
        sys.stdout.write(emit_config(config))
        return 0
    try:
        records = run(config, args.command, workers=max(args.workers, 1),
                      seed=args.seed)
    except (ConfigError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ResonanceError, ConvergenceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        emit(records, args.format, args.out)
    else:
        from .report import render_csv, render_json
        text = (render_csv(records) if args.format == "csv"
                else render_json(records))
        sys.stdout.write(text)
    return exit_code(records)


if __name__ == "__main__":
    sys.exit(main())
