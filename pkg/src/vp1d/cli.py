"""Batch entry points: run solves, verification suites, and studies.

Subcommands (all driven by a flat JSON config file):

    run             solve and export artifacts
    verify          run the bound-verification suite against artifacts
    converge-study  solve + oracle across a resolution ladder
    extend          continue a finished run by `delta`

Exit codes: 0 success, 1 verification failures, 2 bad config or usage,
3 non-convergence / refused continuation, 4 I/O failure.  The --threads
flag only changes wall time; artifacts are byte-identical across thread
counts.
"""
import argparse
import json
import math
import os
import sys

import numba
import numpy as np

from . import diagnostics, output
from .errors import (ContinuationRefused, IntegrationFailure, InvalidParameter,
                     NonConvergence, SolverError)
from .norms import WeightedProfile
from .oracle import OracleConfig, splitting_solve
from .picard import extend, fit_contraction, solve

DEFAULTS = {
    "W": 1.0, "A_F": 1.0, "A_g": 0.05, "p": 2.0,
    "L": 20.0, "Nx": 401, "Vmax": 4.0, "Nv": 129,
    "T_end": 0.5, "Nt": 51, "substeps": 4,
    "tol": 1e-10, "max_iters": 25, "norm_cap": None,
    "tail_mode": "powerlaw", "out_dir": "out",
    "delta": None, "resolutions": None,
    "lemma_samples": 10000, "probe_count": 24,
}


def load_config(path: str) -> dict:
    with open(path) as fh:
        user = json.load(fh)
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
    cfg = dict(DEFAULTS)
    cfg.update(user)
    return cfg


def validate_config(cfg: dict) -> list:
    """Collect every precondition violation before any computation."""
    errs = []

    def check(cond, msg):
        if not cond:
            errs.append(msg)

    check(cfg["W"] > 0, f"W must be positive, got {cfg['W']}")
    check(cfg["A_F"] > 0, f"A_F must be positive, got {cfg['A_F']}")
    check(cfg["p"] > 1, f"p must exceed 1, got {cfg['p']}")
    check(cfg["A_g"] <= cfg["A_F"],
          f"builtin shape needs A_g <= A_F, got A_g={cfg['A_g']}")
    check(cfg["L"] > 0, f"L must be positive, got {cfg['L']}")
    check(cfg["Vmax"] > 0, f"Vmax must be positive, got {cfg['Vmax']}")
    check(cfg["Vmax"] >= cfg["W"], "Vmax must cover the background support W")
    check(cfg["T_end"] > 0, f"T_end must be positive, got {cfg['T_end']}")
    for key in ("Nx", "Nv"):
        check(isinstance(cfg[key], int) and cfg[key] >= 3 and cfg[key] % 2 == 1,
              f"{key} must be an odd integer >= 3, got {cfg[key]}")
    check(isinstance(cfg["Nt"], int) and cfg["Nt"] >= 2,
          f"Nt must be an integer >= 2, got {cfg['Nt']}")
    check(isinstance(cfg["substeps"], int) and cfg["substeps"] >= 1,
          f"substeps must be an integer >= 1, got {cfg['substeps']}")
    check(cfg["tol"] > 0, f"tol must be positive, got {cfg['tol']}")
    check(isinstance(cfg["max_iters"], int) and cfg["max_iters"] >= 1,
          f"max_iters must be an integer >= 1, got {cfg['max_iters']}")
    check(cfg["tail_mode"] in ("powerlaw", "zero"),
          f"tail_mode must be 'powerlaw' or 'zero', got {cfg['tail_mode']}")
    if cfg["norm_cap"] is not None:
        check(cfg["norm_cap"] >= 0, "norm_cap must be nonnegative")
    if cfg["delta"] is not None:
        check(cfg["delta"] > 0, f"delta must be positive, got {cfg['delta']}")
    if cfg["resolutions"] is not None:
        check(isinstance(cfg["resolutions"], list),
              "resolutions must be a list of [Nx, Nv, Nt] triples")
    check(isinstance(cfg["lemma_samples"], int) and cfg["lemma_samples"] >= 10,
          "lemma_samples must be an integer >= 10")
    check(isinstance(cfg["probe_count"], int) and cfg["probe_count"] >= 8,
          "probe_count must be an integer >= 8")
    return errs


def _norm_cap(cfg):
    return math.inf if cfg["norm_cap"] is None else float(cfg["norm_cap"])


def _solve_from_config(cfg):
    grid = output.grid_from_config(cfg)
    data = output.data_from_config(cfg, grid)
    return data, solve(data, grid, tol=cfg["tol"], max_iters=cfg["max_iters"],
                       substeps=cfg["substeps"], tail_mode=cfg["tail_mode"])


def cmd_run(cfg: dict) -> int:
    out_dir = cfg["out_dir"]
    try:
        data, (sol, trace) = _solve_from_config(cfg)
    except NonConvergence as exc:
        print(f"run: {exc}", file=sys.stderr)
        output.write_run(out_dir, cfg, exc.history, exc.trace)
        print(f"run: partial artifacts written to {out_dir}")
        return 3
    output.write_run(out_dir, cfg, sol, trace)
    print(f"run: converged in {trace.iterations} sweeps; artifacts in {out_dir}")
    return 0


def _verify_checks(cfg, data, sol):
    """All gated verification checks; returns (reports, all_passed)."""
    grid = sol.grid
    reports = {}

    # field/density compatibility, self-calibrated against the density's
    # own curvature (a tampered field fails this immediately)
    err = sol.field.compat_error(sol.rho)
    d2 = np.abs(np.diff(sol.rho, n=2, axis=1)) / grid.dx**2
    bar = 2.0 * grid.dx**2 * max(float(np.max(d2)), 1e-12) + 1e-12
    reports["field_compat"] = {"max_error": err, "bar": bar, "passed": err <= bar}

    bound = diagnostics.field_bound_check(sol)
    reports["field_bound"] = {"worst_margin": bound["worst_margin"],
                              "passed": bound["ok"]}

    rep1 = diagnostics.check_lemma1(sol, n_samples=cfg["lemma_samples"],
                                    substeps=cfg["substeps"])
    reports["lemma1"] = rep1.__dict__

    spec2 = diagnostics.SyntheticFieldSpec(B=1.0, p=sol.p, w_h=data.background.W)
    probes = np.linspace(0.0, grid.L, cfg["probe_count"])
    m_half = (grid.Nt - 1) // 2
    rep2 = diagnostics.check_lemma2(spec2, sol.field, probes,
                                    s=float(grid.t[m_half]), t=grid.T_end,
                                    substeps=cfg["substeps"])
    reports["lemma2"] = rep2.__dict__

    # a genuinely different member of the solution class: the splitting
    # oracle on the same grid (consecutive converged iterates are too
    # close to give an informative denominator).  Probes stay within the
    # domain of influence so the trend is not polluted by the seam where
    # the two runs' tail closures differ.
    sol_other = splitting_solve(data, OracleConfig(grid=grid,
                                                   tail_mode=cfg["tail_mode"]))
    s_node = float(grid.t[m_half])
    x_cap = max(grid.L - (grid.T_end - s_node) * grid.Vmax, 0.5 * grid.L)
    probes4 = np.linspace(0.0, x_cap, cfg["probe_count"])
    rep4 = diagnostics.check_lemma4(sol, sol_other, s=s_node,
                                    t=grid.T_end, x_probes=probes4,
                                    substeps=cfg["substeps"])
    reports["lemma4"] = rep4.__dict__

    q = diagnostics.support_curve(sol)
    c1 = diagnostics.field_impulse(sol.field)
    q_bound = 2.0 * max(q[0], c1) + grid.dv
    reports["support"] = {"q_max": float(np.max(q)), "bound": q_bound,
                          "passed": bool(np.max(q) <= q_bound)}

    lo, hi = sol.p - 0.2, sol.p + 0.4
    fits = [diagnostics.decay_fit(WeightedProfile(grid.x, sol.rho[m], sol.p))
            for m in range(grid.Nt)]
    reports["decay"] = {"min_fit": float(np.min(fits)),
                        "max_fit": float(np.max(fits)),
                        "window": [lo, hi],
                        "passed": bool(lo <= np.min(fits) and np.max(fits) <= hi)}

    duh = diagnostics.duhamel_residual(sol, data, substeps=cfg["substeps"])
    reports["duhamel"] = {"max_weighted_residual": duh["max"],
                          "bar": 5e-4, "passed": duh["max"] <= 5e-4}

    drift = diagnostics.charge_conservation(sol)
    ok_drift = bool(np.all(drift["drift"]
                           <= drift["flux_budget"] + drift["quad_slack"]))
    reports["charge_drift"] = {"max_drift": float(np.max(drift["drift"])),
                               "passed": ok_drift, "gated": False}

    gated = [k for k in reports if reports[k].get("gated", True)]
    all_pass = all(bool(reports[k]["passed"]) for k in gated)
    return reports, all_pass


def cmd_verify(cfg: dict) -> int:
    out_dir = cfg["out_dir"]
    if not os.path.exists(os.path.join(out_dir, "manifest.json")):
        print("verify: no artifacts found, producing them first")
        code = cmd_run(cfg)
        if code != 0:
            return code
    try:
        run_cfg, data, sol = output.load_run(out_dir)
    except (OSError, KeyError, InvalidParameter) as exc:
        print(f"verify: cannot load artifacts: {exc}", file=sys.stderr)
        return 2
    reports, all_pass = _verify_checks(run_cfg, data, sol)
    os.makedirs(os.path.join(out_dir, "verify"), exist_ok=True)
    for name, rep in reports.items():
        output.write_json(os.path.join(out_dir, "verify", f"{name}.json"), rep)
    output.write_json(os.path.join(out_dir, "verify", "report.json"),
                      {"all_passed": all_pass, "checks": reports})
    for name, rep in sorted(reports.items()):
        print(f"verify: {name}: {'pass' if rep['passed'] else 'FAIL'}")
    return 0 if all_pass else 1


def cmd_converge_study(cfg: dict) -> int:
    resolutions = cfg["resolutions"]
    if not resolutions or len(resolutions) < 3:
        print("converge-study: need at least 3 resolutions", file=sys.stderr)
        return 2
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    errs, fitted, traces = [], [], []
    for nx, nv, nt in resolutions:
        sub = dict(cfg)
        sub.update(Nx=int(nx), Nv=int(nv), Nt=int(nt))
        bad = validate_config(sub)
        if bad:
            print(f"converge-study: resolution {(nx, nv, nt)} invalid: {bad}",
                  file=sys.stderr)
            return 2
        data, (sol, trace) = _solve_from_config(sub)
        oracle_sol = splitting_solve(data, OracleConfig(
            grid=sol.grid, tail_mode=sub["tail_mode"]))
        errs.append(float(np.max(np.abs(sol.f - oracle_sol.f))))
        traces.append(trace)
        _, per_iter = fit_contraction(trace.distances, sol.grid.T_end)
        fitted.append(per_iter)

    orders = []
    for i in range(1, len(errs)):
        if errs[i] < 1e-14:
            orders.append("exact")
        else:
            orders.append(math.log2(errs[i - 1] / errs[i]))

    with open(os.path.join(out_dir, "orders.csv"), "w") as fh:
        fh.write("Nx,Nv,Nt,max_diff,order_vs_prev\n")
        for i, (nx, nv, nt) in enumerate(resolutions):
            order = "" if i == 0 else orders[i - 1]
            fh.write(f"{nx},{nv},{nt},{errs[i]:.17g},{order}\n")
    with open(os.path.join(out_dir, "picard_ratios.csv"), "w") as fh:
        fh.write("resolution_index,k,d_k,r_k\n")
        for i, trace in enumerate(traces):
            for k, d in enumerate(trace.distances):
                r = trace.ratios[k] if k < len(trace.ratios) else ""
                fh.write(f"{i},{k},{d:.17g},{r}\n")

    orders_ok = all(o == "exact" or o >= 1.8 for o in orders)
    fine = traces[-1].ratios
    ratios_ok = all(fine[i + 1] < fine[i] for i in range(1, len(fine) - 1)) \
        if len(fine) > 2 else True
    for i, (nx, nv, nt) in enumerate(resolutions):
        order = "-" if i == 0 else orders[i - 1]
        print(f"converge-study: ({nx},{nv},{nt}) max_diff={errs[i]:.3e} "
              f"order={order}")
    print(f"converge-study: orders_ok={orders_ok} ratios_ok={ratios_ok}")
    return 0 if orders_ok and ratios_ok else 1


def cmd_extend(cfg: dict) -> int:
    if cfg["delta"] is None:
        print("extend: config must set 'delta'", file=sys.stderr)
        return 2
    out_dir = cfg["out_dir"]
    try:
        if os.path.exists(os.path.join(out_dir, "manifest.json")):
            _, data, sol = output.load_run(out_dir)
        else:
            data, (sol, _) = _solve_from_config(cfg)
        combined, ext_trace = extend(sol, data, delta=cfg["delta"],
                                     tol=cfg["tol"], norm_cap=_norm_cap(cfg),
                                     max_iters=cfg["max_iters"],
                                     substeps=cfg["substeps"])
    except ContinuationRefused as exc:
        print(f"extend: {exc}", file=sys.stderr)
        return 3
    except NonConvergence as exc:
        print(f"extend: {exc}", file=sys.stderr)
        return 3
    ext_dir = os.path.join(out_dir, "extended")
    output.write_run(ext_dir, cfg, combined, ext_trace)
    print(f"extend: horizon now {combined.grid.T_end}; artifacts in {ext_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vp1d",
        description="1D Vlasov-Poisson solver with a neutralizing background")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("verify", cmd_verify),
                     ("converge-study", cmd_converge_study),
                     ("extend", cmd_extend)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to JSON config")
        sp.add_argument("--out", default=None, help="override out_dir")
        sp.add_argument("--threads", type=int, default=None,
                        help="numba thread count (speed only, never results)")
        sp.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        numba.set_num_threads(max(1, min(args.threads,
                                         numba.config.NUMBA_NUM_THREADS)))
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError, InvalidParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg["out_dir"] = args.out
    problems = validate_config(cfg)
    if problems:
        for msg in problems:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg)
    except (InvalidParameter, IntegrationFailure, SolverError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 3 if isinstance(exc, (NonConvergence, ContinuationRefused,
                                     IntegrationFailure)) else 2
    except OSError as exc:
        print(f"{args.command}: I/O failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
