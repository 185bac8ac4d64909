"""Run artifacts: CSV/JSON export, loading, and the checksum manifest.

Layout of a run directory:

    manifest.json        config echo + sha256 of every emitted file
    summary.json         convergence outcome and measured constants
    trace.json           d_k, r_k, impulse bounds, fitted contraction rate
    field/t_NNNN.csv     x, rho, E          (one per time node)
    solution/t_NNNN.csv  x, v, f            (one per time node; x outer, v inner)
    solution/summary.csv t, rho_norm_p, max_abs_E, q_meas, triple_norm

Floats are written with 17 significant digits and no timestamps appear
anywhere, so identical configurations produce byte-identical artifacts
regardless of thread count.
"""
import hashlib
import json
import os

import numpy as np
import pandas as pd

from . import diagnostics
from .errors import InvalidParameter
from .field import FieldHistory
from .grid import PhaseGrid
from .norms import weight
from .picard import IterationTrace, SolutionHistory
from .profiles import make_background, make_initial_data

FLOAT_FMT = "%.17g"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and (np.isnan(obj) or np.isinf(obj)):
        return repr(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_table(path, header, columns):
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",",
               header=",".join(header), comments="")


def trace_dict(trace: IterationTrace) -> dict:
    return {
        "d_k": list(trace.distances),
        "r_k": list(trace.ratios),
        "C1_meas": list(trace.c1),
        "fitted_C3": trace.fitted_c3,
        "converged": trace.converged,
        "iterations": trace.iterations,
        "tol": trace.tol,
    }


def write_run(out_dir: str, config: dict, sol: SolutionHistory,
              trace: IterationTrace | None) -> dict:
    """Write all artifacts of one run and return the manifest dict."""
    grid = sol.grid
    os.makedirs(os.path.join(out_dir, "field"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "solution"), exist_ok=True)

    xx = np.repeat(grid.x, grid.Nv)
    vv = np.tile(grid.v, grid.Nx)
    for m in range(grid.Nt):
        _write_table(os.path.join(out_dir, "field", f"t_{m:04d}.csv"),
                     ["x", "rho", "E"], [grid.x, sol.rho[m], sol.field.E[m]])
        _write_table(os.path.join(out_dir, "solution", f"t_{m:04d}.csv"),
                     ["x", "v", "f"], [xx, vv, sol.f[m].ravel()])

    q_curve = diagnostics.support_curve(sol)
    triple = sol.triple_norm_per_time()
    max_e = sol.field.max_abs_per_time()
    _write_table(os.path.join(out_dir, "solution", "summary.csv"),
                 ["t", "rho_norm_p", "max_abs_E", "q_meas", "triple_norm"],
                 [grid.t, sol.rho_norms, max_e, q_curve, triple])

    if trace is not None:
        write_json(os.path.join(out_dir, "trace.json"), trace_dict(trace))

    summary = {
        "origin": sol.origin,
        "p": sol.p,
        "C1_meas": diagnostics.field_impulse(sol.field),
        "velocity_margin": diagnostics.velocity_margin(sol),
        "sup_triple_norm": float(np.max(triple)),
        "sup_rho_norm": float(np.max(sol.rho_norms)),
        "boundary_weighted_rho": float(np.max(
            np.abs(sol.rho[:, [0, -1]]) * weight(grid.L) ** sol.p)),
        "meta": sol.meta,
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)

    files = {}
    for root, _, names in os.walk(out_dir):
        for name in sorted(names):
            if name == "manifest.json":
                continue
            full = os.path.join(root, name)
            files[os.path.relpath(full, out_dir)] = _sha256(full)
    manifest = {"config": config, "files": dict(sorted(files.items()))}
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def grid_from_config(cfg: dict) -> PhaseGrid:
    return PhaseGrid(L=cfg["L"], Nx=cfg["Nx"], Vmax=cfg["Vmax"], Nv=cfg["Nv"],
                     T_end=cfg["T_end"], Nt=cfg["Nt"])


def data_from_config(cfg: dict, grid: PhaseGrid):
    bg = make_background(cfg["W"], cfg["A_F"])
    return make_initial_data(bg, grid, A_g=cfg["A_g"], p=cfg["p"])


def load_run(out_dir: str):
    """Rebuild (config, SolutionHistory) from a run directory.

    The field values come from the stored CSVs, not from a recompute, so
    post-hoc tampering is visible to the consistency checks.
    """
    man_path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(man_path):
        raise FileNotFoundError(f"no manifest in {out_dir}")
    with open(man_path) as fh:
        config = json.load(fh)["config"]
    grid = grid_from_config(config)
    data = data_from_config(config, grid)

    f = np.empty((grid.Nt, grid.Nx, grid.Nv))
    rho = np.empty((grid.Nt, grid.Nx))
    e_vals = np.empty((grid.Nt, grid.Nx))
    for m in range(grid.Nt):
        sol_tab = pd.read_csv(os.path.join(out_dir, "solution", f"t_{m:04d}.csv"))
        if len(sol_tab) != grid.Nx * grid.Nv:
            raise InvalidParameter(f"solution table {m} has wrong length")
        f[m] = sol_tab["f"].to_numpy().reshape(grid.Nx, grid.Nv)
        fld_tab = pd.read_csv(os.path.join(out_dir, "field", f"t_{m:04d}.csv"))
        rho[m] = fld_tab["rho"].to_numpy()
        e_vals[m] = fld_tab["E"].to_numpy()

    p = config["p"]
    rl_p = (1.0 + grid.L**2) ** (0.5 * p)
    fld = FieldHistory(grid, e_vals, rho[:, 0] * rl_p, rho[:, -1] * rl_p,
                       p, config["tail_mode"])
    norms = np.max(np.abs(rho) * weight(grid.x)[None, :] ** p, axis=1)
    sol = SolutionHistory(grid=grid, p=p, background=data.background, f=f,
                          rho=rho, rho_norms=norms, field=fld, origin="loaded")
    return config, data, sol
