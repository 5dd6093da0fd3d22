"""Experiment runner: uniform-refinement convergence studies and the
adaptive-vs-uniform comparison, with EOC extraction and persistent CSV /
JSON outputs.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import adapt, assembly, fespace, howard, linsolve
from . import mesh as meshmod
from . import problem as problemmod

CSV_COLUMNS = ["level", "h", "ndof", "err_u_L2", "err_u_H1", "err_g_H1",
               "err_pair_H1", "eta", "howard_iters", "eoc_u_H1",
               "eoc_g_H1", "eoc_pair_H1"]


@dataclass
class RunConfig:
    problem: str = "square-hjb"
    degree: int = 2
    mode: str = "uniform"
    levels: int = 4
    theta: float = 0.5
    tol: float = 1e-7
    maxiter: int = 8
    beta: float = 0.3
    tol_a: float = 1e-7
    solver_tol: float = 1e-11
    out: str = "out"
    seed: int = 0
    paper_sign: bool = False
    export_mesh: bool = False
    base_n: int = 8
    base_m: int = 16
    cordes_nx: int = 128
    cordes_nalpha: int = 256
    use_direct: bool = False
    lam_override: float = None


def eoc(errors, hs):
    """Experimental orders of convergence between consecutive levels."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if np.any(errors <= 0) or np.any(hs <= 0):
        raise ValueError("eoc needs positive errors and mesh sizes")
    return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


@dataclass
class LevelRecord:
    level: int
    h: float
    ndof: int
    err_u_L2: float
    err_u_H1: float
    err_g_H1: float
    err_pair_H1: float
    eta: float
    howard_iters: int
    history: dict = field(default_factory=dict)


class ErrorReport:
    """Per-level error table with EOC columns."""

    def __init__(self, records, mode):
        self.records = records
        self.mode = mode
        self.eoc_u_H1 = self._rates("err_u_H1")
        self.eoc_g_H1 = self._rates("err_g_H1")
        self.eoc_pair_H1 = self._rates("err_pair_H1")

    def _xaxis(self):
        if self.mode == "uniform":
            return [r.h for r in self.records]
        return [r.ndof ** -0.5 for r in self.records]

    def _rates(self, attr):
        errs = np.array([getattr(r, attr) for r in self.records])
        xs = np.array(self._xaxis())
        rates = [float("nan")]
        tiny = 10 * np.finfo(float).eps
        for i in range(1, len(errs)):
            if errs[i - 1] > tiny and errs[i] > tiny:
                rates.append(float(np.log(errs[i - 1] / errs[i])
                                   / np.log(xs[i - 1] / xs[i])))
            else:
                rates.append(float("nan"))
        return rates

    def csv_rows(self):
        rows = [",".join(CSV_COLUMNS)]
        for i, r in enumerate(self.records):
            vals = [str(r.level), "%.12g" % r.h, str(r.ndof),
                    "%.12g" % r.err_u_L2, "%.12g" % r.err_u_H1,
                    "%.12g" % r.err_g_H1, "%.12g" % r.err_pair_H1,
                    "%.12g" % r.eta, str(r.howard_iters)]
            for col in (self.eoc_u_H1, self.eoc_g_H1, self.eoc_pair_H1):
                vals.append("" if np.isnan(col[i]) else "%.6g" % col[i])
            rows.append(",".join(vals))
        return rows


def _measure_errors(p, mesh, spaces, pair, q, k):
    """Error norms against the exact solution plus the global estimator."""
    space_u, space_g = spaces
    subdiv = None
    if p.name == "disk-hjb":
        # the exact solution's derivatives blow up at the origin
        touches = np.zeros(mesh.num_cells, dtype=bool)
        r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
        near = np.flatnonzero(r < 1e-12)
        if len(near):
            touches = np.isin(mesh.cells, near).any(axis=1)
        subdiv = touches
    nu = fespace.norms(pair.u, exact=p.exact, exact_grad=p.grad_exact,
                       subdivide_cells=subdiv)
    ng = fespace.norms(pair.g, exact=p.grad_exact, exact_grad=p.hess_exact,
                       subdivide_cells=subdiv)
    ind = adapt.compute_indicators(p, mesh, spaces, pair, q)
    return {"err_u_L2": nu["L2"], "err_u_H1": nu["H1"],
            "err_g_H1": ng["H1"],
            "err_pair_H1": fespace.pair_norm(nu, ng),
            "eta": ind.global_eta}


def _initial_mesh(cfg):
    if cfg.problem == "disk-hjb":
        return meshmod.unit_disk_mesh(cfg.base_m)
    return meshmod.unit_square_mesh(cfg.base_n)


def run(cfg):
    """Execute one experiment; writes report.csv and manifest.json.

    Returns the ErrorReport.
    """
    t_start = time.perf_counter()
    os.makedirs(cfg.out, exist_ok=True)
    p = problemmod.get_problem(cfg.problem, theta=cfg.theta,
                               paper_sign=cfg.paper_sign)
    if cfg.lam_override is not None:
        p.lam = cfg.lam_override

    cert = problemmod.verify_cordes(p, nx=cfg.cordes_nx,
                                    nalpha=cfg.cordes_nalpha)
    if not cert.success:
        raise problemmod.ProblemError(
            "Cordes certification failed: max ratio %.6g at x=%s alpha=%.6g"
            % (cert.max_ratio, cert.worst_x, cert.worst_alpha))

    records = []
    wall = []
    if cfg.mode == "uniform":
        mesh = _initial_mesh(cfg)
        for level in range(cfg.levels):
            t0 = time.perf_counter()
            if cfg.problem != "disk-hjb":
                mesh = meshmod.unit_square_mesh(cfg.base_n * 2 ** level)
            elif level > 0:
                mesh = meshmod.refine_uniform(mesh)
            space_u = fespace.build_space(mesh, cfg.degree, 1)
            space_g = fespace.build_space(mesh, cfg.degree, 2)
            spaces = (space_u, space_g)
            pair, q, history = howard.howard_solve(
                p, mesh, cfg.degree, tol=cfg.tol, maxiter=cfg.maxiter,
                solver_tol=cfg.solver_tol, spaces=spaces,
                use_direct=cfg.use_direct)
            errs = _measure_errors(p, mesh, spaces, pair, q, cfg.degree)
            records.append(LevelRecord(
                level, float(mesh.cell_diameters().max()),
                space_u.ndof + space_g.ndof,
                errs["err_u_L2"], errs["err_u_H1"], errs["err_g_H1"],
                errs["err_pair_H1"], errs["eta"], len(history),
                history.as_dict()))
            if cfg.export_mesh:
                meshmod.write_mesh(mesh, os.path.join(
                    cfg.out, "mesh_%d.txt" % level))
            wall.append(time.perf_counter() - t0)
    elif cfg.mode == "adaptive":
        t0 = time.perf_counter()
        levels = adapt.adaptive_solve(
            p, _initial_mesh(cfg), cfg.degree, beta=cfg.beta,
            tol_a=cfg.tol_a, maxiter_a=cfg.levels - 1,
            howard_tol=cfg.tol, howard_maxiter=cfg.maxiter,
            solver_tol=cfg.solver_tol, use_direct=cfg.use_direct)
        for lv in levels:
            space_u = fespace.build_space(lv.mesh, cfg.degree, 1)
            space_g = fespace.build_space(lv.mesh, cfg.degree, 2)
            errs = _measure_errors(p, lv.mesh, (space_u, space_g),
                                   lv.pair, lv.control, cfg.degree)
            records.append(LevelRecord(
                lv.level, lv.h, lv.ndof,
                errs["err_u_L2"], errs["err_u_H1"], errs["err_g_H1"],
                errs["err_pair_H1"], errs["eta"], len(lv.history),
                lv.history.as_dict()))
            if cfg.export_mesh:
                meshmod.write_mesh(lv.mesh, os.path.join(
                    cfg.out, "mesh_%d.txt" % lv.level))
        wall.append(time.perf_counter() - t0)
    else:
        raise ValueError("unknown mode %r" % (cfg.mode,))

    report = ErrorReport(records, cfg.mode)
    with open(os.path.join(cfg.out, "report.csv"), "w") as fh:
        fh.write("\n".join(report.csv_rows()) + "\n")

    manifest = {
        "config": asdict(cfg),
        "cordes": cert.as_dict(),
        "levels": [{"level": r.level, "h": r.h, "ndof": r.ndof,
                    "howard": r.history} for r in records],
        "wall_times": wall,
        "total_wall_time": time.perf_counter() - t_start,
    }
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return report


def build_parser():
    parser = argparse.ArgumentParser(prog="hjbfem")
    sub = parser.add_subparsers(dest="command", required=True)
    ps = sub.add_parser("solve", help="run a convergence experiment")
    ps.add_argument("--problem", default="square-hjb",
                    choices=["square-hjb", "disk-hjb", "poisson"])
    ps.add_argument("--degree", type=int, default=2, choices=[1, 2])
    ps.add_argument("--mode", default="uniform",
                    choices=["uniform", "adaptive"])
    ps.add_argument("--levels", type=int, default=4)
    ps.add_argument("--theta", type=float, default=0.5)
    ps.add_argument("--tol", type=float, default=1e-7)
    ps.add_argument("--max-iter", type=int, default=8)
    ps.add_argument("--beta", type=float, default=0.3)
    ps.add_argument("--solver-tol", type=float, default=1e-11)
    ps.add_argument("--out", default="out")
    ps.add_argument("--paper-sign", action="store_true")
    ps.add_argument("--export-mesh", action="store_true")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--base-n", type=int, default=8)
    ps.add_argument("--base-m", type=int, default=16)
    ps.add_argument("--direct", action="store_true",
                    help="use the sparse direct solver")
    ps.add_argument("--config", default=None,
                    help="JSON file overriding theta/lambda/sign/Cordes "
                         "grid sizes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        problem=args.problem, degree=args.degree, mode=args.mode,
        levels=args.levels, theta=args.theta, tol=args.tol,
        maxiter=args.max_iter, beta=args.beta, solver_tol=args.solver_tol,
        out=args.out, seed=args.seed, paper_sign=args.paper_sign,
        export_mesh=args.export_mesh, base_n=args.base_n,
        base_m=args.base_m, use_direct=args.direct)
    if args.config:
        with open(args.config) as fh:
            over = json.load(fh)
        cfg.theta = over.get("theta", cfg.theta)
        cfg.paper_sign = over.get("paper_sign", cfg.paper_sign)
        cfg.cordes_nx = over.get("cordes_nx", cfg.cordes_nx)
        cfg.cordes_nalpha = over.get("cordes_nalpha", cfg.cordes_nalpha)
        if "lambda" in over:
            cfg.lam_override = over["lambda"]
    try:
        run(cfg)
    except (problemmod.ProblemError, linsolve.SolveError,
            howard.HowardError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
