"""Command line front end.

Subcommands mirror the pipeline stages: eigen, torsion, barriers, solve,
verify, calibrate-k.  Every command reads one JSON config, embeds the fully
resolved config in its JSON report, and is bitwise deterministic (no
timestamps, fixed seeds, fixed reduction orders).

Exit codes: 0 success, 1 usage or config error, 2 certification or
verification failure, 3 iteration non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .auxiliary import MonotonicityError
from .barriers import (CSearchConfig, InfeasibleSearchError, OrderingError,
                       build, certify, find_C)
from .config import ConfigError, load_config
from .eigen import comparison_constants, first_eigenpair
from .fixedpoint import InvarianceError, KConfig, picard
from .fixedpoint import verify as verify_solution
from .hypotheses import ExponentSet, NonlinearitySpec, validate
from .mesh import Domain, ScalarField, _lex_order, bound_ratios, build_mesh
from .plap import NonConvergenceError, SolverConfig, estimate_K, torsion_function

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CERTIFICATION = 2
EXIT_NONCONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the exit-code table
    # reserves 2 for certification failures
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def render_report(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _emit_report(payload, path):
    text = render_report(payload)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- fields i/o

def field_columns(mesh, u, v, pair):
    cols = [("x", mesh.nodes[:, 0])]
    if mesh.dim == 2:
        cols.append(("y", mesh.nodes[:, 1]))
    cols += [
        ("d", mesh.dist),
        ("u", u.values), ("v", v.values),
        ("u_low", pair.u_low.values), ("u_up", pair.u_up.values),
        ("v_low", pair.v_low.values), ("v_up", pair.v_up.values),
    ]
    return cols


def _ordered_rows(mesh, cols):
    order = _lex_order(mesh)
    return order, [name for name, _ in cols], [arr for _, arr in cols]


def write_fields_csv(mesh, cols, path):
    order, names, arrays = _ordered_rows(mesh, cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for i in order:
            fh.write(",".join(repr(float(a[i])) for a in arrays) + "\n")


def emit_plot_data(mesh, cols, path):
    """Whitespace-separated columns with a '#' header, ready for gnuplot
    and friends; rows sorted lexicographically by coordinates."""
    order, names, arrays = _ordered_rows(mesh, cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for i in order:
            fh.write(" ".join(repr(float(a[i])) for a in arrays) + "\n")


def read_fields_csv(mesh, path):
    """Read a fields CSV back into node-ordered arrays keyed by column."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",")
        rows = [line.split(",") for line in fh if line.strip()]
    table = np.asarray(rows, dtype=float)
    if table.shape[0] != mesh.n_nodes or table.shape[1] != len(names):
        raise ConfigError(
            f"fields file {path} has shape {table.shape}, expected "
            f"({mesh.n_nodes}, {len(names)})"
        )
    order = _lex_order(mesh)
    out = {}
    for j, name in enumerate(names):
        arr = np.empty(mesh.n_nodes)
        arr[order] = table[:, j]
        out[name] = arr
    coord_cols = ("x",) if mesh.dim == 1 else ("x", "y")
    for ax, name in enumerate(coord_cols):
        if name not in out or not np.allclose(out[name], mesh.nodes[:, ax],
                                              rtol=0.0, atol=1e-14):
            raise ConfigError(
                f"fields file {path} does not match the mesh of this config"
            )
    return out


# ------------------------------------------------------------ pipeline parts

def _mesh_from(cfg):
    dom = cfg["domain"]
    return build_mesh(Domain(dom["kind"], tuple(dom["lengths"])),
                      dom["resolution"])


def _specs_from(cfg):
    def one(role, blk):
        exps = ExponentSet(role, m=blk["m"], M=blk["M"], alpha=blk["alpha"],
                           beta=blk["beta"], gamma=blk["gamma"],
                           theta=blk["theta"])
        return NonlinearitySpec(exps, a1=blk["a1"], a2=blk["a2"])
    return one("f", cfg["spec_f"]), one("g", cfg["spec_g"])


def _solver_cfg(cfg):
    s = cfg["solver"]
    return SolverConfig(grad_reg=s["grad_reg"], max_iter=s["max_iter"],
                        tol_residual=s["tol_residual"], damping=s["damping"])


def _eigen_stage(cfg, mesh, scfg):
    e = cfg["eigen"]
    eig_p = first_eigenpair(mesh, cfg["p"], tol=e["tol"],
                            max_iter=e["max_iter"], cfg=scfg)
    eig_q = (eig_p if cfg["q"] == cfg["p"] else
             first_eigenpair(mesh, cfg["q"], tol=e["tol"],
                             max_iter=e["max_iter"], cfg=scfg))
    return eig_p, eig_q


def _torsion_stage(cfg, mesh, scfg):
    xi1, _ = torsion_function(mesh, cfg["p"], scfg)
    xi2 = xi1 if cfg["q"] == cfg["p"] else torsion_function(mesh, cfg["q"], scfg)[0]
    return xi1, xi2


def _k_values(cfg, mesh, scfg):
    fp = cfg["fixedpoint"]
    prov_p = prov_q = "user-override"
    kp, kq = fp["K_p"], fp["K_q"]
    if kp is None:
        kp = 2.0 * estimate_K(mesh, cfg["p"], cfg=scfg)
        prov_p = "estimated"
    if kq is None:
        kq = 2.0 * estimate_K(mesh, cfg["q"], cfg=scfg)
        prov_q = "estimated"
    return float(kp), float(kq), prov_p, prov_q


def _validated(cfg):
    spec_f, spec_g = _specs_from(cfg)
    rep = validate(spec_f.exponents, spec_g.exponents, cfg["p"], cfg["q"])
    if not rep.passed:
        failing = "; ".join(
            f"{e.name} (slack {e.slack:.4g})" for e in rep.failures()
        )
        raise ConfigError(f"growth hypothesis violated: {failing}")
    return spec_f, spec_g


def _barrier_stage(cfg, mesh, spec_f, spec_g, scfg):
    eig_p, eig_q = _eigen_stage(cfg, mesh, scfg)
    xi1, xi2 = _torsion_stage(cfg, mesh, scfg)
    kp, kq, prov_p, prov_q = _k_values(cfg, mesh, scfg)
    bs = cfg["barrier_search"]
    C, search_report = find_C(
        spec_f, spec_g, eig_p, eig_q, xi1, xi2, kp, kq,
        cfg=CSearchConfig(c_start=bs["c_start"], c_cap=bs["c_cap"],
                          margin_factor=bs["margin_factor"]),
    )
    pair = build(C, eig_p, eig_q, xi1, xi2, kp, kq)
    kcfg = KConfig(C=pair.C, R1=pair.R1, R2=pair.R2, K_p=kp, K_q=kq,
                   provenance_p=prov_p, provenance_q=prov_q)
    return pair, search_report, kcfg


# ----------------------------------------------------------------- commands

def _cmd_eigen(cfg, args):
    mesh = _mesh_from(cfg)
    scfg = _solver_cfg(cfg)
    eig_p, eig_q = _eigen_stage(cfg, mesh, scfg)
    payload = {
        "command": "eigen",
        "config": cfg,
        "p": eig_p.report(),
        "q": eig_q.report(),
        "comparison": comparison_constants(eig_p, eig_q).report(),
    }
    return EXIT_OK, payload, None


def _cmd_torsion(cfg, args):
    mesh = _mesh_from(cfg)
    scfg = _solver_cfg(cfg)
    xi1, xi2 = _torsion_stage(cfg, mesh, scfg)
    def block(xi):
        c0, c1 = bound_ratios(xi)
        return {"max": float(np.max(xi.values)), "c0": c0, "c1": c1}
    payload = {
        "command": "torsion",
        "config": cfg,
        "p": block(xi1),
        "q": block(xi2),
    }
    return EXIT_OK, payload, None


def _cmd_calibrate_k(cfg, args):
    mesh = _mesh_from(cfg)
    scfg = _solver_cfg(cfg)
    est_p = estimate_K(mesh, cfg["p"], cfg=scfg)
    est_q = estimate_K(mesh, cfg["q"], cfg=scfg)
    payload = {
        "command": "calibrate-k",
        "config": cfg,
        "inflation": 2.0,
        "K_p_estimate": est_p, "K_p": 2.0 * est_p,
        "K_q_estimate": est_q, "K_q": 2.0 * est_q,
        "note": "estimates are empirical lower bounds; pin the inflated "
                "values in fixedpoint.K_p / fixedpoint.K_q to freeze them",
    }
    return EXIT_OK, payload, None


def _cmd_barriers(cfg, args):
    spec_f, spec_g = _validated(cfg)
    mesh = _mesh_from(cfg)
    scfg = _solver_cfg(cfg)
    pair, search_report, kcfg = _barrier_stage(cfg, mesh, spec_f, spec_g, scfg)
    cert = certify(pair, spec_f, spec_g, pair.u_up, pair.v_up,
                   w_samples=cfg["certification"]["w_samples"], kcfg=kcfg,
                   seed=cfg["certification"]["seed"])
    payload = {
        "command": "barriers",
        "config": cfg,
        "C": pair.C,
        "constants": pair.summary(),
        "search": search_report.report(),
        "certification": cert.report(),
        "K": kcfg.report(),
    }
    code = EXIT_OK if cert.passed else EXIT_CERTIFICATION
    return code, payload, None


def _cmd_solve(cfg, args):
    spec_f, spec_g = _validated(cfg)
    mesh = _mesh_from(cfg)
    scfg = _solver_cfg(cfg)
    pair, search_report, kcfg = _barrier_stage(cfg, mesh, spec_f, spec_g, scfg)
    cert = certify(pair, spec_f, spec_g, pair.u_up, pair.v_up,
                   w_samples=cfg["certification"]["w_samples"], kcfg=kcfg,
                   seed=cfg["certification"]["seed"])
    payload = {
        "command": "solve",
        "config": cfg,
        "C": pair.C,
        "constants": pair.summary(),
        "search": search_report.report(),
        "certification": cert.report(),
        "K": kcfg.report(),
    }
    if not cert.passed:
        return EXIT_CERTIFICATION, payload, None

    aux_cfg = cfg["auxiliary"]
    fp_cfg = cfg["fixedpoint"]
    sol = picard(
        pair, spec_f, spec_g, kcfg,
        tol_outer=fp_cfg["tol_outer"], max_outer=fp_cfg["max_outer"],
        damping=fp_cfg["damping"], tol_inner=aux_cfg["tol_inner"],
        max_sweeps=aux_cfg["max_sweeps"],
        monotone_tol=aux_cfg["monotone_tol"], solver_cfg=scfg,
        shift_safety=aux_cfg["shift_safety"], in_k_tol=fp_cfg["in_k_tol"],
    )
    ver = verify_solution(sol.u, sol.v, pair, spec_f, spec_g,
                          tol=cfg["verify"]["tol"],
                          rect_tol=cfg["verify"]["rect_tol"])
    payload["solution"] = sol.report()
    payload["verify"] = ver.report()
    emit = (mesh, field_columns(mesh, sol.u, sol.v, pair))
    code = EXIT_OK if ver.passed else EXIT_CERTIFICATION
    return code, payload, emit


def _cmd_verify(cfg, args):
    if not args.fields:
        raise ConfigError("verify requires --fields pointing at a fields CSV")
    spec_f, spec_g = _validated(cfg)
    mesh = _mesh_from(cfg)
    scfg = _solver_cfg(cfg)
    pair, _search, _kcfg = _barrier_stage(cfg, mesh, spec_f, spec_g, scfg)
    table = read_fields_csv(mesh, args.fields)
    for need in ("u", "v"):
        if need not in table:
            raise ConfigError(f"fields file lacks required column '{need}'")
    u = ScalarField(mesh, table["u"])
    v = ScalarField(mesh, table["v"])
    ver = verify_solution(u, v, pair, spec_f, spec_g,
                          tol=cfg["verify"]["tol"],
                          rect_tol=cfg["verify"]["rect_tol"])
    payload = {
        "command": "verify",
        "config": cfg,
        "C": pair.C,
        "fields": args.fields,
        "verify": ver.report(),
    }
    emit = (mesh, field_columns(mesh, u, v, pair))
    code = EXIT_OK if ver.passed else EXIT_CERTIFICATION
    return code, payload, emit


_COMMANDS = {
    "eigen": _cmd_eigen,
    "torsion": _cmd_torsion,
    "barriers": _cmd_barriers,
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "calibrate-k": _cmd_calibrate_k,
}


def build_parser():
    parser = _Parser(prog="plapsys",
                     description="singular coupled p/q-Laplacian system: "
                                 "barriers, monotone iteration, fixed point")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, help_text in (
        ("eigen", "first eigenpairs and comparison constants"),
        ("torsion", "torsion profiles and distance-ratio constants"),
        ("barriers", "search C, build and certify the barrier pair"),
        ("solve", "full chain: barriers, monotone iteration, fixed point"),
        ("verify", "re-verify fields from a CSV against this config"),
        ("calibrate-k", "empirical gradient-bound constants"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--report", default=None,
                        help="JSON report path (default: config output.report "
                             "or stdout)")
        if name in ("solve", "verify"):
            sp.add_argument("--fields",
                            default=None,
                            help="fields CSV path"
                                 + (" (required)" if name == "verify" else ""))
            sp.add_argument("--plot", default=None,
                            help="whitespace plot-data path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"plapsys: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = cfg["output"]
    report_path = args.report or out["report"]
    fields_path = getattr(args, "fields", None) or out["fields"]
    plot_path = getattr(args, "plot", None) or out["plot"]

    try:
        code, payload, emit = _COMMANDS[args.command](cfg, args)
    except (OrderingError, InfeasibleSearchError, MonotonicityError,
            InvarianceError) as exc:
        print(f"plapsys: certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except NonConvergenceError as exc:
        print(f"plapsys: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ConfigError as exc:
        print(f"plapsys: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"plapsys: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        _emit_report(payload, report_path)
        if emit is not None:
            mesh, cols = emit
            if fields_path and args.command != "verify":
                write_fields_csv(mesh, cols, fields_path)
            if plot_path:
                emit_plot_data(mesh, cols, plot_path)
    except OSError as exc:
        print(f"plapsys: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
