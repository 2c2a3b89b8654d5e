"""Picard approximation of the fixed point of the frozen-gradient solution
map, membership in the gradient-bounded invariant sets, and final
verification of the distance-ratio bounds.

One application of the solution map freezes the gradients at (z1, z2),
runs the from_below monotone iteration and returns its limit.  The Picard
loop feeds the limit back in; convergence is measured in the discrete C1
norm (nodal values and element gradients).  A fixed point solves the full
system, which verify() checks with self gradients, together with the
positivity window constants min u/d and max u/d.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .auxiliary import AuxSolution, ShiftParams, make_shift, monotone_solve
from .barriers import BarrierPair
from .hypotheses import evaluate
from .mesh import ScalarField, bound_ratios, gradient
from .plap import (NonConvergenceError, PlapProblem, SolverConfig, estimate_K,
                   residual)


class InvarianceError(RuntimeError):
    """A Picard iterate left its invariant set."""


@dataclass
class KConfig:
    C: float
    R1: float
    R2: float
    K_p: float
    K_q: float
    provenance_p: str = "estimated"  # or "user-override"
    provenance_q: str = "estimated"

    def __post_init__(self):
        if not (self.C > 1.0 and self.R1 > 0.0 and self.R2 > 0.0):
            raise ValueError("KConfig needs C > 1 and positive R1, R2")
        for prov in (self.provenance_p, self.provenance_q):
            if prov not in ("estimated", "user-override"):
                raise ValueError(f"unknown provenance {prov!r}")

    def report(self):
        return {"C": self.C, "R1": self.R1, "R2": self.R2,
                "K_p": {"value": self.K_p, "provenance": self.provenance_p},
                "K_q": {"value": self.K_q, "provenance": self.provenance_q}}


def make_kconfig(pair: BarrierPair, K_p: float | None = None,
                 K_q: float | None = None, probes=None,
                 inflation: float = 2.0,
                 cfg: SolverConfig | None = None) -> KConfig:
    """K constants for the invariant sets, and the gradient budgets
    R = max(C1 norm of the scaled torsion profile, K).

    estimate_K returns empirical lower bounds, so estimated values are
    inflated by `inflation` (default 2) and tagged; user overrides are taken
    verbatim.
    """
    mesh = pair.mesh
    prov_p = prov_q = "user-override"
    if K_p is None:
        K_p = inflation * estimate_K(mesh, pair.p, probes=probes, cfg=cfg)
        prov_p = "estimated"
    if K_q is None:
        K_q = inflation * estimate_K(mesh, pair.q, probes=probes, cfg=cfg)
        prov_q = "estimated"
    return KConfig(C=pair.C, R1=max(pair.R1, K_p), R2=max(pair.R2, K_q),
                   K_p=float(K_p), K_q=float(K_q),
                   provenance_p=prov_p, provenance_q=prov_q)


def in_K(y: ScalarField, which: str, kcfg: KConfig, pair: BarrierPair,
         tol: float = 0.0):
    """Membership in the invariant set: barrier rectangle nodewise plus the
    gradient cap C*R.  Returns (ok, margins); margins are signed, negative
    where violated."""
    if which not in ("u", "v", "1", "2"):
        raise ValueError("which must identify the u- or v-component")
    first = which in ("u", "1")
    lo = pair.u_low if first else pair.v_low
    hi = pair.u_up if first else pair.v_up
    R = kcfg.R1 if first else kcfg.R2
    grad_sup = gradient(y).sup()
    margins = {
        "above_lower": float(np.min(y.values - lo.values)),
        "below_upper": float(np.min(hi.values - y.values)),
        "gradient_cap": float(kcfg.C * R - grad_sup),
    }
    ok = all(v >= -tol for v in margins.values())
    return ok, margins


@dataclass
class SolutionReport:
    u: ScalarField
    v: ScalarField
    pair: BarrierPair
    outer_iterations: int
    converged: bool
    residual_u: float
    residual_v: float
    c0_tilde: float
    c1_tilde: float
    c0_tilde_prime: float
    c1_tilde_prime: float
    in_K_u: bool
    in_K_v: bool
    kcfg: KConfig
    outer_trace: list = field(default_factory=list)
    growth_diagnostics: dict = field(default_factory=dict)
    aux: AuxSolution | None = None

    def report(self):
        return {
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "residual_u": self.residual_u,
            "residual_v": self.residual_v,
            "constants": {
                "c0_tilde": self.c0_tilde, "c1_tilde": self.c1_tilde,
                "c0_tilde_prime": self.c0_tilde_prime,
                "c1_tilde_prime": self.c1_tilde_prime,
            },
            "in_K": {"u": self.in_K_u, "v": self.in_K_v},
            "K": self.kcfg.report(),
            "barriers": self.pair.summary(),
            "growth_diagnostics": self.growth_diagnostics,
            "outer_trace": self.outer_trace,
        }


def _c1_diff(mesh, a_vals, b_vals):
    dv = float(np.max(np.abs(a_vals - b_vals)))
    ga = gradient(ScalarField(mesh, a_vals)).vectors
    gb = gradient(ScalarField(mesh, b_vals)).vectors
    dg = float(np.max(np.sqrt(np.einsum("ed,ed->e", ga - gb, ga - gb))))
    return max(dv, dg)


def _growth_check(pair, kcfg, spec_f, spec_g, z1, z2, u, v):
    """Realized right-hand-side sup versus the invariance sufficient bound
    (K^.. scaled gradient budget); diagnostic only."""
    mesh = pair.mesh
    s1 = np.maximum(mesh.interpolate_at_barycenters(u.values), 1e-300)
    s2 = np.maximum(mesh.interpolate_at_barycenters(v.values), 1e-300)
    xi1 = gradient(z1).magnitudes()
    xi2 = gradient(z2).magnitudes()
    f_sup = float(np.max(evaluate(spec_f, mesh.barycenters, s1, s2, xi1, xi2)))
    g_sup = float(np.max(evaluate(spec_g, mesh.barycenters, s1, s2, xi1, xi2)))
    bound_f = (kcfg.C * kcfg.R1 / kcfg.K_p) ** (pair.p - 1.0)
    bound_g = (kcfg.C * kcfg.R2 / kcfg.K_q) ** (pair.q - 1.0)
    return {
        "f_sup": f_sup, "f_bound": bound_f, "f_ok": f_sup <= bound_f,
        "g_sup": g_sup, "g_bound": bound_g, "g_ok": g_sup <= bound_g,
    }


def picard(pair: BarrierPair, spec_f, spec_g, kcfg: KConfig,
           init=None, tol_outer: float = 1e-6, max_outer: int = 50,
           damping: float = 1.0, tol_inner: float | None = None,
           max_sweeps: int = 1000, monotone_tol: float = 1e-10,
           solver_cfg: SolverConfig | None = None,
           shift: ShiftParams | None = None, shift_safety: float = 1.25,
           in_k_tol: float = 1e-9, verbose: bool = False) -> SolutionReport:
    """Iterate the frozen-gradient solution map from (u_low, v_low).

    Every iterate must stay in its invariant set (InvarianceError names the
    violated bound and suggests remedies); the growth diagnostic of each
    accepted iterate is recorded.  Raises NonConvergenceError when the outer
    C1 difference does not drop below tol_outer within max_outer steps.

    tol_inner defaults to min(1e-8, tol_outer*h/64): the outer test compares
    element gradients, which amplify inner-limit noise by 1/h, and a slowly
    contracting sweep leaves noise an order above its own stopping diff.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    mesh = pair.mesh
    if tol_inner is None:
        tol_inner = min(1e-8, tol_outer * mesh.h_min() / 64.0)
    shift = shift or make_shift(spec_f, spec_g, pair, safety=shift_safety)
    if init is None:
        z1, z2 = pair.u_low, pair.v_low
    else:
        z1, z2 = init
    for z, w in ((z1, "u"), (z2, "v")):
        ok, margins = in_K(z, w, kcfg, pair, tol=in_k_tol)
        if not ok:
            raise InvarianceError(f"initial {w}-field outside its set: {margins}")

    outer_trace = []
    aux = None
    growth = {}
    for n in range(1, max_outer + 1):
        aux = monotone_solve(
            z1, z2, pair, spec_f, spec_g, direction="from_below", shift=shift,
            tol_inner=tol_inner, max_sweeps=max_sweeps,
            monotone_tol=monotone_tol, solver_cfg=solver_cfg,
        )
        u_new = aux.u_star.values
        v_new = aux.v_star.values
        if damping < 1.0:
            u_new = z1.values + damping * (u_new - z1.values)
            v_new = z2.values + damping * (v_new - z2.values)
        diff = max(_c1_diff(mesh, u_new, z1.values),
                   _c1_diff(mesh, v_new, z2.values))
        z1 = ScalarField(mesh, u_new)
        z2 = ScalarField(mesh, v_new)

        for zf, w in ((z1, "u"), (z2, "v")):
            ok, margins = in_K(zf, w, kcfg, pair, tol=in_k_tol)
            if not ok:
                bad = {k: v for k, v in margins.items() if v < -in_k_tol}
                raise InvarianceError(
                    f"outer iterate {n} left the {w}-set at {bad}; consider a "
                    "K override (calibrate-k) or a larger C"
                )
        growth = _growth_check(pair, kcfg, spec_f, spec_g, z1, z2, z1, z2)
        outer_trace.append({"outer": n, "c1_diff": diff,
                            "sweeps": aux.sweeps,
                            "growth_ok": growth["f_ok"] and growth["g_ok"]})
        if verbose:
            print(f"outer {n:2d}: c1 diff {diff:.3e} after {aux.sweeps} sweeps")
        if diff < tol_outer:
            return _final_report(pair, spec_f, spec_g, kcfg, z1, z2, n, True,
                                 outer_trace, growth, aux, in_k_tol)
    raise NonConvergenceError(
        f"Picard loop did not contract below {tol_outer:.1e} within "
        f"{max_outer} outer iterations (last diff {outer_trace[-1]['c1_diff']:.3e})",
        trace=outer_trace,
    )


def _final_report(pair, spec_f, spec_g, kcfg, u, v, iterations, converged,
                  outer_trace, growth, aux, in_k_tol):
    res_u, res_v = system_residuals(pair.mesh, pair.p, pair.q, spec_f, spec_g,
                                    u, v)
    c0t, c1t = bound_ratios(u)
    c0tp, c1tp = bound_ratios(v)
    in_u, _ = in_K(u, "u", kcfg, pair, tol=in_k_tol)
    in_v, _ = in_K(v, "v", kcfg, pair, tol=in_k_tol)
    return SolutionReport(
        u=u, v=v, pair=pair, outer_iterations=iterations, converged=converged,
        residual_u=res_u, residual_v=res_v, c0_tilde=c0t, c1_tilde=c1t,
        c0_tilde_prime=c0tp, c1_tilde_prime=c1tp, in_K_u=in_u, in_K_v=in_v,
        kcfg=kcfg, outer_trace=outer_trace, growth_diagnostics=growth,
        aux=aux,
    )


def system_residuals(mesh, p, q, spec_f, spec_g, u: ScalarField,
                     v: ScalarField):
    """Sup norms of the full-system weak residuals with self gradients."""
    s1 = mesh.interpolate_at_barycenters(u.values)
    s2 = mesh.interpolate_at_barycenters(v.values)
    xi1 = gradient(u).magnitudes()
    xi2 = gradient(v).magnitudes()
    x = mesh.barycenters
    f_val = evaluate(spec_f, x, s1, s2, xi1, xi2)
    g_val = evaluate(spec_g, x, s1, s2, xi1, xi2)
    res_u = float(np.max(np.abs(residual(PlapProblem(mesh, p, f_val), u))))
    res_v = float(np.max(np.abs(residual(PlapProblem(mesh, q, g_val), v))))
    return res_u, res_v


@dataclass
class VerifyResult:
    passed: bool
    residual_u: float
    residual_v: float
    residual_ok: bool
    c0_tilde: float
    c1_tilde: float
    c0_tilde_prime: float
    c1_tilde_prime: float
    c0_floor: float
    c1_cap: float
    bounds_ok: bool
    rectangle_ok: bool

    def report(self):
        return {
            "passed": self.passed,
            "residual": {"u": self.residual_u, "v": self.residual_v,
                         "ok": self.residual_ok},
            "constants": {
                "c0_tilde": self.c0_tilde, "c1_tilde": self.c1_tilde,
                "c0_tilde_prime": self.c0_tilde_prime,
                "c1_tilde_prime": self.c1_tilde_prime,
                "c0_floor": self.c0_floor, "c1_cap": self.c1_cap,
            },
            "bounds_ok": self.bounds_ok,
            "rectangle_ok": self.rectangle_ok,
        }


def verify(u: ScalarField, v: ScalarField, pair: BarrierPair, spec_f, spec_g,
           tol: float = 1e-6, rect_tol: float = 1e-9) -> VerifyResult:
    """Final verdict: self-gradient residuals, distance-ratio windows,
    rectangle membership.  Never raises on failure; the verdict carries it.

    The ratio windows are checked against the barrier chain: both lower
    ratios must reach C^-1 l (within tol) and both upper ratios must stay
    under C max(c1, c1') (within tol).
    """
    mesh = pair.mesh
    res_u, res_v = system_residuals(mesh, pair.p, pair.q, spec_f, spec_g, u, v)
    residual_ok = res_u < tol and res_v < tol
    c0t, c1t = bound_ratios(u)
    c0tp, c1tp = bound_ratios(v)
    c0_floor = pair.constants.l / pair.C
    c1_cap = pair.C * max(pair.c1, pair.c1p)
    bounds_ok = (
        min(c0t, c0tp) > 0.0
        and min(c0t, c0tp) >= c0_floor - tol
        and max(c1t, c1tp) <= c1_cap + tol
    )
    rect = (
        float(np.min(u.values - pair.u_low.values)) >= -rect_tol
        and float(np.min(pair.u_up.values - u.values)) >= -rect_tol
        and float(np.min(v.values - pair.v_low.values)) >= -rect_tol
        and float(np.min(pair.v_up.values - v.values)) >= -rect_tol
    )
    return VerifyResult(
        passed=residual_ok and bounds_ok and rect,
        residual_u=res_u, residual_v=res_v, residual_ok=residual_ok,
        c0_tilde=c0t, c1_tilde=c1t, c0_tilde_prime=c0tp, c1_tilde_prime=c1tp,
        c0_floor=c0_floor, c1_cap=c1_cap,
        bounds_ok=bounds_ok, rectangle_ok=rect,
    )
