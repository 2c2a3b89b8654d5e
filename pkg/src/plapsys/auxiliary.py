"""Monotone iteration for the frozen-gradient auxiliary system.

With the gradients of the coupling terms frozen at fields (z1, z2), the
system decouples per sweep.  A singular zeroth-order shift with coefficient
rho_hat is added to both sides so that the shifted right-hand sides

    f_hat = f + rho_hat d^(alpha1+beta1-(p-1)) s1^(p-1)
    g_hat = g + rho_hat d^(alpha2+beta2-(q-1)) s2^(q-1)

become nondecreasing in the own variable on the barrier rectangle; the
iteration initialized at the lower (upper) barrier pair is then nodewise
nondecreasing (nonincreasing) under the discrete comparison principle and
converges to the smallest (biggest) solution between the barriers.  The
shift cancels identically at a fixed point, so convergence is judged on the
unshifted residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .barriers import BarrierPair
from .hypotheses import evaluate
from .mesh import ScalarField, gradient
from .plap import (NonConvergenceError, PlapProblem, SingularShift,
                   SolverConfig, residual, solve_dirichlet)


class MonotonicityError(RuntimeError):
    """An iterate left the rectangle or broke sweep monotonicity."""


def rho_hat(spec_f, spec_g, C: float, l: float, l_hat: float, p: float,
            q: float) -> float:
    """Shift coefficient: max of the two monotonization branches.

    Degenerate envelopes (M = 0) need no shift.
    """
    ef, eg = spec_f.exponents, spec_g.exponents
    branch_f = (-ef.alpha * ef.M / (p - 1.0)
                * (l / C) ** (ef.alpha - p + 1.0)
                * l_hat ** ef.beta * C ** (-ef.beta))
    branch_g = (-eg.beta * eg.M / (q - 1.0)
                * (l / C) ** (eg.beta - q + 1.0)
                * l_hat ** eg.alpha * C ** (-eg.alpha))
    return max(branch_f, branch_g, 0.0)


@dataclass(frozen=True)
class ShiftParams:
    rho_hat: float
    exponent_p: float  # alpha1 + beta1 - (p-1)
    exponent_q: float  # alpha2 + beta2 - (q-1)

    def __post_init__(self):
        if self.rho_hat < 0.0:
            raise ValueError("rho_hat must be nonnegative")


def make_shift(spec_f, spec_g, pair: BarrierPair, safety: float = 1.25) -> ShiftParams:
    """ShiftParams for a certified pair.

    The formula value is inflated by `safety` (>= 1): the monotonization
    bound uses the nodal ratio floor l, while the iteration evaluates fields
    at barycenters where interpolated ratios can undershoot l by an O(h)
    sliver on elements crossed by ridges of d.
    """
    if safety < 1.0:
        raise ValueError("safety factor must be at least 1")
    ef, eg = spec_f.exponents, spec_g.exponents
    cc = pair.constants
    rho = rho_hat(spec_f, spec_g, pair.C, cc.l, cc.l_hat, pair.p, pair.q)
    return ShiftParams(
        rho_hat=safety * rho,
        exponent_p=ef.alpha + ef.beta - (pair.p - 1.0),
        exponent_q=eg.alpha + eg.beta - (pair.q - 1.0),
    )


def shifted_rhs(spec_f, spec_g, shift: ShiftParams, x, d, s1, s2, xi1, xi2,
                p: float, q: float):
    """(f_hat, g_hat) at points with boundary distance d > 0."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if np.any(s1 <= 0.0) or np.any(s2 <= 0.0):
        raise ValueError("shifted right-hand side needs positive s1, s2")
    f = evaluate(spec_f, x, s1, s2, xi1, xi2)
    g = evaluate(spec_g, x, s1, s2, xi1, xi2)
    d = np.asarray(d, dtype=float)
    f_hat = f + shift.rho_hat * d ** shift.exponent_p * s1 ** (p - 1.0)
    g_hat = g + shift.rho_hat * d ** shift.exponent_q * s2 ** (q - 1.0)
    return f_hat, g_hat


@dataclass
class AuxSolution:
    u_star: ScalarField
    v_star: ScalarField
    sweeps: int
    converged: bool
    residual_u: float
    residual_v: float
    trace: list = field(default_factory=list)
    contraction: float = float("nan")

    def trace_json_lines(self):
        return "\n".join(json.dumps(t) for t in self.trace)


def _barycentric_state(mesh, w1, w2):
    s1 = mesh.interpolate_at_barycenters(w1)
    s2 = mesh.interpolate_at_barycenters(w2)
    return s1, s2


def monotone_solve(z1: ScalarField, z2: ScalarField, pair: BarrierPair,
                   spec_f, spec_g, direction: str = "from_below",
                   shift: ShiftParams | None = None,
                   tol_inner: float = 1e-8, max_sweeps: int = 200,
                   monotone_tol: float = 1e-10,
                   solver_cfg: SolverConfig | None = None,
                   sweep_order: str = "jacobi",
                   shift_safety: float = 1.25,
                   verbose: bool = False) -> AuxSolution:
    """Monotone sweep iteration between the barriers with frozen gradients.

    Iterates are never clamped; leaving the rectangle or breaking sweep
    monotonicity beyond monotone_tol raises MonotonicityError (that means
    the shift or C is wrong, and clamping would hide it).
    """
    if direction not in ("from_below", "from_above"):
        raise ValueError("direction must be from_below or from_above")
    if sweep_order not in ("jacobi", "gauss_seidel"):
        raise ValueError("sweep_order must be jacobi or gauss_seidel")
    mesh = pair.mesh
    p, q = pair.p, pair.q
    shift = shift or make_shift(spec_f, spec_g, pair, safety=shift_safety)
    solver_cfg = solver_cfg or SolverConfig()
    xi1 = gradient(z1).magnitudes()
    xi2 = gradient(z2).magnitudes()
    d_bar = mesh.dist_bar
    xbar = mesh.barycenters

    down = direction == "from_above"
    w1 = np.array((pair.u_up if down else pair.u_low).values)
    w2 = np.array((pair.v_up if down else pair.v_low).values)
    lo1, hi1 = pair.u_low.values, pair.u_up.values
    lo2, hi2 = pair.v_low.values, pair.v_up.values

    prob_u = PlapProblem(mesh, p, rhs=np.zeros(mesh.n_elems),
                         shift=SingularShift(shift.rho_hat, shift.exponent_p))
    prob_v = PlapProblem(mesh, q, rhs=np.zeros(mesh.n_elems),
                         shift=SingularShift(shift.rho_hat, shift.exponent_q))

    trace = []
    diffs = []
    for sweep in range(1, max_sweeps + 1):
        s1, s2 = _barycentric_state(mesh, w1, w2)
        f_hat, g_hat = shifted_rhs(spec_f, spec_g, shift, xbar, d_bar,
                                   s1, s2, xi1, xi2, p, q)
        prob_u.rhs = f_hat
        w1_new, _ = solve_dirichlet(prob_u, solver_cfg, initial=w1)
        if sweep_order == "gauss_seidel":
            s1g, _ = _barycentric_state(mesh, w1_new.values, w2)
            _, g_hat = shifted_rhs(spec_f, spec_g, shift, xbar, d_bar,
                                   s1g, s2, xi1, xi2, p, q)
        prob_v.rhs = g_hat
        w2_new, _ = solve_dirichlet(prob_v, solver_cfg, initial=w2)

        step1 = w1_new.values - w1
        step2 = w2_new.values - w2
        sgn = -1.0 if down else 1.0
        mono_viol = max(float(np.max(-sgn * step1)), float(np.max(-sgn * step2)))
        rect_viol = max(
            float(np.max(lo1 - w1_new.values)), float(np.max(w1_new.values - hi1)),
            float(np.max(lo2 - w2_new.values)), float(np.max(w2_new.values - hi2)),
        )
        sup_u = float(np.max(np.abs(step1)))
        sup_v = float(np.max(np.abs(step2)))
        w1, w2 = w1_new.values, w2_new.values

        # unshifted residual of the current iterate (own values, frozen grads)
        s1, s2 = _barycentric_state(mesh, w1, w2)
        f_cur = evaluate(spec_f, xbar, s1, s2, xi1, xi2)
        g_cur = evaluate(spec_g, xbar, s1, s2, xi1, xi2)
        res_u = float(np.max(np.abs(residual(
            PlapProblem(mesh, p, f_cur), ScalarField(mesh, w1)))))
        res_v = float(np.max(np.abs(residual(
            PlapProblem(mesh, q, g_cur), ScalarField(mesh, w2)))))

        monotone_ok = mono_viol <= monotone_tol and rect_viol <= monotone_tol
        trace.append({"sweep": sweep, "sup_diff_u": sup_u, "sup_diff_v": sup_v,
                      "monotone_ok": monotone_ok, "residual_u": res_u,
                      "residual_v": res_v})
        if verbose:
            print(f"  sweep {sweep:3d}: diff ({sup_u:.3e}, {sup_v:.3e}) "
                  f"res ({res_u:.3e}, {res_v:.3e})")
        if not monotone_ok:
            kind = "monotonicity" if mono_viol > monotone_tol else "rectangle"
            viol = max(mono_viol, rect_viol)
            where = _worst_node(mesh, step1, step2, lo1, hi1, lo2, hi2, w1, w2,
                                sgn)
            raise MonotonicityError(
                f"{kind} violation {viol:.3e} beyond tolerance "
                f"{monotone_tol:.1e} at sweep {sweep}, node {where}; "
                "the shift coefficient or C is too small for this mesh"
            )
        diffs.append(max(sup_u, sup_v))
        if max(sup_u, sup_v) < tol_inner:
            return AuxSolution(
                u_star=ScalarField(mesh, w1), v_star=ScalarField(mesh, w2),
                sweeps=sweep, converged=True, residual_u=res_u,
                residual_v=res_v, trace=trace,
                contraction=_contraction(diffs),
            )
    raise NonConvergenceError(
        f"monotone iteration did not reach tol {tol_inner:.1e} within "
        f"{max_sweeps} sweeps (last diff {diffs[-1]:.3e}, contraction "
        f"{_contraction(diffs):.3f})",
        trace=trace,
    )


def _worst_node(mesh, step1, step2, lo1, hi1, lo2, hi2, w1, w2, sgn):
    viols = np.maximum.reduce([
        -sgn * step1, -sgn * step2, lo1 - w1, w1 - hi1, lo2 - w2, w2 - hi2,
    ])
    i = int(np.argmax(viols))
    return tuple(float(c) for c in mesh.nodes[i])


def _contraction(diffs):
    """Empirical contraction factor over the tail of the sweep diffs."""
    tail = [d for d in diffs[-6:] if d > 0.0]
    if len(tail) < 2:
        return float("nan")
    ratios = [tail[i + 1] / tail[i] for i in range(len(tail) - 1)]
    return float(np.exp(np.mean(np.log(ratios))))


def singular_envelope(pair: BarrierPair, spec_f, spec_g, z1: ScalarField,
                      z2: ScalarField):
    """Smallest discrete constants (C1, C2) bounding the envelope ceilings
    by C1 d^alpha1 and C2 d^beta2 over interior nodes and rectangle extremes.

    Diagnostic for the integrability surrogate: finite C1, C2 are what make
    the singular right-hand sides integrable against the barriers.
    """
    mesh = pair.mesh
    idx = mesh.interior_idx
    ef, eg = spec_f.exponents, spec_g.exponents
    d = mesh.dist[idx]
    g1 = gradient(z1).node_magnitudes()[idx]
    g2 = gradient(z2).node_magnitudes()[idx]
    env_f = (ef.M * pair.u_low.values[idx] ** ef.alpha
             * pair.v_up.values[idx] ** ef.beta
             + g1 ** ef.gamma + g2 ** ef.theta)
    env_g = (eg.M * pair.u_up.values[idx] ** eg.alpha
             * pair.v_low.values[idx] ** eg.beta
             + g1 ** eg.gamma + g2 ** eg.theta)
    C1 = float(np.max(env_f * d ** (-ef.alpha)))
    C2 = float(np.max(env_g * d ** (-eg.beta)))
    return C1, C2
