"""First Dirichlet eigenpair of the p-Laplacian by inverse power iteration.

The iteration lifts the previous iterate through one p-Laplacian solve,

    -Lap_p w = phi_k^(p-1),    phi_{k+1} = w / ||w||_inf,

and reads the eigenvalue off the Rayleigh quotient
int |grad phi|^p / int phi^p (barycentric quadrature in the denominator,
exact per-element gradients in the numerator).  The start iterate is the
torsion function, which is positive and already has the right boundary
layer.  Normalizing by the sup norm makes ||phi||_inf = 1, so the upper
distance-ratio constant of the eigenfield doubles as its Lipschitz-scale
bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, ScalarField, bound_ratios, gradient
from .plap import (NonConvergenceError, PlapProblem, SolverConfig,
                   residual, solve_dirichlet, torsion_function)


@dataclass
class EigenPair:
    p: float
    lam: float
    phi: ScalarField
    iterations: int
    residual: float

    def report(self):
        return {
            "p": self.p,
            "lambda": self.lam,
            "iterations": self.iterations,
            "residual": self.residual,
            "sup_phi": self.phi.sup(),
        }


@dataclass
class ComparisonConstants:
    """Distance-ratio and cross-field comparison constants of a pair of
    normalized eigenfields phi_p, phi_q.

    l1, l2 bound phi_q / phi_p from below and above on interior nodes;
    l and l_hat bound phi/d over both fields; M is the common sup norm.
    Each extremum records the node coordinates achieving it.
    """

    l1: float
    l2: float
    l: float
    l_hat: float
    M: float
    where: dict = field(default_factory=dict)

    def report(self):
        out = {"l1": self.l1, "l2": self.l2, "l": self.l, "l_hat": self.l_hat,
               "M": self.M}
        out["where"] = {k: [float(c) for c in v] for k, v in self.where.items()}
        return out


def rayleigh_quotient(phi: ScalarField, p: float) -> float:
    m = phi.mesh
    g = gradient(phi)
    num = float(np.dot(g.magnitudes() ** p, m.volumes))
    phi_bar = m.interpolate_at_barycenters(phi.values)
    den = float(np.dot(np.abs(phi_bar) ** p, m.volumes))
    return num / den


def first_eigenpair(mesh: Mesh, p: float, tol: float = 1e-10,
                    max_iter: int = 300, cfg: SolverConfig | None = None,
                    verbose: bool = False) -> EigenPair:
    """Inverse power iteration for the first eigenpair, ||phi||_inf = 1."""
    cfg = cfg or SolverConfig()
    u0, _ = torsion_function(mesh, p, cfg)
    phi = u0.values / np.max(u0.values)
    lam = rayleigh_quotient(ScalarField(mesh, phi), p)
    for it in range(1, max_iter + 1):
        rhs_bar = mesh.interpolate_at_barycenters(phi) ** (p - 1.0)
        w, _ = solve_dirichlet(PlapProblem(mesh, p, rhs_bar), cfg, initial=phi)
        phi_new = w.values / np.max(w.values)
        lam_new = rayleigh_quotient(ScalarField(mesh, phi_new), p)
        dphi = float(np.max(np.abs(phi_new - phi)))
        dlam = abs(lam_new - lam) / max(1.0, abs(lam_new))
        phi, lam = phi_new, lam_new
        if verbose:
            print(f"  eigen p={p}: it {it:3d} lambda {lam:.10f} dphi {dphi:.2e}")
        if dphi < tol and dlam < tol:
            fld = ScalarField(mesh, phi)
            rhs_bar = mesh.interpolate_at_barycenters(phi) ** (p - 1.0)
            res = residual(PlapProblem(mesh, p, lam * rhs_bar), fld)
            return EigenPair(p=p, lam=lam, phi=fld, iterations=it,
                             residual=float(np.max(np.abs(res))))
    raise NonConvergenceError(
        f"inverse power iteration for p={p} did not stabilize within "
        f"{max_iter} iterations"
    )


def comparison_constants(pair_p: EigenPair, pair_q: EigenPair) -> ComparisonConstants:
    """Discrete comparison constants of two normalized eigenfields.

    The nodewise sandwich inequalities they encode are re-asserted here
    rather than assumed from the construction.
    """
    mesh = pair_p.phi.mesh
    if pair_q.phi.mesh is not mesh:
        raise ValueError("eigenpairs must share a mesh")
    idx = mesh.interior_idx
    fp = pair_p.phi.values[idx]
    fq = pair_q.phi.values[idx]
    if np.any(fp <= 0.0) or np.any(fq <= 0.0):
        raise ValueError("degenerate eigenfield: nonpositive interior value")
    ratio = fq / fp
    i1, i2 = int(np.argmin(ratio)), int(np.argmax(ratio))
    l1, l2 = float(ratio[i1]), float(ratio[i2])

    lo_p, hi_p = bound_ratios(pair_p.phi)
    lo_q, hi_q = bound_ratios(pair_q.phi)
    l = min(lo_p, lo_q)
    l_hat = max(hi_p, hi_q)
    M = max(pair_p.phi.sup(), pair_q.phi.sup())

    d = mesh.dist[idx]
    where = {
        "l1": mesh.nodes[idx[i1]],
        "l2": mesh.nodes[idx[i2]],
        "l": mesh.nodes[idx[int(np.argmin(np.minimum(fp, fq) / d))]],
        "l_hat": mesh.nodes[idx[int(np.argmax(np.maximum(fp, fq) / d))]],
    }
    cc = ComparisonConstants(l1=l1, l2=l2, l=l, l_hat=l_hat, M=M, where=where)

    # independent nodewise assertions of the sandwich inequalities
    tol = 1e-12 * max(1.0, l_hat)
    assert np.all(l1 * fp <= fq + tol) and np.all(fq <= l2 * fp + tol)
    assert np.all(l * d <= fp + tol) and np.all(l * d <= fq + tol)
    assert np.all(fp <= l_hat * d + tol) and np.all(fq <= l_hat * d + tol)
    return cc
