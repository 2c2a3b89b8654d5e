"""Dirichlet solves for the scalar p-Laplacian with an optional singular
zeroth-order shift.

The weak problem on a mesh is: find u, zero on the boundary, with

    sum_e |grad u|^(p-2) grad u . grad phi_i vol_e
        + int rho d^e |u|^(p-2) u phi_i  =  int rhs phi_i

for every interior node i.  All integrals use one-point barycentric
quadrature.  The nonlinearity is resolved by lagged diffusivity: the
weights (|grad u_k|^2 + eps^2)^((p-2)/2) (and the matching |u_k| weight on
the shift) are frozen, the linear system is factorized and solved, and the
unregularized residual decides convergence.  Damping starts at 1 and is
halved whenever the residual increases.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .mesh import GradientField, Mesh, ScalarField, gradient


class NonConvergenceError(RuntimeError):
    """Raised when the Picard loop exhausts max_iter; carries the trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SingularShift:
    """Zeroth-order term rho * d(x)^exponent * |u|^(p-2) u."""

    rho: float
    exponent: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("shift coefficient must be nonnegative")


@dataclass
class PlapProblem:
    mesh: Mesh
    p: float
    rhs: object  # nodal array, per-element barycenter array, or callable
    shift: SingularShift | None = None

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("p must exceed 1")
        if self.shift is not None and self.shift.exponent <= -self.p:
            raise ValueError("shift exponent must exceed -p")

    def rhs_at_barycenters(self):
        m = self.mesh
        if callable(self.rhs):
            return np.asarray(self.rhs(m.barycenters), dtype=float)
        arr = np.asarray(self.rhs, dtype=float)
        if arr.shape == (m.n_nodes,):
            return m.interpolate_at_barycenters(arr)
        if arr.shape == (m.n_elems,):
            return arr
        raise ValueError("rhs must have one value per node or per element")


@dataclass
class SolverConfig:
    grad_reg: float = 1e-8     # eps in the regularized diffusivity
    max_iter: int = 400
    tol_residual: float = 1e-10
    damping: float = 1.0
    verbose: bool = False


@dataclass
class IterationTrace:
    entries: list = field(default_factory=list)
    converged: bool = False

    def record(self, iteration, residual, damping):
        self.entries.append(
            {"iteration": iteration, "residual": residual, "damping": damping}
        )

    @property
    def iterations(self):
        return len(self.entries)

    @property
    def final_residual(self):
        return self.entries[-1]["residual"] if self.entries else float("nan")

    def to_json_lines(self):
        return "\n".join(json.dumps(e) for e in self.entries)


# Factorizations are reused when the assembled matrix is bitwise identical
# to a recent one (constant-coefficient case p = 2, repeated sweeps).
_FACT_CACHE: OrderedDict = OrderedDict()
_FACT_CACHE_SIZE = 8


def _factorize(A: sp.csr_matrix):
    key = (
        A.shape,
        hashlib.blake2b(A.indptr.tobytes(), digest_size=16).digest(),
        hashlib.blake2b(A.indices.tobytes(), digest_size=16).digest(),
        hashlib.blake2b(A.data.tobytes(), digest_size=16).digest(),
    )
    hit = _FACT_CACHE.get(key)
    if hit is not None:
        _FACT_CACHE.move_to_end(key)
        return hit
    lu = spla.splu(A.tocsc())
    _FACT_CACHE[key] = lu
    if len(_FACT_CACHE) > _FACT_CACHE_SIZE:
        _FACT_CACHE.popitem(last=False)
    return lu


def load_vector(mesh: Mesh, rhs_bar):
    """Nodal load int rhs phi_i under barycentric quadrature."""
    npe = mesh.elements.shape[1]
    contrib = rhs_bar * mesh.volumes / npe
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elements, contrib[:, None])
    return out


def _shift_bar_weight(problem: PlapProblem, u_bar, eps):
    s = problem.shift
    # lagged |u|^(p-2) factor, regularized like the diffusivity
    if problem.p == 2.0:
        mag = np.ones_like(u_bar)
    else:
        mag = (u_bar * u_bar + eps * eps) ** ((problem.p - 2.0) / 2.0)
    return s.rho * problem.mesh.dist_bar ** s.exponent * mag


def _assemble_matrix(problem: PlapProblem, u, eps):
    m = problem.mesh
    g = _kernels.element_gradients(
        np.ascontiguousarray(u), np.ascontiguousarray(m.elements),
        np.ascontiguousarray(m.gradop),
    )
    w = _kernels.diffusivity_weights(np.ascontiguousarray(g), problem.p, eps)
    data = _kernels.scale_local_matrices(
        np.ascontiguousarray(m.local_stiffness), np.ascontiguousarray(w)
    )
    npe = m.elements.shape[1]
    rows = np.repeat(m.elements, npe, axis=1).ravel()
    cols = np.tile(m.elements, (1, npe)).ravel()
    if problem.shift is not None:
        # barycentric mass block: int w u phi_i over an element contributes
        # w_bar vol / npe^2 to every (i, j) pair, consistent with residual()
        u_bar = m.interpolate_at_barycenters(u)
        wsh = _shift_bar_weight(problem, u_bar, eps) * m.volumes / (npe * npe)
        data = data + np.repeat(wsh, npe * npe)
    A = sp.coo_matrix((data, (rows, cols)), shape=(m.n_nodes, m.n_nodes)).tocsr()
    return A


def residual(problem: PlapProblem, u: ScalarField) -> np.ndarray:
    """Unregularized weak residual, one entry per node, zero on the boundary.

    Entry i is the p-Laplacian form plus the shift term minus the load,
    tested against the hat function of node i.
    """
    m = problem.mesh
    out = _kernels.plap_apply(
        np.ascontiguousarray(u.values), np.ascontiguousarray(m.elements),
        np.ascontiguousarray(m.gradop), np.ascontiguousarray(m.volumes),
        problem.p, 0.0, m.n_nodes,
    )
    if problem.shift is not None:
        u_bar = m.interpolate_at_barycenters(u.values)
        s = problem.shift
        wsh = (
            s.rho
            * m.dist_bar ** s.exponent
            * np.abs(u_bar) ** (problem.p - 2.0)
            * u_bar
        )
        out += load_vector(m, wsh)
    out -= load_vector(m, problem.rhs_at_barycenters())
    out[m.boundary_mask] = 0.0
    return out


def solve_dirichlet(problem: PlapProblem, cfg: SolverConfig | None = None,
                    initial: np.ndarray | None = None):
    """Solve the Dirichlet problem; returns (ScalarField, IterationTrace).

    Raises NonConvergenceError (with the trace attached) if the residual
    sup norm does not drop below cfg.tol_residual within cfg.max_iter.
    """
    cfg = cfg or SolverConfig()
    m = problem.mesh
    I = m.interior_idx
    b = load_vector(m, problem.rhs_at_barycenters())
    u = np.zeros(m.n_nodes)
    if initial is not None:
        u = np.array(initial, dtype=float)
        u[m.boundary_mask] = 0.0
    trace = IterationTrace()
    damping = cfg.damping
    prev_res = np.inf
    for it in range(1, cfg.max_iter + 1):
        A = _assemble_matrix(problem, u, cfg.grad_reg)
        lu = _factorize(A[I][:, I].tocsr())
        x = np.zeros(m.n_nodes)
        x[I] = lu.solve(b[I])
        u_new = u + damping * (x - u)
        res = float(np.max(np.abs(residual(problem, ScalarField(m, u_new)))))
        trace.record(it, res, damping)
        if cfg.verbose:
            print(f"  plap p={problem.p}: it {it:3d} residual {res:.3e} damping {damping:g}")
        u = u_new
        if res < cfg.tol_residual:
            trace.converged = True
            return ScalarField(m, u), trace
        if res > prev_res and damping > 1.0 / 64.0:
            damping *= 0.5
        prev_res = res
    raise NonConvergenceError(
        f"p-Laplacian solve stalled at residual {prev_res:.3e} "
        f"after {cfg.max_iter} iterations (tol {cfg.tol_residual:.1e})",
        trace=trace,
    )


def torsion_function(mesh: Mesh, p: float, cfg: SolverConfig | None = None):
    """Solution of -Lap_p u = 1 with zero boundary values."""
    ones = np.ones(mesh.n_elems)
    return solve_dirichlet(PlapProblem(mesh, p, ones), cfg)


def estimate_K(mesh: Mesh, p: float, probes=None, cfg: SolverConfig | None = None,
               seed: int = 1722):
    """Empirical lower estimate of the gradient-bound constant K.

    For each nonnegative probe rhs h, solve -Lap_p u = h and form
    ||grad u||_inf / ||h||_inf^(1/(p-1)); the estimate is the max over the
    probe set.  The default probes are the constant 1, the boundary
    distance, the inverse square root of the distance sampled at barycenters
    (finite there), and a seeded random positive nodal field.
    """
    if probes is None:
        rng = np.random.default_rng(seed)
        probes = [
            np.ones(mesh.n_nodes),
            mesh.dist.copy(),
            mesh.dist_bar ** (-0.5),
            rng.uniform(0.5, 1.5, size=mesh.n_nodes),
        ]
    best = 0.0
    for h in probes:
        arr = np.asarray(h, dtype=float)
        sup_h = float(np.max(np.abs(arr)))
        if sup_h == 0.0:
            continue
        u, _ = solve_dirichlet(PlapProblem(mesh, p, arr), cfg)
        ratio = gradient(u).sup() / sup_h ** (1.0 / (p - 1.0))
        best = max(best, ratio)
    return best
