"""Barrier construction, closed-form admissibility search and pointwise
certification.

Lower barriers are scaled first eigenfields (u_low = phi_p / C), upper
barriers scaled torsion functions (u_up = C * xi_1).  Both have p-Laplacians
in closed form by (p-1)-homogeneity of the operator, so certification never
differentiates discrete fields: it compares the analytic operator values
against the admissibility envelopes at interior nodes, with the coupling
variable frozen at its binding rectangle extreme (the envelopes are monotone
in the coupling variable, which is what makes the extremes sufficient).

find_C doubles C from c_start until the ordering, subsolution and
supersolution conditions all hold with a ratio margin, evaluating the
supersolution chain at the interior node where the distance power is
weakest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import ComparisonConstants, EigenPair
from .mesh import ScalarField, bound_ratios, c1_norm, gradient


class OrderingError(ValueError):
    """Barrier ordering u_low <= u_up fails somewhere: C is too small."""


class InfeasibleSearchError(RuntimeError):
    """The doubling search hit its cap; carries the failing conditions."""

    def __init__(self, message, failing=None):
        super().__init__(message)
        self.failing = failing or []


class LatticeError(ValueError):
    """Lattice combination would violate the barrier ordering."""


@dataclass
class IneqRecord:
    name: str
    margin: float
    location: tuple | None = None
    lhs: float | None = None
    rhs: float | None = None

    @property
    def passed(self):
        return self.margin >= 0.0

    def report(self):
        out = {"name": self.name, "margin": self.margin, "passed": self.passed}
        if self.location is not None:
            out["location"] = [float(c) for c in self.location]
        if self.lhs is not None:
            out["lhs"] = self.lhs
        if self.rhs is not None:
            out["rhs"] = self.rhs
        return out


@dataclass
class CertificationReport:
    C: float
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def entry(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def report(self):
        return {"C": self.C, "passed": self.passed,
                "inequalities": [e.report() for e in self.entries]}


@dataclass
class BarrierPair:
    """Ordered barrier rectangle with per-node analytic operator values.

    op_* arrays hold the strong-form -Lap_p (resp. -Lap_q) of each barrier
    at the nodes, which is what makes re-certification of lattice
    combinations possible without symbolic knowledge of the fields.
    """

    C: float
    p: float
    q: float
    u_low: ScalarField
    v_low: ScalarField
    u_up: ScalarField
    v_up: ScalarField
    op_u_low: np.ndarray
    op_v_low: np.ndarray
    op_u_up: np.ndarray
    op_v_up: np.ndarray
    constants: ComparisonConstants
    c0: float
    c1: float
    c0p: float
    c1p: float
    R1: float
    R2: float

    @property
    def mesh(self):
        return self.u_low.mesh

    def summary(self):
        return {
            "C": self.C, "p": self.p, "q": self.q,
            "c0": self.c0, "c1": self.c1, "c0_prime": self.c0p,
            "c1_prime": self.c1p, "R1": self.R1, "R2": self.R2,
            "comparison": self.constants.report(),
        }


def torsion_constants(xi: ScalarField):
    """Distance-ratio window (c0, c1) of a torsion field over interior nodes."""
    return bound_ratios(xi)


@dataclass
class CSearchConfig:
    c_start: float = 2.0
    c_cap: float = float(2 ** 40)
    margin_factor: float = 1.05


def build(C: float, eig_p: EigenPair, eig_q: EigenPair, xi1: ScalarField,
          xi2: ScalarField, kp: float, kq: float, strict: bool = True) -> BarrierPair:
    """Assemble the barrier pair at a given C.

    Raises OrderingError when the rectangle would be empty somewhere
    (strict=False skips the check so that deliberately broken pairs can be
    fed to certify in tests).
    """
    if C <= 1.0:
        raise ValueError("C must exceed 1")
    mesh = eig_p.phi.mesh
    for f in (eig_q.phi, xi1, xi2):
        if f.mesh is not mesh:
            raise ValueError("all input fields must share a mesh")
    p, q = eig_p.p, eig_q.p
    cc = _comparison(eig_p, eig_q)
    c0, c1 = torsion_constants(xi1)
    c0p, c1p = torsion_constants(xi2)
    u_low = ScalarField(mesh, eig_p.phi.values / C)
    v_low = ScalarField(mesh, eig_q.phi.values / C)
    u_up = ScalarField(mesh, C * xi1.values)
    v_up = ScalarField(mesh, C * xi2.values)
    pair = BarrierPair(
        C=C, p=p, q=q, u_low=u_low, v_low=v_low, u_up=u_up, v_up=v_up,
        op_u_low=C ** (1.0 - p) * eig_p.lam * eig_p.phi.values ** (p - 1.0),
        op_v_low=C ** (1.0 - q) * eig_q.lam * eig_q.phi.values ** (q - 1.0),
        op_u_up=np.full(mesh.n_nodes, C ** (p - 1.0)),
        op_v_up=np.full(mesh.n_nodes, C ** (q - 1.0)),
        constants=cc, c0=c0, c1=c1, c0p=c0p, c1p=c1p,
        R1=max(c1_norm(xi1), kp), R2=max(c1_norm(xi2), kq),
    )
    if strict:
        idx = mesh.interior_idx
        for name, lo, up in (("u", u_low, u_up), ("v", v_low, v_up)):
            gap = up.values[idx] - lo.values[idx]
            if np.min(gap) < 0.0:
                i = idx[int(np.argmin(gap))]
                raise OrderingError(
                    f"C={C} too small: {name}-barriers cross at "
                    f"{tuple(mesh.nodes[i])} (gap {np.min(gap):.3e})"
                )
    return pair


def _comparison(eig_p, eig_q):
    from .eigen import comparison_constants

    return comparison_constants(eig_p, eig_q)


def _closed_form_conditions(C, spec_f, spec_g, eig_p, eig_q, cc, c0, c1, c0p,
                            c1p, R1, R2, dmax, ratio_u, ratio_v):
    """The ordering / subsolution / supersolution conditions at a given C,
    each as (name, lhs, rhs) with the convention lhs <= rhs means pass."""
    ef, eg = spec_f.exponents, spec_g.exponents
    p, q = eig_p.p, eig_q.p
    M = cc.M
    conds = [
        ("ordering_u", 1.0, C * C * ratio_u),
        ("ordering_v", 1.0, C * C * ratio_v),
        ("subsolution_f",
         C ** (-(p - 1.0 - ef.alpha - ef.beta)) * eig_p.lam
         * cc.l1 ** (-ef.beta) * M ** (p - 1.0 - ef.alpha - ef.beta),
         ef.m),
        ("subsolution_g",
         C ** (-(q - 1.0 - eg.alpha - eg.beta)) * eig_q.lam
         * cc.l2 ** eg.alpha * M ** (q - 1.0 - eg.alpha - eg.beta),
         eg.m),
    ]
    # supersolution chains, distance power at its weakest interior node
    bracket_f = 1.0 - (C ** (ef.gamma - (p - 1.0)) * R1 ** ef.gamma
                       + C ** (ef.theta - (p - 1.0)) * R2 ** ef.theta)
    bracket_g = 1.0 - (C ** (eg.gamma - (q - 1.0)) * R1 ** eg.gamma
                       + C ** (eg.theta - (q - 1.0)) * R2 ** eg.theta)
    lhs_f = (C ** (p - 1.0 - ef.alpha - ef.beta) * c0 ** (-ef.alpha)
             * c1p ** (-ef.beta) * dmax ** (-(ef.alpha + ef.beta)) * bracket_f)
    lhs_g = (C ** (q - 1.0 - eg.alpha - eg.beta) * c1 ** (-eg.alpha)
             * c0p ** (-eg.beta) * dmax ** (-(eg.alpha + eg.beta)) * bracket_g)
    conds.append(("supersolution_f", ef.M, lhs_f))
    conds.append(("supersolution_g", eg.M, lhs_g))
    return conds


def find_C(spec_f, spec_g, eig_p: EigenPair, eig_q: EigenPair,
           xi1: ScalarField, xi2: ScalarField, kp: float, kq: float,
           cfg: CSearchConfig | None = None):
    """Doubling search for an admissible C; returns (C, CertificationReport).

    The report records each closed-form condition as a ratio margin
    rhs/lhs - margin_factor at the accepted C.  Raises InfeasibleSearchError
    at the cap, naming the conditions still failing.
    """
    cfg = cfg or CSearchConfig()
    mesh = eig_p.phi.mesh
    cc = _comparison(eig_p, eig_q)
    c0, c1 = torsion_constants(xi1)
    c0p, c1p = torsion_constants(xi2)
    R1 = max(c1_norm(xi1), kp)
    R2 = max(c1_norm(xi2), kq)
    idx = mesh.interior_idx
    d_int = mesh.dist[idx]
    dmax = float(np.max(d_int))
    # C-independent part of the nodewise ordering ratios: C^2 ratio >= 1
    ratio_u = float(np.min(xi1.values[idx] / eig_p.phi.values[idx]))
    ratio_v = float(np.min(xi2.values[idx] / eig_q.phi.values[idx]))

    C = cfg.c_start
    while True:
        conds = _closed_form_conditions(
            C, spec_f, spec_g, eig_p, eig_q, cc, c0, c1, c0p, c1p, R1, R2,
            dmax, ratio_u, ratio_v,
        )
        ok = all(rhs >= cfg.margin_factor * lhs for _, lhs, rhs in conds)
        if ok:
            rep = CertificationReport(C=C)
            argmax_d = tuple(
                float(c) for c in mesh.nodes[idx[int(np.argmax(d_int))]]
            )
            for name, lhs, rhs in conds:
                loc = argmax_d if name.startswith("supersolution") else None
                rep.entries.append(IneqRecord(
                    name=name, margin=rhs / lhs - cfg.margin_factor,
                    location=loc, lhs=lhs, rhs=rhs))
            return C, rep
        if C >= cfg.c_cap:
            failing = [n for n, lhs, rhs in conds
                       if rhs < cfg.margin_factor * lhs]
            raise InfeasibleSearchError(
                f"no admissible C up to cap {cfg.c_cap:g}; still failing: "
                + ", ".join(failing),
                failing=failing,
            )
        C *= 2.0


def _node_grad_mags(z: ScalarField):
    return gradient(z).node_magnitudes()


def certify(pair: BarrierPair, spec_f, spec_g, z1: ScalarField,
            z2: ScalarField, w_samples: int = 0, kcfg=None,
            seed: int = 515) -> CertificationReport:
    """Pointwise certification of the barrier pair at interior nodes.

    The coupling variable of each envelope is frozen at its binding
    rectangle extreme; w_samples > 0 additionally samples random fields
    inside the rectangle (seeded) and keeps the worst margin.  When kcfg is
    given, z1 and z2 are required to be members of the corresponding
    gradient-bounded sets.
    """
    if kcfg is not None:
        from .fixedpoint import in_K

        for z, which in ((z1, "u"), (z2, "v")):
            ok, why = in_K(z, which, kcfg, pair)
            if not ok:
                raise ValueError(
                    f"frozen field {which} outside its invariant set: {why}")
    mesh = pair.mesh
    idx = mesh.interior_idx
    ef, eg = spec_f.exponents, spec_g.exponents
    ulo = pair.u_low.values[idx]
    vlo = pair.v_low.values[idx]
    uup = pair.u_up.values[idx]
    vup = pair.v_up.values[idx]
    g1 = _node_grad_mags(z1)[idx]
    g2 = _node_grad_mags(z2)[idx]

    rng = np.random.default_rng(seed)

    def with_samples(extreme, lo, hi):
        fields = [extreme]
        for _ in range(w_samples):
            t = rng.uniform(0.0, 1.0, size=len(lo))
            fields.append(lo + t * (hi - lo))
        return fields

    rep = CertificationReport(C=pair.C)

    def add(name, margins):
        i = int(np.argmin(margins))
        rep.entries.append(IneqRecord(
            name=name, margin=float(margins[i]),
            location=tuple(float(c) for c in mesh.nodes[idx[i]])))

    add("ordering_u", uup - ulo)
    add("ordering_v", vup - vlo)

    # subsolutions: envelope floor must dominate the analytic operator
    sub_f = np.full(len(idx), np.inf)
    for w2 in with_samples(vlo, vlo, vup):
        sub_f = np.minimum(sub_f, ef.m * ulo ** ef.alpha * w2 ** ef.beta
                           - pair.op_u_low[idx])
    add("subsolution_f", sub_f)
    sub_g = np.full(len(idx), np.inf)
    for w1 in with_samples(ulo, ulo, uup):
        sub_g = np.minimum(sub_g, eg.m * w1 ** eg.alpha * vlo ** eg.beta
                           - pair.op_v_low[idx])
    add("subsolution_g", sub_g)

    # supersolutions: analytic operator must dominate the envelope ceiling
    sup_f = np.full(len(idx), np.inf)
    for w2 in with_samples(vup, vlo, vup):
        sup_f = np.minimum(sup_f, pair.op_u_up[idx]
                           - (ef.M * uup ** ef.alpha * w2 ** ef.beta
                              + g1 ** ef.gamma + g2 ** ef.theta))
    add("supersolution_f", sup_f)
    sup_g = np.full(len(idx), np.inf)
    for w1 in with_samples(uup, ulo, uup):
        sup_g = np.minimum(sup_g, pair.op_v_up[idx]
                           - (eg.M * w1 ** eg.alpha * vup ** eg.beta
                              + g1 ** eg.gamma + g2 ** eg.theta))
    add("supersolution_g", sup_g)
    return rep


def lattice_min(pa: BarrierPair, pb: BarrierPair) -> BarrierPair:
    """Nodewise min of the upper barriers and max of the lower barriers.

    Operator values follow the selected branch at each node, so the result
    re-certifies with a margin no worse than the worse input at each node.
    Raises LatticeError if the combination breaks the ordering.
    """
    mesh = pa.mesh
    if pb.mesh is not mesh:
        raise LatticeError("pairs live on different meshes")
    if (pa.p, pa.q) != (pb.p, pb.q):
        raise LatticeError("pairs have different exponents")

    def pick_min(fa, fb, oa, ob):
        take_a = fa.values <= fb.values
        vals = np.where(take_a, fa.values, fb.values)
        ops = np.where(take_a, oa, ob)
        return ScalarField(mesh, vals), ops

    def pick_max(fa, fb, oa, ob):
        take_a = fa.values >= fb.values
        vals = np.where(take_a, fa.values, fb.values)
        ops = np.where(take_a, oa, ob)
        return ScalarField(mesh, vals), ops

    u_up, op_u_up = pick_min(pa.u_up, pb.u_up, pa.op_u_up, pb.op_u_up)
    v_up, op_v_up = pick_min(pa.v_up, pb.v_up, pa.op_v_up, pb.op_v_up)
    u_low, op_u_low = pick_max(pa.u_low, pb.u_low, pa.op_u_low, pb.op_u_low)
    v_low, op_v_low = pick_max(pa.v_low, pb.v_low, pa.op_v_low, pb.op_v_low)

    idx = mesh.interior_idx
    for name, lo, up in (("u", u_low, u_up), ("v", v_low, v_up)):
        if np.min(up.values[idx] - lo.values[idx]) < 0.0:
            raise LatticeError(f"lattice combination empties the {name}-rectangle")

    C = min(pa.C, pb.C)
    c0, c1 = bound_ratios(ScalarField(mesh, u_up.values / C))
    c0p, c1p = bound_ratios(ScalarField(mesh, v_up.values / C))
    return BarrierPair(
        C=C, p=pa.p, q=pa.q, u_low=u_low, v_low=v_low, u_up=u_up, v_up=v_up,
        op_u_low=op_u_low, op_v_low=op_v_low, op_u_up=op_u_up,
        op_v_up=op_v_up, constants=pa.constants, c0=c0, c1=c1, c0p=c0p,
        c1p=c1p, R1=max(pa.R1, pb.R1), R2=max(pa.R2, pb.R2),
    )


