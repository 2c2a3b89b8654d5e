"""Structural hypotheses on the coupling nonlinearities.

The right-hand sides f(x, s1, s2, xi1, xi2) and g(x, s1, s2, xi1, xi2) are
admissible when they are pinched between product-power envelopes,

    m * s1^alpha * s2^beta  <=  value  <=  M * s1^alpha * s2^beta
                                           + |xi1|^gamma + |xi2|^theta,

with the exponent windows checked by validate(): the own-variable exponent
is singular (in (-1, 0)), the cross exponent positive, the exponent sums
sit in [0, p-1) resp. [0, q-1), and the gradient exponents stay strictly
below p-1 resp. q-1.  For role "f" the singular variable is s1 (alpha < 0);
for role "g" it is s2 (beta < 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ExponentSet:
    role: str  # "f" or "g"
    m: float
    M: float
    alpha: float
    beta: float
    gamma: float
    theta: float

    def __post_init__(self):
        if self.role not in ("f", "g"):
            raise ValueError(f"role must be 'f' or 'g', got {self.role!r}")

    @property
    def singular_exponent(self):
        return self.alpha if self.role == "f" else self.beta

    @property
    def cross_exponent(self):
        return self.beta if self.role == "f" else self.alpha


@dataclass(frozen=True)
class NonlinearitySpec:
    """Exponent data plus how to evaluate the nonlinearity.

    Canonical form: m * s1^alpha * s2^beta + a1*|xi1|^gamma + a2*|xi2|^theta
    with a1, a2 in [0, 1].  A custom evaluator(x, s1, s2, xi1, xi2) may be
    supplied; xi1, xi2 are gradient magnitudes.
    """

    exponents: ExponentSet
    a1: float = 0.0
    a2: float = 0.0
    evaluator: object = None

    def __post_init__(self):
        if self.evaluator is None and not (
            0.0 <= self.a1 <= 1.0 and 0.0 <= self.a2 <= 1.0
        ):
            raise ValueError("canonical gradient coefficients must lie in [0, 1]")


@dataclass
class CheckEntry:
    name: str
    passed: bool
    slack: float
    note: str = ""

    def report(self):
        out = {"name": self.name, "passed": self.passed, "slack": self.slack}
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def report(self):
        return {"passed": self.passed, "checks": [e.report() for e in self.entries]}


def _exponent_checks(es: ExponentSet, ex: float, label: str):
    """Shared admissibility checks; ex is the homogeneity ceiling p-1 or q-1.

    The sum chain 0 <= alpha+beta < |singular|+cross already forces the sign
    pattern, so the two sign entries are flagged as redundant but still
    checked.
    """
    sing = es.singular_exponent
    cross = es.cross_exponent
    ssum = es.alpha + es.beta
    spread = cross - sing  # equals -alpha+beta (f) or alpha-beta (g)
    checks = [
        CheckEntry(f"{label}.m_positive", es.m > 0, es.m),
        CheckEntry(f"{label}.M_ge_m", es.M >= es.m, es.M - es.m),
        CheckEntry(f"{label}.singular_exponent_above_-1", sing > -1.0, sing + 1.0),
        CheckEntry(f"{label}.singular_exponent_below_0", sing < 0.0, -sing,
                   note="implied by the sum chain"),
        CheckEntry(f"{label}.cross_exponent_positive", cross > 0.0, cross,
                   note="implied by the sum chain"),
        CheckEntry(f"{label}.sum_nonnegative", ssum >= 0.0, ssum),
        CheckEntry(f"{label}.sum_below_spread", ssum < spread, spread - ssum),
        CheckEntry(f"{label}.spread_below_homogeneity", spread < ex, ex - spread),
        CheckEntry(f"{label}.gamma_positive", es.gamma > 0.0, es.gamma),
        CheckEntry(f"{label}.theta_positive", es.theta > 0.0, es.theta),
        CheckEntry(f"{label}.gradient_exponents_below_homogeneity",
                   max(es.gamma, es.theta) < ex, ex - max(es.gamma, es.theta)),
    ]
    return checks


def validate(spec_f: ExponentSet, spec_g: ExponentSet, p: float, q: float) -> ValidationReport:
    if spec_f.role != "f" or spec_g.role != "g":
        raise ValueError("validate expects roles ('f', 'g') in that order")
    rep = ValidationReport()
    rep.entries += _exponent_checks(spec_f, p - 1.0, "f")
    rep.entries += _exponent_checks(spec_g, q - 1.0, "g")
    return rep


def _as_exponents(spec):
    return spec.exponents if isinstance(spec, NonlinearitySpec) else spec


def evaluate(spec: NonlinearitySpec, x, s1, s2, xi1, xi2):
    """Evaluate the nonlinearity; s1, s2 must be strictly positive.

    Arguments broadcast as numpy arrays; xi1, xi2 are gradient magnitudes.
    """
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if np.any(s1 <= 0.0) or np.any(s2 <= 0.0):
        raise ValueError("nonlinearity evaluated outside the positivity cone")
    if spec.evaluator is not None:
        return np.asarray(spec.evaluator(x, s1, s2, xi1, xi2), dtype=float)
    es = spec.exponents
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    out = es.m * s1 ** es.alpha * s2 ** es.beta
    if spec.a1 != 0.0:
        out = out + spec.a1 * np.abs(xi1) ** es.gamma
    if spec.a2 != 0.0:
        out = out + spec.a2 * np.abs(xi2) ** es.theta
    return out


def envelope_bounds(es: ExponentSet, s1, s2, xi1, xi2):
    """Lower and upper admissibility envelopes at the given samples."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    prod = s1 ** es.alpha * s2 ** es.beta
    lower = es.m * prod
    upper = es.M * prod + np.abs(xi1) ** es.gamma + np.abs(xi2) ** es.theta
    return lower, upper


def envelope_check(spec: NonlinearitySpec, s1, s2, xi1, xi2, x=None,
                   rtol: float = 1e-12):
    """Check the envelope inequalities on a sample set.

    Returns a dict with the worst lower/upper margins and a pass flag; a
    canonical spec with m = M and a1, a2 <= 1 passes with margin >= 0 by
    construction.
    """
    val = evaluate(spec, x, s1, s2, xi1, xi2)
    lower, upper = envelope_bounds(_as_exponents(spec), s1, s2, xi1, xi2)
    scale = np.maximum(1.0, np.abs(val))
    lo_margin = float(np.min((val - lower) / scale))
    up_margin = float(np.min((upper - val) / scale))
    return {
        "lower_margin": lo_margin,
        "upper_margin": up_margin,
        "passed": bool(lo_margin >= -rtol and up_margin >= -rtol),
        "samples": int(np.asarray(s1).size),
    }


def sample_cone(n: int, seed: int = 7041, s_range=(1e-4, 1e2), xi_range=(0.0, 1e2)):
    """Seeded log-uniform positivity-cone samples for envelope_check."""
    rng = np.random.default_rng(seed)
    lo, hi = np.log(s_range[0]), np.log(s_range[1])
    s1 = np.exp(rng.uniform(lo, hi, n))
    s2 = np.exp(rng.uniform(lo, hi, n))
    xi1 = rng.uniform(*xi_range, n)
    xi2 = rng.uniform(*xi_range, n)
    return s1, s2, xi1, xi2
