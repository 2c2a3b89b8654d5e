import json

import numpy as np
import pytest

from plapsys.barriers import (BarrierPair, CSearchConfig, InfeasibleSearchError,
                              LatticeError, OrderingError, build, certify,
                              find_C, lattice_min, torsion_constants)
from plapsys.mesh import ScalarField


def test_find_c_reference_configuration(specs4_free, eig2_129, xi2_129, kp129):
    sf, sg = specs4_free
    C, rep = find_C(sf, sg, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)
    assert C == 16.0
    assert C >= np.pi ** 2
    assert rep.passed
    assert {e.name for e in rep.entries} == {
        "ordering_u", "ordering_v", "subsolution_f", "subsolution_g",
        "supersolution_f", "supersolution_g"}
    assert all(e.margin >= 0.0 for e in rep.entries)
    # the accepted C is the first admissible one: half of it must fail
    half = CSearchConfig(c_start=C / 2.0, c_cap=C / 2.0)
    with pytest.raises(InfeasibleSearchError):
        find_C(sf, sg, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129,
               cfg=half)


def test_find_c_binding_condition(specs4_free, eig2_129, xi2_129, kp129):
    sf, sg = specs4_free
    C, rep = find_C(sf, sg, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)
    margins = {e.name: e.margin for e in rep.entries}
    # the subsolution chain decides when the search stops
    binding = min(margins, key=margins.get)
    assert binding.startswith("subsolution")


def test_search_cap_raises_with_failing_names(specs4_free, eig2_129, xi2_129,
                                              kp129):
    sf, sg = specs4_free
    cfg = CSearchConfig(c_start=2.0, c_cap=4.0)
    with pytest.raises(InfeasibleSearchError) as exc:
        find_C(sf, sg, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129,
               cfg=cfg)
    assert exc.value.failing
    assert "subsolution" in str(exc.value)


def test_build_rejects_crossing_barriers(eig2_129, xi2_129, kp129):
    # at C = 2 the u-rectangle is empty near the boundary
    with pytest.raises(OrderingError) as exc:
        build(2.0, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)
    msg = str(exc.value)
    assert "C=2.0" in msg and "(" in msg  # names the crossing node
    with pytest.raises(ValueError, match="exceed 1"):
        build(1.0, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)
    # strict=False lets the crossing pair through for diagnostics
    broken = build(2.0, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129,
                   strict=False)
    idx = broken.mesh.interior_idx
    assert np.min(broken.u_up.values[idx] - broken.u_low.values[idx]) < 0.0


def test_pair_fields_and_operators(pair16, eig2_129, xi2_129):
    C = pair16.C
    assert np.array_equal(pair16.u_low.values, eig2_129.phi.values / C)
    assert np.array_equal(pair16.u_up.values, C * xi2_129.values)
    # p = 2: the scaled eigenfield has operator lambda phi / C, the scaled
    # torsion field has constant operator C
    assert np.allclose(pair16.op_u_low,
                       eig2_129.lam * eig2_129.phi.values / C)
    assert np.allclose(pair16.op_u_up, C)
    c0, c1 = torsion_constants(xi2_129)
    assert pair16.c0 == c0 and pair16.c1 == c1
    assert 0.0 < c0 < c1 < 1.0


def test_certify_reference_pair(pair16, specs4_free, zero_fields):
    sf, sg = specs4_free
    rep = certify(pair16, sf, sg, *zero_fields)
    assert rep.passed
    assert len(rep.entries) == 6
    assert all(e.margin >= 0.0 for e in rep.entries)
    assert all(e.location is not None for e in rep.entries)


def test_certify_flags_small_c(eig2_129, xi2_129, kp129, specs4_free,
                               zero_fields):
    sf, sg = specs4_free
    broken = build(2.0, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129,
                   strict=False)
    rep = certify(broken, sf, sg, *zero_fields)
    assert not rep.passed
    names = [e.name for e in rep.failures()]
    assert "ordering_u" in names and "ordering_v" in names
    assert rep.entry("ordering_u").margin < 0.0


def test_sampled_couplings_never_beat_the_extremes(pair16, specs4_free,
                                                   zero_fields):
    # the envelopes are monotone in the coupling variable, so random
    # in-rectangle samples cannot produce a worse margin than the frozen
    # extreme; the reports must agree entry for entry
    sf, sg = specs4_free
    rep0 = certify(pair16, sf, sg, *zero_fields, w_samples=0)
    rep3 = certify(pair16, sf, sg, *zero_fields, w_samples=3, seed=515)
    for e0, e3 in zip(rep0.entries, rep3.entries):
        assert e0.name == e3.name
        assert e0.margin == e3.margin


def test_certify_with_invariant_set_gate(pair16, specs4_free, kcfg16):
    # the zero field lies below the lower barrier, so gated certification
    # needs genuine rectangle members; the lower barriers qualify
    sf, sg = specs4_free
    rep = certify(pair16, sf, sg, pair16.u_low, pair16.v_low, kcfg=kcfg16)
    assert rep.passed
    runaway = ScalarField(pair16.mesh, 10.0 * pair16.u_up.values)
    with pytest.raises(ValueError, match="invariant set"):
        certify(pair16, sf, sg, runaway, pair16.v_low, kcfg=kcfg16)


def test_lattice_min_recertifies(pair16, eig2_129, xi2_129, kp129,
                                 specs4_free, zero_fields):
    sf, sg = specs4_free
    pair32 = build(32.0, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)
    combined = lattice_min(pair16, pair32)
    assert combined.C == 16.0
    # upper barriers take the nodewise min, lower the nodewise max
    assert np.array_equal(combined.u_up.values,
                          np.minimum(pair16.u_up.values, pair32.u_up.values))
    assert np.array_equal(combined.u_low.values,
                          np.maximum(pair16.u_low.values, pair32.u_low.values))
    rep = certify(combined, sf, sg, *zero_fields)
    assert rep.passed


def test_lattice_min_rejects_empty_rectangle(eig2_129, xi2_129, kp129):
    broken = build(2.0, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129,
                   strict=False)
    with pytest.raises(LatticeError, match="rectangle"):
        lattice_min(broken, broken)


def test_lattice_min_rejects_mismatched_pairs(pair16, eig2_129, xi2_129,
                                              kp129):
    from plapsys.eigen import first_eigenpair
    from plapsys.mesh import Domain, build_mesh
    from plapsys.plap import torsion_function

    other = build_mesh(Domain("interval", (1.0,)), 65)
    e_o = first_eigenpair(other, 2.0)
    xi_o, _ = torsion_function(other, 2.0)
    pair_o = build(16.0, e_o, e_o, xi_o, xi_o, kp129, kp129)
    with pytest.raises(LatticeError, match="mesh"):
        lattice_min(pair16, pair_o)


def test_mesh_mismatch_in_build(eig2_129, kp129):
    from plapsys.mesh import Domain, build_mesh
    from plapsys.plap import torsion_function

    other = build_mesh(Domain("interval", (1.0,)), 65)
    xi_o, _ = torsion_function(other, 2.0)
    with pytest.raises(ValueError, match="share a mesh"):
        build(16.0, eig2_129, eig2_129, xi_o, xi_o, kp129, kp129)


def test_reports_serialize(pair16, specs4_free, zero_fields):
    sf, sg = specs4_free
    rep = certify(pair16, sf, sg, *zero_fields)
    payload = json.dumps({"cert": rep.report(), "pair": pair16.summary()})
    back = json.loads(payload)
    assert back["cert"]["C"] == 16.0
    assert len(back["cert"]["inequalities"]) == 6
    assert back["pair"]["comparison"]["M"] == 1.0
    with pytest.raises(KeyError):
        rep.entry("no_such_inequality")
