import numpy as np
import pytest

from plapsys.barriers import build, find_C
from plapsys.eigen import first_eigenpair
from plapsys.fixedpoint import make_kconfig
from plapsys.hypotheses import ExponentSet, NonlinearitySpec
from plapsys.mesh import Domain, build_mesh
from plapsys.plap import estimate_K, torsion_function


@pytest.fixture(scope="session")
def mesh129():
    return build_mesh(Domain("interval", (1.0,)), 129)


@pytest.fixture(scope="session")
def square17():
    return build_mesh(Domain("rectangle", (1.0, 1.0)), 17)


def _exps():
    ef = ExponentSet("f", m=1.0, M=1.0, alpha=-0.25, beta=0.25,
                     gamma=0.5, theta=0.5)
    eg = ExponentSet("g", m=1.0, M=1.0, alpha=0.25, beta=-0.25,
                     gamma=0.5, theta=0.5)
    return ef, eg


@pytest.fixture(scope="session")
def exps4():
    """Exponent sets of the reference configuration the acceptance tests use."""
    return _exps()


@pytest.fixture(scope="session")
def specs4_free(exps4):
    ef, eg = exps4
    return NonlinearitySpec(ef, a1=0.0, a2=0.0), NonlinearitySpec(eg, a1=0.0, a2=0.0)


@pytest.fixture(scope="session")
def specs4_grad(exps4):
    ef, eg = exps4
    return (NonlinearitySpec(ef, a1=1e-3, a2=1e-3),
            NonlinearitySpec(eg, a1=1e-3, a2=1e-3))


@pytest.fixture(scope="session")
def eig2_129(mesh129):
    return first_eigenpair(mesh129, 2.0)


@pytest.fixture(scope="session")
def xi2_129(mesh129):
    xi, _ = torsion_function(mesh129, 2.0)
    return xi


@pytest.fixture(scope="session")
def kp129(mesh129):
    return 2.0 * estimate_K(mesh129, 2.0)


@pytest.fixture(scope="session")
def pair16(specs4_free, eig2_129, xi2_129, kp129):
    sf, sg = specs4_free
    C, _ = find_C(sf, sg, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)
    assert C == 16.0
    return build(C, eig2_129, eig2_129, xi2_129, xi2_129, kp129, kp129)


@pytest.fixture(scope="session")
def kcfg16(pair16, kp129):
    return make_kconfig(pair16, K_p=kp129, K_q=kp129)


@pytest.fixture(scope="session")
def zero_fields(mesh129):
    from plapsys.mesh import ScalarField
    z = ScalarField(mesh129, np.zeros(mesh129.n_nodes))
    return z, z
