"""Vectorized NumPy implementations of the element kernels.

Reference backend: every routine here defines the contract the compiled
core in _speedups.pyx must reproduce.  Scatter operations use np.add.at /
np.maximum.at, which accumulate sequentially in index order, so results are
reproducible run to run.
"""

import numpy as np


def element_gradients(values, conn, gradop):
    """Per-element gradient of the piecewise linear interpolant.

    values : (n_nodes,) nodal coefficients
    conn   : (n_elems, npe) int64 connectivity
    gradop : (n_elems, npe, dim) shape-function gradients
    returns (n_elems, dim)
    """
    return np.einsum("ek,ekd->ed", values[conn], gradop)


def diffusivity_weights(grads, p, eps):
    """Regularized p-diffusivity (|g|^2 + eps^2)^((p-2)/2) per element."""
    g2 = np.einsum("ed,ed->e", grads, grads)
    if eps == 0.0:
        # |g|^(p-2) with the 0^negative case mapped to 0 so that the flux
        # |g|^(p-2) g vanishes where g does, for every p > 1
        with np.errstate(divide="ignore"):
            w = g2 ** ((p - 2.0) / 2.0)
        w[g2 == 0.0] = 0.0
        return w
    return (g2 + eps * eps) ** ((p - 2.0) / 2.0)


def scale_local_matrices(kloc, w):
    """Entrywise scaling of precomputed local stiffness blocks, flattened
    in (element, row, col) order for COO assembly."""
    return (kloc * w[:, None, None]).ravel()


def plap_apply(values, conn, gradop, vols, p, eps, n_nodes):
    """Nodal vector of the discrete p-Laplacian form.

    out[i] = sum_e w_e grad_u|_e . grad_phi_i|_e vol_e with
    w_e = (|grad_u|^2 + eps^2)^((p-2)/2).  eps = 0 gives the exact
    (unregularized) operator used for residuals.
    """
    g = element_gradients(values, conn, gradop)
    w = diffusivity_weights(g, p, eps) * vols
    contrib = np.einsum("ekd,ed->ek", gradop, g * w[:, None])
    out = np.zeros(n_nodes)
    np.add.at(out, conn, contrib)
    return out


def node_max_over_elements(conn, per_elem, n_nodes):
    """Max of a per-element quantity over the elements incident to each node."""
    out = np.zeros(n_nodes)
    np.maximum.at(out, conn.ravel(), np.repeat(per_elem, conn.shape[1]))
    return out
