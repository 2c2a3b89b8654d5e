# cython: language_level=3
"""Compiled element kernels. Mirrors numpy_backend exactly; see that module
for the contracts."""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow as cpow

cnp.import_array()


def element_gradients(double[::1] values, long[:, ::1] conn, double[:, :, ::1] gradop):
    cdef Py_ssize_t ne = conn.shape[0]
    cdef Py_ssize_t npe = conn.shape[1]
    cdef Py_ssize_t dim = gradop.shape[2]
    out_arr = np.zeros((ne, dim))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, k, d
    cdef double v
    for e in range(ne):
        for k in range(npe):
            v = values[conn[e, k]]
            for d in range(dim):
                out[e, d] += v * gradop[e, k, d]
    return out_arr


def diffusivity_weights(double[:, ::1] grads, double p, double eps):
    cdef Py_ssize_t ne = grads.shape[0]
    cdef Py_ssize_t dim = grads.shape[1]
    out_arr = np.empty(ne)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, d
    cdef double g2
    cdef double expo = (p - 2.0) / 2.0
    for e in range(ne):
        g2 = 0.0
        for d in range(dim):
            g2 += grads[e, d] * grads[e, d]
        if eps == 0.0 and g2 == 0.0:
            out[e] = 0.0
        else:
            out[e] = cpow(g2 + eps * eps, expo)
    return out_arr


def scale_local_matrices(double[:, :, ::1] kloc, double[::1] w):
    cdef Py_ssize_t ne = kloc.shape[0]
    cdef Py_ssize_t npe = kloc.shape[1]
    out_arr = np.empty(ne * npe * npe)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, i, j, idx
    idx = 0
    for e in range(ne):
        for i in range(npe):
            for j in range(npe):
                out[idx] = kloc[e, i, j] * w[e]
                idx += 1
    return out_arr


def plap_apply(double[::1] values, long[:, ::1] conn, double[:, :, ::1] gradop,
               double[::1] vols, double p, double eps, Py_ssize_t n_nodes):
    cdef Py_ssize_t ne = conn.shape[0]
    cdef Py_ssize_t npe = conn.shape[1]
    cdef Py_ssize_t dim = gradop.shape[2]
    out_arr = np.zeros(n_nodes)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, k, d
    cdef double g2, w, dot
    cdef double expo = (p - 2.0) / 2.0
    cdef double g[3]
    for e in range(ne):
        g2 = 0.0
        for d in range(dim):
            g[d] = 0.0
            for k in range(npe):
                g[d] += values[conn[e, k]] * gradop[e, k, d]
            g2 += g[d] * g[d]
        if eps == 0.0 and g2 == 0.0:
            w = 0.0
        else:
            w = cpow(g2 + eps * eps, expo)
        w *= vols[e]
        for k in range(npe):
            dot = 0.0
            for d in range(dim):
                dot += gradop[e, k, d] * g[d]
            out[conn[e, k]] += w * dot
    return out_arr


def node_max_over_elements(long[:, ::1] conn, double[::1] per_elem, Py_ssize_t n_nodes):
    cdef Py_ssize_t ne = conn.shape[0]
    cdef Py_ssize_t npe = conn.shape[1]
    out_arr = np.zeros(n_nodes)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, k, i
    for e in range(ne):
        for k in range(npe):
            i = conn[e, k]
            if per_elem[e] > out[i]:
                out[i] = per_elem[e]
    return out_arr
