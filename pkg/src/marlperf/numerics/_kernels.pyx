# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled primitive kernels.

Call-compatible with `_pure`. Inner loops run without the GIL so rollout
threads can overlap on multi-core hosts. Results agree with the NumPy
backend to floating-point reassociation (not bit-for-bit: BLAS may sum
in a different order).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp, tanh as c_tanh, sqrt as c_sqrt

cnp.import_array()


def affine(cnp.ndarray[double, ndim=2, mode="c"] x,
           cnp.ndarray[double, ndim=2, mode="c"] w,
           cnp.ndarray[double, ndim=1, mode="c"] b):
    cdef Py_ssize_t m = x.shape[0], k = x.shape[1], n = w.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((m, n))
    cdef double[:, ::1] xv = x, wv = w, ov = out
    cdef double[::1] bv = b
    cdef Py_ssize_t i, j, kk
    cdef double xa
    with nogil:
        for i in range(m):
            for j in range(n):
                ov[i, j] = bv[j]
            for kk in range(k):
                xa = xv[i, kk]
                for j in range(n):
                    ov[i, j] += xa * wv[kk, j]
    return out


def affine_backward(cnp.ndarray[double, ndim=2, mode="c"] g,
                    cnp.ndarray[double, ndim=2, mode="c"] x,
                    cnp.ndarray[double, ndim=2, mode="c"] w):
    cdef Py_ssize_t m = g.shape[0], n = g.shape[1], k = w.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] gx = np.zeros((m, k))
    cdef cnp.ndarray[double, ndim=2, mode="c"] gw = np.zeros((k, n))
    cdef cnp.ndarray[double, ndim=1, mode="c"] gb = np.zeros(n)
    cdef double[:, ::1] gv = g, xv = x, wv = w, gxv = gx, gwv = gw
    cdef double[::1] gbv = gb
    cdef Py_ssize_t i, j, kk
    cdef double s, xa, ga
    with nogil:
        for i in range(m):
            for kk in range(k):
                s = 0.0
                for j in range(n):
                    s += gv[i, j] * wv[kk, j]
                gxv[i, kk] = s
            for kk in range(k):
                xa = xv[i, kk]
                for j in range(n):
                    gwv[kk, j] += xa * gv[i, j]
            for j in range(n):
                gbv[j] += gv[i, j]
    return gx, gw, gb


def relu(cnp.ndarray[double, ndim=2, mode="c"] z):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(z)
    cdef double[:, ::1] zv = z, ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(zv.shape[0]):
            for j in range(zv.shape[1]):
                ov[i, j] = zv[i, j] if zv[i, j] > 0.0 else 0.0
    return out


def relu_backward(cnp.ndarray[double, ndim=2, mode="c"] g,
                  cnp.ndarray[double, ndim=2, mode="c"] z):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(g)
    cdef double[:, ::1] gv = g, zv = z, ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(gv.shape[0]):
            for j in range(gv.shape[1]):
                ov[i, j] = gv[i, j] if zv[i, j] > 0.0 else 0.0
    return out


def tanh(cnp.ndarray[double, ndim=2, mode="c"] z):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(z)
    cdef double[:, ::1] zv = z, ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(zv.shape[0]):
            for j in range(zv.shape[1]):
                ov[i, j] = c_tanh(zv[i, j])
    return out


def tanh_backward(cnp.ndarray[double, ndim=2, mode="c"] g,
                  cnp.ndarray[double, ndim=2, mode="c"] y):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(g)
    cdef double[:, ::1] gv = g, yv = y, ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(gv.shape[0]):
            for j in range(gv.shape[1]):
                ov[i, j] = gv[i, j] * (1.0 - yv[i, j] * yv[i, j])
    return out


def sigmoid(cnp.ndarray[double, ndim=2, mode="c"] z):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(z)
    cdef double[:, ::1] zv = z, ov = out
    cdef Py_ssize_t i, j
    cdef double e
    with nogil:
        for i in range(zv.shape[0]):
            for j in range(zv.shape[1]):
                if zv[i, j] >= 0.0:
                    ov[i, j] = 1.0 / (1.0 + c_exp(-zv[i, j]))
                else:
                    e = c_exp(zv[i, j])
                    ov[i, j] = e / (1.0 + e)
    return out


def sigmoid_backward(cnp.ndarray[double, ndim=2, mode="c"] g,
                     cnp.ndarray[double, ndim=2, mode="c"] y):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(g)
    cdef double[:, ::1] gv = g, yv = y, ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(gv.shape[0]):
            for j in range(gv.shape[1]):
                ov[i, j] = gv[i, j] * yv[i, j] * (1.0 - yv[i, j])
    return out


def softmax_rows(cnp.ndarray[double, ndim=2, mode="c"] z):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(z)
    cdef double[:, ::1] zv = z, ov = out
    cdef Py_ssize_t i, j
    cdef double mx, s
    with nogil:
        for i in range(zv.shape[0]):
            mx = zv[i, 0]
            for j in range(1, zv.shape[1]):
                if zv[i, j] > mx:
                    mx = zv[i, j]
            s = 0.0
            for j in range(zv.shape[1]):
                ov[i, j] = c_exp(zv[i, j] - mx)
                s += ov[i, j]
            for j in range(zv.shape[1]):
                ov[i, j] /= s
    return out


def softmax_rows_backward(cnp.ndarray[double, ndim=2, mode="c"] g,
                          cnp.ndarray[double, ndim=2, mode="c"] y):
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty_like(g)
    cdef double[:, ::1] gv = g, yv = y, ov = out
    cdef Py_ssize_t i, j
    cdef double dot
    with nogil:
        for i in range(gv.shape[0]):
            dot = 0.0
            for j in range(gv.shape[1]):
                dot += gv[i, j] * yv[i, j]
            for j in range(gv.shape[1]):
                ov[i, j] = yv[i, j] * (gv[i, j] - dot)
    return out


def neighbor_mean(cnp.ndarray[double, ndim=2, mode="c"] features,
                  cnp.ndarray[double, ndim=2, mode="c"] adj):
    cdef Py_ssize_t n = features.shape[0], f = features.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.zeros((n, f))
    cdef double[:, ::1] fv = features, av = adj, ov = out
    cdef Py_ssize_t i, j, c
    cdef double deg
    with nogil:
        for i in range(n):
            deg = 0.0
            for j in range(n):
                if av[j, i] != 0.0:
                    deg += 1.0
                    for c in range(f):
                        ov[i, c] += fv[j, c]
            if deg > 1.0:
                for c in range(f):
                    ov[i, c] /= deg
    return out


def neighbor_mean_backward(cnp.ndarray[double, ndim=2, mode="c"] g,
                           cnp.ndarray[double, ndim=2, mode="c"] adj):
    cdef Py_ssize_t n = g.shape[0], f = g.shape[1]
    cdef cnp.ndarray[double, ndim=2, mode="c"] gf = np.zeros((n, f))
    cdef double[:, ::1] gv = g, av = adj, gfv = gf
    cdef Py_ssize_t i, j, c
    cdef double deg, inv
    with nogil:
        for i in range(n):
            deg = 0.0
            for j in range(n):
                if av[j, i] != 0.0:
                    deg += 1.0
            if deg == 0.0:
                continue
            inv = 1.0 / deg
            for j in range(n):
                if av[j, i] != 0.0:
                    for c in range(f):
                        gfv[j, c] += gv[i, c] * inv
    return gf


def adam_update(cnp.ndarray[double, ndim=1, mode="c"] p,
                cnp.ndarray[double, ndim=1, mode="c"] g,
                cnp.ndarray[double, ndim=1, mode="c"] m,
                cnp.ndarray[double, ndim=1, mode="c"] v,
                double lr, double beta1, double beta2, double eps, long t):
    cdef double[::1] pv = p, gv = g, mv = m, vv = v
    cdef Py_ssize_t i
    cdef double bc1 = 1.0 - beta1**t
    cdef double bc2 = 1.0 - beta2**t
    with nogil:
        for i in range(pv.shape[0]):
            mv[i] = beta1 * mv[i] + (1.0 - beta1) * gv[i]
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * gv[i] * gv[i]
            pv[i] -= lr * (mv[i] / bc1) / (c_sqrt(vv[i] / bc2) + eps)
