# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as evosurf._kernels_py."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def ns_element_matrices(double[:, ::1] phi, double[:, :, :, ::1] G, double[:, ::1] psi,
                        double[:, :, ::1] nu, double[:, :, :, ::1] P, double[:, :, ::1] w,
                        double[:, ::1] dA, double tau, double visc, double pen):
    cdef Py_ssize_t E = G.shape[0], Q = G.shape[1], n = G.shape[2], m = psi.shape[1]
    cdef Py_ssize_t e, q, i, j, c, d, r
    cdef double a, s, conv, gg, wg
    out = np.zeros((E, 3 * n, 3 * n))
    dout = np.zeros((E, m, 3 * n))
    cdef double[:, :, ::1] A = out
    cdef double[:, :, ::1] D = dout
    cdef double[::1] wgj = np.empty(n)
    for e in range(E):
        for q in range(Q):
            a = dA[e, q]
            for j in range(n):
                wgj[j] = w[e, q, 0] * G[e, q, j, 0] + w[e, q, 1] * G[e, q, j, 1] + w[e, q, 2] * G[e, q, j, 2]
            for i in range(n):
                for j in range(n):
                    s = a * phi[q, i] * phi[q, j]
                    conv = s + tau * a * phi[q, i] * wgj[j]
                    gg = visc * a * (G[e, q, i, 0] * G[e, q, j, 0] + G[e, q, i, 1] * G[e, q, j, 1]
                                     + G[e, q, i, 2] * G[e, q, j, 2])
                    for d in range(3):
                        for c in range(3):
                            A[e, 3 * i + d, 3 * j + c] += (
                                gg * P[e, q, d, c]
                                + visc * a * G[e, q, i, c] * G[e, q, j, d]
                                + pen * s * nu[e, q, d] * nu[e, q, c]
                            )
                        A[e, 3 * i + d, 3 * j + d] += conv
            for r in range(m):
                s = a * psi[q, r]
                for j in range(n):
                    for c in range(3):
                        D[e, r, 3 * j + c] += s * G[e, q, j, c]
    return out, dout
