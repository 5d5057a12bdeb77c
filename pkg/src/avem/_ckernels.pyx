# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched element kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def element_kernels(X, ptr, vpos, ia, ib, t, coefA, c, f, double gamma):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const long long[::1] pv = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef const long long[:, ::1] vp = np.ascontiguousarray(vpos, dtype=np.int64)
    cdef const long long[::1] iav = np.ascontiguousarray(ia, dtype=np.int64)
    cdef const long long[::1] ibv = np.ascontiguousarray(ib, dtype=np.int64)
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[:, ::1] Av = np.ascontiguousarray(coefA, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)

    cdef Py_ssize_t nE = pv.shape[0] - 1
    cdef Py_ssize_t Ntot = pv[nE]
    cdef Py_ssize_t e, i, j, k, m, b0, o, nb, mmax = 0
    cdef long long bsum = 0
    for e in range(nE):
        m = pv[e + 1] - pv[e]
        bsum += m * m
        if m > mmax:
            mmax = m

    area_a = np.empty(nE)
    cen_a = np.empty((nE, 2))
    J_a = np.empty((nE, 3))
    gx_a = np.empty(Ntot)
    gy_a = np.empty(Ntot)
    pc_a = np.empty(Ntot)
    blocks_a = np.empty(bsum)
    load_a = np.empty(Ntot)
    D_a = np.empty((mmax, mmax))
    xi_a = np.empty((mmax, 2))
    cdef double[::1] area = area_a
    cdef double[:, ::1] cen = cen_a
    cdef double[:, ::1] J = J_a
    cdef double[::1] gx = gx_a
    cdef double[::1] gy = gy_a
    cdef double[::1] pc = pc_a
    cdef double[::1] blocks = blocks_a
    cdef double[::1] load = load_a
    cdef double[:, ::1] D = D_a
    cdef double[:, ::1] xi = xi_a

    cdef double cx, cy, ar, dx1, dy1, dx2, dy2, per, qx, qy, ell, lprev, lfirst
    lprev = 0.0
    lfirst = 0.0
    cdef double jxx, jxy, jyy, a11, a12, a22, ce, s, kij, mij, dvx, dvy
    cdef Py_ssize_t v0, v1, v2, nx, pr
    nb = 0
    for e in range(nE):
        o = pv[e]
        m = pv[e + 1] - o
        v0 = o + vp[e, 0]
        v1 = o + vp[e, 1]
        v2 = o + vp[e, 2]
        cx = (Xv[v0, 0] + Xv[v1, 0] + Xv[v2, 0]) / 3.0
        cy = (Xv[v0, 1] + Xv[v1, 1] + Xv[v2, 1]) / 3.0
        dx1 = Xv[v1, 0] - Xv[v0, 0]
        dy1 = Xv[v1, 1] - Xv[v0, 1]
        dx2 = Xv[v2, 0] - Xv[v0, 0]
        dy2 = Xv[v2, 1] - Xv[v0, 1]
        ar = 0.5 * (dx1 * dy2 - dy1 * dx2)
        area[e] = ar
        cen[e, 0] = cx
        cen[e, 1] = cy
        jxx = 0.0
        jxy = 0.0
        jyy = 0.0
        for k in range(3):
            i = o + vp[e, k]
            dvx = Xv[i, 0] - cx
            dvy = Xv[i, 1] - cy
            jxx += dvx * dvx
            jxy += dvx * dvy
            jyy += dvy * dvy
        jxx *= ar / 12.0
        jxy *= ar / 12.0
        jyy *= ar / 12.0
        J[e, 0] = jxx
        J[e, 1] = jxy
        J[e, 2] = jyy
        for i in range(m):
            xi[i, 0] = Xv[o + i, 0] - cx
            xi[i, 1] = Xv[o + i, 1] - cy
        per = 0.0
        qx = 0.0
        qy = 0.0
        for k in range(m):
            nx = (k + 1) % m
            ell = sqrt((xi[nx, 0] - xi[k, 0]) ** 2 + (xi[nx, 1] - xi[k, 1]) ** 2)
            per += ell
            qx += 0.5 * ell * (xi[k, 0] + xi[nx, 0])
            qy += 0.5 * ell * (xi[k, 1] + xi[nx, 1])
            # pc temporarily holds the boundary weight w_i = (l_{i-1} + l_i)/2
            if k == 0:
                lfirst = ell
            else:
                pc[o + k] = 0.5 * (lprev + ell)
            lprev = ell
        pc[o] = 0.5 * (lprev + lfirst)
        for i in range(m):
            nx = (i + 1) % m
            pr = (i + m - 1) % m
            gx[o + i] = (xi[nx, 1] - xi[pr, 1]) / (2.0 * ar)
            gy[o + i] = -(xi[nx, 0] - xi[pr, 0]) / (2.0 * ar)
            pc[o + i] = (pc[o + i] - gx[o + i] * qx - gy[o + i] * qy) / per
            load[o + i] = fv[e] * ar * pc[o + i]
        # stabilization factor D = I - L
        for i in range(m):
            for j in range(m):
                D[i, j] = 0.0
            D[i, i] = 1.0
            D[i, iav[o + i]] -= 1.0 - tv[o + i]
            D[i, ibv[o + i]] -= tv[o + i]
        a11 = Av[e, 0]
        a12 = Av[e, 1]
        a22 = Av[e, 2]
        ce = cv[e]
        for i in range(m):
            for j in range(i, m):
                kij = ar * (gx[o + i] * (a11 * gx[o + j] + a12 * gy[o + j])
                            + gy[o + i] * (a12 * gx[o + j] + a22 * gy[o + j]))
                mij = ce * (ar * pc[o + i] * pc[o + j]
                            + gx[o + i] * (jxx * gx[o + j] + jxy * gy[o + j])
                            + gy[o + i] * (jxy * gx[o + j] + jyy * gy[o + j]))
                s = 0.0
                for k in range(m):
                    s += D[k, i] * D[k, j]
                blocks[nb + i * m + j] = kij + gamma * s + mij
                blocks[nb + j * m + i] = blocks[nb + i * m + j]
        nb += m * m
    return area_a, cen_a, J_a, gx_a, gy_a, pc_a, blocks_a, load_a
