"""Numpy implementation of the batched element kernels.

Elements are grouped by their number of boundary nodes so every group is a
dense (n_elem, m) computation. Used when the compiled extension is missing.
"""
import numpy as np


def element_kernels(X, ptr, vpos, ia, ib, t, coefA, c, f, gamma):
    """Projector data and assembled local blocks for a batch of elements.

    Parameters
    ----------
    X : (Ntot, 2) float
        Boundary node coordinates, element after element, counterclockwise.
    ptr : (nE + 1,) int
        Offsets of each element's nodes in ``X``.
    vpos : (nE, 3) int
        Local positions of the three triangle vertices.
    ia, ib, t : (Ntot,)
        Local side endpoints and parameter of every boundary node.
    coefA : (nE, 3) float
        ``(a11, a12, a22)`` per element.
    c, f : (nE,) float
    gamma : float

    Returns
    -------
    area, centroid (nE, 2), J (nE, 3), gx, gy, pc (Ntot,), blocks (sum m^2,), load (Ntot,)
    """
    X = np.asarray(X, dtype=float)
    ptr = np.asarray(ptr, dtype=np.int64)
    nE = len(ptr) - 1
    sizes = np.diff(ptr)
    Ntot = int(ptr[-1])
    bptr = np.zeros(nE + 1, dtype=np.int64)
    np.cumsum(sizes * sizes, out=bptr[1:])

    area = np.empty(nE)
    cen = np.empty((nE, 2))
    J = np.empty((nE, 3))
    gx = np.empty(Ntot)
    gy = np.empty(Ntot)
    pc = np.empty(Ntot)
    blocks = np.empty(int(bptr[-1]))
    load = np.empty(Ntot)

    for m in np.unique(sizes):
        m = int(m)
        sel = np.nonzero(sizes == m)[0]
        base = ptr[sel]
        idx = base[:, None] + np.arange(m)[None, :]
        P = X[idx]                                   # (k, m, 2)
        V = P[np.arange(len(sel))[:, None], vpos[sel]]   # (k, 3, 2)
        C = V.mean(axis=1)
        d1 = V[:, 1] - V[:, 0]
        d2 = V[:, 2] - V[:, 0]
        ar = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        xi = P - C[:, None, :]
        nxt = np.roll(xi, -1, axis=1)
        prv = np.roll(xi, 1, axis=1)
        g_x = (nxt[..., 1] - prv[..., 1]) / (2 * ar[:, None])
        g_y = -(nxt[..., 0] - prv[..., 0]) / (2 * ar[:, None])
        ell = np.hypot(*(nxt - xi).transpose(2, 0, 1))      # edge k: node k -> k+1
        per = ell.sum(axis=1)
        w = 0.5 * (ell + np.roll(ell, 1, axis=1))
        Q = 0.5 * np.einsum("km,kmd->kd", ell, xi + nxt)
        a = (w - g_x * Q[:, 0:1] - g_y * Q[:, 1:2]) / per[:, None]
        dv = V - C[:, None, :]
        Jxx = ar / 12 * np.sum(dv[..., 0] ** 2, axis=1)
        Jxy = ar / 12 * np.sum(dv[..., 0] * dv[..., 1], axis=1)
        Jyy = ar / 12 * np.sum(dv[..., 1] ** 2, axis=1)

        A11, A12, A22 = coefA[sel, 0], coefA[sel, 1], coefA[sel, 2]
        Agx = A11[:, None] * g_x + A12[:, None] * g_y
        Agy = A12[:, None] * g_x + A22[:, None] * g_y
        K = ar[:, None, None] * (g_x[:, :, None] * Agx[:, None, :] + g_y[:, :, None] * Agy[:, None, :])
        Jgx = Jxx[:, None] * g_x + Jxy[:, None] * g_y
        Jgy = Jxy[:, None] * g_x + Jyy[:, None] * g_y
        M = c[sel, None, None] * (ar[:, None, None] * a[:, :, None] * a[:, None, :]
                                  + g_x[:, :, None] * Jgx[:, None, :] + g_y[:, :, None] * Jgy[:, None, :])
        # D = I - L with L the vertex interpolant evaluated at every boundary node
        D = np.zeros((len(sel), m, m))
        rows = np.arange(m)
        D[:, rows, rows] = 1.0
        tt = t[idx]
        la = ia[idx]
        lb = ib[idx]
        kk = np.repeat(np.arange(len(sel)), m)
        rr = np.tile(rows, len(sel))
        np.subtract.at(D, (kk, rr, la.ravel()), (1.0 - tt).ravel())
        np.subtract.at(D, (kk, rr, lb.ravel()), tt.ravel())
        S = np.einsum("kri,krj->kij", D, D)
        B = K + gamma * S + M
        iu = np.triu_indices(m, 1)
        B[:, iu[1], iu[0]] = B[:, iu[0], iu[1]]

        area[sel] = ar
        cen[sel] = C
        J[sel] = np.stack([Jxx, Jxy, Jyy], axis=1)
        gx[idx] = g_x
        gy[idx] = g_y
        pc[idx] = a
        load[idx] = f[sel, None] * ar[:, None] * a
        bidx = bptr[sel][:, None] + np.arange(m * m)[None, :]
        blocks[bidx] = B.reshape(len(sel), m * m)
    return area, cen, J, gx, gy, pc, blocks, load
