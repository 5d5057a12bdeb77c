"""Exact solution of the checkerboard interface problem with a point singularity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

__all__ = [
    "KelloggParams",
    "KELLOGG",
    "kellogg_nu",
    "kellogg_exact",
    "kellogg_u",
    "kellogg_grad",
    "kellogg_coefficient",
    "fan_integral",
    "kellogg_grad_norm",
]


@dataclass(frozen=True)
class KelloggParams:
    delta: float = 0.1
    rho: float = math.pi / 4
    sigma: float = -14.92256510455152
    a: float = 161.4476387975881


KELLOGG = KelloggParams()


def _branch(alpha):
    """Quadrant index 0..3 of an angle in [0, 2 pi)."""
    return np.clip(np.floor(np.asarray(alpha) / (math.pi / 2)).astype(int), 0, 3)


def _branch_data(p: KelloggParams):
    d, rho, sig = p.delta, p.rho, p.sigma
    # amplitude and phase so that nu = amp * cos(delta * (alpha - shift))
    amp = np.array([math.cos((math.pi / 2 - sig) * d), math.cos(rho * d),
                    math.cos(sig * d), math.cos((math.pi / 2 - rho) * d)])
    shift = np.array([math.pi / 2 - rho, math.pi - sig, math.pi + rho, 1.5 * math.pi + sig])
    return amp, shift


def kellogg_nu(alpha, p: KelloggParams = KELLOGG, branch=None):
    """Angular factor nu(alpha) and its derivative; ``branch`` overrides the quadrant."""
    alpha = np.asarray(alpha, dtype=float)
    if branch is None:
        k = _branch(alpha)
    else:
        k = np.asarray(branch)
        # alpha = 0 seen from the fourth quadrant is 2 pi, and vice versa
        alpha = np.where((k == 3) & (alpha < math.pi), alpha + 2 * math.pi, alpha)
        alpha = np.where((k == 0) & (alpha > math.pi), alpha - 2 * math.pi, alpha)
    amp, shift = _branch_data(p)
    arg = p.delta * (alpha - shift[k])
    return amp[k] * np.cos(arg), -p.delta * amp[k] * np.sin(arg)


def kellogg_exact(r, alpha, p: KelloggParams = KELLOGG):
    """u(r, alpha) = r^delta nu(alpha), alpha in [0, 2 pi)."""
    nu, _ = kellogg_nu(alpha, p)
    return np.asarray(r, dtype=float) ** p.delta * nu


def _polar(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    alpha = np.mod(np.arctan2(y, x), 2 * math.pi)
    return r, alpha


def kellogg_u(x, y, p: KelloggParams = KELLOGG):
    r, alpha = _polar(x, y)
    return kellogg_exact(r, alpha, p)


def kellogg_grad(x, y, p: KelloggParams = KELLOGG, branch=None):
    """Cartesian gradient; zero at the origin by convention."""
    r, alpha = _polar(x, y)
    nu, dnu = kellogg_nu(alpha, p, branch)
    with np.errstate(divide="ignore", invalid="ignore"):
        rd = np.where(r > 0, r ** (p.delta - 1.0), 0.0)
    gr = p.delta * rd * nu
    ga = rd * dnu
    ca, sa = np.cos(alpha), np.sin(alpha)
    return gr * ca - ga * sa, gr * sa + ga * ca


def kellogg_coefficient(x, y, p: KelloggParams = KELLOGG):
    """a in the first and third quadrant, 1 elsewhere."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.where(x * y > 0, p.a, 1.0)


_GL_T, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W


def fan_integral(b, c, g=None, p: KelloggParams = KELLOGG, branch=None):
    """Integral of |grad u - g|^2 over triangles (0, b, c), exactly in the radius.

    grad u is homogeneous of degree delta - 1, so integrating along rays
    from the origin reduces the area integral to a line integral over the
    opposite side, evaluated here with 24-point Gauss-Legendre. The side must
    not cross a quadrant interface. ``b``, ``c``: (n, 2); ``g``: (n, 2) or None.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    g = np.zeros_like(b) if g is None else np.atleast_2d(np.asarray(g, dtype=float))
    e = c - b
    jac = np.abs(b[:, 0] * e[:, 1] - b[:, 1] * e[:, 0])
    Y = b[:, None, :] + _GL_T[None, :, None] * e[:, None, :]
    br = None if branch is None else np.repeat(np.asarray(branch)[:, None], len(_GL_T), axis=1)
    ux, uy = kellogg_grad(Y[..., 0], Y[..., 1], p, br)
    d = p.delta
    term = ((ux**2 + uy**2) / (2 * d)
            - 2 * (g[:, 0:1] * ux + g[:, 1:2] * uy) / (d + 1)
            + 0.5 * (g[:, 0:1] ** 2 + g[:, 1:2] ** 2))
    return jac * (term @ _GL_W)


@lru_cache(maxsize=4)
def kellogg_grad_norm(p: KelloggParams = KELLOGG) -> float:
    """||grad u||_{L2((-1,1)^2)}, via the radial reduction and adaptive quadrature."""
    total = 0.0
    corners = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)]
    for k in range(8):
        b = np.array(corners[k], dtype=float)
        c = np.array(corners[k + 1], dtype=float)
        mid = 0.5 * (b + c)
        q = int(_branch(np.mod(math.atan2(mid[1], mid[0]), 2 * math.pi)))
        jac = abs(b[0] * (c - b)[1] - b[1] * (c - b)[0])

        def f(t, b=b, c=c, q=q):
            y = b + t * (c - b)
            gx, gy = kellogg_grad(y[0], y[1], p, q)
            return float(gx * gx + gy * gy)

        val, _ = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
        total += jac * val / (2 * p.delta)
    return math.sqrt(total)
