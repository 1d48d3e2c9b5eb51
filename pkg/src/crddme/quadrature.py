"""Quadrature rules and special functions shared by the assembly kernels."""

import numpy as np

__all__ = [
    "gauss_legendre_01",
    "triangle_rule",
    "triangle_integrate",
    "ball_rule",
    "bernoulli",
]


def gauss_legendre_01(n):
    """Gauss-Legendre nodes and weights on [0, 1]; weights sum to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# Symmetric triangle rules in barycentric coordinates. Weights sum to 1 and
# multiply the triangle area. Degree 4 is the 6-point two-orbit rule.
_TRI_RULES = {}


def _orbit3(a):
    return [(a, a, 1 - 2 * a), (a, 1 - 2 * a, a), (1 - 2 * a, a, a)]


def _build_tri_rules():
    _TRI_RULES[1] = (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]))
    pts = _orbit3(1 / 6)
    _TRI_RULES[2] = (np.array(pts), np.full(3, 1 / 3))
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts = _orbit3(a1) + _orbit3(a2)
    _TRI_RULES[4] = (np.array(pts), np.array([w1] * 3 + [w2] * 3))


_build_tri_rules()


def triangle_rule(degree):
    """Barycentric points and weights exact for polynomials up to `degree`."""
    for d in sorted(_TRI_RULES):
        if d >= degree:
            return _TRI_RULES[d]
    raise ValueError(f"no triangle rule of degree {degree}")


def triangle_integrate(nodes, triangles, areas, f, degree=4):
    """Integrate f(points)->(n,) over a triangulation.

    f receives an (n, 2) array of physical quadrature points and must return
    one value per point.
    """
    bary, w = triangle_rule(degree)
    total = 0.0
    p0 = nodes[triangles[:, 0]]
    p1 = nodes[triangles[:, 1]]
    p2 = nodes[triangles[:, 2]]
    for q in range(bary.shape[0]):
        pts = bary[q, 0] * p0 + bary[q, 1] * p1 + bary[q, 2] * p2
        total += w[q] * np.sum(areas * f(pts))
    return total


def ball_rule(radius, n_r=16, n_theta=32):
    """Product rule for integrals over a disk of given radius.

    Radial direction uses Gauss points in r^2 (so the r dr Jacobian is exact),
    angular direction is the trapezoidal rule on the periodic circle. Returns
    (points (m, 2), weights (m,)) with weights summing to the disk area.
    """
    u, wu = gauss_legendre_01(n_r)
    r = radius * np.sqrt(u)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    w = np.repeat(wu, n_theta) * (np.pi * radius**2 / n_theta)
    return pts, w


def bernoulli(t):
    """t / (e^t - 1), stable for large |t| and near t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 1e-8
    out[small] = 1.0 - 0.5 * t[small]
    pos = (~small) & (t > 0)
    # e^{-t} form avoids overflow for large positive t
    out[pos] = t[pos] * np.exp(-t[pos]) / (-np.expm1(-t[pos]))
    neg = (~small) & (t <= 0)
    out[neg] = t[neg] / np.expm1(t[neg])
    return out if out.ndim else float(out)
