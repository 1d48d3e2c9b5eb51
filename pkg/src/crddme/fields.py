"""One-body potentials, diffusivities, and Boltzmann-weight computations.

Potentials are dimensionless; the drift used throughout is -D * grad(phi).
All Boltzmann-weight formulas shift exponents by the extreme potential value
before exponentiation so large potentials cannot overflow.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .quadrature import triangle_rule

__all__ = [
    "ConstantPotential",
    "QuadraticPotential",
    "TwoWellPotential",
    "PiecewiseRadialPotential",
    "NodalPotential",
    "Diffusivity",
    "potential_code",
    "discrete_gibbs_boltzmann",
    "log_partition",
    "continuous_partition_function",
]

# integer codes shared with the numba kernels in bd.py
POT_CONSTANT = 0
POT_QUADRATIC = 1
POT_TWO_WELL = 2
POT_PIECEWISE_RADIAL = 3


@dataclass(frozen=True)
class ConstantPotential:
    value: float = 0.0

    def values(self, pts):
        pts = np.atleast_2d(pts)
        return np.full(len(pts), self.value)

    def gradients(self, pts):
        pts = np.atleast_2d(pts)
        return np.zeros((len(pts), 2))


@dataclass(frozen=True)
class QuadraticPotential:
    """scale * (x^2 + y^2); minimum at the origin."""

    scale: float = 1.0

    def values(self, pts):
        pts = np.atleast_2d(pts)
        return self.scale * (pts[:, 0] ** 2 + pts[:, 1] ** 2)

    def gradients(self, pts):
        pts = np.atleast_2d(pts)
        return 2.0 * self.scale * pts


@dataclass(frozen=True)
class TwoWellPotential:
    """(5/2)(1 - x^2)^2 + 5 y^2; minima at (+-1, 0)."""

    def values(self, pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return 2.5 * (1.0 - x**2) ** 2 + 5.0 * y**2

    def gradients(self, pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([-10.0 * x * (1.0 - x**2), 10.0 * y])


@dataclass(frozen=True)
class PiecewiseRadialPotential:
    """Centripetal ramp: f0*r inside break_radius, slope doubling outside.

    Continuous at r = break_radius where both branches equal f0*break_radius.
    """

    f0: float
    break_radius: float

    def values(self, pts):
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        inner = self.f0 * r
        outer = 2.0 * self.f0 * (r - self.break_radius) + self.f0 * self.break_radius
        return np.where(r <= self.break_radius, inner, outer)

    def gradients(self, pts):
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        slope = np.where(r <= self.break_radius, self.f0, 2.0 * self.f0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[:, None] > 0, pts / np.maximum(r, 1e-300)[:, None], 0.0)
        return slope[:, None] * unit


@dataclass(frozen=True)
class NodalPotential:
    """Values tabulated at mesh nodes, linear along edges.

    Pointwise gradients off an edge are not defined for this kind; the
    drift-diffusion assembly uses the exact linear-on-edge closed form.
    """

    node_values: np.ndarray = field(repr=False)

    def values(self, pts):
        raise TypeError("nodal potential supports node values only; use values_at_nodes")

    def gradients(self, pts):
        raise TypeError("gradient of a nodal potential is defined per edge only")


def values_at_nodes(potential, mesh):
    if isinstance(potential, NodalPotential):
        v = np.asarray(potential.node_values, dtype=float)
        if len(v) != mesh.n_nodes:
            raise ValueError(
                f"nodal table length {len(v)} != node count {mesh.n_nodes}"
            )
        return v
    return potential.values(mesh.nodes)


@dataclass(frozen=True)
class Diffusivity:
    """Constant diffusivity in um^2/s; must be positive."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"diffusivity must be positive, got {self.value}")


def potential_code(potential):
    """(kind, params[4]) encoding consumed by the numba particle kernels."""
    p = np.zeros(4)
    if isinstance(potential, ConstantPotential):
        p[0] = potential.value
        return POT_CONSTANT, p
    if isinstance(potential, QuadraticPotential):
        p[0] = potential.scale
        return POT_QUADRATIC, p
    if isinstance(potential, TwoWellPotential):
        return POT_TWO_WELL, p
    if isinstance(potential, PiecewiseRadialPotential):
        p[0] = potential.f0
        p[1] = potential.break_radius
        return POT_PIECEWISE_RADIAL, p
    raise TypeError(f"potential kind {type(potential).__name__} has no particle-kernel encoding")


def discrete_gibbs_boltzmann(mesh, duals, potential):
    """Discrete Boltzmann weights: P_i = e^{-phi_i} |V_i| / Zhat.

    Returns (Zhat, P). Exponents are shifted by min(phi) so the ratio is
    overflow-safe; the shift cancels in P.
    """
    phi = values_at_nodes(potential, mesh)
    shift = phi.min()
    w = np.exp(-(phi - shift)) * duals.volumes
    total = w.sum()
    zhat = total * np.exp(-shift)
    return zhat, w / total


def log_partition(duals, phi_nodes):
    """log of sum_i e^{-phi_i} |V_i|, computed without overflow."""
    return float(logsumexp(-np.asarray(phi_nodes) + np.log(duals.volumes)))


def continuous_partition_function(mesh, potential, degree=4):
    """Integral of e^{-phi} over the triangulated domain by Gauss quadrature."""
    bary, w = triangle_rule(degree)
    tris = mesh.triangles
    nodes = mesh.nodes
    p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    total = 0.0
    for q in range(bary.shape[0]):
        pts = bary[q, 0] * p0 + bary[q, 1] * p1 + bary[q, 2] * p2
        total += w[q] * np.sum(mesh.tri_areas * np.exp(-potential.values(pts)))
    return float(total)
