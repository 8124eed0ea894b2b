"""Velocity and slab discretizations, Maxwellians and moments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint grid on the cube [-extent, extent]^3."""

    extent: float
    per_axis: int
    axis: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.per_axis

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def w(self) -> float:
        """The common quadrature weight."""
        return float(self.weights[0])

    def index_of(self, signs) -> np.ndarray:
        """Node permutation for the axis map v -> signs * v."""
        n = self.per_axis
        idx = np.arange(self.size).reshape(n, n, n)
        for ax, s in enumerate(signs):
            if s < 0:
                idx = np.flip(idx, axis=ax)
        return idx.reshape(-1)

    def negation(self) -> np.ndarray:
        return self.index_of((-1, -1, -1))


def build_velocity_grid(extent: float = 6.0, per_axis: int = 16) -> VelocityGrid:
    if not extent > 0:
        raise ValueError(f"extent must be positive, got {extent}")
    if per_axis < 4 or per_axis % 2:
        raise ValueError(f"per_axis must be even and >= 4, got {per_axis}")
    h = 2.0 * extent / per_axis
    axis = -extent + (np.arange(per_axis) + 0.5) * h
    # antisymmetrize to make v -> -v exact in floating point
    axis = 0.5 * (axis - axis[::-1])
    vx, vy, vz = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.stack([vx, vy, vz], axis=-1).reshape(-1, 3)
    weights = np.full(nodes.shape[0], h**3)
    for arr in (axis, nodes, weights):
        arr.setflags(write=False)
    return VelocityGrid(float(extent), int(per_axis), axis, nodes, weights)


@dataclass(frozen=True)
class SpatialGrid1D:
    """Slab [0, L] split into equal cells; walls at x=0 (n=-e1) and x=L (n=+e1)."""

    cells: int
    length: float = 1.0

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError(f"need at least 2 cells, got {self.cells}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.cells + 1) * self.dx

    @property
    def normals(self) -> tuple:
        return (np.array([-1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))


@dataclass(frozen=True)
class MaxwellianParams:
    rho: float = 1.0
    u: tuple = (0.0, 0.0, 0.0)
    theta: float = 1.0


@dataclass(frozen=True)
class Moments:
    rho: float
    momentum: np.ndarray
    energy: float
    bulk_u: np.ndarray | None
    theta: float | None

    @property
    def defined(self) -> bool:
        return self.bulk_u is not None


def maxwellian_values(rho, u, theta, nodes: np.ndarray) -> np.ndarray:
    """rho (2 pi theta)^{-3/2} exp(-|v-u|^2 / (2 theta)), broadcast over leading axes.

    ``rho`` and ``theta`` may have shape (...,), ``u`` shape (..., 3).
    """
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("theta must be positive")
    d = nodes - u[..., None, :]
    e = np.einsum("...j,...j->...", d, d)
    th = theta[..., None]
    return rho[..., None] * (2 * np.pi * th) ** -1.5 * np.exp(-e / (2 * th))


def maxwellian(params: MaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    if not params.theta > 0:
        raise ValueError(f"theta must be positive, got {params.theta}")
    return maxwellian_values(params.rho, params.u, params.theta, grid.nodes)


def moment_basis(grid: VelocityGrid) -> np.ndarray:
    """Columns 1, v1, v2, v3, |v|^2 / 2 evaluated on the nodes."""
    v = grid.nodes
    return np.column_stack([np.ones(len(v)), v, 0.5 * np.einsum("ij,ij->i", v, v)])


def raw_moments(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """(rho, m1, m2, m3, E) along the last axis of F."""
    return F @ moment_basis(grid) * grid.w


def moments(F: np.ndarray, grid: VelocityGrid) -> Moments:
    F = np.asarray(F, dtype=float)
    if np.any(F < 0):
        raise ValueError("distribution must be nonnegative")
    m = raw_moments(F, grid)
    rho, mom, en = float(m[0]), m[1:4].copy(), float(m[4])
    if rho <= 0:
        return Moments(rho, mom, en, None, None)
    u = mom / rho
    theta = (2 * en / rho - u @ u) / 3
    return Moments(rho, mom, en, u, float(theta))


def fields_from_moments(m: np.ndarray):
    """Vectorized (rho, u, theta) from stacked raw moments of shape (..., 5)."""
    rho = m[..., 0]
    u = m[..., 1:4] / rho[..., None]
    theta = (2 * m[..., 4] / rho - np.einsum("...j,...j->...", u, u)) / 3
    return rho, u, theta
