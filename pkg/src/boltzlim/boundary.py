"""Gas-surface scattering kernels on the discrete velocity grid.

Conventions. For a wall with outward unit normal n, the outgoing half-grid
holds nodes with v.n > 0 (molecules hitting the wall) and the incoming one
v.n < 0. Outgoing node a is paired with the incoming node R v_a, where
R v = v - 2 (v.n) n. ``matrix[a, b]`` is the discrete measure K(v_a, dv'_b),
both indices over the outgoing half-grid, and the boundary condition reads

    F(R v_a) (v_a.n) = sum_b F(v_b) (v_b.n) K[a, b].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import VelocityGrid, maxwellian_values

KINDS = ("specular", "diffuse", "maxwell_accommodation")
SQRT_2PI = np.sqrt(2 * np.pi)


def _axis_of(normal) -> int:
    n = np.asarray(normal, dtype=float)
    nz = np.flatnonzero(np.abs(n) > 0)
    if len(nz) != 1 or not np.isclose(abs(n[nz[0]]), 1.0):
        raise ValueError(f"wall normal must be a signed coordinate axis, got {normal}")
    return int(nz[0])


def half_grids(grid: VelocityGrid, normal):
    """Outgoing node indices, their mirror images, and v.n on the outgoing nodes."""
    normal = np.asarray(normal, dtype=float)
    ax = _axis_of(normal)
    vn = grid.nodes @ normal
    out = np.flatnonzero(vn > 0)
    signs = [1, 1, 1]
    signs[ax] = -1
    mirror = grid.index_of(signs)
    if not np.allclose(grid.nodes[mirror[out]], grid.nodes[out] - 2 * np.outer(vn[out], normal)):
        raise ValueError("velocity grid is not symmetric under the wall reflection")
    return out, mirror[out], vn[out]


@dataclass
class ScatteringKernel:
    kind: str
    accommodation: float
    theta_w: float
    wall_normal: np.ndarray
    out_idx: np.ndarray = field(repr=False)
    in_idx: np.ndarray = field(repr=False)
    vn: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    col_scale: np.ndarray = field(repr=False)
    w: float = 1.0

    @cached_property
    def matrix(self) -> np.ndarray:
        a = self.accommodation
        K = a * np.outer(self.profile, np.full(len(self.vn), self.w))
        K[np.diag_indices_from(K)] += 1 - a
        return K * self.col_scale

    def apply(self, outgoing: np.ndarray) -> np.ndarray:
        """Incoming values (ordered like ``in_idx``) from outgoing values (``out_idx``).

        Accepts a leading batch axis.
        """
        a = self.accommodation
        res = (1 - a) * (outgoing * self.col_scale)
        if a:
            f = outgoing * self.vn * self.col_scale
            res = res + a * np.multiply.outer(f.sum(axis=-1) * self.w, self.profile) / self.vn
        return res


def wall_flux_of(g: np.ndarray, kernel: ScatteringKernel, w: float) -> float:
    """sum g (v.n) w, outgoing and incoming halves summed separately in paired order.

    Incoming node k mirrors outgoing node k, so a mirror-symmetric g gives exactly 0.
    """
    return float((np.dot(g[kernel.out_idx], kernel.vn) - np.dot(g[kernel.in_idx], kernel.vn)) * w)


def build_kernel(kind: str, accommodation: float = 1.0, theta_w: float = 1.0,
                 grid: VelocityGrid = None, wall_normal=(1.0, 0.0, 0.0)) -> ScatteringKernel:
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    if not 0 <= accommodation <= 1:
        raise ValueError(f"accommodation must lie in [0, 1], got {accommodation}")
    if not theta_w > 0:
        raise ValueError(f"theta_w must be positive, got {theta_w}")
    a = {"specular": 0.0, "diffuse": 1.0}.get(kind, float(accommodation))
    normal = np.asarray(wall_normal, dtype=float)
    out, inc, vn = half_grids(grid, normal)
    mw = maxwellian_values(1.0, np.zeros(3), theta_w, grid.nodes[out])
    flux = mw * vn
    profile = flux / (flux.sum() * grid.w)
    # column rescaling makes sum_a K[a, b] w = w exactly
    colsum = (1 - a) + a * profile.sum() * grid.w
    col_scale = np.full(len(out), 1.0 / colsum)
    return ScatteringKernel(kind, a, float(theta_w), normal, out, inc, vn, profile, col_scale, grid.w)


def diffuse_normalization(grid: VelocityGrid, theta_w: float = 1.0, normal=(1.0, 0.0, 0.0)) -> float:
    """Discrete integral of M_w |u.n| over the incoming half-grid."""
    out, inc, vn = half_grids(grid, normal)
    return float(np.sum(maxwellian_values(1.0, np.zeros(3), theta_w, grid.nodes[inc]) * vn) * grid.w)


def flux_normalizer(grid: VelocityGrid, normal=(1.0, 0.0, 0.0)) -> float:
    """Grid stand-in for sqrt(2 pi): makes c (v.n)_+ M a probability weight on the grid.

    The midpoint rule misses the kink of (v.n)_+ at v.n = 0, so the grid value
    differs from sqrt(2 pi) at O(h^2).
    """
    return 1.0 / diffuse_normalization(grid, 1.0, normal)


@dataclass(frozen=True)
class KernelPropertyReport:
    normalization_defect: float
    reciprocity_defect: float
    wall_flux_defect: float
    passes: tuple
    tolerances: tuple = (1e-12, 1e-10, 1e-10)


def _tangential_flip(grid: VelocityGrid, kernel: ScatteringKernel) -> np.ndarray:
    """Permutation of outgoing indices for v -> -R v (tangential components negated)."""
    ax = _axis_of(kernel.wall_normal)
    signs = [-1, -1, -1]
    signs[ax] = 1
    perm = grid.index_of(signs)
    pos = np.full(grid.size, -1)
    pos[kernel.out_idx] = np.arange(len(kernel.out_idx))
    return pos[perm[kernel.out_idx]]


def check_properties(kernel: ScatteringKernel, grid: VelocityGrid) -> KernelPropertyReport:
    K = kernel.matrix
    w = grid.w
    norm = float(np.max(np.abs(K.sum(axis=0) * w - w)) / w)

    m = maxwellian_values(1.0, np.zeros(3), kernel.theta_w, grid.nodes[kernel.out_idx])
    flux = m * kernel.vn
    # J[a, b]: Maxwellian flux carried from outgoing b into the incoming mirror of a
    J = K * flux[None, :] * w * w
    T = _tangential_flip(grid, kernel)
    recip = float(np.max(np.abs(J - J[np.ix_(T, T)].T)) / J.max())

    wall = float(np.max(np.abs(flux - K @ flux)) / flux.max())
    tol = (1e-12, 1e-10, 1e-10)
    return KernelPropertyReport(norm, recip, wall, (norm <= tol[0], recip <= tol[1], wall <= tol[2]), tol)


@dataclass(frozen=True)
class AlphaBeta:
    alpha: float
    beta: float


def extract_alpha_beta(kernel: ScatteringKernel, grid: VelocityGrid) -> AlphaBeta:
    """Tightest discrete constants in the tangential-momentum and lower-bound conditions."""
    K = kernel.matrix
    w = grid.w
    v = grid.nodes[kernel.out_idx]
    ax = _axis_of(kernel.wall_normal)
    tang = np.delete(v, ax, axis=1)
    defect = tang * w - (K.T @ tang) * w
    speed = np.linalg.norm(v, axis=1)
    alpha = float(np.max(np.linalg.norm(defect, axis=1) / (speed * w)))
    alpha = min(alpha, 1.0)
    if alpha <= 1e-15:
        return AlphaBeta(0.0, 1.0)
    m = maxwellian_values(1.0, np.zeros(3), 1.0, v)
    floor = alpha * flux_normalizer(grid, kernel.wall_normal) * m * kernel.vn
    beta = float(np.min(K / (floor[:, None] * w)))
    return AlphaBeta(alpha, float(np.clip(beta, 0.0, 1.0)))


def apply_boundary(outgoing: np.ndarray, kernel: ScatteringKernel) -> np.ndarray:
    if np.any(np.asarray(outgoing) < 0):
        raise ValueError("outgoing values must be nonnegative")
    return kernel.apply(np.asarray(outgoing, dtype=float))


def mu_measure(kernel: ScatteringKernel, v_outgoing: int, grid: VelocityGrid):
    """Probability weights of mu_{x,v} for outgoing node ``v_outgoing``.

    Returns (incoming node indices, weights); weight j sits on the incoming node
    R v'_j, the mirror image of the outgoing node v'_j.
    """
    pos = np.flatnonzero(kernel.out_idx == v_outgoing)
    if len(pos) != 1:
        raise ValueError(f"node {v_outgoing} is not on the outgoing half-grid")
    a = int(pos[0])
    m = maxwellian_values(1.0, np.zeros(3), kernel.theta_w, grid.nodes[kernel.out_idx])
    flux = m * kernel.vn
    weights = flux * kernel.matrix[a] / flux[a]
    return kernel.in_idx, weights


def accommodation_schedule(kind: str, a: float, eps: float) -> float:
    """alpha_eps for the schedules const (a), linear (a eps), quadratic (a eps^2)."""
    table = {"const": a, "linear": a * eps, "quadratic": a * eps**2}
    if kind not in table:
        raise ValueError(f"unknown accommodation schedule {kind!r}")
    return float(min(max(table[kind], 0.0), 1.0))
