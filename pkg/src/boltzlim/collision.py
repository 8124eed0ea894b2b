"""Hard-sphere and BGK collision operators, conservative projection, entropy dissipation."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .grid import VelocityGrid, fields_from_moments, maxwellian_values, moment_basis, raw_moments

try:
    from . import _hardsphere as _kernels

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build
    from . import _hardsphere_py as _kernels

    BACKEND = "numpy"

from . import _hardsphere_py as _numpy_kernels

log = logging.getLogger(__name__)

MAX_HARD_SPHERE_PER_AXIS = 16


@dataclass(frozen=True)
class AngularQuadrature:
    directions: np.ndarray
    weights: np.ndarray

    def folded(self):
        """Directions with omega_z > 0, weights doubled.

        omega and -omega give the same collision, so the half set is exact
        for the symmetric product grid.
        """
        keep = self.directions[:, 2] > 0
        return np.ascontiguousarray(self.directions[keep]), np.ascontiguousarray(2 * self.weights[keep])


def angular_quadrature(n_mu: int = 8, n_phi: int = 8) -> AngularQuadrature:
    """Midpoint product grid in (cos theta, phi); weights sum to 4 pi."""
    if n_mu < 2 or n_mu % 2 or n_phi < 1:
        raise ValueError("n_mu must be even and >= 2, n_phi >= 1")
    mu = -1 + (np.arange(n_mu) + 0.5) * 2 / n_mu
    mu = 0.5 * (mu - mu[::-1])
    phi = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    M, P = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1 - M**2)
    d = np.stack([s * np.cos(P), s * np.sin(P), M], axis=-1).reshape(-1, 3)
    w = np.full(len(d), 4 * np.pi / len(d))
    return AngularQuadrature(d, w)


@dataclass
class CollisionOutput:
    values: np.ndarray
    raw_residuals: np.ndarray
    invariant_residuals: np.ndarray
    kind: str = "hard_sphere"
    angles: AngularQuadrature | None = None


def _orthonormal_basis(grid: VelocityGrid):
    sw = np.sqrt(grid.w)
    Phi = moment_basis(grid) * sw
    Q, R = np.linalg.qr(Phi)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-12 * d.max():
        raise np.linalg.LinAlgError("collision invariants are linearly dependent on this grid")
    return Q, sw


_basis_cache: dict = {}


def _basis(grid: VelocityGrid):
    key = (grid.extent, grid.per_axis)
    if key not in _basis_cache:
        _basis_cache[key] = _orthonormal_basis(grid)
    return _basis_cache[key]


def conservative_projection(raw: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Remove the weighted-L2 component along span{1, v, |v|^2}.

    Works along the last axis. Two passes keep the residual at roundoff.
    """
    Q, sw = _basis(grid)
    x = np.asarray(raw, dtype=float) * sw
    for _ in range(2):
        x = x - (x @ Q) @ Q.T
    return x / sw


def maxwellian_projection(raw: np.ndarray, weight: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Remove span{1, v, |v|^2} moments with a correction proportional to ``weight``.

    With a Maxwellian weight the correction decays like the distribution
    itself, so explicit steps stay positive in the tails.
    """
    phi = moment_basis(grid)
    Wphi = phi * weight[:, None]
    gram = phi.T @ Wphi
    x = np.asarray(raw, dtype=float)
    for _ in range(2):
        x = x - Wphi @ np.linalg.solve(gram, phi.T @ x)
    return x


def invariant_residuals(values: np.ndarray, grid: VelocityGrid, scale: np.ndarray | None = None):
    """Moments of ``values`` against (1, v, |v|^2/2), divided by a magnitude scale."""
    phi = moment_basis(grid)
    mom = values @ phi * grid.w
    if scale is None:
        scale = np.abs(values) @ np.abs(phi) * grid.w
    scale = np.where(scale > 0, scale, 1.0)
    return mom / scale


def _outer_basis(grid: VelocityGrid):
    key = ("outer", grid.extent, grid.per_axis)
    if key not in _basis_cache:
        phi = moment_basis(grid)
        _basis_cache[key] = (phi, (phi[:, :, None] * phi[:, None, :]).reshape(len(phi), 25))
    return _basis_cache[key]


def matched_maxwellian(F: np.ndarray, grid: VelocityGrid, iters: int = 30) -> np.ndarray:
    """Grid Maxwellian whose discrete (1, v, |v|^2/2) moments equal those of F.

    Newton on the exponent coefficients, batched over leading axes. Cells with
    rho = 0 return zeros.
    """
    F = np.asarray(F, dtype=float)
    batch = F.shape[:-1]
    F2 = F.reshape(-1, F.shape[-1])
    target = raw_moments(F2, grid)
    out = np.zeros_like(F2)
    live = target[:, 0] > 0
    if not np.any(live):
        return out.reshape(F.shape)
    t = target[live]
    rho, u, theta = fields_from_moments(t)
    phi, pp = _outer_basis(grid)
    c = np.column_stack(
        [np.log(rho * (2 * np.pi * theta) ** -1.5) - np.einsum("ij,ij->i", u, u) / (2 * theta),
         u / theta[:, None], -1 / theta]
    )
    for _ in range(iters):
        M = np.exp(c @ phi.T)
        r = t - M @ phi * grid.w
        J = (M @ pp).reshape(-1, 5, 5) * grid.w
        dc = np.linalg.solve(J, r[..., None])[..., 0]
        c = c + dc
        if np.abs(dc).max() < 1e-14:
            break
    out[live] = np.exp(c @ phi.T)
    return out.reshape(F.shape)


def bgk_relax(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """M[F] - F with M[F] the moment-matched grid Maxwellian; zero where rho = 0."""
    F = np.asarray(F, dtype=float)
    M = matched_maxwellian(F, grid)
    rho = F.sum(axis=-1) * grid.w
    return np.where((rho > 0)[..., None], M - F, 0.0)


def _prepare(F: np.ndarray, grid: VelocityGrid):
    m = raw_moments(F, grid)
    rho, u, theta = fields_from_moments(m)
    mloc = maxwellian_values(rho, u, theta, grid.nodes)
    with np.errstate(divide="ignore"):
        lr = np.log(F) - np.log(mloc)
    ratio = np.exp(np.clip(lr, -700.0, 50.0))
    n = grid.per_axis
    return np.ascontiguousarray(ratio.reshape(n, n, n)), np.ascontiguousarray(mloc)


def _check_size(grid: VelocityGrid, allow_large: bool):
    if grid.per_axis > MAX_HARD_SPHERE_PER_AXIS and not allow_large:
        raise ValueError(
            f"hard-sphere quadrature with per_axis={grid.per_axis} exceeds the cap "
            f"{MAX_HARD_SPHERE_PER_AXIS}; pass allow_large=True to override"
        )


def collide_hard_sphere(F: np.ndarray, grid: VelocityGrid, angles: AngularQuadrature | None = None,
                        allow_large: bool = False, backend: str | None = None,
                        projection: str = "l2") -> CollisionOutput:
    """Quadrature of B(F, F) for hard spheres at one spatial point, then projected.

    ``projection="maxwellian"`` weights the conservative correction by the
    local Maxwellian instead of the plain quadrature inner product.
    """
    F = np.asarray(F, dtype=float)
    if np.any(F < 0):
        raise ValueError("distribution must be nonnegative")
    _check_size(grid, allow_large)
    angles = angles or angular_quadrature()
    if F.sum() <= 0:
        z = np.zeros_like(F)
        return CollisionOutput(z, np.zeros(5), np.zeros(5), "hard_sphere", angles)
    ratio, mloc = _prepare(F, grid)
    dirs, dw = angles.folded()
    mod = _numpy_kernels if backend == "numpy" else _kernels
    raw = mod.gain_loss(ratio, mloc, np.ascontiguousarray(grid.nodes), float(grid.axis[0]),
                        grid.h, dirs, dw, grid.w)
    raw = np.asarray(raw)
    scale = np.abs(raw) @ np.abs(moment_basis(grid)) * grid.w
    if projection == "maxwellian":
        proj = maxwellian_projection(raw, mloc, grid)
    elif projection == "l2":
        proj = conservative_projection(raw, grid)
    else:
        raise ValueError(f"unknown projection {projection!r}")
    return CollisionOutput(
        proj,
        invariant_residuals(raw, grid, scale),
        invariant_residuals(proj, grid, scale),
        "hard_sphere",
        angles,
    )


def loss_frequency_bound(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Upper bound on the hard-sphere loss rate 2 pi sum_b F_b |v - v_b| w, per node.

    Uses |v - v_b| <= |v| + |v_b|; works along the last axis.
    """
    F = np.asarray(F, dtype=float)
    speed = np.linalg.norm(grid.nodes, axis=1)
    rho = F.sum(axis=-1, keepdims=True) * grid.w
    flux = (F @ speed)[..., None] * grid.w
    return 2 * np.pi * (rho * speed + flux)


def collide_bgk(F: np.ndarray, grid: VelocityGrid) -> CollisionOutput:
    q = bgk_relax(F, grid)
    res = invariant_residuals(q, grid)
    return CollisionOutput(q, res, res, "bgk", None)


@dataclass(frozen=True)
class Dissipation:
    value: float
    r_form: float | None = None
    ratio: float | None = None


def entropy_dissipation(F: np.ndarray, Q: CollisionOutput, grid: VelocityGrid,
                        cross_check: bool = False) -> Dissipation:
    """D = sum w Q ln F (nonpositive), optionally with the r(z) triple-sum cross-check."""
    F = np.asarray(F, dtype=float)
    if np.any(F <= 0):
        raise ValueError("entropy dissipation needs a strictly positive distribution")
    D = float(np.sum(Q.values * np.log(F)) * grid.w)
    if not cross_check or Q.angles is None:
        return Dissipation(D)
    ratio, mloc = _prepare(F, grid)
    dirs, dw = Q.angles.folded()
    rf = float(_kernels.r_form(ratio, mloc, np.ascontiguousarray(grid.nodes), float(grid.axis[0]),
                               grid.h, dirs, dw, grid.w))
    k = rf / -D if D < 0 else float("nan")
    log.info("r-form / (-sum B ln F) = %.6g", k)
    return Dissipation(D, rf, k)
