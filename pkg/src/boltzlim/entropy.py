"""Entropy functionals, the relative-entropy ledger and the wall-term bound."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import kl_div

from .boundary import ScatteringKernel, extract_alpha_beta, flux_normalizer, wall_flux_of
from .grid import SpatialGrid1D, VelocityGrid, maxwellian_values
from .io import write_csv
from .kinetic import KineticTrajectory

log = logging.getLogger(__name__)

H_HALF = 1.5 * np.log(1.5) - 0.5
EXP_LIMIT = 700.0


def h(z):
    """(1+z) ln(1+z) - z, with h(-1) = 1."""
    z = np.asarray(z, dtype=float)
    return kl_div(1 + z, 1.0)


def r(z):
    """z ln(1+z)."""
    z = np.asarray(z, dtype=float)
    return z * np.log1p(z)


def h_star(p):
    """Legendre dual of h: e^p - p - 1."""
    p = np.asarray(p, dtype=float)
    return np.expm1(p) - p


def l_star(p, z0):
    """Dual of the Bregman remainder of h at z0: (1 + z0) h*(p)."""
    return (1 + np.asarray(z0, dtype=float)) * h_star(p)


def relative_entropy(F1: np.ndarray, F2: np.ndarray, grid: VelocityGrid,
                     space: SpatialGrid1D | None = None) -> float:
    """sum (F1 ln(F1/F2) - F1 + F2) w dx.

    Arrays are (..., Nv); with ``space`` the leading axis is summed with dx.
    """
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    if np.any(F2 <= 0):
        raise ValueError("reference distribution must be strictly positive")
    if np.any(F1 < 0):
        raise ValueError("distribution must be nonnegative")
    val = float(np.sum(kl_div(F1, F2)) * grid.w)
    return val * space.dx if space is not None else val


def wall_distribution(cell: np.ndarray, kernel: ScatteringKernel) -> np.ndarray:
    """Cell values on the outgoing half-grid, kernel output on the incoming one."""
    Fw = np.array(cell, dtype=float, copy=True)
    Fw[kernel.in_idx] = kernel.apply(Fw[kernel.out_idx])
    return Fw


def darrozes_guiraud(F_wall: np.ndarray, kernel: ScatteringKernel, grid: VelocityGrid) -> float:
    """Signed flux sum of h(F/M - 1) M (v.n) over the full wall distribution."""
    M = maxwellian_values(1.0, np.zeros(3), 1.0, grid.nodes)
    return wall_flux_of(kl_div(np.asarray(F_wall, dtype=float), M), kernel, grid.w)



@dataclass
class ProductionSeries:
    """Scaled production (1/eps^{4+q}) int P dx at step times, and its running time integral."""

    times: np.ndarray
    rate: np.ndarray
    cumulative: np.ndarray


def entropy_production_total(traj: KineticTrajectory, config=None) -> ProductionSeries:
    config = config or traj.config
    scale = config.epsilon ** -(4 + config.q)
    rate = traj.cell_production.sum(axis=1) * traj.space.dx * scale
    cum = np.concatenate([[0.0], np.cumsum(traj.production_step) * scale])
    return ProductionSeries(traj.step_times, rate, cum)


def _half_space_rule(vals: np.ndarray, grid: VelocityGrid) -> float:
    """Sum over v1 > 0 of vals * v1 * w with an endpoint correction for the kink at v1 = 0.

    Midpoint nodes sit at +-h/2 around the kink of (v1)_+, leaving an
    O(h^2) error of h^2/24 times the v1 = 0 slice integral; that slice is
    extrapolated from the two nearest planes (vals is even in v1).
    """
    n = grid.per_axis
    v1 = grid.nodes[:, 0]
    raw = float(np.sum(vals * np.clip(v1, 0.0, None)) * grid.w)
    cube = vals.reshape(n, n, n)
    m = n // 2
    slice0 = (9 * cube[m] - cube[m + 1]) / 8
    return raw - grid.h**2 / 24 * float(slice0.sum()) * grid.h**2


def c_w_n(w_sup_norm: float, N: int, grid: VelocityGrid, rule: str = "corrected") -> float:
    """(1/N) int (e^{N|w||v|} - N|w||v| - 1)(v.n)_+ M dv on the velocity grid.

    ``rule="grid"`` is the plain node sum, the constant that appears when the
    wall estimate is chained on the grid; ``"corrected"`` removes the leading
    midpoint error at the half-space edge.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if w_sup_norm < 0:
        raise ValueError("w_sup_norm must be nonnegative")
    speed = np.linalg.norm(grid.nodes, axis=1)
    arg = N * w_sup_norm * speed
    if arg.max() > EXP_LIMIT:
        raise OverflowError(
            f"N*|w|*|v|max = {arg.max():.4g} overflows exp; use a smaller N or a smaller velocity extent"
        )
    M = maxwellian_values(1.0, np.zeros(3), 1.0, grid.nodes)
    vals = h_star(arg) * M / N
    if rule == "grid":
        return float(np.sum(vals * np.clip(grid.nodes[:, 0], 0.0, None)) * grid.w)
    if rule == "corrected":
        return _half_space_rule(vals, grid)
    raise ValueError(f"unknown rule {rule!r}")


@dataclass(frozen=True)
class ShearTestField:
    """w(t, x) = (0, U(x), 0) with U = a cos(pi x/L), a sin(pi x/L), a (2x/L - 1) or a.

    Divergence-free and tangential on the slab.
    """

    amplitude: float = 1.0
    shape: str = "cos"
    length: float = 1.0

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        k = np.pi / self.length
        U = {"cos": lambda: np.cos(k * x), "sin": lambda: np.sin(k * x),
             "linear": lambda: 2 * x / self.length - 1, "uniform": lambda: np.ones_like(x)}[self.shape]()
        out = np.zeros(np.broadcast(t, x).shape + (3,))
        out[..., 1] = self.amplitude * U
        return out


def _zero_field(t, x):
    return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape + (3,))


LEDGER_COLUMNS = (
    "time", "relent", "relent_init", "production", "dg", "quad_term", "accel_term",
    "boundary_term", "wall_mass_term", "rhs", "lhs", "slack", "tolerance", "ok",
)
LEDGER_LABELS = {
    "relent": "scaled relative entropy, analogue of 1/2 |u_eps - u|^2",
    "production": "collision entropy production, analogue of viscous dissipation",
    "dg": "wall entropy flux, analogue of boundary friction",
    "quad_term": "(v - eps w)^2 : grad w term, analogue of grad w : (u_eps - w)^2",
    "accel_term": "(v - eps w) . E(w) term",
    "boundary_term": "wall tangential momentum flux against w",
}


@dataclass
class EntropyLedger:
    times: np.ndarray
    relent: np.ndarray
    relent_init: float
    production: np.ndarray
    dg: np.ndarray
    quad_term: np.ndarray
    accel_term: np.ndarray
    boundary_term: np.ndarray
    wall_mass_term: np.ndarray
    slack: np.ndarray
    tolerance: np.ndarray
    labels: dict = field(default_factory=lambda: dict(LEDGER_LABELS))

    @property
    def ok(self) -> np.ndarray:
        return self.slack >= -self.tolerance

    @property
    def min_relative_slack(self) -> float:
        base = abs(self.relent_init) if self.relent_init else 1.0
        return float(self.slack.min() / base)

    def rows(self):
        lhs = self.relent + self.production + self.dg
        rhs = lhs + self.slack
        for i, t in enumerate(self.times):
            yield (t, self.relent[i], self.relent_init, self.production[i], self.dg[i], self.quad_term[i],
                   self.accel_term[i], self.boundary_term[i], self.wall_mass_term[i], rhs[i], lhs[i],
                   self.slack[i], self.tolerance[i], bool(self.ok[i]))

    def to_csv(self, path, meta: dict | None = None):
        m = {f"label {k}": v for k, v in self.labels.items()}
        m["inequality"] = "relent + production + dg <= relent_init - quad_term - accel_term + boundary_term"
        m.update(meta or {})
        return write_csv(path, list(LEDGER_COLUMNS), self.rows(), m)


def _check_test_field(W: np.ndarray):
    if np.any(W[..., 0] != 0):
        raise ValueError("test field must be tangential and divergence-free: its x-component must vanish")


def grid_maxwellian_mass(u: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """sum_j w M_{(1,u,1)}(v_j) for bulk velocities u of shape (..., 3); separable per axis."""
    u = np.asarray(u, dtype=float)
    d = grid.axis - u[..., None]
    return np.prod(np.exp(-0.5 * d * d).sum(axis=-1) * grid.h / np.sqrt(2 * np.pi), axis=-1)


def ledger(traj: KineticTrajectory, w: Callable | None = None, config=None) -> EntropyLedger:
    """Every term of the scaled relative-entropy inequality at each step time.

    The flux terms are summed by parts against the upwind face fluxes of the
    transport stage, with w sampled at cell centres and averaged over the two
    ends of each step. Collisions leave rho and m unchanged, so the moment part
    of the relative entropy is then tracked to roundoff and the slack is the
    discrete H-theorem slack. The continuum forms are recovered as dx, dt -> 0.
    """
    config = config or traj.config
    w = w or _zero_field
    eps, q = config.epsilon, config.q
    grid, space = traj.grid, traj.space
    dx, dt = space.dx, traj.dt
    t = traj.step_times
    x = space.centers
    tt, xx = np.meshgrid(t, x, indexing="ij")
    W = np.asarray(w(tt, xx), dtype=float) * np.ones(tt.shape + (3,))
    _check_test_field(W)
    n = traj.nsteps

    mom = traj.cell_moments
    rho, m = mom[..., 0], mom[..., 1:4]
    W2 = 0.5 * np.einsum("tcj,tcj->tc", W, W)

    # H(F|M_{eps w}) = H(F|M) + int F(eps^2|w|^2/2 - eps w.v) + int (M_{eps w} - M) on the grid
    mass_gap = grid_maxwellian_mass(eps * W, grid) - grid_maxwellian_mass(np.zeros(3), grid)
    shift = eps**2 * rho * W2 - eps * np.einsum("tcj,tcj->tc", m, W) + mass_gap
    relent = (traj.cell_entropy + shift).sum(axis=1) * dx / eps**2

    production = np.concatenate([[0.0], np.cumsum(traj.production_step)]) * eps ** -(4 + q)
    zero = np.zeros(n + 1)
    if not n:
        dg = quad = accel = boundary = wall_mass = zero
    else:
        dg = np.concatenate([[0.0], np.cumsum(traj.dg.sum(axis=1) * dt)]) / eps**3
        Wb = 0.5 * (W[1:] + W[:-1])
        W2b = 0.5 * (W2[1:] + W2[:-1])
        J = traj.face_flux[..., 0]
        Pi = traj.face_flux[..., 1:4]
        # interior faces: (P_1j - eps m_1 w_j) d_x w_j, with w1 = 0
        dW = np.diff(Wb, axis=1)
        dW2 = np.diff(W2b, axis=1)
        qd = np.einsum("tfj,tfj->t", Pi[:, 1:-1], dW) - eps * np.einsum("tf,tf->t", J[:, 1:-1], dW2)
        quad = np.concatenate([[0.0], np.cumsum(qd * dt)]) / eps**2
        # w . grad w = w1 d_x w = 0, so E(w) = d_t w; grid Maxwellian mass drift rides along
        mb = 0.5 * (m[1:] + m[:-1])
        rb = 0.5 * (rho[1:] + rho[:-1])
        ad = np.einsum("tcj,tcj->t", mb - eps * rb[..., None] * Wb, np.diff(W, axis=0)) * dx
        ad -= np.diff(mass_gap.sum(axis=1)) * dx / eps
        accel = np.concatenate([[0.0], np.cumsum(ad)]) / eps
        # wall faces against the adjacent cell sample; outward flux is -face 0 and +face N
        adj = np.stack([Wb[:, 0], Wb[:, -1]], axis=1)
        adj2 = np.stack([W2b[:, 0], W2b[:, -1]], axis=1)
        tang = np.einsum("tkj,tkj->t", traj.tangential_flux, adj[..., 1:])
        mass = np.einsum("tk,tk->t", traj.netflux, adj2)
        boundary = np.concatenate([[0.0], np.cumsum(tang * dt)]) / eps**2
        wall_mass = np.concatenate([[0.0], np.cumsum(mass * dt)]) / eps

    relent_init = float(relent[0])
    slack = relent_init - quad - accel + boundary - wall_mass - (relent + production + dg)
    terms = np.abs(np.stack([relent, np.full_like(relent, relent_init), production, dg, quad, accel, boundary]))
    tolerance = 1e-12 + 1e-3 * terms.max(axis=0)
    return EntropyLedger(t, relent, relent_init, production, dg, quad, accel, boundary, wall_mass, slack, tolerance)


@dataclass(frozen=True)
class YoungSplitReport:
    lhs: np.ndarray
    rhs: np.ndarray
    holds: bool


@dataclass(frozen=True)
class OutflowReport:
    eta: float
    h_eta: float
    lhs: np.ndarray
    rhs: np.ndarray
    holds: bool


@dataclass(frozen=True)
class BoundaryBoundReport:
    lhs: float
    dg_coeff: float
    dg_integral: float
    flux_term: float
    N: int
    holds: bool
    c_wn: float
    w_sup: float
    alpha: tuple
    beta: tuple
    young: YoungSplitReport | None = None
    outflow: OutflowReport | None = None

    @property
    def rhs(self) -> float:
        return self.dg_coeff * self.dg_integral + self.flux_term


def _tol(*terms) -> float:
    return 1e-12 + 1e-3 * max(abs(float(np.max(np.abs(x)))) for x in terms)


def boundary_bound(traj: KineticTrajectory, w: Callable | None, N: int, kernel=None, config=None,
                   eta: float = 0.5) -> BoundaryBoundReport:
    """Bound of the wall term by wall entropy flux and the wall second moment.

    ``kernel`` defaults to the trajectory's wall kernels (one per wall). The
    constant sqrt(2 pi) of the continuum half-flux average is replaced by the
    grid normalizer so the average has unit mass on the grid.
    """
    config = config or traj.config
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    w = w or _zero_field
    kernels = traj.kernels if kernel is None else (kernel if isinstance(kernel, (tuple, list)) else (kernel,) * 2)
    eps = config.epsilon
    grid, space = traj.grid, traj.space
    n = traj.nsteps
    dt = traj.dt
    t = traj.step_times
    tt, xx = np.meshgrid(t, np.concatenate([[0.0], space.centers, [space.length]]), indexing="ij")
    W = np.asarray(w(tt, xx), dtype=float) * np.ones(tt.shape + (3,))
    _check_test_field(W)
    w_sup = float(np.linalg.norm(W, axis=-1).max())
    C = c_w_n(w_sup, N, grid, rule="grid")

    ab = [extract_alpha_beta(k, grid) for k in kernels]
    alpha = np.array([a.alpha for a in ab])
    beta = np.array([a.beta for a in ab])
    tmid = 0.5 * (t[1:] + t[:-1])
    xw = np.array([0.0, space.length])
    Ww = np.asarray(w(tmid[:, None], xw[None, :]), dtype=float) * np.ones((n, 2, 3))
    lhs = abs(float(np.einsum("tkj,tkj->", traj.tangential_flux, Ww[..., 1:]) * dt))

    live = alpha > 0
    safe_beta = np.where(beta > 0, beta, np.inf)
    dg_int = float(np.sum(traj.dg[:, live] / safe_beta[live]) * dt)
    c_h = flux_normalizer(grid)
    dg_coeff = 1.0 / (N * eps) + c_h * C * eps / H_HALF
    flux_term = 2 * C * eps**2 * float(np.sum((alpha / eps) * traj.second_moment) * dt)
    rhs = dg_coeff * dg_int + flux_term
    holds = lhs <= rhs + _tol(lhs, rhs)

    ys = ob = None
    if traj.wall_F is not None and n:
        ys = _young_split(traj, kernels, Ww, N, C, c_h, eps)
        ob = _outflow_bound(traj, kernels, alpha, beta, c_h, eta)
    return BoundaryBoundReport(lhs, dg_coeff, dg_int, flux_term, int(N), bool(holds), C, w_sup,
                               tuple(alpha), tuple(beta), ys, ob)


def _young_split(traj, kernels, Ww, N, C, c_h, eps) -> YoungSplitReport:
    """N eps^2 int |g - Lg| |v| |w_t| (v.n)_+ M <= int (h(eps g) - h(eps Lg))(v.n)_+ M + N C eps^2 L(G)."""
    grid = traj.grid
    M = maxwellian_values(1.0, np.zeros(3), 1.0, grid.nodes)
    lhs = np.zeros((traj.nsteps, len(kernels)))
    rhs = np.zeros_like(lhs)
    for k, ker in enumerate(kernels):
        out = ker.out_idx
        Mo = M[out]
        wt = ker.vn * Mo * grid.w
        speed = np.linalg.norm(grid.nodes[out], axis=1)
        G = traj.wall_F[:, k, :][:, out] / Mo
        LG = c_h * (G @ wt)
        wtan = np.linalg.norm(Ww[:, k, 1:], axis=1)
        lhs[:, k] = N * eps * np.abs(G - LG[:, None]) @ (speed * wt) * wtan
        rhs[:, k] = (h(G - 1) - h(LG - 1)[:, None]) @ wt + N * C * eps**2 * LG
    return YoungSplitReport(lhs, rhs, bool(np.all(lhs <= rhs + _tol(lhs, rhs))))


def _outflow_bound(traj, kernels, alpha, beta, c_h, eta) -> OutflowReport:
    """alpha int F (v.n)_+ <= DG / (h(eta) beta) + alpha / (c_h (1 - eta)) int F (v.n)^2."""
    h_eta = float(h(eta))
    outflux = traj.outflux
    lhs = alpha * outflux
    with np.errstate(divide="ignore", invalid="ignore"):
        dg_part = np.where(alpha > 0, traj.dg / (h_eta * beta), 0.0)
    rhs = dg_part + alpha / (c_h * (1 - eta)) * traj.second_moment
    return OutflowReport(eta, h_eta, lhs, rhs, bool(np.all(lhs <= rhs + _tol(lhs, rhs))))
