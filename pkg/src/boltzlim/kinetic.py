"""Scaled Boltzmann/BGK dynamics on a 1-D slab with scattering-kernel walls.

The equation is (eps d_t + v.grad_x) F = eps^{-(1+q)} B(F, F). Stepping in t,
transport runs at speed v/eps and collisions at rate eps^{-(2+q)}.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import kl_div

from .boundary import ScatteringKernel, accommodation_schedule, build_kernel, wall_flux_of
from .collision import (
    angular_quadrature,
    collide_hard_sphere,
    loss_frequency_bound,
    matched_maxwellian,
)
from .grid import SpatialGrid1D, VelocityGrid, build_velocity_grid, maxwellian_values

log = logging.getLogger(__name__)

MODES = ("bgk", "hard_sphere")


@dataclass(frozen=True)
class WallSpec:
    kind: str = "diffuse"
    accommodation: float = 1.0
    schedule: str = "const"

    def alpha(self, eps: float) -> float:
        if self.kind == "specular":
            return 0.0
        if self.kind == "diffuse":
            return 1.0
        return accommodation_schedule(self.schedule, self.accommodation, eps)


def shear_profile(amplitude: float = 1.0, shape: str = "cos", length: float = 1.0) -> Callable:
    """u_in(x) = (0, U(x), 0) for a few standard U."""
    shapes = {
        "cos": lambda x: amplitude * np.cos(np.pi * x / length),
        "sin": lambda x: amplitude * np.sin(np.pi * x / length),
        "linear": lambda x: amplitude * (2 * x / length - 1),
        "uniform": lambda x: amplitude * np.ones_like(x),
    }
    if shape not in shapes:
        raise ValueError(f"unknown shear shape {shape!r}")
    U = shapes[shape]

    def u_in(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (3,))
        out[..., 1] = U(x)
        return out

    u_in.U = U
    return u_in


def _zero_field(x):
    return np.zeros(np.shape(x) + (3,))


@dataclass(frozen=True)
class KineticConfig:
    epsilon: float
    q: float = 1.0
    collision_mode: str = "bgk"
    extent: float = 6.0
    per_axis: int = 16
    cells: int = 32
    length: float = 1.0
    walls: tuple = (WallSpec(), WallSpec())
    u_in: Callable = _zero_field
    t_end: float = 0.5
    dt: float | None = None
    cfl: float = 0.9
    snapshot_every: int = 0
    angles: tuple = (8, 8)
    allow_large: bool = False
    store_wall_distributions: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.collision_mode not in MODES:
            raise ValueError(f"collision_mode must be one of {MODES}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")

    @property
    def rate(self) -> float:
        return self.epsilon ** -(2 + self.q)


@dataclass
class KineticState:
    F: np.ndarray
    t: float = 0.0


@dataclass
class StepRecord:
    """Per-step boundary and entropy bookkeeping, taken at the transport stage."""

    dg: np.ndarray
    outflux: np.ndarray
    netflux: np.ndarray
    second_moment: np.ndarray
    tangential_flux: np.ndarray
    face_flux: np.ndarray
    production: float
    clipped: float
    wall_F: np.ndarray | None = None


@dataclass
class KineticTrajectory:
    config: KineticConfig
    grid: VelocityGrid
    space: SpatialGrid1D
    dt: float
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    step_times: np.ndarray | None = None
    cell_moments: np.ndarray | None = None
    cell_entropy: np.ndarray | None = None
    cell_production: np.ndarray | None = None
    dg: np.ndarray | None = None
    outflux: np.ndarray | None = None
    netflux: np.ndarray | None = None
    second_moment: np.ndarray | None = None
    tangential_flux: np.ndarray | None = None
    face_flux: np.ndarray | None = None
    production_step: np.ndarray | None = None
    clipped: np.ndarray | None = None
    wall_F: np.ndarray | None = None
    kernels: tuple = ()

    @property
    def nsteps(self) -> int:
        return 0 if self.dg is None else len(self.dg)


SECOND_ORDER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _moment_matrix(grid: VelocityGrid) -> np.ndarray:
    """Columns 1, v1, v2, v3, then v_i v_j for the pairs in SECOND_ORDER."""
    v = grid.nodes
    cols = [np.ones(len(v)), v[:, 0], v[:, 1], v[:, 2]]
    cols += [v[:, i] * v[:, j] for i, j in SECOND_ORDER]
    return np.column_stack(cols) * grid.w


class Solver:
    """Precomputed grids and kernels for one configuration."""

    def __init__(self, config: KineticConfig):
        self.config = config
        self.grid = build_velocity_grid(config.extent, config.per_axis)
        self.space = SpatialGrid1D(config.cells, config.length)
        eps = config.epsilon
        normals = self.space.normals
        self.kernels = tuple(
            build_kernel(ws.kind, ws.alpha(eps), 1.0, self.grid, n) for ws, n in zip(config.walls, normals)
        )
        v1 = self.grid.nodes[:, 0]
        self.pos = v1 > 0
        self.neg = v1 < 0
        self.vmax = float(np.abs(v1).max())
        self.M = maxwellian_values(1.0, np.zeros(3), 1.0, self.grid.nodes)
        self.vn = [self.grid.nodes @ n for n in normals]
        self.mom = _moment_matrix(self.grid)
        self.face_mom = self.mom[:, :4] * self.grid.nodes[:, :1]
        self.angles = angular_quadrature(*config.angles)

    def dt_max(self) -> float:
        return self.config.epsilon * self.space.dx / self.vmax

    def check_dt(self, dt: float):
        lim = self.dt_max()
        if dt > lim * (1 + 1e-12):
            raise ValueError(f"CFL violated: dt={dt:.6g} exceeds admissible dt <= {lim:.6g} "
                             f"(eps * dx / max|v1|)")

    # collisions
    def production_density(self, F: np.ndarray, Mloc: np.ndarray | None = None) -> np.ndarray:
        """-int B(F,F) ln F dv per cell (unscaled B)."""
        w = self.grid.w
        if self.config.collision_mode == "bgk":
            if Mloc is None:
                Mloc = matched_maxwellian(F, self.grid)
            # int (M - F) ln M = 0 by moment matching, so -int (M - F) ln F is a sum of
            # node-wise nonnegative terms (F - M)(ln F - ln M)
            with np.errstate(divide="ignore", invalid="ignore"):
                lr = np.log(np.where(F > 0, F, 1.0)) - np.log(np.where(Mloc > 0, Mloc, 1.0))
                val = np.where((F > 0) & (Mloc > 0), (F - Mloc) * lr, np.where(Mloc > F, np.inf, 0.0))
            return val.sum(axis=1) * w
        out = np.empty(F.shape[0])
        for j, Fj in enumerate(F):
            B = self._hard_sphere(Fj)
            out[j] = -np.sum(B * np.log(Fj)) * w
        return out

    def _hard_sphere(self, Fj: np.ndarray) -> np.ndarray:
        return collide_hard_sphere(Fj, self.grid, self.angles, self.config.allow_large,
                                   projection="maxwellian").values

    def collide(self, F: np.ndarray, tau: float, Mloc=None):
        """Advance dF/dt = rate * B(F) over tau; returns (F, clipped mass, Mloc or None)."""
        nu = self.config.rate
        if self.config.collision_mode == "bgk":
            if Mloc is None:
                Mloc = matched_maxwellian(F, self.grid)
            return Mloc + (F - Mloc) * math.exp(-nu * tau), 0.0, Mloc
        # explicit substeps; h * rate * loss <= 1 keeps the loss part positive
        n_sub = max(1, math.ceil(nu * tau * loss_frequency_bound(F, self.grid).max()))
        h = tau / n_sub
        clipped = 0.0
        F = F.copy()
        for _ in range(n_sub):
            for j in range(F.shape[0]):
                F[j] = F[j] + h * nu * self._hard_sphere(F[j])
            neg = F < 0
            if np.any(neg):
                clipped += float(-F[neg].sum() * self.grid.w * self.space.dx)
                F[neg] = 0.0
        if clipped:
            log.info("clipped mass %.3e in collision substeps", clipped)
        return F, clipped, None

    # transport
    def ghosts(self, F: np.ndarray):
        """Wall distributions (cell values on outgoing nodes, kernel output on incoming)."""
        walls = []
        for k, cell in zip(self.kernels, (F[0], F[-1])):
            Fw = cell.copy()
            Fw[k.in_idx] = k.apply(cell[k.out_idx])
            walls.append(Fw)
        return walls

    def transport(self, F: np.ndarray, dt: float):
        walls = self.ghosts(F)
        c = np.abs(self.grid.nodes[:, 0]) * dt / (self.config.epsilon * self.space.dx)
        upstream = np.empty_like(F)
        upstream[1:, self.pos] = F[:-1, self.pos]
        upstream[0, self.pos] = walls[0][self.pos]
        upstream[:-1, self.neg] = F[1:, self.neg]
        upstream[-1, self.neg] = walls[1][self.neg]
        # upwind face values, face f is the left face of cell f
        face = np.empty((F.shape[0] + 1, F.shape[1]))
        face[1:, self.pos] = F[:, self.pos]
        face[0, self.pos] = walls[0][self.pos]
        face[:-1, self.neg] = F[:, self.neg]
        face[-1, self.neg] = walls[1][self.neg]
        flux = face @ self.face_mom
        return F - c * (F - upstream), walls, flux

    def wall_diagnostics(self, walls):
        w = self.grid.w
        dg, out, net, sec, tang = [], [], [], [], []
        for Fw, vn, k in zip(walls, self.vn, self.kernels):
            dg.append(wall_flux_of(kl_div(Fw, self.M), k, w))
            out.append(np.sum(Fw * np.clip(vn, 0, None)) * w)
            net.append(np.sum(Fw * vn) * w)
            sec.append(np.sum(Fw * vn**2) * w)
            tang.append((Fw * vn) @ self.grid.nodes[:, 1:] * w)
        return np.array(dg), np.array(out), np.array(net), np.array(sec), np.array(tang)

    def cell_records(self, F: np.ndarray, Mloc=None):
        mom = F @ self.mom
        ent = kl_div(F, self.M).sum(axis=1) * self.grid.w
        prod = self.production_density(F, Mloc)
        return mom, ent, prod

    def step(self, F: np.ndarray, dt: float, prev_prod=None, prev_M=None):
        self.check_dt(dt)
        dx = self.space.dx
        half = 0.5 * dt
        bgk = self.config.collision_mode == "bgk"
        if bgk and prev_M is None:
            prev_M = matched_maxwellian(F, self.grid)
        p0 = prev_prod if prev_prod is not None else self.production_density(F, prev_M)
        F1, c1, M1 = self.collide(F, half, prev_M)
        p1 = self.production_density(F1, M1)
        F2, walls, flux = self.transport(F1, dt)
        diag = self.wall_diagnostics(walls)
        M2 = matched_maxwellian(F2, self.grid) if bgk else None
        p2 = self.production_density(F2, M2)
        F3, c2, M3 = self.collide(F2, half, M2)
        p3 = self.production_density(F3, M3)
        prod = 0.5 * half * dx * (p0.sum() + p1.sum() + p2.sum() + p3.sum())
        rec = StepRecord(*diag, face_flux=flux, production=float(prod), clipped=c1 + c2,
                         wall_F=np.array(walls) if self.config.store_wall_distributions else None)
        return F3, rec, p3, M3


def _solver_for(config: KineticConfig) -> Solver:
    cache = _solver_for.__dict__.setdefault("cache", {})
    key = id(config)
    if key not in cache or cache[key].config is not config:
        cache.clear()
        cache[key] = Solver(config)
    return cache[key]


def _u_in_values(config: KineticConfig, x: np.ndarray) -> np.ndarray:
    u = np.asarray(config.u_in(x), dtype=float)
    if u.shape != x.shape + (3,):
        raise ValueError(f"u_in must return shape {x.shape + (3,)}, got {u.shape}")
    if np.any(u[..., 0] != 0):
        raise ValueError("u_in has a wall-normal (x) component; only tangential profiles are admissible")
    return u


def init_state(config: KineticConfig) -> KineticState:
    s = _solver_for(config)
    u = _u_in_values(config, s.space.centers)
    F = maxwellian_values(np.ones(config.cells), config.epsilon * u, np.ones(config.cells), s.grid.nodes)
    return KineticState(F, 0.0)


def step(state: KineticState, config: KineticConfig, dt: float) -> KineticState:
    s = _solver_for(config)
    F, rec, _, _ = s.step(state.F, dt)
    out = KineticState(F, state.t + dt)
    out.record = rec
    return out


def plan_steps(config: KineticConfig, solver: Solver):
    if config.t_end == 0:
        return 0, 0.0
    if config.dt is not None:
        solver.check_dt(config.dt)
        n = max(1, round(config.t_end / config.dt))
        if not math.isclose(n * config.dt, config.t_end, rel_tol=1e-9):
            raise ValueError("t_end must be an integer multiple of dt")
        return n, config.dt
    n = math.ceil(config.t_end / (config.cfl * solver.dt_max()) - 1e-9)
    return n, config.t_end / n


def run(config: KineticConfig) -> KineticTrajectory:
    s = _solver_for(config)
    state = init_state(config)
    n, dt = plan_steps(config, s)
    traj = KineticTrajectory(config, s.grid, s.space, dt, kernels=s.kernels)
    F = state.F
    mom, ent, prod = s.cell_records(F)
    moms, ents, prods = [mom], [ent], [prod]
    traj.times.append(0.0)
    traj.snapshots.append(F.copy())
    recs = []
    p, M = prod, None
    every = config.snapshot_every
    for i in range(n):
        F, rec, p, M = s.step(F, dt, prev_prod=p, prev_M=M)
        recs.append(rec)
        mom = F @ s.mom
        moms.append(mom)
        ents.append(kl_div(F, s.M).sum(axis=1) * s.grid.w)
        prods.append(p)
        if (every and (i + 1) % every == 0) or i == n - 1:
            traj.times.append((i + 1) * dt)
            traj.snapshots.append(F.copy())
    traj.step_times = np.arange(n + 1) * dt
    traj.cell_moments = np.array(moms)
    traj.cell_entropy = np.array(ents)
    traj.cell_production = np.array(prods)
    k = len(s.kernels)
    traj.dg = np.array([r.dg for r in recs]).reshape(n, k)
    traj.outflux = np.array([r.outflux for r in recs]).reshape(n, k)
    traj.netflux = np.array([r.netflux for r in recs]).reshape(n, k)
    traj.second_moment = np.array([r.second_moment for r in recs]).reshape(n, k)
    traj.tangential_flux = np.array([r.tangential_flux for r in recs]).reshape(n, k, 2)
    traj.face_flux = np.array([r.face_flux for r in recs]).reshape(n, config.cells + 1, 4)
    traj.production_step = np.array([r.production for r in recs])
    traj.clipped = np.array([r.clipped for r in recs])
    if config.store_wall_distributions:
        traj.wall_F = np.array([r.wall_F for r in recs]).reshape(n, k, s.grid.size)
    return traj


def weak_conservation_residuals(traj: KineticTrajectory, phi: Callable, w: Callable | None = None,
                                h: float = 1e-6):
    """Residuals of the weak mass and momentum identities along a trajectory.

    ``phi(t, x)`` is scalar; ``w(t, x)`` returns (..., 3) and must have a zero
    x-component (tangential and divergence-free on the slab). Time derivatives
    of the test functions use centered differences with step ``h``.
    """
    eps = traj.config.epsilon
    dx = traj.space.dx
    x = traj.space.centers
    xw = np.array([0.0, traj.space.length])
    t = traj.step_times
    dt = traj.dt
    mom = traj.cell_moments
    rho, m = mom[..., 0], mom[..., 1:4]
    P = np.zeros(mom.shape[:2] + (3, 3))
    for c, (i, j) in enumerate(SECOND_ORDER):
        P[..., i, j] = mom[..., 4 + c]
        P[..., j, i] = mom[..., 4 + c]
    tt, xx = np.meshgrid(t, x, indexing="ij")
    tmid = 0.5 * (t[1:] + t[:-1])

    def trap(vals):
        return float(np.sum(0.5 * (vals[1:] + vals[:-1])) * dt) if len(vals) > 1 else 0.0

    f = np.asarray(phi(tt, xx), dtype=float) * np.ones_like(tt)
    ft = (np.asarray(phi(tt + h, xx)) - np.asarray(phi(tt - h, xx))) / (2 * h) * np.ones_like(tt)
    fx = (np.asarray(phi(tt, xx + h)) - np.asarray(phi(tt, xx - h))) / (2 * h) * np.ones_like(tt)
    lhs = eps * (np.sum(rho[-1] * f[-1]) - np.sum(rho[0] * f[0])) * dx
    if traj.nsteps:
        pw = np.asarray(phi(tmid[:, None], xw[None, :]), dtype=float) * np.ones((len(tmid), 2))
        lhs += float(np.sum(pw * traj.netflux) * dt)
    rhs = trap((eps * rho * ft + m[..., 0] * fx).sum(axis=1) * dx)
    mass_res = lhs - rhs

    if w is None:
        return mass_res, 0.0
    W = np.asarray(w(tt, xx), dtype=float)
    if np.any(W[..., 0] != 0):
        raise ValueError("test field must be tangential (zero x-component) on the slab")
    Wt = (np.asarray(w(tt + h, xx)) - np.asarray(w(tt - h, xx))) / (2 * h)
    Wx = (np.asarray(w(tt, xx + h)) - np.asarray(w(tt, xx - h))) / (2 * h)
    lhs = eps * (np.sum(m[-1] * W[-1]) - np.sum(m[0] * W[0])) * dx
    if traj.nsteps:
        Ww = np.asarray(w(tmid[:, None], xw[None, :]), dtype=float)
        lhs += float(np.sum(traj.tangential_flux * Ww[..., 1:]) * dt)
    integrand = eps * np.einsum("tcj,tcj->tc", m, Wt) + np.einsum("tcj,tcj->tc", P[..., 0, :], Wx)
    rhs = trap(integrand.sum(axis=1) * dx)
    return mass_res, lhs - rhs
