"""2-D incompressible Navier-Stokes / Euler on a staggered grid with slip walls.

Layout. u lives on x-faces, v on y-faces, p at cell centres. Arrays keep the
wall-normal points on walled directions (they stay zero), so u has shape
(nx + 1, ny) when x is walled and (nx, ny) when periodic; v likewise in y.

A step is explicit conservative advection followed by a backward-Euler Stokes
solve for viscosity and pressure together. Tangential wall values enter through
ghost cells: slip walls use the Robin relation eps du/dn + lam u = 0, Dirichlet
walls u_ghost = 2 U_wall - u. With upwind fluxes the advection step never adds
energy for a discretely divergence-free field, and the Stokes step releases
exactly the quadrature of eps |Sigma|^2 / 2 plus the wall friction, so the
energy inequality holds step by step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

SCENARIOS = ("channel_shear", "lid_cavity", "periodic_box")
PROFILES = ("cos", "sin", "linear", "uniform")


@dataclass(frozen=True)
class FluidConfig:
    scenario: str = "channel_shear"
    epsilon: float = 1e-2
    lam: float = 0.0
    wall_mode: str = "slip"
    nx: int = 64
    ny: int = 64
    length_x: float = 1.0
    length_y: float = 1.0
    t_end: float = 1.0
    dt: float | None = None
    cfl: float = 0.4
    profile: str = "cos"
    amplitude: float = 1.0
    lid_velocity: float = 1.0
    advection: str = "upwind"
    snapshot_every: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.epsilon < 0 or self.lam < 0:
            raise ValueError("epsilon and lam must be nonnegative")
        if self.wall_mode not in ("slip", "dirichlet"):
            raise ValueError(f"wall_mode must be 'slip' or 'dirichlet', got {self.wall_mode!r}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need at least 2 cells per direction")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.advection not in ("upwind", "muscl"):
            raise ValueError(f"unknown advection scheme {self.advection!r}")
        if not 0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")

    @property
    def periodic_x(self) -> bool:
        return self.scenario != "lid_cavity"

    @property
    def periodic_y(self) -> bool:
        return self.scenario == "periodic_box"

    @property
    def dirichlet(self) -> bool:
        return self.scenario == "lid_cavity" or self.wall_mode == "dirichlet"

    @property
    def dx(self) -> float:
        return self.length_x / self.nx

    @property
    def dy(self) -> float:
        return self.length_y / self.ny


@dataclass
class FluidState:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    time: float
    epsilon: float
    lam: float


# ---------------------------------------------------------------- operators

def _second_difference(n: int, h: float, kind: str, ghost=((0.0, 0.0), (0.0, 0.0))):
    """1-D second difference on n unknowns and the affine boundary source.

    kind "periodic": circulant. "fixed": interior of a walled line whose end
    values are zero. "ghost": ends a half cell from the wall, with ghost value
    r q_end + s given per end as (r, s).
    """
    if kind == "periodic":
        e = np.ones(n)
        A = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
        A[0, n - 1] += 1
        A[n - 1, 0] += 1
        return A.tocsr() / h**2, np.zeros(n)
    e = np.ones(n)
    A = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
    src = np.zeros(n)
    if kind == "ghost":
        (r0, s0), (r1, s1) = ghost
        A[0, 0] += r0
        A[n - 1, n - 1] += r1
        src[0] += s0
        src[-1] += s1
    return A.tocsr() / h**2, src / h**2


class Discretization:
    """Index maps, Laplacians with wall closures, divergence and the Stokes solver."""

    def __init__(self, cfg: FluidConfig, dt: float):
        self.cfg = cfg
        self.dt = dt
        nx, ny, dx, dy = cfg.nx, cfg.ny, cfg.dx, cfg.dy
        self.nxu = nx if cfg.periodic_x else nx + 1
        self.nyv = ny if cfg.periodic_y else ny + 1
        # interior (unknown) masks
        self.u_live = np.ones((self.nxu, ny), bool)
        if not cfg.periodic_x:
            self.u_live[[0, -1], :] = False
        self.v_live = np.ones((nx, self.nyv), bool)
        if not cfg.periodic_y:
            self.v_live[:, [0, -1]] = False
        self.nu_ = int(self.u_live.sum())
        self.nv_ = int(self.v_live.sum())

        eps, lam = cfg.epsilon, cfg.lam
        self.r_wall = self._ghost_ratio()
        lid = cfg.lid_velocity if cfg.scenario == "lid_cavity" else 0.0
        r = self.r_wall
        s_top = 2 * lid if cfg.dirichlet else 0.0

        # u: x-direction normal, y-direction tangential
        mu_x = nx if cfg.periodic_x else nx - 1
        Ax, _ = _second_difference(mu_x, dx, "periodic" if cfg.periodic_x else "fixed")
        if cfg.periodic_y:
            Ay, sy = _second_difference(ny, dy, "periodic")
        else:
            Ay, sy = _second_difference(ny, dy, "ghost", ((r, 0.0), (r, s_top)))
        self.Lu = sp.kron(Ax, sp.identity(ny)) + sp.kron(sp.identity(mu_x), Ay)
        self.src_u = np.tile(sy, mu_x)

        # v: y-direction normal, x-direction tangential
        mv_y = ny if cfg.periodic_y else ny - 1
        By, _ = _second_difference(mv_y, dy, "periodic" if cfg.periodic_y else "fixed")
        if cfg.periodic_x:
            Bx, _ = _second_difference(nx, dx, "periodic")
        else:
            Bx, _ = _second_difference(nx, dx, "ghost", ((r, 0.0), (r, 0.0)))
        self.Lv = sp.kron(Bx, sp.identity(mv_y)) + sp.kron(sp.identity(nx), By)

        self.D = self._divergence()
        self.G = -self.D.T
        n = self.nu_ + self.nv_
        L = sp.block_diag([self.Lu, self.Lv])
        A = sp.identity(n) - dt * eps * L
        K = sp.bmat([[A, dt * self.G], [self.D, None]], format="lil")
        # pin one pressure value; the matching divergence row is implied by the others
        K[n, :] = 0
        K[n, n] = 1
        self._stokes = splu(K.tocsc())
        self._n = n
        self.src = np.concatenate([self.src_u, np.zeros(self.nv_)]) * eps
        self.lam_eff = lam if not cfg.dirichlet else 0.0

    def _ghost_ratio(self) -> float:
        cfg = self.cfg
        if cfg.dirichlet:
            return -1.0
        a = cfg.epsilon / cfg.dy
        b = 0.5 * cfg.lam
        if a + b == 0:
            return 1.0
        return (a - b) / (a + b)

    def _divergence(self):
        cfg = self.cfg
        nx, ny, dx, dy = cfg.nx, cfg.ny, cfg.dx, cfg.dy
        cells = np.arange(nx * ny).reshape(nx, ny)
        uid = -np.ones((self.nxu, ny), int)
        uid[self.u_live] = np.arange(self.nu_)
        vid = -np.ones((nx, self.nyv), int)
        vid[self.v_live] = np.arange(self.nv_) + self.nu_
        rows, cols, vals = [], [], []
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        for idx, sgn, h in (
            (uid[(i + 1) % self.nxu, j], 1.0, dx), (uid[i, j], -1.0, dx),
            (vid[i, (j + 1) % self.nyv], 1.0, dy), (vid[i, j], -1.0, dy),
        ):
            keep = idx >= 0
            rows.append(cells[keep])
            cols.append(idx[keep])
            vals.append(np.full(keep.sum(), sgn / h))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(nx * ny, self.nu_ + self.nv_))

    # packing
    def pack(self, u, v):
        return np.concatenate([u[self.u_live], v[self.v_live]])

    def unpack(self, x, u_like, v_like):
        u = np.zeros_like(u_like)
        v = np.zeros_like(v_like)
        u[self.u_live] = x[: self.nu_]
        v[self.v_live] = x[self.nu_:]
        return u, v

    def stokes(self, u, v, viscous: bool = True):
        """Backward-Euler viscosity with the divergence constraint; returns (u, v, p)."""
        rhs = np.zeros(self._n + self.cfg.nx * self.cfg.ny)
        rhs[: self._n] = self.pack(u, v) + (self.dt * self.src if viscous else 0.0)
        sol = self._stokes.solve(rhs)
        u1, v1 = self.unpack(sol[: self._n], u, v)
        p = sol[self._n:].reshape(self.cfg.nx, self.cfg.ny)
        return u1, v1, p


def _projector(cfg: FluidConfig) -> Discretization:
    return Discretization(replace(cfg, epsilon=0.0, lam=0.0), 1.0)


def divergence(u, v, cfg: FluidConfig) -> np.ndarray:
    du = (np.roll(u, -1, axis=0)[: cfg.nx] - u[: cfg.nx]) / cfg.dx if cfg.periodic_x else np.diff(u, axis=0) / cfg.dx
    dv = (np.roll(v, -1, axis=1)[:, : cfg.ny] - v[:, : cfg.ny]) / cfg.dy if cfg.periodic_y else np.diff(v, axis=1) / cfg.dy
    return du + dv


# ---------------------------------------------------------------- advection

def _limited_faces(q, axis, periodic):
    """Left and right states at the faces between consecutive entries (van Leer)."""
    q = np.moveaxis(q, axis, 0)
    if periodic:
        qm, qp = np.roll(q, 1, 0), np.roll(q, -1, 0)
    else:
        qm = np.concatenate([q[:1], q[:-1]])
        qp = np.concatenate([q[1:], q[-1:]])
    a, b = q - qm, qp - q
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(a * b > 0, 2 * a * b / (a + b), 0.0)
    left = q + 0.5 * slope
    right = q - 0.5 * slope
    if periodic:
        L, R = left, np.roll(right, -1, 0)
    else:
        L, R = left[:-1], right[1:]
    return np.moveaxis(L, 0, axis), np.moveaxis(R, 0, axis)


def _face_flux(q, a, axis, periodic, scheme):
    """Upwind flux a q at faces between consecutive entries along ``axis``."""
    if scheme == "muscl":
        L, R = _limited_faces(q, axis, periodic)
    else:
        L = q
        R = np.roll(q, -1, axis) if periodic else np.take(q, np.arange(1, q.shape[axis]), axis)
        if not periodic:
            L = np.take(q, np.arange(q.shape[axis] - 1), axis)
    return np.maximum(a, 0) * L + np.minimum(a, 0) * R


def _flux_divergence(F, axis, periodic, h, n):
    """(F_{k+1/2} - F_{k-1/2}) / h on n points; missing boundary faces carry zero flux."""
    if periodic:
        return (F - np.roll(F, 1, axis)) / h
    pad = [(0, 0)] * F.ndim
    pad[axis] = (1, 1)
    Fp = np.pad(F, pad)
    return np.diff(Fp, axis=axis) / h


def advect(u, v, cfg: FluidConfig, dt: float):
    """One forward-Euler step of the conservative transport of u and v by themselves."""
    px, py = cfg.periodic_x, cfg.periodic_y
    dx, dy, nx, ny = cfg.dx, cfg.dy, cfg.nx, cfg.ny
    s = cfg.advection
    # u control volumes: x-faces at cell centres, y-faces at nodes
    ax = 0.5 * (u + np.roll(u, -1, 0)) if px else 0.5 * (u[:-1] + u[1:])
    # v averaged onto u-points (x) at y-face rows
    vpad = v if px else np.pad(v, ((1, 1), (0, 0)))
    vn = 0.5 * (np.roll(vpad, 1, 0) + vpad) if px else 0.5 * (vpad[:-1] + vpad[1:])
    ay = vn if py else vn[:, 1:-1]
    du = _flux_divergence(_face_flux(u, ax, 0, px, s), 0, px, dx, u.shape[0])
    du += _flux_divergence(_face_flux(u, ay, 1, py, s), 1, py, dy, ny)
    # v control volumes: x-faces at nodes, y-faces at cell centres
    bpad = u if py else np.pad(u, ((0, 0), (1, 1)))
    un = 0.5 * (np.roll(bpad, 1, 1) + bpad) if py else 0.5 * (bpad[:, :-1] + bpad[:, 1:])
    bx = np.roll(un, -1, 0) if px else un[1:-1]
    by = 0.5 * (v + np.roll(v, -1, 1)) if py else 0.5 * (v[:, :-1] + v[:, 1:])
    dv = _flux_divergence(_face_flux(v, bx, 0, px, s), 0, px, dx, nx)
    dv += _flux_divergence(_face_flux(v, by, 1, py, s), 1, py, dy, v.shape[1])
    return u - dt * du, v - dt * dv


def courant(u, v, cfg: FluidConfig, dt: float) -> float:
    return dt * (np.abs(u).max() / cfg.dx + np.abs(v).max() / cfg.dy)


# ---------------------------------------------------------------- diagnostics

def _ghost_rows(u, cfg: FluidConfig):
    """Ghost u rows below y = 0 and above y = L_y (walled y only)."""
    r = -1.0 if cfg.dirichlet else Discretization._ghost_ratio(_Shim(cfg))
    lid = cfg.lid_velocity if cfg.scenario == "lid_cavity" else 0.0
    return r * u[:, 0], r * u[:, -1] + (2 * lid if cfg.dirichlet else 0.0)


class _Shim:
    def __init__(self, cfg):
        self.cfg = cfg


def _ghost_cols(v, cfg: FluidConfig):
    """Ghost v columns left of x = 0 and right of x = L_x (walled x, Dirichlet)."""
    return -v[0], -v[-1]


def velocity_gradients(u, v, cfg: FluidConfig):
    """(ux, vy) at cell centres and (uy, vx) at nodes, including wall nodes.

    Node arrays have shape (nxu, nyv); wall-node entries of the wall-parallel
    derivative use the ghost closures.
    """
    dx, dy = cfg.dx, cfg.dy
    ux = (np.roll(u, -1, 0) - u) / dx if cfg.periodic_x else np.diff(u, axis=0) / dx
    vy = (np.roll(v, -1, 1) - v) / dy if cfg.periodic_y else np.diff(v, axis=1) / dy
    if cfg.periodic_y:
        uy = (u - np.roll(u, 1, 1)) / dy
    else:
        gb, gt = _ghost_rows(u, cfg)
        up = np.concatenate([gb[:, None], u, gt[:, None]], axis=1)
        uy = np.diff(up, axis=1) / dy
        if not cfg.periodic_x:
            # u vanishes along walled x lines, corners included
            uy[[0, -1]] = 0.0
    if cfg.periodic_x:
        vx = (v - np.roll(v, 1, 0)) / dx
    else:
        gl, gr = _ghost_cols(v, cfg)
        vp = np.concatenate([gl[None], v, gr[None]], axis=0)
        vx = np.diff(vp, axis=0) / dx
    return ux, vy, uy, vx


def _node_weights(cfg: FluidConfig) -> np.ndarray:
    nxu = cfg.nx if cfg.periodic_x else cfg.nx + 1
    nyv = cfg.ny if cfg.periodic_y else cfg.ny + 1
    wx = np.ones(nxu)
    wy = np.ones(nyv)
    if not cfg.periodic_x:
        wx[[0, -1]] = 0.5
    if not cfg.periodic_y:
        wy[[0, -1]] = 0.5
    return np.outer(wx, wy) * cfg.dx * cfg.dy


def deformation_tensor(state_or_uv, cfg: FluidConfig):
    """Sigma = grad u + grad u^T: (S11, S22) at cell centres, S12 at nodes."""
    u, v = (state_or_uv.u, state_or_uv.v) if isinstance(state_or_uv, FluidState) else state_or_uv
    ux, vy, uy, vx = velocity_gradients(u, v, cfg)
    return 2 * ux, 2 * vy, uy + vx


def kinetic_energy(u, v, cfg: FluidConfig) -> float:
    d = _projector_masks(cfg)
    return 0.5 * (np.sum(u[d[0]] ** 2) + np.sum(v[d[1]] ** 2)) * cfg.dx * cfg.dy


def _projector_masks(cfg: FluidConfig):
    nxu = cfg.nx if cfg.periodic_x else cfg.nx + 1
    nyv = cfg.ny if cfg.periodic_y else cfg.ny + 1
    mu = np.ones((nxu, cfg.ny), bool)
    mv = np.ones((cfg.nx, nyv), bool)
    if not cfg.periodic_x:
        mu[[0, -1]] = False
    if not cfg.periodic_y:
        mv[:, [0, -1]] = False
    return mu, mv


def viscous_dissipation(u, v, cfg: FluidConfig) -> float:
    """eps * quadrature of |Sigma|^2 / 2; wall nodes carry half weight."""
    S11, S22, S12 = deformation_tensor((u, v), cfg)
    cell = 0.5 * np.sum(S11**2 + S22**2) * cfg.dx * cfg.dy
    node = np.sum(S12**2 * _node_weights(cfg))
    return cfg.epsilon * (cell + node)


def wall_slip(u, cfg: FluidConfig):
    """Tangential wall velocities (u at y = 0 and y = L_y) from the ghost closure."""
    if cfg.periodic_y:
        return np.zeros((0, cfg.nx))
    gb, gt = _ghost_rows(u, cfg)
    return np.stack([0.5 * (u[:, 0] + gb), 0.5 * (u[:, -1] + gt)])


def wall_friction(u, cfg: FluidConfig) -> float:
    if cfg.periodic_y or cfg.dirichlet:
        return 0.0
    uw = wall_slip(u, cfg)[:, : cfg.nx]
    return cfg.lam * float(np.sum(uw**2)) * cfg.dx


def lid_work(u, cfg: FluidConfig) -> float:
    """Power delivered by the moving lid, eps U du/dy at y = L_y."""
    if cfg.scenario != "lid_cavity":
        return 0.0
    _, gt = _ghost_rows(u, cfg)
    uy = (gt - u[:, -1]) / cfg.dy
    return cfg.epsilon * cfg.lid_velocity * float(np.sum(uy[1:-1])) * cfg.dx


# ---------------------------------------------------------------- runs

@dataclass
class LerayLedger:
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    friction: np.ndarray
    work: np.ndarray
    slack: np.ndarray

    @property
    def relative_slack(self) -> np.ndarray:
        return self.slack / max(self.energy.max(), self.work.max(), 1e-300)

    @property
    def holds(self) -> bool:
        return bool(np.all(self.relative_slack >= -1e-6))

    def rows(self):
        for i, t in enumerate(self.times):
            yield (t, self.energy[i], self.dissipation[i], self.friction[i], self.work[i], self.slack[i])


@dataclass
class FluidTrajectory:
    config: FluidConfig
    dt: float
    times: np.ndarray
    snapshots: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    u_steps: list = field(default_factory=list)
    v_steps: list = field(default_factory=list)
    max_divergence: np.ndarray | None = None
    ledger: LerayLedger | None = None

    @property
    def final(self):
        return self.u_steps[-1], self.v_steps[-1]


def _profile(cfg: FluidConfig, y):
    k = np.pi / cfg.length_y
    return cfg.amplitude * {
        "cos": lambda: np.cos(k * y),
        "sin": lambda: np.sin(k * y),
        "linear": lambda: y / cfg.length_y - 0.5,
        "uniform": lambda: np.ones_like(y),
    }[cfg.profile]()


def initial_state(cfg: FluidConfig) -> FluidState:
    nx, ny, dx, dy = cfg.nx, cfg.ny, cfg.dx, cfg.dy
    nxu = nx if cfg.periodic_x else nx + 1
    nyv = ny if cfg.periodic_y else ny + 1
    yu = (np.arange(ny) + 0.5) * dy
    u = np.zeros((nxu, ny))
    v = np.zeros((nx, nyv))
    if cfg.scenario == "channel_shear":
        u[:] = _profile(cfg, yu)[None, :]
    elif cfg.scenario == "periodic_box":
        # Taylor-Green cell from the stream function sin(kx x) sin(ky y)
        kx, ky = 2 * np.pi / cfg.length_x, 2 * np.pi / cfg.length_y
        Xn, Yn = np.meshgrid(np.arange(nx + 1) * dx, np.arange(ny + 1) * dy, indexing="ij")
        psi = cfg.amplitude * np.sin(kx * Xn) * np.sin(ky * Yn) / ky
        u = (np.diff(psi, axis=1) / dy)[:nx]
        v = -(np.diff(psi, axis=0) / dx)[:, :ny]
    if cfg.scenario != "lid_cavity":
        u, v, _ = _projector(cfg).stokes(u, v, viscous=False)
    return FluidState(u, v, np.zeros((nx, ny)), 0.0, cfg.epsilon, cfg.lam)


def _plan(cfg: FluidConfig, u, v):
    # the cavity starts at rest; bound both components by the lid speed
    speed = max(np.abs(u).max() / cfg.dx + np.abs(v).max() / cfg.dy,
                (cfg.lid_velocity * (1 / cfg.dx + 1 / cfg.dy)) if cfg.scenario == "lid_cavity" else 0.0)
    if cfg.t_end == 0:
        return 0, 0.0
    if cfg.dt is not None:
        dt = cfg.dt
        n = max(1, round(cfg.t_end / dt))
        if not math.isclose(n * dt, cfg.t_end, rel_tol=1e-9):
            raise ValueError("t_end must be an integer multiple of dt")
    else:
        lim = cfg.cfl / speed if speed > 0 else cfg.t_end
        n = max(1, math.ceil(cfg.t_end / lim - 1e-9))
        dt = cfg.t_end / n
    return n, dt


def ns_run(cfg: FluidConfig, keep_steps: bool = True) -> FluidTrajectory:
    """Time-stepping for the configured scenario with the energy ledger."""
    st = initial_state(cfg)
    u, v = st.u, st.v
    n, dt = _plan(cfg, u, v)
    disc = Discretization(cfg, dt if n else 1.0)
    E = [kinetic_energy(u, v, cfg)]
    diss, fric, work, divs = [0.0], [0.0], [0.0], [float(np.abs(divergence(u, v, cfg)).max())]
    traj = FluidTrajectory(cfg, dt, np.arange(n + 1) * dt)
    traj.u_steps.append(u.copy())
    traj.v_steps.append(v.copy())
    traj.snapshots.append((u.copy(), v.copy()))
    traj.snapshot_times.append(0.0)
    for k in range(n):
        c = courant(u, v, cfg, dt)
        if c > 0.5 + 1e-12:
            raise ValueError(f"CFL violated: Courant number {c:.4g} exceeds 0.5 at step {k}; reduce dt")
        if cfg.advection == "muscl":
            u1, v1 = advect(u, v, cfg, dt)
            u2, v2 = advect(u1, v1, cfg, dt)
            ua, va = 0.5 * (u + u2), 0.5 * (v + v2)
        else:
            ua, va = advect(u, v, cfg, dt)
        u, v, p = disc.stokes(ua, va)
        E.append(kinetic_energy(u, v, cfg))
        diss.append(viscous_dissipation(u, v, cfg))
        fric.append(wall_friction(u, cfg))
        work.append(lid_work(u, cfg))
        divs.append(float(np.abs(divergence(u, v, cfg)).max()))
        if keep_steps:
            traj.u_steps.append(u.copy())
            traj.v_steps.append(v.copy())
        if (cfg.snapshot_every and (k + 1) % cfg.snapshot_every == 0) or k == n - 1:
            traj.snapshots.append((u.copy(), v.copy()))
            traj.snapshot_times.append((k + 1) * dt)
    if not keep_steps and n:
        traj.u_steps.append(u.copy())
        traj.v_steps.append(v.copy())
    E = np.array(E)
    cd = np.cumsum(np.array(diss) * dt)
    cf = np.cumsum(np.array(fric) * dt)
    cw = np.cumsum(np.array(work) * dt)
    slack = E[0] + cw - (E + cd + cf)
    traj.ledger = LerayLedger(traj.times, E, cd, cf, cw, slack)
    traj.max_divergence = np.array(divs)
    return traj


def euler_run(cfg: FluidConfig, keep_steps: bool = True) -> FluidTrajectory:
    """Same discretisation with eps = 0 and lam = 0 (free slip)."""
    cfg0 = replace(cfg, epsilon=0.0, lam=0.0, wall_mode="slip")
    traj = ns_run(cfg0, keep_steps)
    E = traj.ledger.energy
    log.info("euler energy drift %.3e (advection dissipation)", (E[-1] - E[0]) / max(E[0], 1e-300))
    return traj


def energy_drift(traj: FluidTrajectory) -> float:
    E = traj.ledger.energy
    return float(abs(E[-1] - E[0]) / E[0])


# ---------------------------------------------------------------- limit diagnostics

@dataclass
class GronwallReport:
    sigma_u: float
    Q_eps: np.ndarray
    Q_integral: float
    bound: float
    actual: float
    holds: bool


def _l2_diff(ua, va, ub, vb, cfg):
    mu, mv = _projector_masks(cfg)
    return 0.5 * (np.sum((ua - ub)[mu] ** 2) + np.sum((va - vb)[mv] ** 2)) * cfg.dx * cfg.dy


def gradient_sup(u, v, cfg: FluidConfig) -> float:
    """sqrt of the summed squared maxima of the four velocity derivatives."""
    ux, vy, uy, vx = velocity_gradients(u, v, cfg)
    return float(np.sqrt(sum(np.abs(a).max() ** 2 for a in (ux, vy, uy, vx))))


def _q_density(ua, va, ub, vb, cfg: FluidConfig) -> float:
    """eps * int |Sigma(a)||Sigma(b)| / 2 + lam * int_walls |a||b|.

    Diagonal parts pair at cell centres and S12 at nodes; this split never
    exceeds the pointwise product.
    """
    a11, a22, a12 = deformation_tensor((ua, va), cfg)
    b11, b22, b12 = deformation_tensor((ub, vb), cfg)
    cell = 0.5 * np.sum(np.sqrt(a11**2 + a22**2) * np.sqrt(b11**2 + b22**2)) * cfg.dx * cfg.dy
    node = np.sum(np.abs(a12) * np.abs(b12) * _node_weights(cfg))
    q = cfg.epsilon * (cell + node)
    if not cfg.periodic_y and not cfg.dirichlet and cfg.lam:
        sa = wall_slip(ua, cfg)
        sb = wall_slip(ub, replace(cfg, epsilon=0.0, lam=0.0))
        q += cfg.lam * float(np.sum(np.abs(sa) * np.abs(sb))) * cfg.dx
    return float(q)


def gronwall_certificate(ns_traj: FluidTrajectory, euler_traj: FluidTrajectory) -> GronwallReport:
    cfg = ns_traj.config
    ce = euler_traj.config
    if (cfg.nx, cfg.ny, cfg.scenario) != (ce.nx, ce.ny, ce.scenario) or len(ns_traj.u_steps) != len(euler_traj.u_steps):
        raise ValueError("trajectories do not share grid, scenario and step times")
    if not np.allclose(ns_traj.times, euler_traj.times):
        raise ValueError("trajectories do not share step times")
    sigma = max(gradient_sup(u, v, ce) for u, v in zip(euler_traj.u_steps, euler_traj.v_steps))
    Q = np.array([_q_density(ua, va, ub, vb, cfg) for ua, va, ub, vb in
                  zip(ns_traj.u_steps, ns_traj.v_steps, euler_traj.u_steps, euler_traj.v_steps)])
    dt = ns_traj.dt
    Qint = float(np.sum(Q[1:]) * dt)
    T = float(ns_traj.times[-1])
    bound = math.exp(T * sigma) * Qint
    actual = max(_l2_diff(ua, va, ub, vb, cfg) for ua, va, ub, vb in
                 zip(ns_traj.u_steps, ns_traj.v_steps, euler_traj.u_steps, euler_traj.v_steps))
    return GronwallReport(sigma, Q, Qint, bound, actual, bool(actual <= bound * 1.05 + 1e-300))


@dataclass
class KatoReport:
    value: float
    layer_rows: int
    under_resolved: bool


def kato_monitor(ns_traj: FluidTrajectory, epsilon: float | None = None) -> KatoReport:
    """eps int_0^T int_{dist < eps} |grad u|^2 over cell centres inside the wall layer."""
    cfg = ns_traj.config
    eps = cfg.epsilon if epsilon is None else epsilon
    nx, ny = cfg.nx, cfg.ny
    xc = (np.arange(nx) + 0.5) * cfg.dx
    yc = (np.arange(ny) + 0.5) * cfg.dy
    dist = np.full((nx, ny), np.inf)
    if not cfg.periodic_y:
        dist = np.minimum(dist, np.minimum(yc, cfg.length_y - yc)[None, :])
    if not cfg.periodic_x:
        dist = np.minimum(dist, np.minimum(xc, cfg.length_x - xc)[:, None])
    layer = dist < eps
    rows = int(np.sum(yc < eps)) if not cfg.periodic_y else 0
    if not cfg.periodic_x:
        rows = min(rows, int(np.sum(xc < eps))) if rows else int(np.sum(xc < eps))
    total = 0.0
    for u, v in zip(ns_traj.u_steps[1:], ns_traj.v_steps[1:]):
        ux, vy, uy, vx = velocity_gradients(u, v, cfg)
        nodes_u = _node_to_cell(uy**2, cfg)
        nodes_v = _node_to_cell(vx**2, cfg)
        g2 = ux**2 + vy**2 + nodes_u + nodes_v
        total += float(np.sum(g2[layer])) * cfg.dx * cfg.dy
    value = eps * total * ns_traj.dt
    has_walls = not (cfg.periodic_x and cfg.periodic_y)
    return KatoReport(value, rows, bool(has_walls and rows < 2))


def _node_to_cell(a, cfg: FluidConfig):
    """Average of the four surrounding node values at each cell centre."""
    if cfg.periodic_x:
        a = np.concatenate([a, a[:1]], axis=0)
    if cfg.periodic_y:
        a = np.concatenate([a, a[:, :1]], axis=1)
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def steady_shear_reference(cfg: FluidConfig) -> FluidTrajectory:
    """Exact steady Euler shear on the ns grid (u = U(y), v = 0) at every step time."""
    st = initial_state(cfg)
    n, dt = _plan(cfg, st.u, st.v)
    traj = FluidTrajectory(replace(cfg, epsilon=0.0, lam=0.0), dt, np.arange(n + 1) * dt)
    traj.u_steps = [st.u] * (n + 1)
    traj.v_steps = [st.v] * (n + 1)
    return traj
