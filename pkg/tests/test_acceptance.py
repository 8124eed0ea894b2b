"""Acceptance criteria 1-10, one PASS/FAIL line each (shown in the terminal summary)."""
import time

import numpy as np
import pytest

from boltzlim import harness
from boltzlim.boundary import build_kernel, check_properties
from boltzlim.collision import (angular_quadrature, collide_bgk, collide_hard_sphere, entropy_dissipation)
from boltzlim.config import apply_overrides, defaults
from boltzlim.entropy import H_HALF, boundary_bound, relative_entropy
from boltzlim.fluid import FluidConfig, euler_run, kato_monitor, ns_run
from boltzlim.grid import SpatialGrid1D, build_velocity_grid, maxwellian_values

MAXWELL_EPS2 = ["kinetic.wall_kind=maxwell_accommodation", "kinetic.schedule=quadratic", "kinetic.accommodation=1"]


@pytest.fixture(scope="module")
def diffuse_run():
    t0 = time.perf_counter()
    res = harness.kinetic_run(defaults())
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def maxwell_run():
    return harness.kinetic_run(apply_overrides(defaults(), MAXWELL_EPS2))


@pytest.fixture(scope="module")
def specular_run():
    return harness.kinetic_run(apply_overrides(defaults(), ["kinetic.wall_kind=specular"]))


@pytest.fixture(scope="module")
def kinetic_sweep():
    t0 = time.perf_counter()
    tab = harness.sweep_kinetic(apply_overrides(defaults(), MAXWELL_EPS2))
    return tab, time.perf_counter() - t0


@pytest.fixture(scope="module")
def fluid_sweep():
    cfg = apply_overrides(defaults(), [
        "fluid.scenario=channel_shear", "fluid.nx=128", "fluid.ny=64", "fluid.profile=cos", "fluid.t_end=1",
        "sweep.lam_schedule=linear", "sweep.lam_coeff=1", "sweep.eps_list=1e-2 1e-3 1e-4",
        "sweep.pair_refinement=true",
    ])
    t0 = time.perf_counter()
    tab = harness.sweep_fluid(cfg)
    return tab, time.perf_counter() - t0


@pytest.fixture(scope="module")
def kato_sweep():
    cfg = apply_overrides(defaults(), [
        "fluid.scenario=channel_shear", "fluid.nx=8", "fluid.ny=2560", "fluid.profile=sin", "fluid.t_end=1",
        "sweep.lam_schedule=zero", "sweep.eps_list=1e-2 1e-3",
    ])
    return harness.sweep_fluid(cfg)


@pytest.fixture(scope="module")
def cavity():
    cfg = FluidConfig(scenario="lid_cavity", nx=96, ny=96, epsilon=2e-2, t_end=1.0)
    return ns_run(cfg), euler_run(cfg)


# ---------------------------------------------------------------- kinetic side

def test_c1_kernel_properties(verdict):
    t0 = time.perf_counter()
    grid = build_velocity_grid(6.0, 16)
    worst = np.zeros(3)
    ok = True
    cases = [("diffuse", 1.0)] + [("maxwell_accommodation", a) for a in (0.25, 0.5, 1.0)]
    for kind, a in cases:
        for n in ((1.0, 0, 0), (-1.0, 0, 0)):
            rep = check_properties(build_kernel(kind, a, 1.0, grid, n), grid)
            d = np.array([rep.normalization_defect, rep.reciprocity_defect, rep.wall_flux_defect])
            worst = np.maximum(worst, d)
            ok &= d[0] <= 1e-12 and d[1] <= 1e-10 and d[2] <= 1e-10
    spec = check_properties(build_kernel("specular", grid=grid), grid)
    ok &= spec.normalization_defect <= 1e-12 and spec.wall_flux_defect <= 1e-10
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 5
    verdict("1", ok, f"max defects (i) {worst[0]:.2e} (ii) {worst[1]:.2e} (iii) {worst[2]:.2e}; "
                     f"specular (i) {spec.normalization_defect:.2e} (iii) {spec.wall_flux_defect:.2e}; "
                     f"{elapsed:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the grid specular kernel satisfies discrete reciprocity exactly; "
                                       "see the decisions ledger")
def test_c1_specular_flagged_on_reciprocity(verdict):
    grid = build_velocity_grid(6.0, 16)
    rep = check_properties(build_kernel("specular", grid=grid), grid)
    flagged = not rep.passes[1]
    verdict("1 (specular flagged on (ii))", flagged, f"reciprocity defect {rep.reciprocity_defect:.2e}")
    assert flagged


def test_c2_collision_invariants(verdict):
    t0 = time.perf_counter()
    grid = build_velocity_grid(6.0, 12)
    rng = np.random.default_rng(20240)
    angles = angular_quadrature(4, 4)
    res_max, diss_max = 0.0, -np.inf
    for _ in range(200):
        M = maxwellian_values(1.0, rng.normal(0, 0.3, 3), rng.uniform(0.8, 1.2), grid.nodes)
        F = M * (1 + 0.3 * rng.uniform(-1, 1, grid.size))
        for Q in (collide_hard_sphere(F, grid, angles), collide_bgk(F, grid)):
            res_max = max(res_max, float(np.abs(Q.invariant_residuals).max()))
            diss_max = max(diss_max, entropy_dissipation(F, Q, grid).value)
    M0 = maxwellian_values(1.0, np.zeros(3), 1.0, grid.nodes)
    bmm = [float(np.abs(collide_hard_sphere(M0, grid, angular_quadrature(n, n)).values).max()) for n in (4, 8, 16)]
    elapsed = time.perf_counter() - t0
    ok = res_max <= 1e-13 and diss_max <= 1e-12 and bmm[0] > bmm[1] > bmm[2] and elapsed < 300
    verdict("2", ok, f"residual {res_max:.2e}, max dissipation {diss_max:.2e}, "
                     f"|B(M,M)| {bmm[0]:.3e} > {bmm[1]:.3e} > {bmm[2]:.3e}; {elapsed:.0f}s")
    assert ok


def test_c3_relative_h_theorem(verdict, diffuse_run):
    res, elapsed = diffuse_run
    L = res.ledger_zero
    rel = float((L.slack / L.relent_init).min())
    ok = bool(rel >= -1e-3 and np.all(L.relent + L.production + L.dg <= L.relent_init - L.slack.clip(max=0))
              and elapsed < 120)
    verdict("3", ok, f"min slack / relent_init {rel:.3e} over {len(L.times)} steps; {elapsed:.0f}s")
    assert ok


def test_c4_dg_nonnegative(verdict, diffuse_run, maxwell_run, specular_run, kinetic_sweep):
    mins = [float(diffuse_run[0].trajectory.dg.min()), float(maxwell_run.trajectory.dg.min()),
            min(kinetic_sweep[0].column("dg_min"))]
    spec = specular_run.trajectory.dg
    ok = min(mins) >= -1e-12 and bool(np.all(spec == 0))
    verdict("4", ok, f"min DG {min(mins):.3e}; specular max |DG| {np.abs(spec).max():.1e}")
    assert ok


def test_c5_boundary_bound(verdict, maxwell_run):
    tr = maxwell_run.trajectory
    w = harness.comparison_field(apply_overrides(defaults(), MAXWELL_EPS2))
    reps = [boundary_bound(tr, w, N, eta=0.5) for N in (1, 2, 4)]
    ok = all(r.holds and r.outflow.holds and r.young.holds for r in reps)
    ok &= abs(reps[0].outflow.h_eta - 0.1081977) <= 5e-8 and reps[0].outflow.h_eta == H_HALF
    detail = "; ".join(f"N={r.N} lhs {r.lhs:.3e} <= rhs {r.rhs:.3e}" for r in reps)
    verdict("5", ok, f"{detail}; h(1/2) = {reps[0].outflow.h_eta:.7f}")
    assert ok


def test_c6_kinetic_euler_trend(verdict, kinetic_sweep):
    tab, elapsed = kinetic_sweep
    bulk, relent = tab.column("bulk_l1"), tab.column("scaled_relent")
    ok = (tab.verdicts["bulk_l1 strictly decreasing"] and tab.verdicts["scaled_relent strictly decreasing"]
          and elapsed < 1800)
    verdict("6", ok, "bulk " + " > ".join(f"{b:.4f}" for b in bulk) + "; relent "
            + " > ".join(f"{r:.4f}" for r in relent) + f"; {elapsed:.0f}s")
    assert ok


def test_c10_gaussian_relative_entropy_limit(verdict):
    grid = build_velocity_grid(6.0, 16)
    space = SpatialGrid1D(8, 1.0)
    errs = []
    for eps in (0.2, 0.1, 0.05):
        M1 = maxwellian_values(1.0, np.zeros(3), 1.0, grid.nodes)
        M2 = maxwellian_values(1.0, np.array([0.0, 0.3 * eps, 0.0]), 1.0, grid.nodes)
        val = relative_entropy(np.tile(M2, (8, 1)), np.tile(M1, (8, 1)), grid, space) / eps**2
        errs.append(abs(val - 0.045) / 0.045)
    ok = errs[0] > errs[1] > errs[2] and errs[2] <= 0.02
    verdict("10", ok, "relative errors " + " > ".join(f"{e:.4e}" for e in errs))
    assert ok


# ---------------------------------------------------------------- fluid side

def test_c7_inviscid_limit(verdict, fluid_sweep):
    tab, elapsed = fluid_sweep
    main = [r for r in tab.rows if r[2] == "main"]
    err = [r[3] for r in main]
    ratios = [float(q) for q in tab.meta["q_ratios"].split()]
    ok = (tab.verdicts["sup_l2_error strictly decreasing"] and tab.verdicts["gronwall holds on every row"]
          and all(1.2 <= q <= 2.2 for q in ratios) and elapsed < 1200)
    verdict("7", ok, "sup L2 " + " > ".join(f"{e:.3e}" for e in err) + "; Q ratios "
            + ", ".join(f"{q:.3f}" for q in ratios) + f"; {elapsed:.0f}s")
    assert ok


def test_c8_leray_ledger(verdict, fluid_sweep, kato_sweep, cavity):
    slacks = list(fluid_sweep[0].column("leray_min_relative_slack")) + list(kato_sweep.column("leray_min_relative_slack"))
    slacks.append(float(cavity[0].ledger.relative_slack.min()))
    ok = min(slacks) >= -1e-6
    verdict("8", ok, f"min relative slack {min(slacks):.3e} over {len(slacks)} runs")
    assert ok


def test_c9_kato_monitor(verdict, kato_sweep, cavity):
    k = kato_sweep.column("kato")
    under = kato_sweep.column("kato_under_resolved")
    ns, eu = cavity
    kc = kato_monitor(ns)
    gap = max(np.sqrt(np.sum((a - b) ** 2) * ns.config.dx * ns.config.dy)
              for a, b in zip(ns.u_steps, eu.u_steps))
    ok = k[0] > k[1] and not any(under) and kato_sweep.verdicts["kato strictly decreasing"]
    verdict("9", ok, f"kato {k[0]:.3e} > {k[1]:.3e}; cavity (info) kato {kc.value:.3e}, "
                     f"sup ||u_eps - u|| {gap:.3e}")
    assert ok
