import math

import numpy as np
import pytest

from boltzlim.fluid import (FluidConfig, deformation_tensor, divergence, energy_drift, euler_run,
                            gronwall_certificate, initial_state, kato_monitor, kinetic_energy, ns_run,
                            steady_shear_reference, velocity_gradients)

TWO_PI = 2 * math.pi


def channel(**kw):
    base = dict(scenario="channel_shear", nx=16, ny=32, epsilon=1e-2, t_end=0.2)
    base.update(kw)
    return FluidConfig(**base)


def taylor_green(n, **kw):
    return FluidConfig(scenario="periodic_box", nx=n, ny=n, epsilon=0.0, t_end=1.0,
                       length_x=TWO_PI, length_y=TWO_PI, **kw)


def max_vorticity(u, v, cfg):
    ux, vy, uy, vx = velocity_gradients(u, v, cfg)
    return np.abs(vx - uy).max()


def test_config_errors():
    with pytest.raises(ValueError, match="scenario"):
        FluidConfig(scenario="pipe")
    with pytest.raises(ValueError, match="cfl"):
        FluidConfig(cfl=0.8)
    with pytest.raises(ValueError):
        FluidConfig(epsilon=-1.0)


def test_cfl_violation_raises():
    cfg = channel(dt=0.1, t_end=0.2)
    with pytest.raises(ValueError, match="CFL violated"):
        ns_run(cfg)


def test_deformation_rigid_translation():
    cfg = channel(profile="uniform")
    st = initial_state(cfg)
    u = np.full_like(st.u, 0.7)
    v = np.zeros_like(st.v)
    for S in deformation_tensor((u, v), cfg):
        assert np.all(S == 0)


def test_deformation_linear_shear():
    cfg = FluidConfig(scenario="channel_shear", nx=8, ny=16, epsilon=0.0, profile="linear", amplitude=2.0)
    S11, S22, S12 = deformation_tensor(initial_state(cfg), cfg)
    assert np.abs(S11).max() <= 1e-13 and np.abs(S22).max() <= 1e-13
    # interior nodes; full slip makes the wall rows ghost-symmetric
    assert np.allclose(S12[:, 1:-1], 2.0, atol=1e-12)


def test_deformation_trace_is_divergence():
    cfg = taylor_green(32, advection="upwind")
    st = initial_state(cfg)
    S11, S22, _ = deformation_tensor(st, cfg)
    assert np.abs(S11 + S22).max() <= 2e-10
    assert np.allclose(S11 + S22, 2 * divergence(st.u, st.v, cfg), atol=1e-14)


def test_linear_shear_steady():
    # eps du/dy = 0 at a full-slip wall only admits the linear shear when eps = 0
    cfg = channel(profile="linear", lam=0.0, epsilon=0.0)
    tr = ns_run(cfg)
    u0 = tr.u_steps[0]
    for u, v in zip(tr.u_steps, tr.v_steps):
        assert np.abs(u - u0).max() <= 1e-10 and np.abs(v).max() <= 1e-10


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(lam=0.5), dict(wall_mode="dirichlet"),
                                dict(advection="muscl", lam=0.1)])
def test_energy_nonincreasing(kw):
    tr = ns_run(channel(**kw))
    E = tr.ledger.energy
    assert np.all(np.diff(E) <= 1e-14 * E[0])
    assert tr.ledger.holds
    assert tr.max_divergence.max() <= 1e-10


def test_cavity_divergence_and_ledger():
    cfg = FluidConfig(scenario="lid_cavity", nx=24, ny=24, epsilon=1e-2, t_end=0.2)
    tr = ns_run(cfg)
    assert tr.max_divergence.max() <= 1e-10
    assert tr.ledger.holds
    assert tr.ledger.work[-1] > 0


def test_euler_drift_muscl_64():
    tr = euler_run(taylor_green(64, advection="muscl"), keep_steps=False)
    assert energy_drift(tr) <= 0.01


def test_euler_drift_converges_first_order():
    up = [energy_drift(euler_run(taylor_green(n), keep_steps=False)) for n in (16, 32, 64)]
    assert up[0] > up[1] > up[2]
    assert up[0] / up[1] >= 1.6 and up[1] / up[2] >= 1.6


def test_taylor_green_vorticity_decay_refines():
    decay = []
    for n in (16, 32, 64):
        cfg = taylor_green(n)
        tr = euler_run(cfg, keep_steps=False)
        decay.append(1 - max_vorticity(*tr.snapshots[-1], cfg) / max_vorticity(*tr.snapshots[0], cfg))
    assert decay[0] > decay[1] > decay[2] > 0
    assert decay[0] / decay[1] >= 1.8 and decay[1] / decay[2] >= 1.8


def test_gronwall_self_comparison():
    cfg = channel(epsilon=1e-2, lam=1e-2)
    tr = ns_run(cfg)
    rep = gronwall_certificate(tr, tr)
    assert rep.actual == 0 and rep.holds


def test_gronwall_channel_small_eps():
    cfg = channel(nx=32, ny=64, epsilon=1e-3, lam=1e-3, t_end=0.5, profile="sin")
    rep = gronwall_certificate(ns_run(cfg), euler_run(cfg))
    assert rep.holds and rep.actual > 0


def test_gronwall_rejects_mismatch():
    a = ns_run(channel())
    b = euler_run(channel(nx=8))
    with pytest.raises(ValueError):
        gronwall_certificate(a, b)


def test_steady_reference_matches_euler_shear():
    cfg = channel(profile="linear", epsilon=0.0)
    ref = steady_shear_reference(cfg)
    eu = euler_run(cfg)
    assert max(np.abs(a - b).max() for a, b in zip(ref.u_steps, eu.u_steps)) <= 1e-12


def test_kato_uniform_flow_zero():
    tr = ns_run(channel(profile="uniform"))
    assert kato_monitor(tr).value == 0


def test_kato_flags_thin_layer():
    rep = kato_monitor(ns_run(channel(epsilon=1e-3)))
    assert rep.under_resolved and rep.layer_rows == 0


def test_large_lambda_approaches_dirichlet():
    d = ns_run(channel(wall_mode="dirichlet"))
    gaps = []
    for lam in (1e1, 1e2, 1e3):
        s = ns_run(channel(lam=lam))
        gaps.append(max(np.abs(a - b).max() for a, b in zip(s.u_steps, d.u_steps)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-3


def test_kinetic_energy_taylor_green():
    cfg = taylor_green(32)
    st = initial_state(cfg)
    # u = sin x cos y, v = -cos x sin y on [0, 2 pi]^2: E = pi^2 up to grid sampling
    assert kinetic_energy(st.u, st.v, cfg) == pytest.approx(math.pi**2, rel=2e-2)
