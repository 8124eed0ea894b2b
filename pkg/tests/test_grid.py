import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boltzlim.grid import (MaxwellianParams, SpatialGrid1D, build_velocity_grid, maxwellian, moments,
                           raw_moments)

# erf(6/sqrt(2))**3: continuum mass of the standard Gaussian on [-6, 6]^3
GAUSS_CUBE_MASS = 0.9999999940804741
# 1-D midpoint sum on 16 nodes, cubed (independent of the 3-D code path)
GAUSS_GRID_MASS = 0.9999999972968283
# 1-D midpoint bulk velocity of exp(-(v - 0.1)^2 / 2) on 16 nodes of [-6, 6]
BULK_U_1D = 0.09999999620632558


def test_small_grid_weights():
    g = build_velocity_grid(1.0, 4)
    assert g.size == 64
    assert np.allclose(g.weights, 0.125)


@pytest.mark.parametrize("per_axis", [3, 5, 2])
def test_rejects_bad_per_axis(per_axis):
    with pytest.raises(ValueError):
        build_velocity_grid(6.0, per_axis)


def test_rejects_nonpositive_extent():
    with pytest.raises(ValueError):
        build_velocity_grid(0.0, 8)


@given(st.floats(0.5, 10), st.sampled_from([4, 6, 8, 12]))
@settings(max_examples=20, deadline=None)
def test_node_set_symmetric(extent, n):
    g = build_velocity_grid(extent, n)
    assert np.array_equal(g.nodes[g.negation()], -g.nodes)
    for signs in ((-1, 1, 1), (1, -1, 1), (1, 1, -1)):
        assert np.array_equal(g.nodes[g.index_of(signs)], g.nodes * np.array(signs))


def test_gaussian_mass(grid16):
    M = maxwellian(MaxwellianParams(), grid16)
    mass = M.sum() * grid16.w
    assert 0.999 <= mass <= 1.001
    assert mass == pytest.approx(GAUSS_GRID_MASS, abs=1e-14)
    assert mass == pytest.approx(GAUSS_CUBE_MASS, abs=1e-8)


def test_maxwellian_peak_value(grid16):
    z = np.zeros((1, 3))
    from boltzlim.grid import maxwellian_values
    assert maxwellian_values(1.0, np.zeros(3), 1.0, z)[0] == pytest.approx(0.0634936359342410, rel=1e-13)


def test_maxwellian_linear_in_rho(grid16):
    a = maxwellian(MaxwellianParams(1.0), grid16)
    b = maxwellian(MaxwellianParams(2.0), grid16)
    assert np.array_equal(b, 2 * a)


def test_maxwellian_bulk_velocity(grid16):
    m = moments(maxwellian(MaxwellianParams(1.0, (0.1, 0, 0), 1.0), grid16), grid16)
    assert np.allclose(m.bulk_u, [0.1, 0, 0], atol=1e-6)
    assert m.bulk_u[0] == pytest.approx(BULK_U_1D, abs=1e-13)


def test_maxwellian_rejects_theta(grid16):
    with pytest.raises(ValueError):
        maxwellian(MaxwellianParams(1.0, (0, 0, 0), 0.0), grid16)


def test_moments_of_zero(grid16):
    m = moments(np.zeros(grid16.size), grid16)
    assert m.rho == 0 and not m.defined and m.theta is None


def test_moments_of_maxwellian(grid16):
    m = moments(maxwellian(MaxwellianParams(), grid16), grid16)
    assert m.rho == pytest.approx(1, abs=1e-6)
    assert np.abs(m.momentum).max() < 1e-15
    assert m.theta == pytest.approx(1, abs=1e-6)


def test_moments_linear(grid16):
    rng = np.random.default_rng(3)
    F = rng.random(grid16.size)
    assert np.allclose(raw_moments(3 * F, grid16), 3 * raw_moments(F, grid16), rtol=1e-14)


def test_spatial_grid():
    s = SpatialGrid1D(8, 2.0)
    assert s.dx == 0.25
    assert np.allclose(s.centers, 0.125 + 0.25 * np.arange(8))
    assert s.faces[0] == 0 and s.faces[-1] == 2.0
