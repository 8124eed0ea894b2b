import numpy as np
import pytest

from boltzlim.boundary import (AlphaBeta, accommodation_schedule, apply_boundary, build_kernel, check_properties,
                               diffuse_normalization, extract_alpha_beta, flux_normalizer, mu_measure)
from boltzlim.grid import maxwellian_values

# half-space flux sum_{v1 > 0} v1 g(v1) h * (sum g h)^2 with the 1-D midpoint Gaussian on 16 nodes of [-6, 6]
HALF_FLUX_16 = 0.40879077944709463
NORMALS = [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)]


@pytest.mark.parametrize("normal", NORMALS)
def test_diffuse_normalization(grid16, normal):
    z = diffuse_normalization(grid16, 1.0, normal)
    assert z == pytest.approx(HALF_FLUX_16, rel=1e-13)
    # continuum value is 1 / sqrt(2 pi); the midpoint rule misses the kink at v.n = 0
    assert z == pytest.approx(1 / np.sqrt(2 * np.pi), rel=0.03)
    assert flux_normalizer(grid16, normal) * z == pytest.approx(1.0)


def test_half_flux_converges_under_refinement():
    from boltzlim.grid import build_velocity_grid
    errs = [abs(diffuse_normalization(build_velocity_grid(6.0, n)) - 1 / np.sqrt(2 * np.pi)) for n in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("kind,a", [("diffuse", 1.0), ("maxwell_accommodation", 0.25),
                                    ("maxwell_accommodation", 0.5), ("maxwell_accommodation", 1.0)])
@pytest.mark.parametrize("normal", NORMALS)
def test_properties_pass(grid16, kind, a, normal):
    rep = check_properties(build_kernel(kind, a, 1.0, grid16, normal), grid16)
    assert rep.normalization_defect <= 1e-12
    assert rep.reciprocity_defect <= 1e-10
    assert rep.wall_flux_defect <= 1e-10
    assert all(rep.passes)


def test_specular_properties(grid16):
    rep = check_properties(build_kernel("specular", 0.0, 1.0, grid16), grid16)
    assert rep.passes[0] and rep.passes[2]
    # the mirrored-node permutation is exactly reciprocal on the symmetric grid
    assert rep.reciprocity_defect == 0.0


def test_wall_temperature_mismatch_breaks_iii(grid16):
    K = build_kernel("diffuse", 1.0, 1.5, grid16)
    rep = check_properties(K, grid16)
    assert rep.passes[2]  # checked at theta_w itself
    m = maxwellian_values(1.0, np.zeros(3), 1.0, grid16.nodes[K.out_idx])
    flux = m * K.vn
    assert np.abs(flux - K.matrix @ flux).max() / flux.max() > 1e-2


def test_specular_is_mirror(grid16):
    K = build_kernel("specular", 0.3, 1.0, grid16)
    rng = np.random.default_rng(0)
    out = rng.random(len(K.out_idx))
    assert np.array_equal(apply_boundary(out, K), out)
    assert np.allclose(grid16.nodes[K.in_idx][:, 0], -grid16.nodes[K.out_idx][:, 0])


def test_maxwell_endpoints(grid16):
    d = build_kernel("diffuse", 1.0, 1.0, grid16).matrix
    s = build_kernel("specular", 0.0, 1.0, grid16).matrix
    assert np.abs(build_kernel("maxwell_accommodation", 1.0, 1.0, grid16).matrix - d).max() <= 1e-15
    assert np.abs(build_kernel("maxwell_accommodation", 0.0, 1.0, grid16).matrix - s).max() <= 1e-15


@pytest.mark.parametrize("kind", ["diffuse", "maxwell_accommodation"])
def test_flux_balance(grid16, kind):
    K = build_kernel(kind, 0.4, 1.0, grid16)
    rng = np.random.default_rng(1)
    out = rng.random(len(K.out_idx))
    inc = apply_boundary(out, K)
    assert np.sum(inc * K.vn) == pytest.approx(np.sum(out * K.vn), rel=1e-12)


def test_maxwellian_reflects_to_itself(grid16):
    K = build_kernel("maxwell_accommodation", 0.5, 1.0, grid16)
    m = maxwellian_values(1.0, np.zeros(3), 1.0, grid16.nodes[K.out_idx])
    assert np.abs(apply_boundary(m, K) - m).max() / m.max() <= 1e-10


def test_diffuse_output_is_rank_one(grid16):
    K = build_kernel("diffuse", 1.0, 1.0, grid16)
    out = np.random.default_rng(5).random(len(K.out_idx))
    inc = apply_boundary(out, K)
    m = maxwellian_values(1.0, np.zeros(3), 1.0, grid16.nodes[K.in_idx])
    r = inc / m
    assert np.ptp(r) <= 1e-12 * r.mean()


def test_rejects_bad_inputs(grid16):
    with pytest.raises(ValueError):
        build_kernel("sticky", 1.0, 1.0, grid16)
    with pytest.raises(ValueError):
        build_kernel("maxwell_accommodation", 1.5, 1.0, grid16)
    with pytest.raises(ValueError):
        build_kernel("diffuse", 1.0, -1.0, grid16)
    with pytest.raises(ValueError):
        apply_boundary(-np.ones(len(build_kernel("diffuse", 1, 1, grid16).out_idx)), build_kernel("diffuse", 1, 1, grid16))


def test_alpha_beta(grid16):
    assert extract_alpha_beta(build_kernel("specular", 0, 1, grid16), grid16) == AlphaBeta(0.0, 1.0)
    for a in (0.25, 0.5):
        ab = extract_alpha_beta(build_kernel("maxwell_accommodation", a, 1, grid16), grid16)
        assert ab.alpha <= a + 1e-12
        assert ab.beta >= 1 - 1e-12
    ab = extract_alpha_beta(build_kernel("diffuse", 1, 1, grid16), grid16)
    assert ab.alpha == pytest.approx(1.0, abs=2e-3) and ab.beta == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["diffuse", "maxwell_accommodation"])
def test_mu_is_probability(grid16, kind):
    K = build_kernel(kind, 0.5, 1.0, grid16)
    for v in K.out_idx[::97]:
        idx, w = mu_measure(K, v, grid16)
        assert w.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.all(w >= 0)


def test_mu_specular_point_mass(grid16):
    K = build_kernel("specular", 0, 1, grid16)
    v = K.out_idx[10]
    idx, w = mu_measure(K, v, grid16)
    assert w[10] == 1 and np.count_nonzero(w) == 1


def test_mu_maxwell_mixture(grid16):
    K = build_kernel("maxwell_accommodation", 0.5, 1.0, grid16)
    j = 10
    idx, w = mu_measure(K, K.out_idx[j], grid16)
    m = maxwellian_values(1.0, np.zeros(3), 1.0, grid16.nodes[K.out_idx])
    spread = 0.5 * flux_normalizer(grid16) * m * K.vn * grid16.w
    expect = spread.copy()
    expect[j] += 0.5
    assert np.allclose(w, expect, rtol=1e-12, atol=1e-15)


def test_mu_rejects_incoming(grid16):
    K = build_kernel("diffuse", 1, 1, grid16)
    with pytest.raises(ValueError):
        mu_measure(K, K.in_idx[0], grid16)


def test_schedule():
    assert accommodation_schedule("quadratic", 1.0, 0.2) == pytest.approx(0.04)
    assert accommodation_schedule("linear", 0.5, 0.2) == pytest.approx(0.1)
    assert accommodation_schedule("const", 2.0, 0.2) == 1.0
    with pytest.raises(ValueError):
        accommodation_schedule("cubic", 1, 0.1)
