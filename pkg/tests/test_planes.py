import numpy as np
import pytest

from carnotkit import groups as G
from carnotkit import planes as P
from carnotkit.planes import VerticalPlane


def test_split_example(h1, ex_plane):
    g = np.array([1.0, 2.0, 3.0])
    v, w = P.split_project(h1, ex_plane, g)
    assert np.allclose(v, [0, 2, 4], atol=1e-14)
    assert np.allclose(w, [1, 0, 0], atol=1e-14)
    assert np.allclose(G.multiply(h1, v, w), g, atol=1e-14)


def test_split_plane_point_fixed(h1, ex_plane):
    g = np.array([0.0, 1.7, -0.4])
    v, w = P.split_project(h1, ex_plane, g)
    assert np.allclose(v, g)
    assert np.allclose(w, 0.0)


@pytest.mark.parametrize("name", ["h1", "h2", "engel"])
def test_split_recompose_and_homomorphism(name):
    spec = G.builtin_group(name)
    rng = np.random.default_rng(20)
    pts = G.random_points(spec, 2000, rng)
    for _ in range(4):
        V = VerticalPlane(rng.standard_normal(spec.layer_dims[0]))
        v, w = P.split_project(spec, V, pts)
        assert np.abs(G.multiply(spec, v, w) - pts).max() < 1e-12
        assert np.all(V.contains(spec, v, tol=1e-10))
        x, y = pts[:1000], pts[1000:]
        _, wx = P.split_project(spec, V, x)
        _, wy = P.split_project(spec, V, y)
        _, wxy = P.split_project(spec, V, G.multiply(spec, x, y))
        assert np.abs(wxy - (wx + wy)).max() < 1e-12


def _grid_min_dist(spec, V, g, pitch_h):
    """Independent oracle: minimum distance over a dense balanced lattice on
    the plane within reach 2||g||."""
    reach = 2 * float(G.homogeneous_norm(spec, g)) + 1e-9
    qpts, _ = P.flat_quadrature(spec, V, np.zeros(spec.n), reach,
                                pitch_h, anisotropic=True)
    return float(G.distance(spec, g, qpts).min())


def test_dist_to_plane_examples(h1, ex_plane):
    assert np.isclose(P.dist_to_plane(h1, ex_plane, np.array([1.0, 2, 3])), 1.0)
    assert P.dist_to_plane(h1, ex_plane, np.array([0.0, 5, -2])) == 0.0


def test_dist_to_plane_grid_oracle(h1):
    rng = np.random.default_rng(21)
    pitch = 0.05
    for _ in range(20):
        g = G.random_points(h1, 1, rng)[0]
        V = VerticalPlane(rng.standard_normal(2))
        formula = float(P.dist_to_plane(h1, V, g))
        oracle = _grid_min_dist(h1, V, g, pitch)
        assert formula <= oracle + 1e-12
        assert oracle - formula <= 2.5 * pitch


def test_coset_distance(h1, ex_plane):
    assert np.isclose(
        P.coset_distance(h1, ex_plane, np.zeros(3), np.array([2.0, 5, 7])), 2.0)
    rng = np.random.default_rng(22)
    x = G.random_points(h1, 1, rng)[0]
    v = np.array([0.0, 0.8, -1.3])  # on the plane
    y = G.multiply(h1, x, v)
    assert P.coset_distance(h1, ex_plane, x, y) < 1e-12
    # triangle bound through a third coset
    for _ in range(200):
        u, a, b = (G.random_points(h1, 1, rng)[0] for _ in range(3))
        du_a = P.coset_distance(h1, ex_plane, u, a)
        du_b = P.coset_distance(h1, ex_plane, u, b)
        dab = P.coset_distance(h1, ex_plane, a, b)
        assert du_a <= du_b + dab + 1e-12


def test_cone_examples(h1, ex_plane):
    assert P.cone_contains(h1, ex_plane, 0.01, np.array([0.0, 1, 0]))
    assert not P.cone_contains(h1, ex_plane, 10.0, np.array([1.0, 0, 0]))
    assert P.cone_contains(h1, ex_plane, 1.0, np.array([1.0, 1, 0]))
    # monotone in aperture
    rng = np.random.default_rng(23)
    w = G.random_points(h1, 500, rng)
    small = P.cone_contains(h1, ex_plane, 0.5, w)
    large = P.cone_contains(h1, ex_plane, 2.0, w)
    assert np.all(large[small])


def test_off_cone_factor_values(h1, r3):
    assert P.off_cone_factor(r3, 1.0) == 1.0
    # closed form for the Heisenberg correction supremum is 1/2
    for alpha in (0.5, 1.0, 2.0):
        got = P.off_cone_factor(h1, alpha)
        expect = 1.0 + np.sqrt(1.05 * 0.5 + (1.0 / alpha) ** 2)
        assert abs(got - expect) < 1e-6
    assert P.off_cone_factor(h1, 2.0) <= P.off_cone_factor(h1, 1.0)
    assert P.off_cone_factor(h1, 1.0) <= P.off_cone_factor(h1, 0.25)


@pytest.mark.parametrize("alpha", [0.25, 1.0, 4.0])
def test_off_cone_coupling(h1, ex_plane, alpha):
    lam = P.off_cone_factor(h1, alpha)
    rng = np.random.default_rng(24)
    found = 0
    while found < 500:
        x = G.random_points(h1, 400, rng)
        y = G.random_points(h1, 400, rng)
        w = G.multiply(h1, G.inverse(h1, x), y)
        outside = ~P.cone_contains(h1, ex_plane, alpha, w)
        idx = np.nonzero(outside)[0]
        found += idx.size
        d = G.distance(h1, x[idx], y[idx])
        horiz = np.linalg.norm(w[idx][:, :2], axis=1)
        assert np.all(d <= lam * horiz * (1 + 1e-9))


def test_flat_quadrature_mass(h1, ex_plane):
    masses = {}
    for h in (1 / 8, 1 / 16, 1 / 32):
        pts, wts = P.flat_quadrature(h1, ex_plane, np.zeros(3), 1.0, h)
        masses[h] = wts.sum()
        assert abs(masses[h] - 1.0) <= 2.0 * h
        assert np.all(P.dist_to_plane(h1, ex_plane, pts) < 1e-12)
        assert np.all(G.distance(h1, np.zeros(3), pts) <= 1.0)
    pts2, wts2 = P.flat_quadrature(h1, ex_plane, np.zeros(3), 2.0, 2 / 16)
    ratio = wts2.sum() / masses[1 / 16]
    assert abs(ratio - 2 ** (h1.Q - 1)) < 0.35
    with pytest.raises(ValueError):
        P.flat_quadrature(h1, ex_plane, np.zeros(3), 1.0, 0.3)


def test_quadrature_translation(h1, ex_plane):
    x = np.array([0.3, -0.2, 0.7])
    pts, _ = P.flat_quadrature(h1, ex_plane, x, 1.0, 1 / 16)
    back = G.multiply(h1, G.inverse(h1, x), pts)
    assert np.all(P.dist_to_plane(h1, ex_plane, back) < 1e-12)
    assert np.all(G.distance(h1, x, pts) <= 1.0)


def test_plane_unit_ball_area(h1, h2, engel, ex_plane):
    assert np.isclose(P.plane_unit_ball_area(h1), 4.0)
    r2 = G.builtin_group("r2")
    assert np.isclose(P.plane_unit_ball_area(r2), 2.0)
    for spec in (h1, h2, engel):
        analytic = P.plane_unit_ball_area(spec)
        V = VerticalPlane(np.eye(spec.layer_dims[0])[0])
        mc, se = P.plane_unit_ball_area(spec, V, mc_samples=150_000, seed=3)
        assert abs(mc - analytic) / analytic < 0.01


def test_beta_independent_of_normal(h2):
    analytic = P.plane_unit_ball_area(h2)
    rng = np.random.default_rng(25)
    for _ in range(16):
        V = VerticalPlane(rng.standard_normal(4))
        mc, se = P.plane_unit_ball_area(h2, V, mc_samples=60_000,
                                        seed=int(rng.integers(1 << 30)))
        assert abs(mc - analytic) <= max(3 * se, 0.01 * analytic)


def test_projection_constant_r2():
    r2 = G.builtin_group("r2")
    V = VerticalPlane(np.array([0.0, 1.0]))
    est = P.projection_constant(r2, V, radius=1.0, sample=20_000, seed=4)
    # max-norm unit ball in the plane projects onto a segment of length 2
    assert abs(est["c"] - 2.0) / 2.0 < 0.05
    assert est["c"] >= 0.98


def test_projection_constant_scaling(h1, ex_plane):
    e1 = P.projection_constant(h1, ex_plane, radius=1.0, sample=30_000, seed=5)
    e2 = P.projection_constant(h1, ex_plane, radius=2.0, sample=30_000, seed=5)
    ratio = (e2["c"] * 2.0 ** (h1.Q - 1)) / (e1["c"] * 1.0)
    assert abs(ratio - 2.0 ** (h1.Q - 1)) / 2.0 ** (h1.Q - 1) < 0.05
    assert e1["c"] >= 0.98
    c0 = P.projection_lipschitz_bound(h1, samples=20_000, seed=6)
    c_up = c0 ** (h1.Q - 1)
    assert e1["c"] <= c_up * 1.02


def test_sphere_directions():
    for dim, count in ((2, 64), (3, 128), (4, 64)):
        d = P.sphere_directions(dim, count, seed=1)
        assert d.shape == (count, dim)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
        assert np.array_equal(d, P.sphere_directions(dim, count, seed=1))
