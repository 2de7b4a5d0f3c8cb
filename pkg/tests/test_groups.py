import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotkit import bch
from carnotkit import groups as G


def test_h1_product_example(h1):
    out = G.multiply(h1, np.array([1.0, 0, 0]), np.array([0.0, 1, 0]))
    assert np.allclose(out, [1, 1, 0.5], atol=1e-15)


def test_closed_form_matches_dynkin_oracle(h1):
    C = np.zeros((3, 3, 3))
    C[0, 1, 2], C[1, 0, 2] = 1.0, -1.0
    rng = np.random.default_rng(0)
    p = G.random_points(h1, 200, rng)
    q = G.random_points(h1, 200, rng)
    fast = G.multiply(h1, p, q)
    oracle = bch.bch_product(C, 2, p, q)
    assert np.abs(fast - oracle).max() < 1e-12


def test_engel_closed_form_against_general_path(engel):
    # independent closed form of the degree-3 expansion
    rng = np.random.default_rng(1)
    p = G.random_points(engel, 100, rng)
    q = G.random_points(engel, 100, rng)
    z = G.multiply(engel, p, q)
    x1, x2, x3 = p[:, 0], p[:, 1], p[:, 2]
    y1, y2, y3 = q[:, 0], q[:, 1], q[:, 2]
    area = x1 * y2 - x2 * y1
    expect = np.stack([
        p[:, 0] + q[:, 0],
        p[:, 1] + q[:, 1],
        x3 + y3 + 0.5 * area,
        p[:, 3] + q[:, 3] + 0.5 * (x1 * y3 - x3 * y1) + (x1 - y1) * area / 12.0,
    ], axis=1)
    assert np.abs(z - expect).max() < 1e-12


def test_associativity_example(h1):
    a, b, c = np.array([1.0, 2, 3]), np.array([4.0, 5, 6]), np.array([7.0, 8, 9])
    lhs = G.multiply(h1, G.multiply(h1, a, b), c)
    rhs = G.multiply(h1, a, G.multiply(h1, b, c))
    assert np.abs(lhs - rhs).max() < 1e-12


@pytest.mark.parametrize("name", ["r3", "h1", "h2", "engel"])
def test_group_laws_random(name):
    spec = G.builtin_group(name)
    rng = np.random.default_rng(7)
    a, b, c = (G.random_points(spec, 2000, rng) for _ in range(3))
    assoc = np.abs(G.multiply(spec, G.multiply(spec, a, b), c)
                   - G.multiply(spec, a, G.multiply(spec, b, c))).max()
    ident = np.abs(G.multiply(spec, a, np.zeros(spec.n)) - a).max()
    inv = np.abs(G.multiply(spec, a, G.inverse(spec, a))).max()
    assert max(assoc, ident, inv) < 1e-12


def test_inverse_examples(h1):
    assert np.allclose(G.inverse(h1, np.array([1.0, 2, 3])), [-1, -2, -3])
    assert np.allclose(G.inverse(h1, np.zeros(3)), np.zeros(3))


def test_dilate_examples(h1):
    assert np.allclose(G.dilate(h1, 3.0, np.array([1.0, 1, 1])), [3, 3, 9])
    p = np.array([0.3, -0.7, 1.9])
    assert np.allclose(G.dilate(h1, 1.0, p), p)
    with pytest.raises(G.GroupError):
        G.dilate(h1, -1.0, p)


def test_dilation_is_automorphism(h1, engel):
    rng = np.random.default_rng(2)
    for spec in (h1, engel):
        p = G.random_points(spec, 500, rng)
        q = G.random_points(spec, 500, rng)
        lam = 1.37
        lhs = G.dilate(spec, lam, G.multiply(spec, p, q))
        rhs = G.multiply(spec, G.dilate(spec, lam, p), G.dilate(spec, lam, q))
        assert np.abs(lhs - rhs).max() < 1e-12


def test_norm_examples(h1):
    assert np.isclose(G.homogeneous_norm(h1, np.array([0.0, 0, 4])), 2.0)
    assert G.homogeneous_norm(h1, np.zeros(3)) == 0.0
    rng = np.random.default_rng(3)
    p = G.random_points(h1, 300, rng)
    assert np.allclose(G.homogeneous_norm(h1, G.dilate(h1, 2.0, p)),
                       2 * G.homogeneous_norm(h1, p), rtol=1e-12)


def test_distance_examples(h1):
    assert np.isclose(G.distance(h1, np.array([1.0, 0, 0]), np.array([1.0, 0, 4])), 2.0)
    p = np.array([0.4, 0.5, -0.2])
    assert G.distance(h1, p, p) == 0.0
    rng = np.random.default_rng(4)
    z = G.random_points(h1, 1, rng)[0]
    a = G.random_points(h1, 500, rng)
    b = G.random_points(h1, 500, rng)
    shifted = G.distance(h1, G.multiply(h1, z, a), G.multiply(h1, z, b))
    assert np.abs(shifted - G.distance(h1, a, b)).max() < 1e-11


def test_product_correction_properties(h1, engel):
    # homogeneity and antisymmetry of the product correction terms
    rng = np.random.default_rng(5)
    for spec in (h1, engel):
        p = G.random_points(spec, 400, rng)
        q = G.random_points(spec, 400, rng)
        corr = G.multiply(spec, p, q) - p - q
        assert np.abs(corr[:, : spec.layer_dims[0]]).max() < 1e-14
        lam = 1.83
        corr_l = (G.multiply(spec, G.dilate(spec, lam, p), G.dilate(spec, lam, q))
                  - G.dilate(spec, lam, p) - G.dilate(spec, lam, q))
        anti = (G.multiply(spec, -q, -p) + p + q)
        for i in range(2, spec.step + 1):
            sl = spec.layer_slice(i)
            assert np.abs(corr_l[:, sl] - lam ** i * corr[:, sl]).max() < 1e-10
            assert np.abs(corr[:, sl] + anti[:, sl]).max() < 1e-12


def test_calibrate_norm_eps():
    assert G.calibrate_norm_eps(G.builtin_group("r2"), 1000, 0) == (1.0,)
    for name in ("h1", "engel"):
        spec = G.builtin_group(name)
        eps = G.calibrate_norm_eps(spec, 100_000, seed=9)
        spec2 = spec.with_norm_eps(eps)
        rng = np.random.default_rng(10)
        u = G.random_points(spec2, 100_000, rng)
        v = G.random_points(spec2, 100_000, rng)
        assert G.triangle_violations(spec2, u, v).size == 0


def test_box_containment(h1, engel):
    # points of B(0, r) stay inside the coordinate box of the norm
    rng = np.random.default_rng(11)
    for spec in (h1, engel):
        p = G.random_points(spec, 4000, rng, 0.8)
        r = G.homogeneous_norm(spec, p) + 1e-12
        for i in range(1, spec.step + 1):
            sl = spec.layer_slice(i)
            layer = np.linalg.norm(p[:, sl], axis=1)
            assert np.all(layer <= (r / spec.norm_eps[i - 1]) ** i * (1 + 1e-9))


def test_config_errors():
    with pytest.raises(G.GroupError):
        G.group_from_config({"step": 2, "layer_dims": [2], "bch": "abelian"})
    with pytest.raises(G.GroupError):
        G.group_from_config({"step": 1, "layer_dims": [2], "bch": {"kind": "weird"}})
    with pytest.raises(G.GroupError):
        G.group_from_config({"step": 2, "layer_dims": [2, 1],
                             "bch": {"kind": "step2"}})  # missing structure
    spec = G.builtin_group("h1")
    with pytest.raises(G.GroupError):
        G.multiply(spec, np.zeros(4), np.zeros(3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_h1_laws_hypothesis(vals):
    spec = G.builtin_group("h1")
    a, b, c = (np.array(vals[i:i + 3]) for i in (0, 3, 6))
    lhs = G.multiply(spec, G.multiply(spec, a, b), c)
    rhs = G.multiply(spec, a, G.multiply(spec, b, c))
    assert np.abs(lhs - rhs).max() < 1e-9
    assert np.abs(G.multiply(spec, a, G.inverse(spec, a))).max() < 1e-9
