"""Built-in invariant suite behind the `verify` CLI command.

Each check regenerates its golden inputs from fixed seeds, so a passing run
certifies the installed code end to end without shipping binary data.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import cubes as CB
from . import datasets as D
from . import flatness as F
from . import groups as G
from . import lp
from . import measures as M
from . import planes as P
from . import rectify as R
from .planes import VerticalPlane

__all__ = ["run_suite", "CHECKS"]


def _group_laws(group: str, count=2000, seed=0, tol=1e-12):
    spec = G.builtin_group(group)
    rng = np.random.default_rng(seed)
    a, b, c = (G.random_points(spec, count, rng, 1.0) for _ in range(3))
    assoc = np.abs(G.multiply(spec, G.multiply(spec, a, b), c)
                   - G.multiply(spec, a, G.multiply(spec, b, c))).max()
    ident = np.abs(G.multiply(spec, a, np.zeros(spec.n)) - a).max()
    inv = np.abs(G.multiply(spec, a, G.inverse(spec, a))).max()
    worst = max(assoc, ident, inv)
    return worst <= tol, f"{group}: worst residual {worst:.2e}"


def check_group_laws():
    oks, msgs = [], []
    for g in ("r3", "h1", "h2", "engel"):
        ok, msg = _group_laws(g)
        oks.append(ok)
        msgs.append(msg)
    return all(oks), "; ".join(msgs)


def check_norm_metric():
    msgs = []
    ok = True
    for g in ("h1", "engel"):
        spec = G.builtin_group(g)
        rng = np.random.default_rng(1)
        p = G.random_points(spec, 2000, rng)
        lam = 1.7
        hom = np.abs(G.homogeneous_norm(spec, G.dilate(spec, lam, p))
                     - lam * G.homogeneous_norm(spec, p)).max()
        z = G.random_points(spec, 1, rng)[0]
        q = G.random_points(spec, 2000, rng)
        li = np.abs(G.distance(spec, G.multiply(spec, z, p), G.multiply(spec, z, q))
                    - G.distance(spec, p, q)).max()
        viol = G.triangle_violations(spec, p, q).size
        ok &= hom < 1e-10 and li < 1e-9 and viol == 0
        msgs.append(f"{g}: hom {hom:.1e} leftinv {li:.1e} triangle viol {viol}")
    return ok, "; ".join(msgs)


def check_splitting():
    ok = True
    msgs = []
    for g in ("h1", "h2", "engel"):
        spec = G.builtin_group(g)
        rng = np.random.default_rng(2)
        pts = G.random_points(spec, 2000, rng)
        normals = rng.standard_normal((8, spec.layer_dims[0]))
        worst = 0.0
        worst_h = 0.0
        for nr in normals:
            V = VerticalPlane(nr)
            v, w = P.split_project(spec, V, pts)
            worst = max(worst, np.abs(G.multiply(spec, v, w) - pts).max())
            x, y = pts[:1000], pts[1000:]
            _, wx = P.split_project(spec, V, x)
            _, wy = P.split_project(spec, V, y)
            _, wxy = P.split_project(spec, V, G.multiply(spec, x, y))
            worst_h = max(worst_h, np.abs(wxy - (wx + wy)).max())
        ok &= worst < 1e-12 and worst_h < 1e-12
        msgs.append(f"{g}: recompose {worst:.1e} homomorphism {worst_h:.1e}")
    return ok, "; ".join(msgs)


def check_cone_coupling():
    spec = G.builtin_group("h1")
    rng = np.random.default_rng(3)
    ok = True
    msgs = []
    for alpha in (0.25, 1.0, 4.0):
        lam = P.off_cone_factor(spec, alpha)
        V = VerticalPlane(np.array([1.0, 0.0]))
        found = 0
        bad = 0
        while found < 300:
            x = G.random_points(spec, 500, rng)
            y = G.random_points(spec, 500, rng)
            w = G.multiply(spec, G.inverse(spec, x), y)
            outside = ~P.cone_contains(spec, V, alpha, w)
            sel = np.nonzero(outside)[0]
            found += sel.size
            d = G.distance(spec, x[sel], y[sel])
            horiz = np.linalg.norm(w[sel][:, :2], axis=1)
            bad += int(np.sum(d > lam * horiz * (1 + 1e-9)))
        ok &= bad == 0
        msgs.append(f"alpha={alpha}: {bad} violations")
    return ok, "; ".join(msgs)


def check_beta():
    ok = True
    msgs = []
    for g in ("h1", "h2", "engel"):
        spec = G.builtin_group(g)
        analytic = P.plane_unit_ball_area(spec)
        V = VerticalPlane(np.eye(spec.layer_dims[0])[0])
        mc, se = P.plane_unit_ball_area(spec, V, mc_samples=200_000, seed=5)
        rel = abs(mc - analytic) / analytic
        ok &= rel < 0.01
        msgs.append(f"{g}: analytic {analytic:.4f} mc {mc:.4f} rel {rel:.3%}")
    return ok, "; ".join(msgs)


def check_lp_oracle():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 7))
        pts = rng.standard_normal((n, 2))
        pairs = np.array(list(itertools.combinations(range(n), 2)))
        dists = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        caps = rng.uniform(0.1, 2.0, n)
        c = rng.standard_normal(n)
        prob = lp.LipschitzProblem(n, pairs, dists, caps)
        v_net, _, info = prob.solve_orientation(c)
        _, v_rat = lp.rational_box_lp(c, pairs, dists, caps)
        worst = max(worst, abs(v_net - float(v_rat)), info["gap"])
    return worst <= 1e-9, f"worst deviation/gap {worst:.2e} over 10 instances"


def check_flat_distance():
    spec = G.builtin_group("h1")
    V = VerticalPlane(np.array([1.0, 0.0]))
    h = 1.0 / 16
    pts, wts = P.flat_quadrature(spec, V, np.zeros(3), 2.0, h)
    mu = M.DiscreteMeasure(spec, pts, wts)
    cfg = F.SearchConfig(directions=64, top_planes=2, theta_evals=5, refine_evals=0)
    rep = F.flat_distance(mu, np.zeros(3), 1.0, cfg)
    ok = rep.value <= 8 * h and rep.lp_gap <= 1e-8
    return ok, f"flat data d_flat {rep.value:.4f} <= {8*h:.3f}, gap {rep.lp_gap:.1e}"


def check_cube_axioms():
    mu = D.generate(D.DatasetSpec("plane", count=2500, seed=11))
    led = CB.constants(2.0, mu.spec.Q, "practical", n1=2,
                       overrides={"N": 2, "k": 8.0})
    tree = CB.build_cube_tree(mu, xi=4.0, tau=1 / 8, depth=2, ledger=led)
    rep = CB.verify_cube_axioms(tree)
    ok = rep["all_pass"] and rep["descent"]["ok"]
    return ok, (f"layers {[l['cubes'] for l in rep['layers']]} all_pass "
                f"{rep['all_pass']} descent ratio {rep['descent']['worst_ratio']:.3f}")


def check_graph_extraction():
    spec = G.builtin_group("h1")
    V = VerticalPlane(np.array([1.0, 0.0]))
    mu = D.generate(D.DatasetSpec("intrinsic_graph", count=1200, amplitude=0.3,
                                  aperture=1.0, seed=12))
    g = R.extract_graph(spec, mu.points, V, 2.0, mu.weights)
    full = g.member_indices.size == len(mu)
    viol = R.cone_pair_check(spec, mu.points[g.member_indices], V, 2.0,
                             (1e-12, np.inf))
    return full and not viol, (f"recovered {g.member_indices.size}/{len(mu)}, "
                               f"violations {len(viol)}")


def check_determinism():
    a = D.generate(D.DatasetSpec("noisy_graph", count=800, seed=13))
    b = D.generate(D.DatasetSpec("noisy_graph", count=800, seed=13))
    same = (np.array_equal(a.points, b.points)
            and np.array_equal(a.weights, b.weights))
    return same, "regenerated cloud is bit-identical"


CHECKS = [
    ("group-laws", check_group_laws),
    ("norm-metric", check_norm_metric),
    ("splitting", check_splitting),
    ("cone-coupling", check_cone_coupling),
    ("beta-constant", check_beta),
    ("lp-oracle", check_lp_oracle),
    ("flat-distance", check_flat_distance),
    ("cube-axioms", check_cube_axioms),
    ("graph-extraction", check_graph_extraction),
    ("determinism", check_determinism),
]


def run_suite(echo=print) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"exception: {exc!r}"
        all_ok &= ok
        echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
