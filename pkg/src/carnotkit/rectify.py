"""Geometric pipelines: weak linear approximability, projection mass,
cone compatibility, and intrinsic Lipschitz graph extraction.

A set is graph-like over a plane W with aperture alpha when all pairwise
group differences stay inside the cone of axis W; the extractor greedily
harvests a maximal cone-compatible subset and certifies that its projection
to W is injective, which makes the subset the graph of a function from W to
the normal line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import groups as G
from . import measures as M
from . import planes as P
from .groups import GroupSpec
from .measures import DiscreteMeasure
from .planes import VerticalPlane

__all__ = [
    "weak_linear_check",
    "projection_mass",
    "cone_pair_check",
    "GraphExtract",
    "extract_graph",
    "graph_cover",
]


def weak_linear_check(mu: DiscreteMeasure, e_indices: np.ndarray, x: np.ndarray,
                      rho: float, V: VerticalPlane, lattice_pitch: float) -> dict:
    """Squeeze and hole ratios of E inside B(x, rho) against the coset xV.

    squeeze: sup over members of dist(., xV) / rho (0 iff all on the coset);
    hole: sup over a lattice of B(x, rho/2) on the coset of dist(., E) / rho.
    """
    spec = mu.spec
    x = spec.conform(x)
    e_indices = np.asarray(e_indices, dtype=int)
    d = G.distance(spec, x, mu.points[e_indices])
    members = e_indices[d < rho]
    if members.size == 0:
        return {"squeeze": np.nan, "hole": np.nan, "members": 0, "empty": True}
    squeeze = float(np.max(P.coset_distance(spec, V, x, mu.points[members])) / rho)
    qpts, _ = P.flat_quadrature(spec, V, x, rho / 2, lattice_pitch)
    if qpts.shape[0] == 0:
        hole = np.nan
    else:
        idx = M.MetricIndex(spec, mu.points[members])
        dmin, _ = idx.nearest(qpts, k=1)
        hole = float(dmin[:, 0].max() / rho)
    return {"squeeze": min(squeeze, 1.0), "hole": min(hole, 1.0),
            "members": int(members.size), "empty": False}


def projection_mass(spec: GroupSpec, pts: np.ndarray, W: VerticalPlane,
                    x: np.ndarray, r: float, pitch: float) -> dict:
    """Occupancy-grid estimate of the surface measure of the splitting-
    projection shadow of pts (restricted to B(x, r)) on W.

    Shadows are measured in the plane's coordinates, weighted by the
    unit-ball slice area; a half-pitch refinement is reported so callers can
    judge convergence.
    """
    if pitch > r / 16:
        raise ValueError("grid pitch must be at most r/16")
    pts = np.atleast_2d(spec.conform(pts))
    x = spec.conform(x)
    keep = G.distance(spec, x, pts) < r
    pts = pts[keep]
    if pts.shape[0] == 0:
        return {"mass": 0.0, "mass_refined": 0.0, "pitch": pitch, "points": 0}
    v, _ = P.split_project(spec, W, pts)
    coords = P.plane_coords(spec, W, v)
    beta = P.plane_unit_ball_area(spec)

    def occupancy(h: float) -> float:
        cells = np.unique(np.floor(coords / h).astype(np.int64), axis=0)
        return cells.shape[0] * h ** coords.shape[1] / beta

    return {"mass": occupancy(pitch), "mass_refined": occupancy(pitch / 2),
            "pitch": pitch, "points": int(pts.shape[0])}


def _pair_in_cone(spec: GroupSpec, W: VerticalPlane, alpha: float,
                  z: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = G.multiply(spec, G.inverse(spec, z), y)
    return P.cone_contains(spec, W, alpha, diff)


def cone_pair_check(spec: GroupSpec, pts: np.ndarray, W: VerticalPlane,
                    alpha: float, band: tuple[float, float],
                    block: int = 512) -> list[tuple[int, int, float]]:
    """Ordered pairs (z, y) with d(z, y) in the band whose difference leaves
    the cone; empty means the set is cone-compatible at this aperture."""
    pts = np.atleast_2d(spec.conform(pts))
    lo, hi = band
    n = pts.shape[0]
    violations: list[tuple[int, int, float]] = []
    for start in range(0, n, block):
        zi = np.arange(start, min(start + block, n))
        d = G.distance(spec, pts[zi][:, None, :], pts[None, :, :])
        sel = (d >= lo) & (d <= hi)
        rows, cols = np.nonzero(sel)
        if rows.size == 0:
            continue
        ok = _pair_in_cone(spec, W, alpha, pts[zi[rows]], pts[cols])
        for rr, cc, good in zip(rows, cols, ok):
            if not good:
                violations.append((int(zi[rr]), int(cc), float(d[rr, cc])))
    return violations


@dataclass
class GraphExtract:
    """A cone-compatible subset together with its graph function table."""

    normal: np.ndarray
    alpha: float
    member_indices: np.ndarray
    plane_part: np.ndarray       # splitting projection of members onto W
    normal_offsets: np.ndarray   # signed normal components of members
    rejected: list = field(default_factory=list)  # (index, blocking member)
    injectivity_margin: float = np.inf
    covered_mass: float = 0.0

    def as_dict(self) -> dict:
        return {
            "normal": self.normal.tolist(),
            "alpha": self.alpha,
            "members": self.member_indices.tolist(),
            "plane_part": self.plane_part.tolist(),
            "normal_offsets": self.normal_offsets.tolist(),
            "rejected": [[int(a), int(b)] for a, b in self.rejected],
            "injectivity_margin": self.injectivity_margin,
            "covered_mass": self.covered_mass,
        }


def extract_graph(spec: GroupSpec, pts: np.ndarray, W: VerticalPlane,
                  alpha: float, weights: np.ndarray | None = None,
                  indices: np.ndarray | None = None) -> GraphExtract:
    """Greedy maximal subset whose pairwise differences stay inside the
    aperture-alpha cone with axis W, both orientations.

    Greedy order (part of the contract): the seed is the point whose near
    neighborhood is most cone-compatible (a pure density seed lands on
    degenerate slivers when components cross), ties by ascending id;
    candidates then follow by distance from the seed, ties by id, so the
    extraction grows as a connected frontier and foreign components meet an
    established home neighborhood.  Each acceptance is checked against every
    current member, so the output passes cone_pair_check exactly; projection
    injectivity onto W is certified by the minimal pairwise distance of the
    plane parts.
    """
    pts = np.atleast_2d(spec.conform(pts))
    n = pts.shape[0]
    if indices is None:
        indices = np.arange(n)
    if weights is None:
        weights = np.ones(n)
    if n == 0:
        return GraphExtract(np.array(W.normal), alpha, np.empty(0, int),
                            np.empty((0, spec.n)), np.empty(0))
    if n == 1:
        v, w = P.split_project(spec, W, pts)
        return GraphExtract(np.array(W.normal), alpha, indices.copy(), v,
                            pts[:, : spec.layer_dims[0]] @ W.normal,
                            covered_mass=float(weights.sum()))
    idx = M.MetricIndex(spec, pts)
    kk = min(24, n - 1)
    dk, ik = idx.nearest(pts, k=kk, exclude_self=True)
    compat = np.zeros(n)
    for col in range(kk):
        nb = ik[:, col]
        valid = nb >= 0
        fwd = _pair_in_cone(spec, W, alpha, pts[valid], pts[nb[valid]])
        bwd = _pair_in_cone(spec, W, alpha, pts[nb[valid]], pts[valid])
        compat[valid] += (fwd & bwd)
    seed = int(np.lexsort((np.arange(n), dk[:, -1], -compat))[0])

    members: list[int] = [seed]
    member_pts = pts[seed][None, :]
    rejected: list[tuple[int, int]] = []
    d_seed = G.distance(spec, pts[seed], pts)
    order = np.lexsort((np.arange(n), d_seed))
    for c in order:
        if c == seed:
            continue
        diff_fwd = G.multiply(spec, G.inverse(spec, member_pts), pts[c])
        diff_bwd = G.multiply(spec, G.inverse(spec, pts[c]), member_pts)
        ok_f = P.cone_contains(spec, W, alpha, diff_fwd)
        ok_b = P.cone_contains(spec, W, alpha, diff_bwd)
        bad = ~(ok_f & ok_b)
        if np.any(bad):
            rejected.append((int(indices[c]), int(indices[members[int(np.argmax(bad))]])))
            continue
        members.append(c)
        member_pts = np.concatenate([member_pts, pts[c][None, :]])
    member_arr = np.array(members, dtype=int)
    v, _ = P.split_project(spec, W, pts[member_arr])
    offsets = pts[member_arr][:, : spec.layer_dims[0]] @ W.normal
    margin = np.inf
    if member_arr.size > 1:
        vi = M.MetricIndex(spec, v)
        dmin, _ = vi.nearest(v, k=1, exclude_self=True)
        margin = float(dmin[:, 0].min())
    return GraphExtract(np.array(W.normal), alpha, indices[member_arr], v,
                        offsets, rejected, margin,
                        float(weights[member_arr].sum()))


def graph_cover(mu: DiscreteMeasure, tree, alpha: float,
                proj_threshold: float = 0.02, coverage_target: float = 0.95,
                max_iter: int = 8, base_layer: int | None = None,
                cfg=None) -> dict:
    """Iterated graph extraction guided by the cube tree.

    Picks the heaviest unprocessed base cube, takes the flatness witness of
    its center as the base plane, drops child cubes whose projection shadow
    on that plane falls under the practical threshold, extracts a graph from
    the remaining points, and repeats on what is left.
    """
    from . import cubes as CB

    spec = mu.spec
    if base_layer is None:
        base_layer = next((li for li, layer in enumerate(tree.layers)
                           if len(layer) > 1), 0)
    remaining = np.ones(len(mu), dtype=bool)
    total = mu.total_mass
    extracts: list[GraphExtract] = []
    processed: set[int] = set()
    log = []
    for it in range(max_iter):
        covered = total - float(mu.weights[remaining].sum())
        if covered / total >= coverage_target:
            break
        best, best_mass = None, 0.0
        for ci, q in enumerate(tree.layers[base_layer]):
            if ci in processed:
                continue
            mass = float(mu.weights[q.members[remaining[q.members]]].sum())
            if mass > best_mass:
                best, best_mass = ci, mass
        if best is None or best_mass <= 0:
            break
        processed.add(best)
        q = tree.layers[base_layer][best]
        wit = CB.cube_flatness(tree, base_layer, best, cfg)
        W = VerticalPlane(wit["normal"])

        cand_mask = remaining.copy()
        keep_members = q.members[cand_mask[q.members]]
        if base_layer + 1 < len(tree.layers):
            for child in tree.layers[base_layer + 1]:
                if child.parent is None or tree.layers[base_layer][child.parent] is not q:
                    continue
                sub = child.members[cand_mask[child.members]]
                if sub.size == 0 or child.diam <= 0:
                    continue
                reach = max(child.diam, tree.levels[base_layer + 1].separation)
                pm = projection_mass(spec, mu.points[sub], W,
                                     mu.points[child.center_idx],
                                     reach, reach / 16)
                if pm["mass"] < proj_threshold * child.diam ** (spec.Q - 1):
                    cand_mask[sub] = False
        cand_idx = q.members[cand_mask[q.members]]
        if cand_idx.size == 0:
            log.append({"iter": it, "cube": best, "note": "no candidates"})
            continue
        g = extract_graph(spec, mu.points[cand_idx], W, alpha,
                          mu.weights[cand_idx], cand_idx)
        if g.member_indices.size == 0:
            log.append({"iter": it, "cube": best, "note": "empty extraction"})
            continue
        remaining[g.member_indices] = False
        extracts.append(g)
        log.append({"iter": it, "cube": best, "members": int(g.member_indices.size),
                    "mass": g.covered_mass, "keep_members": int(keep_members.size)})
    covered = total - float(mu.weights[remaining].sum())
    return {"extracts": extracts, "covered_fraction": covered / total, "log": log}
