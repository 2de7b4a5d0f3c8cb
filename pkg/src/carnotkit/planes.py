"""Vertical hyperplanes, splitting projections, cones, and flat quadrature.

A 1-codimensional homogeneous subgroup V is stored by its unit horizontal
normal; as a set it is the hyperplane {g : <g_1, normal> = 0}.  The group
splits as V x N(V), and every element factors uniquely as
``g = project_plane(g) * project_normal(g)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import groups as G
from .groups import GroupSpec

__all__ = [
    "VerticalPlane",
    "split_project",
    "dist_to_plane",
    "coset_distance",
    "cone_contains",
    "off_cone_factor",
    "plane_basis",
    "plane_coords",
    "from_plane_coords",
    "flat_quadrature",
    "plane_unit_ball_area",
    "projection_lipschitz_bound",
    "projection_constant",
    "sphere_directions",
]


@dataclass(frozen=True)
class VerticalPlane:
    """Element of the codimension-1 Grassmannian: a unit horizontal normal."""

    normal: np.ndarray

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        length = np.linalg.norm(nrm)
        if length < 1e-12:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", nrm / length)
        self.normal.setflags(write=False)

    def embed_normal(self, spec: GroupSpec) -> np.ndarray:
        """Normal as a full group element (horizontal layer only)."""
        if self.normal.shape[0] != spec.layer_dims[0]:
            raise G.GroupError("plane normal dimension does not match first layer")
        out = np.zeros(spec.n)
        out[: spec.layer_dims[0]] = self.normal
        return out

    def contains(self, spec: GroupSpec, g: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        g = spec.conform(g)
        return np.abs(g[..., : spec.layer_dims[0]] @ self.normal) <= tol


def _normal_component(spec: GroupSpec, V: VerticalPlane, g: np.ndarray) -> np.ndarray:
    """Signed length <g_1, normal> of the horizontal normal component."""
    g = spec.conform(g)
    return g[..., : spec.layer_dims[0]] @ V.normal


def split_project(spec: GroupSpec, V: VerticalPlane, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique factors (v, w) with v on the plane, w on the normal line, g = v*w.

    The normal factor has only the first-layer normal component; the plane
    factor is recovered layer by layer so that the product reproduces g
    exactly (the layer-i correction of the product only involves layers < i).
    """
    g = spec.conform(g)
    n1 = spec.layer_dims[0]
    t = _normal_component(spec, V, g)
    w = np.zeros(g.shape)
    w[..., :n1] = t[..., None] * V.normal
    v = np.array(g)
    v[..., :n1] -= w[..., :n1]
    if spec.step > 1:
        for i in range(2, spec.step + 1):
            sl = spec.layer_slice(i)
            prod = G.multiply(spec, v, w)
            v[..., sl] = g[..., sl] - (prod[..., sl] - v[..., sl] - w[..., sl])
    return v, w


def dist_to_plane(spec: GroupSpec, V: VerticalPlane, g: np.ndarray) -> np.ndarray:
    """Distance of g to the plane through the origin: |<g_1, normal>|."""
    return np.abs(_normal_component(spec, V, g))


def coset_distance(spec: GroupSpec, V: VerticalPlane, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Distance between the parallel cosets xV and yV."""
    d = G.multiply(spec, G.inverse(spec, x), y)
    return np.abs(_normal_component(spec, V, d))


def cone_contains(spec: GroupSpec, V: VerticalPlane, alpha: float, w: np.ndarray) -> np.ndarray:
    """True where w lies in the closed cone with axis V and aperture alpha."""
    if alpha <= 0:
        raise ValueError("cone aperture must be positive")
    v_part, n_part = split_project(spec, V, w)
    return G.homogeneous_norm(spec, n_part) <= alpha * G.homogeneous_norm(spec, v_part)


def _poly_sup_on_balls(func, radii: list[float], dims: list[int], grid: int, seed: int = 0) -> float:
    """Supremum of |func| over a product of Euclidean balls.

    Coarse per-coordinate grid (clipped to the balls) followed by Nelder-Mead
    refinement from the best grid point; func must accept a flat coordinate
    vector.  Deterministic.
    """
    total = sum(dims)
    pts_per_dim = grid if total <= 4 else (9 if total <= 6 else 5)
    axes = [np.linspace(-1.0, 1.0, pts_per_dim)] * total
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, total)
    # clip each block into its ball
    start = 0
    for r, d in zip(radii, dims):
        block = mesh[:, start:start + d] * r
        nrm = np.linalg.norm(block, axis=1, keepdims=True)
        scale = np.minimum(1.0, r / np.maximum(nrm, 1e-300))
        mesh[:, start:start + d] = block * scale
        start += d

    vals = np.abs(func(mesh))
    best_idx = int(np.argmax(vals))
    best = float(vals[best_idx])

    def neg(z):
        z = np.array(z)
        start = 0
        for r, d in zip(radii, dims):
            nrm = np.linalg.norm(z[start:start + d])
            if nrm > r:
                z[start:start + d] *= r / nrm
            start += d
        return -abs(float(func(z[None, :])[0]))

    res = minimize(neg, mesh[best_idx], method="Nelder-Mead",
                   options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12})
    return max(best, -float(res.fun))


def _layer_correction(spec: GroupSpec, i: int, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Layer-i product correction: (p*q - p - q) restricted to layer i."""
    sl = spec.layer_slice(i)
    return (G.multiply(spec, p, q) - p - q)[..., sl]


def off_cone_factor(spec: GroupSpec, alpha: float, grid: int = 33, margin: float = 1.05) -> float:
    """Comparability factor L(alpha) with d(x,y) <= L * |horizontal part of x^-1 y|
    whenever x^-1 y falls outside every aperture-alpha cone.

    Built by the layer recursion: L_i = sup-of-correction + (1/(alpha*eps_i))^i
    with the suprema of the product corrections taken over the unit balls of
    the previous bounds and inflated by a safety margin (the grid search
    under-estimates suprema).  Nonincreasing in alpha.
    """
    if alpha <= 0:
        raise ValueError("aperture must be positive")
    if spec.step == 1:
        return 1.0
    n1 = spec.layer_dims[0]
    bounds = {1: 1.0}
    total = 1.0
    for i in range(2, spec.step + 1):
        dims = [n1] + [spec.layer_dims[j - 1] for j in range(2, i)] + [n1]
        radii = [1.0] + [bounds[j] for j in range(2, i)] + [1.0]

        def corr(z, layer=i):
            m = z.shape[0]
            p = np.zeros((m, spec.n))
            q = np.zeros((m, spec.n))
            start = 0
            p[:, :n1] = z[:, start:start + n1]; start += n1
            for j in range(2, layer):
                sl = spec.layer_slice(j)
                d = spec.layer_dims[j - 1]
                p[:, sl] = z[:, start:start + d]; start += d
            q[:, :n1] = z[:, start:start + n1]
            c = _layer_correction(spec, layer, p, q)
            return np.linalg.norm(c, axis=-1)

        sup = _poly_sup_on_balls(corr, radii, dims, grid) * margin
        bounds[i] = sup + (1.0 / (alpha * spec.norm_eps[i - 1])) ** i
        total += bounds[i] ** (1.0 / i)
    return total


def plane_basis(spec: GroupSpec, V: VerticalPlane) -> np.ndarray:
    """Orthonormal basis of the plane as an (n-1, n) matrix.

    First the horizontal directions orthogonal to the normal, then the
    standard bases of the higher layers; rows are full group coordinates.
    """
    n1 = spec.layer_dims[0]
    # complete the normal to an orthonormal basis of the first layer
    mat = np.eye(n1)
    mat[:, 0] = V.normal
    q, _ = np.linalg.qr(mat)
    # ensure the first column is the normal direction (QR may flip sign)
    if np.dot(q[:, 0], V.normal) < 0:
        q[:, 0] = -q[:, 0]
    horiz = q[:, 1:].T  # (n1-1, n1)
    rows = []
    for h in horiz:
        full = np.zeros(spec.n)
        full[:n1] = h
        rows.append(full)
    for i in range(2, spec.step + 1):
        sl = spec.layer_slice(i)
        for j in range(sl.start, sl.stop):
            e = np.zeros(spec.n)
            e[j] = 1.0
            rows.append(e)
    return np.array(rows)


def plane_coords(spec: GroupSpec, V: VerticalPlane, g: np.ndarray) -> np.ndarray:
    """Coordinates of plane points in the plane_basis frame."""
    return spec.conform(g) @ plane_basis(spec, V).T


def from_plane_coords(spec: GroupSpec, V: VerticalPlane, coords: np.ndarray) -> np.ndarray:
    return np.asarray(coords, dtype=float) @ plane_basis(spec, V)


def _lattice_axes(spec: GroupSpec, V: VerticalPlane, radius: float, pitch: float,
                  anisotropic: bool,
                  vertical_pitch: float | None = None) -> tuple[list[np.ndarray], float]:
    """Per-coordinate lattice axes in plane coordinates and the node weight.

    Isotropic mode uses one Euclidean pitch everywhere (the documented
    default); anisotropic mode spaces layer i at (pitch_i / eps_i)^i so that
    cells have homogeneous size pitch_i, with pitch_i = vertical_pitch for
    the higher layers when given (fine horizontal resolution at bounded
    node counts) and pitch otherwise.
    """
    n1 = spec.layer_dims[0]
    axes: list[np.ndarray] = []
    weight = 1.0
    dim_layers = [1] * (n1 - 1)
    for i in range(2, spec.step + 1):
        dim_layers += [i] * spec.layer_dims[i - 1]
    for layer in dim_layers:
        if anisotropic and layer > 1:
            base = vertical_pitch if vertical_pitch is not None else pitch
            step_len = (base / spec.norm_eps[layer - 1]) ** layer
        else:
            step_len = pitch
        half_extent = (radius / spec.norm_eps[layer - 1]) ** layer
        count = int(math.floor(half_extent / step_len))
        axes.append(np.arange(-count, count + 1) * step_len)
        weight *= step_len
    return axes, weight


def plane_unit_ball_area(spec: GroupSpec, V: VerticalPlane | None = None,
                         mc_samples: int = 0, seed: int = 0) -> float | tuple[float, float]:
    """Euclidean (n-1)-area of the unit metric ball sliced by a vertical plane.

    For the box norm the slice is a product of per-layer Euclidean balls, so
    the area has a closed form independent of the plane.  With mc_samples > 0
    a Monte Carlo estimate and its standard error are returned instead.
    """
    n1 = spec.layer_dims[0]

    def ball_volume(d: int, r: float) -> float:
        return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * r ** d

    if mc_samples <= 0:
        area = ball_volume(n1 - 1, 1.0)
        for i in range(2, spec.step + 1):
            area *= ball_volume(spec.layer_dims[i - 1], spec.norm_eps[i - 1] ** (-i))
        return area

    if V is None:
        raise ValueError("Monte Carlo estimate needs an explicit plane")
    rng = np.random.default_rng(seed)
    basis = plane_basis(spec, V)
    dims = [1] * (n1 - 1)
    for i in range(2, spec.step + 1):
        dims += [i] * spec.layer_dims[i - 1]
    # inflate the bounding box so the indicator is nontrivial even when the
    # ball slice is itself a box in plane coordinates
    half = 1.25 * np.array([(1.0 / spec.norm_eps[l - 1]) ** l for l in dims])
    box_vol = float(np.prod(2 * half))
    coords = rng.uniform(-half, half, size=(mc_samples, len(dims)))
    pts = coords @ basis
    inside = G.homogeneous_norm(spec, pts) < 1.0
    frac = inside.mean()
    area = box_vol * frac
    stderr = box_vol * math.sqrt(max(frac * (1 - frac), 1e-300) / mc_samples)
    return area, stderr


def flat_quadrature(spec: GroupSpec, V: VerticalPlane, center: np.ndarray, radius: float,
                    pitch: float, anisotropic: bool = False,
                    vertical_pitch: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Weighted lattice approximating the surface measure of a plane coset.

    Nodes sit on a regular lattice in the plane's coordinates, restricted to
    the metric ball B(center, radius), each carrying weight
    (cell volume) / (unit-ball slice area); total mass converges to
    radius^(Q-1).  Returns (points, weights) with points = center * v.
    """
    if pitch <= 0 or pitch > radius / 4:
        raise ValueError("pitch must be positive and at most radius/4")
    center = spec.conform(center)
    axes, weight = _lattice_axes(spec, V, radius, pitch, anisotropic, vertical_pitch)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    pts = from_plane_coords(spec, V, mesh)
    keep = G.homogeneous_norm(spec, pts) < radius
    pts = pts[keep]
    beta = plane_unit_ball_area(spec)
    weights = np.full(pts.shape[0], weight / beta)
    return G.multiply(spec, center, pts), weights


def projection_lipschitz_bound(spec: GroupSpec, samples: int = 40_000, seed: int = 0,
                               margin: float = 1.10) -> float:
    """Empirical bound C0 with ||project_plane(g)|| <= C0 ||g|| over planes.

    Estimated over random points and random normals at several scales, then
    refined by local maximization and inflated by a safety margin; cached per
    group by callers.
    """
    rng = np.random.default_rng(seed)
    n1 = spec.layer_dims[0]
    best = 1.0
    best_arg = None
    for scale in (0.25, 1.0, 4.0):
        pts = G.random_points(spec, samples // 3, rng, scale)
        normals = rng.standard_normal((8, n1))
        for nr in normals:
            Vp = VerticalPlane(nr)
            v, _ = split_project(spec, Vp, pts)
            ratio = G.homogeneous_norm(spec, v) / np.maximum(G.homogeneous_norm(spec, pts), 1e-300)
            idx = int(np.argmax(ratio))
            if ratio[idx] > best:
                best = float(ratio[idx])
                best_arg = (nr, pts[idx])
    if best_arg is not None:
        nr0, g0 = best_arg

        def neg(z):
            nr, g = z[:n1], z[n1:]
            if np.linalg.norm(nr) < 1e-9 or G.homogeneous_norm(spec, g) < 1e-12:
                return 0.0
            v, _ = split_project(spec, VerticalPlane(nr), g)
            return -float(G.homogeneous_norm(spec, v) / G.homogeneous_norm(spec, g))

        res = minimize(neg, np.concatenate([nr0, g0]), method="Nelder-Mead",
                       options={"maxiter": 3000, "xatol": 1e-10, "fatol": 1e-12})
        best = max(best, -float(res.fun))
    return best * margin


def projection_constant(spec: GroupSpec, V: VerticalPlane, radius: float = 1.0,
                        sample: int = 20_000, seed: int = 0,
                        grid_divisor: int = 64) -> dict:
    """Monte Carlo estimate of the shadow measure of a ball under the
    splitting projection, normalized by radius^(Q-1).

    Samples the ball uniformly (Haar = Lebesgue), projects to the plane, and
    measures covered area by grid occupancy at pitch radius/grid_divisor with
    a refinement check at half the pitch.
    """
    if sample < 1000:
        raise ValueError("sample size must be at least 1000")
    rng = np.random.default_rng(seed)
    dims = []
    for i in range(1, spec.step + 1):
        dims += [i] * spec.layer_dims[i - 1]
    half = np.array([(radius / spec.norm_eps[l - 1]) ** l for l in dims])
    pts = np.empty((0, spec.n))
    while pts.shape[0] < sample:
        cand = rng.uniform(-half, half, size=(2 * sample, spec.n))
        cand = cand[G.homogeneous_norm(spec, cand) < radius]
        pts = np.concatenate([pts, cand])
    pts = pts[:sample]
    v, _ = split_project(spec, V, pts)
    coords = plane_coords(spec, V, v)
    beta = plane_unit_ball_area(spec)

    def occupancy(pitch: float) -> float:
        cells = np.unique(np.floor(coords / pitch).astype(np.int64), axis=0)
        return cells.shape[0] * pitch ** coords.shape[1] / beta

    pitch = radius / grid_divisor
    est = occupancy(pitch)
    est_fine = occupancy(pitch / 2)
    return {
        "c": est / radius ** (spec.Q - 1),
        "c_refined": est_fine / radius ** (spec.Q - 1),
        "pitch": pitch,
        "samples": sample,
    }


def sphere_directions(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy directions on the unit sphere S^{dim-1}.

    Half-circle angles for dim 2, golden spiral for dim 3, seeded Gaussian
    points otherwise; antipodal duplicates are meaningful to callers that
    treat directions as plane normals, so only half the sphere is covered
    for dim <= 3.
    """
    if dim < 2:
        raise ValueError("need at least a 2-dimensional horizontal layer")
    if dim == 2:
        angles = (np.arange(count) + 0.5) * math.pi / count
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if dim == 3:
        golden = (1 + 5 ** 0.5) / 2
        k = np.arange(count)
        z = (k + 0.5) / count           # upper hemisphere
        phi = 2 * math.pi * k / golden
        s = np.sqrt(1 - z ** 2)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((count, dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    vecs[vecs[:, 0] < 0] *= -1.0
    return vecs
