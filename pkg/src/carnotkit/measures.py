"""Discrete Radon measures: weighted point clouds with metric queries.

Ball queries use the box containment of metric balls: candidates are pulled
from a kd-tree over layerwise-rescaled coordinates with a Chebyshev box that
provably contains the ball, then filtered by the exact homogeneous distance.
This keeps every query exact while avoiding quadratic scans.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import groups as G
from .groups import GroupSpec

__all__ = [
    "DiscreteMeasure",
    "MetricIndex",
    "ball_mass",
    "ball_indices",
    "blowup",
    "density_profile",
    "DensityProfile",
    "RegularSet",
    "regular_set",
    "concentration_set",
    "hausdorff_distance",
    "nearest_distances",
    "median_spacing",
    "read_cloud_csv",
    "write_cloud_csv",
]


@dataclass
class DiscreteMeasure:
    """Weighted point cloud standing in for a Radon measure."""

    spec: GroupSpec
    points: np.ndarray
    weights: np.ndarray
    labels: np.ndarray | None = None
    support_tag: str = "generic"
    _index: "MetricIndex | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = self.spec.conform(np.atleast_2d(self.points))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("weights must align with points")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.points.shape[0]:
                raise ValueError("labels must align with points")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def index(self) -> "MetricIndex":
        if self._index is None:
            self._index = MetricIndex(self.spec, self.points)
        return self._index

    def restrict(self, keep: np.ndarray) -> "DiscreteMeasure":
        keep = np.asarray(keep)
        return DiscreteMeasure(
            self.spec, self.points[keep], self.weights[keep],
            None if self.labels is None else self.labels[keep],
            self.support_tag,
        )

    @staticmethod
    def merged(spec: GroupSpec, points: np.ndarray, weights: np.ndarray,
               labels=None, support_tag: str = "generic",
               decimals: int = 12) -> "DiscreteMeasure":
        """Build a measure, merging duplicate points by weight summation."""
        points = spec.conform(np.atleast_2d(points))
        weights = np.asarray(weights, dtype=float)
        key = np.round(points, decimals)
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        merged_w = np.zeros(first.shape[0])
        np.add.at(merged_w, inv, weights)
        lab = None if labels is None else np.asarray(labels)[first]
        return DiscreteMeasure(spec, points[first], merged_w, lab, support_tag)


class MetricIndex:
    """Exact ball/nearest queries in the homogeneous metric.

    A metric ball B(x, r) is contained in a coordinate box around x: the
    horizontal block is exact (group differences are linear there) and each
    higher layer adds a certified bound on the product correction, derived
    from the Dynkin word expansion.  Candidates come from kd-trees over
    box-normalized coordinates (one per dyadic radius bucket) and are then
    filtered by the exact distance, so queries never miss a point.
    """

    def __init__(self, spec: GroupSpec, points: np.ndarray):
        self.spec = spec
        self.points = spec.conform(np.atleast_2d(points))
        self._n1 = spec.layer_dims[0]
        self._trees: dict[int, tuple[cKDTree, np.ndarray]] = {}
        self._x_euclid_max = float(np.max(np.linalg.norm(self.points, axis=1))) if len(self.points) else 0.0
        self._word_stats = self._correction_word_stats()
        self._layer_of = np.empty(spec.n, dtype=int)
        for i in range(1, spec.step + 1):
            self._layer_of[spec.layer_slice(i)] = i

    def _correction_word_stats(self) -> list[tuple[float, int, int]]:
        """(|coeff| * ||C||_F^(L-1), count of x letters, count of u letters)
        for every Dynkin word of length >= 2; empty for closed-form kinds."""
        spec = self.spec
        if spec.bch_kind in ("abelian", "heisenberg"):
            return []
        from . import bch
        cnorm = float(np.sqrt(np.sum(spec.structure ** 2)))
        stats = []
        for coeff, word in bch.dynkin_terms(spec.step):
            length = len(word)
            if length < 2:
                continue
            n0 = sum(1 for w in word if w == 0)
            stats.append((abs(coeff) * cnorm ** (length - 1), n0, length - n0))
        return stats

    def _ball_euclid_bound(self, radius: float) -> float:
        """Certified Euclidean bound on |u| over the metric ball of radius r."""
        eps = self.spec.norm_eps
        return float(np.sqrt(sum((radius / eps[i - 1]) ** (2 * i)
                                 for i in range(1, self.spec.step + 1))))

    def _correction_bound(self, center_euclid: np.ndarray, radius: np.ndarray) -> np.ndarray:
        """Certified bound on |(x * u - x - u)| over the ball ||u|| <= r."""
        center_euclid = np.asarray(center_euclid, dtype=float)
        radius = np.asarray(radius, dtype=float)
        if not self._word_stats:
            if self.spec.bch_kind == "heisenberg":
                return 0.5 * center_euclid * radius
            return np.zeros(np.broadcast(center_euclid, radius).shape)
        U = np.sqrt(sum((radius / self.spec.norm_eps[i - 1]) ** (2 * i)
                        for i in range(1, self.spec.step + 1)))
        out = np.zeros(np.broadcast(center_euclid, radius).shape)
        for c, n0, n1 in self._word_stats:
            out = out + c * center_euclid ** n0 * U ** n1
        return out

    def _halfwidths(self, center_euclid, radius) -> np.ndarray:
        """Per-coordinate box half-widths, broadcast over leading shape."""
        eps = self.spec.norm_eps
        radius = np.asarray(radius, dtype=float)
        corr = self._correction_bound(center_euclid, radius)
        cols = []
        for l in self._layer_of:
            base = (radius / eps[l - 1]) ** l
            cols.append(base + corr if l >= 2 else base + 0 * corr)
        return np.stack(cols, axis=-1)

    def _bucket(self, radius: float) -> tuple[cKDTree, np.ndarray, int]:
        b = int(np.ceil(np.log2(max(radius, 1e-12))))
        if b not in self._trees:
            scale = np.maximum(self._halfwidths(self._x_euclid_max, 2.0 ** b), 1e-300)
            self._trees[b] = (cKDTree(self.points / scale), scale)
        tree, scale = self._trees[b]
        return tree, scale, b

    def ball(self, center: np.ndarray, radius: float, strict: bool = True) -> np.ndarray:
        """Indices of points with d(center, p) < radius (<= when not strict)."""
        center = self.spec.conform(center)
        if radius <= 0:
            return np.empty(0, dtype=int)
        tree, scale, _ = self._bucket(radius)
        need = self._halfwidths(np.linalg.norm(center), radius)
        cheb = float(np.max(need / scale)) * (1 + 1e-12)
        cand = tree.query_ball_point(center / scale, cheb, p=np.inf)
        cand = np.asarray(cand, dtype=int)
        if cand.size == 0:
            return cand
        d = G.distance(self.spec, center, self.points[cand])
        keep = d < radius if strict else d <= radius * (1 + 1e-12)
        return cand[keep]

    def _ball_candidates(self, centers: np.ndarray, radii: np.ndarray) -> list[np.ndarray]:
        """Certified candidate lists for per-center radii (shared bucket max)."""
        rmax = float(np.max(radii))
        tree, scale, _ = self._bucket(rmax)
        need = self._halfwidths(np.linalg.norm(centers, axis=1), np.asarray(radii))
        chebs = np.max(need / scale, axis=-1) * (1 + 1e-12)
        return tree.query_ball_point(centers / scale, chebs, p=np.inf)

    _PAIR_BUDGET = 4_000_000

    def ball_batch(self, centers: np.ndarray, radius: float, strict: bool = True) -> list[np.ndarray]:
        """Ball queries for many centers at a shared radius."""
        centers = np.atleast_2d(self.spec.conform(centers))
        out: list[np.ndarray] = []
        for start in range(0, centers.shape[0], 4096):
            block = centers[start:start + 4096]
            cand_lists = self._ball_candidates(block, np.full(block.shape[0], radius))
            for c, cand in zip(block, cand_lists):
                cand = np.asarray(cand, dtype=int)
                if cand.size == 0:
                    out.append(cand)
                    continue
                d = G.distance(self.spec, c, self.points[cand])
                keep = d < radius if strict else d <= radius * (1 + 1e-12)
                out.append(cand[keep])
        return out

    def nearest(self, queries: np.ndarray, k: int = 1, exclude_self: bool = False):
        """Exact k nearest neighbors under the homogeneous metric.

        Candidates come from expanding certified boxes; the k-th candidate at
        distance d is accepted once the scanned radius reaches d.
        """
        queries = np.atleast_2d(self.spec.conform(queries))
        m = queries.shape[0]
        out_d = np.full((m, k), np.inf)
        out_i = np.full((m, k), -1, dtype=int)
        # horizontal kNN distance lower-bounds the metric kNN distance, but
        # degenerates on vertically stacked data; blend with a volumetric guess
        kk = min(k + (1 if exclude_self else 0), len(self.points))
        htree = cKDTree(self.points[:, : self._n1])
        hd, _ = htree.query(queries[:, : self._n1], k=kk)
        hd = hd.reshape(m, -1)
        mid = self.points.mean(axis=0)
        extent = float(np.max(G.homogeneous_norm(self.spec, self.points - mid))) + 1e-9
        guess = extent * (kk / max(len(self.points), 2)) ** (1.0 / max(self.spec.Q - 1, 1))
        r0 = np.maximum(hd[:, -1] * 2.0, max(guess, 1e-9))
        remaining = np.arange(m)
        radius = r0.copy()
        for _ in range(80):
            if remaining.size == 0:
                break
            still = []
            for bstart in range(0, remaining.size, 4096):
                batch = remaining[bstart:bstart + 4096]
                cand_lists = self._ball_candidates(queries[batch], radius[batch])
                lens = np.array([len(c) for c in cand_lists])
                if lens.sum() == 0:
                    still.extend(batch.tolist())
                    radius[batch] *= 2.0
                    continue
                flat = np.concatenate([np.asarray(c, dtype=int) for c in cand_lists if len(c)])
                seg = np.repeat(np.arange(batch.size), lens)
                d = G.distance(self.spec, queries[batch][seg], self.points[flat])
                if exclude_self:
                    keep = d > 1e-13
                    flat, seg, d = flat[keep], seg[keep], d[keep]
                order = np.lexsort((d, seg))
                flat, seg, d = flat[order], seg[order], d[order]
                starts = np.searchsorted(seg, np.arange(batch.size))
                ends = np.searchsorted(seg, np.arange(batch.size) + 1)
                for local, qi in enumerate(batch):
                    lo, hi = starts[local], ends[local]
                    if hi - lo >= k and d[lo + k - 1] <= radius[qi]:
                        out_d[qi] = d[lo:lo + k]
                        out_i[qi] = flat[lo:lo + k]
                    else:
                        still.append(qi)
                        radius[qi] *= 2.0
            remaining = np.array(still, dtype=int)
        return out_d, out_i

    def ball_masses(self, centers: np.ndarray, radius: float, weights: np.ndarray,
                    member_mask: np.ndarray | None = None) -> np.ndarray:
        """Open-ball masses for many centers at once; optionally only counting
        points flagged by member_mask."""
        centers = np.atleast_2d(self.spec.conform(centers))
        m = centers.shape[0]
        out = np.zeros(m)
        start = 0
        while start < m:
            # adapt block size to keep candidate pair counts bounded
            stop = min(m, start + 2048)
            block = centers[start:stop]
            cand_lists = self._ball_candidates(block, np.full(block.shape[0], radius))
            lens = np.array([len(c) for c in cand_lists])
            total = int(lens.sum())
            if total > self._PAIR_BUDGET and stop - start > 64:
                stop = start + max(64, (stop - start) * self._PAIR_BUDGET // (2 * total))
                block = centers[start:stop]
                cand_lists = self._ball_candidates(block, np.full(block.shape[0], radius))
                lens = np.array([len(c) for c in cand_lists])
            if lens.sum():
                flat = np.concatenate([np.asarray(c, dtype=int) for c in cand_lists if len(c)])
                seg = np.repeat(np.arange(block.shape[0]), lens)
                d = G.distance(self.spec, block[seg], self.points[flat])
                inside = d < radius
                if member_mask is not None:
                    inside &= member_mask[flat]
                np.add.at(out[start:stop], seg[inside], weights[flat[inside]])
            start = stop
        return out


def ball_indices(mu: DiscreteMeasure, center: np.ndarray, radius: float,
                 strict: bool = True) -> np.ndarray:
    return mu.index().ball(center, radius, strict=strict)


def ball_mass(mu: DiscreteMeasure, center: np.ndarray, radius: float) -> float:
    """Mass of the open metric ball."""
    if radius <= 0:
        return 0.0
    idx = mu.index().ball(center, radius, strict=True)
    return float(mu.weights[idx].sum())


def blowup(mu: DiscreteMeasure, center: np.ndarray, r: float, m: float) -> DiscreteMeasure:
    """Rescaled translate: points delta_{1/r}(x^-1 p), weights / r^m."""
    if r <= 0:
        raise ValueError("blowup scale must be positive")
    center = mu.spec.conform(center)
    moved = G.multiply(mu.spec, G.inverse(mu.spec, center), mu.points)
    scaled = G.dilate(mu.spec, 1.0 / r, moved)
    return DiscreteMeasure(mu.spec, scaled, mu.weights / r ** m, mu.labels, mu.support_tag)


@dataclass
class DensityProfile:
    """Ball-mass ratios phi(B(x, r)) / r^m over an audited radius window."""

    center: np.ndarray
    radii: np.ndarray
    masses: np.ndarray
    ratios: np.ndarray
    m: float
    lower: float
    upper: float
    divergent: bool


def density_profile(mu: DiscreteMeasure, x: np.ndarray, radii, m: float) -> DensityProfile:
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise ValueError("radii must be nonempty")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    masses = np.array([ball_mass(mu, x, r) for r in radii])
    ratios = masses / radii ** m
    finite = ratios[masses > 0]
    divergent = bool(finite.size >= 2 and finite[0] > 4 * finite[-1])
    return DensityProfile(
        center=np.asarray(x, dtype=float), radii=radii, masses=masses, ratios=ratios,
        m=m, lower=float(ratios.min()), upper=float(ratios.max()), divergent=divergent,
    )


@dataclass
class RegularSet:
    """Members passing two-sided ball-mass bounds at every audited radius."""

    theta: float
    gamma: float
    member_indices: np.ndarray
    audit_radii: np.ndarray
    m: float


def _audit_radii(r_min: float, r_max: float) -> np.ndarray:
    """Dyadic audit grid inside the open window (r_min, r_max)."""
    radii = []
    r = r_max / 2.0
    while r > r_min:
        radii.append(r)
        r /= 2.0
    return np.array(radii[::-1])


def regular_set(mu: DiscreteMeasure, theta: float, gamma: float, r_min: float,
                m: float | None = None) -> RegularSet:
    """Points x with theta^-1 r^m <= phi(B(x,r)) <= theta r^m on dyadic radii
    in (r_min, 1/gamma)."""
    if theta < 1:
        raise ValueError("theta must be at least 1")
    if r_min >= 1.0 / gamma:
        raise ValueError("r_min must be below 1/gamma")
    if m is None:
        m = mu.spec.Q - 1
    radii = _audit_radii(r_min, 1.0 / gamma)
    keep = np.ones(len(mu), dtype=bool)
    idx = mu.index()
    for r in radii:
        lo, hi = r ** m / theta, theta * r ** m
        active = np.nonzero(keep)[0]
        if active.size == 0:
            break
        masses = idx.ball_masses(mu.points[active], r, mu.weights)
        keep[active[(masses < lo) | (masses > hi)]] = False
    return RegularSet(theta, gamma, np.nonzero(keep)[0], radii, m)


def concentration_set(mu: DiscreteMeasure, reg: RegularSet, mu_param: int,
                      nu_param: float) -> RegularSet:
    """Members of reg whose balls carry at least a (1 - 1/mu_param) fraction
    of their mass inside the regular set, at dyadic radii below 1/nu_param."""
    if mu_param < 2:
        raise ValueError("mu_param must be at least 2")
    member_mask = np.zeros(len(mu), dtype=bool)
    member_mask[reg.member_indices] = True
    radii = reg.audit_radii[reg.audit_radii < 1.0 / nu_param]
    frac = 1.0 - 1.0 / mu_param
    idx = mu.index()
    keep = np.ones(reg.member_indices.size, dtype=bool)
    for r in radii:
        active = reg.member_indices[keep]
        if active.size == 0:
            break
        total = idx.ball_masses(mu.points[active], r, mu.weights)
        inside = idx.ball_masses(mu.points[active], r, mu.weights, member_mask)
        bad = inside < frac * total * (1 - 1e-12)
        keep[np.nonzero(keep)[0][bad]] = False
    return RegularSet(reg.theta, reg.gamma, reg.member_indices[keep], radii, reg.m)


def nearest_distances(spec: GroupSpec, A: np.ndarray, B: np.ndarray,
                      block: int = 512) -> np.ndarray:
    """For each a in A, min over b in B of d(a, b), computed blockwise."""
    A = np.atleast_2d(spec.conform(A))
    B = np.atleast_2d(spec.conform(B))
    out = np.full(A.shape[0], np.inf)
    for start in range(0, A.shape[0], block):
        chunk = A[start:start + block]
        d = G.distance(spec, chunk[:, None, :], B[None, :, :])
        out[start:start + block] = d.min(axis=1)
    return out


def hausdorff_distance(spec: GroupSpec, A: np.ndarray, B: np.ndarray) -> float:
    """Symmetric Hausdorff distance of finite point sets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("Hausdorff distance needs nonempty sets")
    if A.shape[0] * B.shape[0] > 1_000_000:
        da = MetricIndex(spec, B).nearest(A, k=1)[0][:, 0]
        db = MetricIndex(spec, A).nearest(B, k=1)[0][:, 0]
        return float(max(da.max(), db.max()))
    return float(max(nearest_distances(spec, A, B).max(),
                     nearest_distances(spec, B, A).max()))


def median_spacing(mu: DiscreteMeasure) -> float:
    """Median nearest-neighbor distance; the resolution floor is 4x this."""
    if len(mu) < 2:
        return np.inf
    d, _ = mu.index().nearest(mu.points, k=1, exclude_self=True)
    return float(np.median(d[:, 0]))


def write_cloud_csv(path: str, mu: DiscreteMeasure) -> None:
    """Point-cloud CSV with header id,x_1..x_n,weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"x_{i+1}" for i in range(mu.spec.n)] + ["weight"])
        for i, (p, w) in enumerate(zip(mu.points, mu.weights)):
            writer.writerow([i] + [repr(float(c)) for c in p] + [repr(float(w))])


def read_cloud_csv(path: str, spec: GroupSpec, support_tag: str = "generic") -> DiscreteMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "id" or header[-1] != "weight":
            raise ValueError("cloud CSV must have header id,x_1..x_n,weight")
        pts, wts = [], []
        for row in reader:
            pts.append([float(v) for v in row[1:-1]])
            wts.append(float(row[-1]))
    return DiscreteMeasure.merged(spec, np.array(pts), np.array(wts), support_tag=support_tag)
