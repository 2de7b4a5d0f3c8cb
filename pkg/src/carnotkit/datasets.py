"""Synthetic dataset generation for experiments and verification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import groups as G
from . import measures as M
from . import planes as P
from . import rectify as R
from .groups import GroupSpec
from .measures import DiscreteMeasure
from .planes import VerticalPlane

__all__ = ["DatasetSpec", "generate", "graph_points"]

_KINDS = ("plane", "intrinsic_graph", "two_planes", "noisy_graph", "ball_noise")


@dataclass(frozen=True)
class DatasetSpec:
    """Seed-deterministic synthetic cloud description."""

    kind: str
    group: str = "h1"
    count: int = 4000
    extent: float = 1.0
    seed: int = 0
    normal: tuple = (1.0, 0.0)
    second_normal: tuple | None = None   # two_planes
    amplitude: float = 0.25              # graph kinds
    frequency: float = 2.0
    aperture: float = 1.0                # target cone aperture for graphs
    noise_fraction: float = 0.02         # noisy_graph

    def validate(self, spec: GroupSpec) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"dataset.kind: unknown kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("dataset.count: must be positive")
        if self.extent <= 0:
            raise ValueError("dataset.extent: must be positive")
        if len(self.normal) != spec.layer_dims[0]:
            raise ValueError("dataset.normal: length must match the first layer")
        if self.kind == "two_planes" and self.second_normal is None:
            raise ValueError("dataset.second_normal: required for two_planes")


def _pitch_for_count(spec: GroupSpec, radius: float, count: int) -> float:
    """Pitch of the homogeneous-balanced plane lattice with about ``count``
    nodes (layer i uses Euclidean pitch (h/eps_i)^i)."""
    lo, hi = radius / 4096, radius / 4
    for _ in range(60):
        pitch = np.sqrt(lo * hi)
        n1 = spec.layer_dims[0]
        est = (2 * radius / pitch) ** (n1 - 1)
        for i in range(2, spec.step + 1):
            cell = (pitch / spec.norm_eps[i - 1]) ** i
            est *= (2 * (radius / spec.norm_eps[i - 1]) ** i / cell) ** spec.layer_dims[i - 1]
        if est > count:
            lo = pitch
        else:
            hi = pitch
    return float(np.sqrt(lo * hi))


def graph_points(spec: GroupSpec, V: VerticalPlane, base: np.ndarray,
                 amplitude: float, frequency: float) -> np.ndarray:
    """Intrinsic graph points v * (phi(v) n) over plane points v, with the
    smooth profile phi = amplitude * sin(frequency * <first plane coord>)."""
    coords = P.plane_coords(spec, V, base)
    phi = amplitude * np.sin(frequency * coords[:, 0])
    if coords.shape[1] > 1:
        phi = phi * np.cos(0.5 * frequency * coords[:, 1])
    offsets = phi[:, None] * V.embed_normal(spec)[None, :]
    return G.multiply(spec, base, offsets)


def _calibrated_graph(spec, V, base, amplitude, frequency, aperture):
    """Shrink the profile amplitude until every pair respects the aperture."""
    amp = amplitude
    for _ in range(20):
        pts = graph_points(spec, V, base, amp, frequency)
        viol = R.cone_pair_check(spec, pts, V, aperture, (1e-12, np.inf))
        if not viol:
            return pts, amp
        amp *= 0.5
    return graph_points(spec, V, base, 0.0, frequency), 0.0


def generate(ds: DatasetSpec, spec: GroupSpec | None = None) -> DiscreteMeasure:
    """Synthesize the described cloud; labels identify components."""
    spec = spec or G.builtin_group(ds.group)
    ds.validate(spec)
    rng = np.random.default_rng(ds.seed)
    V = VerticalPlane(np.array(ds.normal, dtype=float))
    r = ds.extent

    if ds.kind == "plane":
        pitch = _pitch_for_count(spec, r, ds.count)
        pts, wts = P.flat_quadrature(spec, V, G.identity(spec), r, pitch,
                                     anisotropic=True)
        return DiscreteMeasure(spec, pts, wts, np.zeros(len(pts), int), "plane")

    if ds.kind in ("intrinsic_graph", "noisy_graph"):
        pitch = _pitch_for_count(spec, r, ds.count)
        base, wts = P.flat_quadrature(spec, V, G.identity(spec), r, pitch,
                                      anisotropic=True)
        pts, amp = _calibrated_graph(spec, V, base, ds.amplitude, ds.frequency,
                                     ds.aperture)
        labels = np.zeros(len(pts), int)
        if ds.kind == "noisy_graph" and ds.noise_fraction > 0:
            n_noise = max(1, int(round(ds.noise_fraction * len(pts))))
            noise = G.random_points(spec, 4 * n_noise, rng, r / 2)
            noise = noise[G.homogeneous_norm(spec, noise) < r][:n_noise]
            w_noise = np.full(len(noise), wts.mean())
            pts = np.concatenate([pts, noise])
            wts = np.concatenate([wts, w_noise])
            labels = np.concatenate([labels, np.ones(len(noise), int)])
        return DiscreteMeasure(spec, pts, wts, labels, "graph")

    if ds.kind == "two_planes":
        V2 = VerticalPlane(np.array(ds.second_normal, dtype=float))
        pitch = _pitch_for_count(spec, r, ds.count // 2)
        p1, w1 = P.flat_quadrature(spec, V, G.identity(spec), r, pitch,
                                   anisotropic=True)
        p2, w2 = P.flat_quadrature(spec, V2, G.identity(spec), r, pitch,
                                   anisotropic=True)
        pts = np.concatenate([p1, p2])
        wts = np.concatenate([w1, w2])
        labels = np.concatenate([np.zeros(len(p1), int), np.ones(len(p2), int)])
        return DiscreteMeasure.merged(spec, pts, wts, labels, "generic")

    # ball_noise: uniform mass in the metric ball
    dims = []
    for i in range(1, spec.step + 1):
        dims += [i] * spec.layer_dims[i - 1]
    half = np.array([(r / spec.norm_eps[l - 1]) ** l for l in dims])
    pts = np.empty((0, spec.n))
    while pts.shape[0] < ds.count:
        cand = rng.uniform(-half, half, size=(2 * ds.count, spec.n))
        pts = np.concatenate([pts, cand[G.homogeneous_norm(spec, cand) < r]])
    pts = pts[: ds.count]
    wts = np.full(ds.count, r ** spec.Q / ds.count)
    return DiscreteMeasure(spec, pts, wts, np.zeros(ds.count, int), "generic")
