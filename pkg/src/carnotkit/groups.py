"""Stratified-group arithmetic in exponential coordinates.

A group element is a plain numpy vector of length ``n`` split into layers;
all operations are vectorized over leading axes.  Products are computed by
closed forms for the built-in families (abelian, Heisenberg, generic step 2)
and by the truncated Dynkin expansion for arbitrary graded structure
constants, which is exact for nilpotent algebras.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import bch

__all__ = [
    "GroupError",
    "GroupSpec",
    "load_group",
    "builtin_group",
    "multiply",
    "inverse",
    "dilate",
    "homogeneous_norm",
    "layer_norms",
    "distance",
    "identity",
    "random_points",
    "calibrate_norm_eps",
    "triangle_violations",
]


class GroupError(ValueError):
    """Malformed group description or nonconforming points."""


@dataclass(frozen=True)
class GroupSpec:
    """A stratified group: layer dimensions, product rule, norm parameters."""

    name: str
    step: int
    layer_dims: tuple[int, ...]
    bch_kind: str                      # abelian | heisenberg | step2 | general
    norm_eps: tuple[float, ...]        # eps_1 .. eps_step, eps_1 == 1
    structure: np.ndarray | None = None  # C[i,j,k], required for step2/general
    heisenberg_n: int = 0
    offsets: tuple[int, ...] = field(init=False)
    n: int = field(init=False)
    Q: int = field(init=False)

    def __post_init__(self):
        if self.step < 1 or len(self.layer_dims) != self.step:
            raise GroupError("layer_dims must list one dimension per step")
        if any(d < 1 for d in self.layer_dims):
            raise GroupError("layer dimensions must be positive")
        if len(self.norm_eps) != self.step:
            raise GroupError("norm_eps must have one entry per layer")
        if abs(self.norm_eps[0] - 1.0) > 1e-15:
            raise GroupError("norm_eps[0] must be 1")
        if any(e <= 0 for e in self.norm_eps):
            raise GroupError("norm_eps entries must be positive")
        offs = (0,) + tuple(np.cumsum(self.layer_dims).tolist())
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "n", offs[-1])
        object.__setattr__(self, "Q", sum((i + 1) * d for i, d in enumerate(self.layer_dims)))
        if self.bch_kind in ("step2", "general"):
            if self.structure is None:
                raise GroupError(f"bch kind {self.bch_kind!r} needs structure constants")
            layer_of = np.empty(self.n, dtype=int)
            for i in range(self.step):
                layer_of[offs[i]:offs[i + 1]] = i + 1
            bch.check_graded_structure(self.structure, layer_of, self.step)
            self.structure.setflags(write=False)
        elif self.bch_kind == "heisenberg":
            if self.layer_dims != (2 * self.heisenberg_n, 1):
                raise GroupError("heisenberg layer dims must be (2n, 1)")
        elif self.bch_kind != "abelian":
            raise GroupError(f"unknown bch kind {self.bch_kind!r}")
        if self.bch_kind == "abelian" and self.step != 1:
            raise GroupError("abelian groups must have step 1")

    def layer_slice(self, i: int) -> slice:
        """Slice of coordinates in layer i (1-based)."""
        return slice(self.offsets[i - 1], self.offsets[i])

    def conform(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.n:
            raise GroupError(f"point has {p.shape[-1]} coords, group needs {self.n}")
        if not np.all(np.isfinite(p)):
            raise GroupError("point has non-finite coordinates")
        return p

    def config_hash(self) -> str:
        payload = {
            "step": self.step,
            "layer_dims": list(self.layer_dims),
            "bch": self.bch_kind,
            "norm_eps": list(self.norm_eps),
            "heisenberg_n": self.heisenberg_n,
            "structure": None if self.structure is None else self.structure.tolist(),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_norm_eps(self, eps) -> "GroupSpec":
        return GroupSpec(
            name=self.name,
            step=self.step,
            layer_dims=self.layer_dims,
            bch_kind=self.bch_kind,
            norm_eps=tuple(float(e) for e in eps),
            structure=None if self.structure is None else np.array(self.structure),
            heisenberg_n=self.heisenberg_n,
        )


def _structure_from_brackets(n: int, entries) -> np.ndarray:
    """Build C[i,j,k] from sparse bracket entries [i, j, k, value] (0-based)."""
    C = np.zeros((n, n, n))
    for i, j, k, val in entries:
        C[i, j, k] += val
        C[j, i, k] -= val
    return C


def builtin_group(name: str) -> GroupSpec:
    """Canonical groups: rN (abelian R^N), h1, h2, engel.

    Shipped norm parameters come from the packaged spec files; ``rN`` for
    arbitrary N is synthesized on the fly.
    """
    if name.startswith("r") and name[1:].isdigit():
        n = int(name[1:])
        return GroupSpec(name=name, step=1, layer_dims=(n,), bch_kind="abelian", norm_eps=(1.0,))
    try:
        text = resources.files("carnotkit.groups_data").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise GroupError(f"unknown builtin group {name!r}")
    return group_from_config(json.loads(text))


def group_from_config(cfg: dict) -> GroupSpec:
    """Build a GroupSpec from the JSON configuration schema."""
    try:
        step = int(cfg["step"])
        layer_dims = tuple(int(d) for d in cfg["layer_dims"])
        bch_cfg = cfg["bch"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GroupError(f"malformed group config: {exc}")
    name = cfg.get("name", "custom")
    eps = tuple(float(e) for e in cfg.get("norm_eps", [1.0] * step))
    kind = bch_cfg["kind"] if isinstance(bch_cfg, dict) else str(bch_cfg)
    n = sum(layer_dims)
    structure = None
    hn = 0
    if kind == "heisenberg":
        hn = int(bch_cfg.get("n", layer_dims[0] // 2))
    elif kind in ("step2", "general"):
        raw = bch_cfg.get("structure")
        if raw is None:
            raise GroupError("structure constants required")
        if isinstance(raw, dict) and "brackets" in raw:
            structure = _structure_from_brackets(n, raw["brackets"])
        else:
            structure = np.asarray(raw, dtype=float)
    elif kind != "abelian":
        raise GroupError(f"unknown bch kind {kind!r}")
    return GroupSpec(
        name=name, step=step, layer_dims=layer_dims, bch_kind=kind,
        norm_eps=eps, structure=structure, heisenberg_n=hn,
    )


def load_group(path_or_name: str) -> GroupSpec:
    """Load a group from a JSON file path or a builtin name."""
    import os

    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            return group_from_config(json.load(fh))
    return builtin_group(path_or_name)


def identity(spec: GroupSpec) -> np.ndarray:
    return np.zeros(spec.n)


def multiply(spec: GroupSpec, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Group product p * q in exponential coordinates."""
    p = spec.conform(p)
    q = spec.conform(q)
    if spec.bch_kind == "abelian":
        return p + q
    if spec.bch_kind == "heisenberg":
        out = p + q
        m = spec.heisenberg_n
        x, y = p[..., :m], p[..., m:2 * m]
        a, b = q[..., :m], q[..., m:2 * m]
        out[..., 2 * m] += 0.5 * (np.sum(x * b, axis=-1) - np.sum(y * a, axis=-1))
        return out
    if spec.bch_kind == "step2":
        out = p + q
        s2 = spec.layer_slice(2)
        out[..., s2] += 0.5 * bch.bracket(spec.structure, p, q)[..., s2]
        return out
    return bch.bch_product(spec.structure, spec.step, p, q)


def inverse(spec: GroupSpec, p: np.ndarray) -> np.ndarray:
    """Group inverse; negation in exponential coordinates."""
    return -spec.conform(p)


def dilate(spec: GroupSpec, lam, p: np.ndarray) -> np.ndarray:
    """Intrinsic dilation: layer i scaled by lam**i."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise GroupError("dilation factor must be positive")
    p = spec.conform(p)
    out = np.array(p)
    for i in range(1, spec.step + 1):
        sl = spec.layer_slice(i)
        out[..., sl] = out[..., sl] * (lam[..., None] ** i if lam.ndim else lam ** i)
    return out


def layer_norms(spec: GroupSpec, p: np.ndarray) -> np.ndarray:
    """Euclidean norms per layer, stacked on the last axis."""
    p = spec.conform(p)
    return np.stack(
        [np.linalg.norm(p[..., spec.layer_slice(i)], axis=-1) for i in range(1, spec.step + 1)],
        axis=-1,
    )


def homogeneous_norm(spec: GroupSpec, p: np.ndarray) -> np.ndarray:
    """Smooth-box norm: max_i eps_i * |p_i|^(1/i)."""
    ln = layer_norms(spec, p)
    eps = np.asarray(spec.norm_eps)
    powers = 1.0 / np.arange(1, spec.step + 1)
    return np.max(eps * ln ** powers, axis=-1)


def distance(spec: GroupSpec, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Left-invariant homogeneous distance d(p, q) = ||p^-1 * q||."""
    return homogeneous_norm(spec, multiply(spec, inverse(spec, p), q))


def random_points(spec: GroupSpec, count: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Gaussian cloud with layer-i coordinates scaled homogeneously by scale**i."""
    pts = rng.standard_normal((count, spec.n))
    for i in range(1, spec.step + 1):
        pts[:, spec.layer_slice(i)] *= scale ** i
    return pts


def triangle_violations(spec: GroupSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Indices where ||u*v|| > ||u|| + ||v|| (left-invariant reduction of the
    triangle inequality to pairs)."""
    lhs = homogeneous_norm(spec, multiply(spec, u, v))
    rhs = homogeneous_norm(spec, u) + homogeneous_norm(spec, v)
    return np.nonzero(lhs > rhs * (1 + 1e-12))[0]


def calibrate_norm_eps(spec: GroupSpec, sample_count: int = 100_000, seed: int = 0) -> tuple[float, ...]:
    """Largest norm parameters on a halving grid making d a genuine metric.

    Scans random pairs for triangle-inequality violations; while any remain,
    halves the parameter of the layer most often realizing the violating
    maximum.  Deterministic given the seed.  Raises GroupError if a layer
    needs more than 60 halvings.
    """
    if spec.step == 1:
        return (1.0,)
    rng = np.random.default_rng(seed)
    halves = sample_count // 2
    u = np.concatenate([
        random_points(spec, halves, rng, scale=1.0),
        random_points(spec, sample_count - halves, rng, scale=4.0),
    ])
    v = np.concatenate([
        random_points(spec, halves, rng, scale=1.0),
        random_points(spec, sample_count - halves, rng, scale=0.25),
    ])
    w = multiply(spec, u, v)
    ln_u, ln_v, ln_w = (layer_norms(spec, z) for z in (u, v, w))
    powers = 1.0 / np.arange(1, spec.step + 1)

    eps = np.ones(spec.step)
    halvings = np.zeros(spec.step, dtype=int)
    while True:
        terms_u = eps * ln_u ** powers
        terms_v = eps * ln_v ** powers
        terms_w = eps * ln_w ** powers
        lhs = terms_w.max(axis=-1)
        rhs = terms_u.max(axis=-1) + terms_v.max(axis=-1)
        bad = lhs > rhs * (1 + 1e-12)
        if not np.any(bad):
            return tuple(eps.tolist())
        top_layer = np.argmax(terms_w[bad], axis=-1)
        # layer 1 alone satisfies the inequality, so violations sit higher up
        counts = np.bincount(top_layer, minlength=spec.step)
        counts[0] = 0
        worst = int(np.argmax(counts))
        eps[worst] *= 0.5
        halvings[worst] += 1
        if halvings[worst] > 60:
            raise GroupError("norm calibration failed: no feasible eps after 60 halvings")
