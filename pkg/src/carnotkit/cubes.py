"""Dyadic cube decompositions of discrete measures, with a constants ledger.

Levels are built from greedy maximal separated nets (density-favored points
first), corona-selected balls, first-fit cells with small-cell gluing, and a
chain descent that stabilizes exactly once the level separation falls below
the point spacing.  Cubes are the stabilized chain preimages, so partition
and nesting hold by construction; the verifier measures every other bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import groups as G
from . import measures as M
from .groups import GroupSpec
from .measures import DiscreteMeasure

__all__ = [
    "ConstantsLedger",
    "constants",
    "build_nets",
    "choose_ball_radius",
    "build_partition_level",
    "build_cube_tree",
    "CubeTree",
    "CubeLevel",
    "verify_cube_axioms",
    "cube_flatness",
]


# ---------------------------------------------------------------------------
# constants ledger
# ---------------------------------------------------------------------------

_PRACTICAL_DEFAULTS = {
    "zeta": 1.0 / 8.0,
    "N": 4,
    "C_F": 64.0,
    "C_child": 32.0,
    "A0": 8.0,
    "k": 8.0,
    "eta": 1.0 / 8.0,
    "eps_G": 0.01,
    "eps_e": 0.01,
    "eps_3": 0.05,
}


@dataclass
class ConstantsLedger:
    """Scale and threshold constants in paper or practical form.

    Paper mode evaluates the verbatim formulas with arbitrary-precision
    arithmetic (values are astronomically small or large and mark most
    finite-data audits vacuous); practical mode carries user-scaled values
    while the documented inequality R < 2^-(N+11) zeta^2 k stays enforced.
    """

    sigma: float
    Q: int
    mode: str
    values: dict
    inequality_report: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def as_dict(self) -> dict:
        out = {"sigma": self.sigma, "Q": self.Q, "mode": self.mode}
        out["values"] = {k: (str(v) if not isinstance(v, (int, float)) else v)
                         for k, v in self.values.items()}
        out["inequalities"] = self.inequality_report
        return out


def constants(sigma: float, Q: int, mode: str = "practical", m: float | None = None,
              c0: float = 2.0, n1: int = 2, overrides: dict | None = None) -> ConstantsLedger:
    """Build the constants ledger for regularity parameter sigma.

    ``c0`` is the group's empirical projection bound and ``n1`` its first
    layer dimension; ``m`` defaults to Q - 1.  Practical overrides that break
    the recorded R-inequality raise a config error naming it.
    """
    if sigma < 1:
        raise ValueError("sigma must be at least 1")
    m = float(Q - 1) if m is None else float(m)
    if mode == "paper":
        import mpmath as mp

        mp.mp.prec = 200
        sig = mp.mpf(sigma)
        zeta = mp.mpf(2) ** (-50 * Q) / sig ** 2
        N = int(mp.floor(-4 * mp.log(zeta))) + 40
        C_b1 = mp.mpf(2) ** (2 + mp.mpf(3) / Q) * sig ** (mp.mpf(1) / Q)
        C_10 = mp.mpf(2) ** 20 * (n1 - 1) * C_b1 ** 2
        C_F = mp.mpf(2) ** (24 * Q) * sig
        C_VIB = C_F * (32 / zeta ** 2) ** m
        C_child = mp.mpf(2) ** (2 * mp.log(C_F, 2) / m + N) / zeta ** 2
        A0 = 2 * max(C_child, (7 * mp.log(2) - 2 * mp.log(zeta)) / (N * mp.log(2) - 2))
        k = mp.mpf(40) ** (N + 8) * c0 / zeta ** 2 * A0 ** 4 * (1 + mp.e ** (8 * N * A0 ** 2))
        R = mp.mpf(2) ** (-(N + 12)) * zeta ** 2 * k
        eta = mp.mpf(1) / Q
        delta_G = min(1 / (mp.mpf(2) ** (4 * (Q + 1)) * sig),
                      eta ** (Q + 1) * (1 - eta) ** (Q * Q - 1) / (32 * sig) ** (Q + 1))
        eps_3 = 1 / (mp.mpf(2) ** (2 * Q) * C_F ** 2 * (A0 * C_child) ** (Q - 1))
        eta_app = sig ** -2 * mp.mpf(2) ** (-40 * Q)
        # group-volume factors of eps_G are not known here; record the scale
        eps_G = mp.mpf(2) ** (3 * Q - 20) / ((A0 * k) ** (Q - 1) * c0 ** (Q - 2) * C_VIB ** 2)
        lam = mp.mpf(2)  # placeholder comparability factor in eps_e's scale
        eps_e = mp.mpf(0.5) * min(
            delta_G,
            eps_G ** Q / ((mp.mpf(2) ** 20 * C_b1 ** 2 * C_VIB ** 2 * A0 * k) ** (Q + 1)
                          * (1 + 2 * k / R * lam * (c0 + 1) ** 2) ** Q),
            ((k - 20) / (20 * k)) ** (Q + 1),
            1 / (2 * A0 ** 2 * C_10 + 2 * A0 * k * C_b1 * C_F * mp.e ** (8 * N * A0 ** 2)) ** (Q * (Q + 1)),
        )
        vals = {
            "zeta": zeta, "N": N, "C_b1": C_b1, "C_10": C_10, "C_F": C_F,
            "C_VIB": C_VIB, "C_child": C_child, "A0": A0, "k": k, "R": R,
            "eps_G": eps_G, "eps_e": eps_e, "eps_3": eps_3, "delta_G": delta_G,
            "eta": eta_app, "c0": c0, "m": m,
        }
        ineq = {
            "R < 2^-(N+11) zeta^2 k": bool(R < mp.mpf(2) ** (-(N + 11)) * zeta ** 2 * k),
            "N >= 40": N >= 40,
            "N log2 > 2": bool(N * mp.log(2) > 2),
        }
        return ConstantsLedger(sigma, Q, "paper", vals, ineq)

    if mode != "practical":
        raise ValueError("mode must be 'paper' or 'practical'")
    vals = dict(_PRACTICAL_DEFAULTS)
    if overrides:
        vals.update(overrides)
    vals.setdefault("m", m)
    vals.setdefault("c0", c0)
    zeta, N, k = vals["zeta"], int(vals["N"]), vals["k"]
    vals["N"] = N
    vals.setdefault("R", 2.0 ** (-(N + 12)) * zeta ** 2 * k)
    eta = 1.0 / Q
    vals.setdefault("delta_G", min(
        1.0 / (2.0 ** (4 * (Q + 1)) * sigma),
        eta ** (Q + 1) * (1 - eta) ** (Q * Q - 1) / (32 * sigma) ** (Q + 1)))
    vals.setdefault("C_b1", 2.0 ** (2 + 3.0 / Q) * sigma ** (1.0 / Q))
    vals.setdefault("C_10", 2.0 ** 20 * (n1 - 1) * vals["C_b1"] ** 2)
    vals.setdefault("C_VIB", vals["C_F"] * (32 / zeta ** 2) ** m)
    ineq = {
        "R < 2^-(N+11) zeta^2 k": vals["R"] < 2.0 ** (-(N + 11)) * zeta ** 2 * k,
        "N >= 40": N >= 40,
        "N log2 > 2": N * math.log(2) > 2,
    }
    if not ineq["R < 2^-(N+11) zeta^2 k"]:
        raise ValueError(
            "practical override violates ledger inequality 'R < 2^-(N+11) zeta^2 k'")
    return ConstantsLedger(sigma, Q, "practical", vals, ineq)


# ---------------------------------------------------------------------------
# level construction
# ---------------------------------------------------------------------------

def build_nets(mu: DiscreteMeasure, e_indices: np.ndarray, separation: float,
               seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Greedy maximal separated nets: E-favored points first, then the rest.

    Returns (core_net, full_net) as point-index arrays; core_net is a prefix
    of full_net.  Greedy order is ascending point id (each accepted point
    blocks its separation ball, which reproduces the sequential greedy), so
    the result is deterministic; ``seed`` is recorded for provenance only.
    """
    n = len(mu)
    in_e = np.zeros(n, dtype=bool)
    in_e[np.asarray(e_indices, dtype=int)] = True
    idx = mu.index()
    blocked = np.zeros(n, dtype=bool)
    chosen: list[int] = []

    def admit(order):
        for i in order:
            if blocked[i]:
                continue
            chosen.append(int(i))
            blocked[idx.ball(mu.points[i], separation, strict=True)] = True

    admit(np.nonzero(in_e)[0])
    core = len(chosen)
    admit(np.nonzero(~in_e)[0])
    full = np.array(chosen, dtype=int)
    return full[:core], full


def _corona_radii(separation: float, eta: float) -> np.ndarray:
    count = max(int(math.floor(1.0 / eta)) - 1, 1)
    return np.array([(1.0 + eta * p / math.floor(1.0 / eta)) * separation
                     for p in range(1, count + 1)])


def _choose_ball_radii_batch(mu: DiscreteMeasure, centers: np.ndarray,
                             separation: float, eta: float, xi: float, m: float):
    """Corona-selected radii for many centers: per center, the corona of
    half-width eta^2 separation with the least mass."""
    radii_grid = _corona_radii(separation, eta)
    idx = mu.index()
    corona_masses = np.empty((centers.shape[0], radii_grid.size))
    for p, r in enumerate(radii_grid):
        outer = idx.ball_masses(centers, r + eta ** 2 * separation, mu.weights)
        inner = idx.ball_masses(centers, max(r - eta ** 2 * separation, 0.0), mu.weights)
        corona_masses[:, p] = outer - inner
    pick = np.argmin(corona_masses, axis=1)
    radii = radii_grid[pick]
    corona = corona_masses[np.arange(centers.shape[0]), pick]
    top = (1.0 + eta) * separation
    growth_ok = idx.ball_masses(centers, top, mu.weights) <= xi * top ** m * (1 + 1e-9)
    return radii, corona, growth_ok


def choose_ball_radius(mu: DiscreteMeasure, x: np.ndarray, separation: float,
                       eta: float, xi: float, m: float) -> tuple[float, float, bool]:
    """Corona-selected ball radius in (separation, (1+eta) separation).

    Scans floor(1/eta) - 1 coronas of half-width eta^2 * separation and
    returns (radius, corona mass, growth_ok) with the least-mass corona;
    growth_ok flags whether the mass bound xi * r^m held at the top radius.
    """
    radii, corona, ok = _choose_ball_radii_batch(
        mu, np.atleast_2d(mu.spec.conform(x)), separation, eta, xi, m)
    return float(radii[0]), float(corona[0]), bool(ok[0])


@dataclass
class CubeLevel:
    """One net level: nets, chosen balls, cells, and the gluing map."""

    separation: float
    net: np.ndarray           # point indices of net members, in order
    core_count: int           # first core_count members came from E
    radii: np.ndarray
    corona_mass: np.ndarray
    owner: np.ndarray         # per-point cell owner (net slot) after gluing
    bprime_owner: np.ndarray  # per-point owner before gluing
    is_core_cell: np.ndarray  # net slots that kept a cell (gimel)
    glue_target: np.ndarray   # slot -> slot it was glued to (-1 if kept)
    defects: list = field(default_factory=list)


def build_partition_level(mu: DiscreteMeasure, e_indices: np.ndarray,
                          separation: float, ledger: ConstantsLedger,
                          xi: float, seed: int = 0) -> CubeLevel:
    """Cells of one level: first-fit ball cells, small core cells glued.

    Cells partition the support exactly; core (E-favored) net members whose
    raw cell has mass at least 32^-Q xi^-1 separation^m keep their cell, the
    others are glued to a kept core member within 4 separations (a defect is
    recorded and the nearest kept member used when none exists there).
    """
    spec = mu.spec
    eta = float(ledger["eta"]) if ledger.mode == "practical" else 1.0 / 8.0
    m = float(ledger["m"])
    core, net = build_nets(mu, e_indices, separation, seed)
    k = net.shape[0]
    defects: list[str] = []
    radii, corona, growth = _choose_ball_radii_batch(
        mu, mu.points[net], separation, eta, xi, m)
    for s in np.nonzero(~growth)[0]:
        defects.append(f"growth bound fails at net point {net[s]}")

    owner = np.full(len(mu), -1, dtype=int)
    idx = mu.index()
    cand_lists = idx._ball_candidates(mu.points[net], radii)
    for s in range(k):
        cand = np.asarray(cand_lists[s], dtype=int)
        cand = cand[owner[cand] == -1]
        if cand.size:
            d = G.distance(spec, mu.points[net[s]], mu.points[cand])
            owner[cand[d < radii[s]]] = s
    if np.any(owner == -1):
        # maximality guarantees coverage; numerical ties go to the nearest
        stray = np.nonzero(owner == -1)[0]
        d = G.distance(spec, mu.points[stray][:, None, :], mu.points[net][None, :, :])
        owner[stray] = np.argmin(d, axis=1)
        defects.append(f"{stray.size} points fell outside every ball")

    bprime_owner = owner.copy()
    cell_mass = np.zeros(k)
    np.add.at(cell_mass, owner, mu.weights)
    ncore = core.shape[0]
    thresh = 32.0 ** (-spec.Q) / xi * separation ** m
    is_core_cell = np.zeros(k, dtype=bool)
    is_core_cell[:ncore] = cell_mass[:ncore] >= thresh
    glue_target = np.full(k, -1, dtype=int)
    kept = np.nonzero(is_core_cell)[0]
    for s in range(ncore):
        if is_core_cell[s]:
            continue
        if kept.size == 0:
            defects.append(f"no kept core cell for slot {s}; cell kept as-is")
            is_core_cell[s] = True
            kept = np.nonzero(is_core_cell)[0]
            continue
        d = G.distance(spec, mu.points[net[s]], mu.points[net[kept]])
        j = int(np.argmin(d))
        if d[j] > 4.0 * separation * (1 + 1e-9):
            defects.append(
                f"slot {s}: nearest kept core member at {d[j]:.3g} > 4 sep; glued anyway")
        glue_target[s] = kept[j]
        owner[owner == s] = kept[j]

    return CubeLevel(separation, net, ncore, radii, corona, owner,
                     bprime_owner, is_core_cell, glue_target, defects)


# ---------------------------------------------------------------------------
# tree assembly
# ---------------------------------------------------------------------------

@dataclass
class Cube:
    level: int
    slot: int                 # net slot at its level
    net_point: int            # point index of the net member
    members: np.ndarray       # point indices
    mass: float
    center_idx: int           # point index of the chosen center
    inner_radius: float       # radius of the certified inner ball
    parent: int | None        # cube index within the previous layer
    meets_e: bool
    diam: float


@dataclass
class CubeTree:
    mu: DiscreteMeasure
    ledger: ConstantsLedger
    tau: float
    depth: int
    e_indices: np.ndarray
    levels: list[CubeLevel]
    layers: list[list[Cube]]
    anc: np.ndarray           # (levels, n_points) chain slot per level
    stabilized_extra: int     # extra levels built beyond depth
    tail_bound: float         # certified Hausdorff tail of the descent
    warnings: list = field(default_factory=list)

    def cube_containing(self, layer: int, point_index: int) -> Cube | None:
        slot = self.anc[layer, point_index]
        for q in self.layers[layer]:
            if q.slot == slot:
                return q
        return None

    def to_json(self) -> str:
        rec = {
            "tau": self.tau,
            "depth": self.depth,
            "ledger": self.ledger.as_dict(),
            "warnings": self.warnings,
            "layers": [
                [
                    {
                        "id": f"{li}/{q.slot}",
                        "layer": li,
                        "parent": (f"{li-1}/{self.layers[li-1][q.parent].slot}"
                                   if q.parent is not None else None),
                        "center": self.mu.points[q.center_idx].tolist(),
                        "mass": q.mass,
                        "diam": q.diam,
                        "members": q.members.tolist(),
                        "meets_e": q.meets_e,
                    }
                    for q in layer
                ]
                for li, layer in enumerate(self.layers)
            ],
        }
        return json.dumps(rec, indent=1, sort_keys=True)


def _chain_diameter(spec: GroupSpec, pts: np.ndarray, members: np.ndarray,
                    cap: int = 4096) -> float:
    sub = pts[members]
    if sub.shape[0] <= 1:
        return 0.0
    if sub.shape[0] > cap:
        mid = sub.mean(axis=0)
        far = 2.0 * float(np.max(G.distance(spec, mid, sub)))
        return far
    d = G.distance(spec, sub[:, None, :], sub[None, :, :])
    return float(d.max())


def _nearest_other_cube(nn_d: np.ndarray, nn_i: np.ndarray,
                        cube_of: np.ndarray) -> np.ndarray:
    """Per point: certified lower bound on the distance to the nearest point
    of a different cube, from a shared kNN table (exact when a foreign
    neighbor appears within the table, else the k-th distance)."""
    n, k = nn_i.shape
    other = nn_i >= 0
    other &= cube_of[np.clip(nn_i, 0, None)] != cube_of[:, None]
    has = other.any(axis=1)
    first = np.where(has, other.argmax(axis=1), k - 1)
    return nn_d[np.arange(n), first]


def _choose_center(members: np.ndarray, e_mask: np.ndarray,
                   d_other: np.ndarray) -> tuple[int, float]:
    """Member maximizing distance to the complement (preferring E members)."""
    cand = members[e_mask[members]] if np.any(e_mask[members]) else members
    j = int(np.argmax(d_other[cand]))
    return int(cand[j]), float(d_other[cand[j]])


def build_cube_tree(mu: DiscreteMeasure, xi: float, tau: float, depth: int,
                    ledger: ConstantsLedger, e_indices=None, seed: int = 0) -> CubeTree:
    """Assemble the nested cube layers for levels 0..depth.

    Levels use separations 2^(-N l) / tau.  Construction continues past
    ``depth`` until the separation falls below the minimal point spacing, at
    which point the chain descent is exact; the geometric tail bound of the
    remaining (identically zero) descent error is recorded.
    """
    spec = mu.spec
    N = int(ledger["N"])
    if e_indices is None:
        e_indices = np.arange(len(mu))
    e_indices = np.asarray(e_indices, dtype=int)
    warnings: list[str] = []
    spacing = M.median_spacing(mu)
    min_spacing = float(np.min(mu.index().nearest(mu.points, k=1, exclude_self=True)[0]))

    sep = lambda l: 2.0 ** (-N * l) / tau
    if sep(depth) < 2 * spacing:
        warnings.append(
            f"depth {depth} is below the resolution floor (sep {sep(depth):.3g} "
            f"< 2 x median spacing {2*spacing:.3g})")

    levels: list[CubeLevel] = []
    l = 0
    while True:
        levels.append(build_partition_level(mu, e_indices, sep(l), ledger, xi, seed))
        if l >= depth and (sep(l) < 0.5 * min_spacing
                           or len(levels[-1].net) == len(mu)):
            break
        if l > depth + 60:
            warnings.append("descent failed to stabilize after 60 extra levels")
            break
        l += 1

    total = len(levels)
    n = len(mu)
    anc = np.empty((total, n), dtype=int)
    # at the deepest level every point is its own net member
    deepest = levels[-1]
    slot_of_point = np.full(n, -1, dtype=int)
    slot_of_point[deepest.net] = np.arange(len(deepest.net))
    if np.any(slot_of_point < 0) or len(deepest.net) != n:
        # not fully stabilized: fall back to cell ownership as the chain seed
        anc[total - 1] = deepest.owner
    else:
        anc[total - 1] = deepest.owner  # singleton cells: owner == own slot
    for li in range(total - 2, -1, -1):
        # chain step: owner cell of the deeper net member's point
        deeper = levels[li + 1]
        here = levels[li]
        phi = here.owner[deeper.net]          # deeper slot -> this level slot
        anc[li] = phi[anc[li + 1]]

    tail = 2.0 * sep(total - 1) * 16.0 / (1 - 2.0 ** (-N))

    e_mask = np.zeros(n, dtype=bool)
    e_mask[e_indices] = True
    nn_d, nn_i = mu.index().nearest(mu.points, k=min(24, max(n - 1, 1)),
                                    exclude_self=True)
    layers: list[list[Cube]] = []
    slot_to_cube_prev: dict[int, int] = {}
    for li in range(min(depth, total - 1) + 1):
        slots = np.unique(anc[li])
        d_other = _nearest_other_cube(nn_d, nn_i, anc[li])
        layer: list[Cube] = []
        slot_to_cube: dict[int, int] = {}
        for s in slots:
            members = np.nonzero(anc[li] == s)[0]
            mass = float(mu.weights[members].sum())
            center, inner = _choose_center(members, e_mask, d_other)
            parent = None
            if li > 0:
                parent = slot_to_cube_prev.get(int(anc[li - 1][members[0]]))
            layer.append(Cube(
                level=li, slot=int(s), net_point=int(levels[li].net[s]),
                members=members, mass=mass, center_idx=center,
                inner_radius=inner, parent=parent,
                meets_e=bool(np.any(e_mask[members])),
                diam=_chain_diameter(spec, mu.points, members),
            ))
            slot_to_cube[int(s)] = len(layer) - 1
        layers.append(layer)
        slot_to_cube_prev = slot_to_cube

    return CubeTree(mu, ledger, tau, min(depth, total - 1), e_indices, levels,
                    layers, anc, total - 1 - depth, tail, warnings)


# ---------------------------------------------------------------------------
# axiom verification
# ---------------------------------------------------------------------------

def verify_cube_axioms(tree: CubeTree, audit_descent: bool = True) -> dict:
    """Per-cube audits of the partition, nesting, diameter, mass, boundary,
    inner-ball, and child-diameter properties, plus the descent Cauchy bound.

    Paper-mode constants make the mass/boundary checks vacuous at finite
    scales; this is reported rather than failed.
    """
    mu, ledger = tree.mu, tree.ledger
    spec = mu.spec
    N = int(ledger["N"])
    m = float(ledger["m"])
    zeta = float(ledger["zeta"]) if ledger.mode == "practical" else None
    total_mass = mu.total_mass
    report: dict = {"layers": [], "defects": [], "mode": ledger.mode}
    realized_cf = 0.0
    realized_cvib = 0.0
    mid = mu.points.mean(axis=0)
    extent = float(np.max(G.homogeneous_norm(spec, mu.points - mid)))
    vacuous = ledger.mode == "paper"

    for li, layer in enumerate(tree.layers):
        s = tree.levels[li].separation
        subextent = s <= 2 * extent
        masses = np.array([q.mass for q in layer])
        partition_ok = abs(masses.sum() - total_mass) < 1e-9 * max(total_mass, 1)
        nesting_ok = True
        if li > 0:
            # each fine class must sit inside a single coarse class
            _, first, inv = np.unique(tree.anc[li], return_index=True,
                                      return_inverse=True)
            coarse_of_class = tree.anc[li - 1][first]
            nesting_ok = bool(np.array_equal(tree.anc[li - 1], coarse_of_class[inv]))
        diam_bound = 32.0 * s
        diam_ok = all(q.diam <= diam_bound * (1 + 1e-9) for q in layer)
        mass_checks = []
        inner_checks = []
        child_checks = []
        for q in layer:
            if q.meets_e:
                if subextent:
                    ratio_hi = q.mass / s ** m
                    ratio_lo = s ** m / q.mass if q.mass > 0 else np.inf
                    realized_cf = max(realized_cf, ratio_hi, ratio_lo)
                if q.diam > 0 and q.mass > 0:
                    realized_cvib = max(realized_cvib, q.mass / q.diam ** m,
                                        q.diam ** m / q.mass)
                if not vacuous and subextent:
                    cf = float(ledger["C_F"])
                    mass_checks.append(s ** m / cf <= q.mass <= cf * s ** m)
                if zeta is not None:
                    need = zeta ** 2 * s / 2
                    inner_checks.append(q.inner_radius >= min(need, 0.59 * s))
            if li > 0 and q.parent is not None and q.meets_e:
                pq = tree.layers[li - 1][q.parent]
                if q.diam > 0:
                    child_checks.append(pq.diam / q.diam
                                        <= float(ledger["C_child"]) * (1 + 1e-9)
                                        if ledger.mode == "practical" else True)
        boundary = _boundary_audit(tree, li) if zeta is not None else None
        report["layers"].append({
            "layer": li,
            "cubes": len(layer),
            "partition_exact": bool(partition_ok),
            "nesting_exact": bool(nesting_ok),
            "diameter_ok": bool(diam_ok),
            "max_diam_ratio": max((q.diam / diam_bound for q in layer), default=0.0),
            "mass_bounds": ("vacuous (paper constants)" if vacuous
                            else (all(mass_checks) if mass_checks else True)),
            "inner_ball": (all(inner_checks) if inner_checks else True),
            "child_diam": (all(child_checks) if child_checks else True),
            "boundary_mass": boundary,
        })
        report["defects"].extend(tree.levels[li].defects)

    report["realized_C_F"] = realized_cf
    report["realized_C_VIB"] = realized_cvib
    report["tail_bound"] = tree.tail_bound
    if audit_descent:
        report["descent"] = _descent_audit(tree)
    report["all_pass"] = all(
        lay["partition_exact"] and lay["nesting_exact"] and lay["diameter_ok"]
        for lay in report["layers"])
    return report


def _boundary_audit(tree: CubeTree, li: int) -> dict:
    """phi(boundary(Q, zeta^2 s)) <= C_F zeta s^m per cube, measured."""
    mu, ledger = tree.mu, tree.ledger
    s = tree.levels[li].separation
    zeta = float(ledger["zeta"])
    delta = zeta ** 2 * s
    cube_of = tree.anc[li]
    idx = mu.index()
    near = idx.ball_batch(mu.points, delta, strict=False)
    boundary_mass = {}
    for p, nb in enumerate(near):
        if nb.size and np.any(cube_of[nb] != cube_of[p]):
            key = int(cube_of[p])
            boundary_mass[key] = boundary_mass.get(key, 0.0) + float(mu.weights[p])
    bound = float(ledger["C_F"]) * zeta * s ** float(ledger["m"])
    worst = max(boundary_mass.values(), default=0.0)
    return {"bound": bound, "worst": worst, "ok": bool(worst <= bound * (1 + 1e-9))}


def _stage_labels(tree: CubeTree, li: int, k: int) -> np.ndarray:
    """Per-point level-li slot of the depth-k descent stage D_{l,k}: points
    are grouped by the chain of their level-(li+k) cell owner."""
    if k == 0:
        return tree.levels[li].owner
    deep = min(li + k, len(tree.levels) - 1)
    chain = np.arange(len(tree.levels[deep].net))
    for j in range(deep, li, -1):
        phi = tree.levels[j - 1].owner[tree.levels[j].net]
        chain = phi[chain]
    return chain[tree.levels[deep].owner]


def _descent_audit(tree: CubeTree, slot_cap: int = 96) -> dict:
    """Measured Hausdorff drift between successive descent stages versus the
    geometric bound 16 * sep(l) * 2^(-N(k-1)); up to slot_cap largest slots
    are audited per (layer, stage)."""
    mu = tree.mu
    N = int(tree.ledger["N"])
    total = len(tree.levels)
    worst_ratio = 0.0
    checks = 0
    for li in range(min(len(tree.layers), total - 1)):
        s = tree.levels[li].separation
        labels_prev = _stage_labels(tree, li, 0)
        for k in range(1, min(total - li, 3) + 1):
            labels_cur = _stage_labels(tree, li, k)
            bound = 16.0 * s * 2.0 ** (-N * (k - 1))
            slots, counts = np.unique(labels_prev, return_counts=True)
            order = np.argsort(-counts, kind="stable")[:slot_cap]
            for s_id in slots[order]:
                prev_pts = np.nonzero(labels_prev == s_id)[0]
                cur_pts = np.nonzero(labels_cur == s_id)[0]
                if prev_pts.size == 0 or cur_pts.size == 0:
                    continue
                dh = M.hausdorff_distance(mu.spec, mu.points[prev_pts],
                                          mu.points[cur_pts])
                worst_ratio = max(worst_ratio, dh / bound)
                checks += 1
            labels_prev = labels_cur
    return {"checks": checks, "worst_ratio": worst_ratio, "ok": worst_ratio <= 1 + 1e-9}


def cube_flatness(tree: CubeTree, layer: int, cube_index: int,
                  cfg=None) -> dict:
    """Translated flatness of the measure and its E-restriction at the cube
    center, at scale 2 k diam(Q), clamped to the data extent when needed."""
    from . import flatness as F

    q = tree.layers[layer][cube_index]
    mu = tree.mu
    k = float(tree.ledger["k"])
    center = mu.points[q.center_idx]
    scale = 2.0 * k * max(q.diam, tree.levels[layer].separation * 1e-3)
    extent = float(np.max(G.distance(mu.spec, center, mu.points)))
    clamped = False
    if scale > extent:
        scale = extent
        clamped = True
    cfg = cfg or F.SearchConfig().fast_profile()
    rep_full = F.flat_distance_translated(mu, center, scale, cfg)
    e_mu = mu.restrict(tree.e_indices)
    rep_e = F.flat_distance_translated(e_mu, center, scale, cfg)
    return {
        "alpha": rep_full.value + rep_e.value,
        "scale": scale,
        "clamped": clamped,
        "normal": rep_full.normal,
        "theta": rep_full.theta,
    }
