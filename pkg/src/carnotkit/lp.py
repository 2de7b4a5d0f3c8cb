"""Linear-programming engines for the bounded-Lipschitz dual problem.

The problem: maximize sum_i c_i f_i subject to |f_i - f_j| <= d_ij over a
constraint graph and 0 <= f_i <= cap_i.  Its dual is an uncapacitated
min-cost flow with a boundary node (disposal at cost cap_i, free supply), so
the production engine is a network simplex whose node potentials recover the
optimal f directly.  A dense tableau simplex (float or exact rational
arithmetic) serves as the reference and oracle engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "simplex_box_lp",
    "rational_box_lp",
    "network_simplex",
    "LipschitzProblem",
    "solve_lipschitz_dual",
]

_TOL = 1e-11


# ---------------------------------------------------------------------------
# dense tableau simplex (shared implementation for float and Fraction data)
# ---------------------------------------------------------------------------

def _tableau_simplex(G, h, c, exact: bool):
    """max c.x s.t. G x <= h, x >= 0 with h >= 0; slack basis start.

    Returns (x, objective).  Dantzig pricing with a Bland fallback after a
    stall for floats; pure Bland for exact arithmetic.
    """
    m, n = len(G), len(c)
    zero = Fraction(0) if exact else 0.0
    tol = zero if exact else 1e-12

    T = [list(G[i]) + [zero] * m + [h[i]] for i in range(m)]
    for i in range(m):
        T[i][n + i] = Fraction(1) if exact else 1.0
    obj = [-ci for ci in c] + [zero] * m + [zero]
    basis = list(range(n, n + m))

    stall = 0
    last_val = None
    for _ in range(200000):
        enter = -1
        bland = exact or stall > 2 * (m + n)
        if bland:
            for j in range(n + m):
                if obj[j] < -tol:
                    enter = j
                    break
        else:
            best = -tol
            for j in range(n + m):
                if obj[j] < best:
                    best = obj[j]
                    enter = j
        if enter < 0:
            break
        leave, ratio = -1, None
        for i in range(m):
            a = T[i][enter]
            if a > tol:
                r = T[i][-1] / a
                if ratio is None or r < ratio or (r == ratio and basis[i] < basis[leave]):
                    ratio, leave = r, i
        if leave < 0:
            raise ArithmeticError("LP unbounded; box constraints missing?")
        piv = T[leave][enter]
        T[leave] = [v / piv for v in T[leave]]
        for i in range(m):
            if i != leave and T[i][enter] != zero:
                f = T[i][enter]
                T[i] = [vi - f * vl for vi, vl in zip(T[i], T[leave])]
        if obj[enter] != zero:
            f = obj[enter]
            obj = [vi - f * vl for vi, vl in zip(obj, T[leave])]
        basis[leave] = enter
        if not exact:
            val = obj[-1]
            if last_val is not None and val <= last_val + 1e-15:
                stall += 1
            else:
                stall = 0
            last_val = val
    else:
        raise ArithmeticError("simplex iteration limit reached")

    x = [zero] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = T[i][-1]
    return x, obj[-1]


def _box_rows(n, pairs, dists, caps):
    rows, rhs = [], []
    for (i, j), d in zip(pairs, dists):
        row = [0.0] * n
        row[i], row[j] = 1.0, -1.0
        rows.append(row)
        rhs.append(d)
        row = [0.0] * n
        row[i], row[j] = -1.0, 1.0
        rows.append(row)
        rhs.append(d)
    for i in range(n):
        row = [0.0] * n
        row[i] = 1.0
        rows.append(row)
        rhs.append(caps[i])
    return rows, rhs


def simplex_box_lp(c, pairs, dists, caps) -> tuple[np.ndarray, float]:
    """Float dense simplex for the Lipschitz box LP (reference engine)."""
    n = len(c)
    rows, rhs = _box_rows(n, pairs, dists, caps)
    x, val = _tableau_simplex(rows, rhs, list(c), exact=False)
    return np.array(x), float(val)


def rational_box_lp(c, pairs, dists, caps) -> tuple[list[Fraction], Fraction]:
    """Exact rational simplex oracle; inputs converted exactly from floats."""
    n = len(c)
    fc = [Fraction(v) for v in c]
    rows, rhs = _box_rows(n, pairs, dists, caps)
    frows = [[Fraction(v) for v in row] for row in rows]
    frhs = [Fraction(v) for v in rhs]
    return _tableau_simplex(frows, frhs, fc, exact=True)


# ---------------------------------------------------------------------------
# network simplex on the flow form
# ---------------------------------------------------------------------------

def _network_simplex_core(tail, head, cost, supply, root, init_arc,
                          max_pivots):
    """Primal network simplex for uncapacitated min-cost flow.

    The initial spanning tree is the star at ``root`` given by
    ``init_arc[v]``; strongly-feasible leaving rule; switches to Bland's rule
    if the pivot budget is half spent.  Returns (flow, potential, pivots,
    status) with status 0 = optimal, 1 = pivot limit hit.
    """
    V = supply.shape[0]
    A = tail.shape[0]
    parent = np.full(V, -1, np.int64)
    pred = np.full(V, -1, np.int64)
    depth = np.zeros(V, np.int64)
    first_child = np.full(V, -1, np.int64)
    next_sib = np.full(V, -1, np.int64)
    prev_sib = np.full(V, -1, np.int64)
    pot = np.zeros(V)
    flow = np.zeros(A)
    in_tree = np.zeros(A, np.bool_)

    for v in range(V):
        if v == root:
            continue
        a = init_arc[v]
        in_tree[a] = True
        parent[v] = root
        pred[v] = a
        depth[v] = 1
        ns = first_child[root]
        next_sib[v] = ns
        if ns != -1:
            prev_sib[ns] = v
        first_child[root] = v
        prev_sib[v] = -1
        if tail[a] == v:
            flow[a] = supply[v]
            pot[v] = -cost[a]
        else:
            flow[a] = -supply[v]
            pot[v] = cost[a]

    stack = np.empty(V, np.int64)
    pivots = 0
    status = 0
    tol = 1e-12 * (np.max(np.abs(cost)) + 1.0)

    # altering-list pricing: a periodic full scan gathers negative arcs
    # sorted by reduced cost; minors pop best-first with re-verification
    cand_cap = 4096
    cand = np.empty(cand_cap, np.int64)
    cand_rc = np.empty(cand_cap, np.float64)
    cand_n = 0
    cand_pos = 0
    scan_pos = 0

    while True:
        bland = pivots > max_pivots // 2
        enter = -1
        if bland:
            for a in range(A):
                if not in_tree[a]:
                    rc = cost[a] + pot[tail[a]] - pot[head[a]]
                    if rc < -tol:
                        enter = a
                        break
        else:
            while enter == -1:
                # minor: best verified candidate within a lookahead window
                while cand_pos < cand_n:
                    hi = cand_pos + 24
                    if hi > cand_n:
                        hi = cand_n
                    best = -tol
                    bi = -1
                    for ci in range(cand_pos, hi):
                        a = cand[ci]
                        if in_tree[a]:
                            continue
                        rc = cost[a] + pot[tail[a]] - pot[head[a]]
                        if rc < best:
                            best = rc
                            bi = ci
                    if bi >= 0:
                        enter = cand[bi]
                        cand[bi] = cand[cand_pos]
                        cand_pos += 1
                        break
                    cand_pos = hi
                if enter != -1:
                    break
                # major: refill by scanning all arcs once from scan_pos
                cand_n = 0
                cand_pos = 0
                scanned = 0
                pos = scan_pos
                while scanned < A and cand_n < cand_cap:
                    a = pos
                    if not in_tree[a]:
                        rc = cost[a] + pot[tail[a]] - pot[head[a]]
                        if rc < -tol:
                            cand[cand_n] = a
                            cand_rc[cand_n] = rc
                            cand_n += 1
                    pos += 1
                    if pos >= A:
                        pos = 0
                    scanned += 1
                scan_pos = pos
                if cand_n == 0:
                    break
                order = np.argsort(cand_rc[:cand_n])
                cand[:cand_n] = cand[:cand_n][order]
        if enter == -1:
            break
        if pivots >= max_pivots:
            status = 1
            break
        pivots += 1

        u = tail[enter]
        v = head[enter]
        # join of u and v
        x = u
        y = v
        while x != y:
            if depth[x] >= depth[y]:
                x = parent[x]
            else:
                y = parent[y]
        join = x

        # leaving arc: u-side strict, v-side non-strict (strongly feasible)
        theta = np.inf
        leave = -1
        leave_on_u = False
        z = u
        while z != join:
            a = pred[z]
            if tail[a] == z:  # cycle direction parent->z, arc loses flow
                if flow[a] < theta:
                    theta = flow[a]
                    leave = a
                    leave_on_u = True
            z = parent[z]
        z = v
        while z != join:
            a = pred[z]
            if head[a] == z:  # cycle direction z->parent, arc loses flow
                if flow[a] <= theta:
                    theta = flow[a]
                    leave = a
                    leave_on_u = False
            z = parent[z]
        if leave == -1:
            status = 2  # unbounded: impossible with nonnegative costs
            break

        # apply flow change along the cycle
        if theta > 0.0:
            flow[enter] += theta
            z = u
            while z != join:
                a = pred[z]
                if tail[a] == z:
                    flow[a] -= theta
                else:
                    flow[a] += theta
                z = parent[z]
            z = v
            while z != join:
                a = pred[z]
                if head[a] == z:
                    flow[a] -= theta
                else:
                    flow[a] += theta
                z = parent[z]
        else:
            flow[enter] = flow[enter]  # degenerate pivot

        # locate the cut node (z_out): the node whose pred is the leaving arc
        z_out = tail[leave]
        if parent[z_out] == -1 or pred[z_out] != leave:
            z_out = head[leave]
        # w = endpoint of entering arc inside the cut subtree
        w = u if leave_on_u else v
        attach = v if leave_on_u else u

        in_tree[leave] = False
        in_tree[enter] = True

        # re-root the cut subtree at w by reversing the path w -> z_out
        x = w
        new_parent = attach
        new_arc = enter
        while True:
            op = parent[x]
            oa = pred[x]
            # detach x from its sibling list
            if op != -1:
                if prev_sib[x] != -1:
                    next_sib[prev_sib[x]] = next_sib[x]
                else:
                    first_child[op] = next_sib[x]
                if next_sib[x] != -1:
                    prev_sib[next_sib[x]] = prev_sib[x]
            parent[x] = new_parent
            pred[x] = new_arc
            ns = first_child[new_parent]
            next_sib[x] = ns
            if ns != -1:
                prev_sib[ns] = x
            first_child[new_parent] = x
            prev_sib[x] = -1
            if x == z_out:
                break
            new_parent = x
            new_arc = oa
            x = op

        # potential shift for the re-hung subtree
        if tail[enter] == w:
            new_pot = pot[attach] - cost[enter]
        else:
            new_pot = pot[attach] + cost[enter]
        delta = new_pot - pot[w]
        top = 0
        stack[top] = w
        top += 1
        while top > 0:
            top -= 1
            s = stack[top]
            pot[s] += delta
            depth[s] = depth[parent[s]] + 1
            ch = first_child[s]
            while ch != -1:
                stack[top] = ch
                top += 1
                ch = next_sib[ch]

    return flow, pot, pivots, status


_network_simplex_jit = None


def _get_network_simplex():
    global _network_simplex_jit
    if _network_simplex_jit is None:
        try:
            from numba import njit

            _network_simplex_jit = njit(cache=True)(_network_simplex_core)
        except ImportError:
            _network_simplex_jit = _network_simplex_core
    return _network_simplex_jit


def network_simplex(tail, head, cost, supply, root, init_arc, max_pivots=None):
    """Solve uncapacitated min-cost flow; see _network_simplex_core."""
    tail = np.ascontiguousarray(tail, np.int64)
    head = np.ascontiguousarray(head, np.int64)
    cost = np.ascontiguousarray(cost, np.float64)
    supply = np.ascontiguousarray(supply, np.float64)
    init_arc = np.ascontiguousarray(init_arc, np.int64)
    if max_pivots is None:
        max_pivots = 200 * supply.size + 20 * tail.size + 10000
    solver = _get_network_simplex()
    return solver(tail, head, cost, supply, int(root), init_arc, int(max_pivots))


# ---------------------------------------------------------------------------
# Lipschitz dual problem assembly
# ---------------------------------------------------------------------------

@dataclass
class LipschitzProblem:
    """Shared geometry of one bounded-Lipschitz solve: a constraint graph
    over nodes with ceilings; objective weights vary per query."""

    n_nodes: int
    pairs: np.ndarray      # (E, 2) int
    dists: np.ndarray      # (E,) float
    caps: np.ndarray       # (n,) float

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.dists = np.asarray(self.dists, dtype=float)
        self.caps = np.asarray(self.caps, dtype=float)
        if np.any(self.dists < 0) or np.any(self.caps < 0):
            raise ValueError("distances and ceilings must be nonnegative")

    def _flow_arrays(self):
        n, E = self.n_nodes, self.pairs.shape[0]
        b = n  # boundary node index
        tail = np.empty(2 * E + 2 * n, np.int64)
        head = np.empty_like(tail)
        cost = np.empty(2 * E + 2 * n, np.float64)
        tail[:E], head[:E], cost[:E] = self.pairs[:, 0], self.pairs[:, 1], self.dists
        tail[E:2 * E], head[E:2 * E], cost[E:2 * E] = self.pairs[:, 1], self.pairs[:, 0], self.dists
        idx = np.arange(n)
        tail[2 * E:2 * E + n], head[2 * E:2 * E + n] = idx, b
        cost[2 * E:2 * E + n] = self.caps
        tail[2 * E + n:], head[2 * E + n:] = b, idx
        cost[2 * E + n:] = 0.0
        return tail, head, cost, b, 2 * E

    def solve_orientation(self, weights: np.ndarray) -> tuple[float, np.ndarray, dict]:
        """max sum w_i f_i over the feasible box; returns (value, f, info)."""
        weights = np.asarray(weights, dtype=float)
        n = self.n_nodes
        tail, head, cost, b, off = self._flow_arrays()
        supply = np.concatenate([weights, [-weights.sum()]])
        init_arc = np.empty(n + 1, np.int64)
        pos = weights >= 0
        init_arc[:n][pos] = off + np.nonzero(pos)[0]
        init_arc[:n][~pos] = off + n + np.nonzero(~pos)[0]
        flow, pot, pivots, status = network_simplex(tail, head, cost, supply, b, init_arc)
        f = pot[b] - pot[:n]
        f = np.clip(f, 0.0, self.caps)
        primal = float(np.dot(flow, cost))
        dual = float(np.dot(weights, f))
        rc = cost + pot[tail] - pot[head]
        info = {
            "pivots": int(pivots),
            "status": int(status),
            "gap": abs(primal - dual) / max(abs(primal), 1.0),
            "min_reduced_cost": float(rc.min()),
            "cs_residual": float(np.max(np.abs(rc * flow))) if flow.size else 0.0,
        }
        return primal, f, info


def solve_lipschitz_dual(problem: LipschitzProblem, weights: np.ndarray) -> tuple[float, np.ndarray, dict]:
    """Bounded-Lipschitz value: max over both signed orientations."""
    val_p, f_p, info_p = problem.solve_orientation(np.asarray(weights, dtype=float))
    val_m, f_m, info_m = problem.solve_orientation(-np.asarray(weights, dtype=float))
    if val_p >= val_m:
        info = dict(info_p)
        info["orientation"] = +1
        info["gap"] = max(info_p["gap"], 0.0)
        return val_p, f_p, info
    info = dict(info_m)
    info["orientation"] = -1
    return val_m, f_m, info
