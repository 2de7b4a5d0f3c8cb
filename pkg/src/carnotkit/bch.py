"""Baker-Campbell-Hausdorff products for graded nilpotent Lie algebras.

The group product in exponential coordinates of the first kind is
``p * q = Z(p, q)`` where ``Z`` is the BCH series.  For a nilpotent algebra
of step ``s`` the series terminates at degree ``s``, so the truncated Dynkin
expansion is exact and serves both as the general-purpose product and as an
oracle for the closed forms.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "dynkin_terms",
    "bracket",
    "evaluate_word",
    "bch_product",
    "check_graded_structure",
]


@lru_cache(maxsize=None)
def dynkin_terms(step: int) -> tuple[tuple[float, tuple[int, ...]], ...]:
    """Dynkin expansion of the BCH series truncated at total degree ``step``.

    Returns a tuple of (coefficient, word) pairs, where a word is a tuple of
    letters (0 = first argument, 1 = second argument) and stands for the
    right-nested bracket [w0, [w1, [... [w_{L-2}, w_{L-1}]]]].  Words whose
    last two letters coincide are dropped (their bracket vanishes), and
    coefficients of identical words are merged.
    """
    coeffs: dict[tuple[int, ...], float] = {}

    def blocks(remaining: int, blocks_so_far: list[tuple[int, int]]):
        if blocks_so_far:
            m = len(blocks_so_far)
            degree = sum(r + s for r, s in blocks_so_far)
            word = []
            denom = m * degree
            for r, s in blocks_so_far:
                word.extend([0] * r + [1] * s)
                denom *= math.factorial(r) * math.factorial(s)
            sign = -1.0 if m % 2 == 0 else 1.0
            key = tuple(word)
            coeffs[key] = coeffs.get(key, 0.0) + sign / denom
        if remaining == 0:
            return
        for r in range(remaining + 1):
            for s in range(remaining - r + 1):
                if r + s == 0:
                    continue
                blocks(remaining - r - s, blocks_so_far + [(r, s)])

    blocks(step, [])

    kept = []
    for word, c in sorted(coeffs.items()):
        if abs(c) < 1e-300:
            continue
        if len(word) >= 2 and word[-1] == word[-2]:
            continue
        kept.append((c, word))
    return tuple(kept)


def bracket(C: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Lie bracket [u, v] from the structure tensor C[i, j, k]."""
    return np.einsum("...i,...j,ijk->...k", u, v, C)


def evaluate_word(C: np.ndarray, word: tuple[int, ...], p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Right-nested bracket of a 0/1 word evaluated at vectors (p, q)."""
    letters = (p, q)
    acc = letters[word[-1]]
    for idx in word[-2::-1]:
        acc = bracket(C, letters[idx], acc)
    return acc


def bch_product(C: np.ndarray, step: int, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact BCH product for a nilpotent algebra of the given step."""
    out = np.zeros(np.broadcast(p, q).shape, dtype=float)
    for coeff, word in dynkin_terms(step):
        out += coeff * evaluate_word(C, word, p, q)
    return out


def check_graded_structure(C: np.ndarray, layer_of: np.ndarray, step: int) -> None:
    """Validate antisymmetry and the grading [V_a, V_b] <= V_{a+b}.

    ``layer_of[i]`` is the 1-based layer of basis vector i.  Raises
    ``ValueError`` on any violation; brackets beyond layer ``step`` must
    vanish identically.
    """
    n = C.shape[0]
    if C.shape != (n, n, n):
        raise ValueError(f"structure tensor must be cubic, got {C.shape}")
    if not np.allclose(C, -np.swapaxes(C, 0, 1), atol=1e-14):
        raise ValueError("structure constants are not antisymmetric")
    for i in range(n):
        for j in range(n):
            target = layer_of[i] + layer_of[j]
            nz = np.nonzero(np.abs(C[i, j]) > 1e-14)[0]
            for k in nz:
                if target > step:
                    raise ValueError(
                        f"bracket [e{i}, e{j}] nonzero but lands beyond step {step}"
                    )
                if layer_of[k] != target:
                    raise ValueError(
                        f"bracket [e{i}, e{j}] has a component in layer "
                        f"{layer_of[k]}, expected layer {target}"
                    )
