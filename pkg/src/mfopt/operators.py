"""Permutation variation operators shared by both engines.

Cut positions are 1-based and inclusive, matching the city-label convention.
Both operators are pure: randomness comes from the caller (see
``random_cut_pair``), which keeps runs reproducible and the operators
trivially safe under any parallel schedule.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

__all__ = ["OperatorError", "order_crossover", "two_opt_move",
           "two_opt_improvement", "random_cut_pair"]


class OperatorError(ValueError):
    """Invalid operator input (mismatched parents, bad cut positions)."""


def _as_perm(arr, what: str) -> np.ndarray:
    a = np.ascontiguousarray(arr, dtype=np.int64)
    if a.ndim != 1 or a.size == 0:
        raise OperatorError(f"{what} must be a non-empty 1-D sequence")
    n = a.size
    if a.min() < 1 or a.max() > n or not (np.bincount(a, minlength=n + 1)[1:] == 1).all():
        raise OperatorError(f"{what} is not a permutation of 1..{n}")
    return a


def _check_cuts(cuts, n: int) -> tuple[int, int]:
    lo, hi = int(cuts[0]), int(cuts[1])
    if not 1 <= lo <= hi <= n:
        raise OperatorError(f"cut pair {cuts!r} outside 1 <= lo <= hi <= {n}")
    return lo, hi


def order_crossover(p1, p2, cuts) -> np.ndarray:
    """Davis order crossover (OX).

    The child keeps ``p1[lo..hi]`` in place; the remaining positions are
    filled, starting after ``hi`` and wrapping around, with the elements of
    ``p2`` taken in cyclic order starting after ``hi``, skipping values
    already present. ``cuts = (lo, hi)``, 1-based inclusive.
    """
    a = _as_perm(p1, "p1")
    b = _as_perm(p2, "p2")
    if a.size != b.size:
        raise OperatorError(f"parent lengths differ: {a.size} vs {b.size}")
    lo, hi = _check_cuts(cuts, a.size)
    child = np.empty_like(a)
    seen = np.zeros(a.size + 1, dtype=np.bool_)
    _kernels.ox_fill(a, b, lo - 1, hi - 1, child, seen)
    return child


def two_opt_move(tour, cuts) -> np.ndarray:
    """One 2-opt move: reverse ``tour[lo..hi]``, everything else unchanged.

    ``lo == hi`` is a no-op (a copy is still returned). Applying the same
    move twice restores the input.
    """
    t = _as_perm(tour, "tour")
    lo, hi = _check_cuts(cuts, t.size)
    out = t.copy()
    _kernels.reverse_segment(out, lo - 1, hi - 1)
    return out


def two_opt_improvement(tour, distance_matrix, origin: int = 1) -> np.ndarray:
    """Apply the first strictly improving 2-opt move, if one exists.

    Segment starts are scanned cyclically from the 1-based ``origin`` row,
    each with every possible segment end; the first reversal that shortens
    the closed tour under ``distance_matrix`` is applied. Returns a new
    tour; an unchanged copy means the input is 2-opt optimal. This is the
    engines' mutation; ``two_opt_move`` is the blind single-move variant.
    """
    t = _as_perm(tour, "tour")
    dist = np.ascontiguousarray(distance_matrix, dtype=np.int64)
    if dist.shape != (t.size, t.size):
        raise OperatorError("distance matrix does not match the tour length")
    if not 1 <= origin <= t.size:
        raise OperatorError(f"origin {origin} outside 1..{t.size}")
    out = t.copy()
    if t.size >= 2:
        _kernels.first_improving_move(out, t.size, dist, (origin - 1) % (t.size - 1))
    return out


def random_cut_pair(rng: np.random.Generator, n: int) -> tuple[int, int]:
    """Two distinct positions drawn uniformly without replacement, ordered.

    Returns 1-based ``(lo, hi)`` with ``lo < hi``; needs ``n >= 2``.
    """
    if n < 2:
        raise OperatorError("need at least two positions to cut")
    a = int(rng.integers(1, n + 1))
    b = int(rng.integers(1, n))
    if b >= a:
        b += 1
    return (a, b) if a < b else (b, a)
