"""Weighted sparsity primitives.

Weights ``w`` are real vectors with ``w_i >= 1``. A signal ``x`` is weighted
``k``-sparse when the weighted cardinality of its support,
``sum(w_i**2 for x_i != 0)``, is at most ``k``.

Indices are 0-based throughout the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

__all__ = [
    "DEFAULT_ZERO_TOL",
    "DEFAULT_SUPPORT_CAP",
    "EnumerationCapError",
    "SupportSet",
    "as_weights",
    "as_signal",
    "weighted_card",
    "weighted_l0",
    "weighted_l1",
    "is_weighted_k_sparse",
    "enumerate_weighted_supports",
    "count_weighted_supports",
    "best_weighted_k_term",
    "sigma_k",
    "global_sign_error",
    "normalize_global_sign",
]

DEFAULT_ZERO_TOL = 1e-9
DEFAULT_SUPPORT_CAP = 24

# Relative slack on ``w(S) <= k`` so that e.g. 1.2**2 + 1.2**2 <= 2.88 holds.
_CARD_SLACK = 1e-12


class EnumerationCapError(ValueError):
    """An enumeration would exceed its configured size cap."""

    def __init__(self, what: str, size: int, cap: int, estimate: int):
        self.size = size
        self.cap = cap
        self.estimate = estimate
        super().__init__(
            f"{what}: size {size} exceeds enumeration cap {cap} "
            f"(would enumerate up to {estimate} candidates)"
        )


def as_weights(w, n: int | None = None) -> np.ndarray:
    """Validate a weight vector and return it as a float array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("weights must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 1.0):
        bad = int(np.flatnonzero(w < 1.0)[0])
        raise ValueError(
            f"weights must satisfy w_i >= 1 (w[{bad}] = {float(w[bad])!r}); "
            "weighted sparsity is only defined for weights of at least one"
        )
    if n is not None and w.size != n:
        raise ValueError(f"dimension mismatch: {w.size} weights for length-{n} signal")
    return w


def as_signal(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be a 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal entries must be finite")
    if n is not None and x.size != n:
        raise ValueError(f"dimension mismatch: signal length {x.size}, expected {n}")
    return x


def _fits(card: float, k: float) -> bool:
    return card <= k + _CARD_SLACK * max(1.0, abs(k))


def _zero_threshold(x: np.ndarray, zero_tol: float) -> float:
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    if x.size == 0:
        return 0.0
    return zero_tol * float(np.max(np.abs(x)))


@dataclass(frozen=True)
class SupportSet:
    """Sorted index set together with its weighted cardinality."""

    indices: tuple[int, ...]
    weighted_card: float

    @classmethod
    def from_indices(cls, indices, w) -> "SupportSet":
        w = np.asarray(w, dtype=float)
        idx = tuple(sorted(set(int(i) for i in indices)))
        if idx and (idx[0] < 0 or idx[-1] >= w.size):
            raise ValueError(f"support indices out of range for N={w.size}")
        return cls(idx, weighted_card(idx, w))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def weighted_card(indices, w) -> float:
    """Weighted cardinality ``w(S) = sum_{i in S} w_i**2``."""
    w = np.asarray(w, dtype=float)
    return math.fsum(float(w[i]) ** 2 for i in indices)


def weighted_l0(x, w, zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    """Weighted cardinality of the support of `x`.

    Entries with ``|x_i| <= zero_tol * max|x|`` count as zero; pass
    ``zero_tol=0`` for the exact ``|x_i| > 0`` test.
    """
    x = as_signal(x)
    w = as_weights(w, x.size)
    thr = _zero_threshold(x, zero_tol)
    return math.fsum(w[np.abs(x) > thr] ** 2)


def weighted_l1(x, w) -> float:
    x = as_signal(x)
    w = as_weights(w, x.size)
    return float(np.dot(w, np.abs(x)))


def is_weighted_k_sparse(x, w, k: float, zero_tol: float = DEFAULT_ZERO_TOL) -> bool:
    return _fits(weighted_l0(x, w, zero_tol), k)


def count_weighted_supports(n: int) -> int:
    """Upper bound on the number of supports an enumeration visits."""
    return 2 ** n


def enumerate_weighted_supports(
    w, k: float, *, maximal: bool = False, cap: int = DEFAULT_SUPPORT_CAP
) -> Iterator[SupportSet]:
    """Yield every support ``S`` with ``w(S) <= k`` exactly once.

    Supports come out in include-first depth-first order over indices
    ``0..N-1``. With ``maximal=True`` only inclusion-maximal supports are
    produced (no index can be added without exceeding ``k``).

    Raises
    ------
    EnumerationCapError
        If ``N > cap``.
    """
    w = as_weights(w)
    n = w.size
    if k < 0:
        raise ValueError("sparsity budget k must be nonnegative")
    if n > cap:
        raise EnumerationCapError("support enumeration", n, cap, count_weighted_supports(n))
    sq = [float(v) ** 2 for v in w]
    # suffix sums of squared weights, for the maximality prune
    tail = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        tail[i] = tail[i + 1] + sq[i]

    chosen: list[int] = []

    def rec(i: int, card: float, min_excl: float) -> Iterator[SupportSet]:
        if i == n:
            if maximal and _fits(card + min_excl, k):
                return
            yield SupportSet(tuple(chosen), math.fsum(sq[j] for j in chosen))
            return
        if _fits(card + sq[i], k):
            chosen.append(i)
            yield from rec(i + 1, card + sq[i], min_excl)
            chosen.pop()
        # excluding i: for a maximal result the final card must exceed k - sq[i]
        if maximal and _fits(card + tail[i + 1] + sq[i], k):
            return
        yield from rec(i + 1, card, min(min_excl, sq[i]))

    yield from rec(0, 0.0, math.inf)


def _support_value(values: np.ndarray, indices) -> float:
    return math.fsum(float(values[i]) for i in indices)


def _knapsack_dp(values, sq, k, denominator) -> tuple[int, ...]:
    """0/1 knapsack over integer costs; ties go to the lexicographically
    smallest index tuple (item i is kept whenever that stays optimal)."""
    costs = [int(round(s * denominator)) for s in sq]
    cap = int(math.floor(k * denominator + 1e-9))
    n = len(values)
    # best[i][c]: best value using items i..n-1 with capacity c
    best = np.zeros((n + 1, cap + 1))
    for i in range(n - 1, -1, -1):
        best[i] = best[i + 1]
        c0 = costs[i]
        if c0 <= cap and values[i] > 0:
            take = best[i + 1][: cap + 1 - c0] + values[i]
            best[i][c0:] = np.maximum(best[i + 1][c0:], take)
    chosen = []
    c = cap
    for i in range(n):
        c0 = costs[i]
        if c0 <= c and values[i] > 0:
            take = values[i] + best[i + 1][c - c0]
            if take >= best[i + 1][c] - 1e-12 * max(1.0, abs(take)):
                chosen.append(i)
                c -= c0
    return tuple(chosen)


def _knapsack_bnb(values, sq, k) -> tuple[int, ...]:
    """Exact 0/1 knapsack by include-first branch and bound in index order.

    Only strictly better leaves (compared by correctly rounded sums) replace
    the incumbent, so the first optimum found is the lexicographically
    smallest one.
    """
    n = len(values)
    items = [i for i in range(n) if values[i] > 0 and _fits(sq[i], k)]
    if not items:
        return ()
    ratio_order = sorted(items, key=lambda i: (-values[i] / sq[i], i))
    best_val = -1.0
    best_set: tuple[int, ...] = ()
    chosen: list[int] = []

    def bound(pos: int, card: float, val: float) -> float:
        # fractional relaxation over the items not yet decided
        start = items[pos]
        room = k - card
        b = val
        for i in ratio_order:
            if i < start:
                continue
            if sq[i] <= room:
                room -= sq[i]
                b += values[i]
            else:
                b += values[i] * room / sq[i]
                break
        return b

    def rec(pos: int, card: float, val: float) -> None:
        nonlocal best_val, best_set
        if pos == len(items):
            exact = _support_value(values, chosen)
            if exact > best_val:
                best_val = exact
                best_set = tuple(chosen)
            return
        if bound(pos, card, val) < best_val - 1e-9 * max(1.0, best_val):
            return
        i = items[pos]
        if _fits(card + sq[i], k):
            chosen.append(i)
            rec(pos + 1, card + sq[i], val + values[i])
            chosen.pop()
        rec(pos + 1, card, val)

    rec(0, 0.0, 0.0)
    return best_set


def best_weighted_k_term(
    x, w, k: float, *, denominator: int | None = None
) -> tuple[SupportSet, float]:
    """Best weighted k-term approximation of `x`.

    Solves the knapsack ``max sum_{i in S} w_i |x_i|`` subject to
    ``w(S) <= k`` exactly and returns the support together with
    ``sigma_k(x)_{w,1} = ||x||_{w,1} - sum_{i in S} w_i |x_i|``.

    Parameters
    ----------
    x, w : array_like
        Signal and weights of equal length.
    k : float
        Weighted sparsity budget.
    denominator : int, optional
        If every ``w_i**2 * denominator`` is an integer, the knapsack is
        solved by dynamic programming over that integer grid; otherwise
        (or when omitted) by branch and bound.

    Notes
    -----
    Among optimal supports the lexicographically smallest index tuple is
    returned. Indices with ``x_i = 0`` are never selected.
    """
    x = as_signal(x)
    w = as_weights(w, x.size)
    if k < 0:
        raise ValueError("sparsity budget k must be nonnegative")
    values = w * np.abs(x)
    sq = [float(v) ** 2 for v in w]
    use_dp = False
    if denominator is not None:
        if denominator < 1:
            raise ValueError("denominator must be a positive integer")
        scaled = np.asarray(sq) * denominator
        use_dp = bool(np.all(np.abs(scaled - np.round(scaled)) <= 1e-9 * np.maximum(1, scaled)))
    if use_dp:
        idx = _knapsack_dp(values, sq, k, denominator)
    else:
        idx = _knapsack_bnb(values, sq, k)
    kept = _support_value(values, idx)
    sigma = max(0.0, math.fsum(values) - kept)
    return SupportSet(idx, math.fsum(sq[i] for i in idx)), sigma


def sigma_k(x, w, k: float) -> float:
    """Best weighted k-term approximation error ``sigma_k(x)_{w,1}``."""
    return best_weighted_k_term(x, w, k)[1]


def global_sign_error(xhat, x0) -> float:
    """``min(||xhat - x0||_2, ||xhat + x0||_2)``."""
    xhat = as_signal(xhat)
    x0 = as_signal(x0, xhat.size)
    return float(min(np.linalg.norm(xhat - x0), np.linalg.norm(xhat + x0)))


def normalize_global_sign(x, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    """Canonical representative of ``{x, -x}``: first significant entry positive."""
    x = as_signal(x)
    thr = _zero_threshold(x, zero_tol)
    nz = np.flatnonzero(np.abs(x) > thr)
    if nz.size == 0 or x[nz[0]] > 0:
        return x.copy()
    return -x
