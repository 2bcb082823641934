"""Weighted l1 recovery from magnitude-only measurements.

The feasible set ``{x : || |Ax| - y ||_2 <= eps}`` is a union over sign
patterns ``s`` of the convex sets ``{x : ||Ax - s*y||_2 <= eps}``, so the
nonconvex problem is solved exactly for small ``m`` by solving one weighted
basis pursuit per pattern and keeping the global minimizers. Patterns are
taken modulo a global sign flip.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .cvxsolve import SolverConfig, Status, WeightedBasisPursuit, as_matrix
from .simplex import simplex_standard_form
from .wcore import (
    DEFAULT_ZERO_TOL,
    EnumerationCapError,
    as_signal,
    as_weights,
    global_sign_error,
    normalize_global_sign,
    weighted_l1,
)

__all__ = [
    "DEFAULT_PATTERN_CAP",
    "AllPatternsInfeasible",
    "PhaselessObservation",
    "PhaselessSolveReport",
    "canonical_sign_patterns",
    "solve_phaseless_exact",
    "solve_phaseless_altmin",
    "verify_unique_recovery",
    "is_unique_l1_minimizer",
]

DEFAULT_PATTERN_CAP = 16
DEFAULT_DEDUP_TOL = 1e-6


class AllPatternsInfeasible(RuntimeError):
    """No sign pattern admits a point within ``eps`` of the magnitudes."""


@dataclass(frozen=True)
class PhaselessObservation:
    y: np.ndarray
    eps: float = 0.0

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.ndim != 1 or y.size < 1:
            raise ValueError("magnitudes y must be a non-empty 1-D vector")
        if not np.all(np.isfinite(y)) or np.any(y < 0):
            raise ValueError("magnitudes y must be finite and nonnegative")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ValueError("noise radius eps must be finite and nonnegative")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "eps", float(self.eps))

    @classmethod
    def from_signal(cls, A, x0, eps: float = 0.0) -> "PhaselessObservation":
        return cls(np.abs(as_matrix(A) @ as_signal(x0)), eps)


@dataclass
class PhaselessSolveReport:
    solutions: list[np.ndarray]
    objective: float
    patterns_tried: int
    patterns_feasible: int
    status: str  # "ExactEnumeration" | "Heuristic"
    patterns: list[tuple[int, ...]] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def multiplicity(self) -> int:
        return len(self.solutions)


def canonical_sign_patterns(y, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    """All sign patterns modulo global sign, as a ``(P, m)`` array of +-1.

    Coordinates where ``y`` is (numerically) zero are pinned to +1, as is the
    first nonzero coordinate. Row ``p`` assigns ``-1`` to the ``j``-th
    remaining free coordinate iff bit ``j`` of ``p`` is set.
    """
    y = np.asarray(y, dtype=float)
    thr = zero_tol * float(np.max(y)) if y.size else 0.0
    free = np.flatnonzero(y > thr)[1:]
    P = 1 << free.size
    S = np.ones((P, y.size))
    bits = (np.arange(P)[:, None] >> np.arange(free.size)[None, :]) & 1
    S[:, free] = 1 - 2 * bits
    return S


def _check_cap(m: int, cap: int) -> None:
    if m > cap:
        raise EnumerationCapError("sign-pattern enumeration", m, cap, 1 << (m - 1))


def _class_distance(u, v) -> float:
    return min(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v)))


def _dedup(xs, dedup_tol):
    kept: list[int] = []
    for i, x in enumerate(xs):
        if not any(_class_distance(x, xs[j]) <= dedup_tol * (1.0 + np.linalg.norm(x)) for j in kept):
            kept.append(i)
    return kept


def solve_phaseless_exact(
    A,
    obs: PhaselessObservation,
    w,
    cfg: SolverConfig | None = None,
    *,
    cap: int = DEFAULT_PATTERN_CAP,
    dedup_tol: float = DEFAULT_DEDUP_TOL,
    zero_tol: float = DEFAULT_ZERO_TOL,
    workers: int | None = 1,
) -> PhaselessSolveReport:
    """Exact weighted l1 phaseless recovery by sign-pattern enumeration.

    Solves ``min ||x||_{w,1}`` subject to ``|| |Ax| - y ||_2 <= eps`` (with
    equality ``|Ax| = y`` when ``eps = 0``) and returns every global
    minimizer found, one representative per ``{x, -x}`` class.

    Parameters
    ----------
    A : array_like or MeasurementEnsemble
        ``m x N`` real measurement matrix, ``m <= cap``.
    obs : PhaselessObservation
        Magnitudes and constraint radius.
    w : array_like
        Weights, ``w_i >= 1``.
    cfg : SolverConfig, optional
        Tolerances for the per-pattern convex solves.
    dedup_tol : float
        Two solutions are the same class when
        ``min(||u - v||, ||u + v||) <= dedup_tol * (1 + ||u||)``.
    workers : int, optional
        Threads for the pattern sweep; results do not depend on it.

    Raises
    ------
    EnumerationCapError
        If ``m > cap``.
    AllPatternsInfeasible
        If no pattern is feasible.
    """
    cfg = cfg or SolverConfig()
    A = as_matrix(A)
    m, n = A.shape
    y = obs.y
    if y.size != m:
        raise ValueError(f"dimension mismatch: {y.size} magnitudes for {m} measurements")
    _check_cap(m, cap)
    eps = obs.eps
    bp = WeightedBasisPursuit(A, w, cfg)
    S = canonical_sign_patterns(y, zero_tol)
    B = S * y
    # one batched range test prunes most patterns before any solve
    R = B - (B @ bp._Q) @ bp._Q.T
    dist = np.linalg.norm(R, axis=1)
    if eps == 0:
        limit = cfg.feas_tol * (1.0 + float(np.linalg.norm(y)))
    else:
        limit = eps + cfg.feas_tol
    candidates = np.flatnonzero(dist <= limit)

    def solve(p):
        return bp.solve_denoise(B[p], eps)

    reports = ordered_map(solve, candidates, workers)
    found = [
        (int(p), r) for p, r in zip(candidates, reports)
        if r.status in (Status.OPTIMAL, Status.MAX_ITERS)
    ]
    if not found:
        raise AllPatternsInfeasible(
            f"none of {len(S)} sign patterns is feasible within eps={eps!r}"
        )
    ibest = min(range(len(found)), key=lambda i: (found[i][1].objective, found[i][0]))
    best = found[ibest][1]
    base = cfg.opt_tol * (1.0 + best.objective)
    cap_slack = dedup_tol * (1.0 + best.objective)
    winners = [
        (p, r) for p, r in found
        if r.objective - best.objective
        <= base + min(r.duality_gap_estimate + best.duality_gap_estimate, cap_slack)
    ]
    xs = [normalize_global_sign(r.x) for _, r in winners]
    keep = _dedup(xs, dedup_tol)
    return PhaselessSolveReport(
        solutions=[xs[i] for i in keep],
        objective=best.objective,
        patterns_tried=len(S),
        patterns_feasible=len(found),
        status="ExactEnumeration",
        patterns=[tuple(int(v) for v in S[winners[i][0]]) for i in keep],
        info={
            "eps": eps,
            "dedup_tol": dedup_tol,
            "zero_tol": zero_tol,
            "max_statuses": sorted({r.status.value for _, r in found}),
        },
    )


def solve_phaseless_altmin(
    A,
    obs: PhaselessObservation,
    w,
    init=None,
    iters: int = 50,
    cfg: SolverConfig | None = None,
) -> PhaselessSolveReport:
    """Alternating sign / weighted basis pursuit heuristic.

    Alternates ``s <- sign(A x)`` (zero maps to +1) with
    ``x <- argmin ||x||_{w,1} s.t. ||A x - s*y|| <= eps``. While the current
    pattern is infeasible the x-step falls back to the least-squares fit of
    ``s*y``; if that reproduces the same infeasible pattern, the sign of the
    row with the largest residual is flipped. Stops at a feasible sign-pattern
    fixed point, on revisiting a pattern, or after `iters` rounds.

    `init` may be a signal, an integer seed for a Gaussian start, or None for
    the least-squares fit of the all-plus pattern.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    cfg = cfg or SolverConfig()
    A = as_matrix(A)
    m, n = A.shape
    y = obs.y
    if y.size != m:
        raise ValueError(f"dimension mismatch: {y.size} magnitudes for {m} measurements")
    eps = obs.eps
    bp = WeightedBasisPursuit(A, w, cfg)
    if init is None:
        x = bp.least_squares(y)
    elif isinstance(init, (int, np.integer)):
        x = np.random.default_rng(int(init)).standard_normal(n)
    else:
        x = as_signal(init, n).copy()

    history: list[float] = []
    best_x = None
    best_obj = math.inf
    feasible = 0
    tried = 0
    seen: set[bytes] = set()
    s = np.where(A @ x >= 0, 1.0, -1.0)
    for it in range(1, iters + 1):
        key = (s * s[0]).tobytes()
        if key in seen:
            break
        seen.add(key)
        tried += 1
        b = s * y
        rep = bp.solve_denoise(b, eps)
        if rep.status is Status.INFEASIBLE:
            x = bp.least_squares(b)
            history.append(math.inf)
            s_next = np.where(A @ x >= 0, 1.0, -1.0)
            if np.array_equal(s_next, s):
                s_next[int(np.argmax(np.abs(A @ x - b)))] *= -1.0
            s = s_next
            continue
        if rep.status is Status.NUMERICAL_FAILURE:
            raise RuntimeError(f"inner solver failed at iteration {it}: {rep.status.value}")
        feasible += 1
        x = rep.x
        obj = rep.objective
        if history and math.isfinite(history[-1]):
            slack = cfg.opt_tol * (1.0 + history[-1]) + rep.duality_gap_estimate + 1e-9 * (1.0 + obj)
            assert obj <= history[-1] + slack, "altmin objective increased"
        history.append(obj)
        if obj < best_obj:
            best_obj, best_x = obj, x
        s_next = np.where(A @ x >= 0, 1.0, -1.0)
        if np.array_equal(s_next, s):
            break
        s = s_next
    if best_x is None:
        raise AllPatternsInfeasible("alternating minimization never reached a feasible sign pattern")
    sol = normalize_global_sign(best_x)
    pattern = np.where(A @ sol >= 0, 1, -1)
    return PhaselessSolveReport(
        solutions=[sol],
        objective=best_obj,
        patterns_tried=tried,
        patterns_feasible=feasible,
        status="Heuristic",
        patterns=[tuple(int(v) for v in pattern)],
        info={"objective_history": history, "eps": eps},
    )


def is_unique_l1_minimizer(A, x0, w, *, zero_tol: float = DEFAULT_ZERO_TOL, margin: float = 1e-9) -> bool:
    """Whether `x0` is the unique minimizer of ``||x||_{w,1}`` s.t. ``Ax = Ax0``.

    Uses the standard certificate: with ``T = supp(x0)``, ``A_T`` must be
    injective and some ``lam`` must satisfy ``A_T^T lam = w_T * sign(x0_T)``
    with ``|A_j^T lam| < w_j`` strictly off ``T``. The best achievable
    ``max_j |A_j^T lam| / w_j`` is found by a small LP.
    """
    A = as_matrix(A)
    m, n = A.shape
    x0 = as_signal(x0, n)
    w = as_weights(w, n)
    thr = zero_tol * float(np.max(np.abs(x0))) if n else 0.0
    T = np.flatnonzero(np.abs(x0) > thr)
    Tc = np.setdiff1d(np.arange(n), T)
    AT = A[:, T]
    if T.size:
        sv = np.linalg.svd(AT, compute_uv=False)
        if T.size > m or sv[-1] <= 1e-10 * max(1.0, float(np.linalg.norm(A, 2))):
            return False
    if Tc.size == 0:
        return True
    c = w[T] * np.sign(x0[T])
    if T.size:
        lam_p = np.linalg.lstsq(AT.T, c, rcond=None)[0]
        U, s, Vt = np.linalg.svd(AT.T)
        Z = Vt[T.size:].T  # basis of null(A_T^T)
    else:
        lam_p = np.zeros(m)
        Z = np.eye(m)
    g = (A[:, Tc].T @ lam_p) / w[Tc]
    Bm = (A[:, Tc].T @ Z) / w[Tc][:, None]
    if Z.shape[1] == 0:
        return float(np.max(np.abs(g))) < 1.0 - margin
    # min t  s.t.  -t <= g + B a <= t ; a = a+ - a-, slack variables
    k, d = Bm.shape
    rows = []
    rhs = []
    for i in range(k):
        sl = [0.0] * (2 * k)
        sl[i] = 1.0
        rows.append(list(Bm[i]) + list(-Bm[i]) + [-1.0] + sl)
        rhs.append(-g[i])
        sl = [0.0] * (2 * k)
        sl[k + i] = 1.0
        rows.append(list(-Bm[i]) + list(Bm[i]) + [-1.0] + sl)
        rhs.append(g[i])
    cost = [0.0] * (2 * d) + [1.0] + [0.0] * (2 * k)
    res = simplex_standard_form(cost, rows, rhs, exact=False)
    if res.status != "optimal":
        return False
    return float(res.objective) < 1.0 - margin


def verify_unique_recovery(
    A,
    x0,
    w,
    tol: float = 1e-6,
    cfg: SolverConfig | None = None,
    *,
    cap: int = DEFAULT_PATTERN_CAP,
) -> bool:
    """Check that ``argmin{||x||_{w,1} : |Ax| = |Ax0|} = {x0, -x0}``.

    The exact solver's solution set must consist of the single class of
    `x0` (within ``tol`` relative) at objective ``||x0||_{w,1}``; in
    addition `x0` must be the unique minimizer within its own sign pattern,
    which the enumeration alone cannot see when a pattern has a continuum
    of minimizers.
    """
    A = as_matrix(A)
    x0 = as_signal(x0, A.shape[1])
    if not np.any(x0):
        raise ValueError("x0 must be nonzero")
    rep = solve_phaseless_exact(A, PhaselessObservation.from_signal(A, x0), w, cfg, cap=cap)
    target = weighted_l1(x0, w)
    if abs(rep.objective - target) > tol * (1.0 + target):
        return False
    scale = 1.0 + float(np.linalg.norm(x0))
    if any(global_sign_error(s, x0) > tol * scale for s in rep.solutions):
        return False
    return is_unique_l1_minimizer(A, x0, w)
