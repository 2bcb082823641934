"""Weighted basis pursuit solvers.

Two problems are handled::

    minimize ||x||_{w,1}  subject to  A x = b                 (solve_wbp_eq)
    minimize ||x||_{w,1}  subject to  ||A x - b||_2 <= eps    (solve_wbp_denoise)

Both are solved by ADMM (alternating the weighted soft threshold with a
projection onto the affine set or the l2 ball). Iterates are periodically
*polished*: the support and signs of the current iterate are frozen, the
resulting closed-form candidate is computed and accepted only if it comes
with a dual certificate, in which case the returned point is optimal to
rounding error. Otherwise ADMM runs until its residuals (or the certified
duality gap) fall below tolerance.

`lp_reference_solve` solves the equality problem as a linear program in exact
rational arithmetic and serves as an independent oracle.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .simplex import simplex_standard_form
from .wcore import as_signal, as_weights, weighted_l1

__all__ = [
    "Status",
    "MeasurementEnsemble",
    "SolverConfig",
    "ConvexSolveReport",
    "WeightedBasisPursuit",
    "as_matrix",
    "solve_wbp_eq",
    "solve_wbp_denoise",
    "lp_reference_solve",
    "weighted_soft_threshold",
    "project_l2_ball",
]

LP_ORACLE_CAP = 16


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERS = "MaxIters"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class MeasurementEnsemble:
    """A real measurement matrix plus where it came from."""

    A: np.ndarray
    generator: str = "explicit"
    seed: int | None = None
    normalization: str = "none"

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("measurement matrix must be 2-D with m, N >= 1")
        if not np.all(np.isfinite(A)):
            raise ValueError("measurement matrix entries must be finite")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def meta(self) -> dict:
        return {"generator": self.generator, "seed": self.seed, "normalization": self.normalization}


def as_matrix(A) -> np.ndarray:
    if isinstance(A, MeasurementEnsemble):
        return A.A
    return MeasurementEnsemble(A).A


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    max_iters: int = 50_000
    penalty: float = 1.0
    adaptive: bool = True
    polish_every: int = 20

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.opt_tol > 0 and self.penalty > 0):
            raise ValueError("solver tolerances and penalty must be positive")
        if self.max_iters < 1 or self.polish_every < 1:
            raise ValueError("max_iters and polish_every must be >= 1")


@dataclass
class ConvexSolveReport:
    x: np.ndarray
    objective: float
    feasibility_residual: float
    status: Status
    iterations: int
    duality_gap_estimate: float
    polished: bool = False
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def weighted_soft_threshold(v, w, lam: float) -> np.ndarray:
    """Proximal map of ``lam * ||.||_{w,1}``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam * np.asarray(w, dtype=float), 0.0)


def project_l2_ball(r, center, eps: float) -> np.ndarray:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    r = np.asarray(r, dtype=float)
    center = np.asarray(center, dtype=float)
    d = r - center
    nd = np.linalg.norm(d)
    if nd <= eps:
        return r.copy()
    return center + (eps / nd) * d


def _soft(v, thr):
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


class WeightedBasisPursuit:
    """Factorizations of ``A`` shared by repeated solves with the same matrix
    and weights (the phaseless sign sweep calls this thousands of times)."""

    def __init__(self, A, w, cfg: SolverConfig | None = None):
        self.A = as_matrix(A)
        m, n = self.A.shape
        self.w = as_weights(w, n)
        self.cfg = cfg or SolverConfig()
        U, s, Vt = np.linalg.svd(self.A, full_matrices=False)
        tol = max(m, n) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        r = int(np.sum(s > tol))
        self.rank = r
        self.full_column_rank = r == n
        self._Q = U[:, :r]
        self._pinv = (Vt[:r].T / s[:r]) @ U[:, :r].T
        self._null_proj = np.eye(n) - Vt[:r].T @ Vt[:r]
        self._norm = float(s[0]) if s.size else 0.0
        self._M = None

    # -- helpers ---------------------------------------------------------

    def range_residual(self, b) -> float:
        """Distance from ``b`` to ``range(A)``."""
        b = np.asarray(b, dtype=float)
        return float(np.linalg.norm(b - self._Q @ (self._Q.T @ b)))

    def least_squares(self, b) -> np.ndarray:
        return self._pinv @ np.asarray(b, dtype=float)

    def _objective(self, x) -> float:
        return float(np.dot(self.w, np.abs(x)))

    def _report(self, x, status, iters, gap, resid, polished=False, **info):
        return ConvexSolveReport(
            x=x,
            objective=self._objective(x),
            feasibility_residual=float(resid),
            status=status,
            iterations=iters,
            duality_gap_estimate=float(max(gap, 0.0)),
            polished=polished,
            info=info,
        )

    def _dual_value_eq(self, b, lam) -> float:
        """``b^T lam`` after scaling ``lam`` into ``{|A^T lam| <= w}``."""
        g = np.abs(self.A.T @ lam)
        with np.errstate(divide="ignore"):
            t = min(1.0, float(np.min(np.where(g > 0, self.w / g, np.inf))))
        return t * float(b @ lam)

    def _dual_value_ball(self, b, eps, lam) -> float:
        g = np.abs(self.A.T @ lam)
        with np.errstate(divide="ignore"):
            t = min(1.0, float(np.min(np.where(g > 0, self.w / g, np.inf))))
        return t * (float(b @ lam) - eps * float(np.linalg.norm(lam)))

    def _injective_columns(self, T) -> np.ndarray | None:
        AT = self.A[:, T]
        if AT.shape[1] > AT.shape[0]:
            return None
        s = np.linalg.svd(AT, compute_uv=False)
        if s[-1] <= 1e-10 * max(1.0, self._norm):
            return None
        return AT

    def _dual_ok(self, lam, T) -> bool:
        g = np.abs(self.A.T @ lam)
        mask = np.ones(self.A.shape[1], dtype=bool)
        mask[T] = False
        return bool(np.all(g[mask] <= self.w[mask] * (1 + 1e-10) + 1e-12))

    # -- equality constrained --------------------------------------------

    def solve_eq(self, b) -> ConvexSolveReport:
        cfg = self.cfg
        b = np.asarray(b, dtype=float)
        m, n = self.A.shape
        if b.shape != (m,):
            raise ValueError(f"dimension mismatch: b has shape {b.shape}, expected ({m},)")
        bnorm = float(np.linalg.norm(b))
        resid = self.range_residual(b)
        q = self.least_squares(b)
        if resid > cfg.feas_tol * (1.0 + bnorm):
            return self._report(q, Status.INFEASIBLE, 0, math.inf, resid)
        if bnorm == 0.0:
            return self._report(np.zeros(n), Status.OPTIMAL, 0, 0.0, 0.0)
        if self.full_column_rank:
            # the feasible set is the single point A^+ b
            return self._report(q, Status.OPTIMAL, 0, 0.0, float(np.linalg.norm(self.A @ q - b)))

        w = self.w
        P = self._null_proj
        scale = max(float(np.max(np.abs(q))), 1e-300)
        rho = cfg.penalty * float(np.mean(w)) / scale
        x = q.copy()
        z = q.copy()
        u = np.zeros(n)
        best_gap = math.inf
        for it in range(1, cfg.max_iters + 1):
            x = P @ (z - u) + q
            z_old = z
            z = _soft(x + u, w / rho)
            u += x - z
            if it % 10 and it != cfg.max_iters:
                continue
            r_pri = float(np.linalg.norm(x - z))
            r_dual = rho * float(np.linalg.norm(z - z_old))
            lam = self._pinv.T @ (rho * u)
            obj = self._objective(x)
            gap = obj - self._dual_value_eq(b, lam)
            best_gap = min(best_gap, gap)
            if it % cfg.polish_every == 0:
                pol = self._polish_eq(b, z, lam)
                if pol is not None:
                    xp, gp = pol
                    return self._report(
                        xp, Status.OPTIMAL, it, gp, float(np.linalg.norm(self.A @ xp - b)), polished=True
                    )
            tol_p = cfg.opt_tol * (1.0 + max(np.linalg.norm(x), np.linalg.norm(z)))
            tol_d = cfg.opt_tol * (1.0 + rho * np.linalg.norm(u))
            if (r_pri <= tol_p and r_dual <= tol_d) or gap <= cfg.opt_tol * (1.0 + obj):
                return self._report(x, Status.OPTIMAL, it, gap, float(np.linalg.norm(self.A @ x - b)))
            if cfg.adaptive:
                if r_pri > 10 * r_dual:
                    rho *= 2.0
                    u /= 2.0
                elif r_dual > 10 * r_pri:
                    rho /= 2.0
                    u *= 2.0
        return self._report(
            x, Status.MAX_ITERS, cfg.max_iters, best_gap, float(np.linalg.norm(self.A @ x - b))
        )

    def _polish_eq(self, b, z, lam0):
        T = np.flatnonzero(z)
        if T.size == 0:
            return None
        AT = self._injective_columns(T)
        if AT is None:
            return None
        xT, *_ = np.linalg.lstsq(AT, b, rcond=None)
        if np.linalg.norm(AT @ xT - b) > self.cfg.feas_tol * (1.0 + np.linalg.norm(b)):
            return None
        sig = np.sign(z[T])
        if np.any(np.sign(xT) != sig):
            return None
        c = self.w[T] * sig
        # closest multiplier to the ADMM estimate with A_T^T lam = c
        lam = lam0 + np.linalg.pinv(AT.T) @ (c - AT.T @ lam0)
        if not self._dual_ok(lam, T):
            return None
        x = np.zeros(self.A.shape[1])
        x[T] = xT
        gap = self._objective(x) - float(b @ lam)
        return x, abs(gap)

    # -- l2-ball constrained ---------------------------------------------

    def solve_denoise(self, b, eps: float) -> ConvexSolveReport:
        cfg = self.cfg
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        if eps == 0:
            return self.solve_eq(b)
        b = np.asarray(b, dtype=float)
        m, n = self.A.shape
        if b.shape != (m,):
            raise ValueError(f"dimension mismatch: b has shape {b.shape}, expected ({m},)")
        A = self.A
        w = self.w
        bnorm = float(np.linalg.norm(b))
        if bnorm <= eps:
            return self._report(np.zeros(n), Status.OPTIMAL, 0, 0.0, 0.0)
        dist = self.range_residual(b)
        x_ls = self.least_squares(b)
        if dist > eps + cfg.feas_tol:
            return self._report(x_ls, Status.INFEASIBLE, 0, math.inf, dist - eps)

        if self._M is None:
            self._M = np.linalg.inv(np.eye(n) + A.T @ A)
        M = self._M
        scale = max(float(np.max(np.abs(x_ls))), 1e-300)
        rho = cfg.penalty * float(np.mean(w)) / scale
        x = x_ls.copy()
        z1 = x.copy()
        z2 = project_l2_ball(A @ x, b, eps)
        u1 = np.zeros(n)
        u2 = np.zeros(m)
        best_gap = math.inf
        for it in range(1, cfg.max_iters + 1):
            x = M @ (z1 - u1 + A.T @ (z2 - u2))
            Ax = A @ x
            z1_old, z2_old = z1, z2
            z1 = _soft(x + u1, w / rho)
            z2 = project_l2_ball(Ax + u2, b, eps)
            u1 += x - z1
            u2 += Ax - z2
            if it % 10 and it != cfg.max_iters:
                continue
            r_pri = math.hypot(np.linalg.norm(x - z1), np.linalg.norm(Ax - z2))
            r_dual = rho * math.hypot(np.linalg.norm(z1 - z1_old), np.linalg.norm(A.T @ (z2 - z2_old)))
            lam = -rho * u2
            xf = self._restore_ball(x, x_ls, b, eps)
            obj = self._objective(xf)
            gap = obj - self._dual_value_ball(b, eps, lam)
            best_gap = min(best_gap, gap)
            if it % cfg.polish_every == 0:
                pol = self._polish_ball(b, eps, z1)
                if pol is not None:
                    xp, gp = pol
                    return self._report(
                        xp, Status.OPTIMAL, it, gp, self._ball_violation(xp, b, eps), polished=True
                    )
            tol_p = cfg.opt_tol * (1.0 + max(np.linalg.norm(x), np.linalg.norm(z1)))
            tol_d = cfg.opt_tol * (1.0 + rho * math.hypot(np.linalg.norm(u1), np.linalg.norm(u2)))
            if (r_pri <= tol_p and r_dual <= tol_d) or gap <= cfg.opt_tol * (1.0 + obj):
                return self._report(xf, Status.OPTIMAL, it, gap, self._ball_violation(xf, b, eps))
            if cfg.adaptive:
                if r_pri > 10 * r_dual:
                    rho *= 2.0
                    u1 /= 2.0
                    u2 /= 2.0
                elif r_dual > 10 * r_pri:
                    rho /= 2.0
                    u1 *= 2.0
                    u2 *= 2.0
        xf = self._restore_ball(x, x_ls, b, eps)
        return self._report(xf, Status.MAX_ITERS, cfg.max_iters, best_gap, self._ball_violation(xf, b, eps))

    def _ball_violation(self, x, b, eps) -> float:
        return max(0.0, float(np.linalg.norm(self.A @ x - b)) - eps)

    def _restore_ball(self, x, x_ls, b, eps):
        """Move `x` toward the least-squares point until ``||Ax - b|| <= eps``."""
        A = self.A

        def viol(t):
            return float(np.linalg.norm(A @ (x + t * (x_ls - x)) - b)) - eps

        if viol(0.0) <= 0:
            return x
        if viol(1.0) > 0:
            return x_ls.copy()
        # ||r + t d||^2 = eps^2 has its smaller root at the first feasible t
        r = A @ x - b
        d = A @ x_ls - b - r
        a = float(d @ d)
        bb = 2.0 * float(r @ d)
        c = float(r @ r) - eps * eps
        disc = bb * bb - 4 * a * c
        lo, hi = 0.0, 1.0
        if a > 0 and disc >= 0:
            t = (-bb - math.sqrt(disc)) / (2 * a)
            for cand in (t, t * (1 + 1e-12) + 1e-16, t * (1 + 1e-9) + 1e-13):
                if 0.0 <= cand <= 1.0 and viol(cand) <= 0:
                    return x + cand * (x_ls - x)
            if 0.0 < t < 1.0:
                lo = t
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if viol(mid) <= 0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-16:
                break
        return x + hi * (x_ls - x)

    def _polish_ball(self, b, eps, z):
        T = np.flatnonzero(z)
        if T.size == 0:
            return None
        AT = self._injective_columns(T)
        if AT is None:
            return None
        sig = np.sign(z[T])
        c = self.w[T] * sig
        G = AT.T @ AT
        xls = np.linalg.solve(G, AT.T @ b)
        p_perp = b - AT @ xls
        gc = np.linalg.solve(G, c)
        d = AT @ gc
        slack = eps * eps - float(p_perp @ p_perp)
        dd = float(d @ d)
        if slack <= 0 or dd == 0:
            return None
        s = math.sqrt(slack / dd)  # 1/mu
        xT = xls - s * gc
        if np.any(np.sign(xT) != sig):
            return None
        lam = p_perp / s + d
        if not self._dual_ok(lam, T):
            return None
        x = np.zeros(self.A.shape[1])
        x[T] = xT
        if np.linalg.norm(self.A @ x - b) > eps:
            # rounding pushed the boundary point just outside; pull it in
            xr = self._restore_ball(x, self.least_squares(b), b, eps)
            if np.linalg.norm(xr - x) > 1e-9 * (1.0 + np.linalg.norm(x)):
                return None
            x = xr
        gap = self._objective(x) - (float(b @ lam) - eps * float(np.linalg.norm(lam)))
        return x, abs(gap)


def solve_wbp_eq(A, b, w, cfg: SolverConfig | None = None) -> ConvexSolveReport:
    """Minimize ``||x||_{w,1}`` subject to ``A x = b``.

    Returns a report with status ``Infeasible`` when ``b`` lies farther than
    ``feas_tol * (1 + ||b||)`` from ``range(A)``.
    """
    return WeightedBasisPursuit(A, w, cfg).solve_eq(b)


def solve_wbp_denoise(A, b, w, eps: float, cfg: SolverConfig | None = None) -> ConvexSolveReport:
    """Minimize ``||x||_{w,1}`` subject to ``||A x - b||_2 <= eps``.

    ``eps = 0`` delegates to :func:`solve_wbp_eq`.
    """
    return WeightedBasisPursuit(A, w, cfg).solve_denoise(b, eps)


def lp_reference_solve(A, b, w, cfg: SolverConfig | None = None) -> ConvexSolveReport:
    """Exact LP oracle for the equality problem.

    Splits ``x = x+ - x-`` and solves ``min w^T (x+ + x-)`` subject to
    ``A (x+ - x-) = b``, ``x+, x- >= 0`` with rational-arithmetic simplex.
    The LP optimum equals ``min sum w_i t_i`` over ``-t <= x <= t``.
    """
    cfg = cfg or SolverConfig()
    A = as_matrix(A)
    m, n = A.shape
    if m > LP_ORACLE_CAP or n > LP_ORACLE_CAP:
        raise ValueError(f"lp_reference_solve is limited to m, N <= {LP_ORACLE_CAP}")
    w = as_weights(w, n)
    b = as_signal(b, m)
    rows = [list(row) + [-v for v in row] for row in A.tolist()]
    cost = list(w) + list(w)
    res = simplex_standard_form(cost, rows, b.tolist(), exact=True)
    if res.status == "infeasible":
        x = np.linalg.lstsq(A, b, rcond=None)[0]
        return ConvexSolveReport(
            x, weighted_l1(x, w), float(np.linalg.norm(A @ x - b)), Status.INFEASIBLE,
            res.pivots, math.inf,
        )
    if res.status != "optimal":
        return ConvexSolveReport(
            np.zeros(n), 0.0, math.inf, Status.NUMERICAL_FAILURE, res.pivots, math.inf,
            info={"lp_status": res.status},
        )
    x = np.array([float(res.x[j] - res.x[n + j]) for j in range(n)])
    return ConvexSolveReport(
        x=x,
        objective=weighted_l1(x, w),
        feasibility_residual=float(np.linalg.norm(A @ x - b)),
        status=Status.OPTIMAL,
        iterations=res.pivots,
        duality_gap_estimate=0.0,
        info={"exact_objective": float(res.objective)},
    )
