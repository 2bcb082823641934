"""Recovery-guarantee certificates.

* WRIP constant ``delta_{w,k}``: worst Gram-eigenvalue deviation from 1 over
  column submatrices on weighted k-sparse supports.
* SWRIP bounds ``(theta_-, theta_+)``: extreme restricted energies over row
  subsets with ``|I| >= m/2``.
* Hypothesis checks, stable-recovery constants and the error bound
  ``c1 * eps + c2 * sigma_k / sqrt(k)``.
* A falsification search for the real-case weighted null space property.

Everything is computed by exhaustive enumeration and therefore limited to
small ``N`` and ``m``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cvxsolve import as_matrix
from .simplex import simplex_standard_form
from .wcore import (
    DEFAULT_SUPPORT_CAP,
    EnumerationCapError,
    as_signal,
    as_weights,
    enumerate_weighted_supports,
    is_weighted_k_sparse,
    weighted_l0,
    weighted_l1,
)

__all__ = [
    "DELTA_THRESHOLD",
    "THETA_LOWER",
    "THETA_UPPER",
    "DEFAULT_ROW_CAP",
    "DomainError",
    "CertificateReport",
    "SearchBudget",
    "WnspCounterexample",
    "FalsifyResult",
    "maximal_supports",
    "wrip_constant",
    "swrip_bounds",
    "check_wrip_hypothesis",
    "check_weight_hypothesis",
    "check_swrip_hypothesis",
    "stable_recovery_constants",
    "swrip_to_wrip_delta",
    "error_bound",
    "certify",
    "validate_witness",
    "wnsp_falsify_real",
]

DELTA_THRESHOLD = 1.0 / (2.0 * math.sqrt(2.0) + 1.0)
THETA_LOWER = 1.0 - DELTA_THRESHOLD
THETA_UPPER = 1.0 + DELTA_THRESHOLD

DEFAULT_ROW_CAP = 14
DEFAULT_FALSIFY_ROW_CAP = 12


class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


def maximal_supports(w, k: float, cap: int = DEFAULT_SUPPORT_CAP) -> list[tuple[int, ...]]:
    """Nonempty inclusion-maximal supports with ``w(S) <= k``."""
    sups = [s.indices for s in enumerate_weighted_supports(w, k, maximal=True, cap=cap)]
    sups = [s for s in sups if s]
    if not sups:
        raise ValueError(f"no nonempty support has weighted cardinality <= {k}")
    return sups


def _gram_extremes(M: np.ndarray) -> tuple[float, float]:
    ev = np.linalg.eigvalsh(M.T @ M)
    return float(ev[0]), float(ev[-1])


def _wrip(A, w, k, cap):
    sups = maximal_supports(w, k, cap)
    delta = 0.0
    for S in sups:
        lo, hi = _gram_extremes(A[:, S])
        delta = max(delta, hi - 1.0, 1.0 - lo)
    return delta, len(sups)


def wrip_constant(A, w, k: float, *, cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Smallest ``delta`` with ``(1-delta)||x||^2 <= ||Ax||^2 <= (1+delta)||x||^2``
    for every weighted k-sparse ``x``.

    Values ``>= 1`` mean the matrix has no WRIP of this order.
    """
    A = as_matrix(A)
    w = as_weights(w, A.shape[1])
    return _wrip(A, w, k, cap)[0]


def _row_subsets(m: int, row_cap: int) -> np.ndarray:
    if m > row_cap:
        h = (m + 1) // 2
        raise EnumerationCapError("row-subset enumeration", m, row_cap, math.comb(m, h))
    h = (m + 1) // 2
    return np.array(list(itertools.combinations(range(m), h)), dtype=int).reshape(-1, h)


def _swrip(A, w, k, cap, row_cap):
    m = A.shape[0]
    rows = _row_subsets(m, row_cap)
    sups = maximal_supports(w, k, cap)
    theta_minus = math.inf
    theta_plus = 0.0
    for S in sups:
        AS = A[:, S]
        # ||A_I x||^2 grows with I, so the max sits at I = [m] ...
        theta_plus = max(theta_plus, _gram_extremes(AS)[1])
        # ... and the min at the smallest admissible |I| = ceil(m/2)
        sub = AS[rows]  # (subsets, h, |S|)
        grams = np.einsum("kij,kil->kjl", sub, sub)
        theta_minus = min(theta_minus, float(np.min(np.linalg.eigvalsh(grams)[:, 0])))
    return max(theta_minus, 0.0), theta_plus, len(sups), len(rows)


def swrip_bounds(
    A, w, k: float, *, cap: int = DEFAULT_SUPPORT_CAP, row_cap: int = DEFAULT_ROW_CAP
) -> tuple[float, float]:
    """Tightest ``(theta_minus, theta_plus)`` such that for every weighted
    k-sparse ``x`` and every row subset ``|I| >= m/2``::

        theta_minus ||x||^2 <= ||A_I x||^2 <= theta_plus ||x||^2

    For odd ``m`` the constraint ``|I| >= m/2`` means ``|I| >= ceil(m/2)``.
    """
    A = as_matrix(A)
    w = as_weights(w, A.shape[1])
    tm, tp, _, _ = _swrip(A, w, k, cap, row_cap)
    return tm, tp


def check_weight_hypothesis(k: float, w) -> bool:
    """``k >= 2 ||w||_inf^2``."""
    w = as_weights(w)
    return k >= 2.0 * float(np.max(w)) ** 2


def check_wrip_hypothesis(delta: float, k: float, w) -> bool:
    """Hypotheses of the WRIP stable-recovery bound, with `delta` taken at order ``2k``."""
    return delta < DELTA_THRESHOLD and check_weight_hypothesis(k, w)


def check_swrip_hypothesis(theta_minus: float, theta_plus: float) -> bool:
    """Open windows ``theta_- in (1 - t, 1)``, ``theta_+ in (1, 1 + t)``, ``t = 1/(2 sqrt 2 + 1)``."""
    return THETA_LOWER < theta_minus < 1.0 and 1.0 < theta_plus < THETA_UPPER


def stable_recovery_constants(delta: float) -> tuple[float, float]:
    """``(c1, c2)`` of the weighted stable-recovery bound.

    Raises
    ------
    DomainError
        If ``delta < 0`` or ``delta >= 1/(1 + 2 sqrt 2)``.
    """
    if not (0.0 <= delta < DELTA_THRESHOLD):
        raise DomainError(
            f"delta={delta!r} outside [0, 1/(1+2*sqrt(2))) = [0, {DELTA_THRESHOLD:.12f})"
        )
    den = 1.0 - (1.0 + 2.0 * math.sqrt(2.0)) * delta
    c1 = 6.0 * math.sqrt(1.0 + delta) / den
    c2 = 4.0 * (1.0 + (math.sqrt(2.0) - 1.0) * delta) / den
    return c1, c2


def swrip_to_wrip_delta(theta_minus: float, theta_plus: float) -> float:
    """WRIP constant inherited by every row submatrix ``A_T`` with ``|T| >= m/2``."""
    if not (0.0 <= theta_minus <= theta_plus):
        raise DomainError("need 0 <= theta_minus <= theta_plus")
    return max(1.0 - theta_minus, theta_plus - 1.0)


def error_bound(eps: float, sigma_k: float, k: float, c1: float, c2: float) -> float:
    if eps < 0 or sigma_k < 0 or c1 < 0 or c2 < 0:
        raise DomainError("error_bound inputs must be nonnegative")
    if k <= 0:
        raise DomainError("k must be positive")
    return c1 * eps + c2 * sigma_k / math.sqrt(k)


@dataclass
class CertificateReport:
    """Certificates for order ``2k`` (the order both stable-recovery results need)."""

    k: float
    order_k: float
    delta_w_k: float
    theta_minus: float
    theta_plus: float
    weight_hypothesis_pass: bool
    wrip_hypothesis_pass: bool
    swrip_hypothesis_pass: bool
    swrip_delta: float
    c1: float | None
    c2: float | None
    constants_source: str | None
    enumeration_counts: dict
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CertificateReport":
        return cls(**d)


def certify(
    A, w, k: float, *, cap: int = DEFAULT_SUPPORT_CAP, row_cap: int = DEFAULT_ROW_CAP
) -> CertificateReport:
    """Compute WRIP/SWRIP certificates of order ``2k`` and the derived constants.

    ``c1, c2`` come from the SWRIP-derived constant when the SWRIP hypotheses
    hold, otherwise from ``delta_{w,2k}`` when the WRIP hypotheses hold, and
    are ``None`` when neither does.
    """
    A = as_matrix(A)
    m, n = A.shape
    w = as_weights(w, n)
    if k <= 0:
        raise ValueError("k must be positive")
    order = 2.0 * k
    delta, n_sup = _wrip(A, w, order, cap)
    tm, tp, _, n_rows = _swrip(A, w, order, cap, row_cap)
    weight_ok = check_weight_hypothesis(k, w)
    wrip_ok = delta < DELTA_THRESHOLD and weight_ok
    swrip_ok = check_swrip_hypothesis(tm, tp) and weight_ok
    sdelta = swrip_to_wrip_delta(tm, tp)
    c1 = c2 = None
    source = None
    if swrip_ok:
        c1, c2 = stable_recovery_constants(sdelta)
        source = "swrip"
    elif wrip_ok:
        c1, c2 = stable_recovery_constants(delta)
        source = "wrip"
    warnings = []
    if m % 2 == 0:
        # complementary halves split ||Ax||^2, so theta_- <= theta_+ / 2
        assert tm <= tp / 2.0 + 1e-9 * (1.0 + tp), "even-m energy split violated"
        warnings.append("even_m_window_unsatisfiable")
    notes = [
        f"row subsets have size ceil(m/2) = {(m + 1) // 2}",
        "theta_plus evaluated at I = [1:m], theta_minus at |I| = ceil(m/2)",
    ]
    return CertificateReport(
        k=float(k),
        order_k=order,
        delta_w_k=delta,
        theta_minus=tm,
        theta_plus=tp,
        weight_hypothesis_pass=weight_ok,
        wrip_hypothesis_pass=wrip_ok,
        swrip_hypothesis_pass=swrip_ok,
        swrip_delta=sdelta,
        c1=c1,
        c2=c2,
        constants_source=source,
        enumeration_counts={"supports": n_sup, "row_subsets": n_rows},
        warnings=warnings,
        notes=notes,
    )


# -- weighted null space property falsifier ---------------------------------


@dataclass(frozen=True)
class SearchBudget:
    directions: int = 64
    seed: int = 0
    polish: bool = True
    row_cap: int = DEFAULT_FALSIFY_ROW_CAP
    support_cap: int = DEFAULT_SUPPORT_CAP


@dataclass
class WnspCounterexample:
    """Row subset ``S`` with ``u in N(A_S)``, ``v in N(A_{S^c})`` and
    ``||u+v||_{w,1} >= ||u-v||_{w,1}`` where ``u+v`` is weighted k-sparse."""

    S: tuple[int, ...]
    T: tuple[int, ...]
    u: np.ndarray
    v: np.ndarray
    lhs: float
    rhs: float
    sparsity_witness: float
    method: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["u"] = self.u.tolist()
        d["v"] = self.v.tolist()
        d["S"] = list(self.S)
        d["T"] = list(self.T)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WnspCounterexample":
        return cls(
            S=tuple(d["S"]), T=tuple(d["T"]), u=np.asarray(d["u"], dtype=float),
            v=np.asarray(d["v"], dtype=float), lhs=d["lhs"], rhs=d["rhs"],
            sparsity_witness=d["sparsity_witness"], method=d["method"],
        )


@dataclass
class FalsifyResult:
    counterexample: WnspCounterexample | None
    row_subsets: int = 0
    subspaces: int = 0
    samples: int = 0
    polishes: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.counterexample is not None


_TIE_TOL = 1e-12
_RESID_TOL = 1e-9
_NONZERO_TOL = 1e-6


def validate_witness(A, w, k: float, S, u, v) -> tuple[bool, str]:
    """Check every condition a WNSP violation witness must meet.

    Returns ``(ok, reason)``; ``reason`` names the first failed condition.
    """
    A = as_matrix(A)
    m, n = A.shape
    w = as_weights(w, n)
    u = as_signal(u, n)
    v = as_signal(v, n)
    S = sorted(set(S))
    Sc = [j for j in range(m) if j not in S]
    s = u + v
    d = u - v
    scale = max(1.0, float(np.linalg.norm(s)))
    if np.linalg.norm(u) <= _NONZERO_TOL * scale or np.linalg.norm(v) <= _NONZERO_TOL * scale:
        return False, "u or v is zero"
    anorm = float(np.linalg.norm(A, 2))
    if np.linalg.norm(A[S] @ u) > _RESID_TOL * max(1.0, anorm * np.linalg.norm(u)):
        return False, "u not in null(A_S)"
    if np.linalg.norm(A[Sc] @ v) > _RESID_TOL * max(1.0, anorm * np.linalg.norm(v)):
        return False, "v not in null(A_Sc)"
    if not np.any(s):
        return False, "u + v is zero"
    if not is_weighted_k_sparse(s, w, k):
        return False, "u + v is not weighted k-sparse"
    lhs = weighted_l1(s, w)
    rhs = weighted_l1(d, w)
    if lhs < rhs - _TIE_TOL * max(1.0, lhs):
        return False, "inequality holds"
    return True, "ok"


def _null_basis(M: np.ndarray, n: int) -> np.ndarray:
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, Vt = np.linalg.svd(M)
    tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.sum(s > max(tol, 1e-12)))
    return Vt[r:].T


def _witness_subspace(A, S_mask, T, n):
    Z1 = _null_basis(A[S_mask], n)
    Z2 = _null_basis(A[~S_mask], n)
    if Z1.shape[1] == 0 or Z2.shape[1] == 0:
        return None
    Tc = np.setdiff1d(np.arange(n), T)
    M = np.hstack([Z1[Tc], Z2[Tc]])
    K = _null_basis(M, Z1.shape[1] + Z2.shape[1])
    if K.shape[1] == 0:
        return None
    U = Z1 @ K[: Z1.shape[1]]
    V = Z2 @ K[Z1.shape[1]:]
    if np.linalg.norm(U) <= 1e-12 or np.linalg.norm(V) <= 1e-12:
        return None
    # orthonormalize the parametrization for well-spread samples
    Q, _ = np.linalg.qr(np.vstack([U, V]))
    return Q[:n], Q[n:]


def _orthant_polish(U, V, w, T, gamma):
    """Minimize ``||u-v||_{w,1}`` with ``||u+v||_{w,1} = 1`` on the sign
    orthant of ``(u+v, u-v)`` at `gamma`; returns the new parameter or None."""
    P = U + V
    Qm = U - V
    p = P @ gamma
    q = Qm @ gamma
    sig = np.sign(p[T])
    tau = np.where(q >= 0, 1.0, -1.0)
    d = U.shape[1]
    # inequality rows  a^T g >= 0  written as  -a^T g + slack = 0
    ineq = [sig[i] * P[t] for i, t in enumerate(T)] + [tau[i] * Qm[i] for i in range(len(q))]
    ns = len(ineq)
    rows, rhs = [], []
    for j, a in enumerate(ineq):
        sl = [0.0] * ns
        sl[j] = -1.0
        rows.append(list(a) + list(-a) + sl)
        rhs.append(0.0)
    norm_row = np.sum((w[T] * sig)[:, None] * P[T], axis=0)
    rows.append(list(norm_row) + list(-norm_row) + [0.0] * ns)
    rhs.append(1.0)
    cost_g = (w * tau) @ Qm
    cost = list(cost_g) + list(-cost_g) + [0.0] * ns
    res = simplex_standard_form(cost, rows, rhs, exact=False, max_pivots=2000)
    if res.status != "optimal":
        return None
    z = np.asarray(res.x, dtype=float)
    return z[:d] - z[d: 2 * d]


def wnsp_falsify_real(A, w, k: float, budget: SearchBudget | None = None) -> FalsifyResult:
    """Search for a violation of the real-case weighted null space property.

    Row subsets ``S`` (modulo ``S <-> S^c``) and maximal supports ``T`` with
    ``w(T) <= k`` are enumerated. For each pair the witnesses
    ``{(u, v) : u in N(A_S), v in N(A_{S^c}), (u+v) vanishes off T}`` form a
    subspace, searched by (1) the exact collapse ``u = v``, (2) random
    directions and (3) an LP polish on the best direction's sign orthant.

    A returned counterexample is verified and proves that weighted l1
    phaseless recovery fails for some weighted k-sparse signal. Not finding
    one proves nothing.
    """
    budget = budget or SearchBudget()
    A = as_matrix(A)
    m, n = A.shape
    w = as_weights(w, n)
    if m > budget.row_cap:
        raise EnumerationCapError("WNSP row-subset enumeration", m, budget.row_cap, 1 << (m - 1))
    supports = maximal_supports(w, k, budget.support_cap)
    result = FalsifyResult(None)
    result.notes.append("S ranges over row subsets of [1:m] without a w(S) <= k restriction")

    def found(S, T, u, v, method):
        ok, _ = validate_witness(A, w, k, S, u, v)
        if not ok:
            return None
        s = u + v
        return WnspCounterexample(
            S=tuple(int(i) for i in S), T=tuple(int(t) for t in T), u=u, v=v,
            lhs=weighted_l1(s, w), rhs=weighted_l1(u - v, w),
            sparsity_witness=weighted_l0(s, w), method=method,
        )

    for rest in range(1 << (m - 1)):
        S_mask = np.zeros(m, dtype=bool)
        S_mask[0] = True
        for j in range(1, m):
            S_mask[j] = bool((rest >> (j - 1)) & 1)
        S = np.flatnonzero(S_mask)
        result.row_subsets += 1
        for ti, T in enumerate(supports):
            T = np.asarray(T)
            sub = _witness_subspace(A, S_mask, T, n)
            if sub is None:
                continue
            U, V = sub
            result.subspaces += 1
            # u = v collapses the right-hand side to zero
            K = _null_basis(U - V, U.shape[1])
            for j in range(K.shape[1]):
                g = K[:, j]
                u = U @ g
                if np.linalg.norm(u) > 1e-9:
                    c = 1.0 / np.linalg.norm(2 * u)
                    cex = found(S, T, c * u, c * u, "collapse")
                    if cex is not None:
                        result.counterexample = cex
                        return result
            rng = np.random.default_rng([budget.seed, rest, ti])
            G = rng.standard_normal((U.shape[1], budget.directions))
            P = (U + V) @ G
            Qd = (U - V) @ G
            pn = np.linalg.norm(P, axis=0)
            ok = pn > 1e-12
            un = np.linalg.norm(U @ G, axis=0)
            vn = np.linalg.norm(V @ G, axis=0)
            ok &= (un > 10 * _NONZERO_TOL * pn) & (vn > 10 * _NONZERO_TOL * pn)
            result.samples += budget.directions
            if not np.any(ok):
                continue
            score = np.where(ok, (w @ np.abs(P) - w @ np.abs(Qd)) / np.where(ok, pn, 1.0), -np.inf)
            order = np.argsort(-score, kind="stable")
            g = G[:, order[0]] / pn[order[0]]
            if score[order[0]] >= -_TIE_TOL:
                cex = found(S, T, U @ g, V @ g, "sampled")
                if cex is not None:
                    result.counterexample = cex
                    return result
            if budget.polish:
                result.polishes += 1
                gp = _orthant_polish(U, V, w, T, g)
                if gp is not None:
                    s_norm = np.linalg.norm((U + V) @ gp)
                    if s_norm > 1e-12:
                        gp = gp / s_norm
                        cex = found(S, T, U @ gp, V @ gp, "polished")
                        if cex is not None:
                            result.counterexample = cex
                            return result
    return result


def replay_witness(A, w, cex: WnspCounterexample) -> dict:
    """Build the recovery failure a witness implies: ``x0 = u+v``, ``xhat = u-v``.

    Returns the magnitude mismatch ``max | |A xhat| - |A x0| |`` and both
    weighted norms.
    """
    A = as_matrix(A)
    x0 = cex.u + cex.v
    xhat = cex.u - cex.v
    return {
        "x0": x0,
        "xhat": xhat,
        "magnitude_gap": float(np.max(np.abs(np.abs(A @ xhat) - np.abs(A @ x0)))),
        "x0_norm": weighted_l1(x0, w),
        "xhat_norm": weighted_l1(xhat, w),
    }
