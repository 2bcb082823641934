"""Experiment harness: generators, recovery trials, phase-transition grids
and conditional checks of the stable-recovery bounds."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import certify as cert
from ._parallel import ordered_map
from .cvxsolve import MeasurementEnsemble, SolverConfig, solve_wbp_denoise
from .phaseless import (
    DEFAULT_PATTERN_CAP,
    AllPatternsInfeasible,
    PhaselessObservation,
    solve_phaseless_altmin,
    solve_phaseless_exact,
)
from .wcore import (
    DEFAULT_SUPPORT_CAP,
    EnumerationCapError,
    as_weights,
    enumerate_weighted_supports,
    global_sign_error,
    sigma_k,
)

__all__ = [
    "WeightProfile",
    "ExperimentConfig",
    "TrialRecord",
    "BoundSummary",
    "trial_seed",
    "gen_gaussian_matrix",
    "gen_orthonormal_matrix",
    "gen_weighted_sparse_signal",
    "gen_compressible_signal",
    "gen_ball_noise",
    "run_recovery_trial",
    "run_trials",
    "phase_transition",
    "bound_verification",
    "trials_to_csv",
    "grid_to_csv",
]

BOUND_SLACK = 1e-8


def trial_seed(master: int, trial_id: int, *context: int) -> int:
    """64-bit trial seed: first word of ``SeedSequence([master, *context, trial_id])``."""
    ss = np.random.SeedSequence([int(master), *map(int, context), int(trial_id)])
    return int(ss.generate_state(1, np.uint64)[0])


# -- generators --------------------------------------------------------------


def gen_gaussian_matrix(m: int, N: int, seed, scale: float | None = None) -> MeasurementEnsemble:
    """i.i.d. ``N(0, scale)`` entries; ``scale`` defaults to ``1/m``."""
    if m < 1 or N < 1:
        raise ValueError("m and N must be >= 1")
    scale = 1.0 / m if scale is None else float(scale)
    if scale <= 0:
        raise ValueError("scale must be positive")
    A = np.random.default_rng(seed).standard_normal((m, N)) * math.sqrt(scale)
    return MeasurementEnsemble(A, "gaussian", _seed_meta(seed), f"variance={scale!r}")


def gen_orthonormal_matrix(m: int, N: int, seed) -> MeasurementEnsemble:
    """Random ``m x N`` matrix with orthonormal columns (needs ``m >= N``)."""
    if not 1 <= N <= m:
        raise ValueError("orthonormal columns need 1 <= N <= m")
    G = np.random.default_rng(seed).standard_normal((m, N))
    Q, R = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(R))
    return MeasurementEnsemble(Q, "orthonormal", _seed_meta(seed), "orthonormal-columns")


def _seed_meta(seed):
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return None if seed is None else int(seed)


def _magnitudes(rng, n, model):
    signs = rng.choice([-1.0, 1.0], size=n)
    if model == "uniform12":
        return signs * rng.uniform(1.0, 2.0, size=n)
    if model == "unit":
        return signs
    if model == "gaussian":
        return rng.standard_normal(n)
    raise ValueError(f"unknown magnitude model {model!r}")


def gen_weighted_sparse_signal(
    N: int, w, k: float, seed, magnitude_model: str = "uniform12", *, cap: int = DEFAULT_SUPPORT_CAP
) -> np.ndarray:
    """Weighted k-sparse signal on a uniformly drawn maximal feasible support.

    Magnitude models: ``"uniform12"`` (random sign times U[1, 2]),
    ``"unit"`` (random signs) or ``"gaussian"``.
    """
    w = as_weights(w, N)
    sups = [s.indices for s in enumerate_weighted_supports(w, k, maximal=True, cap=cap) if s.indices]
    if not sups:
        raise ValueError(f"no nonempty support with weighted cardinality <= {k}")
    rng = np.random.default_rng(seed)
    S = list(sups[int(rng.integers(len(sups)))])
    x = np.zeros(N)
    x[S] = _magnitudes(rng, len(S), magnitude_model)
    return x


def gen_compressible_signal(N: int, seed, decay: float = 1.0) -> np.ndarray:
    """Dense signal whose sorted magnitudes decay like ``i^(-decay)``."""
    if decay <= 0:
        raise ValueError("decay must be positive")
    rng = np.random.default_rng(seed)
    mags = rng.uniform(1.0, 2.0, N) * np.arange(1, N + 1, dtype=float) ** (-decay)
    return rng.permutation(mags) * rng.choice([-1.0, 1.0], size=N)


def gen_ball_noise(m: int, eps: float, seed) -> np.ndarray:
    """Uniform sample from the closed l2 ball of radius `eps` in ``R^m``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return np.zeros(m)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(m)
    e = g / np.linalg.norm(g) * eps * rng.uniform() ** (1.0 / m)
    nrm = np.linalg.norm(e)
    if nrm > eps:
        e *= eps / nrm
        while np.linalg.norm(e) > eps:
            e = np.nextafter(e, 0.0)
    assert np.linalg.norm(e) <= eps
    return e


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class WeightProfile:
    """``uniform``: all entries `c`. ``two_level``: the first `split` entries
    are `w_lo`, the rest `w_hi`. ``explicit``: `values` verbatim."""

    kind: str = "uniform"
    c: float = 1.0
    w_hi: float = 2.0
    w_lo: float = 1.0
    split: int = 0
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "two_level", "explicit"):
            raise ValueError(f"unknown weight profile {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def weights(self, N: int) -> np.ndarray:
        if self.kind == "uniform":
            w = np.full(N, float(self.c))
        elif self.kind == "two_level":
            if not 0 <= self.split <= N:
                raise ValueError("split must lie in [0, N]")
            w = np.full(N, float(self.w_hi))
            w[: self.split] = self.w_lo
        else:
            w = np.array(self.values)
        return as_weights(w, N)

    @classmethod
    def from_obj(cls, obj) -> "WeightProfile":
        if obj is None:
            return cls()
        if isinstance(obj, WeightProfile):
            return obj
        if isinstance(obj, (list, tuple)):
            return cls(kind="explicit", values=tuple(obj))
        return cls(**obj)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["values"] = list(self.values)
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. ``constraint_eps`` is the radius of the solver's
    magnitude constraint; ``noise_eps`` bounds the generated noise."""

    m: int
    N: int
    k: float
    weight_profile: WeightProfile = WeightProfile()
    signal_weight_profile: WeightProfile | None = None
    signal_model: str = "sparse"
    decay: float = 1.0
    magnitude_model: str = "uniform12"
    model: str = "phaseless"
    matrix: str = "gaussian"
    matrix_scale: float | None = None
    matrix_data: tuple | None = None
    constraint_eps: float = 0.0
    noise_eps: float = 0.0
    trials: int = 1
    seed: int = 0
    solver: str = "exact"
    altmin_iters: int = 50
    success_tol: float = 1e-4
    certify: bool = False
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    support_cap: int = DEFAULT_SUPPORT_CAP
    pattern_cap: int = DEFAULT_PATTERN_CAP
    row_cap: int = cert.DEFAULT_ROW_CAP
    m_values: tuple[int, ...] = ()
    k_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.m < 1 or self.N < 1:
            raise ValueError("m and N must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.constraint_eps < 0 or self.noise_eps < 0:
            raise ValueError("eps values must be nonnegative")
        if self.signal_model not in ("sparse", "compressible"):
            raise ValueError(f"unknown signal model {self.signal_model!r}")
        if self.model not in ("phaseless", "linear"):
            raise ValueError(f"unknown measurement model {self.model!r}")
        if self.matrix not in ("gaussian", "orthonormal", "explicit"):
            raise ValueError(f"unknown matrix kind {self.matrix!r}")
        if self.matrix == "explicit":
            if self.matrix_data is None:
                raise ValueError("explicit matrix kind needs matrix_data")
            A = np.atleast_2d(np.asarray(self.matrix_data, dtype=float))
            if A.shape != (self.m, self.N):
                raise ValueError(f"matrix_data has shape {A.shape}, expected {(self.m, self.N)}")
            object.__setattr__(self, "matrix_data", tuple(tuple(r) for r in A.tolist()))
        if self.solver not in ("exact", "altmin"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if not self.success_tol > 0:
            raise ValueError("success_tol must be positive")
        object.__setattr__(self, "weight_profile", WeightProfile.from_obj(self.weight_profile))
        if self.signal_weight_profile is not None:
            object.__setattr__(
                self, "signal_weight_profile", WeightProfile.from_obj(self.signal_weight_profile)
            )
        object.__setattr__(self, "m_values", tuple(int(v) for v in self.m_values))
        object.__setattr__(self, "k_values", tuple(float(v) for v in self.k_values))

    @property
    def weights(self) -> np.ndarray:
        return self.weight_profile.weights(self.N)

    @property
    def signal_weights(self) -> np.ndarray:
        return (self.signal_weight_profile or self.weight_profile).weights(self.N)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(feas_tol=self.feas_tol, opt_tol=self.opt_tol)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "eps" in d:
            eps = d.pop("eps")
            d.setdefault("constraint_eps", eps)
            d.setdefault("noise_eps", eps)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(unknown)}")
        for key in ("m_values", "k_values"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["weight_profile"] = self.weight_profile.to_dict()
        if self.signal_weight_profile is not None:
            d["signal_weight_profile"] = self.signal_weight_profile.to_dict()
        if self.matrix_data is not None:
            d["matrix_data"] = [list(r) for r in self.matrix_data]
        d["m_values"] = list(self.m_values)
        d["k_values"] = list(self.k_values)
        return d


@dataclass
class TrialRecord:
    trial_id: int
    seed_derived: int
    success: bool
    error: float
    objective: float
    status: str
    multiplicity: int = 0
    bound_rhs: float | None = None
    certificate_pass: bool | None = None
    runtime_ms: float = 0.0
    info: dict = field(default_factory=dict)


CSV_FIELDS = (
    "trial_id",
    "seed_derived",
    "success",
    "error",
    "objective",
    "status",
    "multiplicity",
    "bound_rhs",
    "certificate_pass",
)


# -- trials ------------------------------------------------------------------


def _trial_matrix(cfg: ExperimentConfig, seed) -> np.ndarray:
    if cfg.matrix == "explicit":
        return np.array(cfg.matrix_data, dtype=float)
    if cfg.matrix == "orthonormal":
        return gen_orthonormal_matrix(cfg.m, cfg.N, seed).A
    return gen_gaussian_matrix(cfg.m, cfg.N, seed, cfg.matrix_scale).A


def _certify_trial(cfg, A, w, x0):
    """``(certificate_pass, bound_rhs)`` for the recovery bound matching the model."""
    k = cfg.k
    if cfg.model == "phaseless":
        rep = cert.certify(A, w, k, cap=cfg.support_cap, row_cap=cfg.row_cap)
        ok = rep.swrip_hypothesis_pass
        delta = rep.swrip_delta
    else:
        delta = cert.wrip_constant(A, w, 2 * k, cap=cfg.support_cap)
        ok = cert.check_wrip_hypothesis(delta, k, w)
    if not ok:
        return False, None, {"delta": delta}
    if cfg.noise_eps > cfg.constraint_eps:
        # x0 is not feasible, the bound does not apply
        return True, None, {"delta": delta, "bound_skipped": "noise_eps > constraint_eps"}
    c1, c2 = cert.stable_recovery_constants(delta)
    # the bound is stated for a tube of half-width eps on both sides
    eps_bound = 0.5 * (cfg.constraint_eps + cfg.noise_eps)
    rhs = cert.error_bound(eps_bound, sigma_k(x0, w, k), k, c1, c2)
    return True, rhs, {"delta": delta, "c1": c1, "c2": c2}


def run_recovery_trial(cfg: ExperimentConfig, trial_id: int, *, context: tuple = ()) -> TrialRecord:
    """One seeded trial. Solver failures are recorded in ``status``, never raised."""
    t0 = time.perf_counter()
    sd = trial_seed(cfg.seed, trial_id, *context)
    A = _trial_matrix(cfg, [sd, 0])
    w = cfg.weights
    if cfg.signal_model == "sparse":
        x0 = gen_weighted_sparse_signal(
            cfg.N, cfg.signal_weights, cfg.k, [sd, 1], cfg.magnitude_model, cap=cfg.support_cap
        )
    else:
        x0 = gen_compressible_signal(cfg.N, [sd, 1], cfg.decay)
    e = gen_ball_noise(cfg.m, cfg.noise_eps, [sd, 2])
    scfg = cfg.solver_config()
    rec = TrialRecord(trial_id, sd, False, math.nan, math.nan, "ok")
    try:
        if cfg.model == "phaseless":
            y = np.maximum(np.abs(A @ x0) + e, 0.0)
            obs = PhaselessObservation(y, cfg.constraint_eps)
            if cfg.solver == "exact":
                rep = solve_phaseless_exact(A, obs, w, scfg, cap=cfg.pattern_cap)
            else:
                rep = solve_phaseless_altmin(A, obs, w, init=trial_seed(sd, 3), iters=cfg.altmin_iters, cfg=scfg)
            sols = rep.solutions
            rec.objective = float(rep.objective)
            rec.multiplicity = rep.multiplicity
        else:
            rep = solve_wbp_denoise(A, A @ x0 + e, w, cfg.constraint_eps, scfg)
            if not rep.ok:
                raise RuntimeError(f"solver status {rep.status.value}")
            sols = [rep.x]
            rec.objective = float(rep.objective)
            rec.multiplicity = 1
        if cfg.model == "phaseless":
            rec.error = max(global_sign_error(x, x0) for x in sols)
        else:
            rec.error = float(np.linalg.norm(sols[0] - x0))
        rec.success = bool(rec.error <= cfg.success_tol * np.linalg.norm(x0))
    except AllPatternsInfeasible:
        rec.status = "infeasible"
    except EnumerationCapError as exc:
        rec.status = "cap_exceeded"
        rec.info["message"] = str(exc)
    except Exception as exc:  # recorded, not raised
        rec.status = "error"
        rec.info["message"] = f"{type(exc).__name__}: {exc}"
    if cfg.certify:
        try:
            rec.certificate_pass, rec.bound_rhs, extra = _certify_trial(cfg, A, w, x0)
            rec.info.update(extra)
        except Exception as exc:
            rec.info["certify_error"] = f"{type(exc).__name__}: {exc}"
    rec.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return rec


def run_trials(cfg: ExperimentConfig, *, workers: int | None = 1, context: tuple = ()) -> list[TrialRecord]:
    recs = ordered_map(lambda t: run_recovery_trial(cfg, t, context=context), range(cfg.trials), workers)
    return sorted(recs, key=lambda r: r.trial_id)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def trials_to_csv(records: list[TrialRecord]) -> str:
    """Per-trial CSV (RFC 4180); wall-clock runtime is left out so output is reproducible."""
    rows = [[getattr(r, f) for f in CSV_FIELDS] for r in sorted(records, key=lambda r: r.trial_id)]
    return _csv(CSV_FIELDS, rows)


GRID_FIELDS = ("m", "k", "trials", "successes", "success_rate", "mean_error", "failures")


def phase_transition(
    cfg: ExperimentConfig,
    m_values=None,
    k_values=None,
    *,
    workers: int | None = 1,
) -> tuple[list[dict], float]:
    """Success rate per ``(m, k)`` cell.

    Cell ``(i, j)`` draws its trials from seeds ``(seed, i, j, trial_id)``.
    Returns the rows (in grid order) and the total trial runtime in ms.
    """
    m_values = tuple(m_values or cfg.m_values or (cfg.m,))
    k_values = tuple(k_values or cfg.k_values or (cfg.k,))
    cells = [
        (i, j, dataclasses.replace(cfg, m=int(m), k=float(k), matrix_data=None if cfg.matrix != "explicit" else cfg.matrix_data))
        for i, m in enumerate(m_values)
        for j, k in enumerate(k_values)
    ]
    jobs = [(i, j, c, t) for i, j, c in cells for t in range(c.trials)]
    recs = ordered_map(lambda job: run_recovery_trial(job[2], job[3], context=(job[0], job[1])), jobs, workers)
    rows = []
    runtime = 0.0
    pos = 0
    for _, _, c in cells:
        chunk = recs[pos: pos + c.trials]
        pos += c.trials
        runtime += sum(r.runtime_ms for r in chunk)
        errs = [r.error for r in chunk if not math.isnan(r.error)]
        succ = sum(r.success for r in chunk)
        rows.append(
            {
                "m": c.m,
                "k": c.k,
                "trials": c.trials,
                "successes": succ,
                "success_rate": succ / c.trials,
                "mean_error": math.fsum(errs) / len(errs) if errs else None,
                "failures": sum(r.status != "ok" for r in chunk),
            }
        )
    return rows, runtime


def grid_to_csv(rows: list[dict]) -> str:
    return _csv(GRID_FIELDS, [[r[f] for f in GRID_FIELDS] for r in rows])


@dataclass
class BoundSummary:
    trials: int
    certified_count: int
    violation_count: int
    vacuous_count: int
    max_error_over_bound: float | None
    linear: "BoundSummary | None" = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["linear"] = self.linear.to_dict() if self.linear else None
        return d


def _summarize(records) -> BoundSummary:
    certified = [r for r in records if r.certificate_pass and r.bound_rhs is not None and r.status == "ok"]
    viol = [r for r in certified if not r.error <= r.bound_rhs + BOUND_SLACK]
    ratios = [r.error / r.bound_rhs for r in certified if r.bound_rhs > 0]
    return BoundSummary(
        trials=len(records),
        certified_count=len(certified),
        violation_count=len(viol),
        vacuous_count=len(records) - len(certified),
        max_error_over_bound=max(ratios) if ratios else None,
    )


def bound_verification(
    cfg: ExperimentConfig, *, workers: int | None = 1, linear_check: bool = True
) -> tuple[BoundSummary, list[TrialRecord]]:
    """Count violations of ``error <= bound_rhs + 1e-8`` over certified trials.

    Trials whose hypothesis check fails (or whose failed solve left no
    error) are counted as vacuous. For a phaseless config with
    ``linear_check`` the linear analogue also runs, on orthonormal-column
    matrices of size ``max(m, N) x N`` with the same signals and noise
    budgets.
    """
    cfg = dataclasses.replace(cfg, certify=True)
    records = run_trials(cfg, workers=workers)
    summary = _summarize(records)
    if linear_check and cfg.model == "phaseless":
        lcfg = dataclasses.replace(
            cfg, model="linear", matrix="orthonormal", matrix_data=None, m=max(cfg.m, cfg.N)
        )
        summary.linear = _summarize(run_trials(lcfg, workers=workers))
    return summary, records
