"""Command-line frontend.

Every subcommand prints exactly one JSON record on stdout; diagnostics go to
stderr. Exit codes: 0 success, 2 usage, 3 I/O, 4 infeasible, 5 cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import certify as cert
from . import labbench as lab
from .cvxsolve import SolverConfig
from .io import (
    FormatError,
    JsonRecord,
    parse_float_list,
    read_matrix,
    read_vector,
    write_matrix_csv,
    write_vector_csv,
)
from .phaseless import (
    DEFAULT_PATTERN_CAP,
    AllPatternsInfeasible,
    PhaselessObservation,
    solve_phaseless_altmin,
    solve_phaseless_exact,
)
from .wcore import DEFAULT_SUPPORT_CAP, EnumerationCapError, as_weights

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4
EXIT_CAP = 5

TOOL_VERSION = f"wsp v{__version__}"


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _caps(text):
    """``support=24,patterns=16,rows=14`` (any subset)."""
    caps = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in ("support", "patterns", "rows"):
            raise argparse.ArgumentTypeError(
                f"bad cap {item!r}; expected support=N, patterns=N or rows=N"
            )
        caps[key] = _positive_int(val)
    return caps


def _load_weights(arg: str, n: int | None = None) -> np.ndarray:
    path = Path(arg)
    if path.exists():
        w = read_vector(path, "w")
    else:
        try:
            w = parse_float_list(arg)
        except ValueError as exc:
            raise UsageError(f"--weights: {exc} (and no such file)") from None
    try:
        return as_weights(w, n)
    except ValueError as exc:
        raise UsageError(f"--weights: {exc}") from None


def _provenance(args, **extra) -> dict:
    return {"tool_version": TOOL_VERSION, "seed": getattr(args, "seed", None), **extra}


def _emit(rec: JsonRecord) -> None:
    sys.stdout.write(rec.to_json() + "\n")


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(feas_tol=args.tol_feas, opt_tol=args.tol_opt)


def _write_artifact(out, kind, payload, prov, csv_writer=None) -> None:
    if str(out).lower().endswith(".csv") and csv_writer is not None:
        csv_writer(out)
    else:
        JsonRecord(kind, payload, prov).write(out)


# -- subcommands -------------------------------------------------------------


def cmd_gen_matrix(args) -> int:
    if args.seed is None:
        raise UsageError("gen-matrix requires --seed")
    if args.kind == "orthonormal":
        ens = lab.gen_orthonormal_matrix(args.m, args.n, args.seed)
    else:
        ens = lab.gen_gaussian_matrix(args.m, args.n, args.seed, args.scale)
    prov = _provenance(args)
    payload = {"A": ens.A.copy(), "m": ens.m, "N": ens.N, **ens.meta()}
    if args.out:
        _write_artifact(args.out, "matrix", payload, prov, lambda p: write_matrix_csv(p, ens.A))
        _emit(JsonRecord("summary", {"written": str(args.out), "m": ens.m, "N": ens.N, **ens.meta()}, prov))
    else:
        _emit(JsonRecord("matrix", payload, prov))
    return EXIT_OK


def cmd_gen_signal(args) -> int:
    if args.seed is None:
        raise UsageError("gen-signal requires --seed")
    w = _load_weights(args.weights, args.n)
    x = lab.gen_weighted_sparse_signal(
        args.n, w, args.k, args.seed, args.magnitude, cap=args.caps.get("support", DEFAULT_SUPPORT_CAP)
    )
    prov = _provenance(args)
    payload = {"x": x, "w": w, "k": args.k, "support": [int(i) for i in np.flatnonzero(x)]}
    if args.out:
        _write_artifact(args.out, "signal", payload, prov, lambda p: write_vector_csv(p, x))
        _emit(JsonRecord("summary", {"written": str(args.out), "support": payload["support"]}, prov))
    else:
        _emit(JsonRecord("signal", payload, prov))
    return EXIT_OK


def cmd_solve(args) -> int:
    A = read_matrix(args.matrix)
    m, n = A.shape
    if (args.y is None) == (args.signal is None):
        raise UsageError("give exactly one of --y (magnitudes) or --signal (x0)")
    if args.y is not None:
        y = read_vector(args.y, "y")
    else:
        x0 = read_vector(args.signal, "x")
        if x0.size != n:
            raise UsageError(f"signal has length {x0.size}, matrix has {n} columns")
        y = np.abs(A @ x0)
    if y.size != m:
        raise UsageError(f"observation has length {y.size}, matrix has {m} rows")
    w = _load_weights(args.weights, n) if args.weights else np.ones(n)
    try:
        obs = PhaselessObservation(y, args.eps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = _solver_cfg(args)
    if args.mode == "exact":
        rep = solve_phaseless_exact(A, obs, w, cfg, cap=args.caps.get("patterns", DEFAULT_PATTERN_CAP))
    else:
        rep = solve_phaseless_altmin(A, obs, w, init=args.seed, iters=args.iters, cfg=cfg)
    if rep.multiplicity > 1:
        print(
            f"warning: {rep.multiplicity} distinct solution classes attain the minimum; "
            "recovery is not unique",
            file=sys.stderr,
        )
    payload = {
        "solutions": [s for s in rep.solutions],
        "objective": rep.objective,
        "multiplicity": rep.multiplicity,
        "patterns_tried": rep.patterns_tried,
        "patterns_feasible": rep.patterns_feasible,
        "status": rep.status,
        "patterns": [list(p) for p in rep.patterns],
        "eps": args.eps,
        "mode": args.mode,
    }
    rec = JsonRecord("solve_report", payload, _provenance(args))
    if args.out:
        rec.write(args.out)
    _emit(rec)
    return EXIT_OK


def cmd_certify(args) -> int:
    A = read_matrix(args.matrix)
    w = _load_weights(args.weights, A.shape[1]) if args.weights else np.ones(A.shape[1])
    report = cert.certify(
        A, w, args.k,
        cap=args.caps.get("support", DEFAULT_SUPPORT_CAP),
        row_cap=args.caps.get("rows", cert.DEFAULT_ROW_CAP),
    )
    for warn in report.warnings:
        print(f"warning: {warn}", file=sys.stderr)
    rec = JsonRecord("certificate", report.to_dict(), _provenance(args, k_flag=args.k))
    if args.out:
        rec.write(args.out)
    _emit(rec)
    return EXIT_OK


def cmd_falsify(args) -> int:
    A = read_matrix(args.matrix)
    w = _load_weights(args.weights, A.shape[1]) if args.weights else np.ones(A.shape[1])
    budget = cert.SearchBudget(
        directions=args.directions,
        seed=args.seed if args.seed is not None else 0,
        row_cap=args.caps.get("rows", cert.DEFAULT_FALSIFY_ROW_CAP),
        support_cap=args.caps.get("support", DEFAULT_SUPPORT_CAP),
    )
    res = cert.wnsp_falsify_real(A, w, args.k, budget)
    payload = {
        "found": res.found,
        "counterexample": res.counterexample.to_dict() if res.found else None,
        "row_subsets": res.row_subsets,
        "subspaces": res.subspaces,
        "samples": res.samples,
        "polishes": res.polishes,
        "notes": res.notes,
    }
    rec = JsonRecord("counterexample", payload, _provenance(args))
    if args.out:
        rec.write(args.out)
    _emit(rec)
    return EXIT_OK


def _load_config(arg: str) -> dict:
    path = Path(arg)
    if not path.exists():
        name = arg if arg.endswith(".json") else arg + ".json"
        bundled = resources.files("wsp") / "configs" / name
        if not bundled.is_file():
            raise FileNotFoundError(f"no config file or bundled config named {arg!r}")
        text = bundled.read_text()
        source = f"bundled:{name}"
    else:
        text = path.read_text()
        source = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(source, f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise FormatError(source, "config must be a JSON object")
    return doc


def cmd_experiment(args) -> int:
    doc = _load_config(args.config)
    if args.trials is not None:
        doc["trials"] = args.trials
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.eps is not None:
        doc["constraint_eps"] = doc["noise_eps"] = args.eps
        doc.pop("eps", None)
    if args.tol_feas_set:
        doc["feas_tol"] = args.tol_feas
    if args.tol_opt_set:
        doc["opt_tol"] = args.tol_opt
    caps = args.caps
    for key, field_name in (("support", "support_cap"), ("patterns", "pattern_cap"), ("rows", "row_cap")):
        if key in caps:
            doc[field_name] = caps[key]
    try:
        cfg = lab.ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid experiment config: {exc}") from None

    t0 = time.perf_counter()
    summary = {"config": cfg.to_dict(), "tool_version": TOOL_VERSION}
    if args.verify_bound:
        bsum, records = lab.bound_verification(cfg, workers=args.workers)
        csv_text = lab.trials_to_csv(records)
        summary["bound"] = bsum.to_dict()
        summary["violation_count"] = bsum.violation_count + (bsum.linear.violation_count if bsum.linear else 0)
        summary["trial_runtime_ms"] = sum(r.runtime_ms for r in records)
    elif cfg.m_values or cfg.k_values:
        rows, runtime = lab.phase_transition(cfg, workers=args.workers)
        csv_text = lab.grid_to_csv(rows)
        summary["grid"] = rows
        summary["trial_runtime_ms"] = runtime
    else:
        records = lab.run_trials(cfg, workers=args.workers)
        csv_text = lab.trials_to_csv(records)
        summary["successes"] = sum(r.success for r in records)
        summary["trial_runtime_ms"] = sum(r.runtime_ms for r in records)
    summary["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(csv_text)
        summary["csv"] = str(args.out)
    else:
        summary["csv_text"] = csv_text
    _emit(JsonRecord("summary", summary, _provenance(args, config_source=args.config)))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


class _TrackingStore(argparse.Action):
    """Store the value and remember that the flag was given explicitly."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, self.dest + "_set", True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nonneg_int, default=None, help="master seed")
    common.add_argument("--out", default=None, help="output file (.csv or .json)")
    common.add_argument("--caps", type=_caps, default={}, help="enumeration caps, e.g. support=24,patterns=16,rows=14")
    common.add_argument("--tol-feas", type=_positive_float, default=1e-8, action=_TrackingStore)
    common.add_argument("--tol-opt", type=_positive_float, default=1e-8, action=_TrackingStore)
    common.set_defaults(tol_feas_set=False, tol_opt_set=False)

    p = argparse.ArgumentParser(prog="wsp", description="Weighted sparse phaseless recovery toolkit.")
    p.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-matrix", parents=[common], help="random measurement matrix")
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--scale", type=_positive_float, default=None, help="entry variance (default 1/m)")
    g.add_argument("--kind", choices=("gaussian", "orthonormal"), default="gaussian")
    g.set_defaults(func=cmd_gen_matrix)

    g = sub.add_parser("gen-signal", parents=[common], help="random weighted k-sparse signal")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--weights", required=True, help="comma list or vector file; entries >= 1")
    g.add_argument("--k", type=_positive_float, required=True)
    g.add_argument("--magnitude", choices=("uniform12", "unit", "gaussian"), default="uniform12")
    g.set_defaults(func=cmd_gen_signal)

    g = sub.add_parser("solve", parents=[common], help="weighted l1 recovery from magnitudes")
    g.add_argument("--matrix", required=True)
    g.add_argument("--y", default=None, help="magnitude vector file")
    g.add_argument("--signal", default=None, help="signal file; magnitudes taken as |A x0|")
    g.add_argument("--weights", default=None)
    g.add_argument("--eps", type=_nonneg_float, default=0.0)
    g.add_argument("--mode", choices=("exact", "altmin"), default="exact")
    g.add_argument("--iters", type=_positive_int, default=50, help="altmin rounds")
    g.set_defaults(func=cmd_solve)

    g = sub.add_parser("certify", parents=[common], help="WRIP/SWRIP certificates of order 2k")
    g.add_argument("--matrix", required=True)
    g.add_argument("--weights", default=None)
    g.add_argument("--k", type=_positive_float, required=True, help="sparsity k; certificates are computed at order 2k")
    g.set_defaults(func=cmd_certify)

    g = sub.add_parser("falsify-wnsp", parents=[common], help="search for a weighted null space property violation")
    g.add_argument("--matrix", required=True)
    g.add_argument("--weights", default=None)
    g.add_argument("--k", type=_positive_float, required=True)
    g.add_argument("--directions", type=_positive_int, default=64)
    g.set_defaults(func=cmd_falsify)

    g = sub.add_parser("experiment", parents=[common], help="run a config-driven experiment")
    g.add_argument("--config", required=True, help="JSON config path or bundled config name")
    g.add_argument("--trials", type=_nonneg_int, default=None)
    g.add_argument("--eps", type=_nonneg_float, default=None)
    g.add_argument("--workers", type=_positive_int, default=None, help="threads (default WSP_THREADS or all cores)")
    g.add_argument("--verify-bound", action="store_true")
    g.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if getattr(args, "trials", None) == 0:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except AllPatternsInfeasible as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
