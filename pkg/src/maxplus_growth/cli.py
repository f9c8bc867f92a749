"""Command-line interface.

Commands: ``bounds``, ``lambda``, ``reproduce-paper``, ``enumerate-check``.
Exit codes: 0 success, 1 estimation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .algebra import MaxPlusMatrix, mat_otimes, norm
from .bounds import (
    ERROR_BOUND,
    KINDS,
    LOWER_BASIC,
    LOWER_NESTED,
    LOWER_ROWMAX,
    UPPER_BASIC,
    BoundReport,
    all_bounds,
    best_bounds,
    error_constant,
)
from .errors import EstimationError, ModelError
from .expectation import (
    DEFAULT_CAP,
    ConjMeans,
    EntryMeans,
    ExactSource,
    FixtureSource,
    MonteCarloSource,
    NormMean,
    all_functionals,
    exact_means,
    mc_means,
    nested_inner_vector,
    outcome_count,
)
from .models import BUILTIN_MODELS, MatrixModel, SeedSpec
from .simulate import LambdaEstimate, estimate_lambda, simulate_state

BOUNDS_HEADER = ["kind", "l", "m", "value", "stderr", "method"]


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------


def parse_grid(text: str) -> list[int]:
    """``"3"`` -> [3], ``"1..3"`` -> [1, 2, 3], ``"1,4"`` -> [1, 4]."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if ".." in part:
                a, b = part.split("..")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"bad integer grid {text!r}")
    if not out:
        raise ConfigError(f"empty grid {text!r}")
    return out


def _positive_grid(text: str, name: str) -> list[int]:
    grid = parse_grid(text)
    if min(grid) < 1:
        raise ConfigError(f"{name} must be ≥ 1")
    return grid


def _load_model(args) -> tuple[MatrixModel, Optional[str]]:
    if args.model and args.builtin:
        raise ConfigError("give either --model or --builtin, not both")
    if args.builtin:
        if args.builtin not in BUILTIN_MODELS:
            raise ConfigError(f"unknown builtin model {args.builtin!r}")
        return BUILTIN_MODELS[args.builtin](), args.builtin
    if not args.model:
        raise ConfigError("a model is required (--model PATH|JSON or --builtin NAME)")
    text = args.model.strip()
    if not text.startswith("{"):
        try:
            text = Path(args.model).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read model file: {exc}")
    return MatrixModel.from_json(text), None


def _require_seed(args) -> SeedSpec:
    if args.seed is None:
        raise ConfigError("--seed is required for stochastic commands")
    try:
        return SeedSpec(args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _source(args, model, builtin, grid_max: int):
    method = args.method
    if method == "fixtures":
        if builtin != "paper-test":
            raise ConfigError("--method fixtures is only valid with --builtin paper-test")
        return FixtureSource()
    if method == "auto":
        method = "exact" if model.is_discrete and outcome_count(model, grid_max) <= args.cap else "mc"
    if method == "exact":
        return ExactSource(model, args.cap)
    return MonteCarloSource(model, args.samples, _require_seed(args), args.threads)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _num(x):
    """6 significant digits; -inf kept as a string so JSON stays standard."""
    if x is None:
        return None
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return repr(x)
    return float(f"{x:.6g}")


def report_row(r: BoundReport) -> dict:
    rec = r.to_record()
    rec["value"] = _num(r.value)
    rec["stderr"] = _num(r.stderr)
    return rec


def summary_rows(reports: list[BoundReport]) -> list[dict]:
    best = best_bounds(reports)
    rows = []
    for side, src in (("best_lower", best.lower_from), ("best_upper", best.upper_from)):
        if src is None:
            rows.append({"kind": side, "l": None, "m": None, "value": None, "stderr": None,
                         "method": "missing"})
        else:
            rows.append({"kind": side, "l": src.l, "m": src.m, "value": _num(src.value),
                         "stderr": _num(src.stderr), "method": src.method,
                         "source_kind": src.kind})
    return rows


def _csv_cell(v) -> str:
    return "" if v is None else str(v)


def bounds_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDS_HEADER)
    for row in rows:
        w.writerow([_csv_cell(row.get(k)) for k in BOUNDS_HEADER])
    return buf.getvalue()


def _emit(args, doc: dict, csv_text: str) -> None:
    text = json.dumps(doc, indent=2) + "\n" if args.format == "json" else csv_text
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _model_doc(model: MatrixModel, builtin: Optional[str]):
    return {"builtin": builtin} if builtin else model.to_dict()


def _run_info(args, source) -> dict:
    info = {"method": source.method}
    if isinstance(source, MonteCarloSource):
        info.update(seed=args.seed, samples=args.samples)
    return info


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_bounds(args) -> int:
    ms = _positive_grid(args.m, "m")
    ls = _positive_grid(args.l, "l") if args.l else ms
    kinds = args.kinds.split(",") if args.kinds else list(KINDS)
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise ConfigError(f"unknown bound kinds {bad}")
    model, builtin = _load_model(args)
    source = _source(args, model, builtin, max(ms + ls))

    reports = all_bounds(source, ms, ls, kinds)
    rows = [report_row(r) for r in reports]
    summary = summary_rows(reports)
    doc = {"command": "bounds", "model": _model_doc(model, builtin), **_run_info(args, source),
           "reports": rows, "summary": summary}
    _emit(args, doc, bounds_csv(rows + summary))
    return 0


def cmd_lambda(args) -> int:
    if args.horizon < 1:
        raise ConfigError("horizon must be ≥ 1")
    if args.replications < 2:
        raise ConfigError("replications must be ≥ 2")
    if args.record_every < 1:
        raise ConfigError("record-every must be ≥ 1")
    model, builtin = _load_model(args)
    seed = _require_seed(args)

    est = estimate_lambda(model, args.horizon, args.replications, seed, args.threads)
    rec = est.to_record()
    rec["lambda_hat"] = _num(est.lambda_hat)
    rec["stderr"] = _num(est.stderr)
    rec["per_replicate"] = [_num(v) for v in est.per_replicate]
    doc = {"command": "lambda", "model": _model_doc(model, builtin), "seed": args.seed,
           "estimate": rec}

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["record", "index", "value"])
    for key in ("lambda_hat", "stderr", "replications", "horizon"):
        w.writerow([key, "", rec[key]])
    for r, v in enumerate(rec["per_replicate"]):
        w.writerow(["replicate", r, v])
    csv_text = buf.getvalue()

    if args.with_bounds:
        ms = _positive_grid(args.m, "m")
        source = _source(args, model, builtin, max(ms))
        reports = all_bounds(source, ms)
        rows = [report_row(r) for r in reports]
        summary = summary_rows(reports)
        best = best_bounds(reports)
        sigma = est.stderr
        lo = -math.inf if best.lower is None else best.lower - 3 * sigma
        hi = math.inf if best.upper is None else best.upper + 3 * sigma
        violation = not (lo <= est.lambda_hat <= hi)
        if violation:
            print(f"warning: lambda estimate {est.lambda_hat:.6g} outside the bound envelope "
                  f"[{lo:.6g}, {hi:.6g}]", file=sys.stderr)
        doc.update(bounds_method=source.method, reports=rows, summary=summary,
                   envelope_violation=violation)
        csv_text += "\n" + bounds_csv(rows + summary)

    if args.trajectory:
        zero = MaxPlusMatrix.zeros(model.n)
        traj = simulate_state(model, zero, args.horizon, seed.child(0), args.record_every)
        lines = ["k,norm"] + [f"{k},{v!r}" for k, v in traj]
        Path(args.trajectory).write_text("\n".join(lines) + "\n")

    _emit(args, doc, csv_text)
    return 0


def cmd_reproduce_paper(args) -> int:
    model = BUILTIN_MODELS["paper-test"]()
    if args.method in ("fixtures", "auto"):
        source = FixtureSource()
    elif args.method == "mc":
        source = MonteCarloSource(model, args.samples, _require_seed(args), args.threads)
    else:
        raise ConfigError("reproduce-paper supports --method fixtures or mc")

    grid = [1, 2, 3]
    reports = all_bounds(source, grid, kinds=(LOWER_BASIC, UPPER_BASIC))
    reports += all_bounds(source, grid, kinds=(LOWER_ROWMAX,))
    reports += all_bounds(source, grid, grid, kinds=(LOWER_NESTED,))
    reports += all_bounds(source, grid, kinds=(ERROR_BOUND,))
    rows = [report_row(r) for r in reports]
    summary = summary_rows([r for r in reports if r.kind != ERROR_BOUND])
    c_report = next(r for r in reports if r.kind == ERROR_BOUND and r.m == 1)
    summary.append({"kind": "error_constant", "l": None, "m": None,
                    "value": _num(error_constant(source)), "stderr": _num(c_report.stderr),
                    "method": c_report.method})
    doc = {"command": "reproduce-paper", "model": {"builtin": "paper-test"},
           **_run_info(args, source), "reports": rows, "summary": summary}
    _emit(args, doc, bounds_csv(rows + summary))
    return 0


def cmd_enumerate_check(args) -> int:
    ms = _positive_grid(args.m, "m")
    model, _ = _load_model(args)
    seed = _require_seed(args)
    exact1 = dict(zip([ConjMeans(1), EntryMeans(1), NormMean(1)],
                      exact_means(model, [ConjMeans(1), EntryMeans(1), NormMean(1)], args.cap)))
    v = nested_inner_vector(exact1[ConjMeans(1)].value)

    rows = []
    ok = True
    for m in ms:
        fs = all_functionals(v, [m])
        exact = exact_means(model, fs[:-1], args.cap) + exact_means(model, fs[-1:], args.cap)
        mc = mc_means(model, fs[:-1], args.samples, seed.child(m, 0), args.threads)
        mc += mc_means(model, fs[-1:], args.samples, seed.child(m, 1), args.threads)
        for f, ex, est in zip(fs, exact, mc):
            ex_a, mc_a, se_a = ex.as_array(), est.as_array(), est.stderr_array()
            for idx in np.ndindex(ex_a.shape):
                diff = abs(float(mc_a[idx]) - float(ex_a[idx]))
                se = float(se_a[idx])
                z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
                passed = z <= 4.0
                ok &= passed
                rows.append({"functional": f.ident, "m": m,
                             "entry": ",".join(map(str, idx)),
                             "exact": _num(ex_a[idx]), "mc": _num(mc_a[idx]),
                             "stderr": _num(se), "z": _num(z), "pass": passed})

    checks = [{"check": "norm_of_mean",
               "pass": exact1[NormMean(1)].value >= norm(exact1[EntryMeans(1)].value)}]
    if model.is_discrete:
        e1 = exact1[EntryMeans(1)].value
        e2 = exact_means(model, [EntryMeans(2)], args.cap)[0].value
        checks.append({"check": "product_of_means", "pass": e2 >= mat_otimes(e1, e1)})
    ok &= all(c["pass"] for c in checks)

    doc = {"command": "enumerate-check", "model": model.to_dict(), "seed": args.seed,
           "samples": args.samples, "rows": rows, "checks": checks, "passed": ok}
    header = ["functional", "m", "entry", "exact", "mc", "stderr", "z", "pass"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(row[k]) for k in header])
    for c in checks:
        w.writerow([c["check"], "", "", "", "", "", "", c["pass"]])
    _emit(args, doc, buf.getvalue())
    return 0 if ok else 1


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file or inline JSON document")
    common.add_argument("--builtin", help="built-in model name (paper-test)")
    common.add_argument("--seed", type=int, help="64-bit seed; required for Monte Carlo")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--method", choices=["auto", "mc", "exact", "fixtures"], default="auto")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP,
                        help="maximum joint outcomes for exact enumeration")

    p = argparse.ArgumentParser(prog="maxplus-growth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="evaluate growth-rate bounds")
    b.add_argument("--m", default="1..3", help="chain lengths, e.g. 3, 1..3 or 1,2")
    b.add_argument("--l", help="inner chain lengths for the nested bound (default: --m)")
    b.add_argument("--kinds", help=f"comma-separated subset of {','.join(KINDS)}")
    b.add_argument("--samples", type=int, default=10**5)
    b.set_defaults(func=cmd_bounds)

    lam = sub.add_parser("lambda", parents=[common], help="simulate and estimate the growth rate")
    lam.add_argument("--horizon", type=int, default=10**5)
    lam.add_argument("--replications", type=int, default=16)
    lam.add_argument("--with-bounds", action="store_true",
                     help="also compute bounds and check the estimate against them")
    lam.add_argument("--m", default="1..3")
    lam.add_argument("--samples", type=int, default=10**5)
    lam.add_argument("--trajectory", help="write k,norm rows of replicate 0 to this path")
    lam.add_argument("--record-every", type=int, default=1000)
    lam.set_defaults(func=cmd_lambda)

    rp = sub.add_parser("reproduce-paper", parents=[common],
                        help="tables for the built-in 2x2 exponential test model")
    rp.add_argument("--samples", type=int, default=10**6)
    rp.set_defaults(func=cmd_reproduce_paper)

    ec = sub.add_parser("enumerate-check", parents=[common],
                        help="compare exact enumeration with Monte Carlo on a discrete model")
    ec.add_argument("--m", default="1,2")
    ec.add_argument("--samples", type=int, default=10**5)
    ec.set_defaults(func=cmd_enumerate_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("threads must be ≥ 1")
        if getattr(args, "samples", 2) < 2:
            raise ConfigError("samples must be ≥ 2")
        return args.func(args)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
