"""Command-line entry point.

Every command writes a JSON report tagged ``"schema": "koksma/1"`` holding the
resolved configuration, sha256 digests of all input files, the result and the
wall time. Exit codes: 0 success, 2 invalid input, 3 budget exceeded, 4 a
bound was found violated.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds, discrepancy, linreg, point_set, suite, variation
from .errors import BudgetExceeded, KoksmaError, ValidationError
from .measure import SignedAtomicMeasure, f_from_signed, measure_from_json, total_variation, uniform
from .parallel import default_workers

SCHEMA = "koksma/1"
EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_FALSIFIED = 0, 2, 3, 4


class _Run:
    """Collects input digests while a command reads its files."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.inputs: dict[str, str] = {}

    def read_text(self, path: str) -> str:
        data = Path(path).read_bytes()
        self.inputs[str(path)] = hashlib.sha256(data).hexdigest()
        return data.decode()

    def read_json(self, path: str):
        try:
            return json.loads(self.read_text(path))
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None

    def read_points(self, path: str) -> point_set.PointSet:
        return point_set.parse_csv(self.read_text(path))


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "verbose")}


def _emit(run: _Run, result: dict, started: float) -> None:
    report = {
        "schema": SCHEMA,
        "command": run.args.command,
        "config": _config(run.args),
        "inputs": run.inputs,
        "result": result,
        "wall_time": time.perf_counter() - started,
    }
    text = json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"
    out = getattr(run.args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_points(run: _Run) -> tuple[dict, int]:
    a = run.args
    if a.generator == "vdc":
        ps = point_set.van_der_corput(a.m, a.base)
    elif a.generator == "halton":
        ps = point_set.halton(a.m, a.d)
    elif a.generator == "centers":
        ps = point_set.equispaced_centers(a.m)
    else:
        if a.seed is None:
            raise ValidationError("random points need --seed")
        ps = uniform(a.d).sample(a.m, a.seed)
    text = point_set.format_csv(ps)
    if a.csv:
        Path(a.csv).write_text(text)
    result = {"m": ps.m, "d": ps.d, "sha256": hashlib.sha256(text.encode()).hexdigest()}
    if not a.csv:
        result["points"] = ps.tolist()
    return result, EXIT_OK


def _load_measure(run: _Run, path: str | None, d: int):
    if path is None:
        return uniform(d)
    return measure_from_json(run.read_json(path))


def cmd_discrepancy(run: _Run) -> tuple[dict, int]:
    a = run.args
    ps = run.read_points(a.points)
    nu = _load_measure(run, a.measure, ps.d)
    if a.lower_bound is not None:
        if a.seed is None:
            raise ValidationError("--lower-bound needs --seed")
        res = discrepancy.star_discrepancy_lower_bound(ps, nu, a.lower_bound, a.seed)
    else:
        res = discrepancy.star_discrepancy_exact(ps, nu, a.budget)
    return res.to_json(), EXIT_OK


def _function(run: _Run, spec: str, d: int | None, params: dict):
    kind, _, name = spec.partition(":")
    if kind == "builtin":
        if d is None:
            raise ValidationError("builtin functions need --d")
        return variation.builtin(name, d, **params), None
    if kind == "signed":
        nu_f = SignedAtomicMeasure.from_json(run.read_json(name))
        return f_from_signed(nu_f), nu_f
    raise ValidationError(f"--f must be builtin:<name> or signed:<file>, got {spec!r}")


def cmd_variation(run: _Run) -> tuple[dict, int]:
    a = run.args
    try:
        params = json.loads(a.params) if a.params else {}
    except json.JSONDecodeError as e:
        raise ValidationError(f"--params is not valid JSON: {e.msg}") from None
    f, nu_f = _function(run, a.f, a.d, params)
    rep = variation.hardy_krause_variation(f, a.level)
    result = rep.to_json()
    if nu_f is not None:
        result["total_variation_of_measure"] = total_variation(nu_f)
    if a.grid_n is not None and f.smoothness != "none":
        result["derivative"] = {
            ",".join(map(str, J)): dict(
                zip(("sup_bound", "integral_estimate"), variation.derivative_variation_bound(variation.restrict(f, J), a.grid_n))
            )
            for J in variation.subsets(f.arity)
        }
    return result, EXIT_OK


def _points_from(run: _Run, value) -> point_set.PointSet:
    if isinstance(value, str):
        return run.read_points(value)
    return point_set.PointSet(np.atleast_2d(np.asarray(value, dtype=np.float64)))


def cmd_bound(run: _Run) -> tuple[dict, int]:
    a = run.args
    cfg = run.read_json(a.config)
    kind = a.kind
    try:
        if kind == "compose":
            fspec = cfg["f"]
            if "signed" in fspec:
                nu_f = SignedAtomicMeasure.from_json(fspec["signed"])
                f = f_from_signed(nu_f)
            else:
                f = variation.builtin(fspec["builtin"], int(fspec["d"]), **fspec.get("params", {}))
            pts = _points_from(run, cfg["points"])
            nu = measure_from_json(cfg["measure"]) if "measure" in cfg else uniform(pts.d)
            vmode = cfg.get("variation", {"level": 6})
            mode = bounds.ClosedForm(vmode["value"]) if "value" in vmode else bounds.Numeric(int(vmode["level"]))
            rep = bounds.koksma_hlawka_bound(f, pts, nu, mode)
            return rep.to_json(), EXIT_OK if rep.satisfied else EXIT_FALSIFIED
        if kind == "identity":
            nu_f = SignedAtomicMeasure.from_json(cfg["signed"])
            pts = _points_from(run, cfg["points"])
            nu = measure_from_json(cfg["measure"]) if "measure" in cfg else uniform(pts.d)
            lhs, rhs, residual = bounds.verify_thm1_identity(nu_f, nu, pts)
            ok = residual <= 1e-12
            return {"lhs": lhs, "rhs": rhs, "residual": residual, "holds": ok}, EXIT_OK if ok else EXIT_FALSIFIED
        if kind == "zero-one":
            rep = bounds.zero_one_tightness(cfg["losses"], float(cfg["true_mass_one"]))
            return rep.to_json(), EXIT_OK if rep.satisfied else EXIT_FALSIFIED
        classes = cfg["classes"]
        args = (classes, int(cfg["d_z"]), float(cfg["c2"]), float(cfg["delta"]))
        terms = bounds.classwise_terms(*args)
        return {
            "bound": bounds.classwise_bound(*args),
            "per_class": [{"discrepancy_term": t[0], "hoeffding_term": t[1]} for t in terms],
        }, EXIT_OK
    except (KeyError, TypeError) as e:
        raise ValidationError(f"config {a.config}: missing or malformed field {e}") from None


def _dims(text: str) -> tuple[int, int]:
    try:
        dphi, dy = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected dphi,dy") from None
    return dphi, dy


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers") from None


def cmd_linreg(run: _Run) -> tuple[dict, int]:
    a = run.args
    dphi, dy = a.dims
    inst = linreg.make_instance(a.seed, dphi, dy, a.support, a.noise)
    if a.action == "study":
        table = linreg.remark5_rates(inst, a.m_list, a.trials, a.seed, a.c2, a.delta, a.workers)
        if a.csv:
            Path(a.csv).write_text(table.to_csv())
        return table.to_json(), EXIT_OK
    mode = "structured" if a.mode == "thm2" else "unstructured"
    sample = linreg.sample_training(inst, a.m, [a.seed, a.m], mode)
    if a.model == "fit":
        W = linreg.fit_least_squares(sample, a.ridge)
    elif a.model == "star":
        W = inst.W_star
    else:
        W = np.zeros_like(inst.W_star)
    if a.mode == "thm2":
        rep = linreg.verify_thm2(inst, sample, W)
    else:
        est = "exact_product" if a.mc is None else linreg.MonteCarlo(a.mc, a.seed)
        rep = linreg.verify_thm3(inst, sample, W, est)
    result = rep.to_json()
    result["W_hat"] = W.tolist()
    result["instance"] = inst.to_json()
    return result, EXIT_OK if rep.satisfied else EXIT_FALSIFIED


def cmd_suite(run: _Run) -> tuple[dict, int]:
    a = run.args
    numbers = list(range(1, 11)) if a.all or not a.criterion else sorted(set(a.criterion))
    results = []
    for n in numbers:
        if n not in range(1, 11):
            raise ValidationError(f"unknown criterion {n}")
        r = suite.run_criterion(n, a.seed, a.scale, a.workers)
        print(r.line(), file=sys.stderr)
        results.append(r)
    ok = all(r.passed for r in results)
    return {"passed": ok, "criteria": [r.to_json() for r in results]}, EXIT_OK if ok else EXIT_FALSIFIED


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koksma", description="Star discrepancy, variation and generalization-gap bounds.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("--out", help="report path (default: stdout)")
        sp.add_argument("--workers", type=int, default=default_workers())
        if seed:
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("points", help="generate a point set")
    sp.add_argument("--generator", choices=("vdc", "halton", "centers", "uniform"), required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--base", type=int, default=2)
    sp.add_argument("--csv", help="write the points as CSV here")
    common(sp, seed=True)
    sp.set_defaults(handler=cmd_points)

    sp = sub.add_parser("discrepancy", help="star discrepancy of a CSV point set")
    sp.add_argument("--points", required=True)
    sp.add_argument("--measure", help="measure JSON (default: uniform)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="exact grid enumeration (default)")
    g.add_argument("--lower-bound", type=int, metavar="N", help="local search with N random starts")
    sp.add_argument("--budget", type=int, default=discrepancy.default_budget())
    common(sp, seed=True)
    sp.set_defaults(handler=cmd_discrepancy)

    sp = sub.add_parser("variation", help="Hardy-Krause variation estimate")
    sp.add_argument("--f", required=True, help="builtin:<name> or signed:<file.json>")
    sp.add_argument("--d", type=int)
    sp.add_argument("--level", type=int, default=6)
    sp.add_argument("--params", help="JSON object of builtin parameters")
    sp.add_argument("--grid-n", type=int, help="also report finite-difference bounds on this grid")
    common(sp)
    sp.set_defaults(handler=cmd_variation)

    sp = sub.add_parser("bound", help="generalization-gap bounds")
    sp.add_argument("kind", choices=("compose", "identity", "zero-one", "classwise"))
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(handler=cmd_bound)

    sp = sub.add_parser("linreg", help="synthetic linear regression checks")
    sp.add_argument("action", choices=("verify", "study"))
    sp.add_argument("--mode", choices=("thm2", "thm3"), default="thm2")
    sp.add_argument("--dims", type=_dims, default=(2, 1))
    sp.add_argument("--support", type=int, default=8)
    sp.add_argument("--m", type=int, default=32)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--model", choices=("fit", "star", "zero"), default="fit")
    sp.add_argument("--ridge", type=float, default=1e-10)
    sp.add_argument("--mc", type=int, help="Monte Carlo draws for the expected loss (thm3)")
    sp.add_argument("--remark5", action="store_true", help="rate study (with 'study')")
    sp.add_argument("--m-list", type=_int_list, default=[64, 256, 1024])
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--c2", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--csv", help="CSV table path (with 'study')")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(handler=cmd_linreg)

    sp = sub.add_parser("suite", help="run acceptance property suites")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--all", action="store_true")
    g.add_argument("--criterion", type=int, action="append")
    sp.add_argument("--scale", choices=suite.SCALES, default="full")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(handler=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    run = _Run(args)
    started = time.perf_counter()
    try:
        result, code = args.handler(run)
    except BudgetExceeded as e:
        hint = "; retry with --lower-bound N --seed S" if args.command == "discrepancy" else ""
        print(f"koksma: budget exceeded: {e}{hint}", file=sys.stderr)
        return EXIT_BUDGET
    except (KoksmaError, OSError) as e:
        print(f"koksma: {e}", file=sys.stderr)
        return EXIT_INVALID
    _emit(run, result, started)
    return code


run = main


if __name__ == "__main__":
    sys.exit(main())
