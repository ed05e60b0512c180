"""``covmax`` command-line entry point.

Exit status is 0 when a pipeline completes (a rejection is an outcome, not
an error), 2 for invalid input and 1 for failures while computing.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .asymvar import (CALIBRATED, LITERAL, beta_analytic, beta_bartlett, decay_certificate,
                      mc_oracle)
from .covstat import acf_max_deviation, deviations, standardize
from .errors import CertificateError, CovmaxError, ParameterError
from .gumbel import DEFAULT_VARIANT, VARIANTS, constants, simultaneous_ci, test_abs_max, test_signed_max
from .linproc import population_covariance, read_sample_csv, simulate, spec_from_dict, write_sample_csv
from .mcharness import ExperimentPlan, run, write_raw_csv
from .portfolio import OneFactorModel, lmvp_weights, mvp_closed_form, risk_class_groups
from .projections import ProjectionSet, parse_scheme


class ValidationError(Exception):
    """Bad configuration or input file; maps to exit status 2."""


@dataclass
class RunConfig:
    subcommand: str
    args: argparse.Namespace

    def validate(self) -> None:
        a = self.args
        for name in ("spec", "sample", "sigma0", "proj", "series", "gamma0", "model", "plan"):
            p = getattr(a, name, None)
            if p is not None and not Path(p).is_file():
                raise ValidationError(f"input file not found: {p}")
        alpha = getattr(a, "alpha", None)
        if alpha is not None and not 0 < alpha < 1:
            raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


# --------------------------------------------------------------------- I/O

def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def read_matrix_csv(path) -> np.ndarray:
    """Dense numeric CSV without header; every row must have the same length."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if rows and len(row) != len(rows[0]):
                raise ValidationError(
                    f"{path}: line {lineno}: expected {len(rows[0])} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path}: empty file")
    return np.array(rows)


def read_series_csv(path) -> np.ndarray:
    """Univariate series: a sample CSV with one column, or a bare column of numbers."""
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("t"):
        vals = read_sample_csv(path).values
        if vals.shape[1] != 1:
            raise ValidationError(f"{path}: expected one series column, got {vals.shape[1]}")
        return vals[:, 0]
    return read_matrix_csv(path).ravel()


def entries_loader(path):
    if not Path(path).is_file():
        raise ValidationError(f"input file not found: {path}")
    if str(path).endswith(".json"):
        return [tuple(p) for p in load_json(path)]
    return [tuple(int(x) for x in row) for row in read_matrix_csv(path)]


def dump(obj: dict, meta: Optional[dict], out: Optional[str]) -> str:
    if meta is not None:
        obj = dict(obj, meta=meta)
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    return text


def projections_for(a, d: int) -> ProjectionSet:
    if getattr(a, "proj", None):
        ps = ProjectionSet.from_dict(load_json(a.proj))
    elif getattr(a, "scheme", None):
        ps = parse_scheme(a.scheme, d, entries_loader=entries_loader)
    else:
        raise ValidationError("give --proj or --scheme")
    if ps.d != d:
        raise ValidationError(f"projection dimension {ps.d} != data dimension {d}")
    return ps


# ------------------------------------------------------------- subcommands

def cmd_simulate(a, meta):
    spec = spec_from_dict(load_json(a.spec))
    sample = simulate(spec, a.n, a.seed)
    write_sample_csv(sample, a.out)
    return {"n": a.n, "d": spec.d, "seed": a.seed, "out": a.out, "spec": spec.to_dict()}, None


def cmd_variance(a, meta):
    spec = spec_from_dict(load_json(a.spec)) if a.spec else None
    if a.source == "bartlett":
        if not a.sample:
            raise ValidationError("--source bartlett needs --sample")
        sample = read_sample_csv(a.sample)
        ps = projections_for(a, sample.d)
        acm = beta_bartlett(sample, ps, a.bandwidth)
    else:
        if spec is None:
            raise ValidationError(f"--source {a.source} needs --spec")
        ps = projections_for(a, spec.d)
        if a.source == "analytic":
            acm = beta_analytic(spec, ps, LITERAL if a.convention == "literal" else CALIBRATED)
        else:
            acm = mc_oracle(spec, ps, a.n, a.reps, a.seed, a.workers)
    out = acm.to_dict()
    try:
        C, rho = decay_certificate(acm.beta)
        out["decay_certificate"] = {"C": C, "rho": rho}
    except CertificateError as exc:
        out["decay_certificate"] = {"error": str(exc)}
    return out, None


def cmd_test(a, meta):
    sample = read_sample_csv(a.sample)
    spec = spec_from_dict(load_json(a.spec)) if a.spec else None
    if a.sigma0:
        sigma0 = read_matrix_csv(a.sigma0)
    elif spec is not None:
        sigma0 = population_covariance(spec)
    else:
        raise ValidationError("give --sigma0 or --spec")
    ps = projections_for(a, sample.d)
    source = a.variance_source or ("analytic" if spec is not None else "bartlett")
    if source == "analytic":
        if spec is None:
            raise ValidationError("analytic variances need --spec")
        acm = beta_analytic(spec, ps)
    else:
        acm = beta_bartlett(sample, ps)
    bd, floored = acm.diag_for_standardization()
    res = standardize(deviations(sample, sigma0, ps), bd)
    cal = constants(ps.m, a.centering, a.alpha)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = (test_signed_max if a.signed else test_abs_max)(res, cal)
    ci = simultaneous_ci(res.estimates, bd, cal, res.n)
    out = {"test": rep.to_dict(), "deviations": res.to_dict(), "variance_source": source,
           "floored_pairs": [i + 1 for i in floored], "ci": ci.tolist(),
           "labels": list(ps.labels), "warnings": [str(w.message) for w in caught]}
    verdict = (f"{'signed' if a.signed else 'abs'}-max test: statistic {rep.statistic:.4f}, "
               f"normalized {rep.normalized:.4f}, p = {rep.p_value:.4g} -> "
               f"{'REJECT' if rep.reject else 'do not reject'} at alpha = {a.alpha} "
               f"(argmax pair {ps.labels[rep.argmax]})")
    return out, verdict


def cmd_acf_test(a, meta):
    z = read_series_csv(a.series)
    gamma0 = read_matrix_csv(a.gamma0).ravel()
    if len(gamma0) < a.maxlag + 1:
        raise ValidationError(f"{a.gamma0}: need {a.maxlag + 1} autocovariances, got {len(gamma0)}")
    res = acf_max_deviation(z, gamma0[: a.maxlag + 1], a.maxlag)
    out = res.to_dict()
    out["scaled_V_n"] = float(np.sqrt(res.n) * res.V_n)
    return out, None


def cmd_portfolio(a, meta):
    model = OneFactorModel.from_dict(load_json(a.model))
    mvp, lmvp = mvp_closed_form(model), lmvp_weights(model)
    out = {"model": model.to_dict(), "mvp": mvp.to_dict(), "lmvp": lmvp.to_dict()}
    if a.groups is not None:
        ps, diag = risk_class_groups(model, lmvp, a.groups, a.delta, a.rho)
        out["groups"] = {"projections": ps.to_dict(), "order_restriction": diag.to_dict()}
    return out, None


def cmd_mc(a, meta):
    plan_dict = load_json(a.plan)
    if a.raw_csv:
        plan_dict = dict(plan_dict, keep_raw=True)
    plan = ExperimentPlan.from_dict(plan_dict, entries_loader=entries_loader)
    report = run(plan, a.workers)
    if a.raw_csv and report.raw is not None:
        write_raw_csv(report, report.raw, a.raw_csv)
    if meta is not None:
        meta["mc_runtime_seconds"] = report.runtime
    return report.to_dict(meta=False), None


COMMANDS = {"simulate": cmd_simulate, "variance": cmd_variance, "test": cmd_test,
            "acf-test": cmd_acf_test, "portfolio": cmd_portfolio, "mc": cmd_mc}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covmax", description="Max-deviation tests for projected covariances.")
    p.add_argument("--version", action="version", version=f"covmax {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here (default: stdout)")
    common.add_argument("--no-meta", action="store_true", help="omit version and timing fields")
    common.add_argument("--workers", type=int, default=None)
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("simulate", help="simulate a linear process to CSV")
    s.add_argument("--spec", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="sample CSV path")
    s.add_argument("--no-meta", action="store_true")
    s.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("variance", parents=[common], help="asymptotic covariance matrix of the deviations")
    s.add_argument("--source", choices=("analytic", "bartlett", "oracle"), default="analytic")
    s.add_argument("--spec")
    s.add_argument("--sample")
    s.add_argument("--proj")
    s.add_argument("--scheme")
    s.add_argument("--convention", choices=("calibrated", "literal"), default="calibrated")
    s.add_argument("--bandwidth", type=int, default=None)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("test", parents=[common], help="max-deviation test of a sample")
    s.add_argument("--sample", required=True)
    s.add_argument("--sigma0")
    s.add_argument("--spec")
    s.add_argument("--proj")
    s.add_argument("--scheme")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--signed", action="store_true")
    s.add_argument("--centering", choices=VARIANTS, default=DEFAULT_VARIANT)
    s.add_argument("--variance-source", choices=("analytic", "bartlett"), default=None)
    s.add_argument("--json", action="store_true", help="print the JSON report after the verdict")

    s = sub.add_parser("acf-test", parents=[common], help="max autocovariance deviation")
    s.add_argument("--series", required=True)
    s.add_argument("--gamma0", required=True)
    s.add_argument("--maxlag", type=int, required=True)

    s = sub.add_parser("portfolio", parents=[common], help="MVP and long-only MVP weights")
    s.add_argument("--model", required=True)
    s.add_argument("--groups", type=int, default=None)
    s.add_argument("--delta", type=float, default=0.5)
    s.add_argument("--rho", type=float, default=0.5)

    s = sub.add_parser("mc", parents=[common], help="run a Monte Carlo plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--raw-csv", default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    cfg = RunConfig(a.subcommand, a)
    t0 = time.perf_counter()
    try:
        cfg.validate()
        meta = None if a.no_meta else {"version": __version__}
        out, verdict = COMMANDS[a.subcommand](a, meta)
        if meta is not None:
            meta["runtime_seconds"] = time.perf_counter() - t0
    except (ValidationError, ParameterError, KeyError, FileNotFoundError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        if isinstance(exc, FileNotFoundError):
            msg = f"input file not found: {exc.filename}"
        print(f"covmax: error: {msg}", file=sys.stderr)
        return 2
    except (CovmaxError, ArithmeticError, np.linalg.LinAlgError, OSError, RuntimeError) as exc:
        print(f"covmax: {a.subcommand} failed: {exc}", file=sys.stderr)
        return 1
    if a.subcommand == "simulate":
        text = dump(out, meta, None)
    else:
        text = dump(out, meta, a.out)
    if verdict is not None:
        print(verdict)
        if a.json:
            sys.stdout.write(text)
    elif not getattr(a, "out", None) or a.subcommand == "simulate":
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
