"""Seeded Monte Carlo experiments for the max-deviation tests.

Every replication draws from its own generator derived from
``(seed, replication index)``, and replications are reduced in index order,
so reports do not depend on how many workers ran them.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from ._parallel import rep_rng, run_reps
from .asymvar import (CALIBRATED, beta_analytic, beta_bartlett,
                      candidate_conventions, mc_oracle)
from .covstat import projected_moments, projected_null
from .errors import ParameterError
from .gumbel import DEFAULT_VARIANT, VARIANTS, constants, gumbel_cdf
from .linproc import (LinearProcessSpec, population_covariance, simulate_values,
                      spec_from_dict)
from .projections import ProjectionSet, parse_scheme

SCENARIOS = ("null_gumbel", "size", "power", "coverage", "beta_calibration")


@dataclass(frozen=True)
class Perturbation:
    """Departure from the null applied to each simulated sample.

    ``variance_inflation`` multiplies coordinate ``coordinate`` (1-based) by
    ``sqrt(factor)``; ``cov_shift`` adds ``factor`` times coordinate
    ``source`` to coordinate ``coordinate``.
    """

    kind: str = "variance_inflation"
    coordinate: int = 1
    factor: float = 2.0
    source: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("variance_inflation", "cov_shift"):
            raise ParameterError(f"unknown perturbation {self.kind!r}")
        if self.kind == "variance_inflation" and self.factor < 0:
            raise ParameterError("variance inflation factor must be nonnegative")
        if self.kind == "cov_shift" and self.source is None:
            raise ParameterError("cov_shift needs a source coordinate")

    def apply(self, y: np.ndarray) -> np.ndarray:
        y = y.copy()
        c = self.coordinate - 1
        if self.kind == "variance_inflation":
            y[:, c] *= math.sqrt(self.factor)
        else:
            y[:, c] += self.factor * y[:, self.source - 1]
        return y

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "coordinate": self.coordinate, "factor": self.factor}
        if self.source is not None:
            out["source"] = self.source
        return out


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    scenario: str
    spec: LinearProcessSpec
    ps: ProjectionSet
    n: int
    reps: int
    alpha: float = 0.05
    seed: int = 0
    perturbation: Optional[Perturbation] = None
    centering: str = DEFAULT_VARIANT
    variance_source: str = "analytic"
    keep_raw: bool = False
    time_limit: Optional[float] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.scenario!r}")
        if self.reps < 100:
            raise ParameterError("reps must be at least 100")
        if self.n < 1:
            raise ParameterError("n must be positive")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if self.ps.d != self.spec.d:
            raise ParameterError(f"projection dimension {self.ps.d} != process dimension {self.spec.d}")
        if self.centering not in VARIANTS:
            raise ParameterError(f"unknown centering {self.centering!r}")
        if self.variance_source not in ("analytic", "bartlett"):
            raise ParameterError("variance_source must be 'analytic' or 'bartlett'")
        if self.scenario != "beta_calibration" and self.ps.m < 2:
            raise ParameterError("max tests need at least two projection pairs")

    @property
    def m(self) -> int:
        return self.ps.m

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "spec": self.spec.to_dict(),
               "projections": self.ps.to_dict(), "n": self.n, "reps": self.reps,
               "alpha": self.alpha, "seed": self.seed, "centering": self.centering,
               "variance_source": self.variance_source}
        if self.perturbation is not None:
            out["perturbation"] = self.perturbation.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict, entries_loader=None) -> "ExperimentPlan":
        spec = spec_from_dict(data["spec"])
        if "projections" in data:
            ps = ProjectionSet.from_dict(data["projections"])
        elif "scheme" in data:
            ps = parse_scheme(data["scheme"], spec.d, entries_loader=entries_loader)
        else:
            raise ParameterError("plan needs 'projections' or 'scheme'")
        pert = data.get("perturbation")
        return cls(
            scenario=data["scenario"], spec=spec, ps=ps, n=int(data["n"]), reps=int(data["reps"]),
            alpha=float(data.get("alpha", 0.05)), seed=int(data.get("seed", 0)),
            perturbation=None if pert is None else Perturbation(**pert),
            centering=data.get("centering", DEFAULT_VARIANT),
            variance_source=data.get("variance_source", "analytic"),
            keep_raw=bool(data.get("keep_raw", False)),
            time_limit=data.get("time_limit"),
        )


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    scenario: str
    plan: dict
    summary: dict
    raw: Optional[np.ndarray] = None
    raw_columns: tuple = ()
    runtime: float = 0.0

    def to_dict(self, meta: bool = True) -> dict:
        out = {"scenario": self.scenario, "plan": self.plan, "summary": self.summary}
        if meta:
            out["runtime_seconds"] = self.runtime
        return out


def ks_distance(samples, cdf=gumbel_cdf) -> float:
    """``sup_z |F_hat(z) - F(z)|`` for the empirical CDF of ``samples``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ParameterError("ks_distance needs at least one sample")
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def rate_summary(k: int, n: int) -> dict:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=0.95, method="exact")
    return {"count": int(k), "reps": int(n), "rate": k / n, "ci95": [ci.low, ci.high]}


RAW_COLUMNS = ("std_abs_max", "std_signed_max", "covered")


def _test_block(reps, spec, ps, n, seed, null, beta_diag, pert, q_abs, use_bartlett):
    out = np.empty((len(reps), 3))
    root_n = math.sqrt(n)
    for row, r in enumerate(reps):
        y = simulate_values(spec, n, rep_rng(seed, r))
        if pert is not None:
            y = pert.apply(y)
        est = projected_moments(y, ps)
        bd = beta_diag
        if use_bartlett:
            bd = np.clip(np.diag(beta_bartlett(y, ps).beta), 1e-12, None)
        std = root_n * (est - null) / np.sqrt(bd)
        half = np.sqrt(bd) * q_abs / root_n
        covered = np.all((null >= est - half) & (null <= est + half))
        out[row] = (np.max(np.abs(std)), np.max(std), float(covered))
    return out


def simulate_statistics(plan: ExperimentPlan, workers: Optional[int] = None) -> np.ndarray:
    """``reps x 3`` array: standardized |max|, signed max, CI coverage indicator."""
    spec, ps = plan.spec, plan.ps
    null = projected_null(population_covariance(spec), ps)
    beta_diag, _ = beta_analytic(spec, ps).diag_for_standardization()
    q_abs = constants(ps.m, plan.centering, plan.alpha).q_abs
    args = (spec, ps, plan.n, plan.seed, null, beta_diag, plan.perturbation, q_abs,
            plan.variance_source == "bartlett")
    deadline = None if plan.time_limit is None else time.monotonic() + float(plan.time_limit)
    return run_reps(_test_block, plan.reps, args, workers, deadline=deadline)


def _calibration_summary(plan: ExperimentPlan, workers) -> dict:
    oracle = mc_oracle(plan.spec, plan.ps, plan.n, plan.reps, plan.seed, workers)
    se = oracle.mc_se
    rows = []
    for conv in candidate_conventions():
        beta = beta_analytic(plan.spec, plan.ps, conv).beta
        z = np.abs(beta - oracle.beta) / se
        rows.append({"convention": conv.to_dict(), "max_abs_z": float(z.max()),
                     "matches": bool(z.max() <= 3.0)})
    default = beta_analytic(plan.spec, plan.ps, CALIBRATED).beta
    z = (default - oracle.beta) / se
    return {
        "oracle_beta": oracle.beta.tolist(), "oracle_se": se.tolist(),
        "analytic_beta": default.tolist(), "z_scores": z.tolist(),
        "max_abs_z": float(np.abs(z).max()), "default_matches": bool(np.abs(z).max() <= 3.0),
        "candidates": rows,
    }


def run(plan: ExperimentPlan, workers: Optional[int] = None) -> ExperimentReport:
    t0 = time.perf_counter()
    if plan.scenario == "beta_calibration":
        summary = _calibration_summary(plan, workers)
        return ExperimentReport(plan.scenario, plan.to_dict(), summary,
                                runtime=time.perf_counter() - t0)
    raw = simulate_statistics(plan, workers)
    T, S, cov = raw[:, 0], raw[:, 1], raw[:, 2]
    m, reps = plan.m, plan.reps
    variants = {}
    for variant in VARIANTS:
        cal = constants(m, variant, plan.alpha)
        z_abs = (T - cal.b_m) / cal.a_m
        z_signed = (S - cal.c_m) / cal.a_m
        variants[variant] = {
            "ks_abs": ks_distance(z_abs), "ks_signed": ks_distance(z_signed),
            "reject_abs": rate_summary(int(np.sum(T > cal.q_abs)), reps),
            "reject_signed": rate_summary(int(np.sum(S > cal.q_signed)), reps),
        }
    sel = variants[plan.centering]
    summary = {
        "m": m, "n": plan.n, "alpha": plan.alpha, "centering": plan.centering,
        "ks_distance": sel["ks_abs"], "ks_distance_signed": sel["ks_signed"],
        "reject_abs": sel["reject_abs"], "reject_signed": sel["reject_signed"],
        "coverage": rate_summary(int(cov.sum()), reps),
        "nominal_coverage": 1 - plan.alpha,
        "by_centering": variants,
    }
    return ExperimentReport(plan.scenario, plan.to_dict(), summary,
                            raw if plan.keep_raw else None, RAW_COLUMNS,
                            time.perf_counter() - t0)


def write_raw_csv(report: ExperimentReport, raw: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write("rep," + ",".join(RAW_COLUMNS) + "\n")
        for i, row in enumerate(raw):
            fh.write(f"{i}," + ",".join(repr(float(x)) for x in row) + "\n")
