"""Gumbel calibration of the max statistics.

Two centerings are available.  ``classical`` uses the textbook constants
for maxima of ``m`` standard Gaussians,

    b_m = sqrt(2 log m) - (log log m + log pi)   / (2 sqrt(2 log m))   (|max|)
    c_m = sqrt(2 log m) - (log log m + log 4 pi) / (2 sqrt(2 log m))   (signed max)

and is the default.  ``paper`` evaluates the alternative constants
``b_m = sqrt(2 log m) - (8 log m)^(-1/2) (log log m + 4 pi - 4)`` and
``c_m = (2 log m)^(-1/2) - (1/2)(2 log m)^(-1/2)(log log m + 4 pi)``
verbatim.  Under the null the classical centering is the one whose
normalised maxima are close to Gumbel; see ``tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covstat import DeviationResult
from .errors import DegenerateVarianceError, ParameterError

VARIANTS = ("classical", "paper")
DEFAULT_VARIANT = "classical"


class GrowthConditionWarning(UserWarning):
    """``m sqrt(2 log m)`` is not small relative to ``n^(1/6)``."""


@dataclass(frozen=True)
class GumbelCalibration:
    m: int
    a_m: float
    b_m: float
    c_m: float
    variant: str = DEFAULT_VARIANT
    alpha: float = 0.05

    @property
    def gumbel_quantile(self) -> float:
        return gumbel_quantile(self.alpha)

    @property
    def q_abs(self) -> float:
        """Critical value for the standardized |max|: ``a_m G^{-1}(1 - alpha) + b_m``."""
        return self.a_m * self.gumbel_quantile + self.b_m

    @property
    def q_signed(self) -> float:
        return self.a_m * self.gumbel_quantile + self.c_m

    def to_dict(self) -> dict:
        return {"m": self.m, "a_m": self.a_m, "b_m": self.b_m, "c_m": self.c_m,
                "variant": self.variant, "alpha": self.alpha,
                "q_abs": self.q_abs, "q_signed": self.q_signed}


def constants(m: int, variant: str = DEFAULT_VARIANT, alpha: float = 0.05) -> GumbelCalibration:
    if m < 2:
        raise ParameterError(f"Gumbel constants need m >= 2, got {m}")
    if variant not in VARIANTS:
        raise ParameterError(f"unknown centering variant {variant!r}")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    L = math.log(m)
    LL = math.log(L)
    root = math.sqrt(2 * L)
    a = 1.0 / root
    if variant == "paper":
        b = root - (LL + 4 * math.pi - 4) / math.sqrt(8 * L)
        c = 1.0 / root - 0.5 / root * (LL + 4 * math.pi)
    else:
        b = root - (LL + math.log(math.pi)) / (2 * root)
        c = root - (LL + math.log(4 * math.pi)) / (2 * root)
    return GumbelCalibration(m, a, b, c, variant, alpha)


def gumbel_cdf(z):
    return np.exp(-np.exp(-np.asarray(z, dtype=float)))


def gumbel_sf(z):
    """``1 - exp(-e^{-z})`` without cancellation in the upper tail."""
    return -np.expm1(-np.exp(-np.asarray(z, dtype=float)))


def gumbel_quantile(alpha: float) -> float:
    """Upper-``alpha`` point of the standard Gumbel law, ``-log(-log(1 - alpha))``."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return -math.log(-math.log1p(-alpha))


def growth_ok(m: int, n: int) -> bool:
    """``m sqrt(2 log m) < n^(1/6)``, the boundary case of the rate condition."""
    return m * math.sqrt(2 * math.log(m)) < n ** (1.0 / 6.0)


@dataclass(frozen=True, eq=False)
class TestReport:
    kind: str
    statistic: float
    normalized: float
    p_value: float
    reject: bool
    alpha: float
    argmax: int
    growth_check: bool
    calibration: GumbelCalibration
    ci: Optional[np.ndarray] = field(default=None)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "statistic": self.statistic, "normalized": self.normalized,
               "p_value": self.p_value, "reject": self.reject, "alpha": self.alpha,
               "argmax_pair": self.argmax + 1, "growth_check": self.growth_check,
               "calibration": self.calibration.to_dict()}
        if self.ci is not None:
            out["ci"] = self.ci.tolist()
        return out


def _report(kind, stat, center, argmax, res, cal, warn) -> TestReport:
    z = (stat - center) / cal.a_m
    ok = growth_ok(res.m, res.n)
    if not ok and warn:
        warnings.warn(f"m = {res.m} is large for n = {res.n}; Gumbel approximation may be poor",
                      GrowthConditionWarning, stacklevel=3)
    p = float(gumbel_sf(z))
    return TestReport(kind, stat, float(z), p, bool(z > cal.gumbel_quantile), cal.alpha,
                      argmax, ok, cal)


def _check(res: DeviationResult, cal: GumbelCalibration):
    if not res.standardized:
        raise ParameterError("deviations must be standardized before testing")
    if res.m != cal.m:
        raise ParameterError(f"calibration is for m={cal.m}, deviations have m={res.m}")


def test_abs_max(res: DeviationResult, cal: GumbelCalibration, warn: bool = True) -> TestReport:
    """Two-sided test on ``max_j |D_nj| / beta_jj^(1/2)`` centred at ``b_m``."""
    _check(res, cal)
    return _report("abs", res.std_max, cal.b_m, int(np.argmax(np.abs(res.std_devs))),
                   res, cal, warn)


def test_signed_max(res: DeviationResult, cal: GumbelCalibration, warn: bool = True) -> TestReport:
    """One-sided test against upward deviations, centred at ``c_m``."""
    _check(res, cal)
    return _report("signed", res.std_signed_max, cal.c_m, int(np.argmax(res.std_devs)),
                   res, cal, warn)


test_abs_max.__test__ = False
test_signed_max.__test__ = False


def simultaneous_ci(estimates, beta_diag, cal: GumbelCalibration, n: int) -> np.ndarray:
    """``m x 2`` array of intervals ``v_j'Sigma_hat w_j +- beta_jj^(1/2) q / sqrt(n)``.

    A hypothesised value lies outside interval ``j`` for some ``j`` exactly
    when :func:`test_abs_max` rejects at the same level.
    """
    est = np.asarray(estimates, dtype=float)
    beta_diag = np.asarray(beta_diag, dtype=float)
    if est.shape != beta_diag.shape:
        raise ParameterError("estimates and variances differ in length")
    if np.any(~(beta_diag > 0)):
        raise DegenerateVarianceError("nonpositive asymptotic variance in interval construction")
    half = np.sqrt(beta_diag) * cal.q_abs / math.sqrt(n)
    return np.column_stack([est - half, est + half])


def ci_excludes(ci: np.ndarray, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return (values < ci[:, 0]) | (values > ci[:, 1])
