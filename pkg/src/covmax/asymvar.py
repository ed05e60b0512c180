"""Asymptotic covariances of projected sample covariances.

For pairs ``i`` and ``k`` let ``a_j = v_i'c_j``, ``b_j = w_i'c_j`` and
``u_j = v_k'c_j``, ``s_j = w_k'c_j`` be the projected coefficient
sequences.  The building blocks are

* ``F_i = 2 sum_{j >= j0} a_j b_j``
* ``F_ik = F^(1) + F^(2) + F^(3) + F^(4)``, the four cross products of
  ``(a_j b_{j+l} + a_{j+l} b_j)`` and ``(u_j s_{j+l} + u_{j+l} s_j)``
  summed over lags ``l >= 1``,

and ``beta_ik = scale * F_i F_k (E eps^4 - sigma^4) + F_ik sigma^4``.

Where the ``j``-sum sits in ``F_ik`` is part of the :class:`Convention`.
``lag_sums`` multiplies the two lag-``l`` sums ``sum_j (...)``;
``pointwise`` multiplies the brackets at equal ``j`` and then sums.  The
default convention (``j0 = 0``, ``scale = 1/4``, ``lag_sums``) is the one
that reproduces the Monte Carlo covariance of ``sqrt(n) v'(Sigma_hat -
Sigma) w``; :data:`LITERAL` keeps the alternative reading.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._parallel import rep_rng, run_reps
from .covstat import projected_moments, projected_null
from .errors import CertificateError, DimensionError, ParameterError
from .linproc import LinearProcessSpec, TimeSeriesSample, population_covariance, simulate_values
from .projections import ProjectionSet, perturb

DIAG_FLOOR = 1e-12


@dataclass(frozen=True)
class Convention:
    f_start: int = 0
    fik_start: int = 0
    fourth_scale: float = 0.25
    fik_form: str = "lag_sums"

    def __post_init__(self):
        if self.f_start not in (0, 1) or self.fik_start not in (0, 1):
            raise ParameterError("lag ranges start at 0 or 1")
        if self.fik_form not in ("lag_sums", "pointwise"):
            raise ParameterError("fik_form must be 'lag_sums' or 'pointwise'")

    def to_dict(self) -> dict:
        return asdict(self)


CALIBRATED = Convention()
LITERAL = Convention(f_start=1, fik_start=1, fourth_scale=1.0, fik_form="pointwise")


def candidate_conventions() -> list[Convention]:
    """Grid searched when calibrating against the Monte Carlo oracle."""
    return [
        Convention(fs, ks, scale, form)
        for fs in (0, 1) for ks in (0, 1)
        for scale in (1.0, 0.5, 0.25)
        for form in ("lag_sums", "pointwise")
    ]


def _projected_coeffs(spec: LinearProcessSpec, ps: ProjectionSet):
    if ps.d != spec.d:
        raise DimensionError(f"projection dimension {ps.d} != process dimension {spec.d}")
    c = spec.coeffs
    return c @ ps.vs.T, c @ ps.ws.T  # (J+1, m) each


def _f_all(a: np.ndarray, b: np.ndarray, start: int) -> np.ndarray:
    return 2.0 * np.einsum("jm,jm->m", a[start:], b[start:])


def _lag_products(a: np.ndarray, b: np.ndarray, start: int):
    """Per-(l, j) products ``a_j b_{j+l}`` and ``a_{j+l} b_j`` for ``l >= 1``.

    Returns arrays of shape ``(L, J+1, m)`` with zeros beyond the table.
    """
    J1, m = a.shape
    L = J1 - 1
    ab = np.zeros((max(L, 1), J1, m))
    ba = np.zeros_like(ab)
    for l in range(1, L + 1):
        ab[l - 1, : J1 - l] = a[: J1 - l] * b[l:]
        ba[l - 1, : J1 - l] = a[l:] * b[: J1 - l]
    if start:
        ab[:, :start] = 0.0
        ba[:, :start] = 0.0
    return ab, ba


def _fik_terms_all(a, b, start: int, form: str):
    """The four ``m x m`` matrices ``F^(1)..F^(4)``."""
    ab, ba = _lag_products(a, b, start)
    if form == "lag_sums":
        sab, sba = ab.sum(axis=1), ba.sum(axis=1)  # (L, m)
    else:
        L, J1, m = ab.shape
        sab, sba = ab.reshape(L * J1, m), ba.reshape(L * J1, m)
    # pair k enters through (u_j s_{j+l}) and (u_{j+l} s_j), i.e. the same arrays
    return (sab.T @ sab, sab.T @ sba, sba.T @ sab, sba.T @ sba)


def f_ni(spec: LinearProcessSpec, ps: ProjectionSet, i: int,
         convention: Convention = CALIBRATED) -> float:
    """``F_i`` for pair position ``i`` (0-based)."""
    a, b = _projected_coeffs(spec, ps)
    return float(_f_all(a[:, [i]], b[:, [i]], convention.f_start)[0])


def f_nik_terms(spec: LinearProcessSpec, ps: ProjectionSet, i: int, k: int,
                convention: Convention = CALIBRATED) -> tuple:
    a, b = _projected_coeffs(spec, ps)
    idx = [i, k]
    terms = _fik_terms_all(a[:, idx], b[:, idx], convention.fik_start, convention.fik_form)
    return tuple(float(t[0, 1]) for t in terms)


def f_nik(spec: LinearProcessSpec, ps: ProjectionSet, i: int, k: int,
          convention: Convention = CALIBRATED) -> float:
    """``F_ik`` for pair positions ``i``, ``k`` (0-based)."""
    return float(sum(f_nik_terms(spec, ps, i, k, convention)))


@dataclass(frozen=True, eq=False)
class AsymCovMatrix:
    beta: np.ndarray
    source: str
    convention: dict = field(default_factory=dict)
    mc_se: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return self.beta.shape[0]

    def diag_for_standardization(self, floor: float = DIAG_FLOOR):
        """Diagonal floored at ``floor`` and the positions that were floored."""
        d = np.diag(self.beta).copy()
        low = np.nonzero(d < floor)[0]
        d[low] = floor
        return d, low.tolist()

    def to_dict(self) -> dict:
        out = {"source": self.source, "m": self.m, "beta": self.beta.tolist(),
               "convention": self.convention}
        if self.mc_se is not None:
            out["mc_se"] = self.mc_se.tolist()
        return out


def beta_analytic(spec: LinearProcessSpec, ps: ProjectionSet,
                  convention: Convention = CALIBRATED) -> AsymCovMatrix:
    a, b = _projected_coeffs(spec, ps)
    F = _f_all(a, b, convention.f_start)
    Fik = sum(_fik_terms_all(a, b, convention.fik_start, convention.fik_form))
    s4 = spec.sigma2**2
    beta = convention.fourth_scale * np.outer(F, F) * (spec.innovations.gamma4 - s4) + Fik * s4
    beta = 0.5 * (beta + beta.T)
    record = convention.to_dict()
    record["gamma4"] = spec.innovations.gamma4
    record["sigma2"] = spec.sigma2
    return AsymCovMatrix(beta, "analytic", record)


def _oracle_block(reps: np.ndarray, spec, ps, n, seed, null) -> np.ndarray:
    out = np.empty((len(reps), ps.m))
    for row, r in enumerate(reps):
        y = simulate_values(spec, n, rep_rng(seed, r))
        out[row] = math.sqrt(n) * (projected_moments(y, ps) - null)
    return out


def oracle_draws(spec: LinearProcessSpec, ps: ProjectionSet, n: int, reps: int, seed: int,
                 workers: Optional[int] = None) -> np.ndarray:
    """``reps x m`` array of simulated ``sqrt(n) v_j'(Sigma_hat - Sigma) w_j``."""
    null = projected_null(population_covariance(spec), ps)
    return run_reps(_oracle_block, reps, (spec, ps, n, seed, null), workers)


def jackknife_cov(x: np.ndarray):
    """Sample covariance (``ddof=1``) and delete-one jackknife standard errors."""
    R, m = x.shape
    s1 = x.sum(axis=0)
    s2 = x.T @ x
    cov = (s2 - np.outer(s1, s1) / R) / (R - 1)
    se = np.empty((m, m))
    for i in range(m):
        # leave-one-out covariances of column i with every column, one row per deletion
        loo_s2 = s2[i][None, :] - x[:, [i]] * x
        loo_s1i = s1[i] - x[:, [i]]
        loo_s1 = s1[None, :] - x
        loo = (loo_s2 - loo_s1i * loo_s1 / (R - 1)) / (R - 2)
        se[i] = np.sqrt((R - 1) / R * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return cov, se


def mc_oracle(spec: LinearProcessSpec, ps: ProjectionSet, n: int, reps: int, seed: int,
              workers: Optional[int] = None) -> AsymCovMatrix:
    """Empirical covariance of the scaled deviations over independent samples."""
    if reps < 100:
        raise ParameterError("mc_oracle needs reps >= 100")
    draws = oracle_draws(spec, ps, n, reps, seed, workers)
    cov, se = jackknife_cov(draws)
    return AsymCovMatrix(cov, "mc_oracle", {"n": n, "reps": reps, "seed": seed}, se)


def bartlett_bandwidth(n: int) -> int:
    return int(math.ceil(n ** (1.0 / 3.0)))


def beta_bartlett(sample, ps: ProjectionSet, bandwidth: Optional[int] = None) -> AsymCovMatrix:
    """Bartlett-kernel long-run covariance of the product series ``(v_j'Y_t)(w_j'Y_t)``."""
    y = sample.values if isinstance(sample, TimeSeriesSample) else np.asarray(sample, dtype=float)
    n = y.shape[0]
    if n < 30:
        raise ParameterError(f"beta_bartlett needs n >= 30, got {n}")
    if y.shape[1] != ps.d:
        raise DimensionError(f"sample dimension {y.shape[1]} != projection dimension {ps.d}")
    b = bartlett_bandwidth(n) if bandwidth is None else int(bandwidth)
    if b < 0 or b >= n:
        raise ParameterError("bandwidth must lie in [0, n)")
    xi = (y @ ps.vs.T) * (y @ ps.ws.T)
    xi = xi - xi.mean(axis=0)
    lrv = xi.T @ xi / n
    for h in range(1, b + 1):
        g = xi[:-h].T @ xi[h:] / n
        lrv += (1.0 - h / (b + 1.0)) * (g + g.T)
    return AsymCovMatrix(lrv, "bartlett", {"bandwidth": b, "kernel": "bartlett"})


def decay_certificate(beta, cap: float = 1e6) -> tuple[float, float]:
    """Fit ``|beta_ik| <= C rho^|i-k|``.

    ``C`` starts at the largest diagonal entry and ``rho`` is the smallest
    rate keeping every band under the envelope.  If that rate is not below
    one, ``C`` is raised to ``cap`` before giving up.
    """
    B = beta.beta if isinstance(beta, AsymCovMatrix) else np.asarray(beta, dtype=float)
    m = B.shape[0]
    if m < 3:
        raise ParameterError("decay_certificate needs m >= 3")
    idx = np.arange(m)
    lag = np.abs(idx[:, None] - idx[None, :])
    band = np.array([np.abs(B[lag == h]).max() for h in range(m)])
    C = float(band[0])
    if C <= 0:
        raise CertificateError("zero diagonal; no envelope to fit")

    def rate(c):
        r = [(band[h] / c) ** (1.0 / h) for h in range(1, m) if band[h] > 0]
        return max(r) if r else 0.0

    rho = rate(C)
    if rho >= 1.0:
        C = cap
        rho = rate(C)
        if rho >= 1.0 or np.any(band > C):
            raise CertificateError(f"no geometric envelope with C <= {cap}")
    return C, float(rho)


@dataclass(frozen=True)
class BermanDiagnostic:
    rho_h: np.ndarray
    partial_sums: np.ndarray
    fitted_rate: float
    summable: bool

    def to_dict(self) -> dict:
        return {"rho_h": self.rho_h.tolist(), "partial_sums": self.partial_sums.tolist(),
                "fitted_rate": self.fitted_rate, "summable": self.summable}


def berman_diagnostic(beta) -> BermanDiagnostic:
    """``rho_h = sup_{|i-k| >= h} |corr_ik|`` and the partial sums of ``rho_h^2``.

    ``summable`` requires the tail of ``rho_h`` to shrink geometrically; with
    finitely many pairs this is the only checkable form of the condition.
    """
    B = beta.beta if isinstance(beta, AsymCovMatrix) else np.asarray(beta, dtype=float)
    m = B.shape[0]
    sd = np.sqrt(np.clip(np.diag(B), DIAG_FLOOR, None))
    corr = np.abs(B / np.outer(sd, sd))
    idx = np.arange(m)
    lag = np.abs(idx[:, None] - idx[None, :])
    rho_h = np.array([corr[lag >= h].max() for h in range(1, m)]) if m > 1 else np.zeros(0)
    partial = np.cumsum(rho_h**2)
    if len(rho_h) < 2 or rho_h[0] == 0:
        return BermanDiagnostic(rho_h, partial, 0.0, True)
    pos = rho_h > 0
    h = np.arange(1, m)[pos]
    rate = float(np.max((rho_h[pos][1:] / rho_h[0]) ** (1.0 / (h[1:] - 1)))) if pos.sum() > 1 else 0.0
    return BermanDiagnostic(rho_h, partial, rate, bool(rho_h[0] < 1 - 1e-9 and rate < 1 - 1e-9))


@dataclass(frozen=True)
class PerturbationStudy:
    rs: tuple
    deviations: tuple
    K: float
    slope: float

    def to_dict(self) -> dict:
        return asdict(self)


def weight_perturbation_study(spec: LinearProcessSpec, ps: ProjectionSet,
                              rs: Sequence[float] = (1e-1, 1e-2, 1e-3), seed: int = 0,
                              convention: Convention = CALIBRATED) -> PerturbationStudy:
    """Sensitivity of ``beta`` to multiplicative weight errors of relative size ``r``.

    The same uniform draws are scaled by each ``r``.  ``K`` is the largest
    ``max|beta_hat - beta| / r`` and ``slope`` the least-squares slope of
    ``log deviation`` on ``log r``.
    """
    base = beta_analytic(spec, ps, convention).beta
    devs = []
    for r in rs:
        hat = beta_analytic(spec, perturb(ps, r, seed), convention).beta
        devs.append(float(np.max(np.abs(hat - base))))
    rs_arr, dv = np.asarray(rs, dtype=float), np.asarray(devs)
    slope = float(np.polyfit(np.log(rs_arr), np.log(dv), 1)[0])
    return PerturbationStudy(tuple(rs), tuple(devs), float(np.max(dv / rs_arr)), slope)
