"""Sample covariances and max-deviation statistics.

All second moments use the divisor ``1/n``.  For the autocovariance at lag
``h`` that means ``(1/n) sum_{t=1}^{n-h} Z_t Z_{t+h}``, not ``1/(n-h)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DegenerateVarianceError, DimensionError, ParameterError
from .linproc import TimeSeriesSample
from .projections import ProjectionSet


def _values(sample) -> np.ndarray:
    if isinstance(sample, TimeSeriesSample):
        return sample.values
    y = np.asarray(sample, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    return y


def sample_cov(sample, center: bool = False) -> np.ndarray:
    """``(1/n) sum_t Y_t Y_t'``, optionally after removing the sample mean."""
    y = _values(sample)
    if y.shape[0] < 1:
        raise ParameterError("empty sample")
    if center:
        y = y - y.mean(axis=0)
    return y.T @ y / y.shape[0]


def projected_moments(y: np.ndarray, ps: ProjectionSet, center: bool = False) -> np.ndarray:
    """``v_j' Sigma_hat w_j`` for every pair without forming ``Sigma_hat``."""
    if y.shape[1] != ps.d:
        raise DimensionError(f"sample dimension {y.shape[1]} != projection dimension {ps.d}")
    x = y @ ps.vs.T
    z = y @ ps.ws.T
    if center:
        x = x - x.mean(axis=0)
        z = z - z.mean(axis=0)
    return np.einsum("tj,tj->j", x, z) / y.shape[0]


def projected_null(sigma0: np.ndarray, ps: ProjectionSet) -> np.ndarray:
    """``v_j' Sigma_0 w_j`` for every pair."""
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma0.shape != (ps.d, ps.d):
        raise DimensionError(f"sigma0 has shape {sigma0.shape}, expected {(ps.d, ps.d)}")
    return np.einsum("jd,de,je->j", ps.vs, sigma0, ps.ws)


@dataclass(frozen=True, eq=False)
class DeviationResult:
    """Scaled deviations ``D_nj = sqrt(n) v_j'(Sigma_hat - Sigma_0) w_j``.

    ``T_n`` and ``signed_max`` refer to the raw deviations.  After
    :func:`standardize`, ``std_devs`` holds ``D_nj / beta_jj^(1/2)`` and
    ``std_max``/``std_signed_max`` are the maxima the Gumbel tests use.
    """

    devs: np.ndarray
    estimates: np.ndarray
    null_values: np.ndarray
    n: int
    std_devs: Optional[np.ndarray] = None
    beta_diag: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return len(self.devs)

    @property
    def T_n(self) -> float:
        return float(np.max(np.abs(self.devs)))

    @property
    def signed_max(self) -> float:
        return float(np.max(self.devs))

    @property
    def standardized(self) -> bool:
        return self.std_devs is not None

    @property
    def std_max(self) -> float:
        self._need_std()
        return float(np.max(np.abs(self.std_devs)))

    @property
    def std_signed_max(self) -> float:
        self._need_std()
        return float(np.max(self.std_devs))

    def _need_std(self):
        if self.std_devs is None:
            raise ParameterError("deviations have not been standardized")

    def to_dict(self) -> dict:
        out = {
            "n": self.n, "m": self.m, "devs": self.devs.tolist(),
            "estimates": self.estimates.tolist(), "null_values": self.null_values.tolist(),
            "T_n": self.T_n, "signed_max": self.signed_max,
        }
        if self.standardized:
            out.update(std_devs=self.std_devs.tolist(), beta_diag=self.beta_diag.tolist(),
                       std_max=self.std_max, std_signed_max=self.std_signed_max)
        return out


def deviations(sample, sigma0: np.ndarray, ps: ProjectionSet, center: bool = False) -> DeviationResult:
    y = _values(sample)
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma0.ndim != 2 or sigma0.shape[0] != sigma0.shape[1]:
        raise DimensionError("sigma0 must be square")
    if not np.allclose(sigma0, sigma0.T, rtol=1e-10, atol=1e-12):
        raise ParameterError("sigma0 must be symmetric")
    n = y.shape[0]
    est = projected_moments(y, ps, center)
    null = projected_null(sigma0, ps)
    return DeviationResult(np.sqrt(n) * (est - null), est, null, n)


def standardize(res: DeviationResult, beta_diag) -> DeviationResult:
    beta_diag = np.asarray(beta_diag, dtype=float)
    if beta_diag.shape != (res.m,):
        raise DimensionError(f"need {res.m} variances, got shape {beta_diag.shape}")
    bad = np.nonzero(~(beta_diag > 0))[0]
    if len(bad):
        raise DegenerateVarianceError(
            f"nonpositive asymptotic variance for pair(s) {', '.join(str(i + 1) for i in bad)}")
    return replace(res, std_devs=res.devs / np.sqrt(beta_diag), beta_diag=beta_diag)


@dataclass(frozen=True, eq=False)
class AcfDeviationResult:
    gamma_hat: np.ndarray
    gamma0: np.ndarray
    n: int

    @property
    def V_n(self) -> float:
        return float(np.max(np.abs(self.gamma_hat - self.gamma0)))

    @property
    def argmax(self) -> int:
        return int(np.argmax(np.abs(self.gamma_hat - self.gamma0)))

    def to_dict(self) -> dict:
        return {"n": self.n, "maxlag": len(self.gamma_hat) - 1,
                "gamma_hat": self.gamma_hat.tolist(), "gamma0": self.gamma0.tolist(),
                "V_n": self.V_n, "argmax_lag": self.argmax}


def sample_acvf(z, maxlag: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    n = len(z)
    return np.array([z[: n - h] @ z[h:] / n for h in range(maxlag + 1)])


def acf_max_deviation(z, gamma0, m: int) -> AcfDeviationResult:
    """``V_n = max_{0<=h<=m} |gamma_hat(h) - gamma0(h)|``."""
    z = np.asarray(z, dtype=float).ravel()
    n = len(z)
    if m < 0 or m >= n:
        raise ParameterError(f"need 0 <= maxlag < n, got maxlag={m}, n={n}")
    gamma0 = np.asarray(gamma0, dtype=float).ravel()
    if len(gamma0) < m + 1:
        raise DimensionError(f"need {m + 1} hypothesised autocovariances, got {len(gamma0)}")
    return AcfDeviationResult(sample_acvf(z, m), gamma0[: m + 1].copy(), n)
