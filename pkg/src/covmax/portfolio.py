"""Minimum-variance portfolios in the single-factor model.

Returns follow ``Y^(nu) = beta_nu (R_M - r) + eps^(nu)``, so the covariance
is ``sigma_M^2 b b' + diag(sigma^2)``.  Both the unconstrained MVP and the
long-only LMVP have threshold-beta closed forms:

    w_nu  proportional to  (1 / sigma_nu^2) (1 - min(beta_nu, beta*) / beta*)

with ``beta* = (sigma_M^-2 + sum_A beta_i^2 / sigma_i^2) / sum_A beta_i / sigma_i^2``
over ``A`` = all assets (long-short, no ``min``) or the assets with
``beta_i < beta*`` (long-only, smallest solution).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, DimensionError, ParameterError
from .projections import ProjectionSet, group_decompose


@dataclass(frozen=True, eq=False)
class OneFactorModel:
    betas: np.ndarray
    idio: np.ndarray
    sigma_m2: float
    r: float = 0.0

    def __post_init__(self):
        b = np.array(self.betas, dtype=float).ravel()
        s = np.array(self.idio, dtype=float).ravel()
        if b.shape != s.shape or len(b) < 1:
            raise DimensionError("betas and idiosyncratic variances must have equal, nonzero length")
        if np.any(b < 0):
            raise ParameterError("all beta factors must be nonnegative")
        if np.any(~(s > 0)):
            raise ParameterError("idiosyncratic variances must be positive")
        if self.sigma_m2 < 0:
            raise ParameterError("factor variance must be nonnegative")
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "idio", s)

    @property
    def d(self) -> int:
        return len(self.betas)

    def covariance(self) -> np.ndarray:
        return self.sigma_m2 * np.outer(self.betas, self.betas) + np.diag(self.idio)

    def to_dict(self) -> dict:
        return {"betas": self.betas.tolist(), "idio": self.idio.tolist(),
                "sigma_m2": self.sigma_m2, "r": self.r}

    @classmethod
    def from_dict(cls, data: dict) -> "OneFactorModel":
        return cls(data["betas"], data["idio"], float(data["sigma_m2"]), float(data.get("r", 0.0)))


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    w: np.ndarray
    kind: str
    threshold_beta: float
    variance: float

    @property
    def active_set(self) -> list:
        return np.nonzero(self.w > 0)[0].tolist()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "w": self.w.tolist(),
                "threshold_beta": None if math.isinf(self.threshold_beta) else self.threshold_beta,
                "variance": self.variance, "active_set": [i + 1 for i in self.active_set]}


def sherman_morrison_inverse(model: OneFactorModel) -> np.ndarray:
    """``S^-1 - b_r b_r' / (sigma_M^-2 + b_r'b)`` with ``b_r = beta / sigma^2``."""
    s_inv = 1.0 / model.idio
    if model.sigma_m2 == 0:
        return np.diag(s_inv)
    br = model.betas * s_inv
    return np.diag(s_inv) - np.outer(br, br) / (1.0 / model.sigma_m2 + br @ model.betas)


def _threshold(model: OneFactorModel, mask: np.ndarray) -> float:
    br = model.betas[mask] / model.idio[mask]
    den = br.sum()
    if den <= 0:
        return math.inf
    inv_m2 = math.inf if model.sigma_m2 == 0 else 1.0 / model.sigma_m2
    return (inv_m2 + br @ model.betas[mask]) / den


def _weights(model: OneFactorModel, beta_star: float, clamp: bool) -> np.ndarray:
    if math.isinf(beta_star):
        raw = 1.0 / model.idio
    else:
        b = np.minimum(model.betas, beta_star) if clamp else model.betas
        raw = (1.0 - b / beta_star) / model.idio
    return raw / raw.sum()


def mvp_closed_form(model: OneFactorModel) -> PortfolioWeights:
    """Global minimum-variance weights via the long-short threshold beta."""
    beta_ls = _threshold(model, np.ones(model.d, dtype=bool))
    w = _weights(model, beta_ls, clamp=False)
    return PortfolioWeights(w, "mvp", beta_ls, float(w @ model.covariance() @ w))


def mvp_direct(model: OneFactorModel) -> np.ndarray:
    """``Sigma^-1 1 / 1'Sigma^-1 1`` by a linear solve."""
    x = np.linalg.solve(model.covariance(), np.ones(model.d))
    return x / x.sum()


def lmvp_threshold(model: OneFactorModel) -> float:
    """Smallest ``beta_LO`` solving the long-only threshold equation.

    The active set ``{i: beta_i < beta_LO}`` can only change at the sorted
    betas, so candidate sets are the ascending-beta prefixes; ties share a
    prefix.  Returns ``inf`` when no asset carries positive beta mass.
    """
    order = np.argsort(model.betas, kind="stable")
    sb = model.betas[order]
    if not np.any(sb > 0):
        return math.inf
    d = model.d
    k = 0
    while k < d:
        # extend the prefix over ties so equal betas enter together
        k_next = k + 1
        while k_next < d and sb[k_next] == sb[k]:
            k_next += 1
        mask = np.zeros(d, dtype=bool)
        mask[order[:k_next]] = True
        cand = _threshold(model, mask)
        upper = sb[k_next] if k_next < d else math.inf
        if sb[k_next - 1] < cand <= upper:
            return cand
        k = k_next
    raise ConvergenceError("no consistent long-only threshold beta found")


def lmvp_weights(model: OneFactorModel) -> PortfolioWeights:
    beta_lo = lmvp_threshold(model)
    w = _weights(model, beta_lo, clamp=True)
    return PortfolioWeights(w, "lmvp", beta_lo, float(w @ model.covariance() @ w))


def long_only_qp(sigma: np.ndarray, tol: float = 1e-13, max_iter: int = 1000) -> np.ndarray:
    """``min w'Sigma w`` subject to ``w >= 0``, ``1'w = 1`` by a primal active-set method.

    Solves the cone problem ``min u'Sigma u / 2 - 1'u``, ``u >= 0`` in the
    Lawson-Hanson manner; the normalised solution is the portfolio.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    free = np.zeros(d, dtype=bool)
    u = np.zeros(d)
    for _ in range(max_iter):
        dual = 1.0 - sigma @ u
        dual[free] = -np.inf
        j = int(np.argmax(dual))
        if free.all() or dual[j] <= tol:
            return u / u.sum()
        free[j] = True
        while True:
            idx = np.nonzero(free)[0]
            z = np.zeros(d)
            z[idx] = np.linalg.solve(sigma[np.ix_(idx, idx)], np.ones(len(idx)))
            if np.all(z[idx] > 0):
                u = z
                break
            neg = idx[z[idx] <= 0]
            t = np.min(u[neg] / (u[neg] - z[neg]))
            u = u + t * (z - u)
            drop = free & (u <= tol)
            u[drop] = 0.0
            free[drop] = False
    raise ConvergenceError("active-set QP did not converge")


@dataclass(frozen=True)
class OrderRestrictionDiagnostic:
    constant: float
    holds: bool
    weight_bound_holds: bool
    delta: float
    rho: float

    def to_dict(self) -> dict:
        return {"constant": self.constant, "holds": self.holds,
                "weight_bound_holds": self.weight_bound_holds, "delta": self.delta, "rho": self.rho}


def risk_class_groups(model: OneFactorModel, weights: PortfolioWeights, g: int,
                      delta: float, rho: float):
    """Group the long-only portfolio into ``g`` idiosyncratic-risk classes.

    Assets are ranked ``nu = 1..d`` by ascending ``sigma_nu^2``; group
    ``i`` (1-based) must satisfy ``sigma_nu^2 >= C nu^(1+delta) rho^-i``.
    The fitted ``C`` is the largest constant that works; the weight bound
    ``w_nu <= C^-1 sigma_P^2 nu^-(1+delta) rho^i`` is then checked with the
    portfolio variance ``sigma_P^2``.
    """
    if not 0 < rho < 1 or delta <= 0:
        raise ParameterError("need 0 < rho < 1 and delta > 0")
    ps = group_decompose(weights.w, model.idio, g)
    order = np.argsort(model.idio, kind="stable")
    rank = np.empty(model.d)
    group = np.empty(model.d)
    rank[order] = np.arange(1, model.d + 1)
    for i, block in enumerate(np.array_split(order, g), start=1):
        group[block] = i
    envelope = rank ** (1 + delta) * rho ** (-group)
    C = float(np.min(model.idio / envelope))
    bound = weights.variance / C * rank ** (-(1 + delta)) * rho**group
    ok_w = bool(np.all(weights.w <= bound * (1 + 1e-12)))
    diag = OrderRestrictionDiagnostic(C, C > 0, ok_w, delta, rho)
    return ps, diag
