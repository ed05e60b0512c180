"""Multivariate linear processes driven by one scalar innovation sequence.

Coordinate ``nu`` of the process is

    Y_t^(nu) = sum_{j >= 0} c_j^(nu) eps_{t-j}

with i.i.d. innovations ``eps``.  The coefficient table is stored as a
``(J_max + 1, d)`` array, row ``j`` holding ``c_j`` for all coordinates.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .errors import AssumptionViolation, ParameterError

DEFAULT_TOL = 1e-12

DISTRIBUTIONS = ("gaussian", "scaled-t", "uniform")


@dataclass(frozen=True)
class InnovationSpec:
    """Distribution of the scalar innovations.

    Parameters
    ----------
    distribution : {"gaussian", "scaled-t", "uniform"}
        Family; every family is rescaled to variance ``sigma2``.
    sigma2 : float
        Innovation variance.
    df : float, optional
        Degrees of freedom for ``scaled-t``.
    moment_order : float
        The ``delta`` of the ``4 + delta`` moment condition.  Only checked
        against ``df`` for the t family.
    """

    distribution: str = "gaussian"
    sigma2: float = 1.0
    df: Optional[float] = None
    moment_order: float = 0.5

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ParameterError(f"unknown innovation distribution {self.distribution!r}")
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be positive")
        if self.moment_order <= 0:
            raise ParameterError("moment_order must be positive")
        if self.distribution == "scaled-t":
            if self.df is None or not self.df > 4 + self.moment_order:
                raise ParameterError(
                    f"scaled-t needs df > 4 + moment_order = {4 + self.moment_order}"
                )

    @property
    def gamma4(self) -> float:
        """Fourth moment ``E eps^4``."""
        s4 = self.sigma2**2
        if self.distribution == "gaussian":
            return 3.0 * s4
        if self.distribution == "uniform":
            return 1.8 * s4
        return 3.0 * s4 * (self.df - 2.0) / (self.df - 4.0)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        sd = math.sqrt(self.sigma2)
        if self.distribution == "gaussian":
            return sd * rng.standard_normal(size)
        if self.distribution == "uniform":
            half = math.sqrt(3.0) * sd
            return rng.uniform(-half, half, size)
        scale = sd * math.sqrt((self.df - 2.0) / self.df)
        return scale * rng.standard_t(self.df, size)

    def to_dict(self) -> dict:
        out = {"distribution": self.distribution, "sigma2": self.sigma2,
               "moment_order": self.moment_order}
        if self.df is not None:
            out["df"] = self.df
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "InnovationSpec":
        return cls(
            distribution=data.get("distribution", "gaussian"),
            sigma2=float(data.get("sigma2", 1.0)),
            df=None if data.get("df") is None else float(data["df"]),
            moment_order=float(data.get("moment_order", 0.5)),
        )


def truncation_lag(rho: float, tol: float = DEFAULT_TOL) -> int:
    """Smallest ``J`` with ``rho**J <= tol``."""
    return max(1, int(math.ceil(math.log(tol) / math.log(rho))))


@dataclass(frozen=True, eq=False)
class LinearProcessSpec:
    """Coefficient table of a ``d``-dimensional linear process.

    ``coeffs[j, nu]`` is ``c_j`` of coordinate ``nu`` (0-based column).
    ``family``/``params`` record how the table was built so the spec can be
    written back to JSON.
    """

    coeffs: np.ndarray
    rho: float
    innovations: InnovationSpec = field(default_factory=InnovationSpec)
    family: str = "explicit"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ParameterError("coefficient table must be a nonempty (J+1, d) array")
        if not np.all(np.isfinite(c)):
            raise ParameterError("coefficients must be finite")
        if not 0 < self.rho < 1:
            raise ParameterError("rho must lie in (0, 1)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    @property
    def j_max(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def sigma2(self) -> float:
        return self.innovations.sigma2

    @property
    def decay_constant(self) -> float:
        """Smallest ``C`` with ``max_nu |c_j| <= C rho**j`` for ``j <= J_max``."""
        j = np.arange(self.j_max + 1)
        return float(np.max(np.abs(self.coeffs).max(axis=1) / self.rho**j))

    @property
    def tail_bound(self) -> float:
        """Bound on the truncated coefficient tail, ``C rho^(J+1) / (1 - rho)``."""
        return self.decay_constant * self.rho ** (self.j_max + 1) / (1 - self.rho)

    def with_innovations(self, innovations: InnovationSpec) -> "LinearProcessSpec":
        return LinearProcessSpec(self.coeffs, self.rho, innovations, self.family, dict(self.params))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"family": self.family, "innovations": self.innovations.to_dict()}
        if self.family == "explicit":
            out["rho"] = self.rho
            out["coeffs"] = self.coeffs.T.tolist()
        else:
            out.update(self.params)
        return out


def make_ar_family(d: int, rho: float, innovations: Optional[InnovationSpec] = None,
                   tol: float = DEFAULT_TOL) -> LinearProcessSpec:
    """Coordinate ``nu`` (1-based) gets ``c_j = rho**(nu * j)``.

    Each coordinate is an AR(1) with coefficient ``rho**nu``; all share the
    same innovations.
    """
    if d < 1:
        raise ParameterError("d must be at least 1")
    if not 0 < rho < 1:
        raise ParameterError("rho must lie in (0, 1)")
    J = truncation_lag(rho, tol)
    j = np.arange(J + 1)[:, None]
    nu = np.arange(1, d + 1)[None, :]
    return LinearProcessSpec(rho ** (nu * j), rho, innovations or InnovationSpec(),
                             "ar_family", {"d": d, "rho": rho, "tol": tol})


def make_r_dependent_pair(k: int, r: int, rho: float = 0.5,
                          innovations: Optional[InnovationSpec] = None,
                          tol: float = DEFAULT_TOL) -> LinearProcessSpec:
    """Two coordinates that are ``r``-dependent.

    Coordinate 1 uses lags ``0..k-1`` and coordinate 2 uses lags ``>= k-r``,
    both with coefficients ``rho**j`` on their support.  For ``r = 0`` the
    supports are disjoint and the coordinates are independent.
    """
    if k < 1 or r < 0 or k - r < 0:
        raise ParameterError("need k >= 1, r >= 0 and k - r >= 0")
    if not 0 < rho < 1:
        raise ParameterError("rho must lie in (0, 1)")
    J = max(truncation_lag(rho, tol), k)
    j = np.arange(J + 1)
    c = np.zeros((J + 1, 2))
    c[:, 0] = np.where(j < k, rho**j, 0.0)
    c[:, 1] = np.where(j >= k - r, rho**j, 0.0)
    return LinearProcessSpec(c, rho, innovations or InnovationSpec(), "r_dependent",
                             {"k": k, "r": r, "rho": rho, "tol": tol})


def make_explicit(coeffs: Sequence[Sequence[float]], rho: Optional[float] = None,
                  innovations: Optional[InnovationSpec] = None) -> LinearProcessSpec:
    """Spec from an explicit table given per coordinate (``coeffs[nu][j]``).

    Rows may have different lengths; they are zero padded.  Without ``rho``
    the slowest geometric rate through the table is used (0.5 for tables
    with finite support only at lag 0).
    """
    rows = [np.asarray(row, dtype=float) for row in coeffs]
    if not rows:
        raise ParameterError("empty coefficient table")
    J = max(len(row) for row in rows) - 1
    c = np.zeros((J + 1, len(rows)))
    for nu, row in enumerate(rows):
        c[: len(row), nu] = row
    if rho is None:
        rho = _fit_rate(np.abs(c).max(axis=1))
    return LinearProcessSpec(c, rho, innovations or InnovationSpec(), "explicit")


def _fit_rate(envelope: np.ndarray) -> float:
    nz = np.nonzero(envelope)[0]
    if len(nz) < 2:
        return 0.5
    j0 = nz[0]
    rates = [(envelope[j] / envelope[j0]) ** (1.0 / (j - j0)) for j in nz[1:]]
    rate = max(rates)
    return min(max(rate, 1e-3), 1 - 1e-9)


def make_lagged_noise(d: int, innovations: Optional[InnovationSpec] = None) -> LinearProcessSpec:
    """Coordinate ``nu`` equals ``eps_{t-nu+1}``: white noise in time and across coordinates."""
    if d < 1:
        raise ParameterError("d must be at least 1")
    c = np.eye(d)
    return LinearProcessSpec(c, 0.5, innovations or InnovationSpec(), "lagged_noise", {"d": d})


def spec_from_dict(data: dict) -> LinearProcessSpec:
    """Inverse of :meth:`LinearProcessSpec.to_dict`."""
    family = data.get("family", "explicit")
    innov = InnovationSpec.from_dict(data.get("innovations", {}))
    tol = float(data.get("tol", DEFAULT_TOL))
    if family == "ar_family":
        return make_ar_family(int(data["d"]), float(data["rho"]), innov, tol)
    if family == "r_dependent":
        return make_r_dependent_pair(int(data["k"]), int(data["r"]), float(data.get("rho", 0.5)),
                                     innov, tol)
    if family == "lagged_noise":
        return make_lagged_noise(int(data["d"]), innov)
    if family == "sensor_chain":
        from .projections import sensor_chain_spec

        base = data.get("base_coeffs")
        rho = float(data["rho"])
        if base is None:
            base = (rho ** np.arange(truncation_lag(rho, tol) + 1)).tolist()
        return sensor_chain_spec(base, data["dampings"], rho, innov)
    if family == "explicit":
        rho = data.get("rho")
        return make_explicit(data["coeffs"], None if rho is None else float(rho), innov)
    raise ParameterError(f"unknown process family {family!r}")


@dataclass(frozen=True, eq=False)
class TimeSeriesSample:
    """``n x d`` observations with the seed that produced them (if simulated)."""

    values: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ParameterError("sample must be a nonempty n x d array")
        if not np.all(np.isfinite(v)):
            raise ParameterError("sample contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def simulate_values(spec: LinearProcessSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an ``n x d`` array from ``spec`` using ``rng``.

    ``J_max`` pre-sample innovations are drawn so that the truncated process
    is exactly stationary from ``t = 1``.
    """
    J = spec.j_max
    eps = spec.innovations.draw(rng, n + J)
    # window[t, j] = eps[t + J - j], i.e. eps_{t-j} in sample time
    window = np.lib.stride_tricks.sliding_window_view(eps, J + 1)[:, ::-1]
    return window @ spec.coeffs


def simulate(spec: LinearProcessSpec, n: int, seed: int) -> TimeSeriesSample:
    if n < 1:
        raise ParameterError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return TimeSeriesSample(simulate_values(spec, n, rng), seed=seed)


def population_covariance(spec: LinearProcessSpec) -> np.ndarray:
    """``Sigma = sigma^2 sum_j c_j c_j'`` over the truncated table."""
    c = spec.coeffs
    return spec.sigma2 * (c.T @ c)


def write_sample_csv(sample: TimeSeriesSample, path) -> None:
    """Write ``t,y1,...,yd`` rows with ``t`` starting at 1."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"y{i + 1}" for i in range(sample.d)])
        for t, row in enumerate(sample.values, start=1):
            w.writerow([t] + [repr(float(x)) for x in row])


def read_sample_csv(path) -> TimeSeriesSample:
    """Read a sample CSV; malformed rows raise :class:`ParameterError` naming the line."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t":
        raise ParameterError(f"{path}: line 1: header must start with 't'")
    width = len(header)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParameterError(
                f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
        try:
            values.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise ParameterError(f"{path}: line {lineno}: {exc}") from None
    if not values:
        raise ParameterError(f"{path}: no observations")
    return TimeSeriesSample(np.array(values))
