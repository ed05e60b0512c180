"""Projection pairs ``(v_j, w_j)`` and their decay diagnostics.

Coordinate indices taken by the constructors are 1-based, as in the
matrix notation the pairs are usually written in.  Positions inside a
:class:`ProjectionSet` (``ps.vs[i]``) are ordinary 0-based rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AssumptionViolation, DimensionError, ParameterError
from .linproc import InnovationSpec, LinearProcessSpec


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """``m`` pairs of weighting vectors stored as dense ``m x d`` arrays."""

    vs: np.ndarray
    ws: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        vs = np.atleast_2d(np.array(self.vs, dtype=float))
        ws = np.atleast_2d(np.array(self.ws, dtype=float))
        if vs.shape != ws.shape:
            raise DimensionError(f"v and w arrays differ in shape: {vs.shape} vs {ws.shape}")
        if vs.shape[0] < 1 or vs.shape[1] < 1:
            raise ParameterError("projection set must contain at least one pair")
        if not (np.all(np.isfinite(vs)) and np.all(np.isfinite(ws))):
            raise ParameterError("projection weights must be finite")
        labels = tuple(self.labels) if self.labels else tuple(f"pair{i + 1}" for i in range(len(vs)))
        if len(labels) != len(vs):
            raise ParameterError("one label per pair required")
        vs.setflags(write=False)
        ws.setflags(write=False)
        object.__setattr__(self, "vs", vs)
        object.__setattr__(self, "ws", ws)
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.vs.shape[0]

    @property
    def d(self) -> int:
        return self.vs.shape[1]

    @property
    def l1_bound(self) -> float:
        """``max_j max(||v_j||_1, ||w_j||_1)``."""
        return float(max(np.abs(self.vs).sum(axis=1).max(), np.abs(self.ws).sum(axis=1).max()))

    def subset(self, idx: Sequence[int]) -> "ProjectionSet":
        idx = list(idx)
        return ProjectionSet(self.vs[idx], self.ws[idx], tuple(self.labels[i] for i in idx))

    def to_dict(self) -> dict:
        def sparse(x):
            nz = np.nonzero(x)[0]
            return [[int(i) + 1, float(x[i])] for i in nz]

        return {
            "d": self.d,
            "pairs": [
                {"label": lab, "v": sparse(v), "w": sparse(w)}
                for lab, v, w in zip(self.labels, self.vs, self.ws)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectionSet":
        """Read the sparse encoding: ``{"d": d, "pairs": [{"v": [[index, value], ...], ...}]}``."""
        d = int(data["d"])
        pairs = data["pairs"]
        if not pairs:
            raise ParameterError("projection set must contain at least one pair")
        vs = np.zeros((len(pairs), d))
        ws = np.zeros((len(pairs), d))
        labels = []
        for j, pair in enumerate(pairs):
            for target, key in ((vs, "v"), (ws, "w")):
                for idx, val in pair[key]:
                    if not 1 <= int(idx) <= d:
                        raise DimensionError(f"pair {j + 1}: index {idx} outside 1..{d}")
                    target[j, int(idx) - 1] = float(val)
            labels.append(pair.get("label", f"pair{j + 1}"))
        return cls(vs, ws, tuple(labels))


def _unit(d: int, i: int) -> np.ndarray:
    e = np.zeros(d)
    e[i - 1] = 1.0
    return e


def entry_selection(pairs: Iterable[tuple[int, int]], d: int) -> ProjectionSet:
    """Unit-vector pairs picking the entries ``(i, k)`` of the covariance matrix."""
    pairs = [(int(i), int(k)) for i, k in pairs]
    if not pairs:
        raise ParameterError("at least one index pair required")
    for i, k in pairs:
        if not (1 <= i <= d and 1 <= k <= d):
            raise DimensionError(f"index pair ({i}, {k}) outside 1..{d}")
    vs = np.array([_unit(d, i) for i, _ in pairs])
    ws = np.array([_unit(d, k) for _, k in pairs])
    return ProjectionSet(vs, ws, tuple(f"({i},{k})" for i, k in pairs))


def diagonal_scheme(d: int) -> ProjectionSet:
    return entry_selection([(i, i) for i in range(1, d + 1)], d)


def neighbor_scheme(d: int, ell: int) -> ProjectionSet:
    """Covariances of every coordinate with its ``ell``-th neighbour."""
    if not 0 <= ell < d:
        raise ParameterError(f"need 0 <= ell < d, got ell={ell}, d={d}")
    return entry_selection([(i, i + ell) for i in range(1, d - ell + 1)], d)


def lag_scheme(d: int) -> ProjectionSet:
    """Pairs ``(1, h + 1)`` for ``h = 1..d-1``.

    On :func:`~covmax.linproc.make_lagged_noise` data this tests the sample
    autocovariances of the innovations at lags ``1..d-1``.
    """
    if d < 2:
        raise ParameterError("lag scheme needs d >= 2")
    return entry_selection([(1, h + 1) for h in range(1, d)], d)


def sensor_chain_spec(base_coeffs: Sequence[float], dampings: Sequence[float], rho: float,
                      innovations: Optional[InnovationSpec] = None) -> LinearProcessSpec:
    """Sensor ``nu`` records sensor ``nu - 1`` damped by ``D_nu``.

    ``dampings`` lists ``D_2, ..., D_d``; every damping must lie in
    ``(0, rho]``, which makes the coefficient table decay like
    ``rho**(nu + j)``.
    """
    base = np.asarray(base_coeffs, dtype=float)
    damp = np.asarray(dampings, dtype=float)
    if base.ndim != 1 or len(base) < 1:
        raise ParameterError("base_coeffs must be a nonempty sequence")
    if not 0 < rho < 1:
        raise ParameterError("rho must lie in (0, 1)")
    if np.any(damp <= 0):
        raise ParameterError("dampings must be positive")
    if np.any(damp > rho):
        bad = int(np.argmax(damp > rho)) + 2
        raise AssumptionViolation(f"damping D_{bad} = {damp[bad - 2]} exceeds rho = {rho}")
    scale = np.concatenate([[1.0], np.cumprod(damp)])
    coeffs = base[:, None] * scale[None, :]
    return LinearProcessSpec(coeffs, rho, innovations or InnovationSpec(), "sensor_chain",
                             {"base_coeffs": base.tolist(), "dampings": damp.tolist(), "rho": rho})


def vech_projections(filters: Sequence[np.ndarray], labels: Optional[Sequence[str]] = None,
                     order: str = "F") -> ProjectionSet:
    """Stack each filter matrix into a vector (columns first by default).

    The same vector is used for ``v`` and ``w``, so the set monitors the
    variances of the filter responses.  Filters are kept in the given order;
    any ranking of the filters (e.g. by l1-norm) is up to the caller.
    """
    mats = [np.asarray(f, dtype=float) for f in filters]
    if not mats:
        raise ParameterError("at least one filter required")
    shape = mats[0].shape
    for i, f in enumerate(mats):
        if f.ndim != 2 or f.shape != shape:
            raise DimensionError(f"filter {i + 1} has shape {f.shape}, expected {shape}")
    vs = np.array([f.reshape(-1, order=order) for f in mats])
    labels = tuple(labels) if labels is not None else tuple(f"filter{i + 1}" for i in range(len(mats)))
    return ProjectionSet(vs, vs.copy(), labels)


def group_decompose(weights: Sequence[float], risks: Sequence[float], g: int,
                    labels_prefix: str = "group") -> ProjectionSet:
    """Split a long-only portfolio into ``g`` risk-class subportfolios.

    Assets are sorted by ascending risk (ties by index) and cut into
    contiguous groups whose sizes differ by at most one, the first groups
    taking the remainder.  Group ``i`` keeps the portfolio weights of its
    assets and zeros elsewhere, so the group vectors sum to ``weights``.
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(risks, dtype=float)
    d = len(w)
    if s.shape != w.shape:
        raise DimensionError("weights and risks differ in length")
    if not 1 <= g <= d:
        raise ParameterError(f"need 1 <= g <= d, got g={g}, d={d}")
    if np.any(w < 0):
        raise ParameterError("negative weight in a long-only portfolio")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ParameterError(f"weights must sum to 1, got {w.sum()!r}")
    order = np.argsort(s, kind="stable")
    vs = np.zeros((g, d))
    for i, block in enumerate(np.array_split(order, g)):
        vs[i, block] = w[block]
    return ProjectionSet(vs, vs.copy(), tuple(f"{labels_prefix}{i + 1}" for i in range(g)))


def perturb(ps: ProjectionSet, r: float, seed: int = 0) -> ProjectionSet:
    """Multiply every coordinate by ``1 + u`` with ``u`` uniform on ``[-r, r]``."""
    if r < 0:
        raise ParameterError("r must be nonnegative")
    rng = np.random.default_rng(seed)
    uv = rng.uniform(-1.0, 1.0, ps.vs.shape)
    uw = rng.uniform(-1.0, 1.0, ps.ws.shape)
    return ProjectionSet(ps.vs * (1 + r * uv), ps.ws * (1 + r * uw), ps.labels)


@dataclass(frozen=True)
class DecayDiagnostic:
    """Result of :func:`check_decay`.

    ``fitted_rho`` is anchored at the cells with the smallest exponent:
    ``constant * fitted_rho**e_min`` equals the largest coefficient mass seen
    there, and ``fitted_rho`` is the smallest rate keeping every other cell
    under the envelope.  ``max_ratio`` is the sup of mass / rho**e, i.e. the
    envelope constant.
    """

    assumption: str
    fitted_rho: float
    max_ratio: float
    pass_: bool
    cells: int

    def to_dict(self) -> dict:
        return {"assumption": self.assumption, "fitted_rho": self.fitted_rho,
                "max_ratio": self.max_ratio, "pass": self.pass_, "cells": self.cells}


def coefficient_mass(ps: ProjectionSet, spec: LinearProcessSpec) -> np.ndarray:
    """``max(sum_nu |v_nu c_j^(nu)|, sum_nu |w_nu c_j^(nu)|)`` as an ``m x (J+1)`` array."""
    if ps.d != spec.d:
        raise DimensionError(f"projection dimension {ps.d} != process dimension {spec.d}")
    ac = np.abs(spec.coeffs)
    return np.maximum(np.abs(ps.vs) @ ac.T, np.abs(ps.ws) @ ac.T)


def check_decay(ps: ProjectionSet, spec: LinearProcessSpec, assumption: str = "W1") -> DecayDiagnostic:
    """Fit the geometric rate of the projected coefficients over the scan grid.

    The grid is ``i = 1..m`` (pair position) and ``j = 1..J_max`` (lag); the
    exponent is ``i * j`` under W1 and ``i + j`` under W2.
    """
    if assumption not in ("W1", "W2"):
        raise ParameterError("assumption must be 'W1' or 'W2'")
    mass = coefficient_mass(ps, spec)[:, 1:]
    i = np.arange(1, ps.m + 1)[:, None]
    j = np.arange(1, spec.j_max + 1)[None, :]
    expo = (i * j) if assumption == "W1" else (i + j)
    expo = np.broadcast_to(expo, mass.shape)
    # subnormal masses lose relative precision; they satisfy any bound anyway
    keep = mass > np.finfo(float).tiny
    cells = int(keep.sum())
    if cells == 0:
        return DecayDiagnostic(assumption, 0.0, 0.0, True, 0)
    logm = np.log(mass[keep])
    e = expo[keep].astype(float)
    e0 = e.min()
    log_anchor = logm[e == e0].max()
    later = e > e0
    if not np.any(later):
        rho_fit = 0.0
    else:
        rates = (logm[later] - log_anchor) / (e[later] - e0)
        rho_fit = float(np.exp(rates.max()))
    if rho_fit == 0.0:
        return DecayDiagnostic(assumption, 0.0, float(np.exp(log_anchor)), True, cells)
    ratio = float(np.exp(np.max(logm - e * np.log(rho_fit))))
    ok = bool(np.isfinite(ratio) and rho_fit < 1.0)
    return DecayDiagnostic(assumption, rho_fit, ratio, ok, cells)


def parse_scheme(descriptor: str, d: int, entries_loader=None, groups_factory=None) -> ProjectionSet:
    """Build a set from ``diag``, ``neighbor:<ell>``, ``lags``, ``entries:<file>`` or ``groups:<g>``."""
    kind, _, arg = descriptor.partition(":")
    if kind == "diag" and not arg:
        return diagonal_scheme(d)
    if kind == "lags" and not arg:
        return lag_scheme(d)
    if kind == "neighbor":
        try:
            return neighbor_scheme(d, int(arg))
        except ValueError as exc:
            raise ParameterError(f"bad scheme {descriptor!r}: {exc}") from None
    if kind == "entries" and arg:
        if entries_loader is None:
            raise ParameterError("entries scheme needs a loader")
        return entry_selection(entries_loader(arg), d)
    if kind == "groups" and arg:
        if groups_factory is None:
            raise ParameterError("groups scheme needs a portfolio model")
        try:
            g = int(arg)
        except ValueError:
            raise ParameterError(f"bad scheme {descriptor!r}") from None
        return groups_factory(g)
    raise ParameterError(f"unknown scheme {descriptor!r}")
