import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covmax.errors import DegenerateVarianceError, ParameterError
from covmax.covstat import (acf_max_deviation, deviations, sample_acvf, sample_cov,
                            standardize)
from covmax.linproc import make_ar_family, make_lagged_noise, simulate
from covmax.projections import ProjectionSet, diagonal_scheme, entry_selection, neighbor_scheme


def test_sample_cov_basics():
    assert np.array_equal(sample_cov(np.array([[1.0, 0, 0]])), np.diag([1.0, 0, 0]))
    const = np.tile([2.0, -1.0], (10, 1))
    assert np.allclose(sample_cov(const, center=True), 0)
    y = simulate(make_lagged_noise(3), 100_000, seed=4).values
    S = sample_cov(y)
    # entrywise MC standard error is about sqrt(2/n) on the diagonal, sqrt(1/n) off it
    assert np.all(np.abs(S - np.eye(3)) < 5 * np.sqrt(2 / 100_000))


def test_self_comparison_is_zero():
    sample = simulate(make_ar_family(3, 0.5), 500, seed=1)
    res = deviations(sample, sample_cov(sample), neighbor_scheme(3, 1))
    assert np.allclose(res.devs, 0, atol=1e-12) and res.T_n < 1e-10


def test_variance_reduction():
    sample = simulate(make_ar_family(1, 0.5), 400, seed=2)
    res = deviations(sample, np.array([[4 / 3]]), diagonal_scheme(1))
    z = sample.values[:, 0]
    assert res.devs[0] == pytest.approx(np.sqrt(400) * (z @ z / 400 - 4 / 3))


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 1000))
def test_bilinearity_and_sigma_shift(lam, seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(50, 3))
    vs, ws = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    sigma0 = np.eye(3)
    base = deviations(y, sigma0, ProjectionSet(vs, ws))
    scaled = deviations(y, sigma0, ProjectionSet(vs * np.array([[lam], [1.0]]), ws))
    assert scaled.devs[0] == pytest.approx(lam * base.devs[0], abs=1e-9)
    delta = rng.normal(size=(3, 3))
    delta = delta + delta.T
    shifted = deviations(y, sigma0 + delta, ProjectionSet(vs, ws))
    expect = base.devs - np.sqrt(50) * np.einsum("jd,de,je->j", vs, delta, ws)
    assert np.allclose(shifted.devs, expect, atol=1e-9)


def test_asymmetric_sigma0_rejected():
    with pytest.raises(ParameterError):
        deviations(np.ones((5, 2)), np.array([[1.0, 0.5], [0.0, 1.0]]), diagonal_scheme(2))


def test_standardize():
    sample = simulate(make_ar_family(3, 0.5), 200, seed=8)
    res = deviations(sample, np.eye(3), diagonal_scheme(3))
    assert np.array_equal(standardize(res, np.ones(3)).std_devs, res.devs)
    assert np.allclose(standardize(res, 4 * np.ones(3)).std_devs, res.devs / 2)
    b = np.array([1.0, 2.0, 3.0])
    a1 = np.argmax(np.abs(standardize(res, b).std_devs))
    a2 = np.argmax(np.abs(standardize(res, 7.5 * b).std_devs))
    assert a1 == a2
    with pytest.raises(DegenerateVarianceError, match="2"):
        standardize(res, np.array([1.0, 0.0, 1.0]))


def test_signed_below_abs():
    sample = simulate(make_ar_family(4, 0.5), 300, seed=5)
    res = standardize(deviations(sample, np.eye(4), diagonal_scheme(4)), np.ones(4))
    assert res.std_signed_max <= res.std_max


def test_acf():
    z = np.ones(4)
    assert sample_acvf(z, 1).tolist() == [1.0, 0.75]
    rng = np.random.default_rng(0)
    w = rng.normal(size=100_000)
    g = sample_acvf(w, 5)
    assert abs(g[0] - 1) < 5 * np.sqrt(2 / 1e5)
    assert np.all(np.abs(g[1:]) < 5 / np.sqrt(1e5))
    res = acf_max_deviation(w[:500], sample_acvf(w[:500], 3), 3)
    assert res.V_n == 0.0
    with pytest.raises(ParameterError):
        acf_max_deviation(z, [1, 0, 0, 0, 0], 4)
