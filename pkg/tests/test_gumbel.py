import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covmax.covstat import DeviationResult, deviations, standardize
from covmax.errors import ParameterError
from covmax.gumbel import (GrowthConditionWarning, ci_excludes, constants, growth_ok, gumbel_cdf,
                           gumbel_quantile, gumbel_sf, simultaneous_ci, test_abs_max,
                           test_signed_max)

# reference values evaluated with mpmath at 30 digits
A_100 = 0.329505114491130405750809006072
B_100_PAPER = 1.37191604501617843016689979537
C_100_PAPER = -1.9924433282452446773098539978
B_100_CLASSICAL = 2.59465033399600300627751706526
C_100_CLASSICAL = 2.36625479290639398723079150923


def test_constants_frozen():
    p = constants(100, "paper")
    assert p.a_m == pytest.approx(A_100, rel=1e-14)
    assert p.b_m == pytest.approx(B_100_PAPER, rel=1e-14)
    assert p.c_m == pytest.approx(C_100_PAPER, rel=1e-14)
    c = constants(100, "classical")
    assert c.b_m == pytest.approx(B_100_CLASSICAL, rel=1e-14)
    assert c.c_m == pytest.approx(C_100_CLASSICAL, rel=1e-14)


def test_constants_monotone():
    ms = [10**k for k in range(1, 7)]
    a = [constants(m).a_m for m in ms]
    b = [constants(m).b_m for m in ms]
    assert all(x > y for x, y in zip(a, a[1:]))
    assert all(x < y for x, y in zip(b, b[1:]))
    with pytest.raises(ParameterError):
        constants(1)


def test_quantiles():
    assert gumbel_quantile(1 - math.exp(-1)) == pytest.approx(0.0, abs=1e-15)
    assert gumbel_quantile(0.05) == pytest.approx(2.97019524904216455911611464976, rel=1e-14)
    assert gumbel_quantile(0.5) == pytest.approx(0.366512920581664327012439158233, rel=1e-14)
    assert gumbel_cdf(gumbel_quantile(0.2)) == pytest.approx(0.8)
    assert gumbel_sf(40.0) > 0


def _standardized(std_devs, n=10**9):
    std_devs = np.asarray(std_devs, dtype=float)
    m = len(std_devs)
    return DeviationResult(std_devs, np.zeros(m), np.zeros(m), n, std_devs, np.ones(m))


def test_p_values_at_fixed_points():
    cal = constants(20)
    res = _standardized([cal.b_m] + [0.0] * 19)
    rep = test_abs_max(res, cal, warn=False)
    assert rep.normalized == pytest.approx(0.0, abs=1e-12)
    assert rep.p_value == pytest.approx(1 - math.exp(-1))
    big = _standardized([cal.b_m + 20 * cal.a_m] + [0.0] * 19)
    rep = test_abs_max(big, cal, warn=False)
    assert rep.p_value < 1e-8 and rep.reject
    sres = _standardized([cal.c_m] + [-5.0] * 19)
    assert test_signed_max(sres, cal, warn=False).p_value == pytest.approx(1 - math.exp(-1))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 10), st.floats(-3, 10))
def test_p_value_monotone(z1, z2):
    cal = constants(30)
    lo, hi = sorted([z1, z2])
    p_lo = test_abs_max(_standardized([cal.b_m + lo * cal.a_m, 0]), constants(2), warn=False).p_value
    p_hi = test_abs_max(_standardized([cal.b_m + hi * cal.a_m, 0]), constants(2), warn=False).p_value
    assert p_hi <= p_lo


def test_reject_monotone_in_alpha():
    res = _standardized([3.1, 0.2, -1.0, 2.5])
    flags = [test_abs_max(res, constants(4, alpha=a), warn=False).reject for a in (0.001, 0.01, 0.05, 0.2, 0.5)]
    assert flags == sorted(flags)


def test_growth_warning():
    res = _standardized([0.1] * 10, n=500)
    with pytest.warns(GrowthConditionWarning):
        rep = test_abs_max(res, constants(10))
    assert not rep.growth_check
    assert growth_ok(2, 10**12)


def test_unstandardized_rejected():
    res = DeviationResult(np.ones(3), np.zeros(3), np.zeros(3), 10)
    with pytest.raises(ParameterError):
        test_abs_max(res, constants(3))


def test_ci_duality_random():
    rng = np.random.default_rng(9)
    for _ in range(200):
        m = int(rng.integers(2, 40))
        n = int(rng.integers(30, 5000))
        est = rng.normal(size=m)
        null = est + rng.normal(scale=0.2, size=m)
        bd = rng.uniform(0.2, 3.0, m)
        cal = constants(m, alpha=float(rng.uniform(0.01, 0.3)))
        res = standardize(DeviationResult(np.sqrt(n) * (est - null), est, null, n), bd)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GrowthConditionWarning)
            rep = test_abs_max(res, cal, warn=False)
        assert bool(ci_excludes(simultaneous_ci(est, bd, cal, n), null).any()) == rep.reject


def test_ci_widens_as_alpha_shrinks():
    w = [np.diff(simultaneous_ci([0.0, 0.0], [1, 1], constants(2, alpha=a), 100)[0])[0]
         for a in (0.1, 1e-3, 1e-6, 1e-12)]
    assert all(x < y for x, y in zip(w, w[1:]))
