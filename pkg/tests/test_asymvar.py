import numpy as np
import pytest

from covmax.asymvar import (CALIBRATED, LITERAL, Convention, beta_analytic, beta_bartlett,
                            berman_diagnostic, candidate_conventions, decay_certificate, f_ni,
                            f_nik, jackknife_cov, mc_oracle, weight_perturbation_study)
from covmax.errors import CertificateError, ParameterError
from covmax.linproc import (InnovationSpec, make_ar_family, make_explicit, make_lagged_noise,
                            make_r_dependent_pair, simulate)
from covmax.projections import (ProjectionSet, diagonal_scheme, entry_selection, lag_scheme,
                                neighbor_scheme)


def exact_long_run_cov(spec, ps):
    """Sum over all lags of Cov(xi^i_0, xi^k_h) for xi^i_t = (v_i'Y_t)(w_i'Y_t).

    Uses Cov(XY, ZW) = Cov(X,Z)Cov(Y,W) + Cov(X,W)Cov(Y,Z) + cum4(X,Y,Z,W),
    with every factor written out over the finite coefficient table.
    """
    s2 = spec.sigma2
    k4 = spec.innovations.gamma4 - 3 * s2**2
    a = spec.coeffs @ ps.vs.T
    b = spec.coeffs @ ps.ws.T
    J = a.shape[0]

    def shift(x, h):  # x_{p+h} as a length-J vector over p, zero outside the table
        out = np.zeros_like(x)
        if h >= 0:
            out[: J - h] = x[h:]
        else:
            out[-h:] = x[: J + h]
        return out

    m = ps.m
    B = np.zeros((m, m))
    for i in range(m):
        for k in range(m):
            tot = 0.0
            for h in range(-J, J + 1):
                ak, bk = shift(a[:, k], h), shift(b[:, k], h)
                cxz = s2 * a[:, i] @ ak
                cyw = s2 * b[:, i] @ bk
                cxw = s2 * a[:, i] @ bk
                cyz = s2 * b[:, i] @ ak
                cum = k4 * np.sum(a[:, i] * b[:, i] * ak * bk)
                tot += cxz * cyw + cxw * cyz + cum
            B[i, k] = tot
    return B


CASES = [
    (make_lagged_noise(3), diagonal_scheme(3)),
    (make_ar_family(3, 0.6), neighbor_scheme(3, 1)),
    (make_explicit([[1, 0.5, 0], [0, 1, 0.5], [0.3, -0.2, 0.7]], rho=0.5), diagonal_scheme(3)),
    (make_explicit([[1, 0.4, 0.2], [0.5, -0.3, 0.1]], rho=0.5,
                   innovations=InnovationSpec("uniform", 2.0)), entry_selection([(1, 2), (2, 2)], 2)),
    (make_r_dependent_pair(3, 1, innovations=InnovationSpec("scaled-t", 1.0, df=7)),
     entry_selection([(1, 1), (1, 2), (2, 2)], 2)),
]


@pytest.mark.parametrize("spec,ps", CASES)
def test_beta_matches_exact_long_run_cov(spec, ps):
    assert np.allclose(beta_analytic(spec, ps).beta, exact_long_run_cov(spec, ps),
                       rtol=1e-10, atol=1e-12)


def test_literal_convention_differs():
    spec, ps = CASES[1]
    assert not np.allclose(beta_analytic(spec, ps, LITERAL).beta, exact_long_run_cov(spec, ps),
                           rtol=1e-3)


def test_f_ni_lag_ranges():
    spec, ps = make_ar_family(1, 0.5), diagonal_scheme(1)
    assert f_ni(spec, ps, 0, LITERAL) == pytest.approx(2 / 3, rel=1e-12)
    assert f_ni(spec, ps, 0, CALIBRATED) == pytest.approx(8 / 3, rel=1e-12)
    zero = ProjectionSet(np.zeros((1, 1)), np.zeros((1, 1)))
    assert f_ni(spec, zero, 0) == 0.0


def test_f_nik_cases():
    white = make_lagged_noise(1)
    assert f_nik(white, diagonal_scheme(1), 0, 0) == 0.0
    spec, ps = make_ar_family(4, 0.5), neighbor_scheme(4, 1)
    assert f_nik(spec, ps, 0, 2) == pytest.approx(f_nik(spec, ps, 2, 0), rel=1e-13)
    # MA(1), theta = 0.5: the only nonzero term is l = 1, j = 0, [2 c_0 c_1]^2 = 1
    ma = make_explicit([[1.0, 0.5]])
    brute = sum((2 * c0 * c1) ** 2 for c0, c1 in [(1.0, 0.5)])
    assert f_nik(ma, diagonal_scheme(1), 0, 0) == pytest.approx(brute)
    assert f_nik(ma, diagonal_scheme(1), 0, 0, LITERAL) == 0.0


def test_frozen_beta_values():
    # white noise variance pair: Var(eps^2) = 2 sigma^4
    assert beta_analytic(make_lagged_noise(1), diagonal_scheme(1)).beta[0, 0] == pytest.approx(2.0)
    spec = make_lagged_noise(2).with_innovations(InnovationSpec(sigma2=1.5))
    assert beta_analytic(spec, diagonal_scheme(2)).beta[0, 0] == pytest.approx(4.5)
    # white-noise lag products at different lags are uncorrelated at every lead
    B = beta_analytic(make_lagged_noise(3), lag_scheme(3)).beta
    assert B[0, 1] == 0 and B[0, 0] == pytest.approx(1.0)
    # disjoint supports alone do not give zero: the supports meet after a shift
    indep = make_r_dependent_pair(3, 0)
    assert beta_analytic(indep, entry_selection([(1, 1), (2, 2)], 2)).beta[0, 1] == pytest.approx(
        exact_long_run_cov(indep, entry_selection([(1, 1), (2, 2)], 2))[0, 1])
    # MA(1) theta = 0.5 variance: 2 (1 + theta^2)^2 + (2 theta)^2 = 4.125
    assert beta_analytic(make_explicit([[1, 0.5]]), diagonal_scheme(1)).beta[0, 0] == pytest.approx(4.125)
    # AR(1) phi = 0.5 variance: 2 sigma^4 (1 + phi^2) / (1 - phi^2)^3
    assert beta_analytic(make_ar_family(1, 0.5), diagonal_scheme(1)).beta[0, 0] == pytest.approx(
        2 * 1.25 / 0.75**3, rel=1e-10)


def test_candidate_grid_contains_both():
    grid = candidate_conventions()
    assert CALIBRATED in grid and LITERAL in grid and len(grid) == 24
    with pytest.raises(ParameterError):
        Convention(f_start=2)


def test_mc_oracle_small():
    spec, ps = make_ar_family(2, 0.6), diagonal_scheme(2)
    oracle = mc_oracle(spec, ps, 1000, 2000, seed=1)
    z = np.abs(beta_analytic(spec, ps).beta - oracle.beta) / oracle.mc_se
    assert z.max() < 3.5
    with pytest.raises(ParameterError):
        mc_oracle(spec, ps, 100, 50, seed=0)


def test_jackknife_matches_numpy():
    x = np.random.default_rng(0).normal(size=(200, 3))
    cov, se = jackknife_cov(x)
    assert np.allclose(cov, np.cov(x, rowvar=False))
    # brute-force delete-one jackknife for one entry
    loo = np.array([np.cov(np.delete(x, r, axis=0), rowvar=False)[0, 1] for r in range(200)])
    assert se[0, 1] == pytest.approx(np.sqrt(199 / 200 * ((loo - loo.mean()) ** 2).sum()))


def test_bartlett():
    y = simulate(make_lagged_noise(1), 20_000, seed=2).values
    b = beta_bartlett(y, diagonal_scheme(1))
    assert b.beta[0, 0] == pytest.approx(2.0, rel=0.1)
    xi = y[:, 0] ** 2
    b0 = beta_bartlett(y, diagonal_scheme(1), bandwidth=0)
    assert b0.beta[0, 0] == pytest.approx(xi.var())
    with pytest.raises(ParameterError):
        beta_bartlett(y[:20], diagonal_scheme(1))


def test_bartlett_consistency_ar():
    spec, ps = make_ar_family(2, 0.5), diagonal_scheme(2)
    y = simulate(spec, 100_000, seed=6).values
    est = np.diag(beta_bartlett(y, ps).beta)
    true = np.diag(beta_analytic(spec, ps).beta)
    assert np.all(np.abs(est / true - 1) < 0.1)


def test_decay_certificate():
    C, rho = decay_certificate(np.diag([1.0, 3.0, 2.0]))
    assert C == 3.0 and rho == 0.0
    idx = np.arange(6)
    B = 0.5 ** np.abs(idx[:, None] - idx[None, :])
    C, rho = decay_certificate(B)
    assert C == 1.0 and rho == pytest.approx(0.5)
    with pytest.raises(CertificateError):
        decay_certificate(np.ones((4, 4)) * 0 + np.eye(4) * 0)
    with pytest.raises(ParameterError):
        decay_certificate(np.eye(2))


def test_berman_diagnostic():
    spec = make_lagged_noise(6)
    ok = berman_diagnostic(beta_analytic(spec, lag_scheme(6)))
    assert ok.summable and ok.rho_h.max() == 0
    bad = berman_diagnostic(beta_analytic(make_ar_family(6, 0.5), diagonal_scheme(6)))
    assert bad.rho_h[0] > 0.7


def test_perturbation_study_linear():
    study = weight_perturbation_study(make_ar_family(4, 0.6), neighbor_scheme(4, 1))
    assert study.slope > 0.9
    assert all(dv <= study.K * r * (1 + 1e-12) for r, dv in zip(study.rs, study.deviations))
