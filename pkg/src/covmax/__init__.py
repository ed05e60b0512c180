"""Max-deviation tests for projected covariances of linear vector time series."""

__version__ = "0.1.0"

from .errors import (AssumptionViolation, CertificateError, ConvergenceError, CovmaxError,
                     DegenerateVarianceError, DimensionError, ParameterError,
                     ResourceLimitExceeded)
from .linproc import (InnovationSpec, LinearProcessSpec, TimeSeriesSample, make_ar_family,
                      make_explicit, make_lagged_noise, make_r_dependent_pair,
                      population_covariance, simulate)
from .projections import (ProjectionSet, check_decay, diagonal_scheme, entry_selection,
                          lag_scheme, neighbor_scheme, sensor_chain_spec)
from .covstat import deviations, sample_cov, standardize
from .asymvar import beta_analytic, beta_bartlett, decay_certificate, mc_oracle
from .gumbel import constants, simultaneous_ci, test_abs_max, test_signed_max
from .portfolio import OneFactorModel, lmvp_weights, mvp_closed_form

test_abs_max.__test__ = False
test_signed_max.__test__ = False
