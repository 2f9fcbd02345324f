"""Tests of the MCAR hypothesis for partially observed functional data."""
from .errors import (
    AssumptionViolation,
    DegenerateError,
    DimensionError,
    FdmcarError,
    FormatError,
    InputError,
    NoTestableSubdomain,
    NumericalError,
    ParseError,
    ValidationError,
)
from .estimators import (
    covariance_kernel_hat,
    ecdf_surface,
    estimate_nu,
    group_mean,
    mean_difference,
    rho_hat,
)
from .mcar import (
    Analysis,
    TestConfig,
    confidence_band,
    run_test,
    run_tests,
    sample_limit_cvm,
    sample_limit_l2,
    sample_limit_sup,
    stat_cvm,
    stat_l2,
    stat_sup,
)
from .partition import (
    GroupLabels,
    load_labels,
    partition_by_measure,
    partition_complete,
    validate_assumption,
)
from .results import ConfidenceBand, Method, TestResult, pvalue
from .sample import FunctionalSample, Grid, SubdomainIndex, load_csv, restrict_domain, write_csv
from .spectral import EigenSystem, eigensystem, sym_eig, truncate_fve

__version__ = "0.1.0"
