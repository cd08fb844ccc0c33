"""Shrinkage estimation of a high-dimensional mean toward a constant vector.

The plug-in estimator ``alpha_hat xbar + beta_hat e`` chooses its weights from
U-statistics of the sample, so it needs neither a distributional family nor
an estimate of the full covariance matrix.
"""

from ._backend import BACKEND
from .estimators import (
    EstimatorError,
    EstimatorOutput,
    OracleCoefficients,
    berger_bock,
    james_stein,
    oracle,
    oracle_coefficients,
    proposed,
    sample_mean,
    tong,
)
from .model import (
    ErrorDist,
    ProblemInstance,
    build_covariance,
    build_mean,
    generate_sample,
    make_instance,
    psd_sqrt,
    replication_rng,
)
from .quadform import QuadraticForm, estimate_q_from_sample, make_q, quad_form, trace_product
from .risk import (
    Design,
    RiskReport,
    SweepReport,
    classify_regime,
    epr,
    loss_diag,
    loss_general,
    prial,
    rho_sweep,
    run_epr,
    run_monte_carlo,
)
from .ustats import ShrinkageCoefficients, YStats, compute_y, shrinkage_coefficients

__version__ = "0.1.0"
