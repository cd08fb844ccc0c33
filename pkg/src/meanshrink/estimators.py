"""Mean estimators: sample mean, plug-in shrinkage, oracle and competitors.

Every estimator in the registry is called as ``fn(data, Q, **options)`` and
returns an :class:`EstimatorOutput`. Competitors that shrink toward the origin
(James-Stein, Berger-Bock, Tong) ignore ``Q``.

Berger-Bock
-----------
For coordinates ``xbar_j ~ N(mu_j, sigma_j^2 / n)`` with independent
``S_j = sum_k (x_kj - xbar_j)^2 ~ sigma_j^2 chi^2_nu``, ``nu = n - 1``, the
Berger-Bock rule replaces each unknown ``sigma_j^2 / n`` by
``S_j / (n (nu + 2))`` in the James-Stein factor::

    delta_BB = (1 - (p - 2) / sum_j [n (nu + 2) xbar_j^2 / S_j]) xbar
             = (1 - (p - 2)(n - 1) / (n (n + 1) xbar' D^{-1} xbar)) xbar

with ``D = diag(S_n)``. When every ``S_j / (nu + 2)`` equals one common
``sigma^2`` this is exactly the James-Stein rule
``(1 - (p - 2) sigma^2 / (n xbar'xbar)) xbar``. Compared with the Tong rule,
whose constant carries ``n - 3`` where this one carries ``n + 1``, it shrinks
less at small ``n`` and the two agree as ``n`` grows.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .quadform import trace_product
from .ustats import ShrinkageCoefficients, _as_data, compute_y, shrinkage_coefficients


class EstimatorError(ValueError):
    """An estimator's preconditions do not hold for the given data."""


@dataclass
class EstimatorOutput:
    estimate: np.ndarray
    coefficients: ShrinkageCoefficients | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OracleCoefficients:
    alpha_star: float
    beta_star: float
    risk_star: float
    pi1: float
    pi2: float


def _data(data, min_n=1, min_p=1):
    try:
        X = _as_data(data, min_n=min_n)
    except ValueError as exc:
        raise EstimatorError(str(exc)) from None
    if X.shape[1] < min_p:
        raise EstimatorError(f"need p >= {min_p}, got p={X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise EstimatorError("data contains non-finite values")
    return X


def _moments(X):
    xbar, var = _backend.col_mean_var(X)
    return xbar, var


def _positive_var(var):
    zero = np.flatnonzero(var <= 0)
    if zero.size:
        raise EstimatorError(f"zero sample variance in coordinate {int(zero[0])}")


def sample_mean(data, Q=None):
    X = _data(data)
    return EstimatorOutput(X.mean(axis=0))


def oracle_coefficients(inst, Q, trace=None):
    """Loss-minimizing ``(alpha, beta)`` for ``alpha xbar + beta e`` given the truth.

    ``pi1 = tr(Q Sigma) / n`` and ``pi2 = r'Qr`` with
    ``r = mu - (e'Q mu / e'Qe) e``; then ``alpha* = pi2 / (pi1 + pi2)``,
    ``beta* = (1 - alpha*) e'Q mu / e'Qe`` and the normalized risk of the
    oracle is ``pi2 / (pi1 + pi2)``.

    ``trace`` may carry a precomputed ``tr(Q Sigma)``.
    """
    if Q.p != inst.p:
        raise ValueError(f"Q has dimension {Q.p} but the instance has p={inst.p}")
    if trace is None:
        trace = trace_product(Q, inst.sigma)
    pi1 = trace / inst.n
    center = float(Q.e_dot(inst.mu)) / Q.eqe
    pi2 = Q.norm2(inst.mu - center)
    alpha = pi2 / (pi1 + pi2)
    return OracleCoefficients(alpha, (1.0 - alpha) * center, alpha, pi1, pi2)


def oracle(data, Q, truth=None, trace=None):
    """``alpha* xbar + beta* e`` with coefficients from the true mean and covariance."""
    if truth is None:
        raise EstimatorError("the oracle estimator needs the true problem instance")
    X = _data(data)
    oc = oracle_coefficients(truth, Q, trace=trace)
    est = oc.alpha_star * X.mean(axis=0) + oc.beta_star
    coef = ShrinkageCoefficients(oc.alpha_star, oc.beta_star)
    return EstimatorOutput(est, coef, {"risk_star": oc.risk_star, "pi1": oc.pi1, "pi2": oc.pi2})


def proposed(data, Q, policy="raw", coefficients=None, xbar=None):
    """Plug-in shrinkage estimate ``alpha_hat xbar + beta_hat e``.

    Parameters
    ----------
    data : array_like, shape (n, p)
        ``n >= 2``.
    Q : QuadraticForm
    policy : {"raw", "clamped"}
    coefficients : ShrinkageCoefficients, optional
        Use these instead of the data-driven ones.
    xbar : ndarray, optional
        Precomputed sample mean.
    """
    X = _data(data, min_n=2)
    if xbar is None:
        xbar = X.mean(axis=0)
    y = compute_y(X, Q, xbar=xbar)
    coef = coefficients or shrinkage_coefficients(y, policy)
    diag = y.as_dict()
    diag["degenerate"] = coef.degenerate
    return EstimatorOutput(coef.alpha * xbar + coef.beta, coef, diag)


def _origin_shrink(xbar, const, norm2):
    # (1 - const / norm2) xbar, with a zero fallback when norm2 vanishes
    if not norm2 > 1e-12 * abs(const):
        return EstimatorOutput(np.zeros_like(xbar), None, {"factor": 0.0, "degenerate": True})
    factor = 1.0 - const / norm2
    return EstimatorOutput(factor * xbar, None, {"factor": factor, "degenerate": False})


def james_stein(data, Q=None, sigma2=None, shrink=1.0):
    """James-Stein estimate with a pooled unknown common variance.

    ``(1 - (p-2)/n * s2 / xbar'xbar) xbar`` with
    ``s2 = sum_k ||x_k - xbar||^2 / (p(n-1) + 2)``. Passing ``sigma2`` uses a
    known variance instead; ``shrink`` scales the correction (0 gives xbar).
    """
    X = _data(data, min_n=2, min_p=3)
    n, p = X.shape
    xbar, var = _moments(X)
    if sigma2 is None:
        sigma2 = (n - 1) * float(var.sum()) / (p * (n - 1) + 2)
    out = _origin_shrink(xbar, shrink * (p - 2) / n * sigma2, float(xbar @ xbar))
    out.diagnostics["sigma2"] = sigma2
    return out


def tong(data, Q=None, shrink=1.0):
    """``(1 - (p-2)(n-1) / (n(n-3) xbar' D^{-1} xbar)) xbar`` with ``D = diag(S_n)``."""
    X = _data(data, min_n=4, min_p=3)
    n, p = X.shape
    xbar, var = _moments(X)
    _positive_var(var)
    const = shrink * (p - 2) * (n - 1) / (n * (n - 3))
    return _origin_shrink(xbar, const, float(xbar @ (xbar / var)))


def berger_bock(data, Q=None, shrink=1.0):
    """Berger-Bock estimate; see the module docstring for the transcription."""
    X = _data(data, min_n=2, min_p=3)
    n, p = X.shape
    xbar, var = _moments(X)
    _positive_var(var)
    const = shrink * (p - 2) * (n - 1) / (n * (n + 1))
    return _origin_shrink(xbar, const, float(xbar @ (xbar / var)))


@dataclass(frozen=True)
class Estimator:
    name: str
    label: str
    fn: object
    min_n: int = 1
    min_p: int = 1
    needs_truth: bool = False
    takes_policy: bool = False

    def check(self, n, p):
        """Return an error message if an ``(n, p)`` design is unsupported, else None."""
        if n < self.min_n:
            return f"{self.name} needs n >= {self.min_n}, got n={n}"
        if p < self.min_p:
            return f"{self.name} needs p >= {self.min_p}, got p={p}"
        return None


_REGISTRY = {}


def register(est):
    """Add an estimator to the registry; names must be unique."""
    if est.name in _REGISTRY:
        raise ValueError(f"estimator {est.name!r} is already registered")
    _REGISTRY[est.name] = est
    return est


for _e in (
    Estimator("mean", "Sample Mean", sample_mean),
    Estimator("js", "James-Stein", james_stein, min_n=2, min_p=3),
    Estimator("bb", "Berger-Bock", berger_bock, min_n=2, min_p=3),
    Estimator("tong", "Tong et al.", tong, min_n=4, min_p=3),
    Estimator("proposed", "Proposed", proposed, min_n=2, takes_policy=True),
    Estimator("oracle", "Oracle", oracle, needs_truth=True),
):
    register(_e)

DEFAULT_ORDER = ("mean", "js", "bb", "tong", "proposed", "oracle")


def names():
    return list(_REGISTRY)


def get(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; known: {', '.join(_REGISTRY)}") from None


def run(name, data, Q=None, truth=None, policy="raw", **options):
    """Apply the named estimator with the uniform calling convention."""
    est = get(name)
    if est.takes_policy:
        options["policy"] = policy
    if est.needs_truth:
        options["truth"] = truth
    return est.fn(data, Q, **options)
