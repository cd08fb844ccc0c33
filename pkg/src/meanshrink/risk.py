"""Losses, PRIAL/EPR and the seeded Monte Carlo engine.

Replication ``r`` of a run draws everything (a redrawn mean, the data, a
train/test split) from ``replication_rng(seed, r, stream)``, and per-replication
losses are reduced in replication order after the parallel phase. A report is
therefore a pure function of its inputs, whatever the worker count.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from . import estimators as est_mod
from .estimators import EstimatorError, oracle_coefficients
from .io import split_indices
from .model import (
    ErrorDist,
    build_covariance,
    build_mean,
    generate_sample,
    make_instance,
    replication_rng,
)
from .quadform import make_q, trace_product

log = logging.getLogger(__name__)

LOSS_Q_RULES = ("identity", "inverse-diag")
Q_INPUT_RULES = ("identity", "true-diag", "estimated-diag")
SWEEP_RANGES = {"sigma2": (0.1, 0.9), "sigma3": (0.1, 0.5)}

# stream ids for replication_rng
_STREAM_REP = 0
_STREAM_FIXED_MEAN = 1
_STREAM_SHUFFLE = 2
_STREAM_EPR = 100


# ---------------------------------------------------------------------------
# losses and summary metrics


def loss_general(delta, inst, Q, trace=None):
    """Normalized quadratic loss ``n (delta - mu)'Q(delta - mu) / tr(Q Sigma)``."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (inst.p,) or Q.p != inst.p:
        raise ValueError(f"dimension mismatch: delta {delta.shape}, Q {Q.p}, instance p={inst.p}")
    if trace is None:
        trace = trace_product(Q, inst.sigma)
    return inst.n * Q.norm2(delta - inst.mu) / trace


def loss_diag(delta, inst):
    """``(n/p) (delta - mu)' diag(Sigma)^{-1} (delta - mu)``."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (inst.p,):
        raise ValueError(f"delta must have length {inst.p}, got shape {delta.shape}")
    d = np.diag(inst.sigma)
    if np.any(d <= 0):
        raise ValueError("covariance has a non-positive diagonal entry")
    r = delta - inst.mu
    return inst.n / inst.p * float(r @ (r / d))


def prial(mean_loss_baseline, mean_loss_candidate):
    """Relative improvement in average loss over a baseline."""
    if not mean_loss_baseline > 0:
        raise ValueError(f"baseline loss must be positive, got {mean_loss_baseline}")
    return (mean_loss_baseline - mean_loss_candidate) / mean_loss_baseline


def epr(train_mean, test_mean, delta):
    """Empirical partial risk ``1 - |test - delta|^2 / |test - train|^2``."""
    train_mean, test_mean, delta = (np.asarray(v, dtype=float) for v in (train_mean, test_mean, delta))
    if not train_mean.shape == test_mean.shape == delta.shape:
        raise ValueError("train mean, test mean and estimate must have the same shape")
    d0 = test_mean - train_mean
    base = float(d0 @ d0)
    if base == 0.0:
        raise ValueError("train and test means coincide; EPR is undefined")
    d1 = test_mean - delta
    return 1.0 - float(d1 @ d1) / base


@dataclass(frozen=True)
class RiskSummary:
    pi1: float
    pi2: float
    s_n: float
    regime: str


def classify_regime(inst, Q):
    """``s_n = (n/p) pi2`` and a presentational regime label.

    ``s_n < 0.1`` is reported as ``"I"``, ``s_n > 10`` as ``"III"``, anything
    between as ``"II"``; the regimes themselves are asymptotic.
    """
    oc = oracle_coefficients(inst, Q)
    s_n = inst.n / inst.p * oc.pi2
    regime = "I" if s_n < 0.1 else "III" if s_n > 10 else "II"
    return RiskSummary(oc.pi1, oc.pi2, s_n, regime)


# ---------------------------------------------------------------------------
# designs


@dataclass(frozen=True)
class Design:
    """A simulation design.

    ``sigma``/``mu`` name a covariance/mean kind of :mod:`meanshrink.model`.
    ``redraw_mu`` redraws a ``mu1`` mean in every replication; otherwise
    one draw is shared by all replications. ``loss_q`` is the weighting used
    to score estimates and ``q_input`` the ``Q`` handed to the plug-in
    estimator.
    """

    p: int
    n: int
    sigma: str = "identity"
    rho: float | None = None
    mu: str = "mu1"
    tau: float | None = 1.0
    c: float | None = None
    errors: ErrorDist = ErrorDist()
    loss_q: str = "identity"
    q_input: str = "identity"
    redraw_mu: bool = True
    shuffle_sigma: bool = False
    sigma_matrix: np.ndarray | None = field(default=None, repr=False, compare=False)
    mu_values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.loss_q not in LOSS_Q_RULES:
            raise ValueError(f"loss_q must be one of {LOSS_Q_RULES}, got {self.loss_q!r}")
        if self.q_input not in Q_INPUT_RULES:
            raise ValueError(f"q_input must be one of {Q_INPUT_RULES}, got {self.q_input!r}")
        if int(self.n) < 1 or int(self.p) < 1:
            raise ValueError(f"n and p must be positive, got n={self.n}, p={self.p}")

    def descriptor(self):
        """Flat, ordered description for report headers and CSV columns."""
        if self.sigma in ("sigma2", "sigma3"):
            sigma = f"{self.sigma}(rho={self.rho:g})"
        else:
            sigma = self.sigma
        if self.mu in ("mu1", "mu2"):
            mu = f"{self.mu}(tau={self.tau:g})"
        elif self.mu == "constant":
            mu = f"constant(c={self.c or 0.0:g})"
        else:
            mu = self.mu
        return {
            "sigma": sigma,
            "mu": mu,
            "errors": self.errors.label(),
            "n": self.n,
            "p": self.p,
            "loss_q": self.loss_q,
            "q_input": self.q_input,
            "redraw_mu": self.redraw_mu and self.mu == "mu1",
        }


@dataclass
class _Context:
    design: Design
    names: tuple
    policy: str
    seed: int
    inst: object
    loss_q: object
    trace: float
    input_q: object


def _prepare(design, names, seed, policy):
    p = int(design.p)
    shuffle = replication_rng(seed, 0, _STREAM_SHUFFLE) if design.shuffle_sigma else None
    sigma = build_covariance(design.sigma, p, rho=design.rho, matrix=design.sigma_matrix, shuffle_rng=shuffle)
    if design.mu == "mu1" and design.redraw_mu:
        mu = np.zeros(p)
    else:
        mu = build_mean(design.mu, p, rng=replication_rng(seed, 0, _STREAM_FIXED_MEAN),
                        tau=design.tau, c=design.c, values=design.mu_values)
    inst = make_instance(mu, sigma, design.n, design.errors)
    if design.loss_q == "identity":
        loss_q = make_q("identity", p)
    else:
        loss_q = make_q("diagonal", p, 1.0 / np.diag(sigma))
    trace = trace_product(loss_q, sigma)
    if design.q_input == "identity":
        input_q = make_q("identity", p)
    elif design.q_input == "true-diag":
        input_q = make_q("diagonal", p, 1.0 / np.diag(sigma))
    else:
        input_q = None
    return _Context(design, tuple(names), policy, int(seed), inst, loss_q, trace, input_q)


def _replicate(ctx, r):
    d = ctx.design
    rng = replication_rng(ctx.seed, r, _STREAM_REP)
    inst = ctx.inst
    if d.mu == "mu1" and d.redraw_mu:
        inst = inst.with_mean(build_mean("mu1", d.p, rng=rng, tau=d.tau))
    X = generate_sample(inst, rng)
    xbar, var = _backend.col_mean_var(X)
    q_in = ctx.input_q
    if q_in is None:
        q_in = make_q("diagonal", d.p, 1.0 / var) if np.all(var > 0) else None
    out = np.empty(len(ctx.names))
    for k, name in enumerate(ctx.names):
        try:
            if name == "mean":
                delta = xbar
            elif name == "proposed":
                if q_in is None:
                    raise EstimatorError("zero sample variance; Q cannot be estimated")
                delta = est_mod.proposed(X, q_in, policy=ctx.policy, xbar=xbar).estimate
            elif name == "oracle":
                delta = est_mod.oracle(X, ctx.loss_q, truth=inst, trace=ctx.trace).estimate
            else:
                delta = est_mod.run(name, X, q_in, truth=inst, policy=ctx.policy).estimate
        except (EstimatorError, ValueError) as exc:
            log.debug("replication %d: %s failed: %s", r, name, exc)
            out[k] = np.nan
            continue
        out[k] = inst.n * ctx.loss_q.norm2(delta - inst.mu) / ctx.trace
    return out


def _run_range(args):
    fn, ctx, start, stop = args
    return np.array([fn(ctx, r) for r in range(start, stop)]).reshape(stop - start, -1)


def _map_replications(fn, ctx, R, workers):
    """Evaluate ``fn(ctx, r)`` for ``r < R`` and stack rows in replication order."""
    workers = max(1, int(workers or 1))
    if workers == 1 or R < 2:
        return _run_range((fn, ctx, 0, R))
    nchunks = min(R, 4 * workers)
    bounds = np.linspace(0, R, nchunks + 1).astype(int)
    tasks = [(fn, ctx, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_range, tasks))
    return np.vstack(parts)


# ---------------------------------------------------------------------------
# reports


@dataclass
class EstimatorRisk:
    name: str
    label: str
    risk: float
    se: float
    replications: int
    prial: float
    failures: int = 0
    error: str | None = None


@dataclass
class RiskReport:
    design: dict
    seed: int
    replications: int
    rows: list
    baseline: str = "empirical"
    losses: np.ndarray | None = field(default=None, repr=False)

    def row(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def risks(self):
        return {row.name: row.risk for row in self.rows}


@dataclass
class SweepReport:
    family: str
    grid: list
    reports: list
    seed: int
    replications: int


def _summarize(losses):
    finite = losses[np.isfinite(losses)]
    m = finite.size
    if m == 0:
        return math.nan, math.nan, 0
    se = float(finite.std(ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    return float(finite.mean()), se, m


def check_names(names):
    names = list(names)
    for name in names:
        est_mod.get(name)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate estimator names in {names}")
    return names


def run_monte_carlo(design, estimators, R, seed, workers=1, policy="raw", keep_losses=False):
    """Empirical risk of each estimator over ``R`` seeded replications.

    Parameters
    ----------
    design : Design
    estimators : sequence of str
        Registry names. An estimator whose requirements the design violates is
        reported with an error and no risk; the run continues.
    R : int
        Number of replications, at least 1.
    seed : int
        Master seed.
    workers : int
        Process count. Results do not depend on it.
    policy : {"raw", "clamped"}
        Coefficient policy of the plug-in estimator.
    keep_losses : bool
        Keep the ``(R, k)`` matrix of per-replication losses on the report.

    Returns
    -------
    RiskReport
        Per-estimator mean loss, its standard error and the PRIAL against the
        sample mean (its empirical risk when ``"mean"`` is run, else the exact
        value 1).
    """
    R = int(R)
    if R < 1:
        raise ValueError(f"replication count must be >= 1, got {R}")
    names = check_names(estimators)
    errors = {}
    runnable = []
    for name in names:
        msg = est_mod.get(name).check(design.n, design.p)
        if msg:
            errors[name] = msg
        else:
            runnable.append(name)
    ctx = _prepare(design, runnable, seed, policy)
    losses = _map_replications(_replicate, ctx, R, workers) if runnable else np.empty((R, 0))

    stats = {name: _summarize(losses[:, k]) for k, name in enumerate(runnable)}
    if "mean" in stats and stats["mean"][0] > 0:
        baseline, base_kind = stats["mean"][0], "empirical"
    else:
        baseline, base_kind = 1.0, "exact"
    rows = []
    for name in names:
        label = est_mod.get(name).label
        if name in errors:
            rows.append(EstimatorRisk(name, label, math.nan, math.nan, 0, math.nan, R, errors[name]))
            continue
        risk, se, m = stats[name]
        rows.append(EstimatorRisk(name, label, risk, se, m,
                                  prial(baseline, risk) if m else math.nan, R - m))
    return RiskReport(design.descriptor(), int(seed), R, rows, base_kind,
                      losses if keep_losses else None)


def rho_sweep(design, family, grid, estimators, R, seed, workers=1, policy="raw", enforce_range=True):
    """One Monte Carlo run per correlation in ``grid`` with a shared seed.

    Every grid point reuses the same seed, so the curves are computed with
    common random numbers. ``enforce_range`` restricts the grid to
    ``[0.1, 0.9]`` for ``sigma2`` and ``[0.1, 0.5]`` for ``sigma3``; without it
    any ``rho`` in ``[0, 1)`` is accepted.
    """
    if family not in SWEEP_RANGES:
        raise ValueError(f"sweep family must be one of {tuple(SWEEP_RANGES)}, got {family!r}")
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("rho grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"rho grid must be strictly increasing, got {grid}")
    lo, hi = SWEEP_RANGES[family] if enforce_range else (0.0, math.nextafter(1.0, 0.0))
    bad = [g for g in grid if not lo - 1e-12 <= g <= hi + 1e-12]
    if bad:
        raise ValueError(f"rho values {bad} outside [{lo:g}, {hi:g}] for {family}")
    reports = [
        run_monte_carlo(replace(design, sigma=family, rho=rho), estimators, R, seed, workers, policy)
        for rho in grid
    ]
    return SweepReport(family, grid, reports, int(seed), int(R))


# ---------------------------------------------------------------------------
# empirical partial risk on a fixed dataset


@dataclass
class EprRow:
    n_train: int
    name: str
    label: str
    epr: float
    se: float
    replications: int
    failures: int = 0
    error: str | None = None


@dataclass
class EprReport:
    rows: list
    seed: int
    replications: int
    meta: dict = field(default_factory=dict)

    def row(self, n_train, name):
        for row in self.rows:
            if row.n_train == n_train and row.name == name:
                return row
        raise KeyError((n_train, name))


@dataclass
class _EprContext:
    X: np.ndarray
    n_train: int
    stream: int
    names: tuple
    policy: str
    seed: int
    Q: object


def _epr_replicate(ctx, r):
    rng = replication_rng(ctx.seed, r, ctx.stream)
    tr, te = split_indices(ctx.X.shape[0], ctx.n_train, rng)
    train, test = ctx.X[tr], ctx.X[te]
    xbar1 = train.mean(axis=0)
    xbar2 = test.mean(axis=0)
    out = np.empty(len(ctx.names))
    for k, name in enumerate(ctx.names):
        try:
            delta = xbar1 if name == "mean" else est_mod.run(name, train, ctx.Q, policy=ctx.policy).estimate
            out[k] = epr(xbar1, xbar2, delta)
        except (EstimatorError, ValueError) as exc:
            log.debug("epr replication %d: %s failed: %s", r, name, exc)
            out[k] = np.nan
    return out


def run_epr(data, train_sizes, estimators, R, seed, workers=1, policy="raw"):
    """Average EPR of each estimator over random train/test splits.

    ``data`` is the (already standardized) ``(n, p)`` matrix; for each
    training size, ``R`` random splits are drawn and every estimator is fit on
    the training rows with ``Q = I``.
    """
    X = np.asarray(data, dtype=float)
    n, p = X.shape
    R = int(R)
    if R < 1:
        raise ValueError(f"replication count must be >= 1, got {R}")
    sizes = [int(s) for s in train_sizes]
    if not sizes:
        raise ValueError("training-size grid is empty")
    bad = [s for s in sizes if not 1 <= s < n]
    if bad:
        raise ValueError(f"training sizes {bad} must lie in [1, {n - 1}] for {n} samples")
    names = check_names(estimators)
    Q = make_q("identity", p)
    rows = []
    for i, size in enumerate(sizes):
        runnable, errors = [], {}
        for name in names:
            e = est_mod.get(name)
            msg = "needs the true mean" if e.needs_truth else e.check(size, p)
            if msg:
                errors[name] = f"{name}: {msg}" if e.needs_truth else msg
            else:
                runnable.append(name)
        ctx = _EprContext(X, size, _STREAM_EPR + i, tuple(runnable), policy, int(seed), Q)
        vals = _map_replications(_epr_replicate, ctx, R, workers) if runnable else np.empty((R, 0))
        for name in names:
            label = est_mod.get(name).label
            if name in errors:
                rows.append(EprRow(size, name, label, math.nan, math.nan, 0, R, errors[name]))
                continue
            mean, se, m = _summarize(vals[:, runnable.index(name)])
            rows.append(EprRow(size, name, label, mean, se, m, R - m))
    return EprReport(rows, int(seed), R, {"n": n, "p": p})
