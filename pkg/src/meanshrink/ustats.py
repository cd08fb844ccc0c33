"""U-statistics for the shrinkage coefficients and the coefficients themselves.

With ``xbar`` the sample mean, ``W = sum_k (x_k - xbar)'Q(x_k - xbar)``,
``a_k = e'Qx_k`` and ``V = sum_k (a_k - abar)^2``, the pairwise sums reduce to

    sum_{i!=j} x_i'Qx_j = n(n-1) xbar'Q xbar - W
    sum_{i!=j} a_i a_j  = n(n-1) abar^2     - V

so every statistic costs O(np) for diagonal Q. Writing ``r = xbar - Y4 e``
(so ``e'Qr = 0``),

    Y1 - Y3      = (n/p) r'Qr - (W - V/e'Qe) / (p(n-1))
    Y1 + Y2 - Y3 = (n/p) r'Qr + V / (e'Qe p(n-1))

Both are computed from centered quantities, which keeps them free of the
cancellation a large common shift would otherwise cause.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend

POLICIES = ("raw", "clamped")


@dataclass(frozen=True)
class YStats:
    """The four U-statistics plus the numerator and denominator of ``alpha``.

    ``num`` and ``den`` default to ``y1 - y3`` and ``y1 + y2 - y3``;
    :func:`compute_y` fills them from the cancellation-free forms.
    """

    y1: float
    y2: float
    y3: float
    y4: float
    n: int = 0
    p: int = 0
    num: float | None = None
    den: float | None = None

    def __post_init__(self):
        if self.num is None:
            object.__setattr__(self, "num", self.y1 - self.y3)
        if self.den is None:
            object.__setattr__(self, "den", self.y1 + self.y2 - self.y3)

    def as_dict(self):
        return {"y1": self.y1, "y2": self.y2, "y3": self.y3, "y4": self.y4}


@dataclass(frozen=True)
class ShrinkageCoefficients:
    alpha: float
    beta: float
    policy: str = "raw"
    degenerate: bool = False


def _as_data(data, Q=None, min_n=2):
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data must be a 2-D (n, p) array, got ndim={X.ndim}")
    n, p = X.shape
    if n < min_n:
        raise ValueError(f"need at least {min_n} observations, got {n}")
    if Q is not None and Q.p != p:
        raise ValueError(f"Q has dimension {Q.p} but data has p={p}")
    return X


def compute_y(data, Q, xbar=None):
    """Compute ``(Y1, Y2, Y3, Y4)`` for an ``(n, p)`` sample.

    Parameters
    ----------
    data : array_like, shape (n, p)
        Observations in rows; ``n >= 2``.
    Q : QuadraticForm
    xbar : ndarray, optional
        Precomputed column means of ``data``.
    """
    X = _as_data(data, Q)
    n, p = X.shape
    if xbar is None:
        xbar = X.mean(axis=0)
    if Q.kind == "dense":
        dev = X - xbar
        W = float(np.einsum("ij,ij->", dev @ Q.matrix, dev))
        a = dev @ Q.rowsum
        V = float(a @ a)
    else:
        W, V = _backend.centered_qsums(X, xbar, Q.weights)

    eqe = Q.eqe
    abar = float(Q.e_dot(xbar))
    y4 = abar / eqe
    rqr = Q.norm2(xbar - y4)
    m = p * (n - 1)
    y1 = n / p * Q.norm2(xbar) - W / m
    y2 = W / m
    y3 = n / p * abar * abar / eqe - V / (m * eqe)
    num = n / p * rqr - (W - V / eqe) / m
    den = n / p * rqr + V / (eqe * m)
    return YStats(y1, y2, y3, y4, n, p, num, den)


def default_tol(y):
    return 1e-12 * max(abs(y.y1), abs(y.y2), abs(y.y3), 1.0)


def shrinkage_coefficients(y, policy="raw", tol=None):
    """Plug-in ``(alpha, beta)`` from the U-statistics.

    ``alpha = (Y1 - Y3) / (Y1 + Y2 - Y3)`` and
    ``beta = Y2 / (Y1 + Y2 - Y3) * Y4``. Under ``policy="clamped"`` alpha is
    projected onto ``[0, 1]`` and ``beta = (1 - alpha) Y4``.

    When ``|Y1 + Y2 - Y3| <= tol`` the result is degenerate: ``alpha = 0``,
    ``beta = Y4`` and ``degenerate`` is set, so the estimate becomes the
    constant vector ``Y4 e``.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown coefficient policy {policy!r}; expected one of {POLICIES}")
    if not all(np.isfinite([y.y1, y.y2, y.y3, y.y4])):
        raise ValueError("U-statistics must be finite")
    if tol is None:
        tol = default_tol(y)
    den = y.den
    if abs(den) <= tol:
        return ShrinkageCoefficients(0.0, y.y4, policy, True)
    alpha = y.num / den
    if policy == "clamped":
        alpha = min(max(alpha, 0.0), 1.0)
        return ShrinkageCoefficients(alpha, (1.0 - alpha) * y.y4, policy, False)
    return ShrinkageCoefficients(alpha, y.y2 / den * y.y4, policy, False)
