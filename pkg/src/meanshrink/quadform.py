"""Weighting matrices ``Q`` for quadratic loss and their kernels.

Identity and diagonal forms are stored as O(p) vectors; a dense form keeps
the full matrix plus its row sums ``Qe`` so ``e'Qx`` never needs ``e``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._backend import col_mean_var

KINDS = ("identity", "diagonal", "dense")

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class QuadraticForm:
    """A validated positive definite weighting matrix.

    Attributes
    ----------
    kind : {"identity", "diagonal", "dense"}
    p : int
        Dimension.
    diag : ndarray or None
        Diagonal entries for ``kind == "diagonal"``.
    matrix : ndarray or None
        Full matrix for ``kind == "dense"``.
    eqe : float
        ``e'Qe``, the sum of all entries of ``Q``.
    """

    kind: str
    p: int
    diag: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)
    eqe: float = 0.0
    rowsum: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def weights(self):
        """Diagonal of ``Q`` as a length-p vector."""
        if self.kind == "identity":
            return np.ones(self.p)
        if self.kind == "diagonal":
            return self.diag
        return np.diag(self.matrix).copy()

    def to_array(self):
        if self.kind == "identity":
            return np.eye(self.p)
        if self.kind == "diagonal":
            return np.diag(self.diag)
        return self.matrix.copy()

    def apply(self, x):
        """``Q @ x`` for a vector or for each row of a matrix."""
        if self.kind == "identity":
            return np.array(x, dtype=float, copy=True)
        if self.kind == "diagonal":
            return x * self.diag
        return x @ self.matrix

    def e_dot(self, x):
        """``e'Qx``; for a 2-D input, one value per row."""
        return x @ self.rowsum

    def norm2(self, x):
        """``x'Qx``."""
        if self.kind == "identity":
            return float(x @ x)
        if self.kind == "diagonal":
            return float(np.dot(x * self.diag, x))
        return float(x @ self.matrix @ x)


def _freeze(a):
    a.setflags(write=False)
    return a


def make_q(kind, p, values=None):
    """Build a :class:`QuadraticForm`.

    Parameters
    ----------
    kind : {"identity", "diagonal", "dense"}
    p : int
        Dimension, at least 1.
    values : array_like, optional
        Diagonal entries (``kind="diagonal"``) or the full symmetric matrix
        (``kind="dense"``).

    Raises
    ------
    ValueError
        If ``p < 1``, a diagonal entry is not strictly positive, or the dense
        matrix is asymmetric or not positive definite. Invalid input is never
        repaired.
    """
    p = int(p)
    if p < 1:
        raise ValueError(f"dimension p must be >= 1, got {p}")
    if kind == "identity":
        if values is not None:
            raise ValueError("identity Q takes no values")
        return QuadraticForm("identity", p, eqe=float(p), rowsum=_freeze(np.ones(p)))
    if kind == "diagonal":
        d = np.array(values, dtype=float).reshape(-1)
        if d.shape != (p,):
            raise ValueError(f"diagonal Q needs {p} entries, got {d.size}")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            bad = int(np.flatnonzero(~(d > 0) | ~np.isfinite(d))[0])
            raise ValueError(f"diagonal Q entry {bad} is not strictly positive: {d[bad]!r}")
        d = _freeze(d)
        return QuadraticForm("diagonal", p, diag=d, eqe=float(d.sum()), rowsum=d)
    if kind == "dense":
        M = np.array(values, dtype=float)
        if M.shape != (p, p):
            raise ValueError(f"dense Q must be {p}x{p}, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("dense Q has non-finite entries")
        scale = max(np.abs(M).max(), np.finfo(float).tiny)
        if np.abs(M - M.T).max() > _SYM_TOL * scale:
            raise ValueError("dense Q is not symmetric")
        M = 0.5 * (M + M.T)
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise ValueError("dense Q is not positive definite") from None
        M = _freeze(M)
        rowsum = _freeze(M.sum(axis=1))
        return QuadraticForm("dense", p, matrix=M, eqe=float(rowsum.sum()), rowsum=rowsum)
    raise ValueError(f"unknown Q kind {kind!r}; expected one of {KINDS}")


def _vec(x, p, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (p,):
        raise ValueError(f"{name} must have length {p}, got shape {x.shape}")
    return x


def quad_form(Q, x, y):
    """Return ``x'Qy``."""
    x = _vec(x, Q.p, "x")
    y = _vec(y, Q.p, "y")
    if Q.kind == "identity":
        return float(x @ y)
    if Q.kind == "diagonal":
        return float(np.dot(x * Q.diag, y))
    return float(x @ Q.matrix @ y)


def trace_product(Q, S):
    """Return ``tr(QS)`` for a symmetric ``p x p`` matrix ``S``."""
    S = np.asarray(S, dtype=float)
    if S.shape != (Q.p, Q.p):
        raise ValueError(f"S must be {Q.p}x{Q.p}, got shape {S.shape}")
    if Q.kind == "identity":
        return float(np.trace(S))
    if Q.kind == "diagonal":
        return float(Q.diag @ np.diag(S))
    # tr(QS) = sum_ij Q_ij S_ji
    return float(np.einsum("ij,ji->", Q.matrix, S))


def estimate_q_from_sample(data):
    """Diagonal ``Q`` from the inverse unbiased sample variances.

    ``d_i = 1 / S_ii`` with ``S`` the sample covariance (divisor ``n - 1``).
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError("data must be a 2-D (n, p) array")
    n, p = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 observations to estimate Q, got {n}")
    _, var = col_mean_var(X)
    zero = np.flatnonzero(var <= 0)
    if zero.size:
        raise ValueError(f"zero sample variance in coordinate {int(zero[0])}")
    return make_q("diagonal", p, 1.0 / var)
