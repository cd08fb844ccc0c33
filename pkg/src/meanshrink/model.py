"""Ground-truth designs and data generation for ``X_i = Sigma^{1/2} eps_i + mu``."""

from dataclasses import dataclass, field, replace

import numpy as np

SIGMA_KINDS = ("identity", "sigma1", "sigma2", "sigma3", "custom")
MEAN_KINDS = ("mu1", "mu2", "constant", "custom")

def replication_rng(seed, index, stream=0):
    """Independent generator for replication ``index`` of a run seeded by ``seed``.

    Streams come from ``SeedSequence(seed, spawn_key=(stream, index))``, so
    a replication's draws do not depend on which worker runs it.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ErrorDist:
    """Innovation law: standard normal, or Student t rescaled to unit variance."""

    kind: str = "normal"
    df: float | None = None

    def __post_init__(self):
        if self.kind == "normal":
            if self.df is not None:
                raise ValueError("normal innovations take no degrees of freedom")
        elif self.kind == "t":
            if self.df is None or not self.df > 4:
                raise ValueError(f"scaled-t innovations need df > 4 (finite fourth moment), got {self.df}")
        else:
            raise ValueError(f"unknown innovation kind {self.kind!r}; expected 'normal' or 't'")

    @property
    def delta(self):
        """Excess kurtosis ``E(eps^4) - 3``."""
        return 0.0 if self.kind == "normal" else 6.0 / (self.df - 4.0)

    def draw(self, rng, size):
        if self.kind == "normal":
            return rng.standard_normal(size)
        v = self.df
        return rng.standard_t(v, size) * np.sqrt((v - 2.0) / v)

    def label(self):
        return "normal" if self.kind == "normal" else f"t(df={self.df:g})"


@dataclass(frozen=True)
class ProblemInstance:
    """Ground truth for one design: ``mu``, ``Sigma``, its root, ``n`` and errors.

    Use :func:`make_instance` to build one; it validates ``Sigma`` and computes
    the symmetric square root.
    """

    mu: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    sigma_half: np.ndarray = field(repr=False)
    n: int
    p: int
    errors: ErrorDist = ErrorDist()
    # sqrt of the diagonal when Sigma is diagonal; enables O(np) sampling
    half_diag: np.ndarray | None = field(default=None, repr=False)

    def with_mean(self, mu):
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.p,):
            raise ValueError(f"mean must have length {self.p}, got shape {mu.shape}")
        return replace(self, mu=mu)


def _is_diagonal(S):
    return not np.any(S - np.diag(np.diag(S)))


def make_instance(mu, sigma, n, errors=None):
    """Validate and assemble a :class:`ProblemInstance`."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    p = mu.shape[0] if mu.ndim == 1 else -1
    if mu.ndim != 1 or sigma.shape != (p, p):
        raise ValueError(f"mu must be length p and sigma p x p; got {mu.shape} and {sigma.shape}")
    if int(n) < 1:
        raise ValueError(f"sample size n must be >= 1, got {n}")
    errors = errors or ErrorDist()
    if _is_diagonal(sigma):
        dg = np.diag(sigma)
        if np.any(dg <= 0):
            raise ValueError("covariance matrix is not positive definite")
        half_diag = np.sqrt(dg)
        half = np.diag(half_diag)
    else:
        _check_pd(sigma)
        half = psd_sqrt(sigma)
        half_diag = None
    return ProblemInstance(mu, sigma, half, int(n), p, errors, half_diag)


def _check_pd(S):
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive definite") from None


def sigma1_diagonal(p):
    """Diagonal of the base covariance: 20% ones, 40% threes, 40% tens, in that order."""
    if p % 5:
        raise ValueError(f"sigma1-family covariances need p divisible by 5, got {p}")
    k1, k2 = p // 5, 2 * p // 5
    return np.concatenate([np.full(k1, 1.0), np.full(k2, 3.0), np.full(p - k1 - k2, 10.0)])


def build_covariance(kind, p, rho=None, matrix=None, shuffle_rng=None):
    """Population covariance for the simulation designs.

    Parameters
    ----------
    kind : {"identity", "sigma1", "sigma2", "sigma3", "custom"}
        ``sigma2`` scales an AR(1) correlation ``rho**|i-j|`` and ``sigma3``
        an equicorrelation ``rho`` by the square root of ``sigma1``.
    p : int
    rho : float, optional
        Correlation in ``[0, 1)`` for ``sigma2``/``sigma3``.
    matrix : array_like, optional
        The ``custom`` covariance.
    shuffle_rng : numpy.random.Generator, optional
        If given, the ``sigma1`` eigenvalues are randomly permuted over the
        diagonal instead of being placed in blocks.
    """
    p = int(p)
    if p < 1:
        raise ValueError(f"dimension p must be >= 1, got {p}")
    if kind == "identity":
        return np.eye(p)
    if kind == "custom":
        if matrix is None:
            raise ValueError("custom covariance needs a matrix")
        S = np.array(matrix, dtype=float)
        if S.shape != (p, p):
            raise ValueError(f"custom covariance must be {p}x{p}, got {S.shape}")
        if np.abs(S - S.T).max() > 1e-10 * max(np.abs(S).max(), 1e-300):
            raise ValueError("custom covariance is not symmetric")
        _check_pd(S)
        return S
    if kind not in ("sigma1", "sigma2", "sigma3"):
        raise ValueError(f"unknown covariance kind {kind!r}; expected one of {SIGMA_KINDS}")
    lam = sigma1_diagonal(p)
    if shuffle_rng is not None:
        lam = shuffle_rng.permutation(lam)
    if kind == "sigma1":
        return np.diag(lam)
    if rho is None or not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1) for {kind}, got {rho}")
    idx = np.arange(p)
    if kind == "sigma2":
        corr = rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    else:
        corr = np.full((p, p), float(rho))
        np.fill_diagonal(corr, 1.0)
    s = np.sqrt(lam)
    S = corr * s[:, None] * s[None, :]
    # exact diagonal, so rho = 0 gives sigma1 bit for bit
    np.fill_diagonal(S, lam)
    return S


def build_mean(kind, p, rng=None, tau=None, c=None, values=None):
    """Population mean for the simulation designs.

    ``mu1`` draws ``p`` iid ``N(0, tau^2)`` values from ``rng``; ``mu2`` is
    ``+tau`` on the first half and ``-tau`` on the second.
    """
    p = int(p)
    if p < 1:
        raise ValueError(f"dimension p must be >= 1, got {p}")
    if kind in ("mu1", "mu2"):
        if tau is None or tau < 0:
            raise ValueError(f"{kind} needs tau >= 0, got {tau}")
    if kind == "mu1":
        if rng is None:
            raise ValueError("mu1 needs a random generator")
        return tau * rng.standard_normal(p)
    if kind == "mu2":
        if p % 2:
            raise ValueError(f"mu2 needs an even dimension, got p={p}")
        return np.concatenate([np.full(p // 2, float(tau)), np.full(p // 2, -float(tau))])
    if kind == "constant":
        return np.full(p, float(0.0 if c is None else c))
    if kind == "custom":
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.shape != (p,):
            raise ValueError(f"custom mean must have length {p}, got {v.size}")
        return v
    raise ValueError(f"unknown mean kind {kind!r}; expected one of {MEAN_KINDS}")


def psd_sqrt(S):
    """Symmetric positive semidefinite square root by spectral decomposition.

    Eigenvalues down to ``-1e-10 * ||S||_2`` are clipped to zero; anything
    more negative is an error.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    scale = np.abs(S).max() if S.size else 0.0
    if np.abs(S - S.T).max(initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    floor = -1e-10 * max(np.abs(w).max(initial=0.0), 1e-300)
    if w.size and w.min() < floor:
        raise ValueError(f"matrix has eigenvalue {w.min():.3g} below the PSD floor")
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def generate_sample(inst, rng):
    """Draw the ``(n, p)`` data matrix with rows ``Sigma^{1/2} eps_i + mu``."""
    eps = inst.errors.draw(rng, (inst.n, inst.p))
    if inst.half_diag is not None:
        return eps * inst.half_diag + inst.mu
    return eps @ inst.sigma_half + inst.mu
