"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def col_mean_var(X):
    n = X.shape[0]
    mean = X.mean(axis=0)
    dev = X - mean
    ss = np.einsum("ij,ij->j", dev, dev)
    var = ss / (n - 1) if n > 1 else ss
    return mean, var


def centered_qsums(X, xbar, q):
    dev = X - xbar
    w = float(np.einsum("ij,ij,j->", dev, dev, q))
    a = dev @ q
    return w, float(a @ a)
