"""Independent reference implementations used only by the tests.

Everything here is written from the model definition with scipy.stats
densities and explicit design rows, sharing no code with the package.
"""

import math
from math import comb

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import stats


def interp_position(x, gamma):
    k = int(math.floor(gamma))
    if k == len(x):
        return float(x[-1])
    return float(x[k - 1] + (gamma - k) * (x[k] - x[k - 1]))


def full_design(x, gamma, d1, powers):
    """Full block-diagonal design matrix built row by row."""
    n = len(x)
    k = int(math.floor(gamma))
    xg = interp_position(x, gamma)
    q1, m2 = d1 + 1, len(powers) + 1
    X = np.zeros((n, q1 + m2))
    for i in range(n):
        if i < k:
            for j in range(q1):
                X[i, j] = x[i] ** j
        else:
            X[i, q1] = 1.0
            for j, p in enumerate(powers):
                X[i, q1 + 1 + j] = (x[i] - xg) ** p
    return X


def constraint_transform(d1, powers, s, xg):
    """Map free to full coefficients by matching Taylor coefficients at ``xg``."""
    q1, m2 = d1 + 1, len(powers) + 1
    p_full = q1 + m2
    free = [i for i in range(p_full) if not (q1 <= i < q1 + s + 1)]
    T = np.zeros((p_full, len(free)))
    for col, i in enumerate(free):
        T[i, col] = 1.0
    for j in range(s + 1):
        # j-th Taylor coefficient of sum_i b_i x^i at xg
        for i in range(j, q1):
            T[q1 + j, i] = comb(i, j) * xg ** (i - j)
    return T, free


def log_joint(x, y, gamma, beta_free, s1, s2, b0, *, d1, powers, s, mu, lam, a0, kappa, eta, bounds):
    """Log joint density of data, free coefficients and variance parameters.

    ``beta_free`` may be a single vector or a stack of row vectors.
    """
    lo, hi = bounds
    B = np.atleast_2d(np.asarray(beta_free, dtype=float))
    if not lo <= gamma < hi:
        out = np.full(B.shape[0], -np.inf)
        return out if np.ndim(beta_free) == 2 else float(out[0])
    n = len(x)
    k = int(math.floor(gamma))
    xg = interp_position(x, gamma)
    X = full_design(x, gamma, d1, powers)
    T, _ = constraint_transform(d1, powers, s, xg)
    mean = B @ (X @ T).T
    sd = np.where(np.arange(n) < k, math.sqrt(s1), math.sqrt(s2))
    out = np.sum(stats.norm.logpdf(y[None, :], mean, sd[None, :]), axis=1)
    q1 = d1 + 1
    pv = np.array([(s1 if j < q1 else s2) for j in range(B.shape[1])])
    out += np.sum(stats.norm.logpdf(B, np.asarray(mu)[None, :], np.sqrt(pv / np.asarray(lam))[None, :]), axis=1)
    out += float(stats.invgamma.logpdf(s1, a0, scale=b0))
    out += float(stats.invgamma.logpdf(s2, a0, scale=b0))
    out += float(stats.gamma.logpdf(b0, kappa, scale=eta))
    out -= math.log(hi - lo)
    return out if np.ndim(beta_free) == 2 else float(out[0])


def log_marginal_quadrature(x, y, gamma, s1, s2, b0, n_nodes=24, **kw):
    """Integrate ``exp(log_joint)`` over the free coefficients by Gauss-Hermite.

    The integrand is centred at its maximizer and whitened with a
    least-squares factor, then a tensor grid of probabilists' Hermite
    nodes is applied.  Only the oracle density is ever evaluated.
    """
    d1, powers, s = kw["d1"], kw["powers"], kw["s"]
    mu, lam = np.asarray(kw["mu"], float), np.asarray(kw["lam"], float)
    n = len(x)
    k = int(math.floor(gamma))
    xg = interp_position(x, gamma)
    X = full_design(x, gamma, d1, powers)
    T, _ = constraint_transform(d1, powers, s, xg)
    Xt = X @ T
    p = Xt.shape[1]
    w = np.where(np.arange(n) < k, 1 / math.sqrt(s1), 1 / math.sqrt(s2))
    pv = np.array([(s1 if j < d1 + 1 else s2) for j in range(p)])
    W = np.vstack([Xt * w[:, None], np.diag(np.sqrt(lam / pv))])
    r = np.concatenate([y * w, np.sqrt(lam / pv) * mu])
    mode = np.linalg.lstsq(W, r, rcond=None)[0]
    R = np.linalg.qr(W, mode="r")
    Rinv = np.linalg.inv(R)
    nodes, weights = hermegauss(n_nodes)
    grids = np.meshgrid(*([nodes] * p), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for g in np.meshgrid(*([weights] * p), indexing="ij"):
        wgrid = wgrid * g
    z = np.stack([g.ravel() for g in grids], axis=1)
    base = log_joint(x, y, gamma, mode, s1, s2, b0, **_joint_kw(kw))
    betas = mode[None, :] + z @ Rinv.T
    vals = log_joint(x, y, gamma, betas, s1, s2, b0, **_joint_kw(kw)) - base + 0.5 * np.sum(z * z, axis=1)
    total = np.sum(wgrid.ravel() * np.exp(vals))
    logdet_jac = -float(np.sum(np.log(np.abs(np.diag(R)))))
    return base + math.log(total) + logdet_jac


def _joint_kw(kw):
    return {k: kw[k] for k in ("d1", "powers", "s", "mu", "lam", "a0", "kappa", "eta", "bounds")}


def block_scale(x, y, d1, powers, gamma, block, mu, lam):
    """``S_i`` of the unconstrained model from an explicit ridge regression."""
    k = int(math.floor(gamma))
    X = full_design(x, gamma, d1, powers)
    q1 = d1 + 1
    if block == 1:
        Xb, yb, cols = X[:k, :q1], y[:k], slice(0, q1)
    else:
        Xb, yb, cols = X[k:, q1:], y[k:], slice(q1, None)
    m, l = np.asarray(mu, float)[cols], np.asarray(lam, float)[cols]
    bhat = np.linalg.solve(Xb.T @ Xb + np.diag(l), Xb.T @ yb + l * m)
    resid = yb - Xb @ bhat
    return float(resid @ resid + np.sum(l * (bhat - m) ** 2))
