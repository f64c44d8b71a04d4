"""Log posterior densities of the switching-regression model.

All densities are fully normalized in the regression coefficients, so
``log_marginal_*`` equals the log of the integral of ``exp(log_full_posterior)``
over the (free) coefficients exactly.  The normalizing constant of the
data distribution itself is not computed.

Per contact index the data enter only through the Gram matrices of the
two blocks, which do not depend on the error variances.  They are held in
:class:`GammaStats`, and every density is assembled from them, so that
variance updates cost a single small Cholesky factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .design import constraint_matrix, post_basis, pre_basis
from .model import (
    ConditioningError,
    ConfigurationError,
    DegeneratePartitionError,
    DomainError,
    ForceCurve,
    Hyperparameters,
    ModelSpec,
    x_of_gamma,
)

LOG_2PI = math.log(2.0 * math.pi)


def cholesky_with_jitter(A):
    """Lower Cholesky factor, retrying with a growing diagonal jitter.

    Returns ``(L, jitter)``.  The jitter starts at ``1e-12 * trace(A) / p``
    and is multiplied by 10 at most three times.
    """
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    p = A.shape[0]
    base = 1e-12 * abs(np.trace(A)) / p
    for m in range(4):
        jitter = base * 10.0**m
        try:
            return np.linalg.cholesky(A + jitter * np.eye(p)), jitter
        except np.linalg.LinAlgError:
            continue
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(A))
    raise ConditioningError("posterior precision matrix is not positive definite", cond)


def _batched_cholesky(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return np.stack([cholesky_with_jitter(a)[0] for a in A])


def _batched_solve_lower(L, b):
    return np.linalg.solve(L, b[..., None])[..., 0]


def _small_logdet_quad(A, b):
    """``(log|A|, b' A^-1 b)`` by an unrolled Cholesky on nested lists.

    Faster than LAPACK for the few-by-few systems of the sampler hot loop.
    Returns ``None`` when a pivot is not positive.
    """
    p = len(b)
    L = [[0.0] * p for _ in range(p)]
    logdet = 0.0
    z = [0.0] * p
    for i in range(p):
        Li = L[i]
        for j in range(i):
            Lj = L[j]
            acc = A[i][j]
            for m in range(j):
                acc -= Li[m] * Lj[m]
            Li[j] = acc / Lj[j]
        d = A[i][i]
        for m in range(i):
            d -= Li[m] * Li[m]
        if not d > 0.0:
            return None
        d = math.sqrt(d)
        Li[i] = d
        logdet += math.log(d)
        acc = b[i]
        for m in range(i):
            acc -= Li[m] * z[m]
        z[i] = acc / d
    return 2.0 * logdet, math.fsum(v * v for v in z)


def log_inv_gamma(s, a0, b0):
    return a0 * math.log(b0) - math.lgamma(a0) - (a0 + 1.0) * math.log(s) - b0 / s


def log_gamma_prior(b0, kappa, eta):
    return -math.lgamma(kappa) - kappa * math.log(eta) + (kappa - 1.0) * math.log(b0) - b0 / eta


@dataclass(frozen=True, eq=False)
class GammaStats:
    """Variance-free sufficient statistics at one contact index.

    ``G1``/``G2`` are the pre/post Gram matrices in free-coefficient
    coordinates, ``h1``/``h2`` the matching cross products with the data
    and ``yy1``/``yy2`` the block sums of squared forces.
    """

    gamma: float
    k: int
    x_gamma: float
    T: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    yy1: float
    yy2: float
    n1: int
    n2: int


@dataclass(frozen=True, eq=False)
class MarginalAux:
    """Posterior precision ``A``, shift ``b`` and derived quantities.

    ``quad`` is ``y' Sigma_g^-1 y + mu' Sigma^-1 Lambda mu - b' A^-1 b``.
    ``blocks`` holds ``(A1, A2, b1, b2)`` when ``A`` is block diagonal.
    """

    A: np.ndarray
    b: np.ndarray
    chol: np.ndarray
    logdet_A: float
    quad: float
    mean: np.ndarray
    blocks: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = None


@dataclass(frozen=True)
class BlockTerms:
    """Per-block quantities of the unconstrained model.

    With ``M_i = X_i'X_i + Lambda_i`` and ``c_i = X_i'y_i + Lambda_i mu_i``,
    ``S_i = y_i'y_i + mu_i' Lambda_i mu_i - c_i' M_i^-1 c_i`` and
    ``logdet_i = log |M_i|``; neither depends on the variances.
    """

    k: int
    n1: int
    n2: int
    logdet1: float
    S1: float
    logdet2: float
    S2: float


class MarginalPosterior:
    """Density evaluator for one force curve, model and prior.

    Works in whatever coordinates ``x`` and ``y`` are given in; the
    samplers pass standardized coordinates.
    """

    def __init__(self, x, y, spec: ModelSpec, hyper: Hyperparameters):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n = self.x.size
        self.spec = spec
        self.hyper = hyper
        self.bounds = spec.prior_bounds(self.n)
        self.mu, self.lam = hyper.prior_arrays(spec)
        self.q1 = spec.n_pre
        self.p = spec.p_free
        self.q2 = self.p - self.q1
        self.block = np.r_[np.zeros(self.q1, dtype=int), np.ones(self.q2, dtype=int)]
        self._diag = np.diag_indices(self.p)
        self.sum_log_lam = float(np.sum(np.log(self.lam)))
        self.log_gamma_prior = -math.log(self.bounds[1] - self.bounds[0])

        r = pre_basis(self.x, spec.d1)
        self._F1 = np.cumsum(r[:, :, None] * r[:, None, :], axis=0)
        self._g1 = np.cumsum(r * self.y[:, None], axis=0)
        yy = self.y**2
        self._yy_pre = np.cumsum(yy)
        self._yy_total = float(self._yy_pre[-1])
        self._grid = None
        self._grid_blocks = None

    # -- statistics -----------------------------------------------------

    def _check_gamma(self, gamma):
        k = int(math.floor(gamma))
        if k < 1 or k > self.n - 1:
            raise DegeneratePartitionError(
                f"gamma = {gamma} leaves an empty block (n = {self.n})"
            )
        return k

    def in_prior(self, gamma) -> bool:
        lo, hi = self.bounds
        return lo <= gamma < hi

    def stats(self, gamma: float) -> GammaStats:
        k = self._check_gamma(gamma)
        spec = self.spec
        xg = x_of_gamma(self.x, gamma)
        B = post_basis(self.x[k:] - xg, spec.post_powers)
        y2 = self.y[k:]
        T = constraint_matrix(spec, xg)
        R = T[self.q1:]
        G1 = np.zeros((self.p, self.p))
        G1[: self.q1, : self.q1] = self._F1[k - 1]
        h1 = np.zeros(self.p)
        h1[: self.q1] = self._g1[k - 1]
        BR = B @ R
        yy1 = float(self._yy_pre[k - 1])
        return GammaStats(
            float(gamma), k, xg, T, G1, BR.T @ BR, h1, BR.T @ y2,
            yy1, self._yy_total - yy1, k, self.n - k,
        )

    def prior_precision(self, s1, s2):
        return self.lam / np.where(self.block == 0, s1, s2)

    def aux(self, st: GammaStats, s1: float, s2: float) -> MarginalAux:
        P = self.prior_precision(s1, s2)
        A = st.G1 / s1 + st.G2 / s2
        A[np.diag_indices(self.p)] += P
        b = st.h1 / s1 + st.h2 / s2 + P * self.mu
        L, _ = cholesky_with_jitter(A)
        z = np.linalg.solve(L, b)
        mean = np.linalg.solve(L.T, z)
        quad = st.yy1 / s1 + st.yy2 / s2 + float(np.sum(P * self.mu**2)) - float(z @ z)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        blocks = None
        if self.spec.smoothness < 0:
            q = self.q1
            blocks = (A[:q, :q], A[q:, q:], b[:q], b[q:])
        return MarginalAux(A, b, L, logdet, quad, mean, blocks)

    def variance_prior_terms(self, s1, s2, b0):
        h = self.hyper
        return (
            log_inv_gamma(s1, h.a0, b0)
            + log_inv_gamma(s2, h.a0, b0)
            + log_gamma_prior(b0, h.kappa, h.eta)
        )

    def log_core(self, st: GammaStats, s1, s2) -> float:
        """Terms of the log marginal that depend on the data.

        Excludes the variance and contact-index priors, so that
        ``log_density = log_core + log p(sigma^2 | b0) + log p(b0) + log p(gamma)``.
        """
        ls1, ls2 = math.log(s1), math.log(s2)
        r1, r2 = 1.0 / s1, 1.0 / s2
        P = self.lam * np.where(self.block == 0, r1, r2)
        A = st.G1 * r1 + st.G2 * r2
        A[self._diag] += P
        b = st.h1 * r1 + st.h2 * r2 + P * self.mu
        fast = _small_logdet_quad(A.tolist(), b.tolist()) if self.p <= 8 else None
        if fast is None:
            ax = self.aux(st, s1, s2)
            logdet, quad = ax.logdet_A, ax.quad
        else:
            logdet = fast[0]
            quad = st.yy1 * r1 + st.yy2 * r2 + float(P @ self.mu**2) - fast[1]
        return (
            -0.5 * self.n * LOG_2PI
            - 0.5 * ((st.n1 + self.q1) * ls1 + (st.n2 + self.q2) * ls2)
            + 0.5 * self.sum_log_lam
            - 0.5 * logdet
            - 0.5 * quad
        )

    def log_density(self, st: GammaStats, s1, s2, b0) -> float:
        """Log marginal posterior (coefficients integrated out), general path."""
        if s1 <= 0 or s2 <= 0 or b0 <= 0:
            raise DomainError("variances and b0 must be positive")
        if not self.in_prior(st.gamma):
            return -math.inf
        return self.log_core(st, s1, s2) + self.variance_prior_terms(s1, s2, b0) + self.log_gamma_prior

    # -- unconstrained block form ----------------------------------------

    def _block(self, G, h, yy, idx):
        lam, mu = self.lam[idx], self.mu[idx]
        M = G[np.ix_(idx, idx)] + np.diag(lam)
        c = h[idx] + lam * mu
        L, _ = cholesky_with_jitter(M)
        z = np.linalg.solve(L, c)
        return 2.0 * float(np.sum(np.log(np.diag(L)))), yy + float(np.sum(lam * mu**2)) - float(z @ z)

    def block_terms(self, st: GammaStats) -> BlockTerms:
        if self.spec.smoothness >= 0:
            raise ConfigurationError("block form only exists for the unconstrained model")
        i1 = np.arange(self.q1)
        i2 = np.arange(self.q1, self.p)
        ld1, S1 = self._block(st.G1, st.h1, st.yy1, i1)
        ld2, S2 = self._block(st.G2, st.h2, st.yy2, i2)
        return BlockTerms(st.k, st.n1, st.n2, ld1, S1, ld2, S2)

    def log_core_blocks(self, bt: BlockTerms, s1, s2) -> float:
        return (
            -0.5 * self.n * LOG_2PI
            - 0.5 * (bt.n1 * math.log(s1) + bt.n2 * math.log(s2))
            - 0.5 * (bt.logdet1 + bt.logdet2)
            + 0.5 * self.sum_log_lam
            - 0.5 * (bt.S1 / s1 + bt.S2 / s2)
        )

    def log_density_blocks(self, bt: BlockTerms, gamma, s1, s2, b0) -> float:
        if s1 <= 0 or s2 <= 0 or b0 <= 0:
            raise DomainError("variances and b0 must be positive")
        if not self.in_prior(gamma):
            return -math.inf
        return self.log_core_blocks(bt, s1, s2) + self.variance_prior_terms(s1, s2, b0) + self.log_gamma_prior

    # -- grid over integer contact indices ------------------------------

    def cell_bounds(self):
        """Overlap of each cell ``(k, k+1)``, ``k = 1..n-1``, with the prior support."""
        k = np.arange(1, self.n, dtype=float)
        lo, hi = self.bounds
        left = np.maximum(k, lo)
        right = np.minimum(k + 1.0, hi)
        return left, right - left

    def _post_grams_on_grid(self, chunk_elems=2_000_000):
        """Post-contact Gram matrices at integer indices, x_gamma = x_k."""
        n, powers = self.n, self.spec.post_powers
        m2 = len(powers) + 1
        F2 = np.empty((n - 1, m2, m2))
        g2 = np.empty((n - 1, m2))
        cols = np.arange(n)
        step = max(1, chunk_elems // (n * m2))
        for start in range(0, n - 1, step):
            ks = np.arange(start + 1, min(start + 1 + step, n))
            mask = cols[None, :] >= ks[:, None]
            D = np.where(mask, self.x[None, :] - self.x[ks - 1, None], 0.0)
            B = np.empty((ks.size, m2, n))
            B[:, 0] = mask
            for j, p in enumerate(powers, start=1):
                B[:, j] = D**p
            F2[ks - 1] = np.einsum("kai,kbi->kab", B, B)
            g2[ks - 1] = B @ self.y
        return F2, g2

    def grid_stats(self):
        """Stacked :class:`GammaStats` fields for ``gamma = 1..n-1`` (cached)."""
        if self._grid is None:
            F2, g2 = self._post_grams_on_grid()
            K, p, q1 = self.n - 1, self.p, self.q1
            G1 = np.zeros((K, p, p))
            G1[:, :q1, :q1] = self._F1[:K]
            h1 = np.zeros((K, p))
            h1[:, :q1] = self._g1[:K]
            R = np.stack([constraint_matrix(self.spec, xk)[q1:] for xk in self.x[:K]])
            G2 = np.einsum("kai,kab,kbj->kij", R, F2, R)
            h2 = np.einsum("kai,ka->ki", R, g2)
            yy1 = self._yy_pre[:K]
            self._grid = dict(G1=G1, G2=G2, h1=h1, h2=h2, yy1=yy1, yy2=self._yy_total - yy1,
                              n1=np.arange(1, self.n), n2=self.n - np.arange(1, self.n))
        return self._grid

    def grid_block_terms(self):
        """Unconstrained :class:`BlockTerms` fields on the integer grid (cached)."""
        if self._grid_blocks is None:
            g = self.grid_stats()
            out = {}
            for name, idx, G, h, yy in (
                ("1", np.arange(self.q1), g["G1"], g["h1"], g["yy1"]),
                ("2", np.arange(self.q1, self.p), g["G2"], g["h2"], g["yy2"]),
            ):
                lam, mu = self.lam[idx], self.mu[idx]
                M = G[:, idx][:, :, idx] + np.diag(lam)
                c = h[:, idx] + lam * mu
                L = _batched_cholesky(M)
                z = _batched_solve_lower(L, c)
                out["logdet" + name] = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
                out["S" + name] = yy + np.sum(lam * mu**2) - np.sum(z * z, axis=1)
            self._grid_blocks = out
        return self._grid_blocks

    def profile(self, s1, s2, b0, normalize=True) -> np.ndarray:
        """Log marginal density at ``gamma = 1..n-1``; cells outside the prior get ``-inf``."""
        g = self.grid_stats()
        n1, n2 = g["n1"], g["n2"]
        ls1, ls2 = math.log(s1), math.log(s2)
        if self.spec.smoothness < 0:
            bt = self.grid_block_terms()
            out = (
                -0.5 * (n1 * ls1 + n2 * ls2)
                - 0.5 * (bt["logdet1"] + bt["logdet2"])
                - 0.5 * (bt["S1"] / s1 + bt["S2"] / s2)
            )
        else:
            P = self.prior_precision(s1, s2)
            with np.errstate(over="ignore", invalid="ignore"):
                A = g["G1"] / s1 + g["G2"] / s2
            A[:, np.arange(self.p), np.arange(self.p)] += P
            b = g["h1"] / s1 + g["h2"] / s2 + P * self.mu
            bad = ~np.all(np.isfinite(A), axis=(1, 2))
            A[bad] = np.eye(self.p)
            L = _batched_cholesky(A)
            z = _batched_solve_lower(L, b)
            logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
            quad = g["yy1"] / s1 + g["yy2"] / s2 + np.sum(P * self.mu**2) - np.sum(z * z, axis=1)
            out = (
                -0.5 * ((n1 + self.q1) * ls1 + (n2 + self.q2) * ls2)
                - 0.5 * logdet
                - 0.5 * quad
            )
            out[bad] = -np.inf
        _, width = self.cell_bounds()
        # overflow at extreme variances counts as zero density, not as a crash
        out = np.where((width > 0) & np.isfinite(out), out, -np.inf)
        if normalize:
            top = np.max(out)
            return out - top if np.isfinite(top) else out
        return (
            out
            - 0.5 * self.n * LOG_2PI
            + 0.5 * self.sum_log_lam
            + self.variance_prior_terms(s1, s2, b0)
            + self.log_gamma_prior
        )


def _evaluator(curve, spec, hyper):
    x = curve.x if isinstance(curve, ForceCurve) else np.asarray(curve[0])
    y = curve.y if isinstance(curve, ForceCurve) else np.asarray(curve[1])
    return MarginalPosterior(x, y, spec, hyper)


def compute_marginal_aux(curve, spec, hyper, gamma, sigma1_sq, sigma2_sq) -> MarginalAux:
    mp = _evaluator(curve, spec, hyper)
    return mp.aux(mp.stats(gamma), sigma1_sq, sigma2_sq)


def log_marginal_unconstrained(gamma, sigma1_sq, sigma2_sq, b0, curve, spec, hyper) -> float:
    if spec.smoothness != -1:
        raise ConfigurationError("unconstrained marginal requires smoothness = -1")
    mp = _evaluator(curve, spec, hyper)
    if sigma1_sq <= 0 or sigma2_sq <= 0 or b0 <= 0:
        raise DomainError("variances and b0 must be positive")
    return mp.log_density_blocks(mp.block_terms(mp.stats(gamma)), gamma, sigma1_sq, sigma2_sq, b0)


def log_marginal_constrained(gamma, sigma1_sq, sigma2_sq, b0, curve, spec, hyper) -> float:
    mp = _evaluator(curve, spec, hyper)
    return mp.log_density(mp.stats(gamma), sigma1_sq, sigma2_sq, b0)


def grid_profile(curve, spec, hyper, sigma1_sq, sigma2_sq, b0) -> np.ndarray:
    """Max-normalized log marginal density at integer ``gamma = 1..n-1``."""
    return _evaluator(curve, spec, hyper).profile(sigma1_sq, sigma2_sq, b0)


def log_full_posterior(state, curve, spec: ModelSpec, hyper: Hyperparameters) -> float:
    """Log joint posterior density of ``(gamma, beta_tilde, sigma1^2, sigma2^2, b0)``.

    ``state.beta_tilde`` holds the free coefficients (all of them when
    ``smoothness = -1``).
    """
    s1, s2, b0 = state.sigma1_sq, state.sigma2_sq, state.b0
    if s1 <= 0 or s2 <= 0 or b0 <= 0:
        raise DomainError("variances and b0 must be positive")
    if state.beta_tilde is None:
        raise ConfigurationError("state carries no regression coefficients")
    mp = _evaluator(curve, spec, hyper)
    if not mp.in_prior(state.gamma):
        return -math.inf
    k = mp._check_gamma(state.gamma)
    xg = x_of_gamma(mp.x, state.gamma)
    bt = np.asarray(state.beta_tilde, dtype=float)
    beta = constraint_matrix(spec, xg) @ bt
    q1 = spec.n_pre
    r1 = mp.y[:k] - pre_basis(mp.x[:k], spec.d1) @ beta[:q1]
    r2 = mp.y[k:] - post_basis(mp.x[k:] - xg, spec.post_powers) @ beta[q1:]
    var = np.where(mp.block == 0, s1, s2)
    loglik = (
        -0.5 * mp.n * LOG_2PI
        - 0.5 * (k * math.log(s1) + (mp.n - k) * math.log(s2))
        - 0.5 * (r1 @ r1 / s1 + r2 @ r2 / s2)
    )
    logprior_beta = (
        -0.5 * mp.p * LOG_2PI
        + 0.5 * mp.sum_log_lam
        - 0.5 * float(np.sum(np.log(var)))
        - 0.5 * float(np.sum(mp.lam * (bt - mp.mu) ** 2 / var))
    )
    return loglik + logprior_beta + mp.variance_prior_terms(s1, s2, b0) + mp.log_gamma_prior
