import mpmath
import numpy as np
import pytest

from indentcp import (
    ChainState,
    ConditioningError,
    ConfigurationError,
    DomainError,
    ForceCurve,
    Hyperparameters,
    MarginalPosterior,
    ModelSpec,
    compute_marginal_aux,
    grid_profile,
    log_full_posterior,
    log_marginal_constrained,
    log_marginal_unconstrained,
)
from indentcp.posterior import cholesky_with_jitter

from oracles import full_design, log_joint, log_marginal_quadrature

CASES = [
    (0, (1.0,), -1),
    (0, (1.5,), -1),
    (1, (1.0,), -1),
    (1, (1.5,), 0),
    (0, (2.0,), 0),
    (0, (1.0, 2.0), 1),
]


def random_instance(seed, d1, powers, s, n=None):
    r = np.random.default_rng(seed)
    spec = ModelSpec(d1=d1, post_powers=powers, smoothness=s)
    n = n or int(r.integers(5, 9))
    x = np.sort(r.uniform(-1, 2, n))
    y = r.normal(0, 1, n) + x
    gamma = float(r.uniform(1, n))
    s1, s2, b0 = np.exp(r.normal(0, 0.5, 3))
    mu = r.normal(0, 1, spec.p_free)
    lam = np.exp(r.normal(0, 1, spec.p_free))
    hyper = Hyperparameters(mu=mu, lambda_diag=lam, a0=2.5, kappa=1.5, eta=0.3)
    return spec, ForceCurve(x, y), gamma, (s1, s2, b0), hyper


def oracle_kw(spec, hyper, n):
    mu, lam = hyper.prior_arrays(spec)
    lo, hi = spec.prior_bounds(n)
    return dict(d1=spec.d1, powers=spec.post_powers, s=spec.smoothness, mu=mu, lam=lam,
                a0=hyper.a0, kappa=hyper.kappa, eta=hyper.eta, bounds=(lo, hi))


class TestFullPosterior:
    @pytest.mark.parametrize("case", CASES)
    def test_matches_oracle(self, case):
        spec, curve, g, (s1, s2, b0), hyper = random_instance(11, *case)
        bt = np.random.default_rng(5).normal(size=spec.p_free)
        got = log_full_posterior(ChainState(g, s1, s2, b0, bt), curve, spec, hyper)
        ref = log_joint(curve.x, curve.y, g, bt, s1, s2, b0, **oracle_kw(spec, hyper, curve.n))
        assert got == pytest.approx(ref, rel=1e-12)

    def test_extended_precision(self):
        mpmath.mp.dps = 40
        x = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
        y = [0.1, -0.2, 0.05, 0.4, 1.1, 1.9]
        spec = ModelSpec(d1=1, post_powers=(1.5,))
        hyper = Hyperparameters(mu=[0.1, -0.1, 0.2, 1.0], lambda_diag=[0.5, 1.0, 2.0, 0.25])
        g, s1, s2, b0 = 3.4, 0.04, 0.09, 0.02
        bt = np.array([0.05, 0.02, 0.3, 1.2])
        got = log_full_posterior(ChainState(g, s1, s2, b0, bt), ForceCurve(x, y), spec, hyper)

        mpf = mpmath.mpf
        k, xg = 3, mpf(1.0) + mpf("0.4") * mpf("0.5")
        total = mpf(0)
        for i in range(6):
            if i < k:
                m, v = bt[0] + bt[1] * mpf(x[i]), mpf(s1)
            else:
                m, v = bt[2] + bt[3] * (mpf(x[i]) - xg) ** mpf(1.5), mpf(s2)
            total += -mpmath.log(2 * mpmath.pi * v) / 2 - (mpf(y[i]) - m) ** 2 / (2 * v)
        for j, (mu, lam) in enumerate(zip([0.1, -0.1, 0.2, 1.0], [0.5, 1.0, 2.0, 0.25])):
            v = mpf(s1 if j < 2 else s2) / mpf(lam)
            total += -mpmath.log(2 * mpmath.pi * v) / 2 - (mpf(bt[j]) - mpf(mu)) ** 2 / (2 * v)
        for s in (s1, s2):
            s = mpf(s)
            total += 2 * mpmath.log(mpf(b0)) - mpmath.loggamma(2) - 3 * mpmath.log(s) - mpf(b0) / s
        total += -mpmath.log(mpf("0.01")) - mpf(b0) / mpf("0.01")
        total += -mpmath.log(5)
        assert got == pytest.approx(float(total), rel=1e-10)

    def test_beta_difference_is_gaussian(self):
        spec, curve, g, (s1, s2, b0), hyper = random_instance(3, 1, (1.5,), -1)
        r = np.random.default_rng(0)
        b1, b2 = r.normal(size=(2, spec.p_free))
        lp = lambda b: log_full_posterior(ChainState(g, s1, s2, b0, b), curve, spec, hyper)
        aux = compute_marginal_aux(curve, spec, hyper, g, s1, s2)
        # the beta-dependence is exactly -1/2 (b - m)' A (b - m)
        q = lambda b: -0.5 * (b - aux.mean) @ aux.A @ (b - aux.mean)
        assert lp(b1) - lp(b2) == pytest.approx(q(b1) - q(b2), rel=1e-9)

    def test_domain(self):
        spec, curve, g, _, hyper = random_instance(1, 0, (1.0,), -1)
        with pytest.raises(DomainError):
            log_marginal_unconstrained(g, -1.0, 1.0, 1.0, curve, spec, hyper)

    def test_outside_prior(self):
        spec = ModelSpec(gamma_prior=(3, 6))
        curve = ForceCurve(np.arange(8.0), np.zeros(8))
        st = ChainState(2.5, 1.0, 1.0, 1.0, np.zeros(4))
        assert log_full_posterior(st, curve, spec, Hyperparameters()) == -np.inf


class TestMarginalAux:
    def test_hand_computed(self):
        curve = ForceCurve(np.arange(6.0), [0.0, 0.1, -0.1, 1.0, 2.1, 2.9])
        spec = ModelSpec(d1=0, post_powers=(1.0,))
        aux = compute_marginal_aux(curve, spec, Hyperparameters(lambda_diag=1.0), 3.0, 2.0, 0.5)
        expected = np.array([[2.0, 0, 0], [0, 8.0, 12.0], [0, 12.0, 30.0]])
        np.testing.assert_allclose(aux.A, expected, rtol=1e-14)
        # b = X' Sigma^-1 y with mu = 0
        np.testing.assert_allclose(aux.b, [0.0 / 2, (1.0 + 2.1 + 2.9) / 0.5, (1.0 + 4.2 + 8.7) / 0.5], rtol=1e-14)
        A1, A2, b1, b2 = aux.blocks
        assert A1.shape == (1, 1) and A2.shape == (2, 2)
        np.testing.assert_allclose(aux.mean, np.linalg.solve(expected, aux.b), rtol=1e-12)

    def test_block_diagonal_exactly(self):
        spec, curve, g, (s1, s2, _), hyper = random_instance(2, 1, (1.0, 2.0), -1, n=8)
        aux = compute_marginal_aux(curve, spec, hyper, g, s1, s2)
        assert np.all(aux.A[:2, 2:] == 0) and np.all(aux.A[2:, :2] == 0)

    def test_constrained_not_block_diagonal(self):
        spec, curve, g, (s1, s2, _), hyper = random_instance(2, 1, (1.5,), 0, n=8)
        aux = compute_marginal_aux(curve, spec, hyper, g, s1, s2)
        assert np.any(aux.A[:2, 2:] != 0)
        assert aux.blocks is None

    def test_ridge_limit(self):
        spec, curve, g, (s1, s2, _), _ = random_instance(4, 1, (1.5,), -1)
        mu = np.array([1.0, -2.0, 0.5, 3.0])
        weak = compute_marginal_aux(curve, spec, Hyperparameters(mu=mu, lambda_diag=1e-3), g, s1, s2)
        strong = compute_marginal_aux(curve, spec, Hyperparameters(mu=mu, lambda_diag=1e9), g, s1, s2)
        assert np.linalg.norm(strong.mean - mu) < 1e-6
        assert np.linalg.norm(strong.mean - mu) < np.linalg.norm(weak.mean - mu)

    def test_quad_definition(self):
        spec, curve, g, (s1, s2, _), hyper = random_instance(9, 1, (1.5,), 0)
        aux = compute_marginal_aux(curve, spec, hyper, g, s1, s2)
        mu, lam = hyper.prior_arrays(spec)
        k = int(g)
        yy = np.sum(curve.y[:k] ** 2) / s1 + np.sum(curve.y[k:] ** 2) / s2
        var = np.r_[np.full(2, s1), np.full(spec.p_free - 2, s2)]
        ref = yy + np.sum(lam * mu**2 / var) - aux.b @ np.linalg.solve(aux.A, aux.b)
        assert aux.quad == pytest.approx(ref, rel=1e-10)
        assert aux.logdet_A == pytest.approx(np.linalg.slogdet(aux.A)[1], rel=1e-12)


class TestMarginalOracle:
    @pytest.mark.parametrize("case", CASES)
    @pytest.mark.parametrize("seed", [0, 1])
    def test_quadrature(self, case, seed):
        spec, curve, g, (s1, s2, b0), hyper = random_instance(100 + seed, *case)
        ref = log_marginal_quadrature(curve.x, curve.y, g, s1, s2, b0, **oracle_kw(spec, hyper, curve.n))
        got = log_marginal_constrained(g, s1, s2, b0, curve, spec, hyper)
        assert abs(got - ref) <= 1e-6 * abs(ref)
        if spec.smoothness == -1:
            got_u = log_marginal_unconstrained(g, s1, s2, b0, curve, spec, hyper)
            assert abs(got_u - ref) <= 1e-6 * abs(ref)

    @pytest.mark.parametrize("seed", range(5))
    def test_unconstrained_reduction(self, seed):
        spec, curve, g, (s1, s2, b0), hyper = random_instance(seed, 1, (1.5,), -1)
        a = log_marginal_unconstrained(g, s1, s2, b0, curve, spec, hyper)
        b = log_marginal_constrained(g, s1, s2, b0, curve, spec, hyper)
        assert a == pytest.approx(b, rel=1e-12)

    def test_unconstrained_requires_s_minus_one(self):
        spec, curve, g, (s1, s2, b0), hyper = random_instance(0, 1, (1.5,), 0)
        with pytest.raises(ConfigurationError):
            log_marginal_unconstrained(g, s1, s2, b0, curve, spec, hyper)

    def test_nonpositive_variance(self):
        spec, curve, g, (s1, s2, b0), hyper = random_instance(0, 1, (1.5,), 0)
        with pytest.raises(DomainError):
            log_marginal_constrained(g, s1, 0.0, b0, curve, spec, hyper)


class TestGridProfile:
    @pytest.mark.parametrize("case", [(1, (1.5,), -1), (1, (1.5,), 0), (1, (1.0, 2.0), 1)])
    def test_equals_pointwise_density(self, case):
        spec, curve, _, (s1, s2, b0), hyper = random_instance(21, *case, n=12)
        mp = MarginalPosterior(curve.x, curve.y, spec, hyper)
        prof = mp.profile(s1, s2, b0, normalize=False)
        for k in range(1, curve.n):
            ref = log_marginal_constrained(float(k), s1, s2, b0, curve, spec, hyper)
            assert prof[k - 1] == pytest.approx(ref, rel=1e-10)
        norm = grid_profile(curve, spec, hyper, s1, s2, b0)
        assert norm.max() == 0.0
        np.testing.assert_allclose(norm, prof - prof.max(), atol=1e-9)

    def test_prior_bounds(self):
        r = np.random.default_rng(0)
        n = 450
        curve = ForceCurve(np.arange(n) * 0.01, r.normal(size=n))
        spec = ModelSpec(gamma_prior=(125, 250))
        prof = grid_profile(curve, spec, Hyperparameters(), 1.0, 1.0, 0.01)
        k = np.arange(1, n)
        assert np.all(np.isneginf(prof[(k < 125) | (k >= 250)]))
        assert np.all(np.isfinite(prof[(k >= 125) & (k < 250)]))

    def test_sharp_kink_argmax(self, kinked_curve):
        spec = ModelSpec(d1=1, post_powers=(1.0,))
        prof = grid_profile(kinked_curve, spec, Hyperparameters(), 1e-4, 1e-4, 1e-4)
        assert int(np.argmax(prof)) + 1 == 30

    def test_null_data_only_determinant_terms(self):
        n = 10
        x = np.linspace(0, 1, n)
        curve = ForceCurve(x, np.zeros(n))
        spec = ModelSpec(d1=1, post_powers=(1.5,))
        s1 = s2 = 0.3
        prof = grid_profile(curve, spec, Hyperparameters(lambda_diag=0.1), s1, s2, 0.1)
        ref = []
        for k in range(1, n):
            X = full_design(x, float(k), 1, (1.5,))
            M1 = X[:k, :2].T @ X[:k, :2] + 0.1 * np.eye(2)
            M2 = X[k:, 2:].T @ X[k:, 2:] + 0.1 * np.eye(2)
            ref.append(-0.5 * (np.linalg.slogdet(M1)[1] + np.linalg.slogdet(M2)[1]))
        ref = np.array(ref) - max(ref)
        np.testing.assert_allclose(prof, ref, atol=1e-8)

    def test_reflection_symmetry(self):
        r = np.random.default_rng(4)
        n = 15
        x = np.linspace(-1, 1, n)
        y = np.abs(x - 0.2) + r.normal(0, 0.05, n)
        spec = ModelSpec(d1=1, post_powers=(1.0,))
        hyper = Hyperparameters(lambda_diag=1e-12)
        p = grid_profile(ForceCurve(x, y), spec, hyper, 0.01, 0.01, 0.01)
        q = grid_profile(ForceCurve(-x[::-1], y[::-1]), spec, hyper, 0.01, 0.01, 0.01)
        # pre block 1..k of one curve is the post block of the mirrored one at n - k
        np.testing.assert_allclose(p[1:-1], q[::-1][1:-1], atol=1e-6)


class TestCholesky:
    def test_jitter_on_singular(self):
        L, jitter = cholesky_with_jitter(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert jitter > 0
        assert np.all(np.isfinite(L))

    def test_conditioning_error(self):
        with pytest.raises(ConditioningError) as info:
            cholesky_with_jitter(-np.eye(3))
        assert np.isfinite(info.value.condition_estimate)

    def test_no_jitter_when_pd(self):
        _, jitter = cholesky_with_jitter(np.eye(3) * 2)
        assert jitter == 0.0
