"""Metropolis-within-Gibbs samplers for the contact index.

``run_gibbs_unconstrained`` draws the error variances and ``b0`` from
their exact conditionals; ``run_gibbs_constrained`` updates the variances
by random-walk moves on their logarithms.  In both the regression
coefficients are integrated out and recovered afterwards by composition
draws.

The contact index is updated with a mixture of a local random walk and
an independence proposal built from the marginal density on the integer
grid.  The grid proposal is evaluated lazily at the current variances, so
each update is a valid Metropolis step for the full conditional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np

from .design import Standardization, post_basis, pre_basis
from .model import (
    ChainState,
    ConfigurationError,
    ForceCurve,
    Hyperparameters,
    ModelSpec,
    SamplerConfig,
)
from .posterior import BlockTerms, MarginalAux, MarginalPosterior

TARGET_ACCEPTANCE = 0.44


@dataclass(eq=False)
class ChainTrace:
    """Kept samples of one chain, in the units of the input curve.

    ``beta`` holds the full coefficient vectors (pre-contact polynomial in
    position, then post-contact intercept and power coefficients) and
    ``beta_tilde`` the free subset.  ``acceptance`` maps a move name to
    ``(accepted, proposed)`` counts.
    """

    gamma: np.ndarray
    x_gamma: np.ndarray
    sigma1_sq: np.ndarray
    sigma2_sq: np.ndarray
    b0: np.ndarray
    beta: Optional[np.ndarray]
    beta_tilde: Optional[np.ndarray]
    acceptance: Dict[str, Tuple[int, int]]
    step_sizes: Dict[str, float]
    meta: Dict[str, object] = field(default_factory=dict)

    def __len__(self):
        return self.gamma.size

    @property
    def samples(self):
        bt = self.beta_tilde
        return [
            ChainState(float(g), float(a), float(b), float(c), None if bt is None else bt[i])
            for i, (g, a, b, c) in enumerate(zip(self.gamma, self.sigma1_sq, self.sigma2_sq, self.b0))
        ]

    def acceptance_rates(self) -> Dict[str, float]:
        return {k: (a / p if p else float("nan")) for k, (a, p) in self.acceptance.items()}


class GammaMove(NamedTuple):
    gamma: float
    accepted: bool
    kind: str
    log_density: float


def mh_gamma_step(
    gamma: float,
    log_target: Callable[[float], float],
    rng: np.random.Generator,
    *,
    bounds: Tuple[float, float],
    rw_sd: float,
    mixture_weight: float,
    profile=None,
    cells=None,
    current_log_density: Optional[float] = None,
) -> GammaMove:
    """One Metropolis update of the contact index.

    With probability ``mixture_weight`` (and when ``profile`` is given) a
    cell ``(k, k+1)`` is drawn with probability proportional to
    ``exp(profile[k-1])`` and the proposal is placed uniformly inside its
    overlap with the prior support, given by ``cells = (left, width)``.
    Otherwise a Normal random walk step is proposed.  ``profile`` may be a
    callable, in which case it is only evaluated when the grid move is
    chosen.  Proposals outside ``bounds`` are rejected without evaluating
    the target.
    """
    current = log_target(gamma) if current_log_density is None else current_log_density
    lo, hi = bounds
    if profile is not None and rng.random() < mixture_weight:
        logw = profile() if callable(profile) else profile
        top = np.max(logw)
        if not np.isfinite(top):
            return GammaMove(gamma, False, "grid", current)
        w = np.exp(logw - top)
        cdf = np.cumsum(w)
        j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        j = min(j, w.size - 1)
        left, width = cells
        proposal = float(left[j] + width[j] * rng.random())
        j_old = int(math.floor(gamma)) - 1
        with np.errstate(divide="ignore"):
            log_q_new = math.log(w[j]) - math.log(width[j])
            log_q_old = math.log(w[j_old]) - math.log(width[j_old]) if w[j_old] > 0 else -math.inf
        if not lo <= proposal < hi:
            return GammaMove(gamma, False, "grid", current)
        new = log_target(proposal)
        log_alpha = new - current + log_q_old - log_q_new
        kind = "grid"
    else:
        kind = "local"
        proposal = gamma + rw_sd * rng.standard_normal()
        if not lo <= proposal < hi:
            return GammaMove(gamma, False, kind, current)
        new = log_target(proposal)
        log_alpha = new - current
    if log_alpha >= 0 or math.log(rng.random()) < log_alpha:
        return GammaMove(proposal, True, kind, new)
    return GammaMove(gamma, False, kind, current)


def draw_beta_conditional(aux: MarginalAux, rng: np.random.Generator) -> np.ndarray:
    """Draw coefficients from ``Normal(A^-1 b, A^-1)`` using the factor of ``A``."""
    z = rng.standard_normal(aux.mean.size)
    return aux.mean + np.linalg.solve(aux.chol.T, z)


def adapt_step_sizes(step_sizes, acceptance_rates, round_index, target=TARGET_ACCEPTANCE, limits=None):
    """Robbins-Monro update of random-walk scales from one window of acceptance rates.

    Each scale is multiplied by ``exp(c * (rate - target))`` with
    ``c = max(0.1, round_index ** -0.5)``.  Moves without proposals in the
    window keep their scale.
    """
    c = max(0.1, (round_index + 1) ** -0.5)
    out = dict(step_sizes)
    for name, rate in acceptance_rates.items():
        if name not in out or rate is None or not np.isfinite(rate):
            continue
        new = out[name] * math.exp(c * (rate - target))
        if limits and name in limits:
            lo, hi = limits[name]
            new = min(max(new, lo), hi)
        out[name] = new
    return out


def sigma_sq_conditional(bt: BlockTerms, block: int, b0: float, hyper: Hyperparameters):
    """Shape and scale of the inverse-Gamma full conditional of one error variance."""
    if block == 1:
        return hyper.a0 + 0.5 * bt.n1, b0 + 0.5 * bt.S1
    return hyper.a0 + 0.5 * bt.n2, b0 + 0.5 * bt.S2


def b0_conditional(sigma1_sq, sigma2_sq, hyper: Hyperparameters, legacy_shape=False):
    """Shape and rate of the Gamma full conditional of ``b0``."""
    shape = hyper.kappa if legacy_shape else hyper.kappa + 2.0 * hyper.a0
    return shape, 1.0 / hyper.eta + 1.0 / sigma1_sq + 1.0 / sigma2_sq


def draw_inv_gamma(shape, scale, rng):
    return scale / rng.gamma(shape)


def draw_b0(sigma1_sq, sigma2_sq, hyper, rng, legacy_shape=False):
    shape, rate = b0_conditional(sigma1_sq, sigma2_sq, hyper, legacy_shape)
    return rng.gamma(shape) / rate


def _moment_init(mp: MarginalPosterior, spec: ModelSpec, hyper: Hyperparameters):
    """Initial state from least-squares fits on a 25%/75% split."""
    x, y, n = mp.x, mp.y, mp.n
    m = min(max(int(round(0.25 * n)), 1), n - 1)
    floor = 1e-12 * float(np.var(y)) + 1e-300
    X1 = pre_basis(x[:m], spec.d1)
    r1 = y[:m] - X1 @ np.linalg.lstsq(X1, y[:m], rcond=None)[0]
    X2 = post_basis(x[m:] - x[m - 1], spec.post_powers)
    r2 = y[m:] - X2 @ np.linalg.lstsq(X2, y[m:], rcond=None)[0]
    s1 = max(float(r1 @ r1) / max(m - X1.shape[1], 1), floor)
    s2 = max(float(r2 @ r2) / max(n - m - X2.shape[1], 1), floor)
    b0 = hyper.eta * hyper.kappa
    prof = mp.profile(s1, s2, b0)
    j = int(np.argmax(prof))
    left, width = mp.cell_bounds()
    return float(left[j] + 0.5 * width[j]), s1, s2, b0


def _chain_rng(seed, chain_id):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chain_id)]))


class _Chain:
    """State shared by both samplers: working coordinates and output buffers."""

    def __init__(self, curve: ForceCurve, spec: ModelSpec, hyper: Hyperparameters, cfg: SamplerConfig, chain_id):
        self.curve, self.spec, self.hyper, self.cfg = curve, spec, hyper, cfg
        self.std = Standardization.for_curve(curve)
        self.mp = MarginalPosterior(self.std.x_to_working(curve.x), self.std.y_to_working(curve.y), spec, hyper)
        self.rng = _chain_rng(cfg.seed, chain_id)
        self.chain_id = chain_id
        self.cells = self.mp.cell_bounds()
        self.thin = cfg.effective_thin
        n_keep = len(range(cfg.burn_in, cfg.n_iter, self.thin))
        self.out = {k: np.empty(n_keep) for k in ("gamma", "x_gamma", "sigma1_sq", "sigma2_sq", "b0")}
        self.beta = np.empty((n_keep, spec.p_full)) if cfg.draw_beta else None
        self.coef_map = self.std.coef_map(spec)
        self.coef_offset = self.std.coef_offset(spec)
        self.counts = {}
        self.window = {}
        self.steps = {}
        self.limits = {}
        self.n_rounds = 0

    def count(self, name, accepted):
        a, p = self.counts.get(name, (0, 0))
        self.counts[name] = (a + int(accepted), p + 1)
        a, p = self.window.get(name, (0, 0))
        self.window[name] = (a + int(accepted), p + 1)

    def maybe_adapt(self, it):
        cfg = self.cfg
        if not cfg.adapt or it >= cfg.burn_in or (it + 1) % cfg.adapt_window:
            return
        rates = {name: a / p for name, (a, p) in self.window.items() if p > 0}
        rates = {("gamma" if name == "gamma_local" else name): r for name, r in rates.items() if name != "gamma_grid"}
        self.steps = adapt_step_sizes(self.steps, rates, self.n_rounds, limits=self.limits)
        self.n_rounds += 1
        self.window = {}

    def store(self, slot, gamma, x_gamma_w, s1, s2, b0, st, aux):
        o = self.out
        o["gamma"][slot] = gamma
        o["x_gamma"][slot] = self.std.x_center + self.std.x_scale * x_gamma_w
        o["sigma1_sq"][slot] = s1
        o["sigma2_sq"][slot] = s2
        o["b0"][slot] = b0
        if self.beta is not None:
            bt = draw_beta_conditional(aux, self.rng)
            self.beta[slot] = self.coef_map @ (st.T @ bt) + self.coef_offset

    def finish(self, name):
        cfg, spec, std = self.cfg, self.spec, self.std
        conv = std.force_to_si**2
        o = self.out
        beta_tilde = None if self.beta is None else self.beta[:, spec.free_index]
        meta = dict(
            sampler=name,
            n_iter=cfg.n_iter,
            burn_in=cfg.burn_in,
            thin=self.thin,
            seed=cfg.seed,
            chain_id=self.chain_id,
            d1=spec.d1,
            post_powers=list(spec.post_powers),
            smoothness=spec.smoothness,
            gamma_prior=list(self.mp.bounds),
            position_unit_in_meters=self.curve.position_unit_in_meters,
            force_unit_in_newtons=self.curve.force_unit_in_newtons,
            legacy_b0_shape=cfg.legacy_b0_shape,
        )
        return ChainTrace(
            o["gamma"], o["x_gamma"], o["sigma1_sq"] / conv, o["sigma2_sq"] / conv, o["b0"] / conv,
            self.beta, beta_tilde, dict(self.counts), dict(self.steps), meta,
        )


def run_gibbs_unconstrained(curve, spec, hyper, cfg, chain_id=0) -> ChainTrace:
    """Gibbs sampler for the model without smoothness constraints.

    Per iteration: contact index by the mixture Metropolis kernel, the two
    error variances from their inverse-Gamma conditionals and ``b0`` from
    its Gamma conditional.
    """
    if spec.smoothness != -1:
        raise ConfigurationError("run_gibbs_unconstrained requires smoothness = -1")
    ch = _Chain(curve, spec, hyper, cfg, chain_id)
    mp, rng = ch.mp, ch.rng
    ch.steps = {"gamma": cfg.gamma_rw_sd}
    ch.limits = {"gamma": (1e-3, float(mp.n))}

    gamma, s1, s2, b0 = _moment_init(mp, spec, hyper)
    st = mp.stats(gamma)
    bt = mp.block_terms(st)
    cache = {}

    def log_target(g):
        s = mp.stats(g)
        b = mp.block_terms(s)
        cache["last"] = (g, s, b)
        return mp.log_core_blocks(b, s1, s2)

    slot = 0
    for it in range(cfg.n_iter):
        move = mh_gamma_step(
            gamma, log_target, rng,
            bounds=mp.bounds, rw_sd=ch.steps["gamma"], mixture_weight=cfg.gamma_mixture_weight,
            profile=lambda: mp.profile(s1, s2, b0), cells=ch.cells,
            current_log_density=mp.log_core_blocks(bt, s1, s2),
        )
        ch.count("gamma_" + move.kind, move.accepted)
        if move.accepted:
            gamma, st, bt = cache["last"]
        s1 = draw_inv_gamma(*sigma_sq_conditional(bt, 1, b0, hyper), rng)
        s2 = draw_inv_gamma(*sigma_sq_conditional(bt, 2, b0, hyper), rng)
        b0 = draw_b0(s1, s2, hyper, rng, cfg.legacy_b0_shape)
        ch.maybe_adapt(it)
        if it >= cfg.burn_in and (it - cfg.burn_in) % ch.thin == 0:
            aux = mp.aux(st, s1, s2) if ch.beta is not None else None
            ch.store(slot, gamma, st.x_gamma, s1, s2, b0, st, aux)
            slot += 1
    return ch.finish("unconstrained")


def run_gibbs_constrained(curve, spec, hyper, cfg, chain_id=0) -> ChainTrace:
    """Sampler for smoothness-constrained models.

    The variances are coupled through the constraint, so each is updated
    by a Normal random walk on its logarithm (Jacobian included); ``b0``
    keeps its Gamma conditional.  Also runs with ``smoothness = -1``, which
    gives a second, independent route to the unconstrained posterior.
    """
    ch = _Chain(curve, spec, hyper, cfg, chain_id)
    mp, rng = ch.mp, ch.rng
    ch.steps = {"gamma": cfg.gamma_rw_sd, "log_sigma1_sq": cfg.log_sigma_rw_sd, "log_sigma2_sq": cfg.log_sigma_rw_sd}
    ch.limits = {"gamma": (1e-3, float(mp.n)), "log_sigma1_sq": (1e-4, 5.0), "log_sigma2_sq": (1e-4, 5.0)}
    a0 = hyper.a0

    gamma, s1, s2, b0 = _moment_init(mp, spec, hyper)
    st = mp.stats(gamma)
    core = mp.log_core(st, s1, s2)
    cache = {}

    def log_target(g):
        s = mp.stats(g)
        value = mp.log_core(s, s1, s2)
        cache["last"] = (g, s, value)
        return value

    def log_var_prior(s):
        # inverse-Gamma(a0, b0) density on s times the Jacobian s of the log map
        return -(a0 + 1.0) * math.log(s) - b0 / s + math.log(s)

    slot = 0
    for it in range(cfg.n_iter):
        move = mh_gamma_step(
            gamma, log_target, rng,
            bounds=mp.bounds, rw_sd=ch.steps["gamma"], mixture_weight=cfg.gamma_mixture_weight,
            profile=lambda: mp.profile(s1, s2, b0), cells=ch.cells, current_log_density=core,
        )
        ch.count("gamma_" + move.kind, move.accepted)
        if move.accepted:
            gamma, st, core = cache["last"]

        prop = s1 * math.exp(ch.steps["log_sigma1_sq"] * rng.standard_normal())
        new = mp.log_core(st, prop, s2)
        ok = math.log(rng.random()) < new - core + log_var_prior(prop) - log_var_prior(s1)
        if ok:
            s1, core = prop, new
        ch.count("log_sigma1_sq", ok)

        prop = s2 * math.exp(ch.steps["log_sigma2_sq"] * rng.standard_normal())
        new = mp.log_core(st, s1, prop)
        ok = math.log(rng.random()) < new - core + log_var_prior(prop) - log_var_prior(s2)
        if ok:
            s2, core = prop, new
        ch.count("log_sigma2_sq", ok)

        b0 = draw_b0(s1, s2, hyper, rng, cfg.legacy_b0_shape)
        ch.maybe_adapt(it)
        if it >= cfg.burn_in and (it - cfg.burn_in) % ch.thin == 0:
            aux = mp.aux(st, s1, s2) if ch.beta is not None else None
            ch.store(slot, gamma, st.x_gamma, s1, s2, b0, st, aux)
            slot += 1
    return ch.finish("constrained")


def run_sampler(curve, spec, hyper, cfg, chain_id=0) -> ChainTrace:
    """Dispatch on the smoothness order."""
    if spec.smoothness < 0:
        return run_gibbs_unconstrained(curve, spec, hyper, cfg, chain_id)
    return run_gibbs_constrained(curve, spec, hyper, cfg, chain_id)


def run_chains(curve, spec, hyper, cfg, n_chains=1):
    """Independent chains with RNG streams derived from ``(seed, chain_id)``."""
    return [run_sampler(curve, spec, hyper, cfg, chain_id=i) for i in range(n_chains)]
