"""Posterior summaries, Young's modulus, diagnostics and the least-squares baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from .design import post_basis, pre_basis
from .model import (
    ConfigurationError,
    ForceCurve,
    GeometryError,
    HertzGeometry,
    ModelError,
    ModelSpec,
    hertz_constant,
)

CI_LEVELS = (2.5, 97.5)
N_BINS = 50


class ESSResult(NamedTuple):
    ess: float
    zero_variance: bool


def effective_sample_size(x) -> ESSResult:
    """Effective sample size by Geyer's initial positive sequence.

    Autocovariances are summed in adjacent pairs until a pair sum turns
    non-positive.  The result is capped at the number of samples.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("effective_sample_size needs at least 10 samples")
    d = x - x.mean()
    if not np.any(d):
        return ESSResult(float(n), True)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n] / n
    rho = acov / acov[0]
    tau = -1.0
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return ESSResult(float(min(n, n / max(tau, 1e-12))), False)


def geweke_z(x, first=0.1, last=0.5) -> float:
    """Geweke's convergence score comparing the start and end of a chain.

    The difference of the means of the first ``first`` and last ``last``
    fractions, divided by its standard error with each variance
    inflated by the segment's autocorrelation (via the effective sample
    size).  Roughly standard Normal for a stationary chain.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    a, b = x[: int(first * n)], x[n - int(last * n):]
    va = a.var(ddof=1) / effective_sample_size(a).ess
    vb = b.var(ddof=1) / effective_sample_size(b).ess
    if va + vb == 0:
        return 0.0 if a.mean() == b.mean() else math.copysign(math.inf, a.mean() - b.mean())
    return float((a.mean() - b.mean()) / math.sqrt(va + vb))


def youngs_modulus_samples(trace, spec: ModelSpec, geom: HertzGeometry) -> np.ndarray:
    """Young's modulus in pascals from the leading post-contact coefficient.

    The highest post-contact power must equal the Hertz exponent of
    ``geom``.  Units are taken from ``trace.meta``.
    """
    if trace.beta is None:
        raise ConfigurationError("trace holds no coefficient draws (run with draw_beta=True)")
    powers = spec.post_powers
    if not math.isclose(powers[-1], geom.exponent, rel_tol=0, abs_tol=1e-12):
        raise GeometryError(
            f"leading post-contact power {powers[-1]} does not match the {geom.kind} exponent {geom.exponent}"
        )
    pos = float(trace.meta.get("position_unit_in_meters", 1.0))
    force = float(trace.meta.get("force_unit_in_newtons", 1.0))
    to_si = force / pos ** powers[-1]
    return trace.beta[:, -1] * to_si / hertz_constant(geom)


def _interval(v):
    lo, hi = np.percentile(v, CI_LEVELS)
    return float(lo), float(hi)


def _summary(v):
    lo, hi = _interval(v)
    return {"mean": float(np.mean(v)), "lower": lo, "upper": hi}


def histogram(v, bins=N_BINS):
    """Counts and edges; a constant sample gets a single unit-width bin."""
    v = np.asarray(v, dtype=float)
    if v.min() == v.max():
        c = float(v[0])
        half = 0.5 * max(abs(c), 1.0) * 1e-9
        return np.array([v.size]), np.array([c - half, c + half])
    counts, edges = np.histogram(v, bins=bins)
    return counts, edges


def _posterior_mean_fit(trace, curve: ForceCurve, spec: ModelSpec, chunk=2000):
    x = curve.x
    n = x.size
    fit = np.zeros(n)
    q1 = spec.n_pre
    idx = np.arange(n)
    m = len(trace)
    for start in range(0, m, chunk):
        sl = slice(start, min(start + chunk, m))
        g = trace.gamma[sl]
        xg = trace.x_gamma[sl]
        beta = trace.beta[sl]
        k = np.floor(g).astype(int)
        pre = beta[:, :q1] @ pre_basis(x, spec.d1).T
        delta = np.clip(x[None, :] - xg[:, None], 0.0, None)
        post = beta[:, q1][:, None] + sum(
            beta[:, q1 + 1 + j][:, None] * delta**p for j, p in enumerate(spec.post_powers)
        )
        fit += np.where(idx[None, :] < k[:, None], pre, post).sum(axis=0)
    return fit / m


@dataclass(eq=False)
class PosteriorReport:
    """Scientific summary of one chain.

    Positions are in the curve's units, forces likewise, and the modulus
    in pascals.  ``truth`` is filled when the generating parameters are
    known.
    """

    gamma_mmse: float
    x_gamma_mmse: float
    gamma_ci: Tuple[float, float]
    x_gamma_ci: Tuple[float, float]
    gamma_sd: float
    E_mmse: Optional[float]
    E_ci: Optional[Tuple[float, float]]
    sigma_summaries: Dict[str, Dict[str, float]]
    fit: np.ndarray
    residuals_pre: np.ndarray
    residuals_post: np.ndarray
    diagnostics: Dict[str, object]
    histograms: Dict[str, Dict[str, list]]
    n_samples: int
    units: Dict[str, str] = field(default_factory=dict)
    truth: Optional[Dict[str, float]] = None

    def to_dict(self) -> dict:
        return {
            "gamma": {"mmse": self.gamma_mmse, "ci95": list(self.gamma_ci), "sd": self.gamma_sd},
            "x_gamma": {"mmse": self.x_gamma_mmse, "ci95": list(self.x_gamma_ci), "unit": self.units.get("position", "")},
            "E": {
                "mmse": self.E_mmse,
                "ci95": None if self.E_ci is None else list(self.E_ci),
                "unit": "Pa",
            },
            "sigma": {**self.sigma_summaries, "unit": self.units.get("force", "") + "^2"},
            "fit": {
                "mean_curve": self.fit.tolist(),
                "residuals_pre": self.residuals_pre.tolist(),
                "residuals_post": self.residuals_post.tolist(),
            },
            "diagnostics": self.diagnostics,
            "histograms": self.histograms,
            "n_samples": self.n_samples,
            "units": dict(self.units),
            "truth": self.truth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorReport":
        E = d["E"]
        return cls(
            gamma_mmse=d["gamma"]["mmse"],
            x_gamma_mmse=d["x_gamma"]["mmse"],
            gamma_ci=tuple(d["gamma"]["ci95"]),
            x_gamma_ci=tuple(d["x_gamma"]["ci95"]),
            gamma_sd=d["gamma"]["sd"],
            E_mmse=E["mmse"],
            E_ci=None if E["ci95"] is None else tuple(E["ci95"]),
            sigma_summaries={k: v for k, v in d["sigma"].items() if k != "unit"},
            fit=np.asarray(d["fit"]["mean_curve"], dtype=float),
            residuals_pre=np.asarray(d["fit"]["residuals_pre"], dtype=float),
            residuals_post=np.asarray(d["fit"]["residuals_post"], dtype=float),
            diagnostics=d["diagnostics"],
            histograms=d["histograms"],
            n_samples=d["n_samples"],
            units=dict(d.get("units", {})),
            truth=d.get("truth"),
        )

    def __eq__(self, other):
        if not isinstance(other, PosteriorReport):
            return NotImplemented
        return _deep_equal(self.to_dict(), other.to_dict())


def _deep_equal(a, b):
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_deep_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_deep_equal(u, v) for u, v in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def summarize(trace, curve: ForceCurve, spec: ModelSpec, geom: Optional[HertzGeometry] = None,
              truth: Optional[dict] = None, bins: int = N_BINS) -> PosteriorReport:
    """Posterior means, central 95% intervals, fit, residuals and diagnostics.

    Intervals use linear interpolation between order statistics.  The
    position of the contact point is averaged over per-sample positions.
    """
    m = len(trace)
    if m == 0:
        raise ModelError("cannot summarize an empty trace")
    g, xg = trace.gamma, trace.x_gamma
    E = youngs_modulus_samples(trace, spec, geom) if geom is not None and trace.beta is not None else None

    sig = {name: _summary(getattr(trace, name)) for name in ("sigma1_sq", "sigma2_sq", "b0")}

    if trace.beta is not None:
        fit = _posterior_mean_fit(trace, curve, spec)
    else:
        fit = np.full(curve.n, np.nan)
    k_hat = int(np.clip(math.floor(float(np.mean(g))), 1, curve.n - 1))
    resid = curve.y - fit

    diag = {"acceptance": {k: float(v) for k, v in trace.acceptance_rates().items()}}
    ess = {}
    scalars = {"gamma": g, "sigma1_sq": trace.sigma1_sq, "sigma2_sq": trace.sigma2_sq, "b0": trace.b0}
    if E is not None:
        scalars["E"] = E
    for name, v in scalars.items():
        if m >= 10:
            r = effective_sample_size(v)
            ess[name] = {"ess": r.ess, "zero_variance": r.zero_variance}
    diag["ess"] = ess
    diag["step_sizes"] = {k: float(v) for k, v in trace.step_sizes.items()}

    hists = {}
    for name, v in (("gamma", g), ("E", E)):
        if v is None:
            continue
        counts, edges = histogram(v, bins)
        hists[name] = {"bin_left": edges[:-1].tolist(), "bin_right": edges[1:].tolist(), "count": counts.tolist()}

    meta = trace.meta
    units = {
        "position": f"{meta.get('position_unit_in_meters', 1.0)!r} m",
        "force": f"{meta.get('force_unit_in_newtons', 1.0)!r} N",
        "E": "Pa",
    }
    return PosteriorReport(
        gamma_mmse=float(np.mean(g)),
        x_gamma_mmse=float(np.mean(xg)),
        gamma_ci=_interval(g),
        x_gamma_ci=_interval(xg),
        gamma_sd=float(np.std(g)),
        E_mmse=None if E is None else float(np.mean(E)),
        E_ci=None if E is None else _interval(E),
        sigma_summaries=sig,
        fit=fit,
        residuals_pre=resid[:k_hat],
        residuals_post=resid[k_hat:],
        diagnostics=diag,
        histograms=hists,
        n_samples=m,
        units=units,
        truth=None if truth is None else dict(truth),
    )


class BaselineResult(NamedTuple):
    k: int
    x_gamma: float
    E: Optional[float]
    coefficients: np.ndarray
    rss: float


def least_squares_baseline(curve: ForceCurve, spec: ModelSpec, geom: Optional[HertzGeometry] = None) -> BaselineResult:
    """Equal-variance least-squares scan over integer contact indices.

    For each ``k`` the pre- and post-contact bases (with ``x_gamma = x_k``)
    are fitted by ordinary least squares and the pooled residual sum of
    squares is minimized.  Only indices inside the prior support whose
    blocks are large enough to be identified are scanned.
    """
    x, y, n = curve.x, curve.y, curve.n
    lo, hi = spec.prior_bounds(n)
    q1, m2 = spec.n_pre, spec.n_post
    best = None
    for k in range(max(1, math.ceil(lo)), n):
        if k >= hi or k < q1 or n - k < m2:
            continue
        X1 = pre_basis(x[:k], spec.d1)
        X2 = post_basis(x[k:] - x[k - 1], spec.post_powers)
        c1, *_ = np.linalg.lstsq(X1, y[:k], rcond=None)
        c2, *_ = np.linalg.lstsq(X2, y[k:], rcond=None)
        rss = float(np.sum((y[:k] - X1 @ c1) ** 2) + np.sum((y[k:] - X2 @ c2) ** 2))
        if best is None or rss < best[0]:
            best = (rss, k, np.r_[c1, c2])
    if best is None:
        raise ModelError("no admissible contact index for the baseline scan")
    rss, k, coef = best
    E = None
    if geom is not None:
        if not math.isclose(spec.post_powers[-1], geom.exponent, abs_tol=1e-12):
            raise GeometryError("leading post-contact power does not match the geometry exponent")
        to_si = curve.force_unit_in_newtons / curve.position_unit_in_meters ** spec.post_powers[-1]
        E = float(coef[-1] * to_si / hertz_constant(geom))
    return BaselineResult(k, float(x[k - 1]), E, coef, rss)
