"""Synthetic force curves drawn from the switching-regression model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .design import constraint_matrix, post_basis, pre_basis
from .model import (
    ConfigurationError,
    ForceCurve,
    HertzGeometry,
    ModelSpec,
    hertz_constant,
    x_of_gamma,
)


@dataclass
class SynthSpec:
    """Parameters of one synthetic curve.

    Positions come from ``x`` if given, else ``x_start + spacing * arange(n)``.
    Coefficients are either the full pair ``beta1``/``beta2`` or, for a
    smoothness-constrained truth, the free vector ``beta_tilde``.  If
    ``E`` and ``geometry`` are set, the leading post-contact coefficient is
    derived from them (``E * c`` in the curve's units) and overrides the
    last entry of ``beta2``/``beta_tilde``.
    """

    n: int
    true_gamma: float
    sigma1: float
    sigma2: float
    beta1: Optional[Sequence[float]] = None
    beta2: Optional[Sequence[float]] = None
    beta_tilde: Optional[Sequence[float]] = None
    d1: int = 1
    post_powers: Tuple[float, ...] = (1.5,)
    smoothness: int = -1
    x: Optional[Sequence[float]] = None
    x_start: float = 0.0
    spacing: float = 1.0
    geometry: Optional[HertzGeometry] = None
    E: Optional[float] = None
    seed: int = 0
    position_unit_in_meters: float = 1.0
    force_unit_in_newtons: float = 1.0

    def __post_init__(self):
        self.post_powers = tuple(float(p) for p in self.post_powers)
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ConfigurationError("noise levels must be non-negative")
        if not 1 < self.true_gamma < self.n:
            raise ConfigurationError("true_gamma must lie in (1, n)")

    @property
    def model_spec(self) -> ModelSpec:
        return ModelSpec(d1=self.d1, post_powers=self.post_powers, smoothness=self.smoothness)

    def positions(self) -> np.ndarray:
        if self.x is not None:
            x = np.asarray(self.x, dtype=float)
            if x.size != self.n:
                raise ConfigurationError("len(x) must equal n")
            return x
        return self.x_start + self.spacing * np.arange(self.n)


def _leading_from_modulus(spec: SynthSpec):
    if spec.E is None or spec.geometry is None:
        return None
    if not math.isclose(spec.geometry.exponent, spec.post_powers[-1], abs_tol=1e-12):
        raise ConfigurationError("geometry exponent must equal the leading post-contact power")
    to_si = spec.force_unit_in_newtons / spec.position_unit_in_meters ** spec.post_powers[-1]
    return spec.E * hertz_constant(spec.geometry) / to_si


def full_coefficients(spec: SynthSpec, x_gamma: float) -> np.ndarray:
    """Full coefficient vector of the truth, checking any smoothness constraint."""
    ms = spec.model_spec
    lead = _leading_from_modulus(spec)
    if spec.beta_tilde is not None:
        if spec.beta1 is not None or spec.beta2 is not None:
            raise ConfigurationError("give either beta_tilde or beta1/beta2, not both")
        bt = np.array(spec.beta_tilde, dtype=float)
        if bt.size != ms.p_free:
            raise ConfigurationError(f"beta_tilde needs {ms.p_free} entries")
        if lead is not None:
            bt[-1] = lead
        return constraint_matrix(ms, x_gamma) @ bt
    if spec.beta1 is None or spec.beta2 is None:
        raise ConfigurationError("coefficients missing: need beta_tilde or both beta1 and beta2")
    b1 = np.asarray(spec.beta1, dtype=float)
    b2 = np.array(spec.beta2, dtype=float)
    if b1.size != ms.n_pre or b2.size != ms.n_post:
        raise ConfigurationError(f"beta1 needs {ms.n_pre} and beta2 {ms.n_post} entries")
    if lead is not None:
        b2[-1] = lead
    beta = np.r_[b1, b2]
    if ms.smoothness >= 0:
        T = constraint_matrix(ms, x_gamma)
        implied = T @ beta[ms.free_index]
        scale = np.sum(np.abs(beta)) + 1.0
        if np.max(np.abs(implied - beta)) > 1e-10 * scale:
            raise ConfigurationError("coefficients violate the requested smoothness constraint")
    return beta


def mean_curve(x, gamma, beta, d1, powers):
    """Noise-free mean force at positions ``x``."""
    x = np.asarray(x, dtype=float)
    k = int(math.floor(gamma))
    xg = x_of_gamma(x, gamma)
    q1 = d1 + 1
    out = np.empty_like(x)
    out[:k] = pre_basis(x[:k], d1) @ beta[:q1]
    out[k:] = post_basis(x[k:] - xg, powers) @ beta[q1:]
    return out


def generate(spec: SynthSpec):
    """Draw one curve; returns ``(ForceCurve, truth)``.

    ``truth`` is a JSON-ready dict with the generating parameters, the
    contact position and, when defined, the modulus.
    """
    x = spec.positions()
    xg = x_of_gamma(x, spec.true_gamma)
    beta = full_coefficients(spec, xg)
    mu = mean_curve(x, spec.true_gamma, beta, spec.d1, spec.post_powers)
    k = int(math.floor(spec.true_gamma))
    rng = np.random.default_rng(spec.seed)
    sd = np.where(np.arange(spec.n) < k, spec.sigma1, spec.sigma2)
    y = mu + sd * rng.standard_normal(spec.n)
    curve = ForceCurve(x, y, spec.position_unit_in_meters, spec.force_unit_in_newtons)
    truth = {
        "gamma": float(spec.true_gamma),
        "x_gamma": float(xg),
        "k": k,
        "beta": beta.tolist(),
        "sigma1": float(spec.sigma1),
        "sigma2": float(spec.sigma2),
        "E": None if spec.E is None else float(spec.E),
        "d1": spec.d1,
        "post_powers": list(spec.post_powers),
        "smoothness": spec.smoothness,
        "seed": spec.seed,
        "position_unit_in_meters": spec.position_unit_in_meters,
        "force_unit_in_newtons": spec.force_unit_in_newtons,
    }
    return curve, truth


# -- presets mimicking three experimental regimes -----------------------


def cantilever_like(seed=0, n=200, kink_index=48, sigma=0.1, E=215e9):
    """Stiff linear contact with a hard kink between indices ``kink_index`` and ``+1``.

    Positions in millimetres (about 0.1 mm apart), forces in newtons.  A
    power-law geometry with exponent 1 maps a 50 N/mm post-contact slope to
    the requested modulus.
    """
    geom = HertzGeometry.power(beta=1.0, c=5e4 / 215e9)
    return SynthSpec(
        n=n, true_gamma=kink_index + 0.5, sigma1=sigma, sigma2=sigma,
        beta1=[0.0, 0.0], beta2=[0.0, 0.0], d1=1, post_powers=(1.0,), smoothness=-1,
        x_start=-5.87, spacing=0.096, geometry=geom, E=E, seed=seed,
        position_unit_in_meters=1e-3,
    )


def silicone_like(seed=0, n=450, true_gamma=190.5, E=17.1e3, sigma1=0.02, sigma2=0.02):
    """Soft spherical contact sampled every 0.01 mm, positions in millimetres."""
    geom = HertzGeometry.sphere(radius=87.5e-3, nu=0.5)
    return SynthSpec(
        n=n, true_gamma=true_gamma, sigma1=sigma1, sigma2=sigma2,
        beta_tilde=[0.0, 0.0, 0.0], d1=1, post_powers=(1.5,), smoothness=0,
        x_start=3.5, spacing=0.01, geometry=geom, E=E, seed=seed,
        position_unit_in_meters=1e-3,
    )


def rbc_like(seed=0, n=400, true_gamma=160.5, E=25.3, sigma1=0.002, sigma2=0.02, half_angle_deg=35.0):
    """Pyramidal contact on a very soft cell, noisier after contact.

    Positions in micrometres (8 nm apart), forces in nanonewtons.  The
    post-contact model is a pure quadratic in the indentation, continuous
    with a flat pre-contact baseline.
    """
    geom = HertzGeometry.pyramid(half_angle=math.radians(half_angle_deg), nu=0.5)
    return SynthSpec(
        n=n, true_gamma=true_gamma, sigma1=sigma1, sigma2=sigma2,
        beta_tilde=[0.0, 0.0, 0.0], d1=1, post_powers=(2.0,), smoothness=0,
        x_start=0.0, spacing=0.008, geometry=geom, E=E, seed=seed,
        position_unit_in_meters=1e-6, force_unit_in_newtons=1e-9,
    )


# -- files --------------------------------------------------------------


def write_curve_csv(curve: ForceCurve, path) -> Path:
    path = Path(path)
    lines = ["position,force"] + [f"{a!r},{b!r}" for a, b in zip(curve.x.tolist(), curve.y.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path


def truth_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".truth.json")


def write_synthetic(spec: SynthSpec, path):
    """Generate a curve, write it as CSV and its truth sidecar beside it."""
    curve, truth = generate(spec)
    csv = write_curve_csv(curve, path)
    truth_path(csv).write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return curve, truth
