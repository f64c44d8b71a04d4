"""Domain types for force-position changepoint analysis.

Positions and forces are stored in the user's units together with scale
factors to SI, so that reports can echo the input units while Hertz
constants and Young's modulus are computed in SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


class ModelError(ValueError):
    """Base class for invalid inputs to the changepoint model."""


class ConfigurationError(ModelError):
    pass


class GeometryError(ModelError):
    pass


class DomainError(ModelError):
    pass


class DegeneratePartitionError(ModelError):
    pass


class ConditioningError(np.linalg.LinAlgError):
    """Raised when a posterior precision matrix cannot be factorized."""

    def __init__(self, message, condition_estimate=float("nan")):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3g})")
        self.condition_estimate = condition_estimate


def _frozen_array(values, name):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ModelError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ForceCurve:
    """Forward-indentation force curve.

    Parameters
    ----------
    x : array_like
        Strictly increasing indenter positions.
    y : array_like
        Measured forces, one per position.
    position_unit_in_meters, force_unit_in_newtons : float
        Scale factors converting ``x`` to metres and ``y`` to newtons.
    """

    x: np.ndarray
    y: np.ndarray
    position_unit_in_meters: float = 1.0
    force_unit_in_newtons: float = 1.0

    def __post_init__(self):
        x = _frozen_array(self.x, "x")
        y = _frozen_array(self.y, "y")
        if x.shape != y.shape:
            raise ModelError(f"x and y lengths differ ({x.size} vs {y.size})")
        if x.size < 4:
            raise ModelError(f"a force curve needs at least 4 points, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ModelError("force curve contains non-finite values")
        if np.any(np.diff(x) <= 0):
            raise ModelError("positions must be strictly increasing")
        if not (self.position_unit_in_meters > 0 and self.force_unit_in_newtons > 0):
            raise ModelError("unit scale factors must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def to_si(self) -> "ForceCurve":
        return ForceCurve(
            self.x * self.position_unit_in_meters,
            self.y * self.force_unit_in_newtons,
        )

    def in_units(self, position_unit_in_meters: float, force_unit_in_newtons: float) -> "ForceCurve":
        """Re-express the curve in other units (given as SI scale factors)."""
        px = self.position_unit_in_meters / position_unit_in_meters
        fy = self.force_unit_in_newtons / force_unit_in_newtons
        return ForceCurve(self.x * px, self.y * fy, position_unit_in_meters, force_unit_in_newtons)


@dataclass(frozen=True)
class HertzGeometry:
    """Indenter geometry fixing the Hertz exponent and proportionality constant.

    Build instances with :meth:`sphere`, :meth:`pyramid` or :meth:`power`.
    ``radius`` is in metres and ``half_angle`` in radians.
    """

    kind: str
    radius: Optional[float] = None
    half_angle: Optional[float] = None
    beta: Optional[float] = None
    c: Optional[float] = None
    nu: float = 0.5

    def __post_init__(self):
        if self.kind not in ("sphere", "pyramid", "power"):
            raise GeometryError(f"unknown geometry kind {self.kind!r}")
        if not 0.0 <= self.nu <= 0.5:
            raise GeometryError(f"Poisson's ratio must lie in [0, 0.5], got {self.nu}")
        if self.kind == "sphere" and not (self.radius is not None and self.radius > 0):
            raise GeometryError("sphere radius must be positive")
        if self.kind == "pyramid" and not (
            self.half_angle is not None and 0 < self.half_angle < math.pi / 2
        ):
            raise GeometryError("pyramid half-angle must lie in (0, pi/2)")
        if self.kind == "power" and not (
            self.beta is not None and self.beta > 0 and self.c is not None and self.c > 0
        ):
            raise GeometryError("custom power geometry needs beta > 0 and c > 0")

    @classmethod
    def sphere(cls, radius: float, nu: float = 0.5) -> "HertzGeometry":
        return cls("sphere", radius=radius, nu=nu)

    @classmethod
    def pyramid(cls, half_angle: float, nu: float = 0.5) -> "HertzGeometry":
        return cls("pyramid", half_angle=half_angle, nu=nu)

    @classmethod
    def power(cls, beta: float, c: float) -> "HertzGeometry":
        return cls("power", beta=beta, c=c)

    @property
    def exponent(self) -> float:
        return {"sphere": 1.5, "pyramid": 2.0, "power": self.beta}[self.kind]

    @property
    def constant(self) -> float:
        return hertz_constant(self)


def hertz_constant(geom: HertzGeometry) -> float:
    """Constant ``c`` with ``F = c * E * delta**beta`` in SI units."""
    if geom.kind == "sphere":
        return 4.0 * math.sqrt(geom.radius) / (3.0 * (1.0 - geom.nu**2))
    if geom.kind == "pyramid":
        return 1.5 * math.tan(geom.half_angle) / (2.0 * (1.0 - geom.nu**2))
    return float(geom.c)


@dataclass(frozen=True)
class ModelSpec:
    """Switching-regression structure.

    ``d1`` is the pre-contact polynomial degree in position.  The
    post-contact mean is an intercept plus one column per entry of
    ``post_powers``, each a power of the displacement past the contact
    point.  ``smoothness`` is -1 (no constraint), 0 (continuity) or the
    number of matched derivatives.  ``gamma_prior`` bounds the uniform
    prior on the contact index; ``None`` means the whole range ``(1, n)``.
    """

    d1: int = 1
    post_powers: Tuple[float, ...] = (1.5,)
    smoothness: int = -1
    gamma_prior: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        powers = tuple(float(p) for p in np.atleast_1d(self.post_powers))
        object.__setattr__(self, "post_powers", powers)
        if self.gamma_prior is not None:
            object.__setattr__(self, "gamma_prior", tuple(float(v) for v in self.gamma_prior))
        if int(self.d1) != self.d1 or self.d1 < 0:
            raise ConfigurationError("d1 must be a non-negative integer")
        if not powers:
            raise ConfigurationError("at least one post-contact power is required")
        if any(p <= 0 for p in powers) or any(b <= a for a, b in zip(powers, powers[1:])):
            raise ConfigurationError("post_powers must be positive and strictly increasing")
        s = self.smoothness
        if int(s) != s or s < -1:
            raise ConfigurationError("smoothness must be an integer >= -1")
        if s >= 0 and s + 1 >= len(powers) + 1:
            raise ConfigurationError(
                f"smoothness {s} leaves no free post-contact coefficient for powers {powers}"
            )
        if s >= 1:
            # derivatives up to order s are matched through the integer powers 1..s;
            # every remaining power must have vanishing derivatives of order <= s at 0
            if tuple(powers[:s]) != tuple(float(j) for j in range(1, s + 1)):
                raise ConfigurationError(
                    f"smoothness {s} requires post-contact powers 1..{s}, got {powers}"
                )
            if any(p <= s for p in powers[s:]):
                raise ConfigurationError(
                    f"powers beyond the matched ones must exceed {s}, got {powers}"
                )
        if self.gamma_prior is not None:
            lo, hi = self.gamma_prior
            if not (1.0 <= lo < hi):
                raise ConfigurationError(f"invalid gamma prior bounds {self.gamma_prior}")

    @property
    def n_pre(self) -> int:
        return self.d1 + 1

    @property
    def n_post(self) -> int:
        return len(self.post_powers) + 1

    @property
    def p_full(self) -> int:
        return self.n_pre + self.n_post

    @property
    def n_dependent(self) -> int:
        return self.smoothness + 1

    @property
    def p_free(self) -> int:
        return self.p_full - self.n_dependent

    @property
    def free_index(self) -> np.ndarray:
        """Positions of the free coefficients within the full vector."""
        dep = set(range(self.n_pre, self.n_pre + self.n_dependent))
        return np.array([i for i in range(self.p_full) if i not in dep], dtype=int)

    def prior_bounds(self, n: int) -> Tuple[float, float]:
        if self.gamma_prior is None:
            return 1.0, float(n)
        lo, hi = self.gamma_prior
        if hi > n:
            raise ConfigurationError(f"gamma prior upper bound {hi} exceeds n = {n}")
        return lo, hi


@dataclass(frozen=True)
class Hyperparameters:
    """Fixed prior settings.

    ``mu`` and ``lambda_diag`` may be scalars (broadcast) or vectors with
    one entry per full or per free regression coefficient.  ``kappa`` and
    ``eta`` are the shape and scale of the Gamma prior on the
    inverse-Gamma scale ``b0``.
    """

    mu: object = 0.0
    lambda_diag: object = 1e-5
    a0: float = 2.0
    kappa: float = 1.0
    eta: float = 1e-2

    def __post_init__(self):
        if np.any(np.asarray(self.lambda_diag, dtype=float) <= 0):
            raise ConfigurationError("lambda_diag entries must be positive")
        if not self.a0 > 1:
            raise ConfigurationError("a0 must exceed 1")
        if not (self.kappa > 0 and self.eta > 0):
            raise ConfigurationError("kappa and eta must be positive")

    def _resolve(self, value, spec: ModelSpec) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return np.full(spec.p_free, float(arr))
        if arr.size == spec.p_free:
            return arr.astype(float).copy()
        if arr.size == spec.p_full:
            return arr[spec.free_index].astype(float)
        raise ConfigurationError(
            f"prior vector has length {arr.size}; expected {spec.p_free} or {spec.p_full}"
        )

    def prior_arrays(self, spec: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
        """Prior mean and diagonal precision weights of the free coefficients."""
        return self._resolve(self.mu, spec), self._resolve(self.lambda_diag, spec)


@dataclass(frozen=True)
class ChainState:
    gamma: float
    sigma1_sq: float
    sigma2_sq: float
    b0: float
    beta_tilde: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise DomainError("error variances must be positive")
        if not self.b0 > 0:
            raise DomainError("b0 must be positive")


@dataclass(frozen=True)
class SamplerConfig:
    """MCMC settings.

    ``gamma_mixture_weight`` is the probability of the grid-based
    independence move for the contact index; otherwise a Normal random
    walk with standard deviation ``gamma_rw_sd`` (index units) is used.
    ``legacy_b0_shape`` draws ``b0`` with shape ``kappa`` instead of
    ``kappa + 2 a0``.
    """

    n_iter: int = 50_000
    burn_in: int = 5_000
    seed: int = 0
    gamma_mixture_weight: float = 0.2
    gamma_rw_sd: float = 2.0
    log_sigma_rw_sd: float = 0.1
    adapt: bool = True
    adapt_window: int = 50
    thin: Optional[int] = None
    draw_beta: bool = True
    legacy_b0_shape: bool = False
    max_kept: int = 100_000

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigurationError("need 0 <= burn_in < n_iter")
        if not 0.0 <= self.gamma_mixture_weight <= 1.0:
            raise ConfigurationError("gamma_mixture_weight must lie in [0, 1]")
        if not (self.gamma_rw_sd > 0 and self.log_sigma_rw_sd > 0):
            raise ConfigurationError("random-walk step sizes must be positive")
        if self.thin is not None and self.thin < 1:
            raise ConfigurationError("thin must be >= 1")

    @property
    def effective_thin(self) -> int:
        if self.thin is not None:
            return self.thin
        kept = self.n_iter - self.burn_in
        return max(1, math.ceil(kept / self.max_kept))


def x_of_gamma(curve, gamma):
    """Position of the (possibly fractional) 1-based index ``gamma``.

    Linear interpolation between neighbouring positions; integer indices
    map to the sampled positions.  Accepts a :class:`ForceCurve` or an
    array of positions, and scalar or array ``gamma``.
    """
    x = curve.x if isinstance(curve, ForceCurve) else np.asarray(curve, dtype=float)
    n = x.size
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g >= 1.0)) or np.any(~(g <= n)):
        raise DomainError(f"gamma must lie in [1, {n}]")
    k = np.minimum(np.floor(g).astype(int), n - 1)
    frac = g - k
    out = x[k - 1] + frac * (x[k] - x[k - 1])
    return float(out) if out.ndim == 0 else out
