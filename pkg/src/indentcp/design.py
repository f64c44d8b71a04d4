"""Design matrices, smoothness constraints and working coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .model import (
    ConfigurationError,
    DegeneratePartitionError,
    ForceCurve,
    ModelSpec,
    x_of_gamma,
)


@dataclass(frozen=True, eq=False)
class DesignPair:
    X1: np.ndarray
    X2: np.ndarray
    gamma: float
    k: int
    x_gamma: float


@dataclass(frozen=True, eq=False)
class ConstraintMap:
    """Linear map ``beta = T @ beta_tilde`` from free to full coefficients."""

    T: np.ndarray
    smoothness: int
    free_index: np.ndarray

    @property
    def p_full(self) -> int:
        return self.T.shape[0]

    @property
    def p_free(self) -> int:
        return self.T.shape[1]


def _split_index(n, gamma):
    k = int(np.floor(gamma))
    if k < 1 or k > n - 1:
        raise DegeneratePartitionError(
            f"gamma = {gamma} leaves an empty pre- or post-contact block (n = {n})"
        )
    return k


def pre_basis(x, d1):
    return np.vander(np.asarray(x, dtype=float), d1 + 1, increasing=True)


def post_basis(delta, powers):
    delta = np.asarray(delta, dtype=float)
    cols = [np.ones_like(delta)] + [delta**p for p in powers]
    return np.column_stack(cols)


def build_design(curve, spec: ModelSpec, gamma: float) -> DesignPair:
    """Pre- and post-contact design matrices at contact index ``gamma``.

    Rows ``1..floor(gamma)`` form the pre-contact block (monomials in
    position); the remaining rows use powers of the displacement
    ``x - x_gamma``.
    """
    x = curve.x if isinstance(curve, ForceCurve) else np.asarray(curve, dtype=float)
    n = x.size
    k = _split_index(n, gamma)
    xg = x_of_gamma(x, gamma)
    delta = x[k:] - xg
    if np.any(delta <= 0):
        raise AssertionError("non-positive post-contact displacement")
    return DesignPair(pre_basis(x[:k], spec.d1), post_basis(delta, spec.post_powers), float(gamma), k, xg)


def shift_poly_coeffs(a, x_gamma, powers=None):
    """Rewrite ``sum a_i (x - x_gamma)**i`` as ``sum b_j x**j``.

    Only integer powers ``0..d`` are supported; ``powers`` may be passed
    to have fractional bases rejected explicitly.
    """
    a = np.asarray(a, dtype=float)
    if powers is not None:
        powers = np.asarray(powers, dtype=float)
        if np.any(powers != np.round(powers)):
            raise ConfigurationError("coordinate shift is undefined for fractional powers")
        if not np.array_equal(powers, np.arange(a.size)):
            raise ConfigurationError("powers must be 0, 1, ..., d matching the coefficients")
    d = a.size - 1
    b = np.zeros_like(a)
    for i in range(d + 1):
        for j in range(i + 1):
            b[j] += a[i] * comb(i, j) * (-x_gamma) ** (i - j)
    return b


def derivative_rows(d1, order, x_gamma):
    """Rows mapping pre-contact coefficients to Taylor coefficients at ``x_gamma``.

    Row ``j`` gives ``f^(j)(x_gamma) / j!`` for ``f(x) = sum beta_1i x**i``.
    """
    rows = np.zeros((order + 1, d1 + 1))
    for j in range(order + 1):
        for i in range(j, d1 + 1):
            rows[j, i] = comb(i, j) * x_gamma ** (i - j)
    return rows


def constraint_matrix(spec: ModelSpec, x_gamma: float) -> np.ndarray:
    s = spec.smoothness
    q1, m2 = spec.n_pre, spec.n_post
    T = np.zeros((spec.p_full, spec.p_free))
    T[:q1, :q1] = np.eye(q1)
    if s >= 0:
        T[q1:q1 + s + 1, :q1] = derivative_rows(spec.d1, s, x_gamma)
    n_free_post = m2 - (s + 1)
    T[q1 + s + 1:, q1:] = np.eye(n_free_post)
    return T


def build_constraint_map(spec: ModelSpec, curve, gamma: float) -> ConstraintMap:
    """Smoothness constraint map at the contact point ``x_gamma``.

    The dependent coefficients are the post-contact intercept and, for
    ``s >= 1``, the coefficients of the integer powers ``1..s``.
    """
    x = curve.x if isinstance(curve, ForceCurve) else np.asarray(curve, dtype=float)
    xg = x_of_gamma(x, gamma)
    return ConstraintMap(constraint_matrix(spec, xg), spec.smoothness, spec.free_index)


@dataclass(frozen=True)
class Standardization:
    """Affine change of coordinates used internally by the samplers.

    Positions are mapped to ``[-1, 1]`` and forces are shifted by the mean
    of the first 5% of the record (the free, pre-contact level) and
    converted to newtons.  The shift keeps both intercepts small, so the
    zero-mean coefficient prior stays weak even at high signal-to-noise.
    Coefficients and variances are mapped back to the curve's own units
    exactly.
    """

    x_center: float
    x_scale: float
    y_offset: float
    force_to_si: float

    @classmethod
    def for_curve(cls, curve: ForceCurve) -> "Standardization":
        x0, x1 = float(curve.x[0]), float(curve.x[-1])
        head = max(2, curve.n // 20)
        return cls(0.5 * (x0 + x1), 0.5 * (x1 - x0), float(np.mean(curve.y[:head])), curve.force_unit_in_newtons)

    def x_to_working(self, x):
        return (np.asarray(x, dtype=float) - self.x_center) / self.x_scale

    def y_to_working(self, y):
        return (np.asarray(y, dtype=float) - self.y_offset) * self.force_to_si

    def variance_to_curve(self, v):
        return np.asarray(v) / self.force_to_si**2

    def coef_map(self, spec: ModelSpec) -> np.ndarray:
        """Matrix taking working-coordinate full coefficients to curve units.

        The working pre-contact intercept absorbs the force offset, which
        is added back separately by :meth:`coef_offset`.
        """
        q1 = spec.n_pre
        D = np.zeros((spec.p_full, spec.p_full))
        # f(x) = sum a_i ((x - c)/h)^i = sum_j x^j sum_i a_i C(i,j) (-c)^(i-j) / h^i
        c, h = self.x_center, self.x_scale
        for i in range(q1):
            for j in range(i + 1):
                D[j, i] = comb(i, j) * (-c) ** (i - j) / h**i
        D[q1, q1] = 1.0
        for col, p in enumerate(spec.post_powers, start=q1 + 1):
            D[col, col] = 1.0 / self.x_scale**p
        return D / self.force_to_si

    def coef_offset(self, spec: ModelSpec) -> np.ndarray:
        off = np.zeros(spec.p_full)
        off[0] = self.y_offset
        off[spec.n_pre] = self.y_offset
        return off
