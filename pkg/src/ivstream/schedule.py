"""Step-size schedules and the theoretical constants that parameterize them.

Two schedule shapes cover everything the streaming estimators need:

* ``Constant(alpha)`` — a fixed step size, with the horizon-tuned choice
  alpha = log(T) / (mu * T) provided by :func:`log_horizon_alpha`.
* ``Polynomial(coeff, exponent)`` — steps coeff * t**(-exponent); the
  two-timescale prescription with decay exponent 1 - iota/2 for both the
  fast and slow recursions is provided by :func:`two_timescale_schedules`.

:class:`TheoryConstants` collects the model-level quantities (strong
convexity, instrument spectrum bounds, iterate-set diameter, noise second
moments) from which the prescribed schedules are computed. In simulation they
are measured from the planted data-generating process by
:func:`ivstream.oracle.theory_constants`; any field may be overridden in an
experiment config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._validation import check_nonnegative, check_positive


@dataclass(frozen=True)
class Constant:
    """Constant step size alpha > 0."""

    alpha: float

    def __post_init__(self):
        check_positive(self.alpha, "alpha")


@dataclass(frozen=True)
class Polynomial:
    """Polynomially decaying step size coeff * t**(-exponent).

    The exponent must lie in (0, 1]; values below one keep the cumulative
    step mass divergent, which the streaming recursions rely on.
    """

    coeff: float
    exponent: float

    def __post_init__(self):
        check_positive(self.coeff, "coeff")
        e = float(self.exponent)
        if not (0.0 < e <= 1.0):
            raise ValueError(f"exponent must be in (0, 1], got {e}")


StepSchedule = Union[Constant, Polynomial]


def step(s: StepSchedule, t: int) -> float:
    """Step size at iteration t >= 1."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if isinstance(s, Constant):
        return s.alpha
    return s.coeff * float(t) ** (-s.exponent)


def steps(s: StepSchedule, t_max: int) -> np.ndarray:
    """Vectorized step sizes for t = 1, ..., t_max (used by the trial loop)."""
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    if isinstance(s, Constant):
        return np.full(t_max, s.alpha)
    t = np.arange(1, t_max + 1, dtype=np.float64)
    return s.coeff * t ** (-s.exponent)


@dataclass(frozen=True)
class TheoryConstants:
    """Model constants consumed by the prescribed step-size rules.

    Fields
    ------
    mu : strong-convexity constant, the smallest eigenvalue of
        E[E[X|Z] E[X|Z]^T].
    lambda_z, mu_z : largest/smallest eigenvalue bounds of Cov(Z).
    varkappa, c_gamma : the fast-iterate set has diameter
        c_gamma * d_z**varkappa.
    vartheta : growth exponent of the fourth-moment bounds on the
        instrument-noise terms.
    iota : rate-loss parameter of the polynomial schedules (exponent
        1 - iota/2).
    sigma1_sq, sigma2_sq : second-moment bounds on the two-sample gradient
        noise (the X'X^T part and the YX' part respectively).
    gamma_star_norm : spectral norm of the planted first-stage parameter.
    c_x, c_y, c_xx, c_yx, vartheta1..4 : optional raw moment-bound
        constants; kept for completeness, not consumed by the rules below.
    """

    mu: float
    lambda_z: float = 1.0
    mu_z: float = 1.0
    varkappa: float = 0.0
    c_gamma: float = 1.0
    vartheta: float = 0.0
    iota: float = 0.1
    sigma1_sq: float | None = None
    sigma2_sq: float | None = None
    gamma_star_norm: float = 1.0
    c_x: float | None = None
    c_y: float | None = None
    c_xx: float | None = None
    c_yx: float | None = None
    vartheta1: float | None = None
    vartheta2: float | None = None
    vartheta3: float | None = None
    vartheta4: float | None = None

    def __post_init__(self):
        check_positive(self.mu, "mu")
        check_positive(self.lambda_z, "lambda_z")
        check_positive(self.mu_z, "mu_z")
        check_nonnegative(self.varkappa, "varkappa")
        check_positive(self.c_gamma, "c_gamma")
        check_nonnegative(self.vartheta, "vartheta")
        check_positive(self.iota, "iota")
        check_nonnegative(self.gamma_star_norm, "gamma_star_norm")
        if self.sigma1_sq is not None:
            check_nonnegative(self.sigma1_sq, "sigma1_sq")
        if self.sigma2_sq is not None:
            check_nonnegative(self.sigma2_sq, "sigma2_sq")
        if self.gamma_star_norm > 0.0:
            bound = self.lambda_z * self.gamma_star_norm**2
            if self.mu > bound * (1.0 + 1e-9):
                raise ValueError(
                    f"mu={self.mu} exceeds lambda_z * gamma_star_norm^2 = {bound}; "
                    "the constants are inconsistent"
                )


def log_horizon_alpha(T: int, k: TheoryConstants) -> tuple[Constant, bool]:
    """Horizon-tuned constant step size alpha = log(T) / (mu * T).

    The step is clamped to mu / (mu^2 + 3 * sigma1_sq) when ``sigma1_sq`` is
    supplied (the admissibility side condition for the constant-step rate).

    Returns
    -------
    (schedule, clamped) : the constant schedule and whether clamping bound.
    """
    T = int(T)
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    alpha = math.log(T) / (k.mu * T)
    clamped = False
    if k.sigma1_sq is not None:
        bound = k.mu / (k.mu**2 + 3.0 * k.sigma1_sq)
        if alpha > bound:
            alpha = bound
            clamped = True
    return Constant(alpha), clamped


def two_timescale_schedules(k: TheoryConstants, d_z: int) -> tuple[Polynomial, Polynomial]:
    """Prescribed slow/fast schedules alpha_t, beta_t = C * t**(-(1 - iota/2)).

    The coefficients follow the worst-case prescription::

        C_alpha = min(0.5 * d_z**(-4*varkappa - vartheta/2) / (lambda_z * c_gamma^2),
                      0.5 / (gamma_star_norm * lambda_z)^2)
        C_beta  = mu^2 * d_z**(-1 - 2*varkappa) / 128

    Both schedules share the exponent 1 - iota/2. The exponent pair must
    satisfy the summability conditions 2*(1 - iota/2) > 1 and
    (3/2)*(1 - iota/2) > 1 that the convergence analysis relies on; the
    function raises otherwise.
    """
    d_z = int(d_z)
    if d_z < 1:
        raise ValueError("d_z must be >= 1")
    if k.gamma_star_norm <= 0.0:
        raise ValueError("gamma_star_norm must be positive to form the schedules")
    exponent = 1.0 - k.iota / 2.0
    if not 2.0 * exponent > 1.0:
        raise ValueError(f"iota={k.iota} violates 2*(1 - iota/2) > 1")
    if not 1.5 * exponent > 1.0:
        raise ValueError(f"iota={k.iota} violates (3/2)*(1 - iota/2) > 1")
    c_alpha = min(
        0.5 * d_z ** (-4.0 * k.varkappa - k.vartheta / 2.0) / (k.lambda_z * k.c_gamma**2),
        0.5 / (k.gamma_star_norm * k.lambda_z) ** 2,
    )
    c_beta = k.mu**2 * d_z ** (-1.0 - 2.0 * k.varkappa) / 128.0
    return Polynomial(c_alpha, exponent), Polynomial(c_beta, exponent)
