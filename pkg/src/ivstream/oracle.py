"""Closed-form population quantities for the synthetic models.

For a linear well-specified process the identifying moments are

    gamma_closed = Sigma_Z^{-1} Sigma_ZX
    theta_closed = (gamma_closed^T Sigma_Z gamma_closed)^{-1} gamma_closed^T Sigma_ZY,

and instrument exogeneity (E[Z] = 0, noise independent of Z) makes
Sigma_ZX = Sigma_Z gamma_star and Sigma_ZY = Sigma_Z gamma_star theta_star,
so theta_closed recovers the planted parameter exactly.

The objective minimised by the streaming estimators is the squared loss of
the conditional means, whose gradient is

    grad F(theta) = M theta - b,
    M = E[E[X|Z] E[X|Z]^T],    b = E[E[Y|Z] E[X|Z]].

For the endogenous-linear family b = M theta_star, so grad F(theta) =
M (theta - theta_star). For the shared-confounder family the confounder mean
shifts the conditional means (E[X|Z] picks up c * 1 and E[Y|Z] picks up c),
which leaves theta_closed untouched but adds a constant to b; the oracle
reports M and b for the process actually sampled, so the Monte-Carlo mean of
the two-sample gradient estimator matches :func:`grad_f` without correction.

Nonlinear links have no closed form here; use :func:`mc_moments`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ._validation import as_float_vector, check_symmetric_pd
from .dgp import DgpConfig, EndogenousLinear, conditional_mean_x, sample_two_block
from .schedule import TheoryConstants

#: Condition-number threshold above which a moment matrix is treated as singular.
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class PopulationSummary:
    """Population moments of a data-generating process.

    ``cond_xx`` is M = E[E[X|Z] E[X|Z]^T] and ``cond_xy`` is
    b = E[E[Y|Z] E[X|Z]]; together they determine the population gradient.
    ``mu`` is the smallest eigenvalue of M (the strong-convexity constant).
    ``standard_errors`` is populated by :func:`mc_moments` only.
    """

    sigma_z: NDArray[np.float64]
    sigma_zx: NDArray[np.float64]
    sigma_zy: NDArray[np.float64]
    gamma_closed: NDArray[np.float64]
    theta_closed: NDArray[np.float64]
    mu: float
    cond_xx: NDArray[np.float64]
    cond_xy: NDArray[np.float64]
    standard_errors: dict | None = None


def _solve_spd(a: NDArray[np.float64], rhs: NDArray[np.float64], name: str) -> NDArray[np.float64]:
    """Solve a x = rhs for symmetric positive-definite a, with a condition check."""
    a = 0.5 * (a + a.T)
    check_symmetric_pd(a, name, cond_limit=COND_LIMIT)
    return np.linalg.solve(a, rhs)


def summarize(cfg: DgpConfig) -> PopulationSummary:
    """Analytic population summary for a linear-link process.

    Raises ``ValueError`` for the square link, which has no closed form in
    this module; use :func:`mc_moments` instead.
    """
    if not cfg.is_linear:
        raise ValueError("no closed-form summary for the square link; use mc_moments")
    sigma_z = cfg.z_cov
    gamma = cfg.gamma_star
    theta = cfg.theta_star
    sigma_zx = sigma_z @ gamma
    sigma_zy = sigma_zx @ theta
    gamma_closed = _solve_spd(sigma_z, sigma_zx, "sigma_z")
    gzg = gamma_closed.T @ sigma_z @ gamma_closed
    theta_closed = _solve_spd(gzg, gamma_closed.T @ sigma_zy, "gamma^T sigma_z gamma")
    cond_xx = gamma.T @ sigma_z @ gamma
    cond_xy = cond_xx @ theta
    if isinstance(cfg.family, EndogenousLinear):
        c = 0.0
    else:
        c = cfg.family.c
    if c > 0.0:
        ones = np.ones(cfg.d_x)
        cond_xx = cond_xx + c**2 * np.outer(ones, ones)
        # E[Y|Z] = theta . E[X|Z] + c, so b gains c^2 * 1 on top of M theta.
        cond_xy = cond_xx @ theta + c**2 * ones
    mu = float(np.linalg.eigvalsh(0.5 * (cond_xx + cond_xx.T))[0])
    if mu <= 0.0:
        raise ValueError("conditional-mean second moment is not positive definite")
    return PopulationSummary(
        sigma_z=sigma_z,
        sigma_zx=sigma_zx,
        sigma_zy=sigma_zy,
        gamma_closed=gamma_closed,
        theta_closed=theta_closed,
        mu=mu,
        cond_xx=cond_xx,
        cond_xy=cond_xy,
    )


def grad_f(theta, summary: PopulationSummary) -> NDArray[np.float64]:
    """Population gradient M theta - b at ``theta``."""
    theta = as_float_vector(theta, summary.cond_xx.shape[0], "theta")
    return summary.cond_xx @ theta - summary.cond_xy


def mc_moments(rng: np.random.Generator, cfg: DgpConfig, n: int) -> PopulationSummary:
    """Monte-Carlo population summary from ``n`` two-sample draws.

    Works for every family, including the square link. The conditional-mean
    second moments are estimated by the two-sample product X' X^T, which is
    unbiased for M without knowing the conditional means. Entrywise standard
    errors of the moment estimates are reported in ``standard_errors``.
    """
    n = int(n)
    if n < 1000:
        raise ValueError(f"n must be >= 1000, got {n}")
    z, x, x_p, y = sample_two_block(rng, cfg, n)
    sigma_z = z.T @ z / n
    sigma_zx = z.T @ x / n
    sigma_zy = z.T @ y / n

    prod = x_p[:, :, None] * x[:, None, :]  # per-draw X' X^T
    cond_xx = prod.mean(axis=0)
    cond_xx = 0.5 * (cond_xx + cond_xx.T)
    yxp = x_p * y[:, None]
    cond_xy = yxp.mean(axis=0)

    se = {
        "sigma_zx": np.sqrt((z[:, :, None] * x[:, None, :]).var(axis=0) / n),
        "sigma_zy": np.sqrt((z * y[:, None]).var(axis=0) / n),
        "cond_xx": np.sqrt(prod.var(axis=0) / n),
        "cond_xy": np.sqrt(yxp.var(axis=0) / n),
    }

    gamma_closed = _solve_spd(sigma_z, sigma_zx, "estimated sigma_z")
    gzg = gamma_closed.T @ sigma_z @ gamma_closed
    theta_closed = _solve_spd(gzg, gamma_closed.T @ sigma_zy, "estimated gamma^T sigma_z gamma")
    mu = float(np.linalg.eigvalsh(cond_xx)[0])
    return PopulationSummary(
        sigma_z=sigma_z,
        sigma_zx=sigma_zx,
        sigma_zy=sigma_zy,
        gamma_closed=gamma_closed,
        theta_closed=theta_closed,
        mu=mu,
        cond_xx=cond_xx,
        cond_xy=cond_xy,
        standard_errors=se,
    )


def theory_constants(
    cfg: DgpConfig,
    gamma0=None,
    iota: float = 0.1,
    rng: np.random.Generator | None = None,
    mc_n: int = 200_000,
) -> TheoryConstants:
    """Measure schedule constants from the planted process.

    ``mu`` comes from the analytic summary when the link is linear and from
    :func:`mc_moments` otherwise. The gradient-noise second moments
    ``sigma1_sq``/``sigma2_sq`` are measured by Monte Carlo in the Frobenius
    norm (an upper bound on the spectral-norm moments, so the step-size clamp
    derived from them stays valid). The fast-iterate set diameter ``c_gamma``
    covers a ball around the planted first-stage parameter that contains the
    initialisation ``gamma0`` (default zero).

    The d_z-growth exponents (``varkappa``, ``vartheta``) are reported as
    zero: a single process pins the constants at the actual d_z, so growth
    and constant are not separately identifiable and the measured values are
    folded into the constants.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0x5EED))
    if cfg.is_linear:
        summary = summarize(cfg)
    else:
        summary = mc_moments(rng, cfg, mc_n)
    z_eigs = np.linalg.eigvalsh(cfg.z_cov)
    gamma = cfg.gamma_star
    gnorm_spec = float(np.linalg.norm(gamma, 2))
    gnorm_fro = float(np.linalg.norm(gamma))
    g0 = np.zeros_like(gamma) if gamma0 is None else np.asarray(gamma0, dtype=float)
    c_gamma = max(2.0 * gnorm_fro, float(np.linalg.norm(g0 - gamma)) + gnorm_fro)

    n = max(int(mc_n), 1000)
    z, x, x_p, y = sample_two_block(rng, cfg, n)
    m_z = conditional_mean_x(cfg, z)
    m_y = m_z @ cfg.theta_star
    if not isinstance(cfg.family, EndogenousLinear):
        m_y = m_y + cfg.family.c
    # Frobenius-norm analogues of the gradient-noise second-moment bounds.
    dev_xx = x_p[:, :, None] * x[:, None, :] - m_z[:, :, None] * m_z[:, None, :]
    mm = m_z[:, :, None] * m_z[:, None, :]
    dev_mm = mm - summary.cond_xx[None, :, :]
    sigma1_sq = 2.0 * float((dev_xx**2).sum(axis=(1, 2)).mean()) + 2.0 * float(
        (dev_mm**2).sum(axis=(1, 2)).mean()
    )
    dev_yx = x_p * y[:, None] - m_z * m_y[:, None]
    dev_b = m_z * m_y[:, None] - summary.cond_xy[None, :]
    sigma2_sq = float((dev_yx**2).sum(axis=1).mean()) + float((dev_b**2).sum(axis=1).mean())

    return TheoryConstants(
        mu=summary.mu,
        lambda_z=float(z_eigs[-1]),
        mu_z=float(z_eigs[0]),
        varkappa=0.0,
        c_gamma=c_gamma,
        vartheta=0.0,
        iota=float(iota),
        sigma1_sq=sigma1_sq,
        sigma2_sq=sigma2_sq,
        gamma_star_norm=gnorm_spec,
    )


def brute_force_min_eigenvalue(a: NDArray[np.float64]) -> float:
    """Smallest eigenvalue via the characteristic polynomial (test oracle).

    Uses the Faddeev-LeVerrier recursion to build the characteristic
    polynomial and takes the smallest real root. Independent of the
    eigen-solver used elsewhere; intended for cross-checks on small matrices.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -(a @ m).trace() / k
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-8 * max(1.0, np.abs(roots).max())].real
    return float(real.min())
