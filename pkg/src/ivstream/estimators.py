"""Streaming update rules for instrumental-variable regression.

Four single-pass algorithms, each consuming one observation per step:

``two_sample_update``
    One-stage SGD with the two-sample gradient estimator: for a draw
    (Z, X, X', Y) with X, X' conditionally independent given Z,

        theta' = theta - alpha * (X . theta - Y) * X'.

    Weighting the residual by the second draw X' instead of X makes the step
    unbiased for the population gradient despite the confounding.

``two_stage_update``
    Two-timescale SGD on one-sample data. The fast recursion tracks the
    first stage (gamma), the slow recursion moves theta using the residual
    of the *instrument-predicted* outcome:

        theta' = theta - alpha * (gamma^T Z) * (Z^T gamma theta - Y)
        gamma' = gamma - beta * Z (Z^T gamma - X^T).

    The theta step always sees the positive semi-definite curvature
    gamma^T Z Z^T gamma, which is what keeps the coupled system stable from
    arbitrary initialisation.

``direct_residual_update``
    Same fast recursion, but the theta step plugs the raw residual in
    directly:

        theta' = theta - alpha * (gamma^T Z) * (X^T theta - Y).

    The effective curvature gamma^T Z Z^T gamma_star is not sign-definite
    while gamma is far from gamma_star, so the iterates can diverge before
    they converge; the update is included as the natural plug-in baseline.

``online_2sls_update``
    Streaming two-stage least squares. Rank-one (Sherman-Morrison) updates
    maintain U ~ (lam I + sum gamma_t^T Z Z^T gamma_t)^{-1} and
    V ~ (lam I + sum Z Z^T)^{-1} with no explicit matrix inversions; theta
    and gamma are the exact ridge-regularised two-stage solutions of the
    data seen so far.

All updates are pure functions of (state, sample, steps): inputs are never
mutated. Shape errors surface as ``ValueError`` from the array operations.

The ``*Regressor`` classes wrap the kernels behind a scikit-learn style
``fit`` / ``partial_fit`` / ``predict`` / ``get_params`` surface so the
algorithms compose with the wider ecosystem; fitted state lives in the
``theta_`` (and ``gamma_``, ``u_``, ``v_``) attributes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ._validation import as_float_matrix, as_float_vector, check_positive
from .schedule import Constant, StepSchedule, step

DEFAULT_RIDGE = 0.1


@dataclass(frozen=True, eq=False)
class SingleStageState:
    """State of the two-sample algorithm: the regression parameter only."""

    theta: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "theta", as_float_vector(self.theta, name="theta"))


@dataclass(frozen=True, eq=False)
class TwoStageState:
    """State of the two-timescale algorithms: (theta, gamma)."""

    theta: NDArray[np.float64]
    gamma: NDArray[np.float64]

    def __post_init__(self):
        theta = as_float_vector(self.theta, name="theta")
        gamma = as_float_matrix(self.gamma, name="gamma")
        if gamma.shape[1] != theta.shape[0]:
            raise ValueError(f"gamma shape {gamma.shape} inconsistent with theta length {theta.shape[0]}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "gamma", gamma)


@dataclass(frozen=True, eq=False)
class Online2SLSState:
    """State of streaming 2SLS: (theta, gamma, U, V) and the ridge parameter."""

    theta: NDArray[np.float64]
    gamma: NDArray[np.float64]
    u: NDArray[np.float64]
    v: NDArray[np.float64]
    lam: float = DEFAULT_RIDGE

    def __post_init__(self):
        theta = as_float_vector(self.theta, name="theta")
        d_x = theta.shape[0]
        gamma = as_float_matrix(self.gamma, name="gamma")
        d_z = gamma.shape[0]
        if gamma.shape[1] != d_x:
            raise ValueError(f"gamma shape {gamma.shape} inconsistent with theta length {d_x}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "u", as_float_matrix(self.u, (d_x, d_x), "u"))
        object.__setattr__(self, "v", as_float_matrix(self.v, (d_z, d_z), "v"))
        check_positive(self.lam, "lam")

    @classmethod
    def initial(cls, d_x: int, d_z: int, lam: float = DEFAULT_RIDGE,
                theta0=None, gamma0=None) -> "Online2SLSState":
        """Fresh state with U = V = I / lam (ridge-regularised inverses)."""
        check_positive(lam, "lam")
        theta = np.zeros(d_x) if theta0 is None else theta0
        gamma = np.zeros((d_z, d_x)) if gamma0 is None else gamma0
        return cls(theta=theta, gamma=gamma, u=np.eye(d_x) / lam, v=np.eye(d_z) / lam, lam=lam)


def two_sample_update(theta, x, x_prime, y: float, alpha: float):
    """One two-sample SGD step; returns the new theta."""
    resid = x @ theta - y
    return theta - (alpha * resid) * x_prime


def two_stage_update(theta, gamma, z, x, y: float, alpha: float, beta: float,
                     gamma_radius: float | None = None):
    """One coupled two-timescale step; returns (theta', gamma').

    The theta step uses the pre-update gamma, and both steps consume the same
    observation. ``gamma_radius``, when given, projects the new gamma onto
    the Frobenius ball of that radius (off by default; the fast iterate is
    bounded without projection in the well-specified regime).
    """
    zg = z @ gamma
    pred_resid = zg @ theta - y
    new_theta = theta - (alpha * pred_resid) * zg
    new_gamma = gamma - (beta * z)[:, None] * (zg - x)[None, :]
    if gamma_radius is not None:
        norm = float(np.sqrt((new_gamma * new_gamma).sum()))
        if norm > gamma_radius:
            new_gamma = new_gamma * (gamma_radius / norm)
    return new_theta, new_gamma


def direct_residual_update(theta, gamma, z, x, y: float, alpha: float, beta: float,
                           gamma_radius: float | None = None):
    """One plug-in two-timescale step (raw residual); returns (theta', gamma')."""
    zg = z @ gamma
    resid = x @ theta - y
    new_theta = theta - (alpha * resid) * zg
    new_gamma = gamma - (beta * z)[:, None] * (zg - x)[None, :]
    if gamma_radius is not None:
        norm = float(np.sqrt((new_gamma * new_gamma).sum()))
        if norm > gamma_radius:
            new_gamma = new_gamma * (gamma_radius / norm)
    return new_theta, new_gamma


def online_2sls_update(theta, gamma, u, v, z, x, y: float):
    """One streaming 2SLS step; returns (theta', gamma', U', V').

    V tracks (lam I + sum_{i<=t} Z_i Z_i^T)^{-1} and U tracks the analogous
    inverse for the first-stage predictions w_i = gamma_i^T Z_i, so each is
    downdated with the incoming sample first and the parameter moves by the
    resulting Kalman gain (classical recursive least squares):

        V' = V - (Vz)(Vz)^T / (1 + z^T V z)
        gamma' = gamma + (V'z) (x - gamma^T z)^T
        U' = U - (Uw)(Uw)^T / (1 + w^T U w),   w = gamma^T z (pre-update gamma)
        theta' = theta + (U'w) (y - w^T theta)

    With zero initial iterates, gamma' and theta' are exactly the
    ridge-regularised two-stage solutions of the samples seen so far. The
    rank-one denominators are positive for positive-definite U, V; a
    non-positive denominator indicates corrupted state and raises.
    """
    w = z @ gamma
    vz = v @ z
    denom_v = 1.0 + z @ vz
    uw = u @ w
    denom_u = 1.0 + w @ uw
    if denom_u <= 0.0 or denom_v <= 0.0:
        raise FloatingPointError("rank-one denominator is not positive; U/V state corrupted")
    gain_v = vz / denom_v
    new_v = v - vz[:, None] * gain_v[None, :]
    new_gamma = gamma + gain_v[:, None] * (x - w)[None, :]
    gain_u = uw / denom_u
    new_u = u - uw[:, None] * gain_u[None, :]
    new_theta = theta + gain_u * (y - w @ theta)
    return new_theta, new_gamma, new_u, new_v


def _as_schedule(value) -> StepSchedule:
    if isinstance(value, (int, float)):
        return Constant(float(value))
    return value


class _BaseIVRegressor:
    """Shared scikit-learn style plumbing: params, prediction, validation."""

    _param_names: tuple[str, ...] = ()

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params) -> "_BaseIVRegressor":
        for name, value in params.items():
            if name not in self._param_names:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "theta_"):
            raise AttributeError(f"{type(self).__name__} is not fitted yet")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        X = as_float_matrix(X, name="X")
        return X @ self.theta_

    def _stack(self, Z, X, y):
        Z = as_float_matrix(np.atleast_2d(np.asarray(Z, dtype=float)), name="Z")
        X = as_float_matrix(np.atleast_2d(np.asarray(X, dtype=float)), name="X")
        y = as_float_vector(y, name="y")
        if not (Z.shape[0] == X.shape[0] == y.shape[0]):
            raise ValueError("Z, X and y must have the same number of rows")
        return Z, X, y


class TwoSampleSGDRegressor(_BaseIVRegressor):
    """One-stage streaming IV regression from a two-sample oracle.

    Parameters
    ----------
    alpha : float or StepSchedule
        Step-size schedule for the theta recursion.
    theta0 : array of shape (d_x,), optional
        Initial iterate; defaults to zero.
    """

    _param_names = ("alpha", "theta0")

    def __init__(self, alpha=0.01, theta0=None):
        self.alpha = alpha
        self.theta0 = theta0

    def partial_fit(self, z, x, y: float, x_prime) -> "TwoSampleSGDRegressor":
        x = as_float_vector(x, name="x")
        x_prime = as_float_vector(x_prime, n=x.shape[0], name="x_prime")
        if not hasattr(self, "theta_"):
            self.theta_ = np.zeros(x.shape[0]) if self.theta0 is None else as_float_vector(self.theta0, x.shape[0], "theta0")
            self.n_iter_ = 0
        self.n_iter_ += 1
        a = step(_as_schedule(self.alpha), self.n_iter_)
        self.theta_ = two_sample_update(self.theta_, x, x_prime, float(y), a)
        return self

    def fit(self, Z, X, y, X_prime) -> "TwoSampleSGDRegressor":
        """Consume the rows of (Z, X, y, X_prime) in order as a stream."""
        Z, X, y = self._stack(Z, X, y)
        X_prime = as_float_matrix(np.atleast_2d(np.asarray(X_prime, dtype=float)), X.shape, "X_prime")
        for i in range(X.shape[0]):
            self.partial_fit(Z[i], X[i], y[i], X_prime[i])
        return self


class _TwoTimescaleRegressor(_BaseIVRegressor):
    _param_names = ("alpha", "beta", "theta0", "gamma0", "gamma_radius")
    _kernel = staticmethod(two_stage_update)

    def __init__(self, alpha=0.01, beta=0.1, theta0=None, gamma0=None, gamma_radius=None):
        self.alpha = alpha
        self.beta = beta
        self.theta0 = theta0
        self.gamma0 = gamma0
        self.gamma_radius = gamma_radius

    def partial_fit(self, z, x, y: float):
        z = as_float_vector(z, name="z")
        x = as_float_vector(x, name="x")
        if not hasattr(self, "theta_"):
            d_x, d_z = x.shape[0], z.shape[0]
            self.theta_ = np.zeros(d_x) if self.theta0 is None else as_float_vector(self.theta0, d_x, "theta0")
            self.gamma_ = np.zeros((d_z, d_x)) if self.gamma0 is None else as_float_matrix(self.gamma0, (d_z, d_x), "gamma0")
            self.n_iter_ = 0
        self.n_iter_ += 1
        a = step(_as_schedule(self.alpha), self.n_iter_)
        b = step(_as_schedule(self.beta), self.n_iter_)
        self.theta_, self.gamma_ = self._kernel(
            self.theta_, self.gamma_, z, x, float(y), a, b, gamma_radius=self.gamma_radius
        )
        return self

    def fit(self, Z, X, y):
        """Consume the rows of (Z, X, y) in order as a stream."""
        Z, X, y = self._stack(Z, X, y)
        for i in range(X.shape[0]):
            self.partial_fit(Z[i], X[i], y[i])
        return self


class TwoStageSGDRegressor(_TwoTimescaleRegressor):
    """Two-timescale streaming IV regression (instrument-predicted residual)."""


class DirectSGDRegressor(_TwoTimescaleRegressor):
    """Plug-in two-timescale variant (raw residual in the theta step)."""

    _kernel = staticmethod(direct_residual_update)


class Online2SLSRegressor(_BaseIVRegressor):
    """Streaming two-stage least squares with rank-one inverse updates.

    Parameters
    ----------
    lam : float
        Ridge parameter; U and V start at I / lam.
    theta0, gamma0 : arrays, optional
        Initial iterates; default zero.
    """

    _param_names = ("lam", "theta0", "gamma0")

    def __init__(self, lam=DEFAULT_RIDGE, theta0=None, gamma0=None):
        self.lam = lam
        self.theta0 = theta0
        self.gamma0 = gamma0

    def partial_fit(self, z, x, y: float) -> "Online2SLSRegressor":
        z = as_float_vector(z, name="z")
        x = as_float_vector(x, name="x")
        if not hasattr(self, "theta_"):
            state = Online2SLSState.initial(x.shape[0], z.shape[0], lam=self.lam,
                                            theta0=self.theta0, gamma0=self.gamma0)
            self.theta_, self.gamma_ = state.theta, state.gamma
            self.u_, self.v_ = state.u, state.v
            self.n_iter_ = 0
        self.n_iter_ += 1
        self.theta_, self.gamma_, self.u_, self.v_ = online_2sls_update(
            self.theta_, self.gamma_, self.u_, self.v_, z, x, float(y)
        )
        return self

    def fit(self, Z, X, y) -> "Online2SLSRegressor":
        """Consume the rows of (Z, X, y) in order as a stream."""
        Z, X, y = self._stack(Z, X, y)
        for i in range(X.shape[0]):
            self.partial_fit(Z[i], X[i], y[i])
        return self
