"""Seeded multi-trial experiment harness.

A trial streams T samples from its own generator, applies one algorithm's
update per iteration, and records metrics at a fixed checkpoint grid. An
experiment repeats the trial ``trials`` times with independent streams and
aggregates the per-checkpoint mean and standard deviation.

Reproducibility contract
------------------------
Trial i draws from ``PCG64(mix_seed(base_seed, i))`` where ``mix_seed`` is
the SplitMix64 finalizer over ``base_seed + GOLDEN * (i + 1)``. The mixing
function and generator are fixed, so any two runs with the same base seed
produce bitwise-identical streams regardless of how many worker threads
execute the trials. Aggregation reduces over trials in index order, which
makes the aggregate independent of completion order as well.

Trials are the unit of parallelism; iterations within a trial are
sequentially dependent and never parallelised.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from . import metrics as met
from .dgp import DgpConfig, sample_one_block, sample_two_block, test_set
from .schedule import StepSchedule, steps

ALGORITHMS = ("two_sample_sgd", "two_stage_sgd", "direct_sgd", "online_2sls")

#: Algorithms that consume the two-sample oracle rather than one-sample data.
TWO_SAMPLE_ALGORITHMS = ("two_sample_sgd",)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
ENV_THREADS = "IVSTREAM_THREADS"
RNG_ALGORITHM = "pcg64"
SEED_MIXER = "splitmix64"

_SAMPLE_BLOCK = 16_384


def mix_seed(base_seed: int, trial_index: int) -> int:
    """Derive trial i's seed: SplitMix64 finalizer of base_seed + GOLDEN*(i+1)."""
    x = (int(base_seed) + _GOLDEN * (int(trial_index) + 1)) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def log_checkpoints(T: int, n: int = 50) -> list[int]:
    """Strictly increasing log-spaced iteration checkpoints including 1 and T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    pts = np.unique(np.round(np.logspace(0.0, np.log10(T), n)).astype(np.int64))
    pts = pts[(pts >= 1) & (pts <= T)]
    if pts[-1] != T:
        pts = np.append(pts, T)
    return [int(p) for p in pts]


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """Everything needed to reproduce one (DGP, algorithm, schedule) run."""

    dgp: DgpConfig
    algorithm: str
    T: int
    trials: int
    base_seed: int
    alpha: StepSchedule | None = None
    beta: StepSchedule | None = None
    lam: float = est.DEFAULT_RIDGE
    checkpoints: tuple[int, ...] | None = None
    test_n: int = 0
    theta0: np.ndarray | None = None
    gamma0: np.ndarray | None = None
    experiment_id: str = "experiment"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.test_n < 0:
            raise ValueError("test_n must be >= 0")
        if self.algorithm == "two_sample_sgd":
            if self.alpha is None:
                raise ValueError("two_sample_sgd requires an alpha schedule")
        elif self.algorithm in ("two_stage_sgd", "direct_sgd"):
            if self.alpha is None or self.beta is None:
                raise ValueError(f"{self.algorithm} requires alpha and beta schedules")
        cps = self.checkpoints
        if cps is None:
            cps = tuple(log_checkpoints(self.T))
        else:
            cps = tuple(int(c) for c in cps)
            if any(c < 1 or c > self.T for c in cps):
                raise ValueError("checkpoints must lie in [1, T]")
            if any(b <= a for a, b in zip(cps, cps[1:])):
                raise ValueError("checkpoints must be strictly increasing")
        object.__setattr__(self, "checkpoints", cps)
        if self.theta0 is not None:
            object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        if self.gamma0 is not None:
            object.__setattr__(self, "gamma0", np.asarray(self.gamma0, dtype=float))


@dataclass(eq=False)
class TrialResult:
    points: list[met.MetricPoint]
    stream_digest: str


@dataclass(eq=False)
class MetricSeries:
    """Per-trial checkpoint series plus across-trial aggregates."""

    spec: ExperimentSpec
    trials: list[list[met.MetricPoint]]
    stream_digests: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> np.ndarray:
        return np.array([p.iteration for p in self.trials[0]], dtype=np.int64)

    def values(self, metric: str) -> np.ndarray:
        """(trials, checkpoints) array of one metric; NaN where absent."""
        out = np.full((len(self.trials), len(self.trials[0])), np.nan)
        for i, trial in enumerate(self.trials):
            for j, p in enumerate(trial):
                v = getattr(p, metric)
                if v is not None:
                    out[i, j] = v
        return out

    def mean(self, metric: str) -> np.ndarray:
        return self.values(metric).mean(axis=0)

    def std(self, metric: str) -> np.ndarray:
        return self.values(metric).std(axis=0)

    def combined_stream_digest(self) -> str:
        h = hashlib.sha256()
        for d in self.stream_digests:
            h.update(bytes.fromhex(d))
        return h.hexdigest()


def _init_state(spec: ExperimentSpec):
    d_x, d_z = spec.dgp.d_x, spec.dgp.d_z
    theta = np.zeros(d_x) if spec.theta0 is None else spec.theta0.copy()
    if spec.algorithm == "two_sample_sgd":
        return theta, None, None, None
    gamma = np.zeros((d_z, d_x)) if spec.gamma0 is None else spec.gamma0.copy()
    if spec.algorithm == "online_2sls":
        u = np.eye(d_x) / spec.lam
        v = np.eye(d_z) / spec.lam
        return theta, gamma, u, v
    return theta, gamma, None, None


def run_trial(spec: ExperimentSpec, trial_index: int) -> TrialResult:
    """Run one seeded trial and return its checkpoint metrics.

    The held-out test set (when ``test_n > 0``) is drawn first, then the
    training stream, all from the trial's own generator. The stream digest is
    a SHA-256 over the raw sample blocks in draw order.
    """
    if not (0 <= trial_index < spec.trials):
        raise ValueError(f"trial_index must be in [0, {spec.trials})")
    rng = np.random.Generator(np.random.PCG64(mix_seed(spec.base_seed, trial_index)))
    cfg = spec.dgp
    theta_star = cfg.theta_star

    tx = ty = None
    oracle_mse = None
    if spec.test_n > 0:
        ts = test_set(rng, cfg, spec.test_n)
        tx, ty = met.stack_test_set(ts)
        oracle_mse = met.test_mse_arrays(theta_star, tx, ty)

    theta, gamma, u, v = _init_state(spec)
    two_sample = spec.algorithm in TWO_SAMPLE_ALGORITHMS
    alphas = steps(spec.alpha, spec.T) if spec.alpha is not None else None
    betas = steps(spec.beta, spec.T) if spec.beta is not None else None

    digest = hashlib.sha256()
    points: list[met.MetricPoint] = []
    cps = spec.checkpoints
    cp_idx = 0
    algorithm = spec.algorithm
    t = 0
    while t < spec.T:
        n_blk = min(_SAMPLE_BLOCK, spec.T - t)
        if two_sample:
            zb, xb, xpb, yb = sample_two_block(rng, cfg, n_blk)
            digest.update(zb.tobytes())
            digest.update(xb.tobytes())
            digest.update(xpb.tobytes())
            digest.update(yb.tobytes())
        else:
            zb, xb, yb = sample_one_block(rng, cfg, n_blk)
            xpb = None
            digest.update(zb.tobytes())
            digest.update(xb.tobytes())
            digest.update(yb.tobytes())
        for i in range(n_blk):
            t += 1
            if algorithm == "two_sample_sgd":
                theta = est.two_sample_update(theta, xb[i], xpb[i], yb[i], alphas[t - 1])
            elif algorithm == "two_stage_sgd":
                theta, gamma = est.two_stage_update(
                    theta, gamma, zb[i], xb[i], yb[i], alphas[t - 1], betas[t - 1]
                )
            elif algorithm == "direct_sgd":
                theta, gamma = est.direct_residual_update(
                    theta, gamma, zb[i], xb[i], yb[i], alphas[t - 1], betas[t - 1]
                )
            else:
                theta, gamma, u, v = est.online_2sls_update(theta, gamma, u, v, zb[i], xb[i], yb[i])
            if cp_idx < len(cps) and t == cps[cp_idx]:
                cp_idx += 1
                tm = met.test_mse_arrays(theta, tx, ty) if tx is not None else None
                points.append(
                    met.MetricPoint(
                        iteration=t,
                        dist_sq=met.dist_to_opt(theta, theta_star),
                        test_mse=tm,
                        oracle_mse=oracle_mse,
                    )
                )
    return TrialResult(points=points, stream_digest=digest.hexdigest())


def default_workers() -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    return 1


def run_experiment(spec: ExperimentSpec, max_workers: int | None = None) -> MetricSeries:
    """Run all trials (optionally across threads) and aggregate.

    Results are keyed by trial index, so the output is identical for any
    worker count.
    """
    workers = default_workers() if max_workers is None else max(1, int(max_workers))
    workers = min(workers, spec.trials)
    if workers == 1:
        results = [run_trial(spec, i) for i in range(spec.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_trial(spec, i), range(spec.trials)))
    return MetricSeries(
        spec=spec,
        trials=[r.points for r in results],
        stream_digests=[r.stream_digest for r in results],
    )


def fit_slope(iterations, values, tail_fraction: float) -> float:
    """Least-squares slope of log10(values) on log10(iterations) over the tail.

    ``tail_fraction`` selects the trailing fraction of checkpoints. Raises if
    the tail window holds fewer than 5 checkpoints or any non-positive value.
    """
    iterations = np.asarray(iterations, dtype=float)
    values = np.asarray(values, dtype=float)
    if iterations.shape != values.shape or iterations.ndim != 1:
        raise ValueError("iterations and values must be 1-d arrays of equal length")
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError("tail_fraction must be in (0, 1]")
    k = int(np.ceil(tail_fraction * len(values)))
    window_it = iterations[-k:]
    window_val = values[-k:]
    if len(window_val) < 5:
        raise ValueError(f"tail window has {len(window_val)} checkpoints; need >= 5")
    if np.any(window_val <= 0.0):
        raise ValueError("tail window contains non-positive values; slope undefined")
    coeffs = np.polyfit(np.log10(window_it), np.log10(window_val), 1)
    return float(coeffs[0])
