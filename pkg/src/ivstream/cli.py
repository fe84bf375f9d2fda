"""Command-line front end: run experiments, compare algorithms, self-check.

Subcommands
-----------
``run``
    Execute one experiment (from a JSON config or a named preset cell) and
    write ``series.csv`` plus ``manifest.json`` into the output directory.
    Presets with several cells write one subdirectory per cell.

``compare``
    Execute a config listing several algorithms on the same data-generating
    process with shared per-trial seeds, writing one CSV per algorithm plus
    the joined long-format CSV.

``check``
    Run the reduced-scale validation suites (gradient unbiasedness of the
    two-sample estimator, Sherman-Morrison consistency of the streaming 2SLS
    state, determinism across worker counts) and exit non-zero on the first
    failure.

CSV schema
----------
``experiment_id,algorithm,trial,iteration,metric,value`` with metric in
{dist_sq, test_mse, oracle_mse}; values are shortest round-trip decimals of
64-bit floats; rows sorted by (algorithm, trial, iteration, metric); LF line
endings, UTF-8. Files are written to a temporary name and renamed into
place. ``IVSTREAM_THREADS`` caps trial parallelism.

Config schema (JSON)
--------------------
Required: ``dgp.family``, ``algorithm`` (or ``algorithms`` for compare),
``T``, ``trials``. Optional keys with defaults::

    {
      "experiment_id": "experiment",
      "dgp": {
        "family": "endogenous_linear" | "shared_confounder",
        "d_x": 1, "d_z": 1,
        "rho": 1.0, "sigma_eps": 0.5,          # endogenous_linear
        "c": 0.1, "phi": "identity",           # shared_confounder
        "theta_star": [...], "gamma_star": [[...]], "z_cov": [[...]]
      },
      "algorithm": "two_stage_sgd",
      "schedule": {
        "alpha": {"kind": "polynomial", "coeff": 0.3, "exponent": 0.95}
                 | {"kind": "constant", "value": 0.01}
                 | {"kind": "log_horizon"}      # log(T) / (mu T), mu measured
                 | {"kind": "two_timescale"},   # worst-case prescription
        "beta": {...},
        "lambda": 0.1
      },
      "T": 100000, "trials": 50, "seed": 0, "test_n": 0,
      "checkpoints": [1, 10, ...],
      "init": {"theta0": [...], "gamma0": [[...]]}
    }
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, estimators as est, harness, metrics as met, presets
from .dgp import (
    DgpConfig,
    EndogenousLinear,
    endogenous_linear_config,
    sample_one_block,
    sample_two_block,
    shared_confounder_config,
)
from .harness import ExperimentSpec, MetricSeries, RNG_ALGORITHM, SEED_MIXER
from .oracle import grad_f, summarize, theory_constants
from .schedule import Constant, Polynomial, StepSchedule, log_horizon_alpha, two_timescale_schedules

METRIC_NAMES = ("dist_sq", "test_mse", "oracle_mse")
CSV_HEADER = "experiment_id,algorithm,trial,iteration,metric,value"


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


# ---------------------------------------------------------------------------
# config parsing / serialization


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def _dgp_from_dict(d: dict) -> DgpConfig:
    if not isinstance(d, dict):
        raise ConfigError("'dgp' must be an object")
    _reject_unknown(
        d,
        {"family", "d_x", "d_z", "rho", "sigma_eps", "c", "phi", "theta_star", "gamma_star", "z_cov"},
        "dgp",
    )
    family = d.get("family")
    kw = dict(
        theta_star=d.get("theta_star"),
        gamma_star=d.get("gamma_star"),
        z_cov=d.get("z_cov"),
    )
    d_x = int(d.get("d_x", 1))
    d_z = int(d.get("d_z", d_x))
    try:
        if family == "endogenous_linear":
            return endogenous_linear_config(d_x, d_z, rho=float(d.get("rho", 1.0)),
                                            sigma_eps=float(d.get("sigma_eps", 0.5)), **kw)
        if family == "shared_confounder":
            return shared_confounder_config(d_x, d_z, c=float(d.get("c", 0.1)),
                                            phi=d.get("phi", "identity"), **kw)
    except ValueError as e:
        raise ConfigError(f"invalid dgp: {e}") from e
    raise ConfigError(f"dgp.family must be 'endogenous_linear' or 'shared_confounder', got {family!r}")


def _dgp_to_dict(cfg: DgpConfig) -> dict:
    d = {
        "d_x": cfg.d_x,
        "d_z": cfg.d_z,
        "theta_star": cfg.theta_star.tolist(),
        "gamma_star": cfg.gamma_star.tolist(),
        "z_cov": cfg.z_cov.tolist(),
    }
    if isinstance(cfg.family, EndogenousLinear):
        d["family"] = "endogenous_linear"
        d["rho"] = cfg.family.rho
        d["sigma_eps"] = cfg.family.sigma_eps
    else:
        d["family"] = "shared_confounder"
        d["c"] = cfg.family.c
        d["phi"] = cfg.family.phi
    return d


def _schedule_to_dict(s: StepSchedule | None) -> dict | None:
    if s is None:
        return None
    if isinstance(s, Constant):
        return {"kind": "constant", "value": s.alpha}
    return {"kind": "polynomial", "coeff": s.coeff, "exponent": s.exponent}


def _resolve_schedule(d, which: str, cfg: DgpConfig, T: int, gamma0) -> StepSchedule:
    if d is None:
        # Dimension-scaled stable default, matching the comparison presets.
        if which == "alpha":
            return Polynomial(0.9 / (cfg.d_x + 2.0), 0.95)
        return Polynomial(1.5 / (cfg.d_z + 2.0), 0.95)
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"schedule.{which} must be an object with a 'kind'")
    kind = d["kind"]
    if kind == "constant":
        _reject_unknown(d, {"kind", "value"}, f"schedule.{which}")
        return Constant(float(d["value"]))
    if kind == "polynomial":
        _reject_unknown(d, {"kind", "coeff", "exponent"}, f"schedule.{which}")
        return Polynomial(float(d["coeff"]), float(d.get("exponent", 0.95)))
    if kind == "log_horizon":
        _reject_unknown(d, {"kind"}, f"schedule.{which}")
        consts = theory_constants(cfg, gamma0=gamma0)
        sched, _ = log_horizon_alpha(T, consts)
        return sched
    if kind == "two_timescale":
        _reject_unknown(d, {"kind", "iota"}, f"schedule.{which}")
        consts = theory_constants(cfg, gamma0=gamma0, iota=float(d.get("iota", 0.1)))
        alpha, beta = two_timescale_schedules(consts, cfg.d_z)
        return alpha if which == "alpha" else beta
    raise ConfigError(f"unknown schedule kind {kind!r}")


_TOP_KEYS = {
    "experiment_id", "dgp", "algorithm", "algorithms", "schedule",
    "T", "trials", "seed", "test_n", "checkpoints", "init",
}


def specs_from_config(
    config: dict,
    seed: int | None = None,
    trials: int | None = None,
    T: int | None = None,
) -> list[ExperimentSpec]:
    """Resolve a config dict into one spec per requested algorithm."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(config, _TOP_KEYS, "config")
    for key in ("dgp", "T", "trials"):
        if key not in config:
            raise ConfigError(f"config is missing required key {key!r}")
    if ("algorithm" in config) == ("algorithms" in config):
        raise ConfigError("config must define exactly one of 'algorithm' or 'algorithms'")
    algorithms = config.get("algorithms", None)
    if algorithms is None:
        algorithms = [config["algorithm"]]
    if not isinstance(algorithms, list) or not algorithms:
        raise ConfigError("'algorithms' must be a non-empty list")

    cfg = _dgp_from_dict(config["dgp"])
    horizon = int(config["T"] if T is None else T)
    n_trials = int(config["trials"] if trials is None else trials)
    base_seed = int(config.get("seed", 0) if seed is None else seed)
    test_n = int(config.get("test_n", 0))
    checkpoints = config.get("checkpoints")

    init = config.get("init") or {}
    if not isinstance(init, dict):
        raise ConfigError("'init' must be an object")
    _reject_unknown(init, {"theta0", "gamma0"}, "init")
    theta0 = None if init.get("theta0") is None else np.asarray(init["theta0"], dtype=float)
    gamma0 = None if init.get("gamma0") is None else np.asarray(init["gamma0"], dtype=float)

    sched = config.get("schedule") or {}
    if not isinstance(sched, dict):
        raise ConfigError("'schedule' must be an object")
    _reject_unknown(sched, {"alpha", "beta", "lambda"}, "schedule")
    lam = float(sched.get("lambda", est.DEFAULT_RIDGE))

    experiment_id = str(config.get("experiment_id", "experiment"))
    specs = []
    try:
        for alg in algorithms:
            alpha = beta = None
            if alg in ("two_sample_sgd", "two_stage_sgd", "direct_sgd"):
                alpha = _resolve_schedule(sched.get("alpha"), "alpha", cfg, horizon, gamma0)
            if alg in ("two_stage_sgd", "direct_sgd"):
                beta = _resolve_schedule(sched.get("beta"), "beta", cfg, horizon, gamma0)
            specs.append(
                ExperimentSpec(
                    dgp=cfg, algorithm=alg, T=horizon, trials=n_trials, base_seed=base_seed,
                    alpha=alpha, beta=beta, lam=lam, checkpoints=checkpoints, test_n=test_n,
                    theta0=theta0, gamma0=gamma0, experiment_id=experiment_id,
                )
            )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return specs


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Lossless JSON-compatible snapshot of a resolved spec."""
    return {
        "experiment_id": spec.experiment_id,
        "dgp": _dgp_to_dict(spec.dgp),
        "algorithm": spec.algorithm,
        "schedule": {
            "alpha": _schedule_to_dict(spec.alpha),
            "beta": _schedule_to_dict(spec.beta),
            "lambda": spec.lam,
        },
        "T": spec.T,
        "trials": spec.trials,
        "seed": spec.base_seed,
        "test_n": spec.test_n,
        "checkpoints": list(spec.checkpoints),
        "init": {
            "theta0": None if spec.theta0 is None else spec.theta0.tolist(),
            "gamma0": None if spec.gamma0 is None else spec.gamma0.tolist(),
        },
    }


# ---------------------------------------------------------------------------
# output writing


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def series_rows(series: MetricSeries) -> list[tuple[str, str, int, int, str, float]]:
    rows = []
    eid = series.spec.experiment_id
    alg = series.spec.algorithm
    for trial_idx, trial in enumerate(series.trials):
        for p in trial:
            for metric in METRIC_NAMES:
                v = getattr(p, metric)
                if v is not None:
                    rows.append((eid, alg, trial_idx, p.iteration, metric, float(v)))
    return rows


def write_series_csv(path: Path, all_rows: list[tuple]) -> None:
    """Write rows sorted by (algorithm, trial, iteration, metric), atomically."""
    ordered = sorted(all_rows, key=lambda r: (r[1], r[2], r[3], r[4]))
    lines = [CSV_HEADER]
    lines.extend(f"{eid},{alg},{trial},{it},{metric},{value!r}" for eid, alg, trial, it, metric, value in ordered)
    _atomic_write(path, "\n".join(lines) + "\n")


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0).isoformat()


def run_specs_to_dir(specs: list[ExperimentSpec], out_dir: Path, max_workers: int | None = None) -> None:
    """Run the specs, then write the joined CSV, per-algorithm CSVs, manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _utcnow()
    all_rows: list[tuple] = []
    per_alg: dict[str, list[tuple]] = {}
    digests: dict[str, str] = {}
    for spec in specs:
        series = harness.run_experiment(spec, max_workers=max_workers)
        rows = series_rows(series)
        all_rows.extend(rows)
        per_alg[spec.algorithm] = rows
        digests[spec.algorithm] = series.combined_stream_digest()
    outputs = ["series.csv"]
    write_series_csv(out_dir / "series.csv", all_rows)
    if len(specs) > 1:
        for alg, rows in per_alg.items():
            name = f"series_{alg}.csv"
            write_series_csv(out_dir / name, rows)
            outputs.append(name)
    manifest = {
        "toolkit_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "seed_mixer": SEED_MIXER,
        "started_utc": started,
        "finished_utc": _utcnow(),
        "experiments": [spec_to_dict(s) for s in specs],
        "outputs": outputs,
        "stream_digests": digests,
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# validation suites (cmd check)


def _check_gradient(n: int = 1_000_000, tol: float = 1e-2) -> tuple[float, bool]:
    cfg = shared_confounder_config(4, 8, c=0.1, phi="identity")
    summary = summarize(cfg)
    theta = cfg.theta_star + np.array([1.0, -1.0, 2.0, 0.5])
    rng = np.random.Generator(np.random.PCG64(0xD1CE))
    _, x, x_p, y = sample_two_block(rng, cfg, n)
    resid = x @ theta - y
    mc_grad = (x_p * resid[:, None]).mean(axis=0)
    ref = grad_f(theta, summary)
    rel = float(np.linalg.norm(mc_grad - ref) / np.linalg.norm(ref))
    return rel, rel <= tol


def _check_sherman_morrison(corrupt_u0: bool = False, tol: float = 1e-8) -> tuple[float, bool]:
    cfg = endogenous_linear_config(8, 16, rho=4.0, sigma_eps=1.0)
    rng = np.random.Generator(np.random.PCG64(0x5A))
    z, x, y = sample_one_block(rng, cfg, 1000)
    lam = 0.1
    theta = np.zeros(8)
    gamma = np.zeros((16, 8))
    u = -np.eye(8) / lam if corrupt_u0 else np.eye(8) / lam
    v = np.eye(16) / lam
    acc_u = lam * np.eye(8)
    acc_v = lam * np.eye(16)
    try:
        for t in range(1000):
            w = z[t] @ gamma
            acc_u += np.outer(w, w)
            acc_v += np.outer(z[t], z[t])
            theta, gamma, u, v = est.online_2sls_update(theta, gamma, u, v, z[t], x[t], y[t])
    except FloatingPointError:
        return float("inf"), False
    dev = max(
        float(np.abs(u @ acc_u - np.eye(8)).max()),
        float(np.abs(v @ acc_v - np.eye(16)).max()),
    )
    return dev, dev <= tol


def _check_determinism() -> tuple[float, bool]:
    cells = presets.build_preset("fig2", cell="dx1_dz1_rho1_sig0.5", trials=4, T=2000)
    spec = cells["dx1_dz1_rho1_sig0.5"][0]
    rows1 = series_rows(harness.run_experiment(spec, max_workers=1))
    rows2 = series_rows(harness.run_experiment(spec, max_workers=2))
    same = rows1 == rows2
    return (0.0 if same else 1.0), same


def cmd_check(config_path: str | None, corrupt_u0: bool = False) -> int:
    if config_path is not None:
        _load_config(config_path)  # validate only; checks run on canonical setups
    checks = [
        ("gradient_unbiasedness", lambda: _check_gradient(), "relative l2 error", 1e-2),
        ("sherman_morrison", lambda: _check_sherman_morrison(corrupt_u0=corrupt_u0), "max |prod - I|", 1e-8),
        ("determinism", _check_determinism, "mismatch flag", 0.0),
    ]
    failed = None
    for name, fn, what, tol in checks:
        measured, ok = fn()
        print(f"{name}: {what} = {measured:.3g} (tolerance {tol:g}) {'PASS' if ok else 'FAIL'}")
        if not ok and failed is None:
            failed = name
    if failed is not None:
        print(f"first failing check: {failed}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# entry points


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivstream", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ivstream {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the base seed")
    common.add_argument("--trials", type=int, default=None, help="override the trial count")
    common.add_argument("--iters", type=int, default=None, help="override the iteration count T")

    run_p = sub.add_parser("run", parents=[common], help="run one experiment or preset")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--preset", choices=presets.PRESETS, help="named benchmark preset")
    run_p.add_argument("--cell", default=None, help="single preset cell id (see docs)")

    cmp_p = sub.add_parser("compare", parents=[common], help="run several algorithms with paired streams")
    cmp_p.add_argument("--config", required=True, help="JSON config with an 'algorithms' list")

    chk_p = sub.add_parser("check", help="run the validation suites")
    chk_p.add_argument("--config", default=None, help="optional config to validate")
    chk_p.add_argument("--corrupt-u0", action="store_true", help=argparse.SUPPRESS)
    return parser


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    if args.config:
        specs = specs_from_config(_load_config(args.config), seed=args.seed, trials=args.trials, T=args.iters)
        run_specs_to_dir(specs, out_dir)
        return 0
    cells = presets.build_preset(args.preset, cell=args.cell, seed=args.seed, trials=args.trials, T=args.iters)
    if len(cells) == 1:
        ((_, specs),) = cells.items()
        run_specs_to_dir(specs, out_dir)
    else:
        for cell_id, specs in cells.items():
            run_specs_to_dir(specs, out_dir / cell_id)
    return 0


def cmd_compare(args) -> int:
    config = _load_config(args.config)
    if "algorithms" not in config:
        raise ConfigError("compare requires a config with an 'algorithms' list")
    specs = specs_from_config(config, seed=args.seed, trials=args.trials, T=args.iters)
    run_specs_to_dir(specs, Path(args.out))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_check(args.config, corrupt_u0=args.corrupt_u0)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
