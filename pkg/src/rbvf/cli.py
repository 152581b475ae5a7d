"""Command-line experiment runner.

    rbvf regress          fit the state-free RBVF to r(a), emit surface samples
    rbvf verify-theorems  numerical max-gap and approximation checks
    rbvf train            RBF-DQN / RBF-DDPG training runs, one per seed
    rbvf sweep            grid sweep over n_centroids or beta
    rbvf eval             greedy rollouts from a saved checkpoint

Every run writes its resolved config and provenance into the output
directory; CSVs carry a header row and figures are PNGs next to them.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import plotting
from .agents import TRAINING_LOG_COLUMNS, greedy_rollout, run_rbf_ddpg, run_rbf_dqn
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, parse_config, parse_overrides, write_provenance
from .envs import make_env
from .rbvf import RbvfModel
from .regression import SURFACE_COLUMNS, RegressionTask, dense_target_max, fit_regression, surface_rows
from .theory import GAP_CSV_COLUMNS
from .verify import UFA_COLUMNS, check_gap_1d, check_gap_decay, check_plateau, check_ufa, random_1d_fixtures

FINAL_WINDOW = 20
SMOOTH_WINDOW = 10
CURVE_COLUMNS = ["episode", "return", "loss", "smoothed"]
SWEEP_COLUMNS = ["axis_value", "seed", "final_mean_return", "area_under_curve"]


class OutputExists(RuntimeError):
    pass


def prepare_output(path, overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists():
        if not path.is_dir():
            raise OutputExists(f"{path} exists and is not a directory")
        if any(path.iterdir()) and not overwrite:
            raise OutputExists(f"{path} is not empty; pass --overwrite to reuse it")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, columns, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})
    return Path(path)


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def smoothed(returns, window: int = SMOOTH_WINDOW) -> list[float]:
    """Trailing mean over the last ``window`` entries (fewer at the start)."""
    r = np.asarray(returns, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(r)])
    k = np.arange(1, len(r) + 1)
    lo = np.maximum(0, k - window)
    return list((c[k] - c[lo]) / (k - lo))


def learning_curve_rows(log) -> list[dict]:
    if not log:
        raise ValueError("learning curve needs at least one episode")
    sm = smoothed([e.ret for e in log])
    return [{"episode": e.episode, "return": e.ret, "loss": e.mean_loss, "smoothed": s}
            for e, s in zip(log, sm)]


def emit_learning_curve(log, path) -> Path:
    return write_csv(path, CURVE_COLUMNS, learning_curve_rows(log))


def area_under_curve(returns) -> float:
    return float(np.trapezoid(np.asarray(returns, dtype=np.float64)))


def final_mean_return(returns, window: int = FINAL_WINDOW) -> float:
    return float(np.mean(np.asarray(returns, dtype=np.float64)[-window:]))


def train_once(cfg: RunConfig, seed: int):
    env = make_env(cfg.env)
    agent_cfg = cfg.agent_config()
    if cfg.agent == "rbf-dqn":
        return run_rbf_dqn(agent_cfg, env, cfg.episodes, seed=seed)
    return run_rbf_ddpg(agent_cfg, env, cfg.episodes, seed=seed, critic_delta=cfg.critic_delta)


def _train_job(job):
    cfg, seed, out_dir, tag = job
    result = train_once(cfg, seed)
    if out_dir is not None:
        out = Path(out_dir)
        write_csv(out / f"training_log_{tag}.csv", TRAINING_LOG_COLUMNS, [e.row() for e in result.log])
        emit_learning_curve(result.log, out / f"learning_curve_{tag}.csv")
        save_checkpoint(out / f"checkpoint_{tag}.ckpt", result.params,
                        {"model": result.model.describe(), "env": cfg.env, "agent": cfg.agent, "seed": seed})
    return [e.ret for e in result.log]


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def run_sweep(base: RunConfig, axis: str, values, seeds, workers: int = 1, out_dir=None) -> list[dict]:
    if axis not in ("n_centroids", "beta"):
        raise ValueError(f"sweep axis must be n_centroids or beta, got {axis!r}")
    if any(v <= 0 for v in values):
        raise ValueError("sweep values must be positive")
    jobs, keys = [], []
    for v in values:
        v = int(v) if axis == "n_centroids" else float(v)
        cfg = dataclasses.replace(base, **{axis: v}).validate()
        for s in seeds:
            jobs.append((cfg, int(s), out_dir, f"{axis}{v}_seed{s}"))
            keys.append((v, int(s)))
    returns = _map(_train_job, jobs, workers)
    return [{"axis_value": v, "seed": s, "final_mean_return": final_mean_return(r),
             "area_under_curve": area_under_curve(r)} for (v, s), r in zip(keys, returns)]


# subcommands -----------------------------------------------------------------

def cmd_regress(cfg: RunConfig, out: Path) -> int:
    task = RegressionTask(sample_count=cfg.regression_samples, n_centroids=cfg.regression_centroids,
                          beta=cfg.regression_beta, steps=cfg.regression_steps,
                          learning_rate=cfg.regression_learning_rate, seed=cfg.seeds[0])
    res = fit_regression(task)
    write_csv(out / "regression_mse.csv", ["step", "train_mse", "test_mse"],
              [{"step": i, "train_mse": a, "test_mse": b}
               for i, (a, b) in enumerate(zip(res.train_mse, res.test_mse))])
    rows = surface_rows(res)
    write_csv(out / "surface.csv", SURFACE_COLUMNS, rows)
    best, action = res.best_centroid()
    dense = dense_target_max(task)
    var = float(np.var(res.dataset.targets[res.dataset.train]))
    summary = {"train_mse": res.train_mse[-1], "test_mse": res.test_mse[-1], "target_variance": var,
               "best_centroid_value": best, "best_centroid_a0": float(action[0]), "best_centroid_a1": float(action[1]),
               "dense_grid_max": dense, "max_error": abs(best - dense)}
    write_csv(out / "regression_summary.csv", list(summary), [summary])
    plotting.regression_surfaces(rows, res.train_mse, res.test_mse, out / "regression.png")
    for k, v in summary.items():
        print(f"{k},{v!r}")
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    fixtures = random_1d_fixtures(cfg.theory_fixtures, seed=cfg.seeds[0])
    gaps = check_gap_1d(fixtures)
    write_csv(out / "gap_1d.csv", GAP_CSV_COLUMNS, [g.row() for g in gaps])
    plateau = check_plateau(fixtures)
    write_csv(out / "plateau.csv", ["fixture", "N", "beta", "max_deviation"],
              [{"fixture": i, "N": len(f.values), "beta": f.beta, "max_deviation": d}
               for i, (f, d) in enumerate(zip(fixtures, plateau))])
    reports, decay = check_gap_decay()
    write_csv(out / "gap_decay.csv", GAP_CSV_COLUMNS, [r.row() for r in reports])
    plotting.gap_decay(reports, out / "gap_decay.png")
    ufa = check_ufa()
    write_csv(out / "ufa.csv", UFA_COLUMNS, [u.row() for u in ufa])
    checks = {
        "gap_1d": all(abs(g.gap) <= g.tolerance for g in gaps),
        "plateau": max(plateau) <= 1e-10,
        "gap_decay": decay.nonnegative and decay.non_increasing and (decay.slope is None or decay.slope < 0),
        "ufa": all(u.passed for u in ufa),
    }
    print("check,passed")
    for k, v in checks.items():
        print(f"{k},{int(v)}")
    return 0 if all(checks.values()) else 1


def cmd_train(cfg: RunConfig, out: Path) -> int:
    jobs = [(cfg, s, str(out), f"seed{s}") for s in cfg.seeds]
    returns = _map(_train_job, jobs, cfg.workers)
    print("seed,final_mean_return,area_under_curve")
    for s, r in zip(cfg.seeds, returns):
        print(f"{s},{final_mean_return(r)!r},{area_under_curve(r)!r}")
    plotting.learning_curves({f"seed {s}": (r, smoothed(r)) for s, r in zip(cfg.seeds, returns)},
                             out / "learning_curves.png", f"{cfg.agent} on {cfg.env}")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    rows = run_sweep(cfg, cfg.sweep_axis, cfg.sweep_values, cfg.seeds, cfg.workers, str(out))
    write_csv(out / "sweep_summary.csv", SWEEP_COLUMNS, rows)
    plotting.sweep_auc(rows, cfg.sweep_axis, out / "sweep_auc.png")
    print(",".join(SWEEP_COLUMNS))
    for r in rows:
        print(",".join(str(_cell(r[c])) for c in SWEEP_COLUMNS))
    return 0


def cmd_eval(cfg: RunConfig, out: Path, checkpoint: Path) -> int:
    params, info = load_checkpoint(checkpoint)
    model = RbvfModel.from_description(info["model"])
    load_checkpoint(checkpoint, expected=model.init_params(np.random.default_rng(0)),
                    expected_model={**info, "model": model.describe()})
    env = make_env(info.get("env", cfg.env))
    env_seeds = np.random.SeedSequence(cfg.seeds[0]).generate_state(cfg.eval_episodes)
    rows = [{"episode": i, "env_seed": int(s), "return": greedy_rollout(model, params, env, int(s))}
            for i, s in enumerate(env_seeds)]
    write_csv(out / "eval.csv", ["episode", "env_seed", "return"], rows)
    print("episode,env_seed,return")
    for r in rows:
        print(f"{r['episode']},{r['env_seed']},{r['return']!r}")
    return 0


HELP = {
    "regress": "fit the state-free RBVF to r(a) and emit surface samples",
    "verify-theorems": "numerical max-gap, plateau and approximation checks",
    "train": "train RBF-DQN or RBF-DDPG, one run per seed",
    "sweep": "grid sweep over n_centroids or beta",
    "eval": "greedy rollouts from a saved checkpoint",
}

COMMANDS = {"regress": cmd_regress, "verify-theorems": cmd_verify, "train": cmd_train,
            "sweep": cmd_sweep, "eval": cmd_eval}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbvf", description="Deep RBF value function experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", type=Path, help="key = value config file (keys mirror RunConfig)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; repeatable")
        s.add_argument("--preset", choices=["desk", "paper"], help="desk-scale defaults or the full-scale setup")
        s.add_argument("--output", "-o", help="output directory")
        s.add_argument("--overwrite", action="store_true", help="allow writing into a nonempty output directory")
        s.add_argument("--seeds", type=int, nargs="+", help="one run per seed; the first is the master seed")
        s.add_argument("--workers", type=int, help="parallel training processes")
        if name in ("train", "sweep"):
            s.add_argument("--env", choices=["pendulum", "pointmass2d"], help="environment")
            s.add_argument("--agent", choices=["rbf-dqn", "rbf-ddpg"], help="learning algorithm")
            s.add_argument("--episodes", type=int, help="training episodes per run")
        if name == "sweep":
            s.add_argument("--axis", dest="sweep_axis", choices=["n_centroids", "beta"], help="swept config key")
            s.add_argument("--values", dest="sweep_values", type=float, nargs="+", help="positive values of the axis")
        if name == "eval":
            s.add_argument("--checkpoint", type=Path, required=True, help="checkpoint written by train or sweep")
            s.add_argument("--eval-episodes", dest="eval_episodes", type=int, help="number of greedy rollouts")
    return p


_FLAG_KEYS = ("preset", "output", "seeds", "workers", "env", "agent", "episodes",
              "sweep_axis", "sweep_values", "eval_episodes")


def config_from_args(args) -> RunConfig:
    overrides = parse_overrides(args.set)
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = tuple(v) if isinstance(v, list) else v
    return parse_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        out = prepare_output(cfg.output, args.overwrite)
    except (ValueError, OutputExists, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    write_provenance(out, cfg, args.command)
    t0 = time.perf_counter()
    if args.command == "eval":
        code = cmd_eval(cfg, out, args.checkpoint)
    else:
        code = COMMANDS[args.command](cfg, out)
    print(f"# {args.command} finished in {time.perf_counter() - t0:.1f}s; outputs in {out}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
