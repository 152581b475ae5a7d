import json

import numpy as np
import pytest

from rbvf import __version__
from rbvf.agents import EpisodeLog
from rbvf.cli import (
    CURVE_COLUMNS,
    SWEEP_COLUMNS,
    OutputExists,
    area_under_curve,
    build_parser,
    emit_learning_curve,
    final_mean_return,
    main,
    prepare_output,
    read_csv,
    run_sweep,
    smoothed,
    write_csv,
)
from rbvf.config import PRESETS, RunConfig, parse_config, parse_overrides, parse_text, resolve

TINY = ["n_centroids=4", "value_hidden=16", "centroid_hidden=16", "actor_hidden=16",
        "batch_size=16", "updates_per_episode=5", "buffer_size=5000"]


def _sets(pairs):
    return [x for p in pairs for x in ("--set", p)]


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("# nothing here\n\n")
    assert parse_config(path) == RunConfig()
    assert RunConfig().preset == "desk"


def test_full_scale_preset():
    cfg = resolve(overrides={"preset": "paper"})
    assert (cfg.n_centroids, cfg.batch_size, cfg.gamma) == (100, 256, 0.99)
    assert cfg.buffer_size == 500_000 and cfg.target_rate == 0.005 and cfg.updates_per_episode == 1000
    assert cfg.value_hidden == (512, 512, 512)


def test_file_overrides_preset_and_flags_override_file(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("preset = paper\nn_centroids = 50  # fewer\nbeta = 2.0\n")
    cfg = parse_config(path, ["beta=3.5"])
    assert cfg.n_centroids == 50 and cfg.beta == 3.5 and cfg.batch_size == 256


def test_gamma_out_of_range_names_field():
    with pytest.raises(ValueError, match=r"gamma must lie in \[0, 1\)"):
        resolve(overrides={"gamma": 1.5})


@pytest.mark.parametrize("text, match", [
    ("colour = red\n", "unknown key"),
    ("beta = 1\nbeta = 2\n", "duplicate"),
    ("beta\n", "key = value"),
    ("episodes = many\n", "cannot parse"),
])
def test_bad_config_text(text, match):
    with pytest.raises(ValueError, match=match):
        parse_text(text)


def test_contradictory_settings():
    with pytest.raises(ValueError, match="batch_size"):
        resolve(overrides={"batch_size": 100, "buffer_size": 10})
    with pytest.raises(ValueError, match="eps_min"):
        resolve(overrides={"eps_min": 0.9, "eps_start": 0.5})


def test_override_parsing():
    assert parse_overrides(["seeds=1,2,3", "value_hidden=32,32"]) == {"seeds": (1, 2, 3), "value_hidden": (32, 32)}
    with pytest.raises(ValueError):
        parse_overrides(["nonsense"])


def test_config_text_round_trip():
    cfg = resolve(overrides={"preset": "paper", "seeds": (3, 4), "beta": 0.1})
    assert resolve(parse_text(cfg.to_text())) == cfg


def test_presets_only_touch_known_fields():
    names = set(RunConfig.__dataclass_fields__)
    assert all(set(p) <= names for p in PRESETS.values())


def test_output_not_overwritten(tmp_path):
    out = tmp_path / "o"
    prepare_output(out)
    (out / "x").write_text("1")
    with pytest.raises(OutputExists):
        prepare_output(out)
    prepare_output(out, overwrite=True)


def _log(returns):
    return [EpisodeLog(i, 10, r, 0.5, 0.1, 1.0) for i, r in enumerate(returns)]


def test_learning_curve_single_episode(tmp_path):
    path = emit_learning_curve(_log([-3.5]), tmp_path / "c.csv")
    rows = read_csv(path)
    assert list(rows[0]) == CURVE_COLUMNS
    assert len(rows) == 1 and rows[0]["smoothed"] == rows[0]["return"]


def test_learning_curve_requires_entries(tmp_path):
    with pytest.raises(ValueError):
        emit_learning_curve([], tmp_path / "c.csv")


def test_smoothing_constant_series():
    assert smoothed([2.5] * 30) == [2.5] * 30


def test_smoothing_against_direct_mean():
    r = np.random.default_rng(0).normal(size=37)
    for k, s in enumerate(smoothed(r), start=1):
        window = r[max(1, k - 9) - 1:k]
        assert s == pytest.approx(sum(window) / len(window), rel=1e-12, abs=1e-12)


def test_auc_and_final_mean():
    assert area_under_curve([0.0, 2.0, 4.0]) == 4.0
    assert final_mean_return(list(range(100))) == np.mean(range(80, 100))


def test_csv_format(tmp_path):
    path = write_csv(tmp_path / "f.csv", ["a", "b"], [{"a": 0.1, "b": 2}])
    raw = path.read_bytes()
    assert raw == b"a,b\n0.1,2\n"


def test_sweep_single_value_single_seed():
    base = resolve(overrides={**parse_overrides(TINY), "episodes": 2})
    rows = run_sweep(base, "beta", [1.0], [0])
    assert len(rows) == 1 and list(rows[0]) == SWEEP_COLUMNS


def test_sweep_rejects_bad_axis():
    with pytest.raises(ValueError):
        run_sweep(RunConfig(), "gamma", [0.5], [0])
    with pytest.raises(ValueError):
        run_sweep(RunConfig(), "beta", [0.0], [0])


def test_help_lists_subcommands():
    text = build_parser().format_help()
    for name in ("regress", "train", "verify-theorems", "sweep", "eval"):
        assert name in text


def test_cli_regress(tmp_path, capsys):
    out = tmp_path / "reg"
    assert main(["regress", "-o", str(out), "--set", "regression_steps=30"]) == 0
    for name in ("regression_mse.csv", "surface.csv", "regression_summary.csv", "regression.png",
                 "config.txt", "provenance.json"):
        assert (out / name).exists()
    assert len(read_csv(out / "surface.csv")) == 61 * 61
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["version"] == __version__ and prov["master_seed"] == 0
    assert "train_mse," in capsys.readouterr().out
    assert main(["regress", "-o", str(out)]) == 2


def test_cli_bad_config_exit_code(tmp_path, capsys):
    assert main(["regress", "-o", str(tmp_path / "x"), "--set", "gamma=1.5"]) == 2
    assert "gamma" in capsys.readouterr().err


def test_cli_train_eval_and_rerun(tmp_path):
    first = tmp_path / "a"
    args = ["train", "--episodes", "2", "--seeds", "3", *_sets(TINY)]
    assert main([*args, "-o", str(first)]) == 0
    assert (first / "learning_curves.png").exists()
    log = read_csv(first / "training_log_seed3.csv")
    assert len(log) == 2
    # a rerun from the echoed config reproduces the run bitwise
    second = tmp_path / "b"
    assert main(["train", "--config", str(first / "config.txt"), "-o", str(second)]) == 0
    assert (first / "checkpoint_seed3.ckpt").read_bytes() == (second / "checkpoint_seed3.ckpt").read_bytes()
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]  # noqa: E731
    assert strip(log) == strip(read_csv(second / "training_log_seed3.csv"))

    ev = tmp_path / "ev"
    assert main(["eval", "--checkpoint", str(first / "checkpoint_seed3.ckpt"), "--eval-episodes", "2",
                 "-o", str(ev)]) == 0
    rows = read_csv(ev / "eval.csv")
    assert len(rows) == 2 and all(np.isfinite(float(r["return"])) for r in rows)


def test_cli_train_ddpg_sarsa(tmp_path):
    out = tmp_path / "d"
    assert main(["train", "--agent", "rbf-ddpg", "--episodes", "1", "--set", "critic_delta=sarsa",
                 *_sets(TINY), "-o", str(out)]) == 0
    assert len(read_csv(out / "learning_curve_seed0.csv")) == 1


def test_cli_sweep_parallel(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--axis", "n_centroids", "--values", "2", "4", "--seeds", "0", "1",
                 "--workers", "2", "--episodes", "1", *_sets(TINY), "-o", str(out)]) == 0
    rows = read_csv(out / "sweep_summary.csv")
    assert [(r["axis_value"], r["seed"]) for r in rows] == [("2", "0"), ("2", "1"), ("4", "0"), ("4", "1")]
    assert (out / "sweep_auc.png").exists()


def test_cli_verify_small(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify-theorems", "--set", "theory_fixtures=3", "-o", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "gap_1d,1" in printed and "ufa,1" in printed
    assert len(read_csv(out / "gap_1d.csv")) == 3
