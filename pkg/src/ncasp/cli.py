"""Command-line entry point: ``ncasp <subcommand> [--config FILE] [--out DIR] [--seed N] [--threads N]``.

Exit codes: 0 all checks passed, 1 a check failed (or training diverged), 2 invalid config.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algnn import (
    TrainingDiverged,
    TrainOptions,
    forward,
    init_network,
    load_network,
    network_stability_report,
    save_network,
    train,
)
from .data import rating_signals, train_test_split
from .experiments import (
    RECSYS_MODELS,
    Check,
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    Table,
    multigraph_fixture,
    recsys_data,
    rmse,
    run_experiment,
    summary_text,
    write_artifacts,
)
from .frechet import Perturbation, perturb

log = logging.getLogger("ncasp")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SUBCOMMAND_KIND = {
    "verify": "spectral-verify",
    "stability": "filter-stability",
    "recsys": "multigraph-recsys",
    "quaternion": "quaternion-perturb",
    "train": "multigraph-recsys",
    "eval": "multigraph-recsys",
}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="JSON experiment config")
    p.add_argument("--out", default=d(None), help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=d(1), help="parallel sweep cells")
    p.add_argument("--seed", type=int, default=d(None), help="run seed (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncasp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ncasp {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", parents=[common], help="spectral decomposition and filtering checks")
    sp.add_argument("--fixture", action="append", choices=["s3", "cycle"], help="repeatable; default both")

    sp = sub.add_parser("stability", parents=[common], help="filter or network stability sweeps")
    sp.add_argument("--network", action="store_true", help="one-feature network sweep on the multigraph fixture")
    sp.add_argument("--checkpoint", help="measure a saved network instead of random ones")

    data_flags = argparse.ArgumentParser(add_help=False)
    data_flags.add_argument("--data-dir", help="ml-100k style directory; synthetic fixture if omitted")
    data_flags.add_argument("--top-movies", type=int)
    data_flags.add_argument("--knn", type=int)

    sub.add_parser("recsys", parents=[common, data_flags], help="IL-regularization stability study")
    sub.add_parser("quaternion", parents=[common], help="quaternion perturbation table")

    sp = sub.add_parser("train", parents=[common, data_flags], help="train a recommendation network")
    sp.add_argument("--model", choices=[m[0] for m in RECSYS_MODELS], default="MultiGNN-IL")
    sp.add_argument("--checkpoint", help="where to save (default OUT/network.json)")

    sp = sub.add_parser("eval", parents=[common, data_flags], help="test RMSE of a saved network")
    sp.add_argument("--checkpoint", required=True)

    sub.add_parser("run", parents=[common], help="run any experiment from --config")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    kind = SUBCOMMAND_KIND.get(args.command)
    if args.command == "stability" and (args.network or args.checkpoint):
        kind = "algnn-stability"
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if kind is not None and cfg.kind != kind:
            raise ConfigError(f"'{args.command}' expects a {kind} config, got {cfg.kind}")
    elif kind is None:
        raise ConfigError("'run' needs --config")
    else:
        cfg = ExperimentConfig(kind)
    overrides = {}
    if getattr(args, "fixture", None):
        overrides["fixtures"] = tuple(args.fixture)
    for flag, key in (("data_dir", "data_dir"), ("top_movies", "top_movies"), ("knn", "knn")):
        if getattr(args, flag, None) is not None:
            overrides[key] = getattr(args, flag)
    if overrides:
        try:
            cfg.params = dataclasses.replace(cfg.params, **overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def _load_checkpoint(path: str):
    try:
        return load_network(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _checkpoint_stability(cfg: ExperimentConfig, path: str) -> ExperimentResult:
    p = cfg.params
    net = _load_checkpoint(path)
    S, signals = multigraph_fixture(p.n_movies, p.n_users, p.knn, cfg.seed)
    if net.num_generators != S.count:
        raise ConfigError(f"network has {net.num_generators} generators, fixture has {S.count}")
    x = signals.inputs[: p.signals, :, None]
    base = Perturbation.random(S.count, S.n, 1.0, mode="both", seed=cfg.seed)
    table = Table("network_stability", ["epsilon", "measured", "output_difference", "bound"])
    violations = 0
    for e in sorted(p.epsilons):
        P = base.scaled(e)
        rep = network_stability_report(net, S, perturb(S, P), x, perturbation=P,
                                       estimate_opts={"samples": p.lipschitz_samples})
        table.rows.append((e, rep.end_to_end, rep.output_difference, rep.bound))
        violations += int(np.isfinite(rep.bound) and rep.end_to_end > rep.bound)
    res = ExperimentResult("algnn-stability", [table])
    res.checks.append(Check("end-to-end difference within bound", violations == 0, f"{violations} violations"))
    return res


def _recsys_split(cfg: ExperimentConfig):
    p = cfg.params
    R, movies, S = recsys_data(p, cfg.seed)
    tr, te = train_test_split(rating_signals(R, movies, 0), p.split, seed=cfg.seed)
    return S, tr, te


def _train(cfg: ExperimentConfig, model: str, checkpoint: str | None) -> ExperimentResult:
    p = cfg.params
    S, tr, te = _recsys_split(cfg)
    _, nl, il = next(m for m in RECSYS_MODELS if m[0] == model)
    net = init_network(S.count, [1, p.features], max_degree=p.taps - 1, nonlinearity=nl,
                       readout="local", readout_node=0, seed=cfg.seed)
    opts = TrainOptions(lr=p.lr, epochs=p.epochs, loss="smooth_l1", il_lambda=p.il_lambda if il else 0.0, seed=cfg.seed)
    net, hist = train(net, S, tr.inputs, tr.targets, opts)
    ckpt = Path(checkpoint) if checkpoint else Path(cfg.out) / "network.json"
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_network(net, ckpt)
    table = Table("train_history", ["epoch", "loss", "penalty"])
    for k, loss in enumerate(hist.loss):
        pen = hist.penalty[k - 1] if 0 < k <= len(hist.penalty) else 0.0
        table.rows.append((k, loss, pen))
    out, _ = forward(net, S, te.inputs[:, :, None])
    res = ExperimentResult("multigraph-recsys", [table])
    res.checks.append(Check("training loss decreased", hist.loss[-1] < hist.loss[0],
                            f"{hist.loss[0]:.4g} -> {hist.loss[-1]:.4g}; test RMSE {rmse(out, te.targets):.4f}"))
    return res


def _eval(cfg: ExperimentConfig, checkpoint: str) -> ExperimentResult:
    net = _load_checkpoint(checkpoint)
    S, tr, te = _recsys_split(cfg)
    table = Table("eval", ["split", "count", "rmse"])
    for name, part in (("test", te), ("train", tr)):
        out, _ = forward(net, S, part.inputs[:, :, None])
        table.rows.append((name, len(part), rmse(out, part.targets)))
    res = ExperimentResult("multigraph-recsys", [table])
    test_rmse = table.rows[0][2]
    res.checks.append(Check("finite test RMSE", bool(np.isfinite(test_rmse)), f"{test_rmse:.4f}"))
    return res


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        if args.command == "stability" and args.checkpoint:
            res = _checkpoint_stability(cfg, args.checkpoint)
        elif args.command == "train":
            res = _train(cfg, args.model, args.checkpoint)
        elif args.command == "eval":
            res = _eval(cfg, args.checkpoint)
        else:
            res = run_experiment(cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = write_artifacts(cfg, res)
    sys.stdout.write(summary_text(res))
    print(f"artifacts: {out}")
    return EXIT_OK if res.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
