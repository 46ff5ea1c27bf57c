"""Config-driven experiments: verification suites, stability sweeps and the two desk-scale studies.

Every experiment returns an :class:`ExperimentResult` (tables plus checks);
:func:`write_artifacts` turns it into sorted CSVs, gnuplot ``.dat`` twins, a
``summary.txt`` and a ``manifest.json`` echoing the resolved config.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .algnn import (
    NetworkSpec,
    TrainOptions,
    forward,
    init_network,
    network_stability_report,
    train,
)
from .asm import ShiftSet, shift_from_multigraph
from .data import (
    build_movie_multigraph,
    load_movielens,
    rating_signals,
    synth_recommendation,
    top_rated_movies,
    train_test_split,
)
from .frechet import Perturbation, loglog_slope, operator_norm, perturb, stability_report
from .ncpoly import NcPolynomial, evaluate
from .quaternion import QuaternionExperimentConfig, quaternion_perturb_experiment
from .spectral import (
    IrrepTable,
    cycle_fixture,
    filter_norm_via_blocks,
    s3_regular_fixture,
    spectral_filter_check,
    verify_decomposition,
)

log = logging.getLogger(__name__)

KINDS = ("spectral-verify", "filter-stability", "multigraph-recsys", "quaternion-perturb", "algnn-stability")


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""


# -- parameter blocks --------------------------------------------------------


@dataclass
class SpectralVerifyParams:
    fixtures: tuple = ("s3", "cycle")
    cycle_n: int = 16
    num_filters: int = 50
    max_degree: int = 3
    tol: float = 1e-9


@dataclass
class FilterStabilityParams:
    fixture: str = "s3"
    cycle_n: int = 8
    epsilons: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    trials: int = 20
    max_degree: int = 2
    mode: str = "both"
    lipschitz_samples: int = 16


@dataclass
class RecsysParams:
    data_dir: str | None = None
    n_movies: int = 50
    n_users: int = 200
    noise: float = 0.3
    top_movies: int = 50
    knn: int = 10
    taps: int = 3
    features: int = 64
    epochs: int = 40
    lr: float = 0.01
    il_lambda: float = 1.0
    num_seeds: int = 5
    split: float = 0.9
    ratios: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class AlgnnStabilityParams:
    n_movies: int = 12
    n_users: int = 80
    knn: int = 4
    num_layers: int = 2
    max_degree: int = 2
    nonlinearity: str = "relu"
    epsilons: tuple = (1e-3, 1e-2, 1e-1)
    nets: int = 3
    signals: int = 4
    lipschitz_samples: int = 16


PARAMS: dict[str, type] = {
    "spectral-verify": SpectralVerifyParams,
    "filter-stability": FilterStabilityParams,
    "multigraph-recsys": RecsysParams,
    "quaternion-perturb": QuaternionExperimentConfig,
    "algnn-stability": AlgnnStabilityParams,
}

_TOP_KEYS = {"kind", "params", "seed", "out"}


def _build_params(cls: type, raw: dict) -> Any:
    names = {f.name: f for f in dataclasses.fields(cls)}
    names.pop("seed", None)  # the run seed lives at the top level
    unknown = sorted(set(raw) - set(names))
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {cls.__name__}: {', '.join(unknown)}")
    kwargs = {}
    for k, v in raw.items():
        default = names[k].default
        kwargs[k] = tuple(v) if isinstance(default, tuple) and isinstance(v, list) else v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentConfig:
    kind: str
    params: Any = None
    seed: int = 0
    out: str = "runs/out"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        cls = PARAMS[self.kind]
        if self.params is None:
            self.params = cls()
        elif isinstance(self.params, dict):
            self.params = _build_params(cls, self.params)
        elif not isinstance(self.params, cls):
            raise ConfigError(f"params for {self.kind} must be a mapping")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - _TOP_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "kind" not in raw:
            raise ConfigError("config is missing 'kind'")
        return cls(raw["kind"], raw.get("params") or {}, raw.get("seed", 0), raw.get("out", "runs/out"))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        # a params-level seed is always overridden by the top-level one
        params = {k: list(v) if isinstance(v, tuple) else v
                  for k, v in dataclasses.asdict(self.params).items() if k != "seed"}
        return {"kind": self.kind, "params": params, "seed": self.seed, "out": self.out}

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")  # where results land does not change them
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# -- results -----------------------------------------------------------------


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    key_columns: int = 1  # rows are sorted on this many leading columns

    def sorted_rows(self) -> list[tuple]:
        return sorted(self.rows, key=lambda r: tuple(r[: self.key_columns]))


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    kind: str
    tables: list[Table] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.columns)
    for r in t.sorted_rows():
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def table_dat(t: Table) -> str:
    lines = ["# " + " ".join(t.columns)]
    for r in t.sorted_rows():
        lines.append(" ".join(_fmt(v).replace(" ", "_") for v in r))
    return "\n".join(lines) + "\n"


def summary_text(res: ExperimentResult) -> str:
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}" + (f": {c.detail}" if c.detail else "") for c in res.checks]
    lines.append(f"overall: {'PASS' if res.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def write_artifacts(cfg: ExperimentConfig, res: ExperimentResult, out: str | Path | None = None) -> Path:
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for t in res.tables:
        (out / f"{t.name}.csv").write_text(table_csv(t))
        (out / f"{t.name}.dat").write_text(table_dat(t))
        files += [f"{t.name}.csv", f"{t.name}.dat"]
    (out / "summary.txt").write_text(summary_text(res))
    manifest = {
        "library": "ncasp",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "files": sorted(files + ["summary.txt"]),
        "checks": [{"name": c.name, "passed": bool(c.passed)} for c in res.checks],
        "passed": bool(res.passed),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _pmap(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# -- fixtures ----------------------------------------------------------------


def _spectral_fixture(name: str, cycle_n: int) -> tuple[ShiftSet, IrrepTable]:
    if name == "s3":
        return s3_regular_fixture()
    if name == "cycle":
        return cycle_fixture(cycle_n)
    raise ConfigError(f"unknown fixture {name!r}")


# -- spectral-verify ---------------------------------------------------------


def spectral_verify(p: SpectralVerifyParams, seed: int = 0, threads: int = 1) -> ExperimentResult:
    """Decomposition residuals and filtering-theorem residuals for random filters."""
    res = ExperimentResult("spectral-verify")
    decomp = Table("decomposition", ["fixture", "block", "idempotent", "orthogonality", "completeness", "multiplicity_ok"])
    filt = Table("filters", ["fixture", "index", "degree", "operator_residual", "projection_residual",
                             "block_norm", "full_norm"], key_columns=2)
    for name in p.fixtures:
        S, T = _spectral_fixture(name, p.cycle_n)
        d = verify_decomposition(S, T)
        decomp.rows.append((name, d.block_residual, d.idempotent_residual, d.orthogonality_residual,
                            d.completeness_residual, d.multiplicity_ok))
        res.checks.append(Check(f"{name}: decomposition", d.passed(p.tol), f"max residual {max(d.block_residual, d.idempotent_residual, d.orthogonality_residual, d.completeness_residual):.3g}"))

        def one(k, S=S, T=T):
            rng = np.random.default_rng([seed, k])
            deg = int(rng.integers(0, p.max_degree + 1))
            poly = NcPolynomial.random(S.count, deg, rng)
            r = spectral_filter_check(poly, S, T, seed=seed + k)
            return (name, k, deg, r.operator_residual, r.projection_residual,
                    filter_norm_via_blocks(poly, T), operator_norm(evaluate(poly, S)))

        rows = _pmap(one, list(range(p.num_filters)), threads)
        filt.rows += rows
        worst = max(max(r[3], r[4]) for r in rows)
        res.checks.append(Check(f"{name}: filtering theorem", worst < p.tol, f"max residual {worst:.3g}"))
        if T.is_unitary():
            ok = all(r[5] <= r[6] * (1 + 1e-10) + 1e-12 for r in rows)
            res.checks.append(Check(f"{name}: block norm <= operator norm", ok))
    res.tables += [decomp, filt]
    return res


# -- filter-stability --------------------------------------------------------


def filter_stability(p: FilterStabilityParams, seed: int = 0, threads: int = 1) -> ExperimentResult:
    """Epsilon sweeps of ``||p(S)x - p(S~)x||`` against the first-order bound.

    Per trial the quadratic coefficient ``c = residual / eps^2`` is fitted at the
    largest epsilon; a violation is ``measured > bound + c eps^2`` at any sweep point.
    """
    S, _ = _spectral_fixture(p.fixture, p.cycle_n)
    anchors = [list(S.matrices)]
    R = max(operator_norm(A) for A in S.matrices)
    eps_list = sorted(p.epsilons)

    def trial(t: int):
        rng = np.random.default_rng([seed, t])
        poly = NcPolynomial.random(S.count, p.max_degree, rng)
        x = rng.standard_normal(S.n)
        base = Perturbation.random(S.count, S.n, 1.0, mode=p.mode, seed=seed * 1_000_003 + t)
        opts = {"r": S.n, "R": R, "samples": p.lipschitz_samples, "seed": seed + t, "anchors": anchors}
        reps = []
        L0 = L1 = None
        for e in eps_list:
            rep = stability_report(poly, S, base.scaled(e), x, L0=L0, L1=L1, estimate_opts=opts)
            L0, L1 = rep.L0, rep.L1
            reps.append(rep)
        c = reps[-1].residual / eps_list[-1] ** 2
        return [(t, e, r.measured / r.x_norm, r.first_order / r.x_norm, r.residual / r.x_norm,
                 r.theorem3_bound / r.x_norm, c * e**2 / r.x_norm) for r, e in zip(reps, eps_list)]

    rows = [row for rs in _pmap(trial, list(range(p.trials)), threads) for row in rs]
    table = Table("stability", ["trial", "epsilon", "measured", "first_order", "residual", "theorem3_bound",
                                "quadratic"], key_columns=2)
    table.rows = rows
    violations = sum(1 for r in rows if r[2] > r[5] + r[6] + 1e-12)
    res = ExperimentResult("filter-stability", [table])
    res.checks.append(Check("bound holds at every sweep point", violations == 0,
                            f"{violations} violations in {len(rows)} points"))
    slopes = []
    for t in range(p.trials):
        pts = [(r[1], r[4]) for r in rows if r[0] == t and r[4] > 0]
        if len(pts) >= 2:
            slopes.append(loglog_slope(*zip(*pts)))
    if slopes:
        med = float(np.median(slopes))
        res.checks.append(Check("residual is second order", abs(med - 2.0) <= 0.2, f"median slope {med:.3f}"))
    return res


# -- algnn-stability ---------------------------------------------------------


def multigraph_fixture(n_movies: int = 12, n_users: int = 80, knn: int = 4, seed: int = 0):
    fx = synth_recommendation(n_movies=n_movies, n_users=n_users, knn=knn, seed=seed)
    return shift_from_multigraph(fx.graph), fx.signals


def algnn_stability(p: AlgnnStabilityParams, seed: int = 0, threads: int = 1) -> ExperimentResult:
    """One-feature-per-layer nets: measured end-to-end deformation against the layered bound."""
    S, signals = multigraph_fixture(p.n_movies, p.n_users, p.knn, seed)
    x = signals.inputs[: p.signals, :, None]

    def one(k: int):
        net = init_network(S.count, [1] * (p.num_layers + 1), max_degree=p.max_degree,
                           nonlinearity=p.nonlinearity, readout=None, seed=seed * 1009 + k)
        base = Perturbation.random(S.count, S.n, 1.0, mode="both", seed=seed * 7907 + k)
        rows = []
        for e in sorted(p.epsilons):
            P = base.scaled(e)
            rep = network_stability_report(net, S, perturb(S, P), x, perturbation=P,
                                           estimate_opts={"samples": p.lipschitz_samples})
            rows.append((k, e, rep.end_to_end, rep.bound, rep.ratio if rep.end_to_end > 0 else float("nan")))
        return rows

    rows = [r for rs in _pmap(one, list(range(p.nets)), threads) for r in rs]
    table = Table("network_stability", ["net", "epsilon", "measured", "bound", "ratio"], key_columns=2)
    table.rows = rows
    violations = sum(1 for r in rows if not r[2] <= r[3])
    ratios = [r[4] for r in rows if np.isfinite(r[4])]
    detail = f"{violations} violations; ratio range " + (f"{min(ratios):.3g}..{max(ratios):.3g}" if ratios else "n/a")
    res = ExperimentResult("algnn-stability", [table])
    res.checks.append(Check("end-to-end difference within bound", violations == 0, detail))
    return res


# -- multigraph-recsys -------------------------------------------------------


RECSYS_MODELS = (("MultiFilter", "identity", False), ("MultiGNN", "relu", False), ("MultiGNN-IL", "relu", True))


def recsys_data(p: RecsysParams, seed: int):
    """Ratings, selected movies (target first) and the shift operators built from all users."""
    if p.data_dir:
        R = load_movielens(p.data_dir)
        movies = top_rated_movies(R, p.top_movies)
    else:
        R = synth_recommendation(p.n_movies, p.n_users, p.noise, seed=seed, knn=p.knn).ratings
        movies = np.concatenate([[0], [j for j in top_rated_movies(R, R.num_movies) if j != 0]])[: p.top_movies]
    graph, movies = build_movie_multigraph(R, len(movies), p.knn, movies=np.asarray(movies, dtype=int))
    return R, movies, shift_from_multigraph(graph)


def rmse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.ravel(pred) - np.ravel(y)) ** 2)))


def recsys_models(p: RecsysParams, S: ShiftSet, X: np.ndarray, y: np.ndarray, seed: int) -> dict[str, NetworkSpec]:
    words_degree = p.taps - 1
    nets = {}
    for name, nl, il in RECSYS_MODELS:
        net = init_network(S.count, [1, p.features], max_degree=words_degree, nonlinearity=nl,
                           readout="local", readout_node=0, seed=seed)
        opts = TrainOptions(lr=p.lr, epochs=p.epochs, loss="smooth_l1", il_lambda=p.il_lambda if il else 0.0, seed=seed)
        nets[name], _ = train(net, S, X, y, opts)
    return nets


def recsys_experiment(p: RecsysParams, seed: int = 0, threads: int = 1) -> ExperimentResult:
    """Train three models per split, then rebuild the rating layer from a fraction of
    the users and record how much the conv output and test RMSE move.

    The conv difference is relative: ``||h(S~) - h(S)||_F / ||h(S)||_F`` over the
    test signals.
    """
    def per_seed(s: int):
        cell_seed = seed * 1000 + s
        R, movies, S = recsys_data(p, cell_seed)
        signals = rating_signals(R, movies, 0)
        tr, te = train_test_split(signals, p.split, seed=cell_seed)
        nets = recsys_models(p, S, tr.inputs, tr.targets, cell_seed)
        Xte = te.inputs[:, :, None]
        base = {k: forward(n, S, Xte) for k, n in nets.items()}
        rng = np.random.default_rng(cell_seed)
        rows = []
        for ratio in sorted(p.ratios):
            users = np.sort(rng.permutation(R.num_users)[: max(2, int(round(ratio * R.num_users)))])
            g, _ = build_movie_multigraph(R.subset_users(users), len(movies), p.knn, movies=movies)
            St = shift_from_multigraph(g)
            for name, net in nets.items():
                out0, c0 = base[name]
                out1, c1 = forward(net, St, Xte)
                h0, h1 = c0.activations[-1], c1.activations[-1]
                denom = np.linalg.norm(h0)
                conv = float(np.linalg.norm(h1 - h0) / denom) if denom > 0 else 0.0
                rmse0, rmse1 = rmse(out0, te.targets), rmse(out1, te.targets)
                rows.append((name, float(ratio), s, conv, abs(rmse1 - rmse0), rmse0))
        return rows

    cells = [r for rs in _pmap(per_seed, list(range(p.num_seeds)), threads) for r in rs]
    raw = Table("recsys_cells", ["model", "ratio", "seed", "conv_diff", "rmse_diff", "rmse_base"], key_columns=3)
    raw.rows = cells
    conv_t = Table("recsys_conv_diff", ["model", "ratio", "mean", "std"], key_columns=2)
    rmse_t = Table("recsys_rmse_diff", ["model", "ratio", "mean", "std"], key_columns=2)
    for name, _, _ in RECSYS_MODELS:
        for ratio in sorted(p.ratios):
            sel = [c for c in cells if c[0] == name and c[1] == float(ratio)]
            cv = np.array([c[3] for c in sel])
            rm = np.array([c[4] for c in sel])
            conv_t.rows.append((name, float(ratio), float(cv.mean()), float(cv.std())))
            rmse_t.rows.append((name, float(ratio), float(rm.mean()), float(rm.std())))

    il = {(c[1], c[2]): c[3] for c in cells if c[0] == "MultiGNN-IL"}
    plain = {(c[1], c[2]): c[3] for c in cells if c[0] == "MultiGNN"}
    wins = [il[k] < plain[k] for k in plain]
    ratios = [il[k] / plain[k] for k in plain if plain[k] > 0]
    frac = float(np.mean(wins))
    med = float(np.median(ratios)) if ratios else float("nan")
    res = ExperimentResult("multigraph-recsys", [conv_t, rmse_t, raw])
    res.checks.append(Check("IL model more stable in >= 80% of cells", frac >= 0.8, f"fraction {frac:.3f}"))
    res.checks.append(Check("median IL/plain conv-difference ratio <= 0.5", med <= 0.5, f"median {med:.3f}"))
    return res


# -- quaternion-perturb ------------------------------------------------------


def quaternion_experiment(cfg: QuaternionExperimentConfig, seed: int = 0, threads: int = 1) -> ExperimentResult:
    cfg = dataclasses.replace(cfg, seed=seed)
    rows, base_acc = quaternion_perturb_experiment(cfg)
    table = Table("quaternion", ["mode", "epsilon", "first_conv_diff", "last_conv_diff", "accuracy"], key_columns=2)
    table.rows = [(r.mode, r.epsilon, r.first_conv_diff, r.last_conv_diff, r.accuracy) for r in rows]
    add = [r for r in rows if r.mode == "additive"]
    ratios = [b.first_conv_diff / a.first_conv_diff / (b.epsilon / a.epsilon) for a, b in zip(add, add[1:])]
    linear = all(abs(q - 1.0) <= 0.2 for q in ratios)
    res = ExperimentResult("quaternion-perturb", [table])
    res.checks.append(Check("first-layer difference scales linearly in epsilon", linear,
                            "normalized ratios " + ", ".join(f"{q:.3f}" for q in ratios)))
    chance = 1.0 / 4
    for mode in ("additive", "relative"):
        accs = [r.accuracy for r in rows if r.mode == mode]
        mono = all(b <= a for a, b in zip(accs, accs[1:]))
        res.checks.append(Check(f"{mode}: accuracy non-increasing in epsilon", mono,
                                ", ".join(f"{a:.4f}" for a in accs)))
    final = add[-1].accuracy if add else float("nan")
    res.checks.append(Check("accuracy below 1.5x chance at the largest additive epsilon", final < 1.5 * chance,
                            f"{final:.4f} (base {base_acc:.4f})"))
    return res


RUNNERS: dict[str, Callable[..., ExperimentResult]] = {
    "spectral-verify": spectral_verify,
    "filter-stability": filter_stability,
    "multigraph-recsys": recsys_experiment,
    "quaternion-perturb": quaternion_experiment,
    "algnn-stability": algnn_stability,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg.params, seed=cfg.seed, threads=threads)
