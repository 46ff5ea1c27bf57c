"""End-to-end acceptance criteria, one test per criterion.

Each test prints ``PASS`` or ``FAIL`` with the measured quantity, and the
lines are repeated in the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ncasp.algnn import backward, forward, init_network
from ncasp.asm import ShiftSet, validate_model
from ncasp.experiments import ExperimentConfig, run_experiment, table_csv
from ncasp.frechet import Perturbation, frechet_apply, loglog_slope, operator_norm, perturb, stability_report
from ncasp.ncpoly import NcPolynomial, evaluate
from ncasp.quaternion import (
    QuaternionFilter,
    QuaternionSignal,
    block_matrix,
    quaternion_convolve,
    quaternion_generator_matrices,
    quaternion_il_emptiness_check,
    quaternion_relations,
)
from ncasp.spectral import block_response, cycle_fixture, filter_norm_via_blocks, s3_regular_fixture, spectral_filter_check

# first-run CSV text keyed by config hash, reused by the determinism criterion
_RUNS: dict[str, tuple[ExperimentConfig, dict[str, str]]] = {}


def report(n: int, ok: bool, detail: str, capsys) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


def run_and_record(cfg: ExperimentConfig):
    res = run_experiment(cfg)
    _RUNS.setdefault(cfg.hash(), (cfg, {t.name: table_csv(t) for t in res.tables}))
    return res


def test_criterion_01_frechet_oracle(capsys):
    t0 = time.perf_counter()
    h, worst = 1e-5, 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 4)), int(rng.integers(2, 9))
        p = NcPolynomial.random(m, int(rng.integers(1, 4)), rng)
        S = [rng.standard_normal((n, n)) / np.sqrt(n) for _ in range(m)]
        i = int(rng.integers(m))
        xi = rng.standard_normal((n, n))
        up = [A + h * xi if k == i else A for k, A in enumerate(S)]
        dn = [A - h * xi if k == i else A for k, A in enumerate(S)]
        fd = (evaluate(p, up) - evaluate(p, dn)) / (2 * h)
        an = frechet_apply(p, ShiftSet(S), i, xi)
        worst = max(worst, np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-300))
    dt = time.perf_counter() - t0
    report(1, worst < 1e-6 and dt < 10, f"max relative error {worst:.2e} over 100 cases in {dt:.2f} s", capsys)


def test_criterion_02_filtering_theorem_s3(capsys):
    t0 = time.perf_counter()
    S, T = s3_regular_fixture()
    op = proj = 0.0
    for seed in range(50):
        p = NcPolynomial.random(2, 3, np.random.default_rng(seed))
        r = spectral_filter_check(p, S, T, seed=seed)
        op, proj = max(op, r.operator_residual), max(proj, r.projection_residual)
    dt = time.perf_counter() - t0
    report(2, op < 1e-9 and proj < 1e-9 and dt < 5,
           f"operator residual {op:.2e}, projection residual {proj:.2e}, {dt:.2f} s", capsys)


def test_criterion_03_commutative_reduction(capsys):
    S, T = cycle_fixture(16)
    roots = np.exp(2j * np.pi * np.arange(16) / 16)
    freqs = np.array([b.frequencies[0][0, 0] for b in T.blocks])
    root_err = max(np.min(np.abs(roots - f)) for f in freqs)
    worst = 0.0
    for seed in range(20):
        p = NcPolynomial.random(1, 4, np.random.default_rng(seed))
        c = p.commutative_collapse()
        for b in T.blocks:
            lam = b.frequencies[0][0, 0]
            worst = max(worst, abs(block_response(p, b)[0, 0] - np.polyval(c[::-1], lam)))
    report(3, worst < 1e-10 and root_err < 1e-10 and len(T.blocks) == 16,
           f"max block-vs-scalar error {worst:.2e}, frequencies off the roots of unity by {root_err:.1e}", capsys)


def test_criterion_04_second_order_residual(capsys):
    S, _ = s3_regular_fixture()
    eps = np.logspace(-4, -1, 7)
    slopes = []
    for trial in range(10):
        rng = np.random.default_rng(trial)
        p = NcPolynomial.random(2, 3, rng)
        x = rng.standard_normal(6)
        base = Perturbation.random(2, 6, 1.0, mode="both", seed=100 + trial)
        res = [stability_report(p, S, base.scaled(e), x, L0=1.0, L1=1.0).residual for e in eps]
        slopes.append(loglog_slope(eps, res))
    ok = all(abs(s - 2.0) <= 0.2 for s in slopes)
    report(4, ok, f"slopes in [{min(slopes):.3f}, {max(slopes):.3f}] over 10 triples", capsys)


def test_criterion_05_theorem3_bound(capsys):
    cfg = ExperimentConfig("filter-stability", {"fixture": "s3", "trials": 200, "max_degree": 3})
    res = run_and_record(cfg)
    c = next(c for c in res.checks if "bound" in c.name)
    rows = res.tables[0].rows
    report(5, c.passed, f"{c.detail} across {len({r[0] for r in rows})} trials", capsys)


def test_criterion_06_norm_structure(capsys):
    rng = np.random.default_rng(6)
    max_err = 0.0
    for _ in range(100):
        sizes = rng.integers(1, 5, size=rng.integers(1, 5))
        blocks = [rng.standard_normal((k, k)) for k in sizes]
        A = np.zeros((sizes.sum(), sizes.sum()))
        start = 0
        for B in blocks:
            A[start:start + len(B), start:start + len(B)] = B
            start += len(B)
        max_err = max(max_err, abs(operator_norm(A) - max(operator_norm(B) for B in blocks)))
    violations = 0
    for S, T in (s3_regular_fixture(), cycle_fixture(16)):
        for _ in range(100):
            p = NcPolynomial.random(S.count, 3, rng)
            full = operator_norm(evaluate(p, S))
            violations += int(any(operator_norm(block_response(p, b)) > full * (1 + 1e-10) + 1e-12 for b in T.blocks))
            violations += int(abs(filter_norm_via_blocks(p, T) - full) > 1e-9 * max(full, 1))
    report(6, max_err < 1e-10 and violations == 0,
           f"maximum-property error {max_err:.1e}; {violations} block-norm violations over 200 filters", capsys)


def test_criterion_07_quaternion_algebra(capsys):
    rel = validate_model(quaternion_generator_matrices(), list(quaternion_relations().values()))
    rel_res = max(rel.residuals)
    conv = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        N, K = int(rng.integers(3, 12)), int(rng.integers(1, 5))
        F = QuaternionFilter(rng.standard_normal((4, K)))
        u = QuaternionSignal(*rng.standard_normal((4, N)))
        conv = max(conv, np.max(np.abs(quaternion_convolve(F, u).stacked() - block_matrix(F, N) @ u.stacked())))
    # nonconstant taps of degree one (two-tap filters): IL norm linear in the radius
    slopes = []
    for seed in range(10):
        F = QuaternionFilter(np.random.default_rng(seed).standard_normal((4, 2)))
        slopes.append(quaternion_il_emptiness_check(1, F=F).growth_slope)
    ok = rel_res < 1e-12 and conv < 1e-10 and all(abs(s - 1.0) <= 0.05 for s in slopes)
    report(7, ok, f"{len(rel.residuals)} relations to {rel_res:.1e}; convolve vs block oracle {conv:.1e}; "
                  f"IL slopes in [{min(slopes):.3f}, {max(slopes):.3f}]", capsys)


@pytest.mark.slow
def test_criterion_08_quaternion_perturbation(capsys):
    t0 = time.perf_counter()
    res = run_and_record(ExperimentConfig("quaternion-perturb"))
    dt = time.perf_counter() - t0
    details = "; ".join(c.detail for c in res.checks)
    report(8, res.passed and dt < 120, f"{details}; {dt:.1f} s", capsys)


def test_criterion_09_gradient_check(capsys):
    rng = np.random.default_rng(9)
    mats = []
    for _ in range(2):
        A = rng.standard_normal((6, 6))
        mats.append((A + A.T) / np.linalg.norm(A + A.T, 2))
    S = ShiftSet(mats)
    net = init_network(2, [1, 3, 2], nonlinearity="relu", readout=None, seed=9)
    x = rng.standard_normal((3, 6, 1))
    out, cache = forward(net, S, x)
    R = rng.standard_normal(out.shape)
    grads = backward(net, cache, R).as_list()
    h, worst = 1e-6, 0.0
    for P, G in zip(net.parameters, grads):
        num = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + h
            up = np.sum(forward(net, S, x)[0] * R)
            P[idx] = old - h
            dn = np.sum(forward(net, S, x)[0] * R)
            P[idx] = old
            num[idx] = (up - dn) / (2 * h)
        worst = max(worst, np.linalg.norm(num - G) / np.linalg.norm(num))
    report(9, worst < 1e-5, f"max relative gradient error {worst:.2e}", capsys)


def test_criterion_10_network_bound(capsys):
    res = run_and_record(ExperimentConfig("algnn-stability"))
    rows = res.tables[0].rows
    # ratio is undefined (nan) where the net output is identically zero on both operators
    ratios = [r[4] for r in rows if np.isfinite(r[4])]
    report(10, res.passed and min(ratios) >= 1,
           f"{res.checks[0].detail}; bound/measured ratio in [{min(ratios):.1f}, {max(ratios):.1f}] "
           f"({len(ratios)}/{len(rows)} points with nonzero deformation)", capsys)


@pytest.mark.slow
def test_criterion_11_il_regularization_trend(capsys):
    t0 = time.perf_counter()
    res = run_and_record(ExperimentConfig("multigraph-recsys"))
    dt = time.perf_counter() - t0
    details = "; ".join(c.detail for c in res.checks)
    report(11, res.passed and dt < 600, f"{details}; {dt:.1f} s", capsys)


@pytest.mark.slow
def test_criterion_12_determinism(capsys):
    from ncasp.experiments import KINDS

    runs = dict(_RUNS)
    for kind in KINDS:
        if not any(cfg.kind == kind for cfg, _ in runs.values()):
            cfg = ExperimentConfig(kind)
            runs[cfg.hash()] = (cfg, {t.name: table_csv(t) for t in run_experiment(cfg).tables})
    mismatched = []
    for cfg, first in runs.values():
        second = {t.name: table_csv(t) for t in run_experiment(cfg, threads=2).tables}
        if first.keys() != second.keys() or any(first[k].encode() != second[k].encode() for k in first):
            mismatched.append(cfg.kind)
    kinds = {cfg.kind for cfg, _ in runs.values()}
    report(12, not mismatched and kinds == set(KINDS),
           f"{len(runs) - len(mismatched)}/{len(runs)} configs over {len(kinds)} experiment kinds byte-identical"
                               + (f"; differing: {', '.join(mismatched)}" if mismatched else ""), capsys)
