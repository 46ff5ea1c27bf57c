import json

import numpy as np
import pytest

from ncasp import __version__
from ncasp.experiments import (
    AlgnnStabilityParams,
    KINDS,
    ConfigError,
    ExperimentConfig,
    FilterStabilityParams,
    RecsysParams,
    SpectralVerifyParams,
    Table,
    run_experiment,
    table_csv,
    table_dat,
    write_artifacts,
)
from ncasp.quaternion import QuaternionExperimentConfig, quaternion_perturb_experiment


def test_config_round_trip_and_hash():
    cfg = ExperimentConfig.from_dict({"kind": "filter-stability", "params": {"epsilons": [0.1, 0.01]}, "seed": 3})
    assert cfg.params.epsilons == (0.1, 0.01)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.hash() == cfg.hash()
    moved = ExperimentConfig.from_dict({**cfg.to_dict(), "out": "elsewhere"})
    assert moved.hash() == cfg.hash()
    reseeded = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": 4})
    assert reseeded.hash() != cfg.hash()


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_round_trips_through_json(kind, tmp_path):
    cfg = ExperimentConfig(kind)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("raw", [
    {"kind": "nope"},
    {"params": {}},
    {"kind": "spectral-verify", "extra": 1},
    {"kind": "spectral-verify", "params": {"tol": 1e-9, "bogus": 2}},
    {"kind": "spectral-verify", "params": {"seed": 2}},
    {"kind": "spectral-verify", "seed": "zero"},
    {"kind": "quaternion-perturb", "params": {"num_seeds": 0}},
    [1, 2],
])
def test_config_rejects(raw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_param_defaults():
    assert SpectralVerifyParams().num_filters == 50
    assert FilterStabilityParams().trials == 20
    assert RecsysParams().taps == 3
    assert AlgnnStabilityParams().num_layers == 2


def test_table_formats():
    t = Table("t", ["a", "b"], [(2, 0.5), (1, True)])
    assert table_csv(t) == "a,b\n1,1\n2,0.5\n"
    assert table_dat(t).startswith("# a b\n")


def small_stability():
    return ExperimentConfig("filter-stability", {"trials": 3, "epsilons": (1e-3, 1e-2), "lipschitz_samples": 4})


def test_artifacts_and_manifest(tmp_path):
    cfg = small_stability()
    res = run_experiment(cfg)
    assert res.passed
    out = write_artifacts(cfg, res, tmp_path / "run")
    man = json.loads((out / "manifest.json").read_text())
    assert man["version"] == __version__ and man["config_hash"] == cfg.hash()
    assert all((out / f).exists() for f in man["files"])


def test_rerun_is_byte_identical(tmp_path):
    cfg = small_stability()
    a = write_artifacts(cfg, run_experiment(cfg), tmp_path / "a")
    b = write_artifacts(cfg, run_experiment(cfg, threads=3), tmp_path / "b")
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_spectral_verify_small():
    res = run_experiment(ExperimentConfig("spectral-verify", {"num_filters": 5, "cycle_n": 6}))
    assert res.passed and {t.name for t in res.tables} == {"decomposition", "filters"}


def test_algnn_stability_small():
    cfg = ExperimentConfig("algnn-stability", {"nets": 1, "signals": 2, "epsilons": (1e-2,), "lipschitz_samples": 4})
    res = run_experiment(cfg)
    assert res.passed
    assert all(row[3] >= row[2] for row in res.tables[0].rows)


def test_quaternion_zero_perturbation_changes_nothing():
    cfg = QuaternionExperimentConfig(epsilons_additive=(0.0,), epsilons_relative=(0.0,), num_seeds=1,
                                     signal_length=8, channels=2, train_samples=40, test_samples=40, epochs=2)
    rows, base = quaternion_perturb_experiment(cfg)
    for r in rows:
        assert r.first_conv_diff < 1e-12 and r.last_conv_diff < 1e-12
        assert r.accuracy == pytest.approx(base)
