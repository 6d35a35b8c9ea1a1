"""Config loading/validation, experiment runs, caching, reports, plot data."""

import json
import os
from pathlib import Path

import pytest

from toruskit.config import dump_config, load_config, normalize, serialize
from toruskit.errors import ParseError, UnknownSeries, ValidationError
from toruskit.runner import (
    atomic_write_text,
    cache_dir,
    emit_plot_data,
    run_experiment,
)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("TORUSKIT_CACHE", str(tmp_path / "cache"))
    yield


def minimal_cluster(tmp_path, **overrides):
    raw = {
        "kind": "cluster",
        "out_dir": str(tmp_path / "out"),
        "lattice": {"matrix": [["1"]]},
        "params": {"box_radius": 10, "delta": "1/20"},
    }
    raw.update(overrides)
    return raw


def test_minimal_config_fills_defaults(tmp_path):
    cfg = normalize(minimal_cluster(tmp_path))
    assert cfg.seed == 0
    assert cfg.threads == 1
    assert cfg.cache is True
    assert cfg.params["allow_delta_above_theorem"] is False


def test_delta_validation_rejects_above_bound(tmp_path):
    raw = minimal_cluster(tmp_path)
    raw["lattice"] = {"matrix": [["1", "0"], ["0", "1"]]}
    raw["params"] = {"box_radius": 4, "delta": "9/10"}
    with pytest.raises(ValidationError) as err:
        normalize(raw)
    assert "1/42" in str(err.value)


def test_malformed_rational_is_parse_error(tmp_path):
    raw = minimal_cluster(tmp_path)
    raw["params"]["delta"] = "3/"
    with pytest.raises(ParseError):
        normalize(raw)


def test_config_file_round_trip(tmp_path):
    cfg = normalize(minimal_cluster(tmp_path, seed=7, threads=2))
    path = tmp_path / "config.json"
    dump_config(cfg, path)
    again = load_config(path)
    assert serialize(again) == serialize(cfg)


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ nope }")
    with pytest.raises(ParseError) as err:
        load_config(path)
    assert "line" in str(err.value)


def test_missing_referenced_file(tmp_path):
    raw = {
        "kind": "homological",
        "lattice": {"matrix": [["1", "0"], ["0", "1"]]},
        "params": {"box_radius": 4, "delta": "1/50",
                   "matrix_file": "nowhere.json"},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ValidationError):
        load_config(path)


def test_frequency_required_for_singular(tmp_path):
    raw = {"kind": "singular", "lattice": {"matrix": [["1"]]},
           "params": {"ell_radius": 2, "j_radius": 2, "gamma": 2}}
    with pytest.raises(ValidationError):
        normalize(raw)


def test_cluster_experiment_clean_run(tmp_path):
    raw = minimal_cluster(tmp_path)
    raw["params"] = {"box_radius": 64, "delta": "1/10",
                     "allow_delta_above_theorem": True}
    report = run_experiment(normalize(raw))
    assert report.passed
    names = {c["name"] for c in report.body["checks"]}
    assert "cross_cluster_separation" in names
    assert (tmp_path / "out" / "partition.json").exists()
    assert (tmp_path / "out" / "report-cluster.json").exists()


def test_reports_are_deterministic(tmp_path):
    configs = [
        minimal_cluster(tmp_path),
        {"kind": "verify", "seed": 5, "out_dir": str(tmp_path / "v"),
         "lattice": {"matrix": [["1"]]},
         "params": {"trials_compound": 4, "trials_cauchy_binet": 8,
                    "trials_gram": 8, "trials_chain_det": 8,
                    "d_min": 2, "d_max": 3}},
        {"kind": "measure", "out_dir": str(tmp_path / "m"),
         "lattice": {"matrix": [["1", "0"], ["0", "1"]]},
         "frequency": {"omega_bar": ["1"], "gamma0": "1/2", "tau0": 1},
         "params": {"g": 2, "tau": 6, "p_max": 1, "m_max": 1,
                    "gamma_grid": ["1/100", "1/50"]}},
    ]
    for raw in configs:
        cfg = normalize(raw)
        first = run_experiment(cfg).body_bytes()
        second = run_experiment(cfg).body_bytes()
        assert first == second


def test_cache_is_used_and_correct(tmp_path):
    raw = minimal_cluster(tmp_path)
    cfg = normalize(raw)
    first = run_experiment(cfg)
    cache_files = list(Path(os.environ["TORUSKIT_CACHE"]).glob("*.json"))
    assert cache_files, "partition should have been cached"
    second = run_experiment(cfg)
    assert first.body_bytes() == second.body_bytes()


def test_atomic_write_keeps_target_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "file.json"
    atomic_write_text(target, "original")
    import toruskit.runner as runner_mod

    def boom(src, dst):
        raise OSError("simulated failure")

    monkeypatch.setattr(runner_mod.os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(target, "new content")
    assert target.read_text() == "original"
    assert not list(tmp_path.glob(".tmp-*"))


def test_emit_plot_data_series(tmp_path):
    raw = {"kind": "chains", "out_dir": str(tmp_path / "c"),
           "lattice": {"matrix": [["1"]]},
           "params": {"box_radius": 20, "gammas": [2, 4]}}
    report = run_experiment(normalize(raw))
    path = emit_plot_data(report, "chain_scaling", tmp_path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "gamma,max_length"
    assert len(lines) == 3
    with pytest.raises(UnknownSeries):
        emit_plot_data(report, "no_such_series", tmp_path)
    with pytest.raises(UnknownSeries):
        emit_plot_data(report, "measure_curve", tmp_path)


def test_emit_plot_data_empty_series(tmp_path):
    raw = {"kind": "singular", "out_dir": str(tmp_path / "s"),
           "lattice": {"matrix": [["1"]]},
           "frequency": {"omega_bar": ["1"], "gamma0": "1/2", "tau0": 1,
                         "mass": "100"},
           "params": {"symbol": "nlw", "ell_radius": 2, "j_radius": 2,
                      "gamma": 2}}
    report = run_experiment(normalize(raw))
    path = emit_plot_data(report, "singular_chains", tmp_path)
    assert path.read_text() == "length,section_count,min_exponent\n"


def test_homological_experiment_with_files(tmp_path):
    # export a partition, feed it back through the file interface
    part_cfg = normalize({
        "kind": "cluster", "out_dir": str(tmp_path / "p"),
        "lattice": {"matrix": [["1", "0"], ["0", "1"]]},
        "params": {"box_radius": 8, "delta": "1/10",
                   "allow_delta_above_theorem": True}})
    run_experiment(part_cfg)
    raw = {
        "kind": "homological", "seed": 3, "out_dir": str(tmp_path / "h"),
        "lattice": {"matrix": [["1", "0"], ["0", "1"]]},
        "params": {"box_radius": 8, "delta": "1/10",
                   "allow_delta_above_theorem": True, "entries": 50,
                   "partition_file": str(tmp_path / "p" / "partition.json")},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    report = run_experiment(load_config(path))
    assert report.passed
    # the emitted matrix file round-trips through the same experiment
    matrix_file = tmp_path / "h" / "matrix.json"
    assert matrix_file.exists()
    raw["params"]["matrix_file"] = str(matrix_file)
    path.write_text(json.dumps(raw))
    second = run_experiment(load_config(path))
    assert second.passed
    assert (second.body["data"]["entry_count"]
            == report.body["data"]["entry_count"])


def test_wall_time_not_in_body(tmp_path):
    report = run_experiment(normalize(minimal_cluster(tmp_path)))
    assert "wall_time_s" in report.meta
    assert "wall_time_s" not in json.dumps(report.body)


def test_cache_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("TORUSKIT_CACHE", str(tmp_path / "elsewhere"))
    assert cache_dir() == tmp_path / "elsewhere"
