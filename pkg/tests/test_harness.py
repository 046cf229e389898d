import json
import math
import shutil
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from macropeaks import io
from macropeaks.cli import main
from macropeaks.config import canonical, load_config, parse_config
from macropeaks.errors import ConfigError
from macropeaks.experiment import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, run_experiment, run_suite

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
MINIMAL = CONFIGS / "minimal.toml"


def minimal_dict(**changes):
    data = {
        "name": "minimal",
        "kind": "spatial",
        "correlation": {"kind": "white", "d": 1},
        "lattice": {"n_max": 6},
        "gauge": {"gamma": 0.5},
        "estimator": {"methods": ["counting"], "n_range": [2, 6]},
        "replication": {"seed": 0, "replicates": 2},
    }
    data.update(changes)
    return data


def test_minimal_config_estimate_in_unit_interval():
    rec = run_experiment(MINIMAL)
    est = rec.aggregates["gamma=0.5:counting"]["mean"]
    assert 0.0 <= est <= 1.0
    assert len(rec.replicates) == 2


def test_negative_gamma_names_field():
    with pytest.raises(ConfigError) as info:
        parse_config(minimal_dict(gauge={"gamma": -1}))
    assert info.value.path == "gauge.gamma"
    assert "gauge.gamma" in str(info.value)


@pytest.mark.parametrize(
    "change, path",
    [
        ({"lattice": {"n_max": 99}}, "lattice.n_max"),
        ({"replication": {"seed": -3}}, "replication.seed"),
        ({"estimator": {"methods": ["guess"]}}, "estimator.methods"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_config_error_paths(change, path):
    with pytest.raises(ConfigError) as info:
        parse_config(minimal_dict(**change))
    assert info.value.path == path


def test_runs_are_byte_identical():
    a = run_experiment(MINIMAL)
    b = run_experiment(MINIMAL)
    assert io.dumps(a.payload()) == io.dumps(b.payload())


def test_payload_independent_of_threads():
    cfg = parse_config(minimal_dict(replication={"seed": 5, "replicates": 6}, gauge={"gamma": [0.25, 0.5]}))
    one = run_experiment(cfg, threads=1)
    four = run_experiment(cfg, threads=4)
    assert io.dumps(one.payload()) == io.dumps(four.payload())


def test_seed_override_changes_payload():
    a = run_experiment(MINIMAL, seed=0)
    b = run_experiment(MINIMAL, seed=1)
    assert a.config["replication"]["seed"] == 0 and b.config["replication"]["seed"] == 1
    assert a.replicates != b.replicates


@given(
    st.lists(st.floats(0.05, 2.0), min_size=1, max_size=3),
    st.integers(0, 2**32),
    st.integers(1, 30),
    st.sampled_from(["white", "exponential"]),
)
def test_config_round_trip(gammas, seed, reps, kind):
    corr = {"kind": kind, "d": 1} if kind == "white" else {"kind": kind, "d": 1, "lambda": 1.5}
    cfg = parse_config(minimal_dict(correlation=corr, gauge={"gamma": gammas}, replication={"seed": seed, "replicates": reps}))
    again = parse_config(json.loads(canonical(cfg)))
    assert again == cfg
    assert canonical(again) == canonical(cfg)


def test_toml_and_json_agree(tmp_path):
    cfg = load_config(MINIMAL)
    path = tmp_path / "minimal.json"
    path.write_text(canonical(cfg))
    assert load_config(path) == cfg


def test_thickness_warning():
    cfg = parse_config(minimal_dict(gauge={"gamma": 0.6}, estimator={"methods": ["thickness"], "theta": [0.5]}))
    assert any("theta" in w for w in cfg.warnings())


def test_artifacts_written(tmp_path):
    rec = run_experiment(MINIMAL, out_dir=str(tmp_path))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["minimal.json", "minimal_replicates.csv"]
    saved = json.loads((tmp_path / "minimal.json").read_text())
    assert saved["payload"]["aggregates"] == json.loads(io.dumps(rec.aggregates))
    assert (tmp_path / "minimal_replicates.csv").read_text().startswith("# macropeaks-schema")


def test_empty_suite(tmp_path):
    summary = run_suite(tmp_path)
    assert summary.rows == [] and summary.exit_code == EXIT_OK


def test_suite_with_failing_and_passing(tmp_path):
    shutil.copy(MINIMAL, tmp_path / "a_pass.toml")
    failing = minimal_dict(name="b_fail", targets=[{"metric": "gamma=0.5:counting", "value": 5.0, "tol": 0.1}])
    (tmp_path / "b_fail.json").write_text(json.dumps(failing))
    summary = run_suite(tmp_path, out_dir=str(tmp_path / "out"))
    assert summary.exit_code != EXIT_OK
    assert set(summary.records) == {"a_pass.toml", "b_fail.json"}
    assert [r["status"] for r in summary.rows] == ["passed", "failed"]
    assert (tmp_path / "out" / "summary.csv").exists()


def test_suite_records_config_errors(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps(minimal_dict(gauge={"gamma": -1})))
    shutil.copy(MINIMAL, tmp_path / "good.toml")
    summary = run_suite(tmp_path)
    assert summary.exit_code == EXIT_CONFIG
    assert "good.toml" in summary.records
    assert summary.rows[0]["status"] == "config-error"


def test_cli_run_and_exit_codes(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "run", str(MINIMAL)]) == EXIT_OK
    assert (tmp_path / "minimal.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(minimal_dict(gauge={"gamma": -1})))
    assert main(["run", str(bad)]) == EXIT_CONFIG
    fail = tmp_path / "fail.json"
    fail.write_text(json.dumps(minimal_dict(targets=[{"metric": "gamma=0.5:counting", "value": 5.0, "tol": 0.1}])))
    assert main(["run", str(fail)]) == EXIT_ACCEPTANCE
    assert "gauge.gamma" in capsys.readouterr().err


def test_cli_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MACROPEAKS_THREADS", "many")
    assert main(["run", str(MINIMAL)]) == EXIT_CONFIG
    monkeypatch.setenv("MACROPEAKS_THREADS", "3")
    assert main(["run", str(MINIMAL)]) == EXIT_OK


def test_cli_module_commands(tmp_path, capsys):
    corr = '{"kind": "exponential", "lambda": 1}'
    assert main(["check-conditions", "--correlation", corr, "--eta", "0.5"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["conditions"][0]["satisfied"] is True
    assert report["conditions"][0]["value"] == pytest.approx(math.pi, rel=1e-8)
    assert main(["covariance", "--correlation", '{"kind": "white"}', "--lag", "0"]) == EXIT_OK
    cov = json.loads(capsys.readouterr().out)
    assert cov["variance"] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-6)
    assert main(["--out", str(tmp_path), "simulate", "--correlation", corr, "--n-points", "200"]) == EXIT_OK
    assert main(["--out", str(tmp_path), "peaks", str(tmp_path / "field.csv"), "--gamma", "0.2"]) == EXIT_OK
    assert main(["dimension", str(tmp_path / "field.csv"), "--n-min", "1", "--n-max", "5"]) in (EXIT_OK, 3)
    capsys.readouterr()
    assert main(["bounds", "lopes", "--n", "256", "512", "--replicates", "2000"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert len(rows) == 2
    assert main(["check-conditions", "--correlation", "{not json"]) == EXIT_CONFIG
