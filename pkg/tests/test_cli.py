import json
import subprocess
import sys

import pytest

from raretail.cli import main, parse_dist, read_data
from raretail.exceptions import ParameterDomainError

SMALL = ["--estimator-reps", "3000", "--oracle-reps", "3000"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def data_file(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x\n1\n2\n3\n4\n")
    return path


def test_parse_dist_forms():
    assert parse_dist("exponential:rate=2") == {"family": "exponential", "params": {"rate": 2.0}}
    assert parse_dist("half_normal") == {"family": "half_normal", "params": {}}
    assert parse_dist('{"family": "weibull", "params": {"shape": 0.5}}')["params"] == {"shape": 0.5}
    with pytest.raises(ParameterDomainError):
        parse_dist("no_such:x=1")


def test_read_data(tmp_path, data_file):
    assert read_data(data_file).tolist() == [1.0, 2.0, 3.0, 4.0]
    bad = tmp_path / "bad.csv"
    bad.write_text("1\nfoo\n")
    with pytest.raises(ParameterDomainError):
        read_data(bad)


def test_estimate(capsys, tmp_path):
    d = run_json(capsys, "estimate", "--dist", "exponential:rate=1", "--n", "5", "--b", "3", "--reps", "2000",
                 "--seed", "1", "--output-dir", str(tmp_path))
    assert d["estimator"] == "is_tilted" and d["gamma"] == 15.0 and d["seed"] == 1
    assert json.loads((tmp_path / "estimate.json").read_text()) == d


def test_estimate_empirical(capsys, data_file):
    d = run_json(capsys, "estimate", "--data", str(data_file), "--n", "2", "--gamma", "7", "--reps", "20000",
                 "--seed", "0")
    assert d["N"] == 4 and d["bias_bound_factor"] == pytest.approx(1 - 0.75**2)
    assert abs(d["estimate"] - 1 / 16) <= 4 * d["std_error"]


def test_asymptotic(capsys):
    d = run_json(capsys, "asymptotic", "--dist", "bernoulli:p=0.3", "--n", "50", "--b", "0.6")
    assert d["regime"] == "light" and d["tilt"]["converged"]
    assert d["asymptotic"] > 0
    heavy = run_json(capsys, "asymptotic", "--dist", "half_student_t:nu=4", "--n", "10", "--target-p", "1e-5")
    assert heavy["heavy_tailed"] is True
    assert heavy["asymptotic"] == pytest.approx(1e-5, rel=1e-6)


def test_thresholds(capsys):
    d = run_json(capsys, "thresholds", "--regime", "heavy:alpha=2.5", "--regime", "exponential:lam=1",
                 "--n", "10", "--b", "3")
    assert [r["regime"] for r in d["cells"]] == ["heavy", "exponential"]
    assert d["cells"][1]["min_N"] == pytest.approx(1000.0)


def test_truncation_and_empirical_study(capsys, tmp_path):
    d = run_json(capsys, "truncation-study", "--dist", "exponential:rate=1", "--n", "5", "--target-p", "1e-3",
                 *SMALL, "--seed", "3")
    assert d["cells"][0]["status"] == "ok" and d["seed"] == 3
    code, out, _ = run(capsys, "empirical-study", "--dist", "exponential:rate=1", "--n", "5", "--target-p", "1e-3",
                       "--data-sizes", "100", "--replications", "3", *SMALL, "--output-dir", str(tmp_path))
    assert code == 0
    files = json.loads(out)["files"]
    assert any(f.endswith("empirical_study.csv") for f in files)
    assert any(f.endswith(".svg") for f in files)


def test_bootstrap_single_and_study(capsys, data_file):
    d = run_json(capsys, "bootstrap", "--data", str(data_file), "--n", "2", "--gamma", "7", "--bootstrap-B", "20",
                 "--inner-reps", "500", "--method", "crude", "--seed", "0")
    assert 0.0 <= d["lower"] <= d["upper"] <= 1.0
    study = run_json(capsys, "bootstrap", "--dist", "exponential:rate=1", "--n", "3", "--b", "2",
                     "--data-sizes", "50", "--replications", "10", "--bootstrap-B", "10", "--inner-reps", "300",
                     *SMALL)
    assert study["kind"] == "bootstrap_coverage"
    assert 0.0 <= study["cells"][0]["coverage"] <= 1.0


def test_evt_data_and_study(capsys, tmp_path):
    data = tmp_path / "heavy.csv"
    data.write_text("\n".join(str((i + 1) ** 0.5) for i in range(400)) + "\n")
    d = run_json(capsys, "evt", "--data", str(data), "--k-window", "10", "90", "--output-dir", str(tmp_path))
    assert set(d["verdicts"]) == {"pickands", "moment"}
    assert d["k_window"] == [10, 90]
    for est in ("pickands", "moment"):
        assert (tmp_path / f"series_{est}.csv").read_text().startswith("estimator,k,xi_hat")
        assert (tmp_path / f"series_{est}.svg").exists()
    assert (tmp_path / "evt.json").exists()
    study = run_json(capsys, "evt", "--dist", "exponential:rate=1", "--data-sizes", "1000")
    assert study["kind"] == "evt_detection"


def test_experiment_run_and_seed_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "thresholds", "regimes": [{"regime": "normal", "sigma2": 1.0}],
                               "n": [10], "b": [3.0], "seed": 4}))
    assert run_json(capsys, "experiment", "run", str(cfg))["seed"] == 4
    assert run_json(capsys, "experiment", "run", str(cfg), "--seed", "9")["seed"] == 9


def test_worker_count_does_not_change_output(capsys, monkeypatch):
    argv = ["empirical-study", "--dist", "half_student_t:nu=4", "--dist", "exponential:rate=1", "--n", "5",
            "--target-p", "1e-3", "--data-sizes", "100", "--replications", "3", *SMALL, "--seed", "2"]
    _, one, _ = run(capsys, *argv, "--workers", "1")
    monkeypatch.setenv("RARETAIL_WORKERS", "3")
    _, env, _ = run(capsys, *argv)
    _, three, _ = run(capsys, *argv, "--workers", "3")
    assert one == env == three


@pytest.mark.parametrize(
    "argv, code",
    [
        (["estimate", "--n", "2", "--b", "1"], "parameter_domain"),
        (["estimate", "--dist", "nope:x=1", "--n", "2", "--b", "1"], "parameter_domain"),
        (["estimate", "--dist", "half_student_t:nu=4", "--n", "2", "--b", "9", "--method", "is_tilted"], "no_mgf"),
        (["experiment", "run", "/nonexistent/config.json"], "config"),
    ],
)
def test_errors_are_json(capsys, argv, code):
    rc, out, err = run(capsys, *argv)
    assert rc != 0 and out == ""
    payload = json.loads(err)
    assert payload["error"] == code and payload["message"]


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kind": "thresholds", "regimes": [{"regime": "normal", "sigma2": 1.0}],
                               "b": [3.0], "surprise": 1}))
    rc, _, err = run(capsys, "experiment", "run", str(cfg))
    assert rc == 1 and json.loads(err)["error"] == "config"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "raretail", "thresholds", "--regime", "heavy:alpha=3",
                          "--n", "10", "--b", "3"], capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["kind"] == "thresholds"
    bad = subprocess.run([sys.executable, "-m", "raretail", "estimate", "--n", "2"], capture_output=True,
                         text=True, check=False)
    assert bad.returncode != 0
