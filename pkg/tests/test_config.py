import json
from importlib import resources

import pytest

from raretail.config import KINDS, ExperimentConfig, load_config
from raretail.exceptions import ConfigError

BASE = {
    "kind": "truncation_study",
    "distributions": [{"family": "exponential", "params": {"rate": 1.0}}],
    "n": [10],
    "target_p": [1e-5],
}


def test_minimal_config_and_defaults():
    cfg = load_config(BASE)
    assert cfg.budgets.estimator_reps == 10**6
    assert cfg.targets() == ("target_p", [1e-5])
    assert cfg.distributions[0].name == "exponential(rate=1.0)"
    assert load_config(json.dumps(BASE)) == cfg


@pytest.mark.parametrize(
    "patch",
    [
        {"colour": "red"},
        {"budgets": {"estimator_reps": 10, "inner": 3}},
        {"distributions": [{"family": "exponential", "params": {}, "extra": 1}]},
    ],
)
def test_unknown_keys_rejected(patch):
    with pytest.raises(ConfigError) as err:
        load_config({**BASE, **patch})
    assert err.value.code == "config"


@pytest.mark.parametrize(
    "patch",
    [
        {"kind": "nope"},
        {"n": [0]},
        {"target_p": [1.5]},
        {"b": [3.0]},  # two targets
        {"distributions": []},
        {"distributions": [{"family": "student_t", "params": {"nu": -1}}]},
        {"distributions": [{"family": "no_such_family"}]},
        {"budgets": {"bootstrap_B": 1}},
        {"tail_quantiles": [0.7]},
        {"level": 1.0},
        {"estimator": "magic"},
    ],
)
def test_invalid_values_rejected(patch):
    with pytest.raises(ConfigError):
        load_config({**BASE, **patch})


def test_kind_requirements():
    with pytest.raises(ConfigError):
        load_config({**BASE, "kind": "empirical_study"})  # no data_sizes
    with pytest.raises(ConfigError):
        load_config({"kind": "thresholds", "b": [3.0]})  # no regimes
    with pytest.raises(ConfigError):
        load_config({"kind": "thresholds", "regimes": [{"regime": "heavy", "alpha": -1}], "b": [3.0]})
    ok = load_config({"kind": "thresholds", "regimes": [{"regime": "exponential", "lam": 1.0}], "b": [3.0]})
    assert ok.regimes[0].build() is not None


def test_overrides_and_bad_sources(tmp_path):
    assert load_config(BASE, seed=99).seed == 99
    assert load_config(BASE, seed=None).seed == 0
    with pytest.raises(ConfigError):
        load_config("{not json")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))


def test_roundtrip():
    cfg = load_config(BASE)
    assert ExperimentConfig.model_validate(cfg.to_dict()) == cfg


@pytest.mark.parametrize("name", sorted(p.name for p in resources.files("raretail.configs").iterdir() if p.name.endswith(".json")))
def test_shipped_configs_validate(name):
    cfg = load_config(resources.files("raretail.configs").joinpath(name).read_text())
    assert cfg.kind in KINDS
