import pytest
import yaml

from qmind.config import (
    CONFIG_SCHEMA_VERSION,
    ConfigError,
    SEED_NAMES,
    Seeds,
    atomic_write_text,
    echo_config,
    effective_doc,
    load_config,
    parse_config,
)

MINIMAL = {
    "schema_version": 1,
    "seed": 5,
    "scenario": {
        "duration": 30.0,
        "benign": [{"src_ip": "10.0.1.1", "request_rate": 2.0, "flow_lifetime": 1.0}],
        "attackers": [
            {"src_ip": "10.0.2.1", "unique_rate": 4.0, "on_time": 5.0,
             "off_time": 2.0, "keepalive_interval": 1.0}
        ],
    },
}


def test_minimal_config_fills_defaults():
    cfg = parse_config(dict(MINIMAL))
    assert cfg.master_seed == 5
    assert cfg.dataplane.capacity == 1500
    assert cfg.window == 5.0
    assert len(cfg.feature_family) == 56
    assert cfg.learning.seed == cfg.seeds.epsilon
    assert cfg.scenario.benign[0].dst_port_pool == [80]


def test_seed_streams_derived_from_master():
    seeds = Seeds.from_master(5)
    assert [getattr(seeds, n) for n in SEED_NAMES] == [5000 + i for i in range(len(SEED_NAMES))]
    seeds = Seeds.from_master(5, {"traffic": 42})
    assert seeds.traffic == 42 and seeds.folds == 5001


def test_seed_stream_override_in_yaml():
    doc = dict(MINIMAL)
    doc["seeds"] = {"traffic": 99}
    cfg = parse_config(doc)
    assert cfg.seeds.traffic == 99
    doc["seeds"] = {"bogus": 1}
    with pytest.raises(ConfigError, match="unknown stream"):
        parse_config(doc)


def test_effective_doc_round_trips():
    cfg = parse_config(dict(MINIMAL))
    again = parse_config(effective_doc(cfg))
    assert effective_doc(again) == effective_doc(cfg)
    assert again.scenario == cfg.scenario


def test_schema_version_rejected():
    doc = dict(MINIMAL)
    doc["schema_version"] = 999
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(doc)


def test_missing_scenario_rejected():
    with pytest.raises(ConfigError, match="scenario"):
        parse_config({"schema_version": 1})


def test_bad_feature_family_rejected():
    doc = dict(MINIMAL)
    doc["features"] = {"family": [1]}  # single-feature mask
    with pytest.raises(ConfigError, match="mask"):
        parse_config(doc)
    doc["features"] = {"family": [3, 3]}
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(doc)


def test_bad_weights_rejected():
    doc = dict(MINIMAL)
    doc["weights"] = {"precision": 0.9, "recall": 0.9, "f_score": 0.0,
                      "accuracy": 0.0, "false_alarm": 0.0}
    with pytest.raises(ConfigError, match="sum to 1"):
        parse_config(doc)
    doc["weights"] = {"nope": 1.0}
    with pytest.raises(ConfigError, match="unknown metric"):
        parse_config(doc)


def test_load_config_and_overrides(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(MINIMAL))
    cfg = load_config(path)
    assert cfg.master_seed == 5
    cfg = load_config(path, seed_override=9)
    assert cfg.master_seed == 9 and cfg.seeds.traffic == 9000
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [unclosed")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(bad)


def test_atomic_write_and_echo(tmp_path):
    atomic_write_text(tmp_path / "sub" / "x.txt", "hello")
    assert (tmp_path / "sub" / "x.txt").read_text() == "hello"
    assert not list((tmp_path / "sub").glob(".x.txt.*"))
    cfg = parse_config(dict(MINIMAL))
    echo_config(cfg, tmp_path)
    echoed = yaml.safe_load((tmp_path / "effective_config.yaml").read_text())
    assert echoed["schema_version"] == CONFIG_SCHEMA_VERSION
    assert parse_config(echoed).master_seed == 5


def test_bundled_example_configs_parse():
    from pathlib import Path

    configs = Path(__file__).resolve().parent.parent / "configs"
    for name in ("desk_dataset.yaml", "overflow_baseline.yaml", "mitigation.yaml"):
        cfg = load_config(configs / name)
        assert cfg.scenario.duration > 0
