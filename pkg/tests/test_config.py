import json
from pathlib import Path

import pytest

from hjlab.config import ExperimentConfig, load_config, parse_config
from hjlab.errors import ConfigError


def _cfg(**kw):
    return json.dumps(kw, indent=2)


def test_defaults_and_hash_are_stable():
    a = parse_config("{}")
    b = parse_config('{"grid": {"a": 4.0}}')
    assert a.config_hash() == b.config_hash()
    assert a.spec().kind == "quadratic"
    assert a.params_for("solve").kind == "solve"


def test_preset_with_overrides():
    cfg = parse_config(_cfg(hamiltonian={"preset": "gaussian_power_bumped", "c3": 2.0}, grid={"N": 2}))
    spec = cfg.spec()
    assert spec.kind == "gaussian_power" and spec.c3 == 2.0 and spec.dim == 2


def test_unknown_key_reports_line_and_field():
    text = '{\n  "grid": {\n    "a": 2.0,\n    "size": 10\n  }\n}'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "grid.size"
    assert info.value.line == 4


def test_non_positive_grid_size():
    text = '{\n  "grid": {"n": 1}\n}'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "grid.n"
    assert info.value.line == 2


def test_malformed_json_reports_its_line():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "grid": {\n    "a": 2.0,,\n  }\n}')
    assert info.value.line == 3
    assert info.value.to_dict()["error"] == "config_error"


def test_non_object_document():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_experiment_field_path_omits_the_union_tag():
    text = '{\n  "experiment": {\n    "kind": "solve",\n    "T": -1\n  }\n}'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "experiment.T"
    assert info.value.line == 4


def test_invalid_hamiltonian_is_a_config_error():
    with pytest.raises(ConfigError) as info:
        parse_config(_cfg(hamiltonian={"preset": "nope"}))
    assert info.value.field == "hamiltonian"
    with pytest.raises(ConfigError):
        parse_config(_cfg(hamiltonian={"kind": "gaussian_power", "m": 0.5}))


def test_subcommand_must_match_experiment_kind():
    cfg = parse_config(_cfg(experiment={"kind": "solve"}))
    with pytest.raises(ConfigError) as info:
        cfg.params_for("entropy")
    assert info.value.field == "experiment.kind"


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "c.json"
    p.write_text(_cfg(seed=3))
    assert load_config(p).seed == 3
    assert isinstance(load_config(p), ExperimentConfig)


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.json")),
                         ids=lambda p: p.stem)
def test_shipped_example_configs_parse(path):
    cfg = load_config(path)
    assert cfg.experiment is not None and cfg.params_for(cfg.experiment.kind)
