import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tree_sobolev.config import (COMMANDS, ConfigError, RunConfig, WeightSpec, canonical_json,
                                 digest, load_leaf_values)
from tree_sobolev.tree_core import TreeWeights


def test_weight_spec_parsing():
    assert WeightSpec.parse("unit").build(3) == TreeWeights.unit(3)
    assert WeightSpec.parse("dyadic").build(4) == TreeWeights.dyadic(4)
    assert WeightSpec.parse("dyadic:3").build(2) == TreeWeights.dyadic(2, 3.0)
    assert WeightSpec.parse("geometric:0.5").build(3) == TreeWeights.geometric(3, 0.5)
    assert WeightSpec.parse("geometric:3:2").build(2) == TreeWeights((6.0, 18.0))
    assert WeightSpec.parse("explicit:1,0.5,4").build(None) == TreeWeights((1.0, 0.5, 4.0))
    for bad in ("nonsense", "geometric", "geometric:-1", "explicit:1,x", "dyadic:0",
                "explicit:1,-2", "geometric:1:2:3"):
        with pytest.raises(ConfigError):
            WeightSpec.parse(bad)
    with pytest.raises(ConfigError):
        WeightSpec.parse("explicit:1,2").build(3)
    with pytest.raises(ConfigError):
        WeightSpec.parse("unit").build(None)


def test_weight_spec_labels_round_trip():
    for text in ("unit", "dyadic", "dyadic:3", "geometric:0.333", "geometric:3:2",
                 "explicit:1,0.5,4"):
        spec = WeightSpec.parse(text)
        assert spec.label == text
        assert WeightSpec.from_dict(spec.to_dict()) == spec


def test_weight_spec_from_file(tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"N": 3, "W": [1, 2, 3]}))
    assert WeightSpec.parse(str(path)).build(3) == TreeWeights((1.0, 2.0, 3.0))
    path.write_text(json.dumps({"N": 2, "W": [1, 2, 3]}))
    with pytest.raises(ConfigError):
        WeightSpec.parse(str(path))
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        WeightSpec.parse(str(path))


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("bogus")
    with pytest.raises(ConfigError):
        RunConfig("extend", p=(1.0,))
    with pytest.raises(ConfigError):
        RunConfig("extend", N=0)
    with pytest.raises(ConfigError):
        RunConfig("extend", N=25)
    with pytest.raises(ConfigError):
        RunConfig("simulate", trials=0)
    with pytest.raises(ConfigError):
        RunConfig("simulate", seed=-1)
    with pytest.raises(ConfigError):
        RunConfig("extend", format="xml")
    with pytest.raises(ConfigError):
        RunConfig.from_json('{"command": "extend", "colour": 1}')
    with pytest.raises(ConfigError):
        RunConfig.from_json('{"N": 3}')
    with pytest.raises(ConfigError):
        RunConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig("simulate").require_seed()


def test_nmax_override(monkeypatch):
    monkeypatch.setenv("TREE_SOBOLEV_NMAX", "22")
    assert RunConfig("extend", N=22).N == 22


specs = st.sampled_from(["unit", "dyadic", "dyadic:0.5", "geometric:3", "geometric:0.25:2",
                         "explicit:1,2.5,0.125"])


@settings(max_examples=60, deadline=None)
@given(command=st.sampled_from(COMMANDS), N=st.one_of(st.none(), st.integers(1, 12)),
       p=st.lists(st.floats(1.01, 20.0), max_size=3),
       weights=st.lists(specs, max_size=3),
       seed=st.one_of(st.none(), st.integers(0, 2**63)),
       trials=st.integers(1, 10**7), samples=st.integers(1, 1000),
       start=st.one_of(st.none(), st.integers(0, 12)),
       fmt=st.sampled_from(["json", "csv"]))
def test_round_trip_is_byte_identical(command, N, p, weights, seed, trials, samples, start,
                                      fmt):
    cfg = RunConfig(command, N=N, p=tuple(p), weights=tuple(WeightSpec.parse(w) for w in weights),
                    seed=seed, trials=trials, samples=samples, start_depth=start, format=fmt)
    text = cfg.to_json()
    again = RunConfig.from_json(text)
    assert again == cfg
    assert again.to_json() == text
    assert again.digest == cfg.digest == digest(text)
    assert text == canonical_json(json.loads(text))


def test_digest_changes_with_content():
    a = RunConfig("report", N=4, p=(2.0,), seed=1)
    b = a.with_updates(seed=2)
    assert a.digest != b.digest
    assert a.with_updates(seed=None) == a
    assert len(a.digest) == 16


def test_single_value_helpers():
    cfg = RunConfig("extend", N=3, p=(3.0, 4.0), weights=(WeightSpec("unit"),))
    with pytest.raises(ConfigError):
        cfg.single_p()
    assert cfg.tree_weights() == TreeWeights.unit(3)
    assert json.loads(cfg.to_json())["p"] == [3.0, 4.0]
    assert json.loads(cfg.with_updates(p=(3.0,)).to_json())["p"] == 3.0


def test_leaf_values(tmp_path):
    f = load_leaf_values("random:5", 3)
    assert f.shape == (8,) and np.array_equal(f, load_leaf_values("random:5", 3))
    assert load_leaf_values("delta:2", 2).tolist() == [0, 0, 1, 0]
    path = tmp_path / "f.json"
    path.write_text(json.dumps([1, 2, 3, 4]))
    assert load_leaf_values(str(path), 2).tolist() == [1, 2, 3, 4]
    for bad in ("delta:9", "random:x", "nothing"):
        with pytest.raises(ConfigError):
            load_leaf_values(bad, 2)
    with pytest.raises(ConfigError):
        load_leaf_values(str(path), 3)
