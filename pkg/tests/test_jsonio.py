import json

import numpy as np
import pytest

from roew.jsonio import (
    config_hash,
    dumps,
    format_float,
    read_json,
    read_jsonl,
    write_json,
    write_jsonl,
)


def test_format_float_roundtrips_exactly():
    rng = np.random.default_rng(0)
    values = list(rng.normal(size=50)) + [
        0.1, 1.0 / 3.0, 1e-300, 1e300, -0.0, 2.0**-52,
    ]
    for x in values:
        assert float(format_float(x)) == float(x)


def test_format_float_known_strings():
    assert format_float(0.5) == "0.5"
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(2.0) == "2"


def test_dumps_is_json_and_inverse():
    obj = {
        "a": [1, 2.5, None, True, False],
        "b": {"nested": "text with \"quotes\""},
        "c": 0.1,
    }
    text = dumps(obj)
    assert json.loads(text) == {
        "a": [1, 2.5, None, True, False],
        "b": {"nested": 'text with "quotes"'},
        "c": 0.1,
    }


def test_dumps_indent_and_compact_forms():
    obj = {"x": [1, 2]}
    compact = dumps(obj)
    assert "\n" not in compact
    pretty = dumps(obj, indent=2)
    assert pretty.startswith("{\n  ")
    assert json.loads(pretty) == json.loads(compact)
    assert dumps({}) == "{}"
    assert dumps([]) == "[]"


def test_dumps_preserves_insertion_order():
    assert dumps({"b": 1, "a": 2}).index('"b"') < dumps({"b": 1, "a": 2}).index('"a"')


def test_dumps_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_json_file_roundtrip(tmp_path):
    path = tmp_path / "obj.json"
    obj = {"vals": [0.1, -1e-17], "tag": None}
    write_json(path, obj)
    assert read_json(path) == obj
    assert path.read_text().endswith("\n")


def test_jsonl_roundtrip_skips_blank_lines(tmp_path):
    path = tmp_path / "rows.jsonl"
    rows = [{"i": 0, "x": 0.25}, {"i": 1, "x": 1.0 / 3.0}]
    write_jsonl(path, rows)
    text = path.read_text()
    assert len(text.strip().split("\n")) == 2
    path.write_text(text + "\n\n")
    assert read_jsonl(path) == rows


def test_config_hash_order_insensitive_value_sensitive():
    a = config_hash({"x": 1, "y": [1, 2]})
    b = config_hash({"y": [1, 2], "x": 1})
    assert a == b
    assert len(a) == 64
    assert config_hash({"x": 1, "y": [1, 2], "z": 0}) != a
    assert config_hash({"x": 2, "y": [1, 2]}) != a


def test_config_hash_survives_serialization_roundtrip():
    cfg = {"c": 20.0, "alphas": [0.55, 0.6], "noise": "gaussian"}
    roundtripped = json.loads(dumps(cfg))
    assert roundtripped["c"] == 20  # whole floats collapse to ints on disk
    assert config_hash(roundtripped) == config_hash(cfg)
    assert config_hash({**cfg, "c": 20.5}) != config_hash(cfg)
