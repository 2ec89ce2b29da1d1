"""Config, tensor-file and random-source plumbing."""
import json

import numpy as np
import pytest

from forestdriver import tensorio
from forestdriver.config import RunConfig, default_config, load_config
from forestdriver.errors import ValidationError
from forestdriver.rng import derive_seed, make_rng


def test_tensor_roundtrip_and_bytes(tmp_path):
    arrays = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array([1, 2], np.int64),
              "c": np.array([True, False]), "d": np.float64(2.5)}
    p = tensorio.save(tmp_path / "x.fdt", arrays, {"k": 1})
    back, meta = tensorio.load(p)
    assert list(back) == list(arrays) and meta["k"] == 1
    assert np.array_equal(back["a"], arrays["a"]) and back["c"].dtype == np.uint8
    assert back["d"].shape == ()
    assert tensorio.dumps(arrays) == tensorio.dumps(arrays)


def test_tensor_checksum(tmp_path):
    p = tensorio.save(tmp_path / "x.fdt", {"a": np.zeros(3)})
    raw = bytearray(p.read_bytes())
    raw[-1] ^= 1
    p.write_bytes(bytes(raw))
    with pytest.raises(tensorio.TensorFileError):
        tensorio.load(p)
    with pytest.raises(tensorio.TensorFileError):
        tensorio.loads(b"nope" + bytes(10))


def test_config_roundtrip(tmp_path):
    cfg = default_config()
    cfg.train.lam = 0.25
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    back = load_config(p)
    assert back == cfg and back.digest() == cfg.digest()
    assert back.resolve("m.jsonl") == tmp_path / "m.jsonl"


@pytest.mark.parametrize("raw", [{"train": {"lam": 1.5}}, {"augment": {"cloud_prob": -0.1}},
                                 {"train": {"nope": 1}}, {"extra": {}}])
def test_config_rejects(tmp_path, raw):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ValidationError):
        load_config(p)


def test_config_partial_sections_keep_defaults():
    cfg = RunConfig.from_dict({"train": {"epochs": 3}})
    assert cfg.train.epochs == 3 and cfg.train.lam == 0.5


def test_rng_streams():
    assert derive_seed(0, "e1", 2) == derive_seed(0, "e1", 2)
    assert derive_seed(0, "e1", 2) != derive_seed(0, "e1", 3)
    a = make_rng(5, "x").random(4)
    assert np.array_equal(a, make_rng(5, "x").random(4))
    assert np.array_equal(make_rng(7).random(3),
                          np.random.Generator(np.random.PCG64(7)).random(3))
