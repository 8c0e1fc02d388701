"""Checkpoint serialization: bit-exact float round trips, version and
existence contracts, deterministic bytes."""

from __future__ import annotations

import json

import numpy as np
import pytest

from stylelab import autodiff as ad
from stylelab.checkpoints import FORMAT_VERSION, load_checkpoint, save_checkpoint
from stylelab.contrastive import StyleEncoder
from stylelab.errors import NotFoundError, ShapeError


def tensor_dict(rng):
    return {
        "trunk.w": ad.tensor(rng.standard_normal((3, 4))),
        "trunk.b": ad.tensor(rng.standard_normal(4)),
        "head": ad.tensor(rng.standard_normal((2, 2, 2))),
    }


class TestRoundTrip:
    def test_values_shapes_and_names_survive(self, tmp_path):
        rng = np.random.default_rng(0)
        params = tensor_dict(rng)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, params, "contrastive", {"seed": 7})
        arrays, kind, meta = load_checkpoint(path)
        assert kind == "contrastive"
        assert meta == {"seed": 7}
        assert set(arrays) == set(params)
        for name, p in params.items():
            assert arrays[name].shape == p.data.shape
            assert np.array_equal(arrays[name], p.data)

    def test_awkward_floats_round_trip_bit_exactly(self, tmp_path):
        values = np.array([0.1, 1.0 / 3.0, -0.0, 5e-324, 1.7976931348623157e308,
                           -2.2250738585072014e-308, 123456789.123456789])
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, {"v": ad.tensor(values)}, "test")
        arrays, _, _ = load_checkpoint(path)
        back = arrays["v"]
        assert np.array_equal(back, values)
        # sign of zero also preserved
        assert np.signbit(back[2])

    def test_missing_meta_defaults_to_empty_dict(self, tmp_path):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, {"v": ad.tensor(np.ones(2))}, "test")
        _, _, meta = load_checkpoint(path)
        assert meta == {}

    def test_same_params_serialize_to_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        params = tensor_dict(rng)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_checkpoint(p1, params, "test", {"x": 1})
        save_checkpoint(p2, dict(reversed(list(params.items()))), "test",
                        {"x": 1})
        assert p1.read_bytes() == p2.read_bytes()

    def test_encoder_params_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        enc = StyleEncoder(rng, vocab_size=11, hidden=8, n_layers=1,
                           out_dim=4, max_positions=32)
        path = tmp_path / "enc.json"
        save_checkpoint(path, enc.params(), "contrastive")
        arrays, kind, _ = load_checkpoint(path)
        assert kind == "contrastive"
        for name, p in enc.params().items():
            assert np.array_equal(arrays[name], p.data)


class TestContracts:
    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(NotFoundError):
            load_checkpoint(tmp_path / "absent.json")

    def test_unsupported_version_rejected(self, tmp_path):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, {"v": ad.tensor(np.ones(1))}, "test")
        payload = json.loads(path.read_text())
        payload["format_version"] = FORMAT_VERSION + 1
        path.write_text(json.dumps(payload))
        with pytest.raises(ShapeError):
            load_checkpoint(path)

    def test_no_temp_files_left_behind(self, tmp_path):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, {"v": ad.tensor(np.ones(3))}, "test")
        assert [p.name for p in tmp_path.iterdir()] == ["ckpt.json"]
