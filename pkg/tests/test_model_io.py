"""Model container round-trips and format guards."""

import numpy as np
import pytest

from strokegen import nn
from strokegen.core import default_schema
from strokegen.cvae_traj import TrajConfig, init_traj_model
from strokegen.model_io import ModelFormatError, load_model, load_point_model, load_traj_model, save_model
from strokegen.vae_point import PointConfig, init_point_model


def test_point_round_trip(tmp_path):
    model = init_point_model(default_schema(0.016), PointConfig(hidden=8, m_max=3), nn.make_rng(1))
    model.stats.offset[:] = 0.25
    path = tmp_path / "point.json"
    save_model(path, model, {"seed": "7"})
    back = load_point_model(path)
    assert back.schema.names == model.schema.names
    assert back.schema.sample_period == 0.016
    assert back.config == model.config
    assert np.array_equal(back.stats.offset, model.stats.offset)
    assert list(back.params) == list(model.params)
    for name in model.params:
        assert np.array_equal(back.params[name], model.params[name])
    assert back.run_config == {"seed": "7"}


def test_traj_round_trip(tmp_path):
    model = init_traj_model(default_schema(), TrajConfig(hidden=8, n_samples=12), nn.make_rng(2))
    path = tmp_path / "traj.json"
    save_model(path, model)
    back = load_traj_model(path)
    assert back.config == model.config
    for name in model.params:
        assert np.array_equal(back.params[name], model.params[name])


def test_save_is_byte_deterministic(tmp_path):
    model = init_traj_model(default_schema(), TrajConfig(hidden=8, n_samples=12), nn.make_rng(3))
    save_model(tmp_path / "a.json", model, {"seed": "0"})
    save_model(tmp_path / "b.json", model, {"seed": "0"})
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_kind_mismatch_rejected(tmp_path):
    model = init_traj_model(default_schema(), TrajConfig(hidden=8, n_samples=12), nn.make_rng(4))
    save_model(tmp_path / "traj.json", model)
    with pytest.raises(ModelFormatError, match="expected a point model"):
        load_point_model(tmp_path / "traj.json")


def test_foreign_file_rejected(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text('{"hello": 1}')
    with pytest.raises(ModelFormatError):
        load_model(path)
    path.write_text("not json")
    with pytest.raises(ModelFormatError):
        load_model(path)
