import numpy as np
import pytest

from clickmix import serialize
from clickmix.em import EmConfig, fit
from clickmix.simulate import ScenarioSpec, generate_replicate

from conftest import make_dataset


@pytest.fixture(scope="module")
def cm_fit():
    rep = generate_replicate(ScenarioSpec.preset("sim1-small", seed=3), 0)
    return fit(rep.dataset, 2, EmConfig(num_starts=5, short_iters=2, seed=1))


def test_model_round_trip_bit_exact(cm_fit, tmp_path):
    doc = serialize.model_to_dict(cm_fit.model)
    path = tmp_path / "m.json"
    serialize.save(doc, path)
    back = serialize.model_from_dict(serialize.load(path))
    assert back == cm_fit.model
    assert serialize.dumps(serialize.model_to_dict(back)) == path.read_text()


def test_discrete_model_round_trip():
    ds = make_dataset([[1, 2, 3, 1], [3, 2, 1], [2, 3]], 3)
    res = fit(ds, 2, EmConfig(num_starts=3, short_iters=2, model_kind="DM"))
    doc = serialize.model_to_dict(res.model)
    assert doc["variant"] == "DM"
    assert serialize.model_from_dict(doc) == res.model


def test_fit_round_trip(cm_fit):
    doc = serialize.fit_to_dict(cm_fit, {1: -5.0, 2: None})
    back = serialize.fit_from_dict(doc)
    assert back.model == cm_fit.model
    assert back.loglik_trace == cm_fit.loglik_trace
    np.testing.assert_array_equal(back.responsibilities, cm_fit.responsibilities)
    assert back.bic == cm_fit.bic and back.chosen_start == cm_fit.chosen_start
    assert doc["bic_by_g"] == {"1": -5.0, "2": None}


def test_loader_revalidates(cm_fit):
    doc = serialize.model_to_dict(cm_fit.model)
    doc["weights"] = [0.7, 0.7]
    with pytest.raises(ValueError):
        serialize.model_from_dict(doc)
    with pytest.raises(ValueError):
        serialize.model_from_dict({"format": "other"})
    with pytest.raises(ValueError):
        serialize.model_from_dict({**serialize.model_to_dict(cm_fit.model), "version": 99})
