import json

import numpy as np
import pytest

from galu._rng import make_rng
from galu.model import GateBank, NaturalParams, galu_predict
from galu.serialization import FORMAT_KEYS, load_model, model_from_dict, model_to_dict, save_model


@pytest.fixture
def net():
    gates = GateBank.draw(4, 6, 2**63 + 5, source="sphere")
    rng = make_rng(1)
    return NaturalParams(rng.standard_normal((4, 6)), rng.standard_normal(6)), gates


class TestRoundTrip:
    def test_file_roundtrip(self, net, tmp_path):
        params, gates = net
        path = tmp_path / "model.json"
        save_model(path, params, gates, normalized=False)
        p2, g2, normalized = load_model(path)
        np.testing.assert_array_equal(p2.W, params.W)
        np.testing.assert_array_equal(p2.alpha, params.alpha)
        np.testing.assert_array_equal(g2.gates, gates.gates)
        assert (g2.source, g2.seed, normalized) == ("sphere", gates.seed, False)

    def test_predictions_unchanged(self, net):
        params, gates = net
        p2, g2, _ = model_from_dict(json.loads(json.dumps(model_to_dict(params, gates))))
        xs = make_rng(2).standard_normal((10, 4))
        np.testing.assert_allclose(galu_predict(xs, p2, g2), galu_predict(xs, params, gates), rtol=1e-15)

    def test_keys(self, net):
        assert set(model_to_dict(*net)) == set(FORMAT_KEYS)

    @pytest.mark.parametrize("key", FORMAT_KEYS)
    def test_missing_field(self, net, key):
        doc = model_to_dict(*net)
        del doc[key]
        with pytest.raises(ValueError, match=key):
            model_from_dict(doc)
