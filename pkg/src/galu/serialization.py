"""JSON persistence for trained GaLU networks.

Arrays are written as nested lists in row-major order.  Python's float repr is
shortest round-trip, so a save/load cycle reproduces every weight bit for bit.
"""
import json

import numpy as np

from .model import GateBank, NaturalParams

FORMAT_KEYS = ("d", "k", "gate_source", "seed", "gates", "weights", "alpha", "normalized")


def model_to_dict(params: NaturalParams, gates: GateBank, normalized=True):
    params.check_gates(gates)
    return {
        "d": gates.d,
        "k": gates.k,
        "gate_source": gates.source,
        "seed": gates.seed,
        "gates": gates.gates.tolist(),
        "weights": params.W.tolist(),
        "alpha": params.alpha.tolist(),
        "normalized": bool(normalized),
    }


def model_from_dict(doc):
    """Inverse of :func:`model_to_dict`; returns ``(params, gates, normalized)``."""
    missing = [key for key in FORMAT_KEYS if key not in doc]
    if missing:
        raise ValueError(f"model document is missing fields: {missing}")
    d, k = int(doc["d"]), int(doc["k"])
    U = np.array(doc["gates"], dtype=np.float64).reshape(d, k)
    W = np.array(doc["weights"], dtype=np.float64).reshape(d, k)
    alpha = np.array(doc["alpha"], dtype=np.float64).reshape(k)
    seed = 0 if doc["seed"] is None else int(doc["seed"])
    gates = GateBank(U, source=doc["gate_source"], seed=seed)
    return NaturalParams(W, alpha), gates, bool(doc["normalized"])


def save_model(path, params: NaturalParams, gates: GateBank, normalized=True):
    with open(path, "w") as fh:
        json.dump(model_to_dict(params, gates, normalized), fh)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
