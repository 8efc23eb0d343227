"""JSON encodings of matrices, states, complexes and reports."""

from __future__ import annotations

import numpy as np

from .bell import CorrelatorTensor, MeasurementSystem
from .connector import Connector, ConnectorComplex
from .numerics import StateVector


def matrix_to_json(m):
    """Row-major list of rows, each entry a [re, im] pair."""
    a = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(data):
    a = np.array(data, dtype=float)
    if a.ndim != 3 or a.shape[2] != 2:
        raise ValueError("matrix entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def vector_to_json(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def vector_from_json(data):
    a = np.array(data, dtype=float)
    return a[:, 0] + 1j * a[:, 1]


def connector_to_dict(c):
    blocks = [CorrelatorTensor(c.tensor[s]).to_dict() for s in range(c.tensor.shape[0])]
    return {"out_arity": c.out_arity, "blocks": blocks}


def connector_from_dict(data):
    blocks = [CorrelatorTensor.from_dict(b).coeffs for b in data["blocks"]]
    return Connector(np.stack(blocks))


def complex_to_dict(cx):
    refs = [
        [matrix_to_json(cx.refs.observable(k, x)) for x in range(cx.refs.arities[k])]
        for k in range(cx.q)
    ]
    return {
        "name": cx.name,
        "connector": connector_to_dict(cx.connector),
        "refs": refs,
        "V": matrix_to_json(cx.V),
        "mu": [{"b": b, "y": y, "mu": w} for (b, y), w in sorted(cx.mu.items())],
    }


def complex_from_dict(data):
    connector = connector_from_dict(data["connector"])
    refs = MeasurementSystem.from_observables(
        [[matrix_from_json(m) for m in party] for party in data["refs"]]
    )
    mu = None
    if "mu" in data:
        mu = {(int(e["b"]), int(e["y"])): float(e["mu"]) for e in data["mu"]}
    return ConnectorComplex(
        connector, refs, matrix_from_json(data["V"]), name=data.get("name", "complex"), mu=mu
    )


def state_to_dict(psi, parties=None):
    out = {"local_dims": list(psi.local_dims), "amplitudes": vector_to_json(psi.amplitudes)}
    if parties is not None:
        out["parties"] = [{"node": n, "leg": leg} for n, leg in parties]
    return out


def state_from_dict(data):
    return StateVector(tuple(data["local_dims"]), vector_from_json(data["amplitudes"]))


def mps_to_dict(factors, parties=None):
    out = {
        "factors": [
            {"site": f.site, "matrices": [matrix_to_json(m) for m in f.matrices]} for f in factors
        ]
    }
    if parties is not None:
        out["parties"] = [{"node": n, "leg": leg} for n, leg in parties]
    return out
