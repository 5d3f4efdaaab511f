"""JSON documents for fitted models and fit results.

Floats are written with ``repr`` precision, so a save/load cycle reproduces
every parameter bit for bit. Loading revalidates all model invariants.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .continuous import ContinuousMixtureModel
from .discrete import DiscreteMixtureModel
from .em import FitResult

FORMAT_VERSION = 1


def model_to_dict(model) -> dict:
    doc = {
        "format": "clickmix-model",
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "n_groups": model.n_groups,
        "num_states": model.num_states,
        "weights": model.weights.tolist(),
        "initial_probs": model.initial_probs.tolist(),
    }
    if isinstance(model, ContinuousMixtureModel):
        doc["generators"] = model.generators.tolist()
    else:
        doc["variant"] = model.variant.value
        doc["transitions"] = model.transitions.tolist()
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != "clickmix-model":
        raise ValueError("not a clickmix model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    if doc["kind"] == "CM":
        return ContinuousMixtureModel(
            np.array(doc["weights"]), np.array(doc["initial_probs"]), np.array(doc["generators"])
        )
    return DiscreteMixtureModel(
        np.array(doc["weights"]), np.array(doc["initial_probs"]),
        np.array(doc["transitions"]), doc["variant"],
    )


def fit_to_dict(result: FitResult, bic_by_g: dict | None = None) -> dict:
    doc = {
        "format": "clickmix-fit",
        "version": FORMAT_VERSION,
        "model": model_to_dict(result.model),
        "loglik": result.loglik,
        "bic": result.bic,
        "iterations": result.iterations,
        "converged": result.converged,
        "chosen_start": result.chosen_start,
        "failed_starts": result.failed_starts,
        "floor_events": result.floor_events,
        "monotonicity_violations": result.monotonicity_violations,
        "loglik_trace": list(result.loglik_trace),
        "labelled": [bool(x) for x in result.labelled],
        "responsibilities": result.responsibilities.tolist(),
    }
    if bic_by_g is not None:
        doc["bic_by_g"] = {str(g): v for g, v in bic_by_g.items()}
    return doc


def fit_from_dict(doc: dict) -> FitResult:
    if doc.get("format") != "clickmix-fit":
        raise ValueError("not a clickmix fit document")
    return FitResult(
        model=model_from_dict(doc["model"]),
        responsibilities=np.array(doc["responsibilities"], dtype=float).reshape(doc["model"]["n_groups"], -1),
        loglik_trace=[float(x) for x in doc["loglik_trace"]],
        bic=float(doc["bic"]),
        iterations=int(doc["iterations"]),
        chosen_start=doc["chosen_start"],
        converged=bool(doc["converged"]),
        labelled=np.array(doc["labelled"], dtype=bool),
        floor_events=int(doc.get("floor_events", 0)),
        monotonicity_violations=int(doc.get("monotonicity_violations", 0)),
        failed_starts=int(doc.get("failed_starts", 0)),
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def save(doc: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def load(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
