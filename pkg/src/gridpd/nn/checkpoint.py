"""Model persistence.

A checkpoint directory holds ``manifest.json`` (architecture, input
normalization, parameter inventory) plus one little-endian float32 blob
per parameter tensor under ``params/``. A bundle directory holds the
base checkpoint, one ``cluster_<id>/`` checkpoint per fine-tuned
cluster, and the selection / cluster-model JSON they were built with.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..cluster import FrequencyKMeans, load_cluster_model, save_cluster_model
from ..errors import IoFailureError, MissingFileError
from ..freqfeat import load_selection, save_selection
from .model import CompositeClassifier
from .train import ModelBundle


def save_model(model: CompositeClassifier, directory) -> None:
    directory = Path(directory)
    try:
        (directory / "params").mkdir(parents=True, exist_ok=True)
        with open(directory / "manifest.json", "w") as fh:
            json.dump(model.to_manifest(), fh, indent=2)
        for name, tensor in model.params.items():
            blob = np.ascontiguousarray(tensor, dtype="<f4")
            (directory / "params" / f"{name}.bin").write_bytes(blob.tobytes())
    except OSError as exc:
        raise IoFailureError(f"cannot write checkpoint {directory}: {exc}") from exc


def load_model(directory) -> CompositeClassifier:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise MissingFileError(f"no checkpoint at {directory}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    arrays = {}
    for entry in manifest["params"]:
        raw = (directory / "params" / f"{entry['name']}.bin").read_bytes()
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        arrays[entry["name"]] = arr.reshape(entry["shape"])
    return CompositeClassifier.from_manifest(manifest, arrays)


def save_bundle(bundle: ModelBundle, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(bundle.base, directory / "base")
    for cid, model in sorted(bundle.per_cluster.items()):
        save_model(model, directory / f"cluster_{cid}")
    if bundle.cluster_model is not None:
        save_cluster_model(bundle.cluster_model, directory / "cluster_model.json")
    if bundle.selection is not None:
        save_selection(bundle.selection, directory / "selection.json")


def load_bundle(directory) -> ModelBundle:
    directory = Path(directory)
    if not (directory / "base").exists():
        raise MissingFileError(f"no bundle at {directory}")
    bundle = ModelBundle(base=load_model(directory / "base"))
    for sub in sorted(directory.glob("cluster_*")):
        if sub.is_dir():
            cid = int(sub.name.split("_", 1)[1])
            bundle.per_cluster[cid] = load_model(sub)
    cm_path = directory / "cluster_model.json"
    if cm_path.exists():
        bundle.cluster_model = load_cluster_model(cm_path)
    sel_path = directory / "selection.json"
    if sel_path.exists():
        bundle.selection = load_selection(sel_path)
    return bundle
