"""Versioned JSON serialization for detectors, ensembles, and run bundles.

Floats go through Python's shortest-repr JSON encoding, so numeric state
round-trips exactly. Files carry a sha256 over the canonical payload; a
mismatch (tampering, truncation) fails loading.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .detectors import DETECTOR_KINDS
from .detectors.base import Standardizer
from .detectors.iforest import TreeNode
from .ensemble import CombinerSpec, EnsembleModel, Member
from .errors import IntegrityError

SCHEMA_VERSION = 1


def _arr(a) -> list | None:
    return None if a is None else np.asarray(a).tolist()


def _tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"size": node.size}
    return {
        "size": node.size,
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(d: dict) -> TreeNode:
    if "feature" not in d:
        return TreeNode(size=d["size"])
    return TreeNode(
        size=d["size"],
        feature=d["feature"],
        threshold=d["threshold"],
        left=_tree_from_dict(d["left"]),
        right=_tree_from_dict(d["right"]),
    )


def detector_to_dict(det) -> dict:
    base = {
        "kind": det.kind,
        "n": det.n_,
        "d": det.d_,
        "scaler": det.scaler_.to_dict(),
    }
    if det.kind == "lof":
        base.update(
            k=det.k, X=_arr(det.X_), kdist=_arr(det.kdist_), lrd=_arr(det.lrd_)
        )
    elif det.kind == "iforest":
        base.update(
            n_trees=det.n_trees,
            subsample=det.subsample,
            seed=det.seed,
            m=det.m_,
            trees=[_tree_to_dict(t) for t in det.trees_],
        )
    elif det.kind == "elliptic":
        est = det.estimate_
        base.update(
            support_fraction=det.support_fraction,
            n_starts=det.n_starts,
            seed=det.seed,
            mean=_arr(est.robust_mean),
            covariance=_arr(est.robust_covariance),
            support_mask=[int(v) for v in est.support_mask],
            det_subset=est.det_subset,
            det_full=est.det_full,
            h=est.h,
        )
    elif det.kind == "ocsvm":
        base.update(
            nu=det.nu,
            gamma=det.gamma,
            gamma_fitted=det.gamma_,
            tol=det.tol,
            max_iter=det.max_iter,
            rho=det.rho_,
            sv_X=_arr(det.sv_X_),
            sv_alpha=_arr(det.sv_alpha_),
            n_iter=det.n_iter_,
        )
    elif det.kind == "ridge":
        base.update(lam=det.lam, weights=_arr(det.weights_), y_mean=det.y_mean_)
    else:
        raise IntegrityError(f"cannot serialize detector kind {det.kind!r}")
    return base


def detector_from_dict(d: dict):
    kind = d["kind"]
    if kind not in DETECTOR_KINDS:
        raise IntegrityError(f"unknown detector kind {kind!r}")
    if kind == "lof":
        det = DETECTOR_KINDS[kind](k=d["k"])
        det.X_ = np.asarray(d["X"], float)
        det.kdist_ = np.asarray(d["kdist"], float)
        det.lrd_ = np.asarray(d["lrd"], float)
    elif kind == "iforest":
        det = DETECTOR_KINDS[kind](
            n_trees=d["n_trees"], subsample=d["subsample"], seed=d["seed"]
        )
        det.m_ = d["m"]
        det.trees_ = [_tree_from_dict(t) for t in d["trees"]]
    elif kind == "elliptic":
        from .detectors.mcd import MCDEstimate

        det = DETECTOR_KINDS[kind](
            support_fraction=d["support_fraction"],
            n_starts=d["n_starts"],
            seed=d["seed"],
        )
        det.estimate_ = MCDEstimate(
            robust_mean=np.asarray(d["mean"], float),
            robust_covariance=np.asarray(d["covariance"], float),
            support_mask=np.asarray(d["support_mask"], bool),
            det_subset=d["det_subset"],
            det_full=d["det_full"],
            h=d["h"],
        )
    elif kind == "ocsvm":
        det = DETECTOR_KINDS[kind](
            nu=d["nu"], gamma=d["gamma"], tol=d["tol"], max_iter=d["max_iter"]
        )
        det.gamma_ = d["gamma_fitted"]
        det.rho_ = d["rho"]
        det.sv_X_ = np.asarray(d["sv_X"], float)
        det.sv_alpha_ = np.asarray(d["sv_alpha"], float)
        det.n_iter_ = d["n_iter"]
    elif kind == "ridge":
        det = DETECTOR_KINDS[kind](lam=d["lam"])
        det.weights_ = np.asarray(d["weights"], float)
        det.y_mean_ = d["y_mean"]
    det.n_ = d["n"]
    det.d_ = d["d"]
    det.scaler_ = Standardizer.from_dict(d["scaler"])
    return det


def ensemble_to_dict(model: EnsembleModel) -> dict:
    return {
        "kind": model.kind,
        "d": model.d,
        "target_col": model.target_col,
        "seed": model.seed,
        "members": [
            {
                "detector": detector_to_dict(m.detector),
                "feature_idx": _arr(m.feature_idx),
                "target_col": m.target_col,
                "norm_lo": m.norm_lo,
                "norm_hi": m.norm_hi,
            }
            for m in model.members
        ],
    }


def ensemble_from_dict(d: dict) -> EnsembleModel:
    members = [
        Member(
            detector=detector_from_dict(m["detector"]),
            feature_idx=np.asarray(m["feature_idx"], dtype=np.int64),
            target_col=m["target_col"],
            norm_lo=m["norm_lo"],
            norm_hi=m["norm_hi"],
        )
        for m in d["members"]
    ]
    return EnsembleModel(
        members, d["kind"], d["d"], target_col=d["target_col"], seed=d["seed"]
    )


def combiner_to_dict(spec: CombinerSpec) -> dict:
    return {"kind": spec.kind, "weights": _arr(spec.weights), "bias": spec.bias}


def combiner_from_dict(d: dict) -> CombinerSpec:
    return CombinerSpec(
        kind=d["kind"],
        weights=None if d["weights"] is None else np.asarray(d["weights"], float),
        bias=d["bias"],
    )


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def payload_checksum(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def dumps_model(payload: dict) -> str:
    env = {
        "schema_version": SCHEMA_VERSION,
        "sha256": payload_checksum(payload),
        "payload": payload,
    }
    return json.dumps(env, sort_keys=True, separators=(",", ":"), allow_nan=False)


def loads_model(text: str) -> dict:
    try:
        env = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(env, dict) or set(env) != {"schema_version", "sha256", "payload"}:
        raise IntegrityError("model file envelope is malformed")
    if env["schema_version"] != SCHEMA_VERSION:
        raise IntegrityError(
            f"unsupported schema_version {env['schema_version']!r} "
            f"(expected {SCHEMA_VERSION})"
        )
    if payload_checksum(env["payload"]) != env["sha256"]:
        raise IntegrityError("model file failed its checksum; refusing to load")
    return env["payload"]


def atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_model(path, payload: dict) -> None:
    atomic_write_text(path, dumps_model(payload))


def load_model(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
