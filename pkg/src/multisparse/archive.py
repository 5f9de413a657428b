"""Model archives: a zip holding ``meta.json`` plus one ``.npy`` member per array.

Zip entries carry a fixed timestamp so identical models give identical bytes.
Arrays are stored at full precision; the exact-GP Cholesky factor is
recomputed on load from the stored data and hyperparameters. Wall-clock
timings (``info["timing"]``) are left out so that retraining with the same seed
reproduces the archive byte for byte.
"""

import io
import json
import zipfile

import numpy as np

from multisparse.cluster import LocalModelSpec, Partition
from multisparse.errors import ConfigError
from multisparse.gp import Dataset, TrainedGP, cov_matrix, factor_noisy
from multisparse.kernel import Hyperparameters
from multisparse.lgp import TrainedLGP
from multisparse.msgp import TrainedMSGP
from multisparse.quadsim.sim import ResidualModel
from multisparse.spgp import TrainedSPGP

FORMAT = "multisparse-archive"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if obj is None or isinstance(obj, (str, int, float, bool)):
        return obj
    return str(obj)


class _Writer:
    def __init__(self):
        self.arrays = {}

    def put(self, key, arr):
        self.arrays[key] = np.ascontiguousarray(arr)
        return key


def _enc_hyper(h):
    return {"signal_variance": h.signal_variance, "noise_variance": h.noise_variance,
            "length_scales": h.length_scales.tolist()}


def _dec_hyper(d):
    return Hyperparameters(d["signal_variance"], d["noise_variance"], d["length_scales"])


def _enc_partition(part, w, prefix):
    return {"strategy": part.strategy, "M": part.M,
            "members": [w.put(f"{prefix}/members{j}", s.member_indices)
                        for j, s in enumerate(part.models)],
            "centers": w.put(f"{prefix}/centers", part.centers)}


def _dec_partition(d, arrays):
    C = arrays[d["centers"]]
    models = [LocalModelSpec(arrays[k], C[j], int(arrays[k].size))
              for j, k in enumerate(d["members"])]
    return Partition(models, d["strategy"], int(d["M"]))


def _encode(model, w, prefix):
    if isinstance(model, TrainedGP):
        return {"kind": "gp", "hyper": _enc_hyper(model.hyper), "y_mean": model.y_mean,
                "X": w.put(f"{prefix}/X", model.data.inputs),
                "y": w.put(f"{prefix}/y", model.data.targets),
                "alpha": w.put(f"{prefix}/alpha", model.alpha),
                "info": _jsonable(model.info)}
    if isinstance(model, TrainedSPGP):
        keys = {name: w.put(f"{prefix}/{name}", getattr(model, name))
                for name in ("pseudo", "chol_m", "chol_a", "lam", "weights")}
        keys.update(X=w.put(f"{prefix}/X", model.data.inputs),
                    y=w.put(f"{prefix}/y", model.data.targets))
        return {"kind": "spgp", "hyper": _enc_hyper(model.hyper), "y_mean": model.y_mean,
                "arrays": keys, "info": _jsonable(model.info)}
    if isinstance(model, TrainedLGP):
        return {"kind": "lgp", "hyper": _enc_hyper(model.global_hyper),
                "neighbor_count": model.neighbor_count,
                "partition": _enc_partition(model.partition, w, f"{prefix}/partition"),
                "models": [_encode(m, w, f"{prefix}/m{j}") for j, m in enumerate(model.per_model)],
                "info": _jsonable(model.info)}
    if isinstance(model, TrainedMSGP):
        return {"kind": "msgp", "neighbor_count": model.neighbor_count,
                "partition": _enc_partition(model.partition, w, f"{prefix}/partition"),
                "models": [_encode(m, w, f"{prefix}/m{j}") for j, m in enumerate(model.per_model)],
                "info": _jsonable(model.info)}
    if isinstance(model, ResidualModel):
        return {"kind": "residual", "method": model.method, "info": _jsonable(model.info),
                "regressors": [_encode(r, w, f"{prefix}/r{j}")
                               for j, r in enumerate(model.regressors)]}
    raise TypeError(f"cannot archive {type(model).__name__}")


def _decode(d, arrays):
    kind = d["kind"]
    if kind == "gp":
        data = Dataset(arrays[d["X"]], arrays[d["y"]])
        h = _dec_hyper(d["hyper"])
        L = factor_noisy(cov_matrix(data.inputs, data.inputs, h), h)
        return TrainedGP(data, h, L, arrays[d["alpha"]], d["y_mean"], d.get("info", {}))
    if kind == "spgp":
        a = {k: arrays[v] for k, v in d["arrays"].items()}
        return TrainedSPGP(Dataset(a["X"], a["y"]), a["pseudo"], _dec_hyper(d["hyper"]),
                           a["chol_m"], a["chol_a"], a["lam"], a["weights"], d["y_mean"],
                           d.get("info", {}))
    if kind == "lgp":
        return TrainedLGP(_dec_partition(d["partition"], arrays),
                          [_decode(m, arrays) for m in d["models"]], _dec_hyper(d["hyper"]),
                          d["neighbor_count"], d.get("info", {}))
    if kind == "msgp":
        return TrainedMSGP(_dec_partition(d["partition"], arrays),
                           [_decode(m, arrays) for m in d["models"]], d["neighbor_count"],
                           d.get("info", {}))
    if kind == "residual":
        return ResidualModel([_decode(r, arrays) for r in d["regressors"]], d["method"],
                             d.get("info", {}))
    raise ConfigError(f"unknown archive entry kind {kind!r}")


def _write_member(zf, name, payload):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, payload)


def save_archive(path, model):
    w = _Writer()
    meta = {"format": FORMAT, "version": VERSION, "model": _encode(model, w, "root")}
    with zipfile.ZipFile(path, "w") as zf:
        _write_member(zf, "meta.json", json.dumps(meta, indent=1, sort_keys=True))
        for key in sorted(w.arrays):
            buf = io.BytesIO()
            np.save(buf, w.arrays[key], allow_pickle=False)
            _write_member(zf, f"arrays/{key}.npy", buf.getvalue())


def load_archive(path):
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            arrays = {}
            for name in zf.namelist():
                if name.startswith("arrays/") and name.endswith(".npy"):
                    arrays[name[len("arrays/"):-4]] = np.load(io.BytesIO(zf.read(name)),
                                                              allow_pickle=False)
    except (OSError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read archive {path}: {exc}") from exc
    if meta.get("format") != FORMAT:
        raise ConfigError(f"{path} is not a {FORMAT}")
    return _decode(meta["model"], arrays)
