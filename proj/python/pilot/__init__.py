"""Linear model trees.

Features are a 2-D numeric array (columns named x1..xp unless
``feature_names`` is given) or a mapping of column name to values. String
columns are categorical.
"""

from collections.abc import Mapping

import numpy as np

from . import _pilot

__version__ = _pilot.__version__
__all__ = ["fit", "predict", "importance", "save", "load", "__version__"]


def _column(name, values):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"column '{name}' must be 1-D")
    if arr.dtype.kind in "USO":
        cells = arr.tolist()
        if all(isinstance(c, str) for c in cells):
            return name, cells
        try:
            return name, np.asarray(cells, dtype=np.float64)
        except (TypeError, ValueError):
            raise ValueError(f"column '{name}' mixes strings and numbers") from None
    if arr.dtype.kind not in "biuf":
        raise ValueError(f"column '{name}' has unsupported dtype {arr.dtype}")
    return name, arr.astype(np.float64)


def _columns(features, feature_names=None):
    if isinstance(features, Mapping) or hasattr(features, "items") and not isinstance(features, np.ndarray):
        if feature_names is not None:
            raise ValueError("feature_names only applies to array input")
        return [_column(str(k), v) for k, v in features.items()]
    arr = np.asarray(features)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"features must be 2-D (got {arr.ndim}-D)")
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(arr.shape[1])]
    if len(names) != arr.shape[1]:
        raise ValueError(f"{len(names)} feature names for {arr.shape[1]} columns")
    return [_column(n, arr[:, j]) for j, n in enumerate(names)]


def fit(features, target, *, feature_names=None, target_name="y", threads=1, **params):
    """Train a tree. ``params`` are hyperparameter names (max_depth, min_leaf, allowed_kinds, ...)."""
    y = np.asarray(target, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("target must be 1-D")
    if "allowed_kinds" in params and isinstance(params["allowed_kinds"], str):
        params["allowed_kinds"] = [k for k in params["allowed_kinds"].split(",") if k]
    return _pilot.fit(_columns(features, feature_names), y, params, target_name, threads)


def predict(model, features, *, feature_names=None):
    """Predictions as a 1-D float64 array. Columns are matched by name."""
    if feature_names is None and not isinstance(features, Mapping) and not hasattr(features, "items"):
        arr = np.asarray(features)
        width = arr.shape[-1] if arr.ndim else 0
        if width != len(model.feature_names):
            raise ValueError(f"features have {width} columns, model expects {len(model.feature_names)}")
        feature_names = model.feature_names
    return _pilot.predict(model, _columns(features, feature_names))


def importance(model):
    """Normalized importance per feature, in model column order."""
    return _pilot.importance(model)


def save(model, path):
    _pilot.save(model, str(path))


def load(path):
    return _pilot.load(str(path))
