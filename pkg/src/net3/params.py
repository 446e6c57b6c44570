"""Flatten nested parameter structures into named arrays and back.

A parameter tree is any nesting of dataclasses, dicts, lists and tuples whose
array leaves are the trainable values.  Non-array leaves (activation names,
flags) are static and survive a round trip unchanged.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .autodiff import Var

__all__ = ["tree_flatten", "tree_unflatten"]


def _key(k) -> str:
    if isinstance(k, tuple):
        return "".join(str(b) for b in k)
    return str(k)


def _is_leaf(obj) -> bool:
    return isinstance(obj, (np.ndarray, Var))


def tree_flatten(tree, prefix: str = "") -> dict:
    """Return ``{path: array}`` in a deterministic order."""
    out: dict = {}
    _flatten(tree, prefix, out)
    return out


def _join(prefix, name):
    return f"{prefix}.{name}" if prefix else str(name)


def _flatten(obj, prefix, out):
    if _is_leaf(obj):
        out[prefix] = obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            _flatten(getattr(obj, f.name), _join(prefix, f.name), out)
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(v, _join(prefix, _key(k)), out)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(v, _join(prefix, i), out)


def tree_unflatten(template, values: dict, prefix: str = ""):
    """Rebuild ``template`` with its array leaves taken from ``values``."""
    if _is_leaf(template):
        return values[prefix]
    if dataclasses.is_dataclass(template) and not isinstance(template, type):
        changes = {
            f.name: tree_unflatten(getattr(template, f.name), values, _join(prefix, f.name))
            for f in dataclasses.fields(template)
        }
        return dataclasses.replace(template, **changes)
    if isinstance(template, dict):
        return {k: tree_unflatten(v, values, _join(prefix, _key(k))) for k, v in template.items()}
    if isinstance(template, list):
        return [tree_unflatten(v, values, _join(prefix, i)) for i, v in enumerate(template)]
    if isinstance(template, tuple):
        return tuple(tree_unflatten(v, values, _join(prefix, i)) for i, v in enumerate(template))
    return template
