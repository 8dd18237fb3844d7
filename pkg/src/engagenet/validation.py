"""Input validation helpers shared by the estimator-style interfaces."""

from __future__ import annotations

import numpy as np

from .network import BipartiteGraph


def as_bipartite_graph(X) -> BipartiteGraph:
    """Coerce estimator input into a :class:`BipartiteGraph`.

    Accepts a BipartiteGraph unchanged, or a 2D array-like of non-negative
    integer weights whose rows become left nodes ``row0..`` and columns right
    nodes ``col0..``.
    """
    if isinstance(X, BipartiteGraph):
        return X
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ValueError(f"expected a bipartite graph or a 2D weight matrix, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number):
        raise ValueError(f"weight matrix must be numeric, got dtype {arr.dtype}")
    if np.any(arr < 0) or np.any(arr != np.floor(arr)):
        raise ValueError("weights must be non-negative integers")
    left = tuple(f"row{i}" for i in range(arr.shape[0]))
    right = tuple(f"col{j}" for j in range(arr.shape[1]))
    weights = {
        (left[i], right[j]): int(arr[i, j])
        for i, j in zip(*np.nonzero(arr))
    }
    return BipartiteGraph(left=left, right=right, weights=weights)
