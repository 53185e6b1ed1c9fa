"""Two-component PCA used to flatten streams and synthetic buffers for
qualitative drift inspection.

The projection is computed from a thin SVD of the centered data. Component
signs follow a fixed convention (the entry of largest magnitude in each
component is positive), so projections are reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError


@dataclass
class Projection2D:
    coords: np.ndarray          # (n, 2)
    components: np.ndarray      # (2, d) orthonormal rows
    explained_ratio: np.ndarray  # (2,)
    mean: np.ndarray            # (d,)
    degenerate: bool            # data had rank < 2

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.mean.shape[0]:
            raise ShapeError(f"expected batch of shape (n, {self.mean.shape[0]}), got {X.shape}")
        return (X - self.mean) @ self.components.T


def pca_project_2d(X: np.ndarray) -> Projection2D:
    """Project rows of X onto their top two principal axes.

    Requires at least 3 samples and 2 feature dimensions. If the centered
    data has rank < 2 the projection is flagged degenerate and the missing
    directions contribute zero coordinates.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected (n, d) data, got shape {X.shape}")
    n, d = X.shape
    if n < 3 or d < 2:
        raise ValidationError(f"need at least 3 samples and 2 dimensions, got {X.shape}")
    mean = X.mean(axis=0)
    centered = X - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)

    scale = float(svals[0]) if svals.size else 0.0
    rank2 = svals.size >= 2 and scale > 0 and svals[1] > 1e-12 * scale
    degenerate = not rank2

    components = np.zeros((2, d))
    if scale > 0:
        components[0] = vt[0]
    if rank2:
        components[1] = vt[1]
    # fix signs: largest-magnitude entry of each component is positive
    for row in components:
        if row.any():
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0

    total = float((svals ** 2).sum())
    explained = np.zeros(2)
    if total > 0:
        explained[0] = float(svals[0] ** 2) / total
        if rank2:
            explained[1] = float(svals[1] ** 2) / total
    return Projection2D(centered @ components.T, components, explained, mean, degenerate)
