"""PCA of layer activations pooled over clips and timesteps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, TooFewRows, ValidationError
from .trialdata import TrialSet


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, D), orthonormal rows
    variance_ratio: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) @ self.components + self.mean


def fit_pca(matrix, n_components: int) -> PcaModel:
    """Centre, take the SVD, keep the leading ``n_components`` directions.

    Each component is sign-flipped so its largest-magnitude coordinate is
    positive (first one on exact ties).
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {X.shape}")
    rows, D = X.shape
    if rows < 2:
        raise TooFewRows(f"need at least 2 rows, got {rows}")
    if not 1 <= n_components <= min(rows, D):
        raise ValidationError(f"n_components must be in [1, {min(rows, D)}], got {n_components}")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    total = float(np.dot(s, s))
    if total <= 0.0 or total <= 1e-30 * max(1.0, float(np.abs(X).max()) ** 2):
        raise DegenerateData("data has zero variance")
    comps = vt[:n_components].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(n_components), pivot])
    comps *= signs[:, None]
    var = s[:n_components] ** 2
    return PcaModel(mean, comps, var / total, var / (rows - 1))


@dataclass(frozen=True, eq=False)
class LatentEmbedding:
    data: np.ndarray  # (clips, timesteps, n_components)
    variance_ratio: np.ndarray
    behavior: np.ndarray | None = None  # (clips, timesteps)
    behavior_name: str | None = None
    model: PcaModel | None = None

    def percent_labels(self) -> list[str]:
        return [f"{100 * v:.1f}%" for v in self.variance_ratio]


def project_top3(acts: TrialSet, behavior: str | None = None, n_components: int = 3) -> LatentEmbedding:
    """Flatten ``(clips, timesteps, D)`` to rows, fit PCA, and fold back.

    ``behavior`` names a channel to carry alongside the projection; it is
    excluded from the PCA input.
    """
    names = acts.channel_names
    beh = None
    cols = list(range(len(names)))
    if behavior is not None:
        bi = acts.channel_index(behavior)
        beh = acts.data[:, :, bi].copy()
        cols.remove(bi)
    D = len(cols)
    if D < n_components:
        raise ValidationError(f"need at least {n_components} activation channels, got {D}")
    T, N, _ = acts.shape
    flat = acts.data[:, :, cols].reshape(T * N, D)
    model = fit_pca(flat, n_components)
    z = model.transform(flat).reshape(T, N, n_components)
    return LatentEmbedding(z, model.variance_ratio, beh, behavior, model)
