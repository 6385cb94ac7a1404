"""Fixed random projection lifting cursor input into an opaque feature vector."""
from __future__ import annotations

import numpy as np

from ..nn import substream

DEFAULT_FEATURE_DIM = 32
RAW_DIM = 4  # cursor x, y, and per-tick velocity


class FeatureProjection:
    """Frozen seeded matrix (D x 4); the interface never sees raw cursor values."""

    def __init__(self, seed: int, dim: int = DEFAULT_FEATURE_DIM):
        self.dim = dim
        rng = substream(seed, "feature-projection")
        self.matrix = (rng.standard_normal((dim, RAW_DIM)) / np.sqrt(RAW_DIM)).astype(
            np.float32
        )
        self._prev: tuple[float, float] | None = None

    def reset(self) -> None:
        self._prev = None

    def project(self, cursor: tuple[float, float] | None) -> np.ndarray:
        """Features for the latest cursor sample; zeros when nothing ever arrived."""
        if cursor is None:
            self._prev = None
            return np.zeros(self.dim, np.float32)
        cx, cy = float(cursor[0]), float(cursor[1])
        if self._prev is None:
            vx = vy = 0.0
        else:
            vx, vy = cx - self._prev[0], cy - self._prev[1]
        self._prev = (cx, cy)
        raw = np.array([cx, cy, vx, vy], np.float32)
        return self.matrix @ raw
