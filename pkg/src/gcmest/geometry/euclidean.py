from __future__ import annotations

import numpy as np

from .base import Space, SpaceSpec


class Euclidean(Space):
    """Flat space R^d."""

    def __init__(self, spec: SpaceSpec) -> None:
        super().__init__(spec)
        self.point_shape = (spec.dim,)

    def dist(self, x, y):
        return np.linalg.norm(np.asarray(y, dtype=float) - x, axis=-1)

    def exp(self, x, v):
        return np.asarray(x, dtype=float) + v

    def log(self, x, y):
        return np.asarray(y, dtype=float) - x

    def transport(self, x, y, v):
        return np.array(v, dtype=float)

    def inner(self, x, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def geodesic_point(self, x, y, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if t.ndim:
            t = t[:, None]
        return (1.0 - t) * x + t * np.asarray(y, dtype=float)

    @property
    def tangent_dim(self) -> int:
        return self.spec.dim

    def tangent_basis(self, x) -> np.ndarray:
        return np.eye(self.spec.dim)

    def coords_of(self, x, v) -> np.ndarray:
        return np.array(v, dtype=float)

    def from_tangent_coords(self, x, c) -> np.ndarray:
        return np.array(c, dtype=float)

    def random_point(self, rng, scale=1.0):
        return scale * rng.normal(size=self.spec.dim)

    def extrinsic_mean(self, data):
        return np.mean(data, axis=0)
