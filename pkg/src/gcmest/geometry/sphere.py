from __future__ import annotations

import math
import warnings

import numpy as np

from .base import (
    POINT_TOL,
    CutLocusError,
    InvalidPointError,
    NonUniqueGeodesicWarning,
    Space,
    SpaceSpec,
)


def _complement_basis(unit: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the complement of ``unit``.

    Gram-Schmidt over the standard basis in index order, skipping the axis
    most aligned with ``unit``.
    """
    n = unit.shape[0]
    skip = int(np.argmax(np.abs(unit)))
    vecs: list[np.ndarray] = []
    for i in range(n):
        if i == skip:
            continue
        w = -unit[i] * unit
        w[i] += 1.0
        for b in vecs:
            w -= (b @ w) * b
        vecs.append(w / np.linalg.norm(w))
    return np.array(vecs)


class Sphere(Space):
    """Sphere of curvature ``kappa`` (radius ``1/sqrt(kappa)``) embedded in R^dim.

    Distance ``R*arccos(kappa <x,y>)`` is evaluated through the equivalent
    ``2R*atan2(|x-y|, |x+y|)``, which stays accurate for nearby points.
    """

    def __init__(self, spec: SpaceSpec) -> None:
        super().__init__(spec)
        self.point_shape = (spec.dim,)
        self.kappa = float(spec.kappa)
        self.radius = 1.0 / math.sqrt(self.kappa)
        self.guard = 0.99 * math.pi * self.radius

    def _check_point(self, x):
        if abs(self.kappa * (x @ x) - 1.0) > POINT_TOL:
            raise InvalidPointError("point is not on the sphere")

    def _check_tangent(self, x, v):
        if np.any(np.abs(v @ x) > POINT_TOL * max(1.0, self.radius) * (1 + np.abs(v).max())):
            raise InvalidPointError("tangent vector is not orthogonal to its base point")

    def _project(self, y):
        return self.radius * y / np.linalg.norm(y, axis=-1, keepdims=True)

    def dist(self, x, y):
        y = np.asarray(y, dtype=float)
        a = np.linalg.norm(y - x, axis=-1)
        b = np.linalg.norm(y + x, axis=-1)
        return 2.0 * self.radius * np.arctan2(a, b)

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.any(nv >= self.guard):
            raise CutLocusError(f"step length {nv.max():.6g} exceeds the guard {self.guard:.6g}")
        theta = nv / self.radius
        safe = np.where(nv > 0, nv, 1.0)
        out = np.cos(theta) * x + self.radius * np.sin(theta) * v / safe
        return self._project(out)

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = self.dist(x, y)
        if np.any(d >= self.guard):
            raise CutLocusError("points are (nearly) antipodal; log is outside the guard")
        w = y - x
        u = w - np.sum(w * x, axis=-1, keepdims=True) * x / self.radius**2
        nu = np.linalg.norm(u, axis=-1, keepdims=True)
        safe = np.where(nu > 0, nu, 1.0)
        return np.where(nu > 0, np.asarray(d)[..., None] * u / safe, 0.0)

    def inner(self, x, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def transport(self, x, y, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        u = self.log(x, y)
        d = np.linalg.norm(u)
        if d == 0.0:
            return v.copy()
        e = u / d
        theta = d / self.radius
        ev = np.sum(v * e, axis=-1, keepdims=True)
        return v + ev * ((math.cos(theta) - 1.0) * e - math.sin(theta) * x / self.radius)

    def geodesic_point(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        tt = t[:, None] if t.ndim else t
        d = float(self.dist(x, y))
        if d < self.guard:
            return self.exp(x, tt * self.log(x, y))
        theta = d / self.radius
        if math.pi - theta > 1e-7:
            # unique but beyond the log guard: spherical interpolation
            s = math.sin(theta)
            return self._project((np.sin((1 - tt) * theta) * x + np.sin(tt * theta) * y) / s)
        warnings.warn(
            "antipodal endpoints: geodesic is not unique, returning a deterministic one",
            NonUniqueGeodesicWarning,
            stacklevel=2,
        )
        e = self.tangent_basis(x)[0]
        ang = tt * math.pi
        return self._project(np.cos(ang) * x + self.radius * np.sin(ang) * e)

    @property
    def tangent_dim(self) -> int:
        return self.spec.dim - 1

    def tangent_basis(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return _complement_basis(x / np.linalg.norm(x))

    def random_point(self, rng, scale=1.0):
        z = rng.normal(size=self.spec.dim)
        return self._project(z)

    def extrinsic_mean(self, data):
        m = np.mean(data, axis=0)
        n = np.linalg.norm(m)
        if n < 1e-12:
            raise CutLocusError("extrinsic mean is at the origin; projection undefined")
        return self._project(m)
