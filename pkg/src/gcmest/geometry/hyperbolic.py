from __future__ import annotations

import math

import numpy as np

from .base import POINT_TOL, InvalidPointError, Space, SpaceSpec


def minkowski(u, v):
    """Lorentzian form ``u_1 v_1 + ... + u_{n-1} v_{n-1} - u_n v_n`` along the last axis."""
    prod = np.asarray(u) * np.asarray(v)
    return np.sum(prod[..., :-1], axis=-1) - prod[..., -1]


class Hyperbolic(Space):
    """Hyperboloid model ``{<x,x> = 1/kappa, x_n > 0}`` of curvature ``kappa < 0``.

    Distances use ``2R*asinh(sqrt(<y-x,y-x>)/(2R))``, the cancellation-free
    form of ``R*arccosh(-kappa <x,y>)``.
    """

    def __init__(self, spec: SpaceSpec) -> None:
        super().__init__(spec)
        self.point_shape = (spec.dim,)
        self.kappa = float(spec.kappa)
        self.radius = 1.0 / math.sqrt(-self.kappa)

    @property
    def origin(self) -> np.ndarray:
        o = np.zeros(self.spec.dim)
        o[-1] = self.radius
        return o

    def _check_point(self, x):
        if abs(minkowski(x, x) - 1.0 / self.kappa) > POINT_TOL * max(1.0, float(x @ x)):
            raise InvalidPointError("point is not on the hyperboloid")
        if x[-1] <= 0:
            raise InvalidPointError("point is on the lower sheet")

    def _check_tangent(self, x, v):
        if np.any(np.abs(minkowski(x, v)) > POINT_TOL * max(1.0, float(x @ x)) * (1 + np.abs(v).max())):
            raise InvalidPointError("tangent vector is not Minkowski-orthogonal to its base point")

    def _renormalize(self, y):
        q = -minkowski(y, y)
        return self.radius * y / np.sqrt(q)[..., None]

    def _tproj(self, x, w):
        return w + minkowski(x, w)[..., None] * x / self.radius**2

    def dist(self, x, y):
        w = np.asarray(y, dtype=float) - x
        q = np.maximum(minkowski(w, w), 0.0)
        return 2.0 * self.radius * np.arcsinh(np.sqrt(q) / (2.0 * self.radius))

    def inner(self, x, u, v):
        return minkowski(u, v)

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = np.sqrt(np.maximum(minkowski(v, v), 0.0))[..., None]
        theta = nv / self.radius
        safe = np.where(nv > 0, nv, 1.0)
        out = np.cosh(theta) * x + self.radius * np.sinh(theta) * v / safe
        return self._renormalize(out)

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = self.dist(x, y)
        u = self._tproj(x, y - x)
        nu = np.sqrt(np.maximum(minkowski(u, u), 0.0))[..., None]
        safe = np.where(nu > 0, nu, 1.0)
        return np.where(nu > 0, np.asarray(d)[..., None] * u / safe, 0.0)

    def transport(self, x, y, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        u = self.log(x, y)
        d = math.sqrt(max(float(minkowski(u, u)), 0.0))
        if d == 0.0:
            return v.copy()
        e = u / d
        theta = d / self.radius
        ev = minkowski(e, v)[..., None]
        return v + ev * ((math.cosh(theta) - 1.0) * e + math.sinh(theta) * x / self.radius)

    @property
    def tangent_dim(self) -> int:
        return self.spec.dim - 1

    def tangent_basis(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.spec.dim
        vecs: list[np.ndarray] = []
        for i in range(n - 1):
            e = np.zeros(n)
            e[i] = 1.0
            w = self._tproj(x, e)
            for b in vecs:
                w = w - minkowski(b, w) * b
            vecs.append(w / math.sqrt(minkowski(w, w)))
        return np.array(vecs)

    def random_point(self, rng, scale=1.0):
        o = self.origin
        return self.exp(o, self.from_tangent_coords(o, scale * rng.normal(size=self.tangent_dim)))

    def extrinsic_mean(self, data):
        # the upper sheet's convex hull lies inside the future cone
        return self._renormalize(np.mean(data, axis=0))
