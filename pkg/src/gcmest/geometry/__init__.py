"""Geodesic spaces: distances, Exp/Log, parallel transport and geodesics.

The module-level functions take a `SpaceSpec` (or an already built `Space`)
and validate their point arguments; the `Space` methods skip validation and
are what the numerical code calls in inner loops.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .base import (
    CutLocusError,
    GeometryError,
    InvalidPointError,
    NonUniqueGeodesicWarning,
    Space,
    SpaceMismatchError,
    SpaceSpec,
    TreeSpec,
    UnsupportedOperationError,
)
from .euclidean import Euclidean
from .hyperbolic import Hyperbolic, minkowski
from .sphere import Sphere
from .spd import SPDAffine, SPDBuresWasserstein, geometric_mean
from .tree import MetricTree

__all__ = [
    "CutLocusError",
    "Euclidean",
    "GeometryError",
    "Hyperbolic",
    "InvalidPointError",
    "MetricTree",
    "NonUniqueGeodesicWarning",
    "SPDAffine",
    "SPDBuresWasserstein",
    "Space",
    "SpaceMismatchError",
    "SpaceSpec",
    "Sphere",
    "TreeSpec",
    "UnsupportedOperationError",
    "as_space",
    "dist",
    "exp",
    "geodesic_point",
    "geometric_mean",
    "inner",
    "log",
    "make_space",
    "minkowski",
    "tangent_dim",
    "transport",
]

_CLASSES = {
    "Euclidean": Euclidean,
    "Sphere": Sphere,
    "Hyperbolic": Hyperbolic,
    "SPDAffine": SPDAffine,
    "SPDBuresWasserstein": SPDBuresWasserstein,
    "MetricTree": MetricTree,
}


@lru_cache(maxsize=64)
def make_space(spec: SpaceSpec) -> Space:
    return _CLASSES[spec.kind](spec)


def as_space(space: SpaceSpec | Space) -> Space:
    if isinstance(space, Space):
        return space
    if isinstance(space, SpaceSpec):
        return make_space(space)
    if isinstance(space, dict):
        return make_space(SpaceSpec.from_json(space))
    raise TypeError(f"expected a SpaceSpec or Space, got {type(space).__name__}")


def _decode(sp: Space, a) -> np.ndarray:
    """Accept flat row-major coordinates for matrix-valued encodings."""
    a = np.asarray(a, dtype=float)
    shape = sp.point_shape
    if len(shape) > 1 and a.ndim >= 1 and a.shape[-1] == int(np.prod(shape)) and a.shape[-len(shape):] != shape:
        a = a.reshape(a.shape[:-1] + shape)
    return a


def _point(sp: Space, x):
    x = _decode(sp, x)
    if sp.is_batch(x):
        return sp.validate_points(x)
    return sp.validate_point(x)


def _single(sp: Space, x) -> np.ndarray:
    return sp.validate_point(_decode(sp, x))


def dist(space, x, y):
    sp = as_space(space)
    return sp.dist(_single(sp, x), _point(sp, y))


def exp(space, x, v):
    sp = as_space(space)
    x = _single(sp, x)
    return sp.exp(x, sp.validate_tangent(x, _decode(sp, v)))


def log(space, x, y):
    sp = as_space(space)
    return sp.log(_single(sp, x), _point(sp, y))


def transport(space, x, y, v):
    sp = as_space(space)
    x = _single(sp, x)
    return sp.transport(x, _single(sp, y), sp.validate_tangent(x, _decode(sp, v)))


def inner(space, x, u, v):
    sp = as_space(space)
    x = _single(sp, x)
    return sp.inner(x, sp.validate_tangent(x, _decode(sp, u)), sp.validate_tangent(x, _decode(sp, v)))


def geodesic_point(space, x, y, t):
    sp = as_space(space)
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 1)):
        raise GeometryError("t must lie in [0, 1]")
    return sp.geodesic_point(_single(sp, x), _single(sp, y), t)


def tangent_dim(space) -> int:
    return as_space(space).tangent_dim
