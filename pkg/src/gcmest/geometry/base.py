"""Space specifications, the abstract `Space` interface and shared errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

POINT_TOL = 1e-9


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class InvalidPointError(GeometryError):
    pass


class CutLocusError(GeometryError):
    """Raised when an input leaves the injectivity guard of a space."""


class SpaceMismatchError(GeometryError):
    pass


class UnsupportedOperationError(GeometryError):
    """The operation has no meaning on this space (e.g. Exp on a metric tree)."""


class NonUniqueGeodesicWarning(UserWarning):
    pass


_KINDS = {
    "euclidean": "Euclidean",
    "sphere": "Sphere",
    "hyperbolic": "Hyperbolic",
    "spdaffine": "SPDAffine",
    "spdbureswasserstein": "SPDBuresWasserstein",
    "metrictree": "MetricTree",
}


def canonical_kind(kind: str) -> str:
    key = kind.replace("_", "").replace("-", "").replace(" ", "").lower()
    try:
        return _KINDS[key]
    except KeyError:
        raise GeometryError(f"unknown space kind {kind!r}") from None


@dataclass(frozen=True)
class TreeSpec:
    """Weighted tree: edge ``i`` is ``edges[i] = (u, v, length)``."""

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...]

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> TreeSpec:
        edges = []
        for e in obj["edges"]:
            if isinstance(e, dict):
                edges.append((int(e["u"]), int(e["v"]), float(e["length"])))
            else:
                u, v, length = e
                edges.append((int(u), int(v), float(length)))
        if "nodes" in obj:
            nodes = tuple(int(n) for n in obj["nodes"])
        else:
            nodes = tuple(sorted({n for u, v, _ in edges for n in (u, v)}))
        return cls(nodes=nodes, edges=tuple(edges))

    def to_json(self) -> dict[str, Any]:
        return {"nodes": list(self.nodes), "edges": [[u, v, w] for u, v, w in self.edges]}

    @classmethod
    def star(cls, legs: int = 3, length: float = 1.0) -> TreeSpec:
        """Hub node 0 joined to leaves ``1..legs``."""
        return cls(
            nodes=tuple(range(legs + 1)),
            edges=tuple((0, i, float(length)) for i in range(1, legs + 1)),
        )


@dataclass(frozen=True)
class SpaceSpec:
    """Identifies one geodesic space and its parameters.

    ``dim`` is the length of the flat coordinate encoding of a point: the
    ambient dimension for Euclidean/Sphere/Hyperbolic, ``p*p`` for the SPD
    kinds and 2 for metric trees ``(edge id, offset)``.
    """

    kind: str
    dim: int
    kappa: float | None = None
    spectral_floor: float | None = None
    tree: TreeSpec | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if int(self.dim) != self.dim or self.dim < 1:
            raise GeometryError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        k = self.kind
        if k == "Sphere" and not (self.kappa is not None and self.kappa > 0):
            raise GeometryError("Sphere requires kappa > 0")
        if k == "Hyperbolic" and not (self.kappa is not None and self.kappa < 0):
            raise GeometryError("Hyperbolic requires kappa < 0")
        if k in ("Sphere", "Hyperbolic") and self.dim < 2:
            raise GeometryError(f"{k} needs at least 2 ambient coordinates")
        if k in ("SPDAffine", "SPDBuresWasserstein"):
            p = math.isqrt(self.dim)
            if p * p != self.dim:
                raise GeometryError("SPD kinds require dim = p*p")
        if k == "SPDBuresWasserstein" and not (
            self.spectral_floor is not None and self.spectral_floor > 0
        ):
            raise GeometryError("SPDBuresWasserstein requires spectral_floor > 0")
        if k == "MetricTree" and self.tree is None:
            raise GeometryError("MetricTree requires a tree description")

    # convenience constructors
    @classmethod
    def euclidean(cls, dim: int) -> SpaceSpec:
        return cls("Euclidean", dim)

    @classmethod
    def sphere(cls, dim: int = 3, kappa: float = 1.0) -> SpaceSpec:
        return cls("Sphere", dim, kappa=kappa)

    @classmethod
    def hyperbolic(cls, dim: int = 3, kappa: float = -1.0) -> SpaceSpec:
        return cls("Hyperbolic", dim, kappa=kappa)

    @classmethod
    def spd_affine(cls, p: int) -> SpaceSpec:
        return cls("SPDAffine", p * p)

    @classmethod
    def spd_bures_wasserstein(cls, p: int, spectral_floor: float) -> SpaceSpec:
        return cls("SPDBuresWasserstein", p * p, spectral_floor=spectral_floor)

    @classmethod
    def metric_tree(cls, tree: TreeSpec) -> SpaceSpec:
        return cls("MetricTree", 2, tree=tree)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SpaceSpec:
        tree = obj.get("tree")
        kind = canonical_kind(obj["kind"])
        dim = obj.get("dim", 2 if kind == "MetricTree" else None)
        if dim is None:
            raise GeometryError("space spec is missing 'dim'")
        return cls(
            kind=kind,
            dim=dim,
            kappa=obj.get("kappa"),
            spectral_floor=obj.get("spectral_floor"),
            tree=TreeSpec.from_json(tree) if tree is not None else None,
        )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "dim": self.dim}
        if self.kappa is not None:
            out["kappa"] = self.kappa
        if self.spectral_floor is not None:
            out["spectral_floor"] = self.spectral_floor
        if self.tree is not None:
            out["tree"] = self.tree.to_json()
        return out


class Space:
    """A geodesic space with (where defined) its Riemannian primitives.

    Points and tangent vectors are numpy arrays of shape ``point_shape``.
    The first argument ``x`` of every method is a single point; the other
    point/vector arguments may carry one extra leading batch axis, in which
    case the result is batched too.
    """

    spec: SpaceSpec
    point_shape: tuple[int, ...]
    guard: float = math.inf
    has_tangent: bool = True

    def __init__(self, spec: SpaceSpec) -> None:
        self.spec = spec

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec!r})"

    # -- encoding ---------------------------------------------------------
    def from_coords(self, coords) -> np.ndarray:
        """Flat (row-major) coordinates, optionally batched, to the array encoding."""
        arr = np.asarray(coords, dtype=float)
        k = len(self.point_shape)
        if arr.ndim >= k and arr.shape[arr.ndim - k:] == self.point_shape:
            return arr
        n = int(np.prod(self.point_shape))
        if arr.ndim == 0 or arr.shape[-1] != n:
            raise InvalidPointError(f"expected {n} coordinates, got shape {arr.shape}")
        return arr.reshape(arr.shape[:-1] + self.point_shape)

    def to_coords(self, x) -> list:
        arr = np.asarray(x, dtype=float)
        batch = arr.shape[: arr.ndim - len(self.point_shape)]
        return arr.reshape(batch + (-1,)).tolist()

    def is_batch(self, y) -> bool:
        return np.ndim(y) > len(self.point_shape)

    # -- validation -------------------------------------------------------
    def validate_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.point_shape:
            raise SpaceMismatchError(f"point shape {x.shape} != {self.point_shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidPointError("non-finite coordinates")
        self._check_point(x)
        return x

    def validate_points(self, ys) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        if ys.shape[1:] != self.point_shape:
            raise InvalidPointError(f"batch shape {ys.shape} incompatible with {self.point_shape}")
        for y in ys:
            self.validate_point(y)
        return ys

    def validate_tangent(self, x, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-len(self.point_shape):] != self.point_shape:
            raise GeometryError(f"tangent shape {v.shape} incompatible with {self.point_shape}")
        self._check_tangent(x, v)
        return v

    def _check_point(self, x: np.ndarray) -> None:
        pass

    def _check_tangent(self, x: np.ndarray, v: np.ndarray) -> None:
        pass

    # -- primitives -------------------------------------------------------
    def dist(self, x, y):
        raise NotImplementedError

    def exp(self, x, v):
        raise UnsupportedOperationError(f"exp is not defined on {self.spec.kind}")

    def log(self, x, y):
        raise UnsupportedOperationError(f"log is not defined on {self.spec.kind}")

    def transport(self, x, y, v):
        raise UnsupportedOperationError(f"transport is not defined on {self.spec.kind}")

    def inner(self, x, u, v):
        raise UnsupportedOperationError(f"inner is not defined on {self.spec.kind}")

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def geodesic_point(self, x, y, t):
        """Point at fraction ``t`` along the minimizing geodesic; ``t`` may be an array."""
        t = np.asarray(t, dtype=float)
        v = self.log(x, y)
        if t.ndim == 0:
            return self.exp(x, float(t) * v)
        return self.exp(x, t.reshape((-1,) + (1,) * len(self.point_shape)) * v)

    @property
    def tangent_dim(self) -> int:
        raise UnsupportedOperationError(f"{self.spec.kind} has no global tangent dimension")

    def tangent_basis(self, x) -> np.ndarray:
        """Orthonormal basis of ``T_x``, stacked along axis 0."""
        raise UnsupportedOperationError(f"{self.spec.kind} has no tangent spaces")

    def zero_tangent(self, x) -> np.ndarray:
        return np.zeros(self.point_shape)

    def coords_of(self, x, v) -> np.ndarray:
        """Coordinates of ``v`` (possibly batched) in ``tangent_basis(x)``."""
        basis = self.tangent_basis(x)
        return np.stack([self.inner(x, e, v) for e in basis], axis=-1)

    def from_tangent_coords(self, x, c) -> np.ndarray:
        basis = self.tangent_basis(x)
        return np.tensordot(np.asarray(c, dtype=float), basis, axes=(-1, 0))

    # -- random generation (tests, self-checks) ---------------------------
    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        raise NotImplementedError

    def random_tangent(self, x, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        c = rng.normal(size=self.tangent_dim)
        return scale * self.from_tangent_coords(x, c)

    def extrinsic_mean(self, data: np.ndarray) -> np.ndarray:
        raise UnsupportedOperationError(f"no extrinsic mean projection on {self.spec.kind}")
