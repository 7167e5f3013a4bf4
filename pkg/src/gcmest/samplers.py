"""Data-generating laws with a known population minimizer.

`TangentGaussian` and `GeodesicBallUniform` push a sign-symmetric tangent law
at ``center`` through Exp, so for every distance-based loss the population
minimizer is ``center`` itself. `DiscreteSupport` and `Contaminated` are
asymmetric; experiments that use them must supply their own ``x_star``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import CutLocusError, MetricTree, Space, as_space

SYMMETRIC_KINDS = ("TangentGaussian", "GeodesicBallUniform")
_KINDS = {k.lower(): k for k in (*SYMMETRIC_KINDS, "DiscreteSupport", "Contaminated")}


class TruncationWarning(UserWarning):
    pass


def _coords(p) -> tuple[float, ...]:
    return tuple(float(c) for c in np.asarray(p, dtype=float).reshape(-1))


@dataclass(frozen=True)
class SamplerSpec:
    """Sampling law on a space.

    ``center`` and the support/offset points are flat coordinate tuples.
    ``truncation`` caps the tangent radius; by default it is the injectivity
    guard, or ``pi/(4 sqrt(kappa))`` on spheres so that samples stay in a
    ball on which distance costs are geodesically convex.
    """

    kind: str
    center: tuple[float, ...] | None = None
    scale: float = 0.0
    support: tuple[tuple[tuple[float, ...], float], ...] = ()
    contamination: tuple[float, tuple[float, ...]] | None = None
    contamination_scale: float = 0.0
    truncation: float | None = None

    def __post_init__(self) -> None:
        key = self.kind.replace("_", "").replace("-", "").lower()
        if key not in _KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        object.__setattr__(self, "kind", _KINDS[key])
        if self.center is not None:
            object.__setattr__(self, "center", _coords(self.center))
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if self.kind == "DiscreteSupport":
            if not self.support:
                raise ValueError("DiscreteSupport needs at least one atom")
            sup = tuple((_coords(p), float(w)) for p, w in self.support)
            if any(w < 0 for _, w in sup) or abs(sum(w for _, w in sup) - 1.0) > 1e-9:
                raise ValueError("support weights must be nonnegative and sum to 1")
            object.__setattr__(self, "support", sup)
        elif self.center is None:
            raise ValueError(f"{self.kind} needs a center")
        if self.kind == "Contaminated":
            if self.contamination is None:
                raise ValueError("Contaminated needs (fraction, offset point)")
            frac, off = self.contamination
            if not 0 <= frac < 1:
                raise ValueError("contamination fraction must lie in [0, 1)")
            object.__setattr__(self, "contamination", (float(frac), _coords(off)))

    @property
    def symmetric(self) -> bool:
        return self.kind in SYMMETRIC_KINDS

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SamplerSpec:
        cont = obj.get("contamination")
        if isinstance(cont, dict):
            cont = (cont["fraction"], cont["offset"])
        support = obj.get("support") or ()
        support = tuple(
            (a["point"], a["weight"]) if isinstance(a, dict) else (a[0], a[1]) for a in support
        )
        return cls(
            kind=obj["kind"],
            center=obj.get("center"),
            scale=float(obj.get("scale", 0.0)),
            support=support,
            contamination=cont,
            contamination_scale=float(obj.get("contamination_scale", 0.0)),
            truncation=obj.get("truncation"),
        )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "scale": self.scale}
        if self.center is not None:
            out["center"] = list(self.center)
        if self.support:
            out["support"] = [{"point": list(p), "weight": w} for p, w in self.support]
        if self.contamination is not None:
            out["contamination"] = {
                "fraction": self.contamination[0],
                "offset": list(self.contamination[1]),
            }
            out["contamination_scale"] = self.contamination_scale
        if self.truncation is not None:
            out["truncation"] = self.truncation
        return out


def default_truncation(sp: Space) -> float:
    if sp.spec.kind == "Sphere":
        return math.pi / (4.0 * math.sqrt(sp.spec.kappa))
    return sp.guard


def _tangent_coords(kind: str, k: int, scale: float, size: int, rng):
    if kind == "TangentGaussian":
        return scale * rng.normal(size=(size, k))
    dirs = rng.normal(size=(size, k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = scale * rng.random(size) ** (1.0 / k)
    return r[:, None] * dirs


def _symmetric_batch(sp: Space, kind: str, center, scale: float, trunc: float, size: int, rng):
    if size == 0:
        return np.empty((0,) + sp.point_shape), 0
    if scale == 0:
        return np.repeat(center[None], size, axis=0), 0
    if isinstance(sp, MetricTree):
        return _tree_batch(sp, kind, center, scale, trunc, size, rng)
    k = sp.tangent_dim
    basis = sp.tangent_basis(center)
    out = np.empty((size,) + sp.point_shape)
    todo = np.arange(size)
    rejected = 0
    vectorized = sp.spec.kind != "SPDBuresWasserstein"
    while todo.size:
        c = _tangent_coords(kind, k, scale, todo.size, rng)
        ok = np.linalg.norm(c, axis=1) < trunc
        v = np.tensordot(c, basis, axes=(1, 0))
        if vectorized:
            if ok.any():
                out[todo[ok]] = sp.exp(center, v[ok])
        else:
            for i in np.flatnonzero(ok):
                try:
                    out[todo[i]] = sp.exp(center, v[i])
                except CutLocusError:
                    ok[i] = False
        rejected += int((~ok).sum())
        todo = todo[~ok]
    return out, rejected


def _tree_batch(sp: MetricTree, kind, center, scale, trunc, size, rng):
    out = np.empty((size, 2))
    rejected = 0
    for i in range(size):
        while True:
            r = abs(scale * rng.normal()) if kind == "TangentGaussian" else scale * rng.random()
            if r >= trunc:
                rejected += 1
                continue
            # walks that run past a leaf are redrawn; this conditioning keeps branch symmetry
            pt = sp.walk(center, r, rng)
            if pt is not None:
                out[i] = pt
                break
    return out, rejected


def sample(sampler: SamplerSpec, space, rng: np.random.Generator, size: int | None = None):
    """Draw one point (``size=None``) or a batch of ``size`` points."""
    sp = as_space(space)
    n = 1 if size is None else int(size)
    trunc = sampler.truncation if sampler.truncation is not None else default_truncation(sp)
    rejected = 0
    if sampler.kind == "DiscreteSupport":
        atoms = np.array([sp.from_coords(p) for p, _ in sampler.support])
        w = np.array([w for _, w in sampler.support])
        idx = rng.choice(len(atoms), size=n, p=w / w.sum())
        out = atoms[idx]
    else:
        center = sp.from_coords(sampler.center)
        if sampler.kind == "Contaminated":
            frac, off = sampler.contamination
            bad = rng.random(n) < frac
            out = np.empty((n,) + sp.point_shape)
            out[~bad], rejected = _symmetric_batch(
                sp, "TangentGaussian", center, sampler.scale, trunc, int((~bad).sum()), rng
            )
            offset = sp.from_coords(off)
            out[bad], r2 = _symmetric_batch(
                sp, "TangentGaussian", offset, sampler.contamination_scale, trunc, int(bad.sum()), rng
            )
            rejected += r2
        else:
            out, rejected = _symmetric_batch(sp, sampler.kind, center, sampler.scale, trunc, n, rng)
    if rejected and rejected / (n + rejected) > 1e-6:
        warnings.warn(
            f"{rejected} of {n + rejected} tangent draws were truncated at radius {trunc:.6g}",
            TruncationWarning,
            stacklevel=2,
        )
    return out[0] if size is None else out
