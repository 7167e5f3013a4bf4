"""Convex loss profiles, distance-based costs and their Riemannian subgradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import Space, as_space


@dataclass(frozen=True)
class LossSpec:
    """A nondecreasing convex profile ``l`` on ``[0, inf)``.

    ``power``: ``l(u) = u**p`` with ``p >= 1`` (p=2 barycenter, p=1 geometric
    median). ``huber``: ``u**2`` up to ``c``, then ``c(2u - c)``.
    """

    kind: str
    p: float | None = None
    c: float | None = None

    def __post_init__(self) -> None:
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "power":
            if self.p is None or not self.p >= 1:
                raise ValueError("power loss needs p >= 1 (p < 1 is not convex)")
            object.__setattr__(self, "p", float(self.p))
        elif kind == "huber":
            if self.c is None or not self.c > 0:
                raise ValueError("huber loss needs c > 0")
            object.__setattr__(self, "c", float(self.c))
        else:
            raise ValueError(f"unknown loss kind {self.kind!r}")

    @classmethod
    def power(cls, p: float) -> LossSpec:
        return cls("power", p=p)

    @classmethod
    def huber(cls, c: float) -> LossSpec:
        return cls("huber", c=c)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> LossSpec:
        return cls(obj["kind"], p=obj.get("p"), c=obj.get("c"))

    def to_json(self) -> dict[str, Any]:
        if self.kind == "power":
            return {"kind": "power", "p": self.p}
        return {"kind": "huber", "c": self.c}

    @property
    def is_smooth(self) -> bool:
        """Whether the gradient-descent path with line search applies (p >= 2 or Huber)."""
        return self.kind == "huber" or self.p >= 2

    @property
    def kink_slope(self) -> float:
        """Right derivative at 0; positive only for ``power(1)``."""
        return 1.0 if self.kind == "power" and self.p == 1 else 0.0

    def __str__(self) -> str:
        return f"power({self.p:g})" if self.kind == "power" else f"huber({self.c:g})"


def loss_value(loss: LossSpec, u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("loss argument must be nonnegative")
    if loss.kind == "power":
        return u**loss.p
    c = loss.c
    return np.where(u <= c, u * u, c * (2.0 * u - c))


def loss_subderivative(loss: LossSpec, u):
    """An element of the subdifferential of ``l`` at ``u``; 0 at the kink ``u=0`` of power(1)."""
    u = np.asarray(u, dtype=float)
    if loss.kind == "power":
        p = loss.p
        if p == 1:
            return np.where(u > 0, 1.0, 0.0)
        return p * u ** (p - 1)
    # l is C^1 at u=c: both one-sided derivatives are 2c
    return np.where(u <= loss.c, 2.0 * u, 2.0 * loss.c)


def cost(loss: LossSpec, space, z, x):
    """``phi(z, x) = l(d(z, x))``; ``z`` may be a batch of points."""
    sp = as_space(space)
    return loss_value(loss, sp.dist(x, z))


def _subgradients(loss: LossSpec, sp: Space, z, x):
    d = np.asarray(sp.dist(x, z), dtype=float)
    lg = sp.log(x, z)
    pos = d > 0
    coef = np.where(pos, loss_subderivative(loss, d) / np.where(pos, d, 1.0), 0.0)
    shape = coef.shape + (1,) * len(sp.point_shape)
    return -coef.reshape(shape) * lg, d


def cost_subgradient(loss: LossSpec, space, z, x):
    """Measurable subgradient ``g(z, x) = -l'(d) Log_x(z)/d`` (zero when ``z == x``).

    With a batch ``z`` the result is a batch of tangent vectors at ``x``.
    """
    g, _ = _subgradients(loss, as_space(space), z, x)
    return g


def convexity_probe(loss: LossSpec, space, z, x, y, t: float) -> float:
    """Slack ``(1-t) phi(z,x) + t phi(z,y) - phi(z, gamma(t))`` along the geodesic ``[x, y]``."""
    sp = as_space(space)
    g = sp.geodesic_point(x, y, t)
    return float(
        (1 - t) * cost(loss, sp, z, x) + t * cost(loss, sp, z, y) - cost(loss, sp, z, g)
    )


def monotonicity_probe(loss: LossSpec, space, z, x, u) -> float:
    """``<u, P_{y->x} g(z, y) - g(z, x)>_x`` with ``y = Exp_x(u)``; nonnegative for convex costs."""
    sp = as_space(space)
    y = sp.exp(x, u)
    g1 = cost_subgradient(loss, sp, z, x)
    g2 = cost_subgradient(loss, sp, z, y)
    back = sp.transport(y, x, g2)
    return float(sp.inner(x, u, back - g1))
