"""Randomized property suites for geometry, losses and CAT comparison.

Each suite returns a list of `Check` records holding the worst value seen
over all random cases and the threshold it is held to. The CLI and the
acceptance tests both drive these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .cat_model import cat_check, strong_convexity_alpha, strong_convexity_probe
from .geometry import CutLocusError, MetricTree, Space, as_space
from .geometry.spd import geometric_mean
from .losses import LossSpec, cost, cost_subgradient, monotonicity_probe


@dataclass
class Check:
    name: str
    worst: float
    threshold: float
    cases: int
    # "max": worst must not exceed threshold; "min": worst must not fall below it
    sense: str = "max"

    @property
    def passed(self) -> bool:
        if self.sense == "max":
            return bool(self.worst <= self.threshold)
        return bool(self.worst >= self.threshold)

    def line(self) -> str:
        op = "<=" if self.sense == "max" else ">="
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.worst:.3e} {op} {self.threshold:.1e} over {self.cases} cases"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "worst": self.worst,
            "threshold": self.threshold,
            "cases": self.cases,
            "passed": self.passed,
        }


def ball_radius(sp: Space) -> float:
    """Radius of a ball on which distance costs are geodesically convex."""
    if sp.spec.kind == "Sphere":
        return 0.7 * math.pi / (4.0 * math.sqrt(sp.spec.kappa))
    if sp.spec.kind == "Hyperbolic":
        return 1.5 / math.sqrt(-sp.spec.kappa)
    return 1.5


def _in_ball(sp: Space, center, radius: float, rng) -> np.ndarray:
    v = sp.random_tangent(center, rng)
    nv = float(sp.norm(center, v))
    if nv == 0:
        return center.copy()
    v = v * (radius * rng.random() / nv)
    # Bures-Wasserstein exp has a bounded domain; shrink until the step is admissible
    for _ in range(60):
        try:
            return sp.exp(center, v)
        except CutLocusError:
            v = 0.5 * v
    return center.copy()


def geometry_suite(space, n: int = 10_000, seed: int = 0) -> list[Check]:
    sp = as_space(space)
    rng = rng_mod.stream(seed, rng_mod.GRID_CHECK, 0)
    if isinstance(sp, MetricTree):
        return _tree_geometry_suite(sp, n, rng)
    radius = ball_radius(sp)
    roundtrip = iso = speed = mid = 0.0
    is_affine = sp.spec.kind == "SPDAffine"
    for _ in range(n):
        c = sp.random_point(rng)
        x = _in_ball(sp, c, radius, rng)
        y = _in_ball(sp, c, radius, rng)
        v = sp.log(x, y)
        roundtrip = max(
            roundtrip,
            float(np.max(np.abs(sp.exp(x, v) - y))),
            float(sp.norm(x, sp.log(x, sp.exp(x, v)) - v)),
        )
        u = sp.random_tangent(x, rng)
        w = sp.random_tangent(x, rng)
        pu, pw = sp.transport(x, y, u), sp.transport(x, y, w)
        iso = max(iso, abs(float(sp.inner(y, pu, pw)) - float(sp.inner(x, u, w))),
                  abs(float(sp.norm(y, pu)) - float(sp.norm(x, u))))
        s, t = sorted(rng.random(2))
        d = float(sp.dist(x, y))
        gs, gt = sp.geodesic_point(x, y, s), sp.geodesic_point(x, y, t)
        speed = max(speed, abs(float(sp.dist(gs, gt)) - (t - s) * d))
        if is_affine:
            mid = max(mid, float(np.linalg.norm(sp.geodesic_point(x, y, 0.5) - geometric_mean(x, y))))
    checks = [
        Check("exp/log roundtrip", roundtrip, 1e-8, n),
        Check("transport isometry", iso, 1e-10, n),
        Check("geodesic speed", speed, 1e-8, n),
    ]
    if is_affine:
        checks.append(Check("SPD midpoint equals A#B", mid, 1e-9, n))
    return checks


def _tree_geometry_suite(sp: MetricTree, n: int, rng) -> list[Check]:
    speed = tri = 0.0
    for _ in range(n):
        x, y, z = (sp.random_point(rng) for _ in range(3))
        s, t = sorted(rng.random(2))
        d = float(sp.dist(x, y))
        speed = max(speed, abs(float(sp.dist(sp.geodesic_point(x, y, s), sp.geodesic_point(x, y, t))) - (t - s) * d))
        tri = max(tri, d - float(sp.dist(x, z)) - float(sp.dist(z, y)))
    return [
        Check("geodesic speed", speed, 1e-8, n),
        Check("triangle inequality excess", tri, 1e-12, n),
    ]


def loss_suite(space, loss: LossSpec, n: int = 10_000, seed: int = 0) -> list[Check]:
    """Subgradient inequality, subgradient monotonicity and geodesic convexity of the cost."""
    sp = as_space(space)
    rng = rng_mod.stream(seed, rng_mod.GRID_CHECK, 1)
    radius = ball_radius(sp) / 3.0
    ineq = mono = conv = math.inf
    for _ in range(n):
        c = sp.random_point(rng)
        z, x, y = (_in_ball(sp, c, radius, rng) for _ in range(3))
        u = sp.log(x, y)
        g = cost_subgradient(loss, sp, z, x)
        gap = float(cost(loss, sp, z, y) - cost(loss, sp, z, x) - sp.inner(x, g, u))
        ineq = min(ineq, gap / (1.0 + float(sp.norm(x, u))))
        mono = min(mono, monotonicity_probe(loss, sp, z, x, u))
        t = float(rng.random())
        gt = sp.geodesic_point(x, y, t)
        conv = min(conv, float((1 - t) * cost(loss, sp, z, x) + t * cost(loss, sp, z, y) - cost(loss, sp, z, gt)))
    return [
        Check(f"subgradient inequality [{loss}]", ineq, -1e-8, n, "min"),
        Check(f"subgradient monotonicity [{loss}]", mono, -1e-9, n, "min"),
        Check(f"cost convexity [{loss}]", conv, -1e-9, n, "min"),
    ]


def strong_convexity_suite(space, kappa: float, D: float, n: int = 10_000, seed: int = 0) -> Check:
    """Minimum strong-convexity slack over random triples in a ball of radius ``D/2``."""
    sp = as_space(space)
    rng = rng_mod.stream(seed, rng_mod.GRID_CHECK, 2)
    worst = math.inf
    for _ in range(n):
        c = sp.random_point(rng)
        x0, x, y = (_in_ball(sp, c, 0.5 * D, rng) for _ in range(3))
        worst = min(worst, strong_convexity_probe(sp, x0, x, y, float(rng.random()), D, kappa))
    alpha = strong_convexity_alpha(D, kappa)
    return Check(f"strong convexity slack (alpha={alpha:.6g})", worst, -1e-9 if kappa > 0 else -1e-12, n, "min")


def random_triangle(sp: Space, rng, radius: float):
    if isinstance(sp, MetricTree):
        return tuple(sp.random_point(rng) for _ in range(3))
    c = sp.random_point(rng)
    return tuple(_in_ball(sp, c, radius, rng) for _ in range(3))


def cat_suite(space, kappa: float, n: int = 1000, seed: int = 0, grid_n: int = 32,
              radius: float | None = None) -> dict:
    """Run `cat_check` on ``n`` random triangles; returns counts and the worst excess."""
    sp = as_space(space)
    rng = rng_mod.stream(seed, rng_mod.GRID_CHECK, 3)
    radius = 0.5 * ball_radius(sp) if radius is None else radius
    worst = -math.inf
    violations = nondegenerate = nondegenerate_violations = 0
    for _ in range(n):
        x, y, z = random_triangle(sp, rng, radius)
        rep = cat_check(sp, x, y, z, kappa, grid_n=grid_n)
        worst = max(worst, rep.max_excess)
        a, b, c = float(sp.dist(x, y)), float(sp.dist(x, z)), float(sp.dist(y, z))
        slack = min(a + b - c, a + c - b, b + c - a)
        nondeg = slack > 1e-3 * (a + b + c)
        violations += not rep.passed
        nondegenerate += nondeg
        nondegenerate_violations += nondeg and rep.max_excess > 0 and not rep.passed
    return {
        "kappa": kappa,
        "triangles": n,
        "max_excess": worst,
        "violations": violations,
        "nondegenerate": nondegenerate,
        "nondegenerate_violations": nondegenerate_violations,
    }
