"""Comparison geometry in the constant-curvature model planes M_kappa.

Provides the model diameter D_kappa, comparison triangles, a grid-based
CAT(kappa) thinness check for concrete triangles, and the strong-convexity
modulus of half the squared distance on CAT(kappa) sets of bounded diameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import GeometryError, Space, SpaceSpec, as_space, make_space

CAT_TOL = 1e-8


@dataclass(frozen=True)
class TriangleSides:
    """Side lengths ``a = d(x,y)``, ``b = d(x,z)``, ``c = d(y,z)``."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        a, b, c = self.a, self.b, self.c
        if min(a, b, c) < 0:
            raise GeometryError("side lengths must be nonnegative")
        slack = 1e-12 * max(1.0, a + b + c)
        if a > b + c + slack or b > a + c + slack or c > a + b + slack:
            raise GeometryError(f"sides {a}, {b}, {c} violate the triangle inequality")

    @property
    def perimeter(self) -> float:
        return self.a + self.b + self.c


@dataclass
class CatReport:
    kappa: float
    n_pairs_checked: int
    max_excess: float
    witness: tuple[float, float] | None
    tolerance: float = CAT_TOL

    @property
    def passed(self) -> bool:
        return self.witness is None

    def to_json(self) -> dict[str, Any]:
        return {
            "kappa": self.kappa,
            "n_pairs_checked": self.n_pairs_checked,
            "max_excess": self.max_excess,
            "witness": None if self.witness is None else {"s": self.witness[0], "t": self.witness[1]},
        }


def model_diameter(kappa: float) -> float:
    return math.inf if kappa <= 0 else math.pi / math.sqrt(kappa)


def strong_convexity_alpha(D: float, kappa: float) -> float:
    """Modulus ``alpha`` of ``d^2(., x0)/2`` on a CAT(kappa) set of diameter ``D``.

    Equals ``sqrt(kappa) D / tan(sqrt(kappa) D)`` for positive curvature and 1
    otherwise; requires ``D < D_kappa / 2``.
    """
    if not D > 0:
        raise GeometryError("diameter must be positive")
    if kappa <= 0:
        return 1.0
    if D >= model_diameter(kappa) / 2:
        raise GeometryError(f"diameter {D} must be below D_kappa/2 = {model_diameter(kappa) / 2}")
    r = math.sqrt(kappa) * D
    return r / math.tan(r)


def model_space(kappa: float) -> Space:
    """The 2-dimensional model plane M_kappa in its standard embedding."""
    if kappa > 0:
        return make_space(SpaceSpec.sphere(3, kappa))
    if kappa < 0:
        return make_space(SpaceSpec.hyperbolic(3, kappa))
    return make_space(SpaceSpec.euclidean(2))


def _model_origin(kappa: float) -> np.ndarray:
    if kappa == 0:
        return np.zeros(2)
    return np.array([0.0, 0.0, 1.0 / math.sqrt(abs(kappa))])


def _vertex_angle(kappa: float, sides: TriangleSides) -> float:
    """Angle between sides ``a`` and ``b`` via the half-angle formulas of M_kappa."""
    a, b, c = sides.a, sides.b, sides.c
    if a == 0 or b == 0:
        return 0.0
    if kappa > 0:
        r = math.sqrt(kappa)
        f = lambda u: math.sin(r * u)  # noqa: E731
    elif kappa < 0:
        r = math.sqrt(-kappa)
        f = lambda u: math.sinh(r * u)  # noqa: E731
    else:
        f = float
    s = 0.5 * (a + b + c)
    num = max(f(max(s - a, 0.0)) * f(max(s - b, 0.0)), 0.0)
    den = max(f(s) * f(max(s - c, 0.0)), 0.0)
    return 2.0 * math.atan2(math.sqrt(num), math.sqrt(den))


def comparison_triangle(kappa: float, sides: TriangleSides) -> np.ndarray:
    """Vertices ``(x, y, z)`` in M_kappa with the given side lengths.

    ``x`` sits at the model origin, ``y`` along the first axis and ``z`` on
    the positive side of the second axis.
    """
    if not sides.perimeter < 2 * model_diameter(kappa):
        raise GeometryError("perimeter must be below 2 * D_kappa")
    m = model_space(kappa)
    x = _model_origin(kappa)
    theta = _vertex_angle(kappa, sides)
    if kappa == 0:
        y = np.array([sides.a, 0.0])
        z = sides.b * np.array([math.cos(theta), math.sin(theta)])
        return np.array([x, y, z])
    y = m.exp(x, np.array([sides.a, 0.0, 0.0]))
    z = m.exp(x, sides.b * np.array([math.cos(theta), math.sin(theta), 0.0]))
    return np.array([x, y, z])


def model_dist(kappa: float, p, q):
    return model_space(kappa).dist(p, q)


def _side_excess(space: Space, p0, p1, q0, q1, mp0, mp1, mq0, mq1, grid: np.ndarray, model: Space):
    g1 = space.geodesic_point(p0, p1, grid)
    g2 = space.geodesic_point(q0, q1, grid)
    m1 = model.geodesic_point(mp0, mp1, grid)
    m2 = model.geodesic_point(mq0, mq1, grid)
    out = np.empty((grid.size, grid.size))
    for i in range(grid.size):
        out[i] = space.dist(g1[i], g2) - model.dist(m1[i], m2)
    return out


def cat_check(
    space: SpaceSpec | Space,
    x,
    y,
    z,
    kappa: float,
    grid_n: int = 32,
    full: bool = False,
    tol: float = CAT_TOL,
) -> CatReport:
    """Compare the triangle ``xyz`` with its comparison triangle in M_kappa.

    Points of side ``xy`` and side ``xz`` are sampled on a ``grid_n`` x
    ``grid_n`` grid of parameters ``(s, t)``; ``full=True`` also pairs both
    with side ``yz``. The witness is the lexicographically first ``(s, t)``
    attaining the maximal excess when that excess exceeds ``tol``.
    """
    sp = as_space(space)
    x, y, z = (sp.validate_point(p) for p in (x, y, z))
    sides = TriangleSides(float(sp.dist(x, y)), float(sp.dist(x, z)), float(sp.dist(y, z)))
    if not sides.perimeter < 2 * model_diameter(kappa):
        raise GeometryError("triangle perimeter must be below 2 * D_kappa")
    bx, by, bz = comparison_triangle(kappa, sides)
    model = model_space(kappa)
    grid = np.linspace(0.0, 1.0, grid_n)
    pairs = [((x, y, bx, by), (x, z, bx, bz))]
    if full:
        pairs += [((x, y, bx, by), (y, z, by, bz)), ((x, z, bx, bz), (y, z, by, bz))]
    best = -math.inf
    witness = None
    for (p0, p1, mp0, mp1), (q0, q1, mq0, mq1) in pairs:
        ex = _side_excess(sp, p0, p1, q0, q1, mp0, mp1, mq0, mq1, grid, model)
        i, j = np.unravel_index(int(np.argmax(ex)), ex.shape)
        if ex[i, j] > best:
            best = float(ex[i, j])
            witness = (float(grid[i]), float(grid[j]))
    return CatReport(
        kappa=kappa,
        n_pairs_checked=len(pairs) * grid_n * grid_n,
        max_excess=best,
        witness=witness if best > tol else None,
        tolerance=tol,
    )


def strong_convexity_probe(space, x0, x, y, t: float, D: float, kappa: float) -> float:
    """Slack in the strong-convexity inequality for ``d^2(., x0)/2`` along ``[x, y]``.

    Nonnegative whenever the space is CAT(kappa) and the three points lie in
    a set of diameter ``D < D_kappa/2``.
    """
    sp = as_space(space)
    alpha = strong_convexity_alpha(D, kappa)
    dxx0 = float(sp.dist(x0, x))
    dyx0 = float(sp.dist(x0, y))
    dxy = float(sp.dist(x, y))
    if max(dxx0, dyx0, dxy) > D * (1 + 1e-12):
        raise GeometryError("points are farther apart than the stated diameter")
    g = sp.geodesic_point(x, y, t)
    dg = float(sp.dist(x0, g))
    return (
        (1 - t) / 2 * dxx0**2
        + t / 2 * dyx0**2
        - alpha * t * (1 - t) / 4 * dxy**2
        - 0.5 * dg**2
    )
