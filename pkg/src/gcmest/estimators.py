"""Empirical risk minimization over a geodesic space.

`minimize` drives the empirical objective ``n^-1 sum l(d(Z_i, x))`` to a
near-minimizer. The default path is a Weiszfeld-type descent: the trial
step is ``Exp_x(-g / mean_i w_i)`` with ``w_i = l'(d_i)/d_i``, safeguarded by
Armijo backtracking. For power(2) in flat space it lands on the mean in one
step, and for power(1) it is the Riemannian Weiszfeld iteration. Kinks at
data points (power(1)) are handled through the minimal-norm subgradient.
The classical subgradient method with constant or ``s0/sqrt(k)`` steps and
geodesic iterate averaging is available through ``step_rule``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng as rng_mod
from .geometry import CutLocusError, GeometryError, MetricTree, Space, as_space
from .losses import LossSpec, loss_subderivative, loss_value
from .parallel import ordered_map
from .samplers import SamplerSpec, sample

STEP_RULES = ("auto", "armijo", "weiszfeld", "constant", "decaying")
INITS = ("first", "user", "extrinsic")
_EPS = np.finfo(float).eps


class EstimationError(ValueError):
    """Precondition violation for an estimation problem."""


@dataclass
class EstimatorConfig:
    max_iters: int = 10_000
    step_rule: str = "auto"
    s0: float | None = None
    averaging: bool | None = None
    tol_grad: float | None = None
    tol_obj: float = 1e-13
    init: str = "first"
    init_point: list[float] | None = None
    armijo: float = 1e-4
    stall_iters: int = 20

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.init == "user" and self.init_point is None:
            raise ValueError("init='user' needs init_point")
        if self.s0 is not None and not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if self.tol_grad is not None and not self.tol_grad > 0:
            raise ValueError("tol_grad must be positive")
        if not self.tol_obj > 0:
            raise ValueError("tol_obj must be positive")

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> EstimatorConfig:
        return cls(**obj)

    def to_json(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class EstimateResult:
    x_hat: np.ndarray
    objective: float
    grad_norm: float
    iters: int
    converged: bool
    trace: list[tuple[int, float]] = field(default_factory=list)
    method: str = ""
    message: str = ""

    def to_json(self, space) -> dict[str, Any]:
        sp = as_space(space)
        return {
            "x_hat": sp.to_coords(self.x_hat),
            "objective": self.objective,
            "grad_norm": self.grad_norm,
            "iters": self.iters,
            "converged": self.converged,
            "method": self.method,
            "message": self.message,
            "trace": [[int(k), float(f)] for k, f in self.trace],
        }


def _as_data(sp: Space, data) -> np.ndarray:
    data = sp.from_coords(np.asarray(data, dtype=float))
    if data.ndim == len(sp.point_shape):
        data = data[None]
    if len(data) == 0:
        raise EstimationError("data must be nonempty")
    return data


def empirical_objective(space, loss: LossSpec, data, x) -> float:
    sp = as_space(space)
    data = _as_data(sp, data)
    return float(np.mean(loss_value(loss, sp.dist(x, data))))


def empirical_subgradient(space, loss: LossSpec, data, x) -> np.ndarray:
    """Mean of ``g(z_i, x)``: an element of the subdifferential of the empirical objective."""
    sp = as_space(space)
    g, _, _ = _Problem(sp, loss, _as_data(sp, data)).subgradient(x)
    return g


class _Problem:
    def __init__(self, sp: Space, loss: LossSpec, data: np.ndarray) -> None:
        self.sp = sp
        self.loss = loss
        self.data = data
        self.n = len(data)
        self._bshape = (-1,) + (1,) * len(sp.point_shape)

    def f(self, x) -> float:
        return float(np.mean(loss_value(self.loss, self.sp.dist(x, self.data))))

    def subgradient(self, x):
        """Mean subgradient (zero selection at kinks), distances and weights ``l'(d)/d``."""
        d = np.asarray(self.sp.dist(x, self.data), dtype=float)
        pos = d > 0
        w = np.where(pos, loss_subderivative(self.loss, d) / np.where(pos, d, 1.0), 0.0)
        lg = self.sp.log(x, self.data[pos]) if pos.any() else np.zeros((0,) + self.sp.point_shape)
        g = -np.tensordot(w[pos], lg, axes=(0, 0)) / self.n
        return g, d, w

    def min_norm_subgradient(self, x):
        """Minimal-norm element of the subdifferential and the step weight sum.

        Data points coinciding with ``x`` contribute a ball of radius
        ``l'(0+)/n`` each; the zero selection sits at its center.
        """
        g, d, w = self.subgradient(x)
        gn = float(self.sp.norm(x, g))
        kink = self.loss.kink_slope
        n_at = int(np.sum(d <= 0))
        if kink > 0 and n_at:
            r = kink * n_at / self.n
            shrink = max(0.0, 1.0 - r / gn) if gn > 0 else 0.0
            g = shrink * g
            gn = shrink * gn
        return g, gn, d, w


def _initial_point(sp: Space, data: np.ndarray, cfg: EstimatorConfig) -> np.ndarray:
    if cfg.init == "user":
        return sp.validate_point(sp.from_coords(cfg.init_point))
    if cfg.init == "extrinsic":
        return sp.extrinsic_mean(data)
    return data[0].copy()


def _check_preconditions(sp: Space, data: np.ndarray, x0: np.ndarray) -> float:
    spread = float(np.max(sp.dist(x0, data)))
    if sp.spec.kind == "Sphere":
        # data inside a ball of radius pi/(4 sqrt(kappa)) has diameter < pi/(2 sqrt(kappa))
        limit = math.pi / (2.0 * math.sqrt(sp.spec.kappa))
        if spread >= limit:
            raise EstimationError(
                f"sphere data must lie in a ball of radius < pi/(4 sqrt(kappa)); "
                f"found a point {spread:.4g} away from the initializer"
            )
    return spread


def minimize(space, loss: LossSpec, data, config: EstimatorConfig | None = None) -> EstimateResult:
    """Near-minimizer of the empirical objective over ``space``."""
    cfg = config or EstimatorConfig()
    sp = as_space(space)
    data = _as_data(sp, data)
    if isinstance(sp, MetricTree):
        return _minimize_tree(sp, loss, data)
    x0 = _initial_point(sp, data, cfg)
    spread = _check_preconditions(sp, data, x0)
    prob = _Problem(sp, loss, data)
    f0 = prob.f(x0)
    tol_grad = cfg.tol_grad if cfg.tol_grad is not None else 1e-8 * (1.0 + f0)
    rule = cfg.step_rule
    if rule == "auto":
        rule = "armijo" if loss.is_smooth else "weiszfeld"
    if rule in ("armijo", "weiszfeld"):
        return _descent(prob, x0, f0, cfg, tol_grad, rule)
    s0 = cfg.s0 if cfg.s0 is not None else max(spread, 1e-12) / 2.0
    return _subgradient_method(prob, x0, f0, cfg, tol_grad, s0, rule)


def _try_step(sp: Space, x, g, t):
    try:
        return sp.exp(x, -t * g)
    except CutLocusError:
        return None


def _descent(prob: _Problem, x, f, cfg: EstimatorConfig, tol_grad: float, rule: str) -> EstimateResult:
    sp = prob.sp
    trace = [(0, f)]
    kinked = prob.loss.kink_slope > 0
    stall = 0
    message = "max_iters reached"
    converged = False
    g, gn, d, w = prob.min_norm_subgradient(x)
    k = 0
    for k in range(1, cfg.max_iters + 1):
        if gn <= tol_grad:
            converged, message = True, "gradient tolerance reached"
            k -= 1
            break
        wsum = float(np.sum(w))
        t = prob.n / wsum if wsum > 0 else 1.0
        if gn * t >= sp.guard:
            t = 0.5 * sp.guard / gn
        accepted = None
        for _ in range(60):
            x_new = _try_step(sp, x, g, t)
            if x_new is not None:
                f_new = prob.f(x_new)
                if f_new <= f - cfg.armijo * t * gn * gn:
                    accepted = (x_new, f_new, *prob.min_norm_subgradient(x_new))
                    break
                if f_new <= f + 4 * _EPS * abs(f):
                    # decrease is below rounding: accept only if stationarity improves
                    cand = prob.min_norm_subgradient(x_new)
                    if cand[1] < gn:
                        accepted = (x_new, f_new, *cand)
                        break
            t *= 0.5
        if accepted is None:
            converged = gn <= tol_grad or (kinked and gn <= math.sqrt(tol_grad))
            message = "line search stalled"
            k -= 1
            break
        x_new, f_new, g_new, gn_new, d_new, w_new = accepted
        if kinked and d_new.size:
            # the minimizer may sit on a data point, where Weiszfeld steps shrink geometrically
            j = int(np.argmin(d_new))
            if w_new[j] >= 0.5 * float(np.sum(w_new)):
                z = prob.data[j]
                fz = prob.f(z)
                if fz <= f_new:
                    gz = prob.min_norm_subgradient(z)
                    x_new, f_new, g_new, gn_new, d_new, w_new = z.copy(), fz, *gz
        decrease = f - f_new
        x, f, g, gn, d, w = x_new, f_new, g_new, gn_new, d_new, w_new
        trace.append((k, f))
        if decrease <= cfg.tol_obj * (1.0 + abs(f)):
            stall += 1
            if stall >= cfg.stall_iters:
                converged = gn <= tol_grad or kinked
                message = "objective stalled"
                break
        else:
            stall = 0
    else:
        k = cfg.max_iters
    if gn <= tol_grad:
        converged = True
    return EstimateResult(
        x_hat=x,
        objective=prob.f(x),
        grad_norm=gn,
        iters=k,
        converged=converged,
        trace=trace,
        method=rule,
        message=message,
    )


def _subgradient_method(prob: _Problem, x, f, cfg, tol_grad, s0, rule) -> EstimateResult:
    sp = prob.sp
    averaging = True if cfg.averaging is None else cfg.averaging
    avg = x.copy()
    best_x, best_f = x.copy(), f
    trace = [(0, f)]
    stall = 0
    converged = False
    message = "max_iters reached"
    k = 0
    for k in range(1, cfg.max_iters + 1):
        g, gn, _, _ = prob.min_norm_subgradient(x)
        if gn <= tol_grad:
            best_x, best_f = x.copy(), prob.f(x)
            converged, message = True, "zero subgradient"
            break
        step = s0 / math.sqrt(k) if rule == "decaying" else s0
        step = min(step, 0.5 * sp.guard)
        x = sp.exp(x, -(step / gn) * g)
        if averaging:
            avg = sp.geodesic_point(avg, x, 1.0 / (k + 1))
            cur, fcur = avg, prob.f(avg)
        else:
            cur, fcur = x, prob.f(x)
        trace.append((k, fcur))
        if fcur < best_f - cfg.tol_obj * (1.0 + abs(best_f)):
            best_x, best_f, stall = cur.copy(), fcur, 0
        else:
            if fcur < best_f:
                best_x, best_f = cur.copy(), fcur
            stall += 1
            if stall >= cfg.stall_iters:
                converged, message = True, "objective within tol_obj of the best observed"
                break
    _, gn, _, _ = prob.min_norm_subgradient(best_x)
    return EstimateResult(
        x_hat=best_x,
        objective=prob.f(best_x),
        grad_norm=gn,
        iters=k,
        converged=converged,
        trace=trace,
        method=rule,
        message=message,
    )


def _minimize_tree(sp: MetricTree, loss: LossSpec, data: np.ndarray) -> EstimateResult:
    """Exact edgewise search: along each edge the objective is a convex function of the offset."""
    prob = _Problem(sp, loss, data)
    best_x, best_f = None, math.inf
    trace = []
    for e, length in enumerate(sp.length):
        def f_edge(o, e=e):
            return prob.f(np.array([float(e), o]))

        res = minimize_scalar(f_edge, bounds=(0.0, length), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, length)})
        for o, fo in ((res.x, res.fun), (0.0, f_edge(0.0)), (length, f_edge(length))):
            if fo < best_f:
                best_x, best_f = sp.canonical([e, o]), fo
        trace.append((e, best_f))
    return EstimateResult(
        x_hat=best_x,
        objective=prob.f(best_x),
        grad_norm=float("nan"),
        iters=len(sp.length),
        converged=True,
        trace=trace,
        method="tree-edgewise",
        message="edgewise convex search",
    )


# -- consistency -------------------------------------------------------------


@dataclass
class ConsistencyTable:
    n: list[int]
    median_error: list[float]
    failures: list[int]
    reps: int
    slope: float
    intercept: float
    errors: list[list[float]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "median_error": self.median_error,
            "failures": self.failures,
            "reps": self.reps,
            "slope": self.slope,
            "intercept": self.intercept,
        }

    def rows(self) -> list[tuple[int, float, int]]:
        return list(zip(self.n, self.median_error, self.failures))


def _consistency_job(job):
    spec, loss, sampler, x_star, n, cfg, seed, n_index, rep = job
    sp = as_space(spec)
    gen = rng_mod.stream(seed, rng_mod.CONSISTENCY, n_index, rep)
    data = sample(sampler, sp, gen, size=n)
    try:
        res = minimize(sp, loss, data, cfg)
    except (EstimationError, GeometryError):
        return rep, math.nan, False
    return rep, float(sp.dist(sp.from_coords(x_star), res.x_hat)), bool(res.converged)


def log_log_slope(n, err) -> tuple[float, float]:
    """Least-squares fit of ``log(err) = intercept + slope * log(n)``."""
    slope, intercept = np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(err, float)), 1)
    return float(slope), float(intercept)


def consistency_curve(
    space,
    loss: LossSpec,
    sampler: SamplerSpec,
    x_star,
    n_grid,
    reps: int,
    seed: int = 0,
    config: EstimatorConfig | None = None,
    workers: int = 1,
) -> ConsistencyTable:
    """Median of ``d(x_hat_n, x*)`` over replications for each ``n`` in ``n_grid``.

    Failed or non-converged replications are counted in ``failures`` and
    left out of the median.
    """
    sp = as_space(space)
    cfg = config or EstimatorConfig()
    xs = tuple(float(c) for c in np.asarray(x_star, dtype=float).reshape(-1))
    medians, failures, all_err = [], [], []
    for i, n in enumerate(n_grid):
        jobs = [(sp.spec, loss, sampler, xs, int(n), cfg, seed, i, r) for r in range(reps)]
        out = sorted(ordered_map(_consistency_job, jobs, workers))
        errs = np.array([e for _, e, ok in out if ok and np.isfinite(e)])
        failures.append(reps - len(errs))
        medians.append(float(np.median(errs)) if errs.size else math.nan)
        all_err.append([e for _, e, _ in out])
    ok = [j for j, m in enumerate(medians) if np.isfinite(m) and m > 0]
    if len(ok) >= 2:
        slope, intercept = log_log_slope([n_grid[j] for j in ok], [medians[j] for j in ok])
    else:
        slope, intercept = math.nan, math.nan
    return ConsistencyTable(
        n=[int(n) for n in n_grid],
        median_error=medians,
        failures=failures,
        reps=reps,
        slope=slope,
        intercept=intercept,
        errors=all_err,
    )
