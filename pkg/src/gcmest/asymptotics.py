"""Sandwich covariance and replicated CLT experiments.

All matrices live in the coordinates of ``tangent_basis(space, x_star)``,
which is orthonormal for the Riemannian inner product, so tangent norms are
plain Euclidean norms of coordinate vectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from . import rng as rng_mod
from .estimators import EstimationError, EstimatorConfig, minimize
from .geometry import GeometryError, Space, UnsupportedOperationError, as_space
from .losses import LossSpec, cost_subgradient, loss_value
from .parallel import ordered_map
from .samplers import SamplerSpec, sample

DEFAULT_M_SCORE = 100_000
DEFAULT_HESSIAN_BUDGET = 1_000_000
_CHUNK = 50_000


class IndefiniteHessianWarning(UserWarning):
    """The Hessian estimate is not positive definite (for example a smeary design)."""


class SandwichError(ValueError):
    pass


class CltAborted(RuntimeError):
    """Too many replications failed; ``report`` holds what was collected."""

    def __init__(self, message: str, report: dict[str, Any]) -> None:
        super().__init__(message)
        self.report = report


def tangent_basis(space, x) -> np.ndarray:
    sp = as_space(space)
    if not sp.has_tangent:
        raise UnsupportedOperationError(f"{sp.spec.kind} has no tangent spaces")
    return sp.tangent_basis(sp.validate_point(x))


def _draw(sp: Space, sampler: SamplerSpec, gen, m: int) -> np.ndarray:
    return sample(sampler, sp, gen, size=m)


def _score_coords(sp: Space, loss: LossSpec, x, z, basis) -> np.ndarray:
    g = cost_subgradient(loss, sp, z, x)
    return np.stack([sp.inner(x, e, g) for e in basis], axis=-1)


def score_moments(space, loss: LossSpec, sampler: SamplerSpec, x_star, m: int = DEFAULT_M_SCORE,
                  seed: int = 0):
    """Monte-Carlo mean and second moment of ``g(Z, x*)`` in tangent coordinates."""
    sp = as_space(space)
    x = sp.from_coords(x_star)
    basis = tangent_basis(sp, x)
    k = len(basis)
    if m < k + 1:
        raise ValueError(f"m must be at least tangent_dim + 1 = {k + 1}")
    gen = rng_mod.stream(seed, rng_mod.SCORE)
    total = np.zeros(k)
    outer = np.zeros((k, k))
    done = 0
    while done < m:
        b = min(_CHUNK, m - done)
        g = _score_coords(sp, loss, x, _draw(sp, sampler, gen, b), basis)
        total += g.sum(axis=0)
        outer += g.T @ g
        done += b
    B = outer / m
    return total / m, 0.5 * (B + B.T)


def score_covariance_B(space, loss: LossSpec, sampler: SamplerSpec, x_star,
                       m: int = DEFAULT_M_SCORE, seed: int = 0) -> np.ndarray:
    """``E[g(Z,x*) g(Z,x*)^T]`` estimated from ``m`` fresh draws."""
    return score_moments(space, loss, sampler, x_star, m, seed)[1]


def default_step(sampler: SamplerSpec | None) -> float:
    scale = sampler.scale if sampler is not None else 0.0
    return 1e-3 * (1.0 + scale)


def _stencil(k: int):
    """Tangent-coordinate offsets (in units of h) for the second-difference stencil."""
    pts = [np.zeros(k)]
    eye = np.eye(k)
    for i in range(k):
        pts += [eye[i], -eye[i]]
    for i in range(k):
        for j in range(i + 1, k):
            pts += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
    return np.array(pts)


def hessian_S(space, loss: LossSpec, sampler: SamplerSpec | None, x_star, h: float | None = None,
              m: int | None = None, seed: int = 0, data=None) -> np.ndarray:
    """Central-difference Hessian of the population objective at ``x*``.

    Every stencil point sees the same draws (common random numbers), so the
    per-sample second differences are averaged directly. With ``data`` the
    empirical objective of that sample is differentiated instead.
    """
    sp = as_space(space)
    x = sp.from_coords(x_star)
    basis = tangent_basis(sp, x)
    k = len(basis)
    h = default_step(sampler) if h is None else float(h)
    if not 0 < h < 0.5 * sp.guard:
        raise ValueError("h must be positive and well inside the injectivity guard")
    offsets = _stencil(k)
    points = np.stack([sp.exp(x, np.tensordot(h * c, basis, axes=(0, 0))) for c in offsets])
    if data is not None:
        z_all = sp.from_coords(np.asarray(data, dtype=float))
        m = len(z_all)
        gen = None
    else:
        if sampler is None:
            raise ValueError("hessian_S needs a sampler or plug-in data")
        m = m if m is not None else max(1, DEFAULT_HESSIAN_BUDGET // len(offsets))
        gen = rng_mod.stream(seed, rng_mod.HESSIAN)
    acc = np.zeros((k, k))
    done = 0
    while done < m:
        b = min(_CHUNK, m - done)
        z = z_all[done:done + b] if gen is None else _draw(sp, sampler, gen, b)
        f = np.stack([loss_value(loss, sp.dist(p, z)) for p in points])
        pos = 1
        for i in range(k):
            acc[i, i] += np.sum(f[pos] - 2.0 * f[0] + f[pos + 1])
            pos += 2
        for i in range(k):
            for j in range(i + 1, k):
                v = np.sum(f[pos] - f[pos + 1] - f[pos + 2] + f[pos + 3]) / 4.0
                acc[i, j] += v
                acc[j, i] += v
                pos += 4
        done += b
    S = acc / (m * h * h)
    S = 0.5 * (S + S.T)
    if np.linalg.eigvalsh(S)[0] <= 0:
        warnings.warn("Hessian estimate is not positive definite", IndefiniteHessianWarning, stacklevel=2)
    return S


@dataclass
class SandwichCovariance:
    S: np.ndarray
    B: np.ndarray
    V: np.ndarray
    basis: np.ndarray | None = None

    def to_json(self) -> dict[str, Any]:
        return {"S": self.S.tolist(), "B": self.B.tolist(), "V": self.V.tolist()}


def sandwich_V(S, B, basis=None) -> SandwichCovariance:
    S = np.asarray(S, dtype=float)
    B = np.asarray(B, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or B.shape != S.shape:
        raise SandwichError("S and B must be square matrices of the same size")
    if np.max(np.abs(S - S.T)) > 1e-9 * max(1.0, np.max(np.abs(S))):
        raise SandwichError("S is not symmetric")
    S = 0.5 * (S + S.T)
    if np.linalg.eigvalsh(S)[0] <= 0:
        raise SandwichError("S is not positive definite")
    Sinv_B = np.linalg.solve(S, B)
    V = np.linalg.solve(S, Sinv_B.T).T
    return SandwichCovariance(S=S, B=B, V=0.5 * (V + V.T), basis=basis)


@dataclass
class CltReport:
    n: int
    reps: int
    errors: np.ndarray
    empirical_cov: np.ndarray
    V_hat: SandwichCovariance
    frobenius_rel_err: float
    mahalanobis_ks: float
    mean_norm: float
    score_cov: np.ndarray
    score_frobenius_rel_err: float
    failures: int
    messages: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "reps": self.reps,
            "tangent_dim": int(self.errors.shape[1]),
            "empirical_cov": self.empirical_cov.tolist(),
            "V_hat": self.V_hat.to_json(),
            "frobenius_rel_err": self.frobenius_rel_err,
            "mahalanobis_ks": self.mahalanobis_ks,
            "mean_norm": self.mean_norm,
            "score_cov": self.score_cov.tolist(),
            "score_frobenius_rel_err": self.score_frobenius_rel_err,
            "failures": self.failures,
        }


def frobenius_rel_err(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


def mahalanobis_ks(errors, V) -> float:
    """KS distance between squared Mahalanobis norms (under ``V``) and chi-square(k)."""
    errors = np.asarray(errors, dtype=float)
    q = np.einsum("ri,ri->r", errors, np.linalg.solve(V, errors.T).T)
    return float(stats.kstest(q, stats.chi2(errors.shape[1]).cdf).statistic)


def _has_atom_at(sp: Space, sampler: SamplerSpec, x) -> bool:
    if sampler.kind == "DiscreteSupport":
        return any(float(sp.dist(x, sp.from_coords(p))) <= 1e-12 and w > 0 for p, w in sampler.support)
    if sampler.scale == 0 and float(sp.dist(x, sp.from_coords(sampler.center))) <= 1e-12:
        return True
    if sampler.kind == "Contaminated" and sampler.contamination_scale == 0:
        return float(sp.dist(x, sp.from_coords(sampler.contamination[1]))) <= 1e-12
    return False


def _clt_job(job):
    spec, loss, sampler, xs, n, cfg, seed, rep = job
    sp = as_space(spec)
    x = sp.from_coords(xs)
    basis = sp.tangent_basis(x)
    gen = rng_mod.stream(seed, rng_mod.REPLICATION, rep)
    z = sample(sampler, sp, gen, size=n)
    score = _score_coords(sp, loss, x, z, basis).sum(axis=0) / math.sqrt(n)
    try:
        res = minimize(sp, loss, z, cfg)
    except (EstimationError, GeometryError) as exc:
        return rep, None, score, False, str(exc)
    err = math.sqrt(n) * sp.coords_of(x, sp.log(x, res.x_hat))
    return rep, err, score, bool(res.converged), res.message


def clt_experiment(
    space,
    loss: LossSpec,
    sampler: SamplerSpec,
    x_star,
    n: int,
    reps: int,
    est_config: EstimatorConfig | None = None,
    seed: int = 0,
    workers: int = 1,
    m_score: int = DEFAULT_M_SCORE,
    hessian_m: int | None = None,
    h: float | None = None,
    max_failure_rate: float = 0.01,
) -> CltReport:
    """Replicate ``sqrt(n) Log_{x*}(x_hat_n)`` and compare it with the sandwich covariance."""
    sp = as_space(space)
    if reps < 2:
        raise ValueError("reps must be at least 2")
    if n < 1:
        raise ValueError("n must be at least 1")
    x = sp.validate_point(sp.from_coords(x_star))
    if loss.kink_slope > 0 and _has_atom_at(sp, sampler, x):
        raise ValueError("sampler has an atom at x_star; the objective is not twice differentiable there")
    cfg = est_config or EstimatorConfig()
    xs = tuple(float(c) for c in sp.to_coords(x))
    jobs = [(sp.spec, loss, sampler, xs, int(n), cfg, seed, r) for r in range(reps)]
    out = sorted(ordered_map(_clt_job, jobs, workers), key=lambda o: o[0])
    ok = [o for o in out if o[1] is not None and o[3]]
    failures = reps - len(ok)
    messages = sorted({o[4] for o in out if not (o[1] is not None and o[3])})
    if failures > max_failure_rate * reps:
        raise CltAborted(
            f"{failures} of {reps} replications failed to converge",
            {"n": n, "reps": reps, "failures": failures, "messages": messages},
        )
    errors = np.array([o[1] for o in ok])
    scores = np.array([o[2] for o in out])
    S = hessian_S(sp, loss, sampler, x, h=h, m=hessian_m, seed=seed)
    B = score_covariance_B(sp, loss, sampler, x, m=m_score, seed=seed)
    V = sandwich_V(S, B, basis=sp.tangent_basis(x))
    emp = np.atleast_2d(np.cov(errors, rowvar=False, ddof=1))
    score_cov = np.atleast_2d(np.cov(scores, rowvar=False, ddof=1))
    return CltReport(
        n=int(n),
        reps=int(reps),
        errors=errors,
        empirical_cov=emp,
        V_hat=V,
        frobenius_rel_err=frobenius_rel_err(emp, V.V),
        mahalanobis_ks=mahalanobis_ks(errors, V.V),
        mean_norm=float(np.linalg.norm(errors.mean(axis=0))),
        score_cov=score_cov,
        score_frobenius_rel_err=frobenius_rel_err(score_cov, B),
        failures=failures,
        messages=messages,
    )
