"""Experiment configuration, execution and persistence.

A run writes its result JSON, optional CSV side files and a manifest
``<out>.manifest.json`` holding the resolved configuration, its SHA-256, the
seed, library versions and the wall time. Every file is written to a
temporary name and moved into place; if anything fails, files already
written by the run are removed.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import tempfile
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

from . import rng as rng_mod
from .asymptotics import clt_experiment
from .estimators import EstimatorConfig, consistency_curve, minimize
from .geometry import MetricTree, Space, SpaceSpec, as_space
from .losses import LossSpec, loss_value
from .samplers import SamplerSpec, sample


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration (CLI exit code 2)."""


def stable_json(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def config_hash(config: dict[str, Any]) -> str:
    blob = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _load_ref(value, base: Path):
    """Inline JSON object, or a path (relative to ``base``) to a JSON file."""
    if isinstance(value, (str, os.PathLike)):
        path = Path(value)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"referenced file {path} does not exist")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    return value


def load_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_points(obj) -> np.ndarray:
    if isinstance(obj, dict):
        if "points" not in obj:
            raise ConfigError('data must be {"points": [...]}')
        obj = obj["points"]
    pts = np.asarray(obj, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ConfigError("data must be a nonempty list of flat coordinate lists")
    return pts


@dataclass
class ExperimentConfig:
    space: SpaceSpec
    loss: LossSpec
    sampler: SamplerSpec | None = None
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    n: int | None = None
    n_grid: list[int] | None = None
    reps: int = 1
    seed: int = 0
    x_star: list[float] | None = None
    data: np.ndarray | None = None
    workers: int = 1
    m_score: int = 100_000
    hessian_m: int | None = None
    h: float | None = None
    thresholds: dict[str, Any] = field(default_factory=dict)
    out: str | None = None
    errors_csv: str | None = None
    curve_csv: str | None = None

    def __post_init__(self) -> None:
        if self.n is not None and self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.n_grid is not None and (not self.n_grid or min(self.n_grid) < 1):
            raise ConfigError("n_grid must be a nonempty list of positive sizes")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.sampler is not None and self.space.kind == "Sphere":
            limit = math.pi / (4.0 * math.sqrt(self.space.kappa))
            trunc = self.sampler.truncation
            if trunc is not None and trunc > limit:
                raise ConfigError(f"sphere sampler truncation must be <= pi/(4 sqrt(kappa)) = {limit:.6g}")
            if self.sampler.kind == "GeodesicBallUniform" and self.sampler.scale >= limit:
                raise ConfigError(f"sphere ball radius must be < pi/(4 sqrt(kappa)) = {limit:.6g}")

    @classmethod
    def from_json(cls, obj: dict[str, Any], base_dir=".") -> ExperimentConfig:
        base = Path(base_dir)
        try:
            space = SpaceSpec.from_json(_load_ref(obj["space"], base))
            loss = LossSpec.from_json(_load_ref(obj["loss"], base))
            sampler = obj.get("sampler")
            sampler = SamplerSpec.from_json(_load_ref(sampler, base)) if sampler is not None else None
            est = obj.get("estimator")
            est = EstimatorConfig.from_json(_load_ref(est, base)) if est is not None else EstimatorConfig()
            data = obj.get("data")
            data = load_points(_load_ref(data, base)) if data is not None else None
            known = {"space", "loss", "sampler", "estimator", "data"}
            extra = {k: v for k, v in obj.items() if k not in known}
            return cls(space=space, loss=loss, sampler=sampler, estimator=est, data=data, **extra)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "space": self.space.to_json(),
            "loss": self.loss.to_json(),
            "estimator": self.estimator.to_json(),
            "reps": self.reps,
            "seed": self.seed,
            "workers": self.workers,
            "m_score": self.m_score,
        }
        if self.sampler is not None:
            out["sampler"] = self.sampler.to_json()
        for key in ("n", "n_grid", "x_star", "hessian_m", "h"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.thresholds:
            out["thresholds"] = self.thresholds
        if self.data is not None:
            out["data"] = {"points": self.data.tolist()}
        return out


# -- population minimizer validation -----------------------------------------


def population_grid_check(sp: Space, loss: LossSpec, sampler: SamplerSpec, x_star,
                          m: int = 20_000, half_steps: int = 2, seed: int = 0) -> dict[str, Any]:
    """Check that the Monte-Carlo population objective on a tangent grid is smallest at ``x_star``.

    The grid spans ``+-sampler.scale`` (at least 0.05) per tangent axis in
    ``2 half_steps + 1`` points; the check passes when the grid argmin lies
    within one grid step per axis of the origin.
    """
    x = sp.from_coords(x_star)
    if isinstance(sp, MetricTree):
        return {"checked": False, "passed": True, "reason": "no tangent grid on metric trees"}
    basis = sp.tangent_basis(x)
    k = len(basis)
    width = max(sampler.scale, 0.05)
    step = width / half_steps
    axis = np.arange(-half_steps, half_steps + 1) * step
    grid = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    z = sample(sampler, sp, rng_mod.stream(seed, rng_mod.GRID_CHECK, 9), size=m)
    values = np.array([
        float(np.mean(loss_value(loss, sp.dist(sp.exp(x, np.tensordot(c, basis, axes=(0, 0))), z))))
        for c in grid
    ])
    best = grid[int(np.argmin(values))]
    passed = bool(np.max(np.abs(best)) <= step * (1 + 1e-12))
    return {
        "checked": True,
        "passed": passed,
        "grid_step": step,
        "grid_points": len(grid),
        "argmin_offset": best.tolist(),
    }


def resolve_x_star(cfg: ExperimentConfig, sp: Space, purpose: str):
    """``x_star`` for a run: the sampler center for symmetric samplers, else the user's point."""
    if cfg.sampler is None:
        raise ConfigError(f"{purpose} runs need a sampler")
    if cfg.x_star is not None:
        return sp.validate_point(sp.from_coords(cfg.x_star))
    if cfg.sampler.symmetric:
        return sp.from_coords(cfg.sampler.center)
    raise ConfigError(
        f"{purpose} with a {cfg.sampler.kind} sampler needs a user-supplied x_star "
        "(the population minimizer has no closed form)"
    )


# -- persistence ---------------------------------------------------------------


class _Writer:
    """Collects atomically written files and removes them if the run fails."""

    def __init__(self) -> None:
        self.written: list[Path] = []

    def write(self, path, text: str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(path)

    def rollback(self) -> None:
        for p in self.written:
            if p.exists():
                p.unlink()
        self.written.clear()


def _fmt(v) -> str:
    return format(float(v), ".17g")


def errors_csv_text(errors: np.ndarray, reps_index) -> str:
    k = errors.shape[1]
    lines = ["rep," + ",".join(f"c{i}" for i in range(k))]
    for r, row in zip(reps_index, errors):
        lines.append(f"{r}," + ",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def curve_csv_text(table) -> str:
    lines = ["n,median_error,failures"]
    for n, e, f in table.rows():
        lines.append(f"{n},{_fmt(e)},{f}")
    return "\n".join(lines) + "\n"


def versions() -> dict[str, str]:
    import networkx
    import scipy

    out = {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
           "networkx": networkx.__version__}
    try:
        out["artifact"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pass
    return out


def manifest(cfg: ExperimentConfig, command: str, wall_time: float, outputs) -> dict[str, Any]:
    conf = cfg.to_json()
    return {
        "command": command,
        "config": conf,
        "config_sha256": config_hash(conf),
        "seed": cfg.seed,
        "versions": versions(),
        "wall_time_s": wall_time,
        "outputs": [str(p) for p in outputs],
    }


# -- runs ----------------------------------------------------------------------


@dataclass
class RunOutcome:
    result: dict[str, Any]
    passed: bool
    failures: list[str] = field(default_factory=list)


def _check_thresholds(result: dict[str, Any], thresholds: dict[str, Any]) -> list[str]:
    """Threshold keys ``<field>_max``, ``<field>_min`` or ``<field>_range`` against result fields."""
    bad = []
    for key, bound in thresholds.items():
        name, _, kind = key.rpartition("_")
        value = result.get(name)
        if value is None:
            bad.append(f"{name}: missing")
            continue
        if kind == "max" and not value <= bound:
            bad.append(f"{name}={value:.6g} > {bound}")
        elif kind == "min" and not value >= bound:
            bad.append(f"{name}={value:.6g} < {bound}")
        elif kind == "range" and not bound[0] <= value <= bound[1]:
            bad.append(f"{name}={value:.6g} outside {bound}")
    return bad


def _estimate(cfg: ExperimentConfig, sp: Space, writer: _Writer) -> dict[str, Any]:
    if cfg.data is not None:
        data = cfg.data
    elif cfg.sampler is not None and cfg.n is not None:
        data = sample(cfg.sampler, sp, rng_mod.stream(cfg.seed, rng_mod.REPLICATION, 0), size=cfg.n)
    else:
        raise ConfigError("estimate needs data, or a sampler together with n")
    res = minimize(sp, cfg.loss, data, cfg.estimator)
    return res.to_json(sp)


def _clt(cfg: ExperimentConfig, sp: Space, writer: _Writer) -> dict[str, Any]:
    if cfg.n is None:
        raise ConfigError("clt needs n")
    if not sp.has_tangent:
        raise ConfigError(f"clt runs need tangent spaces; {sp.spec.kind} has none")
    x_star = resolve_x_star(cfg, sp, "clt")
    check = population_grid_check(sp, cfg.loss, cfg.sampler, x_star, seed=cfg.seed)
    if not check["passed"]:
        raise ConfigError(f"x_star is not the grid minimizer of the population objective: {check}")
    rep = clt_experiment(sp, cfg.loss, cfg.sampler, x_star, cfg.n, cfg.reps, cfg.estimator, cfg.seed,
                         workers=cfg.workers, m_score=cfg.m_score, hessian_m=cfg.hessian_m, h=cfg.h)
    out = rep.to_json()
    out["x_star"] = sp.to_coords(x_star)
    out["minimizer_check"] = check
    if cfg.errors_csv:
        writer.write(cfg.errors_csv, errors_csv_text(rep.errors, range(len(rep.errors))))
    return out


def _consistency(cfg: ExperimentConfig, sp: Space, writer: _Writer) -> dict[str, Any]:
    if not cfg.n_grid:
        raise ConfigError("consistency needs n_grid")
    x_star = resolve_x_star(cfg, sp, "consistency")
    check = population_grid_check(sp, cfg.loss, cfg.sampler, x_star, seed=cfg.seed)
    if not check["passed"]:
        raise ConfigError(f"x_star is not the grid minimizer of the population objective: {check}")
    table = consistency_curve(sp, cfg.loss, cfg.sampler, sp.to_coords(x_star), cfg.n_grid, cfg.reps,
                              cfg.seed, cfg.estimator, workers=cfg.workers)
    out = table.to_json()
    out["x_star"] = sp.to_coords(x_star)
    out["minimizer_check"] = check
    if cfg.curve_csv:
        writer.write(cfg.curve_csv, curve_csv_text(table))
    return out


RUNNERS = {"estimate": _estimate, "clt": _clt, "consistency": _consistency}


def run(cfg: ExperimentConfig, command: str) -> RunOutcome:
    """Execute ``command`` and persist its artifacts; see the module docstring."""
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    sp = as_space(cfg.space)
    writer = _Writer()
    start = time.perf_counter()
    try:
        result = RUNNERS[command](cfg, sp, writer)
        failures = _check_thresholds(result, cfg.thresholds)
        if cfg.out:
            writer.write(cfg.out, stable_json(result))
            outputs = list(writer.written)
            man = manifest(cfg, command, time.perf_counter() - start, outputs)
            writer.write(str(cfg.out) + ".manifest.json", stable_json(man))
    except BaseException:
        writer.rollback()
        raise
    return RunOutcome(result=result, passed=not failures, failures=failures)


def verify_manifest(path) -> bool:
    man = load_json(path)
    return config_hash(man["config"]) == man["config_sha256"]
