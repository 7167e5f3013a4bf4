"""Command-line entry point ``mest``.

Exit codes: 0 success, 1 a check or acceptance threshold failed, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .asymptotics import CltAborted
from .estimators import EstimationError
from .geometry import GeometryError, SpaceSpec, as_space
from .harness import ConfigError, ExperimentConfig, load_json, run, stable_json
from .losses import LossSpec
from . import selftest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _experiment(args, command: str) -> ExperimentConfig:
    """Merge a ``--config`` experiment file with individual flags (flags win)."""
    obj: dict = {}
    base = Path(".")
    if args.config and not (command == "estimate" and args.space):
        obj = load_json(args.config)
        base = Path(args.config).parent
    for key in ("space", "loss", "sampler", "data"):
        val = getattr(args, key, None)
        if val is not None:
            obj[key] = str(Path(val).resolve())
    if command == "estimate" and args.space and args.config:
        obj["estimator"] = str(Path(args.config).resolve())
    for key in ("n", "reps", "seed", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            obj[key] = val
    if getattr(args, "n_grid", None):
        obj["n_grid"] = [int(v) for v in args.n_grid.split(",")]
    if getattr(args, "x_star", None):
        obj["x_star"] = [float(v) for v in args.x_star.split(",")]
    for key in ("out", "errors_csv", "curve_csv"):
        val = getattr(args, key, None)
        if val is not None:
            obj[key] = val
    if "space" not in obj or "loss" not in obj:
        raise ConfigError("a space and a loss are required (via --config or --space/--loss)")
    return ExperimentConfig.from_json(obj, base)


def _run_experiment(args, command: str) -> int:
    cfg = _experiment(args, command)
    try:
        outcome = run(cfg, command)
    except CltAborted as exc:
        print(f"clt aborted: {exc}", file=sys.stderr)
        print(stable_json(exc.report), file=sys.stderr, end="")
        return EXIT_FAIL
    if not cfg.out:
        sys.stdout.write(stable_json(outcome.result))
    for msg in outcome.failures:
        print(f"threshold failed: {msg}", file=sys.stderr)
    if command == "estimate" and not outcome.result.get("converged", True):
        print(f"estimator did not converge: {outcome.result.get('message')}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK if outcome.passed else EXIT_FAIL


def _space_arg(path) -> SpaceSpec:
    return SpaceSpec.from_json(load_json(path))


def cmd_cat_check(args) -> int:
    sp = as_space(_space_arg(args.space))
    res = selftest.cat_suite(sp, args.kappa, n=args.triangles, seed=args.seed, grid_n=args.grid_n)
    text = stable_json(res)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    ok = res["violations"] == 0
    print(f"{'PASS' if ok else 'FAIL'} cat-check kappa={args.kappa}: {res['violations']} of "
          f"{res['triangles']} triangles exceed tolerance, max excess {res['max_excess']:.3e}",
          file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_selftest(args) -> int:
    sp = as_space(_space_arg(args.space))
    checks = selftest.geometry_suite(sp, n=args.n, seed=args.seed)
    if sp.has_tangent:
        if args.loss:
            losses = [LossSpec.from_json(load_json(args.loss))]
        else:
            losses = [LossSpec.power(1), LossSpec.power(2), LossSpec.huber(0.1 * selftest.ball_radius(sp))]
        for loss in losses:
            checks += selftest.loss_suite(sp, loss, n=args.n, seed=args.seed)
    for c in checks:
        print(c.line())
    if args.out:
        Path(args.out).write_text(stable_json([c.to_json() for c in checks]), encoding="utf-8")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mest", description="Geodesically convex M-estimation experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sampler=True):
        sp.add_argument("--config", help="experiment JSON (for estimate with --space: estimator JSON)")
        sp.add_argument("--space", help="space JSON")
        sp.add_argument("--loss", help="loss JSON")
        if sampler:
            sp.add_argument("--sampler", help="sampler JSON")
            sp.add_argument("--x-star", dest="x_star", help="population minimizer, comma-separated coordinates")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="result JSON path (stdout if omitted)")

    est = sub.add_parser("estimate", help="minimize the empirical objective of a dataset")
    common(est)
    est.add_argument("--data", help='data JSON {"points": [...]}')
    est.add_argument("--n", type=int, help="sample size when drawing data from the sampler")

    clt = sub.add_parser("clt", help="replicated CLT experiment against the sandwich covariance")
    common(clt)
    clt.add_argument("--n", type=int)
    clt.add_argument("--reps", type=int)
    clt.add_argument("--errors-csv", dest="errors_csv")

    con = sub.add_parser("consistency", help="median estimation error across sample sizes")
    common(con)
    con.add_argument("--n-grid", dest="n_grid", help="comma-separated sample sizes")
    con.add_argument("--reps", type=int)
    con.add_argument("--curve-csv", dest="curve_csv")

    cat = sub.add_parser("cat-check", help="CAT(kappa) comparison on random triangles")
    cat.add_argument("--space", required=True)
    cat.add_argument("--kappa", type=float, required=True)
    cat.add_argument("--triangles", type=int, default=100)
    cat.add_argument("--grid-n", dest="grid_n", type=int, default=32)
    cat.add_argument("--seed", type=int, default=0)
    cat.add_argument("--out")

    st = sub.add_parser("selftest", help="geometry and loss property suites")
    st.add_argument("--space", required=True)
    st.add_argument("--loss", help="restrict the loss suite to this loss JSON")
    st.add_argument("--n", type=int, default=10_000)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "cat-check":
            return cmd_cat_check(args)
        if args.command == "selftest":
            return cmd_selftest(args)
        return _run_experiment(args, args.command)
    except (ConfigError, EstimationError, GeometryError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
