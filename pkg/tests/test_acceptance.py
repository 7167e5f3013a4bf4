"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a one-line PASS/FAIL verdict that is printed in the
"acceptance criteria" section of the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from gcmest.asymptotics import clt_experiment
from gcmest.estimators import consistency_curve, minimize
from gcmest.geometry import SpaceSpec, TreeSpec, make_space
from gcmest.harness import ExperimentConfig, run
from gcmest.losses import LossSpec
from gcmest.samplers import SamplerSpec, sample
from gcmest import selftest

SPHERE = SpaceSpec.sphere(3, 1.0)
NORTH = (0.0, 0.0, 1.0)
SPHERE_SAMPLER = SamplerSpec("TangentGaussian", center=NORTH, scale=0.15)
CASES = 10_000


def test_c01_euclidean_mean(criterion):
    z = np.random.default_rng(1).normal(size=(1000, 3))
    start = time.perf_counter()
    res = minimize(SpaceSpec.euclidean(3), LossSpec.power(2), z)
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(res.x_hat - z.mean(axis=0))))
    ok = err <= 1e-8 and elapsed < 1.0
    assert criterion(1, "Euclidean mean equivalence", ok, f"max |x_hat - mean| = {err:.2e}, {elapsed:.3f} s")


def test_c02_euclidean_clt(criterion):
    samp = SamplerSpec("TangentGaussian", center=(0.0, 0.0), scale=1.0)
    start = time.perf_counter()
    rep = clt_experiment(SpaceSpec.euclidean(2), LossSpec.power(2), samp, (0.0, 0.0), n=200, reps=2000, seed=7)
    elapsed = time.perf_counter() - start
    ok = rep.frobenius_rel_err <= 0.10 and rep.mahalanobis_ks <= 0.04 and elapsed < 120
    detail = f"frobenius_rel_err {rep.frobenius_rel_err:.4f}, KS {rep.mahalanobis_ks:.4f}, {elapsed:.1f} s"
    assert criterion(2, "Euclidean CLT sanity", ok, detail)


def test_c03_sphere_barycenter_clt(criterion):
    start = time.perf_counter()
    rep = clt_experiment(SPHERE, LossSpec.power(2), SPHERE_SAMPLER, NORTH, n=400, reps=1000, seed=3)
    elapsed = time.perf_counter() - start
    bound = 0.1 * math.sqrt(np.linalg.norm(rep.V_hat.V))
    ok = rep.frobenius_rel_err <= 0.15 and rep.mean_norm <= bound and elapsed < 600
    detail = (f"frobenius_rel_err {rep.frobenius_rel_err:.4f}, mean_norm {rep.mean_norm:.4f} "
              f"(bound {bound:.4f}), {elapsed:.1f} s")
    assert criterion(3, "sphere barycenter CLT", ok, detail)


def test_c04_sphere_median_clt(criterion):
    start = time.perf_counter()
    rep = clt_experiment(SPHERE, LossSpec.power(1), SPHERE_SAMPLER, NORTH, n=400, reps=1000, seed=4)
    elapsed = time.perf_counter() - start
    ok = rep.frobenius_rel_err <= 0.20 and elapsed < 600
    detail = f"frobenius_rel_err {rep.frobenius_rel_err:.4f}, failures {rep.failures}, {elapsed:.1f} s"
    assert criterion(4, "sphere geometric-median CLT", ok, detail)


def test_c05_uniform_median_variance(criterion):
    samp = SamplerSpec("GeodesicBallUniform", center=(0.0,), scale=1.0)
    rep = clt_experiment(SpaceSpec.euclidean(1), LossSpec.power(1), samp, (0.0,), n=400, reps=2000, seed=5,
                         h=0.05)
    var = float(rep.empirical_cov[0, 0])
    ok = 0.85 <= var <= 1.15
    assert criterion(5, "1-D median variance", ok, f"variance of sqrt(n) x_hat {var:.4f} (oracle 1)")


def test_c06_consistency_rate(criterion):
    slopes = {}
    for p in (1, 2):
        table = consistency_curve(SPHERE, LossSpec.power(p), SPHERE_SAMPLER, NORTH, [100, 400, 1600, 6400],
                                  reps=200, seed=6)
        slopes[p] = table.slope
    ok = all(-0.65 <= s <= -0.35 for s in slopes.values())
    detail = ", ".join(f"Power({p}) slope {s:.4f}" for p, s in slopes.items())
    assert criterion(6, "consistency rate", ok, detail)


def test_c07_strong_convexity(criterion):
    sph = selftest.strong_convexity_suite(SPHERE, kappa=1.0, D=1.0, n=CASES, seed=7)
    flat = selftest.strong_convexity_suite(SpaceSpec.euclidean(3), kappa=0.0, D=2.0, n=CASES, seed=7)
    ok = sph.worst >= -1e-9 and flat.worst >= -1e-12
    detail = f"sphere min slack {sph.worst:.3e}, Euclidean min slack {flat.worst:.3e}"
    assert criterion(7, "strong convexity", ok, detail)


def test_c08_subgradient_monotonicity(criterion):
    worst = {}
    for spec in (SpaceSpec.euclidean(3), SPHERE, SpaceSpec.spd_affine(2)):
        sp = make_space(spec)
        huber = LossSpec.huber(0.1 * selftest.ball_radius(sp))
        for loss in (LossSpec.power(1), LossSpec.power(2), huber):
            checks = selftest.loss_suite(sp, loss, n=CASES, seed=8)
            mono = next(c for c in checks if c.name.startswith("subgradient monotonicity"))
            worst[(spec.kind, str(loss))] = mono.worst
    lo = min(worst.values())
    arg = min(worst, key=worst.get)
    ok = lo >= -1e-9
    assert criterion(8, "subgradient monotonicity", ok, f"min value {lo:.3e} at {arg[0]} {arg[1]} over 9 pairs")


def test_c09_geometry_suite(criterion):
    start = time.perf_counter()
    failed = []
    worst: dict[str, float] = {}
    specs = (SpaceSpec.euclidean(3), SPHERE, SpaceSpec.hyperbolic(3, -1.0), SpaceSpec.spd_affine(2))
    for spec in specs:
        for c in selftest.geometry_suite(spec, n=CASES, seed=9):
            worst[c.name] = max(worst.get(c.name, 0.0), c.worst)
            if not c.passed:
                failed.append(f"{spec.kind}: {c.line()}")
    elapsed = time.perf_counter() - start
    ok = not failed and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f} s"
    criterion(9, "geometry property suite", ok, detail)
    assert not failed, failed
    assert elapsed < 60


def test_c10_cat_certification(criterion):
    own = selftest.cat_suite(SPHERE, 1.0, n=1000, seed=10)
    flat = selftest.cat_suite(SPHERE, 0.0, n=1000, seed=10)
    tree_spec = SpaceSpec.metric_tree(
        TreeSpec((0, 1, 2, 3, 4, 5), ((0, 1, 1.0), (0, 2, 0.5), (0, 3, 2.0), (3, 4, 0.7), (3, 5, 1.2)))
    )
    tree = selftest.cat_suite(tree_spec, 0.0, n=1000, seed=10)
    frac = flat["nondegenerate_violations"] / max(flat["nondegenerate"], 1)
    ok = (own["max_excess"] <= 1e-8 and own["violations"] == 0 and frac >= 0.95
          and tree["max_excess"] <= 1e-9)
    detail = (f"kappa=1 max excess {own['max_excess']:.1e}; kappa=0 fails {frac:.1%} of "
              f"{flat['nondegenerate']} nondegenerate; tree max excess {tree['max_excess']:.1e}")
    assert criterion(10, "CAT certification", ok, detail)


def test_c11_robustness_contrast(criterion):
    sp = make_space(SPHERE)
    x_star = np.array(NORTH)
    outlier = (math.sin(1.0), 0.0, math.cos(1.0))  # at distance 1.0 from x_star
    samp = SamplerSpec("Contaminated", center=NORTH, scale=0.1, contamination=(0.2, outlier))
    data = sample(samp, SPHERE, np.random.default_rng(11), size=500)

    def displacement(loss):
        return float(sp.dist(x_star, minimize(sp, loss, data).x_hat))

    med, bar = displacement(LossSpec.power(1)), displacement(LossSpec.power(2))
    cs = np.geomspace(0.02, 1.5, 8)
    hub = [displacement(LossSpec.huber(c)) for c in cs]
    rho = float(stats.spearmanr(cs, hub).statistic)
    ok = med < 0.5 * bar and rho >= 0.9
    detail = f"median {med:.4f} vs barycenter {bar:.4f}, Huber Spearman {rho:.3f} over 8 values of c"
    assert criterion(11, "robustness contrast", ok, detail)


@pytest.mark.parametrize("command", ["clt"])
def test_c12_reproducibility(criterion, tmp_path, command):
    base = {
        "space": {"kind": "Euclidean", "dim": 2},
        "loss": {"kind": "power", "p": 2},
        "sampler": {"kind": "TangentGaussian", "center": [0.0, 0.0], "scale": 1.0},
        "n": 200, "reps": 2000, "seed": 7,
    }
    sphere = {
        "space": SPHERE.to_json(), "loss": {"kind": "power", "p": 1}, "sampler": SPHERE_SAMPLER.to_json(),
        "n_grid": [100, 400], "reps": 20, "seed": 6,
    }
    blobs = {}
    for workers in (1, 1, 2):
        tag = f"w{workers}_{len(blobs)}"
        clt = ExperimentConfig.from_json({**base, "workers": workers, "out": str(tmp_path / f"{tag}.json"),
                                          "errors_csv": str(tmp_path / f"{tag}.csv")})
        run(clt, command)
        con = ExperimentConfig.from_json({**sphere, "workers": workers, "out": str(tmp_path / f"{tag}_c.json"),
                                          "curve_csv": str(tmp_path / f"{tag}_c.csv")})
        run(con, "consistency")
        blobs[tag] = tuple((tmp_path / f"{tag}{s}").read_bytes() for s in (".json", ".csv", "_c.json", "_c.csv"))
    ok = len(set(blobs.values())) == 1
    detail = f"{len(blobs)} runs (workers 1, 1, 2) of clt and consistency: outputs {'identical' if ok else 'differ'}"
    assert criterion(12, "reproducibility", ok, detail)
