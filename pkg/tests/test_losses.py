import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcmest.geometry import SpaceSpec, make_space
from gcmest.losses import (
    LossSpec,
    convexity_probe,
    cost,
    cost_subgradient,
    loss_subderivative,
    loss_value,
    monotonicity_probe,
)

from conftest import SMOOTH_SPECS

LOSSES = [LossSpec.power(1), LossSpec.power(1.5), LossSpec.power(2), LossSpec.power(3), LossSpec.huber(0.2)]
PROBE_SPECS = ["euclidean", "sphere", "hyperbolic", "spd_affine"]


def _ball(sp, rng, k, radius):
    c = sp.random_point(rng)
    out = []
    for _ in range(k):
        v = sp.random_tangent(c, rng)
        out.append(sp.exp(c, v * (radius * rng.random() / float(sp.norm(c, v)))))
    return out


def _radius(spec):
    return 0.25 if spec.kind == "Sphere" else 0.6


def test_loss_spec_validation():
    with pytest.raises(ValueError):
        LossSpec.power(0.5)
    with pytest.raises(ValueError):
        LossSpec.huber(0.0)
    with pytest.raises(ValueError):
        LossSpec("quantile")


@pytest.mark.parametrize("loss", LOSSES, ids=str)
def test_loss_json_roundtrip(loss):
    assert LossSpec.from_json(loss.to_json()) == loss


def test_loss_value_examples():
    assert loss_value(LossSpec.huber(1.0), 0.5) == 0.25
    assert loss_value(LossSpec.huber(1.0), 2.0) == 3.0
    assert loss_value(LossSpec.power(2), 3.0) == 9.0
    with pytest.raises(ValueError):
        loss_value(LossSpec.power(2), -1.0)


def test_loss_subderivative_examples():
    assert loss_subderivative(LossSpec.power(2), 3.0) == 6.0
    assert loss_subderivative(LossSpec.huber(1.0), 2.0) == 2.0
    assert loss_subderivative(LossSpec.huber(1.0), 1.0) == 2.0
    assert loss_subderivative(LossSpec.power(1), 0.0) == 0.0
    assert loss_subderivative(LossSpec.power(1.5), 0.0) == 0.0


@pytest.mark.parametrize("loss", LOSSES, ids=str)
def test_subderivative_matches_finite_differences(loss):
    for u in (0.05, 0.13, 0.7, 2.5):
        if loss.kind == "huber" and abs(u - loss.c) < 0.05:
            continue
        h = 1e-6
        fd = (loss_value(loss, u + h) - loss_value(loss, u - h)) / (2 * h)
        assert loss_subderivative(loss, u) == pytest.approx(fd, rel=1e-6)


@given(u=st.floats(0, 10), w=st.floats(0, 10), t=st.floats(0, 1), i=st.integers(0, len(LOSSES) - 1))
def test_profile_convex_nondecreasing(u, w, t, i):
    loss = LOSSES[i]
    lo, hi = min(u, w), max(u, w)
    assert loss_value(loss, lo) <= loss_value(loss, hi)
    mid = (1 - t) * u + t * w
    bound = (1 - t) * loss_value(loss, u) + t * loss_value(loss, w)
    assert loss_value(loss, mid) <= bound + 1e-9 * (1 + abs(bound))


def test_cost_examples():
    S = SpaceSpec.sphere(3, 1.0)
    E = SpaceSpec.euclidean(3)
    assert cost(LossSpec.power(1), S, [1, 0, 0], [1, 0, 0]) == 0.0
    assert cost(LossSpec.power(1), S, np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) == pytest.approx(math.pi / 2)
    assert cost(LossSpec.power(2), E, np.array([1.0, 2, 3]), np.array([0.0, 0, 1])) == pytest.approx(9.0)


def test_subgradient_examples(rng):
    E = SpaceSpec.euclidean(3)
    z, x = rng.normal(size=(2, 3))
    np.testing.assert_allclose(cost_subgradient(LossSpec.power(2), E, z, x), 2 * (x - z), atol=1e-14)
    np.testing.assert_array_equal(cost_subgradient(LossSpec.power(1), E, x, x), np.zeros(3))
    S = make_space(SpaceSpec.sphere(3, 1.0))
    x = np.array([0.0, 0, 1])
    z = S.exp(x, np.array([0.3, -0.2, 0]))
    g = cost_subgradient(LossSpec.power(1), S, z, x)
    assert float(S.norm(x, g)) == pytest.approx(1.0, abs=1e-14)
    # points away from z: moving along g increases the distance
    assert float(S.inner(x, g, S.log(x, z))) < 0


def test_kink_selection_satisfies_subgradient_inequality(rng):
    S = make_space(SpaceSpec.sphere(3, 1.0))
    x = np.array([0.0, 0, 1])
    g = cost_subgradient(LossSpec.power(1), S, x, x)
    for _ in range(50):
        u = S.random_tangent(x, rng, 0.3)
        assert cost(LossSpec.power(1), S, x, S.exp(x, u)) >= cost(LossSpec.power(1), S, x, x) + S.inner(x, g, u)


def test_batched_subgradients(rng):
    S = make_space(SpaceSpec.sphere(3, 1.0))
    x = np.array([0.0, 0, 1])
    zs = np.stack([S.exp(x, S.random_tangent(x, rng, 0.2)) for _ in range(5)] + [x])
    loss = LossSpec.huber(0.1)
    batch = cost_subgradient(loss, S, zs, x)
    np.testing.assert_allclose(batch, [cost_subgradient(loss, S, z, x) for z in zs], atol=1e-15)


@pytest.mark.parametrize("name", PROBE_SPECS)
@pytest.mark.parametrize("loss", [LossSpec.power(2), LossSpec.power(3), LossSpec.huber(0.2)], ids=str)
def test_gradient_matches_finite_differences(name, loss, rng):
    spec = SMOOTH_SPECS[name]
    sp = make_space(spec)
    checked = 0
    while checked < 5:
        z, x = _ball(sp, rng, 2, _radius(spec))
        d = float(sp.dist(z, x))
        if loss.kind == "huber" and abs(d - loss.c) <= 0.05:
            continue
        g = cost_subgradient(loss, sp, z, x)
        for _ in range(2 * sp.tangent_dim):
            u = sp.random_tangent(x, rng)
            h = 1e-5
            fd = (cost(loss, sp, z, sp.exp(x, h * u)) - cost(loss, sp, z, sp.exp(x, -h * u))) / (2 * h)
            assert float(sp.inner(x, g, u)) == pytest.approx(float(fd), rel=1e-5, abs=1e-9)
        checked += 1


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(PROBE_SPECS), i=st.integers(0, len(LOSSES) - 1))
def test_subgradient_inequality_property(seed, name, i):
    spec = SMOOTH_SPECS[name]
    sp = make_space(spec)
    loss = LOSSES[i]
    rng = np.random.default_rng(seed)
    z, x, y = _ball(sp, rng, 3, _radius(spec))
    u = sp.log(x, y)
    g = cost_subgradient(loss, sp, z, x)
    gap = cost(loss, sp, z, y) - cost(loss, sp, z, x) - sp.inner(x, g, u)
    assert gap >= -1e-8 * (1 + float(sp.norm(x, u)))


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(PROBE_SPECS), i=st.integers(0, len(LOSSES) - 1))
def test_monotonicity_property(seed, name, i):
    spec = SMOOTH_SPECS[name]
    sp = make_space(spec)
    rng = np.random.default_rng(seed)
    z, x, y = _ball(sp, rng, 3, _radius(spec))
    assert monotonicity_probe(LOSSES[i], sp, z, x, sp.log(x, y)) >= -1e-9


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(PROBE_SPECS), t=st.floats(0, 1))
def test_cost_convexity_property(seed, name, t):
    spec = SMOOTH_SPECS[name]
    sp = make_space(spec)
    rng = np.random.default_rng(seed)
    z, x, y = _ball(sp, rng, 3, _radius(spec))
    for loss in LOSSES:
        assert convexity_probe(loss, sp, z, x, y, t) >= -1e-9


def test_convexity_probe_endpoints(rng):
    E = SpaceSpec.euclidean(2)
    z, x, y = rng.normal(size=(3, 2))
    for t in (0.0, 1.0):
        assert convexity_probe(LossSpec.power(2), E, z, x, y, t) == pytest.approx(0.0, abs=1e-14)


def test_sphere_distance_not_convex_beyond_hemisphere():
    # the ball restriction matters: far from z the distance along a great circle is concave
    S = SpaceSpec.sphere(3, 1.0)
    z = np.array([0.0, 0, 1])
    x = np.array([math.sin(2.0), 0, math.cos(2.0)])
    y = np.array([0, math.sin(2.0), math.cos(2.0)])
    assert convexity_probe(LossSpec.power(1), S, z, x, y, 0.5) < 0
