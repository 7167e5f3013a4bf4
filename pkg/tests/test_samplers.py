import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcmest import rng as rng_mod
from gcmest.geometry import SpaceSpec, make_space
from gcmest.samplers import SamplerSpec, TruncationWarning, default_truncation, sample

SPHERE = SpaceSpec.sphere(3, 1.0)
NORTH = (0.0, 0.0, 1.0)


def test_stream_is_deterministic_and_keyed():
    a = rng_mod.stream(7, 0, 3).random(4)
    np.testing.assert_array_equal(a, rng_mod.stream(7, 0, 3).random(4))
    assert not np.array_equal(a, rng_mod.stream(7, 0, 4).random(4))
    assert not np.array_equal(a, rng_mod.stream(8, 0, 3).random(4))


def test_stream_key_length_matters():
    # zero padding would otherwise make these identical
    assert not np.array_equal(rng_mod.stream(7, 0).random(4), rng_mod.stream(7, 0, 0).random(4))


def test_stream_rejects_negative_keys():
    with pytest.raises(ValueError):
        rng_mod.stream(-1)
    with pytest.raises(ValueError):
        rng_mod.stream(1, -2)


def test_sampler_validation():
    with pytest.raises(ValueError):
        SamplerSpec("Cauchy", center=(0.0,))
    with pytest.raises(ValueError):
        SamplerSpec("TangentGaussian")
    with pytest.raises(ValueError):
        SamplerSpec("TangentGaussian", center=(0.0,), scale=-1.0)
    with pytest.raises(ValueError):
        SamplerSpec("DiscreteSupport", support=[((0.0,), 0.4)])
    with pytest.raises(ValueError):
        SamplerSpec("Contaminated", center=(0.0,), scale=1.0)
    with pytest.raises(ValueError):
        SamplerSpec("Contaminated", center=(0.0,), contamination=(1.0, (1.0,)))
    assert SamplerSpec("tangent_gaussian", center=(0.0,)).kind == "TangentGaussian"


@pytest.mark.parametrize("samp", [
    SamplerSpec("TangentGaussian", center=NORTH, scale=0.2),
    SamplerSpec("GeodesicBallUniform", center=NORTH, scale=0.3, truncation=0.5),
    SamplerSpec("DiscreteSupport", support=[(NORTH, 0.25), ((1.0, 0.0, 0.0), 0.75)]),
    SamplerSpec("Contaminated", center=NORTH, scale=0.1, contamination=(0.2, (1.0, 0.0, 0.0)),
                contamination_scale=0.05),
], ids=lambda s: s.kind)
def test_sampler_json_roundtrip(samp):
    assert SamplerSpec.from_json(samp.to_json()) == samp


def test_zero_scale_returns_center():
    samp = SamplerSpec("TangentGaussian", center=NORTH, scale=0.0)
    np.testing.assert_array_equal(sample(samp, SPHERE, np.random.default_rng(0), size=5), np.tile(NORTH, (5, 1)))


def test_single_atom_support():
    samp = SamplerSpec("DiscreteSupport", support=[((0.0, 1.0, 0.0), 1.0)])
    z = sample(samp, SPHERE, np.random.default_rng(0), size=3)
    np.testing.assert_array_equal(z, np.tile([0.0, 1.0, 0.0], (3, 1)))


def test_single_draw_has_point_shape():
    samp = SamplerSpec("TangentGaussian", center=NORTH, scale=0.1)
    assert sample(samp, SPHERE, np.random.default_rng(0)).shape == (3,)
    spd = SpaceSpec.spd_affine(2)
    samp = SamplerSpec("TangentGaussian", center=(1.0, 0.0, 0.0, 1.0), scale=0.1)
    assert sample(samp, spd, np.random.default_rng(0), size=4).shape == (4, 2, 2)


def test_same_generator_state_gives_same_draws():
    samp = SamplerSpec("Contaminated", center=NORTH, scale=0.1, contamination=(0.3, (1.0, 0.0, 0.0)))
    a = sample(samp, SPHERE, rng_mod.stream(5, 0, 1), size=50)
    b = sample(samp, SPHERE, rng_mod.stream(5, 0, 1), size=50)
    np.testing.assert_array_equal(a, b)


def test_sphere_draws_stay_in_convexity_ball():
    sp = make_space(SPHERE)
    samp = SamplerSpec("TangentGaussian", center=NORTH, scale=0.5)
    with pytest.warns(TruncationWarning):
        z = sample(samp, SPHERE, np.random.default_rng(1), size=2000)
    assert np.max(sp.dist(np.array(NORTH), z)) < math.pi / 4
    assert default_truncation(sp) == pytest.approx(math.pi / 4)


def test_small_scale_does_not_warn(recwarn):
    samp = SamplerSpec("TangentGaussian", center=NORTH, scale=0.05)
    sample(samp, SPHERE, np.random.default_rng(1), size=2000)
    assert not [w for w in recwarn if issubclass(w.category, TruncationWarning)]


def test_gaussian_moments_euclidean():
    samp = SamplerSpec("TangentGaussian", center=(1.0, -2.0), scale=0.5)
    z = sample(samp, SpaceSpec.euclidean(2), np.random.default_rng(3), size=40_000)
    np.testing.assert_allclose(z.mean(axis=0), [1.0, -2.0], atol=0.02)
    np.testing.assert_allclose(np.cov(z, rowvar=False), 0.25 * np.eye(2), atol=0.01)


def test_ball_uniform_radius_law():
    # uniform on a k-ball: P(r <= s R) = s^k
    samp = SamplerSpec("GeodesicBallUniform", center=(0.0, 0.0, 0.0), scale=2.0)
    z = sample(samp, SpaceSpec.euclidean(3), np.random.default_rng(4), size=20_000)
    r = np.linalg.norm(z, axis=1)
    assert r.max() <= 2.0
    assert np.mean(r <= 1.0) == pytest.approx(1 / 8, abs=0.01)


def test_contamination_fraction():
    samp = SamplerSpec("Contaminated", center=(0.0,), scale=0.0, contamination=(0.2, (5.0,)))
    z = sample(samp, SpaceSpec.euclidean(1), np.random.default_rng(6), size=20_000)
    assert np.mean(z[:, 0] == 5.0) == pytest.approx(0.2, abs=0.01)


def test_tree_sampler_branch_symmetry(star):
    sp = make_space(star)
    hub = tuple(sp.node_point(0))
    samp = SamplerSpec("TangentGaussian", center=hub, scale=0.4)
    pts = sample(samp, star, np.random.default_rng(2), size=3000)
    # points are (edge, offset); draws exactly at the hub are counted on its canonical edge
    legs = pts[:, 0].astype(int)
    counts = np.bincount(legs, minlength=3)
    assert counts.sum() == 3000
    assert np.all(np.abs(counts / 3000 - 1 / 3) < 0.04)


@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 0.7))
def test_ball_sampler_respects_radius(seed, scale):
    sp = make_space(SPHERE)
    samp = SamplerSpec("GeodesicBallUniform", center=NORTH, scale=scale)
    z = sample(samp, SPHERE, np.random.default_rng(seed), size=50)
    assert np.max(sp.dist(np.array(NORTH), z)) <= scale + 1e-12
