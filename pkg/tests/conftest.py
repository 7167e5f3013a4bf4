import numpy as np
import pytest
from hypothesis import settings

from gcmest.geometry import SpaceSpec, TreeSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


SMOOTH_SPECS = {
    "euclidean": SpaceSpec.euclidean(3),
    "sphere": SpaceSpec.sphere(3, 1.0),
    "sphere_k4": SpaceSpec.sphere(3, 4.0),
    "hyperbolic": SpaceSpec.hyperbolic(3, -1.0),
    "hyperbolic_k2": SpaceSpec.hyperbolic(4, -2.0),
    "spd_affine": SpaceSpec.spd_affine(2),
    "spd_affine3": SpaceSpec.spd_affine(3),
    "bures_wasserstein": SpaceSpec.spd_bures_wasserstein(2, 0.05),
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def star():
    return SpaceSpec.metric_tree(TreeSpec.star(3, 1.0))


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion for the terminal summary."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
