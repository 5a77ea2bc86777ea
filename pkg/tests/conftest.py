import math
import pathlib
import sys

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from speedmaps.geometry import Polygon2D, Transform3D

ROOT = pathlib.Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)


@st.composite
def unit_quaternions(draw):
    v = draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4))
    n = math.sqrt(sum(c * c for c in v))
    if n < 1e-3:
        return (1.0, 0.0, 0.0, 0.0)
    return tuple(c / n for c in v)


@st.composite
def transforms(draw):
    t = tuple(draw(st.lists(st.floats(-20, 20, allow_nan=False), min_size=3, max_size=3)))
    return Transform3D(t, draw(unit_quaternions()))


def random_transform(rng: np.random.Generator, scale: float = 10.0) -> Transform3D:
    q = rng.normal(size=4)
    return Transform3D(tuple(rng.uniform(-scale, scale, 3)), tuple(q / np.linalg.norm(q)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rect(x0, y0, x1, y1) -> Polygon2D:
    return Polygon2D(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
