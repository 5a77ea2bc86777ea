import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import ndimage

from speedmaps.errors import MalformedGrid, MalformedZone
from speedmaps.geometry import Pose2D
from speedmaps.maps import (OccupancyGrid, SpeedLayer, SpeedZone, StaticSpeedMap, effective_limit,
                            effective_limit_near, load_grid, static_limit_at, zones_from_config,
                            zones_to_config)

from conftest import rect


def rect_oracle(zones, default, p, pad=0.0):
    """Independent limit lookup for axis-aligned rectangular zones."""
    lims = [lim for (x0, y0, x1, y1), lim in zones
            if x0 - pad <= p[0] <= x1 + pad and y0 - pad <= p[1] <= y1 + pad]
    return min(lims) if lims else default


# --- grids -----------------------------------------------------------------------

def test_load_grid_all_free():
    g = load_grid("grid 2 2 0.1 0 0 0\n..\n..\n")
    assert g.cells.shape == (2, 2) and not g.cells.any()
    assert g.resolution == 0.1


def test_load_grid_single_occupied():
    g = load_grid("grid 1 1 0.05 0 0 0\n#\n")
    assert g.cells.sum() == 1


def test_load_grid_top_row_is_top_of_map():
    g = load_grid("grid 3 2 1.0 0 0 0\n#..\n...\n")
    assert g.occupied((0, 1)) and not g.occupied((0, 0))
    assert g.occupied_at((0.5, 1.5))


@pytest.mark.parametrize("text", [
    "grid 2 2 0.1 0 0 0\n..\n.\n",          # ragged
    "grid 2 2 0.1 0 0 0\n..\n.x\n",         # unknown character
    "..\n..\n",                             # missing header
    "grid 2 2 0.1 0 0\n..\n..\n",           # short header
    "grid 2 2 0 0 0 0\n..\n..\n",           # zero resolution
    "grid 2 3 0.1 0 0 0\n..\n..\n",         # too few rows
])
def test_load_grid_errors(text):
    with pytest.raises(MalformedGrid):
        load_grid(text)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1),
       st.floats(0.01, 2.0), st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3))
def test_grid_text_round_trip(w, h, seed, res, ox, oy, th):
    cells = np.random.default_rng(seed).random((h, w)) < 0.4
    g = OccupancyGrid(res, Pose2D(ox, oy, th), cells)
    back = load_grid(g.to_text())
    assert np.array_equal(back.cells, g.cells)
    assert back.resolution == g.resolution
    assert (back.origin.x, back.origin.y, back.origin.theta) == (g.origin.x, g.origin.y, g.origin.theta)


@given(st.floats(0.01, 1.0), st.floats(-10, 10), st.floats(-10, 10), st.floats(-3.1, 3.1),
       st.integers(0, 49), st.integers(0, 29))
def test_world_cell_round_trip(res, ox, oy, th, i, j):
    g = OccupancyGrid.empty(50, 30, res, Pose2D(ox, oy, th))
    assert g.cell_of(g.world_of((i, j))) == (i, j)


def test_out_of_bounds_is_occupied():
    g = OccupancyGrid.empty(3, 3, 1.0)
    assert g.occupied((-1, 0)) and g.occupied((3, 0)) and g.occupied_at((10.0, 1.0))
    assert not g.occupied_at((1.5, 1.5))


def test_occupied_points_matches_scalar(rng):
    g = OccupancyGrid(0.2, Pose2D(1.0, -2.0, 0.4), rng.random((20, 30)) < 0.3)
    pts = rng.uniform(-5, 10, (500, 2))
    assert np.array_equal(g.occupied_points(pts), [g.occupied_at(p) for p in pts])


def test_inflation_matches_disc_dilation_oracle():
    cells = np.zeros((21, 21), dtype=bool)
    cells[10, 10] = True
    g = OccupancyGrid(0.1, Pose2D(), cells).inflated(0.3)
    jj, ii = np.nonzero(g.cells)
    # exactly the cells within 3 cells (Euclidean, in cell units) of the seed
    assert set(zip(ii, jj)) == {(i, j) for i in range(21) for j in range(21)
                                if (i - 10) ** 2 + (j - 10) ** 2 <= 9}


def test_clearance_is_a_safe_lower_bound(rng):
    g = OccupancyGrid(0.1, Pose2D(), rng.random((30, 40)) < 0.05)
    occ_centers = np.array([g.world_of((i, j)) for j, i in zip(*np.nonzero(g.cells))])
    pts = rng.uniform(-0.5, 4.5, (400, 2))
    clear = g.clearance_points(pts)
    for p, c in zip(pts, clear):
        if c == 0.0:
            continue
        # nothing occupied or off-map lies within c of p
        assert not g.occupied_at(p)
        assert np.hypot(*(occ_centers - p).T).min() - g.resolution / math.sqrt(2) >= c - 1e-12
        assert p[0] - c >= 0 and p[1] - c >= 0 and p[0] + c <= 4.0 and p[1] + c <= 3.0


# --- static speed map ---------------------------------------------------------------

GREEN, YELLOW, RED = 1.5, 0.5, 0.15


def test_static_limit_inside_green():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 10, 10), GREEN, "green"),), YELLOW)
    assert static_limit_at(m, (5, 5)) == 1.5


def test_static_limit_overlap_takes_minimum():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 4, 4), YELLOW, "yellow"),
                        SpeedZone(rect(1, 1, 2, 2), RED, "red")), YELLOW)
    assert static_limit_at(m, (1.5, 1.5)) == 0.15
    assert m.zone_class_at((1.5, 1.5)) == "red"


def test_static_limit_default_outside_zones():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 1, 1), GREEN, "green"),), 0.5)
    assert static_limit_at(m, (3, 3)) == 0.5
    assert m.zone_class_at((3, 3)) == "yellow"


def test_zone_boundary_counts_as_inside():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 1, 1), RED, "red"),), YELLOW)
    assert static_limit_at(m, (1.0, 0.5)) == RED


def test_limit_near_sees_zone_within_radius():
    m = StaticSpeedMap((SpeedZone(rect(2, 0, 3, 1), RED, "red"),), GREEN)
    assert m.limit_near((1.5, 0.5), 0.4) == GREEN
    assert m.limit_near((1.5, 0.5), 0.5) == RED


# --- layers ------------------------------------------------------------------------

def test_effective_limit_without_layers_equals_static():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 1, 1), RED, "red"),), YELLOW)
    for p in [(0.5, 0.5), (2, 2)]:
        assert effective_limit(m, [], p, 0.0) == static_limit_at(m, p)


def test_layer_disc_lowers_limit():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 10, 10), GREEN, "green"),), YELLOW)
    layer = SpeedLayer((((5, 5), 1.0, 0.5),))
    assert effective_limit(m, [layer], (5.5, 5), 0.0) == 0.5
    assert effective_limit(m, [layer], (7, 5), 0.0) == GREEN


def test_layer_cannot_raise_limit():
    m = StaticSpeedMap((SpeedZone(rect(0, 0, 10, 10), RED, "red"),), YELLOW)
    layer = SpeedLayer((((5, 5), 1.0, 0.5),))
    assert effective_limit(m, [layer], (5, 5), 0.0) == RED


def test_expired_layer_is_ignored():
    m = StaticSpeedMap((), GREEN)
    layer = SpeedLayer((((0, 0), 1.0, 0.2),), expiry=1.0)
    assert effective_limit(m, [layer], (0, 0), 1.0) == 0.2
    assert effective_limit(m, [layer], (0, 0), 1.0 + 1e-9) == GREEN


def test_layer_validation():
    with pytest.raises(ValueError):
        SpeedLayer((((0, 0), 0.0, 0.5),))
    with pytest.raises(ValueError):
        SpeedLayer((((0, 0), 1.0, -0.1),))


def test_effective_limit_near_bounds_limits_in_the_disc(rng):
    m = StaticSpeedMap((SpeedZone(rect(2, 2, 3, 3), RED, "red"),
                        SpeedZone(rect(0, 0, 6, 6), GREEN, "green")), YELLOW)
    layer = SpeedLayer((((4, 1), 0.5, 0.3),))
    for _ in range(200):
        p, r = rng.uniform(0, 6, 2), rng.uniform(0, 1.5)
        near = effective_limit_near(m, [layer], p, 0.0, r)
        for _ in range(20):
            a, s = rng.uniform(0, 2 * math.pi), r * math.sqrt(rng.uniform())
            q = p + s * np.array([math.cos(a), math.sin(a)])
            assert near <= effective_limit(m, [layer], q, 0.0)


# --- layering properties ---------------------------------------------------------

box = st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 5), st.floats(0.1, 5)).map(
    lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))
limit = st.floats(0.01, 3.0)
zone_list = st.lists(st.tuples(box, limit), max_size=5)
disc = st.tuples(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), st.floats(0.05, 3), st.floats(0, 3))
point = st.tuples(st.floats(-6, 6), st.floats(-6, 6))


def to_map(zones, default):
    return StaticSpeedMap(tuple(SpeedZone(rect(*b), lim) for b, lim in zones), default)


@given(zone_list, limit, point)
def test_static_limit_matches_rectangle_oracle(zones, default, p):
    # skip points within the boundary tolerance of an edge, where inside/outside is a convention
    assume(rect_oracle(zones, default, p, 1e-9) == rect_oracle(zones, default, p))
    assert static_limit_at(to_map(zones, default), p) == rect_oracle(zones, default, p)


@given(zone_list, limit, point, st.randoms(use_true_random=False))
def test_static_limit_order_independent(zones, default, p, rnd):
    shuffled = list(zones)
    rnd.shuffle(shuffled)
    assert static_limit_at(to_map(zones, default), p) == static_limit_at(to_map(shuffled, default), p)


@given(zone_list, st.lists(disc, max_size=4), disc, limit, point)
def test_adding_layer_never_raises_limit(zones, discs, extra_disc, default, p):
    m = to_map(zones, default)
    layers = [SpeedLayer((d,)) for d in discs]
    base = effective_limit(m, layers, p, 0.0)
    assert base <= static_limit_at(m, p)
    assert effective_limit(m, layers + [SpeedLayer((extra_disc,))], p, 0.0) <= base


@given(zone_list, st.tuples(box, limit), limit, point)
def test_adding_zone_never_raises_covered_limit(zones, extra_zone, default, p):
    # the default is a fallback for uncovered space, so a fast zone may raise it;
    # wherever some zone already applies, another zone can only lower the limit
    # skip points inside the boundary tolerance band, where "covered" is ambiguous
    assume(rect_oracle(zones, math.inf, p, 1e-9) == rect_oracle(zones, math.inf, p))
    m = to_map(zones, default)
    covered = rect_oracle(zones, math.inf, p) < math.inf
    after = static_limit_at(to_map(zones + [extra_zone], default), p)
    if covered:
        assert after <= static_limit_at(m, p)
    else:
        assert after <= max(default, extra_zone[1])


def test_fast_zone_overrides_default():
    m = to_map([((0, 0, 1, 1), GREEN)], YELLOW)
    assert static_limit_at(m, (0.5, 0.5)) == GREEN


# --- zone config -----------------------------------------------------------------

def test_red_zone_config():
    m = zones_from_config("zone red 0.15 0 0 2 0 2 2 0 2\n")
    assert static_limit_at(m, (1, 1)) == 0.15
    assert m.zones[0].zone_class == "red"


def test_empty_zone_config_is_default_everywhere():
    m = zones_from_config("default 0.5\n")
    assert m.zones == () and static_limit_at(m, (123, -4)) == 0.5


def test_zone_vertices_are_hullified():
    m = zones_from_config("zone green 1.5 0 0 2 2 2 0 1 1 0 2\n")
    assert len(m.zones[0].region) == 4
    assert m.zones[0].region.signed_area() == pytest.approx(4.0)


@pytest.mark.parametrize("doc", [
    "zone red 0.15 0 0 1 1\n",                 # two vertices
    "zone red 0 0 0 1 0 1 1\n",                # zero limit
    "zone red -1 0 0 1 0 1 1\n",               # negative limit
    "zone red 0.15 0 0 1 1 2 2\n",             # collinear
    "zone red 0.15 0 0 1 0 1\n",               # odd coordinate count
    "zone purple 0.15 0 0 1 0 1 1\n",          # unknown class
    "zone red abc 0 0 1 0 1 1\n",              # non-numeric
    "default -0.5\n",
    "speed 1\n",
])
def test_zone_config_errors(doc):
    with pytest.raises(MalformedZone):
        zones_from_config(doc)


def test_zone_config_round_trip():
    m = zones_from_config("default 0.4\nzone green 1.5 0 0 4 0 4 4 0 4\nzone red 0.15 1 1 2 1 2 2\n")
    back = zones_from_config(zones_to_config(m))
    assert back == m


def test_inflation_uses_scipy_reference():
    rng = np.random.default_rng(3)
    cells = rng.random((15, 15)) < 0.1
    g = OccupancyGrid(0.1, Pose2D(), cells)
    yy, xx = np.mgrid[-4:5, -4:5]
    expected = ndimage.binary_dilation(cells, structure=xx ** 2 + yy ** 2 <= 16)
    assert np.array_equal(g.inflated(0.35).cells, expected)
