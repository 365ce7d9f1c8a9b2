import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from rulerank import geometry as geo
from rulerank.geometry import OrientedBox


# ---------------------------------------------------------------------------
# oracles


def dense_boundary(poly: np.ndarray, spacing: float) -> np.ndarray:
    """Points along a closed polygon boundary, vertices included."""
    pts = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        m = max(2, int(np.ceil(np.linalg.norm(b - a) / spacing)) + 1)
        pts.append(a + np.linspace(0.0, 1.0, m)[:, None] * (b - a))
    return np.concatenate(pts)


def segment_distances(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    n = len(poly)
    return np.min([geo.point_segment_distance(points, poly[i], poly[(i + 1) % n]) for i in range(n)], axis=0)


def inside_convex(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Strictly inside a counter-clockwise convex polygon."""
    out = np.ones(len(points), dtype=bool)
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        cross = (b[0] - a[0]) * (points[:, 1] - a[1]) - (b[1] - a[1]) * (points[:, 0] - a[0])
        out &= cross > 0
    return out


def square(cx, cy, half):
    return np.array([[cx - half, cy - half], [cx + half, cy - half], [cx + half, cy + half], [cx - half, cy + half]])


# ---------------------------------------------------------------------------
# kinematics


def test_constant_speed_line_has_zero_derivatives():
    T = 50
    states = np.column_stack([np.arange(T) * 1.0, np.zeros(T), np.full(T, 0.3), np.full(T, 10.0)])
    prof = geo.kinematics(states)
    for arr in (prof.accel, prof.jerk, prof.yaw_rate, prof.lat_accel, prof.yaw_accel, prof.decel):
        assert arr.shape == (T,)
        np.testing.assert_allclose(arr, 0.0, atol=1e-12)


def test_ramp_matches_unsmoothed_differences():
    speed = np.linspace(0.0, 10.0, 50)
    raw = np.gradient(speed, 0.1)
    prof = geo.kinematics(np.column_stack([np.zeros(50), np.zeros(50), np.zeros(50), speed]))
    np.testing.assert_allclose(prof.accel[2:-2], raw[2:-2], atol=1e-12)
    assert prof.accel[10] == pytest.approx(2.041, abs=1e-3)


def test_seam_crossing_has_no_spikes():
    h = np.arctan2(np.sin(np.pi - 0.3 + 0.02 * np.arange(50)), np.cos(np.pi - 0.3 + 0.02 * np.arange(50)))
    prof = geo.kinematics(np.column_stack([np.zeros(50), np.zeros(50), h, np.full(50, 3.0)]))
    np.testing.assert_allclose(prof.yaw_rate, 0.2, atol=1e-12)
    np.testing.assert_allclose(prof.lat_accel, 0.6, atol=1e-12)


def test_kinematics_needs_three_frames_and_odd_window():
    with pytest.raises(geo.GeometryError, match="insufficient frames"):
        geo.kinematics(np.zeros((2, 4)))
    with pytest.raises(geo.GeometryError):
        geo.kinematics(np.zeros((10, 4)), window=2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=60), st.sampled_from([1, 3, 5]))
def test_kinematics_finite_and_same_length(values, window):
    v = np.abs(np.array(values))
    h = np.array(values) / 100.0
    prof = geo.kinematics(np.column_stack([np.zeros_like(v), np.zeros_like(v), h, v]), window)
    for arr in (prof.accel, prof.jerk, prof.yaw_rate, prof.lat_accel, prof.yaw_accel, prof.decel):
        assert arr.shape == v.shape
        assert np.all(np.isfinite(arr))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40), st.sampled_from([1, 3, 5, 7]))
def test_derivative_and_smoothing_match_naive_forms(values, window):
    x = np.array(values)
    np.testing.assert_allclose(geo.derivative(x, 0.1), np.gradient(x, 0.1), rtol=1e-12, atol=1e-9)
    half = window // 2
    naive = np.array([x[max(0, i - half): i + half + 1].mean() for i in range(len(x))])
    np.testing.assert_allclose(geo.moving_average(x, window), naive, rtol=1e-9, atol=1e-9)
    batch = np.stack([x, 2 * x])
    np.testing.assert_allclose(geo.moving_average(batch, window)[1], 2 * geo.moving_average(x, window),
                               rtol=1e-9, atol=1e-9)


# ---------------------------------------------------------------------------
# oriented boxes


def test_identical_unit_boxes_fully_overlap():
    a = OrientedBox(1.0, 2.0, 0.7, 1.0, 1.0)
    assert geo.obb_penetration(a, a) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_far_boxes_do_not_penetrate():
    assert geo.obb_penetration(OrientedBox(0, 0, 0, 4, 2), OrientedBox(100, 0, 0, 4, 2)) == (0.0, 0.0)


def test_axis_aligned_interval_overlap():
    # x extents [-2, 2] and [1.5, 5.5] overlap by 0.5; y extents coincide (2.0)
    p_long, p_lat = geo.obb_penetration(OrientedBox(0, 0, 0, 4, 2), OrientedBox(3.5, 0, 0, 4, 2))
    assert p_long == pytest.approx(0.5, abs=1e-12)
    assert p_lat == pytest.approx(2.0, abs=1e-12)


def test_separated_on_one_axis_means_no_penetration():
    # overlapping on x but separated on y
    assert geo.obb_penetration(OrientedBox(0, 0, 0, 4, 2), OrientedBox(1, 5, 0, 4, 2)) == (0.0, 0.0)


boxes = st.builds(
    OrientedBox,
    st.floats(-10, 10), st.floats(-10, 10), st.floats(-np.pi, np.pi), st.floats(0.2, 6.0), st.floats(0.2, 3.0),
)


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_penetration_positive_iff_shapes_intersect(a, b):
    pa, pb = shapely.Polygon(a.corners()), shapely.Polygon(b.corners())
    p_long, p_lat = geo.obb_penetration(a, b)
    area = pa.intersection(pb).area
    if area > 1e-6:
        assert p_long > 0 and p_lat > 0
    if pa.distance(pb) > 1e-6:
        assert (p_long, p_lat) == (0.0, 0.0)


def test_overlapping_boxes_have_zero_edge_distance():
    assert geo.edge_distance(OrientedBox(0, 0, 0, 4, 2), OrientedBox(1, 0, 0.4, 4, 2)) == 0.0


def test_edge_distance_axis_aligned():
    assert geo.edge_distance(OrientedBox(0, 0, 0, 2, 2), OrientedBox(10, 0, 0, 2, 2)) == pytest.approx(8.0, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(boxes, boxes)
def test_edge_distance_matches_boundary_sampling(a, b):
    ca, cb = a.corners(), b.corners()
    if shapely.Polygon(ca).intersects(shapely.Polygon(cb)):
        assert geo.edge_distance(a, b) == 0.0
        return
    oracle = min(segment_distances(dense_boundary(ca, 0.5), cb).min(),
                 segment_distances(dense_boundary(cb, 0.5), ca).min())
    assert geo.edge_distance(a, b) == pytest.approx(oracle, abs=1e-6)


# ---------------------------------------------------------------------------
# overlap area


def test_box_inside_polygon_gives_box_area():
    box = OrientedBox(0, 0, 0.3, 2.0, 1.0)
    assert geo.polygon_overlap_area(box, square(0, 0, 5)) == pytest.approx(2.0, abs=1e-12)


def test_disjoint_overlap_is_zero():
    assert geo.polygon_overlap_area(OrientedBox(0, 0, 0, 1, 1), square(10, 10, 1)) == 0.0


def test_half_covered_box_against_monte_carlo():
    box = OrientedBox(0.5, 0.0, 0.0, 1.0, 1.0)
    poly = square(0.0, 0.0, 0.5)
    got = geo.polygon_overlap_area(box, poly)
    pts = np.random.default_rng(0).uniform([0.0, -0.5], [1.0, 0.5], size=(4_000_000, 2))
    mc = np.mean(inside_convex(pts, poly))
    assert got == pytest.approx(0.5, abs=1e-12)
    assert got == pytest.approx(mc, abs=1e-3)


L_SHAPE = np.array([[0, 0], [6, 0], [6, 2], [2, 2], [2, 6], [0, 6]], dtype=float)


@settings(max_examples=200, deadline=None)
@given(boxes)
def test_overlap_area_matches_shapely_on_concave_polygon(box):
    want = shapely.Polygon(box.corners()).intersection(shapely.Polygon(L_SHAPE)).area
    assert geo.polygon_overlap_area(box, L_SHAPE) == pytest.approx(want, abs=1e-9)


def test_batched_overlap_matches_piecewise_clipping():
    rng = np.random.default_rng(1)
    c = geo.box_corners(rng.uniform(-1, 7, 300), rng.uniform(-1, 7, 300), rng.uniform(-np.pi, np.pi, 300),
                        rng.uniform(0.5, 5, 300), rng.uniform(0.5, 3, 300))
    pieces = geo.convex_pieces(L_SHAPE)
    batch = geo.overlap_area_batch(c, pieces)
    ref = np.array([geo.overlap_area_pieces(ci, pieces) for ci in c])
    np.testing.assert_allclose(batch, ref, atol=1e-10)


def test_batched_overlap_handles_shared_edges():
    # box edges lying exactly on polygon edges
    c = geo.box_corners(np.array([1.0]), np.array([1.0]), np.array([0.0]), np.array([2.0]), np.array([2.0]))
    assert geo.overlap_area_batch(c, geo.convex_pieces(square(1.0, 1.0, 1.0)))[0] == pytest.approx(4.0, abs=1e-12)


# ---------------------------------------------------------------------------
# signed distance


def test_square_centre_and_outside():
    sq = square(0.0, 0.0, 5.0)
    assert geo.signed_distance_to_region((0.0, 0.0), [sq]) == pytest.approx(5.0)
    assert geo.signed_distance_to_region((6.0, 0.0), [sq]) == pytest.approx(-1.0)


def union_oracle(point, polys, spacing=1e-3):
    keep = []
    for i, p in enumerate(polys):
        pts = dense_boundary(p, spacing)
        others = [q for j, q in enumerate(polys) if j != i]
        mask = np.ones(len(pts), dtype=bool)
        for q in others:
            mask &= ~inside_convex(pts, q)
        keep.append(pts[mask])
    pts = np.concatenate(keep)
    d = np.min(np.hypot(pts[:, 0] - point[0], pts[:, 1] - point[1]))
    inside = any(inside_convex(np.array([point]), q)[0] for q in polys)
    return d if inside else -d


@pytest.mark.parametrize("point", [(4.5, 0.2), (3.0, 2.4), (7.5, -1.0), (4.0, 4.0), (-3.0, 0.5)])
def test_union_distance_matches_dense_boundary(point):
    polys = [square(0.0, 0.0, 3.0), square(5.0, 0.0, 3.0)]
    got = geo.signed_distance_to_region(point, polys)
    assert got == pytest.approx(union_oracle(point, polys), abs=1e-3)


@pytest.mark.parametrize("point", [(4.5, 0.2), (3.0, 2.4), (7.5, -1.0), (4.0, 4.0), (-3.0, 0.5)])
def test_region_outside_distance_matches_dense_boundary(point):
    polys = [square(0.0, 0.0, 3.0), square(5.0, 0.0, 3.0)]
    got = float(geo.Region(polys).distance(np.array(point)))
    assert got == pytest.approx(max(0.0, -union_oracle(point, polys)), abs=1e-3)


def test_point_between_overlapping_squares_is_interior():
    # inside both squares, so the shared edges are not part of the union boundary
    polys = [square(0.0, 0.0, 3.0), square(5.0, 0.0, 3.0)]
    assert geo.signed_distance_to_region((2.5, 0.0), polys) == pytest.approx(3.0, abs=1e-12)


# ---------------------------------------------------------------------------
# polylines


def test_lateral_offset_sign_convention():
    line = np.array([[0.0, 0.0], [10.0, 0.0]])
    assert geo.lateral_offset((5.0, 0.0), line) == (0.0, 0.0)
    d, h = geo.lateral_offset((5.0, 1.2), line)
    assert d == pytest.approx(1.2) and h == 0.0
    assert geo.lateral_offset((5.0, -1.2), line)[0] == pytest.approx(-1.2)


def brute_force_offset(p, line):
    best = None
    for a, b in zip(line[:-1], line[1:]):
        v = b - a
        t = np.clip(np.dot(p - a, v) / np.dot(v, v), 0.0, 1.0)
        foot = a + t * v
        d = np.linalg.norm(p - foot)
        cross = v[0] * (p - a)[1] - v[1] * (p - a)[0]
        if best is None or d < best[0]:
            best = (d, d if cross >= 0 else -d, np.arctan2(v[1], v[0]))
    return best[1], best[2]


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 15), st.floats(-5, 15))
def test_lateral_offset_near_corner_matches_per_segment_projection(x, y):
    line = np.array([[0.0, 0.0], [5.0, 0.0], [5.0, 5.0], [10.0, 8.0]])
    got = geo.lateral_offset((x, y), line)
    want = brute_force_offset(np.array([x, y]), line)
    assert got[0] == pytest.approx(want[0], abs=1e-9)


def test_lane_set_matches_single_polyline_projection():
    rng = np.random.default_rng(2)
    lines = [geo.Polyline.from_points(np.cumsum(rng.normal(0, 3, size=(n, 2)), axis=0)) for n in (2, 5, 9)]
    pts = rng.uniform(-10, 10, size=(4, 7, 2))
    stacked = geo.LaneSet(lines).project(pts)
    for i, line in enumerate(lines):
        single = line.project(pts)
        for a, b in zip(stacked, single):
            np.testing.assert_allclose(a[i], b, atol=1e-12)


def test_zero_length_segments_are_dropped():
    line = geo.Polyline.from_points(np.array([[0.0, 0.0], [0.0, 0.0], [4.0, 0.0], [4.0, 0.0]]))
    assert len(line.length) == 1
    with pytest.raises(geo.GeometryError):
        geo.Polyline.from_points(np.array([[1.0, 1.0], [1.0, 1.0]]))


# ---------------------------------------------------------------------------
# time to collision


def test_head_on_ttc():
    assert geo.time_to_collision((0, 0), (5, 0), (20, 0), (-5, 0)) == pytest.approx(2.0)


def test_diverging_is_capped():
    assert geo.time_to_collision((0, 0), (-5, 0), (20, 0), (5, 0)) == geo.TTC_CAP
    assert geo.time_to_collision((0, 0), (5, 0), (20, 0), (5, 0)) == geo.TTC_CAP


def simulated_range_minimum(p_e, v_e, p_o, v_o, horizon=20.0, rate=1000):
    t = np.arange(0.0, horizon, 1.0 / rate)
    rel = (np.asarray(p_o) - p_e)[None] + t[:, None] * (np.asarray(v_o) - v_e)[None]
    return t[np.argmin(np.hypot(rel[:, 0], rel[:, 1]))]


@pytest.mark.parametrize("seed", range(8))
def test_oblique_collision_course_matches_simulation(seed):
    rng = np.random.default_rng(seed)
    t_hit = rng.uniform(0.5, 8.0)
    meet = rng.uniform(-50, 50, 2)
    v_e = geo.velocity(rng.uniform(-np.pi, np.pi), rng.uniform(3, 20))
    v_o = geo.velocity(rng.uniform(-np.pi, np.pi), rng.uniform(3, 20))
    p_e, p_o = meet - t_hit * v_e, meet - t_hit * v_o
    got = geo.time_to_collision(p_e, v_e, p_o, v_o)
    assert got == pytest.approx(simulated_range_minimum(p_e, v_e, p_o, v_o), abs=0.05)
    assert got == pytest.approx(t_hit, rel=1e-9)


def test_ttc_broadcasts():
    out = geo.time_to_collision(np.zeros((3, 2)), np.array([[1.0, 0], [0, 0], [-1, 0]]),
                                np.array([[10.0, 0]] * 3), np.zeros((3, 2)))
    np.testing.assert_allclose(out, [10.0, geo.TTC_CAP, geo.TTC_CAP])


def test_wrap_angle_range():
    a = geo.wrap_angle(np.linspace(-20, 20, 1001))
    assert np.all(a > -np.pi) and np.all(a <= np.pi)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_box_pair_contact_matches_corner_routines(seed):
    rng = np.random.default_rng(seed)
    n = 200
    a = (rng.uniform(-6, 6, n), rng.uniform(-6, 6, n), rng.uniform(-np.pi, np.pi, n),
         rng.uniform(0.5, 6, n), rng.uniform(0.3, 3, n))
    b = (rng.uniform(-6, 6, n), rng.uniform(-6, 6, n), rng.uniform(-np.pi, np.pi, n),
         rng.uniform(0.5, 6, n), rng.uniform(0.3, 3, n))
    ca, cb = geo.box_corners(*a), geo.box_corners(*b)
    want_ov, want_pl, want_pt = geo.sat_batch(ca, a[2], cb, b[2])
    want_edge = geo.edge_distance_batch(ca, cb, want_ov)
    ov, pl, pt, edge = geo.box_pair_contact(a, b)
    clear = np.abs(np.minimum(want_pl, want_pt)) > 1e-9  # skip grazing contacts
    np.testing.assert_array_equal(ov[clear | ~want_ov], want_ov[clear | ~want_ov])
    np.testing.assert_allclose(pl[want_ov & clear], want_pl[want_ov & clear], atol=1e-9)
    np.testing.assert_allclose(pt[want_ov & clear], want_pt[want_ov & clear], atol=1e-9)
    np.testing.assert_allclose(edge[~want_ov], want_edge[~want_ov], atol=1e-9)
