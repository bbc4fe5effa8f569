import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from berrt.world import (
    DegenerateWorldError,
    ScenarioError,
    SpatialIndex,
    State,
    World,
    bundled_scenario,
    cost,
    costs_from,
    heuristic,
    load_scenario,
    sample_free,
    segment_collides,
    world_from_dict,
    world_to_dict,
)
from oracles import point_in_polygon, sampled_segment_hits

SQUARE = [[0.4, 0.4], [0.6, 0.4], [0.6, 0.6], [0.4, 0.6]]


@pytest.fixture
def square_world():
    return World((0, 0, 1, 1), [SQUARE], State(0.05, 0.05), State(0.95, 0.95))


@pytest.fixture
def empty_world():
    return World((0, 0, 1, 1), [], State(0.1, 0.1), State(0.9, 0.9))


def test_segment_through_square_collides(square_world):
    assert segment_collides((0, 0), (1, 1), square_world)


def test_segment_clear_of_square(square_world):
    assert not segment_collides((0, 0), (0.3, 0.0), square_world)


def test_horizontal_segment_agrees_with_dense_sampling(square_world):
    got = segment_collides((0, 0.5), (1, 0.5), square_world)
    assert got is True
    assert sampled_segment_hits((0, 0.5), (1, 0.5), square_world) == got


def test_grazing_a_vertex_counts_as_collision(square_world):
    assert segment_collides((0.3, 0.3), (0.4, 0.4), square_world)
    assert segment_collides((0.3, 0.4), (0.7, 0.4), square_world)


def test_segment_fully_inside_obstacle(square_world):
    assert segment_collides((0.45, 0.45), (0.55, 0.55), square_world)


def test_leaving_bounds_collides(empty_world):
    assert segment_collides((0.5, 0.5), (1.5, 0.5), empty_world)


def test_random_segments_match_sampling_oracle():
    w = load_scenario(bundled_scenario("cluttered"))
    rng = np.random.default_rng(7)
    for _ in range(40):
        a, b = rng.random(2), rng.random(2)
        got = segment_collides(a, b, w)
        # sampling can only miss hits, never invent them
        if sampled_segment_hits(a, b, w, n=2000):
            assert got
        elif got:
            # a miss by sampling must be a sliver: a denser sweep finds it
            assert sampled_segment_hits(a, b, w, n=200_000)


coords = st.floats(-0.2, 1.2, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coords, coords, coords, coords)
def test_collision_symmetric(ax, ay, bx, by):
    w = load_scenario(bundled_scenario("cluttered"))
    assert segment_collides((ax, ay), (bx, by), w) == segment_collides((bx, by), (ax, ay), w)


def test_sample_free_deterministic(empty_world):
    a = sample_free(np.random.default_rng(3), empty_world)
    b = sample_free(np.random.default_rng(3), empty_world)
    assert a == b
    assert 0 <= a.x <= 1 and 0 <= a.y <= 1


def test_sample_free_fully_blocked_world():
    # only a 1e-7 sliver along the top edge stays free
    cover = [[-1, -1], [2, -1], [2, 1 - 1e-7], [-1, 1 - 1e-7]]
    w = World((0, 0, 1, 1), [cover], State(0.2, 1.0), State(0.8, 1.0))
    with pytest.raises(DegenerateWorldError):
        sample_free(np.random.default_rng(0), w, budget=1000)


def test_sample_free_uniform_mean(empty_world):
    rng = np.random.default_rng(11)
    pts = np.array([sample_free(rng, empty_world) for _ in range(10_000)])
    assert np.allclose(pts.mean(axis=0), [0.5, 0.5], atol=0.05)


def test_samples_avoid_obstacles():
    w = load_scenario(bundled_scenario("cluttered"))
    rng = np.random.default_rng(5)
    for _ in range(500):
        s = sample_free(rng, w)
        assert not any(point_in_polygon(s.x, s.y, p) for p in w.obstacles)
        assert w.in_bounds(np.array(s))


def test_cost_examples():
    assert cost((0, 0), (3, 4)) == 5.0
    assert cost((0.3, 0.7), (0.3, 0.7)) == 0.0


def test_cost_matches_recomputation():
    rng = np.random.default_rng(2)
    for _ in range(100):
        a, b = rng.random(2) * 10, rng.random(2) * 10
        ref = math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)
        assert cost(a, b) == pytest.approx(ref, rel=1e-12)
        assert cost(a, b) == cost(b, a)
        assert costs_from(a, b[None])[0] == cost(a, b)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=6, max_size=6))
def test_cost_triangle_inequality(v):
    a, b, c = v[0:2], v[2:4], v[4:6]
    assert cost(a, c) <= cost(a, b) + cost(b, c) + 1e-9


def test_heuristic_zero_at_goal(square_world):
    assert heuristic(square_world.x_goal, square_world) == 0.0


def test_heuristic_is_straight_line_in_empty_world(empty_world):
    v = (0.3, 0.2)
    assert heuristic(v, empty_world) == cost(v, empty_world.x_goal)


def _grid_cost_to_go(world, n=61):
    xs = np.linspace(0, 1, n)
    pts = np.array([(x, y) for x in xs for y in xs])
    free = ~world.in_obstacle(pts)
    adj = lil_matrix((len(pts), len(pts)))
    idx = lambda i, j: i * n + j
    steps = [(1, 0), (0, 1), (1, 1), (1, -1)]
    for i in range(n):
        for j in range(n):
            if not free[idx(i, j)]:
                continue
            for di, dj in steps:
                a, b = i + di, j + dj
                if 0 <= a < n and 0 <= b < n and free[idx(a, b)]:
                    p, q = pts[idx(i, j)], pts[idx(a, b)]
                    if not segment_collides(p, q, world):
                        adj[idx(i, j), idx(a, b)] = adj[idx(a, b), idx(i, j)] = cost(p, q)
    goal = int(np.argmin(np.hypot(*(pts - world.x_goal).T)))
    return pts, dijkstra(adj.tocsr(), indices=goal), goal


def test_heuristic_lower_bounds_grid_dijkstra():
    wall = [[0.45, 0.0], [0.55, 0.0], [0.55, 0.8], [0.45, 0.8]]
    w = World((0, 0, 1, 1), [wall], State(0.1, 0.1), State(1.0, 0.0))
    pts, dist, goal = _grid_cost_to_go(w)
    rng = np.random.default_rng(4)
    reachable = np.flatnonzero(np.isfinite(dist))
    for k in rng.choice(reachable, 50, replace=False):
        assert heuristic(pts[k], w) <= dist[k] + 1e-12


def test_nearest_and_near_small_examples():
    idx = SpatialIndex(0.25)
    a = idx.insert((0.0, 0.0))
    idx.insert((1.0, 0.0))
    assert idx.nearest((0.4, 0.0)) == a
    assert idx.near((1.0, 0.0), 0.0).tolist() == [1]


def test_nearest_ties_go_to_lowest_id():
    idx = SpatialIndex(0.1)
    idx.insert((0.0, 0.0))
    idx.insert((1.0, 0.0))
    assert idx.nearest((0.5, 0.0)) == 0


def test_nearest_on_empty_index_raises():
    with pytest.raises(LookupError):
        SpatialIndex(1.0).nearest((0, 0))


@pytest.mark.parametrize("cell", [0.01, 0.05, 0.3])
def test_index_matches_linear_scan(cell):
    rng = np.random.default_rng(9)
    pts = rng.random((1000, 2))
    idx = SpatialIndex(cell)
    for p in pts:
        idx.insert(p)
    for _ in range(100):
        q = rng.random(2) * 1.4 - 0.2
        r = rng.random() * 0.2
        d = costs_from(q, pts)
        assert set(idx.near(q, r).tolist()) == set(np.flatnonzero(d <= r).tolist())
        assert idx.nearest(q) == int(np.flatnonzero(d == d.min())[0])


def test_scenario_round_trip(tmp_path):
    w = load_scenario(bundled_scenario("cluttered"))
    p = tmp_path / "w.json"
    p.write_text(json.dumps(world_to_dict(w)))
    w2 = load_scenario(p)
    assert w2.bounds == w.bounds and w2.x_init == w.x_init and w2.x_goal == w.x_goal
    assert all(np.array_equal(a, b) for a, b in zip(w.obstacles, w2.obstacles))


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"bounds": None}, "bounds"),
        ({"bounds": {"xmin": 0, "ymin": 0, "xmax": 1}}, "bounds.ymax"),
        ({"init": [0.5]}, "init"),
        ({"goal": [0.5, 0.5]}, "goal"),  # inside the obstacle
        ({"obstacles": [[[0, 0], [1, 1]]]}, "obstacles[0]"),
        ({"obstacles": [[[0, 0], [1, 1], [1, 0], [0, 1]]]}, "obstacles[0]"),
    ],
)
def test_scenario_errors_name_the_field(patch, field):
    doc = {
        "bounds": {"xmin": 0, "ymin": 0, "xmax": 1, "ymax": 1},
        "obstacles": [SQUARE],
        "init": [0.05, 0.05],
        "goal": [0.95, 0.95],
    }
    doc.update(patch)
    with pytest.raises(ScenarioError) as exc:
        world_from_dict(doc)
    assert exc.value.field == field


def test_missing_scenario_key():
    with pytest.raises(ScenarioError, match="obstacles"):
        world_from_dict({"bounds": {}, "init": [0, 0], "goal": [1, 1]})
