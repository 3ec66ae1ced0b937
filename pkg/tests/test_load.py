import math

import numpy as np
import pytest
from shapely.geometry import Polygon, box

from percroute import load, routing
from percroute.lattice import tessellate_squares
from percroute.routing import RoutePath, RouteSet
from percroute.sim import ExperimentConfig, central_hit_fraction, trial_load, trial_seed


def test_load_bound_values():
    assert load.load_bound(100.0) == pytest.approx(27 * math.pi * 10 * math.log(100), rel=1e-12)
    assert load.load_bound(100.0) == pytest.approx(3906.1, abs=0.5)
    assert load.load_bound(1e4) == pytest.approx(78124, abs=1.0)
    for n in (10.0, 1e3, 1e5):
        assert load.load_bound(4 * n) / load.load_bound(n) == pytest.approx(2 * (1 + math.log(4) / math.log(n)))
    with pytest.raises(ValueError):
        load.load_bound(1.0)


def test_intersection_probability_bound():
    assert load.corridor_intersect_prob_bound(1e4, 1.0, 1.0) == pytest.approx(0.26713, abs=5e-5)
    assert load.corridor_intersect_prob_bound(1e8, 1.0, 1.0) < load.corridor_intersect_prob_bound(1e4, 1.0, 1.0)
    with pytest.raises(ValueError):
        load.corridor_intersect_prob_bound(1e4, 0.7, 1.0)


def grid_of_line(count):
    pts = np.array([[k + 0.5, 0.5] for k in range(count)])
    return pts, tessellate_squares(float(count) + 2, 1.0, pts)


def test_no_routes_no_load():
    _, grid = grid_of_line(4)
    lm = load.compute_load([], grid)
    assert lm.L_max == 0 and not lm.load.any()


def test_single_path_loads_its_cells_once():
    pts, grid = grid_of_line(7)
    rs = RouteSet((0, 6), (RoutePath((0, 1, 2, 3, 4)),), pts)
    lm = load.compute_load([rs], grid)
    assert lm.load.tolist() == [1, 1, 1, 1, 1, 0, 0]
    assert lm.pair_cell_max == 1


def test_revisits_count_once_per_path_and_pairs_add_up():
    pts, grid = grid_of_line(4)
    a = RouteSet((0, 3), (RoutePath((0, 1, 0, 2)), RoutePath((1, 2))), pts)
    b = RouteSet((3, 0), (RoutePath((3, 2, 1)),), pts)
    lm = load.compute_load([a, b], grid)
    assert lm.load.tolist() == [1, 3, 3, 1]
    assert lm.pair_cell_max == 2


def test_non_relay_rejected():
    pts = np.array([[0.5, 0.5], [0.6, 0.6]])
    grid = tessellate_squares(3.0, 1.0, pts)
    with pytest.raises(AssertionError, match="relay"):
        load.compute_load([RouteSet((0, 1), (RoutePath((1,)),), pts)], grid)


def test_corridor_cell_hits_match_polygon_overlap(rng):
    c = 1.0
    keys = np.array([(x, y) for x in range(-12, 12) for y in range(-12, 12)])
    for _ in range(40):
        s, d = rng.random((2, 2)) * 16 - 8
        cor = routing.build_corridor(s, d, 25.0, 0.35, 3.0)
        corners = [cor.origin, cor.origin + cor.length * cor.axis,
                   cor.origin + cor.length * cor.axis + cor.width * cor.perp, cor.origin + cor.width * cor.perp]
        rect = Polygon(corners)
        want = np.array([rect.intersects(box(x * c, y * c, (x + 1) * c, (y + 1) * c)) for x, y in keys])
        assert np.array_equal(load.corridor_cell_hits(cor, keys, c), want)


def test_central_hit_fraction_below_bound():
    for n in (1e3, 1e4):
        frac = central_hit_fraction(n, 1.0, 1.0, 10_000, 11)
        assert 0 < frac <= load.corridor_intersect_prob_bound(n, 1.0, 1.0)


def test_nine_cap_against_corridors():
    from percroute.sim import prepare_trial, route_chunks

    c, kappa = 3.5, 2.25
    tr = prepare_trial(1000.0, c, kappa, 4)
    batch = next(route_chunks(tr, c, chunk_pairs=150))
    sets, cors = [], []
    for q in range(150):
        nodes = [tuple(batch.path_nodes(p).tolist()) for p in np.flatnonzero(batch.path_pair == q)]
        sets.append(RouteSet((q, int(batch.dst[q])), tuple(RoutePath(s) for s in nodes), tr.points))
        cors.append(routing.build_corridor(tr.points[q], tr.points[batch.dst[q]], tr.n, c, kappa))
    lm = load.compute_load(sets, tr.grid, cors)
    assert lm.L_max > 0
    assert np.all(lm.load <= load.MAX_PER_PAIR * lm.intersections)
    assert lm.pair_cell_max <= load.MAX_PER_PAIR


def test_accumulator_matches_compute_load():
    from percroute.sim import prepare_trial, route_chunks

    tr = prepare_trial(800.0, 3.5, 2.25, 9)
    batch = next(route_chunks(tr, 3.5, chunk_pairs=10**6))
    acc = load.LoadAccumulator(tr.grid)
    half = int(batch.ptr[batch.num_paths // 2]) if batch.num_paths else 0
    k = batch.num_paths // 2
    acc.add(batch.path_pair[:k], batch.ptr[: k + 1], batch.relays[:half])
    acc.add(batch.path_pair[k:], batch.ptr[k:] - half, batch.relays[half:])
    sets = [RouteSet((0, 0), tuple(RoutePath(tuple(batch.path_nodes(p).tolist())) for p in range(batch.num_paths)), tr.points)]
    assert np.array_equal(acc.result().load, load.compute_load(sets, tr.grid).load)


def test_path_max_load():
    pts, grid = grid_of_line(4)
    got = load.path_max_load(np.array([1, 5, 2, 0]), grid, np.array([0, 2, 4]), np.array([0, 1, 2, 3]))
    assert got.tolist() == [5, 2]


def test_load_map_csv_and_radial_means(tmp_path):
    keys = np.array([[0, 0], [5, 0], [-6, 0]])
    lm = load.LoadMap(1.0, keys, np.array([9, 1, 3]))
    near, far = lm.radial_means(7.0)
    assert near == 9 and far == 2
    path = tmp_path / "heat.csv"
    lm.to_csv(path)
    assert path.read_text().splitlines() == ["cell_x,cell_y,L", "0,0,9", "5,0,1", "-6,0,3"]


def test_trial_load_central_dominance_and_bound():
    cfg = ExperimentConfig()
    lm, hops, tr, _ = trial_load(cfg, 1000.0, trial_seed(cfg.master_seed, 1000.0, 0))
    near, far = lm.radial_means(tr.instance.region_radius)
    assert near >= far
    assert lm.L_max <= load.load_bound(1000.0)
    assert lm.pair_cell_max <= load.MAX_PER_PAIR
