import math

import numpy as np
import pytest
from scipy.special import zeta

from percroute import netgen, radio
from percroute.lattice import tessellate_squares
from percroute.radio import MODEL_A, MODEL_B, Link, RadioConfig


def bisect_min_power(d, c, alpha, tau, N0, gamma, x):
    """Smallest P with signal_bound / (N0 + interference_bound) >= tau, by bisection."""
    def ok(P):
        return radio.signal_bound(d, c, P, alpha) / (N0 + radio.interference_bound(d, c, alpha, x, P, gamma)) >= tau

    lo, hi = 0.0, 1.0
    while not ok(hi):
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 5.5])
def test_gamma_matches_hurwitz_zeta(alpha):
    assert radio.gamma_series(alpha) == pytest.approx(zeta(alpha - 1, 0.5), rel=1e-9)


def test_gamma_closed_form_at_three():
    assert radio.gamma_series(3.0) == pytest.approx(math.pi**2 / 2, rel=1e-10)


def test_gamma_requires_alpha_above_two():
    with pytest.raises(ValueError):
        radio.gamma_series(2.0)


def test_tdma_spacing_values():
    g = radio.gamma_series(3.0)
    expected_x = math.ceil((16 * g) ** (1 / 3) * 1.5)
    assert radio.tdma_spacing(1, 1.0, 3.0, 1.0, g) == (expected_x, 2 * expected_x)
    assert expected_x == 7
    # tiny tau would give x = 1; the clamp keeps x >= 2
    assert radio.tdma_spacing(0, 50.0, 3.0, 1e-6, g) == (2, 2)


def test_min_power_matches_bisection():
    for alpha in (3.0, 4.0):
        g = radio.gamma_series(alpha)
        for c, d, tau, N0 in [(1.0, 1, 1.0, 1.0), (6.0, 7, 1.0, 2.0), (2.0, 3, 0.5, 1.0)]:
            x, _ = radio.tdma_spacing(d, c, alpha, tau, g)
            got = radio.min_power_model_b(d, c, alpha, tau, N0, g)
            assert got == pytest.approx(bisect_min_power(d, c, alpha, tau, N0, g, x), rel=1e-9)
            cfg = RadioConfig(P=got, alpha=alpha, tau=tau, N0=N0, model=MODEL_B)
            assert radio.guaranteed_sinr(d, c, cfg, g) == pytest.approx(tau, rel=1e-9)


def test_min_power_reference_value():
    g = radio.gamma_series(3.0)
    # tau N0 (1 + 2c)^3 / (1 - q) with q = (1 + 1/2)^3 16 gamma / 7^3
    q = 1.5**3 * 16 * g / 7**3
    assert radio.min_power_model_b(1, 1.0, 3.0, 1.0, 1.0, g) == pytest.approx(27 / (1 - q), rel=1e-12)
    assert radio.min_power_model_b(1, 1.0, 3.0, 1.0, 1.0, g) == pytest.approx(121.026, abs=1e-3)


def test_no_noise_needs_no_power():
    g = radio.gamma_series(3.0)
    assert radio.min_power_model_b(1, 1.0, 3.0, 1.0, 0.0, g) == 0.0


def test_min_power_increasing_in_d():
    g = radio.gamma_series(3.0)
    p = [radio.min_power_model_b(d, 1.0, 3.0, 1.0, 1.0, g) for d in range(1, 21)]
    assert all(b > a for a, b in zip(p, p[1:]))


def test_min_power_infeasible_spacing():
    g = radio.gamma_series(3.0)
    with pytest.raises(ValueError):
        radio.min_power_model_b(1, 1.0, 3.0, 1.0, 1.0, g, x=2)


def test_rates():
    cfg = RadioConfig(W=2.0, T=3.0, B=5.0, tau=2.0)
    assert radio.rate(MODEL_A, math.e - 1, cfg) == pytest.approx(3.0)
    assert radio.rate(MODEL_B, 2.0, cfg) == 5.0
    assert radio.rate(MODEL_B, 1.99, cfg) == 0.0


def test_radio_config_validation():
    with pytest.raises(ValueError, match="alpha"):
        RadioConfig(alpha=2.0)
    with pytest.raises(ValueError, match="model"):
        RadioConfig(model="C")
    with pytest.raises(ValueError, match="P"):
        RadioConfig(P=0.0)


def test_sinr_at_brute_force():
    cfg = RadioConfig(P=2.0, N0=0.5)
    got = radio.sinr_at((0, 0), (1, 0), [(0, 3), (4, 0)], cfg)
    want = 2 * 2.0**-3 / (0.5 + 2 * 4.0**-3 + 2 * 5.0**-3)
    assert got == pytest.approx(want, rel=1e-12)


def test_schedule_spacing_on_grid():
    keys = np.array([(x, y) for x in range(30) for y in range(30)])
    pts = (keys + 0.5).astype(float)
    grid = tessellate_squares(100.0, 1.0, pts)
    sched = radio.build_schedule(grid, 2, RadioConfig())
    assert sched.k == sched.x * 3 and sched.num_slots == sched.k**2
    slot = dict(zip(map(tuple, sched.cell_keys.tolist()), sched.slots.tolist()))
    assert len(slot) == 900 and set(slot.values()) <= set(range(sched.num_slots))
    for s in set(slot.values()):
        cells = np.array([k for k, v in slot.items() if v == s])
        dx = np.abs(cells[:, None, 0] - cells[None, :, 0])
        dy = np.abs(cells[:, None, 1] - cells[None, :, 1])
        off = ~np.eye(len(cells), dtype=bool)
        assert np.all(((dx % sched.k) == 0)[off] & ((dy % sched.k) == 0)[off])
        assert np.all(np.maximum(dx, dy)[off] >= sched.k)


def grid_and_schedule(d, c, cfg, n=2000.0, seed=1):
    inst = netgen.sample_network(n, seed)
    grid = tessellate_squares(inst.region_radius, c, inst.nodes)
    return inst, grid, radio.build_schedule(grid, d, cfg)


def test_single_link_has_no_violation():
    g = radio.gamma_series(3.0)
    cfg = RadioConfig(P=radio.min_power_model_b(1, 1.0, 3.0, 1.0, 1.0, g), model=MODEL_B)
    grid = tessellate_squares(10.0, 1.0, np.array([[0.5, 0.5], [1.5, 0.5]]))
    sched = radio.build_schedule(grid, 1, cfg)
    assert radio.verify_schedule(sched, grid, [Link((0.5, 0.5), (1.5, 0.5))], cfg) == []


def test_link_longer_than_schedule_range_rejected():
    cfg = RadioConfig()
    grid = tessellate_squares(10.0, 1.0, np.array([[0.5, 0.5]]))
    sched = radio.build_schedule(grid, 1, cfg)
    with pytest.raises(ValueError, match="spans"):
        radio.evaluate_schedule(sched, grid, [Link((0.5, 0.5), (2.5, 0.5))], cfg)


def test_exact_interference_matches_direct_sum():
    cfg = RadioConfig(P=3.0)
    inst, grid, sched = grid_and_schedule(1, 1.0, cfg, n=500.0)
    links = radio.random_links(grid, inst.nodes, 1, np.random.default_rng(0))
    checks = radio.evaluate_schedule(sched, grid, links, cfg)
    tx = np.array([lk.tx for lk in links])
    tcell = np.floor(tx).astype(int)
    slot = radio.slot_of_cell(tcell, sched.k)
    codes = [tuple(k) for k in tcell.tolist()]
    sub = [codes[:t].count(codes[t]) for t in range(len(codes))]
    for t in range(0, len(links), 37):
        others = [tx[u] for u in range(len(links)) if u != t and slot[u] == slot[t] and sub[u] == sub[t]]
        want = radio.sinr_at(links[t].rx, links[t].tx, others, cfg)
        assert checks[t].sinr == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("d,c", [(1, 1.0), (2, 1.0), (3, 2.0), (1, 6.0)])
def test_exact_within_bounds(d, c):
    """Interference never exceeds its bound; the signal bound holds on links no longer than c(d+1)."""
    cfg = RadioConfig(P=1.0)
    inst, grid, sched = grid_and_schedule(d, c, cfg, n=3000.0, seed=d)
    links = radio.random_links(grid, inst.nodes, d, np.random.default_rng(d))
    checks = radio.evaluate_schedule(sched, grid, links, cfg)
    assert checks
    assert all(chk.interference <= chk.interference_bound for chk in checks)
    short = [chk for chk in checks if chk.distance <= c * (d + 1)]
    assert short and all(chk.signal >= chk.signal_bound for chk in short)


def test_signal_bound_counterexample_for_long_manhattan_links():
    # cells (0,0) and (d,0) are d steps apart yet their far corners are c sqrt((d+1)^2 + 1) apart
    c, d = 1.0, 1
    cfg = RadioConfig()
    grid = tessellate_squares(10.0, c, np.array([[0.001, 0.001], [1.999, 0.999]]))
    sched = radio.build_schedule(grid, d, cfg)
    (chk,) = radio.evaluate_schedule(sched, grid, [Link((0.001, 0.001), (1.999, 0.999))], cfg)
    assert chk.cells == 1 and chk.distance > c * (d + 1)
    assert chk.signal < chk.signal_bound


def test_worst_case_geometry_interference_below_bound():
    g = radio.gamma_series(3.0)
    for c, d in [(1.0, 1), (1.0, 3), (6.0, 2)]:
        x, k = radio.tdma_spacing(d, c, 3.0, 1.0, g)
        cfg = RadioConfig()
        links = radio.worst_case_links(d, c, k)
        pts = np.array([lk.tx for lk in links])
        grid = tessellate_squares(float(np.abs(pts).max()) * 2, c, pts)
        checks = radio.evaluate_schedule(radio.build_schedule(grid, d, cfg), grid, links, cfg)
        victim = checks[0]
        assert victim.slot == 0 and victim.cells == d
        assert victim.interference <= victim.interference_bound


def test_model_b_at_min_power_has_no_violation_on_random_links():
    g = radio.gamma_series(3.0)
    cfg = RadioConfig(P=radio.min_power_model_b(1, 1.0, 3.0, 1.0, 1.0, g), model=MODEL_B)
    inst, grid, sched = grid_and_schedule(1, 1.0, cfg, n=3000.0, seed=5)
    links = radio.random_links(grid, inst.nodes, 1, np.random.default_rng(5))
    assert radio.verify_schedule(sched, grid, links, cfg) == []


def test_role_swap_keeps_interference_guarantee():
    cfg = RadioConfig()
    inst, grid, sched = grid_and_schedule(2, 1.0, cfg, n=2000.0, seed=8)
    links = radio.random_links(grid, inst.nodes, 2, np.random.default_rng(8))
    swapped = [Link(lk.rx, lk.tx) for lk in links]
    for chk in radio.evaluate_schedule(sched, grid, swapped, cfg):
        assert chk.interference <= chk.interference_bound


def test_random_links_stay_in_range():
    inst, grid, _ = grid_and_schedule(2, 1.0, RadioConfig(), n=1000.0, seed=2)
    links = radio.random_links(grid, inst.nodes, 2, np.random.default_rng(2))
    assert len(links) >= 0.9 * len(grid.cell_keys)
    for lk in links:
        a = np.floor(np.array(lk.tx))
        b = np.floor(np.array(lk.rx))
        assert 0 < np.hypot(*(np.array(lk.tx) - lk.rx)) and np.abs(a - b).sum() <= 2
    txs = {lk.tx for lk in links}
    assert len(txs) == len(links)  # one sender per cell


def test_model_a_rate_positive_for_any_power():
    g = radio.gamma_series(3.0)
    for P in (1e-6, 1.0, 1e6):
        for d in (1, 5, 16):
            assert radio.guaranteed_rate(d, 6.0, RadioConfig(P=P), g) > 0


def test_guaranteed_rate_is_link_rate_over_slots():
    g = radio.gamma_series(3.0)
    cfg = RadioConfig()
    _, k = radio.tdma_spacing(4, 2.0, 3.0, 1.0, g)
    assert radio.guaranteed_rate(4, 2.0, cfg, g) == pytest.approx(radio.link_rate_bound(4, 2.0, cfg, g) / k**2)


def same_slot_relays(grid, nodes, tx, k):
    """Relays of the other nonempty cells sharing the slot of ``tx``'s cell."""
    own = grid.node_cell_id[tx]
    slots = radio.slot_of_cell(grid.cell_keys, k)
    cells = [j for j in range(len(grid.cell_keys)) if slots[j] == slots[own] and j != own]
    return nodes[grid.cell_relay[cells]]


def test_cell_slot_sinr_matches_direct_sum(rng):
    inst = netgen.sample_network(400.0, 3)
    grid = tessellate_squares(inst.region_radius, 1.5, inst.nodes)
    tx = rng.integers(0, inst.count, 300)
    rx = rng.integers(0, inst.count, 300)
    cfg = RadioConfig(P=2.0, alpha=3.5, N0=0.5)
    k = 6
    got = radio.cell_slot_sinr(grid, inst.nodes, tx, rx, k, cfg, budget=50)
    want = [radio.sinr_at(inst.nodes[r], inst.nodes[t], same_slot_relays(grid, inst.nodes, t, k), cfg)
            for t, r in zip(tx, rx)]
    assert got == pytest.approx(want, rel=1e-12)
    b = cfg.with_model(MODEL_B)
    assert radio.link_rates(got, b).tolist() == [radio.rate(MODEL_B, s, b) for s in got]
    assert radio.link_rates(got, cfg) == pytest.approx([radio.rate(MODEL_A, s, cfg) for s in got], rel=1e-12)
