import math

import numpy as np
import pytest

from hollowopt.flowsim import (
    CHUNK,
    empirical_sic_scan,
    entry_points,
    monte_carlo_resistance,
    ray_table,
    reflected_direction,
    trace_particle,
)
from hollowopt.optimize import discretize_u0
from hollowopt.shapes import PLShape, make_u0
from hollowopt.sic import ray_slope

F_U0 = math.pi / 2 - 2 * math.atan(0.5)


def test_reflected_direction_is_unit_and_matches_ray_slope():
    for k in (-0.9, -0.5, -0.1, 0.3, 0.7):
        dx, dy = reflected_direction(k)
        assert math.hypot(dx, dy) == pytest.approx(1.0)
        assert dy / abs(dx) == pytest.approx(ray_slope(k))
        assert np.sign(dx) == -np.sign(k)
    assert reflected_direction(0.0) == pytest.approx((0.0, 1.0))


def test_flat_shape_reflects_straight_up():
    tr = trace_particle(PLShape.flat(-0.4), 0.3)
    assert tr.hit_point == (0.3, -0.4)
    assert tr.direction == pytest.approx((0.0, 1.0))
    assert tr.second_hit is None


def test_u0_ray_passes_through_rim_point():
    tr = trace_particle(make_u0(), -0.5)
    assert tr.second_hit is None
    (x, y), (dx, dy) = tr.hit_point, tr.direction
    assert abs(y + dy * (1.0 - x) / dx) < 1e-9


def test_steep_v_second_hit_on_right_wall():
    s = PLShape.v_shape(0.9)
    tr = trace_particle(s, -0.1)
    hx, hy = tr.second_hit
    assert hx > 0
    # exact intersection of the reflected line with y = 0.9 (x - 1)
    y0, k = s.value(-0.1), ray_slope(-0.9)
    x_hit = (y0 + 0.1 * k + 0.9) / (0.9 - k)
    assert hx == pytest.approx(x_hit, abs=1e-12)
    assert hy == pytest.approx(0.9 * (x_hit - 1), abs=1e-12)


def test_breakpoint_entry_is_nudged():
    tr = trace_particle(PLShape.v_shape(0.5), 0.0)
    assert tr.entry_x > 0


def test_flat_monte_carlo_exact():
    res = monte_carlo_resistance(PLShape.flat(-0.3), 1000, seed=1)
    assert res.resistance_estimate == 1.0 and res.std_error == 0.0


def test_v_shape_monte_carlo():
    res = monte_carlo_resistance(PLShape.v_shape(0.5), 200_000, seed=4)
    assert res.resistance_estimate == pytest.approx(0.8, abs=1e-12)
    assert res.n_violations == 0


def test_u0_monte_carlo_small():
    res = monte_carlo_resistance(make_u0(), 200_000, seed=9)
    assert abs(res.resistance_estimate - F_U0) < 3 * res.std_error + 1e-12


def test_seed_determinism_and_thread_independence():
    a = monte_carlo_resistance(discretize_u0(16), 3 * CHUNK + 17, seed=5, threads=1)
    b = monte_carlo_resistance(discretize_u0(16), 3 * CHUNK + 17, seed=5, threads=3)
    assert a.resistance_estimate == b.resistance_estimate
    assert a.std_error == b.std_error


def test_entry_points_prefix_matches_chunks():
    full = entry_points(CHUNK + 10, seed=2)
    assert np.array_equal(entry_points(10, seed=2), full[:10])


def test_violations_recorded_for_steep_v():
    res = monte_carlo_resistance(PLShape.v_shape(0.999), 20_000, seed=0)
    assert res.n_violations > 0
    assert res.violations[0]["second_hit_point"] is not None


def test_empirical_scan_examples():
    assert empirical_sic_scan(make_u0(), 100_000) == []
    assert empirical_sic_scan(PLShape.v_shape(1 / math.sqrt(3)), 10_000) == []
    bad = empirical_sic_scan(PLShape.v_shape(0.999), 10_000)
    assert bad and bad[0]["second_hit_point"] is not None


def test_ray_table_columns():
    rows = ray_table(PLShape.v_shape(0.9), [-0.1, 0.5])
    assert rows.shape == (2, 6)
    assert rows[0, 5] == 1.0
    assert rows[1, 5] == 1.0
    assert ray_table(make_u0(), [-0.3])[0, 5] == 0.0


def test_monte_carlo_rejects_zero_particles():
    with pytest.raises(ValueError):
        monte_carlo_resistance(make_u0(), 0)
