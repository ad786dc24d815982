"""Quantitative acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import time

import numpy as np

from hollowopt.corpus import monotone_test_profile
from hollowopt.flowsim import empirical_sic_scan, monte_carlo_resistance
from hollowopt.highdim import Domain, appendix_bound, count_lattice_cubes, m_d, md_table
from hollowopt.optimize import minimize
from hollowopt.resistance import Weight, resistance_F, resistance_F_quadrature, resistance_weighted
from hollowopt.shapes import make_u0
from hollowopt.sic import check_sic, scan_ray_clearance
from hollowopt.transforms import convex_rearrange, family_resistance_R, phi_diagnostic

F_U0 = math.pi / 2 - 2 * math.atan(0.5)
F2_U0 = 4 * math.log(8 / 5) - math.pi + 4 * math.atan(0.5)


def test_criterion_01_minimal_value(report):
    t = time.perf_counter()
    closed = resistance_F(make_u0()).value
    numeric = resistance_F_quadrature(make_u0()).value
    dt = time.perf_counter() - t
    ok = abs(closed - F_U0) < 1e-12 and abs(numeric - F_U0) < 1e-9 and dt < 1
    report(1, ok, f"closed {closed:.16f} quad err {abs(numeric - F_U0):.1e} in {dt:.2f}s")
    assert ok


def test_criterion_02_optimizer_constant(report):
    t = time.perf_counter()
    run = minimize(Weight.constant(), n_segments=64, budget=20000, seed=7)
    dt = time.perf_counter() - t
    ok = F_U0 - 1e-9 <= run.best_value <= F_U0 + 5e-3 and dt < 60
    report(2, ok, f"best {run.best_value:.6f} gap {run.best_value - F_U0:.2e} in {dt:.1f}s")
    assert ok


def test_criterion_03_optimizer_radial(report):
    quad_f2 = resistance_weighted(make_u0(), Weight.radial(2)).value
    run = minimize(Weight.radial(2), n_segments=64, budget=20000, seed=7)
    ok = abs(run.best_value - quad_f2) < 5e-3 and abs(F2_U0 - quad_f2) < 1e-9
    report(3, ok, f"best {run.best_value:.6f} vs F2 {quad_f2:.6f}, closed form err {abs(F2_U0 - quad_f2):.1e}")
    assert ok


def test_criterion_04_rearrangement(report, even_corpus):
    t = time.perf_counter()
    weights = [Weight.radial(d) for d in (1, 2, 3, 5)]
    worst_f = worst_w = 0.0
    failures = 0
    for s in even_corpus:
        out = convex_rearrange(s)
        worst_f = max(worst_f, abs(resistance_F(out).value - resistance_F(s).value))
        for w in weights:
            worst_w = max(worst_w, resistance_weighted(out, w).value - resistance_weighted(s, w).value)
        failures += not check_sic(out).admissible
    dt = time.perf_counter() - t
    ok = len(even_corpus) == 1000 and worst_f <= 1e-12 and worst_w <= 0 and failures == 0 and dt < 30
    report(4, ok, f"max |dF| {worst_f:.1e}, max radial increase {worst_w:.1e}, "
                  f"{failures} inadmissible, {dt:.1f}s")
    assert ok


def test_criterion_05_parabolic_monotonicity(report):
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_rise = -math.inf
    for _ in range(100):
        s, a, b = monotone_test_profile(rng)
        vals = [r for _, r in family_resistance_R(s, a, b, -1.0, Weight.constant(), np.linspace(a, b, 256))]
        worst_rise = max(worst_rise, float(np.max(np.diff(vals))))
    phis = (lambda z: 0.5, lambda z: z - 1.0, lambda z: 2.5 * (z - 1.0) ** 4)
    phi_min = math.inf
    for phi in phis:
        for p in np.linspace(1.1, 4.0, 8):
            for tau in np.linspace(1 / p, 1.0, 64):
                if phi(p * tau) == 0:
                    continue
                for w in np.linspace(0.0, tau, 64):
                    phi_min = min(phi_min, phi_diagnostic(w, tau, p, 1.0, phi))
    dt = time.perf_counter() - t
    ok = worst_rise <= 1e-9 and phi_min >= -1e-12 and dt < 60
    report(5, ok, f"max R step {worst_rise:.1e}, min Phi {phi_min:.1e}, {dt:.1f}s")
    assert ok


def test_criterion_06_sic_triangle(report, mixed):
    disagreements = 0
    n_ok = 0
    for s in mixed:
        analytic = check_sic(s).admissible
        geometric = not scan_ray_clearance(s, 200)
        sampled = not empirical_sic_scan(s, 2000)
        disagreements += not (analytic == geometric == sampled)
        n_ok += analytic
    ok = len(mixed) == 1000 and disagreements == 0
    report(6, ok, f"{disagreements} disagreements on {len(mixed)} shapes ({n_ok} admissible)")
    assert ok


def test_criterion_07_monte_carlo(report):
    small = monte_carlo_resistance(make_u0(), 1_000_000, seed=3)
    large = monte_carlo_resistance(make_u0(), 4_000_000, seed=4)
    z = abs(small.resistance_estimate - F_U0) / small.std_error
    ratio = small.std_error / large.std_error
    ok = z <= 3 and 1.6 <= ratio <= 2.4 and small.n_violations == 0
    report(7, ok, f"estimate {small.resistance_estimate:.5f} ({z:.2f} se), se ratio {ratio:.3f}")
    assert ok


def test_criterion_08_lower_bound(report, even_corpus, mixed):
    shapes = list(even_corpus) + [s for s in mixed if check_sic(s).admissible]
    values = [resistance_F(s).value for s in shapes]
    bad = sum(not 0.5 < v <= 1.0 for v in values)
    ok = bad == 0
    report(8, ok, f"{bad} exceptions on {len(shapes)} shapes, range [{min(values):.4f}, {max(values):.4f}]")
    assert ok


def test_criterion_09_md_table(report):
    t = time.perf_counter()
    rows = md_table(50)
    dt = time.perf_counter() - t
    vals = [v for _, v in rows]
    ok = (abs(m_d(1) - F_U0) < 1e-9 and all(a > b for a, b in zip(vals, vals[1:]))
          and all(v > 0.5 for v in vals) and vals[49] - 0.5 < vals[9] - 0.5 and dt < 10)
    report(9, ok, f"m_1 {vals[0]:.6f} m_10 {vals[9]:.5f} m_50 {vals[49]:.5f}, {dt:.2f}s")
    assert ok


def test_criterion_10_appendix(report):
    from tests.test_highdim import brute_force_cubes

    ball = Domain.ball(1.0)
    cover = count_lattice_cubes(ball, 3, 0.05)
    bound = appendix_bound(cover, 0.51)
    ok = bound < 0.51 + cover.residual_fraction
    grid_bad = grid_used = 0
    for delta in (0.2, 0.1, 0.05, 0.025):
        c = count_lattice_cubes(ball, 3, delta)
        for eps in (0.1, 0.2, 0.3, 0.5, 0.7, 0.9):
            if c.residual_fraction < eps / 2:
                grid_used += 1
                grid_bad += not appendix_bound(c, 0.5 + eps / 2) < 0.5 + eps
    coarse = count_lattice_cubes(ball, 3, 0.2)
    brute = brute_force_cubes(1.0, 3, 0.2)
    ok = ok and grid_bad == 0 and grid_used > 0 and coarse.n_cubes == brute
    report(10, ok, f"bound {bound:.5f} (residual {cover.residual_fraction:.5f}), "
                   f"{grid_used} grid points ok, {coarse.n_cubes} cubes at 0.2 vs brute force {brute}")
    assert ok
