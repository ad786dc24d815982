import math
from collections import Counter

import numpy as np
import pytest

from hollowopt.corpus import even_admissible_corpus, monotone_test_profile
from hollowopt.optimize import discretize_u0
from hollowopt.resistance import Weight, quad, resistance_F, resistance_weighted
from hollowopt.shapes import PLShape, make_u0, to_edge_sequence, u0
from hollowopt.sic import check_sic, check_strong_sic, forward_margin, reflect
from hollowopt.transforms import (
    TransformError,
    bracket,
    clearance_violations,
    convex_rearrange,
    family_resistance_R,
    focal_p,
    level_for_measure,
    parabolic_replace,
    phi_diagnostic,
    pl_approximate,
    rearrangement_steps,
    run_pipeline,
    strongify,
    sublevel_intervals,
)

F_U0 = math.pi / 2 - 2 * math.atan(0.5)


# -- strongify ---------------------------------------------------------------


def test_strongify_q09_gives_delta_0095():
    s = discretize_u0(64)
    res = strongify(s, 0.9, 1e-3, level_for_measure(s, 0.01))
    assert res.delta == pytest.approx(0.095)
    assert check_strong_sic(res.shape, 0.095).admissible
    assert res.shape.is_even()
    assert resistance_F(res.shape).value <= resistance_F(s).value + res.eps


def test_strongify_equals_q_u_outside_zones():
    s = discretize_u0(16)
    q, c = 0.8, level_for_measure(s, 0.02)
    res = strongify(s, q, 2e-3, c)
    xs = np.linspace(-0.999, 0.999, 4001)
    inside = np.array([any(a <= x <= b for a, b in res.zones) for x in xs])
    assert np.allclose(res.shape.values(xs[~inside]), q * s.values(xs[~inside]), atol=1e-14)
    assert np.allclose(res.shape.values(xs[inside]), c)


def test_strongify_flattening_budget():
    # rim and breakpoint zones take 2 omega, the sublevel set one more omega
    s = discretize_u0(8)
    omega = 0.01
    eta = 2 * omega / (2 * (s.n_edges + 1))
    res = strongify(s, 0.95, eta, level_for_measure(s, omega))
    covered = sum(b - a for a, b in res.zones)
    assert covered <= 3 * omega + 1e-12
    flattening = covered * 0.5
    assert flattening <= 0.015 + 1e-12
    assert resistance_F(res.shape).value - resistance_F(s).value <= res.eps


def test_strongify_limit_approaches_input():
    s = discretize_u0(16)
    res = strongify(s, 0.99999, 1e-7, level_for_measure(s, 1e-7))
    assert abs(resistance_F(res.shape).value - resistance_F(s).value) < 1e-4


def test_strongify_errors():
    s = discretize_u0(8)
    with pytest.raises(TransformError):
        strongify(s, 0.9, 1e-3, 0.0)
    with pytest.raises(TransformError):
        strongify(s, 0.9, 0.2, -0.7)
    with pytest.raises(TransformError):
        strongify(s, 1.0, 1e-3, -0.7)
    with pytest.raises(TransformError):
        strongify(PLShape.v_shape(0.9), 0.9, 1e-3, -0.7)


def test_sublevel_intervals_of_v():
    iv = sublevel_intervals(PLShape.v_shape(0.5), -0.25)
    assert iv == [[-0.5, 0.5]]


# -- PL approximation --------------------------------------------------------


def test_pl_approximate_u0():
    res = pl_approximate(make_u0(), 64, 1e-3, 1e-4)
    assert res.report.admissible and res.shape.is_even()
    diff = resistance_F(res.shape).value - F_U0
    assert 0 <= diff < 0.01
    assert diff <= res.eps


def test_pl_approximate_pl_input_keeps_slopes():
    s = PLShape.v_shape(0.5)
    sigma = 1e-3
    res = pl_approximate(s, 2, sigma, 1e-3)
    sloped = res.shape.slopes[res.shape.slopes != 0]
    assert np.all(np.abs(np.abs(sloped) - 0.5) <= sigma)
    assert np.all(np.abs(sloped) <= 0.5)


def test_pl_approximate_chord_perturbation_bound():
    s = discretize_u0(16)
    st = strongify(s, 0.9, 1e-3, level_for_measure(s, 0.01))
    gap = 1e-2
    sigma = st.delta * gap / 2
    res = pl_approximate(st.shape, 16, sigma, gap)
    xs = np.concatenate([np.linspace(a + 1e-9, b - 1e-9, 7) for a, b in res.segments])
    xs = np.concatenate([xs, -xs])
    du = res.shape.values(xs)[:, None] - res.shape.values(xs)[None, :]
    dv = st.shape.values(xs)[:, None] - st.shape.values(xs)[None, :]
    dist = np.abs(xs[:, None] - xs[None, :])
    assert np.all(np.abs(du - dv) <= st.delta * dist + 1e-12)


def test_pl_approximate_errors():
    with pytest.raises(TransformError):
        pl_approximate(make_u0(), 3, 1e-3, 1e-3)
    with pytest.raises(TransformError):
        pl_approximate(make_u0(), 4, 0.0, 1e-3)
    with pytest.raises(TransformError):
        pl_approximate(PLShape([-1, 1], [0, -0.5], [0, 0]), 4, 1e-3, 1e-3)


# -- convex rearrangement ----------------------------------------------------


def wrong_order_shape():
    return PLShape.even_from_half([-1, -0.5, 0], [0, -0.15, -0.425], [-0.05, -0.175, -0.425])


def test_convex_rearrange_wrong_order_example():
    s = wrong_order_shape()
    assert check_sic(s).admissible
    out = convex_rearrange(s)
    assert np.allclose(out.slopes, [-0.5, -0.2, 0.2, 0.5], atol=1e-15)
    assert out.is_continuous() and out.is_even()
    assert resistance_F(out).value == resistance_F(s).value


def test_convex_rearrange_fixed_point():
    s = discretize_u0(16)
    assert convex_rearrange(s) == s


def test_convex_rearrange_errors():
    with pytest.raises(TransformError):
        convex_rearrange(PLShape([-1, 0, 1], [0, -0.4, -0.2], [0, -0.4, 0]))
    with pytest.raises(TransformError):
        convex_rearrange(PLShape.v_shape(0.9))


def test_bracket_merges_jumps():
    seq = to_edge_sequence(wrong_order_shape())
    jumps, edges = bracket(seq, [1])
    assert len(jumps) == len(edges) + 1
    assert jumps[1] == seq.jumps[1] + seq.jumps[2]
    assert math.fsum(jumps) == math.fsum(seq.jumps)


def test_rearrangement_steps_keep_forward_sic():
    for s in even_admissible_corpus(100, seed=8):
        steps = rearrangement_steps(s)
        assert steps[0] == s or np.array_equal(steps[0].right, s.right)
        for u in steps:
            assert forward_margin(u) >= -1e-12


def test_convex_rearrange_corpus_properties(even_corpus):
    for s in even_corpus[:300]:
        out = convex_rearrange(s)
        assert np.all(np.diff(out.slopes) >= 0)
        assert out.is_even()
        assert check_sic(out).admissible
        assert abs(resistance_F(out).value - resistance_F(s).value) <= 1e-12
        before = Counter(map(tuple, to_edge_sequence(s).edges))
        seq = to_edge_sequence(out).edges
        after = Counter(map(tuple, seq))
        # splitting a flat middle edge is the only allowed change
        if before != after:
            assert s.n_edges % 2 == 1
        for d in (2, 3):
            w = Weight.radial(d)
            assert resistance_weighted(out, w).value <= resistance_weighted(s, w).value + 1e-12


# -- parabolic replacement ---------------------------------------------------


def test_parabolic_replace_gives_u0():
    pc = parabolic_replace(discretize_u0(64), 0.0, 1.0, -1.0)
    assert pc.p == pytest.approx(2.0)
    xs = np.linspace(0, 1, 101)
    assert np.allclose(pc.value(xs), u0(xs), atol=1e-15)


def test_parabolic_replace_fixed_point():
    pc = parabolic_replace(make_u0(), 0.2, 1.0, -1.0)
    assert (pc.x0, pc.p) == (-1.0, 2.0)


def test_parabolic_replace_focal_property():
    s, a, b = monotone_test_profile(np.random.default_rng(4))
    pc = parabolic_replace(s, a, b, -1.0)
    for x in np.linspace(a, b, 50)[1:]:
        ray = reflect(x, float(pc.derivative(x)), float(pc.value(x)))
        assert abs(ray.height_at(-1.0)) < 1e-9


def test_parabolic_replace_steep_chord_rejected():
    # the chord from (0.5, -0.6) to (1, 0) has slope 1.2: its rays pass
    # below the focus, so the clearance precondition fails
    s = PLShape.from_points([-1, 0.5, 1], [-0.6, -0.6, 0])
    assert clearance_violations(s, 0.5, 1.0, -1.0)
    with pytest.raises(TransformError, match="below"):
        parabolic_replace(s, 0.5, 1.0, -1.0)


def test_parabolic_replace_preconditions():
    s = discretize_u0(16)
    with pytest.raises(TransformError):
        parabolic_replace(s, -0.5, 1.0, -1.0)
    with pytest.raises(TransformError):
        parabolic_replace(s, -1.0 + 0.75, 0.75, 1.0)
    with pytest.raises(TransformError):
        parabolic_replace(s, 0.5, 0.4, -1.0)


def test_parabolic_replace_lowers_resistance_on_profiles():
    rng = np.random.default_rng(12)
    for _ in range(30):
        s, a, b = monotone_test_profile(rng)
        pc = parabolic_replace(s, a, b, -1.0)
        new = quad(lambda x: 0.5 / (1 + float(pc.derivative(x)) ** 2), a, b)[0]
        old = family_resistance_R(s, a, b, -1.0, Weight.constant(), [a])[0][1]
        assert new <= old + 1e-12


def test_family_resistance_endpoints():
    s, a, b = monotone_test_profile(np.random.default_rng(21))
    w = Weight.constant()
    (ta, ra), (tb, rb) = family_resistance_R(s, a, b, -1.0, w, [a, b])
    direct = quad(lambda x: 0.5 / (1 + float(s.derivatives(np.array([x]))[0]) ** 2), a, b)[0]
    bp = s.breakpoints
    pieces = np.concatenate([[a], bp[(bp > a) & (bp < b)], [b]])
    direct = math.fsum(
        quad(lambda x: 0.5 / (1 + float(s.derivatives(np.array([x]))[0]) ** 2), p0, p1)[0]
        for p0, p1 in zip(pieces[:-1], pieces[1:])
    )
    assert abs(ra - direct) < 1e-9
    pc = parabolic_replace(s, a, b, -1.0)
    arc = quad(lambda x: 0.5 / (1 + float(pc.derivative(x)) ** 2), a, b)[0]
    assert abs(rb - arc) < 1e-9


def test_family_resistance_errors():
    s, a, b = monotone_test_profile(np.random.default_rng(1))
    with pytest.raises(TransformError):
        family_resistance_R(s, a, b, -1.0, Weight.constant(), [a - 0.1])
    # |x| decreases on [a, 0] when a < 0
    s, a, b = PLShape.from_points([-1, -0.1, 0.8, 1], [-0.3, -0.3, -0.1, 0]), -0.1, 0.8
    with pytest.raises(TransformError, match="non-decreasing"):
        family_resistance_R(s, a, b, -1.0, Weight.radial(2), [a])


# -- Phi ---------------------------------------------------------------------


def test_phi_vanishes_at_w_equal_tau():
    for p in (1.2, 2.0, 3.5):
        for tau in np.linspace(1 / p, 1, 5):
            assert abs(phi_diagnostic(tau, tau, p, 1.0, lambda s: 0.5)) < 1e-12


def test_phi_at_w_zero_and_tau_a_over_p():
    for p in (1.5, 2.0, 4.0):
        tau = 1.0 / p
        v = phi_diagnostic(0.0, tau, p, 1.0, lambda s: 0.5)
        assert v * (1 + tau * tau) / (2 * tau) == pytest.approx(tau / 2, abs=1e-14)
        assert v > 0


def test_phi_matches_finite_difference_of_R():
    rng = np.random.default_rng(3)
    x0 = -1.0
    checked = 0
    for _ in range(20):
        s, a, b = monotone_test_profile(rng)
        bp = s.breakpoints
        inner = bp[(bp > a) & (bp < b)]
        knots = np.concatenate([[a], inner, [b]])
        t = 0.5 * (knots[0] + knots[1])
        h = 1e-6
        (_, r0), (_, r1) = family_resistance_R(s, a, b, x0, Weight.constant(), [t - h, t + h])
        fd = (r1 - r0) / (2 * h)
        ut = s.value(t)
        p = focal_p(t, ut, x0)
        w = float(s.derivatives(np.array([t]))[0])
        an = -0.5 * phi_diagnostic(w, (t - x0) / p, p, a - x0, lambda z: 0.5)
        if abs(an) > 1e-8:
            assert abs(fd - an) <= 1e-5 * abs(an)
            checked += 1
    assert checked >= 10


def test_phi_errors():
    with pytest.raises(TransformError):
        phi_diagnostic(0.6, 0.5, 2.0, 1.0, lambda s: 0.5)
    with pytest.raises(TransformError):
        phi_diagnostic(0.1, 0.3, 2.0, 1.0, lambda s: 0.5)
    with pytest.raises(TransformError):
        phi_diagnostic(0.1, 0.5, 2.0, 1.0, lambda s: 0.0)


# -- pipeline ----------------------------------------------------------------


def test_pipeline_end_to_end():
    for s in even_admissible_corpus(12, seed=31):
        res = run_pipeline(s)
        tr = res.trace
        assert [r.stage for r in tr] == ["input", "strongify", "pl", "convex", "parabolic"]
        assert tr[-1].value >= F_U0 - 1e-9
        for prev, cur in zip(tr, tr[1:]):
            assert cur.value <= prev.value + cur.eps + 1e-12


def test_pipeline_unknown_stage():
    with pytest.raises(TransformError):
        run_pipeline(discretize_u0(8), ["smooth"])
