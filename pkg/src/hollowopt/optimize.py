"""Derivative-free search over even admissible piecewise-linear profiles.

A profile with ``n_segments`` uniform intervals is parameterized by the
slopes of its right half, integrated inward from the anchor u(1) = 0 and
mirrored.  Evenness and the boundary values therefore hold by construction
and the search only has box constraints plus SIC, which is enforced by
rejecting infeasible candidates.

The search is a mesh-adaptive direct search: each iteration polls the
positive and negative directions of a random orthonormal basis, moves to the
first improving feasible point and doubles the step, or halves the step when
no poll direction improves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .resistance import Weight, resistance_weighted
from .shapes import EPS_GEOM, PLShape, u0
from .sic import SIC_TOL, check_sic, sic_margin

DEFAULT_SLACK = 1e-6


class DiscretizationError(RuntimeError):
    pass


def _check_n(n_segments: int, minimum: int = 2) -> int:
    if int(n_segments) != n_segments or n_segments < minimum or n_segments % 2:
        raise ValueError(f"n_segments must be an even integer >= {minimum}, got {n_segments!r}")
    return int(n_segments) // 2


def shape_from_half_slopes(slopes) -> PLShape:
    """Even continuous profile from right-half slopes ordered center -> rim."""
    k = np.asarray(slopes, dtype=float)
    m = k.size
    h = 1.0 / m
    y = np.zeros(m + 1)
    # integrate inward from u(1) = 0; y[j] is the value at x = j h
    y[:-1] = -np.cumsum((k * h)[::-1])[::-1]
    xh = np.linspace(-1.0, 0.0, m + 1)
    yh = y[::-1]
    return PLShape.even_from_half(xh, yh, yh)


def half_slopes(shape: PLShape) -> np.ndarray:
    """Right-half slopes of an even shape, ordered center -> rim."""
    return np.array(shape.slopes[shape.n_edges // 2 :])


def discretize_u0(n_segments: int, slack: float = DEFAULT_SLACK) -> PLShape:
    """Even admissible PL profile close to u0 on a uniform grid.

    The plain interpolant of u0 is not admissible: each secant is steeper
    than the tangent at the inner end of its interval, so the reflected ray
    from there ends below the opposite rim.  Instead the slopes are chosen
    from the rim inward, each one the steepest for which the ray leaving the
    inner end of its interval still passes ``slack`` (in slope units) above
    the opposite rim point.  With slack = 0 the construction is exact for the
    parabola in the limit of fine grids.  The result is verified with
    :func:`check_sic`.
    """
    m = _check_n(n_segments)
    h = 1.0 / m
    y = 0.0
    k = np.empty(m)
    for j in range(m, 0, -1):
        arm = (j - 1) * h + 1.0  # horizontal distance to the opposite rim
        b = y - arm * slack
        k[j - 1] = (b + math.sqrt(b * b + arm * (arm + 2.0 * h))) / (arm + 2.0 * h)
        y -= k[j - 1] * h
    shape = shape_from_half_slopes(k)
    rep = check_sic(shape)
    if not rep.admissible:
        raise DiscretizationError(f"discretized u0 failed the SIC check: {rep.reason}")
    return shape


def interpolate_u0(n_segments: int) -> PLShape:
    """Plain PL interpolant of u0 at uniform nodes (not admissible; for comparison)."""
    _check_n(n_segments)
    x = np.linspace(-1.0, 1.0, n_segments + 1)
    return PLShape.from_points(x, u0(x))


@dataclass
class OptimizationRun:
    n_segments: int
    weight: Weight
    best_shape: PLShape
    best_value: float
    history: list = field(default_factory=list)
    constraint_violations: int = 0
    evaluations: int = 0
    start: str = "discretized_u0"

    def summary(self) -> dict:
        return {
            "n_segments": self.n_segments,
            "weight": str(self.weight),
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "constraint_violations": self.constraint_violations,
            "start": self.start,
        }


def minimize(
    weight: Weight | None = None,
    n_segments: int = 64,
    budget: int = 20000,
    seed: int = 0,
    start: PLShape | None = None,
    initial_step: float = 1e-3,
    min_step: float = 1e-13,
) -> OptimizationRun:
    """Minimize the weighted resistance over even admissible PL profiles.

    ``budget`` counts objective evaluations including rejected candidates.
    Every accepted iterate satisfies SIC; ``constraint_violations`` counts
    candidates rejected for failing it.
    """
    weight = weight or Weight.constant()
    m = _check_n(n_segments, minimum=4)
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget!r}")
    lo, hi = -1.0 + EPS_GEOM, 1.0 - EPS_GEOM
    rng = np.random.default_rng(seed)

    def feasible(shape):
        return sic_margin(shape) >= -SIC_TOL

    def objective(shape):
        return resistance_weighted(shape, weight).value

    start_name = "given" if start is not None else "discretized_u0"
    x = half_slopes(start) if start is not None else half_slopes(discretize_u0(n_segments))
    if x.size != m:
        raise ValueError(f"start shape has {2 * x.size} segments, expected {n_segments}")
    cur = shape_from_half_slopes(x)
    if start is not None and not cur == start:
        raise ValueError("start shape must be even, continuous and on the uniform grid")
    violations = 0
    if not feasible(cur):
        violations += 1
        x = 0.9 * half_slopes(discretize_u0(n_segments))
        cur = shape_from_half_slopes(x)
        start_name = "scaled_u0"
    fx = objective(cur)
    evals = 1
    history = [(0, fx)]
    step = initial_step
    it = 0
    while evals < budget and step >= min_step:
        it += 1
        basis, _ = np.linalg.qr(rng.standard_normal((m, m)))
        dirs = np.concatenate([basis.T, -basis.T])
        improved = False
        for d in dirs:
            if evals >= budget:
                break
            cand = x + step * d
            if np.any(cand < lo) or np.any(cand > hi):
                continue
            shape = shape_from_half_slopes(cand)
            evals += 1
            fc = objective(shape)
            if fc >= fx:
                continue
            if not feasible(shape):
                violations += 1
                continue
            x, fx, cur = cand, fc, shape
            improved = True
            history.append((it, fx))
            break
        step = min(2.0 * step, 0.5) if improved else 0.5 * step
    return OptimizationRun(n_segments, weight, cur, fx, history, violations, evals, start_name)
