"""Single impact condition (SIC) checks.

A particle falling vertically onto a regular point with slope k leaves along
the direction (-2k, 1 - k^2).  For k < 0 it travels right and the condition is
that the reflected ray stays above the generalized graph up to x = 1; this is
the chord inequality

    (1 - k^2) / (-2k) >= (u(x) - u(x0)) / (x - x0)   for all x0 < x <= 1,

and the mirror image for k > 0.  Points with k == 0 reflect straight up and
are exempt.

For a piecewise-linear graph the check is exact and finite.  Along one edge
the ray slope is constant, and for a fixed target vertex the chord slope is a
linear-fractional (hence monotone) function of x0, so its supremum over the
open edge is one of the two endpoint limits.  Over a target edge the chord
slope is also monotone, so only vertices (with both one-sided ordinates) need
to be tested.  The remaining case is a source approaching an upward jump from
the left: the chord slope blows up and the ray hits the wall.
See ``docs/pl_sic_reduction.md`` for the full argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .shapes import EPS_GEOM, LinearPiece, ParabolaPiece, ParabolicShape, PLShape, Shape

SIC_TOL = 1e-12
SUFFICIENT_SLOPE = 1.0 / math.sqrt(3.0)
DELTA_TOL = 1e-9
DEFAULT_GRID = 4096
_END_NUDGE = 1e-9


@dataclass
class SicReport:
    admissible: bool
    margin: float
    delta: float
    witnesses: list = field(default_factory=list)
    reason: str | None = None

    def to_dict(self) -> dict:
        def num(v):
            return float(v) if math.isfinite(v) else None

        return {
            "admissible": self.admissible,
            "margin": num(self.margin),
            "delta": num(self.delta),
            "witnesses": [{k: num(v) for k, v in w.items()} for w in self.witnesses],
            "reason": self.reason,
        }


@dataclass(frozen=True)
class Ray:
    origin: tuple
    direction: tuple

    def height_at(self, x: float) -> float:
        dx, dy = self.direction
        return self.origin[1] + dy * (x - self.origin[0]) / dx


class NecessaryConditionError(ValueError):
    """Slope magnitude at or above 1: no reflected ray can clear the rim."""


def reflect(x0: float, slope: float, y0: float = 0.0) -> Ray:
    """Reflected ray at (x0, y0) for a vertically falling particle.

    The direction is (-2k, 1 - k^2), unnormalized; its vertical component is
    positive whenever |k| < 1.
    """
    if abs(slope) >= 1.0:
        raise NecessaryConditionError(f"|slope| = {abs(slope)!r} >= 1")
    return Ray((float(x0), float(y0)), (-2.0 * slope, 1.0 - slope * slope))


def ray_slope(k):
    """Rise per unit horizontal travel of the reflected ray, for k != 0."""
    k = np.abs(k)
    return (1.0 - k * k) / (2.0 * k)


# ---------------------------------------------------------------------------
# chord checks
# ---------------------------------------------------------------------------


@dataclass
class _Checks:
    x0: np.ndarray
    x: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        return self.lhs - self.rhs

    @classmethod
    def empty(cls):
        z = np.empty(0)
        return cls(z, z, z, z)

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if p.x0.size]
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("x0", "x", "lhs", "rhs")))

    def mirrored(self):
        return _Checks(-self.x0, -self.x, self.lhs, self.rhs)


def _pl_forward_checks(shape: PLShape, wall_tol: float) -> _Checks:
    x, L, R, k = shape.breakpoints, shape.left, shape.right, shape.slopes
    n = k.size
    edges = np.nonzero(k < 0)[0]
    if edges.size == 0:
        return _Checks.empty()
    # vertex i -> ordinates L[i], R[i]; edge e (0-based) spans vertices e, e+1
    tx = np.concatenate([x, x])
    ty = np.concatenate([L, R])
    tj = np.concatenate([np.arange(n + 1), np.arange(n + 1)])
    parts = []
    for start in range(0, edges.size, 256):
        e = edges[start : start + 256]
        s = ray_slope(k[e])
        # source A: limit x0 -> x[e]+ ; valid targets j >= e + 1
        # source B: limit x0 -> x[e+1]- ; valid targets j >= e + 2
        for src_x, src_y, first in ((x[e], R[e], e + 1), (x[e + 1], L[e + 1], e + 2)):
            mask = tj[None, :] >= first[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                chord = (ty[None, :] - src_y[:, None]) / (tx[None, :] - src_x[:, None])
            rows, cols = np.nonzero(mask)
            parts.append(_Checks(src_x[rows], tx[cols], s[rows], chord[rows, cols]))
        # upward wall right after the edge
        wall = R[e + 1] - L[e + 1] > wall_tol
        if np.any(wall):
            ew = e[wall]
            parts.append(_Checks(x[ew + 1], x[ew + 1], s[wall], np.full(ew.size, np.inf)))
    return _Checks.concat(parts)


def _pl_checks(shape: PLShape, wall_tol: float = SIC_TOL) -> _Checks:
    fwd = _pl_forward_checks(shape, wall_tol)
    bwd = _pl_forward_checks(shape.mirrored(), wall_tol).mirrored()
    return _Checks.concat([fwd, bwd])


def _piece_grid(pc, m: int) -> np.ndarray:
    t = (np.arange(m) + 0.5) / m
    t = np.concatenate([[_END_NUDGE], t, [1.0 - _END_NUDGE]])
    return pc.a + (pc.b - pc.a) * t


def _parabolic_forward_checks(shape: ParabolicShape, n_grid: int, wall_tol: float) -> _Checks:
    pieces = shape.pieces
    m = max(8, n_grid // len(pieces))
    # targets: one-sided ordinates at every junction plus interior grid points
    tx, ty = [], []
    for i, pc in enumerate(pieces):
        g = _piece_grid(pc, m)
        tx.append(g)
        ty.append(pc.value(g))
        tx.append(np.array([pc.a, pc.b]))
        ty.append(np.array([pc.value(pc.a), pc.value(pc.b)]))
    tx.append(np.array([1.0]))
    ty.append(np.array([0.0]))
    tx = np.concatenate(tx)
    ty = np.concatenate(ty)
    parts = []
    for i, pc in enumerate(pieces):
        xs = _piece_grid(pc, m)
        ks = pc.derivative(xs)
        sel = ks < 0
        if not np.any(sel):
            continue
        xs, ks = xs[sel], ks[sel]
        ys = pc.value(xs)
        s = ray_slope(ks)
        focal = isinstance(pc, ParabolaPiece) and pc.x0 == 1.0
        for start in range(0, xs.size, 512):
            sx, sy, ss = xs[start : start + 512], ys[start : start + 512], s[start : start + 512]
            dx = tx[None, :] - sx[:, None]
            mask = dx > 0
            if focal:
                # every ray from this arc passes through its focus (1, 0)
                mask &= ~((tx[None, :] == 1.0) & (ty[None, :] == 0.0))
            chord = (ty[None, :] - sy[:, None]) / np.where(mask, dx, 1.0)
            rows, cols = np.nonzero(mask)
            parts.append(_Checks(sx[rows], tx[cols], ss[rows], chord[rows, cols]))
            if focal:
                parts.append(_Checks(sx, np.ones_like(sx), ss, ss.copy()))
        # upward step at the right end of this piece
        nxt = pieces[i + 1].value(pc.b) if i + 1 < len(pieces) else 0.0
        if pc.derivative(pc.b) < 0 and nxt - pc.value(pc.b) > wall_tol:
            sb = ray_slope(pc.derivative(pc.b))
            parts.append(_Checks(np.array([pc.b]), np.array([pc.b]), np.array([sb]), np.array([np.inf])))
    return _Checks.concat(parts)


def _parabolic_checks(shape: ParabolicShape, n_grid: int, wall_tol: float = SIC_TOL) -> _Checks:
    fwd = _parabolic_forward_checks(shape, n_grid, wall_tol)
    bwd = _parabolic_forward_checks(shape.mirrored(), n_grid, wall_tol).mirrored()
    return _Checks.concat([fwd, bwd])


def _checks(shape: Shape, n_grid: int) -> _Checks:
    if isinstance(shape, PLShape):
        return _pl_checks(shape)
    return _parabolic_checks(shape, n_grid)


# ---------------------------------------------------------------------------
# preconditions
# ---------------------------------------------------------------------------


def _shape_problem(shape: Shape, n_grid: int = DEFAULT_GRID) -> tuple | None:
    """Boundary, negativity and slope-gate failures as (reason, witness)."""
    if isinstance(shape, PLShape):
        L, R, x = shape.left, shape.right, shape.breakpoints
        if L[0] != 0.0 or R[-1] != 0.0:
            return "boundary: u(-1) and u(1) must be 0", {"x0": -1.0, "x": 1.0, "lhs": L[0], "rhs": R[-1]}
        interior = np.concatenate([R[:-1], L[1:]])
        ix = np.concatenate([x[:-1], x[1:]])
        rim = np.zeros(interior.size, dtype=bool)
        rim[0] = True
        rim[-1] = True
        bad = np.nonzero((interior > 0) | (~rim & (interior > -EPS_GEOM)))[0]
        if bad.size:
            i = int(bad[0])
            return "negativity: u must be < 0 inside (-1, 1)", {"x0": ix[i], "x": ix[i], "lhs": interior[i], "rhs": 0.0}
        k = np.abs(shape.slopes)
        if np.any(k >= 1.0 - EPS_GEOM):
            i = int(np.argmax(k))
            return (
                "necessary condition: |slope| >= 1 - eps_geom",
                {"x0": x[i], "x": x[i + 1], "lhs": float(k[i]), "rhs": 1.0 - EPS_GEOM},
            )
        return None
    for pc in shape.pieces:
        g = _piece_grid(pc, max(8, n_grid // len(shape.pieces)))
        vals = pc.value(g)
        if np.any(vals >= 0):
            i = int(np.argmax(vals))
            return "negativity: u must be < 0 inside (-1, 1)", {"x0": g[i], "x": g[i], "lhs": vals[i], "rhs": 0.0}
        ends = np.abs([pc.derivative(pc.a), pc.derivative(pc.b)])
        interior_ok = pc.a > -1.0 and pc.b < 1.0
        limit = 1.0 - EPS_GEOM if interior_ok else 1.0
        if np.any(ends > limit) or (isinstance(pc, LinearPiece) and abs(pc.slope) >= 1.0 - EPS_GEOM):
            return (
                "necessary condition: |slope| >= 1 - eps_geom",
                {"x0": pc.a, "x": pc.b, "lhs": float(ends.max()), "rhs": limit},
            )
    for lo, hi in zip(shape.pieces[:-1], shape.pieces[1:]):
        if hi.value(hi.a) >= 0 or lo.value(lo.b) >= 0:
            return "negativity: u must be < 0 inside (-1, 1)", {"x0": hi.a, "x": hi.a, "lhs": 0.0, "rhs": 0.0}
    return None


def _sup_delta(slack_min: float, tol: float) -> float:
    """Binary search for the largest delta with min slack >= delta - tol."""
    if not math.isfinite(slack_min):
        return math.inf if slack_min > 0 else 0.0
    if slack_min + tol < DELTA_TOL:
        return 0.0
    lo, hi = 0.0, slack_min + 1.0
    while hi - lo > DELTA_TOL:
        mid = 0.5 * (lo + hi)
        if slack_min >= mid - tol:
            lo = mid
        else:
            hi = mid
    return lo


def _witnesses(checks: _Checks, threshold: float, limit: int) -> list:
    slack = checks.slack
    bad = np.nonzero(slack < threshold)[0]
    bad = bad[np.argsort(slack[bad], kind="stable")]
    out, seen = [], set()
    for i in bad:
        w = {"x0": float(checks.x0[i]), "x": float(checks.x[i]), "lhs": float(checks.lhs[i]), "rhs": float(checks.rhs[i])}
        key = tuple(w.values())
        if key in seen:
            continue
        seen.add(key)
        out.append(w)
        if len(out) >= limit:
            break
    return out


def check_sic(shape: Shape, tol: float = SIC_TOL, n_grid: int = DEFAULT_GRID, max_witnesses: int = 20) -> SicReport:
    """Verify admissibility: boundary values, negativity, slope gate and SIC.

    ``margin`` is the smallest slack over all chord inequalities checked and
    ``delta`` the largest strong-SIC margin (0 when only plain SIC holds).
    """
    problem = _shape_problem(shape, n_grid)
    if problem is not None:
        reason, w = problem
        return SicReport(False, -math.inf, 0.0, [{k: float(v) for k, v in w.items()}], reason)
    checks = _checks(shape, n_grid)
    margin = float(checks.slack.min()) if checks.x0.size else math.inf
    if margin < -tol:
        return SicReport(False, margin, 0.0, _witnesses(checks, -tol, max_witnesses), "chord: reflected ray hits the graph")
    return SicReport(True, margin, min(_sup_delta(margin, tol), margin) if margin > 0 else 0.0)


def check_strong_sic(shape: PLShape, delta: float, tol: float = SIC_TOL, max_witnesses: int = 20) -> SicReport:
    """Chord inequalities with an additive margin ``delta`` on the right."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    problem = _shape_problem(shape)
    if problem is not None:
        reason, w = problem
        return SicReport(False, -math.inf, 0.0, [{k: float(v) for k, v in w.items()}], reason)
    checks = _checks(shape, DEFAULT_GRID)
    margin = float(checks.slack.min()) if checks.x0.size else math.inf
    sup = _sup_delta(margin, tol)
    ok = margin >= delta - tol
    witnesses = [] if ok else _witnesses(checks, delta - tol, max_witnesses)
    reason = None if ok else f"strong SIC fails for delta = {delta!r}"
    return SicReport(ok, margin, min(sup, margin) if margin > 0 else 0.0, witnesses, reason)


def sic_margin(shape: PLShape) -> float:
    """Smallest chord slack; -inf when a precondition fails.  Cheap path for search loops."""
    if _shape_problem(shape) is not None:
        return -math.inf
    checks = _pl_checks(shape)
    return float(checks.slack.min()) if checks.x0.size else math.inf


def forward_margin(shape: PLShape) -> float:
    """Smallest slack of the forward (rightward ray) chord inequalities only."""
    checks = _pl_forward_checks(shape, SIC_TOL)
    return float(checks.slack.min()) if checks.x0.size else math.inf


def sufficient_slope_test(shape: Shape, n_grid: int = 1025) -> bool:
    """Continuous with every slope magnitude <= 1/sqrt(3): admissible without chord checks."""
    limit = SUFFICIENT_SLOPE + EPS_GEOM
    if isinstance(shape, PLShape):
        if np.any(np.abs(shape.jumps) > SIC_TOL):
            return False
        return bool(np.all(np.abs(shape.slopes) <= limit))
    if not shape.is_continuous():
        return False
    if abs(shape.pieces[0].value(-1.0)) > SIC_TOL or abs(shape.pieces[-1].value(1.0)) > SIC_TOL:
        return False
    for pc in shape.pieces:
        ends = np.abs([pc.derivative(pc.a), pc.derivative(pc.b)])
        if np.any(ends > limit):
            return False
    return True


# ---------------------------------------------------------------------------
# geometric ray clearance
# ---------------------------------------------------------------------------


def _graph_elements(shape: Shape):
    """Yield ('piece', a, b, piece) and ('wall', x, y_lo, y_hi) left to right."""
    if isinstance(shape, PLShape):
        x, L, R = shape.breakpoints, shape.left, shape.right
        yield ("wall", x[0], L[0], R[0])
        for i in range(shape.n_edges):
            yield ("piece", x[i], x[i + 1], LinearPiece(x[i], x[i + 1], shape.slopes[i], R[i] - shape.slopes[i] * x[i]))
            yield ("wall", x[i + 1], L[i + 1], R[i + 1])
        return
    pcs = shape.pieces
    yield ("wall", -1.0, 0.0, float(pcs[0].value(-1.0)))
    for i, pc in enumerate(pcs):
        yield ("piece", pc.a, pc.b, pc)
        nxt = float(pcs[i + 1].value(pc.b)) if i + 1 < len(pcs) else 0.0
        yield ("wall", pc.b, float(pc.value(pc.b)), nxt)


def _first_drop(d0: float, d1: float, lin: float, quad: float, tol: float):
    """First t in [0, 1] where d(t) = d0 + lin t + quad t^2 falls below -tol."""
    if d0 < -tol:
        return 0.0
    if d1 >= -tol:
        return None
    if quad == 0.0:
        return (-tol - d0) / lin if lin != 0 else 0.0
    c = d0 + tol
    disc = lin * lin - 4.0 * quad * c
    disc = max(disc, 0.0)
    root = math.sqrt(disc)
    q = -0.5 * (lin + math.copysign(root, lin))
    cands = [r for r in ((q / quad) if quad else None, (c / q) if q else None) if r is not None and 0.0 <= r <= 1.0]
    return min(cands) if cands else 1.0


def ray_clears_graph(shape: Shape, x0: float, tol: float = SIC_TOL):
    """Trace the reflected ray from the regular point x0.

    Returns ``(clears, witness)`` where the witness is the first point
    (x, y) at which the ray passes strictly below the generalized graph.
    Touching within ``tol`` counts as clearance.
    """
    k = float(shape.derivative(x0))
    y0 = float(shape.value(x0))
    if k == 0.0:
        return True, None
    reflect(x0, k, y0)  # rejects |k| >= 1
    forward = k < 0
    elems = list(_graph_elements(shape))
    if not forward:
        elems = elems[::-1]
    s = ray_slope(k)

    def ray_y(x):
        return y0 + s * abs(x - x0)

    for el in elems:
        if el[0] == "wall":
            _, xw, ylo, yhi = el
            if (forward and xw <= x0) or (not forward and xw >= x0):
                continue
            top = max(ylo, yhi)
            ry = ray_y(xw)
            if ry < top - tol * max(1.0, abs(top)):
                return False, (float(xw), float(ry))
            continue
        _, a, b, pc = el
        if forward:
            if b <= x0:
                continue
            xa, xb = max(a, x0), b
        else:
            if a >= x0:
                continue
            xa, xb = min(b, x0), a
        # d(t) = ray - graph along the travel direction, t in [0, 1]
        ya = float(pc.value(xa))
        yb = float(pc.value(xb))
        da, db = ray_y(xa) - ya, ray_y(xb) - yb
        if xa == x0:
            da = max(da, 0.0)
        span = xb - xa
        if isinstance(pc, ParabolaPiece):
            quad = -(span * span) / (2.0 * pc.p)
        else:
            quad = 0.0
        lin = db - da - quad
        t = _first_drop(da, db, lin, quad, tol * max(1.0, abs(ya), abs(yb)))
        if t is not None:
            xh = xa + t * span
            return False, (float(xh), float(pc.value(xh)))
    return True, None


def _vertex_tops(shape: Shape) -> tuple[np.ndarray, np.ndarray]:
    """Abscissa and top ordinate of every wall, junction and rim point."""
    xs, tops = [], []
    for el in _graph_elements(shape):
        if el[0] == "wall":
            xs.append(el[1])
            tops.append(max(el[2], el[3]))
    return np.array(xs, dtype=float), np.array(tops, dtype=float)


def rays_clear_graph(shape: Shape, xs, tol: float = SIC_TOL) -> np.ndarray:
    """Vectorized verdict of :func:`ray_clears_graph` for many regular points.

    Between walls the graph is a segment or a convex arc, so ray minus graph
    is linear or concave there and dips lowest at the ends; the verdict only
    needs the ray height at each wall against the wall top.
    """
    xs = np.asarray(xs, dtype=float)
    k = shape.derivatives(xs)
    y = shape.values(xs)
    vx, vtop = _vertex_tops(shape)
    ok = np.ones(xs.size, dtype=bool)
    moving = np.nonzero(k != 0.0)[0]
    for start in range(0, moving.size, 4096):
        sl = moving[start : start + 4096]
        s = ray_slope(k[sl])
        direction = -np.sign(k[sl])
        ahead = (vx[None, :] - xs[sl, None]) * direction[:, None]
        ray = y[sl, None] + s[:, None] * np.abs(ahead)
        low = (ahead > 0) & (ray < vtop[None, :] - tol * np.maximum(1.0, np.abs(vtop))[None, :])
        ok[sl] = ~np.any(low, axis=1)
    return ok


def sample_points(shape: PLShape, n_samples: int = 200) -> np.ndarray:
    """``n_samples`` points per non-flat edge, the outer ones nudged off the ends."""
    x = shape.breakpoints
    t = np.linspace(0.0, 1.0, n_samples)
    t[0], t[-1] = _END_NUDGE, 1.0 - _END_NUDGE
    pts = [x[i] + (x[i + 1] - x[i]) * t for i, k in enumerate(shape.slopes) if k != 0.0]
    return np.concatenate(pts) if pts else np.empty(0)


def scan_ray_clearance(shape: PLShape, n_samples: int = 200, tol: float = SIC_TOL, max_witnesses: int = 20) -> list:
    """Trace rays from ``n_samples`` points per non-flat edge.

    Returns (x0, hit_x, hit_y) for every ray that hits the graph; the hit
    point is only located for the first ``max_witnesses`` of them (NaN after).
    """
    xs = sample_points(shape, n_samples)
    bad = xs[~rays_clear_graph(shape, xs, tol)]
    hits = []
    for i, x0 in enumerate(bad):
        w = ray_clears_graph(shape, float(x0), tol)[1] if i < max_witnesses else None
        hits.append((float(x0), w[0], w[1]) if w else (float(x0), math.nan, math.nan))
    return hits
