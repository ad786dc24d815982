"""Shape transformations that never raise the weighted resistance by much.

Chained together they take any even admissible profile to u0:

* :func:`strongify` scales the profile by q < 1 and flattens small zones,
  which buys a uniform SIC margin (1 - q^2)/2;
* :func:`pl_approximate` replaces a profile with a strong margin by a
  piecewise-linear one with slightly shallower slopes;
* :func:`convex_rearrange` sorts the edges of an even PL profile by slope,
  which keeps the plain resistance and can only lower radial ones;
* :func:`parabolic_replace` swaps a monotone piece for the focal parabola
  through its right end, which also never raises the resistance.

:func:`family_resistance_R` and :func:`phi_diagnostic` expose the interpolation
between a monotone piece and its parabola so the monotonicity can be checked
numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .resistance import Weight, quad, resistance_weighted
from .shapes import (
    EPS_GEOM,
    EdgeSequence,
    LinearPiece,
    ParabolaPiece,
    ParabolicShape,
    PLShape,
    Shape,
    split_middle_if_odd,
    to_edge_sequence,
)
from .sic import SicReport, check_sic, check_strong_sic

SLOPE_SHRINK_BOUND = 3.0 * math.sqrt(3.0) / 8.0  # max |d/dk 1/(1+k^2)|
CLEARANCE_GRID = 4096


class TransformError(ValueError):
    """A precondition or a post-transform verification failed."""


def _weighted(shape: Shape, weight: Weight) -> float:
    return resistance_weighted(shape, weight).value


def _merge(intervals) -> list:
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return out


# ---------------------------------------------------------------------------
# strong SIC
# ---------------------------------------------------------------------------


@dataclass
class StrongifyResult:
    shape: PLShape
    delta: float
    eps: float
    zones: list
    report: SicReport


def sublevel_intervals(shape: PLShape, c: float) -> list:
    """Intervals where the (continuous part of the) profile is <= c."""
    x, k = shape.breakpoints, shape.slopes
    out = []
    for i in range(shape.n_edges):
        y0, y1 = shape.right[i], shape.left[i + 1]
        a, b = x[i], x[i + 1]
        if y0 <= c and y1 <= c:
            out.append((a, b))
        elif y0 <= c < y1:
            out.append((a, a + (c - y0) / k[i]))
        elif y1 <= c < y0:
            out.append((a + (c - y0) / k[i], b))
    return [list(iv) for iv in _merge(out) if iv[1] > iv[0]]


def level_for_measure(shape: PLShape, measure: float) -> float:
    """Largest c < 0 (to 1e-12) with |{u <= c}| <= measure."""
    lo = float(min(shape.left.min(), shape.right.min())) - 1.0
    hi = -EPS_GEOM
    if sum(b - a for a, b in sublevel_intervals(shape, hi)) <= measure:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sum(b - a for a, b in sublevel_intervals(shape, mid)) <= measure:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return lo


def strongify(shape: PLShape, q: float, eta: float, c: float, weight: Weight | None = None) -> StrongifyResult:
    """q * u away from small zones, the constant c inside them.

    Zones are the eta-neighbourhoods of the rim points and of every interior
    breakpoint, plus the sublevel set {u <= c}.  The result satisfies strong
    SIC with delta = (1 - q^2)/2, which is verified.  ``eps`` bounds the
    increase of the weighted resistance: the zones contribute at most their
    length times max f, the scaling the exact difference of the integrands.
    """
    weight = weight or Weight.constant()
    if not 0.0 < q < 1.0:
        raise TransformError(f"q must lie in (0, 1), got {q!r}")
    if not eta > 0:
        raise TransformError(f"eta must be > 0, got {eta!r}")
    if not c < 0:
        raise TransformError(f"c must be negative, got {c!r}")
    if not shape.is_even():
        raise TransformError("strongify needs an even shape")
    rep = check_sic(shape)
    if not rep.admissible:
        raise TransformError(f"input is not admissible: {rep.reason}")
    x = shape.breakpoints
    zones = [[-1.0, -1.0 + eta], [1.0 - eta, 1.0]]
    zones += [[b - eta, b + eta] for b in x[1:-1]]
    zones += sublevel_intervals(shape, c)
    zones = [[max(a, -1.0), min(b, 1.0)] for a, b in _merge(zones)]
    covered = sum(b - a for a, b in zones)
    if covered >= 1.0:
        raise TransformError(f"flattened zones have total length {covered:.6g} >= 1; reduce eta or c")

    # breakpoints of the output: zone ends plus input breakpoints outside zones
    def in_zone(t):
        return any(a < t < b for a, b in zones)

    pts = sorted({-1.0, 1.0, *(v for z in zones for v in z), *(t for t in x if not in_zone(t))})
    pts = np.array(pts)
    mids = 0.5 * (pts[:-1] + pts[1:])
    flat = np.array([in_zone(m) for m in mids])
    n = pts.size
    left = np.empty(n)
    right = np.empty(n)
    left[0], right[-1] = 0.0, 0.0
    for i in range(n - 1):
        a, b = pts[i], pts[i + 1]
        if flat[i]:
            ya = yb = c
        else:
            k = shape.derivatives(np.array([mids[i]]))[0]
            ym = shape.values(np.array([mids[i]]))[0]
            ya = q * (ym + k * (a - mids[i]))
            yb = q * (ym + k * (b - mids[i]))
        right[i] = ya
        left[i + 1] = yb
    out = PLShape(pts, left, right)
    delta = 0.5 * (1.0 - q * q)
    report = check_strong_sic(out, delta)
    if not report.admissible:
        raise TransformError(f"strong SIC verification failed: {report.reason}")
    # resistance bookkeeping on the input's own pieces
    zone_part = covered * float(weight(1.0))
    scale_terms = []
    for i in range(n - 1):
        if flat[i]:
            continue
        k = shape.derivatives(np.array([mids[i]]))[0]
        scale_terms.append(weight.integral(pts[i], pts[i + 1]) * (1.0 / (1.0 + (q * k) ** 2) - 1.0 / (1.0 + k * k)))
    eps = float(zone_part + math.fsum(scale_terms))
    return StrongifyResult(out, delta, eps, [tuple(z) for z in zones], report)


# ---------------------------------------------------------------------------
# piecewise-linear approximation
# ---------------------------------------------------------------------------


@dataclass
class PLApproximation:
    shape: PLShape
    eps: float
    segments: list
    report: SicReport


def _singular_points(shape: Shape) -> np.ndarray:
    if isinstance(shape, PLShape):
        return shape.breakpoints
    return shape.junctions


def _piece_at(shape: ParabolicShape, x: float):
    for pc in shape.pieces:
        if pc.a <= x <= pc.b:
            return pc
    return shape.pieces[-1]


def _segment_profile(shape: Shape, a: float, b: float, sigma: float):
    """Nodes and values of the PL replacement on one smooth segment [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * sigma
    if isinstance(shape, PLShape):
        nodes = np.array([a, b])
        ds = shape.derivatives(np.array([mid]))
        lo = hi = ds
    else:
        pc = _piece_at(shape, mid)
        if isinstance(pc, LinearPiece):
            nodes = np.array([a, b])
            lo = hi = np.array([pc.slope])
        else:
            # sub-pieces on which u' varies by at most sigma/2
            m = max(1, math.ceil((b - a) / (pc.p * half)))
            nodes = np.linspace(a, b, m + 1)
            ds = pc.derivative(nodes)
            lo, hi = ds[:-1], ds[1:]
    # |w| = min |u'| - sigma/2 keeps |u'| - sigma <= |w| <= |u'| and makes
    # every slope strictly shallower, which pays for the shifted values
    mag = np.maximum(np.minimum(np.abs(lo), np.abs(hi)) - half, 0.0)
    slopes = np.where(lo * hi <= 0, 0.0, np.sign(lo) * mag)
    # primitive anchored at the segment center
    yc = float(shape.values(np.array([mid]))[0])
    j = min(int(np.searchsorted(nodes, mid, side="right")) - 1, slopes.size - 1)
    vals = np.empty(nodes.size)
    vals[j] = yc + slopes[j] * (nodes[j] - mid)
    for i in range(j - 1, -1, -1):
        vals[i] = vals[i + 1] - slopes[i] * (nodes[i + 1] - nodes[i])
    for i in range(j + 1, nodes.size):
        vals[i] = vals[i - 1] + slopes[i - 1] * (nodes[i] - nodes[i - 1])
    return nodes, vals


def pl_approximate(shape: Shape, n_segments: int, sigma: float, gap: float,
                   weight: Weight | None = None) -> PLApproximation:
    """Even PL profile with slopes at most ``sigma`` shallower than the input.

    [-1, 1] is cut at a uniform grid of ``n_segments`` cells and at the
    input's own breakpoints; each cell loses ``gap/2`` at both ends.  On the
    retained segments the output is a primitive of a step function w with
    |u'| - sigma <= |w| <= |u'| that matches u at the segment center; on the
    gaps it sits at the lowest value reached on the segments.  Admissibility
    is verified.  ``eps`` bounds the change in weighted resistance:
    gaps * max f + (3 sqrt(3)/8) * sigma * integral of f.
    """
    weight = weight or Weight.constant()
    if n_segments < 2 or n_segments % 2:
        raise TransformError(f"n_segments must be even and >= 2, got {n_segments!r}")
    if not sigma > 0 or not gap > 0:
        raise TransformError("sigma and gap must be positive")
    if not shape.is_even():
        raise TransformError("pl_approximate needs an even shape")
    grid = np.linspace(-1.0, 0.0, n_segments // 2 + 1)
    sing = _singular_points(shape)
    cuts = np.unique(np.concatenate([grid, sing[(sing >= -1.0) & (sing <= 0.0)]]))
    segs = []
    for c0, c1 in zip(cuts[:-1], cuts[1:]):
        a, b = c0 + 0.5 * gap, c1 - 0.5 * gap
        if b - a > 1e-12:
            segs.append((a, b, *_segment_profile(shape, a, b, sigma)))
    if not segs:
        raise TransformError("gap is wider than every cell; nothing retained")
    fill = min(float(v.min()) for *_, v in segs)
    if fill >= -EPS_GEOM or max(float(v.max()) for *_, v in segs) >= -EPS_GEOM:
        raise TransformError("approximation is not negative on the interior; reduce sigma")
    xs, left, right = [-1.0], [0.0], [fill]
    for a, b, nodes, vals in segs:
        xs.append(a)
        left.append(fill)
        right.append(vals[0])
        for t, v in zip(nodes[1:-1], vals[1:-1]):
            xs.append(t)
            left.append(v)
            right.append(v)
        xs.append(b)
        left.append(vals[-1])
        right.append(fill)
    if xs[-1] < 0.0:
        xs.append(0.0)
        left.append(fill)
        right.append(fill)
    else:
        right[-1] = left[-1]
    out = PLShape.even_from_half(xs, left, right)
    report = check_sic(out)
    if not report.admissible:
        raise TransformError(f"PL approximation is not admissible: {report.reason}")
    retained = 2.0 * sum(b - a for a, b, *_ in segs)
    eps = float((2.0 - retained) * float(weight(1.0)) + SLOPE_SHRINK_BOUND * sigma * weight.integral(-1.0, 1.0))
    return PLApproximation(out, eps, [(a, b) for a, b, *_ in segs], report)


# ---------------------------------------------------------------------------
# convex rearrangement
# ---------------------------------------------------------------------------


def bracket(seq: EdgeSequence, removed) -> EdgeSequence | tuple:
    """Drop the listed edges and add up each run of consecutive jumps.

    Returns (jumps, edges) with len(jumps) == len(edges) + 1; the result is
    a plain tuple because it need not be a full edge sequence of [-1, 1].
    """
    removed = set(int(i) for i in removed)
    jumps = [seq.jumps[0]]
    edges = []
    for i in range(seq.n_edges):
        if i in removed:
            jumps[-1] = jumps[-1] + seq.jumps[i + 1]
        else:
            edges.append(seq.edges[i])
            jumps.append(seq.jumps[i + 1])
    return jumps, edges


def _polyline(jumps, edges) -> PLShape:
    xs, left, right = [-1.0], [0.0], [jumps[0]]
    x_terms, y_terms = [-1.0], [jumps[0]]
    for (dx, dy), w in zip(edges, jumps[1:]):
        x_terms.append(dx)
        y_terms.append(dy)
        xs.append(math.fsum(x_terms))
        left.append(math.fsum(y_terms))
        y_terms.append(w)
        right.append(math.fsum(y_terms))
    xs[-1] = 1.0
    return PLShape(xs, left, right)


def _sorted_order(shape: PLShape):
    seq = split_middle_if_odd(to_edge_sequence(shape))
    return seq, np.argsort(seq.slopes, kind="stable")


def rearrangement_steps(shape: PLShape) -> list:
    """Intermediate profiles u_0 = u, ..., u_{n/2}.

    u_k starts with the k most declining edges and continues with the
    original sequence minus those edges (jumps merged).  Each of them keeps
    forward SIC when u has it.
    """
    seq, order = _sorted_order(shape)
    steps = []
    for k in range(seq.n_edges // 2 + 1):
        head = order[:k]
        jumps, edges = bracket(seq, head)
        steps.append(_polyline([0.0] * k + list(jumps), [seq.edges[i] for i in head] + list(edges)))
    return steps


def convex_rearrange(shape: PLShape, verify: bool = True) -> PLShape:
    """Convex even profile built from the edges sorted by slope.

    The left half is the chain of the n/2 most declining edges from (-1, 0);
    the right half is its mirror image.  Jumps disappear, so the output is
    continuous.  Edge widths and slopes are permuted, never altered.
    """
    if not shape.is_even():
        raise TransformError("convex_rearrange needs an even shape")
    if verify:
        rep = check_sic(shape)
        if not rep.admissible:
            raise TransformError(f"input is not admissible: {rep.reason}")
    seq, order = _sorted_order(shape)
    n = seq.n_edges
    half = seq.edges[order[: n // 2]]
    if not np.any(half[:, 1] != 0.0):
        raise TransformError("shape has no sloped edge to rearrange")
    xs = [-1.0]
    ys = [0.0]
    x_terms, y_terms = [-1.0], [0.0]
    for dx, dy in half:
        x_terms.append(dx)
        y_terms.append(dy)
        xs.append(math.fsum(x_terms))
        ys.append(math.fsum(y_terms))
    if abs(xs[-1]) > 1e-12:
        raise TransformError(f"declining edges do not end at x = 0 (end {xs[-1]!r}); input not even")
    xs[-1] = 0.0
    out = PLShape.even_from_half(xs, ys, ys)
    if verify:
        rep = check_sic(out)
        if not rep.admissible:
            raise TransformError(f"rearranged shape is not admissible: {rep.reason}")
    return out


# ---------------------------------------------------------------------------
# parabolic replacement
# ---------------------------------------------------------------------------


def focal_p(t: float, ut: float, x0: float) -> float:
    """Latus parameter of the parabola with focus (x0, 0) through (t, ut)."""
    s = t - x0
    return -ut + math.hypot(s, ut)


def _monotone_piece_values(u: Shape, a: float, b: float, n: int = CLEARANCE_GRID):
    xs = np.linspace(a, b, n + 1)[1:-1]
    extra = []
    if isinstance(u, PLShape):
        bp = u.breakpoints
        extra = bp[(bp > a) & (bp < b)]
        xs = np.unique(np.concatenate([xs, extra]))
        xs = xs[~np.isin(xs, bp)]
    return xs, u.values(xs), u.derivatives(xs), np.asarray(extra, dtype=float)


def clearance_violations(u: Shape, a: float, b: float, x0: float, tol: float = 1e-12) -> list:
    """Grid points in (a, b) whose reflected ray passes below (x0, 0)."""
    xs, ys, ds, _ = _monotone_piece_values(u, a, b)
    s = xs - x0
    kmax = (ys + np.hypot(ys, s)) / s
    bad = np.nonzero((ds > 0) & (ds > kmax + tol))[0]
    return [(float(xs[i]), float(ds[i]), float(kmax[i])) for i in bad]


def _check_replace_pre(u: Shape, a: float, b: float, x0: float):
    if not a < b:
        raise TransformError(f"need a < b, got [{a}, {b}]")
    if a < 0.5 * (x0 + b) - 1e-15:
        raise TransformError(f"need (x0 + b)/2 <= a; got a = {a}, (x0 + b)/2 = {0.5 * (x0 + b)}")
    xs, ys, ds, bps = _monotone_piece_values(u, a, b)
    if np.any(ds < 0):
        raise TransformError("u must be non-decreasing on [a, b]")
    if isinstance(u, PLShape):
        bp = u.breakpoints
        inside = (bp > a) & (bp < b)
        if np.any(u.right[inside] < u.left[inside]):
            raise TransformError("u must be non-decreasing on [a, b] (downward jump)")
    ub = float(u.value(b, "left"))
    if ub > 0:
        raise TransformError(f"need u(b) <= 0, got {ub}")
    bad = clearance_violations(u, a, b, x0)
    if bad:
        x, d, k = bad[0]
        raise TransformError(f"reflected ray from x = {x} passes below ({x0}, 0): slope {d} > {k}")
    return ub


def parabolic_replace(u: Shape, a: float, b: float, x0: float) -> ParabolaPiece:
    """Arc through (b, u(b)) with focus (x0, 0) replacing u on [a, b]."""
    ub = _check_replace_pre(u, a, b, x0)
    p = focal_p(b, ub, x0)
    if not p > 0:
        raise TransformError(f"degenerate parabola, p = {p}")
    return ParabolaPiece(a, b, x0, p)


def _tail_integral(u: Shape, t: float, b: float, weight: Weight) -> float:
    """Integral over [t, b] of f / (1 + u'^2)."""
    if isinstance(u, PLShape):
        bp = u.breakpoints
        cuts = np.unique(np.concatenate([[t, b], bp[(bp > t) & (bp < b)]]))
        terms = []
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            k = u.derivatives(np.array([0.5 * (c0 + c1)]))[0]
            terms.append(weight.integral(c0, c1) / (1.0 + k * k))
        return math.fsum(terms)
    return quad(lambda x: float(weight(x)) / (1.0 + float(u.derivatives(np.array([x]))[0]) ** 2), t, b)[0]


def _arc_integral(a: float, t: float, x0: float, p: float, weight: Weight) -> float:
    if t <= a:
        return 0.0
    if weight.kind == "constant" or (weight.kind == "radial" and weight.d == 1):
        return 0.5 * p * (math.atan((t - x0) / p) - math.atan((a - x0) / p))
    return quad(lambda x: float(weight(x)) / (1.0 + ((x - x0) / p) ** 2), a, t)[0]


def family_resistance_R(u: Shape, a: float, b: float, x0: float, weight: Weight, t_grid) -> list:
    """(t, R(t)) where R(t) is the resistance on [a, b] of the hybrid profile.

    The hybrid is the focal parabola through (t, u(t)) on [a, t] and u on
    [t, b]; R(a) is the resistance of u and R(b) that of the replacement arc.
    """
    _check_replace_pre(u, a, b, x0)
    probe = weight(np.linspace(a, b, 1025))
    if np.any(probe < 0) or np.any(np.diff(probe) < -1e-12 * np.maximum(1.0, probe[1:])):
        raise TransformError(f"weight must be non-negative and non-decreasing on [{a}, {b}]")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < a) or np.any(t_grid > b):
        raise TransformError("t_grid must lie in [a, b]")
    out = []
    for t in t_grid:
        ut = float(u.value(t, "left")) if t > a else float(u.value(t, "right"))
        p = focal_p(t, ut, x0)
        if t > a and not p > 0:
            raise TransformError(f"p(t) = {p} at t = {t}")
        r = _arc_integral(a, t, x0, p, weight) + _tail_integral(u, t, b, weight)
        out.append((float(t), float(r)))
    return out


def phi_diagnostic(w: float, tau: float, p: float, a: float, phi) -> float:
    """-R'(t)/phi(t) written in w = u'(t), tau = t/p, with the focus at 0.

    ``a`` is the left end of the interval measured from the focus and
    ``phi`` the weight as a function of the same shifted coordinate.
    """
    if not (0.0 <= w <= tau <= 1.0):
        raise TransformError(f"need 0 <= w <= tau <= 1, got w = {w}, tau = {tau}")
    if not (p > 0 and 0.0 < a / p <= tau):
        raise TransformError(f"need 0 < a/p <= tau, got a/p = {a / p}")
    top = float(phi(p * tau))
    if top == 0.0:
        raise TransformError("phi(p tau) = 0; the ratio is undefined")
    inner = quad(lambda xi: xi * xi / (1.0 + xi * xi) ** 2 * float(phi(p * xi)) / top, a / p, tau)[0]
    return (1.0 / (1.0 + w * w) - 1.0 / (1.0 + tau * tau)) + 4.0 * (w - tau) / (1.0 + tau * tau) * inner


def replace_half_with_parabola(shape: PLShape, x0: float = -1.0) -> ParabolicShape:
    """Replace both halves of a convex even profile by focal arcs."""
    right = parabolic_replace(shape, 0.0, 1.0, x0)
    left = ParabolaPiece(-1.0, 0.0, -x0, right.p)
    return ParabolicShape((left, right))


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

STAGES = ("strongify", "pl", "convex", "parabolic")


@dataclass
class StageRecord:
    stage: str
    value: float
    margin: float
    eps: float


@dataclass
class PipelineResult:
    shape: Shape
    trace: list = field(default_factory=list)


def run_pipeline(shape: Shape, stages=STAGES, weight: Weight | None = None, q: float = 0.99,
                 eta: float = 1e-3, c: float | None = None, n_segments: int = 64,
                 sigma: float = 1e-3, gap: float = 1e-3) -> PipelineResult:
    """Apply the stages in order and log the weighted resistance after each."""
    weight = weight or Weight.constant()
    cur = shape
    rep = check_sic(cur)
    trace = [StageRecord("input", _weighted(cur, weight), rep.margin, 0.0)]
    for st in stages:
        if st == "strongify":
            if not isinstance(cur, PLShape):
                raise TransformError("strongify needs a PL shape")
            level = c if c is not None else level_for_measure(cur, eta)
            res = strongify(cur, q, eta, level, weight)
            cur, eps, margin = res.shape, res.eps, res.report.margin
        elif st == "pl":
            res = pl_approximate(cur, n_segments, sigma, gap, weight)
            cur, eps, margin = res.shape, res.eps, res.report.margin
        elif st == "convex":
            cur = convex_rearrange(cur)
            eps, margin = 0.0, check_sic(cur).margin
        elif st == "parabolic":
            if not isinstance(cur, PLShape):
                raise TransformError("parabolic replacement needs a convex PL shape")
            cur = replace_half_with_parabola(cur)
            eps, margin = 0.0, check_sic(cur).margin
        else:
            raise TransformError(f"unknown stage {st!r}; choose from {', '.join(STAGES)}")
        trace.append(StageRecord(st, _weighted(cur, weight), margin, eps))
    return PipelineResult(cur, trace)
