"""Monte Carlo billiard simulation of a vertical particle flow.

Particles fall straight down, hit the generalized graph once, and reflect by
v+ = v - 2<v, n> n.  This module deliberately does not use the chord
inequalities from :mod:`hollowopt.sic`; it only knows the graph as a set of
segments and arcs and asks whether the reflected ray comes back under it.

A ray re-enters the hollow exactly when some graph point on its travel side
lies strictly above the ray line.  Along a segment the signed distance to the
line is linear, and along a focal arc (convex) it is convex, so the test only
needs the segment and arc endpoints, including both one-sided ordinates at
every jump and the rim points (+-1, 0).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .shapes import EPS_GEOM, LinearPiece, ParabolaPiece, PLShape, Shape

CHUNK = 1 << 16
CLEAR_TOL = 1e-12
MAX_RECORDED = 1000


@dataclass(frozen=True)
class Trajectory:
    entry_x: float
    hit_point: tuple
    direction: tuple
    second_hit: tuple | None


@dataclass
class FlowResult:
    n_particles: int
    resistance_estimate: float
    std_error: float
    violations: list = field(default_factory=list)
    seed: int = 0
    n_violations: int = 0
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "n_particles": self.n_particles,
            "resistance_estimate": self.resistance_estimate,
            "std_error": self.std_error,
            "seed": self.seed,
            "n_violations": self.n_violations,
            "n_skipped": self.n_skipped,
            "violations": self.violations,
        }


def reflected_direction(slope):
    """Unit outgoing velocity for incoming (0, -1) off a surface with this slope."""
    k = np.asarray(slope, dtype=float)
    nx, ny = -k, np.ones_like(k)
    norm = np.hypot(nx, ny)
    nx, ny = nx / norm, ny / norm
    dot = -ny  # <(0, -1), n>
    return -2.0 * dot * nx, -1.0 - 2.0 * dot * ny


# ---------------------------------------------------------------------------
# graph geometry
# ---------------------------------------------------------------------------


def _graph_points(shape: Shape) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of every segment and arc of the generalized graph."""
    if isinstance(shape, PLShape):
        x = shape.breakpoints
        return np.concatenate([x, x]), np.concatenate([shape.left, shape.right])
    px, py = [-1.0, 1.0], [0.0, 0.0]
    for pc in shape.pieces:
        px += [pc.a, pc.b]
        py += [float(pc.value(pc.a)), float(pc.value(pc.b))]
    return np.array(px), np.array(py)


def _segments(shape: Shape) -> list:
    """Graph elements as ('seg', A, B) or ('arc', piece), left to right."""
    out = []
    if isinstance(shape, PLShape):
        x, L, R = shape.breakpoints, shape.left, shape.right
        for i in range(x.size):
            if L[i] != R[i]:
                out.append(("seg", (x[i], L[i]), (x[i], R[i])))
            if i + 1 < x.size:
                out.append(("seg", (x[i], R[i]), (x[i + 1], L[i + 1])))
        return out
    pcs = shape.pieces
    out.append(("seg", (-1.0, 0.0), (-1.0, float(pcs[0].value(-1.0)))))
    for i, pc in enumerate(pcs):
        if isinstance(pc, LinearPiece):
            out.append(("seg", (pc.a, float(pc.value(pc.a))), (pc.b, float(pc.value(pc.b)))))
        else:
            out.append(("arc", pc))
        nxt = float(pcs[i + 1].value(pc.b)) if i + 1 < len(pcs) else 0.0
        out.append(("seg", (pc.b, float(pc.value(pc.b))), (pc.b, nxt)))
    return out


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _ray_segment(p, d, a, b):
    """Smallest ray parameter t > 0 where the ray meets segment ab, else None."""
    ex, ey = b[0] - a[0], b[1] - a[1]
    den = _cross(d[0], d[1], ex, ey)
    wx, wy = a[0] - p[0], a[1] - p[1]
    if den == 0.0:
        return None
    t = _cross(wx, wy, ex, ey) / den
    s = _cross(wx, wy, d[0], d[1]) / den
    if t > 0.0 and -1e-12 <= s <= 1.0 + 1e-12:
        return t
    return None


def _ray_arc(p, d, pc: ParabolaPiece):
    """Smallest t > 0 with p + t d on the arc (2 p_ y = (x - x0)^2 - p^2)."""
    q = pc.p
    sx = p[0] - pc.x0
    # (sx + t dx)^2 - q^2 - 2 q (py + t dy) = 0
    A = d[0] * d[0]
    B = 2.0 * sx * d[0] - 2.0 * q * d[1]
    C = sx * sx - q * q - 2.0 * q * p[1]
    roots = []
    if A == 0.0:
        if B != 0.0:
            roots = [-C / B]
    else:
        disc = B * B - 4.0 * A * C
        if disc < 0.0:
            return None
        r = math.sqrt(disc)
        qq = -0.5 * (B + math.copysign(r, B))
        roots = [qq / A] + ([C / qq] if qq != 0.0 else [])
    best = None
    for t in roots:
        if t > 1e-12:
            x = p[0] + t * d[0]
            if pc.a - 1e-12 <= x <= pc.b + 1e-12 and (best is None or t < best):
                best = t
    return best


def _above_ray(shape_pts, px, py, dx, dy, tol):
    """Per ray: does any graph point on the travel side lie above the ray line?"""
    gx, gy = shape_pts
    rx = gx[None, :] - px[:, None]
    ry = gy[None, :] - py[:, None]
    side = rx * np.sign(dx)[:, None] > 0
    dist = (dx[:, None] * ry - dy[:, None] * rx) * np.sign(dx)[:, None] / np.hypot(dx, dy)[:, None]
    scale = np.maximum(1.0, np.abs(gy))[None, :]
    return np.any(side & (dist > tol * scale), axis=1)


# ---------------------------------------------------------------------------
# tracing
# ---------------------------------------------------------------------------


def _at_breakpoint(shape: Shape, x: float) -> bool:
    if isinstance(shape, PLShape):
        return bool(np.any(shape.breakpoints == x))
    return any(x == pc.a or x == pc.b for pc in shape.pieces)


def trace_particle(shape: Shape, entry_x: float, tol: float = CLEAR_TOL) -> Trajectory:
    """Drop one particle at ``entry_x`` and follow its reflected ray.

    An entry exactly at a breakpoint is moved right by eps_geom.
    """
    if not -1.0 < entry_x < 1.0:
        raise ValueError(f"entry_x = {entry_x} must lie in (-1, 1)")
    x = float(entry_x)
    if _at_breakpoint(shape, x):
        x += EPS_GEOM
    k = float(shape.derivatives(np.array([x]))[0])
    y = float(shape.values(np.array([x]))[0])
    dx, dy = (float(v) for v in reflected_direction(k))
    if dx == 0.0:
        return Trajectory(x, (x, y), (dx, dy), None)
    pts = _graph_points(shape)
    hit = _above_ray(pts, np.array([x]), np.array([y]), np.array([dx]), np.array([dy]), tol)[0]
    if not hit:
        return Trajectory(x, (x, y), (dx, dy), None)
    # first crossing among all elements
    best = None
    for el in _segments(shape):
        t = _ray_arc((x, y), (dx, dy), el[1]) if el[0] == "arc" else _ray_segment((x, y), (dx, dy), el[1], el[2])
        if t is not None and t > 1e-12 and (best is None or t < best):
            best = t
    if best is None:
        best = 0.0
    return Trajectory(x, (x, y), (dx, dy), (float(x + best * dx), float(y + best * dy)))


def _rays_violating(shape: Shape, xs: np.ndarray, tol: float = CLEAR_TOL) -> np.ndarray:
    k = shape.derivatives(xs)
    y = shape.values(xs)
    dx, dy = reflected_direction(k)
    out = np.zeros(xs.size, dtype=bool)
    moving = dx != 0.0
    pts = _graph_points(shape)
    idx = np.nonzero(moving)[0]
    for start in range(0, idx.size, 4096):
        sl = idx[start : start + 4096]
        out[sl] = _above_ray(pts, xs[sl], y[sl], dx[sl], dy[sl], tol)
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HOLLOWOPT_THREADS", "1")))
    except ValueError:
        return 1


def _chunk_entries(seq: np.random.SeedSequence, size: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(seq)).uniform(-1.0, 1.0, size)


def entry_points(n: int, seed: int = 0) -> np.ndarray:
    """The first n entry abscissas that monte_carlo_resistance draws for this seed."""
    n_chunks = -(-n // CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    return np.concatenate([_chunk_entries(sq, min(CHUNK, n - i * CHUNK)) for i, sq in enumerate(seqs)])


def ray_table(shape: Shape, xs) -> np.ndarray:
    """Rows (entry_x, hit_x, hit_y, dir_x, dir_y, second_hit_flag) per entry point."""
    xs = np.asarray(xs, dtype=float)
    k = shape.derivatives(xs)
    y = shape.values(xs)
    dx, dy = reflected_direction(k)
    flag = _rays_violating(shape, xs).astype(float)
    return np.column_stack([xs, xs, y, dx, dy, flag])


def monte_carlo_resistance(shape: Shape, n: int, seed: int = 0, threads: int | None = None) -> FlowResult:
    """Estimate the resistance from n particles with uniform entry points.

    Each particle transfers vertical momentum 2 / (1 + u'^2) in units where
    the flat bottom gives 2; the estimate is half the sample mean, matching
    the normalization F(flat) = 1.  Entry points come from independent
    PCG64 streams (one per chunk of 65536 particles), so the result does not
    depend on the worker count.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    n_chunks = -(-n // CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK, n - i * CHUNK) for i in range(n_chunks)]
    bps = (
        shape.breakpoints
        if isinstance(shape, PLShape)
        else np.array(sorted({pc.a for pc in shape.pieces} | {1.0}))
    )

    def run(i):
        xs = _chunk_entries(seqs[i], sizes[i])
        skip = np.isin(xs, bps)
        xs = xs[~skip]
        k = shape.derivatives(xs)
        transfer = 2.0 / (1.0 + k * k)
        bad = _rays_violating(shape, xs)
        return transfer, xs[bad], int(skip.sum())

    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    samples = 0.5 * np.concatenate([p[0] for p in parts])
    bad_x = np.concatenate([p[1] for p in parts])
    skipped = sum(p[2] for p in parts)
    m = samples.size
    est = float(np.mean(samples)) if m else math.nan
    se = float(np.std(samples, ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    violations = []
    for x in bad_x[:MAX_RECORDED]:
        tr = trace_particle(shape, float(x))
        violations.append({"entry_x": float(x), "second_hit_point": tr.second_hit})
    return FlowResult(m, est, se, violations, seed, int(bad_x.size), skipped)


def _stratified_entries(shape: Shape, n_rays: int) -> np.ndarray:
    """Stratified points on every edge or arc plus points next to both ends."""
    if isinstance(shape, PLShape):
        bounds = list(zip(shape.breakpoints[:-1], shape.breakpoints[1:]))
    else:
        bounds = [(pc.a, pc.b) for pc in shape.pieces]
    xs = []
    for a, b in bounds:
        m = max(2, int(round(n_rays * (b - a) / 2.0)))
        t = (np.arange(m) + 0.5) / m
        t = np.concatenate([[1e-9], t, [1.0 - 1e-9]])
        xs.append(a + (b - a) * t)
    return np.concatenate(xs)


def empirical_sic_scan(shape: Shape, n_rays: int, max_traced: int = 20) -> list:
    """All stratified entry points whose reflected ray hits the graph again.

    Returns dicts with entry_x and second_hit_point; the hit point is only
    computed for the first ``max_traced`` violators.
    """
    xs = _stratified_entries(shape, n_rays)
    bad = xs[_rays_violating(shape, xs)]
    out = []
    for i, x in enumerate(bad):
        hit = trace_particle(shape, float(x)).second_hit if i < max_traced else None
        out.append({"entry_x": float(x), "second_hit_point": hit})
    return out
