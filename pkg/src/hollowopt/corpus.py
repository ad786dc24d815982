"""Seeded random shapes for property tests and benchmarks.

All abscissas, slopes and jumps are dyadic rationals with few significant
bits, so ordinates built by summation are exact in binary floating point.
That keeps identities such as the edge-sequence round trip exact.
"""

from __future__ import annotations

import numpy as np

from .shapes import PLShape
from .sic import check_sic

_X_BITS = 6
_SLOPE_BITS = 8
_JUMP_BITS = 10


def _dyadic(rng, lo: float, hi: float, bits: int, size=None):
    scale = 2.0**bits
    return rng.integers(int(np.ceil(lo * scale)), int(np.floor(hi * scale)) + 1, size=size) / scale


def _partition(rng, length: float, n: int) -> np.ndarray:
    """n positive dyadic widths summing exactly to ``length``."""
    units = int(length * 2**_X_BITS)
    cuts = np.sort(rng.choice(np.arange(1, units), size=n - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [units]])) / 2.0**_X_BITS


def _half_profile(rng, n_edges: int, max_slope: float, jump_prob: float, max_jump: float):
    """Breakpoints, left and right ordinates on [-1, 0] (boundary value 0 at -1)."""
    widths = _partition(rng, 1.0, n_edges)
    x = np.concatenate([[-1.0], -1.0 + np.cumsum(widths)])
    x[-1] = 0.0
    k = _dyadic(rng, -max_slope, max_slope, _SLOPE_BITS, n_edges)
    w = np.where(rng.random(n_edges + 1) < jump_prob, _dyadic(rng, -max_jump, max_jump, _JUMP_BITS, n_edges + 1), 0.0)
    w[0] = w[-1] = 0.0
    left = np.empty(n_edges + 1)
    right = np.empty(n_edges + 1)
    left[0] = right[0] = 0.0
    for i in range(1, n_edges + 1):
        left[i] = right[i - 1] + k[i - 1] * widths[i - 1]
        right[i] = left[i] + w[i]
    # push the interior below zero by a dyadic offset at the rim
    top = max(np.max(left[1:]), np.max(right[:-1][1:], initial=-np.inf), right[0])
    drop = top + _dyadic(rng, 1 / 64, 0.25, _JUMP_BITS)
    left[1:] -= drop
    right[:] -= drop
    return x, left, right


def random_even_shape(rng, n_half: int | None = None, max_slope: float = 0.9, jump_prob: float = 0.3,
                      max_jump: float = 0.125) -> PLShape:
    """Even PL shape with dyadic data; not necessarily admissible."""
    n_half = n_half or int(rng.integers(1, 7))
    x, left, right = _half_profile(rng, n_half, max_slope, jump_prob, max_jump)
    return PLShape.even_from_half(x, left, right)


def random_shape(rng, n_edges: int | None = None, max_slope: float = 0.95, jump_prob: float = 0.3,
                 max_jump: float = 0.25) -> PLShape:
    """General (non-even) PL shape with zero boundary values and negative interior."""
    n_edges = n_edges or int(rng.integers(1, 9))
    widths = _partition(rng, 2.0, n_edges)
    x = np.concatenate([[-1.0], -1.0 + np.cumsum(widths)])
    x[-1] = 1.0
    k = _dyadic(rng, -max_slope, max_slope, _SLOPE_BITS, n_edges)
    w = np.where(rng.random(n_edges + 1) < jump_prob, _dyadic(rng, -max_jump, max_jump, _JUMP_BITS, n_edges + 1), 0.0)
    left = np.empty(n_edges + 1)
    right = np.empty(n_edges + 1)
    left[0], right[0] = 0.0, w[0]
    for i in range(1, n_edges + 1):
        left[i] = right[i - 1] + k[i - 1] * widths[i - 1]
        right[i] = left[i] + w[i]
    interior = np.concatenate([right[:-1], left[1:]])
    drop = np.max(interior) + _dyadic(rng, 1 / 64, 0.25, _JUMP_BITS)
    left[1:] -= drop
    right[:-1] -= drop
    right[-1] = 0.0
    return PLShape(x, left, right)


def even_admissible_corpus(n: int, seed: int = 0, max_tries: int = 1000) -> list:
    """``n`` random even admissible PL shapes with at least one sloped edge."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        for _ in range(max_tries):
            s = random_even_shape(rng, max_slope=float(rng.choice([0.5, 0.7, 0.9])))
            # all-flat profiles rearrange to u = 0, which is not a hollow
            if np.any(s.slopes != 0.0) and check_sic(s).admissible:
                out.append(s)
                break
        else:
            raise RuntimeError("could not draw an admissible shape")
    return out


def mixed_corpus(n: int, seed: int = 0) -> list:
    """``n`` random PL shapes with jumps; a mix of admissible and not."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        max_slope = float(rng.choice([0.3, 0.6, 0.95]))
        jump_prob = float(rng.choice([0.0, 0.2, 0.5]))
        if rng.random() < 0.5:
            out.append(random_even_shape(rng, max_slope=max_slope, jump_prob=jump_prob, max_jump=0.0625))
        else:
            out.append(random_shape(rng, max_slope=max_slope, jump_prob=jump_prob, max_jump=0.0625))
    return out


def monotone_test_profile(rng, x0: float = -1.0, n_edges: int | None = None):
    """Non-decreasing PL profile on [a, b] that clears the focus (x0, 0).

    Returns (shape, a, b): ``shape`` lives on [-1, 1] and is constant
    outside [a, b].  Slopes are chosen from b leftwards, each a random
    fraction of the steepest slope for which every reflected ray from the
    edge still passes above the focus.
    """
    n_edges = n_edges or int(rng.integers(1, 9))
    b = float(rng.uniform(0.5, 1.0))
    a = float(rng.uniform(0.5 * (x0 + b), b - 0.2))
    a = max(a, -1.0 + 1e-3)
    yb = -float(rng.uniform(0.0, 0.8))
    xs = np.sort(rng.uniform(a, b, n_edges - 1))
    nodes = np.concatenate([[a], xs, [b]])
    ys = np.empty(nodes.size)
    ys[-1] = yb
    for j in range(nodes.size - 1, 0, -1):
        h = nodes[j] - nodes[j - 1]
        arm = nodes[j - 1] - x0
        y = ys[j]
        kmax = (y + np.sqrt(y * y + arm * (arm + 2.0 * h))) / (arm + 2.0 * h)
        k = kmax * float(rng.uniform(0.0, 0.999))
        ys[j - 1] = y - k * h
    bp = [-1.0, *nodes, 1.0] if b < 1.0 else [-1.0, *nodes]
    vals = [ys[0], *ys, ys[-1]] if b < 1.0 else [ys[0], *ys]
    if a <= -1.0:
        bp, vals = bp[1:], vals[1:]
    return PLShape.from_points(bp, vals), a, b
