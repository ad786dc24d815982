"""Resistance in dimension d.

Two things live here.  The radial minimal values m_d = F_d(u0), which fall
from about 0.6435 at d = 1 towards 1/2 because the volume of the unit ball
concentrates near its boundary sphere where u0 is steep.  And the lattice
construction for d >= 3: tile a domain with delta-cubes, put a near-optimal
hollow in every cube and a flat bottom on the leftover, and the resistance
is the volume-weighted mean of the pieces.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .resistance import resistance_radial
from .shapes import RadialShape, make_u0

_COUNT_RTOL = 1e-12


def m_d(d: int) -> float:
    """Radial resistance of u0 in the unit ball of R^d."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be an integer >= 1, got {d!r}")
    return resistance_radial(RadialShape(int(d), make_u0())).value


def md_table(max_d: int) -> list:
    """Rows (d, m_d) for d = 1..max_d."""
    return [(d, m_d(d)) for d in range(1, max_d + 1)]


def ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


@dataclass(frozen=True)
class Domain:
    """A ball of the given radius centered at 0, or the box [0, L_1] x ... x [0, L_d]."""

    kind: str
    radius: float = 1.0
    sides: tuple = ()

    @classmethod
    def ball(cls, radius: float) -> "Domain":
        if not radius > 0:
            raise ValueError(f"radius must be positive, got {radius!r}")
        return cls("ball", radius=float(radius))

    @classmethod
    def box(cls, sides) -> "Domain":
        sides = tuple(float(s) for s in sides)
        if not sides or any(not s > 0 for s in sides):
            raise ValueError("box sides must be positive")
        return cls("box", sides=sides)

    @classmethod
    def parse(cls, text: str, d: int) -> "Domain":
        """'ball:R' or 'box:L' (cube of side L) or 'box:L1,L2,...'."""
        kind, _, arg = text.partition(":")
        try:
            if kind == "ball":
                return cls.ball(float(arg or 1.0))
            if kind == "box":
                vals = [float(v) for v in arg.split(",")] if arg else [1.0]
                if len(vals) == 1:
                    vals = vals * d
                if len(vals) != d:
                    raise ValueError(f"box needs 1 or {d} side lengths, got {len(vals)}")
                return cls.box(vals)
        except ValueError as exc:
            raise ValueError(f"bad domain {text!r}: {exc}") from None
        raise ValueError(f"bad domain {text!r}; expected ball:R or box:L[,L...]")

    def volume(self, d: int) -> float:
        if self.kind == "ball":
            return ball_volume(d, self.radius)
        return math.prod(self.sides)

    def __str__(self):
        if self.kind == "ball":
            return f"ball:{self.radius!r}"
        return "box:" + ",".join(repr(s) for s in self.sides)


@dataclass(frozen=True)
class LatticeCover:
    domain: Domain
    d: int
    delta: float
    n_cubes: int
    covered_volume: float
    residual_fraction: float

    def to_dict(self) -> dict:
        return {
            "domain": str(self.domain),
            "d": self.d,
            "delta": self.delta,
            "n_cubes": self.n_cubes,
            "covered_volume": self.covered_volume,
            "residual_fraction": self.residual_fraction,
        }


def _ball_cube_count(radius: float, d: int, delta: float) -> int:
    """Closed cubes of (delta Z)^d inside the closed ball, by farthest corner.

    Along one axis the cube [i delta, (i+1) delta] reaches squared distance
    delta^2 max(i^2, (i+1)^2) from 0; a cube is inside when these add up to
    at most radius^2.  The sum over axes is counted by convolution.
    """
    limit = (radius / delta) ** 2 * (1.0 + _COUNT_RTOL)
    n = int(math.floor(radius / delta)) + 1
    axis = Counter()
    for i in range(-n, n):
        m = max(i * i, (i + 1) * (i + 1))
        if m <= limit:
            axis[m] += 1
    dist = Counter({0: 1})
    for _ in range(d):
        nxt = Counter()
        for s, c in dist.items():
            for m, k in axis.items():
                if s + m <= limit:
                    nxt[s + m] += c * k
        dist = nxt
    return sum(dist.values())


def count_lattice_cubes(domain: Domain, d: int, delta: float) -> LatticeCover:
    """Cubes of the lattice (delta Z)^d contained in the domain."""
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d!r}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    d = int(d)
    if domain.kind == "ball":
        n = _ball_cube_count(domain.radius, d, delta)
    else:
        if len(domain.sides) != d:
            raise ValueError(f"box has {len(domain.sides)} sides but d = {d}")
        n = math.prod(int(math.floor(s / delta * (1.0 + _COUNT_RTOL))) for s in domain.sides)
    covered = n * delta**d
    vol = domain.volume(d)
    residual = max(0.0, 1.0 - covered / vol)
    return LatticeCover(domain, d, float(delta), n, covered, residual)


def appendix_bound(cover: LatticeCover, inner_resistance: float) -> float:
    """Resistance of the tiled hollow: cubes at inner_resistance, leftover flat (1)."""
    if not 0.5 < inner_resistance <= 1.0:
        raise ValueError(f"inner_resistance must lie in (1/2, 1], got {inner_resistance!r}")
    r = cover.residual_fraction
    return (1.0 - r) * inner_resistance + r


def product_lift_resistance(base_resistance: float) -> float:
    """Resistance of u(x) = u1(x1) on a product domain: the base value.

    The integrand 1/(1 + |grad u|^2) does not depend on the second factor,
    so averaging over the product is averaging over the first factor.
    """
    if not 0.5 < base_resistance <= 1.0:
        raise ValueError(f"base_resistance must lie in (1/2, 1], got {base_resistance!r}")
    return float(base_resistance)
